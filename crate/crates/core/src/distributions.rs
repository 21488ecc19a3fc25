//! Univariate Gaussian, Student-t (noncentral, location-scale), and Cauchy
//! densities with maximum-likelihood fitting.
//!
//! The t family is fitted by EM (iteratively reweighted moments) with the
//! degrees of freedom held fixed by the caller: keeping one `nu` across all
//! class models guarantees every class-conditional tail decays with the same
//! leading power, which is what makes the downstream posteriors conservative.

use statrs::function::gamma::ln_gamma;

use crate::{Error, Result};

/// Convergence tolerance on the log-likelihood change per EM iteration.
const EM_TOL: f64 = 1e-10;
/// EM iteration cap; exceeding it is reported, not fatal.
const EM_MAX_ITERS: usize = 500;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GaussianParams {
    pub mu: f64,
    /// Variance, strictly positive.
    pub sigma2: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StudentTParams {
    pub mu: f64,
    /// Scale (not variance), strictly positive.
    pub scale: f64,
    /// Degrees of freedom; `nu = 1` is the Cauchy distribution.
    pub nu: f64,
}

/// A fitted class-conditional or domain density of either family.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Density {
    Gaussian(GaussianParams),
    StudentT(StudentTParams),
}

impl Density {
    pub fn ln_pdf(&self, x: f64) -> f64 {
        match self {
            Density::Gaussian(p) => gaussian_ln_pdf(p, x),
            Density::StudentT(p) => student_t_ln_pdf(p, x),
        }
    }

    pub fn pdf(&self, x: f64) -> f64 {
        self.ln_pdf(x).exp()
    }
}

pub fn gaussian_pdf(p: &GaussianParams, x: f64) -> f64 {
    gaussian_ln_pdf(p, x).exp()
}

pub fn gaussian_ln_pdf(p: &GaussianParams, x: f64) -> f64 {
    debug_assert!(p.sigma2 > 0.0);
    let d = x - p.mu;
    -0.5 * (2.0 * std::f64::consts::PI * p.sigma2).ln() - d * d / (2.0 * p.sigma2)
}

pub fn student_t_pdf(p: &StudentTParams, x: f64) -> f64 {
    student_t_ln_pdf(p, x).exp()
}

pub fn student_t_ln_pdf(p: &StudentTParams, x: f64) -> f64 {
    debug_assert!(p.scale > 0.0 && p.nu > 0.0);
    let r = (x - p.mu) / p.scale;
    ln_gamma((p.nu + 1.0) / 2.0)
        - ln_gamma(p.nu / 2.0)
        - 0.5 * (p.nu * std::f64::consts::PI).ln()
        - p.scale.ln()
        - 0.5 * (p.nu + 1.0) * (r * r / p.nu).ln_1p()
}

/// Gaussian MLE: sample mean and biased (1/n) variance.
pub fn fit_gaussian_mle(samples: &[f64]) -> Result<GaussianParams> {
    if samples.len() < 2 {
        return Err(Error::TooFewSamples {
            required: 2,
            got: samples.len(),
        });
    }
    let n = samples.len() as f64;
    let mu = samples.iter().sum::<f64>() / n;
    let sigma2 = samples.iter().map(|x| (x - mu) * (x - mu)).sum::<f64>() / n;
    if sigma2 <= 0.0 {
        return Err(Error::DegenerateVariance);
    }
    Ok(GaussianParams { mu, sigma2 })
}

/// Result of an EM fit of the t family.
#[derive(Debug, Clone)]
pub struct TFit {
    pub params: StudentTParams,
    /// Joint log-likelihood per iteration, starting at the initial guess.
    /// Non-decreasing by construction of EM.
    pub log_likelihood_trace: Vec<f64>,
    pub iterations: usize,
    /// False when the iteration cap was reached before the tolerance; the
    /// best iterate is still returned.
    pub converged: bool,
}

impl TFit {
    pub fn log_likelihood(&self) -> f64 {
        *self
            .log_likelihood_trace
            .last()
            .expect("trace holds at least the initial likelihood")
    }
}

fn t_log_likelihood(params: &StudentTParams, samples: &[f64]) -> f64 {
    samples.iter().map(|&x| student_t_ln_pdf(params, x)).sum()
}

fn median(samples: &[f64]) -> f64 {
    let mut v = samples.to_vec();
    v.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

/// Location-scale Student-t fit by EM with `nu` fixed by the caller.
///
/// Each iteration downweights sample `i` by `(nu+1)/(nu + r_i^2)` with
/// standardized residual `r_i`, then recomputes weighted location and scale.
pub fn fit_student_t(samples: &[f64], nu: f64) -> Result<TFit> {
    if samples.len() < 3 {
        return Err(Error::TooFewSamples {
            required: 3,
            got: samples.len(),
        });
    }
    if !(nu > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "degrees of freedom must be positive, got {nu}"
        )));
    }
    let n = samples.len() as f64;
    let mut mu = median(samples);
    let mut scale2 = samples.iter().map(|x| (x - mu) * (x - mu)).sum::<f64>() / n;
    if scale2 <= 0.0 {
        return Err(Error::DegenerateVariance);
    }

    let mut params = StudentTParams {
        mu,
        scale: scale2.sqrt(),
        nu,
    };
    let mut trace = vec![t_log_likelihood(&params, samples)];
    let mut converged = false;
    let mut iterations = 0;

    for iter in 1..=EM_MAX_ITERS {
        iterations = iter;
        let weights: Vec<f64> = samples
            .iter()
            .map(|&x| {
                let r2 = (x - mu) * (x - mu) / scale2;
                (nu + 1.0) / (nu + r2)
            })
            .collect();
        let wsum: f64 = weights.iter().sum();
        mu = samples
            .iter()
            .zip(&weights)
            .map(|(x, w)| w * x)
            .sum::<f64>()
            / wsum;
        scale2 = samples
            .iter()
            .zip(&weights)
            .map(|(x, w)| w * (x - mu) * (x - mu))
            .sum::<f64>()
            / n;
        if scale2 <= 0.0 {
            return Err(Error::DegenerateVariance);
        }
        params = StudentTParams {
            mu,
            scale: scale2.sqrt(),
            nu,
        };
        let ll = t_log_likelihood(&params, samples);
        debug_assert!(
            ll >= trace.last().unwrap() - 1e-9,
            "EM log-likelihood decreased: {} -> {ll}",
            trace.last().unwrap()
        );
        let delta = ll - trace.last().unwrap();
        trace.push(ll);
        if delta.abs() < EM_TOL {
            converged = true;
            break;
        }
    }

    Ok(TFit {
        params,
        log_likelihood_trace: trace,
        iterations,
        converged,
    })
}

/// Per-group Gaussian locations with one variance pooled over all groups
/// (the LDA convention). Biased (1/n) estimator throughout.
pub fn fit_gaussian_pooled(groups: &[&[f64]]) -> Result<(Vec<f64>, f64)> {
    let mut mus = Vec::with_capacity(groups.len());
    let mut rss = 0.0;
    let mut total = 0usize;
    for (idx, g) in groups.iter().enumerate() {
        if g.len() < 2 {
            return Err(Error::MissingClass(idx));
        }
        let mu = g.iter().sum::<f64>() / g.len() as f64;
        rss += g.iter().map(|x| (x - mu) * (x - mu)).sum::<f64>();
        total += g.len();
        mus.push(mu);
    }
    let sigma2 = rss / total as f64;
    if sigma2 <= 0.0 {
        return Err(Error::DegenerateVariance);
    }
    Ok((mus, sigma2))
}

/// Per-group t locations with one scale pooled over all groups, fitted by the
/// same EM scheme as [`fit_student_t`].
pub fn fit_student_t_pooled(groups: &[&[f64]], nu: f64) -> Result<(Vec<f64>, f64, bool)> {
    if !(nu > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "degrees of freedom must be positive, got {nu}"
        )));
    }
    let mut mus = Vec::with_capacity(groups.len());
    let mut total = 0usize;
    let mut scale2 = 0.0;
    for (idx, g) in groups.iter().enumerate() {
        if g.len() < 2 {
            return Err(Error::MissingClass(idx));
        }
        let mu = median(g);
        scale2 += g.iter().map(|x| (x - mu) * (x - mu)).sum::<f64>();
        total += g.len();
        mus.push(mu);
    }
    scale2 /= total as f64;
    if scale2 <= 0.0 {
        return Err(Error::DegenerateVariance);
    }

    let pooled_ll = |mus: &[f64], scale2: f64| -> f64 {
        groups
            .iter()
            .zip(mus)
            .map(|(g, &mu)| {
                let p = StudentTParams {
                    mu,
                    scale: scale2.sqrt(),
                    nu,
                };
                t_log_likelihood(&p, g)
            })
            .sum()
    };

    let mut prev_ll = pooled_ll(&mus, scale2);
    let mut converged = false;
    for _ in 0..EM_MAX_ITERS {
        let mut rss = 0.0;
        for (g, mu) in groups.iter().zip(mus.iter_mut()) {
            let weights: Vec<f64> = g
                .iter()
                .map(|&x| {
                    let r2 = (x - *mu) * (x - *mu) / scale2;
                    (nu + 1.0) / (nu + r2)
                })
                .collect();
            let wsum: f64 = weights.iter().sum();
            *mu = g.iter().zip(&weights).map(|(x, w)| w * x).sum::<f64>() / wsum;
            rss += g
                .iter()
                .zip(&weights)
                .map(|(x, w)| w * (x - *mu) * (x - *mu))
                .sum::<f64>();
        }
        scale2 = rss / total as f64;
        if scale2 <= 0.0 {
            return Err(Error::DegenerateVariance);
        }
        let ll = pooled_ll(&mus, scale2);
        debug_assert!(ll >= prev_ll - 1e-9, "pooled EM decreased: {prev_ll} -> {ll}");
        let delta = ll - prev_ll;
        prev_ll = ll;
        if delta.abs() < EM_TOL {
            converged = true;
            break;
        }
    }
    Ok((mus, scale2.sqrt(), converged))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numeric::RngState;
    use statrs::distribution::{Continuous, Normal, StudentsT};

    /// Adaptive Simpson quadrature, used as an independent integration oracle.
    fn adaptive_simpson<F: Fn(f64) -> f64 + Copy>(f: F, a: f64, b: f64, tol: f64) -> f64 {
        fn simpson<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> f64 {
            let m = 0.5 * (a + b);
            (b - a) / 6.0 * (f(a) + 4.0 * f(m) + f(b))
        }
        fn recurse<F: Fn(f64) -> f64>(
            f: &F,
            a: f64,
            b: f64,
            whole: f64,
            tol: f64,
            depth: u32,
        ) -> f64 {
            let m = 0.5 * (a + b);
            let left = simpson(f, a, m);
            let right = simpson(f, m, b);
            if depth == 0 || (left + right - whole).abs() < 15.0 * tol {
                left + right + (left + right - whole) / 15.0
            } else {
                recurse(f, a, m, left, tol / 2.0, depth - 1)
                    + recurse(f, m, b, right, tol / 2.0, depth - 1)
            }
        }
        recurse(&f, a, b, simpson(&f, a, b), tol, 40)
    }

    #[test]
    fn gaussian_pdf_standard_normal_mode() {
        let p = GaussianParams { mu: 0.0, sigma2: 1.0 };
        assert!((gaussian_pdf(&p, 0.0) - 0.3989422804).abs() < 1e-9);
    }

    #[test]
    fn gaussian_pdf_symmetry() {
        let p = GaussianParams { mu: 0.0, sigma2: 1.0 };
        assert_eq!(gaussian_pdf(&p, 1.0), gaussian_pdf(&p, -1.0));
    }

    #[test]
    fn gaussian_pdf_closed_form_case() {
        // mu=1.1, sigma2=0.25, x=2.1: exponent -(1.0)^2/0.5 = -2, norm 1/sqrt(0.5*pi)
        let p = GaussianParams { mu: 1.1, sigma2: 0.25 };
        let expected = (-2.0f64).exp() / (0.5 * std::f64::consts::PI).sqrt();
        assert!((gaussian_pdf(&p, 2.1) - expected).abs() < 1e-15);
    }

    #[test]
    fn gaussian_pdf_matches_statrs() {
        let p = GaussianParams { mu: -0.7, sigma2: 2.3 };
        let reference = Normal::new(-0.7, 2.3f64.sqrt()).unwrap();
        for i in -40..=40 {
            let x = i as f64 * 0.25;
            assert!((gaussian_pdf(&p, x) - reference.pdf(x)).abs() < 1e-13);
        }
    }

    #[test]
    fn student_t_pdf_cauchy_mode() {
        let p = StudentTParams { mu: 0.0, scale: 1.0, nu: 1.0 };
        assert!((student_t_pdf(&p, 0.0) - 1.0 / std::f64::consts::PI).abs() < 1e-14);
    }

    #[test]
    fn student_t_pdf_cauchy_tail_closed_form() {
        let p = StudentTParams { mu: 0.0, scale: 1.0, nu: 1.0 };
        let expected = 1.0 / (101.0 * std::f64::consts::PI);
        assert!((student_t_pdf(&p, 10.0) - expected).abs() < 1e-15);
    }

    #[test]
    fn student_t_pdf_symmetry() {
        let p = StudentTParams { mu: 0.4, scale: 2.0, nu: 3.5 };
        for d in [0.1, 1.0, 7.3] {
            let lhs = student_t_pdf(&p, p.mu + d);
            let rhs = student_t_pdf(&p, p.mu - d);
            assert!((lhs - rhs).abs() < 1e-15);
        }
    }

    #[test]
    fn student_t_pdf_matches_statrs() {
        for nu in [1.0, 2.0, 5.0, 30.0] {
            let p = StudentTParams { mu: 0.3, scale: 1.7, nu };
            let reference = StudentsT::new(0.3, 1.7, nu).unwrap();
            for i in -20..=20 {
                let x = i as f64 * 0.5;
                assert!(
                    (student_t_pdf(&p, x) - reference.pdf(x)).abs() < 1e-12,
                    "nu={nu} x={x}"
                );
            }
        }
    }

    #[test]
    fn pdfs_integrate_to_one() {
        // Quadrature over +/-50 scales plus the analytic tail mass.
        let g = GaussianParams { mu: 0.3, sigma2: 2.25 };
        let got = adaptive_simpson(|x| gaussian_pdf(&g, x), 0.3 - 75.0, 0.3 + 75.0, 1e-10);
        // Gaussian tail beyond 50 sigma is below 1e-300; nothing to add.
        assert!((got - 1.0).abs() < 1e-6, "gaussian integral {got}");

        let t = StudentTParams { mu: 0.3, scale: 1.5, nu: 1.0 };
        let got = adaptive_simpson(|x| student_t_pdf(&t, x), 0.3 - 75.0, 0.3 + 75.0, 1e-10);
        // Cauchy two-sided tail mass beyond 50 scales, exactly 1 - 2*atan(50)/pi.
        let tail = 1.0 - 2.0 * 50f64.atan() / std::f64::consts::PI;
        assert!((got + tail - 1.0).abs() < 1e-6, "t integral {got} tail {tail}");
    }

    #[test]
    fn tail_ratio_diverges() {
        // At 20 scales from the center, the t density dominates the Gaussian
        // with matched location and scale by far more than 1e6.
        let sigma = 1.5;
        let g = GaussianParams { mu: 0.3, sigma2: sigma * sigma };
        let t = StudentTParams { mu: 0.3, scale: sigma, nu: 1.0 };
        let x = 0.3 + 20.0 * sigma;
        let ratio = student_t_ln_pdf(&t, x) - gaussian_ln_pdf(&g, x);
        assert!(ratio > (1e6f64).ln());
    }

    #[test]
    fn fit_gaussian_two_points() {
        let p = fit_gaussian_mle(&[-1.0, 1.0]).unwrap();
        assert_eq!(p.mu, 0.0);
        assert_eq!(p.sigma2, 1.0);
    }

    #[test]
    fn fit_gaussian_degenerate() {
        assert!(matches!(
            fit_gaussian_mle(&[2.5, 2.5, 2.5]),
            Err(Error::DegenerateVariance)
        ));
        assert!(matches!(
            fit_gaussian_mle(&[1.0]),
            Err(Error::TooFewSamples { .. })
        ));
    }

    #[test]
    fn fit_gaussian_monte_carlo() {
        let mut rng = RngState::from_seed(7);
        let samples: Vec<f64> = (0..10_000).map(|_| rng.normal(2.0, 2.0)).collect();
        let p = fit_gaussian_mle(&samples).unwrap();
        assert!((p.mu - 2.0).abs() < 0.1);
        assert!((p.sigma2 - 4.0).abs() < 0.2);
    }

    #[test]
    fn fit_student_t_symmetric_location() {
        let fit = fit_student_t(&[-3.0, 0.0, 3.0], 1.0).unwrap();
        assert!(fit.params.mu.abs() < 1e-12);
    }

    #[test]
    fn fit_student_t_cauchy_monte_carlo() {
        let mut rng = RngState::from_seed(7);
        let samples: Vec<f64> = (0..10_000).map(|_| rng.cauchy(0.0, 1.0)).collect();
        let fit = fit_student_t(&samples, 1.0).unwrap();
        assert!(fit.params.mu.abs() < 0.1, "mu {}", fit.params.mu);
        assert!(
            (fit.params.scale - 1.0).abs() < 0.1,
            "scale {}",
            fit.params.scale
        );
        assert!(fit.converged);
    }

    #[test]
    fn fit_student_t_monotone_likelihood() {
        let mut rng = RngState::from_seed(11);
        let samples: Vec<f64> = (0..500).map(|_| rng.normal(1.0, 2.0)).collect();
        let fit = fit_student_t(&samples, 1.0).unwrap();
        for w in fit.log_likelihood_trace.windows(2) {
            assert!(w[1] >= w[0] - 1e-9, "trace decreased: {} -> {}", w[0], w[1]);
        }
    }

    #[test]
    fn fit_student_t_outlier_robustness() {
        // One far outlier appended to 100 normal draws moves the t location
        // less than it moves the Gaussian mean.
        let mut rng = RngState::from_seed(3);
        let clean: Vec<f64> = (0..100).map(|_| rng.normal(0.0, 1.0)).collect();
        let mut dirty = clean.clone();
        dirty.push(80.0);

        let g_clean = fit_gaussian_mle(&clean).unwrap();
        let g_dirty = fit_gaussian_mle(&dirty).unwrap();
        let t_clean = fit_student_t(&clean, 1.0).unwrap();
        let t_dirty = fit_student_t(&dirty, 1.0).unwrap();

        let g_shift = (g_dirty.mu - g_clean.mu).abs();
        let t_shift = (t_dirty.params.mu - t_clean.params.mu).abs();
        assert!(
            t_shift < g_shift,
            "t shifted {t_shift}, gaussian shifted {g_shift}"
        );
    }

    #[test]
    fn pooled_gaussian_matches_hand_computation() {
        let (mus, sigma2) = fit_gaussian_pooled(&[&[0.0, 2.0], &[10.0, 14.0]]).unwrap();
        assert_eq!(mus, vec![1.0, 12.0]);
        // Residuals: (1,1) and (2,2) squared -> (1+1+4+4)/4
        assert!((sigma2 - 2.5).abs() < 1e-15);
    }

    #[test]
    fn pooled_t_shares_scale_across_groups() {
        let mut rng = RngState::from_seed(5);
        let a: Vec<f64> = (0..400).map(|_| rng.cauchy(-1.5, 0.5)).collect();
        let b: Vec<f64> = (0..400).map(|_| rng.cauchy(1.5, 0.5)).collect();
        let (mus, scale, converged) = fit_student_t_pooled(&[&a, &b], 1.0).unwrap();
        assert!(converged);
        assert!((mus[0] + 1.5).abs() < 0.15, "mu0 {}", mus[0]);
        assert!((mus[1] - 1.5).abs() < 0.15, "mu1 {}", mus[1]);
        assert!((scale - 0.5).abs() < 0.1, "scale {scale}");
    }
}
