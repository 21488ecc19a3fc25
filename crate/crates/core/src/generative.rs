//! Bayes-rule generative classifier (LDA-style) on 1-D features with
//! pluggable per-class conditional densities.
//!
//! Posteriors are prior-weighted normalized likelihoods. All likelihood
//! accumulation happens in the log domain with max subtraction: the tail
//! probes evaluate at |x| up to 1e6, where linear-domain densities underflow
//! long before the posterior itself stops being well defined.

use crate::data::Dataset;
use crate::distributions::{
    fit_gaussian_mle, fit_gaussian_pooled, fit_student_t, fit_student_t_pooled, Density,
    GaussianParams, StudentTParams,
};
use crate::{Error, Result};

/// Which class-conditional family a classifier uses. One family (and for the
/// t family, one `nu`) is shared across every class so all tails decay at the
/// same polynomial order.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Family {
    Gaussian,
    /// Student-t with fixed degrees of freedom; `nu = 1` (Cauchy) matches the
    /// polynomial order used by the softRmax construction.
    StudentT { nu: f64 },
}

#[derive(Debug, Clone)]
pub struct GenerativeClassifier {
    pub class_models: Vec<Density>,
    /// Class priors; sum to 1 within 1e-12.
    pub priors: Vec<f64>,
}

/// Fits per-class densities and class-frequency priors on 1-D features.
///
/// With `pooled_variance` (the LDA convention and the default elsewhere in
/// the crate) one scale is estimated from pooled residuals; otherwise each
/// class keeps its own.
pub fn fit_generative(data: &Dataset, family: Family, pooled_variance: bool) -> Result<GenerativeClassifier> {
    if data.dim() != 1 {
        return Err(Error::ShapeMismatch {
            context: "generative classifier expects 1-D features",
            left: (data.len(), data.dim()),
            right: (data.len(), 1),
        });
    }
    let indices = data.class_indices();
    let groups: Vec<Vec<f64>> = indices
        .iter()
        .map(|ids| ids.iter().map(|&i| data.features.get(i, 0)).collect())
        .collect();
    for (c, g) in groups.iter().enumerate() {
        if g.len() < 2 {
            return Err(Error::MissingClass(c));
        }
    }
    let group_refs: Vec<&[f64]> = groups.iter().map(Vec::as_slice).collect();

    let class_models: Vec<Density> = match (family, pooled_variance) {
        (Family::Gaussian, true) => {
            let (mus, sigma2) = fit_gaussian_pooled(&group_refs)?;
            mus.into_iter()
                .map(|mu| Density::Gaussian(GaussianParams { mu, sigma2 }))
                .collect()
        }
        (Family::Gaussian, false) => group_refs
            .iter()
            .map(|g| fit_gaussian_mle(g).map(Density::Gaussian))
            .collect::<Result<_>>()?,
        (Family::StudentT { nu }, true) => {
            let (mus, scale, _) = fit_student_t_pooled(&group_refs, nu)?;
            mus.into_iter()
                .map(|mu| Density::StudentT(StudentTParams { mu, scale, nu }))
                .collect()
        }
        (Family::StudentT { nu }, false) => group_refs
            .iter()
            .map(|g| fit_student_t(g, nu).map(|fit| Density::StudentT(fit.params)))
            .collect::<Result<_>>()?,
    };

    let n = data.len() as f64;
    let priors: Vec<f64> = groups.iter().map(|g| g.len() as f64 / n).collect();
    debug_assert!((priors.iter().sum::<f64>() - 1.0).abs() < 1e-12);

    Ok(GenerativeClassifier { class_models, priors })
}

impl GenerativeClassifier {
    pub fn num_classes(&self) -> usize {
        self.class_models.len()
    }

    /// Posterior over classes at `x`: log-prior plus log-likelihood,
    /// max-subtracted and normalized. Never underflows to an all-zero vector.
    pub fn posterior(&self, x: f64) -> Vec<f64> {
        let log_joint: Vec<f64> = self
            .class_models
            .iter()
            .zip(&self.priors)
            .map(|(density, prior)| prior.ln() + density.ln_pdf(x))
            .collect();
        let max = log_joint.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let mut out: Vec<f64> = log_joint.iter().map(|v| (v - max).exp()).collect();
        let sum: f64 = out.iter().sum();
        for v in &mut out {
            *v /= sum;
        }
        out
    }

    pub fn predict(&self, x: f64) -> usize {
        self.posterior(x)
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.partial_cmp(b.1).unwrap())
            .map(|(i, _)| i)
            .unwrap()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::make_uniform_1d;
    use crate::numeric::RngState;

    fn two_blob_dataset(seed: u64) -> Dataset {
        // Tight clusters at -1 and +1 with tiny jitter.
        let mut rng = RngState::from_seed(seed);
        let mut rows = Vec::new();
        let mut labels = Vec::new();
        for (c, center) in [(0usize, -1.0f64), (1, 1.0)] {
            for _ in 0..20 {
                rows.push(vec![center + rng.normal(0.0, 1e-3)]);
                labels.push(c);
            }
        }
        Dataset::new(
            crate::numeric::Matrix::from_rows(&rows).unwrap(),
            labels,
            2,
            "blobs".into(),
        )
        .unwrap()
    }

    #[test]
    fn fit_recovers_tight_cluster_locations() {
        let ds = two_blob_dataset(3);
        for family in [Family::Gaussian, Family::StudentT { nu: 1.0 }] {
            let clf = fit_generative(&ds, family, true).unwrap();
            let mu = |d: &Density| match d {
                Density::Gaussian(p) => p.mu,
                Density::StudentT(p) => p.mu,
            };
            assert!((mu(&clf.class_models[0]) + 1.0).abs() < 0.01);
            assert!((mu(&clf.class_models[1]) - 1.0).abs() < 0.01);
        }
    }

    #[test]
    fn fit_uniform_example_locations() {
        let ds = make_uniform_1d(&[(-2.0, -1.0), (1.0, 2.0)], 10_000, 7).unwrap();
        let clf = fit_generative(&ds, Family::Gaussian, true).unwrap();
        match (&clf.class_models[0], &clf.class_models[1]) {
            (Density::Gaussian(a), Density::Gaussian(b)) => {
                assert!((a.mu + 1.5).abs() < 0.02, "mu0 {}", a.mu);
                assert!((b.mu - 1.5).abs() < 0.02, "mu1 {}", b.mu);
            }
            _ => unreachable!(),
        }
    }

    #[test]
    fn equal_class_sizes_give_equal_priors() {
        let ds = make_uniform_1d(&[(-2.0, -1.0), (1.0, 2.0)], 100, 7).unwrap();
        let clf = fit_generative(&ds, Family::Gaussian, true).unwrap();
        assert_eq!(clf.priors, vec![0.5, 0.5]);
    }

    #[test]
    fn missing_class_errors() {
        let ds = Dataset::new(
            crate::numeric::Matrix::from_rows(&[vec![0.0], vec![0.1], vec![0.2]]).unwrap(),
            vec![0, 0, 0],
            2,
            "one-class".into(),
        )
        .unwrap();
        assert!(matches!(
            fit_generative(&ds, Family::Gaussian, true),
            Err(Error::MissingClass(1))
        ));
    }

    #[test]
    fn posterior_symmetric_midpoint_exact() {
        // Exactly symmetric two-class model: the midpoint posterior is 1/2.
        let clf = GenerativeClassifier {
            class_models: vec![
                Density::Gaussian(GaussianParams { mu: -1.5, sigma2: 1.0 / 12.0 }),
                Density::Gaussian(GaussianParams { mu: 1.5, sigma2: 1.0 / 12.0 }),
            ],
            priors: vec![0.5, 0.5],
        };
        let p = clf.posterior(0.0);
        assert!((p[0] - 0.5).abs() < 1e-12);
        assert!((p[1] - 0.5).abs() < 1e-12);
    }

    #[test]
    fn posterior_fitted_midpoint_near_half() {
        // Fitted means carry sampling noise, which the shared small variance
        // amplifies at the midpoint; only a loose check is meaningful.
        let ds = make_uniform_1d(&[(-2.0, -1.0), (1.0, 2.0)], 10_000, 7).unwrap();
        let clf = fit_generative(&ds, Family::Gaussian, true).unwrap();
        let p = clf.posterior(0.0);
        assert!((p[0] - 0.5).abs() < 0.1, "p0 at midpoint {}", p[0]);
    }

    #[test]
    fn gaussian_posterior_saturates_in_tail() {
        let ds = make_uniform_1d(&[(-2.0, -1.0), (1.0, 2.0)], 10_000, 7).unwrap();
        let clf = fit_generative(&ds, Family::Gaussian, true).unwrap();
        let p = clf.posterior(-10.0);
        assert!(p[0] > 1.0 - 1e-3, "p0 at -10: {}", p[0]);

        // Saturation bound at mu0 - 20 sigma.
        let (mu0, sigma) = match &clf.class_models[0] {
            Density::Gaussian(g) => (g.mu, g.sigma2.sqrt()),
            _ => unreachable!(),
        };
        let p = clf.posterior(mu0 - 20.0 * sigma);
        assert!(p[0] >= 1.0 - 1e-6);
    }

    #[test]
    fn t_posterior_is_conservative_in_tail() {
        let ds = make_uniform_1d(&[(-2.0, -1.0), (1.0, 2.0)], 10_000, 7).unwrap();
        let clf = fit_generative(&ds, Family::StudentT { nu: 1.0 }, true).unwrap();
        for x in [-100.0, 100.0] {
            let p = clf.posterior(x);
            assert!((p[0] - 0.5).abs() < 0.05, "p0 at {x}: {}", p[0]);
        }
    }

    #[test]
    fn t_conservativeness_at_extreme_radii_multiclass() {
        // Equal priors, shared nu and scale: every class posterior within
        // 1e-3 of 1/k at |x| = 1e6.
        for k in [2usize, 3, 5] {
            let ranges: Vec<(f64, f64)> = (0..k)
                .map(|c| {
                    let center = c as f64 * 3.0;
                    (center - 0.5, center + 0.5)
                })
                .collect();
            let ds = make_uniform_1d(&ranges, 2_000, 7).unwrap();
            let clf = fit_generative(&ds, Family::StudentT { nu: 1.0 }, true).unwrap();
            for x in [-1e6, 1e6] {
                let p = clf.posterior(x);
                for (c, v) in p.iter().enumerate() {
                    assert!(
                        (v - 1.0 / k as f64).abs() < 1e-3,
                        "k={k} x={x} class {c}: {v}"
                    );
                }
            }
        }
    }

    #[test]
    fn posterior_normalizes_for_extreme_inputs() {
        let ds = make_uniform_1d(&[(-2.0, -1.0), (1.0, 2.0)], 1_000, 7).unwrap();
        for family in [Family::Gaussian, Family::StudentT { nu: 1.0 }] {
            let clf = fit_generative(&ds, family, true).unwrap();
            for x in [-1e6, -10.0, 0.0, 17.3, 1e6] {
                let p = clf.posterior(x);
                let sum: f64 = p.iter().sum();
                assert!((sum - 1.0).abs() < 1e-12, "family {family:?} x={x}");
                assert!(p.iter().all(|v| v.is_finite()));
            }
        }
    }

    #[test]
    fn families_agree_on_bulk_argmax() {
        let ds = make_uniform_1d(&[(-2.0, -1.0), (1.0, 2.0)], 10_000, 7).unwrap();
        let gauss = fit_generative(&ds, Family::Gaussian, true).unwrap();
        let t = fit_generative(&ds, Family::StudentT { nu: 1.0 }, true).unwrap();
        // Samples within one pooled scale of a class location.
        let sigma = match &gauss.class_models[0] {
            Density::Gaussian(g) => g.sigma2.sqrt(),
            _ => unreachable!(),
        };
        for i in 0..ds.len() {
            let (x, _) = ds.sample(i);
            let x = x[0];
            if (x + 1.5).abs() <= sigma || (x - 1.5).abs() <= sigma {
                assert_eq!(gauss.predict(x), t.predict(x), "x={x}");
            }
        }
    }

    #[test]
    fn per_class_variance_flag() {
        // Distinctly different spreads per class: the unpooled fit should
        // produce unequal variances.
        let mut rng = RngState::from_seed(13);
        let mut rows = Vec::new();
        let mut labels = Vec::new();
        for _ in 0..500 {
            rows.push(vec![rng.normal(-2.0, 0.2)]);
            labels.push(0);
            rows.push(vec![rng.normal(2.0, 2.0)]);
            labels.push(1);
        }
        let ds = Dataset::new(
            crate::numeric::Matrix::from_rows(&rows).unwrap(),
            labels,
            2,
            "hetero".into(),
        )
        .unwrap();
        let clf = fit_generative(&ds, Family::Gaussian, false).unwrap();
        match (&clf.class_models[0], &clf.class_models[1]) {
            (Density::Gaussian(a), Density::Gaussian(b)) => {
                assert!(b.sigma2 > 10.0 * a.sigma2);
            }
            _ => unreachable!(),
        }
    }
}
