//! The softmax and softRmax maps from a latent vector `z` to posterior
//! probabilities, their analytic Jacobians, and the negative-log-posterior
//! loss.
//!
//! softRmax replaces softmax's exponential kernel with a reciprocal squared
//! distance to each class anchor `e_i` (the i-th standard basis vector):
//!
//! ```text
//! p_i = (1/d_i) / sum_k (1/d_k),   d_i = ||z - e_i||^2
//! ```
//!
//! The quotient is evaluated in a form that stays exact at `d_i = 0` and
//! cannot overflow: dividing the product form `p_i = prod_{j!=i} d_j / sum_m
//! prod_{j!=m} d_j` through by the total product gives `p_i = (d_min/d_i) /
//! sum_k (d_min/d_k)` with every ratio in `(0, 1]`, and `d_i = 0` collapses
//! the product form to the exact one-hot vector at `i`.

use crate::numeric::Matrix;
use crate::{Error, Result};

/// Posterior clamp for the loss; keeps `-ln p` finite at exact zeros.
pub const NLL_CLAMP: f64 = 1e-12;

/// A latent vector is singular for softRmax when some squared distance to a
/// class anchor falls below this (`||z - e_i|| < 1e-6`).
pub const SINGULARITY_THRESHOLD: f64 = 1e-12;

/// Which posterior map a model's final layer feeds.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum HeadActivation {
    Softmax,
    Softrmax,
}

impl HeadActivation {
    pub fn apply(&self, z: &[f64]) -> Vec<f64> {
        match self {
            HeadActivation::Softmax => softmax(z),
            HeadActivation::Softrmax => softrmax(z),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            HeadActivation::Softmax => "softmax",
            HeadActivation::Softrmax => "softrmax",
        }
    }
}

/// Numerically stable softmax (max subtraction).
pub fn softmax(z: &[f64]) -> Vec<f64> {
    let max = z.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut out: Vec<f64> = z.iter().map(|v| (v - max).exp()).collect();
    let sum: f64 = out.iter().sum();
    for v in &mut out {
        *v /= sum;
    }
    out
}

/// Squared distances from `z` to each class anchor `e_i`.
///
/// Computed termwise rather than via the expanded `||z||^2 - 2 z_i + 1`,
/// which cancels catastrophically when `z` is close to an anchor.
fn anchor_distances(z: &[f64]) -> Vec<f64> {
    (0..z.len())
        .map(|i| {
            let mut d = 0.0;
            for (j, &v) in z.iter().enumerate() {
                let t = if i == j { v - 1.0 } else { v };
                d += t * t;
            }
            d
        })
        .collect()
}

/// softRmax: reciprocal-squared-distance posteriors over the class anchors.
///
/// Exact at singular points: if `z` equals some anchor `e_i`, the output is
/// the one-hot vector at `i`.
pub fn softrmax(z: &[f64]) -> Vec<f64> {
    let d = anchor_distances(z);
    let (argmin, &dmin) = d
        .iter()
        .enumerate()
        .min_by(|a, b| a.1.partial_cmp(b.1).unwrap())
        .expect("non-empty latent vector");
    if dmin == 0.0 {
        let mut out = vec![0.0; z.len()];
        out[argmin] = 1.0;
        return out;
    }
    let mut out: Vec<f64> = d.iter().map(|&di| dmin / di).collect();
    let sum: f64 = out.iter().sum();
    for v in &mut out {
        *v /= sum;
    }
    out
}

/// Analytic softmax Jacobian `J[i][j] = dp_i/dz_j = p_i (delta_ij - p_j)`.
pub fn softmax_jacobian(z: &[f64]) -> Matrix {
    let p = softmax(z);
    let k = z.len();
    let mut jac = Matrix::zeros(k, k);
    for i in 0..k {
        for j in 0..k {
            let delta = if i == j { 1.0 } else { 0.0 };
            jac.set(i, j, p[i] * (delta - p[j]));
        }
    }
    jac
}

/// Analytic softRmax Jacobian `J[i][j] = dp_i/dz_j`.
///
/// With `u_i = 1/d_i`, `S = sum u`, `p_i = u_i/S`, `q_i = u_i^2/S`, and
/// `dd_m/dz_j = 2 (z_j - delta_mj)`:
///
/// ```text
/// dp_i/dz_j = -2 q_i (z_j - delta_ij) + 2 p_i * sum_m q_m (z_j - delta_mj)
/// ```
///
/// Every column sums to zero because the outputs always sum to one.
/// Undefined within [`SINGULARITY_THRESHOLD`] of an anchor.
pub fn softrmax_jacobian(z: &[f64]) -> Result<Matrix> {
    let k = z.len();
    let d = anchor_distances(z);
    let min_d = d.iter().copied().fold(f64::INFINITY, f64::min);
    if min_d < SINGULARITY_THRESHOLD {
        return Err(Error::NearSingular { min_d });
    }
    let u: Vec<f64> = d.iter().map(|&di| 1.0 / di).collect();
    let s: f64 = u.iter().sum();
    let p: Vec<f64> = u.iter().map(|&ui| ui / s).collect();
    let q: Vec<f64> = u.iter().map(|&ui| ui * ui / s).collect();

    // sum_m q_m (z_j - delta_mj) = z_j * sum(q) - q_j
    let qsum: f64 = q.iter().sum();
    let mut jac = Matrix::zeros(k, k);
    for i in 0..k {
        for j in 0..k {
            let delta = if i == j { 1.0 } else { 0.0 };
            let v = -2.0 * q[i] * (z[j] - delta) + 2.0 * p[i] * (z[j] * qsum - q[j]);
            jac.set(i, j, v);
        }
    }
    Ok(jac)
}

/// Negative log posterior of the labeled class, clamped at [`NLL_CLAMP`].
///
/// NaN posteriors propagate instead of being absorbed by the clamp
/// (`f64::max` would silently drop them), so diverged training is detectable.
pub fn nll_loss(p: &[f64], y: usize) -> f64 {
    assert!(y < p.len(), "label {y} out of range for {} classes", p.len());
    if p[y].is_nan() {
        return f64::NAN;
    }
    -p[y].max(NLL_CLAMP).ln()
}

/// Gradient of [`nll_loss`] with respect to the latent vector, composed from
/// the head's analytic Jacobian by the chain rule.
///
/// For softmax this collapses to the familiar `p - one_hot(y)`.
pub fn nll_grad_z(head: HeadActivation, z: &[f64], y: usize) -> Result<Vec<f64>> {
    assert!(y < z.len(), "label {y} out of range for {} classes", z.len());
    match head {
        HeadActivation::Softmax => {
            let mut g = softmax(z);
            g[y] -= 1.0;
            Ok(g)
        }
        HeadActivation::Softrmax => {
            let p = softrmax(z);
            let jac = softrmax_jacobian(z)?;
            let py = p[y].max(NLL_CLAMP);
            Ok(jac.row(y).iter().map(|&j| -j / py).collect())
        }
    }
}
