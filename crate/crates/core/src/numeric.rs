//! Dense row-major matrices, seeded splittable randomness, and the
//! finite-difference gradient checker used by every other module's tests.

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, Uniform};

use crate::{Error, Result};

/// Dense row-major `f64` matrix. Immutable after construction in practice;
/// the few mutating helpers are used only while a matrix is privately owned.
#[derive(Debug, Clone, PartialEq)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    /// Builds a matrix from row-major data. Rejects length mismatches and
    /// non-finite entries.
    pub fn new(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::ShapeMismatch {
                context: "matrix data length",
                left: (rows, cols),
                right: (data.len(), 1),
            });
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("matrix entry"));
        }
        Ok(Self { rows, cols, data })
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m.data[i * n + i] = 1.0;
        }
        m
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let r = rows.len();
        let c = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|row| row.len() != c) {
            return Err(Error::ShapeMismatch {
                context: "ragged rows",
                left: (r, c),
                right: (r, 0),
            });
        }
        Self::new(r, c, rows.concat())
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        debug_assert!(i < self.rows && j < self.cols);
        self.data[i * self.cols + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        debug_assert!(i < self.rows && j < self.cols);
        self.data[i * self.cols + j] = v;
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    /// Standard matrix product; `self.cols` must equal `other.rows`.
    pub fn matmul(&self, other: &Matrix) -> Result<Matrix> {
        if self.cols != other.rows {
            return Err(Error::ShapeMismatch {
                context: "matmul",
                left: (self.rows, self.cols),
                right: (other.rows, other.cols),
            });
        }
        let mut out = Matrix::zeros(self.rows, other.cols);
        // i-k-j loop order keeps the inner loop contiguous in both operands.
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self.data[i * self.cols + k];
                if a == 0.0 {
                    continue;
                }
                let brow = &other.data[k * other.cols..(k + 1) * other.cols];
                let orow = &mut out.data[i * other.cols..(i + 1) * other.cols];
                for (o, b) in orow.iter_mut().zip(brow) {
                    *o += a * b;
                }
            }
        }
        Ok(out)
    }

    /// Matrix-vector product.
    pub fn matvec(&self, x: &[f64]) -> Result<Vec<f64>> {
        if self.cols != x.len() {
            return Err(Error::ShapeMismatch {
                context: "matvec",
                left: (self.rows, self.cols),
                right: (x.len(), 1),
            });
        }
        Ok((0..self.rows)
            .map(|i| {
                self.row(i)
                    .iter()
                    .zip(x)
                    .map(|(a, b)| a * b)
                    .sum::<f64>()
            })
            .collect())
    }

    /// `self^T * x` without materializing the transpose.
    pub fn transpose_matvec(&self, x: &[f64]) -> Result<Vec<f64>> {
        if self.rows != x.len() {
            return Err(Error::ShapeMismatch {
                context: "transpose_matvec",
                left: (self.rows, self.cols),
                right: (x.len(), 1),
            });
        }
        let mut out = vec![0.0; self.cols];
        for (i, xi) in x.iter().enumerate() {
            if *xi == 0.0 {
                continue;
            }
            for (o, a) in out.iter_mut().zip(self.row(i)) {
                *o += a * xi;
            }
        }
        Ok(out)
    }

    pub fn transpose(&self) -> Matrix {
        let mut out = Matrix::zeros(self.cols, self.rows);
        for i in 0..self.rows {
            for j in 0..self.cols {
                out.data[j * self.rows + i] = self.data[i * self.cols + j];
            }
        }
        out
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.data.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    pub fn scale_in_place(&mut self, c: f64) {
        for v in &mut self.data {
            *v *= c;
        }
    }

    /// `self += c * other`, used for SGD updates.
    pub fn axpy_in_place(&mut self, c: f64, other: &Matrix) -> Result<()> {
        if self.rows != other.rows || self.cols != other.cols {
            return Err(Error::ShapeMismatch {
                context: "axpy",
                left: (self.rows, self.cols),
                right: (other.rows, other.cols),
            });
        }
        for (a, b) in self.data.iter_mut().zip(&other.data) {
            *a += c * b;
        }
        Ok(())
    }

    pub fn max_abs_diff(&self, other: &Matrix) -> f64 {
        self.data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }
}

/// Deterministic, splittable random stream.
///
/// Backed by the counter-based ChaCha8 generator: a fixed seed reproduces
/// the same sequence on every platform, and [`RngState::split`] hands out an
/// independent child stream (seeded from the parent stream, splitmix-style)
/// so parallel consumers stay reproducible regardless of scheduling.
#[derive(Debug, Clone)]
pub struct RngState {
    rng: ChaCha8Rng,
}

impl RngState {
    pub fn from_seed(seed: u64) -> Self {
        Self {
            rng: ChaCha8Rng::seed_from_u64(seed),
        }
    }

    /// Derives an independent child stream. Consumes one draw from the
    /// parent, so repeated splits yield distinct children.
    pub fn split(&mut self) -> RngState {
        // Golden-ratio increment decorrelates child seeds from raw draws.
        let child_seed = self.rng.next_u64().wrapping_mul(0x9E37_79B9_7F4A_7C15);
        RngState::from_seed(child_seed)
    }

    pub fn next_u64(&mut self) -> u64 {
        self.rng.next_u64()
    }

    /// Uniform draw from `[0, 1)`.
    pub fn next_f64(&mut self) -> f64 {
        self.rng.gen::<f64>()
    }

    pub fn uniform(&mut self, lo: f64, hi: f64) -> f64 {
        Uniform::new(lo, hi).sample(&mut self.rng)
    }

    pub fn normal(&mut self, mean: f64, sd: f64) -> f64 {
        Normal::new(mean, sd)
            .expect("standard deviation must be finite and non-negative")
            .sample(&mut self.rng)
    }

    pub fn cauchy(&mut self, location: f64, scale: f64) -> f64 {
        rand_distr::Cauchy::new(location, scale)
            .expect("scale must be finite and positive")
            .sample(&mut self.rng)
    }

    pub fn gen_range_usize(&mut self, n: usize) -> usize {
        self.rng.gen_range(0..n)
    }

    /// Fisher-Yates shuffle.
    pub fn shuffle<T>(&mut self, items: &mut [T]) {
        for i in (1..items.len()).rev() {
            let j = self.rng.gen_range(0..=i);
            items.swap(i, j);
        }
    }
}

/// Central-difference gradient estimate of a scalar function.
///
/// Returns `(f(x+h·e_i) − f(x−h·e_i)) / 2h` per coordinate; errors if any
/// evaluation is non-finite.
pub fn finite_diff_grad<F>(f: F, x: &[f64], h: f64) -> Result<Vec<f64>>
where
    F: Fn(&[f64]) -> f64,
{
    assert!(h > 0.0, "step size must be positive");
    let mut probe = x.to_vec();
    let mut grad = Vec::with_capacity(x.len());
    for i in 0..x.len() {
        probe[i] = x[i] + h;
        let fp = f(&probe);
        probe[i] = x[i] - h;
        let fm = f(&probe);
        probe[i] = x[i];
        if !fp.is_finite() || !fm.is_finite() {
            return Err(Error::EvalNonFinite { coordinate: i });
        }
        grad.push((fp - fm) / (2.0 * h));
    }
    Ok(grad)
}

/// Sign with `sign(0) = 0`, the convention used by the attack modules so that
/// zero-gradient coordinates are left untouched.
#[inline]
pub fn sign(v: f64) -> f64 {
    if v > 0.0 {
        1.0
    } else if v < 0.0 {
        -1.0
    } else {
        0.0
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn matmul_identity() {
        let i2 = Matrix::identity(2);
        let v = Matrix::new(2, 1, vec![1.0, 2.0]).unwrap();
        let out = i2.matmul(&v).unwrap();
        assert_eq!(out.data(), &[1.0, 2.0]);
    }

    #[test]
    fn matmul_hand_case() {
        let a = Matrix::from_rows(&[vec![1.0, 2.0], vec![3.0, 4.0]]).unwrap();
        let b = Matrix::new(2, 1, vec![5.0, 6.0]).unwrap();
        let out = a.matmul(&b).unwrap();
        assert_eq!(out.data(), &[17.0, 39.0]);
    }

    #[test]
    fn matmul_shape_mismatch() {
        let a = Matrix::zeros(2, 3);
        let b = Matrix::zeros(2, 3);
        assert!(matches!(
            a.matmul(&b),
            Err(Error::ShapeMismatch { .. })
        ));
    }

    /// Naive triple-loop oracle, kept independent of the production kernel.
    fn matmul_oracle(a: &Matrix, b: &Matrix) -> Matrix {
        let mut out = Matrix::zeros(a.rows(), b.cols());
        for i in 0..a.rows() {
            for j in 0..b.cols() {
                let mut acc = 0.0;
                for k in 0..a.cols() {
                    acc += a.get(i, k) * b.get(k, j);
                }
                out.set(i, j, acc);
            }
        }
        out
    }

    fn random_matrix(rng: &mut RngState, rows: usize, cols: usize) -> Matrix {
        let data: Vec<f64> = (0..rows * cols).map(|_| rng.uniform(-2.0, 2.0)).collect();
        Matrix::new(rows, cols, data).unwrap()
    }

    #[test]
    fn matmul_matches_triple_loop_oracle() {
        let mut rng = RngState::from_seed(7);
        let a = random_matrix(&mut rng, 3, 4);
        let b = random_matrix(&mut rng, 4, 2);
        let got = a.matmul(&b).unwrap();
        let want = matmul_oracle(&a, &b);
        assert!(got.max_abs_diff(&want) < 1e-12);
    }

    #[test]
    fn matmul_associative_on_random_triples() {
        let mut rng = RngState::from_seed(13);
        for _ in 0..20 {
            let a = random_matrix(&mut rng, 3, 5);
            let b = random_matrix(&mut rng, 5, 4);
            let c = random_matrix(&mut rng, 4, 2);
            let left = a.matmul(&b).unwrap().matmul(&c).unwrap();
            let right = a.matmul(&b.matmul(&c).unwrap()).unwrap();
            let scale = left.frobenius_norm().max(1.0);
            assert!(left.max_abs_diff(&right) / scale < 1e-9);
        }
    }

    #[test]
    fn transpose_matvec_agrees_with_explicit_transpose() {
        let mut rng = RngState::from_seed(21);
        let a = random_matrix(&mut rng, 4, 3);
        let x: Vec<f64> = (0..4).map(|_| rng.uniform(-1.0, 1.0)).collect();
        let got = a.transpose_matvec(&x).unwrap();
        let want = a.transpose().matvec(&x).unwrap();
        for (g, w) in got.iter().zip(&want) {
            assert!((g - w).abs() < 1e-12);
        }
    }

    #[test]
    fn rng_reproducible_over_ten_thousand_draws() {
        let mut a = RngState::from_seed(42);
        let mut b = RngState::from_seed(42);
        for _ in 0..10_000 {
            assert_eq!(a.next_u64(), b.next_u64());
        }
    }

    #[test]
    fn rng_split_streams_differ_from_parent() {
        let mut parent = RngState::from_seed(42);
        let mut child = parent.split();
        let mut other = parent.split();
        let p: Vec<u64> = (0..64).map(|_| parent.next_u64()).collect();
        let c: Vec<u64> = (0..64).map(|_| child.next_u64()).collect();
        let o: Vec<u64> = (0..64).map(|_| other.next_u64()).collect();
        assert_ne!(p, c);
        assert_ne!(c, o);
    }

    #[test]
    fn finite_diff_quadratic() {
        let g = finite_diff_grad(|v| v[0] * v[0], &[3.0], 1e-5).unwrap();
        assert!((g[0] - 6.0).abs() < 1e-6);
    }

    #[test]
    fn finite_diff_constant_is_zero() {
        let g = finite_diff_grad(|_| 4.5, &[1.0, -2.0, 0.3], 1e-5).unwrap();
        assert!(g.iter().all(|v| v.abs() < 1e-12));
    }

    #[test]
    fn finite_diff_sum_of_squares() {
        let g = finite_diff_grad(|v| v.iter().map(|x| x * x).sum(), &[1.0, 2.0], 1e-5).unwrap();
        assert!((g[0] - 2.0).abs() < 1e-6);
        assert!((g[1] - 4.0).abs() < 1e-6);
    }

    #[test]
    fn finite_diff_rejects_non_finite() {
        let err = finite_diff_grad(|v| v[0].ln(), &[0.0], 1e-5);
        assert!(matches!(err, Err(Error::EvalNonFinite { coordinate: 0 })));
    }

    #[test]
    fn finite_diff_cubic_is_second_order() {
        // For cubics the central difference error is exactly h^2 * f'''/6.
        let f = |v: &[f64]| v[0].powi(3);
        for (h, tol) in [(1e-2, 1e-4 * 1.01), (1e-3, 1e-6 * 1.01)] {
            let g = finite_diff_grad(f, &[1.0], h).unwrap();
            assert!((g[0] - 3.0).abs() <= tol, "h={h}: err {}", (g[0] - 3.0).abs());
        }
    }

    #[test]
    fn sign_convention() {
        assert_eq!(sign(3.2), 1.0);
        assert_eq!(sign(-0.1), -1.0);
        assert_eq!(sign(0.0), 0.0);
    }

    proptest! {
        #[test]
        fn matmul_matches_oracle_prop(
            seed in 0u64..1_000,
            m in 1usize..5,
            k in 1usize..5,
            n in 1usize..5,
        ) {
            let mut rng = RngState::from_seed(seed);
            let a = random_matrix(&mut rng, m, k);
            let b = random_matrix(&mut rng, k, n);
            let got = a.matmul(&b).unwrap();
            let want = matmul_oracle(&a, &b);
            prop_assert!(got.max_abs_diff(&want) < 1e-12);
        }
    }
}
