//! Plug-in (V-statistic) estimators of mCov, HSIC and dCov, and a
//! permutation test built on them.
//!
//! The free functions ([`mcov_plugin`], [`mcov_trace`], [`hsic_vstat`],
//! [`dcov_vstat`]) stream over rows and never hold an `n×n` matrix, so they
//! scale to large samples. The permutation test instead precomputes the
//! matrices once ([`PreparedStatistic`]) and re-evaluates under permuted
//! indices.
//!
//! Data-dependent kernel parameters are resolved per call: for mCov against
//! the pooled sample `x ∪ y`, for HSIC and dCov each side against its own
//! sample.

mod permutation;

pub use permutation::{
    permutation_test, Alternative, Estimator, PreparedStatistic, TestResult, DEFAULT_PERMUTATIONS,
};

use nalgebra::DMatrix;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::kernel_metric::{gram_matrix, KernelSpec, PointSet, SemimetricSpec};

/// `n ≥ 2` paired observations `(x_i, y_i)`.
#[derive(Clone, Debug, PartialEq)]
pub struct PairedSample {
    x: PointSet,
    y: PointSet,
}

impl PairedSample {
    pub fn new(x: PointSet, y: PointSet) -> Result<Self> {
        if x.len() != y.len() {
            return Err(Error::InvalidInput(format!(
                "paired sample has {} x points but {} y points",
                x.len(),
                y.len()
            )));
        }
        if x.len() < 2 {
            return Err(Error::TooFewObservations {
                min: 2,
                got: x.len(),
            });
        }
        Ok(Self { x, y })
    }

    pub fn x(&self) -> &PointSet {
        &self.x
    }

    pub fn y(&self) -> &PointSet {
        &self.y
    }

    pub fn len(&self) -> usize {
        self.x.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// `x` followed by `y`; only defined when both live in one space.
    pub fn pooled(&self) -> Result<PointSet> {
        self.x.concat(&self.y).map_err(|_| {
            Error::InvalidInput(format!(
                "x and y must live in the same space, got dimensions {} and {}",
                self.x.dim(),
                self.y.dim()
            ))
        })
    }

    /// Re-pairs `x_i` with `y_{perm[i]}`.
    pub fn permute_y(&self, perm: &[usize]) -> Result<PairedSample> {
        PairedSample::new(self.x.clone(), self.y.select(perm))
    }

    /// Keeps the pairs at `idx` (repeats allowed).
    pub fn select(&self, idx: &[usize]) -> Result<PairedSample> {
        PairedSample::new(self.x.select(idx), self.y.select(idx))
    }
}

/// Sums per-row contributions in row order, whatever the thread schedule.
fn row_sums<const K: usize, F>(n: usize, row: F) -> [f64; K]
where
    F: Fn(usize) -> [f64; K] + Sync + Send,
{
    let rows: Vec<[f64; K]> = (0..n).into_par_iter().map(row).collect();
    let mut acc = [0.0; K];
    for r in rows {
        for (a, v) in acc.iter_mut().zip(r) {
            *a += v;
        }
    }
    acc
}

/// Distance form of mCov:
/// `½·[(1/n²)·Σ_{i,j} d²(x_i, y_j) − (1/n)·Σ_i d²(x_i, y_i)]`.
///
/// Signed: positive when paired points are closer than unpaired ones.
pub fn mcov_plugin(s: &PairedSample, d2: &SemimetricSpec) -> Result<f64> {
    let d2 = d2.resolve(&s.pooled()?)?;
    d2.validate_on(s.x(), s.y())?;
    let n = s.len();
    let [all, diag] = row_sums(n, |i| {
        let xi = s.x.point(i);
        let row: f64 = s.y.iter().map(|yj| d2.eval_raw(xi, yj)).sum();
        [row, d2.eval_raw(xi, s.y.point(i))]
    });
    let nf = n as f64;
    Ok(0.5 * (all / (nf * nf) - diag / nf))
}

/// Trace form of mCov: `(1/n)·Σ_i k(x_i, y_i) − (1/n²)·Σ_{i,j} k(x_i, y_j)`.
///
/// Equals [`mcov_plugin`] with the kernel's induced semimetric.
pub fn mcov_trace(s: &PairedSample, k: &KernelSpec) -> Result<f64> {
    let k = k.resolve(&s.pooled()?)?;
    k.validate_on(s.x(), s.y())?;
    let n = s.len();
    let [all, diag] = row_sums(n, |i| {
        let xi = s.x.point(i);
        let row: f64 = s.y.iter().map(|yj| k.eval_raw(xi, yj)).sum();
        [row, k.eval_raw(xi, s.y.point(i))]
    });
    let nf = n as f64;
    Ok(diag / nf - all / (nf * nf))
}

/// HSIC V-statistic `(1/n²)·Tr(K·H·L·H)` with `H = I − (1/n)·11ᵀ`.
pub fn hsic_vstat(s: &PairedSample, k: &KernelSpec, l: &KernelSpec) -> Result<f64> {
    let k = k.resolve(s.x())?;
    let l = l.resolve(s.y())?;
    k.validate_on(s.x(), s.x())?;
    l.validate_on(s.y(), s.y())?;
    let n = s.len();
    let sums: Vec<[f64; 3]> = (0..n)
        .into_par_iter()
        .map(|i| {
            let (xi, yi) = (s.x.point(i), s.y.point(i));
            let mut acc = [0.0; 3];
            for j in 0..n {
                let kij = k.eval_raw(xi, s.x.point(j));
                let lij = l.eval_raw(yi, s.y.point(j));
                acc[0] += kij * lij;
                acc[1] += kij;
                acc[2] += lij;
            }
            acc
        })
        .collect();
    Ok(centered_product(&sums, n))
}

/// dCov V-statistic: plug-in of
/// `𝔼ρx·ρy + 𝔼ρx·𝔼ρy − 2·𝔼[𝔼'ρx · 𝔼'ρy]`.
pub fn dcov_vstat(s: &PairedSample, rx: &SemimetricSpec, ry: &SemimetricSpec) -> Result<f64> {
    let rx = rx.resolve(s.x())?;
    let ry = ry.resolve(s.y())?;
    rx.validate_on(s.x(), s.x())?;
    ry.validate_on(s.y(), s.y())?;
    let n = s.len();
    let sums: Vec<[f64; 3]> = (0..n)
        .into_par_iter()
        .map(|i| {
            let (xi, yi) = (s.x.point(i), s.y.point(i));
            let mut acc = [0.0; 3];
            for j in 0..n {
                if j == i {
                    continue;
                }
                let a = rx.eval_raw(xi, s.x.point(j));
                let b = ry.eval_raw(yi, s.y.point(j));
                acc[0] += a * b;
                acc[1] += a;
                acc[2] += b;
            }
            acc
        })
        .collect();
    Ok(centered_product(&sums, n))
}

/// `(1/n²)·Tr(A·H·B·H)` from per-row `[Σ_j A_ij B_ij, Σ_j A_ij, Σ_j B_ij]`.
fn centered_product(rows: &[[f64; 3]], n: usize) -> f64 {
    let nf = n as f64;
    let (mut prod, mut cross, mut sa, mut sb) = (0.0, 0.0, 0.0, 0.0);
    for r in rows {
        prod += r[0];
        cross += r[1] * r[2];
        sa += r[1];
        sb += r[2];
    }
    prod / (nf * nf) - 2.0 * cross / (nf * nf * nf) + (sa / (nf * nf)) * (sb / (nf * nf))
}

/// Double-centres a square matrix by subtracting row and column means,
/// which equals `H·M·H` without forming `H`.
pub fn center_gram(m: &DMatrix<f64>) -> DMatrix<f64> {
    let n = m.nrows();
    let nf = n as f64;
    let row_means: Vec<f64> = (0..n).map(|i| m.row(i).iter().sum::<f64>() / nf).collect();
    let col_means: Vec<f64> = (0..n)
        .map(|j| m.column(j).iter().sum::<f64>() / nf)
        .collect();
    let grand = row_means.iter().sum::<f64>() / nf;
    DMatrix::from_fn(n, n, |i, j| m[(i, j)] - row_means[i] - col_means[j] + grand)
}

/// Empirical cross-covariance operator, held as the pair of centred Gram
/// matrices `K̃ = HKH`, `L̃ = HLH`.
#[derive(Clone, Debug)]
pub struct CrossCovEstimate {
    k_centered: DMatrix<f64>,
    l_centered: DMatrix<f64>,
    n: usize,
}

impl CrossCovEstimate {
    /// Resolves `k` on `x` and `l` on `y`, then centres their Gram matrices.
    pub fn new(s: &PairedSample, k: &KernelSpec, l: &KernelSpec) -> Result<Self> {
        let kx = gram_matrix(&k.resolve(s.x())?, s.x())?;
        let ly = gram_matrix(&l.resolve(s.y())?, s.y())?;
        Self::from_grams(&kx, &ly)
    }

    pub fn from_grams(k: &DMatrix<f64>, l: &DMatrix<f64>) -> Result<Self> {
        let n = k.nrows();
        if k.shape() != (n, n) || l.shape() != (n, n) {
            return Err(Error::InvalidInput(format!(
                "Gram matrices must be square of equal size, got {:?} and {:?}",
                k.shape(),
                l.shape()
            )));
        }
        if n < 2 {
            return Err(Error::TooFewObservations { min: 2, got: n });
        }
        Ok(Self {
            k_centered: center_gram(k),
            l_centered: center_gram(l),
            n,
        })
    }

    pub fn k_centered(&self) -> &DMatrix<f64> {
        &self.k_centered
    }

    pub fn l_centered(&self) -> &DMatrix<f64> {
        &self.l_centered
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// `(1/n²)·Σ_{ij} K̃_ij·L̃_ij`.
    pub fn hsic(&self) -> f64 {
        let identity: Vec<usize> = (0..self.n).collect();
        self.hsic_permuted(&identity)
    }

    /// HSIC after re-pairing `x_i` with `y_{perm[i]}`.
    pub fn hsic_permuted(&self, perm: &[usize]) -> f64 {
        let n = self.n;
        let k = self.k_centered.as_slice();
        let l = self.l_centered.as_slice();
        let mut total = 0.0;
        for j in 0..n {
            let kcol = &k[j * n..(j + 1) * n];
            let lcol = &l[perm[j] * n..(perm[j] + 1) * n];
            let mut col = 0.0;
            for i in 0..n {
                col += kcol[i] * lcol[perm[i]];
            }
            total += col;
        }
        total / (n * n) as f64
    }
}
