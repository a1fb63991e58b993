//! Kernel and semimetric catalogue.
//!
//! A positive-definite kernel `k` and a semimetric `d²` of negative type are
//! two views of one feature map `φ`: `d²(x,x') = ‖φ(x) − φ(x')‖²` and
//! `k(x,x') = ⟨φ(x) − φ(ω), φ(x') − φ(ω)⟩` for an anchor point `ω`. The
//! conversions [`induced_semimetric`] and [`induced_kernel`] move between the
//! two, and [`validate_negative_type`] certifies a finite distance matrix.
//!
//! Specs may carry data-dependent parameters (median-heuristic bandwidth,
//! first-point anchor). Those are fixed by [`KernelSpec::resolve`] /
//! [`SemimetricSpec::resolve`] against a sample before any evaluation.

mod negative_type;
mod parse;
mod points;

pub use negative_type::{validate_negative_type, NegativeTypeReport, DEFAULT_NEGATIVE_TYPE_TOL};
pub use points::PointSet;

use std::fmt;
use std::sync::Arc;

use nalgebra::DMatrix;
use rayon::prelude::*;

use crate::error::{Error, Result};

/// Above this many pooled points the median heuristic uses an evenly strided
/// subsample of this size.
pub const MEDIAN_HEURISTIC_MAX_POINTS: usize = 2000;

/// Gaussian bandwidth.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Bandwidth {
    Fixed(f64),
    /// Median pairwise Euclidean distance of the pooled sample, fixed at
    /// resolution time.
    MedianHeuristic,
}

/// Matérn smoothness, restricted to the half-integer cases with closed forms.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum MaternNu {
    Half,
    ThreeHalves,
    FiveHalves,
}

impl MaternNu {
    pub fn value(self) -> f64 {
        match self {
            MaternNu::Half => 0.5,
            MaternNu::ThreeHalves => 1.5,
            MaternNu::FiveHalves => 2.5,
        }
    }

    pub fn from_value(nu: f64) -> Result<Self> {
        match nu {
            0.5 => Ok(MaternNu::Half),
            1.5 => Ok(MaternNu::ThreeHalves),
            2.5 => Ok(MaternNu::FiveHalves),
            _ => Err(Error::InvalidParameter(format!(
                "matern smoothness must be one of 0.5, 1.5, 2.5; got {nu}"
            ))),
        }
    }
}

/// Anchor point `ω` of a distance-induced kernel.
#[derive(Clone, Debug, PartialEq)]
pub enum Anchor {
    /// The zero vector of the data's dimension.
    Origin,
    /// The first point of the sample the kernel is resolved against.
    FirstPoint,
    Point(Vec<f64>),
}

/// A positive-definite kernel.
#[derive(Clone, Debug, PartialEq)]
pub enum KernelSpec {
    Linear,
    /// `exp(−‖x − x'‖² / (2σ²))`.
    Gaussian {
        bandwidth: Bandwidth,
    },
    Matern {
        nu: MaternNu,
        lengthscale: f64,
    },
    /// `½(d²(x,ω) + d²(x',ω) − d²(x,x'))`.
    DistanceInduced {
        base: Box<SemimetricSpec>,
        anchor: Anchor,
    },
}

/// A semimetric playing the role of a squared distance.
#[derive(Clone, Debug, PartialEq)]
pub enum SemimetricSpec {
    /// `‖x − x'‖²`.
    EuclideanSquared,
    /// `k(x,x) + k(x',x') − 2k(x,x')`.
    KernelInduced(Box<KernelSpec>),
    /// A user-supplied matrix; points are row indices.
    Explicit(Arc<ExplicitMatrix>),
}

/// Symmetric, nonnegative, zero-diagonal matrix of semimetric values.
#[derive(Debug, PartialEq)]
pub struct ExplicitMatrix {
    values: DMatrix<f64>,
    source: Option<String>,
}

impl ExplicitMatrix {
    pub fn new(values: DMatrix<f64>) -> Result<Self> {
        let n = values.nrows();
        if n == 0 || values.ncols() != n {
            return Err(Error::InvalidInput(format!(
                "explicit matrix must be square and nonempty, got {}x{}",
                values.nrows(),
                values.ncols()
            )));
        }
        let scale = values.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let tol = 1e-12 * scale.max(1.0);
        for i in 0..n {
            for j in 0..n {
                let v = values[(i, j)];
                if !v.is_finite() {
                    return Err(Error::NonFinite {
                        value: v,
                        context: format!("explicit matrix entry ({i},{j})"),
                    });
                }
                if v < 0.0 {
                    return Err(Error::InvalidInput(format!(
                        "explicit matrix entry ({i},{j}) = {v} is negative"
                    )));
                }
                if (v - values[(j, i)]).abs() > tol {
                    return Err(Error::InvalidInput(format!(
                        "explicit matrix is not symmetric at ({i},{j})"
                    )));
                }
            }
            if values[(i, i)] != 0.0 {
                return Err(Error::InvalidInput(format!(
                    "explicit matrix diagonal entry ({i},{i}) is {}, expected 0",
                    values[(i, i)]
                )));
            }
        }
        Ok(Self {
            values,
            source: None,
        })
    }

    /// Records the file the matrix came from, used when rendering specs.
    pub fn with_source(mut self, path: impl Into<String>) -> Self {
        self.source = Some(path.into());
        self
    }

    pub fn size(&self) -> usize {
        self.values.nrows()
    }

    pub fn values(&self) -> &DMatrix<f64> {
        &self.values
    }

    pub fn source(&self) -> Option<&str> {
        self.source.as_deref()
    }

    fn index_of(&self, x: &[f64]) -> Result<usize> {
        let v = x[0];
        if v < 0.0 || v.fract() != 0.0 || v >= self.size() as f64 {
            return Err(Error::InvalidInput(format!(
                "{v} is not a row index of the {0}x{0} explicit matrix",
                self.size()
            )));
        }
        Ok(v as usize)
    }
}

#[inline]
fn squared_euclidean(x: &[f64], y: &[f64]) -> f64 {
    x.iter().zip(y).map(|(a, b)| (a - b) * (a - b)).sum()
}

#[inline]
fn dot(x: &[f64], y: &[f64]) -> f64 {
    x.iter().zip(y).map(|(a, b)| a * b).sum()
}

fn check_finite(x: &[f64], what: &str) -> Result<()> {
    match x.iter().find(|v| !v.is_finite()) {
        Some(&value) => Err(Error::NonFinite {
            value,
            context: what.to_string(),
        }),
        None => Ok(()),
    }
}

fn same_dim(a: usize, b: usize) -> Result<()> {
    if a == b {
        Ok(())
    } else {
        Err(Error::DimensionMismatch(a, b))
    }
}

impl KernelSpec {
    pub fn gaussian(sigma: f64) -> Result<Self> {
        if !(sigma.is_finite() && sigma > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "gaussian bandwidth must be > 0, got {sigma}"
            )));
        }
        Ok(KernelSpec::Gaussian {
            bandwidth: Bandwidth::Fixed(sigma),
        })
    }

    pub fn gaussian_median() -> Self {
        KernelSpec::Gaussian {
            bandwidth: Bandwidth::MedianHeuristic,
        }
    }

    pub fn matern(nu: MaternNu, lengthscale: f64) -> Result<Self> {
        if !(lengthscale.is_finite() && lengthscale > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "matern lengthscale must be > 0, got {lengthscale}"
            )));
        }
        Ok(KernelSpec::Matern { nu, lengthscale })
    }

    /// Whether the kernel depends on its arguments only through `‖x − x'‖`.
    pub fn is_radial(&self) -> bool {
        matches!(
            self,
            KernelSpec::Gaussian { .. } | KernelSpec::Matern { .. }
        )
    }

    /// True when no parameter still depends on data.
    pub fn is_resolved(&self) -> bool {
        match self {
            KernelSpec::Linear | KernelSpec::Matern { .. } => true,
            KernelSpec::Gaussian { bandwidth } => matches!(bandwidth, Bandwidth::Fixed(_)),
            KernelSpec::DistanceInduced { base, anchor } => {
                matches!(anchor, Anchor::Point(_)) && base.is_resolved()
            }
        }
    }

    /// Fixes data-dependent parameters against `sample`: the median
    /// heuristic bandwidth, the origin and first-point anchors.
    pub fn resolve(&self, sample: &PointSet) -> Result<KernelSpec> {
        self.concretize(sample.dim(), Some(sample))
    }

    fn concretize(&self, dim: usize, sample: Option<&PointSet>) -> Result<KernelSpec> {
        Ok(match self {
            KernelSpec::Gaussian {
                bandwidth: Bandwidth::MedianHeuristic,
            } => {
                let sample = sample.ok_or_else(|| {
                    Error::InvalidInput(
                        "median-heuristic bandwidth needs a sample to resolve against".into(),
                    )
                })?;
                KernelSpec::gaussian(median_heuristic(sample))?
            }
            KernelSpec::DistanceInduced { base, anchor } => {
                let anchor = match anchor {
                    Anchor::Origin => Anchor::Point(vec![0.0; dim]),
                    Anchor::FirstPoint => {
                        let sample = sample.ok_or_else(|| {
                            Error::InvalidInput(
                                "first-point anchor needs a sample to resolve against".into(),
                            )
                        })?;
                        Anchor::Point(sample.point(0).to_vec())
                    }
                    Anchor::Point(p) => Anchor::Point(p.clone()),
                };
                KernelSpec::DistanceInduced {
                    base: Box::new(base.concretize(dim, sample)?),
                    anchor,
                }
            }
            other => other.clone(),
        })
    }

    fn check_dims(&self, dx: usize, dy: usize) -> Result<()> {
        match self {
            KernelSpec::Linear | KernelSpec::Matern { .. } => same_dim(dx, dy),
            KernelSpec::Gaussian { bandwidth } => match bandwidth {
                Bandwidth::Fixed(_) => same_dim(dx, dy),
                Bandwidth::MedianHeuristic => Err(Error::InvalidInput(
                    "gaussian bandwidth is unresolved; call resolve() with a sample first".into(),
                )),
            },
            KernelSpec::DistanceInduced { base, anchor } => {
                let Anchor::Point(w) = anchor else {
                    return Err(Error::InvalidInput(
                        "kernel anchor is unresolved; call resolve() with a sample first".into(),
                    ));
                };
                base.check_dims(dx, w.len())?;
                base.check_dims(dy, w.len())?;
                base.check_dims(dx, dy)
            }
        }
    }

    fn check_points(&self, pts: &[f64], dim: usize) -> Result<()> {
        match self {
            KernelSpec::DistanceInduced { base, anchor } => {
                if let Anchor::Point(w) = anchor {
                    base.check_points(w, w.len())?;
                }
                base.check_points(pts, dim)
            }
            _ => Ok(()),
        }
    }

    /// Checks that `self` can be evaluated on every pair from `a × b`.
    pub fn validate_on(&self, a: &PointSet, b: &PointSet) -> Result<()> {
        self.check_dims(a.dim(), b.dim())?;
        self.check_points(a.as_slice(), a.dim())?;
        self.check_points(b.as_slice(), b.dim())
    }

    /// Evaluation without argument checks; `validate_on` must have passed.
    #[inline]
    pub(crate) fn eval_raw(&self, x: &[f64], y: &[f64]) -> f64 {
        match self {
            KernelSpec::Linear => dot(x, y),
            KernelSpec::Gaussian {
                bandwidth: Bandwidth::Fixed(sigma),
            } => (-squared_euclidean(x, y) / (2.0 * sigma * sigma)).exp(),
            KernelSpec::Gaussian {
                bandwidth: Bandwidth::MedianHeuristic,
            } => {
                unreachable!("unresolved bandwidth passed validation")
            }
            KernelSpec::Matern { nu, lengthscale } => {
                let r = squared_euclidean(x, y).sqrt() / lengthscale;
                match nu {
                    MaternNu::Half => (-r).exp(),
                    MaternNu::ThreeHalves => {
                        let a = 3f64.sqrt() * r;
                        (1.0 + a) * (-a).exp()
                    }
                    MaternNu::FiveHalves => {
                        let a = 5f64.sqrt() * r;
                        (1.0 + a + a * a / 3.0) * (-a).exp()
                    }
                }
            }
            KernelSpec::DistanceInduced { base, anchor } => {
                let Anchor::Point(w) = anchor else {
                    unreachable!("unresolved anchor passed validation")
                };
                0.5 * (base.eval_raw(x, w) + base.eval_raw(y, w) - base.eval_raw(x, y))
            }
        }
    }
}

impl SemimetricSpec {
    pub fn explicit(matrix: ExplicitMatrix) -> Self {
        SemimetricSpec::Explicit(Arc::new(matrix))
    }

    pub fn is_resolved(&self) -> bool {
        match self {
            SemimetricSpec::KernelInduced(k) => k.is_resolved(),
            _ => true,
        }
    }

    /// Whether `d²(x,x')` is a function of `‖x − x'‖` alone.
    pub fn is_radial(&self) -> bool {
        match self {
            SemimetricSpec::EuclideanSquared => true,
            SemimetricSpec::KernelInduced(k) => k.is_radial(),
            SemimetricSpec::Explicit(_) => false,
        }
    }

    pub fn resolve(&self, sample: &PointSet) -> Result<SemimetricSpec> {
        self.concretize(sample.dim(), Some(sample))
    }

    fn concretize(&self, dim: usize, sample: Option<&PointSet>) -> Result<SemimetricSpec> {
        Ok(match self {
            SemimetricSpec::KernelInduced(k) => {
                SemimetricSpec::KernelInduced(Box::new(k.concretize(dim, sample)?))
            }
            other => other.clone(),
        })
    }

    fn check_dims(&self, dx: usize, dy: usize) -> Result<()> {
        match self {
            SemimetricSpec::EuclideanSquared => same_dim(dx, dy),
            SemimetricSpec::KernelInduced(k) => {
                k.check_dims(dx, dx)?;
                k.check_dims(dy, dy)?;
                k.check_dims(dx, dy)
            }
            SemimetricSpec::Explicit(_) => {
                same_dim(dx, 1)?;
                same_dim(dy, 1)
            }
        }
    }

    fn check_points(&self, pts: &[f64], dim: usize) -> Result<()> {
        match self {
            SemimetricSpec::EuclideanSquared => Ok(()),
            SemimetricSpec::KernelInduced(k) => k.check_points(pts, dim),
            SemimetricSpec::Explicit(m) => {
                for p in pts.chunks_exact(dim.max(1)) {
                    m.index_of(p)?;
                }
                Ok(())
            }
        }
    }

    pub fn validate_on(&self, a: &PointSet, b: &PointSet) -> Result<()> {
        self.check_dims(a.dim(), b.dim())?;
        self.check_points(a.as_slice(), a.dim())?;
        self.check_points(b.as_slice(), b.dim())
    }

    #[inline]
    pub(crate) fn eval_raw(&self, x: &[f64], y: &[f64]) -> f64 {
        match self {
            SemimetricSpec::EuclideanSquared => squared_euclidean(x, y),
            SemimetricSpec::KernelInduced(k) => {
                (k.eval_raw(x, x) + k.eval_raw(y, y)) - 2.0 * k.eval_raw(x, y)
            }
            SemimetricSpec::Explicit(m) => m.values[(x[0] as usize, y[0] as usize)],
        }
    }
}

/// `k(x, y)`.
///
/// Origin anchors resolve to the zero vector of `x`'s dimension; median
/// bandwidths and first-point anchors must be resolved beforehand.
pub fn kernel_eval(k: &KernelSpec, x: &[f64], y: &[f64]) -> Result<f64> {
    check_finite(x, "first kernel argument")?;
    check_finite(y, "second kernel argument")?;
    let k = k.concretize(x.len(), None)?;
    k.check_dims(x.len(), y.len())?;
    k.check_points(x, x.len())?;
    k.check_points(y, y.len())?;
    Ok(k.eval_raw(x, y))
}

/// `d²(x, y)`, with the same resolution rules as [`kernel_eval`].
pub fn semimetric_eval(d2: &SemimetricSpec, x: &[f64], y: &[f64]) -> Result<f64> {
    check_finite(x, "first semimetric argument")?;
    check_finite(y, "second semimetric argument")?;
    let d2 = d2.concretize(x.len(), None)?;
    d2.check_dims(x.len(), y.len())?;
    d2.check_points(x, x.len())?;
    d2.check_points(y, y.len())?;
    Ok(d2.eval_raw(x, y))
}

/// The semimetric `d²(x,x') = k(x,x) + k(x',x') − 2k(x,x')` of a kernel.
pub fn induced_semimetric(k: &KernelSpec) -> SemimetricSpec {
    SemimetricSpec::KernelInduced(Box::new(k.clone()))
}

/// The kernel `½(d²(x,ω) + d²(x',ω) − d²(x,x'))` anchored at `ω`.
///
/// Positive semidefinite whenever `d²` is of negative type, which is the
/// caller's responsibility (see [`validate_negative_type`]).
pub fn induced_kernel(d2: &SemimetricSpec, anchor: Anchor) -> Result<KernelSpec> {
    if let Anchor::Point(w) = &anchor {
        check_finite(w, "anchor")?;
        if let SemimetricSpec::Explicit(m) = d2 {
            same_dim(w.len(), 1)?;
            m.index_of(w)?;
        }
    }
    Ok(KernelSpec::DistanceInduced {
        base: Box::new(d2.clone()),
        anchor,
    })
}

/// Fills an `n×m` matrix row by row. Each entry is computed independently,
/// so the result does not depend on the thread schedule.
fn build_matrix<F>(n: usize, m: usize, symmetric: bool, f: F) -> DMatrix<f64>
where
    F: Fn(usize, usize) -> f64 + Sync,
{
    let rows: Vec<Vec<f64>> = (0..n)
        .into_par_iter()
        .map(|i| {
            let start = if symmetric { i } else { 0 };
            (start..m).map(|j| f(i, j)).collect()
        })
        .collect();
    let mut out = DMatrix::zeros(n, m);
    for (i, row) in rows.into_iter().enumerate() {
        let start = if symmetric { i } else { 0 };
        for (off, v) in row.into_iter().enumerate() {
            let j = start + off;
            out[(i, j)] = v;
            if symmetric {
                out[(j, i)] = v;
            }
        }
    }
    out
}

/// `K[i,j] = k(x_i, x_j)`.
pub fn gram_matrix(k: &KernelSpec, pts: &PointSet) -> Result<DMatrix<f64>> {
    let k = k.concretize(pts.dim(), None)?;
    k.validate_on(pts, pts)?;
    Ok(build_matrix(pts.len(), pts.len(), true, |i, j| {
        k.eval_raw(pts.point(i), pts.point(j))
    }))
}

/// `K[i,j] = k(a_i, b_j)`.
pub fn cross_gram_matrix(k: &KernelSpec, a: &PointSet, b: &PointSet) -> Result<DMatrix<f64>> {
    let k = k.concretize(a.dim(), None)?;
    k.validate_on(a, b)?;
    Ok(build_matrix(a.len(), b.len(), false, |i, j| {
        k.eval_raw(a.point(i), b.point(j))
    }))
}

/// `D[i,j] = d²(x_i, x_j)`; the diagonal is exactly zero.
pub fn distance_matrix(d2: &SemimetricSpec, pts: &PointSet) -> Result<DMatrix<f64>> {
    let d2 = d2.concretize(pts.dim(), None)?;
    d2.validate_on(pts, pts)?;
    Ok(build_matrix(pts.len(), pts.len(), true, |i, j| {
        if i == j {
            0.0
        } else {
            d2.eval_raw(pts.point(i), pts.point(j))
        }
    }))
}

/// `D[i,j] = d²(a_i, b_j)`.
pub fn cross_distance_matrix(
    d2: &SemimetricSpec,
    a: &PointSet,
    b: &PointSet,
) -> Result<DMatrix<f64>> {
    let d2 = d2.concretize(a.dim(), None)?;
    d2.validate_on(a, b)?;
    Ok(build_matrix(a.len(), b.len(), false, |i, j| {
        d2.eval_raw(a.point(i), b.point(j))
    }))
}

/// Median pairwise Euclidean distance over distinct index pairs.
///
/// Falls back to the mean positive distance when more than half the pairs
/// coincide, and to 1 when every point is identical.
pub fn median_heuristic(pts: &PointSet) -> f64 {
    let n = pts.len();
    let idx: Vec<usize> = if n > MEDIAN_HEURISTIC_MAX_POINTS {
        (0..MEDIAN_HEURISTIC_MAX_POINTS)
            .map(|i| i * n / MEDIAN_HEURISTIC_MAX_POINTS)
            .collect()
    } else {
        (0..n).collect()
    };
    let mut dists = Vec::with_capacity(idx.len() * idx.len().saturating_sub(1) / 2);
    for (a, &i) in idx.iter().enumerate() {
        for &j in &idx[a + 1..] {
            dists.push(squared_euclidean(pts.point(i), pts.point(j)).sqrt());
        }
    }
    if dists.is_empty() {
        return 1.0;
    }
    let mid = dists.len() / 2;
    let (_, &mut upper, _) = dists.select_nth_unstable_by(mid, f64::total_cmp);
    let median = if dists.len() % 2 == 1 {
        upper
    } else {
        let lower = dists[..mid]
            .iter()
            .copied()
            .fold(f64::NEG_INFINITY, f64::max);
        0.5 * (lower + upper)
    };
    if median > 0.0 {
        return median;
    }
    let positive: Vec<f64> = dists.into_iter().filter(|&d| d > 0.0).collect();
    if positive.is_empty() {
        1.0
    } else {
        positive.iter().sum::<f64>() / positive.len() as f64
    }
}

impl fmt::Display for Anchor {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Anchor::Origin => f.write_str("origin"),
            Anchor::FirstPoint => f.write_str("first"),
            Anchor::Point(p) => {
                for (i, v) in p.iter().enumerate() {
                    if i > 0 {
                        f.write_str(";")?;
                    }
                    write!(f, "{v}")?;
                }
                Ok(())
            }
        }
    }
}

impl fmt::Display for KernelSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            KernelSpec::Linear => f.write_str("linear"),
            KernelSpec::Gaussian {
                bandwidth: Bandwidth::Fixed(s),
            } => write!(f, "gaussian:sigma={s}"),
            KernelSpec::Gaussian {
                bandwidth: Bandwidth::MedianHeuristic,
            } => f.write_str("gaussian:sigma=median"),
            KernelSpec::Matern { nu, lengthscale } => {
                write!(f, "matern:nu={},ell={lengthscale}", nu.value())
            }
            KernelSpec::DistanceInduced { base, anchor } => {
                write!(f, "induced_kernel:base={base},anchor={anchor}")
            }
        }
    }
}

impl fmt::Display for SemimetricSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SemimetricSpec::EuclideanSquared => f.write_str("euclid2"),
            SemimetricSpec::KernelInduced(k) => write!(f, "kernel_induced({k})"),
            SemimetricSpec::Explicit(m) => match m.source() {
                Some(path) => write!(f, "explicit:path={path}"),
                None => write!(f, "explicit:n={}", m.size()),
            },
        }
    }
}
