//! Exact population values on finite-support joint distributions.
//!
//! A [`DiscreteJoint`] puts mass `P[a,b]` on the pair `(x_a, y_b)`. Every
//! expectation in the definitions of mCov, HSIC and dCov then becomes a
//! finite sum, evaluated here in `O(m·m')` matrix products. The Mercer
//! decompositions in [`mercer`] split mCov and HSIC over an eigenbasis of the
//! kernel, exposing how mCov can vanish through cancellation while HSIC
//! cannot.
//!
//! Kernel parameters that depend on data are resolved against the support
//! points (unweighted): for mCov and the decompositions against
//! `support_x ∪ support_y`, for HSIC and dCov each side separately.

mod joint;
pub mod mercer;

pub use joint::{DiscreteJoint, JointDocument};
pub use mercer::{
    mercer_basis, mercer_hsic_decomposition, mercer_mcov_decomposition, HsicDecomposition,
    McovDecomposition, MercerSystem,
};

use nalgebra::{DMatrix, DVector};

use crate::error::Result;
use crate::kernel_metric::{
    cross_distance_matrix, distance_matrix, gram_matrix, induced_semimetric, KernelSpec,
    SemimetricSpec,
};

/// `dcov = DCOV_HSIC_FACTOR · hsic` when the semimetrics are induced by the
/// kernels, both at population level and for the V-statistics.
pub const DCOV_HSIC_FACTOR: f64 = 4.0;

/// `¼·𝔼_{XY}𝔼_{X'Y'}[d²(X,Y') + d²(X',Y) − 2d²(X,Y)]`.
pub fn exact_mcov(j: &DiscreteJoint, d2: &SemimetricSpec) -> Result<f64> {
    let d2 = d2.resolve(&j.pooled_support()?)?;
    let d = cross_distance_matrix(&d2, j.support_x(), j.support_y())?;
    let p = j.probabilities();
    let (px, py) = (j.marginal_x(), j.marginal_y());
    let coupled = p.component_mul(&d).sum();
    // 𝔼_{XY'} and 𝔼_{X'Y} are the same number; both are spelled out.
    let x_then_y: f64 = (0..d.nrows())
        .map(|a| px[a] * (0..d.ncols()).map(|b| d[(a, b)] * py[b]).sum::<f64>())
        .sum();
    let y_then_x: f64 = (0..d.ncols())
        .map(|b| py[b] * (0..d.nrows()).map(|a| d[(a, b)] * px[a]).sum::<f64>())
        .sum();
    Ok(0.25 * (x_then_y + y_then_x - 2.0 * coupled))
}

/// Centres a Gram matrix with respect to the weights `w`:
/// `K̃[a,a'] = ⟨φ(u_a) − μ, φ(u_a') − μ⟩` with `μ = Σ w·φ`.
fn center_weighted(k: &DMatrix<f64>, w: &DVector<f64>) -> DMatrix<f64> {
    let kw = k * w;
    let grand = w.dot(&kw);
    DMatrix::from_fn(k.nrows(), k.ncols(), |a, b| {
        k[(a, b)] - kw[a] - kw[b] + grand
    })
}

/// `Σ_{a,a'} A[a,a']·(P·B·Pᵀ)[a,a']`, i.e. `𝔼_{XY}𝔼_{X'Y'} A(X,X')·B(Y,Y')`.
fn coupled_pair_sum(a: &DMatrix<f64>, b: &DMatrix<f64>, p: &DMatrix<f64>) -> f64 {
    let pbp = p * b * p.transpose();
    a.component_mul(&pbp).sum()
}

/// `‖Σ_YX‖²_HS` computed directly from centred population Gram matrices.
pub fn exact_hsic(j: &DiscreteJoint, k: &KernelSpec, l: &KernelSpec) -> Result<f64> {
    let k = k.resolve(j.support_x())?;
    let l = l.resolve(j.support_y())?;
    let kx = center_weighted(
        &gram_matrix(&k, j.support_x())?,
        &DVector::from_vec(j.marginal_x().to_vec()),
    );
    let ly = center_weighted(
        &gram_matrix(&l, j.support_y())?,
        &DVector::from_vec(j.marginal_y().to_vec()),
    );
    Ok(coupled_pair_sum(&kx, &ly, j.probabilities()))
}

/// HSIC by way of the three-term dCov expression on the kernels' induced
/// semimetrics; an independent route to [`exact_hsic`].
pub fn exact_hsic_via_dcov(j: &DiscreteJoint, k: &KernelSpec, l: &KernelSpec) -> Result<f64> {
    let k = k.resolve(j.support_x())?;
    let l = l.resolve(j.support_y())?;
    Ok(exact_dcov(j, &induced_semimetric(&k), &induced_semimetric(&l))? / DCOV_HSIC_FACTOR)
}

/// `𝔼ρx(X,X')ρy(Y,Y') + 𝔼ρx·𝔼ρy − 2·𝔼_{XY}[𝔼_{X'}ρx(X,X')·𝔼_{Y'}ρy(Y,Y')]`.
pub fn exact_dcov(j: &DiscreteJoint, rx: &SemimetricSpec, ry: &SemimetricSpec) -> Result<f64> {
    let rx = rx.resolve(j.support_x())?;
    let ry = ry.resolve(j.support_y())?;
    let dx = distance_matrix(&rx, j.support_x())?;
    let dy = distance_matrix(&ry, j.support_y())?;
    let p = j.probabilities();
    let px = DVector::from_vec(j.marginal_x().to_vec());
    let py = DVector::from_vec(j.marginal_y().to_vec());
    let first = coupled_pair_sum(&dx, &dy, p);
    let dx_px = &dx * &px;
    let dy_py = &dy * &py;
    let second = px.dot(&dx_px) * py.dot(&dy_py);
    let third = (dx_px.transpose() * p * dy_py)[(0, 0)];
    Ok(first + second - 2.0 * third)
}
