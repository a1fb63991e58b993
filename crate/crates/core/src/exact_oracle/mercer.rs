//! Mercer eigensystems on a finite support and the eigen-expansions of mCov
//! and HSIC.
//!
//! With reference measure `μ` on support points `u_1..u_m`, the integral
//! operator of `k` is the matrix `K·diag(μ)`. Symmetrising gives
//! `M^{1/2} K M^{1/2} = U Λ Uᵀ`, and `e_j = M^{-1/2} u_j` are orthonormal in
//! `L²(μ)` with `k(u,v) = Σ_j λ_j e_j(u) e_j(v)` on the support.
//!
//! For `X, Y` on one space,
//!
//! ```text
//! mCov = Σ_j     λ_j     cov[e_j(X), e_j(Y)]
//! HSIC = Σ_i Σ_j λ_i λ_j cov[e_i(X), e_j(Y)]²
//! ```
//!
//! mCov pairs each basis function only with itself, so positive and negative
//! terms can cancel; every HSIC term is nonnegative.

use std::collections::HashMap;

use nalgebra::{DMatrix, SymmetricEigen};
use serde::Serialize;

use super::DiscreteJoint;
use crate::error::{Error, Result};
use crate::kernel_metric::{gram_matrix, KernelSpec, PointSet};

/// Eigenvalues below this fraction of the largest are dropped.
pub const EIGENVALUE_CUTOFF: f64 = 1e-12;

#[derive(Clone, Debug, PartialEq)]
pub struct MercerSystem {
    support: PointSet,
    weights: Vec<f64>,
    /// Retained eigenvalues, descending.
    eigenvalues: Vec<f64>,
    /// `values[(u, j)] = e_j(u_u)`.
    values: DMatrix<f64>,
}

impl MercerSystem {
    pub fn support(&self) -> &PointSet {
        &self.support
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }

    /// Eigenfunction values, one row per support point, one column per
    /// retained eigenvalue.
    pub fn values(&self) -> &DMatrix<f64> {
        &self.values
    }

    pub fn rank(&self) -> usize {
        self.eigenvalues.len()
    }

    /// `max_{i,j} |Σ_u μ(u)·e_i(u)·e_j(u) − δ_ij|`.
    pub fn orthonormality_error(&self) -> f64 {
        let r = self.rank();
        let mut worst = 0.0f64;
        for i in 0..r {
            for j in 0..r {
                let ip: f64 = (0..self.support.len())
                    .map(|u| self.weights[u] * self.values[(u, i)] * self.values[(u, j)])
                    .sum();
                let target = if i == j { 1.0 } else { 0.0 };
                worst = worst.max((ip - target).abs());
            }
        }
        worst
    }

    /// `Σ_j λ_j·e_j(u)·e_j(v)` for support indices `u, v`.
    pub fn reconstruct(&self, u: usize, v: usize) -> f64 {
        self.eigenvalues
            .iter()
            .enumerate()
            .map(|(j, l)| l * self.values[(u, j)] * self.values[(v, j)])
            .sum()
    }
}

/// Solves the weighted eigenproblem of `k` on `support` under weights `mu`.
///
/// Eigenvectors are signed so that their largest-magnitude entry is positive
/// (ties resolved towards the last support point).
pub fn mercer_basis(k: &KernelSpec, support: &PointSet, mu: &[f64]) -> Result<MercerSystem> {
    let m = support.len();
    if mu.len() != m {
        return Err(Error::InvalidInput(format!(
            "{} weights for {m} support points",
            mu.len()
        )));
    }
    if let Some(i) = mu.iter().position(|&w| !(w.is_finite() && w > 0.0)) {
        return Err(Error::InvalidInput(format!(
            "weight {i} is {}; zero-weight points must be dropped before building a Mercer basis",
            mu[i]
        )));
    }
    let total: f64 = mu.iter().sum();
    if (total - 1.0).abs() > 1e-12 {
        return Err(Error::ProbabilitySum(total));
    }
    let mut seen = HashMap::new();
    for (i, p) in support.iter().enumerate() {
        let key: Vec<u64> = p.iter().map(|v| (v + 0.0).to_bits()).collect();
        if let Some(first) = seen.insert(key, i) {
            return Err(Error::InvalidInput(format!(
                "support points {first} and {i} coincide"
            )));
        }
    }

    let gram = gram_matrix(k, support)?;
    let sqrt_mu: Vec<f64> = mu.iter().map(|w| w.sqrt()).collect();
    let sym = DMatrix::from_fn(m, m, |a, b| sqrt_mu[a] * gram[(a, b)] * sqrt_mu[b]);
    let eig = SymmetricEigen::new(sym);

    let mut order: Vec<usize> = (0..m).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    let lambda_max = eig.eigenvalues[order[0]].max(0.0);
    let kept: Vec<usize> = order
        .into_iter()
        .filter(|&j| eig.eigenvalues[j] > EIGENVALUE_CUTOFF * lambda_max)
        .collect();

    let mut values = DMatrix::zeros(m, kept.len());
    for (c, &j) in kept.iter().enumerate() {
        let col = eig.eigenvectors.column(j);
        let mut pivot = 0;
        for u in 0..m {
            if col[u].abs() >= col[pivot].abs() - 1e-12 {
                pivot = u;
            }
        }
        let sign = if col[pivot] < 0.0 { -1.0 } else { 1.0 };
        for u in 0..m {
            values[(u, c)] = sign * col[u] / sqrt_mu[u];
        }
    }
    Ok(MercerSystem {
        support: support.clone(),
        weights: mu.to_vec(),
        eigenvalues: kept.iter().map(|&j| eig.eigenvalues[j]).collect(),
        values,
    })
}

/// Per-eigenfunction terms of mCov.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct McovDecomposition {
    pub total: f64,
    pub eigenvalues: Vec<f64>,
    /// `cov[e_j(X), e_j(Y)]`.
    pub covariances: Vec<f64>,
    /// `λ_j·cov[e_j(X), e_j(Y)]`.
    pub terms: Vec<f64>,
}

/// Per-pair terms of HSIC.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct HsicDecomposition {
    pub total: f64,
    pub eigenvalues: Vec<f64>,
    /// `terms[i][j] = λ_i·λ_j·cov[e_i(X), e_j(Y)]²`.
    pub terms: Vec<Vec<f64>>,
}

/// Mercer system on `support_x ∪ support_y` with `μ = ½(p_x + p_y)`, and the
/// matrix `C[i,j] = cov[e_i(X), e_j(Y)]`.
fn cross_covariances(j: &DiscreteJoint, k: &KernelSpec) -> Result<(MercerSystem, DMatrix<f64>)> {
    let pooled = j.pooled_support()?;
    let k = k.resolve(&pooled)?;
    let (px, py) = (j.marginal_x(), j.marginal_y());

    // Union of supports with merged coincident points.
    let mut slot: HashMap<Vec<u64>, usize> = HashMap::new();
    let mut union_rows: Vec<Vec<f64>> = Vec::new();
    let mut weight: Vec<f64> = Vec::new();
    let mut locate = |p: &[f64], w: f64| -> usize {
        let key: Vec<u64> = p.iter().map(|v| (v + 0.0).to_bits()).collect();
        let s = *slot.entry(key).or_insert_with(|| {
            union_rows.push(p.to_vec());
            weight.push(0.0);
            union_rows.len() - 1
        });
        weight[s] += w;
        s
    };
    let x_slot: Vec<usize> = j
        .support_x()
        .iter()
        .zip(px)
        .map(|(p, &w)| locate(p, 0.5 * w))
        .collect();
    let y_slot: Vec<usize> = j
        .support_y()
        .iter()
        .zip(py)
        .map(|(p, &w)| locate(p, 0.5 * w))
        .collect();

    // Points without mass carry no covariance; drop them from the basis.
    let mut compact = vec![usize::MAX; union_rows.len()];
    let mut kept_rows = Vec::new();
    let mut mu = Vec::new();
    for (s, row) in union_rows.iter().enumerate() {
        if weight[s] > 0.0 {
            compact[s] = kept_rows.len();
            kept_rows.push(row.clone());
            mu.push(weight[s]);
        }
    }
    let mu_total: f64 = mu.iter().sum();
    for w in &mut mu {
        *w /= mu_total;
    }
    let support = PointSet::from_rows(&kept_rows)?;
    let system = mercer_basis(&k, &support, &mu)?;

    let r = system.rank();
    let e = system.values();
    let p = j.probabilities();
    let eval_x = |a: usize, i: usize| {
        if px[a] > 0.0 {
            e[(compact[x_slot[a]], i)]
        } else {
            0.0
        }
    };
    let eval_y = |b: usize, i: usize| {
        if py[b] > 0.0 {
            e[(compact[y_slot[b]], i)]
        } else {
            0.0
        }
    };
    let mean_x: Vec<f64> = (0..r)
        .map(|i| (0..px.len()).map(|a| px[a] * eval_x(a, i)).sum())
        .collect();
    let mean_y: Vec<f64> = (0..r)
        .map(|i| (0..py.len()).map(|b| py[b] * eval_y(b, i)).sum())
        .collect();
    let mut cov = DMatrix::zeros(r, r);
    for i in 0..r {
        for jj in 0..r {
            let mut joint = 0.0;
            for a in 0..px.len() {
                for b in 0..py.len() {
                    if p[(a, b)] > 0.0 {
                        joint += p[(a, b)] * eval_x(a, i) * eval_y(b, jj);
                    }
                }
            }
            cov[(i, jj)] = joint - mean_x[i] * mean_y[jj];
        }
    }
    Ok((system, cov))
}

/// `mCov = Σ_j λ_j·cov[e_j(X), e_j(Y)]` term by term.
pub fn mercer_mcov_decomposition(j: &DiscreteJoint, k: &KernelSpec) -> Result<McovDecomposition> {
    let (system, cov) = cross_covariances(j, k)?;
    let covariances: Vec<f64> = (0..system.rank()).map(|i| cov[(i, i)]).collect();
    let terms: Vec<f64> = system
        .eigenvalues()
        .iter()
        .zip(&covariances)
        .map(|(l, c)| l * c)
        .collect();
    Ok(McovDecomposition {
        total: terms.iter().sum(),
        eigenvalues: system.eigenvalues().to_vec(),
        covariances,
        terms,
    })
}

/// `HSIC = Σ_i Σ_j λ_i·λ_j·cov[e_i(X), e_j(Y)]²` term by term.
pub fn mercer_hsic_decomposition(j: &DiscreteJoint, k: &KernelSpec) -> Result<HsicDecomposition> {
    let (system, cov) = cross_covariances(j, k)?;
    let lambda = system.eigenvalues();
    let terms: Vec<Vec<f64>> = (0..system.rank())
        .map(|i| {
            (0..system.rank())
                .map(|jj| lambda[i] * lambda[jj] * cov[(i, jj)].powi(2))
                .collect()
        })
        .collect();
    Ok(HsicDecomposition {
        total: terms.iter().flatten().sum(),
        eigenvalues: lambda.to_vec(),
        terms,
    })
}
