use std::collections::HashMap;

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimators::PairedSample;
use crate::kernel_metric::PointSet;

/// Tolerance on `ΣΣP = 1`.
const SUM_TOL: f64 = 1e-12;

/// On-disk form: `{"support_x": [[..]], "support_y": [[..]], "P": [[..]]}`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct JointDocument {
    pub support_x: Vec<Vec<f64>>,
    pub support_y: Vec<Vec<f64>>,
    #[serde(rename = "P")]
    pub p: Vec<Vec<f64>>,
}

/// Joint law of `(X, Y)` on finite supports.
#[derive(Clone, Debug, PartialEq)]
pub struct DiscreteJoint {
    support_x: PointSet,
    support_y: PointSet,
    p: DMatrix<f64>,
    px: Vec<f64>,
    py: Vec<f64>,
}

fn point_key(p: &[f64]) -> Vec<u64> {
    // +0.0 and −0.0 are the same support point.
    p.iter().map(|v| (v + 0.0).to_bits()).collect()
}

fn reject_duplicates(s: &PointSet, side: &str) -> Result<()> {
    let mut seen = HashMap::new();
    for (i, p) in s.iter().enumerate() {
        if let Some(first) = seen.insert(point_key(p), i) {
            return Err(Error::InvalidInput(format!(
                "support_{side} points {first} and {i} coincide; merge them first"
            )));
        }
    }
    Ok(())
}

impl DiscreteJoint {
    pub fn new(support_x: PointSet, support_y: PointSet, p: DMatrix<f64>) -> Result<Self> {
        if p.shape() != (support_x.len(), support_y.len()) {
            return Err(Error::InvalidInput(format!(
                "P is {}x{} but supports have {} and {} points",
                p.nrows(),
                p.ncols(),
                support_x.len(),
                support_y.len()
            )));
        }
        for a in 0..p.nrows() {
            for b in 0..p.ncols() {
                let v = p[(a, b)];
                if !v.is_finite() || v < 0.0 {
                    return Err(Error::InvalidInput(format!(
                        "P[{a}][{b}] = {v} is not a probability"
                    )));
                }
            }
        }
        let total = p.sum();
        if (total - 1.0).abs() > SUM_TOL {
            return Err(Error::ProbabilitySum(total));
        }
        reject_duplicates(&support_x, "x")?;
        reject_duplicates(&support_y, "y")?;
        let px = (0..p.nrows()).map(|a| p.row(a).sum()).collect();
        let py = (0..p.ncols()).map(|b| p.column(b).sum()).collect();
        Ok(Self {
            support_x,
            support_y,
            p,
            px,
            py,
        })
    }

    pub fn from_document(doc: &JointDocument) -> Result<Self> {
        let rows = doc.p.len();
        let cols = doc.p.first().map_or(0, Vec::len);
        if let Some(r) = doc.p.iter().position(|r| r.len() != cols) {
            return Err(Error::InvalidInput(format!(
                "P row {r} has {} entries, expected {cols}",
                doc.p[r].len()
            )));
        }
        let p = DMatrix::from_fn(rows, cols, |a, b| doc.p[a][b]);
        Self::new(
            PointSet::from_rows(&doc.support_x)?,
            PointSet::from_rows(&doc.support_y)?,
            p,
        )
    }

    pub fn from_json_str(s: &str) -> Result<Self> {
        Self::from_document(&serde_json::from_str(s)?)
    }

    pub fn to_document(&self) -> JointDocument {
        JointDocument {
            support_x: self.support_x.to_rows(),
            support_y: self.support_y.to_rows(),
            p: (0..self.p.nrows())
                .map(|a| self.p.row(a).iter().copied().collect())
                .collect(),
        }
    }

    /// The independent coupling `P = p_x·p_yᵀ`.
    pub fn product(
        support_x: PointSet,
        px: &[f64],
        support_y: PointSet,
        py: &[f64],
    ) -> Result<Self> {
        let p = DMatrix::from_fn(px.len(), py.len(), |a, b| px[a] * py[b]);
        Self::new(support_x, support_y, p)
    }

    pub fn support_x(&self) -> &PointSet {
        &self.support_x
    }

    pub fn support_y(&self) -> &PointSet {
        &self.support_y
    }

    pub fn probabilities(&self) -> &DMatrix<f64> {
        &self.p
    }

    pub fn marginal_x(&self) -> &[f64] {
        &self.px
    }

    pub fn marginal_y(&self) -> &[f64] {
        &self.py
    }

    pub(crate) fn pooled_support(&self) -> Result<PointSet> {
        self.support_x.concat(&self.support_y).map_err(|_| {
            Error::InvalidInput(format!(
                "support_x and support_y must live in the same space, got dimensions {} and {}",
                self.support_x.dim(),
                self.support_y.dim()
            ))
        })
    }

    /// Largest `|P − p_x·p_yᵀ|` entry.
    pub fn dependence_gap(&self) -> f64 {
        let mut gap = 0.0f64;
        for a in 0..self.p.nrows() {
            for b in 0..self.p.ncols() {
                gap = gap.max((self.p[(a, b)] - self.px[a] * self.py[b]).abs());
            }
        }
        gap
    }

    /// Cell indices `(a, b)` of `n` i.i.d. draws.
    pub fn sample_cells(&self, n: usize, seed: u64) -> Vec<(usize, usize)> {
        let cols = self.p.ncols();
        let mut cdf = Vec::with_capacity(self.p.len());
        let mut acc = 0.0;
        for a in 0..self.p.nrows() {
            for b in 0..cols {
                acc += self.p[(a, b)];
                cdf.push(acc);
            }
        }
        let last_positive = (0..cdf.len())
            .rev()
            .find(|&c| self.p[(c / cols, c % cols)] > 0.0)
            .unwrap_or(0);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..n)
            .map(|_| {
                let u = rng.random::<f64>() * acc;
                let c = cdf.partition_point(|&v| v <= u).min(last_positive);
                (c / cols, c % cols)
            })
            .collect()
    }

    /// `n` i.i.d. pairs drawn from the joint.
    pub fn sample(&self, n: usize, seed: u64) -> Result<PairedSample> {
        let cells = self.sample_cells(n, seed);
        let xi: Vec<usize> = cells.iter().map(|c| c.0).collect();
        let yi: Vec<usize> = cells.iter().map(|c| c.1).collect();
        PairedSample::new(self.support_x.select(&xi), self.support_y.select(&yi))
    }

    /// The sample with `n·P[a,b]` copies of each pair; `n·P` must be integral.
    pub fn expand(&self, n: usize) -> Result<PairedSample> {
        let mut xi = Vec::with_capacity(n);
        let mut yi = Vec::with_capacity(n);
        for a in 0..self.p.nrows() {
            for b in 0..self.p.ncols() {
                let m = self.p[(a, b)] * n as f64;
                let count = m.round();
                if (m - count).abs() > 1e-9 {
                    return Err(Error::InvalidInput(format!(
                        "P[{a}][{b}]·{n} = {m} is not an integer multiplicity"
                    )));
                }
                for _ in 0..count as usize {
                    xi.push(a);
                    yi.push(b);
                }
            }
        }
        if xi.len() != n {
            return Err(Error::InvalidInput(format!(
                "multiplicities add to {}, expected {n}",
                xi.len()
            )));
        }
        PairedSample::new(self.support_x.select(&xi), self.support_y.select(&yi))
    }

    /// The empirical law of a sample, merging repeated points.
    pub fn empirical(s: &PairedSample) -> Result<Self> {
        fn index(pts: &PointSet) -> (Vec<usize>, Vec<usize>) {
            let mut map = HashMap::new();
            let mut reps = Vec::new();
            let idx = pts
                .iter()
                .enumerate()
                .map(|(i, p)| {
                    *map.entry(point_key(p)).or_insert_with(|| {
                        reps.push(i);
                        reps.len() - 1
                    })
                })
                .collect();
            (idx, reps)
        }
        let (xi, xr) = index(s.x());
        let (yi, yr) = index(s.y());
        let mut counts = DMatrix::<f64>::zeros(xr.len(), yr.len());
        for (a, b) in xi.into_iter().zip(yi) {
            counts[(a, b)] += 1.0;
        }
        let p = counts / s.len() as f64;
        Self::new(s.x().select(&xr), s.y().select(&yr), p)
    }
}
