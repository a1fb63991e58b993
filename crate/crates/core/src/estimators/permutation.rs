use std::fmt;

use nalgebra::DMatrix;
use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::Serialize;

use super::{dcov_vstat, hsic_vstat, mcov_plugin, mcov_trace, CrossCovEstimate, PairedSample};
use crate::error::{Error, Result};
use crate::kernel_metric::{
    cross_distance_matrix, cross_gram_matrix, distance_matrix, KernelSpec, SemimetricSpec,
};
use crate::seeding::stream_rng;

/// Default number of permutations.
pub const DEFAULT_PERMUTATIONS: usize = 999;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Alternative {
    /// Extreme in absolute value.
    TwoSided,
    /// Large values only.
    Greater,
}

/// A statistic together with the kernels or semimetrics it is computed with.
#[derive(Clone, Debug, PartialEq)]
pub enum Estimator {
    McovPlugin(SemimetricSpec),
    McovTrace(KernelSpec),
    Hsic {
        k: KernelSpec,
        l: KernelSpec,
    },
    Dcov {
        rx: SemimetricSpec,
        ry: SemimetricSpec,
    },
}

impl Estimator {
    pub fn id(&self) -> &'static str {
        match self {
            Estimator::McovPlugin(_) => "mcov",
            Estimator::McovTrace(_) => "mcov-trace",
            Estimator::Hsic { .. } => "hsic",
            Estimator::Dcov { .. } => "dcov",
        }
    }

    /// mCov is signed, so it is tested two-sided; HSIC and dCov are
    /// nonnegative and tested one-sided.
    pub fn default_alternative(&self) -> Alternative {
        match self {
            Estimator::McovPlugin(_) | Estimator::McovTrace(_) => Alternative::TwoSided,
            Estimator::Hsic { .. } | Estimator::Dcov { .. } => Alternative::Greater,
        }
    }

    /// Human-readable rendering of the kernels/semimetrics involved.
    pub fn spec_string(&self) -> String {
        fn pair(a: String, b: String) -> String {
            if a == b {
                a
            } else {
                format!("x={a} y={b}")
            }
        }
        match self {
            Estimator::McovPlugin(d2) => d2.to_string(),
            Estimator::McovTrace(k) => k.to_string(),
            Estimator::Hsic { k, l } => pair(k.to_string(), l.to_string()),
            Estimator::Dcov { rx, ry } => pair(rx.to_string(), ry.to_string()),
        }
    }

    /// Fixes data-dependent parameters against `s`.
    pub fn resolve(&self, s: &PairedSample) -> Result<Estimator> {
        Ok(match self {
            Estimator::McovPlugin(d2) => Estimator::McovPlugin(d2.resolve(&s.pooled()?)?),
            Estimator::McovTrace(k) => Estimator::McovTrace(k.resolve(&s.pooled()?)?),
            Estimator::Hsic { k, l } => Estimator::Hsic {
                k: k.resolve(s.x())?,
                l: l.resolve(s.y())?,
            },
            Estimator::Dcov { rx, ry } => Estimator::Dcov {
                rx: rx.resolve(s.x())?,
                ry: ry.resolve(s.y())?,
            },
        })
    }

    pub fn statistic(&self, s: &PairedSample) -> Result<f64> {
        match self {
            Estimator::McovPlugin(d2) => mcov_plugin(s, d2),
            Estimator::McovTrace(k) => mcov_trace(s, k),
            Estimator::Hsic { k, l } => hsic_vstat(s, k, l),
            Estimator::Dcov { rx, ry } => dcov_vstat(s, rx, ry),
        }
    }

    /// Precomputes the matrices the statistic needs so it can be evaluated
    /// under many re-pairings.
    pub fn prepare(&self, s: &PairedSample) -> Result<PreparedStatistic> {
        let n = s.len();
        let inner = match self.resolve(s)? {
            Estimator::McovPlugin(d2) => {
                let cross = cross_distance_matrix(&d2, s.x(), s.y())?;
                let grand = mean(&cross);
                Prepared::Mcov {
                    cross,
                    grand,
                    plugin: true,
                }
            }
            Estimator::McovTrace(k) => {
                let cross = cross_gram_matrix(&k, s.x(), s.y())?;
                let grand = mean(&cross);
                Prepared::Mcov {
                    cross,
                    grand,
                    plugin: false,
                }
            }
            Estimator::Hsic { k, l } => Prepared::Hsic(CrossCovEstimate::new(s, &k, &l)?),
            Estimator::Dcov { rx, ry } => {
                let dx = distance_matrix(&rx, s.x())?;
                let dy = distance_matrix(&ry, s.y())?;
                let nf = n as f64;
                let row_x: Vec<f64> = (0..n).map(|i| dx.column(i).sum() / nf).collect();
                let row_y: Vec<f64> = (0..n).map(|i| dy.column(i).sum() / nf).collect();
                let mean_x = row_x.iter().sum::<f64>() / nf;
                let mean_y = row_y.iter().sum::<f64>() / nf;
                Prepared::Dcov {
                    dx,
                    dy,
                    row_x,
                    row_y,
                    mean_x,
                    mean_y,
                }
            }
        };
        Ok(PreparedStatistic { inner, n })
    }
}

impl fmt::Display for Estimator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}[{}]", self.id(), self.spec_string())
    }
}

fn mean(m: &DMatrix<f64>) -> f64 {
    m.as_slice().iter().sum::<f64>() / m.len() as f64
}

#[derive(Clone, Debug)]
enum Prepared {
    Mcov {
        cross: DMatrix<f64>,
        grand: f64,
        plugin: bool,
    },
    Hsic(CrossCovEstimate),
    Dcov {
        dx: DMatrix<f64>,
        dy: DMatrix<f64>,
        row_x: Vec<f64>,
        row_y: Vec<f64>,
        mean_x: f64,
        mean_y: f64,
    },
}

/// A statistic with its matrices computed once, evaluable under any
/// re-pairing of the y side.
#[derive(Clone, Debug)]
pub struct PreparedStatistic {
    inner: Prepared,
    n: usize,
}

impl PreparedStatistic {
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn observed(&self) -> f64 {
        let identity: Vec<usize> = (0..self.n).collect();
        self.evaluate(&identity)
    }

    /// The statistic on pairs `(x_i, y_{perm[i]})`.
    pub fn evaluate(&self, perm: &[usize]) -> f64 {
        let n = self.n;
        let nf = n as f64;
        debug_assert_eq!(perm.len(), n);
        match &self.inner {
            Prepared::Mcov {
                cross,
                grand,
                plugin,
            } => {
                let diag = perm
                    .iter()
                    .enumerate()
                    .map(|(i, &p)| cross[(i, p)])
                    .sum::<f64>()
                    / nf;
                if *plugin {
                    0.5 * (grand - diag)
                } else {
                    diag - grand
                }
            }
            Prepared::Hsic(cc) => cc.hsic_permuted(perm),
            Prepared::Dcov {
                dx,
                dy,
                row_x,
                row_y,
                mean_x,
                mean_y,
            } => {
                let (a, b) = (dx.as_slice(), dy.as_slice());
                let mut prod = 0.0;
                for j in 0..n {
                    let acol = &a[j * n..(j + 1) * n];
                    let bcol = &b[perm[j] * n..(perm[j] + 1) * n];
                    let mut col = 0.0;
                    for i in 0..n {
                        col += acol[i] * bcol[perm[i]];
                    }
                    prod += col;
                }
                let cross: f64 = (0..n).map(|i| row_x[i] * row_y[perm[i]]).sum();
                prod / (nf * nf) + mean_x * mean_y - 2.0 * cross / nf
            }
        }
    }
}

/// Outcome of a permutation test.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TestResult {
    pub statistic: f64,
    pub p_value: f64,
    #[serde(rename = "B")]
    pub permutations: usize,
    pub seed: u64,
    pub estimator: String,
    pub kernel_or_metric_spec: String,
}

/// Permutation test of independence between the x and y sides of `s`.
///
/// The y side is re-paired `b` times; permutation `i` uses stream `i` of
/// `seed`, so the result is the same under any thread count. The p-value is
/// `(1 + #{T_b ≥ T_obs}) / (b + 1)`, on absolute values for two-sided tests.
/// `alternative` defaults to [`Estimator::default_alternative`].
pub fn permutation_test(
    est: &Estimator,
    s: &PairedSample,
    b: usize,
    seed: u64,
    alternative: Option<Alternative>,
) -> Result<TestResult> {
    if b < 1 {
        return Err(Error::InvalidParameter(
            "number of permutations must be ≥ 1".into(),
        ));
    }
    let resolved = est.resolve(s)?;
    let prepared = resolved.prepare(s)?;
    let alternative = alternative.unwrap_or_else(|| est.default_alternative());
    let n = s.len();
    let observed = prepared.observed();

    let permuted: Vec<f64> = (0..b)
        .into_par_iter()
        .map(|i| {
            let mut rng = stream_rng(seed, i as u64);
            let mut perm: Vec<usize> = (0..n).collect();
            perm.shuffle(&mut rng);
            prepared.evaluate(&perm)
        })
        .collect();

    let exceed = match alternative {
        Alternative::Greater => permuted.iter().filter(|&&t| t >= observed).count(),
        Alternative::TwoSided => permuted
            .iter()
            .filter(|&&t| t.abs() >= observed.abs())
            .count(),
    };
    Ok(TestResult {
        statistic: observed,
        p_value: (1 + exceed) as f64 / (b + 1) as f64,
        permutations: b,
        seed,
        estimator: est.id().to_string(),
        kernel_or_metric_spec: resolved.spec_string(),
    })
}
