//! Generators for the two dependence structures that metric covariance
//! misses, plus an independent null, and the Monte Carlo studies run on them.
//!
//! * `orthogonal_linear`: `X = (Z, 0)`, `Y = (0, Z)`. Features under the
//!   linear kernel live in orthogonal subspaces, so every inner product
//!   `⟨x_i, y_j⟩` vanishes.
//! * `coupled_mixture`: a shared Bernoulli label `Z` selects the mixture
//!   component of both `X` and `Y`. The first coordinates are positively
//!   correlated, the second negatively, and `‖X − Y‖` has the same law as
//!   `‖X − Y'‖` for an independent copy `Y'`.
//! * `independent`: `X, Y` independent standard normal in ℝ².

mod ks;

pub use ks::{kolmogorov_survival, ks_two_sample, KsResult};

use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimators::{permutation_test, Estimator, PairedSample};
use crate::kernel_metric::PointSet;
use crate::seeding::derive_seed;

/// Default mixture noise scale.
pub const DEFAULT_SIGMA: f64 = 0.5;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScenarioName {
    OrthogonalLinear,
    CoupledMixture,
    Independent,
}

impl ScenarioName {
    pub fn as_str(self) -> &'static str {
        match self {
            ScenarioName::OrthogonalLinear => "orthogonal_linear",
            ScenarioName::CoupledMixture => "coupled_mixture",
            ScenarioName::Independent => "independent",
        }
    }
}

impl fmt::Display for ScenarioName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ScenarioName {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "orthogonal_linear" => Ok(ScenarioName::OrthogonalLinear),
            "coupled_mixture" => Ok(ScenarioName::CoupledMixture),
            "independent" => Ok(ScenarioName::Independent),
            other => Err(Error::Parse(format!(
                "unknown scenario `{other}` (expected orthogonal_linear, coupled_mixture or independent)"
            ))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct ScenarioSpec {
    pub name: ScenarioName,
    pub n: usize,
    /// Mixture noise scale; only read by `coupled_mixture`.
    pub sigma: f64,
    pub seed: u64,
}

impl ScenarioSpec {
    pub fn new(name: ScenarioName, n: usize, sigma: f64, seed: u64) -> Result<Self> {
        if n < 2 {
            return Err(Error::TooFewObservations { min: 2, got: n });
        }
        if !(sigma.is_finite() && sigma > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "sigma must be > 0, got {sigma}"
            )));
        }
        Ok(Self {
            name,
            n,
            sigma,
            seed,
        })
    }

    pub fn with_seed(self, seed: u64) -> Self {
        Self { seed, ..self }
    }

    pub fn generate(&self) -> Result<PairedSample> {
        match self.name {
            ScenarioName::OrthogonalLinear => gen_orthogonal_linear(self.n, self.seed),
            ScenarioName::CoupledMixture => gen_coupled_mixture(self.n, self.sigma, self.seed),
            ScenarioName::Independent => gen_independent(self.n, self.seed),
        }
    }
}

/// `x_i = (Z_i, 0)`, `y_i = (0, Z_i)` with `Z_i` standard normal.
pub fn gen_orthogonal_linear(n: usize, seed: u64) -> Result<PairedSample> {
    if n < 2 {
        return Err(Error::TooFewObservations { min: 2, got: n });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut xs = Vec::with_capacity(2 * n);
    let mut ys = Vec::with_capacity(2 * n);
    for _ in 0..n {
        let z: f64 = StandardNormal.sample(&mut rng);
        xs.extend([z, 0.0]);
        ys.extend([0.0, z]);
    }
    PairedSample::new(PointSet::new(2, xs)?, PointSet::new(2, ys)?)
}

/// Component means of a two-component coupled mixture in ℝ², indexed by the
/// shared label `Z ∈ {0, 1}`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MixtureMeans {
    pub x: [[f64; 2]; 2],
    pub y: [[f64; 2]; 2],
}

impl MixtureMeans {
    /// `X ~ N([−1,+1]) | N([+1,−1])`, `Y ~ N([−1,−1]) | N([+1,+1])`.
    pub const COUPLED: MixtureMeans = MixtureMeans {
        x: [[-1.0, 1.0], [1.0, -1.0]],
        y: [[-1.0, -1.0], [1.0, 1.0]],
    };
}

/// Draws `Z_i ~ Bernoulli(½)`, then `X_i ~ N(means.x[Z_i], σ²I)` and
/// `Y_i ~ N(means.y[Z_i], σ²I)` independently given `Z_i`.
pub fn gen_mixture(n: usize, sigma: f64, means: &MixtureMeans, seed: u64) -> Result<PairedSample> {
    if n < 2 {
        return Err(Error::TooFewObservations { min: 2, got: n });
    }
    if !(sigma.is_finite() && sigma > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "sigma must be > 0, got {sigma}"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut xs = Vec::with_capacity(2 * n);
    let mut ys = Vec::with_capacity(2 * n);
    for _ in 0..n {
        let z = usize::from(rng.random_bool(0.5));
        for c in 0..2 {
            let e: f64 = StandardNormal.sample(&mut rng);
            xs.push(means.x[z][c] + sigma * e);
        }
        for c in 0..2 {
            let e: f64 = StandardNormal.sample(&mut rng);
            ys.push(means.y[z][c] + sigma * e);
        }
    }
    PairedSample::new(PointSet::new(2, xs)?, PointSet::new(2, ys)?)
}

pub fn gen_coupled_mixture(n: usize, sigma: f64, seed: u64) -> Result<PairedSample> {
    gen_mixture(n, sigma, &MixtureMeans::COUPLED, seed)
}

/// Independent standard normal `X` and `Y` in ℝ².
pub fn gen_independent(n: usize, seed: u64) -> Result<PairedSample> {
    if n < 2 {
        return Err(Error::TooFewObservations { min: 2, got: n });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let xs: Vec<f64> = (0..2 * n)
        .map(|_| StandardNormal.sample(&mut rng))
        .collect();
    let ys: Vec<f64> = (0..2 * n)
        .map(|_| StandardNormal.sample(&mut rng))
        .collect();
    PairedSample::new(PointSet::new(2, xs)?, PointSet::new(2, ys)?)
}

fn pair_norms(s: &PairedSample) -> Vec<f64> {
    s.x()
        .iter()
        .zip(s.y().iter())
        .map(|(x, y)| {
            x.iter()
                .zip(y)
                .map(|(a, b)| (a - b) * (a - b))
                .sum::<f64>()
                .sqrt()
        })
        .collect()
}

/// Two-sample KS comparison of `‖X_i − Y_i‖` (coupled pairs) against
/// `‖X'_i − Y''_i‖`, where `X'` and `Y''` come from two further independent
/// draws so the second sample follows the product of the marginals.
pub fn norm_distribution_check(spec: &ScenarioSpec) -> Result<KsResult> {
    if spec.name != ScenarioName::CoupledMixture {
        return Err(Error::InvalidInput(format!(
            "the norm distribution check applies to coupled_mixture, not {}",
            spec.name
        )));
    }
    norm_distribution_check_with_means(spec.n, spec.sigma, &MixtureMeans::COUPLED, spec.seed)
}

/// [`norm_distribution_check`] for arbitrary mixture means.
pub fn norm_distribution_check_with_means(
    n: usize,
    sigma: f64,
    means: &MixtureMeans,
    seed: u64,
) -> Result<KsResult> {
    let coupled = gen_mixture(n, sigma, means, derive_seed(seed, 0))?;
    let x_source = gen_mixture(n, sigma, means, derive_seed(seed, 1))?;
    let y_source = gen_mixture(n, sigma, means, derive_seed(seed, 2))?;
    let decoupled = PairedSample::new(x_source.x().clone(), y_source.y().clone())?;
    Ok(ks_two_sample(
        &pair_norms(&coupled),
        &pair_norms(&decoupled),
    ))
}

/// Rejection rate of [`norm_distribution_check`] over replications.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct NormCheckReport {
    pub scenario: ScenarioSpec,
    pub alpha: f64,
    pub reps: usize,
    pub rejections: usize,
    pub rejection_rate: f64,
    pub monte_carlo_se: f64,
    pub mean_ks_statistic: f64,
}

impl NormCheckReport {
    pub const CSV_HEADER: &'static str =
        "scenario,n,sigma,seed,alpha,reps,rejections,rejection_rate,monte_carlo_se,mean_ks_statistic";

    pub fn csv_row(&self) -> String {
        format!(
            "{},{},{},{},{},{},{},{},{},{}",
            self.scenario.name,
            self.scenario.n,
            self.scenario.sigma,
            self.scenario.seed,
            self.alpha,
            self.reps,
            self.rejections,
            self.rejection_rate,
            self.monte_carlo_se,
            self.mean_ks_statistic
        )
    }
}

/// Replication `r` runs [`norm_distribution_check`] with seed
/// `derive(master, r)` and rejects when the KS p-value is ≤ `alpha`.
pub fn norm_check_study(
    spec: &ScenarioSpec,
    alpha: f64,
    reps: usize,
    master_seed: u64,
) -> Result<NormCheckReport> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::InvalidParameter(format!(
            "alpha must lie in (0, 1), got {alpha}"
        )));
    }
    if reps < 1 {
        return Err(Error::InvalidParameter("reps must be ≥ 1".into()));
    }
    let results: Vec<KsResult> = (0..reps)
        .into_par_iter()
        .map(|r| norm_distribution_check(&spec.with_seed(derive_seed(master_seed, r as u64))))
        .collect::<Result<_>>()?;
    let rejections = results.iter().filter(|r| r.p_value <= alpha).count();
    let rate = rejections as f64 / reps as f64;
    Ok(NormCheckReport {
        scenario: spec.with_seed(master_seed),
        alpha,
        reps,
        rejections,
        rejection_rate: rate,
        monte_carlo_se: (rate * (1.0 - rate) / reps as f64).sqrt(),
        mean_ks_statistic: results.iter().map(|r| r.ks_statistic).sum::<f64>() / reps as f64,
    })
}

/// Rejection rate of a permutation test over independent scenario draws.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PowerReport {
    pub scenario: ScenarioSpec,
    pub estimator: String,
    pub kernel_or_metric_spec: String,
    pub alpha: f64,
    pub reps: usize,
    #[serde(rename = "B")]
    pub permutations: usize,
    pub rejections: usize,
    pub rejection_rate: f64,
    pub monte_carlo_se: f64,
}

impl PowerReport {
    pub const CSV_HEADER: &'static str =
        "scenario,n,sigma,seed,estimator,kernel_or_metric_spec,alpha,reps,B,rejections,rejection_rate,monte_carlo_se";

    pub fn csv_row(&self) -> String {
        let spec = if self.kernel_or_metric_spec.contains([',', '"']) {
            format!("\"{}\"", self.kernel_or_metric_spec.replace('"', "\"\""))
        } else {
            self.kernel_or_metric_spec.clone()
        };
        format!(
            "{},{},{},{},{},{},{},{},{},{},{},{}",
            self.scenario.name,
            self.scenario.n,
            self.scenario.sigma,
            self.scenario.seed,
            self.estimator,
            spec,
            self.alpha,
            self.reps,
            self.permutations,
            self.rejections,
            self.rejection_rate,
            self.monte_carlo_se
        )
    }

    /// Whether the rate lies within `k` Monte Carlo standard errors of
    /// `target`, the errors taken at the target rate.
    pub fn within_se_of(&self, target: f64, k: f64) -> bool {
        let se = (target * (1.0 - target) / self.reps as f64).sqrt();
        (self.rejection_rate - target).abs() <= k * se
    }
}

/// Replication `r` draws its data with seed `derive(master, 2r)` and
/// permutes with seed `derive(master, 2r + 1)`; the scenario's own seed is
/// ignored. Kernel parameters are resolved per replication before any
/// permutation.
pub fn power_study(
    spec: &ScenarioSpec,
    estimator: &Estimator,
    alpha: f64,
    reps: usize,
    permutations: usize,
    master_seed: u64,
) -> Result<PowerReport> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::InvalidParameter(format!(
            "alpha must lie in (0, 1), got {alpha}"
        )));
    }
    if reps < 1 {
        return Err(Error::InvalidParameter("reps must be ≥ 1".into()));
    }
    if permutations < 1 {
        return Err(Error::InvalidParameter(
            "number of permutations must be ≥ 1".into(),
        ));
    }
    let outcomes: Vec<Result<bool>> = (0..reps)
        .into_par_iter()
        .map(|r| {
            let r = r as u64;
            let sample = spec.with_seed(derive_seed(master_seed, 2 * r)).generate()?;
            let test = permutation_test(
                estimator,
                &sample,
                permutations,
                derive_seed(master_seed, 2 * r + 1),
                None,
            )?;
            Ok(test.p_value <= alpha)
        })
        .collect();
    let mut rejections = 0;
    for o in outcomes {
        rejections += usize::from(o?);
    }
    let rate = rejections as f64 / reps as f64;
    Ok(PowerReport {
        scenario: spec.with_seed(master_seed),
        estimator: estimator.id().to_string(),
        kernel_or_metric_spec: estimator.spec_string(),
        alpha,
        reps,
        permutations,
        rejections,
        rejection_rate: rate,
        monte_carlo_se: (rate * (1.0 - rate) / reps as f64).sqrt(),
    })
}
