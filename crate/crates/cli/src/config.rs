use std::path::{Path, PathBuf};

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Deserialize;

const EXIT_CODES: &str = "\
Exit codes:
  0  success
  1  validate: the matrix is not of negative type
  2  usage error, unreadable or malformed input, invalid parameters

Environment:
  METRICDEP_THREADS  cap on worker threads (default: all cores)";

#[derive(Debug, Parser)]
#[command(name = "metricdep", version, about = "Metric covariance, HSIC and distance covariance on paired samples", after_help = EXIT_CODES)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Compute a dependence statistic on a paired-sample CSV.
    Compute(SampleArgs),
    /// Permutation test of independence on a paired-sample CSV.
    Test(SampleArgs),
    /// Exact population values for a discrete joint law given as JSON.
    Oracle(OracleArgs),
    /// Monte Carlo study on a synthetic scenario.
    Scenario(ScenarioArgs),
    /// Check a distance matrix CSV for negative type (exit 1 if it fails).
    Validate(ValidateArgs),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EstimatorKind {
    Mcov,
    McovTrace,
    Hsic,
    Dcov,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, ValueEnum)]
pub enum Format {
    #[default]
    Json,
    Csv,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum AlternativeArg {
    TwoSided,
    Greater,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, ValueEnum, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Study {
    /// Rejection rate of a permutation test.
    #[default]
    Power,
    /// KS comparison of ‖X−Y‖ under coupled and decoupled pairing.
    NormCheck,
}

/// Kernel / semimetric selection shared by the sample subcommands.
#[derive(Clone, Debug, Default, Args)]
pub struct SpecArgs {
    #[arg(long, value_enum)]
    pub estimator: Option<EstimatorKind>,
    /// Kernel spec, e.g. `gaussian:sigma=0.5`, `matern:nu=1.5,ell=2`, `linear`.
    #[arg(long)]
    pub kernel: Option<String>,
    /// Kernel for the y side (hsic); defaults to --kernel.
    #[arg(long)]
    pub kernel_y: Option<String>,
    /// Semimetric spec, e.g. `euclid2`, `explicit:path=D.csv`.
    #[arg(long)]
    pub metric: Option<String>,
    /// Semimetric for the y side (dcov); defaults to --metric.
    #[arg(long)]
    pub metric_y: Option<String>,
    /// Anchor used when mcov-trace induces a kernel from --metric:
    /// `origin`, `first`, or coordinates `a;b;...`.
    #[arg(long)]
    pub anchor: Option<String>,
}

#[derive(Debug, Args)]
pub struct SampleArgs {
    /// Paired-sample CSV with header x_1..x_p, y_1..y_q.
    #[arg(long)]
    pub input: Option<PathBuf>,
    #[command(flatten)]
    pub spec: SpecArgs,
    /// Number of permutations (test only).
    #[arg(long = "B")]
    pub permutations: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long, value_enum)]
    pub alternative: Option<AlternativeArg>,
    #[arg(long, value_enum, default_value_t)]
    pub format: Format,
    #[arg(long)]
    pub output: Option<PathBuf>,
    /// JSON or TOML file with defaults for any of the flags.
    #[arg(long)]
    pub config: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct OracleArgs {
    /// Joint law JSON: {"support_x": [[..]], "support_y": [[..]], "P": [[..]]}.
    #[arg(long)]
    pub input: PathBuf,
    /// Kernel for the x side (default: linear).
    #[arg(long)]
    pub kernel: Option<String>,
    /// Kernel for the y side; defaults to --kernel.
    #[arg(long)]
    pub kernel_y: Option<String>,
    /// Semimetric for mCov; defaults to the one induced by --kernel.
    #[arg(long)]
    pub metric: Option<String>,
    /// Include per-eigenfunction decomposition terms.
    #[arg(long)]
    pub decompose: bool,
    #[arg(long)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ScenarioArgs {
    /// orthogonal_linear, coupled_mixture or independent.
    pub name: Option<String>,
    #[arg(long, value_enum)]
    pub study: Option<Study>,
    #[arg(long)]
    pub n: Option<usize>,
    #[arg(long)]
    pub sigma: Option<f64>,
    #[command(flatten)]
    pub spec: SpecArgs,
    #[arg(long)]
    pub alpha: Option<f64>,
    #[arg(long)]
    pub reps: Option<usize>,
    #[arg(long = "B")]
    pub permutations: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long, value_enum, default_value_t)]
    pub format: Format,
    /// With --format csv an existing file gets one more row appended.
    #[arg(long)]
    pub output: Option<PathBuf>,
    #[arg(long)]
    pub config: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ValidateArgs {
    /// Square distance matrix CSV, no header.
    #[arg(long)]
    pub input: PathBuf,
    /// Relative eigenvalue tolerance.
    #[arg(long)]
    pub tol: Option<f64>,
    #[arg(long)]
    pub output: Option<PathBuf>,
}

/// Values a `--config` file may provide. Command-line flags take precedence.
#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    pub input: Option<PathBuf>,
    pub scenario: Option<String>,
    pub study: Option<Study>,
    pub n: Option<usize>,
    pub sigma: Option<f64>,
    pub estimator: Option<EstimatorKind>,
    pub kernel: Option<String>,
    pub kernel_y: Option<String>,
    pub metric: Option<String>,
    pub metric_y: Option<String>,
    pub anchor: Option<String>,
    pub alpha: Option<f64>,
    pub reps: Option<usize>,
    #[serde(rename = "B")]
    pub permutations: Option<usize>,
    pub seed: Option<u64>,
}

impl FileConfig {
    pub fn load(path: Option<&Path>) -> anyhow::Result<Self> {
        let Some(path) = path else {
            return Ok(Self::default());
        };
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("reading config {}", path.display()))?;
        let is_toml = path
            .extension()
            .is_some_and(|e| e.eq_ignore_ascii_case("toml"));
        let parsed = if is_toml {
            toml::from_str(&text)
                .with_context(|| format!("parsing TOML config {}", path.display()))?
        } else if path
            .extension()
            .is_some_and(|e| e.eq_ignore_ascii_case("json"))
        {
            serde_json::from_str(&text)
                .with_context(|| format!("parsing JSON config {}", path.display()))?
        } else {
            bail!(
                "config {} must have a .json or .toml extension",
                path.display()
            );
        };
        Ok(parsed)
    }

    /// Fills unset flags from the file.
    pub fn merge_spec(&self, spec: &mut SpecArgs) {
        fn fill<T: Clone>(slot: &mut Option<T>, v: &Option<T>) {
            if slot.is_none() {
                slot.clone_from(v);
            }
        }
        fill(&mut spec.estimator, &self.estimator);
        fill(&mut spec.kernel, &self.kernel);
        fill(&mut spec.kernel_y, &self.kernel_y);
        fill(&mut spec.metric, &self.metric);
        fill(&mut spec.metric_y, &self.metric_y);
        fill(&mut spec.anchor, &self.anchor);
    }
}
