use std::fs::{File, OpenOptions};
use std::io::Write;
use std::path::Path;
use std::process::ExitCode;

use anyhow::{anyhow, bail, Context};
use serde::Serialize;

use metricdep::estimators::{
    permutation_test, Alternative, Estimator, PairedSample, DEFAULT_PERMUTATIONS,
};
use metricdep::exact_oracle::{
    exact_dcov, exact_hsic, exact_mcov, mercer_hsic_decomposition, mercer_mcov_decomposition,
    DiscreteJoint, HsicDecomposition, McovDecomposition,
};
use metricdep::io::{read_matrix_csv, read_paired_csv};
use metricdep::kernel_metric::{
    induced_semimetric, validate_negative_type, KernelSpec, SemimetricSpec,
    DEFAULT_NEGATIVE_TYPE_TOL,
};
use metricdep::scenarios::{
    norm_check_study, power_study, NormCheckReport, PowerReport, ScenarioName, ScenarioSpec,
};

use crate::config::{
    AlternativeArg, Cli, Command, EstimatorKind, FileConfig, Format, OracleArgs, SampleArgs,
    ScenarioArgs, SpecArgs, Study, ValidateArgs,
};

const DEFAULT_SEED: u64 = 0;
const DEFAULT_ALPHA: f64 = 0.05;
const DEFAULT_REPS: usize = 200;
const DEFAULT_SCENARIO_N: usize = 200;
const DEFAULT_SCENARIO_B: usize = 199;

pub fn run(cli: Cli) -> anyhow::Result<ExitCode> {
    match cli.command {
        Command::Compute(args) => cmd_compute(args),
        Command::Test(args) => cmd_test(args),
        Command::Oracle(args) => cmd_oracle(args),
        Command::Scenario(args) => cmd_scenario(args),
        Command::Validate(args) => cmd_validate(args),
    }
}

fn parse_kernel(s: &str) -> anyhow::Result<KernelSpec> {
    s.parse()
        .with_context(|| format!("invalid kernel spec `{s}`"))
}

fn parse_metric(s: &str) -> anyhow::Result<SemimetricSpec> {
    s.parse()
        .with_context(|| format!("invalid metric spec `{s}`"))
}

/// Builds the estimator from the flags. Defaults: mcov on `euclid2`,
/// mcov-trace on the kernel induced by `euclid2` at the origin, hsic with
/// median-heuristic gaussian kernels, dcov on `euclid2`.
pub fn build_estimator(spec: &SpecArgs) -> anyhow::Result<Estimator> {
    let kind = spec.estimator.unwrap_or(EstimatorKind::Mcov);
    let unused = |flag: &str, set: bool| -> anyhow::Result<()> {
        if set {
            bail!("--{flag} does not apply to estimator {kind:?}");
        }
        Ok(())
    };
    Ok(match kind {
        EstimatorKind::Mcov => {
            unused("kernel-y", spec.kernel_y.is_some())?;
            unused("metric-y", spec.metric_y.is_some())?;
            unused("anchor", spec.anchor.is_some())?;
            let metric = match (&spec.kernel, &spec.metric) {
                (Some(_), Some(_)) => bail!("give either --kernel or --metric for mcov, not both"),
                (Some(k), None) => induced_semimetric(&parse_kernel(k)?),
                (None, Some(m)) => parse_metric(m)?,
                (None, None) => SemimetricSpec::EuclideanSquared,
            };
            Estimator::McovPlugin(metric)
        }
        EstimatorKind::McovTrace => {
            unused("kernel-y", spec.kernel_y.is_some())?;
            unused("metric-y", spec.metric_y.is_some())?;
            let kernel = match (&spec.kernel, &spec.metric) {
                (Some(_), Some(_)) => {
                    bail!("give either --kernel or --metric for mcov-trace, not both")
                }
                (Some(k), None) => {
                    unused("anchor", spec.anchor.is_some())?;
                    parse_kernel(k)?
                }
                (None, metric) => {
                    let base = metric.as_deref().unwrap_or("euclid2");
                    let mut text = format!("induced_kernel:base={base}");
                    if let Some(anchor) = &spec.anchor {
                        text.push_str(&format!(",anchor={anchor}"));
                    }
                    parse_kernel(&text)?
                }
            };
            Estimator::McovTrace(kernel)
        }
        EstimatorKind::Hsic => {
            unused("metric", spec.metric.is_some())?;
            unused("metric-y", spec.metric_y.is_some())?;
            unused("anchor", spec.anchor.is_some())?;
            let k = match &spec.kernel {
                Some(k) => parse_kernel(k)?,
                None => KernelSpec::gaussian_median(),
            };
            let l = match &spec.kernel_y {
                Some(l) => parse_kernel(l)?,
                None => k.clone(),
            };
            Estimator::Hsic { k, l }
        }
        EstimatorKind::Dcov => {
            unused("kernel", spec.kernel.is_some())?;
            unused("kernel-y", spec.kernel_y.is_some())?;
            unused("anchor", spec.anchor.is_some())?;
            let rx = match &spec.metric {
                Some(m) => parse_metric(m)?,
                None => SemimetricSpec::EuclideanSquared,
            };
            let ry = match &spec.metric_y {
                Some(m) => parse_metric(m)?,
                None => rx.clone(),
            };
            Estimator::Dcov { rx, ry }
        }
    })
}

fn load_sample(path: &Path) -> anyhow::Result<PairedSample> {
    let file = File::open(path).with_context(|| format!("opening {}", path.display()))?;
    read_paired_csv(file).with_context(|| format!("reading {}", path.display()))
}

/// Writes `text` to `path` (or stdout) in one go, so failures earlier in a
/// command never leave partial output behind.
fn emit(text: &str, path: Option<&Path>) -> anyhow::Result<()> {
    match path {
        Some(p) => std::fs::write(p, text).with_context(|| format!("writing {}", p.display())),
        None => {
            let mut out = std::io::stdout().lock();
            out.write_all(text.as_bytes())?;
            out.flush()?;
            Ok(())
        }
    }
}

fn json<T: Serialize>(value: &T) -> anyhow::Result<String> {
    let mut s = serde_json::to_string_pretty(value)?;
    s.push('\n');
    Ok(s)
}

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

struct Prepared {
    sample: PairedSample,
    estimator: Estimator,
    args: SampleArgs,
}

fn prepare_sample_command(mut args: SampleArgs) -> anyhow::Result<Prepared> {
    let file = FileConfig::load(args.config.as_deref())?;
    file.merge_spec(&mut args.spec);
    if args.input.is_none() {
        args.input.clone_from(&file.input);
    }
    if args.permutations.is_none() {
        args.permutations = file.permutations;
    }
    if args.seed.is_none() {
        args.seed = file.seed;
    }
    let input = args
        .input
        .clone()
        .ok_or_else(|| anyhow!("--input is required"))?;
    let estimator = build_estimator(&args.spec)?;
    let sample = load_sample(&input)?;
    Ok(Prepared {
        sample,
        estimator,
        args,
    })
}

#[derive(Serialize)]
struct ComputeDocument {
    statistic: f64,
    estimator: String,
    kernel_or_metric_spec: String,
    n: usize,
}

fn cmd_compute(args: SampleArgs) -> anyhow::Result<ExitCode> {
    if args.permutations.is_some() || args.alternative.is_some() {
        bail!("--B and --alternative apply to `test`, not `compute`");
    }
    let Prepared {
        sample,
        estimator,
        args,
    } = prepare_sample_command(args)?;
    let resolved = estimator.resolve(&sample)?;
    let doc = ComputeDocument {
        statistic: resolved.statistic(&sample)?,
        estimator: estimator.id().to_string(),
        kernel_or_metric_spec: resolved.spec_string(),
        n: sample.len(),
    };
    let text = match args.format {
        Format::Json => json(&doc)?,
        Format::Csv => format!(
            "statistic,estimator,kernel_or_metric_spec,n\n{},{},{},{}\n",
            doc.statistic,
            doc.estimator,
            csv_field(&doc.kernel_or_metric_spec),
            doc.n
        ),
    };
    emit(&text, args.output.as_deref())?;
    Ok(ExitCode::SUCCESS)
}

fn cmd_test(args: SampleArgs) -> anyhow::Result<ExitCode> {
    let Prepared {
        sample,
        estimator,
        args,
    } = prepare_sample_command(args)?;
    let b = args.permutations.unwrap_or(DEFAULT_PERMUTATIONS);
    let alternative = args.alternative.map(|a| match a {
        AlternativeArg::TwoSided => Alternative::TwoSided,
        AlternativeArg::Greater => Alternative::Greater,
    });
    let result = permutation_test(
        &estimator,
        &sample,
        b,
        args.seed.unwrap_or(DEFAULT_SEED),
        alternative,
    )?;
    let text = match args.format {
        Format::Json => json(&result)?,
        Format::Csv => format!(
            "statistic,p_value,B,seed,estimator,kernel_or_metric_spec\n{},{},{},{},{},{}\n",
            result.statistic,
            result.p_value,
            result.permutations,
            result.seed,
            result.estimator,
            csv_field(&result.kernel_or_metric_spec)
        ),
    };
    emit(&text, args.output.as_deref())?;
    Ok(ExitCode::SUCCESS)
}

#[derive(Serialize)]
struct OracleDocument {
    kernel_x: String,
    kernel_y: String,
    /// Omitted when the two supports have different dimensions.
    #[serde(skip_serializing_if = "Option::is_none")]
    metric: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    mcov: Option<f64>,
    hsic: f64,
    dcov: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    decomposition: Option<Decomposition>,
}

#[derive(Serialize)]
struct Decomposition {
    /// Present only when mCov's metric is induced by the kernel.
    #[serde(skip_serializing_if = "Option::is_none")]
    mcov: Option<McovDecomposition>,
    /// Present only when both sides share one kernel and one space.
    #[serde(skip_serializing_if = "Option::is_none")]
    hsic: Option<HsicDecomposition>,
}

fn cmd_oracle(args: OracleArgs) -> anyhow::Result<ExitCode> {
    let k = match &args.kernel {
        Some(k) => parse_kernel(k)?,
        None => KernelSpec::Linear,
    };
    let l = match &args.kernel_y {
        Some(l) => parse_kernel(l)?,
        None => k.clone(),
    };
    let metric = match &args.metric {
        Some(m) => parse_metric(m)?,
        None => induced_semimetric(&k),
    };
    let text = std::fs::read_to_string(&args.input)
        .with_context(|| format!("reading {}", args.input.display()))?;
    let joint = DiscreteJoint::from_json_str(&text)
        .with_context(|| format!("invalid joint law in {}", args.input.display()))?;

    let same_space = joint.support_x().dim() == joint.support_y().dim();
    if !same_space && args.metric.is_some() {
        bail!("--metric needs support_x and support_y in the same space");
    }
    let decomposition = if args.decompose {
        let metric_from_kernel = same_space && args.metric.is_none();
        Some(Decomposition {
            mcov: metric_from_kernel
                .then(|| mercer_mcov_decomposition(&joint, &k))
                .transpose()?,
            hsic: (same_space && k == l)
                .then(|| mercer_hsic_decomposition(&joint, &k))
                .transpose()?,
        })
    } else {
        None
    };
    let doc = OracleDocument {
        kernel_x: k.to_string(),
        kernel_y: l.to_string(),
        metric: same_space.then(|| metric.to_string()),
        mcov: same_space
            .then(|| exact_mcov(&joint, &metric))
            .transpose()?,
        hsic: exact_hsic(&joint, &k, &l)?,
        dcov: exact_dcov(&joint, &induced_semimetric(&k), &induced_semimetric(&l))?,
        decomposition,
    };
    emit(&json(&doc)?, args.output.as_deref())?;
    Ok(ExitCode::SUCCESS)
}

enum ScenarioOutput {
    Power(PowerReport),
    NormCheck(NormCheckReport),
}

fn cmd_scenario(mut args: ScenarioArgs) -> anyhow::Result<ExitCode> {
    let file = FileConfig::load(args.config.as_deref())?;
    file.merge_spec(&mut args.spec);
    let name = args
        .name
        .clone()
        .or_else(|| file.scenario.clone())
        .ok_or_else(|| anyhow!("a scenario name is required"))?;
    let name: ScenarioName = name.parse()?;
    let study = args.study.or(file.study).unwrap_or_default();
    let n = args.n.or(file.n).unwrap_or(DEFAULT_SCENARIO_N);
    let sigma = args
        .sigma
        .or(file.sigma)
        .unwrap_or(metricdep::scenarios::DEFAULT_SIGMA);
    let alpha = args.alpha.or(file.alpha).unwrap_or(DEFAULT_ALPHA);
    let reps = args.reps.or(file.reps).unwrap_or(DEFAULT_REPS);
    let seed = args.seed.or(file.seed).unwrap_or(DEFAULT_SEED);
    let spec = ScenarioSpec::new(name, n, sigma, seed)?;

    let output = match study {
        Study::Power => {
            let b = args
                .permutations
                .or(file.permutations)
                .unwrap_or(DEFAULT_SCENARIO_B);
            let estimator = build_estimator(&args.spec)?;
            ScenarioOutput::Power(power_study(&spec, &estimator, alpha, reps, b, seed)?)
        }
        Study::NormCheck => {
            if args.spec.estimator.is_some() || args.permutations.or(file.permutations).is_some() {
                bail!("--estimator and --B do not apply to the norm-check study");
            }
            ScenarioOutput::NormCheck(norm_check_study(&spec, alpha, reps, seed)?)
        }
    };

    match args.format {
        Format::Json => {
            let text = match &output {
                ScenarioOutput::Power(r) => json(r)?,
                ScenarioOutput::NormCheck(r) => json(r)?,
            };
            emit(&text, args.output.as_deref())?;
        }
        Format::Csv => {
            let (header, row) = match &output {
                ScenarioOutput::Power(r) => (PowerReport::CSV_HEADER, r.csv_row()),
                ScenarioOutput::NormCheck(r) => (NormCheckReport::CSV_HEADER, r.csv_row()),
            };
            match args.output.as_deref() {
                Some(path) => append_csv_row(path, header, &row)?,
                None => emit(&format!("{header}\n{row}\n"), None)?,
            }
        }
    }
    Ok(ExitCode::SUCCESS)
}

/// Appends `row`, writing `header` first if the file is new or empty. An
/// existing file with a different header is refused.
fn append_csv_row(path: &Path, header: &str, row: &str) -> anyhow::Result<()> {
    let existing = match std::fs::read_to_string(path) {
        Ok(s) => s,
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => String::new(),
        Err(e) => return Err(e).with_context(|| format!("reading {}", path.display())),
    };
    let mut text = String::new();
    if existing.trim().is_empty() {
        text.push_str(header);
        text.push('\n');
    } else {
        let first = existing.lines().next().unwrap_or_default();
        if first != header {
            bail!(
                "{} has a different CSV header; refusing to append",
                path.display()
            );
        }
        if !existing.ends_with('\n') {
            text.push('\n');
        }
    }
    text.push_str(row);
    text.push('\n');
    let mut f = OpenOptions::new()
        .create(true)
        .append(true)
        .open(path)
        .with_context(|| format!("opening {}", path.display()))?;
    f.write_all(text.as_bytes())?;
    Ok(())
}

#[derive(Serialize)]
struct ValidateDocument {
    valid: bool,
    worst_eigenvalue: f64,
    n: usize,
    tol: f64,
}

fn cmd_validate(args: ValidateArgs) -> anyhow::Result<ExitCode> {
    let tol = args.tol.unwrap_or(DEFAULT_NEGATIVE_TYPE_TOL);
    if !(tol.is_finite() && tol >= 0.0) {
        bail!("--tol must be a finite nonnegative number");
    }
    let file =
        File::open(&args.input).with_context(|| format!("opening {}", args.input.display()))?;
    let d = read_matrix_csv(file).with_context(|| format!("reading {}", args.input.display()))?;
    let report = validate_negative_type(&d, tol)?;
    let doc = ValidateDocument {
        valid: report.valid,
        worst_eigenvalue: report.worst_eigenvalue,
        n: d.nrows(),
        tol,
    };
    emit(&json(&doc)?, args.output.as_deref())?;
    Ok(if report.valid {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(1)
    })
}
