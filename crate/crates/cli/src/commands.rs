use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::Serialize;
use tpm_core::decompose::{
    default_iteration_count, match_components, plan_restarts, tpmr_run, RestartCount, TpmrSettings,
};
use tpm_core::geometry::{measure_incoherence, ConditioningReport};
use tpm_core::landscape::{landscape_sweep, DescentOptions, DEFAULT_EIG_TOL, DEFAULT_MAX_ITERS, DEFAULT_STEP};
use tpm_core::report::{g17, write_sweep_csv, write_trace_csv};
use tpm_core::selftest::run_selftest;
use tpm_core::Rank1SumTensor;

use crate::config::{ExperimentConfig, ModelChoice};
use crate::{Failure, BAD_INPUT, INVARIANT_FAILURE, SUCCESS};

/// Smallest incoherence used for the default iteration count; an exactly
/// orthogonal set has τ = 0, where the formula diverges.
const ITERATION_TAU_FLOOR: f64 = 1e-8;

#[derive(Debug, Parser)]
#[command(name = "tpm", version, about = "Tensor power method with deflation and random restarts")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct Common {
    /// Seed for every random stream.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Output file (standard output when absent).
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// JSON experiment config.
    #[arg(long)]
    pub config: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct Instance {
    #[arg(long)]
    pub d: Option<usize>,
    #[arg(long)]
    pub k: Option<usize>,
    #[arg(long, value_name = "LO,HI", value_delimiter = ',', num_args = 1)]
    pub weight_range: Option<Vec<f64>>,
    #[arg(long, value_enum)]
    pub model: Option<ModelChoice>,
    /// ComponentSet JSON; implies the explicit-file model.
    #[arg(long)]
    pub components: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Draw a component set and print its conditioning report.
    Gen {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        instance: Instance,
    },
    /// Run TPMR on an instance and report recovery against the truth.
    Decompose {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        instance: Instance,
        /// Restarts per round (planned when absent).
        #[arg(long = "restarts", short = 'L')]
        restarts: Option<u64>,
        #[arg(long)]
        iters: Option<usize>,
        /// Total failure budget; each round uses eta / k.
        #[arg(long)]
        eta: Option<f64>,
        /// Per-iteration trace CSV.
        #[arg(long)]
        trace: Option<PathBuf>,
        /// Largest planned restart count that will be run.
        #[arg(long, default_value_t = 4096)]
        max_restarts: u64,
    },
    /// Gradient descent from random starts with certification of each end point.
    Landscape {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        instance: Instance,
        #[arg(long, default_value_t = 25)]
        starts: usize,
        #[arg(long, default_value_t = DEFAULT_MAX_ITERS)]
        max_iters: usize,
        #[arg(long, default_value_t = DEFAULT_STEP)]
        step: f64,
    },
    /// Smallest restart count meeting the initialization conditions.
    Plan {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        instance: Instance,
        #[arg(long)]
        eta: Option<f64>,
        /// Incoherence to plan for (measured from the instance when absent).
        #[arg(long)]
        tau: Option<f64>,
        /// Search cap on ln L.
        #[arg(long, default_value_t = 1e6)]
        max_ln_restarts: f64,
    },
    /// Dense-oracle, finite-difference and analytic fixture checks.
    Selftest {
        #[command(flatten)]
        common: Common,
    },
}

pub(crate) fn execute(cli: Cli, stdout: &mut dyn Write, stderr: &mut dyn Write) -> Result<u8, Failure> {
    match cli.command {
        Command::Gen { common, instance } => {
            let config = resolve(&common, &instance, |_| {})?;
            let set = config.components()?;
            let report = ConditioningReport::measure(&set)?;
            emit(common.out.as_deref(), stdout, with_newline(set.to_json()).as_bytes())?;
            let report_sink: &mut dyn Write = if common.out.is_some() { stdout } else { stderr };
            write_or_fail(report_sink, json(&report)?.as_bytes())?;
            let _ = writeln!(stderr, "kappa target {}", config.kappa_target());
            Ok(SUCCESS)
        }
        Command::Decompose { common, instance, restarts, iters, eta, trace, max_restarts } => {
            let config = resolve(&common, &instance, |c| {
                c.restarts = restarts.or(c.restarts);
                c.iters = iters.or(c.iters);
                c.eta = eta.unwrap_or(c.eta);
            })?;
            decompose(&config, common.out.as_deref(), trace.as_deref(), max_restarts, stdout, stderr)
        }
        Command::Landscape { common, instance, starts, max_iters, step } => {
            let config = resolve(&common, &instance, |_| {})?;
            if !(step > 0.0 && step.is_finite()) || max_iters == 0 {
                return Err(Failure::new(BAD_INPUT, "step must be positive and max-iters at least 1"));
            }
            let set = config.components()?;
            let options = DescentOptions { step, max_iters, ..Default::default() };
            let rows = landscape_sweep(&set, config.seed, starts, &options, DEFAULT_EIG_TOL)?;
            let mut csv = Vec::new();
            write_sweep_csv(&mut csv, &rows).expect("writing to memory");
            emit(common.out.as_deref(), stdout, &csv)?;
            Ok(SUCCESS)
        }
        Command::Plan { common, instance, eta, tau, max_ln_restarts } => {
            let config = resolve(&common, &instance, |c| c.eta = eta.unwrap_or(c.eta))?;
            let (d, k, tau) = match tau {
                Some(tau) => (config.d, config.k, tau),
                None => {
                    let set = config.components()?;
                    (set.dim(), set.len(), measure_incoherence(&set))
                }
            };
            let plan = plan_restarts(config.eta / k as f64, tau, d, k, RestartCount::from_ln(max_ln_restarts))?;
            emit(common.out.as_deref(), stdout, json(&plan)?.as_bytes())?;
            Ok(SUCCESS)
        }
        Command::Selftest { common } => {
            let config = resolve(&common, &Instance::none(), |_| {})?;
            let report = run_selftest(config.seed);
            let mut text = String::new();
            for check in &report.checks {
                text.push_str(&format!("{check}\n"));
            }
            emit(common.out.as_deref(), stdout, text.as_bytes())?;
            Ok(if report.passed() { SUCCESS } else { INVARIANT_FAILURE })
        }
    }
}

fn decompose(
    config: &ExperimentConfig,
    out: Option<&Path>,
    trace: Option<&Path>,
    max_restarts: u64,
    stdout: &mut dyn Write,
    stderr: &mut dyn Write,
) -> Result<u8, Failure> {
    let truth = config.components()?;
    let (d, k) = (truth.dim(), truth.len());
    let tau = measure_incoherence(&truth);
    let restarts = match config.restarts {
        Some(l) => l,
        None => {
            let plan = plan_restarts(config.eta / k as f64, tau, d, k, RestartCount::Exact(max_restarts))?;
            plan.restarts.expect("plans within an exact cap are exact")
        }
    };
    let restarts = usize::try_from(restarts).map_err(|_| Failure::new(BAD_INPUT, "restart count too large"))?;
    let iters = match config.iters {
        Some(n) => n,
        None => default_iteration_count(k, tau.clamp(ITERATION_TAU_FLOOR, 1.0 - f64::EPSILON))?,
    };
    let t = Rank1SumTensor::from_components(&truth);
    let settings = TpmrSettings { iters, restarts, rounds: k, seed: config.seed };
    let run = tpmr_run(&t, &settings, Some(&truth))?;
    let report = match_components(&run.extracted, &truth)?;
    emit(out, stdout, json(&report)?.as_bytes())?;
    if let Some(path) = trace {
        let file = File::create(path).map_err(|e| output_failure(path, e))?;
        let mut writer = BufWriter::new(file);
        write_trace_csv(&mut writer, &run)
            .and_then(|_| writer.flush())
            .map_err(|e| output_failure(path, e))?;
    }
    let _ = writeln!(
        stderr,
        "L = {restarts}, iters = {iters}, tau = {}, bound = {}, all_within_bound = {}",
        g17(tau),
        g17(report.bound),
        report.all_within_bound
    );
    Ok(if report.all_within_bound { SUCCESS } else { INVARIANT_FAILURE })
}

impl Instance {
    fn none() -> Self {
        Self { d: None, k: None, weight_range: None, model: None, components: None }
    }
}

/// Config file (or defaults), then instance flags, then `extra`, then `--seed`.
fn resolve(
    common: &Common,
    instance: &Instance,
    extra: impl FnOnce(&mut ExperimentConfig),
) -> Result<ExperimentConfig, Failure> {
    let mut config = match &common.config {
        Some(path) => ExperimentConfig::load(path)?,
        None => ExperimentConfig::default(),
    };
    if let Some(d) = instance.d {
        config.d = d;
    }
    if let Some(k) = instance.k {
        config.k = k;
    }
    if let Some(range) = &instance.weight_range {
        let [lo, hi] = range[..] else {
            return Err(Failure::new(BAD_INPUT, "--weight-range takes LO,HI"));
        };
        config.weight_range = [lo, hi];
    }
    if let Some(model) = instance.model {
        config.component_model = model;
    }
    if let Some(path) = &instance.components {
        config.components_file = Some(path.clone());
        config.component_model = ModelChoice::ExplicitFile;
    }
    extra(&mut config);
    if let Some(seed) = common.seed {
        config.seed = seed;
    }
    config.validate()?;
    Ok(config)
}

fn json<T: Serialize>(value: &T) -> Result<String, Failure> {
    serde_json::to_string_pretty(value)
        .map(with_newline)
        .map_err(|e| Failure::new(INVARIANT_FAILURE, format!("serialization: {e}")))
}

fn with_newline(mut s: String) -> String {
    if !s.ends_with('\n') {
        s.push('\n');
    }
    s
}

fn emit(path: Option<&Path>, stdout: &mut dyn Write, bytes: &[u8]) -> Result<(), Failure> {
    match path {
        Some(path) => std::fs::write(path, bytes).map_err(|e| output_failure(path, e)),
        None => write_or_fail(stdout, bytes),
    }
}

fn write_or_fail(sink: &mut dyn Write, bytes: &[u8]) -> Result<(), Failure> {
    sink.write_all(bytes)
        .and_then(|_| sink.flush())
        .map_err(|e| Failure::new(BAD_INPUT, format!("write failed: {e}")))
}

fn output_failure(path: &Path, e: std::io::Error) -> Failure {
    Failure::new(BAD_INPUT, format!("cannot write {}: {e}", path.display()))
}
