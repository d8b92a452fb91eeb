//! Command-line front end: `corrcox survival|mo-rates|simulate|shotnoise|validate`.
//!
//! Every command prints one JSON document (or its flattened CSV form) whose keys depend
//! only on the command. Failures map to disjoint exit codes: 2 spec/argument, 3 capacity,
//! 4 numerical, 5 unsupported model, 1 failed validation check.

mod output;
pub mod spec;
mod validate;

use std::ffi::OsString;
use std::io::Write;
use std::path::PathBuf;

use clap::{Parser, Subcommand, ValueEnum};
use serde_json::{json, Map, Value};

use crate::compensator::{mo_rates, MoRates};
use crate::error::{Error, Result};
use crate::numerics::SubsetMask;
use crate::shot_noise::{sn_bivariate_survival, ShotNoiseModel};
use crate::simulation::{self, RngConfig, SimModel, SimOptions};
use crate::survival::{self, SurvivalQuery};
pub use output::{flatten, render, Format};
pub use spec::{load_spec, model_hash, parse_spec, LoadedSpec, ModelSpec};

/// Exit code for a validation run with at least one failed check.
pub const EXIT_CHECK_FAILED: i32 = 1;

const DEFAULT_SEED: u64 = 42;

#[derive(Debug, Parser)]
#[command(
    name = "corrcox",
    version,
    about = "Joint survival and simultaneous defaults for generalized Cox default times"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, clap::Args)]
struct Common {
    /// Model specification file (JSON).
    spec: PathBuf,
    /// Warn about unknown keys instead of rejecting the spec.
    #[arg(long)]
    lenient: bool,
    /// Output format.
    #[arg(long, value_enum, default_value_t = Format::Json)]
    format: Format,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Level {
    Fast,
    Full,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Analytic joint survival by the nested-set formula and by Möbius rates.
    Survival {
        #[command(flatten)]
        common: Common,
        /// Comma-separated horizons, one per component.
        #[arg(
            long,
            value_delimiter = ',',
            required = true,
            allow_hyphen_values = true
        )]
        horizons: Vec<f64>,
    },
    /// Marshall–Olkin rates of a linear-compensator model.
    MoRates {
        #[command(flatten)]
        common: Common,
    },
    /// Monte Carlo estimates of joint survival (and simultaneous default for two components).
    Simulate {
        #[command(flatten)]
        common: Common,
        /// Number of simulated paths (at least 1000).
        #[arg(long, value_parser = parse_count, default_value = "100000")]
        paths: u64,
        #[arg(long, default_value_t = DEFAULT_SEED)]
        seed: u64,
        /// Comma-separated joint-survival horizons, one per component.
        #[arg(
            long,
            value_delimiter = ',',
            required = true,
            allow_hyphen_values = true
        )]
        horizons: Vec<f64>,
        /// Truncation horizon for the simultaneous-default probability (chosen automatically
        /// when omitted).
        #[arg(long)]
        horizon: Option<f64>,
    },
    /// Shot-noise compensators and survival probabilities.
    Shotnoise {
        #[command(flatten)]
        common: Common,
        /// Comma-separated horizons, one per component.
        #[arg(
            long,
            value_delimiter = ',',
            required = true,
            allow_hyphen_values = true
        )]
        horizons: Vec<f64>,
        /// Relative quadrature tolerance.
        #[arg(long, default_value_t = simulation::SHOT_NOISE_TOL)]
        tol: f64,
    },
    /// Runs every applicable cross-check and writes a report.
    Validate {
        #[command(flatten)]
        common: Common,
        /// Paths per Monte Carlo check (default: 1e5 fast, 1e6 full).
        #[arg(long, value_parser = parse_count)]
        paths: Option<u64>,
        #[arg(long, default_value_t = DEFAULT_SEED)]
        seed: u64,
        #[arg(long, value_enum, default_value_t = Level::Fast)]
        level: Level,
        /// Horizons for the survival checks (defaults spread over (0, 1]).
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
        horizons: Option<Vec<f64>>,
        /// Report file; the report is also printed to stdout.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

/// Accepts plain integers and exact float notation such as `1e6`.
fn parse_count(s: &str) -> std::result::Result<u64, String> {
    if let Ok(v) = s.parse::<u64>() {
        return Ok(v);
    }
    match s.parse::<f64>() {
        Ok(x) if x >= 0.0 && x.fract() == 0.0 && x < 1.8e19 => Ok(x as u64),
        _ => Err(format!("expected a nonnegative integer, got {s:?}")),
    }
}

/// Runs the command line and returns the process exit code.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let args: Vec<OsString> = args.into_iter().map(Into::into).collect();
    let cli = match Cli::try_parse_from(&args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let text = e.render().to_string();
            let _ = if code == 0 {
                write!(out, "{text}")
            } else {
                write!(err, "{text}")
            };
            return code;
        }
    };
    let echo: Vec<String> = args
        .iter()
        .skip(1)
        .map(|a| a.to_string_lossy().into_owned())
        .collect();
    match dispatch(cli.command, &echo, out, err) {
        Ok(code) => code,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            e.exit_code()
        }
    }
}

fn load(common: &Common, err: &mut dyn Write) -> Result<LoadedSpec> {
    let spec = load_spec(&common.spec, !common.lenient)?;
    for w in &spec.warnings {
        let _ = writeln!(err, "warning: {w}");
    }
    Ok(spec)
}

fn emit(out: &mut dyn Write, value: &Value, format: Format) -> Result<()> {
    let text = render(value, format)?;
    out.write_all(text.as_bytes())
        .map_err(|e| Error::Numerical(format!("cannot write output: {e}")))
}

fn query(spec: &LoadedSpec, horizons: &[f64]) -> Result<SurvivalQuery> {
    if horizons.len() != spec.model.n() {
        return Err(Error::Argument(format!(
            "--horizons has {} values but the model has {} components",
            horizons.len(),
            spec.model.n()
        )));
    }
    SurvivalQuery::new(horizons.to_vec())
}

fn sim_model(model: &ModelSpec) -> Result<SimModel<'_>> {
    Ok(match model {
        ModelSpec::Factor(m) => m.into(),
        ModelSpec::ShotNoise(m) => m.into(),
        ModelSpec::MinDecomposition(m) => m.into(),
        ModelSpec::CompensatorTable(_) => {
            return Err(Error::Unsupported(
                "a compensator table has no path law to simulate".into(),
            ))
        }
    })
}

/// `(nested-set value, Möbius value)` of the joint survival.
pub fn analytic_survival(model: &ModelSpec, q: &SurvivalQuery) -> Result<(f64, f64)> {
    let tol = simulation::SHOT_NOISE_TOL;
    Ok(match model {
        ModelSpec::Factor(m) => (
            survival::joint_survival(m, q)?,
            survival::joint_survival_mobius(m, q)?,
        ),
        ModelSpec::CompensatorTable(t) => (
            survival::joint_survival(t, q)?,
            survival::exp_survival(survival::joint_log_survival_mobius_table(t, q)?),
        ),
        ModelSpec::ShotNoise(m) => {
            let c = m.compensators(tol);
            (
                survival::joint_survival(&c, q)?,
                survival::exp_survival(survival::joint_log_survival_mobius_general(&c, q)?),
            )
        }
        ModelSpec::MinDecomposition(m) => (
            crate::decomposition::min_decomposition_survival(m, q)?,
            survival::exp_survival(survival::joint_log_survival_mobius_general(m, q)?),
        ),
    })
}

fn mo_rates_of(model: &ModelSpec) -> Result<MoRates> {
    match model {
        ModelSpec::Factor(m) => mo_rates(m),
        ModelSpec::CompensatorTable(t) => MoRates::from_table(t),
        other => Err(Error::Unsupported(format!(
            "Marshall-Olkin rates need a linear-compensator model, got {}",
            other.model_type()
        ))),
    }
}

fn rates_json(rates: &MoRates) -> Value {
    let mut map = Map::new();
    // singletons first, then by size, each group in bitmask order
    let mut subsets: Vec<(SubsetMask, f64)> = rates.iter().collect();
    subsets.sort_by_key(|(j, _)| (j.len(), j.members().collect::<Vec<_>>()));
    for (j, r) in subsets {
        map.insert(j.to_string(), json!(r));
    }
    Value::Object(map)
}

/// Whether a two-component model has a factor loading both components.
fn shared_clock(model: &crate::process_models::FactorModel) -> bool {
    model.n() == 2
        && model.is_pure_jump()
        && (0..model.m()).any(|k| {
            model.loading(0, k) > 0.0
                && model.loading(1, k) > 0.0
                && matches!(model.factors()[k], crate::process_models::Factor::CompoundPoisson { intensity, .. } if intensity > 0.0)
        })
}

fn dispatch(
    command: Command,
    echo: &[String],
    out: &mut dyn Write,
    err: &mut dyn Write,
) -> Result<i32> {
    match command {
        Command::Survival { common, horizons } => {
            let spec = load(&common, err)?;
            let q = query(&spec, &horizons)?;
            let (nested, mobius) = analytic_survival(&spec.model, &q)?;
            let doc = json!({
                "command": "survival",
                "model_hash": spec.hash,
                "model_type": spec.model.model_type(),
                "horizons": horizons,
                "joint_survival": nested,
                "joint_survival_mobius": mobius,
                "residual": (nested - mobius).abs(),
            });
            emit(out, &doc, common.format)?;
            Ok(0)
        }
        Command::MoRates { common } => {
            let spec = load(&common, err)?;
            let rates = mo_rates_of(&spec.model)?;
            let doc = json!({
                "command": "mo-rates",
                "model_hash": spec.hash,
                "rates": rates_json(&rates),
                "marginal_residuals": rates.marginal_residuals,
                "representable": rates.is_representable(),
                "diagnostics": rates.diagnostics(),
            });
            emit(out, &doc, common.format)?;
            Ok(0)
        }
        Command::Simulate {
            common,
            paths,
            seed,
            horizons,
            horizon,
        } => {
            let spec = load(&common, err)?;
            if paths < simulation::MIN_PATHS {
                return Err(Error::Argument(format!(
                    "paths below minimum: {paths} < {}",
                    simulation::MIN_PATHS
                )));
            }
            let q = query(&spec, &horizons)?;
            let model = sim_model(&spec.model)?;
            let rng = RngConfig::new(seed);
            let opts = SimOptions::default();
            let analytic = model.joint_survival(&q)?;
            let est = simulation::mc_joint_survival(model, &q, paths, &rng, &opts)?;
            let simultaneous = match &spec.model {
                ModelSpec::Factor(m) if shared_clock(m) => {
                    let h = match horizon {
                        Some(h) => h,
                        None => simulation::suggest_horizon(m, 1.0).ok_or_else(|| {
                            Error::Numerical(
                                "no horizon meets the simultaneous-default tail bound".into(),
                            )
                        })?,
                    };
                    let s = simulation::mc_simultaneous_prob(m, paths, h, &rng, &opts)?;
                    let exact = if m.has_identity_deformation() {
                        json!(survival::simultaneous_default_prob_mo(m)?)
                    } else {
                        Value::Null
                    };
                    json!({
                        "horizon": h,
                        "tail": s.tail,
                        "indicator": s.indicator,
                        "rao_blackwell": s.rao_blackwell,
                        "analytic": exact,
                    })
                }
                _ => Value::Null,
            };
            let doc = json!({
                "command": "simulate",
                "model_hash": spec.hash,
                "model_type": spec.model.model_type(),
                "seed": seed,
                "paths": paths,
                "horizons": horizons,
                "joint_survival": {
                    "analytic": analytic,
                    "rao_blackwell": est.rao_blackwell,
                    "indicator": est.indicator,
                },
                "simultaneous_default": simultaneous,
            });
            emit(out, &doc, common.format)?;
            Ok(0)
        }
        Command::Shotnoise {
            common,
            horizons,
            tol,
        } => {
            let spec = load(&common, err)?;
            let ModelSpec::ShotNoise(m) = &spec.model else {
                return Err(Error::Unsupported(format!(
                    "shotnoise needs a shot_noise spec, got {}",
                    spec.model.model_type()
                )));
            };
            let q = query(&spec, &horizons)?;
            let doc = shotnoise_doc(m, &q, tol, &spec.hash)?;
            emit(out, &doc, common.format)?;
            Ok(0)
        }
        Command::Validate {
            common,
            paths,
            seed,
            level,
            horizons,
            out: report_path,
        } => {
            let spec = load(&common, err)?;
            let paths = paths.unwrap_or(match level {
                Level::Fast => 100_000,
                Level::Full => 1_000_000,
            });
            if paths < simulation::MIN_PATHS {
                return Err(Error::Argument(format!(
                    "paths below minimum: {paths} < {}",
                    simulation::MIN_PATHS
                )));
            }
            let level_name = match level {
                Level::Fast => "fast",
                Level::Full => "full",
            };
            let report = validate::run(&spec, horizons, paths, seed, level_name, echo)?;
            let passed = report["passed"].as_bool().unwrap_or(false);
            if let Some(path) = report_path {
                let text = render(&report, common.format)?;
                std::fs::write(&path, text).map_err(|e| {
                    Error::Argument(format!("cannot write report {}: {e}", path.display()))
                })?;
            }
            emit(out, &report, common.format)?;
            if !passed {
                for f in report["checks"].as_array().into_iter().flatten() {
                    if f["passed"] == Value::Bool(false) {
                        let _ = writeln!(err, "check failed: {}: {}", f["name"], f["detail"]);
                    }
                }
                return Ok(EXIT_CHECK_FAILED);
            }
            Ok(0)
        }
    }
}

fn shotnoise_doc(m: &ShotNoiseModel, q: &SurvivalQuery, tol: f64, hash: &str) -> Result<Value> {
    let n = m.n();
    let t = &q.horizons;
    let c = m.compensators(tol);
    let marginals = (0..n)
        .map(|i| m.subset_compensator(SubsetMask::singleton(i), t[i], tol))
        .collect::<Result<Vec<_>>>()?;
    let t_max = t.iter().copied().fold(0.0, f64::max);
    let joint_at_max = m.subset_compensator(SubsetMask::full(n), t_max, tol)?;
    let bivariate = if n == 2 {
        json!(sn_bivariate_survival(m, t[0], t[1], tol)?)
    } else {
        Value::Null
    };
    Ok(json!({
        "command": "shotnoise",
        "model_hash": hash,
        "horizons": t,
        "tol": tol,
        "marginal_compensators": marginals,
        "joint_compensator_at_max": joint_at_max,
        "joint_survival": survival::joint_survival(&c, q)?,
        "bivariate_survival": bivariate,
        "laplace_functional": (-m.campbell_exponent(t, tol)?).exp(),
    }))
}
