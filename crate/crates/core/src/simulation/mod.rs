//! Exact event-driven Monte Carlo for every supported model family, with
//! Rao-Blackwellized estimators of the analytic quantities.
//!
//! Paths are independent substreams of one seed. Work is split into fixed-size chunks whose
//! moments are merged in a fixed tree, so every estimate is bit-identical for any thread
//! count.

mod gamma_bridge;
mod path;

use rayon::prelude::*;
use serde::Serialize;

pub use crate::numerics::RngConfig;
pub use path::PathRecord;
pub use path::{
    extract_default_times, sample_path, Shock, BISECTION_TOLERANCE, DEFAULT_GRID_CELLS,
};

use crate::decomposition::MinDecomposition;
use crate::error::{Error, Result};
use crate::numerics::{Moments, SubsetMask};
use crate::process_models::FactorModel;
use crate::shot_noise::ShotNoiseModel;
use crate::survival::{self, exp_survival, Compensators, SurvivalQuery};
use path::Sampler;

/// Smallest accepted path count for any estimator.
pub const MIN_PATHS: u64 = 1000;

/// Paths per deterministic reduction chunk.
const CHUNK: u64 = 4096;

/// Tail mass allowed beyond the horizon for infinite-horizon targets.
pub const TAIL_BOUND: f64 = 1e-6;

/// Quadrature tolerance used when shot-noise compensators feed an estimator.
pub const SHOT_NOISE_TOL: f64 = 1e-10;

/// Environment variable capping worker threads.
pub const THREADS_ENV: &str = "CORRCOX_THREADS";

/// A model that can be simulated.
#[derive(Debug, Clone, Copy)]
pub enum SimModel<'a> {
    Factor(&'a FactorModel),
    ShotNoise(&'a ShotNoiseModel),
    MinDecomposition(&'a MinDecomposition),
}

impl<'a> From<&'a FactorModel> for SimModel<'a> {
    fn from(m: &'a FactorModel) -> Self {
        SimModel::Factor(m)
    }
}

impl<'a> From<&'a ShotNoiseModel> for SimModel<'a> {
    fn from(m: &'a ShotNoiseModel) -> Self {
        SimModel::ShotNoise(m)
    }
}

impl<'a> From<&'a MinDecomposition> for SimModel<'a> {
    fn from(m: &'a MinDecomposition) -> Self {
        SimModel::MinDecomposition(m)
    }
}

impl SimModel<'_> {
    pub fn n(&self) -> usize {
        match self {
            SimModel::Factor(m) => m.n(),
            SimModel::ShotNoise(m) => m.n(),
            SimModel::MinDecomposition(m) => m.n(),
        }
    }

    /// Compensator of the jump mechanism only (the part `K` is built from).
    fn jump_compensator(&self, j: SubsetMask, t: f64) -> Result<f64> {
        match self {
            SimModel::Factor(m) => Compensators::compensator(*m, j, t),
            SimModel::ShotNoise(m) => m.compensators(SHOT_NOISE_TOL).compensator(j, t),
            SimModel::MinDecomposition(m) => Compensators::compensator(&m.jump, j, t),
        }
    }

    /// Analytic unconditional joint survival.
    pub fn joint_survival(&self, query: &SurvivalQuery) -> Result<f64> {
        match self {
            SimModel::Factor(m) => survival::joint_survival(*m, query),
            SimModel::ShotNoise(m) => {
                survival::joint_survival(&m.compensators(SHOT_NOISE_TOL), query)
            }
            SimModel::MinDecomposition(m) => {
                crate::decomposition::min_decomposition_survival(m, query)
            }
        }
    }

    /// Log-survival exponent of the jump mechanism (what `eta` multiplies).
    fn jump_log_survival(&self, query: &SurvivalQuery) -> Result<f64> {
        match self {
            SimModel::Factor(m) => survival::joint_log_survival(*m, query),
            SimModel::ShotNoise(m) => {
                survival::joint_log_survival(&m.compensators(SHOT_NOISE_TOL), query)
            }
            SimModel::MinDecomposition(m) => {
                crate::decomposition::min_decomposition_log_survival(m, query)
            }
        }
    }
}

/// Run-level knobs that do not change the estimand.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SimOptions {
    /// Gamma-factor grid cells across the deformed horizon.
    pub grid_cells: u32,
    /// Worker threads; `None` reads `CORRCOX_THREADS`, then falls back to rayon's default.
    pub threads: Option<usize>,
}

impl Default for SimOptions {
    fn default() -> Self {
        Self {
            grid_cells: DEFAULT_GRID_CELLS,
            threads: None,
        }
    }
}

/// A Monte Carlo mean with its standard error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct McEstimate {
    pub value: f64,
    pub stderr: f64,
    pub paths: u64,
    pub seed: RngConfig,
}

impl McEstimate {
    fn from_moments(m: &Moments, rng: &RngConfig) -> Self {
        Self {
            value: m.mean,
            stderr: m.stderr(),
            paths: m.count,
            seed: *rng,
        }
    }

    fn exact(value: f64, paths: u64, rng: &RngConfig) -> Self {
        Self {
            value,
            stderr: 0.0,
            paths,
            seed: *rng,
        }
    }

    /// Sample variance of the per-path values.
    pub fn variance(&self) -> f64 {
        self.stderr * self.stderr * self.paths as f64
    }

    /// `|value - target|` in units of stderr (infinite when stderr is zero and they differ).
    pub fn z_score(&self, target: f64) -> f64 {
        let diff = (self.value - target).abs();
        if diff == 0.0 {
            0.0
        } else {
            diff / self.stderr
        }
    }
}

/// Joint survival estimated two ways on the same paths.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct JointSurvivalEstimate {
    /// `mean(exp(-sum_j (X^j(t_j) + K^j_{t_j})))`; the default estimate.
    pub rao_blackwell: McEstimate,
    /// `mean(prod_j 1{tau^j > t_j})`.
    pub indicator: McEstimate,
}

/// Simultaneous-default probability `P(tau^1 = tau^2 < inf)` estimated two ways.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SimultaneousEstimate {
    pub indicator: McEstimate,
    pub rao_blackwell: McEstimate,
    /// `min_survival(horizon)`, the neglected tail mass.
    pub tail: f64,
}

fn thread_count(opts: &SimOptions) -> Option<usize> {
    opts.threads.or_else(|| {
        std::env::var(THREADS_ENV)
            .ok()
            .and_then(|v| v.trim().parse::<usize>().ok())
            .filter(|&k| k > 0)
    })
}

/// Evaluates `f` on every path and returns one `Moments` per statistic, merged in a fixed
/// tree over fixed-size chunks.
fn run_paths<F>(paths: u64, stats: usize, opts: &SimOptions, f: F) -> Result<Vec<Moments>>
where
    F: Fn(u64, &mut [f64]) -> Result<()> + Sync,
{
    let chunks = paths.div_ceil(CHUNK);
    let work = || -> Result<Vec<Vec<Moments>>> {
        (0..chunks)
            .into_par_iter()
            .map(|c| {
                let start = c * CHUNK;
                let end = (start + CHUNK).min(paths);
                let len = (end - start) as usize;
                let mut columns = vec![vec![0.0; len]; stats];
                let mut row = vec![0.0; stats];
                for (i, p) in (start..end).enumerate() {
                    f(p, &mut row)?;
                    for (col, &v) in columns.iter_mut().zip(&row) {
                        col[i] = v;
                    }
                }
                Ok(columns.iter().map(|col| Moments::from_slice(col)).collect())
            })
            .collect()
    };
    let per_chunk = match thread_count(opts) {
        Some(k) => rayon::ThreadPoolBuilder::new()
            .num_threads(k)
            .build()
            .map_err(|e| Error::Numerical(format!("cannot start worker pool: {e}")))?
            .install(work)?,
        None => work()?,
    };
    Ok((0..stats)
        .map(|s| {
            let parts: Vec<Moments> = per_chunk.iter().map(|c| c[s]).collect();
            Moments::merge_all(&parts)
        })
        .collect())
}

fn check_paths(paths: u64) -> Result<()> {
    if paths < MIN_PATHS {
        return Err(Error::Argument(format!(
            "paths below minimum: {paths} < {MIN_PATHS}"
        )));
    }
    Ok(())
}

fn check_query(n: usize, query: &SurvivalQuery) -> Result<()> {
    if query.n() != n {
        return Err(Error::Argument(format!(
            "{} horizons for {} components",
            query.n(),
            n
        )));
    }
    Ok(())
}

/// Joint survival `P(tau^1 > t_1, ..., tau^n > t_n)` by simulation.
pub fn mc_joint_survival<'a>(
    model: impl Into<SimModel<'a>>,
    query: &SurvivalQuery,
    paths: u64,
    rng: &RngConfig,
    opts: &SimOptions,
) -> Result<JointSurvivalEstimate> {
    let mut all = mc_joint_survival_multi(model, std::slice::from_ref(query), paths, rng, opts)?;
    Ok(all.remove(0))
}

/// Joint survival for several queries evaluated on the same simulated paths (one estimate
/// per query, each with its own standard error).
pub fn mc_joint_survival_multi<'a>(
    model: impl Into<SimModel<'a>>,
    queries: &[SurvivalQuery],
    paths: u64,
    rng: &RngConfig,
    opts: &SimOptions,
) -> Result<Vec<JointSurvivalEstimate>> {
    let model = model.into();
    check_paths(paths)?;
    for q in queries {
        check_query(model.n(), q)?;
        if q.conditioning_time > 0.0 {
            return Err(Error::Unsupported(
                "conditional survival is evaluated per path with mc_conditional_survival".into(),
            ));
        }
    }
    let horizon = queries
        .iter()
        .flat_map(|q| q.horizons.iter().copied())
        .fold(0.0, f64::max);
    if horizon == 0.0 {
        let one = McEstimate::exact(1.0, paths, rng);
        let both = JointSurvivalEstimate {
            rao_blackwell: one,
            indicator: one,
        };
        return Ok(vec![both; queries.len()]);
    }
    let checkpoints: Vec<f64> = queries
        .iter()
        .flat_map(|q| q.horizons.iter().copied())
        .collect();
    let sampler = Sampler::new(model, horizon, &checkpoints, opts.grid_cells)?;
    let extract = matches!(model, SimModel::ShotNoise(_));
    let m = run_paths(paths, 2 * queries.len(), opts, |p, out| {
        let path = sampler.sample(rng, p, extract)?;
        for (q, pair) in queries.iter().zip(out.chunks_mut(2)) {
            let mut exponent = 0.0;
            let mut alive = true;
            for (j, &tj) in q.horizons.iter().enumerate() {
                exponent += path.total_hazard(j, tj)?;
                alive &= path.survives(j, tj)?;
            }
            pair[0] = (-exponent).exp();
            pair[1] = if alive { 1.0 } else { 0.0 };
        }
        Ok(())
    })?;
    Ok(m.chunks(2)
        .map(|pair| JointSurvivalEstimate {
            rao_blackwell: McEstimate::from_moments(&pair[0], rng),
            indicator: McEstimate::from_moments(&pair[1], rng),
        })
        .collect())
}

/// Joint survival of the min-decomposition `tau^j = min(taubar^j, tautilde^j)`.
pub fn mc_min_decomposition(
    model: &MinDecomposition,
    query: &SurvivalQuery,
    paths: u64,
    rng: &RngConfig,
    opts: &SimOptions,
) -> Result<JointSurvivalEstimate> {
    mc_joint_survival(model, query, paths, rng, opts)
}

/// First horizon (by doubling) at which `min_survival` drops to the tail bound.
pub fn suggest_horizon(model: &FactorModel, from: f64) -> Option<f64> {
    let mut h = from.max(1e-3);
    for _ in 0..200 {
        h *= 2.0;
        match survival::min_survival(model, h) {
            Ok(s) if s <= TAIL_BOUND => return Some(h),
            Ok(_) => {}
            Err(_) => return None,
        }
    }
    None
}

/// `P(tau^1 = tau^2 < inf)` for a two-component compound-Poisson factor model, estimated on
/// `[0, horizon]` once the tail beyond it is below `TAIL_BOUND`.
pub fn mc_simultaneous_prob(
    model: &FactorModel,
    paths: u64,
    horizon: f64,
    rng: &RngConfig,
    opts: &SimOptions,
) -> Result<SimultaneousEstimate> {
    check_paths(paths)?;
    if model.n() != 2 {
        return Err(Error::Argument(format!(
            "simultaneous-default estimation needs 2 components, got {}",
            model.n()
        )));
    }
    if !model.is_pure_jump() {
        return Err(Error::Unsupported(
            "simultaneous-default estimation needs compound-Poisson factors".into(),
        ));
    }
    let tail = survival::min_survival(model, horizon)?;
    if tail > TAIL_BOUND {
        let hint = suggest_horizon(model, horizon).map_or_else(
            || "no finite horizon found".to_string(),
            |h| format!("try --horizon {h}"),
        );
        return Err(Error::Numerical(format!(
            "horizon {horizon} leaves P(min tau > horizon) = {tail:e} above {TAIL_BOUND:e}; {hint}"
        )));
    }
    let sampler = Sampler::new(model.into(), horizon, &[], opts.grid_cells)?;
    let m = run_paths(paths, 2, opts, |p, out| {
        let path = sampler.sample(rng, p, true)?;
        out[0] = if path.taus[0].is_finite() && path.taus[0] == path.taus[1] {
            1.0
        } else {
            0.0
        };
        // sum over shocks of P(crossing at this shock) for both components
        let (mut k1, mut k2) = (0.0_f64, 0.0_f64);
        let mut rb = 0.0;
        for shock in &path.shocks {
            let (d1, d2) = (shock.marks[0], shock.marks[1]);
            if d1 > 0.0 && d2 > 0.0 {
                rb += (-k1).exp() * -(-d1).exp_m1() * (-k2).exp() * -(-d2).exp_m1();
            }
            k1 += d1;
            k2 += d2;
        }
        out[1] = rb;
        Ok(())
    })?;
    Ok(SimultaneousEstimate {
        indicator: McEstimate::from_moments(&m[0], rng),
        rao_blackwell: McEstimate::from_moments(&m[1], rng),
        tail,
    })
}

/// Mean of `eta^J_t = exp(-K^J_t + Lambda^J_t)`, which should be 1.
pub fn mc_martingale_check<'a>(
    model: impl Into<SimModel<'a>>,
    subset: SubsetMask,
    t: f64,
    paths: u64,
    rng: &RngConfig,
    opts: &SimOptions,
) -> Result<McEstimate> {
    let mut all = mc_martingale_checks(model, &[(subset, t)], paths, rng, opts)?;
    Ok(all.remove(0))
}

/// `mc_martingale_check` for several `(J, t)` pairs on the same simulated paths.
pub fn mc_martingale_checks<'a>(
    model: impl Into<SimModel<'a>>,
    cases: &[(SubsetMask, f64)],
    paths: u64,
    rng: &RngConfig,
    opts: &SimOptions,
) -> Result<Vec<McEstimate>> {
    let model = model.into();
    check_paths(paths)?;
    let mut lambdas = Vec::with_capacity(cases.len());
    for &(subset, t) in cases {
        if subset.is_empty() || subset.bits() >> model.n() != 0 {
            return Err(Error::Argument(format!(
                "subset {subset} is not a nonempty subset of the components"
            )));
        }
        if !(t.is_finite() && t >= 0.0) {
            return Err(Error::Argument(format!(
                "time must be finite and >= 0, got {t}"
            )));
        }
        lambdas.push(if t == 0.0 {
            0.0
        } else {
            model.jump_compensator(subset, t)?
        });
    }
    let horizon = cases.iter().map(|c| c.1).fold(0.0, f64::max);
    if horizon == 0.0 {
        return Ok(vec![McEstimate::exact(1.0, paths, rng); cases.len()]);
    }
    let times: Vec<f64> = cases.iter().map(|c| c.1).collect();
    let sampler = Sampler::new(model, horizon, &times, opts.grid_cells)?;
    let m = run_paths(paths, cases.len(), opts, |p, out| {
        let path = sampler.sample(rng, p, false)?;
        for ((&(subset, t), &lambda), slot) in cases.iter().zip(&lambdas).zip(out.iter_mut()) {
            *slot = if t == 0.0 {
                1.0
            } else {
                let mut k = 0.0;
                for j in subset.members() {
                    k += path.cumulative(j, t)?;
                }
                (lambda - k).exp()
            };
        }
        Ok(())
    })?;
    Ok(m.iter()
        .zip(cases)
        .map(|(mom, &(_, t))| {
            if t == 0.0 {
                McEstimate::exact(1.0, paths, rng)
            } else {
                McEstimate::from_moments(mom, rng)
            }
        })
        .collect())
}

/// Conditional joint survival along one path: `eta^{A_1}_s * exp(-exponent)` at the query's
/// conditioning time `s`, where `A_1` is the full component set.
pub fn mc_conditional_survival<'a>(
    model: impl Into<SimModel<'a>>,
    path: &PathRecord,
    query: &SurvivalQuery,
) -> Result<f64> {
    let model = model.into();
    check_query(model.n(), query)?;
    let s = query.conditioning_time;
    let unconditional = SurvivalQuery::new(query.horizons.clone())?;
    if s == 0.0 {
        return model.joint_survival(&unconditional);
    }
    if path.n() != model.n() {
        return Err(Error::Argument(format!(
            "path has {} components, model has {}",
            path.n(),
            model.n()
        )));
    }
    if s > path.horizon {
        return Err(Error::Argument(format!(
            "path simulated to {} is shorter than the conditioning time {s}",
            path.horizon
        )));
    }
    if let Some(&t) = query.horizons.iter().find(|&&t| t < s) {
        return Err(Error::Argument(format!(
            "horizon {t} precedes the conditioning time {s}"
        )));
    }
    let full = SubsetMask::full(model.n());
    let mut k = 0.0;
    for j in 0..model.n() {
        k += path.cumulative(j, s)?;
    }
    let log_eta = model.jump_compensator(full, s)? - k;
    Ok(exp_survival(
        log_eta + model.jump_log_survival(&unconditional)?,
    ))
}

/// Average of `mc_conditional_survival` over simulated paths; by the tower property its mean
/// is the unconditional joint survival.
pub fn mc_conditional_average<'a>(
    model: impl Into<SimModel<'a>>,
    query: &SurvivalQuery,
    paths: u64,
    rng: &RngConfig,
    opts: &SimOptions,
) -> Result<McEstimate> {
    let model = model.into();
    check_paths(paths)?;
    check_query(model.n(), query)?;
    let s = query.conditioning_time;
    if s == 0.0 {
        let value = model.joint_survival(query)?;
        return Ok(McEstimate::exact(value, paths, rng));
    }
    let sampler = Sampler::new(model, s, &[s], opts.grid_cells)?;
    let m = run_paths(paths, 1, opts, |p, out| {
        let path = sampler.sample(rng, p, false)?;
        out[0] = mc_conditional_survival(model, &path, query)?;
        Ok(())
    })?;
    Ok(McEstimate::from_moments(&m[0], rng))
}

/// Fraction of paths with no default by `horizon`; estimates `min_survival(horizon)`.
pub fn mc_censored_fraction<'a>(
    model: impl Into<SimModel<'a>>,
    horizon: f64,
    paths: u64,
    rng: &RngConfig,
    opts: &SimOptions,
) -> Result<McEstimate> {
    let model = model.into();
    check_paths(paths)?;
    let sampler = Sampler::new(model, horizon, &[], opts.grid_cells)?;
    let m = run_paths(paths, 1, opts, |p, out| {
        let path = sampler.sample(rng, p, true)?;
        out[0] = if path.taus.iter().all(|t| t.is_infinite()) {
            1.0
        } else {
            0.0
        };
        Ok(())
    })?;
    Ok(McEstimate::from_moments(&m[0], rng))
}

/// Builds one path per index through the run's shared sampler, for callers that need the
/// path records themselves.
pub fn sample_paths<'a>(
    model: impl Into<SimModel<'a>>,
    horizon: f64,
    rng: &RngConfig,
    indices: std::ops::Range<u64>,
    checkpoints: &[f64],
    opts: &SimOptions,
) -> Result<Vec<PathRecord>> {
    let sampler = Sampler::new(model.into(), horizon, checkpoints, opts.grid_cells)?;
    indices.map(|p| sampler.sample(rng, p, true)).collect()
}
