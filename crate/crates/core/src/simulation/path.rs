//! Exact event-driven path sampling and default-time extraction.

use std::sync::Arc;

use rand_distr::{Distribution, Exp};

use super::gamma_bridge::{Cell, GammaPath, Grid};
use super::SimModel;
use crate::decomposition::ContinuousHazard;
use crate::error::{Error, Result};
use crate::numerics::rng::{open_closed_uniform, unit_exponential, PathRng, RngConfig};
use crate::process_models::{Factor, FactorModel, JumpMarks};
use crate::shot_noise::ShotNoiseModel;

/// Absolute time tolerance for locating a threshold crossing on a continuous stretch.
pub const BISECTION_TOLERANCE: f64 = 1e-10;

/// Default number of gamma-grid cells over the (deformed) horizon.
pub const DEFAULT_GRID_CELLS: u32 = 1 << 12;

/// One arrival of a driving Poisson stream.
#[derive(Debug, Clone, PartialEq)]
pub struct Shock {
    /// Calendar time of the arrival.
    pub time: f64,
    /// Index of the driving factor (always 0 for shot noise).
    pub source: usize,
    /// Factor models: the jump of each `K^j`. Shot noise: the single mark `gamma_i`.
    pub marks: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct LedgerEntry {
    time: f64,
    deformed: f64,
    /// `K^j` jump part just after this entry.
    level: f64,
}

/// Everything about a factor model that does not vary across paths.
#[derive(Debug)]
pub(crate) struct FactorContext {
    model: FactorModel,
    horizon: f64,
    grid: Option<Grid>,
    /// `weights[j][g] = phi_j * A[j][k_g]` for the g-th gamma factor `k_g`.
    weights: Vec<Vec<f64>>,
    gamma_factors: Vec<usize>,
}

impl FactorContext {
    pub fn new(model: &FactorModel, horizon: f64, checkpoints: &[f64], cells: u32) -> Result<Self> {
        let end = model.deformed_time(horizon)?;
        let gamma_factors: Vec<usize> = (0..model.m())
            .filter(|&k| matches!(model.factors()[k], Factor::Gamma { .. }))
            .collect();
        let grid = if gamma_factors.is_empty() {
            None
        } else {
            let deformed = checkpoints
                .iter()
                .filter(|&&t| t <= horizon)
                .map(|&t| model.deformed_time(t))
                .collect::<Result<Vec<_>>>()?;
            Some(Grid::new(end, &deformed, cells))
        };
        let weights = (0..model.n())
            .map(|j| {
                gamma_factors
                    .iter()
                    .map(|&k| model.covariate_scale(j) * model.loading(j, k))
                    .collect()
            })
            .collect();
        Ok(Self {
            model: model.clone(),
            horizon,
            grid,
            weights,
            gamma_factors,
        })
    }

    fn has_continuous(&self, j: usize) -> bool {
        self.weights[j].iter().any(|&w| w > 0.0)
    }
}

#[derive(Debug, Clone)]
pub(crate) struct FactorState {
    ctx: Arc<FactorContext>,
    ledgers: Vec<Vec<LedgerEntry>>,
    gamma: Vec<GammaPath>,
}

#[derive(Debug, Clone)]
pub(crate) enum PathState {
    Factor(FactorState),
    ShotNoise(Arc<ShotNoiseModel>),
    MinDecomposition {
        jump: FactorState,
        continuous: Arc<Vec<ContinuousHazard>>,
        continuous_thresholds: Vec<f64>,
    },
}

/// One simulated scenario. `K^j` can be evaluated exactly at any `t <= horizon` (gamma
/// factors: exactly in law at grid nodes, bridge-refined elsewhere).
#[derive(Debug, Clone)]
pub struct PathRecord {
    pub horizon: f64,
    pub path_index: u64,
    pub rng: RngConfig,
    /// Arrivals on `[0, horizon]` in time order.
    pub shocks: Vec<Shock>,
    /// Unit-exponential thresholds of the jump mechanism.
    pub thresholds: Vec<f64>,
    /// Default times, `+inf` when not reached by the horizon. Empty when extraction was
    /// skipped.
    pub taus: Vec<f64>,
    pub(crate) state: PathState,
}

/// Per-run sampler; holds the path-independent context.
pub(crate) enum Sampler {
    Factor(Arc<FactorContext>),
    ShotNoise(Arc<ShotNoiseModel>, f64),
    MinDecomposition(Arc<FactorContext>, Arc<Vec<ContinuousHazard>>),
}

impl Sampler {
    pub fn new(model: SimModel<'_>, horizon: f64, checkpoints: &[f64], cells: u32) -> Result<Self> {
        if !(horizon.is_finite() && horizon > 0.0) {
            return Err(Error::Argument(format!(
                "simulation horizon must be finite and > 0, got {horizon}"
            )));
        }
        Ok(match model {
            SimModel::Factor(m) => Sampler::Factor(Arc::new(FactorContext::new(
                m,
                horizon,
                checkpoints,
                cells,
            )?)),
            SimModel::ShotNoise(m) => Sampler::ShotNoise(Arc::new(m.clone()), horizon),
            SimModel::MinDecomposition(m) => {
                for x in &m.continuous {
                    if x.domain_end() < horizon {
                        return Err(Error::Domain(format!(
                            "continuous hazard defined up to {} < horizon {horizon}",
                            x.domain_end()
                        )));
                    }
                }
                Sampler::MinDecomposition(
                    Arc::new(FactorContext::new(&m.jump, horizon, checkpoints, cells)?),
                    Arc::new(m.continuous.clone()),
                )
            }
        })
    }

    pub fn n(&self) -> usize {
        match self {
            Sampler::Factor(c) | Sampler::MinDecomposition(c, _) => c.model.n(),
            Sampler::ShotNoise(m, _) => m.n(),
        }
    }

    pub fn sample(&self, cfg: &RngConfig, p: u64, extract_taus: bool) -> Result<PathRecord> {
        let mut rng = cfg.path_rng(p);
        let n = self.n();
        let thresholds: Vec<f64> = (0..n).map(|_| unit_exponential(&mut rng)).collect();
        let mut record = match self {
            Sampler::Factor(ctx) => {
                let (shocks, state) = sample_factor(ctx, &mut rng)?;
                PathRecord {
                    horizon: ctx.horizon,
                    path_index: p,
                    rng: *cfg,
                    shocks,
                    thresholds,
                    taus: Vec::new(),
                    state: PathState::Factor(state),
                }
            }
            Sampler::ShotNoise(model, horizon) => PathRecord {
                horizon: *horizon,
                path_index: p,
                rng: *cfg,
                shocks: sample_shot_noise(model, *horizon, &mut rng),
                thresholds,
                taus: Vec::new(),
                state: PathState::ShotNoise(model.clone()),
            },
            Sampler::MinDecomposition(ctx, continuous) => {
                let continuous_thresholds: Vec<f64> =
                    (0..n).map(|_| unit_exponential(&mut rng)).collect();
                let (shocks, jump) = sample_factor(ctx, &mut rng)?;
                PathRecord {
                    horizon: ctx.horizon,
                    path_index: p,
                    rng: *cfg,
                    shocks,
                    thresholds,
                    taus: Vec::new(),
                    state: PathState::MinDecomposition {
                        jump,
                        continuous: continuous.clone(),
                        continuous_thresholds,
                    },
                }
            }
        };
        if extract_taus {
            record.taus = extract_default_times(&record);
        }
        Ok(record)
    }
}

fn sample_factor(ctx: &Arc<FactorContext>, rng: &mut PathRng) -> Result<(Vec<Shock>, FactorState)> {
    let model = &ctx.model;
    let n = model.n();
    let end = model.deformed_time(ctx.horizon)?;

    // (deformed time, shock) for every compound-Poisson arrival
    let mut arrivals: Vec<(f64, Shock)> = Vec::new();
    let mut gamma = Vec::with_capacity(ctx.gamma_factors.len());
    for (k, factor) in model.factors().iter().enumerate() {
        match factor {
            Factor::CompoundPoisson { intensity, marks } => {
                if *intensity == 0.0 {
                    continue;
                }
                let gaps = Exp::new(*intensity).expect("positive intensity");
                let mut s = 0.0;
                loop {
                    s += gaps.sample(rng);
                    if s > end {
                        break;
                    }
                    let jumps: Vec<f64> = match marks {
                        JumpMarks::Common(law) => {
                            let x = law.sample(rng);
                            (0..n)
                                .map(|j| model.covariate_scale(j) * model.loading(j, k) * x)
                                .collect()
                        }
                        JumpMarks::PerComponent(laws) => laws
                            .iter()
                            .enumerate()
                            .map(|(j, law)| {
                                model.covariate_scale(j) * model.loading(j, k) * law.sample(rng)
                            })
                            .collect(),
                    };
                    arrivals.push((
                        s,
                        Shock {
                            time: model.inverse_deformed_time(s)?,
                            source: k,
                            marks: jumps,
                        },
                    ));
                }
            }
            Factor::Gamma { shape, rate } => {
                let grid = ctx
                    .grid
                    .as_ref()
                    .expect("grid exists when gamma factors do");
                gamma.push(GammaPath::sample(k, *shape, *rate, grid, rng));
            }
        }
    }
    arrivals.sort_by(|a, b| a.0.total_cmp(&b.0));

    let mut ledgers: Vec<Vec<LedgerEntry>> = vec![Vec::new(); n];
    let mut levels = vec![0.0; n];
    for (s, shock) in &arrivals {
        for (j, &jump) in shock.marks.iter().enumerate() {
            if jump > 0.0 {
                levels[j] += jump;
                ledgers[j].push(LedgerEntry {
                    time: shock.time,
                    deformed: *s,
                    level: levels[j],
                });
            }
        }
    }
    let shocks = arrivals.into_iter().map(|(_, shock)| shock).collect();
    Ok((
        shocks,
        FactorState {
            ctx: ctx.clone(),
            ledgers,
            gamma,
        },
    ))
}

/// NHPP arrivals by thinning against the per-piece majorant, with i.i.d. marks.
fn sample_shot_noise(model: &ShotNoiseModel, horizon: f64, rng: &mut PathRng) -> Vec<Shock> {
    let mut shocks = Vec::new();
    for (start, end, majorant) in model.intensity.pieces(horizon) {
        if majorant <= 0.0 {
            continue;
        }
        let gaps = Exp::new(majorant).expect("positive majorant");
        let mut s = start;
        loop {
            s += gaps.sample(rng);
            if s > end {
                break;
            }
            let rate = model.intensity.rate_at(s);
            if rate < majorant && open_closed_uniform(rng) * majorant > rate {
                continue;
            }
            shocks.push(Shock {
                time: s,
                source: 0,
                marks: vec![model.marks.sample(rng)],
            });
        }
    }
    shocks
}

impl FactorState {
    /// Jump part of `K^j` at calendar time `t` (right-continuous).
    fn jump_level(&self, j: usize, t: f64) -> f64 {
        let ledger = &self.ledgers[j];
        let k = ledger.partition_point(|e| e.time <= t);
        if k == 0 {
            0.0
        } else {
            ledger[k - 1].level
        }
    }

    fn jump_level_deformed(&self, j: usize, s: f64) -> f64 {
        let ledger = &self.ledgers[j];
        let k = ledger.partition_point(|e| e.deformed <= s);
        if k == 0 {
            0.0
        } else {
            ledger[k - 1].level
        }
    }

    fn continuous_deformed(&self, j: usize, s: f64, cfg: &RngConfig, p: u64) -> f64 {
        let Some(grid) = &self.ctx.grid else {
            return 0.0;
        };
        self.gamma
            .iter()
            .zip(&self.ctx.weights[j])
            .filter(|(_, &w)| w > 0.0)
            .map(|(g, &w)| w * g.value(grid, s, cfg, p))
            .sum()
    }

    fn cumulative(&self, j: usize, t: f64, cfg: &RngConfig, p: u64) -> f64 {
        let mut k = self.jump_level(j, t);
        if self.ctx.has_continuous(j) {
            let s = self.ctx.model.deformed_time(t).expect("t within horizon");
            k += self.continuous_deformed(j, s, cfg, p);
        }
        k
    }

    fn cumulative_left(&self, j: usize, t: f64, cfg: &RngConfig, p: u64) -> f64 {
        let ledger = &self.ledgers[j];
        let k = ledger.partition_point(|e| e.time < t);
        let mut level = if k == 0 { 0.0 } else { ledger[k - 1].level };
        if self.ctx.has_continuous(j) {
            let s = self.ctx.model.deformed_time(t).expect("t within horizon");
            level += self.continuous_deformed(j, s, cfg, p);
        }
        level
    }

    fn first_passage(&self, j: usize, theta: f64, cfg: &RngConfig, p: u64) -> f64 {
        if !self.ctx.has_continuous(j) {
            return self.ledgers[j]
                .iter()
                .find(|e| e.level >= theta)
                .map_or(f64::INFINITY, |e| e.time);
        }
        let grid = self
            .ctx
            .grid
            .as_ref()
            .expect("continuous part implies grid");
        let weights = &self.ctx.weights[j];
        let active: Vec<usize> = (0..weights.len()).filter(|&g| weights[g] > 0.0).collect();
        let combine = |values: &[f64]| -> f64 {
            active
                .iter()
                .zip(values)
                .map(|(&g, v)| weights[g] * v)
                .sum()
        };

        for i in 1..grid.nodes.len() {
            let right: Vec<f64> = active.iter().map(|&g| self.gamma[g].values[i]).collect();
            if combine(&right) + self.jump_level_deformed(j, grid.nodes[i]) < theta {
                continue;
            }
            // crossing inside coarse interval i: descend the dyadic tree
            let mut vl: Vec<f64> = active
                .iter()
                .map(|&g| self.gamma[g].values[i - 1])
                .collect();
            let mut vr = right;
            let mut cell = Cell::coarse(grid, i);
            for _ in 0..grid.depths[i] {
                let vm: Vec<f64> = active
                    .iter()
                    .enumerate()
                    .map(|(a, &g)| self.gamma[g].split(&cell, vl[a], vr[a], cfg, p))
                    .collect();
                let right_half = combine(&vm) + self.jump_level_deformed(j, cell.mid()) < theta;
                cell = cell.child(right_half);
                if right_half {
                    vl = vm;
                } else {
                    vr = vm;
                }
            }
            let (cl, cr) = (combine(&vl), combine(&vr));
            return self.cross_in_cell(j, theta, &cell, cl, cr);
        }
        f64::INFINITY
    }

    /// Crossing inside a finest cell where the continuous part is linear from `cl` to `cr`.
    fn cross_in_cell(&self, j: usize, theta: f64, cell: &Cell, cl: f64, cr: f64) -> f64 {
        let lin = |s: f64| cl + (cr - cl) * (s - cell.left) / (cell.right - cell.left);
        let mut lo = cell.left;
        let mut level = self.jump_level_deformed(j, cell.left);
        for e in self.ledgers[j]
            .iter()
            .filter(|e| e.deformed > cell.left && e.deformed <= cell.right)
        {
            if lin(e.deformed) + level >= theta {
                return self.bisect(lo, e.deformed, |s| lin(s) + level >= theta);
            }
            level = e.level;
            if lin(e.deformed) + level >= theta {
                return e.time;
            }
            lo = e.deformed;
        }
        self.bisect(lo, cell.right, |s| lin(s) + level >= theta)
    }

    /// Smallest calendar time (to `BISECTION_TOLERANCE`) in `(lo, hi]` (deformed) where
    /// `crossed` holds, for monotone `crossed`.
    fn bisect(&self, lo: f64, hi: f64, crossed: impl Fn(f64) -> bool) -> f64 {
        let model = &self.ctx.model;
        let mut t_lo = model.inverse_deformed_time(lo).expect("within horizon");
        let mut t_hi = model.inverse_deformed_time(hi).expect("within horizon");
        while t_hi - t_lo > BISECTION_TOLERANCE {
            let mid = 0.5 * (t_lo + t_hi);
            if mid <= t_lo || mid >= t_hi {
                break;
            }
            if crossed(model.deformed_time(mid).expect("within horizon")) {
                t_hi = mid;
            } else {
                t_lo = mid;
            }
        }
        t_hi
    }
}

fn shot_noise_cumulative(
    model: &ShotNoiseModel,
    shocks: &[Shock],
    j: usize,
    t: f64,
    include_at_t: bool,
) -> f64 {
    let kernel = &model.kernels[j];
    shocks
        .iter()
        .take_while(|s| {
            if include_at_t {
                s.time <= t
            } else {
                s.time < t
            }
        })
        .map(|s| s.marks[0] * kernel.eval(t - s.time))
        .sum()
}

fn shot_noise_first_passage(
    model: &ShotNoiseModel,
    shocks: &[Shock],
    horizon: f64,
    j: usize,
    theta: f64,
) -> f64 {
    let kernel = &model.kernels[j];
    for (q, shock) in shocks.iter().enumerate() {
        let active = &shocks[..=q];
        let at = |t: f64| -> f64 {
            active
                .iter()
                .map(|s| s.marks[0] * kernel.eval(t - s.time))
                .sum()
        };
        if at(shock.time) >= theta {
            return shock.time;
        }
        if !kernel.is_nondecreasing() {
            // K decays between shocks: its maximum on the stretch is at the shock
            continue;
        }
        let end = shocks.get(q + 1).map_or(horizon, |s| s.time);
        if at(end) >= theta {
            let (mut lo, mut hi) = (shock.time, end);
            while hi - lo > BISECTION_TOLERANCE {
                let mid = 0.5 * (lo + hi);
                if mid <= lo || mid >= hi {
                    break;
                }
                if at(mid) >= theta {
                    hi = mid;
                } else {
                    lo = mid;
                }
            }
            return hi;
        }
    }
    f64::INFINITY
}

/// Default times `tau^j = inf { t <= horizon : K^j_t >= Theta^j }` (`+inf` if censored),
/// re-derived from the path's ledger. For the min-decomposition this is
/// `min(taubar^j, tautilde^j)`.
pub fn extract_default_times(path: &PathRecord) -> Vec<f64> {
    let (cfg, p) = (&path.rng, path.path_index);
    match &path.state {
        PathState::Factor(state) => path
            .thresholds
            .iter()
            .enumerate()
            .map(|(j, &theta)| state.first_passage(j, theta, cfg, p))
            .collect(),
        PathState::ShotNoise(model) => path
            .thresholds
            .iter()
            .enumerate()
            .map(|(j, &theta)| {
                shot_noise_first_passage(model, &path.shocks, path.horizon, j, theta)
            })
            .collect(),
        PathState::MinDecomposition {
            jump,
            continuous,
            continuous_thresholds,
        } => path
            .thresholds
            .iter()
            .enumerate()
            .map(|(j, &theta)| {
                let jump_tau = jump.first_passage(j, theta, cfg, p);
                let cont_tau = continuous[j].first_passage(continuous_thresholds[j]);
                let cont_tau = if cont_tau <= path.horizon {
                    cont_tau
                } else {
                    f64::INFINITY
                };
                jump_tau.min(cont_tau)
            })
            .collect(),
    }
}

impl PathRecord {
    pub fn n(&self) -> usize {
        self.thresholds.len()
    }

    fn check_time(&self, t: f64) -> Result<()> {
        if !(t >= 0.0 && t <= self.horizon) {
            return Err(Error::Argument(format!(
                "t = {t} outside the simulated window [0, {}]",
                self.horizon
            )));
        }
        Ok(())
    }

    /// `K^j_t` of the jump (generalized Cox) mechanism, right-continuous.
    pub fn cumulative(&self, j: usize, t: f64) -> Result<f64> {
        self.check_time(t)?;
        Ok(match &self.state {
            PathState::Factor(s) | PathState::MinDecomposition { jump: s, .. } => {
                s.cumulative(j, t, &self.rng, self.path_index)
            }
            PathState::ShotNoise(m) => shot_noise_cumulative(m, &self.shocks, j, t, true),
        })
    }

    /// Left limit `K^j_{t-}`.
    pub fn cumulative_left(&self, j: usize, t: f64) -> Result<f64> {
        self.check_time(t)?;
        Ok(match &self.state {
            PathState::Factor(s) | PathState::MinDecomposition { jump: s, .. } => {
                s.cumulative_left(j, t, &self.rng, self.path_index)
            }
            PathState::ShotNoise(m) => shot_noise_cumulative(m, &self.shocks, j, t, false),
        })
    }

    /// Deterministic continuous hazard `X^j(t)` (zero outside the min-decomposition).
    pub fn continuous_hazard(&self, j: usize, t: f64) -> Result<f64> {
        match &self.state {
            PathState::MinDecomposition { continuous, .. } => continuous[j].eval(t),
            _ => Ok(0.0),
        }
    }

    /// Total log-survival weight `X^j(t) + K^j_t`, so that `P(tau^j > t | path) = exp(-it)`
    /// for nondecreasing hazards.
    pub fn total_hazard(&self, j: usize, t: f64) -> Result<f64> {
        Ok(self.continuous_hazard(j, t)? + self.cumulative(j, t)?)
    }

    /// Whether component `j` survives past `t` on this path.
    pub fn survives(&self, j: usize, t: f64) -> Result<bool> {
        if !self.taus.is_empty() {
            return Ok(self.taus[j] > t);
        }
        // without extracted taus the hazards must be monotone (factor-driven paths)
        if let PathState::ShotNoise(_) = self.state {
            return Err(Error::Unsupported(
                "shot-noise survival needs extracted default times".into(),
            ));
        }
        let mut alive = self.cumulative(j, t)? < self.thresholds[j];
        if let PathState::MinDecomposition {
            continuous,
            continuous_thresholds,
            ..
        } = &self.state
        {
            alive &= continuous[j].eval(t)? < continuous_thresholds[j];
        }
        Ok(alive)
    }

    /// The deterministic continuous hazards and their thresholds, for min-decomposition paths.
    pub fn continuous_part(&self) -> Option<(&[ContinuousHazard], &[f64])> {
        match &self.state {
            PathState::MinDecomposition {
                continuous,
                continuous_thresholds,
                ..
            } => Some((continuous.as_slice(), continuous_thresholds.as_slice())),
            _ => None,
        }
    }
}

/// Samples path `path_index` of the run seeded by `rng`, extracting default times.
/// `checkpoints` are calendar times at which gamma factors are sampled exactly.
pub fn sample_path<'a>(
    model: impl Into<SimModel<'a>>,
    horizon: f64,
    rng: &RngConfig,
    path_index: u64,
    checkpoints: &[f64],
) -> Result<PathRecord> {
    Sampler::new(model.into(), horizon, checkpoints, DEFAULT_GRID_CELLS)?
        .sample(rng, path_index, true)
}
