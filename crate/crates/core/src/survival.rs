//! Closed-form joint survival probabilities for models with deterministic compensators.
//!
//! The multivariate formula sorts the horizons, builds the nested sets
//! `A_k = {sigma(k), ..., sigma(n)}` and sums compensator increments
//! `Lambda^{A_k} - Lambda^{A_{k+1}}` at `t_{sigma(k)}`. The Möbius form sums
//! `gamma^J * delta0(max_{i in J} t_i)` over nonempty `J`. Both assemble the exponent in log
//! space and exponentiate once.

use serde::Serialize;

use crate::compensator::{build_table, CompensatorTable, MoRates, SubsetMask};
use crate::error::{Error, Result};
use crate::numerics::log_sum_accumulate;
use crate::process_models::FactorModel;
use crate::MAX_COMPONENTS;

/// Log-survival values below this report as probability zero.
pub const LOG_UNDERFLOW: f64 = -700.0;

/// Anything exposing deterministic subset compensators `Lambda^J_t`.
pub trait Compensators {
    fn n(&self) -> usize;

    /// `Lambda^J_t`; must return 0 for the empty set.
    fn compensator(&self, j: SubsetMask, t: f64) -> Result<f64>;
}

impl Compensators for FactorModel {
    fn n(&self) -> usize {
        FactorModel::n(self)
    }

    fn compensator(&self, j: SubsetMask, t: f64) -> Result<f64> {
        if j.is_empty() {
            return Ok(0.0);
        }
        crate::compensator::subset_compensator(self, j, t)
    }
}

impl Compensators for CompensatorTable {
    fn n(&self) -> usize {
        CompensatorTable::n(self)
    }

    fn compensator(&self, j: SubsetMask, t: f64) -> Result<f64> {
        CompensatorTable::compensator(self, j, t)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SurvivalQuery {
    pub horizons: Vec<f64>,
    pub conditioning_time: f64,
}

impl SurvivalQuery {
    pub fn new(horizons: Vec<f64>) -> Result<Self> {
        Self::conditional(horizons, 0.0)
    }

    pub fn conditional(horizons: Vec<f64>, conditioning_time: f64) -> Result<Self> {
        if horizons.is_empty() {
            return Err(Error::Argument("at least one horizon is required".into()));
        }
        for &t in &horizons {
            if t.is_nan() || t < 0.0 {
                return Err(Error::Argument(format!("horizons must be >= 0, got {t}")));
            }
            if t.is_infinite() {
                return Err(Error::Argument(
                    "infinite horizons are not supported; pass a large finite value".into(),
                ));
            }
        }
        let min = horizons.iter().copied().fold(f64::INFINITY, f64::min);
        if !(conditioning_time >= 0.0 && conditioning_time <= min) {
            return Err(Error::Argument(format!(
                "conditioning time {conditioning_time} must lie in [0, min horizon = {min}]"
            )));
        }
        Ok(Self {
            horizons,
            conditioning_time,
        })
    }

    pub fn n(&self) -> usize {
        self.horizons.len()
    }
}

/// Sorting permutation of the horizons and the induced nested subsets.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NestedChain {
    /// Zero-based; `t[sigma[0]] <= t[sigma[1]] <= ...`.
    pub sigma: Vec<usize>,
    /// `sets[k] = {sigma[k], ..., sigma[n-1]}`, with a trailing empty set.
    pub sets: Vec<SubsetMask>,
}

impl NestedChain {
    /// Chain for an explicit permutation, which must sort `t`.
    pub fn from_permutation(t: &[f64], sigma: Vec<usize>) -> Result<Self> {
        let n = t.len();
        let mut seen = vec![false; n];
        for &s in &sigma {
            if s >= n || std::mem::replace(&mut seen[s], true) {
                return Err(Error::Argument(format!(
                    "{sigma:?} is not a permutation of 0..{n}"
                )));
            }
        }
        if sigma.len() != n || sigma.windows(2).any(|w| t[w[0]] > t[w[1]]) {
            return Err(Error::Argument(format!(
                "{sigma:?} does not sort the horizons"
            )));
        }
        let mut sets = vec![SubsetMask::EMPTY; n + 1];
        for k in (0..n).rev() {
            sets[k] = sets[k + 1].union(SubsetMask::singleton(sigma[k]));
        }
        Ok(Self { sigma, sets })
    }
}

/// Stable sort of the horizons (ties keep index order) and the nested sets it induces.
pub fn order_horizons(t: &[f64]) -> Result<NestedChain> {
    if t.is_empty() {
        return Err(Error::Argument("at least one horizon is required".into()));
    }
    if t.len() > 32 {
        return Err(Error::Capacity(format!(
            "{} horizons exceed the 32-bit subset mask",
            t.len()
        )));
    }
    if let Some(bad) = t.iter().find(|x| !(x.is_finite() && **x >= 0.0)) {
        return Err(Error::Argument(format!(
            "horizons must be finite and >= 0, got {bad}"
        )));
    }
    let mut sigma: Vec<usize> = (0..t.len()).collect();
    sigma.sort_by(|&a, &b| t[a].total_cmp(&t[b]));
    NestedChain::from_permutation(t, sigma)
}

/// Exponent `sum_k (Lambda^{A_k} - Lambda^{A_{k+1}})(t_{sigma(k)})` for a given chain.
pub fn nested_exponent<M: Compensators + ?Sized>(
    model: &M,
    t: &[f64],
    chain: &NestedChain,
) -> Result<f64> {
    let mut terms = Vec::with_capacity(2 * t.len());
    for (k, &i) in chain.sigma.iter().enumerate() {
        let tk = t[i];
        terms.push(model.compensator(chain.sets[k], tk)?);
        terms.push(-model.compensator(chain.sets[k + 1], tk)?);
    }
    Ok(log_sum_accumulate(&terms))
}

fn check_dims<M: Compensators + ?Sized>(model: &M, query: &SurvivalQuery) -> Result<()> {
    if query.n() != model.n() {
        return Err(Error::Argument(format!(
            "{} horizons for a {}-component model",
            query.n(),
            model.n()
        )));
    }
    if query.conditioning_time > 0.0 {
        return Err(Error::Unsupported(
            "conditioning time > 0 needs a simulated path (see simulation::mc_conditional_survival)".into(),
        ));
    }
    Ok(())
}

pub fn exp_survival(log_survival: f64) -> f64 {
    if log_survival < LOG_UNDERFLOW {
        0.0
    } else {
        log_survival.exp()
    }
}

/// `ln P(tau_1 > t_1, ..., tau_n > t_n)` from the nested-subset formula.
pub fn joint_log_survival<M: Compensators + ?Sized>(
    model: &M,
    query: &SurvivalQuery,
) -> Result<f64> {
    check_dims(model, query)?;
    let chain = order_horizons(&query.horizons)?;
    Ok(-nested_exponent(model, &query.horizons, &chain)?)
}

pub fn joint_survival<M: Compensators + ?Sized>(model: &M, query: &SurvivalQuery) -> Result<f64> {
    joint_log_survival(model, query).map(exp_survival)
}

/// Log-survival from the Möbius form `sum_J gamma^J delta0(max_{i in J} t_i)`.
pub fn joint_log_survival_mobius_table(
    table: &CompensatorTable,
    query: &SurvivalQuery,
) -> Result<f64> {
    check_dims(table, query)?;
    let n = table.n();
    let gammas = table.gamma_rates();
    let mut max_t = vec![0.0f64; 1 << n];
    let mut terms = Vec::with_capacity(1 << n);
    for mask in 1..(1usize << n) {
        let low = mask.trailing_zeros() as usize;
        max_t[mask] = max_t[mask & (mask - 1)].max(query.horizons[low]);
        let s = table.deformed_time(max_t[mask])?;
        if s > 0.0 {
            terms.push(gammas[mask] * s);
        }
    }
    Ok(-log_sum_accumulate(&terms))
}

pub fn joint_log_survival_mobius(model: &FactorModel, query: &SurvivalQuery) -> Result<f64> {
    if model.n() > MAX_COMPONENTS {
        return Err(Error::Capacity(format!(
            "Möbius form limited to {MAX_COMPONENTS} components"
        )));
    }
    joint_log_survival_mobius_table(&build_table(model)?, query)
}

pub fn joint_survival_mobius(model: &FactorModel, query: &SurvivalQuery) -> Result<f64> {
    joint_log_survival_mobius(model, query).map(exp_survival)
}

/// Möbius form for general (not necessarily linear) compensators:
/// `Gamma^J_t = sum_{I ⊆ J} (-1)^{|J|-|I|+1} Lambda^{I^c}_t` evaluated at `t = max_{i in J} t_i`.
/// Costs `3^n` compensator evaluations.
pub fn joint_log_survival_mobius_general<M: Compensators + ?Sized>(
    model: &M,
    query: &SurvivalQuery,
) -> Result<f64> {
    check_dims(model, query)?;
    let n = model.n();
    if n > 12 {
        return Err(Error::Capacity(
            "general Möbius form limited to 12 components".into(),
        ));
    }
    let mut terms = Vec::new();
    for bits in 1..(1u32 << n) {
        let j = SubsetMask(bits);
        let t = j.members().map(|i| query.horizons[i]).fold(0.0, f64::max);
        for i in j.submasks() {
            let sign = if (j.len() - i.len() + 1).is_multiple_of(2) {
                1.0
            } else {
                -1.0
            };
            let lambda = model.compensator(i.complement(n), t)?;
            if lambda != 0.0 {
                terms.push(sign * lambda);
            }
        }
    }
    Ok(-log_sum_accumulate(&terms))
}

/// Bivariate piecewise formula: for `t1 <= t2`,
/// `exp(-Lambda^2_{t2} - (Lambda^{12}_{t1} - Lambda^2_{t1}))`, symmetric otherwise.
pub fn bivariate_log_survival<M: Compensators + ?Sized>(
    model: &M,
    t1: f64,
    t2: f64,
) -> Result<f64> {
    if model.n() != 2 {
        return Err(Error::Argument(format!(
            "bivariate survival needs n = 2, got {}",
            model.n()
        )));
    }
    for t in [t1, t2] {
        if !(t.is_finite() && t >= 0.0) {
            return Err(Error::Argument(format!(
                "horizons must be finite and >= 0, got {t}"
            )));
        }
    }
    let both = SubsetMask::full(2);
    // `late` is the component with the larger horizon
    let (late, t_early, t_late) = if t1 <= t2 {
        (SubsetMask::singleton(1), t1, t2)
    } else {
        (SubsetMask::singleton(0), t2, t1)
    };
    let terms = [
        model.compensator(both, t_early)?,
        -model.compensator(late, t_early)?,
        model.compensator(late, t_late)?,
    ];
    Ok(-log_sum_accumulate(&terms))
}

pub fn bivariate_survival<M: Compensators + ?Sized>(model: &M, t1: f64, t2: f64) -> Result<f64> {
    bivariate_log_survival(model, t1, t2).map(exp_survival)
}

/// `P(min_i tau_i > t) = exp(-Lambda^{full}_t)`.
pub fn min_survival<M: Compensators + ?Sized>(model: &M, t: f64) -> Result<f64> {
    if !(t.is_finite() && t >= 0.0) {
        return Err(Error::Argument(format!(
            "time must be finite and >= 0, got {t}"
        )));
    }
    Ok(exp_survival(
        -model.compensator(SubsetMask::full(model.n()), t)?,
    ))
}

/// Bivariate Marshall–Olkin `P(tau_1 = tau_2) = gamma^{12} / (gamma^1 + gamma^2 + gamma^{12})`.
pub fn simultaneous_default_prob_mo(model: &FactorModel) -> Result<f64> {
    if model.n() != 2 {
        return Err(Error::Argument(format!(
            "simultaneous-default probability needs n = 2, got {}",
            model.n()
        )));
    }
    if !model.has_identity_deformation() {
        return Err(Error::Unsupported(
            "closed form needs linear compensators".into(),
        ));
    }
    simultaneous_default_prob_table(&build_table(model)?)
}

pub fn simultaneous_default_prob_table(table: &CompensatorTable) -> Result<f64> {
    if table.n() != 2 {
        return Err(Error::Argument(format!(
            "simultaneous-default probability needs n = 2, got {}",
            table.n()
        )));
    }
    let rates = MoRates::from_table(table)?;
    let g1 = rates.rate(SubsetMask::singleton(0));
    let g2 = rates.rate(SubsetMask::singleton(1));
    let g12 = rates.rate(SubsetMask::full(2));
    if g12 < 0.0 {
        return Err(Error::Unsupported(format!(
            "gamma^[1,2] = {g12} < 0: outside the Marshall-Olkin class"
        )));
    }
    let total = g1 + g2 + g12;
    if !(total > 0.0) {
        return Err(Error::Unsupported(
            "model never defaults (all Marshall-Olkin rates vanish)".into(),
        ));
    }
    Ok(g12 / total)
}
