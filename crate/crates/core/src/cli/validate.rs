//! The `validate` command: every applicable analytic and Monte Carlo cross-check.

use std::time::Instant;

use serde_json::{json, Value};

use super::spec::{LoadedSpec, ModelSpec};
use super::{analytic_survival, shared_clock};
use crate::compensator::{
    build_table, mobius_inverse_check, CompensatorTable, MoRates, MOBIUS_TOLERANCE,
};
use crate::error::Result;
use crate::numerics::SubsetMask;
use crate::process_models::FactorModel;
use crate::simulation::{self, McEstimate, RngConfig, SimModel, SimOptions};
use crate::survival::{self, SurvivalQuery};

/// Monte Carlo checks pass within this many standard errors.
pub const SIGMA_TOLERANCE: f64 = 4.0;
/// Relative agreement required between two analytic evaluations of the same quantity.
pub const ANALYTIC_TOLERANCE: f64 = 1e-12;
/// Shot-noise agreement is limited by quadrature.
pub const QUADRATURE_AGREEMENT: f64 = 1e-8;

struct Checks {
    items: Vec<Value>,
}

impl Checks {
    fn analytic(&mut self, name: &str, observed: f64, expected: f64, rel_tol: f64, detail: &str) {
        let err = (observed - expected).abs();
        let passed = err <= rel_tol * expected.abs().max(1.0) || observed == expected;
        self.items.push(json!({
            "name": name,
            "passed": passed,
            "observed": observed,
            "expected": expected,
            "stderr": null,
            "tolerance": rel_tol,
            "detail": detail,
        }));
    }

    fn mc(&mut self, name: &str, est: &McEstimate, expected: f64, detail: &str) {
        let z = est.z_score(expected);
        self.items.push(json!({
            "name": name,
            "passed": z <= SIGMA_TOLERANCE,
            "observed": est.value,
            "expected": expected,
            "stderr": est.stderr,
            "tolerance": SIGMA_TOLERANCE,
            "detail": format!("{detail}; |z| = {z:.3}"),
        }));
    }

    fn flag(&mut self, name: &str, passed: bool, detail: String) {
        self.items.push(json!({
            "name": name,
            "passed": passed,
            "observed": null,
            "expected": null,
            "stderr": null,
            "tolerance": null,
            "detail": detail,
        }));
    }
}

fn default_horizons(model: &ModelSpec) -> Vec<f64> {
    let n = model.n();
    let limit = match model {
        ModelSpec::Factor(m) => m.deformation().map_or(f64::INFINITY, |d| d.domain_end()),
        ModelSpec::MinDecomposition(m) => m.continuous.iter().map(|x| x.domain_end()).fold(
            m.jump
                .deformation()
                .map_or(f64::INFINITY, |d| d.domain_end()),
            f64::min,
        ),
        _ => f64::INFINITY,
    };
    let scale = if limit < 1.0 { 0.9 * limit } else { 1.0 };
    (0..n).map(|i| scale * (i + 1) as f64 / n as f64).collect()
}

/// Query variants exercising orderings and ties.
fn query_variants(t: &[f64]) -> Vec<Vec<f64>> {
    let mut rev = t.to_vec();
    rev.reverse();
    let tie = vec![t.iter().copied().fold(0.0, f64::max); t.len()];
    let mut mixed = t.to_vec();
    if mixed.len() > 1 {
        mixed[0] = 0.0;
    }
    vec![t.to_vec(), rev, tie, mixed]
}

fn table_checks(checks: &mut Checks, table: &CompensatorTable) {
    let round = mobius_inverse_check(table);
    checks.items.push(json!({
        "name": "mobius_round_trip",
        "passed": round.passed,
        "observed": round.max_residual,
        "expected": 0.0,
        "stderr": null,
        "tolerance": MOBIUS_TOLERANCE,
        "detail": "max relative residual of zeta(mobius(lambda)) - lambda",
    }));
}

fn mo_checks(checks: &mut Checks, model: &ModelSpec) -> Result<()> {
    let rates = match model {
        ModelSpec::Factor(m) if m.has_identity_deformation() => {
            MoRates::from_table(&build_table(m)?)?
        }
        ModelSpec::CompensatorTable(t) => MoRates::from_table(t)?,
        _ => return Ok(()),
    };
    checks.flag(
        "mo_representability",
        rates.is_representable(),
        if rates.is_representable() {
            "all Marshall-Olkin rates nonnegative".into()
        } else {
            rates.diagnostics().join("; ")
        },
    );
    let scale = rates.iter().map(|(_, r)| r.abs()).fold(1.0, f64::max);
    checks.analytic(
        "mo_marginal_recovery",
        rates.max_marginal_residual(),
        0.0,
        MOBIUS_TOLERANCE * scale,
        "max over i of |sum_{J contains i} gamma^J - lambda^{i}|",
    );
    Ok(())
}

fn factor_mc_checks(
    checks: &mut Checks,
    m: &FactorModel,
    t: &[f64],
    paths: u64,
    rng: &RngConfig,
    opts: &SimOptions,
) -> Result<()> {
    let n = m.n();
    if n == 2 {
        checks.analytic(
            "bivariate_vs_nested",
            survival::bivariate_survival(m, t[0], t[1])?,
            survival::joint_survival(m, &SurvivalQuery::new(t.to_vec())?)?,
            1e-14,
            "piecewise bivariate formula against the nested-set formula",
        );
    }
    let t_max = t.iter().copied().fold(0.0, f64::max);
    let eta = simulation::mc_martingale_check(m, SubsetMask::full(n), t_max, paths, rng, opts)?;
    checks.mc(
        "martingale_mean_one",
        &eta,
        1.0,
        "E[exp(-K^J_t + Lambda^J_t)] for the full set",
    );
    if shared_clock(m) && m.has_identity_deformation() {
        let exact = survival::simultaneous_default_prob_mo(m)?;
        let h = simulation::suggest_horizon(m, 1.0).unwrap_or(t_max);
        let s = simulation::mc_simultaneous_prob(m, paths, h, rng, opts)?;
        checks.mc(
            "simultaneous_default_indicator",
            &s.indicator,
            exact,
            &format!("P(tau1 = tau2) against gamma12 / (gamma1 + gamma2 + gamma12), horizon {h}"),
        );
        checks.mc(
            "simultaneous_default_rao_blackwell",
            &s.rao_blackwell,
            exact,
            "sum over shocks of joint crossing probabilities",
        );
    }
    Ok(())
}

fn joint_mc_checks(
    checks: &mut Checks,
    model: SimModel<'_>,
    q: &SurvivalQuery,
    analytic: f64,
    paths: u64,
    rng: &RngConfig,
    opts: &SimOptions,
) -> Result<()> {
    let est = simulation::mc_joint_survival(model, q, paths, rng, opts)?;
    checks.mc(
        "mc_joint_survival_rao_blackwell",
        &est.rao_blackwell,
        analytic,
        "mean exp(-sum_j K^j_{t_j})",
    );
    checks.mc(
        "mc_joint_survival_indicator",
        &est.indicator,
        analytic,
        "mean prod_j 1{tau^j > t_j}",
    );
    checks.flag(
        "rao_blackwell_dominance",
        est.rao_blackwell.variance() <= est.indicator.variance() + 1e-12,
        format!(
            "sample variances {} (Rao-Blackwell) vs {} (indicator)",
            est.rao_blackwell.variance(),
            est.indicator.variance()
        ),
    );
    Ok(())
}

/// Runs every check applicable to the model and assembles the report document.
pub fn run(
    spec: &LoadedSpec,
    horizons: Option<Vec<f64>>,
    paths: u64,
    seed: u64,
    level: &str,
    echo: &[String],
) -> Result<Value> {
    let started = Instant::now();
    let model = &spec.model;
    let t = horizons.unwrap_or_else(|| default_horizons(model));
    if t.len() != model.n() {
        return Err(crate::Error::Argument(format!(
            "--horizons has {} values but the model has {} components",
            t.len(),
            model.n()
        )));
    }
    let q = SurvivalQuery::new(t.clone())?;
    let rng = RngConfig::new(seed);
    let opts = SimOptions::default();
    let mut checks = Checks { items: Vec::new() };

    match model {
        ModelSpec::Factor(m) => table_checks(&mut checks, &build_table(m)?),
        ModelSpec::CompensatorTable(tab) => table_checks(&mut checks, tab),
        _ => {}
    }
    mo_checks(&mut checks, model)?;
    for (i, v) in query_variants(&t).into_iter().enumerate() {
        let (nested, mobius) = analytic_survival(model, &SurvivalQuery::new(v)?)?;
        let tol = if matches!(model, ModelSpec::ShotNoise(_)) {
            QUADRATURE_AGREEMENT
        } else {
            ANALYTIC_TOLERANCE
        };
        checks.analytic(
            &format!("nested_vs_mobius_{i}"),
            nested,
            mobius,
            tol,
            "nested-set formula against the Möbius sum",
        );
    }
    let analytic = analytic_survival(model, &q)?.0;

    match model {
        ModelSpec::Factor(m) => {
            joint_mc_checks(&mut checks, m.into(), &q, analytic, paths, &rng, &opts)?;
            factor_mc_checks(&mut checks, m, &t, paths, &rng, &opts)?;
        }
        ModelSpec::MinDecomposition(m) => {
            let product = crate::decomposition::min_decomposition_survival(m, &q)?;
            checks.analytic(
                "min_decomposition_factorization",
                product,
                survival::joint_survival(m, &q)?,
                ANALYTIC_TOLERANCE,
                "exp(-sum X^j(t_j)) times jump survival against the aggregate nested-set formula",
            );
            joint_mc_checks(&mut checks, m.into(), &q, analytic, paths, &rng, &opts)?;
        }
        ModelSpec::ShotNoise(m) => {
            let tol = simulation::SHOT_NOISE_TOL;
            let n = m.n();
            let t_max = t.iter().copied().fold(0.0, f64::max);
            let diagonal = vec![t_max; n];
            let dq = SurvivalQuery::new(diagonal.clone())?;
            let campbell_diag = (-m.campbell_exponent(&diagonal, tol)?).exp();
            checks.analytic(
                "shot_noise_diagonal_laplace",
                survival::joint_survival(&m.compensators(tol), &dq)?,
                campbell_diag,
                QUADRATURE_AGREEMENT,
                "compensator formula against the exact Laplace functional at equal horizons",
            );
            let campbell = (-m.campbell_exponent(&t, tol)?).exp();
            let est = simulation::mc_joint_survival(m, &q, paths, &rng, &opts)?;
            checks.mc(
                "shot_noise_mc_laplace",
                &est.rao_blackwell,
                campbell,
                "mean exp(-sum_j K^j_{t_j}) against the exact Laplace functional",
            );
            if m.kernels
                .iter()
                .all(|k| matches!(k, crate::shot_noise::Kernel::Constant { .. }))
            {
                checks.mc(
                    "shot_noise_reduction",
                    &est.indicator,
                    analytic,
                    "constant kernels: indicator estimator against the compensator formula",
                );
            }
            if m.kernels.iter().all(|k| k.is_nondecreasing()) {
                let de = simulation::mc_joint_survival(m, &dq, paths, &rng, &opts)?;
                checks.mc(
                    "shot_noise_diagonal_indicator",
                    &de.indicator,
                    campbell_diag,
                    "nondecreasing kernels: default indicator at equal horizons",
                );
            }
            let eta =
                simulation::mc_martingale_check(m, SubsetMask::full(n), t_max, paths, &rng, &opts)?;
            checks.mc(
                "martingale_mean_one",
                &eta,
                1.0,
                "E[exp(-K^J_t + Lambda^J_t)] for the full set",
            );
        }
        ModelSpec::CompensatorTable(_) => {}
    }

    let passed = checks
        .items
        .iter()
        .all(|c| c["passed"] == Value::Bool(true));
    let failures: Vec<Value> = checks
        .items
        .iter()
        .filter(|c| c["passed"] == Value::Bool(false))
        .map(|c| c["name"].clone())
        .collect();
    Ok(json!({
        "command": echo,
        "model_hash": spec.hash,
        "model_type": model.model_type(),
        "level": level,
        "seed": seed,
        "paths": paths,
        "horizons": t,
        "tolerances": {
            "sigma": SIGMA_TOLERANCE,
            "analytic_relative": ANALYTIC_TOLERANCE,
            "quadrature_relative": QUADRATURE_AGREEMENT,
            "mobius": MOBIUS_TOLERANCE,
        },
        "checks": checks.items,
        "failures": failures,
        "passed": passed,
        "wall_clock_seconds": started.elapsed().as_secs_f64(),
    }))
}
