//! Acceptance suite: one PASS/FAIL line per criterion, nonzero exit on any failure.
//!
//! Run with `cargo test -p corrcox --test acceptance`. Every Monte Carlo comparison uses a
//! fixed seed, so the outcome is reproducible.

mod common;

use std::process::{Command, ExitCode};
use std::time::{Duration, Instant};

use corrcox::compensator::{build_table, mo_rates, mobius_inverse_check};
use corrcox::decomposition::min_decomposition_survival;
use corrcox::shot_noise::{sn_bivariate_survival, sn_subset_compensator};
use corrcox::simulation::{
    mc_joint_survival_multi, mc_martingale_checks, mc_min_decomposition, mc_simultaneous_prob,
    suggest_horizon, McEstimate, SimOptions,
};
use corrcox::survival::{
    bivariate_survival, joint_survival, joint_survival_mobius, simultaneous_default_prob_mo,
};
use corrcox::{
    ContinuousHazard, Factor, FactorModel, Intensity, JumpLaw, Kernel, MinDecomposition, RngConfig,
    ShotNoiseModel, SubsetMask, SurvivalQuery,
};
use rand::Rng;

const SIGMAS: f64 = 4.0;
const PATHS: u64 = 1_000_000;
const SN_TOL: f64 = 1e-10;

/// Collects failure messages for one criterion.
#[derive(Default)]
struct Check {
    failures: Vec<String>,
    comparisons: usize,
}

impl Check {
    fn expect(&mut self, ok: bool, msg: impl FnOnce() -> String) {
        self.comparisons += 1;
        if !ok {
            self.failures.push(msg());
        }
    }

    fn close_abs(&mut self, what: &str, got: f64, want: f64, tol: f64) {
        self.expect((got - want).abs() <= tol, || {
            format!("{what}: got {got:.17e}, want {want:.17e}, |diff| > {tol:e}")
        });
    }

    fn close_rel(&mut self, what: &str, got: f64, want: f64, tol: f64) {
        let scale = want.abs().max(f64::MIN_POSITIVE);
        self.expect((got - want).abs() <= tol * scale, || {
            format!("{what}: got {got:.17e}, want {want:.17e}, rel diff > {tol:e}")
        });
    }

    /// Monte Carlo estimate within `SIGMAS` standard errors; a degenerate estimator must
    /// hit the target to rounding.
    fn within_sigma(&mut self, what: &str, est: &McEstimate, want: f64) {
        let ok = if est.stderr > 0.0 {
            (est.value - want).abs() <= SIGMAS * est.stderr
        } else {
            (est.value - want).abs() <= 1e-12
        };
        self.expect(ok, || {
            format!(
                "{what}: estimate {:.6} +/- {:.2e} vs {want:.6} (z = {:.2})",
                est.value,
                est.stderr,
                est.z_score(want)
            )
        });
    }

    fn error(&mut self, what: &str, e: impl std::fmt::Display) {
        self.comparisons += 1;
        self.failures.push(format!("{what}: {e}"));
    }
}

fn opts() -> SimOptions {
    SimOptions::default()
}

fn q(t: Vec<f64>) -> SurvivalQuery {
    SurvivalQuery::new(t).unwrap()
}

fn golden(c: &mut Check) {
    let m = common::shared_driver();
    c.close_abs(
        "joint survival (1,2)",
        joint_survival(&m, &q(vec![1.0, 2.0])).unwrap(),
        (-2.5f64).exp(),
        1e-12,
    );
    let rates = mo_rates(&m).unwrap();
    for j in [
        SubsetMask::singleton(0),
        SubsetMask::singleton(1),
        SubsetMask::full(2),
    ] {
        c.close_abs(&format!("mo rate {j}"), rates.rate(j), 0.5, 1e-12);
    }
    c.close_abs(
        "simultaneous default",
        simultaneous_default_prob_mo(&m).unwrap(),
        1.0 / 3.0,
        1e-12,
    );
}

fn mobius_consistency(c: &mut Check) {
    let mut r = common::rng(2);
    for k in 0..1000 {
        let n = r.random_range(2..=8);
        let m = common::random_factor_model(&mut r, n, common::ANY);
        let t = common::random_horizons(&mut r, n, 4.0);
        let query = q(t.clone());
        match (
            joint_survival(&m, &query),
            joint_survival_mobius(&m, &query),
        ) {
            (Ok(a), Ok(b)) => c.close_rel(&format!("model {k} at {t:?}"), b, a, 1e-12),
            (a, b) => c.error(&format!("model {k}"), format!("{a:?} / {b:?}")),
        }
        match build_table(&m) {
            Ok(table) => {
                let chk = mobius_inverse_check(&table);
                c.expect(chk.max_residual <= 1e-10, || {
                    format!(
                        "model {k}: inverse residual {:e} at {}",
                        chk.max_residual, chk.worst
                    )
                });
            }
            Err(e) => c.error(&format!("model {k} table"), e),
        }
    }
}

fn mc_vs_analytic(c: &mut Check) {
    let mut r = common::rng(3);
    for k in 0..20u64 {
        let n = r.random_range(2..=4);
        let m = common::random_factor_model(&mut r, n, common::ANY);
        let queries: Vec<SurvivalQuery> = (0..5)
            .map(|_| q(common::random_horizons(&mut r, n, 2.0)))
            .collect();
        let est =
            match mc_joint_survival_multi(&m, &queries, PATHS, &RngConfig::new(100 + k), &opts()) {
                Ok(e) => e,
                Err(e) => {
                    c.error(&format!("model {k}"), e);
                    continue;
                }
            };
        for (g, (query, e)) in queries.iter().zip(&est).enumerate() {
            let want = joint_survival(&m, query).unwrap();
            let tag = format!("model {k} grid {g} {:?}", query.horizons);
            c.within_sigma(&format!("{tag} rao-blackwell"), &e.rao_blackwell, want);
            c.within_sigma(&format!("{tag} indicator"), &e.indicator, want);
        }
    }

    let exp = |rate| JumpLaw::Exponential { rate };
    let bivariate = [
        common::shared_driver(),
        FactorModel::new(
            vec![
                Factor::shared_clock(1.5, vec![exp(2.0), JumpLaw::Constant { size: 0.7 }]),
                Factor::compound_poisson(0.4, exp(1.0)),
            ],
            vec![vec![1.0, 0.5], vec![0.8, 0.0]],
            None,
        )
        .unwrap(),
        FactorModel::new(
            vec![Factor::compound_poisson(
                3.0,
                JumpLaw::Gamma {
                    shape: 2.0,
                    rate: 3.0,
                },
            )],
            vec![vec![1.0], vec![0.4]],
            None,
        )
        .unwrap(),
    ];
    for (k, m) in bivariate.iter().enumerate() {
        let want = simultaneous_default_prob_mo(m).unwrap();
        let h = suggest_horizon(m, 1.0).unwrap();
        match mc_simultaneous_prob(m, PATHS, h, &RngConfig::new(200 + k as u64), &opts()) {
            Ok(e) => {
                c.within_sigma(&format!("simultaneous {k} indicator"), &e.indicator, want);
                c.within_sigma(
                    &format!("simultaneous {k} rao-blackwell"),
                    &e.rao_blackwell,
                    want,
                );
            }
            Err(e) => c.error(&format!("simultaneous {k}"), e),
        }
    }
}

fn martingale(c: &mut Check) {
    let exp = |rate| JumpLaw::Exponential { rate };
    let models = [
        ("compound poisson", common::shared_driver()),
        (
            "factor",
            FactorModel::new(
                vec![
                    Factor::compound_poisson(1.0, exp(1.5)),
                    Factor::shared_clock(
                        0.7,
                        vec![JumpLaw::Constant { size: 0.5 }, exp(2.0), exp(1.0)],
                    ),
                    Factor::compound_poisson(
                        0.5,
                        JumpLaw::Gamma {
                            shape: 2.0,
                            rate: 2.0,
                        },
                    ),
                ],
                vec![
                    vec![1.0, 0.5, 0.0],
                    vec![0.3, 1.0, 0.7],
                    vec![0.0, 0.4, 1.2],
                ],
                None,
            )
            .unwrap(),
        ),
        (
            "gamma subordinator",
            FactorModel::new(
                vec![Factor::gamma(1.0, 2.0), Factor::gamma(0.5, 1.0)],
                vec![vec![1.0, 0.0], vec![0.6, 0.8]],
                None,
            )
            .unwrap(),
        ),
    ];
    for (k, (name, m)) in models.iter().enumerate() {
        let n = m.n();
        let mut cases = Vec::new();
        for t in [0.5, 1.0, 2.0] {
            for i in 0..n {
                cases.push((SubsetMask::singleton(i), t));
            }
            cases.push((SubsetMask::full(n), t));
        }
        match mc_martingale_checks(m, &cases, PATHS, &RngConfig::new(300 + k as u64), &opts()) {
            Ok(est) => {
                for ((j, t), e) in cases.iter().zip(&est) {
                    c.within_sigma(&format!("{name} J={j} t={t}"), e, 1.0);
                }
            }
            Err(e) => c.error(name, e),
        }
    }
}

/// Name, model, horizon pairs, and whether the indicator estimator is compared too.
type ShotNoiseCase<'a> = (&'a str, &'a ShotNoiseModel, Vec<(f64, f64)>, bool);

fn shot_noise(c: &mut Check) {
    let mut r = common::rng(5);
    for k in 0..50 {
        let n = r.random_range(1..=4);
        let lambda = r.random_range(0.1..3.0);
        let law = common::random_law(&mut r);
        let levels: Vec<f64> = (0..n).map(|_| r.random_range(0.05..2.0)).collect();
        let sn = ShotNoiseModel::new(
            Intensity::Constant { rate: lambda },
            law.clone(),
            levels
                .iter()
                .map(|&level| Kernel::Constant { level })
                .collect(),
        )
        .unwrap();
        let cp = FactorModel::new(
            vec![Factor::compound_poisson(lambda, law)],
            levels.iter().map(|&a| vec![a]).collect(),
            None,
        )
        .unwrap();
        let t = r.random_range(0.0..5.0);
        let j = SubsetMask::from_indices((0..n).filter(|_| r.random_bool(0.6)));
        let j = if j.is_empty() {
            SubsetMask::singleton(0)
        } else {
            j
        };
        let got = sn_subset_compensator(&sn, j, t, SN_TOL).unwrap();
        let want = corrcox::compensator::subset_compensator(&cp, j, t).unwrap();
        c.close_rel(
            &format!("constant-kernel draw {k} J={j} t={t}"),
            got,
            want,
            SN_TOL,
        );
    }

    for &(lambda, beta, g0, kappa) in &[
        (1.0, 1.0, 1.0, 0.5),
        (2.5, 0.5, 3.0, 2.0),
        (0.3, 4.0, 0.2, 0.1),
    ] {
        let sn = ShotNoiseModel::new(
            Intensity::Constant { rate: lambda },
            JumpLaw::Exponential { rate: beta },
            vec![Kernel::ExponentialDecay {
                scale: g0,
                decay: kappa,
            }],
        )
        .unwrap();
        for t in [0.1, 1.0, 3.0, 10.0] {
            let want = lambda / kappa * ((beta + g0) / (beta + g0 * (-kappa * t).exp())).ln();
            let got = sn_subset_compensator(&sn, SubsetMask::singleton(0), t, SN_TOL).unwrap();
            c.close_rel(
                &format!("exp-decay lambda={lambda} t={t}"),
                got,
                want,
                SN_TOL,
            );
        }
    }

    // Constant kernels: the formula is the exact law, off the diagonal as well.
    let constant = ShotNoiseModel::new(
        Intensity::Constant { rate: 1.5 },
        JumpLaw::Exponential { rate: 1.0 },
        vec![
            Kernel::Constant { level: 1.0 },
            Kernel::Constant { level: 0.5 },
        ],
    )
    .unwrap();
    // Nondecreasing ramps under an inhomogeneous intensity.
    let ramp = ShotNoiseModel::new(
        Intensity::PiecewiseConstant {
            breakpoints: vec![0.5, 1.2],
            rates: vec![0.5, 2.0, 1.0],
        },
        JumpLaw::Gamma {
            shape: 2.0,
            rate: 2.0,
        },
        vec![
            Kernel::LinearRamp {
                slope: 1.0,
                cap: 1.5,
                intercept: 0.2,
            },
            Kernel::LinearRamp {
                slope: 3.0,
                cap: 0.8,
                intercept: 0.0,
            },
        ],
    )
    .unwrap();
    // Decaying kernels: K is not monotone, so only the Laplace functional is compared.
    let decay = ShotNoiseModel::new(
        Intensity::Constant { rate: 2.0 },
        JumpLaw::Exponential { rate: 1.0 },
        vec![
            Kernel::ExponentialDecay {
                scale: 1.0,
                decay: 0.5,
            },
            Kernel::ExponentialDecay {
                scale: 2.0,
                decay: 1.5,
            },
        ],
    )
    .unwrap();
    let sets: [ShotNoiseCase; 3] = [
        (
            "constant",
            &constant,
            vec![(0.4, 1.1), (1.0, 1.0), (2.0, 0.7)],
            true,
        ),
        ("ramp", &ramp, vec![(0.8, 0.8), (1.5, 1.5)], true),
        ("decay", &decay, vec![(0.7, 0.7), (2.0, 2.0)], false),
    ];
    for (k, (name, model, grid, use_indicator)) in sets.into_iter().enumerate() {
        let queries: Vec<SurvivalQuery> = grid.iter().map(|&(a, b)| q(vec![a, b])).collect();
        let est = match mc_joint_survival_multi(
            model,
            &queries,
            PATHS,
            &RngConfig::new(500 + k as u64),
            &opts(),
        ) {
            Ok(e) => e,
            Err(e) => {
                c.error(name, e);
                continue;
            }
        };
        for (&(t1, t2), e) in grid.iter().zip(&est) {
            let want = sn_bivariate_survival(model, t1, t2, SN_TOL).unwrap();
            c.within_sigma(
                &format!("{name} ({t1},{t2}) rao-blackwell"),
                &e.rao_blackwell,
                want,
            );
            if use_indicator {
                c.within_sigma(&format!("{name} ({t1},{t2}) indicator"), &e.indicator, want);
            }
        }
    }
}

fn bivariate_agreement(c: &mut Check) {
    let mut r = common::rng(6);
    let grid: Vec<f64> = (0..20).map(|i| 0.25 * i as f64).collect();
    for k in 0..10 {
        let m = common::random_factor_model(&mut r, 2, common::ANY);
        for &t1 in &grid {
            for &t2 in &grid {
                let a = bivariate_survival(&m, t1, t2).unwrap();
                let b = joint_survival(&m, &q(vec![t1, t2])).unwrap();
                c.close_abs(&format!("model {k} ({t1},{t2})"), a, b, 1e-14);
            }
        }
    }
}

fn min_decomposition(c: &mut Check) {
    let exp = |rate| JumpLaw::Exponential { rate };
    let configs = [
        MinDecomposition::new(
            common::shared_driver(),
            vec![
                ContinuousHazard::Linear { rate: 0.1 },
                ContinuousHazard::Power {
                    scale: 0.05,
                    exponent: 2.0,
                },
            ],
        )
        .unwrap(),
        MinDecomposition::new(
            FactorModel::new(
                vec![
                    Factor::compound_poisson(0.8, exp(2.0)),
                    Factor::gamma(0.7, 1.5),
                ],
                vec![vec![1.0, 0.3], vec![0.0, 1.0], vec![0.6, 0.6]],
                None,
            )
            .unwrap(),
            vec![
                ContinuousHazard::Zero,
                ContinuousHazard::PiecewiseLinear {
                    knots: vec![(0.0, 0.0), (1.0, 0.2), (2.0, 0.9), (50.0, 10.0)],
                },
                ContinuousHazard::Linear { rate: 0.4 },
            ],
        )
        .unwrap(),
        MinDecomposition::new(
            FactorModel::new(
                vec![Factor::compound_poisson(
                    1.2,
                    JumpLaw::Constant { size: 0.3 },
                )],
                vec![vec![1.0], vec![2.0]],
                None,
            )
            .unwrap(),
            vec![
                ContinuousHazard::Power {
                    scale: 0.3,
                    exponent: 0.5,
                },
                ContinuousHazard::Linear { rate: 0.25 },
            ],
        )
        .unwrap(),
    ];
    let horizons = [vec![1.0, 2.0], vec![0.5, 1.5, 1.0], vec![1.3, 0.6]];
    for (k, (m, t)) in configs.iter().zip(horizons).enumerate() {
        let query = q(t.clone());
        let got = min_decomposition_survival(m, &query).unwrap();
        let jump = joint_survival(&m.jump, &query).unwrap();
        let cont = (-m.continuous_exponent(&t).unwrap()).exp();
        c.close_rel(
            &format!("config {k} factorization"),
            got,
            jump * cont,
            1e-14,
        );
        match mc_min_decomposition(m, &query, PATHS, &RngConfig::new(700 + k as u64), &opts()) {
            Ok(e) => {
                c.within_sigma(&format!("config {k} rao-blackwell"), &e.rao_blackwell, got);
                c.within_sigma(&format!("config {k} indicator"), &e.indicator, got);
            }
            Err(e) => c.error(&format!("config {k}"), e),
        }
    }
}

fn determinism(c: &mut Check) {
    let spec = concat!(
        env!("CARGO_MANIFEST_DIR"),
        "/../../models/shared_driver_cp.json"
    );
    let run = |threads: &str| {
        Command::new(env!("CARGO_BIN_EXE_corrcox"))
            .args([
                "simulate",
                spec,
                "--paths",
                "50000",
                "--seed",
                "7",
                "--horizons",
                "1,2",
            ])
            .env("CORRCOX_THREADS", threads)
            .output()
    };
    let outputs: Vec<_> = ["1", "1", "8"].iter().map(|t| run(t)).collect();
    for (i, o) in outputs.iter().enumerate() {
        match o {
            Ok(o) => c.expect(o.status.success(), || {
                format!(
                    "run {i} exited {:?}: {}",
                    o.status.code(),
                    String::from_utf8_lossy(&o.stderr)
                )
            }),
            Err(e) => c.error(&format!("run {i}"), e),
        }
    }
    if let [Ok(a), Ok(b), Ok(d)] = &outputs[..] {
        c.expect(!a.stdout.is_empty() && a.stdout == b.stdout, || {
            "identical seeds gave different output".into()
        });
        c.expect(a.stdout == d.stdout, || {
            "CORRCOX_THREADS=8 changed the output".into()
        });
    }
}

type Criterion = (&'static str, Duration, fn(&mut Check));

fn main() -> ExitCode {
    let criteria: [Criterion; 8] = [
        (
            "golden values for the shared-driver model",
            Duration::from_millis(1),
            golden,
        ),
        (
            "nested vs Möbius survival on 1000 random models",
            Duration::from_secs(10),
            mobius_consistency,
        ),
        (
            "Monte Carlo vs closed-form joint survival and simultaneous default",
            Duration::from_secs(300),
            mc_vs_analytic,
        ),
        ("martingale mean one", Duration::from_secs(120), martingale),
        (
            "shot-noise compensators and survival",
            Duration::from_secs(180),
            shot_noise,
        ),
        (
            "bivariate vs multivariate survival",
            Duration::from_secs(1),
            bivariate_agreement,
        ),
        (
            "min-decomposition factorization and Monte Carlo",
            Duration::from_secs(60),
            min_decomposition,
        ),
        (
            "simulate output determinism",
            Duration::from_secs(60),
            determinism,
        ),
    ];
    let mut failed = 0;
    for (i, (name, budget, f)) in criteria.iter().enumerate() {
        let mut check = Check::default();
        let start = Instant::now();
        f(&mut check);
        let elapsed = start.elapsed();
        let in_budget = elapsed <= *budget;
        let ok = check.failures.is_empty() && in_budget;
        println!(
            "criterion {} {} {name} ({} comparisons, {:.3?} of {:?})",
            i + 1,
            if ok { "PASS" } else { "FAIL" },
            check.comparisons,
            elapsed,
            budget
        );
        for msg in check.failures.iter().take(10) {
            println!("    {msg}");
        }
        if check.failures.len() > 10 {
            println!("    ... {} more", check.failures.len() - 10);
        }
        if !in_budget {
            println!("    runtime budget exceeded");
        }
        if !ok {
            failed += 1;
        }
    }
    println!(
        "{} of {} criteria passed",
        criteria.len() - failed,
        criteria.len()
    );
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
