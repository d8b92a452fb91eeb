//! Random model generators shared by the integration tests.
#![allow(dead_code)]

use corrcox::process_models::JumpMarks;
use corrcox::{DeformationKind, Factor, FactorModel, JumpLaw, TimeDeformation};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn exp1() -> JumpLaw {
    JumpLaw::Exponential { rate: 1.0 }
}

pub fn shared_driver() -> FactorModel {
    FactorModel::new(
        vec![Factor::shared_clock(2.0, vec![exp1(), exp1()])],
        vec![vec![1.0], vec![1.0]],
        None,
    )
    .unwrap()
}

pub fn random_law(r: &mut ChaCha8Rng) -> JumpLaw {
    match r.random_range(0..4) {
        0 => JumpLaw::Exponential {
            rate: r.random_range(0.3..3.0),
        },
        1 => JumpLaw::Gamma {
            shape: r.random_range(0.3..3.0),
            rate: r.random_range(0.5..4.0),
        },
        2 => JumpLaw::Constant {
            size: r.random_range(0.05..2.0),
        },
        _ => {
            let k = r.random_range(1..4);
            let sizes: Vec<f64> = (0..k).map(|_| r.random_range(0.05..2.5)).collect();
            let raw: Vec<f64> = (0..k).map(|_| r.random_range(0.1..1.0)).collect();
            let total: f64 = raw.iter().sum();
            let mut atoms: Vec<(f64, f64)> = sizes
                .into_iter()
                .zip(raw.iter().map(|w| w / total))
                .collect();
            // make the weights sum to one exactly
            let rest: f64 = atoms[1..].iter().map(|a| a.1).sum();
            atoms[0].1 = 1.0 - rest;
            JumpLaw::Empirical { atoms }
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct Shape {
    pub allow_gamma: bool,
    pub allow_shared_clock: bool,
    pub allow_deformation: bool,
}

pub const ANY: Shape = Shape {
    allow_gamma: true,
    allow_shared_clock: true,
    allow_deformation: true,
};

pub const LINEAR_JUMPS: Shape = Shape {
    allow_gamma: false,
    allow_shared_clock: true,
    allow_deformation: false,
};

/// A random factor model with `n` components and 1..=4 factors.
pub fn random_factor_model(r: &mut ChaCha8Rng, n: usize, shape: Shape) -> FactorModel {
    let m = r.random_range(1..=4usize);
    let factors: Vec<Factor> = (0..m)
        .map(|_| {
            let kind = r.random_range(0..3);
            if kind == 0 && shape.allow_gamma {
                Factor::gamma(r.random_range(0.3..2.0), r.random_range(0.5..3.0))
            } else if kind == 1 && shape.allow_shared_clock {
                Factor::shared_clock(
                    r.random_range(0.2..2.0),
                    (0..n).map(|_| random_law(r)).collect(),
                )
            } else {
                Factor::compound_poisson(r.random_range(0.2..2.0), random_law(r))
            }
        })
        .collect();
    let mut loadings: Vec<Vec<f64>> = (0..n)
        .map(|_| {
            (0..m)
                .map(|_| {
                    if r.random_bool(0.35) {
                        0.0
                    } else {
                        r.random_range(0.1..1.5)
                    }
                })
                .collect()
        })
        .collect();
    for row in &mut loadings {
        if row.iter().all(|&a| a == 0.0) {
            let k = r.random_range(0..m);
            row[k] = r.random_range(0.1..1.5);
        }
    }
    let deformation = if shape.allow_deformation && r.random_bool(0.4) {
        let kind = if r.random_bool(0.5) {
            DeformationKind::Power {
                exponent: r.random_range(0.5..2.0),
                scale: r.random_range(0.5..1.5),
            }
        } else {
            let mut t = 0.0;
            let mut d = 0.0;
            let mut knots = vec![(0.0, 0.0)];
            for _ in 0..4 {
                t += r.random_range(0.5..1.5);
                d += r.random_range(0.2..2.0);
                knots.push((t, d));
            }
            knots.push((t + 100.0, d + 100.0));
            DeformationKind::PiecewiseLinear { knots }
        };
        Some(TimeDeformation {
            kind,
            covariate_scales: (0..n).map(|_| r.random_range(0.5..1.5)).collect(),
        })
    } else {
        None
    };
    FactorModel::new(factors, loadings, deformation).unwrap()
}

/// Random horizons in `[0, max]`, sometimes with ties.
pub fn random_horizons(r: &mut ChaCha8Rng, n: usize, max: f64) -> Vec<f64> {
    let mut t: Vec<f64> = (0..n).map(|_| r.random_range(0.0..max)).collect();
    if n > 1 && r.random_bool(0.4) {
        let (a, b) = (r.random_range(0..n), r.random_range(0..n));
        t[a] = t[b];
    }
    if r.random_bool(0.1) {
        let k = r.random_range(0..n);
        t[k] = 0.0;
    }
    t
}

/// Whether the two-component model has a compound-Poisson factor hitting both components.
pub fn has_common_clock(m: &FactorModel) -> bool {
    (0..m.m()).any(|k| {
        m.loading(0, k) > 0.0
            && m.loading(1, k) > 0.0
            && matches!(
                m.factors()[k],
                Factor::CompoundPoisson {
                    marks: JumpMarks::Common(_) | JumpMarks::PerComponent(_),
                    ..
                }
            )
    })
}
