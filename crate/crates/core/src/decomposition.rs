//! Default as the first of two independent mechanisms: a deterministic continuous
//! cumulative hazard `X^j` with its own threshold, and the jump-driven factor model.
//! `tau_j = min(taubar_j, tautilde_j)`, so joint survival factorizes.

use crate::compensator::SubsetMask;
use crate::error::{Error, Result};
use crate::process_models::FactorModel;
use crate::survival::{joint_log_survival, Compensators, SurvivalQuery};

/// Deterministic continuous nondecreasing `X(t)` with `X(0) = 0`.
#[derive(Debug, Clone, PartialEq)]
pub enum ContinuousHazard {
    Zero,
    /// `rate * t`
    Linear {
        rate: f64,
    },
    /// `scale * t^exponent`
    Power {
        scale: f64,
        exponent: f64,
    },
    /// Linear interpolation through `(t, X(t))`, starting at `(0, 0)`; no extrapolation.
    PiecewiseLinear {
        knots: Vec<(f64, f64)>,
    },
}

impl ContinuousHazard {
    pub fn validate(&self) -> Result<()> {
        match self {
            ContinuousHazard::Zero => Ok(()),
            ContinuousHazard::Linear { rate } => {
                if rate.is_finite() && *rate >= 0.0 {
                    Ok(())
                } else {
                    Err(Error::Argument(format!(
                        "continuous hazard rate must be >= 0, got {rate}"
                    )))
                }
            }
            ContinuousHazard::Power { scale, exponent } => {
                if scale.is_finite() && *scale >= 0.0 && exponent.is_finite() && *exponent > 0.0 {
                    Ok(())
                } else {
                    Err(Error::Argument(format!(
                        "power hazard needs scale >= 0 and exponent > 0, got ({scale}, {exponent})"
                    )))
                }
            }
            ContinuousHazard::PiecewiseLinear { knots } => {
                if knots.len() < 2 || knots[0] != (0.0, 0.0) {
                    return Err(Error::Argument(
                        "piecewise-linear hazard needs at least two knots starting at (0, 0)"
                            .into(),
                    ));
                }
                for w in knots.windows(2) {
                    let ((t0, x0), (t1, x1)) = (w[0], w[1]);
                    if !(t1.is_finite() && t1 > t0) {
                        return Err(Error::Argument(format!(
                            "hazard knot times must increase: {t0} -> {t1}"
                        )));
                    }
                    if !(x1.is_finite() && x1 >= x0) {
                        return Err(Error::Argument(format!(
                            "continuous hazard must be nondecreasing: X({t0}) = {x0} > X({t1}) = {x1}"
                        )));
                    }
                }
                Ok(())
            }
        }
    }

    pub fn domain_end(&self) -> f64 {
        match self {
            ContinuousHazard::PiecewiseLinear { knots } => knots.last().map_or(0.0, |k| k.0),
            _ => f64::INFINITY,
        }
    }

    pub fn eval(&self, t: f64) -> Result<f64> {
        if !(t >= 0.0) {
            return Err(Error::Argument(format!("time must be >= 0, got {t}")));
        }
        match self {
            ContinuousHazard::Zero => Ok(0.0),
            ContinuousHazard::Linear { rate } => Ok(rate * t),
            ContinuousHazard::Power { scale, exponent } => Ok(scale * t.powf(*exponent)),
            ContinuousHazard::PiecewiseLinear { knots } => {
                let end = self.domain_end();
                if t > end {
                    return Err(Error::Domain(format!(
                        "t = {t} beyond last hazard knot {end}"
                    )));
                }
                let k = knots
                    .partition_point(|p| p.0 <= t)
                    .min(knots.len() - 1)
                    .max(1);
                let ((t0, x0), (t1, x1)) = (knots[k - 1], knots[k]);
                Ok(x0 + (t - t0) / (t1 - t0) * (x1 - x0))
            }
        }
    }

    /// `inf { t : X(t) >= level }`, `+inf` if never reached within the domain.
    pub fn first_passage(&self, level: f64) -> f64 {
        if level <= 0.0 {
            return 0.0;
        }
        match self {
            ContinuousHazard::Zero => f64::INFINITY,
            ContinuousHazard::Linear { rate } => {
                if *rate > 0.0 {
                    level / rate
                } else {
                    f64::INFINITY
                }
            }
            ContinuousHazard::Power { scale, exponent } => {
                if *scale > 0.0 {
                    (level / scale).powf(1.0 / exponent)
                } else {
                    f64::INFINITY
                }
            }
            ContinuousHazard::PiecewiseLinear { knots } => {
                for w in knots.windows(2) {
                    let ((t0, x0), (t1, x1)) = (w[0], w[1]);
                    if x1 >= level {
                        return t0 + (level - x0) / (x1 - x0) * (t1 - t0);
                    }
                }
                f64::INFINITY
            }
        }
    }
}

/// Jump-driven factor model combined with per-component continuous hazards.
#[derive(Debug, Clone, PartialEq)]
pub struct MinDecomposition {
    pub jump: FactorModel,
    pub continuous: Vec<ContinuousHazard>,
}

impl MinDecomposition {
    pub fn new(jump: FactorModel, continuous: Vec<ContinuousHazard>) -> Result<Self> {
        if continuous.len() != jump.n() {
            return Err(Error::Argument(format!(
                "{} continuous hazards for {} components",
                continuous.len(),
                jump.n()
            )));
        }
        continuous.iter().try_for_each(ContinuousHazard::validate)?;
        Ok(Self { jump, continuous })
    }

    pub fn n(&self) -> usize {
        self.jump.n()
    }

    /// `sum_j X^j(t_j)`.
    pub fn continuous_exponent(&self, t: &[f64]) -> Result<f64> {
        let terms = self
            .continuous
            .iter()
            .zip(t)
            .map(|(x, &tj)| x.eval(tj))
            .collect::<Result<Vec<_>>>()?;
        Ok(crate::numerics::pairwise_sum(&terms))
    }
}

/// The aggregate compensator `sum_{j in J} X^j(t) + Lambda~^J_t` is deterministic too.
impl Compensators for MinDecomposition {
    fn n(&self) -> usize {
        MinDecomposition::n(self)
    }

    fn compensator(&self, j: SubsetMask, t: f64) -> Result<f64> {
        if j.is_empty() {
            return Ok(0.0);
        }
        let mut total = Compensators::compensator(&self.jump, j, t)?;
        for i in j.members() {
            total += self.continuous[i].eval(t)?;
        }
        Ok(total)
    }
}

pub fn min_decomposition_log_survival(
    model: &MinDecomposition,
    query: &SurvivalQuery,
) -> Result<f64> {
    let jump = joint_log_survival(&model.jump, query)?;
    Ok(-model.continuous_exponent(&query.horizons)? + jump)
}

/// `exp(-sum_j X^j(t_j)) * P(tautilde > t)`.
pub fn min_decomposition_survival(model: &MinDecomposition, query: &SurvivalQuery) -> Result<f64> {
    min_decomposition_log_survival(model, query).map(crate::survival::exp_survival)
}
