//! Shot-noise cumulative hazards driven by a (possibly nonhomogeneous) Poisson stream of
//! marked shocks: `K^j_t = sum_{theta_i <= t} gamma_i G^j(t - theta_i)`.
//!
//! The mark integral is done in closed form through the mark Laplace transform, leaving a
//! one-dimensional adaptive quadrature over the arrival time:
//! `Lambda^J_t = int_0^t lambda(s) (1 - E[exp(-gamma sum_{j in J} G^j(t - s))]) ds`.

use crate::compensator::SubsetMask;
use crate::error::{Error, Result};
use crate::numerics::integrate;
use crate::process_models::JumpLaw;
use crate::survival::{bivariate_log_survival, exp_survival, Compensators};

pub const MIN_TOL: f64 = 1e-13;
pub const MAX_TOL: f64 = 1e-6;

/// Response kernel `G(u)`, zero for `u < 0`.
#[derive(Debug, Clone, PartialEq)]
pub enum Kernel {
    Constant {
        level: f64,
    },
    /// `scale * exp(-decay * u)`
    ExponentialDecay {
        scale: f64,
        decay: f64,
    },
    /// `min(slope * u + intercept, cap)`
    LinearRamp {
        slope: f64,
        cap: f64,
        intercept: f64,
    },
}

impl Kernel {
    pub fn validate(&self) -> Result<()> {
        let ok = match *self {
            Kernel::Constant { level } => level.is_finite() && level >= 0.0,
            Kernel::ExponentialDecay { scale, decay } => {
                scale.is_finite() && scale > 0.0 && decay.is_finite() && decay > 0.0
            }
            Kernel::LinearRamp {
                slope,
                cap,
                intercept,
            } => {
                slope.is_finite()
                    && slope > 0.0
                    && cap.is_finite()
                    && cap > 0.0
                    && intercept.is_finite()
                    && intercept >= 0.0
            }
        };
        if ok {
            Ok(())
        } else {
            Err(Error::Model(format!("invalid kernel parameters {self:?}")))
        }
    }

    #[inline]
    pub fn eval(&self, u: f64) -> f64 {
        if u < 0.0 {
            return 0.0;
        }
        match *self {
            Kernel::Constant { level } => level,
            Kernel::ExponentialDecay { scale, decay } => scale * (-decay * u).exp(),
            Kernel::LinearRamp {
                slope,
                cap,
                intercept,
            } => (slope * u + intercept).min(cap),
        }
    }

    /// Whether `G` is nondecreasing on `[0, inf)`, which makes `K` nondecreasing between
    /// shocks.
    pub fn is_nondecreasing(&self) -> bool {
        !matches!(self, Kernel::ExponentialDecay { .. })
    }

    /// Where the kernel has a kink on `(0, inf)`, if anywhere.
    pub fn kink(&self) -> Option<f64> {
        match *self {
            Kernel::LinearRamp {
                slope,
                cap,
                intercept,
            } if cap > intercept => Some((cap - intercept) / slope),
            _ => None,
        }
    }
}

/// Shock arrival intensity `lambda^N(t)`.
#[derive(Debug, Clone, PartialEq)]
pub enum Intensity {
    Constant {
        rate: f64,
    },
    /// `rates[0]` on `[0, breakpoints[0])`, ..., `rates[k]` on `[breakpoints[k-1], inf)`.
    PiecewiseConstant {
        breakpoints: Vec<f64>,
        rates: Vec<f64>,
    },
}

impl Intensity {
    pub fn validate(&self) -> Result<()> {
        match self {
            Intensity::Constant { rate } => {
                if rate.is_finite() && *rate >= 0.0 {
                    Ok(())
                } else {
                    Err(Error::Model(format!(
                        "intensity must be finite and >= 0, got {rate}"
                    )))
                }
            }
            Intensity::PiecewiseConstant { breakpoints, rates } => {
                if rates.len() != breakpoints.len() + 1 {
                    return Err(Error::Model(format!(
                        "{} breakpoints need {} rates, got {}",
                        breakpoints.len(),
                        breakpoints.len() + 1,
                        rates.len()
                    )));
                }
                if breakpoints.iter().any(|b| !(b.is_finite() && *b > 0.0))
                    || breakpoints.windows(2).any(|w| w[0] >= w[1])
                {
                    return Err(Error::Model(
                        "intensity breakpoints must be positive and increasing".into(),
                    ));
                }
                if let Some(bad) = rates.iter().find(|r| !(r.is_finite() && **r >= 0.0)) {
                    return Err(Error::Model(format!(
                        "intensity rates must be >= 0, got {bad}"
                    )));
                }
                Ok(())
            }
        }
    }

    #[inline]
    pub fn rate_at(&self, s: f64) -> f64 {
        match self {
            Intensity::Constant { rate } => *rate,
            Intensity::PiecewiseConstant { breakpoints, rates } => {
                rates[breakpoints.partition_point(|&b| b <= s)]
            }
        }
    }

    pub fn breakpoints(&self) -> &[f64] {
        match self {
            Intensity::Constant { .. } => &[],
            Intensity::PiecewiseConstant { breakpoints, .. } => breakpoints,
        }
    }

    /// `(start, end, majorant)` pieces covering `[0, horizon]`.
    pub fn pieces(&self, horizon: f64) -> Vec<(f64, f64, f64)> {
        let mut edges = vec![0.0];
        edges.extend(self.breakpoints().iter().copied().filter(|&b| b < horizon));
        edges.push(horizon);
        edges
            .windows(2)
            .map(|w| (w[0], w[1], self.rate_at(w[0])))
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ShotNoiseModel {
    pub intensity: Intensity,
    pub marks: JumpLaw,
    pub kernels: Vec<Kernel>,
}

impl ShotNoiseModel {
    pub fn new(intensity: Intensity, marks: JumpLaw, kernels: Vec<Kernel>) -> Result<Self> {
        if kernels.is_empty() {
            return Err(Error::Model(
                "shot-noise model needs at least one kernel".into(),
            ));
        }
        if kernels.len() > crate::MAX_COMPONENTS {
            return Err(Error::Capacity(format!(
                "{} components exceeds the maximum",
                kernels.len()
            )));
        }
        intensity.validate()?;
        marks.validate()?;
        kernels.iter().try_for_each(Kernel::validate)?;
        Ok(Self {
            intensity,
            marks,
            kernels,
        })
    }

    pub fn n(&self) -> usize {
        self.kernels.len()
    }

    /// Integrate `lambda(s) (1 - LT(sum_j G^j(t_j - s)))` over `[0, max_j t_j]` where
    /// `horizons[j]` is `None` for components outside the aggregate.
    fn exponent_integral(&self, horizons: &[Option<f64>], tol: f64) -> Result<f64> {
        if !(MIN_TOL..=MAX_TOL).contains(&tol) {
            return Err(Error::Argument(format!(
                "tolerance {tol:e} outside [{MIN_TOL:e}, {MAX_TOL:e}]"
            )));
        }
        let end = horizons.iter().flatten().copied().fold(0.0, f64::max);
        if end == 0.0 {
            return Ok(0.0);
        }
        let mut breaks: Vec<f64> = self.intensity.breakpoints().to_vec();
        for (kernel, t) in self.kernels.iter().zip(horizons) {
            if let Some(t) = *t {
                breaks.push(t);
                if let Some(k) = kernel.kink() {
                    breaks.push(t - k);
                }
            }
        }
        let integrand = |s: f64| {
            let load: f64 = self
                .kernels
                .iter()
                .zip(horizons)
                .filter_map(|(g, t)| t.map(|t| g.eval(t - s)))
                .sum();
            self.intensity.rate_at(s) * self.marks.one_minus_laplace(load)
        };
        Ok(integrate(integrand, 0.0, end, &breaks, tol)?.value)
    }

    /// `Lambda^J_t` to relative tolerance `tol`.
    pub fn subset_compensator(&self, j: SubsetMask, t: f64, tol: f64) -> Result<f64> {
        if j.is_empty() {
            return Err(Error::Argument(
                "subset compensator needs a nonempty subset".into(),
            ));
        }
        if j.bits() >> self.n() != 0 {
            return Err(Error::Argument(format!(
                "subset {j} outside {{1..{}}}",
                self.n()
            )));
        }
        if !(t.is_finite() && t >= 0.0) {
            return Err(Error::Argument(format!(
                "time must be finite and >= 0, got {t}"
            )));
        }
        let horizons: Vec<Option<f64>> =
            (0..self.n()).map(|i| j.contains(i).then_some(t)).collect();
        self.exponent_integral(&horizons, tol)
    }

    /// `-ln E[exp(-sum_j K^j_{t_j})]` by Campbell's formula. For nondecreasing kernels this
    /// is the exact joint log-survival of the simulated model at any horizons.
    pub fn campbell_exponent(&self, horizons: &[f64], tol: f64) -> Result<f64> {
        if horizons.len() != self.n() {
            return Err(Error::Argument(format!(
                "{} horizons for {} components",
                horizons.len(),
                self.n()
            )));
        }
        if let Some(bad) = horizons.iter().find(|t| !(t.is_finite() && **t >= 0.0)) {
            return Err(Error::Argument(format!(
                "horizons must be finite and >= 0, got {bad}"
            )));
        }
        let h: Vec<Option<f64>> = horizons.iter().map(|&t| Some(t)).collect();
        self.exponent_integral(&h, tol)
    }

    /// View exposing the compensators at a fixed quadrature tolerance.
    pub fn compensators(&self, tol: f64) -> ShotNoiseCompensators<'_> {
        ShotNoiseCompensators { model: self, tol }
    }
}

/// `sn_subset_compensator` as a free function.
pub fn sn_subset_compensator(
    model: &ShotNoiseModel,
    j: SubsetMask,
    t: f64,
    tol: f64,
) -> Result<f64> {
    model.subset_compensator(j, t, tol)
}

#[derive(Debug, Clone, Copy)]
pub struct ShotNoiseCompensators<'a> {
    pub model: &'a ShotNoiseModel,
    pub tol: f64,
}

impl Compensators for ShotNoiseCompensators<'_> {
    fn n(&self) -> usize {
        self.model.n()
    }

    fn compensator(&self, j: SubsetMask, t: f64) -> Result<f64> {
        if j.is_empty() {
            return Ok(0.0);
        }
        self.model.subset_compensator(j, t, self.tol)
    }
}

/// Bivariate joint survival from the piecewise compensator formula.
pub fn sn_bivariate_log_survival(
    model: &ShotNoiseModel,
    t1: f64,
    t2: f64,
    tol: f64,
) -> Result<f64> {
    bivariate_log_survival(&model.compensators(tol), t1, t2)
}

pub fn sn_bivariate_survival(model: &ShotNoiseModel, t1: f64, t2: f64, tol: f64) -> Result<f64> {
    sn_bivariate_log_survival(model, t1, t2, tol).map(exp_survival)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn exp1() -> JumpLaw {
        JumpLaw::Exponential { rate: 1.0 }
    }

    fn decay(g0: f64) -> Kernel {
        Kernel::ExponentialDecay {
            scale: g0,
            decay: 1.0,
        }
    }

    #[test]
    fn kernels() {
        let r = Kernel::LinearRamp {
            slope: 2.0,
            cap: 3.0,
            intercept: 1.0,
        };
        assert_eq!(r.eval(-0.1), 0.0);
        assert_eq!(r.eval(0.0), 1.0);
        assert_eq!(r.eval(0.5), 2.0);
        assert_eq!(r.eval(5.0), 3.0);
        assert_eq!(r.kink(), Some(1.0));
        assert!(r.is_nondecreasing());
        assert!(!decay(1.0).is_nondecreasing());
        assert!(Kernel::Constant { level: -1.0 }.validate().is_err());
    }

    #[test]
    fn intensity_pieces() {
        let i = Intensity::PiecewiseConstant {
            breakpoints: vec![1.0, 2.0],
            rates: vec![0.5, 2.0, 1.0],
        };
        i.validate().unwrap();
        assert_eq!(i.rate_at(0.0), 0.5);
        assert_eq!(i.rate_at(1.0), 2.0);
        assert_eq!(i.rate_at(7.0), 1.0);
        assert_eq!(i.pieces(1.5), vec![(0.0, 1.0, 0.5), (1.0, 1.5, 2.0)]);
        let bad = Intensity::PiecewiseConstant {
            breakpoints: vec![1.0],
            rates: vec![1.0],
        };
        assert!(bad.validate().is_err());
    }

    #[test]
    fn constant_kernels_reduce_to_compound_poisson() {
        let m = ShotNoiseModel::new(
            Intensity::Constant { rate: 1.7 },
            exp1(),
            vec![
                Kernel::Constant { level: 0.4 },
                Kernel::Constant { level: 1.1 },
            ],
        )
        .unwrap();
        let t = 2.3;
        let lam = m.subset_compensator(SubsetMask::full(2), t, 1e-12).unwrap();
        let want = 1.7 * t * (1.0 - 1.0 / (1.0 + 1.5));
        assert!((lam - want).abs() <= 1e-12 * want.max(1.0));
    }

    #[test]
    fn exponential_decay_closed_form() {
        let m = ShotNoiseModel::new(Intensity::Constant { rate: 1.0 }, exp1(), vec![decay(1.0)])
            .unwrap();
        let lam = m
            .subset_compensator(SubsetMask::singleton(0), 1.0, 1e-12)
            .unwrap();
        let want = (2.0 / (1.0 + (-1.0f64).exp())).ln();
        assert!((lam - want).abs() <= 1e-12);
        assert!((want - 0.379885).abs() < 1e-6);
        assert_eq!(
            m.subset_compensator(SubsetMask::singleton(0), 0.0, 1e-12)
                .unwrap(),
            0.0
        );
    }

    #[test]
    fn exponential_decay_bivariate_diagonal() {
        let m = ShotNoiseModel::new(
            Intensity::Constant { rate: 1.0 },
            exp1(),
            vec![decay(1.0), decay(1.0)],
        )
        .unwrap();
        let lam12 = m
            .subset_compensator(SubsetMask::full(2), 1.0, 1e-12)
            .unwrap();
        let want = (3.0 / (1.0 + 2.0 * (-1.0f64).exp())).ln();
        assert!((lam12 - want).abs() < 1e-12);
        assert!((want - 0.547168).abs() < 1e-6);
        let s = sn_bivariate_survival(&m, 1.0, 1.0, 1e-12).unwrap();
        assert!((s - (-want).exp()).abs() < 1e-12);
        assert!((s - 0.578586).abs() < 1e-6);
    }

    #[test]
    fn tolerance_range_enforced() {
        let m = ShotNoiseModel::new(Intensity::Constant { rate: 1.0 }, exp1(), vec![decay(1.0)])
            .unwrap();
        assert!(m
            .subset_compensator(SubsetMask::singleton(0), 1.0, 1e-3)
            .is_err());
        assert!(m
            .subset_compensator(SubsetMask::singleton(0), 1.0, 1e-15)
            .is_err());
        assert!(m.subset_compensator(SubsetMask::EMPTY, 1.0, 1e-10).is_err());
    }

    #[test]
    fn ramp_kernel_with_breakpoints() {
        let m = ShotNoiseModel::new(
            Intensity::PiecewiseConstant {
                breakpoints: vec![0.8],
                rates: vec![1.0, 3.0],
            },
            JumpLaw::Constant { size: 1.0 },
            vec![Kernel::LinearRamp {
                slope: 1.0,
                cap: 1.0,
                intercept: 0.0,
            }],
        )
        .unwrap();
        // t = 2: G(2-s) = min(2-s, 1) -> 1 on s < 1, 2-s on s >= 1
        // integrand rate(s) * (1 - e^{-G})
        let t = 2.0;
        let want = 1.0 * 0.8 * (1.0 - (-1.0f64).exp())
            + 3.0 * 0.2 * (1.0 - (-1.0f64).exp())
            + 3.0 * (1.0 - (1.0 - (-1.0f64).exp()));
        // last piece: int_1^2 (1 - e^{-(2-s)}) ds = 1 - (1 - e^{-1})
        let lam = m
            .subset_compensator(SubsetMask::singleton(0), t, 1e-12)
            .unwrap();
        assert!((lam - want).abs() < 1e-11, "{lam} vs {want}");
    }

    #[test]
    fn campbell_matches_compensator_on_diagonal() {
        let m = ShotNoiseModel::new(
            Intensity::Constant { rate: 0.8 },
            exp1(),
            vec![
                decay(1.0),
                Kernel::LinearRamp {
                    slope: 0.5,
                    cap: 2.0,
                    intercept: 0.1,
                },
            ],
        )
        .unwrap();
        let a = m.campbell_exponent(&[1.5, 1.5], 1e-12).unwrap();
        let b = m
            .subset_compensator(SubsetMask::full(2), 1.5, 1e-12)
            .unwrap();
        assert!((a - b).abs() < 1e-12);
    }
}
