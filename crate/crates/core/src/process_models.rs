//! Cumulative-hazard process families: jump laws, driftless subordinators, linear factor
//! models with optional shared-clock marks, and time deformation.

use rand::Rng;
use rand_distr::{Distribution, Exp, Gamma};

use crate::error::{Error, Result};
use crate::numerics::SubsetMask;
use crate::MAX_COMPONENTS;

/// Law of a strictly positive jump size.
#[derive(Debug, Clone, PartialEq)]
pub enum JumpLaw {
    Exponential {
        rate: f64,
    },
    Gamma {
        shape: f64,
        rate: f64,
    },
    Constant {
        size: f64,
    },
    /// Finite atoms `(size, weight)`; weights sum to one.
    Empirical {
        atoms: Vec<(f64, f64)>,
    },
}

fn positive(name: &str, x: f64) -> Result<()> {
    if x.is_finite() && x > 0.0 {
        Ok(())
    } else {
        Err(Error::Model(format!(
            "{name} must be finite and > 0, got {x}"
        )))
    }
}

impl JumpLaw {
    pub fn validate(&self) -> Result<()> {
        match self {
            JumpLaw::Exponential { rate } => positive("exponential rate", *rate),
            JumpLaw::Gamma { shape, rate } => {
                positive("gamma shape", *shape)?;
                positive("gamma rate", *rate)
            }
            JumpLaw::Constant { size } => positive("constant jump size", *size),
            JumpLaw::Empirical { atoms } => {
                if atoms.is_empty() {
                    return Err(Error::Model(
                        "empirical jump law needs at least one atom".into(),
                    ));
                }
                let mut total = 0.0;
                for &(size, weight) in atoms {
                    positive("empirical atom size", size)?;
                    if !(weight.is_finite() && (0.0..=1.0).contains(&weight)) {
                        return Err(Error::Model(format!(
                            "empirical weight {weight} outside [0, 1]"
                        )));
                    }
                    total += weight;
                }
                if (total - 1.0).abs() > 1e-12 {
                    return Err(Error::Model(format!(
                        "empirical weights sum to {total}, not 1"
                    )));
                }
                Ok(())
            }
        }
    }

    /// `E[exp(-u X)]`.
    pub fn laplace_transform(&self, u: f64) -> f64 {
        if u == 0.0 {
            return 1.0;
        }
        match self {
            JumpLaw::Empirical { atoms } => atoms.iter().map(|&(s, w)| w * (-u * s).exp()).sum(),
            _ => self.log_laplace_transform(u).exp(),
        }
    }

    /// `ln E[exp(-u X)]`, evaluated without cancellation for small `u`.
    pub fn log_laplace_transform(&self, u: f64) -> f64 {
        if u == 0.0 {
            return 0.0;
        }
        match self {
            JumpLaw::Exponential { rate } => -(u / rate).ln_1p(),
            JumpLaw::Gamma { shape, rate } => -shape * (u / rate).ln_1p(),
            JumpLaw::Constant { size } => -u * size,
            JumpLaw::Empirical { .. } => self.laplace_transform(u).ln(),
        }
    }

    /// `1 - E[exp(-u X)]`.
    pub fn one_minus_laplace(&self, u: f64) -> f64 {
        if u == 0.0 {
            return 0.0;
        }
        match self {
            JumpLaw::Exponential { rate } => u / (rate + u),
            JumpLaw::Empirical { atoms } => {
                atoms.iter().map(|&(s, w)| -w * (-u * s).exp_m1()).sum()
            }
            _ => -self.log_laplace_transform(u).exp_m1(),
        }
    }

    pub fn mean(&self) -> f64 {
        match self {
            JumpLaw::Exponential { rate } => 1.0 / rate,
            JumpLaw::Gamma { shape, rate } => shape / rate,
            JumpLaw::Constant { size } => *size,
            JumpLaw::Empirical { atoms } => atoms.iter().map(|&(s, w)| s * w).sum(),
        }
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match self {
            JumpLaw::Exponential { rate } => Exp::new(*rate).expect("validated rate").sample(rng),
            JumpLaw::Gamma { shape, rate } => Gamma::new(*shape, 1.0 / rate)
                .expect("validated gamma")
                .sample(rng),
            JumpLaw::Constant { size } => *size,
            JumpLaw::Empirical { atoms } => {
                let u: f64 = rng.random();
                let mut acc = 0.0;
                for &(s, w) in atoms {
                    acc += w;
                    if u < acc {
                        return s;
                    }
                }
                atoms.last().map(|a| a.0).unwrap_or(0.0)
            }
        }
    }
}

/// Jump structure of a compound-Poisson factor.
#[derive(Debug, Clone, PartialEq)]
pub enum JumpMarks {
    /// One jump size per arrival, scaled by each component's loading.
    Common(JumpLaw),
    /// One Poisson clock, independent marks per component (one law per component).
    PerComponent(Vec<JumpLaw>),
}

/// A driftless Lévy subordinator driving one column of the loading matrix.
#[derive(Debug, Clone, PartialEq)]
pub enum Factor {
    CompoundPoisson {
        intensity: f64,
        marks: JumpMarks,
    },
    /// Gamma subordinator with Lévy density `shape * x^{-1} e^{-rate x}`.
    Gamma {
        shape: f64,
        rate: f64,
    },
}

impl Factor {
    pub fn compound_poisson(intensity: f64, jumps: JumpLaw) -> Self {
        Factor::CompoundPoisson {
            intensity,
            marks: JumpMarks::Common(jumps),
        }
    }

    pub fn shared_clock(intensity: f64, marks: Vec<JumpLaw>) -> Self {
        Factor::CompoundPoisson {
            intensity,
            marks: JumpMarks::PerComponent(marks),
        }
    }

    pub fn gamma(shape: f64, rate: f64) -> Self {
        Factor::Gamma { shape, rate }
    }

    pub fn validate(&self, n: usize) -> Result<()> {
        match self {
            Factor::CompoundPoisson { intensity, marks } => {
                // zero intensity is allowed: it encodes an empty jump part
                if !(intensity.is_finite() && *intensity >= 0.0) {
                    return Err(Error::Model(format!(
                        "intensity must be finite and >= 0, got {intensity}"
                    )));
                }
                match marks {
                    JumpMarks::Common(law) => law.validate(),
                    JumpMarks::PerComponent(laws) => {
                        if laws.len() != n {
                            return Err(Error::Model(format!(
                                "shared-clock factor has {} mark laws for {n} components",
                                laws.len()
                            )));
                        }
                        laws.iter().try_for_each(JumpLaw::validate)
                    }
                }
            }
            Factor::Gamma { shape, rate } => {
                positive("gamma subordinator shape", *shape)?;
                positive("gamma subordinator rate", *rate)
            }
        }
    }

    /// Laplace exponent `psi(u)` of the scalar subordinator. For a shared-clock factor this
    /// is the exponent of the aggregate jump (every component weighted by `u`).
    pub fn laplace_exponent(&self, u: f64) -> f64 {
        match self {
            Factor::CompoundPoisson {
                intensity,
                marks: JumpMarks::PerComponent(laws),
            } => {
                let log_lt: f64 = laws.iter().map(|l| l.log_laplace_transform(u)).sum();
                intensity * -log_lt.exp_m1()
            }
            _ => self.exponent_at(|_| u, 1),
        }
    }

    /// Exponent of `sum_i w_i X^i` where `X^i` is this factor's contribution to component
    /// `i` at unit loading; `weight(i)` already includes the loading.
    pub(crate) fn exponent_at(&self, weight: impl Fn(usize) -> f64, n: usize) -> f64 {
        match self {
            Factor::CompoundPoisson { intensity, marks } => {
                if *intensity == 0.0 {
                    return 0.0;
                }
                match marks {
                    JumpMarks::Common(law) => {
                        let u: f64 = (0..n).map(&weight).sum();
                        intensity * law.one_minus_laplace(u)
                    }
                    JumpMarks::PerComponent(laws) => {
                        let log_lt: f64 = laws
                            .iter()
                            .enumerate()
                            .map(|(i, l)| l.log_laplace_transform(weight(i)))
                            .sum();
                        intensity * -log_lt.exp_m1()
                    }
                }
            }
            Factor::Gamma { shape, rate } => {
                let u: f64 = (0..n).map(&weight).sum();
                shape * (u / rate).ln_1p()
            }
        }
    }

    pub fn is_compound_poisson(&self) -> bool {
        matches!(self, Factor::CompoundPoisson { .. })
    }
}

/// Deterministic increasing time change `delta0` with `delta0(0) = 0`.
#[derive(Debug, Clone, PartialEq)]
pub enum DeformationKind {
    Identity,
    /// `scale * t^exponent`
    Power {
        exponent: f64,
        scale: f64,
    },
    /// Linear interpolation through knots `(t, delta0(t))`, starting at `(0, 0)`.
    PiecewiseLinear {
        knots: Vec<(f64, f64)>,
    },
}

/// Time deformation plus per-component covariate scales `phi_i` (covariates are
/// pre-evaluated: the model is always conditional on their observed values).
#[derive(Debug, Clone, PartialEq)]
pub struct TimeDeformation {
    pub kind: DeformationKind,
    pub covariate_scales: Vec<f64>,
}

impl TimeDeformation {
    pub fn identity(n: usize) -> Self {
        Self {
            kind: DeformationKind::Identity,
            covariate_scales: vec![1.0; n],
        }
    }

    pub fn validate(&self, n: usize) -> Result<()> {
        if self.covariate_scales.len() != n {
            return Err(Error::Model(format!(
                "deformation has {} covariate scales for {n} components",
                self.covariate_scales.len()
            )));
        }
        for &phi in &self.covariate_scales {
            positive("covariate scale", phi)?;
        }
        match &self.kind {
            DeformationKind::Identity => Ok(()),
            DeformationKind::Power { exponent, scale } => {
                positive("power exponent", *exponent)?;
                positive("power scale", *scale)
            }
            DeformationKind::PiecewiseLinear { knots } => {
                if knots.len() < 2 {
                    return Err(Error::Model(
                        "piecewise-linear deformation needs at least two knots".into(),
                    ));
                }
                if knots[0] != (0.0, 0.0) {
                    return Err(Error::Model(
                        "piecewise-linear deformation must start at (0, 0)".into(),
                    ));
                }
                for w in knots.windows(2) {
                    let ((t0, d0), (t1, d1)) = (w[0], w[1]);
                    if !(t1.is_finite() && d1.is_finite() && t1 > t0 && d1 > d0) {
                        return Err(Error::Model(format!(
                            "piecewise-linear deformation must be strictly increasing, got ({t0}, {d0}) -> ({t1}, {d1})"
                        )));
                    }
                }
                Ok(())
            }
        }
    }

    pub fn is_identity(&self) -> bool {
        self.kind == DeformationKind::Identity
    }

    /// Last time at which `delta0` is defined.
    pub fn domain_end(&self) -> f64 {
        match &self.kind {
            DeformationKind::PiecewiseLinear { knots } => knots.last().map_or(0.0, |k| k.0),
            _ => f64::INFINITY,
        }
    }

    /// `delta0(t)`; piecewise-linear deformations do not extrapolate.
    pub fn deformed_time(&self, t: f64) -> Result<f64> {
        if !(t >= 0.0) {
            return Err(Error::Argument(format!("time must be >= 0, got {t}")));
        }
        match &self.kind {
            DeformationKind::Identity => Ok(t),
            DeformationKind::Power { exponent, scale } => Ok(scale * t.powf(*exponent)),
            DeformationKind::PiecewiseLinear { knots } => interpolate(knots, t, |k| k.0, |k| k.1)
                .ok_or_else(|| {
                    Error::Domain(format!(
                        "t = {t} beyond last deformation knot {}",
                        self.domain_end()
                    ))
                }),
        }
    }

    /// Inverse of [`deformed_time`](Self::deformed_time).
    pub fn inverse(&self, s: f64) -> Result<f64> {
        if !(s >= 0.0) {
            return Err(Error::Argument(format!(
                "deformed time must be >= 0, got {s}"
            )));
        }
        match &self.kind {
            DeformationKind::Identity => Ok(s),
            DeformationKind::Power { exponent, scale } => Ok((s / scale).powf(1.0 / exponent)),
            DeformationKind::PiecewiseLinear { knots } => interpolate(knots, s, |k| k.1, |k| k.0)
                .ok_or_else(|| Error::Domain(format!("deformed time {s} beyond last knot"))),
        }
    }
}

fn interpolate(
    knots: &[(f64, f64)],
    x: f64,
    from: impl Fn(&(f64, f64)) -> f64,
    to: impl Fn(&(f64, f64)) -> f64,
) -> Option<f64> {
    let last = knots.last()?;
    if x > from(last) {
        return None;
    }
    if x == from(last) {
        return Some(to(last));
    }
    let k = knots.partition_point(|p| from(p) <= x);
    let (a, b) = (&knots[k - 1], &knots[k]);
    let w = (x - from(a)) / (from(b) - from(a));
    Some(to(a) + w * (to(b) - to(a)))
}

/// `n` components loading on `m` independent subordinators:
/// `K^i_t = phi_i * sum_k A[i][k] L^k_{delta0(t)}`.
#[derive(Debug, Clone, PartialEq)]
pub struct FactorModel {
    factors: Vec<Factor>,
    loadings: Vec<Vec<f64>>,
    deformation: Option<TimeDeformation>,
}

impl FactorModel {
    pub fn new(
        factors: Vec<Factor>,
        loadings: Vec<Vec<f64>>,
        deformation: Option<TimeDeformation>,
    ) -> Result<Self> {
        let n = loadings.len();
        if n == 0 {
            return Err(Error::Model("model needs at least one component".into()));
        }
        if n > MAX_COMPONENTS {
            return Err(Error::Capacity(format!(
                "{n} components exceeds the maximum of {MAX_COMPONENTS}"
            )));
        }
        if factors.is_empty() {
            return Err(Error::Model("model needs at least one factor".into()));
        }
        let m = factors.len();
        for (i, row) in loadings.iter().enumerate() {
            if row.len() != m {
                return Err(Error::Model(format!(
                    "loadings row {} has {} entries, expected {m}",
                    i + 1,
                    row.len()
                )));
            }
            if let Some(bad) = row.iter().find(|a| !(a.is_finite() && **a >= 0.0)) {
                return Err(Error::Model(format!(
                    "loadings row {} has invalid entry {bad}",
                    i + 1
                )));
            }
            if !row.iter().any(|&a| a > 0.0) {
                return Err(Error::Model(format!(
                    "loadings row {} has no positive entry",
                    i + 1
                )));
            }
        }
        for f in &factors {
            f.validate(n)?;
        }
        if let Some(d) = &deformation {
            d.validate(n)?;
        }
        Ok(Self {
            factors,
            loadings,
            deformation,
        })
    }

    /// Independent components, one factor each with unit loading.
    pub fn independent(factors: Vec<Factor>) -> Result<Self> {
        let n = factors.len();
        let loadings = (0..n)
            .map(|i| (0..n).map(|k| if i == k { 1.0 } else { 0.0 }).collect())
            .collect();
        Self::new(factors, loadings, None)
    }

    pub fn n(&self) -> usize {
        self.loadings.len()
    }

    pub fn m(&self) -> usize {
        self.factors.len()
    }

    pub fn factors(&self) -> &[Factor] {
        &self.factors
    }

    pub fn loadings(&self) -> &[Vec<f64>] {
        &self.loadings
    }

    pub fn loading(&self, i: usize, k: usize) -> f64 {
        self.loadings[i][k]
    }

    pub fn deformation(&self) -> Option<&TimeDeformation> {
        self.deformation.as_ref()
    }

    pub fn has_identity_deformation(&self) -> bool {
        self.deformation
            .as_ref()
            .is_none_or(TimeDeformation::is_identity)
    }

    pub fn covariate_scale(&self, i: usize) -> f64 {
        self.deformation
            .as_ref()
            .map_or(1.0, |d| d.covariate_scales[i])
    }

    pub fn deformed_time(&self, t: f64) -> Result<f64> {
        match &self.deformation {
            Some(d) => d.deformed_time(t),
            None if t >= 0.0 => Ok(t),
            None => Err(Error::Argument(format!("time must be >= 0, got {t}"))),
        }
    }

    pub fn inverse_deformed_time(&self, s: f64) -> Result<f64> {
        match &self.deformation {
            Some(d) => d.inverse(s),
            None => Ok(s),
        }
    }

    /// `sum_k psi_k(sum_i A[i][k] z_i)`.
    pub fn joint_laplace_exponent(&self, z: &[f64]) -> Result<f64> {
        if z.len() != self.n() {
            return Err(Error::Argument(format!(
                "z has length {}, expected {}",
                z.len(),
                self.n()
            )));
        }
        if let Some(bad) = z.iter().find(|x| !(x.is_finite() && **x >= 0.0)) {
            return Err(Error::Argument(format!(
                "z entries must be finite and >= 0, got {bad}"
            )));
        }
        Ok(self.exponent_unchecked(|i| z[i]))
    }

    fn exponent_unchecked(&self, z: impl Fn(usize) -> f64) -> f64 {
        let n = self.n();
        let terms: Vec<f64> = self
            .factors
            .iter()
            .enumerate()
            .map(|(k, f)| f.exponent_at(|i| self.loadings[i][k] * z(i), n))
            .collect();
        crate::numerics::pairwise_sum(&terms)
    }

    /// Exponent rate `psi_J` of the aggregate `K^J = sum_{i in J} K^i` per unit deformed
    /// time: `z_i = phi_i` on `J`, zero elsewhere.
    pub fn subset_rate(&self, j: SubsetMask) -> f64 {
        self.exponent_unchecked(|i| {
            if j.contains(i) {
                self.covariate_scale(i)
            } else {
                0.0
            }
        })
    }

    /// Sub-model on the components of `s` (factor set unchanged).
    pub fn restrict(&self, s: SubsetMask) -> Result<FactorModel> {
        let keep: Vec<usize> = s.members().filter(|&i| i < self.n()).collect();
        let loadings = keep.iter().map(|&i| self.loadings[i].clone()).collect();
        let factors = self
            .factors
            .iter()
            .map(|f| match f {
                Factor::CompoundPoisson {
                    intensity,
                    marks: JumpMarks::PerComponent(laws),
                } => Factor::shared_clock(
                    *intensity,
                    keep.iter().map(|&i| laws[i].clone()).collect(),
                ),
                other => other.clone(),
            })
            .collect();
        let deformation = self.deformation.as_ref().map(|d| TimeDeformation {
            kind: d.kind.clone(),
            covariate_scales: keep.iter().map(|&i| d.covariate_scales[i]).collect(),
        });
        FactorModel::new(factors, loadings, deformation)
    }

    /// True when every factor is compound Poisson, i.e. every `K^i` is a pure step function.
    pub fn is_pure_jump(&self) -> bool {
        self.factors.iter().all(Factor::is_compound_poisson)
    }
}
