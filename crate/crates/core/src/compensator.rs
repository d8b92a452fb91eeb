//! Subset compensators `Lambda^J`, their Möbius interaction terms `Gamma^J` and the
//! Marshall–Olkin rates `gamma^J`.
//!
//! Every supported Lévy-type model has compensators linear in deformed time,
//! `Lambda^J_t = delta0(t) * lambda^J`, so everything is tabulated as rates.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::process_models::{FactorModel, TimeDeformation};
use crate::MAX_COMPONENTS;

pub use crate::numerics::SubsetMask;

/// Tolerance for the Möbius round trip, relative to `max(1, lambda^A)`.
pub const MOBIUS_TOLERANCE: f64 = 1e-10;

/// Rates below this are reported as outside the Marshall–Olkin class.
pub const NEGATIVE_RATE_TOLERANCE: f64 = 1e-10;

/// `Lambda^J_t = delta0(t) * psi_J`, evaluated on demand.
pub fn subset_compensator(model: &FactorModel, j: SubsetMask, t: f64) -> Result<f64> {
    if j.is_empty() {
        return Err(Error::Argument(
            "subset compensator needs a nonempty subset".into(),
        ));
    }
    if j.bits() >> model.n() != 0 {
        return Err(Error::Argument(format!(
            "subset {j} outside {{1..{}}}",
            model.n()
        )));
    }
    let s = model.deformed_time(t)?;
    if s == 0.0 {
        return Ok(0.0);
    }
    Ok(s * model.subset_rate(j))
}

/// `lambda^J` for every subset of `{1..n}`, indexed by bitmask (`lambda^{empty} = 0`).
#[derive(Debug, Clone, PartialEq)]
pub struct CompensatorTable {
    n: usize,
    rates: Vec<f64>,
    deformation: Option<TimeDeformation>,
}

impl CompensatorTable {
    /// Table from explicit rates indexed by bitmask; `rates[0]` must be zero.
    pub fn from_rates(n: usize, rates: Vec<f64>) -> Result<Self> {
        if n == 0 || n > MAX_COMPONENTS {
            return Err(Error::Capacity(format!(
                "table size n = {n} outside 1..={MAX_COMPONENTS}"
            )));
        }
        if rates.len() != 1 << n {
            return Err(Error::Model(format!(
                "expected {} rates, got {}",
                1usize << n,
                rates.len()
            )));
        }
        if rates[0] != 0.0 {
            return Err(Error::Model("rate of the empty subset must be 0".into()));
        }
        if let Some(bad) = rates.iter().find(|r| !(r.is_finite() && **r >= 0.0)) {
            return Err(Error::Model(format!(
                "subset rates must be finite and >= 0, got {bad}"
            )));
        }
        Ok(Self {
            n,
            rates,
            deformation: None,
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn rate(&self, j: SubsetMask) -> f64 {
        self.rates[j.bits() as usize]
    }

    pub fn rates(&self) -> &[f64] {
        &self.rates
    }

    pub fn deformation(&self) -> Option<&TimeDeformation> {
        self.deformation.as_ref()
    }

    pub fn has_identity_deformation(&self) -> bool {
        self.deformation
            .as_ref()
            .is_none_or(TimeDeformation::is_identity)
    }

    pub fn deformed_time(&self, t: f64) -> Result<f64> {
        match &self.deformation {
            Some(d) => d.deformed_time(t),
            None if t >= 0.0 => Ok(t),
            None => Err(Error::Argument(format!("time must be >= 0, got {t}"))),
        }
    }

    /// `Lambda^J_t` read from the table.
    pub fn compensator(&self, j: SubsetMask, t: f64) -> Result<f64> {
        let s = self.deformed_time(t)?;
        Ok(if s == 0.0 { 0.0 } else { s * self.rate(j) })
    }

    /// `J ⊆ J'` implies `lambda^J <= lambda^{J'}`; checks every covering pair.
    pub fn is_inclusion_monotone(&self) -> bool {
        (0..self.rates.len()).all(|mask| {
            (0..self.n).all(|b| mask >> b & 1 == 1 || self.rates[mask] <= self.rates[mask | 1 << b])
        })
    }

    /// All interaction rates `gamma^J`, indexed by bitmask, via an `O(n 2^n)` subset
    /// Möbius transform of `I -> lambda^{I^c}`.
    pub fn gamma_rates(&self) -> Vec<f64> {
        let full = (1usize << self.n) - 1;
        let mut g: Vec<f64> = (0..=full).map(|i| self.rates[full & !i]).collect();
        for b in 0..self.n {
            let bit = 1 << b;
            for mask in 0..=full {
                if mask & bit != 0 {
                    g[mask] -= g[mask ^ bit];
                }
            }
        }
        g[0] = 0.0;
        for x in g.iter_mut().skip(1) {
            *x = -*x;
        }
        g
    }
}

/// Pre-tabulate `lambda^J = psi_J` over all `2^n - 1` nonempty subsets.
pub fn build_table(model: &FactorModel) -> Result<CompensatorTable> {
    let n = model.n();
    if n > MAX_COMPONENTS {
        return Err(Error::Capacity(format!(
            "{n} components exceeds the table limit of {MAX_COMPONENTS}"
        )));
    }
    let mut rates = vec![0.0; 1 << n];
    for (bits, rate) in rates.iter_mut().enumerate().skip(1) {
        *rate = model.subset_rate(SubsetMask(bits as u32));
    }
    Ok(CompensatorTable {
        n,
        rates,
        deformation: model.deformation().cloned(),
    })
}

/// `gamma^J = sum_{I ⊆ J} (-1)^{|J|-|I|+1} lambda^{I^c}`; zero for the empty set.
pub fn mobius_gamma(table: &CompensatorTable, j: SubsetMask) -> f64 {
    if j.is_empty() {
        return 0.0;
    }
    let terms: Vec<f64> = j
        .submasks()
        .map(|i| {
            let sign = if (j.len() - i.len() + 1).is_multiple_of(2) {
                1.0
            } else {
                -1.0
            };
            sign * table.rate(i.complement(table.n()))
        })
        .collect();
    crate::numerics::pairwise_sum(&terms)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MobiusCheck {
    pub passed: bool,
    pub max_residual: f64,
    /// Subset attaining the worst residual.
    pub worst: SubsetMask,
}

/// Verifies `lambda^A = sum_{J ∩ A ≠ ∅} gamma^J` for every nonempty `A`.
///
/// The right-hand side is `Z(full) - Z(A^c)` with `Z` the subset-sum (zeta) transform of
/// the interaction rates.
pub fn mobius_inverse_check(table: &CompensatorTable) -> MobiusCheck {
    let n = table.n();
    let full = (1usize << n) - 1;
    let mut zeta = table.gamma_rates();
    for b in 0..n {
        let bit = 1 << b;
        for mask in 0..=full {
            if mask & bit != 0 {
                zeta[mask] += zeta[mask ^ bit];
            }
        }
    }
    let mut check = MobiusCheck {
        passed: true,
        max_residual: 0.0,
        worst: SubsetMask::EMPTY,
    };
    for a in 1..=full {
        let recon = zeta[full] - zeta[full & !a];
        let lambda = table.rates[a];
        let residual = (lambda - recon).abs() / lambda.max(1.0);
        if residual > check.max_residual {
            check.max_residual = residual;
            check.worst = SubsetMask(a as u32);
        }
    }
    check.passed = check.max_residual <= MOBIUS_TOLERANCE;
    check
}

/// Marshall–Olkin parameters of a model with linear compensators.
#[derive(Debug, Clone, PartialEq)]
pub struct MoRates {
    n: usize,
    rates: Vec<f64>,
    /// `|sum_{J ∋ i} gamma^J - lambda^{{i}}|` per component.
    pub marginal_residuals: Vec<f64>,
    /// Subsets whose rate is below `-NEGATIVE_RATE_TOLERANCE`.
    pub negative: Vec<SubsetMask>,
}

impl MoRates {
    /// Rates of an explicit table, reporting (not clamping) negative entries.
    pub fn from_table(table: &CompensatorTable) -> Result<Self> {
        if !table.has_identity_deformation() {
            return Err(Error::Unsupported(
                "Marshall-Olkin rates need linear compensators (identity time deformation)".into(),
            ));
        }
        let n = table.n();
        let rates = table.gamma_rates();
        let marginal_residuals = (0..n)
            .map(|i| {
                let terms: Vec<f64> = (1..rates.len())
                    .filter(|m| m >> i & 1 == 1)
                    .map(|m| rates[m])
                    .collect();
                (crate::numerics::pairwise_sum(&terms) - table.rate(SubsetMask::singleton(i))).abs()
            })
            .collect();
        let scale = table.rate(SubsetMask::full(n)).max(1.0);
        let negative = (1..rates.len())
            .filter(|&m| rates[m] < -NEGATIVE_RATE_TOLERANCE * scale)
            .map(|m| SubsetMask(m as u32))
            .collect();
        Ok(Self {
            n,
            rates,
            marginal_residuals,
            negative,
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn rate(&self, j: SubsetMask) -> f64 {
        self.rates[j.bits() as usize]
    }

    /// `(J, gamma^J)` for every nonempty `J` in bitmask order.
    pub fn iter(&self) -> impl Iterator<Item = (SubsetMask, f64)> + '_ {
        self.rates
            .iter()
            .enumerate()
            .skip(1)
            .map(|(m, &r)| (SubsetMask(m as u32), r))
    }

    pub fn is_representable(&self) -> bool {
        self.negative.is_empty()
    }

    pub fn max_marginal_residual(&self) -> f64 {
        self.marginal_residuals.iter().copied().fold(0.0, f64::max)
    }

    /// Human-readable listing of negative rates.
    pub fn diagnostics(&self) -> Vec<String> {
        self.negative
            .iter()
            .map(|&j| {
                format!(
                    "gamma^{j} = {} < 0: not representable as a Marshall-Olkin distribution",
                    self.rate(j)
                )
            })
            .collect()
    }
}

/// `gamma^J` for every nonempty `J` of a linear-compensator factor model.
///
/// Factor models always produce nonnegative rates, so a negative one aborts with the
/// diagnostics report.
pub fn mo_rates(model: &FactorModel) -> Result<MoRates> {
    if !model.has_identity_deformation() {
        return Err(Error::Unsupported(
            "Marshall-Olkin rates are only defined for linear compensators (identity time deformation)".into(),
        ));
    }
    let rates = MoRates::from_table(&build_table(model)?)?;
    if !rates.is_representable() {
        return Err(Error::Numerical(format!(
            "factor model produced negative Marshall-Olkin rates: {}",
            rates.diagnostics().join("; ")
        )));
    }
    Ok(rates)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::process_models::{DeformationKind, Factor, JumpLaw};

    fn exp1() -> JumpLaw {
        JumpLaw::Exponential { rate: 1.0 }
    }

    fn shared_driver() -> FactorModel {
        FactorModel::new(
            vec![Factor::shared_clock(2.0, vec![exp1(), exp1()])],
            vec![vec![1.0], vec![1.0]],
            None,
        )
        .unwrap()
    }

    fn independent(n: usize) -> CompensatorTable {
        // unit marginal rates, additive
        let rates = (0..1usize << n).map(|m| m.count_ones() as f64).collect();
        CompensatorTable::from_rates(n, rates).unwrap()
    }

    #[test]
    fn compensator_examples() {
        let m = shared_driver();
        let full = SubsetMask::full(2);
        assert!((subset_compensator(&m, full, 1.0).unwrap() - 1.5).abs() < 1e-15);
        assert_eq!(subset_compensator(&m, full, 0.0).unwrap(), 0.0);
        assert!(
            (subset_compensator(&m, SubsetMask::singleton(0), 2.0).unwrap() - 2.0).abs() < 1e-15
        );
        assert!(matches!(
            subset_compensator(&m, SubsetMask::EMPTY, 1.0),
            Err(Error::Argument(_))
        ));
    }

    #[test]
    fn table_examples() {
        let single = build_table(
            &FactorModel::new(
                vec![Factor::compound_poisson(2.0, exp1())],
                vec![vec![1.0]],
                None,
            )
            .unwrap(),
        )
        .unwrap();
        assert_eq!(single.rates(), &[0.0, 1.0]);

        let ind = build_table(
            &FactorModel::independent(vec![
                Factor::compound_poisson(2.0, exp1()),
                Factor::compound_poisson(2.0, exp1()),
            ])
            .unwrap(),
        )
        .unwrap();
        assert_eq!(ind.rates(), &[0.0, 1.0, 1.0, 2.0]);

        let sd = build_table(&shared_driver()).unwrap();
        assert_eq!(sd.rates(), &[0.0, 1.0, 1.0, 1.5]);
        assert!(sd.is_inclusion_monotone());
    }

    #[test]
    fn deformed_table_scales_time() {
        let m = FactorModel::new(
            vec![Factor::compound_poisson(2.0, exp1())],
            vec![vec![1.0]],
            Some(TimeDeformation {
                kind: DeformationKind::Power {
                    exponent: 2.0,
                    scale: 1.0,
                },
                covariate_scales: vec![1.0],
            }),
        )
        .unwrap();
        let t = build_table(&m).unwrap();
        assert_eq!(t.compensator(SubsetMask::singleton(0), 3.0).unwrap(), 9.0);
        assert_eq!(
            t.compensator(SubsetMask::singleton(0), 3.0).unwrap(),
            subset_compensator(&m, SubsetMask::singleton(0), 3.0).unwrap()
        );
    }

    #[test]
    fn gamma_examples() {
        let one = CompensatorTable::from_rates(1, vec![0.0, 0.8]).unwrap();
        assert_eq!(mobius_gamma(&one, SubsetMask::singleton(0)), 0.8);

        let ind = independent(2);
        assert_eq!(mobius_gamma(&ind, SubsetMask::full(2)), 0.0);

        let sd = build_table(&shared_driver()).unwrap();
        for j in 1..4u32 {
            assert!((mobius_gamma(&sd, SubsetMask(j)) - 0.5).abs() < 1e-15);
        }
        assert_eq!(mobius_gamma(&sd, SubsetMask::EMPTY), 0.0);
        let fast = sd.gamma_rates();
        assert_eq!(&fast[1..], &[0.5, 0.5, 0.5]);
    }

    #[test]
    fn inverse_check_examples() {
        let sd = mobius_inverse_check(&build_table(&shared_driver()).unwrap());
        assert!(sd.passed);
        assert!(sd.max_residual <= 1e-15);
        let ind = mobius_inverse_check(&independent(3));
        assert!(ind.passed && ind.max_residual <= 1e-15);
    }

    #[test]
    fn mo_rate_examples() {
        let r = mo_rates(&shared_driver()).unwrap();
        let got: Vec<(String, f64)> = r.iter().map(|(j, g)| (j.to_string(), g)).collect();
        assert_eq!(
            got,
            vec![
                ("[1]".to_string(), 0.5),
                ("[2]".to_string(), 0.5),
                ("[1,2]".to_string(), 0.5)
            ]
        );
        assert!(r.max_marginal_residual() < 1e-15);

        let ind = MoRates::from_table(&independent(3)).unwrap();
        for (j, g) in ind.iter() {
            if j.len() > 1 {
                assert_eq!(g, 0.0);
            }
        }

        let single =
            FactorModel::new(vec![Factor::gamma(1.0, 1.0)], vec![vec![1.0]], None).unwrap();
        let r1 = mo_rates(&single).unwrap();
        assert_eq!(r1.rate(SubsetMask::singleton(0)), 2f64.ln());
    }

    #[test]
    fn mo_rates_reject_deformation() {
        let m = FactorModel::new(
            vec![Factor::gamma(1.0, 1.0)],
            vec![vec![1.0]],
            Some(TimeDeformation {
                kind: DeformationKind::Power {
                    exponent: 0.5,
                    scale: 1.0,
                },
                covariate_scales: vec![1.0],
            }),
        )
        .unwrap();
        assert!(matches!(mo_rates(&m), Err(Error::Unsupported(_))));
    }

    #[test]
    fn negative_rates_are_reported() {
        let t = CompensatorTable::from_rates(2, vec![0.0, 1.0, 1.0, 2.5]).unwrap();
        let r = MoRates::from_table(&t).unwrap();
        assert!(!r.is_representable());
        assert_eq!(r.negative, vec![SubsetMask::full(2)]);
        assert_eq!(r.rate(SubsetMask::full(2)), -0.5);
        assert!(r.diagnostics()[0].contains("[1,2]"));
    }

    #[test]
    fn table_rejects_bad_input() {
        assert!(CompensatorTable::from_rates(2, vec![0.0, 1.0]).is_err());
        assert!(CompensatorTable::from_rates(2, vec![0.1, 1.0, 1.0, 1.0]).is_err());
        assert!(matches!(
            CompensatorTable::from_rates(21, vec![]),
            Err(Error::Capacity(_))
        ));
    }
}
