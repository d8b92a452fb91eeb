//! Adaptive Gauss–Kronrod quadrature on `[a, b]` with mandatory breakpoints.
//!
//! Each panel is integrated with the 15-point Kronrod rule; the embedded 7-point Gauss rule
//! supplies the panel error estimate. Panels whose estimate exceeds their share of the
//! tolerance are bisected, up to [`MAX_DEPTH`] levels.

use serde::Serialize;

use crate::error::{Error, Result};

/// Recursion depth cap for panel bisection.
pub const MAX_DEPTH: u32 = 40;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct QuadratureResult {
    pub value: f64,
    pub est_error: f64,
    pub panels: usize,
}

#[allow(clippy::excessive_precision)]
const XGK: [f64; 8] = [
    0.991_455_371_120_812_639_206_854_697_526_329,
    0.949_107_912_342_758_524_526_189_684_047_851,
    0.864_864_423_359_769_072_789_712_788_640_926,
    0.741_531_185_599_394_439_863_864_773_280_788,
    0.586_087_235_467_691_130_294_144_838_258_730,
    0.405_845_151_377_397_166_906_606_412_076_961,
    0.207_784_955_007_898_467_600_689_403_773_245,
    0.0,
];

#[allow(clippy::excessive_precision)]
const WG: [f64; 4] = [
    0.129_484_966_168_869_693_270_611_432_679_082,
    0.279_705_391_489_276_667_901_467_771_423_780,
    0.381_830_050_505_118_944_950_369_775_488_975,
    0.417_959_183_673_469_387_755_102_040_816_327,
];

#[allow(clippy::excessive_precision)]
const WGK: [f64; 8] = [
    0.022_935_322_010_529_224_963_732_008_058_970,
    0.063_092_092_629_978_553_290_700_663_189_204,
    0.104_790_010_322_250_183_839_876_322_541_518,
    0.140_653_259_715_525_918_745_189_590_510_238,
    0.169_004_726_639_267_902_826_583_426_598_550,
    0.190_350_578_064_785_409_913_256_402_421_014,
    0.204_432_940_075_298_892_414_161_999_234_649,
    0.209_482_141_084_727_828_012_999_174_891_714,
];

/// Returns `(kronrod_15, gauss_7)` on `[a, b]`.
fn gk15<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> (f64, f64) {
    let center = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let fc = f(center);
    let mut kronrod = fc * WGK[7];
    let mut gauss = fc * WG[3];
    for j in 0..7 {
        let dx = half * XGK[j];
        let pair = f(center - dx) + f(center + dx);
        kronrod += WGK[j] * pair;
        // Gauss nodes sit at the odd Kronrod abscissae.
        if j % 2 == 1 {
            gauss += WG[j / 2] * pair;
        }
    }
    (kronrod * half, gauss * half)
}

struct Adaptive<'a, F> {
    f: &'a F,
    // absolute error budget per unit length
    density: f64,
    value: f64,
    est_error: f64,
    panels: usize,
    failed: bool,
}

impl<F: Fn(f64) -> f64> Adaptive<'_, F> {
    fn panel(&mut self, a: f64, b: f64, estimate: (f64, f64), depth: u32) {
        let (k15, g7) = estimate;
        let err = (k15 - g7).abs();
        let budget = self.density * (b - a);
        let mid = 0.5 * (a + b);
        let unsplittable = !(a < mid && mid < b);
        if err <= budget || unsplittable || depth >= MAX_DEPTH || !err.is_finite() {
            if err > budget || !err.is_finite() {
                self.failed = true;
            }
            self.value += k15;
            self.est_error += err;
            self.panels += 1;
            return;
        }
        let left = gk15(self.f, a, mid);
        let right = gk15(self.f, mid, b);
        self.panel(a, mid, left, depth + 1);
        self.panel(mid, b, right, depth + 1);
    }
}

/// Integrate `f` over `[a, b]` to relative tolerance `tol` (relative to `max(1, |value|)`).
///
/// Breakpoints strictly inside `(a, b)` become fixed panel boundaries; others are ignored.
/// The result is a deterministic function of the inputs.
pub fn integrate<F: Fn(f64) -> f64>(
    f: F,
    a: f64,
    b: f64,
    breakpoints: &[f64],
    tol: f64,
) -> Result<QuadratureResult> {
    if !(a.is_finite() && b.is_finite()) || a > b {
        return Err(Error::Argument(format!(
            "invalid integration interval [{a}, {b}]"
        )));
    }
    if !(tol > 0.0) {
        return Err(Error::Argument(format!(
            "tolerance must be positive, got {tol}"
        )));
    }
    if a == b {
        return Ok(QuadratureResult {
            value: 0.0,
            est_error: 0.0,
            panels: 0,
        });
    }

    let mut edges = Vec::with_capacity(breakpoints.len() + 2);
    edges.push(a);
    let mut inner: Vec<f64> = breakpoints
        .iter()
        .copied()
        .filter(|&x| x > a && x < b)
        .collect();
    inner.sort_by(f64::total_cmp);
    inner.dedup();
    edges.extend(inner);
    edges.push(b);

    let first: Vec<(f64, f64)> = edges.windows(2).map(|w| gk15(&f, w[0], w[1])).collect();
    let rough: f64 = first.iter().map(|e| e.0).sum();
    let scale = rough.abs().max(1.0);

    let mut state = Adaptive {
        f: &f,
        density: tol * scale / (b - a),
        value: 0.0,
        est_error: 0.0,
        panels: 0,
        failed: false,
    };
    for (w, est) in edges.windows(2).zip(first) {
        state.panel(w[0], w[1], est, 0);
    }

    let result = QuadratureResult {
        value: state.value,
        est_error: state.est_error,
        panels: state.panels,
    };
    if state.failed {
        return Err(Error::Quadrature {
            message: format!("tolerance {tol:e} not met on [{a}, {b}] within depth {MAX_DEPTH}"),
            partial: result,
        });
    }
    Ok(result)
}
