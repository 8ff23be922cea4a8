//! Globally adaptive Gauss–Kronrod (7/15) quadrature with user breakpoints.

// Node and weight tables are quoted to full published precision.
#![allow(clippy::excessive_precision)]

use std::collections::BinaryHeap;

use crate::error::{Error, Result};

/// Default cap on the number of live subintervals.
pub const DEFAULT_MAX_INTERVALS: usize = 20_000;

// Kronrod abscissae (positive half, descending) and weights for the
// 15-point rule; odd indices are the 7-point Gauss nodes.
const XGK: [f64; 8] = [
    0.991_455_371_120_812_639_206_854_697_526_329,
    0.949_107_912_342_758_524_526_189_684_047_851,
    0.864_864_423_359_769_072_789_712_788_640_926,
    0.741_531_185_599_394_439_863_864_773_280_788,
    0.586_087_235_467_691_130_294_144_845_693_013,
    0.405_845_151_377_397_166_906_606_412_076_961,
    0.207_784_955_007_898_467_600_689_403_773_245,
    0.000_000_000_000_000_000_000_000_000_000_000,
];

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

const WG: [f64; 4] = [
    0.129_484_966_168_869_693_270_611_432_679_082,
    0.279_705_391_489_276_667_901_467_771_423_780,
    0.381_830_050_505_118_944_950_369_775_488_975,
    0.417_959_183_673_469_387_755_102_040_816_327,
];

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadratureResult {
    pub value: f64,
    pub error_estimate: f64,
    pub intervals: usize,
}

#[derive(Debug, Clone, Copy)]
struct Segment {
    a: f64,
    b: f64,
    value: f64,
    error: f64,
}

impl PartialEq for Segment {
    fn eq(&self, other: &Self) -> bool {
        self.error == other.error
    }
}

impl Eq for Segment {}

impl PartialOrd for Segment {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Segment {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        self.error.total_cmp(&other.error)
    }
}

fn gauss_kronrod<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> Segment {
    let center = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let fc = f(center);
    let mut kronrod = fc * WGK[7];
    let mut gauss = fc * WG[3];
    for j in 0..7 {
        let dx = half * XGK[j];
        let sum = f(center - dx) + f(center + dx);
        kronrod += WGK[j] * sum;
        if j % 2 == 1 {
            gauss += WG[j / 2] * sum;
        }
    }
    Segment {
        a,
        b,
        value: kronrod * half,
        error: ((kronrod - gauss) * half).abs(),
    }
}

/// Integrates `f` over `[a, b]`, first splitting at every breakpoint that lies
/// strictly inside. Refines the worst subinterval until the summed error
/// estimate is at most `tol`.
pub fn integrate<F: Fn(f64) -> f64>(
    f: F,
    a: f64,
    b: f64,
    breakpoints: &[f64],
    tol: f64,
) -> Result<QuadratureResult> {
    integrate_with_budget(f, a, b, breakpoints, tol, DEFAULT_MAX_INTERVALS)
}

pub fn integrate_with_budget<F: Fn(f64) -> f64>(
    f: F,
    a: f64,
    b: f64,
    breakpoints: &[f64],
    tol: f64,
    max_intervals: usize,
) -> Result<QuadratureResult> {
    assert!(a <= b, "integration bounds must be ordered");
    let mut cuts: Vec<f64> = breakpoints
        .iter()
        .copied()
        .filter(|&p| p > a && p < b)
        .collect();
    cuts.sort_by(f64::total_cmp);
    cuts.dedup();

    let mut heap = BinaryHeap::new();
    let mut left = a;
    for &c in cuts.iter().chain(std::iter::once(&b)) {
        if c > left {
            heap.push(gauss_kronrod(&f, left, c));
        }
        left = c;
    }

    loop {
        let (value, error): (f64, f64) = heap
            .iter()
            .fold((0.0, 0.0), |(v, e), s| (v + s.value, e + s.error));
        // Below this the estimate is dominated by rounding in the rule itself.
        let floor = 50.0 * f64::EPSILON * value.abs();
        if error <= tol.max(floor) {
            return Ok(QuadratureResult {
                value,
                error_estimate: error,
                intervals: heap.len(),
            });
        }
        if heap.len() >= max_intervals {
            return Err(Error::QuadratureBudgetExceeded {
                intervals: max_intervals,
                error_estimate: error,
                tolerance: tol,
            });
        }
        let worst = heap.pop().expect("at least one segment");
        let mid = 0.5 * (worst.a + worst.b);
        if mid <= worst.a || mid >= worst.b {
            // Interval cannot be split further in floating point.
            return Err(Error::QuadratureBudgetExceeded {
                intervals: heap.len() + 1,
                error_estimate: error,
                tolerance: tol,
            });
        }
        heap.push(gauss_kronrod(&f, worst.a, mid));
        heap.push(gauss_kronrod(&f, mid, worst.b));
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn polynomial_is_exact() {
        let r = integrate(|x| x.powi(6) - 2.0 * x, 0.0, 2.0, &[], 1e-14).unwrap();
        assert!((r.value - (128.0 / 7.0 - 4.0)).abs() < 1e-13);
        assert_eq!(r.intervals, 1);
    }

    #[test]
    fn smooth_periodic() {
        let r = integrate(|x| (x.sin()).exp(), 0.0, 2.0 * PI, &[], 1e-13).unwrap();
        // 2π I_0(1)
        assert!((r.value - 7.954_926_521_012_844).abs() < 1e-12);
    }

    #[test]
    fn kink_with_and_without_breakpoint() {
        let f = |x: f64| (x - 0.3).abs();
        let exact = 0.3 * 0.3 / 2.0 + 0.7 * 0.7 / 2.0;
        let split = integrate(f, 0.0, 1.0, &[0.3], 1e-13).unwrap();
        assert!((split.value - exact).abs() < 1e-14);
        assert!(split.intervals <= 2);
        let plain = integrate(f, 0.0, 1.0, &[], 1e-12).unwrap();
        assert!((plain.value - exact).abs() < 1e-12);
        assert!(plain.intervals > split.intervals);
    }

    #[test]
    fn budget_is_reported() {
        let err = integrate_with_budget(|x| (1.0 / x).sin(), 1e-9, 1.0, &[], 1e-15, 8).unwrap_err();
        assert!(matches!(
            err,
            Error::QuadratureBudgetExceeded { intervals: 8, .. }
        ));
    }

    #[test]
    fn breakpoints_outside_are_ignored() {
        let r = integrate(|x| x, 0.0, 1.0, &[-1.0, 0.0, 1.0, 2.0], 1e-14).unwrap();
        assert!((r.value - 0.5).abs() < 1e-15);
        assert_eq!(r.intervals, 1);
    }
}
