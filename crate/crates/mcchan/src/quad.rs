//! Globally adaptive Gauss-Kronrod (7/15) quadrature on finite intervals.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];

const WGK: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_2,
    0.140_653_259_715_525_9,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_8,
];

// Gauss weights for the odd-indexed Kronrod nodes (1, 3, 5, 7).
const WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

/// Integral estimate and its estimated absolute error.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Quad {
    pub value: f64,
    pub error: f64,
}

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
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Segment {
    fn cmp(&self, other: &Self) -> Ordering {
        self.error.total_cmp(&other.error)
    }
}

fn gk15<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> Segment {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let fc = f(c);
    let mut kron = fc * WGK[7];
    let mut gauss = fc * WG[3];
    for (j, (&x, &w)) in XGK.iter().zip(&WGK).take(7).enumerate() {
        let s = f(c - h * x) + f(c + h * x);
        kron += w * s;
        if j % 2 == 1 {
            gauss += WG[j / 2] * s;
        }
    }
    Segment {
        a,
        b,
        value: kron * h,
        error: ((kron - gauss) * h).abs(),
    }
}

/// Integrates `f` over `[a, b]` until the error estimate drops below
/// `max(abs_tol, rel_tol * |value|)` or 4000 subdivisions are used.
pub fn integrate<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, abs_tol: f64, rel_tol: f64) -> Quad {
    integrate_pieces(f, &[a, b], abs_tol, rel_tol)
}

/// Like [`integrate`], with `points` (sorted, at least two) as the initial
/// partition. Endpoints are never sampled, so bracket narrow peaks by a few
/// widths on each side rather than placing a point on them.
pub fn integrate_pieces<F: Fn(f64) -> f64>(
    f: F,
    points: &[f64],
    abs_tol: f64,
    rel_tol: f64,
) -> Quad {
    assert!(points.len() >= 2, "need at least one interval");
    let mut heap: BinaryHeap<Segment> = points
        .windows(2)
        .filter(|w| w[1] > w[0])
        .map(|w| gk15(&f, w[0], w[1]))
        .collect();
    let (mut value, mut error) = totals(&heap);
    for _ in 0..4000 {
        if error <= abs_tol.max(rel_tol * value.abs()) {
            break;
        }
        let Some(worst) = heap.pop() else { break };
        let mid = 0.5 * (worst.a + worst.b);
        if mid <= worst.a || mid >= worst.b {
            // Interval can no longer be split in floating point.
            error -= worst.error;
            heap.push(Segment { error: 0.0, ..worst });
            continue;
        }
        let (left, right) = (gk15(&f, worst.a, mid), gk15(&f, mid, worst.b));
        value += left.value + right.value - worst.value;
        error += left.error + right.error - worst.error;
        heap.push(left);
        heap.push(right);
    }
    let (value, error) = totals(&heap);
    Quad { value, error }
}

fn totals(heap: &BinaryHeap<Segment>) -> (f64, f64) {
    // Sum in interval order so the result does not depend on heap layout.
    let mut segs: Vec<&Segment> = heap.iter().collect();
    segs.sort_by(|x, y| x.a.total_cmp(&y.a));
    segs.iter()
        .fold((0.0, 0.0), |(v, e), s| (v + s.value, e + s.error))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn polynomials_are_exact() {
        let q = integrate(|x| 3.0 * x * x - x + 2.0, -1.0, 2.0, 1e-14, 1e-14);
        assert!((q.value - 13.5).abs() < 1e-12, "{q:?}");
    }

    #[test]
    fn gaussian_mass() {
        let f = |x: f64| (-x * x / 2.0).exp() / (2.0 * std::f64::consts::PI).sqrt();
        let q = integrate(f, -12.0, 12.0, 1e-14, 1e-13);
        assert!((q.value - 1.0).abs() < 1e-12, "{q:?}");
    }

    #[test]
    fn endpoint_singularity() {
        let q = integrate(|x: f64| 1.0 / x.sqrt(), 0.0, 1.0, 1e-10, 1e-10);
        assert!((q.value - 2.0).abs() < 1e-8, "{q:?}");
    }

    #[test]
    fn narrow_peak_with_breakpoint() {
        let s = 1e-4;
        let f = |x: f64| (-(x - 0.3) * (x - 0.3) / (2.0 * s * s)).exp();
        let q = integrate_pieces(f, &[0.0, 0.3 - 12.0 * s, 0.3 + 12.0 * s, 1.0], 0.0, 1e-12);
        let exact = s * (2.0 * std::f64::consts::PI).sqrt();
        assert!((q.value / exact - 1.0).abs() < 1e-10, "{q:?}");
    }
}
