//! Adaptive Gauss–Kronrod (7/15) quadrature with a global error budget.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use crate::error::{Error, Result};

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
const WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadResult {
    pub value: f64,
    pub error: f64,
}

#[derive(Debug, Clone, Copy)]
pub struct QuadOptions {
    pub abs_tol: f64,
    pub rel_tol: f64,
    pub max_intervals: usize,
}

impl Default for QuadOptions {
    fn default() -> Self {
        Self {
            abs_tol: 1e-10,
            rel_tol: 1e-10,
            max_intervals: 4000,
        }
    }
}

impl QuadOptions {
    pub fn abs(abs_tol: f64) -> Self {
        Self {
            abs_tol,
            rel_tol: 0.0,
            ..Self::default()
        }
    }
}

fn gk15<F: FnMut(f64) -> f64>(f: &mut F, a: f64, b: f64) -> (f64, f64) {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let fc = f(c);
    let mut kron = fc * WGK[7];
    let mut gauss = fc * WG[3];
    for j in 0..7 {
        let x = h * XGK[j];
        let s = f(c - x) + f(c + x);
        kron += WGK[j] * s;
        if j % 2 == 1 {
            gauss += WG[j / 2] * s;
        }
    }
    let err = ((kron - gauss) * h).abs();
    (kron * h, err)
}

struct Piece {
    a: f64,
    b: f64,
    value: f64,
    error: f64,
}

impl PartialEq for Piece {
    fn eq(&self, o: &Self) -> bool {
        self.error == o.error
    }
}
impl Eq for Piece {}
impl PartialOrd for Piece {
    fn partial_cmp(&self, o: &Self) -> Option<Ordering> {
        Some(self.cmp(o))
    }
}
impl Ord for Piece {
    fn cmp(&self, o: &Self) -> Ordering {
        self.error.total_cmp(&o.error)
    }
}

/// Integrate `f` over `[a, b]`, bisecting the worst interval until the summed
/// error estimate meets `max(abs_tol, rel_tol·|I|)`.
///
/// Integrable endpoint singularities are fine as long as `f` is never
/// evaluated at the endpoints themselves, which Gauss–Kronrod nodes avoid.
pub fn integrate<F: FnMut(f64) -> f64>(mut f: F, a: f64, b: f64, opts: QuadOptions) -> Result<QuadResult> {
    if a == b {
        return Ok(QuadResult { value: 0.0, error: 0.0 });
    }
    let (lo, hi, sign) = if a < b { (a, b, 1.0) } else { (b, a, -1.0) };
    let (v, e) = gk15(&mut f, lo, hi);
    let mut heap = BinaryHeap::new();
    heap.push(Piece { a: lo, b: hi, value: v, error: e });
    let mut total = v;
    let mut err = e;
    let mut count = 1;
    loop {
        let target = opts.abs_tol.max(opts.rel_tol * total.abs());
        if err <= target {
            break;
        }
        if count >= opts.max_intervals {
            return Err(Error::Quadrature {
                estimate: sign * total,
                error: err,
                tolerance: target,
            });
        }
        let worst = heap.pop().expect("heap never empty");
        let m = 0.5 * (worst.a + worst.b);
        if m <= worst.a || m >= worst.b {
            // Interval cannot be split further in floating point.
            return Err(Error::Quadrature {
                estimate: sign * total,
                error: err,
                tolerance: target,
            });
        }
        let (v1, e1) = gk15(&mut f, worst.a, m);
        let (v2, e2) = gk15(&mut f, m, worst.b);
        total += v1 + v2 - worst.value;
        err += e1 + e2 - worst.error;
        heap.push(Piece { a: worst.a, b: m, value: v1, error: e1 });
        heap.push(Piece { a: m, b: worst.b, value: v2, error: e2 });
        count += 1;
    }
    // Re-sum from the pieces to shed drift from the running updates.
    let value: f64 = heap.iter().map(|p| p.value).sum();
    let error: f64 = heap.iter().map(|p| p.error).sum();
    Ok(QuadResult {
        value: sign * value,
        error,
    })
}

/// `∫_a^∞ f(u) du` for an integrand decaying like `u^{-p}`, `p > 1`.
///
/// Uses `u = a + L(v^{-m} - 1)` with `m = 1/(p-1)`, which turns the algebraic
/// tail into a bounded integrand on `(0, 1]`. `scale` sets `L`.
pub fn integrate_tail<F: FnMut(f64) -> f64>(
    mut f: F,
    a: f64,
    scale: f64,
    p: f64,
    opts: QuadOptions,
) -> Result<QuadResult> {
    assert!(p > 1.0 && scale > 0.0);
    let m = 1.0 / (p - 1.0);
    integrate(
        |v| {
            let vm = v.powf(-m);
            let u = a + scale * (vm - 1.0);
            if !u.is_finite() {
                return 0.0;
            }
            f(u) * scale * m * vm / v
        },
        0.0,
        1.0,
        opts,
    )
}

/// `∫_a^b f`, where `f` behaves like `(b - x)^{β-1}` near `b`.
///
/// Substitutes `x = b - (b-a) w^{1/β}` so the integrand is smooth at `w = 0`.
/// `f` receives `x` and the exact distance `b - x`.
pub fn integrate_right_power<F: FnMut(f64, f64) -> f64>(
    mut f: F,
    a: f64,
    b: f64,
    beta: f64,
    opts: QuadOptions,
) -> Result<QuadResult> {
    assert!(beta > 0.0);
    let k = 1.0 / beta;
    let len = b - a;
    integrate(
        |w| {
            let gap = len * w.powf(k);
            f(b - gap, gap) * len * k * w.powf(k - 1.0)
        },
        0.0,
        1.0,
        opts,
    )
}
