//! Globally adaptive Gauss–Kronrod (7/15) integration on a finite interval.
//!
//! Each panel is integrated by the 15-point Kronrod rule; the difference to
//! the embedded 7-point Gauss rule is the panel error estimate. The panel
//! with the largest estimate is bisected until the summed estimate meets
//! `max(abs_tol, rel_tol·|I|)` or the evaluation budget runs out.

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

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct QuadOptions {
    pub abs_tol: f64,
    pub rel_tol: f64,
    pub max_evals: usize,
}

impl Default for QuadOptions {
    fn default() -> Self {
        Self {
            abs_tol: 1e-12,
            rel_tol: 1e-12,
            max_evals: 1_000_000,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct QuadResult {
    pub value: f64,
    pub error: f64,
    pub evals: usize,
}

/// Kronrod estimate and `|K − G|` on `[a, b]`.
pub fn gauss_kronrod_15<F: FnMut(f64) -> f64>(f: &mut F, a: f64, b: f64) -> (f64, f64) {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let fc = f(c);
    let mut k = WGK[7] * fc;
    let mut g = WG[3] * fc;
    for i in 0..7 {
        let dx = h * XGK[i];
        let s = f(c - dx) + f(c + dx);
        k += WGK[i] * s;
        if i % 2 == 1 {
            g += WG[i / 2] * s;
        }
    }
    (k * h, ((k - g) * h).abs())
}

struct Panel {
    a: f64,
    b: f64,
    value: f64,
    error: f64,
}

impl PartialEq for Panel {
    fn eq(&self, other: &Self) -> bool {
        self.error == other.error
    }
}
impl Eq for Panel {}
impl PartialOrd for Panel {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Panel {
    fn cmp(&self, other: &Self) -> Ordering {
        self.error.total_cmp(&other.error)
    }
}

/// Adaptive integral of `f` over `[a, b]`.
pub fn integrate<F: FnMut(f64) -> f64>(mut f: F, a: f64, b: f64, opts: QuadOptions) -> Result<QuadResult> {
    if a == b {
        return Ok(QuadResult { value: 0.0, error: 0.0, evals: 0 });
    }
    let (value, error) = gauss_kronrod_15(&mut f, a, b);
    let mut evals = 15;
    let mut heap = BinaryHeap::new();
    heap.push(Panel { a, b, value, error });
    let (mut total, mut err) = (value, error);
    loop {
        if !total.is_finite() || !err.is_finite() {
            return Err(Error::Quadrature { estimate: total, error: err, evals });
        }
        if err <= opts.abs_tol.max(opts.rel_tol * total.abs()) {
            return Ok(QuadResult { value: total, error: err, evals });
        }
        if evals + 30 > opts.max_evals {
            return Err(Error::Quadrature { estimate: total, error: err, evals });
        }
        let worst = heap.pop().expect("panel heap is never empty");
        let mid = 0.5 * (worst.a + worst.b);
        let (v1, e1) = gauss_kronrod_15(&mut f, worst.a, mid);
        let (v2, e2) = gauss_kronrod_15(&mut f, mid, worst.b);
        evals += 30;
        total += v1 + v2 - worst.value;
        err += e1 + e2 - worst.error;
        heap.push(Panel { a: worst.a, b: mid, value: v1, error: e1 });
        heap.push(Panel { a: mid, b: worst.b, value: v2, error: e2 });
        // refresh the running sums to keep cancellation drift out of the test
        if heap.len() % 64 == 0 {
            total = heap.iter().map(|p| p.value).sum();
            err = heap.iter().map(|p| p.error).sum();
        }
    }
}

/// Fixed composite rule: `panels` equal Kronrod panels, no adaptivity.
pub fn composite_kronrod<F: FnMut(f64) -> f64>(mut f: F, a: f64, b: f64, panels: usize) -> QuadResult {
    let h = (b - a) / panels as f64;
    let (mut value, mut error) = (0.0, 0.0);
    for p in 0..panels {
        let (v, e) = gauss_kronrod_15(&mut f, a + p as f64 * h, a + (p + 1) as f64 * h);
        value += v;
        error += e;
    }
    QuadResult { value, error, evals: 15 * panels }
}
