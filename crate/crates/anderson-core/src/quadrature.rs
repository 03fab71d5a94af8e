//! One-dimensional quadrature: globally adaptive Gauss–Kronrod (7/15) with an
//! error estimate, and Gauss–Legendre rules for smooth product integrals.

use std::collections::BinaryHeap;
use std::cmp::Ordering;

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
    pub evaluations: usize,
}

impl QuadResult {
    pub fn relative_error(&self) -> f64 {
        if self.value == 0.0 {
            self.error
        } else {
            self.error / self.value.abs()
        }
    }
}

fn gk15<F: FnMut(f64) -> f64>(f: &mut F, a: f64, b: f64) -> (f64, f64) {
    let center = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let fc = f(center);
    let mut kronrod = fc * WGK[7];
    let mut gauss = fc * WG[3];
    for j in 0..7 {
        let dx = half * XGK[j];
        let s = f(center - dx) + f(center + dx);
        kronrod += WGK[j] * s;
        if j % 2 == 1 {
            gauss += WG[j / 2] * s;
        }
    }
    let value = kronrod * half;
    let error = ((kronrod - gauss) * half).abs();
    (value, error)
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

/// Adaptive integral of `f` over `[a, b]`, refined until the summed error
/// estimate is below `max(abs_tol, rel_tol·|value|)` or the segment budget
/// is exhausted. The caller inspects `error`.
pub fn integrate<F: FnMut(f64) -> f64>(f: F, a: f64, b: f64, abs_tol: f64, rel_tol: f64) -> QuadResult {
    integrate_with_breaks(f, &[a, b], abs_tol, rel_tol)
}

/// As [`integrate`], starting from the panels delimited by `breaks`
/// (ascending), which should include known kinks and singular points.
pub fn integrate_with_breaks<F: FnMut(f64) -> f64>(
    mut f: F,
    breaks: &[f64],
    abs_tol: f64,
    rel_tol: f64,
) -> QuadResult {
    const MAX_SEGMENTS: usize = 4000;
    let mut heap = BinaryHeap::new();
    let mut value = 0.0;
    let mut error = 0.0f64;
    let mut evaluations = 0;
    for w in breaks.windows(2) {
        if w[1] <= w[0] {
            continue;
        }
        let (v, e) = gk15(&mut f, w[0], w[1]);
        evaluations += 15;
        value += v;
        error += e;
        heap.push(Segment { a: w[0], b: w[1], value: v, error: e });
    }
    while error > abs_tol.max(rel_tol * value.abs()) && heap.len() < MAX_SEGMENTS {
        let Some(worst) = heap.pop() else { break };
        let mid = 0.5 * (worst.a + worst.b);
        if mid <= worst.a || mid >= worst.b {
            heap.push(worst);
            break;
        }
        let (v1, e1) = gk15(&mut f, worst.a, mid);
        let (v2, e2) = gk15(&mut f, mid, worst.b);
        evaluations += 30;
        value += v1 + v2 - worst.value;
        error += e1 + e2 - worst.error;
        heap.push(Segment { a: worst.a, b: mid, value: v1, error: e1 });
        heap.push(Segment { a: mid, b: worst.b, value: v2, error: e2 });
    }
    // Re-sum to shed accumulated rounding from the running updates.
    let mut segs: Vec<Segment> = heap.into_vec();
    segs.sort_by(|x, y| x.a.total_cmp(&y.a));
    let value = segs.iter().map(|s| s.value).sum();
    let error = segs.iter().map(|s| s.error).sum();
    QuadResult { value, error, evaluations }
}

/// Gauss–Legendre nodes and weights on `[-1, 1]`.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    let m = n.div_ceil(2);
    for i in 0..m {
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (p, d) = legendre_with_derivative(n, x);
            dp = d;
            let dx = p / d;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        let (_, d) = legendre_with_derivative(n, x);
        dp = if d != 0.0 { d } else { dp };
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        nodes[i] = -x;
        nodes[n - 1 - i] = x;
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    (nodes, weights)
}

fn legendre_with_derivative(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    if n == 0 {
        return (1.0, 0.0);
    }
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    let d = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}

/// Fixed Gauss–Legendre rule mapped to `[a, b]`.
#[derive(Debug, Clone)]
pub struct GaussRule {
    nodes: Vec<f64>,
    weights: Vec<f64>,
}

impl GaussRule {
    pub fn new(n: usize) -> Self {
        let (nodes, weights) = gauss_legendre(n);
        Self { nodes, weights }
    }

    pub fn integrate<F: FnMut(f64) -> f64>(&self, mut f: F, a: f64, b: f64) -> f64 {
        let c = 0.5 * (a + b);
        let h = 0.5 * (b - a);
        self.nodes
            .iter()
            .zip(&self.weights)
            .map(|(&x, &w)| w * f(c + h * x))
            .sum::<f64>()
            * h
    }

    /// Sum of the rule over consecutive panels.
    pub fn integrate_panels<F: FnMut(f64) -> f64>(&self, mut f: F, breaks: &[f64]) -> f64 {
        breaks
            .windows(2)
            .map(|w| self.integrate(&mut f, w[0], w[1]))
            .sum()
    }
}
