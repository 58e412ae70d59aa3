//! One-dimensional quadrature: adaptive Gauss-Kronrod panels, power-law
//! endpoint substitutions, and Gauss-Legendre node generation.

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

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Integral {
    pub value: f64,
    pub abs_err: f64,
    pub evals: usize,
}

impl Integral {
    pub fn zero() -> Self {
        Integral { value: 0.0, abs_err: 0.0, evals: 0 }
    }

    pub fn add(self, other: Integral) -> Integral {
        Integral {
            value: self.value + other.value,
            abs_err: self.abs_err + other.abs_err,
            evals: self.evals + other.evals,
        }
    }

    pub fn scale(self, c: f64) -> Integral {
        Integral { value: self.value * c, abs_err: self.abs_err * c.abs(), evals: self.evals }
    }
}

fn kronrod15<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> (f64, f64) {
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
    let err = ((kronrod - gauss) * half).abs();
    (value, err)
}

struct Panel {
    a: f64,
    b: f64,
    value: f64,
    err: f64,
}

impl PartialEq for Panel {
    fn eq(&self, other: &Self) -> bool {
        self.err == other.err
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
        self.err.total_cmp(&other.err)
    }
}

/// Globally adaptive Gauss-Kronrod (7/15) integration.
#[derive(Clone, Copy, Debug)]
pub struct Adaptive {
    pub rel_tol: f64,
    pub abs_tol: f64,
    pub max_panels: usize,
    /// Number of equal panels the interval is split into before adapting.
    pub initial_panels: usize,
}

impl Default for Adaptive {
    fn default() -> Self {
        Adaptive { rel_tol: 1e-10, abs_tol: 1e-300, max_panels: 2000, initial_panels: 4 }
    }
}

impl Adaptive {
    pub fn with_rel_tol(rel_tol: f64) -> Self {
        Adaptive { rel_tol, ..Default::default() }
    }

    pub fn integrate<F: Fn(f64) -> f64>(&self, f: F, a: f64, b: f64) -> Integral {
        if a == b {
            return Integral::zero();
        }
        let (lo, hi, sign) = if a < b { (a, b, 1.0) } else { (b, a, -1.0) };
        let n0 = self.initial_panels.max(1);
        let width = (hi - lo) / n0 as f64;
        let mut heap = BinaryHeap::with_capacity(self.max_panels + n0);
        let mut total = 0.0;
        let mut total_err = 0.0;
        for i in 0..n0 {
            let pa = lo + width * i as f64;
            let pb = if i + 1 == n0 { hi } else { lo + width * (i + 1) as f64 };
            let (v, e) = kronrod15(&f, pa, pb);
            total += v;
            total_err += e;
            heap.push(Panel { a: pa, b: pb, value: v, err: e });
        }
        let mut evals = 15 * n0;
        while total_err > self.abs_tol.max(self.rel_tol * total.abs()) && heap.len() < self.max_panels
        {
            let worst = match heap.pop() {
                Some(p) => p,
                None => break,
            };
            let mid = 0.5 * (worst.a + worst.b);
            if mid <= worst.a || mid >= worst.b {
                // Interval exhausted at machine precision.
                heap.push(worst);
                break;
            }
            let (v1, e1) = kronrod15(&f, worst.a, mid);
            let (v2, e2) = kronrod15(&f, mid, worst.b);
            evals += 30;
            total += v1 + v2 - worst.value;
            total_err += e1 + e2 - worst.err;
            heap.push(Panel { a: worst.a, b: mid, value: v1, err: e1 });
            heap.push(Panel { a: mid, b: worst.b, value: v2, err: e2 });
        }
        // Re-sum to remove drift from the running updates.
        let mut panels: Vec<Panel> = heap.into_vec();
        panels.sort_by(|x, y| x.a.total_cmp(&y.a));
        let value: f64 = panels.iter().map(|p| p.value).sum();
        let abs_err: f64 = panels.iter().map(|p| p.err).sum();
        Integral { value: sign * value, abs_err, evals }
    }

    /// `∫_a^b f(s) ds` for `0 < a < b`, integrated on the `ln s` axis.
    pub fn integrate_log_axis<F: Fn(f64) -> f64>(&self, f: F, a: f64, b: f64) -> Integral {
        debug_assert!(a > 0.0 && b > 0.0);
        self.integrate(
            |v| {
                let s = v.exp();
                f(s) * s
            },
            a.ln(),
            b.ln(),
        )
    }

    /// `∫_0^b s^gamma h(s) ds` for `gamma > -1` and regular `h`, via the
    /// substitution `s = b u^(1/(gamma+1))`.
    pub fn integrate_power_origin<H: Fn(f64) -> f64>(&self, h: H, gamma: f64, b: f64) -> Integral {
        debug_assert!(gamma > -1.0 && b > 0.0);
        let beta = gamma + 1.0;
        let inv_beta = 1.0 / beta;
        let scale = b.powf(beta) / beta;
        self.integrate(|u| h(b * u.powf(inv_beta)), 0.0, 1.0).scale(scale)
    }

    /// `∫_c^∞ s^gamma h(s) ds` for `gamma < -1`, `c > 0`, `h` bounded at
    /// infinity, via `w = 1/s`.
    pub fn integrate_power_infinity<H: Fn(f64) -> f64>(&self, h: H, gamma: f64, c: f64) -> Integral {
        debug_assert!(gamma < -1.0 && c > 0.0);
        // s = 1/w, ds = dw / w^2, s^gamma = w^(-gamma)
        self.integrate_power_origin(|w| h(1.0 / w), -gamma - 2.0, 1.0 / c)
    }

    /// Sums adaptive integrals over consecutive breakpoints.
    pub fn integrate_pieces<F: Fn(f64) -> f64>(&self, f: F, breaks: &[f64]) -> Integral {
        breaks
            .windows(2)
            .map(|w| self.integrate(&f, w[0], w[1]))
            .fold(Integral::zero(), Integral::add)
    }
}


/// Gauss-Legendre nodes and weights on `[-1, 1]`.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n >= 1);
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    let m = n.div_ceil(2);
    for i in 0..m {
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, x);
            for k in 2..=n {
                let p2 = ((2 * k - 1) as f64 * x * p1 - (k - 1) as f64 * p0) / k as f64;
                p0 = p1;
                p1 = p2;
            }
            let p = if n == 1 { x } else { p1 };
            let pm1 = if n == 1 { 1.0 } else { p0 };
            dp = n as f64 * (x * p - pm1) / (x * x - 1.0);
            let dx = p / dp;
            x -= dx;
            if dx.abs() < 1e-15 {
                break;
            }
        }
        nodes[i] = -x;
        nodes[n - 1 - i] = x;
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    if n % 2 == 1 {
        nodes[n / 2] = 0.0;
    }
    (nodes, weights)
}

/// Composite Gauss-Legendre rule on `[a, b]` split into `panels` equal panels.
pub fn composite_gauss_legendre(a: f64, b: f64, panels: usize, order: usize) -> (Vec<f64>, Vec<f64>) {
    let (gx, gw) = gauss_legendre(order);
    let width = (b - a) / panels as f64;
    let mut nodes = Vec::with_capacity(panels * order);
    let mut weights = Vec::with_capacity(panels * order);
    for p in 0..panels {
        let center = a + width * (p as f64 + 0.5);
        for (x, w) in gx.iter().zip(&gw) {
            nodes.push(center + 0.5 * width * x);
            weights.push(0.5 * width * w);
        }
    }
    (nodes, weights)
}

/// Pairwise (tree) summation; the result does not depend on thread count
/// when the input order is fixed.
pub fn pairwise_sum(values: &[f64]) -> f64 {
    const LEAF: usize = 64;
    if values.len() <= LEAF {
        return values.iter().sum();
    }
    let mid = values.len() / 2;
    pairwise_sum(&values[..mid]) + pairwise_sum(&values[mid..])
}
