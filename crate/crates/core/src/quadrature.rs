//! Quadrature rules.
//!
//! [`GaussLegendre`] with power-law grading is what the library uses for
//! kernel cell integrals. [`tanh_sinh`] is a double-exponential rule that
//! copes with integrable endpoint singularities without being told their
//! exponents; the tests use it as an independent oracle.

use std::f64::consts::PI;

/// Gauss–Legendre nodes and weights on `[-1, 1]`.
#[derive(Debug, Clone)]
pub struct GaussLegendre {
    nodes: Vec<f64>,
    weights: Vec<f64>,
}

impl GaussLegendre {
    pub fn new(order: usize) -> Self {
        assert!(order >= 1, "Gauss-Legendre order must be positive");
        let n = order;
        let mut nodes = vec![0.0; n];
        let mut weights = vec![0.0; n];
        for i in 0..n.div_ceil(2) {
            // Tricomi initial guess, then Newton on P_n.
            let mut x = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
            let mut dp = 0.0;
            for _ in 0..100 {
                let (p, d) = legendre(n, x);
                dp = d;
                let dx = p / d;
                x -= dx;
                if dx.abs() < 1e-16 {
                    break;
                }
            }
            let (_, d) = legendre(n, x);
            if d != 0.0 {
                dp = d;
            }
            let w = 2.0 / ((1.0 - x * x) * dp * dp);
            nodes[i] = -x;
            nodes[n - 1 - i] = x;
            weights[i] = w;
            weights[n - 1 - i] = w;
        }
        Self { nodes, weights }
    }

    pub fn order(&self) -> usize {
        self.nodes.len()
    }

    /// `∫_a^b f`.
    pub fn integrate<F: FnMut(f64) -> f64>(&self, a: f64, b: f64, mut f: F) -> f64 {
        let half = 0.5 * (b - a);
        let mid = 0.5 * (a + b);
        let mut acc = 0.0;
        for (x, w) in self.nodes.iter().zip(&self.weights) {
            acc += w * f(mid + half * x);
        }
        acc * half
    }

    /// `∫_a^b f` where `f` behaves like `(s - a)^β` near `a` (β > -1).
    ///
    /// Substitutes `s = a + (b-a) v^{1/(β+1)}`, which turns the endpoint
    /// power into a constant.
    pub fn integrate_left_singular<F: FnMut(f64) -> f64>(
        &self,
        a: f64,
        b: f64,
        beta: f64,
        mut f: F,
    ) -> f64 {
        let k = 1.0 / (beta + 1.0);
        let len = b - a;
        let scale = len * k;
        self.integrate(0.0, 1.0, |v| {
            if v <= 0.0 {
                return 0.0;
            }
            let vk = v.powf(k);
            scale * vk / v * f(a + len * vk)
        })
    }

    /// `∫_a^b f` where `f` behaves like `(b - s)^β` near `b` (β > -1).
    pub fn integrate_right_singular<F: FnMut(f64) -> f64>(
        &self,
        a: f64,
        b: f64,
        beta: f64,
        mut f: F,
    ) -> f64 {
        let k = 1.0 / (beta + 1.0);
        let len = b - a;
        let scale = len * k;
        self.integrate(0.0, 1.0, |v| {
            if v <= 0.0 {
                return 0.0;
            }
            let vk = v.powf(k);
            scale * vk / v * f(b - len * vk)
        })
    }
}

// (P_n(x), P_n'(x)) by the three-term recurrence.
fn legendre(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    if n == 0 {
        return (1.0, 0.0);
    }
    for k in 2..=n {
        let k = k as f64;
        let p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
        p0 = p1;
        p1 = p2;
    }
    let dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, dp)
}

/// Tanh–sinh quadrature of `f` over `[a, b]`, refined by halving the step
/// until two successive levels agree to `tol` (relative), at most 12 times.
/// Never evaluates `f` exactly at the endpoints.
pub fn tanh_sinh<F: FnMut(f64) -> f64>(a: f64, b: f64, tol: f64, mut f: F) -> f64 {
    const T_MAX: f64 = 4.5;
    let half = 0.5 * (b - a);
    // x = tanh(π/2 sinh t); the distance 1 - |x| is formed without
    // cancellation so that abscissae next to a singular endpoint stay exact.
    let eval = |t: f64, f: &mut F| -> f64 {
        let u = 0.5 * PI * t.sinh();
        let cu = u.cosh();
        let gap = 1.0 / (u.abs().exp() * cu);
        if gap <= 0.0 {
            return 0.0;
        }
        let point = if u >= 0.0 {
            b - half * gap
        } else {
            a + half * gap
        };
        let w = 0.5 * PI * t.cosh() / (cu * cu);
        let v = f(point);
        if v.is_finite() {
            w * v
        } else {
            0.0
        }
    };
    let mut h = 0.5;
    let mut sum = eval(0.0, &mut f);
    let mut k = 1;
    while k as f64 * h <= T_MAX {
        let t = k as f64 * h;
        sum += eval(t, &mut f) + eval(-t, &mut f);
        k += 1;
    }
    let mut estimate = sum * h * half;
    for _ in 0..12 {
        h *= 0.5;
        let mut k = 1;
        while k as f64 * h <= T_MAX {
            let t = k as f64 * h;
            sum += eval(t, &mut f) + eval(-t, &mut f);
            k += 2;
        }
        let next = sum * h * half;
        let done = (next - estimate).abs() <= tol * next.abs().max(1e-300);
        estimate = next;
        if done {
            break;
        }
    }
    estimate
}
