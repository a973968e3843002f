//! Gauss-Legendre rules and graded composite rules on the unit interval.

use std::sync::OnceLock;

/// Largest Gauss-Legendre order kept in the rule table.
pub const MAX_GAUSS_ORDER: usize = 32;

/// Gauss-Legendre rule on `[0, 1]` (weights sum to one).
#[derive(Debug, Clone)]
pub struct GaussRule {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl GaussRule {
    pub fn order(&self) -> usize {
        self.nodes.len()
    }

    /// Integral of `f` over `[a, b]`.
    pub fn integrate(&self, a: f64, b: f64, mut f: impl FnMut(f64) -> f64) -> f64 {
        let h = b - a;
        self.nodes
            .iter()
            .zip(&self.weights)
            .map(|(&t, &w)| w * f(a + h * t))
            .sum::<f64>()
            * h
    }
}

fn compute_rule(n: usize) -> GaussRule {
    // Newton iteration on P_n with the Tricomi initial guess.
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    for i in 0..n.div_ceil(2) {
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
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
        // map from [-1, 1] to [0, 1]
        nodes[i] = 0.5 * (1.0 - x);
        nodes[n - 1 - i] = 0.5 * (1.0 + x);
        weights[i] = 0.5 * w;
        weights[n - 1 - i] = 0.5 * w;
    }
    GaussRule { nodes, weights }
}

fn legendre(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    let d = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}

/// Gauss-Legendre rule of the given order (`1..=MAX_GAUSS_ORDER`).
pub fn gauss(order: usize) -> &'static GaussRule {
    static TABLE: OnceLock<Vec<GaussRule>> = OnceLock::new();
    let table = TABLE.get_or_init(|| (1..=MAX_GAUSS_ORDER).map(compute_rule).collect());
    assert!(
        (1..=MAX_GAUSS_ORDER).contains(&order),
        "Gauss order {order} out of range"
    );
    &table[order - 1]
}

/// Order of a Gauss rule integrating `ln|x - y|`-type integrands to about
/// machine precision on an interval of length `len` whose nearest
/// singularity is at distance `dist`.
pub fn order_for_separation(len: f64, dist: f64) -> usize {
    if dist <= 0.0 {
        return 16;
    }
    // Bernstein ellipse parameter for a singularity on the interval axis.
    let a = 1.0 + 2.0 * dist / len;
    let rho = a + (a * a - 1.0).sqrt();
    let n = (36.0 / (2.0 * rho.ln())).ceil() as usize;
    n.clamp(2, 16)
}

/// Composite rule on `[0, 1]` with panels graded geometrically toward both
/// endpoints; exposes nodes and weights (weights sum to one).
#[derive(Debug, Clone)]
pub struct GradedRule {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl GradedRule {
    /// `levels` panels of ratio `sigma` toward each end plus a central
    /// panel pair, each integrated with `order` Gauss points.
    pub fn two_sided(levels: usize, sigma: f64, order: usize) -> Self {
        let rule = gauss(order);
        let mut breaks = vec![0.0];
        let mut left = Vec::with_capacity(levels);
        let mut x = 0.5;
        for _ in 0..levels {
            x *= sigma;
            left.push(x);
        }
        left.reverse();
        breaks.extend(&left);
        breaks.push(0.5);
        let right: Vec<f64> = left.iter().rev().map(|&t| 1.0 - t).collect();
        breaks.extend(right);
        breaks.push(1.0);
        let mut nodes = Vec::new();
        let mut weights = Vec::new();
        for w in breaks.windows(2) {
            let (a, b) = (w[0], w[1]);
            for (&t, &wt) in rule.nodes.iter().zip(&rule.weights) {
                nodes.push(a + (b - a) * t);
                weights.push((b - a) * wt);
            }
        }
        Self { nodes, weights }
    }
}

/// Chebyshev-Lobatto points on `[0, 1]` (degree `q` gives `q + 1` points,
/// including both endpoints).
pub fn lobatto_points(q: usize) -> Vec<f64> {
    (0..=q)
        .map(|i| 0.5 * (1.0 - (std::f64::consts::PI * i as f64 / q as f64).cos()))
        .map(|t: f64| if t.abs() < 1e-17 { 0.0 } else { t })
        .collect()
}

/// Barycentric weights for interpolation on the given nodes.
pub fn barycentric_weights(nodes: &[f64]) -> Vec<f64> {
    (0..nodes.len())
        .map(|j| {
            let prod: f64 = nodes
                .iter()
                .enumerate()
                .filter(|&(k, _)| k != j)
                .map(|(_, &xk)| nodes[j] - xk)
                .product();
            1.0 / prod
        })
        .collect()
}

/// Evaluates the interpolant through `(nodes, values)` at `x`.
pub fn barycentric_eval(nodes: &[f64], bary: &[f64], values: &[f64], x: f64) -> f64 {
    let mut num = 0.0;
    let mut den = 0.0;
    for ((&xj, &wj), &fj) in nodes.iter().zip(bary).zip(values) {
        let d = x - xj;
        if d == 0.0 {
            return fj;
        }
        let t = wj / d;
        num += t * fj;
        den += t;
    }
    num / den
}
