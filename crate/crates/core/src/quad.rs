//! Gauss-Legendre rules and the endpoint-graded substitutions used by the
//! operator quadrature.

use std::f64::consts::PI;
use std::sync::OnceLock;

/// Nodes and weights on `[0, 1]`.
#[derive(Debug, Clone)]
pub struct GaussRule {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl GaussRule {
    /// Legendre roots by Newton iteration from the Chebyshev guess.
    pub fn new(order: usize) -> Self {
        assert!(order >= 1);
        let mut nodes = vec![0.0; order];
        let mut weights = vec![0.0; order];
        let n = order as f64;
        for i in 0..order.div_ceil(2) {
            let mut z = (PI * (i as f64 + 0.75) / (n + 0.5)).cos();
            let mut dp = 0.0;
            for _ in 0..100 {
                let mut p0 = 1.0;
                let mut p1 = 0.0;
                for j in 1..=order {
                    let p2 = p1;
                    p1 = p0;
                    let jf = j as f64;
                    p0 = ((2.0 * jf - 1.0) * z * p1 - (jf - 1.0) * p2) / jf;
                }
                dp = n * (z * p0 - p1) / (z * z - 1.0);
                let dz = p0 / dp;
                z -= dz;
                if dz.abs() < 1e-15 {
                    break;
                }
            }
            let w = 2.0 / ((1.0 - z * z) * dp * dp);
            // map [-1, 1] -> [0, 1]
            nodes[i] = 0.5 * (1.0 - z);
            nodes[order - 1 - i] = 0.5 * (1.0 + z);
            weights[i] = 0.5 * w;
            weights[order - 1 - i] = 0.5 * w;
        }
        GaussRule { nodes, weights }
    }

    pub fn order(&self) -> usize {
        self.nodes.len()
    }
}

const CACHED_ORDERS: [usize; 6] = [4, 8, 16, 32, 64, 128];

fn cache() -> &'static Vec<GaussRule> {
    static RULES: OnceLock<Vec<GaussRule>> = OnceLock::new();
    RULES.get_or_init(|| CACHED_ORDERS.iter().map(|&o| GaussRule::new(o)).collect())
}

/// Smallest cached rule with at least `min_order` nodes (capped at 128).
pub fn rule(min_order: usize) -> &'static GaussRule {
    let rules = cache();
    rules
        .iter()
        .find(|r| r.order() >= min_order)
        .unwrap_or_else(|| rules.last().unwrap())
}

/// Composite Gauss-Legendre over `[a, b]` with `panels` equal panels.
pub fn integrate<F: FnMut(f64) -> f64>(
    mut f: F,
    a: f64,
    b: f64,
    panels: usize,
    order: usize,
) -> f64 {
    if b <= a {
        return 0.0;
    }
    let g = rule(order);
    let panels = panels.max(1);
    let h = (b - a) / panels as f64;
    let mut sum = 0.0;
    for p in 0..panels {
        let lo = a + h * p as f64;
        let mut s = 0.0;
        for (x, w) in g.nodes.iter().zip(&g.weights) {
            s += w * f(lo + h * x);
        }
        sum += s * h;
    }
    sum
}

/// Integral over `[a, b]` after the substitution
/// `r = a + (b - a)(1 - cos(pi v)) / 2`, which clusters nodes at both
/// endpoints and turns square-root endpoint behaviour into smooth integrands.
pub fn integrate_cosine_graded<F: FnMut(f64) -> f64>(
    mut f: F,
    a: f64,
    b: f64,
    panels: usize,
    order: usize,
) -> f64 {
    if b <= a {
        return 0.0;
    }
    let half = 0.5 * (b - a);
    integrate(
        |v| {
            let r = a + half * (1.0 - (PI * v).cos());
            f(r) * half * PI * (PI * v).sin()
        },
        0.0,
        1.0,
        panels,
        order,
    )
}

/// `int_0^b r^(alpha-1) g(r) dr` via `r = b s^(1/alpha)`, which removes the
/// algebraic singularity at the origin exactly.
pub fn integrate_power_graded<F: FnMut(f64) -> f64>(
    mut g: F,
    b: f64,
    alpha: f64,
    panels: usize,
    order: usize,
) -> f64 {
    if b <= 0.0 {
        return 0.0;
    }
    let p = 1.0 / alpha;
    let scale = b.powf(alpha) / alpha;
    scale * integrate(|s| g(b * s.powf(p)), 0.0, 1.0, panels, order)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rule_integrates_polynomials_exactly() {
        let g = GaussRule::new(8);
        // degree 15 is exact for 8 nodes
        let s: f64 = g
            .nodes
            .iter()
            .zip(&g.weights)
            .map(|(x, w)| w * x.powi(15))
            .sum();
        assert!((s - 1.0 / 16.0).abs() < 1e-15);
        let total: f64 = g.weights.iter().sum();
        assert!((total - 1.0).abs() < 1e-14);
    }

    #[test]
    fn cosine_grading_handles_sqrt_endpoints() {
        // int_0^1 sqrt(x(1-x)) dx = pi/8
        let v = integrate_cosine_graded(|x| (x * (1.0 - x)).max(0.0).sqrt(), 0.0, 1.0, 2, 16);
        assert!((v - PI / 8.0).abs() < 1e-12, "{v}");
    }

    #[test]
    fn power_grading_is_exact_for_constants() {
        // int_0^2 r^(-1/2) dr = 2 sqrt(2)
        let v = integrate_power_graded(|_| 1.0, 2.0, 0.5, 1, 8);
        assert!((v - 2.0 * 2f64.sqrt()).abs() < 1e-13);
    }
}
