//! Integral continuity modulus `omega_q(t)` and the Dini integral
//! `int_0^1 omega_q(t) / t^{1+s} dt`.

use std::fmt;

use super::{SphereKernel, TWO_PI};
use crate::error::{Error, Result};

/// Sampling density for the modulus search and the dyadic level count.
#[derive(Debug, Clone, PartialEq)]
pub struct DiniConfig {
    /// Directions of the perturbation `h`.
    pub directions: usize,
    /// Magnitudes of `h` in `(0, t]`.
    pub magnitudes: usize,
    /// Midpoint nodes for the integral over `S^1`.
    pub theta_nodes: usize,
    /// Dyadic levels `t_k = 2^{-k}`, `k = 1..=levels`.
    pub levels: usize,
}

impl Default for DiniConfig {
    fn default() -> Self {
        DiniConfig {
            directions: 16,
            magnitudes: 4,
            theta_nodes: 2048,
            levels: 12,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DiniVerdict {
    Satisfies,
    Fails,
    Inconclusive,
}

impl fmt::Display for DiniVerdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            DiniVerdict::Satisfies => "satisfies",
            DiniVerdict::Fails => "fails",
            DiniVerdict::Inconclusive => "inconclusive",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DiniReport {
    pub q: f64,
    pub s: f64,
    /// Decreasing dyadic levels `2^{-1}, ..., 2^{-K}`.
    pub t_grid: Vec<f64>,
    /// Grid estimate of `omega_q` at each level (nondecreasing in `t`).
    pub omega: Vec<f64>,
    /// Integral over `[t_k, 1]` for each level.
    pub partial_integrals: Vec<f64>,
    /// Estimated `int_0^1`, or `None` when the extrapolated tail diverges.
    pub integral_estimate: Option<f64>,
    /// Extrapolated contribution of `[0, t_K]`.
    pub tail_estimate: f64,
    pub verdict: DiniVerdict,
}

/// Grid lower bound for `omega_q(t)`; requires `0 < t < 1`.
///
/// On `S^1` the supremum over `|h| <= t` is searched on
/// `directions x magnitudes` perturbations followed by one local refinement
/// pass around the best one. On `S^0` every `x' + h` keeps the sign of `x'`,
/// so the modulus vanishes identically.
pub fn dini_modulus(kernel: &SphereKernel, q: f64, t: f64, cfg: &DiniConfig) -> Result<f64> {
    if !(q >= 1.0) || !q.is_finite() {
        return Err(Error::param(
            "q",
            format!("exponent must lie in [1, inf), got {q}"),
        ));
    }
    if !(t > 0.0) {
        return Err(Error::param(
            "t",
            format!("perturbation radius must be positive, got {t}"),
        ));
    }
    if t >= 1.0 {
        return Err(Error::param(
            "t",
            "perturbation radius must be < 1 so that x' + h stays off the origin",
        ));
    }
    if kernel.dim() == 1 {
        return Ok(0.0);
    }
    let m = cfg.theta_nodes.max(8);
    let dtheta = TWO_PI / m as f64;
    let nodes: Vec<(f64, f64, f64)> = (0..m)
        .map(|i| {
            let th = (i as f64 + 0.5) * dtheta;
            (th.cos(), th.sin(), kernel.eval_angle(th))
        })
        .collect();
    let integral = |psi: f64, rho: f64| -> f64 {
        let (hx, hy) = (rho * psi.cos(), rho * psi.sin());
        nodes
            .iter()
            .map(|&(c, s, v)| (kernel.eval_direction([c + hx, s + hy]) - v).abs().powf(q))
            .sum::<f64>()
            * dtheta
    };

    let dirs = cfg.directions.max(1);
    let mags = cfg.magnitudes.max(1);
    let dpsi = TWO_PI / dirs as f64;
    let drho = t / mags as f64;
    let mut best = (0.0, t, f64::NEG_INFINITY);
    for j in 0..dirs {
        let psi = dpsi * j as f64;
        for l in 1..=mags {
            let rho = drho * l as f64;
            let v = integral(psi, rho);
            if v > best.2 {
                best = (psi, rho, v);
            }
        }
    }
    let (psi0, rho0, _) = best;
    for dp in [-0.5, 0.0, 0.5] {
        for dr in [-0.5, 0.0, 0.5] {
            if dp == 0.0 && dr == 0.0 {
                continue;
            }
            let rho = (rho0 + dr * drho).clamp(drho * 0.5, t);
            let psi = psi0 + dp * dpsi;
            let v = integral(psi, rho);
            if v > best.2 {
                best = (psi, rho, v);
            }
        }
    }
    Ok(best.2.max(0.0).powf(1.0 / q))
}

/// Dini integral of a kernel on the dyadic grid.
pub fn dini_integral(
    kernel: &SphereKernel,
    q: f64,
    s: f64,
    cfg: &DiniConfig,
) -> Result<DiniReport> {
    let n = kernel.dim() as f64;
    if !(s >= 0.0 && s < n) {
        return Err(Error::param(
            "s",
            format!("order must lie in [0, {n}), got {s}"),
        ));
    }
    dini_integral_from_modulus(|t| dini_modulus(kernel, q, t, cfg), q, s, cfg.levels)
}

/// Dini integral for an arbitrary modulus; used directly with synthetic
/// moduli.
///
/// Between consecutive levels the modulus is interpolated as a power law
/// (the trapezoid rule in `log t` applied to `log omega`), which integrates
/// `omega(t) / t^{1+s}` exactly for pure powers. `[1/2, 1]` and `[0, t_K]`
/// are extrapolated from the first and last cells.
pub fn dini_integral_from_modulus<F>(
    mut omega: F,
    q: f64,
    s: f64,
    levels: usize,
) -> Result<DiniReport>
where
    F: FnMut(f64) -> Result<f64>,
{
    if !(s >= 0.0) {
        return Err(Error::param(
            "s",
            format!("order must be nonnegative, got {s}"),
        ));
    }
    let levels = levels.max(4);
    let t_grid: Vec<f64> = (1..=levels).map(|k| 0.5f64.powi(k as i32)).collect();
    let mut raw = Vec::with_capacity(levels);
    for &t in &t_grid {
        let w = omega(t)?;
        if !w.is_finite() || w < 0.0 {
            return Err(Error::Numeric {
                context: format!("omega({t})"),
                message: format!("modulus must be finite and nonnegative, got {w}"),
            });
        }
        raw.push(w);
    }
    // sup over a growing set: enforce monotonicity from the small-t end
    let mut omega_mono = raw.clone();
    for k in (0..levels - 1).rev() {
        omega_mono[k] = omega_mono[k].max(omega_mono[k + 1]);
    }

    if omega_mono.iter().all(|w| *w == 0.0) {
        return Ok(DiniReport {
            q,
            s,
            t_grid,
            omega: omega_mono,
            partial_integrals: vec![0.0; levels],
            integral_estimate: Some(0.0),
            tail_estimate: 0.0,
            verdict: DiniVerdict::Satisfies,
        });
    }

    let cell = |a: f64, wa: f64, b: f64, wb: f64| -> f64 { power_law_cell(a, wa, b, wb, s) };
    // head [t_1, 1]: continue the first cell's power law
    let p_head = exponent(t_grid[1], omega_mono[1], t_grid[0], omega_mono[0]);
    let w_one = match p_head {
        Some(p) => omega_mono[0] * (1.0 / t_grid[0]).powf(p),
        None => omega_mono[0],
    };
    let mut partial = Vec::with_capacity(levels);
    let mut acc = cell(t_grid[0], omega_mono[0], 1.0, w_one);
    partial.push(acc);
    for k in 1..levels {
        acc += cell(t_grid[k], omega_mono[k], t_grid[k - 1], omega_mono[k - 1]);
        partial.push(acc);
    }

    let t_last = t_grid[levels - 1];
    let w_last = omega_mono[levels - 1];
    let p_tail = exponent(
        t_grid[levels - 1],
        w_last,
        t_grid[levels - 2],
        omega_mono[levels - 2],
    );
    let tail = if w_last == 0.0 {
        Some(0.0)
    } else {
        match p_tail {
            Some(p) if p > s => Some(w_last * t_last.powf(-s) / (p - s)),
            _ => None,
        }
    };

    let ratio = |k: usize| omega_mono[k] / t_grid[k].powf(s);
    let decays = ratio(levels - 1) < ratio(levels - 4);
    let (integral_estimate, verdict) = match tail {
        None => (None, DiniVerdict::Fails),
        Some(tail) => {
            let total = acc + tail;
            let verdict = if !decays {
                DiniVerdict::Fails
            } else if total == 0.0 || tail / total < 1e-3 {
                DiniVerdict::Satisfies
            } else {
                DiniVerdict::Inconclusive
            };
            (Some(total), verdict)
        }
    };
    Ok(DiniReport {
        q,
        s,
        t_grid,
        omega: omega_mono,
        partial_integrals: partial,
        integral_estimate,
        tail_estimate: tail.unwrap_or(f64::INFINITY),
        verdict,
    })
}

/// Power-law exponent through `(a, wa)` and `(b, wb)`, `a < b`.
fn exponent(a: f64, wa: f64, b: f64, wb: f64) -> Option<f64> {
    if wa > 0.0 && wb > 0.0 {
        Some((wb / wa).ln() / (b / a).ln())
    } else {
        None
    }
}

/// `int_a^b omega(t) t^{-1-s} dt` with `omega` a power law through the end
/// values; falls back to the trapezoid rule in `log t` when an end value
/// vanishes.
fn power_law_cell(a: f64, wa: f64, b: f64, wb: f64, s: f64) -> f64 {
    match exponent(a, wa, b, wb) {
        Some(p) => {
            let e = p - s;
            let coef = wa * a.powf(-p);
            if e.abs() < 1e-12 {
                coef * (b / a).ln()
            } else {
                coef * (b.powf(e) - a.powf(e)) / e
            }
        }
        None => 0.5 * (wa * a.powf(-s) + wb * b.powf(-s)) * (b / a).ln(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rotation_lower_bound(phi: f64) -> f64 {
        8.0 * (phi / 2.0).sin().abs()
    }

    fn cfg() -> DiniConfig {
        DiniConfig::default()
    }

    #[test]
    fn constant_kernel_has_zero_modulus() {
        let k = SphereKernel::constant(2, 1.7).unwrap();
        assert_eq!(dini_modulus(&k, 2.0, 0.3, &cfg()).unwrap(), 0.0);
        let r = dini_integral(&k, 1.0, 0.5, &cfg()).unwrap();
        assert_eq!(r.integral_estimate, Some(0.0));
        assert_eq!(r.verdict, DiniVerdict::Satisfies);
    }

    #[test]
    fn one_dimensional_modulus_vanishes() {
        let k = SphereKernel::pair(-1.0, 3.0);
        assert_eq!(dini_modulus(&k, 1.0, 0.9, &cfg()).unwrap(), 0.0);
    }

    #[test]
    fn parameter_errors() {
        let k = SphereKernel::constant(2, 1.0).unwrap();
        assert!(dini_modulus(&k, 1.0, 0.0, &cfg()).is_err());
        assert!(dini_modulus(&k, 1.0, 1.0, &cfg()).is_err());
        assert!(dini_integral(&k, 1.0, 2.0, &cfg()).is_err());
        assert!(dini_integral(&k, 1.0, -0.1, &cfg()).is_err());
    }

    #[test]
    fn synthetic_linear_modulus() {
        let r = dini_integral_from_modulus(Ok, 1.0, 0.0, 12).unwrap();
        assert!((r.integral_estimate.unwrap() - 1.0).abs() < 1e-3);
        assert_eq!(r.verdict, DiniVerdict::Satisfies);
        let r = dini_integral_from_modulus(Ok, 1.0, 0.5, 12).unwrap();
        assert!((r.integral_estimate.unwrap() - 2.0).abs() < 1e-2);
        // omega(t) = t^{0.3} with s = 0.5 diverges
        let r = dini_integral_from_modulus(|t| Ok(t.powf(0.3)), 1.0, 0.5, 12).unwrap();
        assert_eq!(r.verdict, DiniVerdict::Fails);
        assert!(r.integral_estimate.is_none());
    }

    #[test]
    fn cosine_modulus_is_monotone() {
        let k = SphereKernel::cosine(2, 0.0, 1.0, 1).unwrap();
        let a = dini_modulus(&k, 1.0, 0.05, &cfg()).unwrap();
        let b = dini_modulus(&k, 1.0, 0.1, &cfg()).unwrap();
        assert!(a <= b);
    }

    #[test]
    fn rotation_bound_formula() {
        // int_0^{2pi} |cos(theta + phi) - cos(theta)| = 8 |sin(phi/2)|
        let phi = 0.3;
        let m = 200_000;
        let brute: f64 = (0..m)
            .map(|i| {
                let th = (i as f64 + 0.5) * TWO_PI / m as f64;
                ((th + phi).cos() - th.cos()).abs()
            })
            .sum::<f64>()
            * TWO_PI
            / m as f64;
        assert!((brute - rotation_lower_bound(phi)).abs() < 1e-8);
    }
}
