//! The homogeneous limit field `K(x) = Ω(x) / |x|^{n-α}`, its weak norm in
//! closed form, and the rate coefficient `β_t`.

use crate::error::{Error, Result};
use crate::kernel::SphereKernel;

/// Distance `α` must keep from both ends of `(0, n)`.
pub const ALPHA_MARGIN: f64 = 1e-6;

/// `(n, α)` with `q = n / (n - α)` always derived.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Exponents {
    n: usize,
    alpha: f64,
}

impl Exponents {
    pub fn new(n: usize, alpha: f64) -> Result<Self> {
        if n != 1 && n != 2 {
            return Err(Error::param(
                "dim",
                format!("dimension must be 1 or 2, got {n}"),
            ));
        }
        let nf = n as f64;
        if !alpha.is_finite() || alpha < ALPHA_MARGIN || alpha > nf - ALPHA_MARGIN {
            return Err(Error::param(
                "alpha",
                format!("order must lie in (0, {n}) with margin {ALPHA_MARGIN:e}, got {alpha}"),
            ));
        }
        Ok(Exponents { n, alpha })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    /// `n - α`, the decay order of the limit field.
    pub fn gamma(&self) -> f64 {
        self.n as f64 - self.alpha
    }

    pub fn q(&self) -> f64 {
        self.n as f64 / self.gamma()
    }
}

/// `Ω(x)/|x|^{n-α}` (or `|Ω(x)|/|x|^{n-α}` when `signed` is false).
#[derive(Debug, Clone, PartialEq)]
pub struct HomogeneousField {
    pub kernel: SphereKernel,
    pub exps: Exponents,
    pub signed: bool,
}

impl HomogeneousField {
    pub fn new(kernel: SphereKernel, exps: Exponents, signed: bool) -> Result<Self> {
        if kernel.dim() != exps.n() {
            return Err(Error::param(
                "dim",
                format!(
                    "kernel dimension {} differs from exponent dimension {}",
                    kernel.dim(),
                    exps.n()
                ),
            ));
        }
        Ok(HomogeneousField {
            kernel,
            exps,
            signed,
        })
    }

    pub fn eval(&self, x: &[f64]) -> Result<f64> {
        homog_field_eval(self, x)
    }

    /// Value at a nonzero point of the plane (second coordinate ignored for n = 1).
    #[inline]
    pub fn eval_point(&self, x: [f64; 2]) -> f64 {
        let (r, omega) = if self.exps.n() == 1 {
            (x[0].abs(), self.kernel.eval_sign(x[0] > 0.0))
        } else {
            let r = x[0].hypot(x[1]);
            (r, self.kernel.eval_direction([x[0] / r, x[1] / r]))
        };
        let omega = if self.signed { omega } else { omega.abs() };
        omega * r.powf(-self.exps.gamma())
    }
}

pub fn homog_field_eval(field: &HomogeneousField, x: &[f64]) -> Result<f64> {
    if x.len() != field.exps.n() {
        return Err(Error::param(
            "x",
            format!(
                "point has {} coordinates, field dimension is {}",
                x.len(),
                field.exps.n()
            ),
        ));
    }
    if x.iter().all(|&c| c == 0.0) {
        return Err(Error::Domain(
            "the limit field is singular at the origin".into(),
        ));
    }
    let mut p = [0.0; 2];
    p[..x.len()].copy_from_slice(x);
    Ok(field.eval_point(p))
}

/// `||Ω(·)/|·|^{n-α}||_{L^{q,∞}(R^n)} = (||Ω||_q^q / n)^{1/q}`.
pub fn homog_weak_norm_closed(kernel: &SphereKernel, e: &Exponents) -> Result<f64> {
    if kernel.dim() != e.n() {
        return Err(Error::param(
            "dim",
            "kernel and exponents disagree on the dimension",
        ));
    }
    let q = e.q();
    Ok((kernel.sphere_integral_abs_pow(q) / e.n() as f64).powf(1.0 / q))
}

/// As [`homog_weak_norm_closed`] with an explicitly supplied `q`, which must
/// equal `n / (n - α)`.
pub fn homog_weak_norm_closed_with_q(kernel: &SphereKernel, e: &Exponents, q: f64) -> Result<f64> {
    if (q - e.q()).abs() > 1e-12 * e.q() {
        return Err(Error::param(
            "q",
            format!("exponent {q} does not equal n/(n-alpha) = {}", e.q()),
        ));
    }
    homog_weak_norm_closed(kernel, e)
}

/// `β_t = ρ^{n-α} ((ρ - t)^{-(n-α)} - (ρ + t)^{-(n-α)})` for `0 < t < ρ/2`.
pub fn beta_t(e: &Exponents, rho: f64, t: f64) -> Result<f64> {
    if !(rho > 0.0) || !rho.is_finite() {
        return Err(Error::param("rho", format!("must be positive, got {rho}")));
    }
    if !(t > 0.0) {
        return Err(Error::param("t", format!("must be positive, got {t}")));
    }
    if t >= rho / 2.0 {
        return Err(Error::param("t_schedule", "t must be < rho/2"));
    }
    let g = e.gamma();
    Ok(rho.powf(g) * ((rho - t).powf(-g) - (rho + t).powf(-g)))
}

/// The rate bound `(1 + β_t) t + β_t`.
pub fn rate_bound(e: &Exponents, rho: f64, t: f64) -> Result<f64> {
    let b = beta_t(e, rho, t)?;
    Ok((1.0 + b) * t + b)
}
