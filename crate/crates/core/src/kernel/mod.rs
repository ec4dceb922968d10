//! Degree-zero homogeneous kernels, stored by their restriction to the unit
//! sphere `S^{n-1}` for `n` in `{1, 2}`.
//!
//! On `S^0 = {-1, +1}` the surface measure is counting measure (two unit
//! point masses); on `S^1` it is arclength.

mod dini;

pub use dini::{
    dini_integral, dini_integral_from_modulus, dini_modulus, DiniConfig, DiniReport, DiniVerdict,
};

use std::f64::consts::{FRAC_PI_2, FRAC_PI_4, PI};
use std::fmt;
use std::path::Path;

use crate::error::{Error, Result};
use crate::quad;

pub const TWO_PI: f64 = 2.0 * PI;

/// Resolution used when a closed form has to be tabulated (mollification).
pub const DEFAULT_TABLE_RESOLUTION: usize = 4096;

/// Minimum number of samples in a table kernel.
pub const MIN_TABLE_SAMPLES: usize = 8;

#[derive(Debug, Clone, PartialEq)]
pub enum KernelRepr {
    /// `(b_-, b_+)` on `S^0`.
    Pair {
        minus: f64,
        plus: f64,
    },
    Constant(f64),
    /// `a + b cos(k theta)`.
    Cosine {
        a: f64,
        b: f64,
        k: u32,
    },
    /// Value `values[i]` on `[cuts[i], cuts[i+1])`, cyclically; `cuts` is
    /// sorted in `[0, 2 pi)` and `cuts[0]` starts the first interval.
    Piecewise {
        cuts: Vec<f64>,
        values: Vec<f64>,
    },
    /// Uniform samples at `theta_i = 2 pi i / m`, periodic linear interpolation.
    Table {
        values: Vec<f64>,
    },
    /// `base * chi_{|base| <= level}`.
    Truncated {
        base: Box<SphereKernel>,
        level: f64,
    },
    /// `sum_i w_i * kernel_i`.
    Combination {
        terms: Vec<(f64, SphereKernel)>,
    },
    /// `|base|`.
    Abs(Box<SphereKernel>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct SphereKernel {
    dim: usize,
    repr: KernelRepr,
}

/// Result of [`SphereKernel::lipschitz_estimate`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum LipschitzEstimate {
    Finite(f64),
    Unbounded,
}

impl LipschitzEstimate {
    pub fn finite(self) -> Option<f64> {
        match self {
            LipschitzEstimate::Finite(l) => Some(l),
            LipschitzEstimate::Unbounded => None,
        }
    }
}

fn wrap_angle(theta: f64) -> f64 {
    let t = theta.rem_euclid(TWO_PI);
    if t >= TWO_PI {
        0.0
    } else {
        t
    }
}

fn check_dim(dim: usize) -> Result<()> {
    if dim == 1 || dim == 2 {
        Ok(())
    } else {
        Err(Error::param(
            "dim",
            format!("dimension must be 1 or 2, got {dim}"),
        ))
    }
}

impl SphereKernel {
    pub fn pair(minus: f64, plus: f64) -> Self {
        SphereKernel {
            dim: 1,
            repr: KernelRepr::Pair { minus, plus },
        }
    }

    /// Constant kernel in dimension `dim`.
    pub fn constant(dim: usize, c: f64) -> Result<Self> {
        check_dim(dim)?;
        Ok(if dim == 1 {
            Self::pair(c, c)
        } else {
            SphereKernel {
                dim: 2,
                repr: KernelRepr::Constant(c),
            }
        })
    }

    /// `a + b cos(k theta)`; in dimension one this is restricted to
    /// `theta = 0` (the `+1` point) and `theta = pi`.
    pub fn cosine(dim: usize, a: f64, b: f64, k: u32) -> Result<Self> {
        check_dim(dim)?;
        Ok(if dim == 1 {
            let sign = if k.is_multiple_of(2) { 1.0 } else { -1.0 };
            Self::pair(a + b * sign, a + b)
        } else {
            SphereKernel {
                dim: 2,
                repr: KernelRepr::Cosine { a, b, k },
            }
        })
    }

    /// `sign(cos theta)`: `+1` on the right half circle, `-1` on the left.
    pub fn sign_cos(dim: usize) -> Result<Self> {
        check_dim(dim)?;
        Ok(if dim == 1 {
            Self::pair(-1.0, 1.0)
        } else {
            SphereKernel {
                dim: 2,
                repr: KernelRepr::Piecewise {
                    cuts: vec![0.0, FRAC_PI_2, 3.0 * FRAC_PI_2],
                    values: vec![1.0, -1.0, 1.0],
                },
            }
        })
    }

    pub fn piecewise(cuts: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        if cuts.is_empty() || cuts.len() != values.len() {
            return Err(Error::param(
                "piecewise",
                "cuts and values must be nonempty and of equal length",
            ));
        }
        if cuts[0] != 0.0
            || cuts.windows(2).any(|w| w[1] <= w[0])
            || *cuts.last().unwrap() >= TWO_PI
        {
            return Err(Error::param(
                "piecewise",
                "cuts must start at 0 and increase strictly inside [0, 2pi)",
            ));
        }
        Ok(SphereKernel {
            dim: 2,
            repr: KernelRepr::Piecewise { cuts, values },
        })
    }

    pub fn table(values: Vec<f64>) -> Result<Self> {
        if values.len() < MIN_TABLE_SAMPLES {
            return Err(Error::param(
                "table",
                format!(
                    "need at least {MIN_TABLE_SAMPLES} samples, got {}",
                    values.len()
                ),
            ));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::param("table", "samples must be finite"));
        }
        Ok(SphereKernel {
            dim: 2,
            repr: KernelRepr::Table { values },
        })
    }

    /// Reads a table kernel: one value per line, uniform angles from 0.
    pub fn table_from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::config("kernel", format!("cannot read {}: {e}", path.display())))?;
        let mut values = Vec::new();
        for (i, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let v: f64 = line.parse().map_err(|_| {
                Error::config(
                    "kernel",
                    format!("{}:{}: not a number: {line}", path.display(), i + 1),
                )
            })?;
            values.push(v);
        }
        Self::table(values)
    }

    /// Parses the kernel grammar: `const:<c>`, `cos:<a>,<b>,<k>`,
    /// `sign-cos`, `pair:<b->,<b+>`, `table:<path>`.
    pub fn parse(spec: &str, dim: usize) -> Result<Self> {
        check_dim(dim).map_err(|e| Error::config("dim", e.to_string()))?;
        let spec = spec.trim();
        let (head, rest) = match spec.split_once(':') {
            Some((h, r)) => (h, r),
            None => (spec, ""),
        };
        let nums = |expected: usize| -> Result<Vec<f64>> {
            let v: std::result::Result<Vec<f64>, _> =
                rest.split(',').map(|s| s.trim().parse::<f64>()).collect();
            match v {
                Ok(v) if v.len() == expected && v.iter().all(|x| x.is_finite()) => Ok(v),
                _ => Err(Error::config(
                    "kernel",
                    format!("`{spec}`: expected {expected} comma-separated numbers"),
                )),
            }
        };
        match head {
            "const" => Self::constant(dim, nums(1)?[0]),
            "cos" => {
                let v = nums(3)?;
                if v[2] < 0.0 || v[2].fract() != 0.0 {
                    return Err(Error::config(
                        "kernel",
                        format!("`{spec}`: k must be a nonnegative integer"),
                    ));
                }
                Self::cosine(dim, v[0], v[1], v[2] as u32)
            }
            "sign-cos" if rest.is_empty() => Self::sign_cos(dim),
            "pair" => {
                if dim != 1 {
                    return Err(Error::config("kernel", "pair kernels require --dim 1"));
                }
                let v = nums(2)?;
                Ok(Self::pair(v[0], v[1]))
            }
            "table" => {
                if dim != 2 {
                    return Err(Error::config("kernel", "table kernels require --dim 2"));
                }
                Self::table_from_file(Path::new(rest))
            }
            _ => Err(Error::config(
                "kernel",
                format!("unrecognised kernel spec `{spec}`"),
            )),
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn repr(&self) -> &KernelRepr {
        &self.repr
    }

    /// True when the kernel is identically zero by construction.
    pub fn is_zero(&self) -> bool {
        match &self.repr {
            KernelRepr::Pair { minus, plus } => *minus == 0.0 && *plus == 0.0,
            KernelRepr::Constant(c) => *c == 0.0,
            KernelRepr::Cosine { a, b, k } => *b == 0.0 && *a == 0.0 || (*k == 0 && a + b == 0.0),
            KernelRepr::Piecewise { values, .. } | KernelRepr::Table { values } => {
                values.iter().all(|v| *v == 0.0)
            }
            KernelRepr::Truncated { base, .. } => base.is_zero(),
            KernelRepr::Combination { terms } => {
                terms.iter().all(|(w, k)| *w == 0.0 || k.is_zero())
            }
            KernelRepr::Abs(base) => base.is_zero(),
        }
    }

    /// `Omega(x / |x|)`.
    pub fn eval(&self, x: &[f64]) -> Result<f64> {
        if x.len() != self.dim {
            return Err(Error::param(
                "x",
                format!(
                    "point has {} coordinates, kernel dimension is {}",
                    x.len(),
                    self.dim
                ),
            ));
        }
        if x.iter().all(|c| *c == 0.0) {
            return Err(Error::Domain("kernel evaluated at the origin".into()));
        }
        if x.iter().any(|c| !c.is_finite()) {
            return Err(Error::Domain("non-finite point".into()));
        }
        Ok(if self.dim == 1 {
            self.eval_sign(x[0] > 0.0)
        } else {
            self.eval_angle(x[1].atan2(x[0]))
        })
    }

    /// Value at `+1` (`positive`) or `-1` on `S^0`.
    #[inline]
    pub fn eval_sign(&self, positive: bool) -> f64 {
        match &self.repr {
            KernelRepr::Pair { minus, plus } => {
                if positive {
                    *plus
                } else {
                    *minus
                }
            }
            _ => self.eval_angle(if positive { 0.0 } else { PI }),
        }
    }

    /// Value at angle `theta` on `S^1` (any real angle, wrapped).
    pub fn eval_angle(&self, theta: f64) -> f64 {
        match &self.repr {
            KernelRepr::Pair { minus, plus } => {
                // S^0 seen as {0, pi}
                if theta.cos() >= 0.0 {
                    *plus
                } else {
                    *minus
                }
            }
            KernelRepr::Constant(c) => *c,
            KernelRepr::Cosine { a, b, k } => a + b * (*k as f64 * theta).cos(),
            KernelRepr::Piecewise { cuts, values } => {
                let t = wrap_angle(theta);
                let idx = cuts.partition_point(|c| *c <= t);
                values[idx.saturating_sub(1)]
            }
            KernelRepr::Table { values } => {
                let m = values.len();
                let s = wrap_angle(theta) / TWO_PI * m as f64;
                let i = (s.floor() as usize).min(m - 1);
                let frac = s - i as f64;
                let j = (i + 1) % m;
                values[i] + (values[j] - values[i]) * frac
            }
            KernelRepr::Truncated { base, level } => {
                let v = base.eval_angle(theta);
                if v.abs() <= *level {
                    v
                } else {
                    0.0
                }
            }
            KernelRepr::Combination { terms } => {
                terms.iter().map(|(w, k)| w * k.eval_angle(theta)).sum()
            }
            KernelRepr::Abs(base) => base.eval_angle(theta).abs(),
        }
    }

    /// Value at a unit (or any nonzero) direction in the plane.
    #[inline]
    pub fn eval_direction(&self, u: [f64; 2]) -> f64 {
        self.eval_angle(u[1].atan2(u[0]))
    }

    /// `sup |Omega|`; exact except for combinations (upper bound).
    pub fn sup_abs(&self) -> f64 {
        match &self.repr {
            KernelRepr::Pair { minus, plus } => minus.abs().max(plus.abs()),
            KernelRepr::Constant(c) => c.abs(),
            KernelRepr::Cosine { a, b, k } => {
                if *k == 0 {
                    (a + b).abs()
                } else {
                    a.abs() + b.abs()
                }
            }
            KernelRepr::Piecewise { values, .. } | KernelRepr::Table { values } => {
                values.iter().fold(0.0, |m, v| m.max(v.abs()))
            }
            KernelRepr::Truncated { base, level } => base.sup_abs().min(*level),
            KernelRepr::Combination { terms } => {
                terms.iter().map(|(w, k)| w.abs() * k.sup_abs()).sum()
            }
            KernelRepr::Abs(base) => base.sup_abs(),
        }
    }

    /// Angles in `[0, 2 pi)` where the kernel jumps.
    pub fn discontinuities(&self) -> Vec<f64> {
        let mut out = match &self.repr {
            KernelRepr::Pair { .. }
            | KernelRepr::Constant(_)
            | KernelRepr::Cosine { .. }
            | KernelRepr::Table { .. } => Vec::new(),
            KernelRepr::Piecewise { cuts, values } => {
                let m = values.len();
                (0..m)
                    .filter(|&i| values[i] != values[(i + m - 1) % m])
                    .map(|i| cuts[i])
                    .collect()
            }
            KernelRepr::Truncated { base, level } => {
                let mut v = base.discontinuities();
                v.extend(level_crossings(base, *level));
                v
            }
            KernelRepr::Combination { terms } => terms
                .iter()
                .flat_map(|(_, k)| k.discontinuities())
                .collect(),
            KernelRepr::Abs(base) => base.discontinuities(),
        };
        out.sort_by(f64::total_cmp);
        out.dedup_by(|a, b| (*a - *b).abs() < 1e-14);
        out
    }

    /// Angles that split `S^1` into pieces on which the kernel is smooth:
    /// discontinuities, table nodes, and zeros of closed forms (kinks of
    /// `|Omega|^q`).
    fn integration_breaks(&self) -> Vec<f64> {
        let mut out = self.discontinuities();
        self.collect_smooth_breaks(&mut out);
        out = out.into_iter().map(wrap_angle).collect();
        out.sort_by(f64::total_cmp);
        out.dedup_by(|a, b| (*a - *b).abs() < 1e-14);
        out
    }

    fn collect_smooth_breaks(&self, out: &mut Vec<f64>) {
        match &self.repr {
            KernelRepr::Table { values } => {
                let m = values.len();
                out.extend((0..m).map(|i| TWO_PI * i as f64 / m as f64));
            }
            KernelRepr::Cosine { a, b, k } if *k > 0 && *b != 0.0 && (a / b).abs() <= 1.0 => {
                let base = (-a / b).acos();
                let kf = *k as f64;
                for j in 0..*k {
                    let shift = TWO_PI * j as f64;
                    out.push((base + shift) / kf);
                    out.push((TWO_PI - base + shift) / kf);
                }
            }
            KernelRepr::Truncated { base, .. } | KernelRepr::Abs(base) => {
                base.collect_smooth_breaks(out)
            }
            KernelRepr::Combination { terms } => {
                terms.iter().for_each(|(_, k)| k.collect_smooth_breaks(out))
            }
            _ => {}
        }
    }

    /// `(int_{S^{n-1}} |Omega|^q dsigma)^{1/q}`.
    pub fn sphere_norm(&self, q: f64) -> Result<f64> {
        if !(q >= 1.0) || !q.is_finite() {
            return Err(Error::param(
                "q",
                format!("exponent must lie in [1, inf), got {q}"),
            ));
        }
        Ok(self.sphere_integral_abs_pow(q).powf(1.0 / q))
    }

    /// `int_{S^{n-1}} |Omega|^q dsigma`.
    pub fn sphere_integral_abs_pow(&self, q: f64) -> f64 {
        match &self.repr {
            KernelRepr::Pair { minus, plus } => minus.abs().powf(q) + plus.abs().powf(q),
            KernelRepr::Constant(c) => TWO_PI * c.abs().powf(q),
            KernelRepr::Abs(base) => base.sphere_integral_abs_pow(q),
            KernelRepr::Piecewise { cuts, values } => {
                let m = cuts.len();
                (0..m)
                    .map(|i| {
                        let end = if i + 1 < m { cuts[i + 1] } else { TWO_PI };
                        (end - cuts[i]) * values[i].abs().powf(q)
                    })
                    .sum::<f64>()
            }
            KernelRepr::Table { values } => {
                let m = values.len();
                let h = TWO_PI / m as f64;
                (0..m)
                    .map(|i| linear_segment_abs_pow(values[i], values[(i + 1) % m], h, q))
                    .sum()
            }
            _ => circle_integral(
                |t| self.eval_angle(t).abs().powf(q),
                &self.integration_breaks(),
            ),
        }
    }

    /// `||self - other||_{L^q(S^{n-1})}`.
    /// `|Omega|`, in closed form where the representation allows it.
    pub fn abs_kernel(&self) -> SphereKernel {
        let repr = match &self.repr {
            KernelRepr::Pair { minus, plus } => KernelRepr::Pair {
                minus: minus.abs(),
                plus: plus.abs(),
            },
            KernelRepr::Constant(c) => KernelRepr::Constant(c.abs()),
            KernelRepr::Cosine { a, b, k } if *k == 0 || a.abs() >= b.abs() => {
                let s = if *k == 0 {
                    (a + b).signum()
                } else {
                    a.signum()
                };
                KernelRepr::Cosine {
                    a: s * a,
                    b: s * b,
                    k: *k,
                }
            }
            KernelRepr::Piecewise { cuts, values } => KernelRepr::Piecewise {
                cuts: cuts.clone(),
                values: values.iter().map(|v| v.abs()).collect(),
            },
            KernelRepr::Table { values } if values.iter().all(|v| *v >= 0.0) => self.repr.clone(),
            KernelRepr::Table { values } if values.iter().all(|v| *v <= 0.0) => KernelRepr::Table {
                values: values.iter().map(|v| -v).collect(),
            },
            KernelRepr::Abs(_) => self.repr.clone(),
            _ => KernelRepr::Abs(Box::new(self.clone())),
        };
        SphereKernel {
            dim: self.dim,
            repr,
        }
    }

    pub fn lq_distance(&self, other: &SphereKernel, q: f64) -> Result<f64> {
        self.difference(other)?.sphere_norm(q)
    }

    /// `self - other` as a kernel.
    pub fn difference(&self, other: &SphereKernel) -> Result<SphereKernel> {
        if self.dim != other.dim {
            return Err(Error::param("kernel", "kernels of different dimension"));
        }
        if self.dim == 1 {
            let (a, b) = (self.pair_values(), other.pair_values());
            return Ok(Self::pair(a.0 - b.0, a.1 - b.1));
        }
        Ok(SphereKernel {
            dim: 2,
            repr: KernelRepr::Combination {
                terms: vec![(1.0, self.clone()), (-1.0, other.clone())],
            },
        })
    }

    fn pair_values(&self) -> (f64, f64) {
        (self.eval_sign(false), self.eval_sign(true))
    }

    /// `int_{theta0}^{theta1} Omega(theta) d theta` for `theta0 <= theta1`.
    pub fn arc_integral(&self, theta0: f64, theta1: f64) -> f64 {
        if theta1 <= theta0 {
            return 0.0;
        }
        match &self.repr {
            KernelRepr::Pair { .. } => circle_integral_on(
                |t| self.eval_angle(t),
                theta0,
                theta1,
                &[FRAC_PI_2, 3.0 * FRAC_PI_2],
            ),
            KernelRepr::Constant(c) => c * (theta1 - theta0),
            KernelRepr::Cosine { a, b, k } => {
                if *k == 0 {
                    (a + b) * (theta1 - theta0)
                } else {
                    let kf = *k as f64;
                    a * (theta1 - theta0) + b / kf * ((kf * theta1).sin() - (kf * theta0).sin())
                }
            }
            KernelRepr::Piecewise { .. } | KernelRepr::Table { .. } => {
                self.unrolled_antiderivative(theta1) - self.unrolled_antiderivative(theta0)
            }
            KernelRepr::Truncated { .. } | KernelRepr::Abs(_) => circle_integral_on(
                |t| self.eval_angle(t),
                theta0,
                theta1,
                &self.integration_breaks(),
            ),
            KernelRepr::Combination { terms } => terms
                .iter()
                .map(|(w, k)| w * k.arc_integral(theta0, theta1))
                .sum(),
        }
    }

    /// Antiderivative of a piecewise-constant or table kernel on the real
    /// line, `F(0) = 0`.
    fn unrolled_antiderivative(&self, theta: f64) -> f64 {
        let turns = (theta / TWO_PI).floor();
        let t = theta - turns * TWO_PI;
        let (total, partial) = match &self.repr {
            KernelRepr::Piecewise { cuts, values } => {
                let m = cuts.len();
                let mut total = 0.0;
                let mut partial = 0.0;
                for i in 0..m {
                    let end = if i + 1 < m { cuts[i + 1] } else { TWO_PI };
                    total += values[i] * (end - cuts[i]);
                    if t > cuts[i] {
                        partial += values[i] * (t.min(end) - cuts[i]);
                    }
                }
                (total, partial)
            }
            KernelRepr::Table { values } => {
                let m = values.len();
                let h = TWO_PI / m as f64;
                let total: f64 = (0..m)
                    .map(|i| 0.5 * h * (values[i] + values[(i + 1) % m]))
                    .sum();
                let s = t / h;
                let idx = (s.floor() as usize).min(m - 1);
                let mut partial: f64 = (0..idx)
                    .map(|i| 0.5 * h * (values[i] + values[(i + 1) % m]))
                    .sum();
                let frac = s - idx as f64;
                let (v0, v1) = (values[idx], values[(idx + 1) % m]);
                partial += h * (v0 * frac + 0.5 * (v1 - v0) * frac * frac);
                (total, partial)
            }
            _ => unreachable!("antiderivative only for piecewise and table kernels"),
        };
        turns * total + partial
    }

    /// `Omega * chi_{|Omega| <= level}`.
    pub fn truncate(&self, level: f64) -> Result<SphereKernel> {
        if !(level > 0.0) {
            return Err(Error::param(
                "N",
                format!("truncation level must be positive, got {level}"),
            ));
        }
        if self.sup_abs() <= level {
            return Ok(self.clone());
        }
        let cut = |v: f64| if v.abs() <= level { v } else { 0.0 };
        let repr = match &self.repr {
            KernelRepr::Pair { minus, plus } => KernelRepr::Pair {
                minus: cut(*minus),
                plus: cut(*plus),
            },
            KernelRepr::Constant(_) => KernelRepr::Constant(0.0),
            KernelRepr::Piecewise { cuts, values } => KernelRepr::Piecewise {
                cuts: cuts.clone(),
                values: values.iter().map(|v| cut(*v)).collect(),
            },
            KernelRepr::Table { values } => KernelRepr::Table {
                values: values.iter().map(|v| cut(*v)).collect(),
            },
            KernelRepr::Truncated { base, level: old } => KernelRepr::Truncated {
                base: base.clone(),
                level: old.min(level),
            },
            KernelRepr::Cosine { .. } | KernelRepr::Combination { .. } | KernelRepr::Abs(_) => {
                KernelRepr::Truncated {
                    base: Box::new(self.clone()),
                    level,
                }
            }
        };
        Ok(SphereKernel {
            dim: self.dim,
            repr,
        })
    }

    /// Cap average over `[theta - eps, theta + eps]`, tabulated at
    /// `resolution` samples. The identity on `S^0`.
    pub fn mollify(&self, eps: f64, resolution: usize) -> Result<SphereKernel> {
        if !(eps > 0.0 && eps <= FRAC_PI_4) {
            return Err(Error::param(
                "eps",
                format!("cap radius must lie in (0, pi/4], got {eps}"),
            ));
        }
        if self.dim == 1 {
            return Ok(self.clone());
        }
        let m = resolution.max(MIN_TABLE_SAMPLES);
        let values = (0..m)
            .map(|i| {
                let theta = TWO_PI * i as f64 / m as f64;
                self.arc_integral(theta - eps, theta + eps) / (2.0 * eps)
            })
            .collect();
        Self::table(values)
    }

    /// Sampled Lipschitz constant with respect to geodesic distance.
    ///
    /// Starts from 1024 equispaced samples and doubles three times; if the
    /// maximal difference quotient grows by at least 1.8x at every doubling
    /// the kernel is reported as unbounded.
    pub fn lipschitz_estimate(&self) -> LipschitzEstimate {
        if self.dim == 1 {
            let (m, p) = self.pair_values();
            // chord distance between -1 and +1
            return LipschitzEstimate::Finite((p - m).abs() / 2.0);
        }
        let quotient = |m: usize| -> f64 {
            let h = TWO_PI / m as f64;
            let vals: Vec<f64> = (0..m).map(|i| self.eval_angle(h * i as f64)).collect();
            (0..m)
                .map(|i| (vals[(i + 1) % m] - vals[i]).abs())
                .fold(0.0, f64::max)
                / h
        };
        let levels: Vec<f64> = (0..4).map(|j| quotient(1024 << j)).collect();
        let growing = levels[0] > 0.0 && levels.windows(2).all(|w| w[1] >= 1.8 * w[0]);
        if growing {
            LipschitzEstimate::Unbounded
        } else {
            LipschitzEstimate::Finite(levels[3])
        }
    }
}

impl fmt::Display for SphereKernel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.repr {
            KernelRepr::Pair { minus, plus } => write!(f, "pair:{minus},{plus}"),
            KernelRepr::Constant(c) => write!(f, "const:{c}"),
            KernelRepr::Cosine { a, b, k } => write!(f, "cos:{a},{b},{k}"),
            KernelRepr::Piecewise { cuts, values } => {
                if self == &SphereKernel::sign_cos(2).unwrap() {
                    write!(f, "sign-cos")
                } else {
                    write!(f, "piecewise[{} pieces]", cuts.len().min(values.len()))
                }
            }
            KernelRepr::Table { values } => write!(f, "table[{} samples]", values.len()),
            KernelRepr::Abs(base) => write!(f, "abs({base})"),
            KernelRepr::Truncated { base, level } => write!(f, "truncate({base},{level})"),
            KernelRepr::Combination { terms } => {
                write!(f, "sum(")?;
                for (i, (w, k)) in terms.iter().enumerate() {
                    if i > 0 {
                        write!(f, ";")?;
                    }
                    write!(f, "{w}*{k}")?;
                }
                write!(f, ")")
            }
        }
    }
}

/// Arc integrals of one kernel with the break structure resolved once.
///
/// Closed forms delegate to [`SphereKernel::arc_integral`]; kernels that
/// need quadrature (absolute values, truncations) get a cumulative
/// antiderivative at their break angles, so each arc costs two short
/// Gauss-Legendre sums.
#[derive(Debug, Clone)]
pub struct ArcIntegrator {
    kernel: SphereKernel,
    prepared: Option<Antiderivative>,
}

#[derive(Debug, Clone)]
struct Antiderivative {
    breaks: Vec<f64>,
    cumulative: Vec<f64>,
    total: f64,
}

impl ArcIntegrator {
    pub fn new(kernel: &SphereKernel) -> Self {
        let prepared = (kernel.dim == 2 && kernel.needs_arc_quadrature()).then(|| {
            let mut breaks = kernel.integration_breaks();
            breaks.push(0.0);
            // keep pieces short so a single 16-point rule is exact to rounding
            let max_len = TWO_PI / 64.0;
            breaks.sort_by(f64::total_cmp);
            breaks.dedup_by(|a, b| (*a - *b).abs() < 1e-14);
            let mut fine = Vec::with_capacity(breaks.len() + 64);
            for (i, &b) in breaks.iter().enumerate() {
                let end = breaks.get(i + 1).copied().unwrap_or(TWO_PI);
                let pieces = ((end - b) / max_len).ceil().max(1.0) as usize;
                fine.extend((0..pieces).map(|j| b + (end - b) * j as f64 / pieces as f64));
            }
            let mut cumulative = Vec::with_capacity(fine.len());
            let mut acc = 0.0;
            for (i, &b) in fine.iter().enumerate() {
                cumulative.push(acc);
                let end = fine.get(i + 1).copied().unwrap_or(TWO_PI);
                acc += quad::integrate(|t| kernel.eval_angle(t), b, end, 1, 16);
            }
            Antiderivative {
                breaks: fine,
                cumulative,
                total: acc,
            }
        });
        ArcIntegrator {
            kernel: kernel.clone(),
            prepared,
        }
    }

    pub fn kernel(&self) -> &SphereKernel {
        &self.kernel
    }

    /// `int_{theta0}^{theta1} Omega`.
    pub fn arc(&self, theta0: f64, theta1: f64) -> f64 {
        match &self.prepared {
            None => self.kernel.arc_integral(theta0, theta1),
            Some(p) => {
                if theta1 <= theta0 {
                    return 0.0;
                }
                self.antiderivative(p, theta1) - self.antiderivative(p, theta0)
            }
        }
    }

    fn antiderivative(&self, p: &Antiderivative, theta: f64) -> f64 {
        let turns = (theta / TWO_PI).floor();
        let t = (theta - turns * TWO_PI).clamp(0.0, TWO_PI);
        let idx = p.breaks.partition_point(|b| *b <= t).saturating_sub(1);
        let start = p.breaks[idx];
        turns * p.total
            + p.cumulative[idx]
            + quad::integrate(|s| self.kernel.eval_angle(s), start, t, 1, 16)
    }
}

impl SphereKernel {
    fn needs_arc_quadrature(&self) -> bool {
        match &self.repr {
            KernelRepr::Truncated { .. } | KernelRepr::Abs(_) => true,
            KernelRepr::Combination { terms } => {
                terms.iter().any(|(_, k)| k.needs_arc_quadrature())
            }
            _ => false,
        }
    }
}

/// `int_0^h |u(s)|^q ds` for `u` linear from `u0` to `u1`.
fn linear_segment_abs_pow(u0: f64, u1: f64, h: f64, q: f64) -> f64 {
    let (a0, a1) = (u0.abs(), u1.abs());
    if u0 * u1 < 0.0 {
        let s0 = h * a0 / (a0 + a1);
        return (s0 * a0.powf(q) + (h - s0) * a1.powf(q)) / (q + 1.0);
    }
    if (a1 - a0).abs() <= 1e-12 * a0.max(a1) {
        // nearly constant: second-order expansion avoids cancellation
        let mid = 0.5 * (a0 + a1);
        return h * mid.powf(q);
    }
    h * (a1.powf(q + 1.0) - a0.powf(q + 1.0)) / ((q + 1.0) * (a1 - a0))
}

/// Solutions of `|base(theta)| = level` on `[0, 2 pi)` by sampling and
/// bisection.
fn level_crossings(base: &SphereKernel, level: f64) -> Vec<f64> {
    if !level.is_finite() {
        return Vec::new();
    }
    let m = 8192;
    let h = TWO_PI / m as f64;
    let g = |t: f64| base.eval_angle(t).abs() - level;
    let mut out = Vec::new();
    let mut prev = g(0.0);
    for i in 1..=m {
        let t = h * i as f64;
        let cur = g(t);
        if (prev > 0.0) != (cur > 0.0) {
            let (mut lo, mut hi) = (t - h, t);
            let lo_pos = prev > 0.0;
            for _ in 0..60 {
                let mid = 0.5 * (lo + hi);
                if (g(mid) > 0.0) == lo_pos {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            out.push(wrap_angle(0.5 * (lo + hi)));
        }
        prev = cur;
    }
    out
}

/// Integral over the full circle of a function that is smooth between the
/// given break angles.
pub(crate) fn circle_integral<F: Fn(f64) -> f64>(f: F, breaks: &[f64]) -> f64 {
    circle_integral_on(f, 0.0, TWO_PI, breaks)
}

/// Integral over `[theta0, theta1]`, splitting at every (periodically
/// repeated) break angle inside the range.
pub(crate) fn circle_integral_on<F: Fn(f64) -> f64>(
    f: F,
    theta0: f64,
    theta1: f64,
    breaks: &[f64],
) -> f64 {
    let mut pts = vec![theta0, theta1];
    let first_turn = (theta0 / TWO_PI).floor() as i64;
    let last_turn = (theta1 / TWO_PI).ceil() as i64;
    for turn in first_turn..=last_turn {
        for b in breaks {
            let t = b + TWO_PI * turn as f64;
            if t > theta0 && t < theta1 {
                pts.push(t);
            }
        }
    }
    pts.sort_by(f64::total_cmp);
    // many breaks (tables) -> short pieces need fewer panels
    let panels = if pts.len() > 64 { 1 } else { 16 };
    pts.windows(2)
        .map(|w| quad::integrate(&f, w[0], w[1], panels, 16))
        .sum()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cos_kernel() -> SphereKernel {
        SphereKernel::cosine(2, 0.0, 1.0, 1).unwrap()
    }

    #[test]
    fn eval_examples() {
        let sign = SphereKernel::pair(-1.0, 1.0);
        assert_eq!(sign.eval(&[3.7]).unwrap(), 1.0);
        assert_eq!(sign.eval(&[-0.2]).unwrap(), -1.0);
        let c = cos_kernel();
        assert!(c.eval(&[0.0, 5.0]).unwrap().abs() < 1e-15);
        assert!((c.eval(&[1.0, 1.0]).unwrap() - 0.707_106_781_186_547_5).abs() < 1e-12);
    }

    #[test]
    fn eval_at_origin_is_domain_error() {
        assert!(matches!(
            cos_kernel().eval(&[0.0, 0.0]),
            Err(Error::Domain(_))
        ));
        assert!(matches!(
            SphereKernel::pair(1.0, 1.0).eval(&[0.0]),
            Err(Error::Domain(_))
        ));
    }

    #[test]
    fn sphere_norm_examples() {
        let p = SphereKernel::pair(1.0, -1.0);
        assert!((p.sphere_norm(2.0).unwrap() - 2f64.sqrt()).abs() < 1e-12);
        let one = SphereKernel::constant(2, 1.0).unwrap();
        assert!((one.sphere_norm(2.0).unwrap() - (TWO_PI).sqrt()).abs() < 1e-12);
        assert!((cos_kernel().sphere_norm(2.0).unwrap() - PI.sqrt()).abs() < 1e-10);
        assert!(matches!(one.sphere_norm(0.5), Err(Error::Parameter { .. })));
    }

    #[test]
    fn table_norm_matches_closed_form() {
        // cos tabulated: linear interpolation error is O(h^2)
        let m = 4096;
        let t = SphereKernel::table(
            (0..m)
                .map(|i| (TWO_PI * i as f64 / m as f64).cos())
                .collect(),
        )
        .unwrap();
        let exact = 4.0; // int |cos| = 4
        assert!((t.sphere_integral_abs_pow(1.0) - exact).abs() < 1e-5);
        // a table holding a genuinely piecewise-linear function is exact
        let tri = SphereKernel::table(vec![0.0, 1.0, 0.0, -1.0, 0.0, 1.0, 0.0, -1.0]).unwrap();
        let h = TWO_PI / 8.0;
        assert!((tri.sphere_integral_abs_pow(2.0) - 8.0 * h / 3.0).abs() < 1e-13);
        assert!(SphereKernel::table(vec![1.0; 7]).is_err());
    }

    #[test]
    fn truncation_examples() {
        let k = SphereKernel::pair(3.0, 1.0);
        assert_eq!(k.truncate(2.0).unwrap(), SphereKernel::pair(0.0, 1.0));
        let c = SphereKernel::cosine(2, 0.0, 2.0, 1).unwrap();
        assert_eq!(c.truncate(2.0).unwrap(), c);
        let t = c.truncate(1.0).unwrap();
        let expected = 8.0 * (1.0 - (PI / 3.0).sin());
        assert!(
            (t.sphere_norm(1.0).unwrap() - expected).abs() < 1e-10,
            "{}",
            t.sphere_norm(1.0).unwrap()
        );
        assert!(c.truncate(0.0).is_err());
    }

    #[test]
    fn truncation_norm_is_monotone_and_converges() {
        let c = SphereKernel::cosine(2, 0.5, 2.0, 2).unwrap();
        let full = c.sphere_norm(1.5).unwrap();
        let mut prev = 0.0;
        for n in [0.25, 0.5, 1.0, 1.5, 2.0, 2.4, 2.5] {
            let v = c.truncate(n).unwrap().sphere_norm(1.5).unwrap();
            assert!(v >= prev - 1e-12);
            prev = v;
        }
        assert!((prev - full).abs() < 1e-12);
    }

    #[test]
    fn mollify_examples() {
        let one = SphereKernel::constant(2, 1.0).unwrap();
        let m = one.mollify(0.2, 512).unwrap();
        for i in 0..50 {
            assert!((m.eval_angle(0.3 * i as f64) - 1.0).abs() < 1e-14);
        }
        let c = cos_kernel().mollify(0.1, DEFAULT_TABLE_RESOLUTION).unwrap();
        let factor = 0.1f64.sin() / 0.1;
        assert!((factor - 0.998_334_2).abs() < 1e-7);
        for i in 0..64 {
            let th = TWO_PI * i as f64 / 64.0;
            assert!((c.eval_angle(th) - factor * th.cos()).abs() < 1e-12);
            let off = th + 0.37e-3;
            assert!((c.eval_angle(off) - factor * off.cos()).abs() < 1e-6);
        }
        assert!(cos_kernel().mollify(0.0, 64).is_err());
        assert!(cos_kernel().mollify(1.0, 64).is_err());
        let p = SphereKernel::pair(2.0, -1.0);
        assert_eq!(p.mollify(0.1, 64).unwrap(), p);
    }

    #[test]
    fn mollified_sign_cos_error_decreases() {
        // the cap average differs from sign(cos) only on arcs of width 2 eps
        // around each jump: int |avg - sign| = 2 * 2 * int_0^eps (1 - s/eps) ds = 2 eps
        let s = SphereKernel::sign_cos(2).unwrap();
        let mut prev = f64::INFINITY;
        for eps in [0.4, 0.2, 0.1, 0.05] {
            let m = s.mollify(eps, DEFAULT_TABLE_RESOLUTION).unwrap();
            let d = s.lq_distance(&m, 1.0).unwrap();
            assert!((d - 2.0 * eps).abs() < 2e-3, "eps={eps} d={d}");
            assert!(d < prev);
            prev = d;
        }
    }

    #[test]
    fn lipschitz_examples() {
        let one = SphereKernel::constant(2, 3.0).unwrap();
        assert_eq!(one.lipschitz_estimate(), LipschitzEstimate::Finite(0.0));
        let l = cos_kernel().lipschitz_estimate().finite().unwrap();
        assert!((l - 1.0).abs() < 0.05);
        assert_eq!(
            SphereKernel::sign_cos(2).unwrap().lipschitz_estimate(),
            LipschitzEstimate::Unbounded
        );
        let eps = 0.1;
        let moll = SphereKernel::sign_cos(2)
            .unwrap()
            .mollify(eps, 4096)
            .unwrap();
        let lm = moll.lipschitz_estimate().finite().unwrap();
        assert!(lm <= 2.0 * 1.0 / eps + 1e-9);
    }

    #[test]
    fn parse_grammar() {
        assert_eq!(
            SphereKernel::parse("pair:-1,1", 1).unwrap(),
            SphereKernel::pair(-1.0, 1.0)
        );
        assert_eq!(
            SphereKernel::parse("const:2", 1).unwrap(),
            SphereKernel::pair(2.0, 2.0)
        );
        let c = SphereKernel::parse("cos:2,1,1", 2).unwrap();
        assert!((c.eval_angle(0.0) - 3.0).abs() < 1e-15);
        assert!(SphereKernel::parse("sign-cos", 2).is_ok());
        assert!(SphereKernel::parse("cos:1,1,0.5", 2).is_err());
        assert!(SphereKernel::parse("pair:1,1", 2).is_err());
        assert!(SphereKernel::parse("bogus", 2).is_err());
        assert!(SphereKernel::parse("table:/nonexistent/file", 2).is_err());
    }

    #[test]
    fn table_file_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("k.txt");
        let text: String = (0..16)
            .map(|i| format!("{}\n", (i as f64 * 0.25).sin()))
            .collect();
        std::fs::write(&path, text).unwrap();
        let k = SphereKernel::parse(&format!("table:{}", path.display()), 2).unwrap();
        assert!((k.eval_angle(TWO_PI * 3.0 / 16.0) - 0.75f64.sin()).abs() < 1e-15);
        // periodic continuation
        assert!((k.eval_angle(TWO_PI * 19.0 / 16.0) - 0.75f64.sin()).abs() < 1e-12);
    }

    #[test]
    fn arc_integrals_are_consistent() {
        let kernels = [
            SphereKernel::sign_cos(2).unwrap(),
            SphereKernel::cosine(2, 2.0, 1.0, 3).unwrap(),
            SphereKernel::table((0..64).map(|i| (i as f64 * 0.7).sin()).collect()).unwrap(),
        ];
        for k in &kernels {
            for (a, b) in [(-0.3, 0.4), (1.0, 5.0), (6.0, 7.2)] {
                let exact = k.arc_integral(a, b);
                let brute = circle_integral_on(|t| k.eval_angle(t), a, b, &k.integration_breaks());
                assert!((exact - brute).abs() < 1e-9, "{k}: {exact} vs {brute}");
            }
        }
    }

    #[test]
    fn abs_kernel_arcs() {
        let kernels = [
            cos_kernel(),
            SphereKernel::cosine(2, -3.0, 1.0, 2).unwrap(),
            SphereKernel::sign_cos(2)
                .unwrap()
                .difference(&cos_kernel())
                .unwrap(),
        ];
        for k in &kernels {
            let a = k.abs_kernel();
            assert!((a.sphere_norm(1.0).unwrap() - k.sphere_norm(1.0).unwrap()).abs() < 1e-10);
            for (lo, hi) in [(-0.3, 0.4), (1.0, 5.0)] {
                let brute =
                    circle_integral_on(|t| k.eval_angle(t).abs(), lo, hi, &k.integration_breaks());
                assert!((a.arc_integral(lo, hi) - brute).abs() < 1e-9, "{k}");
            }
        }
        assert_eq!(
            SphereKernel::pair(-2.0, 1.0).abs_kernel(),
            SphereKernel::pair(2.0, 1.0)
        );
    }

    #[test]
    fn arc_integrator_matches_direct_arcs() {
        let rough = SphereKernel::sign_cos(2).unwrap();
        let smooth = rough.mollify(0.2, 512).unwrap();
        let kernels = [
            rough.difference(&smooth).unwrap().abs_kernel(),
            SphereKernel::cosine(2, 0.0, 2.0, 1)
                .unwrap()
                .truncate(1.0)
                .unwrap(),
            SphereKernel::cosine(2, 2.0, 1.0, 1).unwrap(),
        ];
        for k in &kernels {
            let fast = ArcIntegrator::new(k);
            for (a, b) in [(-0.3, 0.4), (1.0, 5.0), (6.0, 13.2), (2.0, 2.0 + 1e-4)] {
                let direct = k.arc_integral(a, b);
                assert!((fast.arc(a, b) - direct).abs() < 1e-9, "{k} on [{a}, {b}]");
            }
        }
    }
}
