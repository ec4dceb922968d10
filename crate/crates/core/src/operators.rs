//! `T_Ω^α`, `T_{|Ω|}^α` and `M_Ω^α` at single points and over grids.
//!
//! Everything is computed in polar coordinates around the evaluation point
//! `x`: `T_Ω^α f(x) = ∫_0^∞ r^{α-1} ∫_{S^{n-1}} Ω(θ) f(x - rθ) dσ(θ) dr`.
//! Radial integrals are split at every radius where `∂B(x, r)` crosses a
//! kink of `f` or a jump of `Ω`, so each piece is smooth up to square-root
//! endpoint behaviour that the cosine grading absorbs.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::fields::{Exponents, HomogeneousField};
use crate::functions::{PlacedComponent, Profile, TestFunction, VectorTestFunction};
use crate::kernel::{ArcIntegrator, SphereKernel, TWO_PI};
use crate::lorentz::{lr_norm, SampledField};
use crate::quad;

#[derive(Debug, Clone, PartialEq)]
pub struct QuadratureSpec {
    /// Nodes per full circle (n = 2).
    pub angular_nodes: usize,
    /// Nodes per smooth radial segment.
    pub radial_panels: usize,
    /// Exponent `p` of the substitution `r = b s^p` on segments touching the
    /// singularity; `None` uses `1/α`, which integrates `r^{α-1}` exactly.
    pub grading_exponent: Option<f64>,
    pub maximal_radius_samples: usize,
    pub refinement_passes: usize,
}

impl Default for QuadratureSpec {
    fn default() -> Self {
        QuadratureSpec {
            angular_nodes: 256,
            radial_panels: 64,
            grading_exponent: None,
            maximal_radius_samples: 64,
            refinement_passes: 2,
        }
    }
}

impl QuadratureSpec {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("angular_nodes", self.angular_nodes),
            ("radial_panels", self.radial_panels),
            ("maximal_radius_samples", self.maximal_radius_samples),
        ] {
            if v < 8 {
                return Err(Error::param(name, format!("must be at least 8, got {v}")));
            }
        }
        if let Some(p) = self.grading_exponent {
            if !(p >= 1.0) || !p.is_finite() {
                return Err(Error::param(
                    "grading_exponent",
                    format!("must be finite and >= 1, got {p}"),
                ));
            }
        }
        Ok(())
    }

    /// Twice the angular and radial resolution.
    pub fn refined(&self) -> Self {
        QuadratureSpec {
            angular_nodes: 2 * self.angular_nodes,
            radial_panels: 2 * self.radial_panels,
            ..self.clone()
        }
    }

    fn segment_panels(&self) -> usize {
        (self.radial_panels / 16).max(1)
    }

    fn arc_panels(&self, len: f64) -> usize {
        ((self.angular_nodes as f64 * len / TWO_PI / 16.0).ceil() as usize).max(1)
    }
}

/// Which operator a grid evaluation applies.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum OpKind {
    M,
    TAbs,
    TSigned,
}

impl OpKind {
    /// Whether the limit field carries `|Ω|` (true) or the signed `Ω`.
    pub fn uses_abs_limit(self) -> bool {
        !matches!(self, OpKind::TSigned)
    }
}

impl fmt::Display for OpKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            OpKind::M => "M",
            OpKind::TAbs => "T_abs",
            OpKind::TSigned => "T_signed",
        })
    }
}

impl FromStr for OpKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().replace('-', "_").as_str() {
            "m" | "maximal" => Ok(OpKind::M),
            "t_abs" | "tabs" => Ok(OpKind::TAbs),
            "t_signed" | "tsigned" | "t" => Ok(OpKind::TSigned),
            other => Err(Error::config(
                "op",
                format!("unknown operator `{other}` (expected M, T_abs or T_signed)"),
            )),
        }
    }
}

/// Cells covering `{ρ <= |x| <= r_max}` (or an interval for the 1-d
/// monitors), one sample point and one exact measure per cell.
#[derive(Debug, Clone, PartialEq)]
pub struct AnnulusGrid {
    pub dim: usize,
    pub rho: f64,
    pub r_max: f64,
    /// Radial cells (per side when n = 1).
    pub radial: usize,
    /// Angular cells (n = 2).
    pub angular: usize,
    points: Vec<[f64; 2]>,
    measures: Vec<f64>,
    layout: Layout,
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Layout {
    LogPolar,
    Interval { a: f64, b: f64 },
}

impl AnnulusGrid {
    /// Log-spaced radial edges `ρ (r_max/ρ)^{k/radial}` and uniform angular
    /// cells. Samples sit at the measure midpoint of each radial cell and
    /// the angular centre.
    pub fn log_polar(
        dim: usize,
        rho: f64,
        r_max: f64,
        radial: usize,
        angular: usize,
    ) -> Result<Self> {
        if dim != 1 && dim != 2 {
            return Err(Error::param(
                "dim",
                format!("dimension must be 1 or 2, got {dim}"),
            ));
        }
        if !(rho > 0.0) || !(r_max > rho) || !r_max.is_finite() {
            return Err(Error::param(
                "grid",
                format!("need 0 < rho < r_max, got rho={rho}, r_max={r_max}"),
            ));
        }
        if radial < 1 || (dim == 2 && angular < 4) {
            return Err(Error::param(
                "grid_res",
                "need at least 1 radial and 4 angular cells",
            ));
        }
        let ratio = (r_max / rho).ln();
        let edges: Vec<f64> = (0..=radial)
            .map(|k| match k {
                0 => rho,
                k if k == radial => r_max,
                k => rho * (ratio * k as f64 / radial as f64).exp(),
            })
            .collect();
        let mut points = Vec::new();
        let mut measures = Vec::new();
        if dim == 1 {
            for side in [-1.0, 1.0] {
                for w in edges.windows(2) {
                    points.push([side * 0.5 * (w[0] + w[1]), 0.0]);
                    measures.push(w[1] - w[0]);
                }
            }
        } else {
            let dth = TWO_PI / angular as f64;
            for w in edges.windows(2) {
                let r = (0.5 * (w[0] * w[0] + w[1] * w[1])).sqrt();
                let m = 0.5 * (w[1] - w[0]) * (w[1] + w[0]) * dth;
                for j in 0..angular {
                    let th = dth * (j as f64 + 0.5);
                    points.push([r * th.cos(), r * th.sin()]);
                    measures.push(m);
                }
            }
        }
        Ok(AnnulusGrid {
            dim,
            rho,
            r_max,
            radial,
            angular: if dim == 2 { angular } else { 1 },
            points,
            measures,
            layout: Layout::LogPolar,
        })
    }

    /// Uniform cells of `[a, b]` (n = 1).
    pub fn interval(a: f64, b: f64, cells: usize) -> Result<Self> {
        if !(b > a) || !a.is_finite() || !b.is_finite() || cells == 0 {
            return Err(Error::param("grid", "need a < b and at least one cell"));
        }
        let h = (b - a) / cells as f64;
        let points = (0..cells)
            .map(|i| [a + h * (i as f64 + 0.5), 0.0])
            .collect();
        let rho = if a <= 0.0 && b >= 0.0 {
            0.0
        } else {
            a.abs().min(b.abs())
        };
        Ok(AnnulusGrid {
            dim: 1,
            rho,
            r_max: a.abs().max(b.abs()),
            radial: cells,
            angular: 1,
            points,
            measures: vec![h; cells],
            layout: Layout::Interval { a, b },
        })
    }

    /// Grid used by the limit experiments: `ρ <= |x| <= rmax_mult ρ` with
    /// `res` radial and `res / 2` angular cells.
    pub fn for_limit(dim: usize, rho: f64, res: usize, rmax_mult: f64) -> Result<Self> {
        if !(rmax_mult > 1.0) {
            return Err(Error::param(
                "rmax_mult",
                format!("must exceed 1, got {rmax_mult}"),
            ));
        }
        Self::log_polar(dim, rho, rmax_mult * rho, res, (res / 2).max(4))
    }

    /// Wide log grid used to compare the limit field with its closed-form
    /// weak norm (log cell width about 0.006).
    pub fn for_identity(dim: usize) -> Result<Self> {
        if dim == 1 {
            Self::log_polar(1, 1e-5, 2e3, 3200, 1)
        } else {
            Self::log_polar(2, 1e-3, 64.0, 2048, 256)
        }
    }

    /// Same region with twice as many cells per dimension.
    pub fn refined(&self) -> Result<Self> {
        match self.layout {
            Layout::LogPolar => Self::log_polar(
                self.dim,
                self.rho,
                self.r_max,
                2 * self.radial,
                2 * self.angular,
            ),
            Layout::Interval { a, b } => Self::interval(a, b, 2 * self.radial),
        }
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn points(&self) -> &[[f64; 2]] {
        &self.points
    }

    pub fn measures(&self) -> &[f64] {
        &self.measures
    }

    /// `|{ρ <= |x| <= r_max}|` (or `b - a` for intervals).
    pub fn exact_measure(&self) -> f64 {
        match self.layout {
            Layout::Interval { a, b } => b - a,
            Layout::LogPolar if self.dim == 1 => 2.0 * (self.r_max - self.rho),
            Layout::LogPolar => PI * (self.r_max * self.r_max - self.rho * self.rho),
        }
    }

    pub fn description(&self) -> String {
        match self.layout {
            Layout::Interval { a, b } => format!("interval [{a}, {b}], {} cells", self.radial),
            Layout::LogPolar if self.dim == 1 => {
                format!(
                    "log annulus [{}, {}], {} radial cells per side",
                    self.rho, self.r_max, self.radial
                )
            }
            Layout::LogPolar => format!(
                "log annulus [{}, {}], {} radial x {} angular cells",
                self.rho, self.r_max, self.radial, self.angular
            ),
        }
    }

    /// Wraps per-cell values as a sampled field on this grid.
    pub fn field(&self, values: Vec<f64>) -> Result<SampledField> {
        if values.len() != self.points.len() {
            return Err(Error::param("field", "value count does not match the grid"));
        }
        Ok(SampledField {
            dim: self.dim,
            points: self.points.clone(),
            measures: self.measures.clone(),
            values,
            r_max: self.r_max,
            resolution: self.description(),
        })
    }

    /// Samples `g` at every cell point, in parallel, in cell order.
    pub fn sample<F>(&self, g: F) -> Result<SampledField>
    where
        F: Fn([f64; 2]) -> Result<f64> + Sync,
    {
        let results: Vec<Result<f64>> = self.points.par_iter().map(|&p| g(p)).collect();
        let mut values = Vec::with_capacity(results.len());
        for (i, r) in results.into_iter().enumerate() {
            match r {
                Ok(v) if v.is_finite() => values.push(v),
                Ok(v) => {
                    return Err(Error::Numeric {
                        context: format!("grid point {:?}", self.point_coords(i)),
                        message: format!("non-finite value {v}"),
                    })
                }
                Err(e) => {
                    return Err(Error::Numeric {
                        context: format!("grid point {:?}", self.point_coords(i)),
                        message: e.to_string(),
                    })
                }
            }
        }
        self.field(values)
    }

    fn point_coords(&self, i: usize) -> Vec<f64> {
        self.points[i][..self.dim].to_vec()
    }
}

/// The limit field sampled on a grid.
pub fn sample_homogeneous(field: &HomogeneousField, grid: &AnnulusGrid) -> Result<SampledField> {
    if field.exps.n() != grid.dim {
        return Err(Error::param("dim", "field and grid dimensions differ"));
    }
    grid.sample(|p| {
        if p[0] == 0.0 && p[1] == 0.0 {
            return Err(Error::Domain("limit field sampled at the origin".into()));
        }
        Ok(field.eval_point(p))
    })
}

/// `T_Ω^α f(x)`.
pub fn frac_integral(
    k: &SphereKernel,
    e: &Exponents,
    f: &TestFunction,
    x: &[f64],
    quad: &QuadratureSpec,
) -> Result<f64> {
    Evaluator::new(OpKind::TSigned, k, e, f, quad)?.at(point(x, e.n())?)
}

/// `T_{|Ω|}^α f(x)` with `f` kept signed.
pub fn frac_integral_abs(
    k: &SphereKernel,
    e: &Exponents,
    f: &TestFunction,
    x: &[f64],
    quad: &QuadratureSpec,
) -> Result<f64> {
    Evaluator::new(OpKind::TAbs, k, e, f, quad)?.at(point(x, e.n())?)
}

/// `M_Ω^α f(x) = sup_r r^{α-n} ∫_{B(x,r)} |Ω(x-y) f(y)| dy`.
pub fn frac_maximal(
    k: &SphereKernel,
    e: &Exponents,
    f: &TestFunction,
    x: &[f64],
    quad: &QuadratureSpec,
) -> Result<f64> {
    Evaluator::new(OpKind::M, k, e, f, quad)?.at(point(x, e.n())?)
}

/// Applies one operator at a single point.
pub fn apply_at(
    op: OpKind,
    k: &SphereKernel,
    e: &Exponents,
    f: &TestFunction,
    x: &[f64],
    quad: &QuadratureSpec,
) -> Result<f64> {
    Evaluator::new(op, k, e, f, quad)?.at(point(x, e.n())?)
}

/// `A f` at every cell of the grid.
pub fn grid_apply(
    op: OpKind,
    k: &SphereKernel,
    e: &Exponents,
    f: &TestFunction,
    grid: &AnnulusGrid,
    quad: &QuadratureSpec,
) -> Result<SampledField> {
    if grid.dim != e.n() {
        return Err(Error::param("dim", "grid and exponent dimensions differ"));
    }
    let ev = Evaluator::new(op, k, e, f, quad)?;
    grid.sample(|p| ev.at(p))
}

/// `A f_t - K ||f||_1` on the grid, with `K` the limit field matching `op`.
pub fn grid_difference(
    op: OpKind,
    k: &SphereKernel,
    e: &Exponents,
    f: &TestFunction,
    t: f64,
    grid: &AnnulusGrid,
    quad: &QuadratureSpec,
) -> Result<SampledField> {
    let ft = f.rescale(t)?;
    let ev = Evaluator::new(op, k, e, &ft, quad)?;
    let limit = HomogeneousField::new(k.clone(), *e, !op.uses_abs_limit())?;
    let mass = f.l1_norm();
    grid.sample(|p| Ok(ev.at(p)? - limit.eval_point(p) * mass))
}

/// Pointwise `l^r` composite over the entries of `vf`: either
/// `(Σ_j |A f_{j,t} - K ||f_j||_1|^r)^{1/r}` or `(Σ_j |A f_j|^r)^{1/r}`.
#[allow(clippy::too_many_arguments)]
pub fn vector_lr_field(
    op: OpKind,
    k: &SphereKernel,
    e: &Exponents,
    vf: &VectorTestFunction,
    grid: &AnnulusGrid,
    quad: &QuadratureSpec,
    subtract_limit: bool,
    t: f64,
) -> Result<SampledField> {
    if vf.dim() != e.n() || grid.dim != e.n() {
        return Err(Error::param(
            "dim",
            "vector entries, exponents and grid must share one dimension",
        ));
    }
    let mut columns = Vec::with_capacity(vf.len());
    for f in vf.entries() {
        let col = if subtract_limit {
            grid_difference(op, k, e, f, t, grid, quad)?
        } else {
            grid_apply(op, k, e, f, grid, quad)?
        };
        columns.push(col.values);
    }
    let r = vf.r();
    let values = (0..grid.len())
        .map(|i| {
            let row: Vec<f64> = columns.iter().map(|c| c[i]).collect();
            lr_norm(&row, r)
        })
        .collect::<Result<Vec<f64>>>()?;
    grid.field(values)
}

fn point(x: &[f64], n: usize) -> Result<[f64; 2]> {
    if x.len() != n || x.iter().any(|c| !c.is_finite()) {
        return Err(Error::param(
            "x",
            format!("expected {n} finite coordinates, got {x:?}"),
        ));
    }
    let mut p = [0.0; 2];
    p[..n].copy_from_slice(x);
    Ok(p)
}

/// Per-(operator, kernel, function) state shared by all evaluation points.
struct Evaluator<'a> {
    op: OpKind,
    n: usize,
    alpha: f64,
    quad: &'a QuadratureSpec,
    /// `Ω` for the signed integral, `|Ω|` otherwise.
    kernel: SphereKernel,
    arcs: ArcIntegrator,
    jumps: Vec<f64>,
    full_circle: f64,
    f: TestFunction,
    comps: Vec<PlacedComponent>,
    trivial: bool,
}

enum Arc {
    Empty,
    Full,
    Half(f64),
}

/// Directions `u` with `x - r u` inside `B(c, radius)`, where `d = |x - c|`:
/// the arc of half width `acos((r^2 + d^2 - radius^2) / (2 r d))` around
/// the direction of `x - c`.
fn arc_state(d: f64, r: f64, radius: f64) -> Arc {
    if d <= 1e-14 * radius {
        return if r < radius { Arc::Full } else { Arc::Empty };
    }
    let c = (r * r + d * d - radius * radius) / (2.0 * r * d);
    if c <= -1.0 {
        Arc::Full
    } else if c >= 1.0 {
        Arc::Empty
    } else {
        Arc::Half(c.acos())
    }
}

impl<'a> Evaluator<'a> {
    fn new(
        op: OpKind,
        k: &SphereKernel,
        e: &Exponents,
        f: &TestFunction,
        quad: &'a QuadratureSpec,
    ) -> Result<Self> {
        quad.validate()?;
        if k.dim() != e.n() || f.dim() != e.n() {
            return Err(Error::param(
                "dim",
                format!(
                    "kernel (n={}), exponents (n={}) and function (n={}) disagree",
                    k.dim(),
                    e.n(),
                    f.dim()
                ),
            ));
        }
        let kernel = if op == OpKind::TSigned {
            k.clone()
        } else {
            k.abs_kernel()
        };
        let f = if op == OpKind::M && e.n() == 2 {
            f.abs()?
        } else {
            f.clone()
        };
        let comps = f.placed();
        let jumps = if e.n() == 2 {
            kernel.discontinuities()
        } else {
            Vec::new()
        };
        let arcs = ArcIntegrator::new(&kernel);
        let full_circle = if e.n() == 2 {
            arcs.arc(0.0, TWO_PI)
        } else {
            0.0
        };
        let trivial = kernel.is_zero() || comps.is_empty();
        Ok(Evaluator {
            op,
            n: e.n(),
            alpha: e.alpha(),
            quad,
            kernel,
            arcs,
            jumps,
            full_circle,
            f,
            comps,
            trivial,
        })
    }

    fn at(&self, x: [f64; 2]) -> Result<f64> {
        if self.trivial {
            return Ok(0.0);
        }
        let v = match (self.op, self.n) {
            (OpKind::M, 1) => self.maximal_1d(x),
            (OpKind::M, _) => self.maximal_2d(x),
            (_, 1) => self.integral_1d(x),
            _ => self.integral_2d(x),
        };
        if v.is_finite() {
            Ok(v)
        } else {
            Err(Error::Numeric {
                context: format!("x = {:?}", &x[..self.n]),
                message: format!("{} evaluated to {v}", self.op),
            })
        }
    }

    /// `∫_a^b r^{α-1} h(r) dr` for `h` smooth on `(a, b)`.
    fn radial_weighted<H: Fn(f64) -> f64>(&self, h: H, a: f64, b: f64) -> f64 {
        if b <= a {
            return 0.0;
        }
        let panels = self.quad.segment_panels();
        let am1 = self.alpha - 1.0;
        if a <= 0.0 {
            let p = self.quad.grading_exponent.unwrap_or(1.0 / self.alpha);
            let scale = b.powf(self.alpha) * p;
            let s_pow = p * self.alpha - 1.0;
            return scale
                * quad::integrate(
                    |s| {
                        let w = if s_pow == 0.0 { 1.0 } else { s.powf(s_pow) };
                        w * h(b * s.powf(p))
                    },
                    0.0,
                    1.0,
                    panels,
                    16,
                );
        }
        let weighted = |r: f64| r.powf(am1) * h(r);
        if a >= 0.25 * (b - a) {
            return quad::integrate_cosine_graded(weighted, a, b, panels, 16);
        }
        // segment starting very close to the singularity: geometric pieces
        let mut total = 0.0;
        let mut lo = a;
        while lo < b {
            let hi = (2.0 * lo).min(b);
            let hi = if b - hi < 0.25 * (hi - lo) { b } else { hi };
            total += quad::integrate_cosine_graded(&weighted, lo, hi, (panels / 2).max(1), 16);
            lo = hi;
        }
        total
    }

    /// Edges (and cone apices) of `f` on the line.
    fn line_kinks(&self) -> Vec<f64> {
        let mut out = Vec::new();
        for c in &self.comps {
            out.push(c.center[0] - c.radius);
            out.push(c.center[0] + c.radius);
            out.push(c.center[0]);
        }
        out
    }

    fn integral_1d(&self, x: [f64; 2]) -> f64 {
        let kinks = self.line_kinks();
        let mut total = 0.0;
        for u in [1.0, -1.0] {
            let omega = self.kernel.eval_sign(u > 0.0);
            if omega == 0.0 {
                continue;
            }
            let mut radii: Vec<f64> = kinks
                .iter()
                .map(|k| u * (x[0] - k))
                .filter(|r| *r > 0.0)
                .collect();
            radii.push(0.0);
            radii.sort_by(f64::total_cmp);
            radii.dedup();
            let h = |r: f64| self.f.eval_point([x[0] - r * u, 0.0]);
            let mut sum = 0.0;
            for w in radii.windows(2) {
                let (a, b) = (w[0], w[1]);
                let probe = [0.25, 0.5, 0.75].map(|s| h(a + s * (b - a)));
                if probe.iter().all(|v| *v == 0.0) {
                    continue;
                }
                sum += self.radial_weighted(h, a, b);
            }
            total += omega * sum;
        }
        total
    }

    /// Radii in `[lo, hi]` where the angular integral of component `c` is not
    /// smooth.
    fn component_radii_2d(&self, c: &PlacedComponent, x: [f64; 2]) -> (f64, f64, Vec<f64>) {
        let v = [x[0] - c.center[0], x[1] - c.center[1]];
        let d = v[0].hypot(v[1]);
        let lo = (d - c.radius).max(0.0);
        let hi = d + c.radius;
        let mut radii = vec![lo, hi, (c.radius - d).abs(), d];
        for &beta in &self.jumps {
            let (cb, sb) = (beta.cos(), beta.sin());
            let vb = v[0] * cb + v[1] * sb;
            let disc = vb * vb - d * d + c.radius * c.radius;
            if disc >= 0.0 {
                let s = disc.sqrt();
                radii.push(vb - s);
                radii.push(vb + s);
            }
        }
        radii.retain(|r| *r >= lo && *r <= hi);
        radii.sort_by(f64::total_cmp);
        radii.dedup();
        (lo, hi, radii)
    }

    /// `∫_{S^1} K(θ) c(x - r θ) dθ` for one placed component.
    fn angular_2d(&self, c: &PlacedComponent, x: [f64; 2], r: f64) -> f64 {
        let v = [x[0] - c.center[0], x[1] - c.center[1]];
        let d = v[0].hypot(v[1]);
        let phi = v[1].atan2(v[0]);
        let (a0, a1) = match arc_state(d, r, c.radius) {
            Arc::Empty => return 0.0,
            Arc::Full => {
                if let Profile::Indicator { .. } = c.profile {
                    return c.amplitude * self.full_circle;
                }
                (phi - PI, phi + PI)
            }
            Arc::Half(a) => (phi - a, phi + a),
        };
        if let Profile::Indicator { .. } = c.profile {
            return c.amplitude * self.arcs.arc(a0, a1);
        }
        let g = |th: f64| {
            let (ct, st) = (th.cos(), th.sin());
            let dist = (v[0] - r * ct).hypot(v[1] - r * st);
            self.kernel.eval_angle(th) * c.value_at_distance(dist)
        };
        self.arc_quadrature(g, a0, a1)
    }

    /// Gauss-Legendre over `[a0, a1]`, split at every jump of the kernel.
    fn arc_quadrature<G: Fn(f64) -> f64>(&self, g: G, a0: f64, a1: f64) -> f64 {
        let mut pts = vec![a0, a1];
        if !self.jumps.is_empty() {
            let first = (a0 / TWO_PI).floor() as i64;
            let last = (a1 / TWO_PI).ceil() as i64;
            for turn in first..=last {
                for b in &self.jumps {
                    let t = b + TWO_PI * turn as f64;
                    if t > a0 && t < a1 {
                        pts.push(t);
                    }
                }
            }
            pts.sort_by(f64::total_cmp);
        }
        pts.windows(2)
            .map(|w| quad::integrate(&g, w[0], w[1], self.quad.arc_panels(w[1] - w[0]), 16))
            .sum()
    }

    fn integral_2d(&self, x: [f64; 2]) -> f64 {
        let mut total = 0.0;
        for c in &self.comps {
            let (_, _, radii) = self.component_radii_2d(c, x);
            let h = |r: f64| self.angular_2d(c, x, r);
            for w in radii.windows(2) {
                total += self.radial_weighted(h, w[0], w[1]);
            }
        }
        total
    }

    /// `sup_r r^{α-n} G(r)` where `G(r) = ∫_0^r s^{n-1} A(s) ds` and `A` is the
    /// angular integral of `|Ω f|`.
    fn maximal_search<A: Fn(f64) -> f64>(
        &self,
        density: A,
        lo: f64,
        hi: f64,
        kinks: Vec<f64>,
    ) -> f64 {
        if !(hi > 0.0) {
            return 0.0;
        }
        let q = self.quad;
        let start = lo.max(hi * 1e-4);
        let m = q.maximal_radius_samples;
        let mut pts: Vec<f64> = (0..m)
            .map(|i| {
                if m == 1 || start >= hi {
                    hi
                } else {
                    start * (hi / start).powf(i as f64 / (m - 1) as f64)
                }
            })
            .collect();
        pts.extend(kinks.into_iter().filter(|r| *r > 0.0 && *r <= hi));
        if lo > 0.0 {
            pts.push(lo);
        }
        pts.push(hi);
        pts.sort_by(f64::total_cmp);
        pts.dedup();
        let nm1 = (self.n - 1) as i32;
        let weight = |s: f64| s.powi(nm1) * density(s);
        let piece = |a: f64, b: f64| {
            quad::integrate_cosine_graded(&weight, a, b, (q.radial_panels / 64).max(1), 8)
        };
        let mut g = Vec::with_capacity(pts.len());
        let mut acc = 0.0;
        let mut prev = 0.0;
        for &p in &pts {
            acc += if prev < lo && p <= lo {
                0.0
            } else {
                piece(prev.max(0.0), p)
            };
            g.push(acc);
            prev = p;
        }
        let gamma = self.n as f64 - self.alpha;
        let objective = |r: f64, gr: f64| gr * r.powf(-gamma);
        let mut vals: Vec<f64> = pts
            .iter()
            .zip(&g)
            .map(|(&r, &gr)| objective(r, gr))
            .collect();
        for _ in 0..q.refinement_passes {
            let best = argmax(&vals);
            let l = best.saturating_sub(1);
            let r = (best + 1).min(pts.len() - 1);
            let mut cand = vec![0.5 * (pts[l] + pts[best]), 0.5 * (pts[best] + pts[r])];
            if l < best && best < r {
                if let Some(v) =
                    parabola_vertex([pts[l], pts[best], pts[r]], [vals[l], vals[best], vals[r]])
                {
                    cand.push(v);
                }
            }
            for c in cand {
                if !(c > 0.0) || pts.iter().any(|p| (p - c).abs() <= 1e-15 * c) {
                    continue;
                }
                let idx = pts.partition_point(|p| *p < c);
                let (base_r, base_g) = if idx == 0 {
                    (0.0, 0.0)
                } else {
                    (pts[idx - 1], g[idx - 1])
                };
                let gc = base_g + piece(base_r, c);
                pts.insert(idx, c);
                g.insert(idx, gc);
                vals.insert(idx, objective(c, gc));
            }
        }
        vals.into_iter().fold(0.0, f64::max)
    }

    fn maximal_1d(&self, x: [f64; 2]) -> f64 {
        let (wp, wm) = (self.kernel.eval_sign(true), self.kernel.eval_sign(false));
        let density = |s: f64| {
            wp * self.f.eval_point([x[0] - s, 0.0]).abs()
                + wm * self.f.eval_point([x[0] + s, 0.0]).abs()
        };
        let kinks: Vec<f64> = self.line_kinks().iter().map(|k| (x[0] - k).abs()).collect();
        let (lo, hi) = self
            .comps
            .iter()
            .fold((f64::INFINITY, 0.0f64), |(lo, hi), c| {
                let d = (x[0] - c.center[0]).abs();
                (lo.min((d - c.radius).max(0.0)), hi.max(d + c.radius))
            });
        self.maximal_search(density, lo, hi, kinks)
    }

    fn maximal_2d(&self, x: [f64; 2]) -> f64 {
        let mut kinks = Vec::new();
        let (mut lo, mut hi) = (f64::INFINITY, 0.0f64);
        for c in &self.comps {
            let (l, h, radii) = self.component_radii_2d(c, x);
            lo = lo.min(l);
            hi = hi.max(h);
            kinks.extend(radii);
        }
        let density = |s: f64| {
            self.comps
                .iter()
                .map(|c| self.angular_2d(c, x, s))
                .sum::<f64>()
        };
        self.maximal_search(density, lo, hi, kinks)
    }
}

fn argmax(v: &[f64]) -> usize {
    let mut best = 0;
    for (i, x) in v.iter().enumerate() {
        if *x > v[best] {
            best = i;
        }
    }
    best
}

/// Vertex of the parabola through three points, when it is a maximum inside
/// the bracket.
fn parabola_vertex(x: [f64; 3], y: [f64; 3]) -> Option<f64> {
    let d1 = (y[1] - y[0]) / (x[1] - x[0]);
    let d2 = (y[2] - y[1]) / (x[2] - x[1]);
    let curv = (d2 - d1) / (x[2] - x[0]);
    if !(curv < 0.0) {
        return None;
    }
    let v = 0.5 * (x[0] + x[1]) - d1 / (2.0 * curv);
    (v > x[0] && v < x[2]).then_some(v)
}
