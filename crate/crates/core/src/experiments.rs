//! Limit runs, rate checks, the exact weak-norm identity, operator-norm
//! lower bounds, the weak Young monitor, convergence-type monitors and the
//! rough-kernel reduction.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::fields::{beta_t, homog_weak_norm_closed, Exponents, HomogeneousField};
use crate::functions::{TestFunction, VectorTestFunction};
use crate::kernel::{SphereKernel, DEFAULT_TABLE_RESOLUTION};
use crate::lorentz::{distribution_measure, weak_quasinorm, DecayCertificate, SampledField};
use crate::operators::{
    grid_apply, grid_difference, sample_homogeneous, vector_lr_field, AnnulusGrid, OpKind,
    QuadratureSpec,
};

/// Levels at which `λ^q |{K > λ}|` is compared with its closed form.
pub const IDENTITY_LEVELS: [f64; 5] = [0.1, 0.5, 1.0, 2.0, 10.0];

/// Relative slack allowed by the monotonicity part of [`rate_check`].
pub const MONOTONE_SLACK: f64 = 0.05;

#[derive(Debug, Clone, PartialEq)]
pub struct LimitRun {
    pub op_kind: OpKind,
    pub rho: f64,
    pub q: f64,
    pub t_schedule: Vec<f64>,
    /// `D(t)` on the grid.
    pub metrics: Vec<f64>,
    pub betas: Vec<f64>,
    /// `(1 + β_t) t + β_t`.
    pub bounds: Vec<f64>,
    /// Least-squares slope of `log D` against `log t` (NaN if undefined).
    pub slope: f64,
    /// Slope of the first `i + 1` points.
    pub slopes_so_far: Vec<f64>,
    /// Closed-form tail beyond the grid, `None` when uncertified.
    pub tail_certificates: Vec<Option<f64>>,
    /// `C_run` per `t` in `|difference| <= C_run t |x|^{-γ}`.
    pub certificate_amplitudes: Vec<f64>,
    pub certificate_gamma: f64,
    /// `l^r` tail of `{||f_j||_1}_{j > J}` for vector runs.
    pub finite_j_tail: Option<f64>,
    pub differences: Vec<SampledField>,
}

impl LimitRun {
    pub fn is_certified(&self) -> bool {
        self.tail_certificates.iter().all(Option::is_some)
    }
}

/// Checks a schedule against `ρ` and the support radius of `f`.
pub fn validate_schedule(rho: f64, ts: &[f64], support_radius: f64) -> Result<()> {
    if !(rho > 0.0) || !rho.is_finite() {
        return Err(Error::param("rho", format!("must be positive, got {rho}")));
    }
    if ts.is_empty() {
        return Err(Error::param("t_schedule", "schedule is empty"));
    }
    for &t in ts {
        if !(t > 0.0) || !t.is_finite() {
            return Err(Error::param(
                "t_schedule",
                format!("t must be positive, got {t}"),
            ));
        }
        if t >= rho / 2.0 {
            return Err(Error::param("t_schedule", "t must be < rho/2"));
        }
        if t * support_radius >= rho {
            return Err(Error::param(
                "t_schedule",
                "t * support_radius must be < rho",
            ));
        }
    }
    if ts.windows(2).any(|w| w[1] >= w[0]) {
        return Err(Error::param(
            "t_schedule",
            "schedule must be strictly decreasing",
        ));
    }
    Ok(())
}

/// Unweighted least-squares slope of `log y` against `log x` over the
/// positive entries.
pub fn loglog_slope(x: &[f64], y: &[f64]) -> f64 {
    let pts: Vec<(f64, f64)> = x
        .iter()
        .zip(y)
        .filter(|(a, b)| **a > 0.0 && **b > 0.0)
        .map(|(a, b)| (a.ln(), b.ln()))
        .collect();
    if pts.len() < 2 {
        return f64::NAN;
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    if sxx == 0.0 {
        f64::NAN
    } else {
        sxy / sxx
    }
}

fn check_grid(grid: &AnnulusGrid, e: &Exponents, rho: f64) -> Result<()> {
    if grid.dim != e.n() {
        return Err(Error::param("dim", "grid and exponent dimensions differ"));
    }
    if grid.rho < rho * (1.0 - 1e-12) {
        return Err(Error::param(
            "grid",
            format!(
                "grid reaches inside B(0, rho): inner radius {} < {rho}",
                grid.rho
            ),
        ));
    }
    Ok(())
}

/// `max |g(x)| |x|^γ` over the outermost ring of cells.
fn outer_ring_amplitude(field: &SampledField, gamma: f64) -> f64 {
    let radius = |p: &[f64; 2]| p[0].hypot(p[1]);
    let outer = field.points.iter().map(radius).fold(0.0, f64::max);
    field
        .points
        .iter()
        .zip(&field.values)
        .filter(|(p, _)| radius(p) >= outer * (1.0 - 1e-12))
        .map(|(p, v)| v.abs() * radius(p).powf(gamma))
        .fold(0.0, f64::max)
}

/// Assembles a run from per-`t` difference fields.
fn assemble_run(
    op: OpKind,
    e: &Exponents,
    rho: f64,
    ts: &[f64],
    fields: Vec<SampledField>,
    zero_moment: bool,
) -> Result<LimitRun> {
    let q = e.q();
    let n = e.n() as f64;
    let gamma = if zero_moment {
        e.gamma() + 1.0
    } else {
        e.gamma()
    };
    let certifiable = gamma * q > n;
    let mut metrics = Vec::new();
    let mut tails = Vec::new();
    let mut amps = Vec::new();
    let mut betas = Vec::new();
    let mut bounds = Vec::new();
    for (field, &t) in fields.iter().zip(ts) {
        let c_run = outer_ring_amplitude(field, gamma) / t;
        let cert = certifiable.then_some(DecayCertificate {
            amplitude: c_run * t,
            gamma,
        });
        let w = weak_quasinorm(field, q, cert)?;
        metrics.push(w.value);
        tails.push(w.tail_certificate);
        amps.push(c_run);
        let b = beta_t(e, rho, t)?;
        betas.push(b);
        bounds.push((1.0 + b) * t + b);
    }
    let slopes_so_far = (0..ts.len())
        .map(|i| loglog_slope(&ts[..=i], &metrics[..=i]))
        .collect();
    Ok(LimitRun {
        op_kind: op,
        rho,
        q,
        t_schedule: ts.to_vec(),
        slope: loglog_slope(ts, &metrics),
        metrics,
        betas,
        bounds,
        slopes_so_far,
        tail_certificates: tails,
        certificate_amplitudes: amps,
        certificate_gamma: gamma,
        finite_j_tail: None,
        differences: fields,
    })
}

/// `D(t) = ||A f_t - K ||f||_1||_{L^{q,∞}}` on the grid for every `t`.
#[allow(clippy::too_many_arguments)]
pub fn limit_run(
    op: OpKind,
    k: &SphereKernel,
    e: &Exponents,
    f: &TestFunction,
    rho: f64,
    ts: &[f64],
    grid: &AnnulusGrid,
    quad: &QuadratureSpec,
) -> Result<LimitRun> {
    validate_schedule(rho, ts, f.support_radius())?;
    check_grid(grid, e, rho)?;
    let fields = ts
        .iter()
        .map(|&t| grid_difference(op, k, e, f, t, grid, quad))
        .collect::<Result<Vec<_>>>()?;
    assemble_run(op, e, rho, ts, fields, f.has_zero_first_moment())
}

/// [`limit_run`] for the pointwise `l^r` composite of a finite sequence.
#[allow(clippy::too_many_arguments)]
pub fn vector_limit_run(
    op: OpKind,
    k: &SphereKernel,
    e: &Exponents,
    vf: &VectorTestFunction,
    rho: f64,
    ts: &[f64],
    grid: &AnnulusGrid,
    quad: &QuadratureSpec,
) -> Result<LimitRun> {
    validate_schedule(rho, ts, vf.support_radius())?;
    check_grid(grid, e, rho)?;
    let fields = ts
        .iter()
        .map(|&t| vector_lr_field(op, k, e, vf, grid, quad, true, t))
        .collect::<Result<Vec<_>>>()?;
    let zero_moment = vf.entries().iter().all(TestFunction::has_zero_first_moment);
    let mut run = assemble_run(op, e, rho, ts, fields, zero_moment)?;
    // the sequence is finite, so nothing is left beyond J
    run.finite_j_tail = Some(0.0);
    Ok(run)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Verdict {
    Pass,
    Fail,
    Inconclusive,
}

impl std::fmt::Display for Verdict {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Verdict::Pass => "pass",
            Verdict::Fail => "fail",
            Verdict::Inconclusive => "inconclusive",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RateReport {
    pub verdict: Verdict,
    /// `max_t D(t) / bound(t)`.
    pub smallest_c: f64,
    pub within_bound: bool,
    pub monotone: bool,
}

/// `D(t) <= C ((1 + β_t) t + β_t)` for every `t`, and `D` nonincreasing up
/// to 5% with a net decrease over the schedule unless `D ≡ 0`.
pub fn rate_check(run: &LimitRun, c: f64) -> RateReport {
    let smallest_c = run
        .metrics
        .iter()
        .zip(&run.bounds)
        .map(|(d, b)| d / b)
        .fold(0.0, f64::max);
    let within_bound = run
        .metrics
        .iter()
        .zip(&run.bounds)
        .all(|(d, b)| *d <= c * b);
    let all_zero = run.metrics.iter().all(|d| *d == 0.0);
    let monotone = all_zero
        || (run
            .metrics
            .windows(2)
            .all(|w| w[1] <= (1.0 + MONOTONE_SLACK) * w[0])
            && run.metrics.last() < run.metrics.first());
    let verdict = if !run.is_certified() {
        Verdict::Inconclusive
    } else if within_bound && monotone {
        Verdict::Pass
    } else {
        Verdict::Fail
    };
    RateReport {
        verdict,
        smallest_c,
        within_bound,
        monotone,
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct IdentityReport {
    pub closed_form: f64,
    pub numeric: f64,
    pub rel_err: f64,
    /// `λ^q |{|K| > λ}|` at [`IDENTITY_LEVELS`].
    pub level_values: Vec<f64>,
    /// Worst relative deviation of `level_values` from `||Ω||_q^q / n`.
    pub level_rel_err: f64,
    pub tail_certificate: Option<f64>,
}

/// Compares the sampled weak norm of `|Ω(x)|/|x|^{n-α}` with its closed form.
///
/// The limit field decays at the critical rate `γ q = n`, so no tail
/// certificate exists; the grid itself has to be wide.
pub fn identity_check(
    k: &SphereKernel,
    e: &Exponents,
    grid: &AnnulusGrid,
) -> Result<IdentityReport> {
    let closed = homog_weak_norm_closed(k, e)?;
    let field = HomogeneousField::new(k.clone(), *e, false)?;
    let sampled = sample_homogeneous(&field, grid)?;
    let q = e.q();
    let numeric = weak_quasinorm(&sampled, q, None)?;
    let target = closed.powf(q);
    let level_values = IDENTITY_LEVELS
        .iter()
        .map(|&l| Ok(l.powf(q) * distribution_measure(&sampled, l)?))
        .collect::<Result<Vec<f64>>>()?;
    let rel = |a: f64, b: f64| {
        if b == 0.0 {
            if a == 0.0 {
                0.0
            } else {
                f64::INFINITY
            }
        } else {
            (a - b).abs() / b
        }
    };
    Ok(IdentityReport {
        closed_form: closed,
        numeric: numeric.value,
        rel_err: rel(numeric.value, closed),
        level_rel_err: level_values
            .iter()
            .map(|v| rel(*v, target))
            .fold(0.0, f64::max),
        level_values,
        tail_certificate: numeric.tail_certificate,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct NormRatioReport {
    /// Largest ratio over the family.
    pub value: f64,
    /// Per family entry; `None` for skipped entries.
    pub ratios: Vec<Option<f64>>,
    pub warnings: Vec<String>,
}

fn norm_ratios(
    op: OpKind,
    k: &SphereKernel,
    e: &Exponents,
    family: &[TestFunction],
    grid: &AnnulusGrid,
    quad: &QuadratureSpec,
    denominator: f64,
) -> Result<NormRatioReport> {
    if family.is_empty() {
        return Err(Error::param("family", "family must not be empty"));
    }
    let mut ratios = Vec::with_capacity(family.len());
    let mut warnings = Vec::new();
    for (i, f) in family.iter().enumerate() {
        if f.l1_norm() == 0.0 {
            warnings.push(format!(
                "family entry {i} ({f}) has zero L1 norm and was skipped"
            ));
            ratios.push(None);
            continue;
        }
        if denominator == 0.0 {
            ratios.push(Some(0.0));
            continue;
        }
        let field = grid_apply(op, k, e, f, grid, quad)?;
        let w = weak_quasinorm(&field, e.q(), None)?;
        ratios.push(Some(w.value / (denominator * f.l1_norm())));
    }
    let value = ratios.iter().flatten().fold(0.0, |m: f64, r| m.max(*r));
    Ok(NormRatioReport {
        value,
        ratios,
        warnings,
    })
}

/// `max_f ||A f||_{L^{q,∞}(grid)} / ||f||_1`.
pub fn opnorm_lower_bound(
    op: OpKind,
    k: &SphereKernel,
    e: &Exponents,
    family: &[TestFunction],
    grid: &AnnulusGrid,
    quad: &QuadratureSpec,
) -> Result<NormRatioReport> {
    norm_ratios(op, k, e, family, grid, quad, 1.0)
}

/// `max_f ||T_{|Ω|} f||_{q,∞} / (||K||_{q,∞} ||f||_1)` with `K` the limit
/// field; recorded, not compared against a theoretical constant.
pub fn young_monitor(
    k: &SphereKernel,
    e: &Exponents,
    family: &[TestFunction],
    grid: &AnnulusGrid,
    quad: &QuadratureSpec,
) -> Result<NormRatioReport> {
    let closed = homog_weak_norm_closed(k, e)?;
    norm_ratios(OpKind::TAbs, k, e, family, grid, quad, closed)
}

/// `count` random signed bump mixtures drawn from a seeded generator.
pub fn random_family(dim: usize, count: usize, seed: u64) -> Result<Vec<TestFunction>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|i| TestFunction::random_mixture(dim, 1 + i % 3, &mut rng))
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct TypesRow {
    pub t: f64,
    pub lambda: f64,
    /// `||f_(t) - f||_{L^{q,∞}}`.
    pub type1: f64,
    /// `|{|f_(t) - f| > λ}|`.
    pub type2: f64,
    /// `| |{|f_(t)| > λ}| - |{|f| > λ}| |`.
    pub type3: f64,
}

impl TypesRow {
    /// `type2 <= (type1 / λ)^q`, checked as `λ type2^{1/q} <= type1`.
    pub fn chebyshev_holds(&self, q: f64) -> bool {
        self.lambda * self.type2.powf(1.0 / q) <= self.type1
    }
}

/// Type-1/2/3 convergence metrics of a family against its target.
pub fn convergence_types(
    family: &[(f64, SampledField)],
    target: &SampledField,
    lambdas: &[f64],
    q: f64,
) -> Result<Vec<TypesRow>> {
    let mut rows = Vec::new();
    for (t, field) in family {
        if !field.same_grid(target) {
            return Err(Error::param(
                "grid",
                format!("field for t = {t} is sampled on a different grid"),
            ));
        }
        let diff = field.zip_with(target, |a, b| a - b)?;
        let type1 = weak_quasinorm(&diff, q, None)?.value;
        for &lambda in lambdas {
            rows.push(TypesRow {
                t: *t,
                lambda,
                type1,
                type2: distribution_measure(&diff, lambda)?,
                type3: (distribution_measure(field, lambda)?
                    - distribution_measure(target, lambda)?)
                .abs(),
            });
        }
    }
    Ok(rows)
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReductionRow {
    pub eps: f64,
    /// `||Ω - Ω_ε||_{L^q(S^{n-1})}`.
    pub lq_distance: f64,
    /// `D(t)` for the rough kernel.
    pub d_rough: f64,
    /// `D(t)` for the mollified kernel.
    pub d_smooth: f64,
    /// `||M_{Ω - Ω_ε} f_t||_{q,∞}`.
    pub maximal_difference: f64,
    /// `||f||_1 ||(Ω - Ω_ε)(x) / |x|^{n-α}||_{q,∞}`.
    pub field_difference: f64,
    /// `d_rough / (d_smooth + maximal_difference + field_difference)`.
    pub ratio: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReductionReport {
    pub rows: Vec<ReductionRow>,
    /// The split holds with constant at most 4 at every `ε`.
    pub holds: bool,
    pub distances_decreasing: bool,
}

/// Splits `D(t)` for a rough kernel through its cap mollifications:
/// `D_Ω <= 4 (D_{Ω_ε} + ||M_{Ω-Ω_ε} f_t|| + ||f||_1 ||(Ω-Ω_ε)-field||)`.
#[allow(clippy::too_many_arguments)]
pub fn reduction_decomposition(
    k_rough: &SphereKernel,
    eps_schedule: &[f64],
    e: &Exponents,
    f: &TestFunction,
    rho: f64,
    t: f64,
    grid: &AnnulusGrid,
    quad: &QuadratureSpec,
) -> Result<ReductionReport> {
    if eps_schedule.is_empty() || eps_schedule.windows(2).any(|w| w[1] >= w[0]) {
        return Err(Error::param(
            "eps_schedule",
            "must be nonempty and strictly decreasing",
        ));
    }
    validate_schedule(rho, &[t], f.support_radius())?;
    check_grid(grid, e, rho)?;
    let q = e.q();
    let weak = |field: &SampledField| -> Result<f64> { Ok(weak_quasinorm(field, q, None)?.value) };
    let d_rough = weak(&grid_difference(OpKind::M, k_rough, e, f, t, grid, quad)?)?;
    let ft = f.rescale(t)?;
    let mut rows = Vec::new();
    for &eps in eps_schedule {
        let smooth = k_rough.mollify(eps, DEFAULT_TABLE_RESOLUTION)?;
        let diff_kernel = k_rough.difference(&smooth)?;
        let d_smooth = weak(&grid_difference(OpKind::M, &smooth, e, f, t, grid, quad)?)?;
        let maximal_difference = weak(&grid_apply(OpKind::M, &diff_kernel, e, &ft, grid, quad)?)?;
        let diff_field = HomogeneousField::new(diff_kernel.clone(), *e, false)?;
        let field_difference = f.l1_norm() * weak(&sample_homogeneous(&diff_field, grid)?)?;
        let rhs = d_smooth + maximal_difference + field_difference;
        rows.push(ReductionRow {
            eps,
            lq_distance: diff_kernel.sphere_norm(q)?,
            d_rough,
            d_smooth,
            maximal_difference,
            field_difference,
            ratio: if rhs > 0.0 {
                d_rough / rhs
            } else if d_rough == 0.0 {
                0.0
            } else {
                f64::INFINITY
            },
        });
    }
    let holds = rows.iter().all(|r| r.ratio <= 4.0);
    let distances_decreasing = rows.windows(2).all(|w| w[1].lq_distance < w[0].lq_distance);
    Ok(ReductionReport {
        rows,
        holds,
        distances_decreasing,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn slope_of_power_law() {
        let t = [0.2, 0.1, 0.05];
        let d: Vec<f64> = t.iter().map(|x: &f64| 3.0 * x.powf(1.7)).collect();
        assert!((loglog_slope(&t, &d) - 1.7).abs() < 1e-12);
        assert!(loglog_slope(&t, &[0.0; 3]).is_nan());
    }

    #[test]
    fn schedule_validation() {
        assert!(validate_schedule(1.0, &[0.2, 0.1], 0.5).is_ok());
        let err = validate_schedule(1.0, &[0.6, 0.3], 0.5).unwrap_err();
        assert_eq!(err.to_string(), "t_schedule: t must be < rho/2");
        assert!(validate_schedule(1.0, &[0.1, 0.2], 0.5).is_err());
        assert!(validate_schedule(1.0, &[0.4], 3.0).is_err());
    }

    #[test]
    fn chebyshev_row() {
        let row = TypesRow {
            t: 0.1,
            lambda: 0.5,
            type1: 1.0,
            type2: 4.0,
            type3: 0.0,
        };
        assert!(row.chebyshev_holds(2.0));
        assert!(!TypesRow { type2: 4.1, ..row }.chebyshev_holds(2.0));
    }
}
