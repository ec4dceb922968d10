//! Batch front end: `limweak <command> [flags]`.
//!
//! Exit codes: 0 on success, 2 on invalid configuration (nothing written),
//! 1 on numeric failure.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use clap::{Args, Parser, Subcommand};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::experiments::{self, LimitRun};
use crate::fields::{homog_weak_norm_closed, Exponents};
use crate::functions::{TestFunction, VectorTestFunction};
use crate::kernel::{dini_integral, DiniConfig, SphereKernel};
use crate::operators::{AnnulusGrid, OpKind, QuadratureSpec};

#[derive(Parser, Debug)]
#[command(
    name = "limweak",
    version,
    about = "Rough-kernel fractional operators and weak-type limit experiments"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Sphere norms of the kernel, L1 norm of f, closed-form weak norm.
    Norms(Flags),
    /// Dini modulus on a dyadic grid and the Dini integral.
    Dini(Flags),
    /// Sampled weak norm of the limit field against its closed form.
    Identity(Flags),
    /// D(t) along a schedule of t.
    Limit(Flags),
    /// D(t) for the l^r composite of several functions (--f repeated).
    VectorLimit(Flags),
    /// Lower bound for the L1 -> weak-L^q operator norm over f_t.
    Opnorm(Flags),
    /// Weak Young ratios over seeded random mixtures.
    Young(Flags),
    /// Type-1/2/3 convergence monitors for translation families (n = 1).
    Types(Flags),
    /// Rough-kernel reduction through cap mollifications.
    Reduce(Flags),
}

#[derive(Args, Debug, Clone, Default)]
struct Flags {
    #[arg(long)]
    dim: Option<String>,
    #[arg(long)]
    alpha: Option<String>,
    #[arg(long)]
    kernel: Option<String>,
    /// Test function; repeat for vector runs.
    #[arg(long = "f")]
    f: Vec<String>,
    /// l^r exponent for vector runs.
    #[arg(long)]
    r: Option<String>,
    #[arg(long)]
    rho: Option<String>,
    /// Comma list or geo:<t0>,<ratio>,<count>.
    #[arg(long)]
    t: Option<String>,
    #[arg(long = "grid-res")]
    grid_res: Option<String>,
    #[arg(long = "rmax-mult")]
    rmax_mult: Option<String>,
    /// CSV output path; the manifest goes next to it.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    config: Option<PathBuf>,
    /// Operator: M, T_abs or T_signed.
    #[arg(long)]
    op: Option<String>,
    /// Exponent of the Dini modulus.
    #[arg(long)]
    q: Option<String>,
    /// Order of the Dini condition.
    #[arg(long)]
    s: Option<String>,
    #[arg(long)]
    levels: Option<String>,
    /// Mollification radii for `reduce`.
    #[arg(long)]
    eps: Option<String>,
    /// Levels for `types`.
    #[arg(long)]
    lambda: Option<String>,
    /// `translate` or `disjoint` for `types`.
    #[arg(long)]
    family: Option<String>,
    #[arg(long)]
    count: Option<String>,
    #[arg(long)]
    seed: Option<String>,
    #[arg(long = "angular-nodes")]
    angular_nodes: Option<String>,
    #[arg(long = "radial-panels")]
    radial_panels: Option<String>,
    #[arg(long = "maximal-radius-samples")]
    maximal_radius_samples: Option<String>,
    #[arg(long = "refinement-passes")]
    refinement_passes: Option<String>,
    /// Record wall-clock time in the manifest (breaks byte-identical manifests).
    #[arg(long = "record-time")]
    record_time: bool,
}

/// Keys accepted in config files (any section).
const CONFIG_KEYS: &[&str] = &[
    "dim",
    "alpha",
    "kernel",
    "f",
    "r",
    "rho",
    "t",
    "grid_res",
    "rmax_mult",
    "out",
    "op",
    "q",
    "s",
    "levels",
    "eps",
    "lambda",
    "family",
    "count",
    "seed",
    "angular_nodes",
    "radial_panels",
    "maximal_radius_samples",
    "refinement_passes",
];

/// Runs the CLI on `argv` (program name first) and returns the exit code.
pub fn run_cli<I, S>(argv: I) -> i32
where
    I: IntoIterator<Item = S>,
    S: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    let (name, flags) = match cli.command {
        Command::Norms(f) => ("norms", f),
        Command::Dini(f) => ("dini", f),
        Command::Identity(f) => ("identity", f),
        Command::Limit(f) => ("limit", f),
        Command::VectorLimit(f) => ("vector-limit", f),
        Command::Opnorm(f) => ("opnorm", f),
        Command::Young(f) => ("young", f),
        Command::Types(f) => ("types", f),
        Command::Reduce(f) => ("reduce", f),
    };
    let run = match resolve(name, &flags) {
        Ok(r) => r,
        Err(e) => {
            eprintln!("error: {e}");
            return 2;
        }
    };
    match execute(&run) {
        Ok(out) => match emit(&run, &out) {
            Ok(()) => 0,
            Err(e) => {
                eprintln!("error: {e}");
                1
            }
        },
        Err(e) if e.is_validation() => {
            eprintln!("error: {e}");
            2
        }
        Err(e) => {
            eprintln!("error: {e}");
            1
        }
    }
}

/// Fully validated configuration of one invocation.
#[derive(Debug, Clone)]
pub struct RunConfig {
    pub command: String,
    pub dim: usize,
    pub alpha: f64,
    pub kernel_spec: String,
    pub f_specs: Vec<String>,
    pub r: f64,
    pub rho: f64,
    pub t_spec: String,
    pub t_schedule: Vec<f64>,
    pub grid_res: usize,
    pub rmax_mult: f64,
    pub quad: QuadratureSpec,
    pub op: OpKind,
    pub q: f64,
    pub s: f64,
    pub levels: usize,
    pub eps: Vec<f64>,
    pub lambdas: Vec<f64>,
    pub family: String,
    pub count: usize,
    pub seed: u64,
    pub out: Option<PathBuf>,
    pub record_time: bool,
    exps: Exponents,
    kernel: SphereKernel,
    functions: Vec<TestFunction>,
}

impl RunConfig {
    /// `key = value` lines for every resolved parameter, in a fixed order.
    pub fn parameter_lines(&self) -> Vec<(String, String)> {
        let list = |v: &[f64]| v.iter().map(|x| fmt_sig(*x)).collect::<Vec<_>>().join(",");
        let q = &self.quad;
        vec![
            ("command".into(), self.command.clone()),
            ("dim".into(), self.dim.to_string()),
            ("alpha".into(), fmt_sig(self.alpha)),
            ("q_weak".into(), fmt_sig(self.exps.q())),
            ("kernel".into(), self.kernel_spec.clone()),
            ("f".into(), self.f_specs.join(" | ")),
            ("r".into(), fmt_sig(self.r)),
            ("rho".into(), fmt_sig(self.rho)),
            ("t".into(), self.t_spec.clone()),
            ("t_schedule".into(), list(&self.t_schedule)),
            ("grid_res".into(), self.grid_res.to_string()),
            ("rmax_mult".into(), fmt_sig(self.rmax_mult)),
            ("op".into(), self.op.to_string()),
            ("dini_q".into(), fmt_sig(self.q)),
            ("dini_s".into(), fmt_sig(self.s)),
            ("levels".into(), self.levels.to_string()),
            ("eps".into(), list(&self.eps)),
            ("lambda".into(), list(&self.lambdas)),
            ("family".into(), self.family.clone()),
            ("count".into(), self.count.to_string()),
            ("seed".into(), self.seed.to_string()),
            ("angular_nodes".into(), q.angular_nodes.to_string()),
            ("radial_panels".into(), q.radial_panels.to_string()),
            (
                "grading_exponent".into(),
                q.grading_exponent.map_or("1/alpha".into(), fmt_sig),
            ),
            (
                "maximal_radius_samples".into(),
                q.maximal_radius_samples.to_string(),
            ),
            ("refinement_passes".into(), q.refinement_passes.to_string()),
        ]
    }

    /// First 16 hex digits of the SHA-256 of the parameter lines.
    pub fn config_hash(&self) -> String {
        let mut h = Sha256::new();
        for (k, v) in self.parameter_lines() {
            h.update(k.as_bytes());
            h.update(b"=");
            h.update(v.as_bytes());
            h.update(b"\n");
        }
        h.finalize()
            .iter()
            .take(8)
            .map(|b| format!("{b:02x}"))
            .collect()
    }
}

fn read_config(path: &Path) -> Result<BTreeMap<String, String>> {
    let ini = ini::Ini::load_from_file(path)
        .map_err(|e| Error::config("config", format!("cannot read {}: {e}", path.display())))?;
    let mut map = BTreeMap::new();
    for (_, props) in ini.iter() {
        for (k, v) in props.iter() {
            let key = k.trim().replace('-', "_");
            if !CONFIG_KEYS.contains(&key.as_str()) {
                return Err(Error::config(key, "unknown config key"));
            }
            map.insert(key, v.trim().to_string());
        }
    }
    Ok(map)
}

fn parse_num<T: FromStr>(key: &str, v: &str) -> Result<T> {
    v.trim()
        .parse::<T>()
        .map_err(|_| Error::config(key, format!("cannot parse `{v}`")))
}

fn parse_list(key: &str, v: &str) -> Result<Vec<f64>> {
    v.split(',')
        .filter(|s| !s.trim().is_empty())
        .map(|s| parse_num::<f64>(key, s))
        .collect()
}

/// `0.2,0.1,0.05` or `geo:<t0>,<ratio>,<count>`.
pub fn parse_schedule(spec: &str) -> Result<Vec<f64>> {
    if let Some(rest) = spec.trim().strip_prefix("geo:") {
        let parts: Vec<&str> = rest.split(',').collect();
        if parts.len() != 3 {
            return Err(Error::config(
                "t_schedule",
                "expected geo:<t0>,<ratio>,<count>",
            ));
        }
        let t0: f64 = parse_num("t_schedule", parts[0])?;
        let ratio: f64 = parse_num("t_schedule", parts[1])?;
        let count: usize = parse_num("t_schedule", parts[2])?;
        if count == 0 || !(ratio > 0.0 && ratio < 1.0) {
            return Err(Error::config(
                "t_schedule",
                "need count >= 1 and ratio in (0, 1)",
            ));
        }
        return Ok((0..count).map(|i| t0 * ratio.powi(i as i32)).collect());
    }
    let v = parse_list("t_schedule", spec)?;
    if v.is_empty() {
        return Err(Error::config("t_schedule", "empty schedule"));
    }
    Ok(v)
}

struct Defaults {
    rho: f64,
    rmax_mult: f64,
    grid_res: usize,
    t: &'static str,
}

fn defaults(command: &str) -> Defaults {
    match command {
        "opnorm" | "young" => Defaults {
            rho: 1e-3,
            rmax_mult: 1e5,
            grid_res: 256,
            t: "0.025",
        },
        "reduce" => Defaults {
            rho: 1.0,
            rmax_mult: 64.0,
            grid_res: 64,
            t: "0.025",
        },
        "types" => Defaults {
            rho: 1.0,
            rmax_mult: 64.0,
            grid_res: 1000,
            t: "0.2,0.1,0.05,0.025",
        },
        _ => Defaults {
            rho: 1.0,
            rmax_mult: 64.0,
            grid_res: 128,
            t: "geo:0.2,0.5,4",
        },
    }
}

fn resolve(command: &str, flags: &Flags) -> Result<RunConfig> {
    let cfg = match &flags.config {
        Some(p) => read_config(p)?,
        None => BTreeMap::new(),
    };
    let pick = |flag: &Option<String>, key: &str| -> Option<String> {
        flag.clone().or_else(|| cfg.get(key).cloned())
    };
    let d = defaults(command);
    let dim: usize = parse_num("dim", &pick(&flags.dim, "dim").unwrap_or("1".into()))?;
    if dim != 1 && dim != 2 {
        return Err(Error::config(
            "dim",
            format!("dimension must be 1 or 2, got {dim}"),
        ));
    }
    let alpha: f64 = parse_num(
        "alpha",
        &pick(&flags.alpha, "alpha").unwrap_or(if dim == 1 { "0.5" } else { "1" }.into()),
    )?;
    let exps = Exponents::new(dim, alpha).map_err(|e| Error::config("alpha", e.to_string()))?;
    let kernel_spec = pick(&flags.kernel, "kernel").unwrap_or("const:1".into());
    let kernel = SphereKernel::parse(&kernel_spec, dim)?;
    let f_specs: Vec<String> = if !flags.f.is_empty() {
        flags.f.clone()
    } else if let Some(v) = cfg.get("f") {
        v.split('|')
            .map(|s| s.trim().to_string())
            .filter(|s| !s.is_empty())
            .collect()
    } else {
        vec!["indicator:0.5".into()]
    };
    let functions = f_specs
        .iter()
        .map(|s| TestFunction::parse(s, dim))
        .collect::<Result<Vec<_>>>()?;
    let r: f64 = parse_num("r", &pick(&flags.r, "r").unwrap_or("2".into()))?;
    if !(r > 1.0) || !r.is_finite() {
        return Err(Error::config(
            "r",
            format!("exponent must lie in (1, inf), got {r}"),
        ));
    }
    let rho: f64 = match pick(&flags.rho, "rho") {
        Some(v) => parse_num("rho", &v)?,
        None => d.rho,
    };
    if !(rho > 0.0) || !rho.is_finite() {
        return Err(Error::config("rho", format!("must be positive, got {rho}")));
    }
    let t_spec = pick(&flags.t, "t").unwrap_or(d.t.into());
    let t_schedule = parse_schedule(&t_spec)?;
    let grid_res: usize = match pick(&flags.grid_res, "grid_res") {
        Some(v) => parse_num("grid_res", &v)?,
        None => d.grid_res,
    };
    if grid_res < 8 {
        return Err(Error::config(
            "grid_res",
            format!("must be at least 8, got {grid_res}"),
        ));
    }
    let rmax_mult: f64 = match pick(&flags.rmax_mult, "rmax_mult") {
        Some(v) => parse_num("rmax_mult", &v)?,
        None => d.rmax_mult,
    };
    if !(rmax_mult > 1.0) || !rmax_mult.is_finite() {
        return Err(Error::config(
            "rmax_mult",
            format!("must exceed 1, got {rmax_mult}"),
        ));
    }
    let mut quad = QuadratureSpec::default();
    if let Some(v) = pick(&flags.angular_nodes, "angular_nodes") {
        quad.angular_nodes = parse_num("angular_nodes", &v)?;
    }
    if let Some(v) = pick(&flags.radial_panels, "radial_panels") {
        quad.radial_panels = parse_num("radial_panels", &v)?;
    }
    if let Some(v) = pick(&flags.maximal_radius_samples, "maximal_radius_samples") {
        quad.maximal_radius_samples = parse_num("maximal_radius_samples", &v)?;
    }
    if let Some(v) = pick(&flags.refinement_passes, "refinement_passes") {
        quad.refinement_passes = parse_num("refinement_passes", &v)?;
    }
    quad.validate().map_err(|e| match e {
        Error::Parameter { name, message } => Error::config(name, message),
        other => other,
    })?;
    let op = OpKind::from_str(&pick(&flags.op, "op").unwrap_or("M".into()))?;
    let q: f64 = parse_num("q", &pick(&flags.q, "q").unwrap_or("1".into()))?;
    let s: f64 = parse_num("s", &pick(&flags.s, "s").unwrap_or("0.5".into()))?;
    let levels: usize = parse_num(
        "levels",
        &pick(&flags.levels, "levels").unwrap_or("12".into()),
    )?;
    let eps = parse_list(
        "eps",
        &pick(&flags.eps, "eps").unwrap_or("0.4,0.2,0.1".into()),
    )?;
    let lambdas = parse_list(
        "lambda",
        &pick(&flags.lambda, "lambda").unwrap_or("0.1,0.5".into()),
    )?;
    let family = pick(&flags.family, "family").unwrap_or("translate".into());
    let count: usize = parse_num("count", &pick(&flags.count, "count").unwrap_or("20".into()))?;
    let seed: u64 = parse_num("seed", &pick(&flags.seed, "seed").unwrap_or("7".into()))?;
    let out = flags
        .out
        .clone()
        .or_else(|| cfg.get("out").map(PathBuf::from));

    let run = RunConfig {
        command: command.to_string(),
        dim,
        alpha,
        kernel_spec,
        f_specs,
        r,
        rho,
        t_spec,
        t_schedule,
        grid_res,
        rmax_mult,
        quad,
        op,
        q,
        s,
        levels,
        eps,
        lambdas,
        family,
        count,
        seed,
        out,
        record_time: flags.record_time,
        exps,
        kernel,
        functions,
    };
    validate_for_command(&run)?;
    Ok(run)
}

/// Command-specific checks, all before any computation.
fn validate_for_command(run: &RunConfig) -> Result<()> {
    let support = run
        .functions
        .iter()
        .map(TestFunction::support_radius)
        .fold(0.0, f64::max);
    match run.command.as_str() {
        "limit" | "vector-limit" | "reduce" => {
            experiments::validate_schedule(run.rho, &run.t_schedule, support)?;
        }
        "opnorm" | "types" if run.t_schedule.iter().any(|t| !(*t > 0.0)) => {
            return Err(Error::config("t_schedule", "t must be positive"));
        }
        _ => {}
    }
    if run.command == "reduce" {
        if run.t_schedule.len() != 1 {
            return Err(Error::config("t_schedule", "reduce takes a single t"));
        }
        if run.dim != 2 {
            return Err(Error::config("dim", "reduce needs dimension 2"));
        }
        if run.eps.is_empty() || run.eps.windows(2).any(|w| w[1] >= w[0]) {
            return Err(Error::config(
                "eps",
                "must be nonempty and strictly decreasing",
            ));
        }
        if run
            .eps
            .iter()
            .any(|e| !(*e > 0.0 && *e <= std::f64::consts::FRAC_PI_4))
        {
            return Err(Error::config("eps", "cap radii must lie in (0, pi/4]"));
        }
    }
    if run.command == "vector-limit" && run.functions.is_empty() {
        return Err(Error::config("f", "need at least one function"));
    }
    if run.command == "types" {
        if run.dim != 1 {
            return Err(Error::config("dim", "types monitors run in dimension 1"));
        }
        if run.family != "translate" && run.family != "disjoint" {
            return Err(Error::config("family", "expected translate or disjoint"));
        }
        if run.lambdas.iter().any(|l| !(*l > 0.0)) {
            return Err(Error::config("lambda", "levels must be positive"));
        }
    }
    if run.command == "dini" {
        if !(run.q >= 1.0) {
            return Err(Error::config("q", "exponent must be >= 1"));
        }
        if !(run.s >= 0.0 && run.s < run.dim as f64) {
            return Err(Error::config("s", "order must lie in [0, n)"));
        }
        if run.levels < 4 {
            return Err(Error::config("levels", "need at least 4 levels"));
        }
    }
    if run.command == "young" && run.count == 0 {
        return Err(Error::config("count", "need at least one function"));
    }
    Ok(())
}

/// Result of one command: CSV table plus extra manifest lines.
pub struct Output {
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
    pub notes: Vec<(String, String)>,
}

impl Output {
    fn new(header: &[&str]) -> Self {
        Output {
            header: header.iter().map(|s| s.to_string()).collect(),
            rows: Vec::new(),
            notes: Vec::new(),
        }
    }
}

/// `%.9g`-style formatting.
pub fn fmt_sig(x: f64) -> String {
    if x.is_nan() {
        return "nan".into();
    }
    if x.is_infinite() {
        return if x > 0.0 { "inf".into() } else { "-inf".into() };
    }
    if x == 0.0 {
        return "0".into();
    }
    let sci = format!("{x:.8e}");
    let (mant, exp) = sci.split_once('e').unwrap();
    let exp: i32 = exp.parse().unwrap();
    if (-4..9).contains(&exp) {
        let decimals = (8 - exp).max(0) as usize;
        let s = format!("{x:.decimals$}");
        if s.contains('.') {
            s.trim_end_matches('0').trim_end_matches('.').to_string()
        } else {
            s
        }
    } else {
        let mant = if mant.contains('.') {
            mant.trim_end_matches('0').trim_end_matches('.')
        } else {
            mant
        };
        format!("{mant}e{exp}")
    }
}

fn limit_grid(run: &RunConfig) -> Result<AnnulusGrid> {
    AnnulusGrid::for_limit(run.dim, run.rho, run.grid_res, run.rmax_mult)
}

fn limit_rows(out: &mut Output, run: &LimitRun) {
    for i in 0..run.t_schedule.len() {
        out.rows.push(vec![
            fmt_sig(run.t_schedule[i]),
            fmt_sig(run.betas[i]),
            fmt_sig(run.metrics[i]),
            fmt_sig(run.bounds[i]),
            fmt_sig(run.slopes_so_far[i]),
            run.tail_certificates[i].map_or("uncertified".into(), fmt_sig),
        ]);
    }
    let rate = experiments::rate_check(run, 2.0);
    out.notes.push(("slope".into(), fmt_sig(run.slope)));
    out.notes
        .push(("certificate_gamma".into(), fmt_sig(run.certificate_gamma)));
    out.notes.push((
        "certificate_amplitudes".into(),
        run.certificate_amplitudes
            .iter()
            .map(|c| fmt_sig(*c))
            .collect::<Vec<_>>()
            .join(","),
    ));
    out.notes
        .push(("rate_smallest_c".into(), fmt_sig(rate.smallest_c)));
    out.notes
        .push(("rate_monotone".into(), rate.monotone.to_string()));
    out.notes
        .push(("rate_verdict_c2".into(), rate.verdict.to_string()));
    if let Some(tail) = run.finite_j_tail {
        out.notes.push(("finite_j_tail".into(), fmt_sig(tail)));
    }
}

fn execute(run: &RunConfig) -> Result<Output> {
    let k = &run.kernel;
    let e = &run.exps;
    let f = &run.functions[0];
    let quad = &run.quad;
    match run.command.as_str() {
        "norms" => {
            let mut out = Output::new(&["quantity", "value"]);
            let qw = e.q();
            for (name, v) in [
                ("kernel_l1_norm", k.sphere_norm(1.0)?),
                ("kernel_l2_norm", k.sphere_norm(2.0)?),
                ("kernel_lq_norm", k.sphere_norm(qw)?),
                ("kernel_sup", k.sup_abs()),
                ("f_l1_norm", f.l1_norm()),
                ("f_support_radius", f.support_radius()),
                ("q", qw),
                ("limit_weak_norm", homog_weak_norm_closed(k, e)?),
            ] {
                out.rows.push(vec![name.into(), fmt_sig(v)]);
            }
            let lip = k.lipschitz_estimate();
            out.notes.push((
                "lipschitz".into(),
                lip.finite().map_or("unbounded".into(), fmt_sig),
            ));
            Ok(out)
        }
        "dini" => {
            let cfg = DiniConfig {
                levels: run.levels,
                ..DiniConfig::default()
            };
            let rep = dini_integral(k, run.q, run.s, &cfg)?;
            let mut out = Output::new(&["t", "omega", "partial_integral", "verdict"]);
            for i in 0..rep.t_grid.len() {
                out.rows.push(vec![
                    fmt_sig(rep.t_grid[i]),
                    fmt_sig(rep.omega[i]),
                    fmt_sig(rep.partial_integrals[i]),
                    rep.verdict.to_string(),
                ]);
            }
            out.notes.push((
                "integral_estimate".into(),
                rep.integral_estimate.map_or("divergent".into(), fmt_sig),
            ));
            out.notes
                .push(("omega_kind".into(), "grid estimate".into()));
            Ok(out)
        }
        "identity" => {
            let grid = if run.grid_res == defaults("identity").grid_res {
                AnnulusGrid::for_identity(run.dim)?
            } else {
                let base = AnnulusGrid::for_identity(run.dim)?;
                AnnulusGrid::log_polar(
                    run.dim,
                    base.rho,
                    base.r_max,
                    run.grid_res,
                    (run.grid_res / 8).max(4),
                )?
            };
            let rep = experiments::identity_check(k, e, &grid)?;
            let mut out = Output::new(&["closed_form", "numeric", "rel_err"]);
            out.rows.push(vec![
                fmt_sig(rep.closed_form),
                fmt_sig(rep.numeric),
                fmt_sig(rep.rel_err),
            ]);
            out.notes.push(("grid".into(), grid.description()));
            out.notes.push((
                "level_values".into(),
                rep.level_values
                    .iter()
                    .map(|v| fmt_sig(*v))
                    .collect::<Vec<_>>()
                    .join(","),
            ));
            out.notes
                .push(("level_rel_err".into(), fmt_sig(rep.level_rel_err)));
            out.notes
                .push(("tail".into(), "uncertified (critical decay)".into()));
            Ok(out)
        }
        "limit" => {
            let grid = limit_grid(run)?;
            let lr =
                experiments::limit_run(run.op, k, e, f, run.rho, &run.t_schedule, &grid, quad)?;
            let mut out = Output::new(&["t", "beta", "D", "bound", "slope_so_far", "tail_cert"]);
            limit_rows(&mut out, &lr);
            out.notes.push(("grid".into(), grid.description()));
            Ok(out)
        }
        "vector-limit" => {
            let grid = limit_grid(run)?;
            let vf = VectorTestFunction::new(run.functions.clone(), run.r)?;
            let lr = experiments::vector_limit_run(
                run.op,
                k,
                e,
                &vf,
                run.rho,
                &run.t_schedule,
                &grid,
                quad,
            )?;
            let mut out = Output::new(&["t", "beta", "D", "bound", "slope_so_far", "tail_cert"]);
            limit_rows(&mut out, &lr);
            out.notes.push(("grid".into(), grid.description()));
            Ok(out)
        }
        "opnorm" => {
            let grid = limit_grid(run)?;
            let family = run
                .t_schedule
                .iter()
                .map(|&t| f.rescale(t))
                .collect::<Result<Vec<_>>>()?;
            let rep = experiments::opnorm_lower_bound(run.op, k, e, &family, &grid, quad)?;
            let mut out = Output::new(&["t", "ratio"]);
            for (t, r) in run.t_schedule.iter().zip(&rep.ratios) {
                out.rows
                    .push(vec![fmt_sig(*t), r.map_or("skipped".into(), fmt_sig)]);
            }
            out.notes.push(("lower_bound".into(), fmt_sig(rep.value)));
            out.notes.push((
                "limit_weak_norm".into(),
                fmt_sig(homog_weak_norm_closed(k, e)?),
            ));
            out.notes.push(("grid".into(), grid.description()));
            Ok(out)
        }
        "young" => {
            let grid = limit_grid(run)?;
            let family = experiments::random_family(run.dim, run.count, run.seed)?;
            let rep = experiments::young_monitor(k, e, &family, &grid, quad)?;
            let mut out = Output::new(&["index", "function", "ratio"]);
            for (i, (g, r)) in family.iter().zip(&rep.ratios).enumerate() {
                out.rows.push(vec![
                    i.to_string(),
                    g.to_string(),
                    r.map_or("skipped".into(), fmt_sig),
                ]);
            }
            out.notes.push(("max_ratio".into(), fmt_sig(rep.value)));
            for w in &rep.warnings {
                out.notes.push(("warning".into(), w.clone()));
            }
            Ok(out)
        }
        "types" => {
            let support = f.support_radius();
            let tmax = run.t_schedule.iter().fold(0.0, |m: f64, t| m.max(*t));
            let a = -(support.ceil() + 1.0);
            let b = support.ceil() + 3.0 + tmax.ceil();
            let cells = ((b - a) * run.grid_res as f64).round() as usize;
            let grid = AnnulusGrid::interval(a, b, cells)?;
            let target = grid.sample(|p| Ok(f.eval_point(p)))?;
            let family = run
                .t_schedule
                .iter()
                .map(|&t| {
                    let shift = if run.family == "translate" { t } else { 2.0 };
                    Ok((t, grid.sample(|p| Ok(f.eval_point([p[0] - shift, 0.0])))?))
                })
                .collect::<Result<Vec<_>>>()?;
            let rows = experiments::convergence_types(&family, &target, &run.lambdas, e.q())?;
            let mut out = Output::new(&["t", "lambda", "type1", "type2", "type3"]);
            let mut chebyshev = true;
            for r in &rows {
                chebyshev &= r.chebyshev_holds(e.q());
                out.rows.push(vec![
                    fmt_sig(r.t),
                    fmt_sig(r.lambda),
                    fmt_sig(r.type1),
                    fmt_sig(r.type2),
                    fmt_sig(r.type3),
                ]);
            }
            out.notes
                .push(("chebyshev_relation".into(), chebyshev.to_string()));
            out.notes.push(("grid".into(), grid.description()));
            Ok(out)
        }
        "reduce" => {
            let grid = limit_grid(run)?;
            let rep = experiments::reduction_decomposition(
                k,
                &run.eps,
                e,
                f,
                run.rho,
                run.t_schedule[0],
                &grid,
                quad,
            )?;
            let mut out = Output::new(&[
                "eps",
                "lq_distance",
                "d_rough",
                "d_smooth",
                "maximal_difference",
                "field_difference",
                "ratio",
            ]);
            for r in &rep.rows {
                out.rows.push(vec![
                    fmt_sig(r.eps),
                    fmt_sig(r.lq_distance),
                    fmt_sig(r.d_rough),
                    fmt_sig(r.d_smooth),
                    fmt_sig(r.maximal_difference),
                    fmt_sig(r.field_difference),
                    fmt_sig(r.ratio),
                ]);
            }
            out.notes
                .push(("split_holds".into(), rep.holds.to_string()));
            out.notes.push((
                "distances_decreasing".into(),
                rep.distances_decreasing.to_string(),
            ));
            Ok(out)
        }
        other => Err(Error::config(
            "command",
            format!("unknown command `{other}`"),
        )),
    }
}

/// Renders the CSV table with a trailing `config_hash` column.
pub fn render_csv(run: &RunConfig, out: &Output) -> Result<String> {
    let hash = run.config_hash();
    let mut w = csv::Writer::from_writer(Vec::new());
    let io = |e: csv::Error| Error::Io(e.to_string());
    let mut header = out.header.clone();
    header.push("config_hash".into());
    w.write_record(&header).map_err(io)?;
    for row in &out.rows {
        let mut r = row.clone();
        r.push(hash.clone());
        w.write_record(&r).map_err(io)?;
    }
    let bytes = w.into_inner().map_err(|e| Error::Io(e.to_string()))?;
    String::from_utf8(bytes).map_err(|e| Error::Io(e.to_string()))
}

/// Structured `key = value` manifest.
pub fn render_manifest(run: &RunConfig, out: &Output, wall_clock: Option<&str>) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "[tool]");
    let _ = writeln!(s, "name = limweak");
    let _ = writeln!(s, "version = {}", env!("CARGO_PKG_VERSION"));
    if let Some(t) = wall_clock {
        let _ = writeln!(s, "wall_clock_unix = {t}");
    }
    let _ = writeln!(s, "\n[parameters]");
    for (k, v) in run.parameter_lines() {
        let _ = writeln!(s, "{k} = {v}");
    }
    let _ = writeln!(s, "config_hash = {}", run.config_hash());
    let _ = writeln!(s, "\n[results]");
    let _ = writeln!(s, "rows = {}", out.rows.len());
    for (k, v) in &out.notes {
        let _ = writeln!(s, "{k} = {v}");
    }
    s
}

fn manifest_path(csv: &Path) -> PathBuf {
    let mut name = csv
        .file_name()
        .map(|n| n.to_os_string())
        .unwrap_or_default();
    name.push(".manifest");
    csv.with_file_name(name)
}

fn emit(run: &RunConfig, out: &Output) -> Result<()> {
    let csv = render_csv(run, out)?;
    let clock = run.record_time.then(|| {
        std::time::SystemTime::now()
            .duration_since(std::time::UNIX_EPOCH)
            .map(|d| d.as_secs().to_string())
            .unwrap_or_default()
    });
    let manifest = render_manifest(run, out, clock.as_deref());
    match &run.out {
        Some(path) => {
            std::fs::write(path, csv)?;
            std::fs::write(manifest_path(path), manifest)?;
        }
        None => print!("{csv}"),
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn significant_digits() {
        assert_eq!(fmt_sig(1.035_276_180_410_083), "1.03527618");
        assert_eq!(fmt_sig(0.5), "0.5");
        assert_eq!(fmt_sig(2.0), "2");
        assert_eq!(fmt_sig(1.2552e-3), "0.0012552");
        assert_eq!(fmt_sig(3.2e-7), "3.2e-7");
        assert_eq!(fmt_sig(123456789012.0), "1.23456789e11");
        assert_eq!(fmt_sig(-0.25), "-0.25");
        assert_eq!(fmt_sig(f64::NAN), "nan");
    }

    #[test]
    fn schedules() {
        assert_eq!(
            parse_schedule("geo:0.2,0.5,3").unwrap(),
            vec![0.2, 0.1, 0.05]
        );
        assert_eq!(parse_schedule("0.3, 0.1").unwrap(), vec![0.3, 0.1]);
        assert!(parse_schedule("geo:0.2,2,3").is_err());
        assert!(parse_schedule("").is_err());
    }
}
