//! Compactly supported test functions with exact `L^1` norms and the
//! concentration family `f_t(x) = t^{-n} f(x / t)`.

use std::f64::consts::PI;
use std::fmt;

use rand::Rng;

use crate::error::{Error, Result};
use crate::quad;

/// Radial building block, nonnegative and supported in `B(0, radius())`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Profile {
    Indicator {
        radius: f64,
    },
    /// `(1 - |x| / radius)_+`
    Cone {
        radius: f64,
    },
    /// `exp(-|x|^2 / (2 sigma^2))` cut off at `|x| = cutoff`.
    Gauss {
        sigma: f64,
        cutoff: f64,
    },
}

impl Profile {
    pub fn radius(&self) -> f64 {
        match *self {
            Profile::Indicator { radius } | Profile::Cone { radius } => radius,
            Profile::Gauss { cutoff, .. } => cutoff,
        }
    }

    /// Value at distance `d` from the centre.
    #[inline]
    pub fn at_distance(&self, d: f64) -> f64 {
        match *self {
            Profile::Indicator { radius } => {
                if d <= radius {
                    1.0
                } else {
                    0.0
                }
            }
            Profile::Cone { radius } => (1.0 - d / radius).max(0.0),
            Profile::Gauss { sigma, cutoff } => {
                if d <= cutoff {
                    (-d * d / (2.0 * sigma * sigma)).exp()
                } else {
                    0.0
                }
            }
        }
    }

    /// `int_{R^n} profile`.
    pub fn integral(&self, dim: usize) -> f64 {
        match (*self, dim) {
            (Profile::Indicator { radius }, 1) => 2.0 * radius,
            (Profile::Indicator { radius }, _) => PI * radius * radius,
            (Profile::Cone { radius }, 1) => radius,
            (Profile::Cone { radius }, _) => PI * radius * radius / 3.0,
            (Profile::Gauss { sigma, cutoff }, 1) => {
                sigma * (2.0 * PI).sqrt() * libm::erf(cutoff / (sigma * std::f64::consts::SQRT_2))
            }
            (Profile::Gauss { sigma, cutoff }, _) => {
                2.0 * PI * sigma * sigma * (1.0 - (-cutoff * cutoff / (2.0 * sigma * sigma)).exp())
            }
        }
    }

    /// Distances from the centre where the profile is not smooth.
    pub fn kink_distances(&self) -> &'static [f64] {
        // expressed as multiples of radius(): edge, and apex for cones
        match self {
            Profile::Cone { .. } => &[0.0, 1.0],
            _ => &[1.0],
        }
    }

    fn parse(spec: &str) -> Result<Self> {
        let (head, rest) = spec.split_once(':').unwrap_or((spec, ""));
        let nums: Vec<f64> = rest
            .split(',')
            .map(|s| s.trim().parse::<f64>())
            .collect::<std::result::Result<_, _>>()
            .map_err(|_| Error::config("f", format!("`{spec}`: malformed numbers")))?;
        let positive = |v: f64| v > 0.0 && v.is_finite();
        let p = match (head.trim(), nums.as_slice()) {
            ("indicator", [r]) if positive(*r) => Profile::Indicator { radius: *r },
            ("cone", [r]) if positive(*r) => Profile::Cone { radius: *r },
            ("gauss", [s, c]) if positive(*s) && positive(*c) => Profile::Gauss { sigma: *s, cutoff: *c },
            _ => {
                return Err(Error::config(
                    "f",
                    format!("`{spec}`: expected indicator:<R>, cone:<R> or gauss:<sigma>,<Rcut> with positive parameters"),
                ))
            }
        };
        Ok(p)
    }
}

impl fmt::Display for Profile {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Profile::Indicator { radius } => write!(f, "indicator:{radius}"),
            Profile::Cone { radius } => write!(f, "cone:{radius}"),
            Profile::Gauss { sigma, cutoff } => write!(f, "gauss:{sigma},{cutoff}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Component {
    pub weight: f64,
    /// Centre in unscaled coordinates.
    pub shift: [f64; 2],
    pub profile: Profile,
}

/// A component placed in absolute coordinates: value
/// `amplitude * profile(|y - center| / scale)`.
#[derive(Debug, Clone, Copy)]
pub struct PlacedComponent {
    pub center: [f64; 2],
    /// Support radius in absolute units.
    pub radius: f64,
    pub amplitude: f64,
    pub scale: f64,
    pub profile: Profile,
}

impl PlacedComponent {
    #[inline]
    pub fn value_at_distance(&self, d: f64) -> f64 {
        self.amplitude * self.profile.at_distance(d / self.scale)
    }

    /// Absolute distances from the centre where the component has kinks.
    pub fn kink_distances(&self) -> impl Iterator<Item = f64> + '_ {
        self.profile
            .kink_distances()
            .iter()
            .map(move |m| m * self.radius)
    }
}

/// `f(x) = scale^{-n} sum_i w_i P_i(x / scale - shift_i)`.
#[derive(Debug, Clone, PartialEq)]
pub struct TestFunction {
    dim: usize,
    scale: f64,
    components: Vec<Component>,
    l1: f64,
}

impl TestFunction {
    pub fn new(dim: usize, components: Vec<Component>) -> Result<Self> {
        if dim != 1 && dim != 2 {
            return Err(Error::param(
                "dim",
                format!("dimension must be 1 or 2, got {dim}"),
            ));
        }
        if components.is_empty() {
            return Err(Error::param(
                "f",
                "a test function needs at least one component",
            ));
        }
        if components
            .iter()
            .any(|c| !c.weight.is_finite() || c.shift.iter().any(|s| !s.is_finite()))
        {
            return Err(Error::param("f", "weights and shifts must be finite"));
        }
        let components: Vec<Component> = components
            .into_iter()
            .map(|mut c| {
                if dim == 1 {
                    c.shift[1] = 0.0;
                }
                c
            })
            .collect();
        let components = merge_components(components);
        let l1 = exact_l1(dim, &components)?;
        Ok(TestFunction {
            dim,
            scale: 1.0,
            components,
            l1,
        })
    }

    pub fn single(dim: usize, profile: Profile) -> Result<Self> {
        Self::new(
            dim,
            vec![Component {
                weight: 1.0,
                shift: [0.0; 2],
                profile,
            }],
        )
    }

    pub fn indicator(dim: usize, radius: f64) -> Result<Self> {
        Self::single(dim, Profile::Indicator { radius })
    }

    pub fn cone(dim: usize, radius: f64) -> Result<Self> {
        Self::single(dim, Profile::Cone { radius })
    }

    pub fn gauss(dim: usize, sigma: f64, cutoff: f64) -> Result<Self> {
        Self::single(dim, Profile::Gauss { sigma, cutoff })
    }

    /// Parses `indicator:<R>`, `cone:<R>`, `gauss:<sigma>,<Rcut>` or
    /// `mix:<w1>*<shape1>@<shift1>;...` (shift coordinates comma separated,
    /// `@shift` optional).
    pub fn parse(spec: &str, dim: usize) -> Result<Self> {
        let spec = spec.trim();
        if let Some(body) = spec.strip_prefix("mix:") {
            let mut comps = Vec::new();
            for part in body.split(';').map(str::trim).filter(|p| !p.is_empty()) {
                let (lhs, shift) = match part.rsplit_once('@') {
                    Some((l, s)) => (l, Some(s)),
                    None => (part, None),
                };
                let (w, shape) = lhs.split_once('*').ok_or_else(|| {
                    Error::config("f", format!("`{part}`: expected <weight>*<shape>"))
                })?;
                let weight: f64 = w
                    .trim()
                    .parse()
                    .map_err(|_| Error::config("f", format!("`{part}`: bad weight")))?;
                let mut sh = [0.0; 2];
                if let Some(s) = shift {
                    let coords: Vec<f64> = s
                        .split(',')
                        .map(|c| c.trim().parse::<f64>())
                        .collect::<std::result::Result<_, _>>()
                        .map_err(|_| Error::config("f", format!("`{part}`: bad shift")))?;
                    if coords.len() != dim {
                        return Err(Error::config(
                            "f",
                            format!("`{part}`: shift needs {dim} coordinate(s)"),
                        ));
                    }
                    sh[..dim].copy_from_slice(&coords);
                }
                comps.push(Component {
                    weight,
                    shift: sh,
                    profile: Profile::parse(shape)?,
                });
            }
            return Self::new(dim, comps).map_err(|e| match e {
                Error::Parameter { message, .. } => Error::config("f", message),
                other => other,
            });
        }
        Self::single(dim, Profile::parse(spec)?).map_err(|e| match e {
            Error::Parameter { message, .. } => Error::config("f", message),
            other => other,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn scale(&self) -> f64 {
        self.scale
    }

    pub fn components(&self) -> &[Component] {
        &self.components
    }

    /// Exact `||f||_{L^1}`.
    pub fn l1_norm(&self) -> f64 {
        self.l1
    }

    /// Radius `R` with `supp f` inside `B(0, R)`.
    pub fn support_radius(&self) -> f64 {
        self.scale
            * self
                .components
                .iter()
                .filter(|c| c.weight != 0.0)
                .map(|c| (c.shift[0].hypot(c.shift[1])) + c.profile.radius())
                .fold(0.0, f64::max)
    }

    /// `f_t(x) = t^{-n} f(x / t)`.
    pub fn rescale(&self, t: f64) -> Result<TestFunction> {
        if !(t > 0.0) || !t.is_finite() {
            return Err(Error::param(
                "t",
                format!("scale must be positive, got {t}"),
            ));
        }
        let mut g = self.clone();
        g.scale = self.scale * t;
        Ok(g)
    }

    /// `c * f`.
    pub fn scaled(&self, c: f64) -> TestFunction {
        let mut g = self.clone();
        for comp in &mut g.components {
            comp.weight *= c;
        }
        g.l1 = self.l1 * c.abs();
        g
    }

    /// True when every nonzero weight has the same sign or the supports
    /// are pairwise disjoint, so that `|f| = sum |w_i| P_i`.
    pub fn abs_is_mixture(&self) -> bool {
        let comps: Vec<&Component> = self.components.iter().filter(|c| c.weight != 0.0).collect();
        comps.iter().all(|c| c.weight > 0.0)
            || comps.iter().all(|c| c.weight < 0.0)
            || comps.iter().enumerate().all(|(i, a)| {
                comps.iter().skip(i + 1).all(|b| {
                    (a.shift[0] - b.shift[0]).hypot(a.shift[1] - b.shift[1])
                        >= a.profile.radius() + b.profile.radius()
                })
            })
    }

    /// `|f|` as a mixture; fails for overlapping components of both signs.
    pub fn abs(&self) -> Result<TestFunction> {
        if !self.abs_is_mixture() {
            return Err(Error::param(
                "f",
                "|f| of an overlapping signed mixture is not a mixture",
            ));
        }
        let mut g = self.clone();
        for c in &mut g.components {
            c.weight = c.weight.abs();
        }
        Ok(g)
    }

    /// Support-radius-one, unit-`L^1` profile `R^n f(R x) / ||f||_1`, with
    /// `R` the support radius of `f`.
    pub fn normalized(&self) -> Result<TestFunction> {
        if self.l1 == 0.0 {
            return Err(Error::param(
                "f",
                "cannot normalise a function with zero L1 norm",
            ));
        }
        let r = self.support_radius();
        Ok(self.rescale(1.0 / r)?.scaled(1.0 / self.l1))
    }

    #[inline]
    fn amplitude(&self) -> f64 {
        self.scale.powi(-(self.dim as i32))
    }

    /// Pointwise value.
    pub fn eval(&self, x: &[f64]) -> Result<f64> {
        if x.len() != self.dim {
            return Err(Error::param(
                "x",
                format!(
                    "point has {} coordinates, function dimension is {}",
                    x.len(),
                    self.dim
                ),
            ));
        }
        let mut p = [0.0; 2];
        p[..self.dim].copy_from_slice(x);
        Ok(self.eval_point(p))
    }

    #[inline]
    pub fn eval_point(&self, x: [f64; 2]) -> f64 {
        let inv = 1.0 / self.scale;
        let u = [x[0] * inv, x[1] * inv];
        let sum: f64 = self
            .components
            .iter()
            .map(|c| {
                c.weight
                    * c.profile
                        .at_distance((u[0] - c.shift[0]).hypot(u[1] - c.shift[1]))
            })
            .sum();
        self.amplitude() * sum
    }

    /// Components in absolute coordinates.
    pub fn placed(&self) -> Vec<PlacedComponent> {
        let amp = self.amplitude();
        self.components
            .iter()
            .filter(|c| c.weight != 0.0)
            .map(|c| PlacedComponent {
                center: [c.shift[0] * self.scale, c.shift[1] * self.scale],
                radius: c.profile.radius() * self.scale,
                amplitude: amp * c.weight,
                scale: self.scale,
                profile: c.profile,
            })
            .collect()
    }

    /// `int y f(y) dy`.
    pub fn first_moment(&self) -> [f64; 2] {
        let mut m = [0.0; 2];
        for c in &self.components {
            let mass = c.weight * c.profile.integral(self.dim);
            m[0] += mass * c.shift[0] * self.scale;
            m[1] += mass * c.shift[1] * self.scale;
        }
        m
    }

    pub fn has_zero_first_moment(&self) -> bool {
        let m = self.first_moment();
        m[0].hypot(m[1]) <= 1e-12 * self.l1.max(f64::MIN_POSITIVE) * self.support_radius()
    }

    /// Random mixture of `count` bumps with signed weights, shifts in
    /// `[-1, 1]^n` and radii in `[0.1, 0.6]`.
    pub fn random_mixture<R: Rng>(dim: usize, count: usize, rng: &mut R) -> Result<TestFunction> {
        let comps = (0..count.max(1))
            .map(|_| {
                let radius = rng.gen_range(0.1..0.6);
                let profile = match rng.gen_range(0..3) {
                    0 => Profile::Indicator { radius },
                    1 => Profile::Cone { radius },
                    _ => Profile::Gauss {
                        sigma: radius / 2.0,
                        cutoff: radius,
                    },
                };
                let mut shift = [0.0; 2];
                for s in shift.iter_mut().take(dim) {
                    *s = rng.gen_range(-1.0..1.0);
                }
                Component {
                    weight: rng.gen_range(-1.0..2.0),
                    shift,
                    profile,
                }
            })
            .collect();
        match TestFunction::new(dim, comps) {
            // overlapping signed mixtures are only integrable exactly in 1-d
            Err(_) if dim == 2 => {
                let comps = (0..count.max(1))
                    .map(|i| Component {
                        weight: rng.gen_range(0.2..2.0),
                        shift: [(i as f64 - count as f64 / 2.0) * 0.5, 0.0],
                        profile: Profile::Cone {
                            radius: rng.gen_range(0.1..0.25),
                        },
                    })
                    .collect();
                TestFunction::new(dim, comps)
            }
            other => other,
        }
    }
}

impl fmt::Display for TestFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let plain = self.components.len() == 1
            && self.components[0].weight == 1.0
            && self.components[0].shift == [0.0; 2];
        if plain {
            write!(f, "{}", self.components[0].profile)?;
        } else {
            write!(f, "mix:")?;
            for (i, c) in self.components.iter().enumerate() {
                if i > 0 {
                    write!(f, ";")?;
                }
                write!(f, "{}*{}@{}", c.weight, c.profile, c.shift[0])?;
                if self.dim == 2 {
                    write!(f, ",{}", c.shift[1])?;
                }
            }
        }
        if self.scale != 1.0 {
            write!(f, " (t={})", self.scale)?;
        }
        Ok(())
    }
}

/// Finite sequence `{f_j}` measured in `L^1(l^r)`.
#[derive(Debug, Clone, PartialEq)]
pub struct VectorTestFunction {
    entries: Vec<TestFunction>,
    r: f64,
}

impl VectorTestFunction {
    pub fn new(entries: Vec<TestFunction>, r: f64) -> Result<Self> {
        if entries.is_empty() {
            return Err(Error::param(
                "f",
                "a vector test function needs at least one entry",
            ));
        }
        if !(r > 1.0) || !r.is_finite() {
            return Err(Error::param(
                "r",
                format!("exponent must lie in (1, inf), got {r}"),
            ));
        }
        let dim = entries[0].dim();
        if entries.iter().any(|f| f.dim() != dim) {
            return Err(Error::param("f", "all entries must share one dimension"));
        }
        Ok(VectorTestFunction { entries, r })
    }

    pub fn entries(&self) -> &[TestFunction] {
        &self.entries
    }

    pub fn r(&self) -> f64 {
        self.r
    }

    pub fn dim(&self) -> usize {
        self.entries[0].dim()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// `||{||f_j||_1}||_{l^r}`.
    pub fn l1_lr_norm(&self) -> f64 {
        let l1: Vec<f64> = self.entries.iter().map(TestFunction::l1_norm).collect();
        crate::lorentz::lr_norm(&l1, self.r).unwrap_or(f64::NAN)
    }

    pub fn support_radius(&self) -> f64 {
        self.entries
            .iter()
            .map(TestFunction::support_radius)
            .fold(0.0, f64::max)
    }
}

/// Sums the weights of components with identical placement, so that e.g.
/// `2 chi - chi` collapses to `chi`.
fn merge_components(comps: Vec<Component>) -> Vec<Component> {
    let mut merged: Vec<Component> = Vec::new();
    for c in comps {
        match merged
            .iter_mut()
            .find(|m| m.profile == c.profile && m.shift == c.shift)
        {
            Some(m) => m.weight += c.weight,
            None => merged.push(c),
        }
    }
    merged
}

/// Exact `L^1` norm of an unscaled, merged mixture.
fn exact_l1(dim: usize, comps: &[Component]) -> Result<f64> {
    let merged: Vec<&Component> = comps.iter().filter(|c| c.weight != 0.0).collect();
    let same_sign = merged.iter().all(|c| c.weight > 0.0) || merged.iter().all(|c| c.weight < 0.0);
    let disjoint = merged.iter().enumerate().all(|(i, a)| {
        merged.iter().skip(i + 1).all(|b| {
            let d = (a.shift[0] - b.shift[0]).hypot(a.shift[1] - b.shift[1]);
            d >= a.profile.radius() + b.profile.radius()
        })
    });
    if same_sign || disjoint {
        return Ok(merged
            .iter()
            .map(|c| c.weight.abs() * c.profile.integral(dim))
            .sum());
    }
    if dim == 2 {
        return Err(Error::param(
            "f",
            "overlapping mixtures with weights of both signs are supported only in dimension 1",
        ));
    }
    Ok(l1_line_numeric(comps))
}

/// `int |f|` on the line, splitting at every kink and sign change.
fn l1_line_numeric(comps: &[Component]) -> f64 {
    let f = |x: f64| -> f64 {
        comps
            .iter()
            .map(|c| c.weight * c.profile.at_distance((x - c.shift[0]).abs()))
            .sum()
    };
    let mut pts: Vec<f64> = Vec::new();
    for c in comps {
        for m in c.profile.kink_distances() {
            let d = m * c.profile.radius();
            pts.push(c.shift[0] - d);
            pts.push(c.shift[0] + d);
        }
    }
    pts.sort_by(f64::total_cmp);
    pts.dedup();
    let mut total = 0.0;
    for w in pts.windows(2) {
        let (a, b) = (w[0], w[1]);
        // find sign changes inside (a, b)
        let mut sub = vec![a];
        let samples = 64;
        let h = (b - a) / samples as f64;
        let mid = |x: f64| f(x);
        let mut prev = mid(a + 1e-12 * (b - a));
        for i in 1..=samples {
            let x = if i == samples {
                b - 1e-12 * (b - a)
            } else {
                a + h * i as f64
            };
            let cur = mid(x);
            if prev * cur < 0.0 {
                let (mut lo, mut hi) = (x - h, x);
                for _ in 0..80 {
                    let m = 0.5 * (lo + hi);
                    if (mid(m) < 0.0) == (prev < 0.0) {
                        lo = m;
                    } else {
                        hi = m;
                    }
                }
                sub.push(0.5 * (lo + hi));
            }
            prev = cur;
        }
        sub.push(b);
        for s in sub.windows(2) {
            total += quad::integrate(|x| f(x).abs(), s[0], s[1], 4, 32);
        }
    }
    total
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn eval_examples() {
        let f = TestFunction::parse("indicator:0.5", 1).unwrap();
        assert_eq!(f.eval(&[0.0]).unwrap(), 1.0);
        assert_eq!(f.eval(&[2.0]).unwrap(), 0.0);
        let c = TestFunction::parse("cone:1", 1).unwrap();
        assert_eq!(c.eval(&[0.5]).unwrap(), 0.5);
    }

    #[test]
    fn l1_examples() {
        assert_eq!(
            TestFunction::parse("indicator:0.5", 1).unwrap().l1_norm(),
            1.0
        );
        let cone2 = TestFunction::parse("cone:1", 2).unwrap();
        assert!((cone2.l1_norm() - PI / 3.0).abs() < 1e-15);
        let mix = TestFunction::parse("mix:2*indicator:0.5@0.5;-1*indicator:0.5@0.5", 1).unwrap();
        assert!((mix.l1_norm() - 1.0).abs() < 1e-15);
        assert_eq!(mix.eval(&[0.3]).unwrap(), 1.0);
    }

    #[test]
    fn signed_overlapping_mixture_in_1d() {
        // chi_[-1,1] - 2 (1 - |x|)_+ : |f| = |2|x| - 1| on [-1, 1], integral 1
        let f = TestFunction::parse("mix:1*indicator:1;-2*cone:1", 1).unwrap();
        assert!((f.l1_norm() - 1.0).abs() < 1e-12, "{}", f.l1_norm());
        assert!(TestFunction::parse("mix:1*indicator:1;-2*cone:1@0,0", 2).is_err());
    }

    #[test]
    fn rescale_examples() {
        let f = TestFunction::parse("indicator:0.5", 1).unwrap();
        assert_eq!(f.rescale(1.0).unwrap(), f);
        let g = f.rescale(0.1).unwrap();
        assert!((g.eval(&[0.0]).unwrap() - 10.0).abs() < 1e-12);
        assert_eq!(g.eval(&[0.051]).unwrap(), 0.0);
        assert!((g.support_radius() - 0.05).abs() < 1e-15);
        assert_eq!(g.l1_norm(), 1.0);
        assert!(f.rescale(0.0).is_err());
        assert!(f.rescale(-1.0).is_err());
    }

    #[test]
    fn parse_errors() {
        for bad in [
            "indicator:-1",
            "cone",
            "gauss:1",
            "mix:2indicator:1",
            "blob:1",
            "mix:1*cone:1@1,2",
        ] {
            assert!(TestFunction::parse(bad, 1).is_err(), "{bad}");
        }
        assert!(TestFunction::parse("mix:1*cone:1@1,2", 2).is_ok());
    }

    #[test]
    fn vector_validation() {
        let f = TestFunction::parse("indicator:0.5", 1).unwrap();
        let g = TestFunction::parse("cone:1", 2).unwrap();
        assert!(VectorTestFunction::new(vec![], 2.0).is_err());
        assert!(VectorTestFunction::new(vec![f.clone()], 1.0).is_err());
        assert!(VectorTestFunction::new(vec![f.clone(), g], 2.0).is_err());
        let v =
            VectorTestFunction::new(vec![f.clone(), f.scaled(2.0), f.scaled(2.0)], 2.0).unwrap();
        assert!((v.l1_lr_norm() - 3.0).abs() < 1e-15);
    }

    #[test]
    fn first_moment() {
        assert!(TestFunction::parse("indicator:0.5", 2)
            .unwrap()
            .has_zero_first_moment());
        let f = TestFunction::parse("mix:1*cone:0.2@0.5", 1).unwrap();
        assert!(!f.has_zero_first_moment());
        assert!((f.first_moment()[0] - 0.2 * 0.5).abs() < 1e-15);
    }

    #[test]
    fn normalized_profile_has_unit_support_and_mass() {
        let f = TestFunction::parse("mix:3*gauss:0.2,0.4@0.3;1*cone:0.5@-0.2", 1).unwrap();
        let g = f.normalized().unwrap();
        assert!((g.support_radius() - 1.0).abs() < 1e-14);
        assert!((g.l1_norm() - 1.0).abs() < 1e-14);
    }
}
