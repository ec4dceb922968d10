//! Distribution functions and weak `L^{q,∞}` quasi-norms of sampled fields,
//! closed-form tail certificates, and finite `l^r` norms.

use std::f64::consts::PI;

use crate::error::{Error, Result};

/// Values attached to the cells of a grid: one sample point and one cell
/// measure per entry.
#[derive(Debug, Clone, PartialEq)]
pub struct SampledField {
    pub dim: usize,
    pub points: Vec<[f64; 2]>,
    pub measures: Vec<f64>,
    pub values: Vec<f64>,
    /// Outer radius of the sampled region; tails are certified beyond it.
    pub r_max: f64,
    pub resolution: String,
}

impl SampledField {
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn total_measure(&self) -> f64 {
        self.measures.iter().sum()
    }

    /// Same cells, new values.
    pub fn with_values(&self, values: Vec<f64>) -> Result<SampledField> {
        if values.len() != self.values.len() {
            return Err(Error::param("field", "value count does not match the grid"));
        }
        Ok(SampledField {
            values,
            ..self.clone()
        })
    }

    pub fn same_grid(&self, other: &SampledField) -> bool {
        self.dim == other.dim && self.points == other.points && self.measures == other.measures
    }

    /// Pointwise combination of two fields on the same grid.
    pub fn zip_with(
        &self,
        other: &SampledField,
        op: impl Fn(f64, f64) -> f64,
    ) -> Result<SampledField> {
        if !self.same_grid(other) {
            return Err(Error::param(
                "grid",
                "fields are sampled on different grids",
            ));
        }
        self.with_values(
            self.values
                .iter()
                .zip(&other.values)
                .map(|(&a, &b)| op(a, b))
                .collect(),
        )
    }

    pub fn scaled(&self, c: f64) -> SampledField {
        SampledField {
            values: self.values.iter().map(|v| c * v).collect(),
            ..self.clone()
        }
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }
}

/// Pointwise decay bound `|g(x)| <= amplitude |x|^{-gamma}` outside the grid.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DecayCertificate {
    pub amplitude: f64,
    pub gamma: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct WeakNormResult {
    pub value: f64,
    pub lambda_star: f64,
    /// `None` when no admissible decay certificate was supplied.
    pub tail_certificate: Option<f64>,
    pub resolution_note: String,
}

impl WeakNormResult {
    pub fn is_certified(&self) -> bool {
        self.tail_certificate.is_some()
    }

    /// Grid value plus the certified tail, by the quasi-triangle inequality
    /// `||g||_{q,∞} <= 2 (||g 1_grid|| + ||g 1_tail||)` when a tail is known.
    pub fn upper_bound(&self) -> Option<f64> {
        self.tail_certificate.map(|t| {
            if t == 0.0 {
                self.value
            } else {
                2.0 * (self.value + t)
            }
        })
    }
}

/// `|{ |g| > λ }|` on the sampled region.
pub fn distribution_measure(field: &SampledField, lambda: f64) -> Result<f64> {
    if !(lambda > 0.0) {
        return Err(Error::param(
            "lambda",
            format!("level must be positive, got {lambda}"),
        ));
    }
    Ok(field
        .values
        .iter()
        .zip(&field.measures)
        .filter(|(v, _)| v.abs() > lambda)
        .map(|(_, m)| m)
        .sum())
}

/// `sup_λ λ |{|g| > λ}|^{1/q}` over the sampled step distribution, with an
/// optional closed-form tail beyond `field.r_max`.
pub fn weak_quasinorm(
    field: &SampledField,
    q: f64,
    cert: Option<DecayCertificate>,
) -> Result<WeakNormResult> {
    if !(q > 1.0) || !q.is_finite() {
        return Err(Error::param(
            "q",
            format!("exponent must exceed 1, got {q}"),
        ));
    }
    let tail_certificate = match cert {
        Some(c) => Some(tail_bound_weak(
            c.amplitude,
            c.gamma,
            q,
            field.r_max,
            field.dim,
        )?),
        None => None,
    };
    if field.values.iter().any(|v| !v.is_finite()) {
        return Err(Error::Numeric {
            context: "weak_quasinorm".into(),
            message: "field contains non-finite samples".into(),
        });
    }
    let mut pairs: Vec<(f64, f64)> = field
        .values
        .iter()
        .zip(&field.measures)
        .map(|(v, m)| (v.abs(), *m))
        .filter(|(v, _)| *v > 0.0)
        .collect();
    pairs.sort_by(|a, b| b.0.total_cmp(&a.0));
    let inv_q = 1.0 / q;
    let (mut best, mut lambda_star, mut cum) = (0.0, 0.0, 0.0);
    for (i, &(v, m)) in pairs.iter().enumerate() {
        cum += m;
        // evaluate once per tie group, as λ increases to v: measure of {|g| >= v}
        if pairs.get(i + 1).is_some_and(|next| next.0 == v) {
            continue;
        }
        let cand = v * cum.powf(inv_q);
        if cand > best {
            best = cand;
            lambda_star = v;
        }
    }
    Ok(WeakNormResult {
        value: best,
        lambda_star,
        tail_certificate,
        resolution_note: field.resolution.clone(),
    })
}

/// `(sum |v_j|^r)^{1/r}`; the empty list has norm 0.
pub fn lr_norm(values: &[f64], r: f64) -> Result<f64> {
    if !(r > 1.0) || !r.is_finite() {
        return Err(Error::param(
            "r",
            format!("exponent must lie in (1, inf), got {r}"),
        ));
    }
    let m = values.iter().fold(0.0, |m: f64, v| m.max(v.abs()));
    if m == 0.0 {
        return Ok(0.0);
    }
    // scale by the largest entry to avoid overflow
    let s: f64 = values.iter().map(|v| (v.abs() / m).powf(r)).sum();
    Ok(m * s.powf(1.0 / r))
}

/// Volume of the unit ball in dimension 1 or 2.
pub fn unit_ball_volume(n: usize) -> f64 {
    if n == 1 {
        2.0
    } else {
        PI
    }
}

/// `sup_λ λ |{|x| > r_max : C |x|^{-γ} > λ}|^{1/q}` in closed form. The
/// maximising radius satisfies `u^n = r_max^n γq / (γq - n)`.
pub fn tail_bound_weak(c: f64, gamma: f64, q: f64, r_max: f64, n: usize) -> Result<f64> {
    let nf = n as f64;
    if !(gamma * q > nf) {
        return Err(Error::param(
            "certificate",
            format!("decay order gamma = {gamma} with q = {q} gives gamma*q <= n = {n}; the tail is not finite"),
        ));
    }
    if !(r_max > 0.0) {
        return Err(Error::param(
            "r_max",
            format!("must be positive, got {r_max}"),
        ));
    }
    if c < 0.0 || !c.is_finite() {
        return Err(Error::param(
            "certificate",
            format!("amplitude must be finite and nonnegative, got {c}"),
        ));
    }
    if c == 0.0 {
        return Ok(0.0);
    }
    let gq = gamma * q;
    let u = r_max * (gq / (gq - nf)).powf(1.0 / nf);
    let measure = unit_ball_volume(n) * r_max.powf(nf) * nf / (gq - nf);
    Ok(c * u.powf(-gamma) * measure.powf(1.0 / q))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn line_field(values: Vec<f64>, h: f64) -> SampledField {
        let n = values.len();
        SampledField {
            dim: 1,
            points: (0..n).map(|i| [(i as f64 + 0.5) * h, 0.0]).collect(),
            measures: vec![h; n],
            values,
            r_max: n as f64 * h,
            resolution: format!("{n} cells"),
        }
    }

    #[test]
    fn indicator_distribution_and_norm() {
        // chi_[0,1] sampled on [0, 2]
        let g = line_field(
            (0..200).map(|i| if i < 100 { 1.0 } else { 0.0 }).collect(),
            0.01,
        );
        assert!((distribution_measure(&g, 0.5).unwrap() - 1.0).abs() < 1e-12);
        assert_eq!(distribution_measure(&g, 1.5).unwrap(), 0.0);
        assert!(distribution_measure(&g, 0.0).is_err());
        let w = weak_quasinorm(&g, 2.0, None).unwrap();
        assert!((w.value - 1.0).abs() < 1e-12);
        assert_eq!(w.lambda_star, 1.0);
        assert!(!w.is_certified());
    }

    #[test]
    fn zero_field() {
        let g = line_field(vec![0.0; 10], 0.1);
        assert_eq!(weak_quasinorm(&g, 2.0, None).unwrap().value, 0.0);
        assert!(weak_quasinorm(&g, 1.0, None).is_err());
    }

    #[test]
    fn lr_examples() {
        assert_eq!(lr_norm(&[3.0, 4.0], 2.0).unwrap(), 5.0);
        assert_eq!(lr_norm(&[-2.5], 7.0).unwrap(), 2.5);
        assert!((lr_norm(&[1.0, 1.0, 1.0], 3.0).unwrap() - 1.4422496).abs() < 1e-7);
        assert_eq!(lr_norm(&[], 2.0).unwrap(), 0.0);
    }

    #[test]
    fn tail_bound_matches_brute_force_sweep() {
        // n = 1, q = 2, gamma = 5/2, C = 1, r_max = 1
        let closed = tail_bound_weak(1.0, 2.5, 2.0, 1.0, 1).unwrap();
        let mut best: f64 = 0.0;
        let steps = 10_000;
        for i in 1..steps {
            let lambda = i as f64 / steps as f64;
            let m = 2.0 * (lambda.powf(-0.4) - 1.0);
            best = best.max(lambda * m.sqrt());
        }
        assert!((closed - best).abs() < 1e-4, "{closed} vs {best}");
        assert!((closed - 0.8f64.powf(2.5) * 0.5f64.sqrt()).abs() < 1e-14);
    }

    #[test]
    fn tail_bound_rules() {
        assert_eq!(tail_bound_weak(0.0, 3.0, 2.0, 8.0, 2).unwrap(), 0.0);
        let a = tail_bound_weak(1.0, 3.0, 2.0, 8.0, 2).unwrap();
        let b = tail_bound_weak(1.0, 3.0, 2.0, 16.0, 2).unwrap();
        assert!(b < a);
        assert!(tail_bound_weak(1.0, 1.0, 2.0, 8.0, 2).is_err());
    }
}
