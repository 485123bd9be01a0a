//! The shifting heterogeneity `alpha` and its envelope constants.
//!
//! A profile is evaluated in the co-moving variable `z`; the stored offset
//! `M` translates the base family, `alpha(z) = alpha_0(z - M)`. The base
//! family satisfies, for the constants `(C, rho, K)`,
//!
//! ```text
//! alpha_0(z) >= -C exp(rho z)   for z <= -K,
//! alpha_0(z) <  -1              for z >=  K,
//! ```
//!
//! and choosing `M = max(K, ln(C/eps)/rho)` gives
//! `alpha(z) >= -eps exp(rho z)` for all `z < 0`.

use serde::{Deserialize, Serialize};
use std::path::Path;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ShiftError {
    #[error("`{name}` must be strictly positive, got {value}")]
    NonPositive { name: &'static str, value: f64 },
    #[error("epsilon must be positive, got {0}")]
    NonPositiveEpsilon(f64),
    #[error("tabulated profile: {0}")]
    Table(String),
    #[error("empty sample grid")]
    EmptyGrid,
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "kebab-case")]
pub enum ShiftFamily {
    /// `-m / (1 + exp(-rho z))`
    Sigmoid,
    /// Sigmoid minus `amplitude * exp(-((z - center)/width)^2)`.
    /// A negative amplitude raises the profile.
    SigmoidWithBump {
        amplitude: f64,
        center: f64,
        width: f64,
    },
    /// Linear interpolation of `(z, alpha)` samples, constant extrapolation.
    Tabulated { z: Vec<f64>, alpha: Vec<f64> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShiftProfile {
    pub family: ShiftFamily,
    /// Amplitude of the logistic part (ignored by tabulated profiles).
    pub m: f64,
    pub rho: f64,
    /// Transition location bound `K`.
    pub k_bound: f64,
    /// Envelope constant `C`.
    pub c: f64,
    /// Translation offset `M`.
    pub offset: f64,
}

fn positive(name: &'static str, value: f64) -> Result<(), ShiftError> {
    if value > 0.0 && value.is_finite() {
        Ok(())
    } else {
        Err(ShiftError::NonPositive { name, value })
    }
}

impl ShiftProfile {
    /// Logistic family with `C = m`.
    pub fn sigmoid(m: f64, rho: f64, k_bound: f64) -> Result<Self, ShiftError> {
        positive("m", m)?;
        positive("rho", rho)?;
        positive("K", k_bound)?;
        Ok(Self {
            family: ShiftFamily::Sigmoid,
            m,
            rho,
            k_bound,
            c: m,
            offset: 0.0,
        })
    }

    /// Logistic family with a Gaussian dip (or bump, for negative
    /// `amplitude`). The envelope constant is enlarged to
    /// `C' = m + A exp(rho |z0| + rho^2 w^2 / 4)` for a dip; the bound is
    /// checked numerically by [`verify_envelope`] rather than trusted.
    pub fn sigmoid_with_bump(
        m: f64,
        rho: f64,
        k_bound: f64,
        amplitude: f64,
        center: f64,
        width: f64,
    ) -> Result<Self, ShiftError> {
        positive("m", m)?;
        positive("rho", rho)?;
        positive("K", k_bound)?;
        positive("width", width)?;
        let extra = if amplitude > 0.0 {
            amplitude * (rho * center.abs() + rho * rho * width * width / 4.0).exp()
        } else {
            0.0
        };
        Ok(Self {
            family: ShiftFamily::SigmoidWithBump {
                amplitude,
                center,
                width,
            },
            m,
            rho,
            k_bound,
            c: m + extra,
            offset: 0.0,
        })
    }

    /// Tabulated profile; `z` must be strictly increasing with at least 4 rows.
    pub fn tabulated(
        z: Vec<f64>,
        alpha: Vec<f64>,
        rho: f64,
        k_bound: f64,
        c: f64,
    ) -> Result<Self, ShiftError> {
        positive("rho", rho)?;
        positive("K", k_bound)?;
        positive("C", c)?;
        if z.len() != alpha.len() {
            return Err(ShiftError::Table("column lengths differ".into()));
        }
        if z.len() < 4 {
            return Err(ShiftError::Table(format!(
                "need at least 4 rows, got {}",
                z.len()
            )));
        }
        if z.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(ShiftError::Table("z must be strictly increasing".into()));
        }
        if z.iter().chain(&alpha).any(|v| !v.is_finite()) {
            return Err(ShiftError::Table("non-finite entry".into()));
        }
        Ok(Self {
            family: ShiftFamily::Tabulated { z, alpha },
            m: 0.0,
            rho,
            k_bound,
            c,
            offset: 0.0,
        })
    }

    /// Reads a two-column whitespace- or comma-separated `(z, alpha)` file.
    /// Lines starting with `#` and a non-numeric header are skipped.
    pub fn read_table(
        path: impl AsRef<Path>,
        rho: f64,
        k_bound: f64,
        c: f64,
    ) -> Result<Self, ShiftError> {
        let text = std::fs::read_to_string(path)?;
        let (zs, alphas) = parse_table(&text)?;
        Self::tabulated(zs, alphas, rho, k_bound, c)
    }

    /// Base family value, without translation.
    pub fn base(&self, y: f64) -> f64 {
        match &self.family {
            ShiftFamily::Sigmoid => sigmoid(self.m, self.rho, y),
            ShiftFamily::SigmoidWithBump {
                amplitude,
                center,
                width,
            } => {
                let g = (-((y - center) / width).powi(2)).exp();
                sigmoid(self.m, self.rho, y) - amplitude * g
            }
            ShiftFamily::Tabulated { z, alpha } => interpolate(z, alpha, y),
        }
    }

    /// `alpha(z) = alpha_0(z - M)`.
    pub fn alpha(&self, z: f64) -> f64 {
        self.base(z - self.offset)
    }

    pub fn with_offset(&self, offset: f64) -> Self {
        Self {
            offset,
            ..self.clone()
        }
    }

    /// Limit of `alpha` as `z -> +inf`.
    pub fn right_limit(&self) -> f64 {
        match &self.family {
            ShiftFamily::Sigmoid | ShiftFamily::SigmoidWithBump { .. } => -self.m,
            ShiftFamily::Tabulated { alpha, .. } => *alpha.last().expect("table has rows"),
        }
    }

    /// Bound on `sup |alpha|`.
    pub fn sup_abs(&self) -> f64 {
        match &self.family {
            ShiftFamily::Sigmoid => self.m,
            ShiftFamily::SigmoidWithBump { amplitude, .. } => self.m + amplitude.abs(),
            ShiftFamily::Tabulated { alpha, .. } => {
                alpha.iter().fold(0.0_f64, |acc, v| acc.max(v.abs()))
            }
        }
    }

    /// Offset that makes `alpha(z) >= -epsilon exp(rho z)` hold for `z < 0`.
    pub fn normalizing_offset(&self, epsilon: f64) -> Result<f64, ShiftError> {
        if !(epsilon > 0.0) {
            return Err(ShiftError::NonPositiveEpsilon(epsilon));
        }
        Ok(self.k_bound.max((self.c / epsilon).ln() / self.rho))
    }
}

fn sigmoid(m: f64, rho: f64, y: f64) -> f64 {
    let t = rho * y;
    if t >= 0.0 {
        -m / (1.0 + (-t).exp())
    } else {
        let e = t.exp();
        -m * e / (1.0 + e)
    }
}

fn interpolate(z: &[f64], v: &[f64], y: f64) -> f64 {
    let n = z.len();
    if y <= z[0] {
        return v[0];
    }
    if y >= z[n - 1] {
        return v[n - 1];
    }
    let j = z.partition_point(|&x| x <= y);
    let (z0, z1) = (z[j - 1], z[j]);
    let t = (y - z0) / (z1 - z0);
    v[j - 1] + t * (v[j] - v[j - 1])
}

fn parse_table(text: &str) -> Result<(Vec<f64>, Vec<f64>), ShiftError> {
    let mut zs = Vec::new();
    let mut alphas = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let cols: Vec<&str> = line
            .split(|c: char| c == ',' || c.is_whitespace())
            .filter(|c| !c.is_empty())
            .collect();
        if cols.len() != 2 {
            return Err(ShiftError::Table(format!(
                "line {}: expected 2 columns, got {}",
                lineno + 1,
                cols.len()
            )));
        }
        match (cols[0].parse::<f64>(), cols[1].parse::<f64>()) {
            (Ok(z), Ok(a)) => {
                zs.push(z);
                alphas.push(a);
            }
            _ if zs.is_empty() => continue, // header
            _ => {
                return Err(ShiftError::Table(format!(
                    "line {}: unparsable number",
                    lineno + 1
                )))
            }
        }
    }
    Ok((zs, alphas))
}

/// Translation normalisation: returns the profile with
/// `M = max(K, ln(C/epsilon)/rho)`. Idempotent for equal `epsilon`.
pub fn normalize_translation(
    profile: &ShiftProfile,
    epsilon: f64,
) -> Result<ShiftProfile, ShiftError> {
    let offset = profile.normalizing_offset(epsilon)?;
    Ok(profile.with_offset(offset))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EnvelopeCheck {
    pub name: String,
    /// Smallest margin over the checked points (positive is good).
    pub worst_margin: f64,
    pub worst_at: Option<f64>,
    pub checked_points: usize,
    pub passed: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EnvelopeReport {
    pub checks: Vec<EnvelopeCheck>,
    pub passed: bool,
}

impl EnvelopeReport {
    pub fn check(&self, name: &str) -> Option<&EnvelopeCheck> {
        self.checks.iter().find(|c| c.name == name)
    }

    pub fn first_failure(&self) -> Option<&EnvelopeCheck> {
        self.checks.iter().find(|c| !c.passed)
    }
}

/// Margin threshold for envelope checks.
pub const ENVELOPE_TOL: f64 = 1e-12;

/// Default envelope grid: `10^4` points over `[M - 10K, M + 10K]`, extended
/// to the left so that it always covers `[-10K, 0)`.
pub fn default_envelope_grid(profile: &ShiftProfile) -> Vec<f64> {
    let k10 = 10.0 * profile.k_bound;
    let lo = (profile.offset - k10).min(-k10);
    let hi = profile.offset + k10;
    let n = 10_000;
    (0..n)
        .map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64)
        .collect()
}

/// Grid verification of the envelope conditions. The translated-envelope
/// condition `alpha(z) >= -epsilon exp(rho z)` for `z < 0` is included when
/// `epsilon` is given.
pub fn verify_envelope(
    profile: &ShiftProfile,
    grid: &[f64],
    epsilon: Option<f64>,
) -> Result<EnvelopeReport, ShiftError> {
    if grid.is_empty() {
        return Err(ShiftError::EmptyGrid);
    }
    let mut checks = Vec::new();
    let mut push = |name: &str, pts: &mut dyn Iterator<Item = (f64, f64)>| {
        let mut worst = f64::INFINITY;
        let mut at = None;
        let mut count = 0;
        for (z, margin) in pts {
            count += 1;
            if margin < worst || margin.is_nan() {
                worst = margin;
                at = Some(z);
            }
        }
        checks.push(EnvelopeCheck {
            name: name.to_string(),
            worst_margin: worst,
            worst_at: at,
            checked_points: count,
            passed: worst >= -ENVELOPE_TOL,
        });
    };
    let m = profile.offset;
    let (c, rho, kb) = (profile.c, profile.rho, profile.k_bound);
    push(
        "bounded",
        &mut grid.iter().map(|&z| {
            (
                z,
                if profile.alpha(z).is_finite() {
                    0.0
                } else {
                    f64::NEG_INFINITY
                },
            )
        }),
    );
    push(
        "negative",
        &mut grid.iter().map(|&z| (z, -profile.alpha(z))),
    );
    push(
        "lower-envelope",
        &mut grid
            .iter()
            .filter(|&&z| z - m <= -kb)
            .map(|&z| (z, profile.alpha(z) + c * (rho * (z - m)).exp())),
    );
    push(
        "below-minus-one",
        &mut grid
            .iter()
            .filter(|&&z| z - m >= kb)
            .map(|&z| (z, -1.0 - profile.alpha(z))),
    );
    if let Some(eps) = epsilon {
        push(
            "translated-envelope",
            &mut grid
                .iter()
                .filter(|&&z| z < 0.0)
                .map(|&z| (z, profile.alpha(z) + eps * (rho * z).exp())),
        );
    }
    let passed = checks.iter().all(|c| c.passed);
    Ok(EnvelopeReport { checks, passed })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sigmoid_midpoint_and_tail() {
        let p = ShiftProfile::sigmoid(2.0, 0.5, 3.0).unwrap();
        assert!((p.alpha(0.0) + 1.0).abs() < 1e-15);
        // -2 e^{-10} / (1 + e^{-10})
        let v = p.alpha(-20.0);
        assert!((v + 9.079_574_e-5).abs() < 1e-9, "{v}");
        let env = -2.0 * (-10.0f64).exp();
        assert!((env + 9.079_986e-5).abs() < 1e-10);
        assert!(v >= env);
    }

    #[test]
    fn translation_identity() {
        let p = ShiftProfile::sigmoid(2.0, 0.5, 3.0).unwrap();
        let q = p.with_offset(10.0);
        assert!((q.alpha(10.0) + 1.0).abs() < 1e-15);
        for z in [-3.3, 0.0, 4.7, 12.5] {
            assert_eq!(q.alpha(z), p.alpha(z - 10.0));
        }
    }

    #[test]
    fn normalization_closed_form() {
        let p = ShiftProfile::sigmoid(2.0, 0.5, 3.0).unwrap();
        let q = normalize_translation(&p, 0.01).unwrap();
        assert!((q.offset - 200f64.ln() / 0.5).abs() < 1e-12);
        assert!((q.offset - 10.5966).abs() < 1e-4);
        assert!(2.0 * (-0.5 * q.offset).exp() <= 0.01 * (1.0 + 1e-12));
        // C <= eps: M = K
        let q = normalize_translation(&p, 5.0).unwrap();
        assert_eq!(q.offset, 3.0);
        // idempotent
        let q1 = normalize_translation(&p, 0.01).unwrap();
        assert_eq!(normalize_translation(&q1, 0.01).unwrap(), q1);
        assert!(matches!(
            normalize_translation(&p, 0.0),
            Err(ShiftError::NonPositiveEpsilon(_))
        ));
    }

    #[test]
    fn normalized_sigmoid_passes() {
        let p =
            normalize_translation(&ShiftProfile::sigmoid(2.0, 0.5, 3.0).unwrap(), 0.01).unwrap();
        let rep = verify_envelope(&p, &default_envelope_grid(&p), Some(0.01)).unwrap();
        assert!(rep.passed, "{rep:?}");
    }

    #[test]
    fn small_amplitude_never_below_minus_one() {
        let p = ShiftProfile::sigmoid(0.9, 0.5, 3.0).unwrap();
        let rep = verify_envelope(&p, &default_envelope_grid(&p), None).unwrap();
        assert_eq!(rep.first_failure().unwrap().name, "below-minus-one");
    }

    #[test]
    fn positive_bump_fails_negativity() {
        let p = ShiftProfile::sigmoid_with_bump(2.0, 0.5, 3.0, -3.0, -5.0, 1.0).unwrap();
        let rep = verify_envelope(&p, &default_envelope_grid(&p), None).unwrap();
        assert!(!rep.check("negative").unwrap().passed);
    }

    #[test]
    fn dip_family_satisfies_adjusted_envelope() {
        let p = ShiftProfile::sigmoid_with_bump(2.0, 0.5, 3.0, 0.5, -8.0, 1.5).unwrap();
        let rep = verify_envelope(&p, &default_envelope_grid(&p), None).unwrap();
        assert!(rep.passed, "{rep:?}");
    }

    #[test]
    fn table_parsing_and_interpolation() {
        let text = "z,alpha\n-10 -0.001\n0 -1\n5 -1.5\n10 -2\n";
        let (z, a) = parse_table(text).unwrap();
        let p = ShiftProfile::tabulated(z, a, 0.5, 3.0, 2.0).unwrap();
        assert!((p.alpha(2.5) + 1.25).abs() < 1e-15);
        assert_eq!(p.alpha(-100.0), -0.001);
        assert_eq!(p.alpha(100.0), -2.0);
        assert!(
            ShiftProfile::tabulated(vec![0.0, 1.0, 1.0, 2.0], vec![-1.0; 4], 0.5, 1.0, 1.0)
                .is_err()
        );
        assert!(
            ShiftProfile::tabulated(vec![0.0, 1.0, 2.0], vec![-1.0; 3], 0.5, 1.0, 1.0).is_err()
        );
    }
}
