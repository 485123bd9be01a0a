//! Generalized upper/lower solution pairs and their grid verification.
//!
//! A pair `(U1, U2, U3)`, `(L1, L2, L3)` must satisfy, off a finite set of
//! breakpoints, the cross-coupled inequalities
//!
//! ```text
//! d U1'' - s U1' + r1 U1 [1 + alpha - U1 - k L2 - b L3] <= 0
//! d U2'' - s U2' + r2 U2 [1 + alpha - h L1 - U2 - b L3] <= 0
//! d U3'' - s U3' + r3 U3 [-1 + alpha + a U1 + a U2 - U3] <= 0
//! d L1'' - s L1' + r1 L1 [1 + alpha - L1 - k U2 - b U3] >= 0
//! d L2'' - s L2' + r2 L2 [1 + alpha - h U1 - L2 - b U3] >= 0
//! d L3'' - s L3' + r3 L3 [-1 + alpha + a L1 + a L2 - L3] >= 0
//! ```
//!
//! together with the ordering `L <= U` and the kink conditions at every
//! breakpoint (upper profiles may only bend down, lower profiles only up).

use crate::model::{
    characteristic_roots, check_hypotheses, critical_speeds, steady_states, Characteristic,
    ModelError, ModelParams, Scenario, REL_TOL,
};
use crate::profile::{ClosedProfile, Piece, PiecewiseProfile, Side, Term};
use crate::shift::{normalize_translation, ShiftError, ShiftProfile};
use serde::{Deserialize, Serialize};
use std::f64::consts::E;
use std::fmt;
use std::str::FromStr;
use thiserror::Error;

/// Multiplicative slack applied to every strict amplitude lower bound.
pub const AMPLITUDE_SLACK: f64 = 1.05;
/// Default half-width of the excluded neighbourhood of each breakpoint.
pub const EXCLUSION_RADIUS: f64 = 1e-6;

#[derive(Debug, Error)]
pub enum BoundsError {
    #[error("hypothesis `{condition}` violated: {detail}")]
    HypothesisViolation { condition: String, detail: String },
    #[error("speed {speed} does not match the {scenario} regime (minimal speed {minimal})")]
    SpeedRegimeMismatch {
        scenario: BoundScenario,
        speed: f64,
        minimal: f64,
    },
    #[error("constant `{name}` = {value} is invalid: {reason}")]
    InvalidConstant {
        name: &'static str,
        value: f64,
        reason: String,
    },
    #[error("grid point {z} lies within the exclusion radius of breakpoint {breakpoint}")]
    GridTouchesBreakpoint { z: f64, breakpoint: f64 },
    #[error("{0} bounds are not closed-form; build them with the E_* chain")]
    NotClosedForm(BoundScenario),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Shift(#[from] ShiftError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BoundScenario {
    EuSuper,
    EuCritical,
    EstarSuper,
    EstarCritical,
    /// Numeric lower bounds from the scalar comparison waves.
    Estable,
}

impl BoundScenario {
    pub fn scenario(&self) -> Scenario {
        match self {
            BoundScenario::EuSuper | BoundScenario::EuCritical => Scenario::Eu,
            BoundScenario::EstarSuper | BoundScenario::EstarCritical => Scenario::Estar,
            BoundScenario::Estable => Scenario::Estable,
        }
    }

    pub fn is_critical(&self) -> bool {
        matches!(
            self,
            BoundScenario::EuCritical | BoundScenario::EstarCritical
        )
    }

    pub fn tag(&self) -> &'static str {
        match self {
            BoundScenario::EuSuper => "eu-super",
            BoundScenario::EuCritical => "eu-critical",
            BoundScenario::EstarSuper => "estar-super",
            BoundScenario::EstarCritical => "estar-critical",
            BoundScenario::Estable => "estable",
        }
    }

    /// Picks the super- or critical-speed construction for a scenario.
    pub fn for_speed(params: &ModelParams, s: f64, scenario: Scenario) -> Option<Self> {
        let cs = critical_speeds(params);
        let near = |m: f64| (s - m).abs() <= REL_TOL * m;
        match scenario {
            Scenario::Eu if near(cs.s3_star) => Some(BoundScenario::EuCritical),
            Scenario::Eu => Some(BoundScenario::EuSuper),
            Scenario::Estar if near(cs.s2_dstar) => Some(BoundScenario::EstarCritical),
            Scenario::Estar => Some(BoundScenario::EstarSuper),
            Scenario::Estable => Some(BoundScenario::Estable),
            Scenario::NecessaryOnly => None,
        }
    }
}

impl fmt::Display for BoundScenario {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.tag())
    }
}

impl FromStr for BoundScenario {
    type Err = ModelError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "eu-super" => Ok(BoundScenario::EuSuper),
            "eu-critical" => Ok(BoundScenario::EuCritical),
            "estar-super" => Ok(BoundScenario::EstarSuper),
            "estar-critical" => Ok(BoundScenario::EstarCritical),
            "estable" => Ok(BoundScenario::Estable),
            _ => Err(ModelError::UnknownScenario(s.to_string())),
        }
    }
}

/// Optional replacements for the automatically chosen constants.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BoundOverrides {
    pub epsilon: Option<f64>,
    pub mu1: Option<f64>,
    pub mu2: Option<f64>,
    pub nu1: Option<f64>,
    pub q1: Option<f64>,
    pub q2: Option<f64>,
    pub q3: Option<f64>,
    pub q4: Option<f64>,
    pub eta1: Option<f64>,
    pub eta2: Option<f64>,
}

/// Every constant of a construction. Fields that a scenario does not use
/// stay `None`; `*_min` are the strict lower bounds the amplitudes must
/// exceed.
#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct BoundConstants {
    pub lambda1: Option<f64>,
    pub lambda2: Option<f64>,
    pub lambda3: Option<f64>,
    pub lambda4: Option<f64>,
    pub lambda_u: Option<f64>,
    pub lambda_star: Option<f64>,
    pub mu1: Option<f64>,
    pub mu2: Option<f64>,
    pub nu1: Option<f64>,
    pub q1: Option<f64>,
    pub q2: Option<f64>,
    pub q3: Option<f64>,
    pub q4: Option<f64>,
    pub eta1: Option<f64>,
    pub eta2: Option<f64>,
    pub q1_min: Option<f64>,
    pub q2_min: Option<f64>,
    pub q3_min: Option<f64>,
    pub q4_min: Option<f64>,
    pub eta1_min: Option<f64>,
    pub eta2_min: Option<f64>,
    pub b0: Option<f64>,
    pub b1: Option<f64>,
    pub b2: Option<f64>,
    pub z1: Option<f64>,
    pub z2: Option<f64>,
    pub z3: Option<f64>,
    pub z4: Option<f64>,
    pub z5: Option<f64>,
    pub z6: Option<f64>,
    pub z_u: Option<f64>,
    pub z_star: Option<f64>,
    /// Carrying capacities of the scalar comparison waves.
    pub gamma2: Option<f64>,
    pub gamma3: Option<f64>,
    /// Sub-solution rates of the scalar comparison waves.
    pub lambda0_2: Option<f64>,
    pub lambda0_3: Option<f64>,
    /// Decay rate the envelope of `alpha` is required to have.
    pub rho: f64,
    pub epsilon: f64,
    /// Translation applied to the heterogeneity.
    pub offset: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BoundPair {
    pub scenario: BoundScenario,
    pub speed: f64,
    pub upper: [PiecewiseProfile; 3],
    pub lower: [PiecewiseProfile; 3],
    pub constants: BoundConstants,
    /// Heterogeneity after translation normalisation.
    pub shift: ShiftProfile,
}

impl BoundPair {
    pub fn upper_at(&self, z: f64) -> [f64; 3] {
        [0, 1, 2].map(|i| self.upper[i].value(z))
    }

    pub fn lower_at(&self, z: f64) -> [f64; 3] {
        [0, 1, 2].map(|i| self.lower[i].value(z))
    }

    pub fn midpoint_at(&self, z: f64) -> [f64; 3] {
        let (u, l) = (self.upper_at(z), self.lower_at(z));
        [0, 1, 2].map(|i| 0.5 * (u[i] + l[i]))
    }

    /// All breakpoints of all six profiles, sorted and deduplicated.
    pub fn breakpoints(&self) -> Vec<f64> {
        let mut b: Vec<f64> = self
            .upper
            .iter()
            .chain(&self.lower)
            .flat_map(|p| p.breakpoints().iter().copied())
            .collect();
        b.sort_by(f64::total_cmp);
        b.dedup();
        b
    }

    /// Upper and lower profiles exchanged (a deliberately invalid pair).
    pub fn swapped(&self) -> Self {
        Self {
            upper: self.lower.clone(),
            lower: self.upper.clone(),
            ..self.clone()
        }
    }

    pub fn invaded_state(&self, params: &ModelParams) -> [f64; 3] {
        self.scenario.scenario().invaded_state(params)
    }
}

fn exceed(name: &'static str, value: f64, min: f64) -> Result<f64, BoundsError> {
    if value.is_finite() && value > 0.0 {
        Ok(value)
    } else {
        Err(BoundsError::InvalidConstant {
            name,
            value,
            reason: format!("must be positive and finite (lower bound {min})"),
        })
    }
}

fn rate_in(name: &'static str, value: f64, lo: f64, hi: f64) -> Result<f64, BoundsError> {
    if value > lo && value < hi {
        Ok(value)
    } else {
        Err(BoundsError::InvalidConstant {
            name,
            value,
            reason: format!("must lie in ({lo}, {hi})"),
        })
    }
}

fn closed(bp: f64, left: Piece, right: Piece) -> PiecewiseProfile {
    PiecewiseProfile::Closed(ClosedProfile::split(bp, left, right))
}

/// The `(gamma/B)^gamma` supremum factor of `(-z)^gamma e^{lambda z}`.
fn sup_factor(gamma: f64, b: f64) -> f64 {
    (gamma / b).powf(gamma)
}

/// Lower bound shared by the square-root amplitudes of the critical cases.
fn critical_amplitude_bound(rate: f64, bcrit: f64, d: f64, eps: f64, coupling: f64) -> f64 {
    4.0 * rate
        * (bcrit / d)
        * (eps * sup_factor(2.5, bcrit) + coupling * bcrit * sup_factor(3.5, bcrit))
}

/// Builds the closed-form pair for one of the four explicit constructions.
/// The heterogeneity is translation-normalised for the working epsilon and
/// stored in the returned pair.
pub fn build_bounds(
    params: &ModelParams,
    s: f64,
    shift: &ShiftProfile,
    scenario: BoundScenario,
    overrides: &BoundOverrides,
) -> Result<BoundPair, BoundsError> {
    if scenario == BoundScenario::Estable {
        return Err(BoundsError::NotClosedForm(scenario));
    }
    let p = params;
    let cs = critical_speeds(p);
    let minimal = match scenario.scenario() {
        Scenario::Eu => cs.s3_star,
        _ => cs.s2_dstar,
    };
    let at_minimal = (s - minimal).abs() <= REL_TOL * minimal;
    let regime_ok = if scenario.is_critical() {
        at_minimal
    } else {
        s > minimal && !at_minimal
    };
    if !regime_ok {
        return Err(BoundsError::SpeedRegimeMismatch {
            scenario,
            speed: s,
            minimal,
        });
    }
    let hyp = check_hypotheses(p, s, scenario.scenario(), Some(shift.rho))?;
    if let Some(c) = hyp.first_failure() {
        return Err(BoundsError::HypothesisViolation {
            condition: c.name.clone(),
            detail: c.detail.clone(),
        });
    }
    let eps = overrides.epsilon.unwrap_or_else(|| hyp.working_epsilon());
    if !(eps > 0.0 && eps < hyp.epsilon_max) {
        return Err(BoundsError::HypothesisViolation {
            condition: "epsilon-window".into(),
            detail: format!("epsilon = {eps} not in (0, {})", hyp.epsilon_max),
        });
    }
    let shift = normalize_translation(shift, eps)?;
    let mut k = BoundConstants {
        epsilon: eps,
        offset: shift.offset,
        ..Default::default()
    };
    let st = steady_states(p);
    let wmax = 2.0 * p.a - 1.0;
    let bw = p.b * wmax;
    let one = || PiecewiseProfile::constant(1.0);

    let (upper, lower) = match scenario {
        BoundScenario::EuSuper => {
            let roots = characteristic_roots(p, s, Characteristic::A1)?;
            let (l1, l2) = (roots.small(), roots.large());
            let hi = l2.min(2.0 * l1);
            let mid = 0.5 * (l1 + hi);
            let mu1 = rate_in("mu1", overrides.mu1.unwrap_or(mid), l1, hi)?;
            let mu2 = rate_in("mu2", overrides.mu2.unwrap_or(mid), l1, hi)?;
            let q1_min = 1f64.max(p.r2 * (eps + 1.0 + bw) / -roots.eval(mu1));
            let q2_min = wmax.max(p.r3 * wmax * (eps + 3.0 * p.a - 1.0) / -roots.eval(mu2));
            let q1 = exceed(
                "q1",
                overrides.q1.unwrap_or(AMPLITUDE_SLACK * q1_min),
                q1_min,
            )?;
            let q2 = exceed(
                "q2",
                overrides.q2.unwrap_or(AMPLITUDE_SLACK * q2_min),
                q2_min,
            )?;
            let z1 = -q1.ln() / (mu1 - l1);
            let z2 = -(q2 / wmax).ln() / (mu2 - l1);
            k.lambda1 = Some(l1);
            k.lambda2 = Some(l2);
            k.mu1 = Some(mu1);
            k.mu2 = Some(mu2);
            (k.q1, k.q2, k.q1_min, k.q2_min) = (Some(q1), Some(q2), Some(q1_min), Some(q2_min));
            (k.z1, k.z2) = (Some(z1), Some(z2));
            k.rho = l1;
            let upper = [
                one(),
                closed(
                    0.0,
                    Piece::new(0.0, vec![Term::exp(1.0, l1)]),
                    Piece::constant(1.0),
                ),
                closed(
                    0.0,
                    Piece::new(0.0, vec![Term::exp(wmax, l1)]),
                    Piece::constant(wmax),
                ),
            ];
            let lower = [
                closed(
                    0.0,
                    Piece::new(1.0, vec![Term::exp(-1.0, l1)]),
                    Piece::constant(0.0),
                ),
                closed(
                    z1,
                    Piece::new(0.0, vec![Term::exp(1.0, l1), Term::exp(-q1, mu1)]),
                    Piece::constant(0.0),
                ),
                closed(
                    z2,
                    Piece::new(0.0, vec![Term::exp(wmax, l1), Term::exp(-q2, mu2)]),
                    Piece::constant(0.0),
                ),
            ];
            (upper, lower)
        }
        BoundScenario::EuCritical => {
            let lu = characteristic_roots(p, s, Characteristic::A1)?.small();
            let b0 = lu * E;
            let zu = -1.0 / lu;
            let q3_min =
                (E * lu.sqrt()).max(critical_amplitude_bound(p.r2, b0, p.d, eps, 1.0 + bw));
            let q4_min =
                (wmax * E * lu.sqrt()).max(critical_amplitude_bound(p.r3, b0, p.d, eps, p.a + 1.0));
            let q3 = exceed(
                "q3",
                overrides.q3.unwrap_or(AMPLITUDE_SLACK * q3_min),
                q3_min,
            )?;
            let q4 = exceed(
                "q4",
                overrides.q4.unwrap_or(AMPLITUDE_SLACK * q4_min),
                q4_min,
            )?;
            let z3 = -(q3 / b0).powi(2);
            let z4 = -(q4 / b0).powi(2);
            k.lambda_u = Some(lu);
            k.b0 = Some(b0);
            k.z_u = Some(zu);
            (k.q3, k.q4, k.q3_min, k.q4_min) = (Some(q3), Some(q4), Some(q3_min), Some(q4_min));
            (k.z3, k.z4) = (Some(z3), Some(z4));
            k.rho = lu;
            let upper = [
                one(),
                closed(
                    zu,
                    Piece::new(0.0, vec![Term::linear(b0, lu)]),
                    Piece::constant(1.0),
                ),
                closed(
                    zu,
                    Piece::new(0.0, vec![Term::linear(wmax * b0, lu)]),
                    Piece::constant(wmax),
                ),
            ];
            let lower = [
                closed(
                    zu,
                    Piece::new(1.0, vec![Term::linear(-b0, lu)]),
                    Piece::constant(0.0),
                ),
                closed(
                    z3,
                    Piece::new(0.0, vec![Term::linear(b0, lu), Term::sqrt(-q3, lu)]),
                    Piece::constant(0.0),
                ),
                closed(
                    z4,
                    Piece::new(
                        0.0,
                        vec![Term::linear(wmax * b0, lu), Term::sqrt(-wmax * q4, lu)],
                    ),
                    Piece::constant(0.0),
                ),
            ];
            (upper, lower)
        }
        BoundScenario::EstarSuper => {
            let roots = characteristic_roots(p, s, Characteristic::A2)?;
            let (l3, l4) = (roots.small(), roots.large());
            let hi = l4.min(2.0 * l3);
            let nu1 = rate_in("nu1", overrides.nu1.unwrap_or(0.5 * (l3 + hi)), l3, hi)?;
            let eta1_min = 1f64.max(p.r2 * (eps + 1.0 + bw) / -roots.eval(nu1));
            let eta1 = exceed(
                "eta1",
                overrides.eta1.unwrap_or(AMPLITUDE_SLACK * eta1_min),
                eta1_min,
            )?;
            let z5 = -eta1.ln() / (nu1 - l3);
            let b1 = wmax - st.w_p;
            (k.lambda3, k.lambda4, k.nu1) = (Some(l3), Some(l4), Some(nu1));
            (k.eta1, k.eta1_min, k.z5, k.b1) = (Some(eta1), Some(eta1_min), Some(z5), Some(b1));
            k.rho = l3;
            let (up, wp) = (st.u_p, st.w_p);
            let upper = [
                closed(
                    0.0,
                    Piece::new(up, vec![Term::exp(p.b * wp, l3)]),
                    Piece::constant(1.0),
                ),
                closed(
                    0.0,
                    Piece::new(0.0, vec![Term::exp(1.0, l3)]),
                    Piece::constant(1.0),
                ),
                closed(
                    0.0,
                    Piece::new(wp, vec![Term::exp(b1, l3)]),
                    Piece::constant(wmax),
                ),
            ];
            let lower = [
                closed(
                    0.0,
                    Piece::new(up, vec![Term::exp(-up, l3)]),
                    Piece::constant(0.0),
                ),
                closed(
                    z5,
                    Piece::new(0.0, vec![Term::exp(1.0, l3), Term::exp(-eta1, nu1)]),
                    Piece::constant(0.0),
                ),
                closed(
                    0.0,
                    Piece::new(wp, vec![Term::exp(-wp, l3)]),
                    Piece::constant(0.0),
                ),
            ];
            (upper, lower)
        }
        BoundScenario::EstarCritical => {
            let ls = characteristic_roots(p, s, Characteristic::A2)?.small();
            let b2 = ls * E;
            let b1 = wmax - st.w_p;
            let zs = -1.0 / ls;
            let eta2_min =
                (E * ls.sqrt()).max(critical_amplitude_bound(p.r2, b2, p.d, eps, 1.0 + bw));
            let eta2 = exceed(
                "eta2",
                overrides.eta2.unwrap_or(AMPLITUDE_SLACK * eta2_min),
                eta2_min,
            )?;
            let z6 = -(eta2 / b2).powi(2);
            (k.lambda_star, k.b1, k.b2, k.z_star) = (Some(ls), Some(b1), Some(b2), Some(zs));
            (k.eta2, k.eta2_min, k.z6) = (Some(eta2), Some(eta2_min), Some(z6));
            k.rho = ls;
            let (up, wp) = (st.u_p, st.w_p);
            let upper = [
                closed(
                    zs,
                    Piece::new(up, vec![Term::linear(p.b * wp * b2, ls)]),
                    Piece::constant(1.0),
                ),
                closed(
                    zs,
                    Piece::new(0.0, vec![Term::linear(b2, ls)]),
                    Piece::constant(1.0),
                ),
                closed(
                    zs,
                    Piece::new(wp, vec![Term::linear(b1 * b2, ls)]),
                    Piece::constant(wmax),
                ),
            ];
            let lower = [
                closed(
                    zs,
                    Piece::new(up, vec![Term::linear(-up * b2, ls)]),
                    Piece::constant(0.0),
                ),
                closed(
                    z6,
                    Piece::new(0.0, vec![Term::linear(b2, ls), Term::sqrt(-eta2, ls)]),
                    Piece::constant(0.0),
                ),
                closed(
                    zs,
                    Piece::new(wp, vec![Term::linear(-wp * b2, ls)]),
                    Piece::constant(0.0),
                ),
            ];
            (upper, lower)
        }
        BoundScenario::Estable => unreachable!(),
    };
    Ok(BoundPair {
        scenario,
        speed: s,
        upper,
        lower,
        constants: k,
        shift,
    })
}

/// Uniform grid on `[lo, hi]` with `n` points, refined ten-fold within
/// distance 1 of each breakpoint in range, with points closer than
/// `radius` to a breakpoint removed.
pub fn refined_grid(lo: f64, hi: f64, n: usize, breakpoints: &[f64], radius: f64) -> Vec<f64> {
    let h = (hi - lo) / (n - 1) as f64;
    let mut pts: Vec<f64> = (0..n).map(|i| lo + h * i as f64).collect();
    pts[n - 1] = hi;
    let fine = h / 10.0;
    for &b in breakpoints.iter().filter(|&&b| b >= lo && b <= hi) {
        let m = (1.0 / fine).round() as i64;
        for j in -m..=m {
            let z = b + fine * j as f64 + 0.5 * fine;
            if z >= lo && z <= hi {
                pts.push(z);
            }
        }
    }
    pts.sort_by(f64::total_cmp);
    pts.dedup();
    pts.retain(|z| breakpoints.iter().all(|b| (z - b).abs() >= radius));
    pts
}

/// Default verification grid: `[-60, 60]`, 12001 points, refined at kinks.
pub fn default_grid(pair: &BoundPair) -> Vec<f64> {
    refined_grid(-60.0, 60.0, 12001, &pair.breakpoints(), EXCLUSION_RADIUS)
}

pub const INEQUALITY_NAMES: [&str; 6] = ["U1", "U2", "U3", "L1", "L2", "L3"];

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct InequalityResult {
    pub name: &'static str,
    /// Smallest signed margin (`-U_i` for uppers, `L_i` for lowers).
    pub worst_margin: f64,
    pub worst_at: f64,
    pub passed: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ResidualReport {
    pub points: usize,
    pub range: (f64, f64),
    pub exclusion_radius: f64,
    pub tol: f64,
    pub inequalities: Vec<InequalityResult>,
    /// Raw `(U1, U2, U3, L1, L2, L3)` values at each grid point.
    #[serde(skip)]
    pub values: Vec<[f64; 6]>,
    #[serde(skip)]
    pub grid: Vec<f64>,
}

impl ResidualReport {
    pub fn passed(&self) -> bool {
        self.inequalities.iter().all(|r| r.passed)
    }

    pub fn get(&self, name: &str) -> Option<&InequalityResult> {
        self.inequalities.iter().find(|r| r.name == name)
    }
}

/// The six residuals at a point from the profile values and derivatives.
pub fn residuals_at(
    params: &ModelParams,
    s: f64,
    alpha: f64,
    upper: &[[f64; 3]; 3],
    lower: &[[f64; 3]; 3],
) -> [f64; 6] {
    let p = params;
    let lin = |v: &[f64; 3]| p.d * v[2] - s * v[1];
    let (u1, u2, u3) = (upper[0][0], upper[1][0], upper[2][0]);
    let (l1, l2, l3) = (lower[0][0], lower[1][0], lower[2][0]);
    [
        lin(&upper[0]) + p.r1 * u1 * (1.0 + alpha - u1 - p.k * l2 - p.b * l3),
        lin(&upper[1]) + p.r2 * u2 * (1.0 + alpha - p.h * l1 - u2 - p.b * l3),
        lin(&upper[2]) + p.r3 * u3 * (-1.0 + alpha + p.a * u1 + p.a * u2 - u3),
        lin(&lower[0]) + p.r1 * l1 * (1.0 + alpha - l1 - p.k * u2 - p.b * u3),
        lin(&lower[1]) + p.r2 * l2 * (1.0 + alpha - p.h * u1 - l2 - p.b * u3),
        lin(&lower[2]) + p.r3 * l3 * (-1.0 + alpha + p.a * l1 + p.a * l2 - l3),
    ]
}

/// Evaluates the six inequalities on `grid`, using the profiles' exact
/// derivatives. Grid points must keep `exclusion_radius` away from every
/// breakpoint.
pub fn bound_residuals(
    pair: &BoundPair,
    shift: &ShiftProfile,
    params: &ModelParams,
    grid: &[f64],
    exclusion_radius: f64,
    tol: f64,
) -> Result<ResidualReport, BoundsError> {
    let bps = pair.breakpoints();
    for &z in grid {
        if let Some(&b) = bps.iter().find(|&&b| (z - b).abs() < exclusion_radius) {
            return Err(BoundsError::GridTouchesBreakpoint { z, breakpoint: b });
        }
    }
    let values: Vec<[f64; 6]> = grid
        .iter()
        .map(|&z| {
            let up = [0, 1, 2].map(|i| pair.upper[i].eval3_side(z, Side::Right));
            let lo = [0, 1, 2].map(|i| pair.lower[i].eval3_side(z, Side::Right));
            residuals_at(params, pair.speed, shift.alpha(z), &up, &lo)
        })
        .collect();
    let inequalities = (0..6)
        .map(|j| {
            let sign = if j < 3 { -1.0 } else { 1.0 };
            let mut worst = f64::INFINITY;
            let mut at = f64::NAN;
            for (z, v) in grid.iter().zip(&values) {
                let m = sign * v[j];
                if m < worst || m.is_nan() {
                    worst = m;
                    at = *z;
                }
            }
            InequalityResult {
                name: INEQUALITY_NAMES[j],
                worst_margin: worst,
                worst_at: at,
                passed: worst >= -tol,
            }
        })
        .collect();
    let range = (
        grid.first().copied().unwrap_or(f64::NAN),
        grid.last().copied().unwrap_or(f64::NAN),
    );
    Ok(ResidualReport {
        points: grid.len(),
        range,
        exclusion_radius,
        tol,
        inequalities,
        values,
        grid: grid.to_vec(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OrderCheck {
    pub worst_margin: f64,
    pub worst_at: f64,
    /// First grid point and component where `lower > upper + tol`.
    pub first_violation: Option<(f64, usize)>,
    pub passed: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct KinkCheck {
    pub profile: String,
    pub at: f64,
    pub left_slope: f64,
    pub right_slope: f64,
    pub passed: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LimitCheck {
    pub at: f64,
    pub invaded_state: [f64; 3],
    /// Largest excess of `|profile - state|` over the tail bound.
    pub worst_excess: f64,
    pub passed: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VerificationReport {
    pub scenario: BoundScenario,
    pub residuals: ResidualReport,
    pub ordering: OrderCheck,
    pub kinks: Vec<KinkCheck>,
    pub limits: Option<LimitCheck>,
    pub passed: bool,
    pub first_failure: Option<String>,
}

/// Residual signs, ordering, kink conditions and invaded-state limits.
pub fn verify_pair(
    pair: &BoundPair,
    shift: &ShiftProfile,
    params: &ModelParams,
    grid: &[f64],
    tol: f64,
) -> Result<VerificationReport, BoundsError> {
    let residuals = bound_residuals(pair, shift, params, grid, EXCLUSION_RADIUS, tol)?;

    let mut worst = f64::INFINITY;
    let mut worst_at = f64::NAN;
    let mut first_violation = None;
    for &z in grid {
        let (u, l) = (pair.upper_at(z), pair.lower_at(z));
        for i in 0..3 {
            let m = u[i] - l[i];
            if m < worst {
                worst = m;
                worst_at = z;
            }
            if m < -tol && first_violation.is_none() {
                first_violation = Some((z, i));
            }
        }
    }
    let ordering = OrderCheck {
        worst_margin: worst,
        worst_at,
        first_violation,
        passed: first_violation.is_none(),
    };

    let mut kinks = Vec::new();
    for (kind, profiles) in [("upper", &pair.upper), ("lower", &pair.lower)] {
        for (i, prof) in profiles.iter().enumerate() {
            for &b in prof.breakpoints() {
                let left = prof.eval3_side(b, Side::Left)[1];
                let right = prof.eval3_side(b, Side::Right)[1];
                let passed = if kind == "upper" {
                    right <= left + tol
                } else {
                    left <= right + tol
                };
                kinks.push(KinkCheck {
                    profile: format!("{kind}{}", i + 1),
                    at: b,
                    left_slope: left,
                    right_slope: right,
                    passed,
                });
            }
        }
    }

    let all_closed = pair.upper.iter().chain(&pair.lower).all(|p| p.is_closed());
    let limits = if all_closed && pair.scenario != BoundScenario::Estable {
        let at = grid.first().copied().unwrap_or(-60.0);
        let state = pair.invaded_state(params);
        let mut worst_excess = f64::NEG_INFINITY;
        for prof in [&pair.upper, &pair.lower] {
            for (i, p) in prof.iter().enumerate() {
                let excess = (p.value(at) - state[i]).abs() - p.tail_bound(at);
                worst_excess = worst_excess.max(excess);
            }
        }
        Some(LimitCheck {
            at,
            invaded_state: state,
            worst_excess,
            passed: worst_excess <= 1e-10,
        })
    } else {
        None
    };

    let mut first_failure = residuals.inequalities.iter().find(|r| !r.passed).map(|r| {
        format!(
            "{} (margin {:e} at z = {})",
            r.name, r.worst_margin, r.worst_at
        )
    });
    if first_failure.is_none() {
        if let Some((z, i)) = ordering.first_violation {
            first_failure = Some(format!("order (component {} at z = {z})", i + 1));
        }
    }
    if first_failure.is_none() {
        if let Some(k) = kinks.iter().find(|k| !k.passed) {
            first_failure = Some(format!("kink ({} at z = {})", k.profile, k.at));
        }
    }
    if first_failure.is_none() {
        if let Some(l) = limits.as_ref().filter(|l| !l.passed) {
            first_failure = Some(format!(
                "limits (excess {:e} at z = {})",
                l.worst_excess, l.at
            ));
        }
    }
    Ok(VerificationReport {
        scenario: pair.scenario,
        passed: first_failure.is_none(),
        residuals,
        ordering,
        kinks,
        limits,
        first_failure,
    })
}
