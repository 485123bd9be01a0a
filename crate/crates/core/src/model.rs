//! Model parameters, constant steady states, critical speeds and the
//! hypothesis checks for the existence/non-existence results.
//!
//! The reduced system has equal diffusion `d`, equal conversion rate `a`
//! and equal predation rate `b`:
//!
//! ```text
//! u_t = d u_zz - s u_z + r1 u [1 + alpha - u - k v - b w]
//! v_t = d v_zz - s v_z + r2 v [1 + alpha - h u - v - b w]
//! w_t = d w_zz - s w_z + r3 w [-1 + alpha + a u + a v - w]
//! ```

use serde::{Deserialize, Serialize};
use std::fmt;
use std::str::FromStr;
use thiserror::Error;

/// Relative tolerance used for float equalities (equal invasion speeds,
/// speed equal to a minimal speed).
pub const REL_TOL: f64 = 1e-9;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ModelError {
    #[error("parameter `{name}` must be strictly positive, got {value}")]
    NonPositive { name: &'static str, value: f64 },
    #[error("standing assumption a > 1, 0 < h < 1 < k violated (a = {a}, h = {h}, k = {k})")]
    StandingAssumption { a: f64, h: f64, k: f64 },
    #[error("speed must be positive, got {0}")]
    NonPositiveSpeed(f64),
    #[error("decay rate must be positive, got {0}")]
    NonPositiveRate(f64),
    #[error("no real roots: speed {speed} is below the minimal speed {minimal}")]
    NoRealRoots { speed: f64, minimal: f64 },
    #[error("unknown scenario tag `{0}`")]
    UnknownScenario(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelParams {
    pub d: f64,
    pub r1: f64,
    pub r2: f64,
    pub r3: f64,
    pub a: f64,
    pub b: f64,
    pub h: f64,
    pub k: f64,
}

impl ModelParams {
    /// Checks positivity and the standing assumption `a > 1, 0 < h < 1 < k`.
    pub fn validated(self) -> Result<Self, ModelError> {
        self.check_positive()?;
        if !self.standing_assumption_holds() {
            return Err(ModelError::StandingAssumption {
                a: self.a,
                h: self.h,
                k: self.k,
            });
        }
        Ok(self)
    }

    /// Positivity only. For exploratory runs outside the standing assumption.
    pub fn exploratory(self) -> Result<Self, ModelError> {
        self.check_positive()?;
        Ok(self)
    }

    fn check_positive(&self) -> Result<(), ModelError> {
        for (name, value) in self.named() {
            if !(value > 0.0 && value.is_finite()) {
                return Err(ModelError::NonPositive { name, value });
            }
        }
        Ok(())
    }

    pub fn named(&self) -> [(&'static str, f64); 8] {
        [
            ("d", self.d),
            ("r1", self.r1),
            ("r2", self.r2),
            ("r3", self.r3),
            ("a", self.a),
            ("b", self.b),
            ("h", self.h),
            ("k", self.k),
        ]
    }

    pub fn standing_assumption_holds(&self) -> bool {
        self.a > 1.0 && self.h > 0.0 && self.h < 1.0 && self.k > 1.0
    }

    /// Reaction terms `(f1, f2, f3)` at a point.
    #[inline]
    pub fn reaction(&self, alpha: f64, u: f64, v: f64, w: f64) -> [f64; 3] {
        [
            self.r1 * u * (1.0 + alpha - u - self.k * v - self.b * w),
            self.r2 * v * (1.0 + alpha - self.h * u - v - self.b * w),
            self.r3 * w * (-1.0 + alpha + self.a * u + self.a * v - w),
        ]
    }

    /// Jacobian of [`ModelParams::reaction`] with respect to `(u, v, w)`.
    #[inline]
    pub fn reaction_jacobian(&self, alpha: f64, u: f64, v: f64, w: f64) -> [[f64; 3]; 3] {
        let (a, b, h, k) = (self.a, self.b, self.h, self.k);
        let g1 = 1.0 + alpha - u - k * v - b * w;
        let g2 = 1.0 + alpha - h * u - v - b * w;
        let g3 = -1.0 + alpha + a * u + a * v - w;
        [
            [self.r1 * (g1 - u), -self.r1 * k * u, -self.r1 * b * u],
            [-self.r2 * h * v, self.r2 * (g2 - v), -self.r2 * b * v],
            [self.r3 * a * w, self.r3 * a * w, self.r3 * (g3 - w)],
        ]
    }

    /// Upper corner of the invariant box `[0,1] x [0,1] x [0, 2a-1]`.
    pub fn box_bound(&self) -> [f64; 3] {
        [1.0, 1.0, 2.0 * self.a - 1.0]
    }

    /// Row-sum bound on the reaction Jacobian over the invariant box, for
    /// heterogeneities with `-alpha_max <= alpha <= 0`.
    pub fn reaction_lipschitz(&self, alpha_max: f64) -> f64 {
        let (a, b, h, k) = (self.a, self.b, self.h, self.k);
        let wmax = 2.0 * a - 1.0;
        let row1 = self.r1 * ((1.0 + alpha_max + 2.0 + k + b * wmax) + k + b);
        let row2 = self.r2 * ((1.0 + alpha_max + h + 2.0 + b * wmax) + h + b);
        let row3 = self.r3 * ((1.0 + alpha_max + 2.0 * a + 2.0 * wmax) + 2.0 * a * wmax);
        row1.max(row2).max(row3)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SteadyStates {
    pub e_u: [f64; 3],
    pub e_v: [f64; 3],
    /// `(u_p, 0, w_p)`
    pub e_star_up: [f64; 3],
    /// `(0, v_p, w_p)`
    pub e_star_lo: [f64; 3],
    pub u_p: f64,
    pub v_p: f64,
    pub w_p: f64,
    pub beta_up: f64,
    pub beta_lo: f64,
}

impl SteadyStates {
    /// Candidate limiting states with their names, zero state included.
    pub fn candidates(&self) -> [(&'static str, [f64; 3]); 5] {
        [
            ("E_u", self.e_u),
            ("E_v", self.e_v),
            ("E^*", self.e_star_up),
            ("E_*", self.e_star_lo),
            ("0", [0.0; 3]),
        ]
    }
}

pub fn steady_states(params: &ModelParams) -> SteadyStates {
    let (a, b) = (params.a, params.b);
    let u_p = (1.0 + b) / (1.0 + a * b);
    let v_p = u_p;
    let w_p = (a - 1.0) / (1.0 + a * b);
    SteadyStates {
        e_u: [1.0, 0.0, 0.0],
        e_v: [0.0, 1.0, 0.0],
        e_star_up: [u_p, 0.0, w_p],
        e_star_lo: [0.0, v_p, w_p],
        u_p,
        v_p,
        w_p,
        beta_up: 1.0 - params.h * u_p - b * w_p,
        beta_lo: 1.0 - params.k * v_p - b * w_p,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CriticalSpeeds {
    pub s2_star: f64,
    pub s2_dstar: f64,
    pub s3_star: f64,
    pub lambda_u: f64,
    pub lambda_star: f64,
}

pub fn critical_speeds(params: &ModelParams) -> CriticalSpeeds {
    let st = steady_states(params);
    let d = params.d;
    CriticalSpeeds {
        s2_star: 2.0 * (d * params.r2 * (1.0 - params.h)).sqrt(),
        s2_dstar: 2.0 * (d * params.r2 * st.beta_up).sqrt(),
        s3_star: 2.0 * (d * params.r3 * (params.a - 1.0)).sqrt(),
        lambda_u: (params.r3 * (params.a - 1.0) / d).sqrt(),
        lambda_star: (params.r2 * st.beta_up / d).sqrt(),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Threshold {
    Q1,
    Q2,
}

/// Piecewise speed thresholds: `d rho + c / rho` below the knee
/// `sqrt(c/d)`, the minimal speed `2 sqrt(d c)` above it, with
/// `c = r3 (a-1)` for `Q1` and `c = r2 beta^*` for `Q2`.
pub fn q_threshold(params: &ModelParams, rho: f64, which: Threshold) -> Result<f64, ModelError> {
    if !(rho > 0.0) {
        return Err(ModelError::NonPositiveRate(rho));
    }
    let c = match which {
        Threshold::Q1 => params.r3 * (params.a - 1.0),
        Threshold::Q2 => params.r2 * steady_states(params).beta_up,
    };
    let knee = (c / params.d).sqrt();
    Ok(if rho < knee {
        params.d * rho + c / rho
    } else {
        2.0 * (params.d * c).sqrt()
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Characteristic {
    /// `A1(l) = d l^2 - s l + r3 (a-1)`
    A1,
    /// `A2(l) = d l^2 - s l + r2 beta^*`
    A2,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub enum Roots {
    Distinct { small: f64, large: f64 },
    Double(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RootInfo {
    pub d: f64,
    pub s: f64,
    pub c: f64,
    pub roots: Roots,
}

impl RootInfo {
    pub fn eval(&self, lambda: f64) -> f64 {
        self.d * lambda * lambda - self.s * lambda + self.c
    }

    pub fn small(&self) -> f64 {
        match self.roots {
            Roots::Distinct { small, .. } => small,
            Roots::Double(l) => l,
        }
    }

    pub fn large(&self) -> f64 {
        match self.roots {
            Roots::Distinct { large, .. } => large,
            Roots::Double(l) => l,
        }
    }

    pub fn is_double(&self) -> bool {
        matches!(self.roots, Roots::Double(_))
    }
}

pub fn characteristic_roots(
    params: &ModelParams,
    s: f64,
    which: Characteristic,
) -> Result<RootInfo, ModelError> {
    if !(s > 0.0) {
        return Err(ModelError::NonPositiveSpeed(s));
    }
    let d = params.d;
    let c = match which {
        Characteristic::A1 => params.r3 * (params.a - 1.0),
        Characteristic::A2 => params.r2 * steady_states(params).beta_up,
    };
    let minimal = 2.0 * (d * c).sqrt();
    let roots = if (s - minimal).abs() <= REL_TOL * minimal {
        Roots::Double(s / (2.0 * d))
    } else if s < minimal {
        return Err(ModelError::NoRealRoots { speed: s, minimal });
    } else {
        let disc = (s * s - 4.0 * d * c).sqrt();
        // the small root via the product of roots avoids cancellation
        let large = (s + disc) / (2.0 * d);
        let small = c / (d * large);
        Roots::Distinct { small, large }
    };
    Ok(RootInfo { d, s, c, roots })
}

/// Which existence/non-existence statement a hypothesis check targets.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Scenario {
    /// Invaded state `E_u = (1,0,0)`.
    Eu,
    /// Invaded state `E^* = (u_p, 0, w_p)`.
    Estar,
    /// Invaded state `E_* = (0, v_p, w_p)` (stable).
    Estable,
    /// Invaded state `E_v = (0,1,0)`: only a necessary speed is known.
    NecessaryOnly,
}

impl Scenario {
    pub fn tag(&self) -> &'static str {
        match self {
            Scenario::Eu => "eu",
            Scenario::Estar => "estar",
            Scenario::Estable => "estable",
            Scenario::NecessaryOnly => "necessary-only",
        }
    }

    pub fn invaded_state(&self, params: &ModelParams) -> [f64; 3] {
        let st = steady_states(params);
        match self {
            Scenario::Eu => st.e_u,
            Scenario::Estar => st.e_star_up,
            Scenario::Estable => st.e_star_lo,
            Scenario::NecessaryOnly => st.e_v,
        }
    }
}

impl fmt::Display for Scenario {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.tag())
    }
}

impl FromStr for Scenario {
    type Err = ModelError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "eu" => Ok(Scenario::Eu),
            "estar" | "e-star-up" => Ok(Scenario::Estar),
            "estable" | "e-star-lo" => Ok(Scenario::Estable),
            "necessary-only" | "ev" => Ok(Scenario::NecessaryOnly),
            _ => Err(ModelError::UnknownScenario(s.to_string())),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Condition {
    pub name: String,
    pub passed: bool,
    /// Human-readable evaluation, e.g. `0.8 < 1`.
    pub detail: String,
}

impl Condition {
    fn new(name: &str, passed: bool, detail: String) -> Self {
        Self {
            name: name.to_string(),
            passed,
            detail,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HypothesisReport {
    pub scenario: Scenario,
    pub speed: f64,
    /// `true` when the speed equals the scenario's minimal speed (double root).
    pub critical: bool,
    pub conditions: Vec<Condition>,
    /// Supremum of the admissible epsilon window, 0 when the window is empty.
    pub epsilon_max: f64,
    pub necessary_speed: Option<f64>,
}

impl HypothesisReport {
    pub fn passed(&self) -> bool {
        self.conditions.iter().all(|c| c.passed)
    }

    pub fn first_failure(&self) -> Option<&Condition> {
        self.conditions.iter().find(|c| !c.passed)
    }

    /// Default working epsilon: `min(0.01, epsilon_max / 2)`.
    pub fn working_epsilon(&self) -> f64 {
        (0.5 * self.epsilon_max).min(0.01)
    }
}

fn relative_eq(x: f64, y: f64) -> bool {
    (x - y).abs() <= REL_TOL * x.abs().max(y.abs())
}

/// Evaluates every named hypothesis of the scenario. `rho` is the
/// heterogeneity's decay rate; when given, the `s >= Q(rho)` speed condition
/// is included.
pub fn check_hypotheses(
    params: &ModelParams,
    s: f64,
    scenario: Scenario,
    rho: Option<f64>,
) -> Result<HypothesisReport, ModelError> {
    let p = params;
    let st = steady_states(p);
    let cs = critical_speeds(p);
    let mut conditions = vec![Condition::new(
        "c-s",
        p.standing_assumption_holds(),
        format!("a = {}, h = {}, k = {}", p.a, p.h, p.k),
    )];
    let bw = p.b * (2.0 * p.a - 1.0);
    let (critical, epsilon_max, necessary_speed) = match scenario {
        Scenario::Eu => {
            let lhs = p.r2 * (1.0 - p.h);
            let rhs = p.r3 * (p.a - 1.0);
            conditions.push(Condition::new(
                "equal-speeds",
                relative_eq(lhs, rhs),
                format!("r2(1-h) = {lhs} vs r3(a-1) = {rhs}"),
            ));
            let r1_lhs = p.r1 * (p.k + bw - 1.0);
            conditions.push(Condition::new(
                "r1",
                r1_lhs < rhs,
                format!("{r1_lhs} < {rhs}"),
            ));
            let smin = cs.s2_star.max(cs.s3_star);
            let critical = relative_eq(s, cs.s3_star);
            conditions.push(Condition::new(
                "speed",
                critical || s >= smin,
                format!("s = {s} >= max(s2*, s3*) = {smin}"),
            ));
            if let Some(rho) = rho {
                let q = q_threshold(p, rho, Threshold::Q1)?;
                conditions.push(Condition::new(
                    "Q1",
                    s >= q || relative_eq(s, q),
                    format!("s = {s} >= Q1({rho}) = {q}"),
                ));
            }
            let window = (rhs - r1_lhs) / p.r1;
            let window = if critical {
                std::f64::consts::E * window
            } else {
                window
            };
            (critical, window.max(0.0), Some(smin))
        }
        Scenario::Estar => {
            let gain = p.r2 * st.beta_up;
            let first = p.r1 * ((p.k - 1.0) + bw);
            let lhs = first.max(p.r3);
            conditions.push(Condition::new(
                "r12",
                lhs < gain,
                format!("max({first}, {}) < r2 beta^* = {gain}", p.r3),
            ));
            let critical = relative_eq(s, cs.s2_dstar);
            conditions.push(Condition::new(
                "speed",
                critical || s >= cs.s2_dstar,
                format!("s = {s} >= s2** = {}", cs.s2_dstar),
            ));
            if let Some(rho) = rho {
                let q = q_threshold(p, rho, Threshold::Q2)?;
                conditions.push(Condition::new(
                    "Q2",
                    s >= q || relative_eq(s, q),
                    format!("s = {s} >= Q2({rho}) = {q}"),
                ));
            }
            let window = (gain / p.r1 - ((p.k - 1.0) + bw)).min(gain / p.r3 - 1.0);
            let window = if critical {
                std::f64::consts::E * window
            } else {
                window
            };
            (critical, window.max(0.0), Some(cs.s2_dstar))
        }
        Scenario::Estable => {
            let a_min = 1.0 / (1.0 - p.h);
            let b_max = (1.0 - p.h - 1.0 / p.a) / (2.0 * p.a - 1.0);
            let ok_a = p.a > a_min;
            let ok_b = p.b < b_max;
            conditions.push(Condition::new(
                "co-b22",
                ok_a && ok_b,
                format!("a = {} > {a_min} and b = {} < {b_max}", p.a, p.b),
            ));
            conditions.push(Condition::new("speed", s > 0.0, format!("s = {s} > 0")));
            // sub-solution window of the scalar comparison waves: d l^2 - s l + r2 eps < 0
            let window = if ok_a && ok_b && s > 0.0 {
                s * s / (4.0 * p.d * p.r2)
            } else {
                0.0
            };
            (false, window, None)
        }
        Scenario::NecessaryOnly => {
            conditions.push(Condition::new(
                "speed",
                s >= cs.s3_star || relative_eq(s, cs.s3_star),
                format!("s = {s} >= s3* = {}", cs.s3_star),
            ));
            (relative_eq(s, cs.s3_star), 0.0, Some(cs.s3_star))
        }
    };
    Ok(HypothesisReport {
        scenario,
        speed: s,
        critical,
        conditions,
        epsilon_max,
        necessary_speed,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pset_a() -> ModelParams {
        ModelParams {
            d: 1.0,
            r1: 1.0,
            r2: 2.0,
            r3: 1.0,
            a: 2.0,
            b: 0.1,
            h: 0.5,
            k: 1.5,
        }
    }

    fn pset_c() -> ModelParams {
        ModelParams {
            d: 1.0,
            r1: 1.0,
            r2: 1.0,
            r3: 1.0,
            a: 3.0,
            b: 0.02,
            h: 0.5,
            k: 1.5,
        }
    }

    #[test]
    fn steady_states_zero_kinetics() {
        let p = ModelParams { b: 0.5, ..pset_a() };
        let st = steady_states(&p);
        assert!((st.u_p - 0.75).abs() < 1e-15);
        assert!((st.w_p - 0.5).abs() < 1e-15);
        assert!((1.0 - st.u_p - p.b * st.w_p).abs() < 1e-12);
        assert!((-1.0 + p.a * st.u_p - st.w_p).abs() < 1e-12);
        assert_eq!(st.u_p, st.v_p);
    }

    #[test]
    fn beta_values() {
        let st = steady_states(&pset_a());
        // (1 -+ 0.5) * 1.1 / 1.2
        assert!((st.beta_up - 0.458_333_333_333_333_3).abs() < 1e-14);
        assert!((st.beta_lo + 0.458_333_333_333_333_3).abs() < 1e-14);
    }

    #[test]
    fn speeds_pset_a() {
        let cs = critical_speeds(&pset_a());
        assert!((cs.s2_star - 2.0).abs() < 1e-14);
        assert!((cs.s3_star - 2.0).abs() < 1e-14);
        assert!((cs.s2_dstar - 1.914_854_215_512_676).abs() < 1e-12);
        // A2(lambda*) = 0
        let l = cs.lambda_star;
        let beta = steady_states(&pset_a()).beta_up;
        assert!((l * l - cs.s2_dstar * l + 2.0 * beta).abs() < 1e-12);
    }

    #[test]
    fn s2_star_vanishes_as_h_to_one() {
        let mut last = f64::INFINITY;
        for h in [0.9, 0.99, 0.999, 0.9999] {
            let s = critical_speeds(&ModelParams { h, ..pset_a() }).s2_star;
            assert!(s < last);
            last = s;
        }
        assert!(last < 0.03);
    }

    #[test]
    fn q1_branches() {
        let p = pset_a();
        assert!((q_threshold(&p, 0.5, Threshold::Q1).unwrap() - 2.5).abs() < 1e-14);
        assert_eq!(q_threshold(&p, 1.7, Threshold::Q1).unwrap(), 2.0);
        let lu = critical_speeds(&p).lambda_u;
        let below = p.d * lu + p.r3 * (p.a - 1.0) / lu;
        assert!((below - q_threshold(&p, lu, Threshold::Q1).unwrap()).abs() < 1e-12);
        assert!(matches!(
            q_threshold(&p, 0.0, Threshold::Q2),
            Err(ModelError::NonPositiveRate(_))
        ));
    }

    #[test]
    fn roots_of_a1() {
        let p = pset_a();
        let r = characteristic_roots(&p, 2.5, Characteristic::A1).unwrap();
        assert!((r.small() - 0.5).abs() < 1e-14);
        assert!((r.large() - 2.0).abs() < 1e-14);
        assert!(r.eval(r.small()).abs() < 1e-12 && r.eval(r.large()).abs() < 1e-12);
        let r = characteristic_roots(&p, 2.0, Characteristic::A1).unwrap();
        assert_eq!(r.roots, Roots::Double(1.0));
        assert!(matches!(
            characteristic_roots(&p, 1.9, Characteristic::A1),
            Err(ModelError::NoRealRoots { .. })
        ));
    }

    #[test]
    fn hypotheses_eu_pset_a() {
        let rep = check_hypotheses(&pset_a(), 2.5, Scenario::Eu, None).unwrap();
        assert!(rep.passed(), "{rep:?}");
        assert!((rep.epsilon_max - 0.2).abs() < 1e-12);
        assert_eq!(rep.necessary_speed, Some(2.0));
        assert!((rep.working_epsilon() - 0.01).abs() < 1e-15);

        let rep = check_hypotheses(
            &ModelParams {
                r1: 2.0,
                ..pset_a()
            },
            2.5,
            Scenario::Eu,
            None,
        )
        .unwrap();
        assert_eq!(rep.first_failure().unwrap().name, "r1");
        assert_eq!(rep.epsilon_max, 0.0);
    }

    #[test]
    fn hypotheses_eu_requires_equal_speeds() {
        let p = ModelParams {
            r2: 2.0 * (1.0 + 1e-6),
            ..pset_a()
        };
        let rep = check_hypotheses(&p, 2.5, Scenario::Eu, None).unwrap();
        assert_eq!(rep.first_failure().unwrap().name, "equal-speeds");
        let p = ModelParams {
            r2: 2.0 * (1.0 + 1e-11),
            ..pset_a()
        };
        assert!(check_hypotheses(&p, 2.5, Scenario::Eu, None)
            .unwrap()
            .passed());
    }

    #[test]
    fn hypotheses_critical_window_scaled_by_e() {
        let rep = check_hypotheses(&pset_a(), 2.0, Scenario::Eu, Some(1.5)).unwrap();
        assert!(rep.critical && rep.passed());
        assert!((rep.epsilon_max - 0.2 * std::f64::consts::E).abs() < 1e-12);
    }

    #[test]
    fn hypotheses_estable_pset_c() {
        let rep = check_hypotheses(&pset_c(), 1.0, Scenario::Estable, None).unwrap();
        assert!(rep.passed());
        assert_eq!(rep.necessary_speed, None);
        let rep = check_hypotheses(
            &ModelParams {
                b: 0.05,
                ..pset_c()
            },
            1.0,
            Scenario::Estable,
            None,
        )
        .unwrap();
        assert_eq!(rep.first_failure().unwrap().name, "co-b22");
        assert_eq!(rep.epsilon_max, 0.0);
    }

    #[test]
    fn scenario_tags_parse() {
        assert_eq!("Eu".parse::<Scenario>().unwrap(), Scenario::Eu);
        assert!(matches!(
            "e-v-star".parse::<Scenario>(),
            Err(ModelError::UnknownScenario(_))
        ));
    }

    #[test]
    fn standing_assumption_enforced_but_overridable() {
        let p = ModelParams { h: 1.2, ..pset_a() };
        assert!(matches!(
            p.validated(),
            Err(ModelError::StandingAssumption { .. })
        ));
        assert!(p.exploratory().is_ok());
        assert!(matches!(
            ModelParams { d: 0.0, ..pset_a() }.exploratory(),
            Err(ModelError::NonPositive { name: "d", .. })
        ));
    }

    #[test]
    fn jacobian_matches_finite_differences() {
        let p = pset_a();
        let x = [0.3, 0.4, 0.7];
        let jac = p.reaction_jacobian(-0.2, x[0], x[1], x[2]);
        let eps = 1e-6;
        for j in 0..3 {
            let mut xp = x;
            let mut xm = x;
            xp[j] += eps;
            xm[j] -= eps;
            let fp = p.reaction(-0.2, xp[0], xp[1], xp[2]);
            let fm = p.reaction(-0.2, xm[0], xm[1], xm[2]);
            for i in 0..3 {
                let fd = (fp[i] - fm[i]) / (2.0 * eps);
                assert!((fd - jac[i][j]).abs() < 1e-8);
            }
        }
    }
}
