//! Co-moving-frame simulation of the parabolic system
//! `U_t = d U_zz - s U_z + R(alpha(z), U)` on `[z_min, z_max]`.
//!
//! First-order IMEX stepping: reaction explicit, diffusion and advection
//! implicit through one tridiagonal solve per species per step.

use crate::bounds::{build_bounds, BoundScenario, BoundsError};
use crate::linalg::{solve_tridiagonal, LinalgError};
use crate::model::{check_hypotheses, critical_speeds, ModelError, ModelParams, Scenario};
use crate::shift::{ShiftError, ShiftProfile};
use crate::wave::{build_estar_chain, Grid, SolverConfig, WaveError, WaveSolution};
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Box tolerance of the invariance check.
pub const BOX_TOL: f64 = 1e-10;
/// Default extinction threshold on the sup-norm.
pub const EXTINCTION_THRESHOLD: f64 = 1e-4;
/// Default time the sup-norm must stay below the threshold.
pub const EXTINCTION_DWELL: f64 = 10.0;
/// Threshold for the large-k exclusion of the weak prey.
pub const LARGE_K_THRESHOLD: f64 = 1e-6;

#[derive(Debug, Error)]
pub enum SimError {
    #[error("species {species} left the invariant box at t = {t}, z = {z}: value {value}")]
    BoxViolation {
        t: f64,
        z: f64,
        species: usize,
        value: f64,
    },
    #[error("non-finite value in species {species} at t = {t}, z = {z}")]
    NonfiniteValue { t: f64, z: f64, species: usize },
    #[error("time step {dt} exceeds 0.25 / Lipschitz = {max}")]
    InvalidTimeStep { dt: f64, max: f64 },
    #[error("initial data has {got} points, grid has {expected}")]
    GridMismatch { expected: usize, got: usize },
    #[error("prerequisite violated: {0}")]
    PrerequisiteViolation(String),
    #[error(transparent)]
    Wave(#[from] WaveError),
    #[error(transparent)]
    Bounds(#[from] BoundsError),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Shift(#[from] ShiftError),
    #[error(transparent)]
    Linalg(#[from] LinalgError),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum LeftBoundary {
    /// Pinned state.
    Dirichlet { state: [f64; 3] },
    /// Homogeneous one-sided flux.
    Neumann,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SimConfig {
    pub grid: Grid,
    /// Time step; `None` selects `0.25 / Lipschitz`.
    pub dt: Option<f64>,
    pub t_end: f64,
    pub snapshot_every: f64,
    pub left: LeftBoundary,
    pub scheme: &'static str,
}

impl SimConfig {
    pub fn new(grid: Grid, t_end: f64, snapshot_every: f64, left: LeftBoundary) -> Self {
        Self {
            grid,
            dt: None,
            t_end,
            snapshot_every,
            left,
            scheme: "imex-euler",
        }
    }

    pub fn with_dt(mut self, dt: f64) -> Self {
        self.dt = Some(dt);
        self
    }
}

/// Largest admissible step: `0.25 / Lipschitz` over the invariant box.
pub fn max_time_step(params: &ModelParams, shift: &ShiftProfile) -> f64 {
    0.25 / params.reaction_lipschitz(shift.sup_abs())
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Trajectory {
    pub dt: f64,
    pub steps: usize,
    pub times: Vec<f64>,
    #[serde(skip)]
    pub snapshots: Vec<[Vec<f64>; 3]>,
    /// Sup-norm of each species at each snapshot.
    pub sup_norms: Vec<[f64; 3]>,
    /// Sup-norm of each species after every step, with its time.
    #[serde(skip)]
    pub history: Vec<(f64, [f64; 3])>,
    /// Sup-distance to the reference wave at each snapshot.
    pub reference_distance: Option<Vec<f64>>,
    pub min_value: f64,
    /// Largest excess over the box bound (non-positive inside the box).
    pub max_box_excess: f64,
    #[serde(skip)]
    pub positions: Vec<f64>,
}

impl Trajectory {
    pub fn final_state(&self) -> &[Vec<f64>; 3] {
        self.snapshots
            .last()
            .expect("trajectory holds the initial snapshot")
    }

    /// First time after which the sup-norm of `species` stays below
    /// `threshold` for at least `dwell` up to the end of the run.
    pub fn extinction_time(&self, species: usize, threshold: f64, dwell: f64) -> Option<f64> {
        let end = self.history.last()?.0;
        let mut onset = None;
        for (t, norms) in &self.history {
            if norms[species] <= threshold {
                onset.get_or_insert(*t);
            } else {
                onset = None;
            }
        }
        onset.filter(|t0| end - t0 >= dwell)
    }
}

fn sup_dist(a: &[Vec<f64>; 3], b: &[Vec<f64>; 3]) -> f64 {
    (0..3)
        .flat_map(|q| a[q].iter().zip(&b[q]).map(|(x, y)| (x - y).abs()))
        .fold(0.0, f64::max)
}

/// Runs the IMEX scheme from `ic`. The right boundary is pinned at zero.
pub fn simulate(
    params: &ModelParams,
    s: f64,
    shift: &ShiftProfile,
    ic: &[Vec<f64>; 3],
    cfg: &SimConfig,
    reference: Option<&WaveSolution>,
) -> Result<Trajectory, SimError> {
    let grid = &cfg.grid;
    let n = grid.n;
    for v in ic.iter() {
        if v.len() != n {
            return Err(SimError::GridMismatch {
                expected: n,
                got: v.len(),
            });
        }
    }
    if let Some(w) = reference {
        if w.grid.n != n {
            return Err(SimError::GridMismatch {
                expected: n,
                got: w.grid.n,
            });
        }
    }
    let max_dt = max_time_step(params, shift);
    let dt_req = cfg.dt.unwrap_or(max_dt);
    if !(dt_req > 0.0) || dt_req > max_dt * (1.0 + 1e-12) {
        return Err(SimError::InvalidTimeStep {
            dt: dt_req,
            max: max_dt,
        });
    }
    let steps = (cfg.t_end / dt_req).ceil().max(1.0) as usize;
    let dt = cfg.t_end / steps as f64;
    let every = ((cfg.snapshot_every / dt).round() as usize).max(1);

    let z = &grid.positions;
    let h = grid.spacing;
    let d = params.d;
    let alpha: Vec<f64> = z.iter().map(|&x| shift.alpha(x)).collect();
    let bound = params.box_bound();

    let cl = -dt * (d / (h * h) + s / (2.0 * h));
    let cu = -dt * (d / (h * h) - s / (2.0 * h));
    let cd = 1.0 + 2.0 * dt * d / (h * h);
    let mut lower = vec![cl; n];
    let mut diag = vec![cd; n];
    let mut upper = vec![cu; n];
    match cfg.left {
        LeftBoundary::Dirichlet { .. } => {
            diag[0] = 1.0;
            upper[0] = 0.0;
        }
        LeftBoundary::Neumann => {
            // ghost node mirrors node 1
            upper[0] = cl + cu;
        }
    }
    diag[n - 1] = 1.0;
    lower[n - 1] = 0.0;

    let mut u = ic.clone();
    if let LeftBoundary::Dirichlet { state } = cfg.left {
        for q in 0..3 {
            u[q][0] = state[q];
        }
    }
    for q in 0..3 {
        u[q][n - 1] = 0.0;
    }
    let norms =
        |u: &[Vec<f64>; 3]| [0, 1, 2].map(|q| u[q].iter().fold(0.0f64, |m, x| m.max(x.abs())));
    let mut traj = Trajectory {
        dt,
        steps,
        times: vec![0.0],
        snapshots: vec![u.clone()],
        sup_norms: vec![norms(&u)],
        history: vec![(0.0, norms(&u))],
        reference_distance: reference.map(|w| vec![sup_dist(&u, &w.phi)]),
        min_value: f64::INFINITY,
        max_box_excess: f64::NEG_INFINITY,
        positions: z.clone(),
    };
    let mut rhs: [Vec<f64>; 3] = [vec![0.0; n], vec![0.0; n], vec![0.0; n]];
    for step in 1..=steps {
        let t = dt * step as f64;
        for i in 0..n {
            let r = params.reaction(alpha[i], u[0][i], u[1][i], u[2][i]);
            for q in 0..3 {
                rhs[q][i] = u[q][i] + dt * r[q];
            }
        }
        for q in 0..3 {
            if let LeftBoundary::Dirichlet { state } = cfg.left {
                rhs[q][0] = state[q];
            }
            rhs[q][n - 1] = 0.0;
            solve_tridiagonal(&lower, &diag, &upper, &mut rhs[q])?;
            std::mem::swap(&mut u[q], &mut rhs[q]);
            for (i, v) in u[q].iter().enumerate() {
                if !v.is_finite() {
                    return Err(SimError::NonfiniteValue {
                        t,
                        z: z[i],
                        species: q + 1,
                    });
                }
                let excess = v - bound[q];
                traj.min_value = traj.min_value.min(*v);
                traj.max_box_excess = traj.max_box_excess.max(excess);
                if *v < -BOX_TOL || excess > BOX_TOL {
                    return Err(SimError::BoxViolation {
                        t,
                        z: z[i],
                        species: q + 1,
                        value: *v,
                    });
                }
            }
        }
        traj.history.push((t, norms(&u)));
        if step % every == 0 || step == steps {
            traj.times.push(t);
            traj.sup_norms.push(norms(&u));
            if let (Some(w), Some(dist)) = (reference, traj.reference_distance.as_mut()) {
                dist.push(sup_dist(&u, &w.phi));
            }
            traj.snapshots.push(u.clone());
        }
    }
    Ok(traj)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Verdict {
    Converging,
    Stalled,
    Diverging,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConvergenceMetrics {
    pub times: Vec<f64>,
    pub distances: Vec<f64>,
    /// Log-slope of the distance series (negative when converging).
    pub decay_rate: Option<f64>,
    pub final_distance: f64,
    pub verdict: Verdict,
    /// Verdicts describe finite runs only.
    pub empirical: bool,
}

/// Sup-distance series to `wave` and a verdict from the first and last
/// thirds of the series.
pub fn convergence_metrics(
    traj: &Trajectory,
    wave: &WaveSolution,
) -> Result<ConvergenceMetrics, SimError> {
    let n = wave.grid.n;
    if traj.positions.len() != n
        || traj
            .positions
            .iter()
            .zip(&wave.grid.positions)
            .any(|(a, b)| (a - b).abs() > 1e-12)
    {
        return Err(SimError::GridMismatch {
            expected: n,
            got: traj.positions.len(),
        });
    }
    let distances: Vec<f64> = traj
        .snapshots
        .iter()
        .map(|u| sup_dist(u, &wave.phi))
        .collect();
    let m = distances.len();
    let third = (m / 3).max(1);
    let mean = |xs: &[f64]| xs.iter().sum::<f64>() / xs.len() as f64;
    let first = mean(&distances[..third]);
    let last = mean(&distances[m - third..]);
    let final_distance = *distances.last().unwrap_or(&0.0);
    let verdict = if distances.iter().all(|d| *d < 1e-12) || last < 0.5 * first {
        Verdict::Converging
    } else if last > 2.0 * first {
        Verdict::Diverging
    } else {
        Verdict::Stalled
    };
    Ok(ConvergenceMetrics {
        decay_rate: crate::wave::log_slope(&traj.times, &distances),
        times: traj.times.clone(),
        distances,
        final_distance,
        verdict,
        empirical: true,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExtinctionVariant {
    LargeK,
    SubcriticalSpeed { scenario: Scenario },
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SpeciesFate {
    pub species: usize,
    pub final_sup: f64,
    pub extinct: bool,
    pub onset: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExtinctionReport {
    pub variant: ExtinctionVariant,
    pub speed: f64,
    pub threshold: f64,
    pub dwell: f64,
    /// Large-k only: max of `1 + alpha - k L2 - b L3` over the grid and its
    /// location.
    pub sign_max: Option<f64>,
    pub sign_max_at: Option<f64>,
    pub sign_condition_holds: Option<bool>,
    /// Large-k only: `sup |phi_1|` of the Newton wave.
    pub wave_sup_u: Option<f64>,
    pub fates: Vec<SpeciesFate>,
    pub t_end: f64,
    pub empirical: bool,
}

/// Compact cosine-squared pulse of height `amp` on `|z - center| < half_width`.
pub fn pulse(z: f64, center: f64, half_width: f64, amp: f64) -> f64 {
    let x = (z - center) / half_width;
    if x.abs() >= 1.0 {
        0.0
    } else {
        amp * (0.5 * std::f64::consts::PI * x).cos().powi(2)
    }
}

/// Large-k exclusion of the weak prey, or the fate of species below the
/// scenario's minimal speed.
pub fn extinction_experiment(
    params: &ModelParams,
    s: f64,
    shift: &ShiftProfile,
    variant: ExtinctionVariant,
    cfg: &SimConfig,
    threshold: f64,
    dwell: f64,
) -> Result<ExtinctionReport, SimError> {
    let p = params;
    let grid = &cfg.grid;
    let z = &grid.positions;
    let mut report = ExtinctionReport {
        variant,
        speed: s,
        threshold,
        dwell,
        sign_max: None,
        sign_max_at: None,
        sign_condition_holds: None,
        wave_sup_u: None,
        fates: Vec::new(),
        t_end: cfg.t_end,
        empirical: true,
    };
    let (ic, left, species): ([Vec<f64>; 3], [f64; 3], Vec<usize>) = match variant {
        ExtinctionVariant::LargeK => {
            let hyp = check_hypotheses(p, s, Scenario::Estable, Some(shift.rho))?;
            if let Some(c) = hyp.first_failure() {
                return Err(SimError::PrerequisiteViolation(format!(
                    "{} fails: {}",
                    c.name, c.detail
                )));
            }
            let chain = build_estar_chain(p, s, shift, grid, &SolverConfig::default())?;
            let l2 = &chain.phi2_lower.values;
            let l3 = &chain.phi3_lower.values;
            let (mut worst, mut at) = (f64::NEG_INFINITY, f64::NAN);
            for i in 0..grid.n {
                let v = 1.0 + chain.pair.shift.alpha(z[i]) - p.k * l2[i] - p.b * l3[i];
                if v > worst {
                    (worst, at) = (v, z[i]);
                }
            }
            report.sign_max = Some(worst);
            report.sign_max_at = Some(at);
            report.sign_condition_holds = Some(worst < 0.0);
            report.wave_sup_u = Some(chain.wave.phi[0].iter().fold(0.0f64, |m, x| m.max(x.abs())));
            let ic = [0, 1, 2].map(|q| z.iter().map(|&x| chain.pair.midpoint_at(x)[q]).collect());
            let shifted = chain.pair.shift.clone();
            let traj = simulate(
                p,
                s,
                &shifted,
                &ic,
                &SimConfig {
                    left: LeftBoundary::Dirichlet {
                        state: chain.wave.left_state,
                    },
                    ..cfg.clone()
                },
                None,
            )?;
            report.fates = fates(&traj, &[0], threshold, dwell);
            return Ok(report);
        }
        ExtinctionVariant::SubcriticalSpeed { scenario } => {
            let cs = critical_speeds(p);
            match scenario {
                Scenario::Eu => {
                    if !(s < cs.s3_star) {
                        return Err(SimError::PrerequisiteViolation(format!(
                            "s = {s} is not below s3* = {}",
                            cs.s3_star
                        )));
                    }
                    let ic = [
                        vec![1.0; grid.n],
                        z.iter().map(|&x| pulse(x, 0.0, 5.0, 0.5)).collect(),
                        z.iter().map(|&x| pulse(x, 0.0, 5.0, 0.5)).collect(),
                    ];
                    (ic, [1.0, 0.0, 0.0], vec![1, 2])
                }
                Scenario::Estar => {
                    if !(s < cs.s2_dstar) {
                        return Err(SimError::PrerequisiteViolation(format!(
                            "s = {s} is not below s2** = {}",
                            cs.s2_dstar
                        )));
                    }
                    // closest admissible pair: the critical-speed construction
                    let pair = build_bounds(
                        p,
                        cs.s2_dstar,
                        shift,
                        BoundScenario::EstarCritical,
                        &Default::default(),
                    )?;
                    let ic = [0, 1, 2].map(|q| z.iter().map(|&x| pair.midpoint_at(x)[q]).collect());
                    (ic, pair.invaded_state(p), vec![1])
                }
                other => {
                    return Err(SimError::PrerequisiteViolation(format!(
                        "no subcritical threshold for scenario {other}"
                    )))
                }
            }
        }
    };
    let run = SimConfig {
        left: LeftBoundary::Dirichlet { state: left },
        ..cfg.clone()
    };
    let traj = simulate(p, s, shift, &ic, &run, None)?;
    report.fates = fates(&traj, &species, threshold, dwell);
    Ok(report)
}

fn fates(traj: &Trajectory, species: &[usize], threshold: f64, dwell: f64) -> Vec<SpeciesFate> {
    let last = traj.history.last().map(|h| h.1).unwrap_or([0.0; 3]);
    species
        .iter()
        .map(|&q| {
            let onset = traj.extinction_time(q, threshold, dwell);
            SpeciesFate {
                species: q + 1,
                final_sup: last[q],
                extinct: onset.is_some(),
                onset,
            }
        })
        .collect()
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

    #[test]
    fn zero_state_stays_zero() {
        let p = pset_a();
        let sh = ShiftProfile::sigmoid(2.0, 1.5, 1.0).unwrap();
        let g = Grid::new(20.0, 401).unwrap();
        let ic = [vec![0.0; 401], vec![0.0; 401], vec![0.0; 401]];
        let cfg = SimConfig::new(g, 5.0, 1.0, LeftBoundary::Dirichlet { state: [0.0; 3] });
        let t = simulate(&p, 2.5, &sh, &ic, &cfg, None).unwrap();
        assert!(t
            .snapshots
            .iter()
            .all(|u| u.iter().all(|c| c.iter().all(|v| *v == 0.0))));
        assert_eq!(t.times.len(), 6);
    }

    #[test]
    fn oversized_step_is_rejected() {
        let p = pset_a();
        let sh = ShiftProfile::sigmoid(2.0, 1.5, 1.0).unwrap();
        let g = Grid::new(20.0, 401).unwrap();
        let ic = [vec![0.0; 401], vec![0.0; 401], vec![0.0; 401]];
        let cfg = SimConfig::new(g, 1.0, 1.0, LeftBoundary::Neumann).with_dt(1.0);
        assert!(matches!(
            simulate(&p, 2.5, &sh, &ic, &cfg, None),
            Err(SimError::InvalidTimeStep { .. })
        ));
    }

    #[test]
    fn extinction_time_requires_dwell() {
        let traj = Trajectory {
            dt: 1.0,
            steps: 4,
            times: vec![],
            snapshots: vec![],
            sup_norms: vec![],
            history: (0..=20)
                .map(|t| (t as f64, [if t < 5 { 1.0 } else { 0.0 }; 3]))
                .collect(),
            reference_distance: None,
            min_value: 0.0,
            max_box_excess: 0.0,
            positions: vec![],
        };
        assert_eq!(traj.extinction_time(0, 1e-4, 10.0), Some(5.0));
        assert_eq!(traj.extinction_time(0, 1e-4, 16.0), None);
    }

    #[test]
    fn pulse_is_compact() {
        assert_eq!(pulse(5.0, 0.0, 5.0, 0.5), 0.0);
        assert_eq!(pulse(0.0, 0.0, 5.0, 0.5), 0.5);
    }
}
