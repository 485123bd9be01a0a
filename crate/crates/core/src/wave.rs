//! Forced-wave solvers on a truncated line `[-L, L]`.
//!
//! - [`solve_scalar_wave`]: monotone iteration for
//!   `d phi'' - s phi' + r phi (gamma + alpha_hat - phi) = 0`,
//!   `phi(-inf) = gamma`, `phi(+inf) = 0`.
//! - [`solve_system`]: damped Newton on the central-difference discretisation
//!   of the three-component wave system with Dirichlet end states.
//! - [`build_estar_chain`]: scalar comparison waves as lower bounds, then a
//!   system solve seeded by the resulting pair.

use crate::bounds::{bound_residuals, BoundConstants, BoundPair, BoundScenario, BoundsError};
use crate::linalg::{solve_tridiagonal, BandMatrix, LinalgError};
use crate::model::{check_hypotheses, ModelError, ModelParams, Scenario, SteadyStates};
use crate::profile::{PiecewiseProfile, SampledProfile};
use crate::shift::{normalize_translation, ShiftError, ShiftProfile, ENVELOPE_TOL};
use serde::Serialize;
use thiserror::Error;

pub const MIN_POINTS: usize = 401;
pub const DEFAULT_POINTS: usize = 8001;
/// Successive-iterate threshold of the monotone iteration.
pub const SCALAR_STEP_TOL: f64 = 1e-12;
/// Residual threshold of the monotone iteration.
pub const SCALAR_RESIDUAL_TOL: f64 = 1e-10;
/// Largest pointwise increase tolerated before an iterate counts as rising.
pub const MONOTONE_SLACK: f64 = 1e-13;
/// Residual tolerance for bounds assembled from sampled waves.
pub const SAMPLED_BOUND_TOL: f64 = 1e-6;
/// Safety factor applied to the sub-solution rate.
const RATE_FACTOR: f64 = 0.999_999;

#[derive(Debug, Error)]
pub enum WaveError {
    #[error("grid needs at least {MIN_POINTS} points and z_min < 0 < z_max (got n = {n}, [{z_min}, {z_max}])")]
    InvalidGrid { n: usize, z_min: f64, z_max: f64 },
    #[error("spacing {spacing} exceeds 2d/s = {max}; the discrete operator is not monotone")]
    GridTooCoarse { spacing: f64, max: f64 },
    #[error("gamma = {gamma} must lie in [0, {limit})")]
    GammaOutOfRange { gamma: f64, limit: f64 },
    #[error("monotone iteration rose by {increase:e} at z = {at} in iteration {iteration}")]
    IterationStall {
        iteration: usize,
        at: f64,
        increase: f64,
    },
    #[error("residual not reduced after {halvings} halvings (residual {residual:e})")]
    NewtonDiverged { residual: f64, halvings: usize },
    #[error("no convergence after {iterations} iterations (residual {residual:e})")]
    MaxIterations { iterations: usize, residual: f64 },
    #[error("seed does not match the grid: expected {expected} points, got {got}")]
    SeedMismatch { expected: usize, got: usize },
    #[error("composite heterogeneity fails its envelope check: {0}")]
    EnvelopeUnverified(String),
    #[error("hypothesis `{condition}` violated: {detail}")]
    HypothesisViolation { condition: String, detail: String },
    #[error(transparent)]
    Bounds(#[from] BoundsError),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Shift(#[from] ShiftError),
    #[error(transparent)]
    Linalg(#[from] LinalgError),
}

fn half_width(rate: f64, shift: &ShiftProfile) -> f64 {
    (25.0 / rate).max(shift.offset.abs() + 10.0 * shift.k_bound + 10.0)
}

/// Slowest decay rate of the linearisation at `0` as `z -> +inf`, where
/// `alpha` has reached its right limit. `None` when no species decays there.
pub fn right_decay_rate(params: &ModelParams, s: f64, shift: &ShiftProfile) -> Option<f64> {
    let p = params;
    let alpha = shift.right_limit();
    let growth = [
        p.r1 * (1.0 + alpha),
        p.r2 * (1.0 + alpha),
        p.r3 * (-1.0 + alpha),
    ];
    growth
        .iter()
        .filter(|g| **g < 0.0)
        .map(|g| (-s + (s * s - 4.0 * p.d * g).sqrt()) / (2.0 * p.d))
        .reduce(f64::min)
}

/// Uniform grid on `[z_min, z_max]`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Grid {
    pub z_min: f64,
    pub z_max: f64,
    pub n: usize,
    pub spacing: f64,
    #[serde(skip)]
    pub positions: Vec<f64>,
}

impl Grid {
    /// Symmetric grid on `[-L, L]`.
    pub fn new(l: f64, n: usize) -> Result<Self, WaveError> {
        Self::span(-l, l, n)
    }

    pub fn span(z_min: f64, z_max: f64, n: usize) -> Result<Self, WaveError> {
        if n < MIN_POINTS || !(z_min < 0.0 && z_max > 0.0) || !(z_max - z_min).is_finite() {
            return Err(WaveError::InvalidGrid { n, z_min, z_max });
        }
        let spacing = (z_max - z_min) / (n - 1) as f64;
        let mut positions: Vec<f64> = (0..n).map(|i| z_min + spacing * i as f64).collect();
        positions[n - 1] = z_max;
        Ok(Self {
            z_min,
            z_max,
            n,
            spacing,
            positions,
        })
    }

    /// Symmetric grid with `L = max(25 / lambda_min, M + 10K + 10)`.
    pub fn default_for(lambda_min: f64, shift: &ShiftProfile, n: usize) -> Result<Self, WaveError> {
        Self::new(half_width(lambda_min, shift), n)
    }

    /// Each end sized by its own slowest rate: `left_rate` on the left,
    /// [`right_decay_rate`] on the right.
    pub fn for_rates(
        params: &ModelParams,
        s: f64,
        shift: &ShiftProfile,
        left_rate: f64,
        n: usize,
    ) -> Result<Self, WaveError> {
        let left = half_width(left_rate, shift);
        let right = right_decay_rate(params, s, shift).map_or(left, |r| half_width(r, shift));
        Self::span(-left, right, n)
    }

    /// Default grid for a pair, with the pair's `rho` as the left rate.
    pub fn for_pair(pair: &BoundPair, params: &ModelParams, n: usize) -> Result<Self, WaveError> {
        Self::for_rates(params, pair.speed, &pair.shift, pair.constants.rho, n)
    }

    /// Index of the node nearest to `z`.
    pub fn nearest(&self, z: f64) -> usize {
        let i = ((z - self.z_min) / self.spacing).round();
        (i.max(0.0) as usize).min(self.n - 1)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScalarWave {
    #[serde(skip)]
    pub positions: Vec<f64>,
    #[serde(skip)]
    pub values: Vec<f64>,
    /// Heterogeneity sampled at the nodes.
    #[serde(skip)]
    pub alpha_hat: Vec<f64>,
    pub spacing: f64,
    pub d: f64,
    pub s: f64,
    pub r: f64,
    pub gamma: f64,
    /// Envelope rate of `alpha_hat`.
    pub rho: f64,
    pub lambda0: f64,
    /// Translation of the sub-solution `gamma (1 - e^{lambda0 (z + offset)})`.
    pub offset: f64,
    /// Smallest `epsilon` with `-alpha_hat(z) <= epsilon e^{rho z}` on `z < 0`.
    pub epsilon_eff: f64,
    pub residual: f64,
    pub iterations: usize,
    /// Largest pointwise increase seen between iterates (non-positive when
    /// the iteration is monotone).
    pub max_increase: f64,
    /// `min (phi - sub-solution)` over grid points left of `-offset`.
    pub sub_solution_margin: f64,
}

impl ScalarWave {
    pub fn sub_solution(&self, z: f64) -> f64 {
        self.gamma * (1.0 - (self.lambda0 * (z + self.offset)).exp()).max(0.0)
    }

    pub fn profile(&self) -> SampledProfile {
        SampledProfile::new(self.positions[0], self.spacing, self.values.clone())
            .expect("grid has at least MIN_POINTS nodes")
    }
}

fn scalar_residual(d: f64, s: f64, r: f64, gamma: f64, h: f64, alpha: &[f64], phi: &[f64]) -> f64 {
    let n = phi.len();
    (1..n - 1)
        .map(|i| {
            let dd = (phi[i + 1] - 2.0 * phi[i] + phi[i - 1]) / (h * h);
            let d1 = (phi[i + 1] - phi[i - 1]) / (2.0 * h);
            (d * dd - s * d1 + r * phi[i] * (gamma + alpha[i] - phi[i])).abs()
        })
        .fold(0.0, f64::max)
}

fn check_monotone_grid(d: f64, s: f64, grid: &Grid) -> Result<(), WaveError> {
    let max = 2.0 * d / s.abs();
    if grid.spacing > max {
        return Err(WaveError::GridTooCoarse {
            spacing: grid.spacing,
            max,
        });
    }
    Ok(())
}

/// Chooses the sub-solution rate and translation for an envelope
/// `-alpha_hat <= epsilon_eff e^{rho z}` on `z < 0`.
fn sub_solution_rate(d: f64, s: f64, r: f64, rho: f64, epsilon_eff: f64) -> (f64, f64) {
    let disc = s * s - 4.0 * d * r * epsilon_eff;
    if disc > 0.0 {
        let lo = (s - disc.sqrt()) / (2.0 * d);
        let hi = (s + disc.sqrt()) / (2.0 * d);
        let lambda0 = RATE_FACTOR * rho.min(s / d).min(hi);
        if lambda0 > lo {
            return (lambda0, 0.0);
        }
    }
    let lambda0 = RATE_FACTOR * rho.min(s / (2.0 * d));
    let eps_t = (s * lambda0 - d * lambda0 * lambda0) / (2.0 * r);
    (lambda0, ((epsilon_eff / eps_t).ln() / lambda0).max(0.0))
}

/// Monotone iteration from the constant super-solution `gamma`.
pub fn solve_scalar_wave(
    d: f64,
    s: f64,
    r: f64,
    gamma: f64,
    alpha_hat: &dyn Fn(f64) -> f64,
    rho: f64,
    grid: &Grid,
) -> Result<ScalarWave, WaveError> {
    let z = &grid.positions;
    let n = grid.n;
    let h = grid.spacing;
    let alpha: Vec<f64> = z.iter().map(|&x| alpha_hat(x)).collect();
    let limit = -alpha[n - 1];
    if !(gamma >= 0.0 && gamma < limit) {
        return Err(WaveError::GammaOutOfRange { gamma, limit });
    }
    check_monotone_grid(d, s, grid)?;
    let epsilon_eff = z
        .iter()
        .zip(&alpha)
        .filter(|(x, _)| **x < 0.0)
        .map(|(x, a)| -a * (-rho * x).exp())
        .fold(0.0, f64::max)
        .max(f64::MIN_POSITIVE);
    let (lambda0, offset) = sub_solution_rate(d, s, r, rho, epsilon_eff);
    let mut wave = ScalarWave {
        positions: z.clone(),
        values: vec![0.0; n],
        alpha_hat: alpha,
        spacing: h,
        d,
        s,
        r,
        gamma,
        rho,
        lambda0,
        offset,
        epsilon_eff,
        residual: 0.0,
        iterations: 0,
        max_increase: 0.0,
        sub_solution_margin: 0.0,
    };
    if gamma == 0.0 {
        return Ok(wave);
    }
    let alpha = &wave.alpha_hat;
    let sup_alpha = alpha.iter().fold(0.0f64, |m, a| m.max(a.abs()));
    let p = r * (2.0 * gamma + sup_alpha + 1.0);
    let m = n - 2;
    let cl = d / (h * h) + s / (2.0 * h);
    let cu = d / (h * h) - s / (2.0 * h);
    let lower = vec![cl; m];
    let upper = vec![cu; m];
    let diag = vec![-2.0 * d / (h * h) - p; m];

    let mut phi = vec![gamma; n];
    phi[n - 1] = 0.0;
    let mut max_increase = f64::NEG_INFINITY;
    let max_iter = 200_000;
    for it in 1..=max_iter {
        // correction form: (L - P) delta = -(L phi + f(phi)), delta = 0 at the ends
        let mut delta: Vec<f64> = (1..n - 1)
            .map(|i| {
                let dd = (phi[i + 1] - 2.0 * phi[i] + phi[i - 1]) / (h * h);
                let d1 = (phi[i + 1] - phi[i - 1]) / (2.0 * h);
                -(d * dd - s * d1 + r * phi[i] * (gamma + alpha[i] - phi[i]))
            })
            .collect();
        solve_tridiagonal(&lower, &diag, &upper, &mut delta)?;
        let mut diff = 0.0f64;
        let mut rise = (f64::NEG_INFINITY, 0usize);
        for (k, v) in delta.iter().enumerate() {
            diff = diff.max(v.abs());
            if *v > rise.0 {
                rise = (*v, k + 1);
            }
        }
        max_increase = max_increase.max(rise.0);
        if rise.0 > MONOTONE_SLACK {
            return Err(WaveError::IterationStall {
                iteration: it,
                at: z[rise.1],
                increase: rise.0,
            });
        }
        for (k, v) in delta.iter().enumerate() {
            phi[k + 1] += v;
        }
        if diff < SCALAR_STEP_TOL {
            let res = scalar_residual(d, s, r, gamma, h, alpha, &phi);
            if res <= SCALAR_RESIDUAL_TOL {
                wave.residual = res;
                wave.iterations = it;
                break;
            }
        }
        if it == max_iter {
            return Err(WaveError::MaxIterations {
                iterations: it,
                residual: scalar_residual(d, s, r, gamma, h, alpha, &phi),
            });
        }
    }
    wave.values = phi;
    wave.max_increase = max_increase;
    wave.sub_solution_margin = z
        .iter()
        .zip(&wave.values)
        .filter(|(x, _)| **x < -wave.offset)
        .map(|(x, v)| v - wave.sub_solution(*x))
        .fold(f64::INFINITY, f64::min);
    Ok(wave)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SolverConfig {
    pub tol: f64,
    pub max_iterations: usize,
    pub max_halvings: usize,
    pub sandwich_tol: f64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            tol: 1e-10,
            max_iterations: 200,
            max_halvings: 30,
            sandwich_tol: 1e-8,
        }
    }
}

/// Starting point of a Newton solve.
#[derive(Debug, Clone, Copy)]
pub enum Seed<'a> {
    /// Midpoint of the pair. For closed-form pairs the left boundary takes
    /// the pair's midpoint at `-L`, which lies within the pair's tail bound
    /// of the invaded state; otherwise it takes the invaded state.
    Bounds(&'a BoundPair),
    /// Explicit guess with its left state, optionally checked against bounds.
    Guess {
        values: &'a [Vec<f64>; 3],
        left_state: [f64; 3],
        bounds: Option<&'a BoundPair>,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SandwichReport {
    /// `min (phi_i - lower_i)` over the grid.
    pub lower_margin: [f64; 3],
    /// `min (upper_i - phi_i)` over the grid.
    pub upper_margin: [f64; 3],
    pub within: [bool; 3],
    pub passed: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct WaveSolution {
    pub grid: Grid,
    #[serde(skip)]
    pub phi: [Vec<f64>; 3],
    pub speed: f64,
    /// Residual sup-norm per equation.
    pub residuals: [f64; 3],
    pub left_state: [f64; 3],
    pub right_state: [f64; 3],
    pub iterations: usize,
    /// Residual sup-norm after each accepted Newton step, initial guess first.
    pub residual_history: Vec<f64>,
    pub sandwich: Option<SandwichReport>,
    pub minima: [f64; 3],
    pub positive: [bool; 3],
    /// Set when some component dips below `-1e-12`.
    pub negative_overshoot: bool,
}

impl WaveSolution {
    pub fn residual(&self) -> f64 {
        self.residuals.iter().copied().fold(0.0, f64::max)
    }

    pub fn at(&self, i: usize) -> [f64; 3] {
        [self.phi[0][i], self.phi[1][i], self.phi[2][i]]
    }
}

struct System<'a> {
    p: &'a ModelParams,
    s: f64,
    h: f64,
    alpha: Vec<f64>,
    left: [f64; 3],
    right: [f64; 3],
}

impl System<'_> {
    fn node(&self, x: &[f64], n: usize, i: usize) -> [f64; 3] {
        if i == 0 {
            self.left
        } else if i == n - 1 {
            self.right
        } else {
            let k = 3 * (i - 1);
            [x[k], x[k + 1], x[k + 2]]
        }
    }

    /// Residual at interior unknowns; returns per-equation sup-norms too.
    fn residual(&self, x: &[f64], n: usize) -> (Vec<f64>, [f64; 3]) {
        let (d, s, h) = (self.p.d, self.s, self.h);
        let mut f = vec![0.0; x.len()];
        let mut sup = [0.0f64; 3];
        for i in 1..n - 1 {
            let (l, c, r) = (
                self.node(x, n, i - 1),
                self.node(x, n, i),
                self.node(x, n, i + 1),
            );
            let re = self.p.reaction(self.alpha[i], c[0], c[1], c[2]);
            for q in 0..3 {
                let v = d * (r[q] - 2.0 * c[q] + l[q]) / (h * h) - s * (r[q] - l[q]) / (2.0 * h)
                    + re[q];
                f[3 * (i - 1) + q] = v;
                sup[q] = sup[q].max(v.abs());
            }
        }
        (f, sup)
    }

    fn jacobian(&self, x: &[f64], n: usize) -> BandMatrix {
        let (d, s, h) = (self.p.d, self.s, self.h);
        let m = n - 2;
        let mut jac = BandMatrix::zeros(3 * m, 3, 3);
        let cl = d / (h * h) + s / (2.0 * h);
        let cu = d / (h * h) - s / (2.0 * h);
        for j in 0..m {
            let c = self.node(x, n, j + 1);
            let rj = self
                .p
                .reaction_jacobian(self.alpha[j + 1], c[0], c[1], c[2]);
            for q in 0..3 {
                let row = 3 * j + q;
                jac.add(row, row, -2.0 * d / (h * h));
                if j > 0 {
                    jac.add(row, row - 3, cl);
                }
                if j + 1 < m {
                    jac.add(row, row + 3, cu);
                }
                for (qq, v) in rj[q].iter().enumerate() {
                    jac.add(row, 3 * j + qq, *v);
                }
            }
        }
        jac
    }
}

fn sup(v: &[f64]) -> f64 {
    v.iter().fold(0.0f64, |m, x| m.max(x.abs()))
}

/// Sandwich check of grid values against a pair.
pub fn sandwich_check(
    pair: &BoundPair,
    grid: &Grid,
    phi: &[Vec<f64>; 3],
    tol: f64,
) -> SandwichReport {
    let mut lower_margin = [f64::INFINITY; 3];
    let mut upper_margin = [f64::INFINITY; 3];
    for (i, &z) in grid.positions.iter().enumerate() {
        let (u, l) = (pair.upper_at(z), pair.lower_at(z));
        for q in 0..3 {
            lower_margin[q] = lower_margin[q].min(phi[q][i] - l[q]);
            upper_margin[q] = upper_margin[q].min(u[q] - phi[q][i]);
        }
    }
    let within = [0, 1, 2].map(|q| lower_margin[q] >= -tol && upper_margin[q] >= -tol);
    SandwichReport {
        lower_margin,
        upper_margin,
        within,
        passed: within.iter().all(|w| *w),
    }
}

/// Damped Newton solve of the wave system with Dirichlet end states
/// (invaded state or the seed pair's midpoint on the left, zero on the
/// right).
pub fn solve_system(
    params: &ModelParams,
    s: f64,
    shift: &ShiftProfile,
    seed: Seed<'_>,
    grid: &Grid,
    cfg: &SolverConfig,
) -> Result<WaveSolution, WaveError> {
    let n = grid.n;
    let z = &grid.positions;
    let (left, bounds, init): (_, _, [Vec<f64>; 3]) = match seed {
        Seed::Bounds(pair) => {
            let mid: Vec<[f64; 3]> = z.iter().map(|&x| pair.midpoint_at(x)).collect();
            let left = if pair.scenario == BoundScenario::Estable {
                pair.invaded_state(params)
            } else {
                pair.midpoint_at(z[0])
            };
            (
                left,
                Some(pair),
                [0, 1, 2].map(|q| mid.iter().map(|m| m[q]).collect()),
            )
        }
        Seed::Guess {
            values,
            left_state,
            bounds,
        } => {
            for v in values {
                if v.len() != n {
                    return Err(WaveError::SeedMismatch {
                        expected: n,
                        got: v.len(),
                    });
                }
            }
            (left_state, bounds, values.clone())
        }
    };
    let sys = System {
        p: params,
        s,
        h: grid.spacing,
        alpha: z.iter().map(|&x| shift.alpha(x)).collect(),
        left,
        right: [0.0; 3],
    };
    let mut x: Vec<f64> = (1..n - 1)
        .flat_map(|i| [init[0][i], init[1][i], init[2][i]])
        .collect();
    let (mut f, mut per_eq) = sys.residual(&x, n);
    let mut res = sup(&f);
    let mut history = vec![res];
    let mut iterations = 0;
    while res > cfg.tol {
        if iterations == cfg.max_iterations {
            return Err(WaveError::MaxIterations {
                iterations,
                residual: res,
            });
        }
        iterations += 1;
        let mut step: Vec<f64> = f.iter().map(|v| -v).collect();
        sys.jacobian(&x, n).solve(&mut step)?;
        let mut t = 1.0;
        let mut accepted = false;
        for _ in 0..=cfg.max_halvings {
            let trial: Vec<f64> = x.iter().zip(&step).map(|(a, b)| a + t * b).collect();
            let (ft, pt) = sys.residual(&trial, n);
            let rt = sup(&ft);
            if rt < res {
                (x, f, per_eq, res) = (trial, ft, pt, rt);
                accepted = true;
                break;
            }
            t *= 0.5;
        }
        if !accepted {
            return Err(WaveError::NewtonDiverged {
                residual: res,
                halvings: cfg.max_halvings,
            });
        }
        history.push(res);
    }
    let phi: [Vec<f64>; 3] = [0, 1, 2].map(|q| (0..n).map(|i| sys.node(&x, n, i)[q]).collect());
    let minima = [0, 1, 2].map(|q| phi[q].iter().copied().fold(f64::INFINITY, f64::min));
    let sandwich = bounds.map(|pair| sandwich_check(pair, grid, &phi, cfg.sandwich_tol));
    Ok(WaveSolution {
        grid: grid.clone(),
        speed: s,
        residuals: per_eq,
        left_state: left,
        right_state: [0.0; 3],
        iterations,
        residual_history: history,
        sandwich,
        positive: minima.map(|m| m >= -1e-12),
        negative_overshoot: minima.iter().any(|m| *m < -1e-12),
        minima,
        phi,
    })
}

/// Output of the `E_*` pipeline.
#[derive(Debug, Clone)]
pub struct EstarChain {
    pub pair: BoundPair,
    pub wave: WaveSolution,
    pub phi2_lower: ScalarWave,
    pub phi3_lower: ScalarWave,
    /// Residual check of the assembled pair on interior solver nodes.
    pub pair_residual_passed: bool,
    /// Largest `1 + alpha - k L2 - b L3` on the grid (negative when the
    /// large-k exclusion argument applies).
    pub exclusion_sign_max: f64,
}

/// Scalar lower bounds for `v` and `w`, the pair with constant uppers
/// `(1, 1, 2a - 1)` and `L1 = 0`, and the system wave seeded by it.
pub fn build_estar_chain(
    params: &ModelParams,
    s: f64,
    shift: &ShiftProfile,
    grid: &Grid,
    cfg: &SolverConfig,
) -> Result<EstarChain, WaveError> {
    let p = params;
    let hyp = check_hypotheses(p, s, Scenario::Estable, Some(shift.rho))?;
    if let Some(c) = hyp.first_failure() {
        return Err(WaveError::HypothesisViolation {
            condition: c.name.clone(),
            detail: c.detail.clone(),
        });
    }
    let eps = hyp.working_epsilon();
    let shift = normalize_translation(shift, eps)?;
    let wmax = 2.0 * p.a - 1.0;
    let gamma2 = 1.0 - p.h - p.b * wmax;
    let gamma3 = -1.0 + p.a * gamma2;

    let alpha2 = |z: f64| shift.alpha(z);
    let w2 = solve_scalar_wave(p.d, s, p.r2, gamma2, &alpha2, shift.rho, grid)?;
    let l2 = w2.profile();
    let alpha3 = |z: f64| shift.alpha(z) + p.a * (l2.eval3(z)[0] - gamma2);

    let composite: Vec<f64> = grid.positions.iter().map(|&z| alpha3(z)).collect();
    if let Some(i) = composite
        .iter()
        .position(|a| !(*a < ENVELOPE_TOL) || !a.is_finite())
    {
        return Err(WaveError::EnvelopeUnverified(format!(
            "alpha_hat = {} is not negative at z = {}",
            composite[i], grid.positions[i]
        )));
    }
    if -composite[grid.n - 1] <= gamma3 {
        return Err(WaveError::EnvelopeUnverified(format!(
            "alpha_hat(L) = {} does not stay below -gamma3 = {}",
            composite[grid.n - 1],
            -gamma3
        )));
    }
    let w3 = solve_scalar_wave(p.d, s, p.r3, gamma3, &alpha3, w2.lambda0, grid)?;

    let constants = BoundConstants {
        gamma2: Some(gamma2),
        gamma3: Some(gamma3),
        lambda0_2: Some(w2.lambda0),
        lambda0_3: Some(w3.lambda0),
        rho: w3.lambda0.min(w2.lambda0),
        epsilon: eps,
        offset: shift.offset,
        ..Default::default()
    };
    let pair = BoundPair {
        scenario: BoundScenario::Estable,
        speed: s,
        upper: [
            PiecewiseProfile::constant(1.0),
            PiecewiseProfile::constant(1.0),
            PiecewiseProfile::constant(wmax),
        ],
        lower: [
            PiecewiseProfile::constant(0.0),
            PiecewiseProfile::Sampled(l2),
            PiecewiseProfile::Sampled(w3.profile()),
        ],
        constants,
        shift: shift.clone(),
    };
    let interior = &grid.positions[1..grid.n - 1];
    let rep = bound_residuals(&pair, &shift, p, interior, 0.0, SAMPLED_BOUND_TOL)?;
    let exclusion_sign_max = grid
        .positions
        .iter()
        .zip(w2.values.iter().zip(&w3.values))
        .map(|(&z, (v, w))| 1.0 + shift.alpha(z) - p.k * v - p.b * w)
        .fold(f64::NEG_INFINITY, f64::max);
    let wave = solve_system(p, s, &shift, Seed::Bounds(&pair), grid, cfg)?;
    Ok(EstarChain {
        pair_residual_passed: rep.passed(),
        pair,
        wave,
        phi2_lower: w2,
        phi3_lower: w3,
        exclusion_sign_max,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StateDistance {
    pub state: &'static str,
    pub left: f64,
    pub right: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LimitReport {
    /// Interior probe points (the end nodes carry the boundary data).
    pub left_probe: f64,
    pub right_probe: f64,
    pub left_values: [f64; 3],
    pub right_values: [f64; 3],
    pub distances: Vec<StateDistance>,
    pub nearest_left: &'static str,
    pub nearest_right: &'static str,
    /// Log-slope of `|phi_i - left state|` over `[-0.9L, -0.5L]`.
    pub decay_left: [Option<f64>; 3],
    /// Log-slope of `|phi_i|` over `[0.5L, 0.9L]`.
    pub decay_right: [Option<f64>; 3],
    pub minima: [f64; 3],
}

/// Least-squares slope of `ln |y|` against `z` over points with
/// `|y| > 1e-12`.
pub fn log_slope(z: &[f64], y: &[f64]) -> Option<f64> {
    let pts: Vec<(f64, f64)> = z
        .iter()
        .zip(y)
        .filter(|(_, v)| v.abs() > 1e-12)
        .map(|(x, v)| (*x, v.abs().ln()))
        .collect();
    if pts.len() < 2 {
        return None;
    }
    let m = pts.len() as f64;
    let (sx, sy) = pts.iter().fold((0.0, 0.0), |(a, b), (x, y)| (a + x, b + y));
    let (mx, my) = (sx / m, sy / m);
    let (num, den) = pts.iter().fold((0.0, 0.0), |(a, b), (x, y)| {
        (a + (x - mx) * (y - my), b + (x - mx) * (x - mx))
    });
    (den > 0.0).then(|| num / den)
}

fn max_dist(a: &[f64; 3], b: &[f64; 3]) -> f64 {
    (0..3).map(|i| (a[i] - b[i]).abs()).fold(0.0, f64::max)
}

/// End-state distances, tail decay rates and minima of a converged wave.
pub fn wave_diagnostics(solution: &WaveSolution, states: &SteadyStates) -> LimitReport {
    let g = &solution.grid;
    let (il, ir) = (g.nearest(0.9 * g.z_min), g.nearest(0.9 * g.z_max));
    let (im, jm) = (g.nearest(0.5 * g.z_min), g.nearest(0.5 * g.z_max));
    let left_values = solution.at(il);
    let right_values = solution.at(ir);
    let distances: Vec<StateDistance> = states
        .candidates()
        .iter()
        .map(|(name, st)| StateDistance {
            state: name,
            left: max_dist(&left_values, st),
            right: max_dist(&right_values, st),
        })
        .collect();
    let nearest = |f: fn(&StateDistance) -> f64| {
        distances
            .iter()
            .min_by(|a, b| f(a).total_cmp(&f(b)))
            .map(|d| d.state)
            .unwrap_or("0")
    };
    let z = &g.positions;
    let decay_left = [0, 1, 2].map(|q| {
        let y: Vec<f64> = solution.phi[q][il..=im]
            .iter()
            .map(|v| v - solution.left_state[q])
            .collect();
        log_slope(&z[il..=im], &y)
    });
    let decay_right = [0, 1, 2].map(|q| log_slope(&z[jm..=ir], &solution.phi[q][jm..=ir]));
    LimitReport {
        left_probe: z[il],
        right_probe: z[ir],
        left_values,
        right_values,
        nearest_left: nearest(|d| d.left),
        nearest_right: nearest(|d| d.right),
        distances,
        decay_left,
        decay_right,
        minima: solution.minima,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_rejects_too_few_points() {
        assert!(matches!(
            Grid::new(10.0, 400),
            Err(WaveError::InvalidGrid { .. })
        ));
        let g = Grid::new(10.0, 401).unwrap();
        assert_eq!(g.positions[0], -10.0);
        assert!((g.positions[400] - 10.0).abs() < 1e-12);
        assert_eq!(g.nearest(0.0), 200);
    }

    #[test]
    fn zero_gamma_gives_zero_wave() {
        let g = Grid::new(20.0, 401).unwrap();
        let w = solve_scalar_wave(1.0, 1.0, 1.0, 0.0, &|_| -1.0, 1.0, &g).unwrap();
        assert!(w.values.iter().all(|v| *v == 0.0));
    }

    #[test]
    fn gamma_beyond_right_limit_is_rejected() {
        let g = Grid::new(20.0, 401).unwrap();
        let err = solve_scalar_wave(1.0, 1.0, 1.0, 0.6, &|z| -0.5 / (1.0 + (-z).exp()), 1.0, &g);
        assert!(matches!(err, Err(WaveError::GammaOutOfRange { .. })));
    }

    #[test]
    fn log_slope_of_exponential() {
        let z: Vec<f64> = (0..50).map(|i| i as f64 * 0.1).collect();
        let y: Vec<f64> = z.iter().map(|x| 3.0 * (-0.7 * x).exp()).collect();
        assert!((log_slope(&z, &y).unwrap() + 0.7).abs() < 1e-12);
    }

    #[test]
    fn sub_solution_rate_without_translation() {
        let (l0, off) = sub_solution_rate(1.0, 1.0, 1.0, 1.5, 0.01);
        let hi = (1.0 + 0.96f64.sqrt()) / 2.0;
        assert!((l0 - 0.999_999 * hi).abs() < 1e-15);
        assert_eq!(off, 0.0);
        assert!(1.0 * l0 - l0 * l0 > 0.01);
    }

    #[test]
    fn sub_solution_rate_with_translation() {
        let (l0, off) = sub_solution_rate(1.0, 1.0, 1.0, 1.5, 1.0);
        assert!((l0 - 0.499_999_5).abs() < 1e-12);
        let eps_t = (l0 - l0 * l0) / 2.0;
        assert!((eps_t * (l0 * off).exp() - 1.0).abs() < 1e-12);
    }
}
