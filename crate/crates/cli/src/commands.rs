//! Subcommand implementations. Each returns a JSON report together with its
//! verdict; printing and exit codes are left to the caller.

use crate::config::{ExtinctionKind, InitialData, LeftKind, RunConfig};
use crate::error::CliError;
use forced_waves::bounds::{
    build_bounds, refined_grid, verify_pair, BoundPair, BoundScenario, EXCLUSION_RADIUS,
};
use forced_waves::export;
use forced_waves::model::{
    check_hypotheses, critical_speeds, q_threshold, steady_states, ModelParams, Scenario, Threshold,
};
use forced_waves::shift::{normalize_translation, ShiftProfile};
use forced_waves::sim::{
    convergence_metrics, extinction_experiment, pulse, simulate, ExtinctionVariant, LeftBoundary,
    SimConfig,
};
use forced_waves::wave::{
    build_estar_chain, solve_system, wave_diagnostics, Grid, ScalarWave, Seed, WaveSolution,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::{json, Value};
use std::fs::{self, File};
use std::io::BufWriter;
use std::path::{Path, PathBuf};

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum Command {
    Speeds,
    Check,
    Bounds,
    Verify,
    Solve,
    Chain,
    Simulate,
    Extinction,
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Speeds => "speeds",
            Command::Check => "check",
            Command::Bounds => "bounds",
            Command::Verify => "verify",
            Command::Solve => "solve",
            Command::Chain => "chain",
            Command::Simulate => "simulate",
            Command::Extinction => "extinction",
        }
    }
}

/// Resolved inputs of one run.
#[derive(Debug, Clone)]
pub struct Ctx {
    pub cfg: RunConfig,
    /// Directory against which relative paths in the config resolve.
    pub base: PathBuf,
    pub out: Option<PathBuf>,
}

pub struct Outcome {
    pub report: Value,
    pub verdict: Result<(), CliError>,
}

impl Ctx {
    fn params(&self) -> Result<ModelParams, CliError> {
        Ok(self.cfg.model.exploratory()?)
    }

    fn shift(&self) -> Result<ShiftProfile, CliError> {
        self.cfg.shift.build(&self.base)
    }

    fn out_file(&self, name: &str) -> Result<Option<BufWriter<File>>, CliError> {
        match &self.out {
            Some(dir) => {
                fs::create_dir_all(dir)?;
                Ok(Some(BufWriter::new(File::create(dir.join(name))?)))
            }
            None => Ok(None),
        }
    }

    fn construction(&self, params: &ModelParams, s: f64) -> Result<BoundScenario, CliError> {
        if let Some(name) = &self.cfg.bounds.construction {
            return name
                .parse()
                .map_err(|e: forced_waves::model::ModelError| CliError::Config(e.to_string()));
        }
        let scenario = self.cfg.scenario()?;
        BoundScenario::for_speed(params, s, scenario).ok_or_else(|| {
            CliError::Config(format!("scenario `{scenario}` has no bound construction"))
        })
    }

    fn pair(&self, params: &ModelParams, s: f64) -> Result<BoundPair, CliError> {
        let construction = self.construction(params, s)?;
        if construction == BoundScenario::Estable {
            return Err(CliError::Config(
                "estable bounds are numeric; use the `chain` subcommand".into(),
            ));
        }
        Ok(build_bounds(
            params,
            s,
            &self.shift()?,
            construction,
            &self.cfg.bounds.overrides,
        )?)
    }

    fn grid_for(
        &self,
        params: &ModelParams,
        s: f64,
        left_rate: f64,
        shift: &ShiftProfile,
    ) -> Result<Grid, CliError> {
        let g = match self.cfg.grid.half_width {
            Some(l) => Grid::new(l, self.cfg.grid.n)?,
            None => Grid::for_rates(params, s, shift, left_rate, self.cfg.grid.n)?,
        };
        Ok(g)
    }

    /// Translation-normalised shift and default grid of the `E_*` chain.
    fn chain_setup(&self, params: &ModelParams, s: f64) -> Result<(ShiftProfile, Grid), CliError> {
        let shift = self.shift()?;
        let hyp = check_hypotheses(params, s, Scenario::Estable, Some(shift.rho))?;
        if let Some(c) = hyp.first_failure() {
            return Err(CliError::Hypothesis(format!(
                "condition ({}) fails: {}",
                c.name, c.detail
            )));
        }
        let normalized = normalize_translation(&shift, hyp.working_epsilon())?;
        let lambda_min = shift.rho.min(s / (2.0 * params.d));
        let grid = self.grid_for(params, s, lambda_min, &normalized)?;
        Ok((shift, grid))
    }
}

fn pass(report: Value) -> Result<Outcome, CliError> {
    Ok(Outcome {
        report,
        verdict: Ok(()),
    })
}

fn verdict(report: Value, ok: bool, msg: impl FnOnce() -> String) -> Result<Outcome, CliError> {
    Ok(Outcome {
        report,
        verdict: if ok {
            Ok(())
        } else {
            Err(CliError::Verification(msg()))
        },
    })
}

pub fn run(cmd: Command, ctx: &Ctx) -> Result<Outcome, CliError> {
    match cmd {
        Command::Speeds => speeds(ctx),
        Command::Check => check(ctx),
        Command::Bounds => bounds(ctx),
        Command::Verify => verify(ctx),
        Command::Solve => solve(ctx),
        Command::Chain => chain(ctx),
        Command::Simulate => simulate_cmd(ctx),
        Command::Extinction => extinction(ctx),
    }
}

fn speeds(ctx: &Ctx) -> Result<Outcome, CliError> {
    let p = ctx.params()?;
    let rho = ctx.shift()?.rho;
    pass(json!({
        "critical_speeds": critical_speeds(&p),
        "steady_states": steady_states(&p),
        "q1": q_threshold(&p, rho, Threshold::Q1).ok(),
        "q2": q_threshold(&p, rho, Threshold::Q2).ok(),
    }))
}

fn check(ctx: &Ctx) -> Result<Outcome, CliError> {
    let p = ctx.params()?;
    let s = ctx.cfg.speed()?;
    let rep = check_hypotheses(&p, s, ctx.cfg.scenario()?, Some(ctx.shift()?.rho))?;
    let report = json!({ "hypotheses": rep, "working_epsilon": rep.working_epsilon() });
    let verdict = match rep.first_failure() {
        None => Ok(()),
        Some(c) => Err(CliError::Hypothesis(format!(
            "condition ({}) fails: {}",
            c.name, c.detail
        ))),
    };
    Ok(Outcome { report, verdict })
}

fn verification_grid(ctx: &Ctx, pair: &BoundPair) -> Vec<f64> {
    let b = &ctx.cfg.bounds;
    refined_grid(
        b.verify_lo,
        b.verify_hi,
        b.verify_points,
        &pair.breakpoints(),
        EXCLUSION_RADIUS,
    )
}

fn export_pair(ctx: &Ctx, pair: &BoundPair, grid: &[f64]) -> Result<(), CliError> {
    for (name, prof) in export::PROFILE_NAMES
        .iter()
        .zip(export::pair_profiles(pair))
    {
        if let Some(mut f) = ctx.out_file(&format!("{name}.csv"))? {
            export::write_profile_csv(prof, grid, &mut f)?;
        }
    }
    Ok(())
}

fn bounds(ctx: &Ctx) -> Result<Outcome, CliError> {
    let p = ctx.params()?;
    let s = ctx.cfg.speed()?;
    let pair = ctx.pair(&p, s)?;
    let grid = verification_grid(ctx, &pair);
    export_pair(ctx, &pair, &grid)?;
    pass(json!({
        "construction": pair.scenario,
        "speed": s,
        "constants": pair.constants,
        "breakpoints": pair.breakpoints(),
        "shift": pair.shift,
    }))
}

fn verify(ctx: &Ctx) -> Result<Outcome, CliError> {
    let p = ctx.params()?;
    let s = ctx.cfg.speed()?;
    let pair = ctx.pair(&p, s)?;
    let grid = verification_grid(ctx, &pair);
    export_pair(ctx, &pair, &grid)?;
    let rep = verify_pair(&pair, &pair.shift, &p, &grid, ctx.cfg.bounds.verify_tol)?;
    if let Some(mut f) = ctx.out_file("residuals.csv")? {
        export::write_residual_csv(&rep.residuals, &mut f)?;
    }
    let failure = rep.first_failure.clone();
    let report = json!({
        "construction": pair.scenario,
        "speed": s,
        "constants": pair.constants,
        "verification": rep,
    });
    verdict(report, failure.is_none(), || failure.unwrap_or_default())
}

fn write_wave(ctx: &Ctx, wave: &WaveSolution, name: &str) -> Result<(), CliError> {
    if let Some(mut f) = ctx.out_file(name)? {
        export::write_wave_csv(wave, &mut f)?;
    }
    Ok(())
}

/// Solves the closed-form scenario seeded by its bounds midpoint.
fn solve_closed(ctx: &Ctx, p: &ModelParams, s: f64) -> Result<(BoundPair, WaveSolution), CliError> {
    let pair = ctx.pair(p, s)?;
    let grid = ctx.grid_for(p, s, pair.constants.rho, &pair.shift)?;
    let solver = ctx.cfg.solver.to_solver();
    let wave = solve_system(p, s, &pair.shift, Seed::Bounds(&pair), &grid, &solver)?;
    Ok((pair, wave))
}

fn solve(ctx: &Ctx) -> Result<Outcome, CliError> {
    let p = ctx.params()?;
    let s = ctx.cfg.speed()?;
    let (pair, wave) = solve_closed(ctx, &p, s)?;
    write_wave(ctx, &wave, "wave.csv")?;
    let limits = wave_diagnostics(&wave, &steady_states(&p));
    let sandwich_ok = wave.sandwich.as_ref().is_none_or(|r| r.passed);
    let report = json!({
        "construction": pair.scenario,
        "speed": s,
        "solution": wave_summary(&wave),
        "limits": limits,
    });
    verdict(report, sandwich_ok, || {
        "solution leaves its bounds (sandwich check)".to_string()
    })
}

fn chain(ctx: &Ctx) -> Result<Outcome, CliError> {
    let p = ctx.params()?;
    let s = ctx.cfg.speed()?;
    let (shift, grid) = ctx.chain_setup(&p, s)?;
    let ch = build_estar_chain(&p, s, &shift, &grid, &ctx.cfg.solver.to_solver())?;
    write_wave(ctx, &ch.wave, "wave.csv")?;
    export_pair(ctx, &ch.pair, &grid.positions)?;
    let st = steady_states(&p);
    let limits = wave_diagnostics(&ch.wave, &st);
    let dist = limits
        .distances
        .iter()
        .find(|d| d.state == "E_*")
        .map_or(f64::INFINITY, |d| d.left);
    let approaches = dist <= 1e-4;
    let ok = approaches && ch.pair_residual_passed;
    let report = json!({
        "speed": s,
        "constants": ch.pair.constants,
        "phi2_lower": scalar_summary(&ch.phi2_lower),
        "phi3_lower": scalar_summary(&ch.phi3_lower),
        "pair_residual_passed": ch.pair_residual_passed,
        "exclusion_sign_max": ch.exclusion_sign_max,
        "solution": wave_summary(&ch.wave),
        "limits": limits,
        "left_distance_to_e_star_lower": dist,
        "approaches_e_star_lower": approaches,
    });
    verdict(report, ok, || {
        if ch.pair_residual_passed {
            format!("wave does not approach E_* at the left end (distance {dist:e})")
        } else {
            "assembled lower bounds fail their residual check".into()
        }
    })
}

fn grid_summary(g: &Grid) -> Value {
    json!({ "z_min": g.z_min, "z_max": g.z_max, "n": g.n, "spacing": g.spacing })
}

/// Report fields of a wave; the profile itself goes to CSV.
fn wave_summary(w: &WaveSolution) -> Value {
    json!({
        "grid": grid_summary(&w.grid),
        "speed": w.speed,
        "iterations": w.iterations,
        "residuals": w.residuals,
        "residual_history": w.residual_history,
        "left_state": w.left_state,
        "right_state": w.right_state,
        "sandwich": w.sandwich,
        "minima": w.minima,
        "positive": w.positive,
        "negative_overshoot": w.negative_overshoot,
    })
}

fn scalar_summary(w: &ScalarWave) -> Value {
    json!({
        "gamma": w.gamma,
        "rho": w.rho,
        "lambda0": w.lambda0,
        "offset": w.offset,
        "epsilon_eff": w.epsilon_eff,
        "residual": w.residual,
        "iterations": w.iterations,
        "max_increase": w.max_increase,
        "sub_solution_margin": w.sub_solution_margin,
    })
}

/// Wave, bounds midpoint and shift used by `simulate`.
struct Prepared {
    shift: ShiftProfile,
    grid: Grid,
    wave: Option<WaveSolution>,
    midpoint: [Vec<f64>; 3],
    invaded: [f64; 3],
}

fn prepare(ctx: &Ctx, p: &ModelParams, s: f64) -> Result<Prepared, CliError> {
    let scenario = ctx.cfg.scenario()?;
    let need_wave = matches!(
        ctx.cfg.simulation.initial,
        InitialData::Wave | InitialData::PerturbedWave
    );
    let (pair, grid, wave) = if scenario == Scenario::Estable {
        let (shift, grid) = ctx.chain_setup(p, s)?;
        let ch = build_estar_chain(p, s, &shift, &grid, &ctx.cfg.solver.to_solver())?;
        (ch.pair, grid, Some(ch.wave))
    } else if need_wave {
        let (pair, wave) = solve_closed(ctx, p, s)?;
        let grid = wave.grid.clone();
        (pair, grid, Some(wave))
    } else {
        let pair = ctx.pair(p, s)?;
        let grid = ctx.grid_for(p, s, pair.constants.rho, &pair.shift)?;
        (pair, grid, None)
    };
    let midpoint = [0, 1, 2].map(|q| {
        grid.positions
            .iter()
            .map(|&z| pair.midpoint_at(z)[q])
            .collect()
    });
    Ok(Prepared {
        shift: pair.shift.clone(),
        invaded: pair.invaded_state(p),
        grid,
        wave,
        midpoint,
    })
}

fn simulate_cmd(ctx: &Ctx) -> Result<Outcome, CliError> {
    let p = ctx.params()?;
    let s = ctx.cfg.speed()?;
    let block = &ctx.cfg.simulation;
    let prep = prepare(ctx, &p, s)?;
    let n = prep.grid.n;
    let z = &prep.grid.positions;
    let ic: [Vec<f64>; 3] = match block.initial {
        InitialData::Wave => prep.wave.as_ref().expect("wave prepared").phi.clone(),
        InitialData::PerturbedWave => {
            let mut rng = ChaCha8Rng::seed_from_u64(block.seed);
            let bx = p.box_bound();
            let eps = block.perturbation;
            let w = prep.wave.as_ref().expect("wave prepared");
            [0, 1, 2].map(|q| {
                w.phi[q]
                    .iter()
                    .map(|v| (v * (1.0 + rng.gen_range(-eps..=eps))).clamp(0.0, bx[q]))
                    .collect()
            })
        }
        InitialData::BoundsMidpoint => prep.midpoint.clone(),
        InitialData::Pulses => [
            vec![prep.invaded[0]; n],
            z.iter()
                .map(|&x| prep.invaded[1] + pulse(x, 0.0, 5.0, 0.5))
                .collect(),
            z.iter()
                .map(|&x| prep.invaded[2] + pulse(x, 0.0, 5.0, 0.5))
                .collect(),
        ],
    };
    let left_state = prep.wave.as_ref().map_or(prep.invaded, |w| w.left_state);
    let left = match block.left {
        LeftKind::Dirichlet => LeftBoundary::Dirichlet { state: left_state },
        LeftKind::Neumann => LeftBoundary::Neumann,
    };
    let mut cfg = SimConfig::new(prep.grid.clone(), block.t_end, block.snapshot_every, left);
    cfg.dt = block.dt;
    let traj = simulate(&p, s, &prep.shift, &ic, &cfg, prep.wave.as_ref())?;
    if let Some(dir) = &ctx.out {
        let snap_dir = dir.join("snapshots");
        fs::create_dir_all(&snap_dir)?;
        let mut files = Vec::new();
        for (i, u) in traj.snapshots.iter().enumerate() {
            let name = format!("snapshot_{i:05}.csv");
            let mut f = BufWriter::new(File::create(snap_dir.join(&name))?);
            export::write_snapshot_csv(z, u, &mut f)?;
            files.push(format!("snapshots/{name}"));
        }
        let mut f = BufWriter::new(File::create(dir.join("snapshots.csv"))?);
        export::write_snapshot_index(&traj.times, &files, &mut f)?;
    }
    let metrics = match &prep.wave {
        Some(w) => Some(convergence_metrics(&traj, w)?),
        None => None,
    };
    pass(json!({
        "speed": s,
        "grid": grid_summary(&prep.grid),
        "trajectory": {
            "dt": traj.dt,
            "steps": traj.steps,
            "times": traj.times,
            "sup_norms": traj.sup_norms,
            "min_value": traj.min_value,
            "max_box_excess": traj.max_box_excess,
            "reference_distance": traj.reference_distance,
        },
        "metrics": metrics,
    }))
}

fn extinction(ctx: &Ctx) -> Result<Outcome, CliError> {
    let p = ctx.params()?;
    let s = ctx.cfg.speed()?;
    let block = &ctx.cfg.extinction;
    let sim = &ctx.cfg.simulation;
    let (variant, shift, grid) = match block.variant {
        ExtinctionKind::LargeK => {
            let (shift, grid) = ctx.chain_setup(&p, s)?;
            (ExtinctionVariant::LargeK, shift, grid)
        }
        ExtinctionKind::Subcritical => {
            let scenario = ctx.cfg.scenario()?;
            let l = ctx.cfg.grid.half_width.unwrap_or(60.0);
            (
                ExtinctionVariant::SubcriticalSpeed { scenario },
                ctx.shift()?,
                Grid::new(l, ctx.cfg.grid.n)?,
            )
        }
    };
    // the experiment pins the left end to the invaded state
    let mut cfg = SimConfig::new(grid, sim.t_end, sim.snapshot_every, LeftBoundary::Neumann);
    cfg.dt = sim.dt;
    let rep = extinction_experiment(&p, s, &shift, variant, &cfg, block.threshold, block.dwell)?;
    let all_extinct = rep.fates.iter().all(|f| f.extinct);
    let sign_ok = rep.sign_condition_holds.unwrap_or(true);
    let msg = {
        let persisting: Vec<String> = rep
            .fates
            .iter()
            .filter(|f| !f.extinct)
            .map(|f| format!("species {} persists (sup {:e})", f.species, f.final_sup))
            .collect();
        let mut parts = persisting;
        if !sign_ok {
            parts.push(format!(
                "sign condition fails at z = {}",
                rep.sign_max_at.unwrap_or(f64::NAN)
            ));
        }
        parts.join("; ")
    };
    verdict(json!({ "extinction": rep }), all_extinct && sign_ok, || msg)
}

/// Report envelope with the resolved configuration embedded.
pub fn envelope(cmd: Command, ctx: &Ctx, outcome: &Outcome) -> Value {
    let status = match &outcome.verdict {
        Ok(()) => json!("pass"),
        Err(e) => json!(e.to_string()),
    };
    json!({
        "command": cmd.name(),
        "version": env!("CARGO_PKG_VERSION"),
        "config": ctx.cfg,
        "status": status,
        "result": outcome.report,
    })
}

pub fn write_report(ctx: &Ctx, cmd: Command, value: &Value) -> Result<(), CliError> {
    if let Some(dir) = &ctx.out {
        fs::create_dir_all(dir)?;
        let text = serde_json::to_string_pretty(value).expect("reports serialise");
        fs::write(dir.join(format!("{}.json", cmd.name())), text + "\n")?;
    }
    Ok(())
}

pub fn config_base(path: Option<&Path>) -> PathBuf {
    path.and_then(Path::parent)
        .map(Path::to_path_buf)
        .unwrap_or_else(|| PathBuf::from("."))
}
