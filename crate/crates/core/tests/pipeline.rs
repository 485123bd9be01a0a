//! End-to-end pipeline cases outside the acceptance criteria.

use forced_waves::bounds::{build_bounds, BoundOverrides, BoundScenario, BoundsError};
use forced_waves::model::ModelParams;
use forced_waves::shift::ShiftProfile;
use forced_waves::wave::{
    build_estar_chain, right_decay_rate, solve_system, Grid, Seed, SolverConfig, WaveError,
};

const PSET_C: ModelParams = ModelParams {
    d: 1.0,
    r1: 1.0,
    r2: 1.0,
    r3: 1.0,
    a: 3.0,
    b: 0.02,
    h: 0.5,
    k: 1.5,
};

fn shift() -> ShiftProfile {
    ShiftProfile::sigmoid(2.0, 1.5, 1.0).unwrap()
}

#[test]
fn chain_rejects_large_b_before_solving() {
    let p = ModelParams { b: 0.05, ..PSET_C };
    let grid = Grid::new(50.0, 801).unwrap();
    match build_estar_chain(&p, 1.0, &shift(), &grid, &SolverConfig::default()) {
        Err(WaveError::HypothesisViolation { condition, .. }) => assert_eq!(condition, "co-b22"),
        other => panic!("expected a hypothesis violation, got {other:?}"),
    }
}

#[test]
fn baseline_k_fails_the_exclusion_sign_condition() {
    let grid = Grid::new(50.0, 2001).unwrap();
    let ch = build_estar_chain(&PSET_C, 1.0, &shift(), &grid, &SolverConfig::default()).unwrap();
    assert!(ch.exclusion_sign_max > 0.0, "{}", ch.exclusion_sign_max);
}

#[test]
fn speed_below_regime_is_rejected() {
    let p = ModelParams {
        r2: 2.0,
        a: 2.0,
        b: 0.1,
        ..PSET_C
    };
    let err = build_bounds(
        &p,
        1.9,
        &shift(),
        BoundScenario::EuSuper,
        &BoundOverrides::default(),
    );
    assert!(matches!(
        err,
        Err(BoundsError::SpeedRegimeMismatch { .. }) | Err(BoundsError::Model(_))
    ));
}

#[test]
fn perturbed_seed_reaches_the_same_wave() {
    let p = ModelParams {
        r2: 2.0,
        a: 2.0,
        b: 0.1,
        ..PSET_C
    };
    let pair = build_bounds(
        &p,
        2.5,
        &shift(),
        BoundScenario::EuSuper,
        &BoundOverrides::default(),
    )
    .unwrap();
    let grid = Grid::for_pair(&pair, &p, 2001).unwrap();
    let cfg = SolverConfig::default();
    let from_bounds = solve_system(&p, 2.5, &pair.shift, Seed::Bounds(&pair), &grid, &cfg).unwrap();
    let guess = from_bounds
        .phi
        .clone()
        .map(|v| v.iter().map(|x| 0.9 * x).collect::<Vec<f64>>());
    let perturbed = solve_system(
        &p,
        2.5,
        &pair.shift,
        Seed::Guess {
            values: &guess,
            left_state: from_bounds.left_state,
            bounds: Some(&pair),
        },
        &grid,
        &cfg,
    )
    .unwrap();
    let diff = (0..3)
        .flat_map(|q| {
            from_bounds.phi[q]
                .iter()
                .zip(&perturbed.phi[q])
                .map(|(a, b)| (a - b).abs())
                .collect::<Vec<_>>()
        })
        .fold(0.0, f64::max);
    assert!(diff < 1e-9, "{diff}");
}

#[test]
fn right_rate_matches_its_quadratic() {
    let p = ModelParams {
        r2: 2.0,
        a: 2.0,
        b: 0.1,
        ..PSET_C
    };
    let mu = right_decay_rate(&p, 2.5, &shift()).unwrap();
    // u decays slowest: d mu^2 + s mu + r1 (1 - m) = 0 with m = 2
    assert!((mu * mu + 2.5 * mu - 1.0).abs() < 1e-14);
    let grid = Grid::for_rates(&p, 2.5, &shift(), 0.5, 801).unwrap();
    assert_eq!(grid.z_min, -50.0);
    assert!((grid.z_max - 25.0 / mu).abs() < 1e-12);
}
