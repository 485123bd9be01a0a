//! Property-based invariants of the building blocks.

use forced_waves::bounds::refined_grid;
use forced_waves::export::fmt_f64;
use forced_waves::linalg::{solve_tridiagonal, BandMatrix};
use forced_waves::model::{characteristic_roots, Characteristic, ModelParams};
use forced_waves::profile::Term;
use forced_waves::shift::{normalize_translation, ShiftProfile};
use forced_waves::wave::Grid;
use proptest::prelude::*;

fn params() -> impl Strategy<Value = ModelParams> {
    (
        0.2..5.0f64,
        0.1..5.0f64,
        0.1..5.0f64,
        0.1..5.0f64,
        1.001..5.0f64,
        0.001..1.0f64,
        0.001..0.999f64,
        1.001..5.0f64,
    )
        .prop_map(|(d, r1, r2, r3, a, b, h, k)| ModelParams {
            d,
            r1,
            r2,
            r3,
            a,
            b,
            h,
            k,
        })
}

proptest! {
    #![proptest_config(ProptestConfig { failure_persistence: None, ..ProptestConfig::default() })]

    #[test]
    fn tridiagonal_solution_satisfies_system(
        rows in prop::collection::vec((-1.0..1.0f64, -1.0..1.0f64, -1.0..1.0f64, 0.1..2.0f64), 3..60)
    ) {
        let n = rows.len();
        let lower: Vec<f64> = rows.iter().map(|r| r.0).collect();
        let upper: Vec<f64> = rows.iter().map(|r| r.1).collect();
        let diag: Vec<f64> = rows.iter().map(|r| r.0.abs() + r.1.abs() + r.3).collect();
        let rhs: Vec<f64> = rows.iter().map(|r| r.2).collect();
        let mut x = rhs.clone();
        solve_tridiagonal(&lower, &diag, &upper, &mut x).unwrap();
        for i in 0..n {
            let mut v = diag[i] * x[i];
            if i > 0 { v += lower[i] * x[i - 1]; }
            if i + 1 < n { v += upper[i] * x[i + 1]; }
            prop_assert!((v - rhs[i]).abs() <= 1e-10, "row {i}: {v} vs {}", rhs[i]);
        }
    }

    #[test]
    fn band_solution_satisfies_system(
        n in 8usize..40,
        seed in prop::collection::vec(-1.0..1.0f64, 400),
    ) {
        let (kl, ku) = (3, 3);
        let mut a = BandMatrix::zeros(n, kl, ku);
        let mut next = seed.iter().cycle();
        for i in 0..n {
            for j in i.saturating_sub(kl)..=(i + ku).min(n - 1) {
                let v = *next.next().unwrap();
                // weak diagonal, pivoting required
                a.add(i, j, if i == j { v + 0.5 * v.signum() } else { v });
            }
        }
        let rhs: Vec<f64> = (0..n).map(|i| (i as f64).sin()).collect();
        let mut x = rhs.clone();
        if a.clone().solve(&mut x).is_ok() {
            let y = a.mul_vec(&x);
            let scale = x.iter().fold(1.0f64, |m, v| m.max(v.abs()));
            for i in 0..n {
                prop_assert!((y[i] - rhs[i]).abs() <= 1e-9 * scale, "row {i}");
            }
        }
    }

    #[test]
    fn characteristic_roots_solve_their_quadratic(p in params(), factor in 1.001..4.0f64) {
        for which in [Characteristic::A1, Characteristic::A2] {
            let c = match which {
                Characteristic::A1 => p.r3 * (p.a - 1.0),
                Characteristic::A2 => p.r2 * (1.0 - p.h) * (1.0 + p.b) / (1.0 + p.a * p.b),
            };
            let s = 2.0 * (p.d * c).sqrt() * factor;
            let info = characteristic_roots(&p, s, which).unwrap();
            let (l1, l2) = (info.small(), info.large());
            prop_assert!(0.0 < l1 && l1 < l2);
            for l in [l1, l2] {
                let scale = p.d * l * l + s * l + c;
                prop_assert!((p.d * l * l - s * l + c).abs() <= 1e-13 * scale);
            }
            let below = 2.0 * (p.d * c).sqrt() * 0.99;
            prop_assert!(characteristic_roots(&p, below, which).is_err());
        }
    }

    #[test]
    fn reaction_points_into_the_box(
        p in params(),
        alpha in -3.0..0.0f64,
        x in (0.0..1.0f64, 0.0..1.0f64, 0.0..1.0f64),
    ) {
        let wmax = 2.0 * p.a - 1.0;
        let (u, v, w) = (x.0, x.1, x.2 * wmax);
        prop_assert!(p.reaction(alpha, 1.0, v, w)[0] <= 0.0);
        prop_assert!(p.reaction(alpha, u, 1.0, w)[1] <= 0.0);
        prop_assert!(p.reaction(alpha, u, v, wmax)[2] <= 1e-12);
        let f0 = p.reaction(alpha, 0.0, 0.0, 0.0);
        prop_assert_eq!(f0, [0.0, 0.0, 0.0]);
    }

    #[test]
    fn normalized_shift_lies_under_its_envelope(
        m in 0.1..5.0f64,
        rho in 0.1..3.0f64,
        k in 0.1..5.0f64,
        eps in 1e-4..0.5f64,
        t in 0.0..1.0f64,
    ) {
        let sh = normalize_translation(&ShiftProfile::sigmoid(m, rho, k).unwrap(), eps).unwrap();
        let z = -60.0 * t;
        prop_assert!(sh.alpha(z).abs() <= eps * (rho * z).exp() * (1.0 + 1e-12));
        prop_assert!(sh.offset >= k);
    }

    #[test]
    fn exponential_term_derivatives(coef in -3.0..3.0f64, rate in 0.05..3.0f64, z in -20.0..0.0f64) {
        let [v, d1, d2] = Term::exp(coef, rate).eval3(z);
        let e = coef * (rate * z).exp();
        prop_assert!((v - e).abs() <= 1e-14 * e.abs().max(1e-300));
        prop_assert!((d1 - rate * e).abs() <= 1e-13 * (rate * e).abs().max(1e-300));
        prop_assert!((d2 - rate * rate * e).abs() <= 1e-13 * (rate * rate * e).abs().max(1e-300));
    }

    #[test]
    fn refined_grid_is_sorted_and_avoids_breakpoints(
        bps in prop::collection::vec(-50.0..50.0f64, 0..6),
        n in 101usize..2001,
    ) {
        let radius = 1e-6;
        let g = refined_grid(-60.0, 60.0, n, &bps, radius);
        prop_assert!(g.len() >= n - 2 * bps.len());
        prop_assert!(g.windows(2).all(|w| w[0] < w[1]));
        prop_assert!(g.iter().all(|z| (-60.0..=60.0).contains(z)));
        for b in &bps {
            prop_assert!(g.iter().all(|z| (z - b).abs() >= radius));
        }
    }

    #[test]
    fn floats_round_trip_through_csv(x in any::<f64>().prop_filter("finite", |x| x.is_finite())) {
        prop_assert_eq!(fmt_f64(x).parse::<f64>().unwrap(), x);
    }

    #[test]
    fn grid_spans_its_interval(lo in 1.0..100.0f64, hi in 1.0..100.0f64, n in 401usize..3000) {
        let g = Grid::span(-lo, hi, n).unwrap();
        prop_assert_eq!(g.positions.len(), n);
        prop_assert_eq!(g.positions[0], -lo);
        prop_assert_eq!(g.positions[n - 1], hi);
        prop_assert!(g.positions.windows(2).all(|w| w[0] < w[1]));
        let mid = g.nearest(0.0);
        prop_assert!(g.positions[mid].abs() <= 0.5 * g.spacing + 1e-12);
    }
}
