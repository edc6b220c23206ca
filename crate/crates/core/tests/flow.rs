use wallpile::config::{Configuration, ModelParams};
use wallpile::diagnostics;
use wallpile::energy;
use wallpile::flow::{self, IntegratorOptions};
use wallpile::potentials::PhaseShift;

fn a1() -> PhaseShift {
    PhaseShift::new(1.0).unwrap()
}

#[test]
fn halving_tolerances_moves_the_gap_by_less_than_table_tolerance() {
    for n in [16, 32] {
        let p = ModelParams::balanced(n, 2.0 * n as f64, 0.0, a1()).unwrap();
        let c0 = flow::initial_condition_equispaced(n).unwrap();
        let coarse = IntegratorOptions::default();
        let fine = IntegratorOptions {
            rtol: coarse.rtol / 2.0,
            atol: coarse.atol / 2.0,
            ..coarse.clone()
        };
        let d = |o: &IntegratorOptions| {
            let t = flow::integrate(&c0, &p, o).unwrap();
            diagnostics::d_plus_minus(&t.final_state.config, &p).unwrap()
        };
        let (dc, df) = (d(&coarse), d(&fine));
        assert!((dc - df).abs() < 0.03, "n = {n}: {dc} vs {df}");
    }
}

fn skewed_start() -> Configuration {
    Configuration::new(
        vec![0.0, 0.05, 0.2, 0.33, 0.4, 0.52],
        vec![0.45, 0.6, 0.62, 0.8, 0.9, 1.0],
    )
    .unwrap()
}

#[test]
fn reflected_start_gives_reflected_trajectory() {
    let c0 = skewed_start();
    let p = ModelParams::balanced(12, 9.0, 0.5, a1()).unwrap();
    let opts = IntegratorOptions {
        t_end: 10.0,
        sample_times: vec![0.01, 0.1, 1.0, 10.0],
        ..Default::default()
    };
    let fwd = flow::integrate(&c0, &p, &opts).unwrap();
    let refl = flow::integrate(&c0.reflect(), &p, &opts).unwrap();
    assert_eq!(fwd.samples.len(), refl.samples.len());
    for (s, r) in fwd.samples.iter().zip(&refl.samples) {
        assert_eq!(s.t, r.t);
        let mirrored = s.config.reflect();
        let dev = mirrored
            .to_block()
            .iter()
            .zip(r.config.to_block())
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        assert!(dev < 1e-6, "t = {}: {dev}", s.t);
    }
}

#[test]
fn sampled_states_are_ordered_and_energy_decreases() {
    for (n, alpha, gamma) in [(16, 8.0, 0.0), (12, 12.0, 1.0), (16, 32.0, 0.0)] {
        let p = ModelParams::balanced(n, alpha, gamma, a1()).unwrap();
        let c0 = flow::initial_condition_equispaced(n).unwrap();
        let opts = IntegratorOptions {
            sample_times: flow::geometric_grid(1e-4, 1e10, 6),
            ..Default::default()
        };
        let t = flow::integrate(&c0, &p, &opts).unwrap();
        assert!(t.completed);
        let mut prev = energy::energy(&c0, &p);
        for s in &t.samples {
            assert_eq!((s.config.n_plus(), s.config.n_minus()), (n / 2, n / 2));
            assert!(s.config.plus().windows(2).all(|w| w[0] <= w[1]));
            assert!(s.config.minus().windows(2).all(|w| w[0] <= w[1]));
            assert!(s.config.to_block().iter().all(|x| (0.0..=1.0).contains(x)));
            let e = energy::energy(&s.config, &p);
            assert!(
                e <= prev + 10.0 * opts.atol,
                "n = {n}, t = {}: {e} > {prev}",
                s.t
            );
            prev = e;
        }
    }
}

#[test]
fn trajectory_csv_round_trips_the_final_state() {
    let n = 8;
    let p = ModelParams::balanced(n, 16.0, 0.0, a1()).unwrap();
    let c0 = flow::initial_condition_equispaced(n).unwrap();
    let t = flow::integrate(&c0, &p, &IntegratorOptions::default()).unwrap();
    let csv = t.to_csv();
    let last: Vec<&str> = csv.lines().rev().take(n).collect();
    assert!(last
        .iter()
        .all(|l| l.starts_with(&wallpile::config::fmt17(t.final_state.t))));
    let meta: serde_json::Value =
        serde_json::from_str(&t.metadata_json(&p, &IntegratorOptions::default()).unwrap()).unwrap();
    assert_eq!(meta["completed"], true);
}
