use cascade_node::checks;
use cascade_node::design::{coupling_g, solve_gap, EmitterModeSpec, GapRate, GapRateTable, Interpolation, TableKind};
use cascade_node::dynamics::{evolve_driven, Pulse, TimeGrid};
use cascade_node::metrics::{success_rate, symmetry_factor};
use cascade_node::optimize::evaluate;
use cascade_node::spectral::analytic_emission;
use cascade_node::NodeConfig;
use num_complex::Complex64 as C64;
use proptest::prelude::*;

fn ideal_ratios() -> impl Strategy<Value = Vec<f64>> {
    (1usize..=4).prop_flat_map(|n| {
        (proptest::collection::vec(0.5f64..4.0, n - 1), 1.0f64..12.0).prop_map(|(mut js, kappa)| {
            js.push(kappa);
            js
        })
    })
}

fn skewed_pulse(grid: TimeGrid, a: f64, b: f64, phase: f64) -> Pulse {
    Pulse::from_fn(grid, |t| {
        let s = t - 3.0;
        let env = if s > 0.0 { s.powf(a) * (-b * s).exp() } else { 0.0 };
        C64::from_polar(env, phase * t)
    })
    .unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn beta_ignores_phase_translation_and_reversal(a in 0.5f64..3.0, b in 0.8f64..3.0, phase in -2.0f64..2.0) {
        let grid = TimeGrid::new(0.0, 24.0, 2401).unwrap();
        let p = skewed_pulse(grid, a, b, phase);
        let base = symmetry_factor(&p).unwrap();
        prop_assert!(base.beta <= 1.0 + 1e-9);
        let rotated = symmetry_factor(&p.scaled(C64::from_polar(1.0, 0.7))).unwrap();
        prop_assert!((rotated.beta - base.beta).abs() < 1e-8);
        // a whole number of samples keeps the sampled shape identical
        let moved = symmetry_factor(&p.shifted(3.0 * grid.step() * 37.0)).unwrap();
        prop_assert!((moved.beta - base.beta).abs() < 1e-8);
        prop_assert!((moved.t0_star - base.t0_star - 3.0 * grid.step() * 37.0).abs() < 1e-6);
        let reversed = symmetry_factor(&p.time_reversed_conjugate()).unwrap();
        prop_assert!((reversed.beta - base.beta).abs() < 1e-8);
    }

    #[test]
    fn beta_scale_invariance(ratios in ideal_ratios(), scale in 0.1f64..50.0) {
        let grid = TimeGrid::default_emission();
        let cfg = NodeConfig::from_ratios(&ratios).unwrap();
        let scaled = cfg.scaled(scale);
        let scaled_grid = TimeGrid::new(0.0, grid.t_end / scale, grid.n_samples).unwrap();
        let a = symmetry_factor(&analytic_emission(&cfg, &grid).unwrap()).unwrap().beta;
        let b = symmetry_factor(&analytic_emission(&scaled, &scaled_grid).unwrap()).unwrap().beta;
        prop_assert!((a - b).abs() < 1e-9, "{} vs {}", a, b);
    }

    #[test]
    fn spectral_identities(ratios in ideal_ratios()) {
        let cfg = NodeConfig::from_ratios(&ratios).unwrap();
        prop_assert!(checks::pairing_error(&cfg).unwrap() < 1e-9);
        prop_assert!(checks::residue_sum_error(&cfg).unwrap() < 1e-8);
        prop_assert!(checks::reconstruction_error(&cfg).unwrap() < 1e-9);
    }

    #[test]
    fn lossy_spectra_stay_passive(
        ratios in ideal_ratios(),
        gamma0 in 0.0f64..0.5,
        gamma_c in 0.0f64..0.5,
        delta in -1.0f64..1.0,
        h in 0.0f64..1.0,
    ) {
        let n = ratios.len();
        let cfg = NodeConfig::from_ratios(&ratios)
            .unwrap()
            .with_losses(gamma0, gamma_c)
            .unwrap()
            .with_deltas(&vec![delta; n])
            .unwrap()
            .with_backscatter(&vec![h; n])
            .unwrap();
        prop_assert!(checks::passivity_excess(&cfg).unwrap() <= 1e-12);
    }

    #[test]
    fn success_rate_ignores_drive_phase(phase in 0.0f64..6.2) {
        let cfg = NodeConfig::ideal(1.0, &[1.4], 4.0).unwrap();
        let grid = TimeGrid::new(0.0, 16.0, 801).unwrap();
        let p = Pulse::gaussian(grid, 6.0, 1.2).unwrap();
        let f0 = success_rate(&evolve_driven(&cfg, &p).unwrap()).population;
        let f1 = success_rate(&evolve_driven(&cfg, &p.scaled(C64::from_polar(1.0, phase))).unwrap()).population;
        prop_assert!((f0 - f1).abs() < 1e-10);
    }

    #[test]
    fn solve_gap_decreases_with_rate(r1 in 0.6f64..19.0, r2 in 0.6f64..19.0) {
        let rows = [(80.0, 20.0), (120.0, 9.0), (200.0, 2.0), (320.0, 0.5)]
            .iter()
            .map(|&(gap, rate)| GapRate { gap: gap * 1e-9, rate })
            .collect();
        let table = GapRateTable::new(TableKind::RingRing, rows).unwrap();
        for interp in [Interpolation::LogLinear, Interpolation::Linear] {
            let g1 = solve_gap(&table, r1, interp).unwrap().gap;
            let g2 = solve_gap(&table, r2, interp).unwrap().gap;
            if r1 < r2 {
                prop_assert!(g1 >= g2);
            }
            let back = table.rate_at(g1, interp).unwrap();
            prop_assert!((back / r1 - 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn coupling_is_dimensionally_homogeneous(s in 0.2f64..5.0) {
        let base = EmitterModeSpec { lambda: 785e-9, gamma0: 1.9e8, n_index: 1.8, v_eff: 12e-18 };
        let scaled = EmitterModeSpec { lambda: base.lambda * s, v_eff: base.v_eff * s.powi(3), ..base };
        let g0 = coupling_g(&base).unwrap();
        prop_assert!((coupling_g(&scaled).unwrap() - g0 / s.sqrt()).abs() < 1e-9 * g0);
    }
}

#[test]
fn tolerance_halving_barely_moves_success_rate() {
    use cascade_node::dynamics::{evolve_driven_with, EvolveOptions};
    use cascade_node::ode::Tolerances;
    let cfg = NodeConfig::three_ring_optimum();
    let grid = TimeGrid::new(0.0, 40.0, 8191).unwrap();
    let pulse = analytic_emission(&cfg, &grid).unwrap().shifted(5.0);
    let f = |tol: Tolerances| {
        success_rate(&evolve_driven_with(&cfg, &pulse, &EvolveOptions { tolerances: tol }).unwrap()).population
    };
    let base = Tolerances::default();
    let a = f(base);
    let b = f(base.scaled(0.5));
    assert!((a - b).abs() < 1e-7, "{a} vs {b}");
}

#[test]
fn objective_scale_invariance_through_configs() {
    let e = evaluate(&[1.88, 2.94, 7.92]).unwrap().beta;
    let grid = TimeGrid::new(0.0, 20.0 / 3.0, 4096).unwrap();
    let cfg = NodeConfig::three_ring_optimum().scaled(3.0);
    let b = symmetry_factor(&analytic_emission(&cfg, &grid).unwrap()).unwrap().beta;
    assert!((e - b).abs() < 1e-9);
}
