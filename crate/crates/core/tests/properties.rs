use proptest::prelude::*;

use hopper_core::emulator::{
    calibrate_gain_maps, forward_kinematics, kinematic_jacobian, motor_torque, LinkageGeometry,
    OscillatorFit, OscillatorParams, PdGains,
};
use hopper_core::model::{
    derivatives, ground_force, leg_force, leg_setpoint, precompression_from_energy, EnergyBudget,
    GroundProfile, HopperParams, HybridState, Phase,
};
use hopper_core::sim::{steady_state_apex, EpisodeConfig, HopRecord};
use hopper_core::sweep::{select_stiffness, CellResult, GridRange, WinnerMap};

fn hopper_strategy() -> impl Strategy<Value = HopperParams<f64>> {
    (0.5..5.0f64, 0.05..1.0f64, 0.05..0.2f64, 1000.0..8000.0f64, 0.0..80.0f64).prop_map(
        |(mb, mt, l, k, d)| {
            HopperParams::new(mb, mt, l, k, 1.0)
                .unwrap()
                .with_leg(k, d)
                .unwrap()
        },
    )
}

fn state_strategy(phase: Phase) -> impl Strategy<Value = HybridState<f64>> {
    (-0.2..0.4f64, -3.0..3.0f64, -0.05..0.3f64, -3.0..3.0f64, 0.0..0.04f64).prop_map(
        move |(xb, vb, xt, vt, p)| HybridState {
            phase,
            time: 0.0,
            body_pos: xb,
            body_vel: vb,
            toe_pos: xt,
            toe_vel: vt,
            precompression: p,
        },
    )
}

fn ground_strategy() -> impl Strategy<Value = GroundProfile<f64>> {
    (500.0..8000.0f64, 0.0..100.0f64).prop_map(|(k, d)| GroundProfile::new(k, d).unwrap())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn flight_center_of_mass_falls_freely(
        h in hopper_strategy(),
        s in state_strategy(Phase::Flight),
        g in ground_strategy(),
    ) {
        let d = derivatives(&s, &h, &g);
        let com = (h.body_mass() * d[1] + h.toe_mass() * d[3]) / h.total_mass();
        prop_assert!((com + h.gravity()).abs() <= 1e-12 * h.gravity(), "{com}");
    }

    #[test]
    fn leg_force_is_internal(
        h in hopper_strategy(),
        s in state_strategy(Phase::Stance),
        g in ground_strategy(),
    ) {
        let d = derivatives(&s, &h, &g);
        let f = leg_force(&s, &h);
        let fg = ground_force(&s, &g);
        let body = h.body_mass() * (d[1] + h.gravity());
        let toe = h.toe_mass() * (d[3] + h.gravity());
        let scale = f.abs() + fg.abs() + 1.0;
        prop_assert!((body - f).abs() <= 1e-12 * scale);
        prop_assert!((toe + f - fg).abs() <= 1e-12 * scale);
    }

    #[test]
    fn setpoint_follows_phase(l in 0.05..0.2f64, p in 0.0..0.04f64) {
        prop_assert_eq!(leg_setpoint(Phase::Stance, l, p), l);
        prop_assert!((leg_setpoint(Phase::Flight, l, p) - (l - p)).abs() <= 1e-15);
    }

    #[test]
    fn precompression_stores_budget(k in 1000.0..8000.0f64, e in 0.05..3.0f64) {
        let h = HopperParams::new(2.5, 0.3, 0.5, k, 35.0).unwrap();
        let p = precompression_from_energy(&EnergyBudget::new(e).unwrap(), &h).unwrap();
        prop_assert!((0.5 * k * p * p - e).abs() <= 1e-12 * e);
    }

    #[test]
    fn steady_stats_shift_invariant(
        apex in prop::collection::vec(0.001..0.05f64, 12..30),
        shift in -0.01..0.01f64,
    ) {
        let rec = |a: &[f64]| -> Vec<HopRecord<f64>> {
            a.iter().enumerate().map(|(i, &h)| HopRecord {
                index: i,
                touchdown_time: i as f64,
                liftoff_time: i as f64,
                apex_time: i as f64,
                apex_height: h,
                injected_energy: 0.0,
                dissipated_energy: 0.0,
            }).collect()
        };
        let cfg = EpisodeConfig::<f64>::default();
        let a = steady_state_apex(&rec(&apex), &cfg).unwrap();
        let shifted: Vec<f64> = apex.iter().map(|h| h + shift).collect();
        let b = steady_state_apex(&rec(&shifted), &cfg).unwrap();
        prop_assert!((b.mean - a.mean - shift).abs() < 1e-12);
        prop_assert!((b.std - a.std).abs() < 1e-12);
    }

    #[test]
    fn grid_range_is_inclusive(start in 0.0..100.0f64, step in 0.5..10.0f64, n in 0usize..40) {
        let end = start + step * n as f64;
        let r = GridRange::new(start, step, end).unwrap();
        let v = r.values();
        prop_assert_eq!(v.len(), n + 1);
        prop_assert!((v[n] - end).abs() <= 1e-9 * end.abs().max(1.0));
    }

    #[test]
    fn winners_respect_tie_threshold(
        apex in prop::collection::vec(prop::option::of(0.0..0.05f64), 1..6),
        tie in 0.0..0.005f64,
    ) {
        let outcomes: Vec<(f64, Option<f64>)> = apex
            .iter()
            .enumerate()
            .map(|(i, a)| (1000.0 * (i + 1) as f64, *a))
            .collect();
        let cell = CellResult::new(0.0, 0.0, outcomes.clone(), tie);
        match cell.best_apex() {
            None => prop_assert!(cell.winners.is_empty()),
            Some(best) => {
                for (k, a) in outcomes {
                    let wins = cell.winners.contains(&k);
                    prop_assert_eq!(wins, a.is_some_and(|a| a >= best - tie));
                }
                prop_assert!(cell.winners.windows(2).all(|w| w[0] < w[1]));
            }
        }
    }

    #[test]
    fn select_on_grid_point_returns_softest_winner(
        i in 0usize..4, j in 0usize..3,
        sets in prop::collection::vec(prop::collection::btree_set(0usize..3, 1..3), 12),
    ) {
        let legs = [3000.0, 4000.0, 5000.0];
        let map = WinnerMap {
            ground_stiffness: vec![2400.0, 2600.0, 2800.0, 3000.0],
            ground_damping: vec![15.0, 20.0, 25.0],
            cells: sets.iter().map(|s| s.iter().map(|&n| legs[n]).collect()).collect(),
        };
        let q = GroundProfile::new(map.ground_stiffness[i], map.ground_damping[j]).unwrap();
        let expected = legs[*sets[i * 3 + j].iter().next().unwrap()];
        prop_assert_eq!(select_stiffness(&map, &q).unwrap(), expected);
    }

    #[test]
    fn jacobian_matches_finite_difference(
        theta in -3.0..3.0f64,
        l1 in 0.02..0.15f64,
        extra in 0.01..0.2f64,
    ) {
        let g = LinkageGeometry::new(l1, l1 + extra).unwrap();
        let h = 1e-6;
        let fd = (forward_kinematics(theta + h, &g) - forward_kinematics(theta - h, &g)) / (2.0 * h);
        let j = kinematic_jacobian(theta, &g);
        prop_assert!((j - fd).abs() <= 1e-6 * j.abs().max(1e-3), "{j} vs {fd}");
        prop_assert!((forward_kinematics(-theta, &g) - forward_kinematics(theta, &g)).abs() < 1e-15);
    }

    #[test]
    fn torque_is_linear_in_force(theta in -3.0..3.0f64, f in -100.0..100.0f64, s in -5.0..5.0f64) {
        let g = LinkageGeometry::new(0.1, 0.2).unwrap();
        let a = motor_torque(s * f, theta, &g);
        let b = s * motor_torque(f, theta, &g);
        prop_assert!((a - b).abs() <= 1e-12 * (a.abs() + 1.0));
    }

    #[test]
    fn calibration_is_affine_equivariant(
        slope in 0.5..2.0f64,
        intercept in -300.0..300.0f64,
        scale in 0.1..10.0f64,
    ) {
        let gains = [(1000.0, 10.0), (2000.0, 20.0), (3500.0, 45.0), (5000.0, 70.0)];
        let fits = |s: f64| -> Vec<(PdGains<f64>, OscillatorFit)> {
            gains.iter().enumerate().map(|(n, &(kp, kd))| {
                let kg = s * (slope * kp + intercept + if n % 2 == 0 { 7.0 } else { -7.0 });
                let dg = s * (0.9 * kd + 2.0);
                let params = OscillatorParams { amplitude: 0.01, alpha: kg, beta: dg / 2.0, phase: 0.0, offset: None };
                let fit = OscillatorFit {
                    params,
                    mass: 1.0,
                    residual_rms: 0.0,
                    r_squared: 1.0,
                    iterations: 1,
                    accepted: true,
                    ground_stiffness: kg,
                    ground_damping: dg,
                };
                (PdGains::new(kp, kd).unwrap(), fit)
            }).collect()
        };
        let a = calibrate_gain_maps(&fits(1.0)).unwrap();
        let b = calibrate_gain_maps(&fits(scale)).unwrap();
        prop_assert!((b.stiffness.slope - scale * a.stiffness.slope).abs() <= 1e-9 * b.stiffness.slope.abs());
        prop_assert!((b.stiffness.intercept - scale * a.stiffness.intercept).abs() <= 1e-7 * (b.stiffness.intercept.abs() + 1.0));
        prop_assert!((b.damping.slope - scale * a.damping.slope).abs() <= 1e-9 * b.damping.slope.abs());
        prop_assert!((b.damping.intercept - scale * a.damping.intercept).abs() <= 1e-9 * (b.damping.intercept.abs() + 1.0));
    }
}
