mod common;

use common::Cell;
use hopper_core::integrator::{integrate_phase, EventSpec, IntegratorConfig};
use hopper_core::model::{
    mechanical_energy, phase_rhs, EnergyBudget, GroundProfile, HopperParams, HybridState, Phase,
};
use hopper_core::sim::{run_episode, EpisodeConfig, EpisodeOutcome, EpisodeStatus, GuardMode};

fn hopper(k_l: f64, d_l: f64) -> HopperParams<f64> {
    HopperParams::new(2.5, 0.3, 0.0975, 4000.0, 35.0)
        .unwrap()
        .with_leg(k_l, d_l)
        .unwrap()
}

fn run(
    k_l: f64,
    d_l: f64,
    k_g: f64,
    d_g: f64,
    e: f64,
    cfg: EpisodeConfig<f64>,
) -> EpisodeOutcome<f64> {
    run_episode(
        &hopper(k_l, d_l),
        &GroundProfile::new(k_g, d_g).unwrap(),
        &EnergyBudget::new(e).unwrap(),
        &cfg,
        &IntegratorConfig::default(),
    )
    .unwrap()
}

fn limit_cycle(drop: f64) -> EpisodeOutcome<f64> {
    run(
        4300.0,
        35.0,
        4400.0,
        35.0,
        1.5,
        EpisodeConfig {
            drop_height: drop,
            ..EpisodeConfig::default()
        },
    )
}

#[test]
fn undamped_flight_conserves_energy() {
    let h = hopper(4000.0, 0.0);
    let ground = GroundProfile::new(3800.0, 45.0).unwrap();
    let p = 0.02;
    let y0 = [0.25, 0.8, 0.2, -1.1];
    let start = HybridState::from_vector(Phase::Flight, 0.0, &y0, p);
    let e0 = mechanical_energy(&start, &h, &ground);
    let none: [EventSpec<f64, 4>; 0] = [];
    let traj = integrate_phase(
        0.0,
        y0,
        |_t, y: &[f64; 4]| phase_rhs(Phase::Flight, p, &h, &ground, y),
        &none,
        &IntegratorConfig {
            rel_tol: 1e-12,
            abs_tol: 1e-14,
            max_phase_duration: 0.2,
            ..IntegratorConfig::default()
        },
    )
    .unwrap();
    assert!(traj.samples.len() > 100);
    let worst = traj.samples.iter().map(|(t, y)| {
        let e = mechanical_energy(&HybridState::from_vector(Phase::Flight, *t, y, p), &h, &ground);
        (e - e0).abs()
    }).fold(0.0, f64::max);
    let (t, y) = traj.terminal();
    let e1 = mechanical_energy(&HybridState::from_vector(Phase::Flight, t, &y, p), &h, &ground);
    assert!((e1 - e0).abs() < 1e-9, "terminal drift {}", e1 - e0);
    assert!(worst < 1e-9, "worst drift {worst}");
}

fn stance_error(rel_tol: f64) -> f64 {
    let c = Cell::new(4000.0, 35.0, 3800.0, 45.0, 1.0);
    let h = hopper(c.k_l, c.d_l);
    let ground = GroundProfile::new(c.k_g, c.d_g).unwrap();
    let p = c.precompression();
    let y0 = [0.1, -0.9, 0.0, -0.9];
    let duration = 0.05;
    let none: [EventSpec<f64, 4>; 0] = [];
    let cfg = IntegratorConfig {
        rel_tol,
        abs_tol: rel_tol * 1e-2,
        max_step: 1.0,
        max_phase_duration: duration,
        ..IntegratorConfig::default()
    };
    let traj = integrate_phase(
        0.0,
        y0,
        |_t, y: &[f64; 4]| phase_rhs(Phase::Stance, p, &h, &ground, y),
        &none,
        &cfg,
    )
    .unwrap();
    let (_, y) = traj.terminal();
    let mut r = y0;
    let dt = 1e-6;
    for _ in 0..(duration / dt).round() as usize {
        r = common::rk4(&c, true, &r, dt);
    }
    (y[0] - r[0]).abs().max((y[2] - r[2]).abs())
}

#[test]
fn tighter_tolerance_reduces_error() {
    let coarse = stance_error(1e-5);
    let fine = stance_error(1e-6);
    assert!(coarse > 0.0);
    assert!(fine * 4.0 <= coarse, "coarse {coarse:e}, fine {fine:e}");
}

#[test]
fn limit_cycle_independent_of_drop_height() {
    let means: Vec<f64> = [0.03, 0.06, 0.1, 0.15]
        .iter()
        .map(|&d| {
            let out = limit_cycle(d);
            assert_eq!(out.status, EpisodeStatus::SteadyHopping);
            out.steady_mean().unwrap()
        })
        .collect();
    for m in &means {
        assert!((m - means[0]).abs() < 1e-6, "{means:?}");
    }
    assert!((means[0] - 0.011_614_93).abs() < 1e-7);
}

#[test]
fn apex_decays_monotonically_from_high_drop() {
    let out = limit_cycle(0.1);
    let apex = out.apex_heights();
    let settled = apex.iter().position(|a| (a - apex[apex.len() - 1]).abs() < 1e-9).unwrap();
    for w in apex[..settled].windows(2) {
        assert!(w[1] < w[0], "{w:?}");
    }
}

#[test]
fn phases_alternate_and_time_increases() {
    let out = run(
        4300.0,
        35.0,
        4400.0,
        35.0,
        1.5,
        EpisodeConfig {
            record_trajectory: true,
            ..EpisodeConfig::default()
        },
    );
    let tr = out.trajectory.unwrap();
    assert_eq!(tr[0].phase, Phase::Flight);
    let mut switches = 0;
    for w in tr.windows(2) {
        assert!(w[1].time >= w[0].time);
        if w[1].phase != w[0].phase {
            switches += 1;
            assert_eq!(w[0].time, w[1].time);
        }
    }
    // drop flight, then stance and flight per hop
    assert_eq!(switches, 2 * out.hops.len());
}

#[test]
fn steady_energy_balance() {
    let cells = [
        (4300.0, 35.0, 4400.0, 35.0, 1.5),
        (3000.0, 30.0, 5000.0, 20.0, 2.25),
        (5000.0, 40.0, 5400.0, 15.0, 1.0),
        (4000.0, 35.0, 3800.0, 25.0, 1.0),
    ];
    for (k_l, d_l, k_g, d_g, e) in cells {
        let out = run(k_l, d_l, k_g, d_g, e, EpisodeConfig::default());
        assert_eq!(out.status, EpisodeStatus::SteadyHopping, "{k_l} {k_g} {d_g}");
        for h in &out.energy[out.energy.len() - 10..] {
            let rel = (h.injected() - h.dissipated()).abs() / h.injected();
            assert!(rel < 0.01, "{k_l} {k_g} {d_g}: {h:?}");
        }
    }
}

#[test]
fn injection_matches_budget() {
    let out = limit_cycle(0.1);
    for h in &out.energy[1..] {
        assert!((h.touchdown_injection - 1.5).abs() < 0.05 * 1.5, "{h:?}");
        assert!((h.liftoff_injection - 1.5).abs() < 0.05 * 1.5, "{h:?}");
    }
}

#[test]
fn first_hop_from_high_drop_loses_energy() {
    let out = limit_cycle(0.15);
    let first = &out.energy[0];
    assert!(first.dissipated() > first.injected());
    assert!(out.apex_heights()[1] < out.apex_heights()[0]);
}

#[test]
fn zero_damping_has_no_viscous_loss() {
    let out = run(4000.0, 0.0, 4000.0, 0.0, 1.0, EpisodeConfig::default());
    assert!(!out.energy.is_empty());
    for h in &out.energy {
        assert_eq!(h.leg_damping_loss, 0.0);
        assert_eq!(h.ground_damping_loss, 0.0);
        assert!(h.dissipated() >= 0.0);
        assert_eq!(h.dissipated(), h.ground_residual);
    }
}

#[test]
fn undamped_system_does_not_settle() {
    let out = run(4000.0, 0.0, 4000.0, 0.0, 1.0, EpisodeConfig::default());
    assert_ne!(out.status, EpisodeStatus::SteadyHopping);
}

#[test]
fn experiment_mode_uses_fixed_stance_time() {
    let out = run(
        4300.0,
        35.0,
        4400.0,
        35.0,
        1.5,
        EpisodeConfig {
            guard_mode: GuardMode::Experiment,
            ..EpisodeConfig::default()
        },
    );
    assert!(!out.hops.is_empty());
    for h in &out.hops {
        assert!((h.liftoff_time - h.touchdown_time - 0.150).abs() < 1e-9, "{h:?}");
    }
}

#[test]
fn stiff_leg_fails_on_soft_damped_ground() {
    let out = run(5000.0, 35.0, 2400.0, 75.0, 1.0, EpisodeConfig::default());
    assert_eq!(out.status, EpisodeStatus::FailedLiftoff);
    assert!(out.failure.is_some());
}

#[test]
fn single_precision_tracks_double() {
    let h32 = HopperParams::<f32>::new(2.5, 0.3, 0.0975, 4300.0, 35.0).unwrap();
    let out32 = run_episode(
        &h32,
        &GroundProfile::new(4400.0f32, 35.0).unwrap(),
        &EnergyBudget::new(1.5f32).unwrap(),
        &EpisodeConfig {
            max_hops: 30,
            steady_std_tol: 1e-4,
            ..EpisodeConfig::default()
        },
        &IntegratorConfig {
            rel_tol: 1e-5,
            abs_tol: 1e-7,
            event_time_tol: 1e-6,
            ..IntegratorConfig::default()
        },
    )
    .unwrap();
    let out64 = limit_cycle(0.1);
    assert_eq!(out32.status, EpisodeStatus::SteadyHopping);
    let a32 = out32.steady_mean().unwrap() as f64;
    assert!((a32 - out64.steady_mean().unwrap()).abs() < 1e-4, "{a32}");
}
