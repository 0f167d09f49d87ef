//! Multi-hop episodes of the flight/stance state machine.
//!
//! Flight runs with the leg setpoint at `rest_length - precompression` until
//! the toe descends through the ground surface. Stance runs with the setpoint
//! at `rest_length` until the leg is back at rest length (or, in experiment
//! mode, until a fixed time has elapsed). The setpoint switch at touchdown
//! injects the input energy; the switch back at liftoff retracts the leg.
//!
//! A hop is the interval from one touchdown to the next; its apex is the
//! highest body position in the flight that follows the stance.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::integrator::{
    integrate_phase, Direction, EventSpec, IntegrationError, IntegratorConfig, PhaseEnd,
};
use crate::model::{
    flight_equilibrium_drop_state, leg_setpoint, mechanical_energy, phase_rhs,
    precompression_from_energy, EnergyBudget, GroundProfile, HopperParams, HybridState, ModelError,
    Phase,
};
use crate::real::Real;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SimError {
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Integrator(#[from] IntegrationError),
    #[error("invalid episode configuration: {0}")]
    InvalidConfig(String),
    #[error("need at least {needed} hops for steady-state statistics, have {available}")]
    InsufficientHops { needed: usize, available: usize },
    #[error("energy audit needs a recorded trajectory")]
    MissingTrajectory,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GuardMode {
    /// Stance ends when the leg is back at rest length.
    Simulation,
    /// Stance ends after a fixed duration, as on the hardware.
    Experiment,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpisodeConfig<T> {
    pub max_hops: usize,
    pub steady_window: usize,
    pub steady_std_tol: T,
    /// Initial toe height above the ground surface.
    pub drop_height: T,
    pub guard_mode: GuardMode,
    pub stance_fixed_duration: T,
    pub max_stance_duration: T,
    /// Hops ignored by the steady-state statistics.
    pub skip_initial_hops: usize,
    /// End stance early when the ground would pull on the toe.
    pub non_sticking_ground: bool,
    /// Two touchdowns closer than this are treated as chatter.
    pub min_touchdown_interval: T,
    pub record_trajectory: bool,
}

impl<T: Real> Default for EpisodeConfig<T> {
    fn default() -> Self {
        Self {
            max_hops: 60,
            steady_window: 10,
            steady_std_tol: T::lit(1e-6),
            drop_height: T::lit(0.1),
            guard_mode: GuardMode::Simulation,
            stance_fixed_duration: T::lit(0.150),
            max_stance_duration: T::lit(0.5),
            skip_initial_hops: 0,
            non_sticking_ground: false,
            min_touchdown_interval: T::lit(1e-3),
            record_trajectory: false,
        }
    }
}

impl<T: Real> EpisodeConfig<T> {
    pub fn validate(&self) -> Result<(), SimError> {
        let bad = |msg: String| Err(SimError::InvalidConfig(msg));
        if self.steady_window < 2 {
            return bad("steady_window must be at least 2".into());
        }
        if self.max_hops <= self.steady_window + self.skip_initial_hops {
            return bad(format!(
                "max_hops ({}) must exceed steady_window + skip_initial_hops ({})",
                self.max_hops,
                self.steady_window + self.skip_initial_hops
            ));
        }
        let positive = [
            ("steady_std_tol", self.steady_std_tol),
            ("drop_height", self.drop_height),
            ("stance_fixed_duration", self.stance_fixed_duration),
            ("max_stance_duration", self.max_stance_duration),
            ("min_touchdown_interval", self.min_touchdown_interval),
        ];
        for (name, v) in positive {
            if !(v.is_finite() && v > T::zero()) {
                return bad(format!("{name} must be positive, got {v}"));
            }
        }
        Ok(())
    }
}

/// Per-hop summary. Times are absolute episode times.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct HopRecord<T> {
    pub index: usize,
    pub touchdown_time: T,
    pub liftoff_time: T,
    pub apex_time: T,
    /// Highest body position in the following flight, above standing rest.
    pub apex_height: T,
    pub injected_energy: T,
    pub dissipated_energy: T,
}

/// Energy flows over one hop (touchdown to next touchdown).
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize)]
pub struct HopEnergy<T> {
    /// Leg spring energy added by the setpoint switch at touchdown.
    pub touchdown_injection: T,
    /// Leg spring energy added by the retraction switch at liftoff.
    pub liftoff_injection: T,
    pub leg_damping_loss: T,
    pub ground_damping_loss: T,
    /// Ground spring energy left behind when the toe leaves.
    pub ground_residual: T,
}

impl<T: Real> HopEnergy<T> {
    pub fn injected(&self) -> T {
        self.touchdown_injection + self.liftoff_injection
    }

    pub fn dissipated(&self) -> T {
        self.leg_damping_loss + self.ground_damping_loss + self.ground_residual
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum EpisodeStatus {
    SteadyHopping,
    FailedLiftoff,
    NoConvergence,
    NumericalFailure,
}

impl EpisodeStatus {
    pub fn as_str(self) -> &'static str {
        match self {
            EpisodeStatus::SteadyHopping => "SteadyHopping",
            EpisodeStatus::FailedLiftoff => "FailedLiftoff",
            EpisodeStatus::NoConvergence => "NoConvergence",
            EpisodeStatus::NumericalFailure => "NumericalFailure",
        }
    }

    pub fn is_success(self) -> bool {
        self == EpisodeStatus::SteadyHopping
    }
}

/// Why an episode stopped early.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum FailureReason {
    /// Leg never returned to rest length within the stance limit.
    StanceTimeout { hop: usize, time: f64 },
    /// The body did not rise above standing rest height after liftoff.
    NoRise { hop: usize, apex_height: f64 },
    /// Touchdowns closer together than the chatter interval.
    Chatter { hop: usize, interval: f64 },
    FlightTimeout { time: f64 },
    Integration { message: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SteadyStats<T> {
    pub mean: T,
    pub std: T,
    pub is_steady: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EpisodeOutcome<T> {
    pub status: EpisodeStatus,
    pub failure: Option<FailureReason>,
    pub precompression: T,
    /// Statistics over the last window, when enough hops completed.
    pub steady: Option<SteadyStats<T>>,
    pub hops: Vec<HopRecord<T>>,
    pub energy: Vec<HopEnergy<T>>,
    pub trajectory: Option<Vec<HybridState<T>>>,
}

impl<T: Real> EpisodeOutcome<T> {
    pub fn steady_mean(&self) -> Option<T> {
        self.steady.map(|s| s.mean)
    }

    pub fn steady_std(&self) -> Option<T> {
        self.steady.map(|s| s.std)
    }

    pub fn apex_heights(&self) -> Vec<T> {
        self.hops.iter().map(|h| h.apex_height).collect()
    }
}

/// Mean and sample standard deviation of the last `steady_window` apex
/// heights, after skipping `skip_initial_hops`.
pub fn steady_state_apex<T: Real>(
    records: &[HopRecord<T>],
    cfg: &EpisodeConfig<T>,
) -> Result<SteadyStats<T>, SimError> {
    let usable = &records[cfg.skip_initial_hops.min(records.len())..];
    let n = cfg.steady_window;
    if n < 2 || usable.len() < n {
        return Err(SimError::InsufficientHops {
            needed: n.max(2) + cfg.skip_initial_hops,
            available: records.len(),
        });
    }
    let window = &usable[usable.len() - n..];
    let count = T::lit(n as f64);
    let mean = window.iter().map(|r| r.apex_height).sum::<T>() / count;
    let var = window
        .iter()
        .map(|r| (r.apex_height - mean).powi(2))
        .sum::<T>()
        / (count - T::one());
    let std = var.sqrt();
    Ok(SteadyStats {
        mean,
        std,
        is_steady: std <= cfg.steady_std_tol,
    })
}

fn to_states<T: Real>(
    phase: Phase,
    precompression: T,
    samples: &[(T, [T; 4])],
) -> Vec<HybridState<T>> {
    samples
        .iter()
        .map(|(t, y)| HybridState::from_vector(phase, *t, y, precompression))
        .collect()
}

/// Trapezoidal leg and ground damping losses over the samples of one phase.
fn phase_losses<T: Real>(
    states: &[HybridState<T>],
    hopper: &HopperParams<T>,
    ground: &GroundProfile<T>,
) -> (T, T) {
    let half = T::lit(0.5);
    let leg_rate = |s: &HybridState<T>| {
        let dv = s.body_vel - s.toe_vel;
        hopper.leg_damping() * dv * dv
    };
    let ground_rate = |s: &HybridState<T>| match s.phase {
        Phase::Stance => ground.damping() * s.toe_vel * s.toe_vel,
        Phase::Flight => T::zero(),
    };
    let mut leg = T::zero();
    let mut grd = T::zero();
    for w in states.windows(2) {
        let dt = w[1].time - w[0].time;
        leg += half * dt * (leg_rate(&w[0]) + leg_rate(&w[1]));
        grd += half * dt * (ground_rate(&w[0]) + ground_rate(&w[1]));
    }
    (leg, grd)
}

fn spring_energy<T: Real>(hopper: &HopperParams<T>, length: T, setpoint: T) -> T {
    let s = length - setpoint;
    T::lit(0.5) * hopper.leg_stiffness() * s * s
}

/// Energy added at the flight-to-stance switch.
fn touchdown_jump<T: Real>(
    before: &HybridState<T>,
    hopper: &HopperParams<T>,
    ground: &GroundProfile<T>,
) -> T {
    let after = HybridState {
        phase: Phase::Stance,
        ..*before
    };
    mechanical_energy(&after, hopper, ground) - mechanical_energy(before, hopper, ground)
}

/// Leg spring jump and abandoned ground spring energy at the stance-to-flight
/// switch.
fn liftoff_jump<T: Real>(
    before: &HybridState<T>,
    hopper: &HopperParams<T>,
    ground: &GroundProfile<T>,
) -> (T, T) {
    let l = hopper.rest_length();
    let p = before.precompression;
    let len = before.leg_length();
    let spring = spring_energy(hopper, len, leg_setpoint(Phase::Flight, l, p))
        - spring_energy(hopper, len, leg_setpoint(Phase::Stance, l, p));
    let residual = T::lit(0.5) * ground.stiffness() * before.toe_pos * before.toe_pos;
    (spring, residual)
}

/// Per-hop injected and dissipated energy reconstructed from a recorded
/// trajectory. Only hops closed by a following touchdown are reported.
pub fn energy_audit<T: Real>(
    trajectory: Option<&[HybridState<T>]>,
    hopper: &HopperParams<T>,
    ground: &GroundProfile<T>,
) -> Result<Vec<HopEnergy<T>>, SimError> {
    let traj = trajectory.ok_or(SimError::MissingTrajectory)?;
    let mut hops = Vec::new();
    let mut current: Option<HopEnergy<T>> = None;
    let mut segment_start = 0;
    for i in 1..=traj.len() {
        let boundary = i == traj.len() || traj[i].phase != traj[i - 1].phase;
        if !boundary {
            continue;
        }
        let segment = &traj[segment_start..i];
        if let Some(hop) = current.as_mut() {
            let (leg, grd) = phase_losses(segment, hopper, ground);
            hop.leg_damping_loss += leg;
            hop.ground_damping_loss += grd;
        }
        if i < traj.len() {
            let before = &traj[i - 1];
            match (before.phase, traj[i].phase) {
                (Phase::Flight, Phase::Stance) => {
                    if let Some(done) = current.take() {
                        hops.push(done);
                    }
                    current = Some(HopEnergy {
                        touchdown_injection: touchdown_jump(before, hopper, ground),
                        ..Default::default()
                    });
                }
                (Phase::Stance, Phase::Flight) => {
                    if let Some(hop) = current.as_mut() {
                        let (spring, residual) = liftoff_jump(before, hopper, ground);
                        hop.liftoff_injection = spring;
                        hop.ground_residual = residual;
                    }
                }
                _ => {}
            }
        }
        segment_start = i;
    }
    Ok(hops)
}

struct FlightSummary<T> {
    end: PhaseEnd,
    terminal: HybridState<T>,
    apex_time: T,
    apex_body: T,
    states: Vec<HybridState<T>>,
}

fn run_flight<T: Real>(
    start: &HybridState<T>,
    hopper: &HopperParams<T>,
    ground: &GroundProfile<T>,
    icfg: &IntegratorConfig<T>,
) -> Result<FlightSummary<T>, IntegrationError> {
    let p = start.precompression;
    let events = [
        EventSpec::terminal(Direction::Falling, |_t, y: &[T; 4]| y[2]),
        EventSpec::recording(Direction::Falling, |_t, y: &[T; 4]| y[1]),
    ];
    let traj = integrate_phase(
        start.time,
        start.vector(),
        |_t, y: &[T; 4]| phase_rhs(Phase::Flight, p, hopper, ground, y),
        &events,
        icfg,
    )?;
    let states = to_states(Phase::Flight, p, &traj.samples);
    let first = states[0];
    let terminal = *states.last().expect("non-empty");
    let mut apex_time = first.time;
    let mut apex_body = first.body_pos;
    let candidates = traj
        .hits
        .iter()
        .map(|h| (h.time, h.state[0]))
        .chain(std::iter::once((terminal.time, terminal.body_pos)));
    for (t, x) in candidates {
        if x > apex_body {
            apex_time = t;
            apex_body = x;
        }
    }
    Ok(FlightSummary {
        end: traj.end,
        terminal,
        apex_time,
        apex_body,
        states,
    })
}

struct StanceSummary<T> {
    end: PhaseEnd,
    terminal: HybridState<T>,
    states: Vec<HybridState<T>>,
}

fn run_stance<T: Real>(
    start: &HybridState<T>,
    hopper: &HopperParams<T>,
    ground: &GroundProfile<T>,
    cfg: &EpisodeConfig<T>,
    icfg: &IntegratorConfig<T>,
) -> Result<StanceSummary<T>, IntegrationError> {
    let p = start.precompression;
    let l = hopper.rest_length();
    let (kg, dg) = (ground.stiffness(), ground.damping());
    let mut events = Vec::new();
    let mut stance_cfg = *icfg;
    match cfg.guard_mode {
        GuardMode::Simulation => {
            events.push(EventSpec::terminal(Direction::Rising, move |_t, y: &[T; 4]| {
                (y[0] - y[2]) - l
            }));
            stance_cfg.max_phase_duration = cfg.max_stance_duration;
        }
        GuardMode::Experiment => {
            stance_cfg.max_phase_duration = cfg.stance_fixed_duration;
        }
    }
    if cfg.non_sticking_ground {
        events.push(EventSpec::terminal(Direction::Falling, move |_t, y: &[T; 4]| {
            -kg * y[2] - dg * y[3]
        }));
    }
    let traj = integrate_phase(
        start.time,
        start.vector(),
        |_t, y: &[T; 4]| phase_rhs(Phase::Stance, p, hopper, ground, y),
        &events,
        &stance_cfg,
    )?;
    let states = to_states(Phase::Stance, p, &traj.samples);
    let terminal = *states.last().expect("non-empty");
    Ok(StanceSummary {
        end: traj.end,
        terminal,
        states,
    })
}

/// Runs the hybrid state machine from a hanging drop until `max_hops` hops
/// have completed or the hopper fails.
pub fn run_episode<T: Real>(
    hopper: &HopperParams<T>,
    ground: &GroundProfile<T>,
    energy: &EnergyBudget<T>,
    cfg: &EpisodeConfig<T>,
    icfg: &IntegratorConfig<T>,
) -> Result<EpisodeOutcome<T>, SimError> {
    cfg.validate()?;
    icfg.validate()?;
    let p = precompression_from_energy(energy, hopper)?;
    let start = flight_equilibrium_drop_state(hopper, p, cfg.drop_height)?;
    let rest = hopper.rest_body_height();

    let mut trajectory = cfg.record_trajectory.then(Vec::new);
    let mut hops: Vec<HopRecord<T>> = Vec::new();
    let mut energies: Vec<HopEnergy<T>> = Vec::new();

    let finish = |status: EpisodeStatus,
                  failure: Option<FailureReason>,
                  hops: Vec<HopRecord<T>>,
                  energy: Vec<HopEnergy<T>>,
                  trajectory: Option<Vec<HybridState<T>>>| {
        let steady = steady_state_apex(&hops, cfg).ok();
        let status = match status {
            EpisodeStatus::SteadyHopping if !steady.is_some_and(|s| s.is_steady) => {
                EpisodeStatus::NoConvergence
            }
            other => other,
        };
        EpisodeOutcome {
            status,
            failure,
            precompression: p,
            steady,
            hops,
            energy,
            trajectory,
        }
    };
    let numerical = |e: IntegrationError| {
        Some(FailureReason::Integration {
            message: e.to_string(),
        })
    };

    let drop = match run_flight(&start, hopper, ground, icfg) {
        Ok(f) => f,
        Err(e) => {
            return Ok(finish(
                EpisodeStatus::NumericalFailure,
                numerical(e),
                hops,
                energies,
                trajectory,
            ))
        }
    };
    if let Some(tr) = trajectory.as_mut() {
        tr.extend_from_slice(&drop.states);
    }
    if drop.end == PhaseEnd::Timeout {
        let reason = FailureReason::FlightTimeout {
            time: drop.terminal.time.to_f64_lossy(),
        };
        return Ok(finish(
            EpisodeStatus::NumericalFailure,
            Some(reason),
            hops,
            energies,
            trajectory,
        ));
    }

    let mut touchdown = drop.terminal;
    let mut last_touchdown_time: Option<T> = None;
    loop {
        let index = hops.len();
        if let Some(prev) = last_touchdown_time {
            let interval = touchdown.time - prev;
            if interval < cfg.min_touchdown_interval {
                let reason = FailureReason::Chatter {
                    hop: index,
                    interval: interval.to_f64_lossy(),
                };
                return Ok(finish(
                    EpisodeStatus::FailedLiftoff,
                    Some(reason),
                    hops,
                    energies,
                    trajectory,
                ));
            }
        }
        last_touchdown_time = Some(touchdown.time);

        let mut hop_energy = HopEnergy {
            touchdown_injection: touchdown_jump(&touchdown, hopper, ground),
            ..Default::default()
        };
        let stance_start = HybridState {
            phase: Phase::Stance,
            ..touchdown
        };
        let stance = match run_stance(&stance_start, hopper, ground, cfg, icfg) {
            Ok(s) => s,
            Err(e) => {
                return Ok(finish(
                    EpisodeStatus::NumericalFailure,
                    numerical(e),
                    hops,
                    energies,
                    trajectory,
                ))
            }
        };
        if let Some(tr) = trajectory.as_mut() {
            tr.extend_from_slice(&stance.states);
        }
        if stance.end == PhaseEnd::Timeout && cfg.guard_mode == GuardMode::Simulation {
            let reason = FailureReason::StanceTimeout {
                hop: index,
                time: stance.terminal.time.to_f64_lossy(),
            };
            return Ok(finish(
                EpisodeStatus::FailedLiftoff,
                Some(reason),
                hops,
                energies,
                trajectory,
            ));
        }
        let (leg, grd) = phase_losses(&stance.states, hopper, ground);
        hop_energy.leg_damping_loss += leg;
        hop_energy.ground_damping_loss += grd;
        let liftoff = stance.terminal;
        let (spring, residual) = liftoff_jump(&liftoff, hopper, ground);
        hop_energy.liftoff_injection = spring;
        hop_energy.ground_residual = residual;

        let flight_start = HybridState {
            phase: Phase::Flight,
            ..liftoff
        };
        let flight = match run_flight(&flight_start, hopper, ground, icfg) {
            Ok(f) => f,
            Err(e) => {
                return Ok(finish(
                    EpisodeStatus::NumericalFailure,
                    numerical(e),
                    hops,
                    energies,
                    trajectory,
                ))
            }
        };
        if let Some(tr) = trajectory.as_mut() {
            tr.extend_from_slice(&flight.states);
        }
        if flight.end == PhaseEnd::Timeout {
            let reason = FailureReason::FlightTimeout {
                time: flight.terminal.time.to_f64_lossy(),
            };
            return Ok(finish(
                EpisodeStatus::NumericalFailure,
                Some(reason),
                hops,
                energies,
                trajectory,
            ));
        }
        let apex_height = flight.apex_body - rest;
        if apex_height <= T::zero() {
            let reason = FailureReason::NoRise {
                hop: index,
                apex_height: apex_height.to_f64_lossy(),
            };
            return Ok(finish(
                EpisodeStatus::FailedLiftoff,
                Some(reason),
                hops,
                energies,
                trajectory,
            ));
        }
        let (leg, _) = phase_losses(&flight.states, hopper, ground);
        hop_energy.leg_damping_loss += leg;

        hops.push(HopRecord {
            index,
            touchdown_time: touchdown.time,
            liftoff_time: liftoff.time,
            apex_time: flight.apex_time,
            apex_height,
            injected_energy: hop_energy.injected(),
            dissipated_energy: hop_energy.dissipated(),
        });
        energies.push(hop_energy);
        if hops.len() >= cfg.max_hops {
            break;
        }
        touchdown = flight.terminal;
    }
    Ok(finish(
        EpisodeStatus::SteadyHopping,
        None,
        hops,
        energies,
        trajectory,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn record(index: usize, apex: f64) -> HopRecord<f64> {
        HopRecord {
            index,
            touchdown_time: index as f64,
            liftoff_time: index as f64 + 0.1,
            apex_time: index as f64 + 0.2,
            apex_height: apex,
            injected_energy: 0.0,
            dissipated_energy: 0.0,
        }
    }

    #[test]
    fn steady_constant_sequence() {
        let recs: Vec<_> = (0..10).map(|i| record(i, 0.05)).collect();
        let s = steady_state_apex(&recs, &EpisodeConfig::default()).unwrap();
        assert!((s.mean - 0.05).abs() < 1e-15);
        assert!(s.std < 1e-15);
        assert!(s.is_steady);
    }

    #[test]
    fn steady_alternating_sequence() {
        let recs: Vec<_> = (0..10)
            .map(|i| record(i, if i % 2 == 0 { 0.05 } else { 0.06 }))
            .collect();
        let s = steady_state_apex(&recs, &EpisodeConfig::default()).unwrap();
        assert!((s.std - 5.270_462_766_947_3e-3).abs() < 1e-12, "{}", s.std);
        assert!(!s.is_steady);
    }

    #[test]
    fn steady_needs_window() {
        let recs: Vec<_> = (0..9).map(|i| record(i, 0.05)).collect();
        assert!(matches!(
            steady_state_apex(&recs, &EpisodeConfig::default()),
            Err(SimError::InsufficientHops { .. })
        ));
        let cfg = EpisodeConfig {
            skip_initial_hops: 3,
            ..Default::default()
        };
        let recs: Vec<_> = (0..12).map(|i| record(i, 0.05)).collect();
        assert!(steady_state_apex(&recs, &cfg).is_err());
    }

    #[test]
    fn config_validation() {
        let cfg = EpisodeConfig::<f64> {
            max_hops: 10,
            ..Default::default()
        };
        assert!(cfg.validate().is_err());
        let cfg = EpisodeConfig::<f64> {
            drop_height: 0.0,
            ..Default::default()
        };
        assert!(cfg.validate().is_err());
        assert!(EpisodeConfig::<f64>::default().validate().is_ok());
    }

    #[test]
    fn audit_requires_trajectory() {
        let h = HopperParams::new(2.5, 0.3, 0.0975, 4000.0, 35.0).unwrap();
        let g = GroundProfile::new(3800.0, 45.0).unwrap();
        assert_eq!(
            energy_audit::<f64>(None, &h, &g),
            Err(SimError::MissingTrajectory)
        );
    }
}
