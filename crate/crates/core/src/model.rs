//! Physical model of the two-mass hopper and the spring-damper ground.
//!
//! Coordinates are vertical and positive up. `toe_pos == 0` is the undeformed
//! ground surface, so the touchdown guard is literally `toe_pos = 0`. The body
//! position is measured to the body mass; with the leg at rest length and the
//! toe on undeformed ground the body sits at `rest_length`.
//!
//! The leg is a linear spring-damper whose setpoint depends on the phase:
//! `rest_length - precompression` in flight and `rest_length` in stance. The
//! switch at touchdown releases the stored compression into the hop.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::real::Real;

/// Standard gravity used unless a parameter set overrides it.
pub const GRAVITY: f64 = 9.81;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ModelError {
    #[error("{name} must be finite and strictly positive, got {value}")]
    NotPositive { name: &'static str, value: f64 },
    #[error("{name} must be finite and non-negative, got {value}")]
    Negative { name: &'static str, value: f64 },
    #[error("pre-compression {compression} m is not shorter than the leg ({rest_length} m)")]
    CompressionExceedsLeg { compression: f64, rest_length: f64 },
}

fn positive<T: Real>(name: &'static str, value: T) -> Result<T, ModelError> {
    if value.is_finite() && value > T::zero() {
        Ok(value)
    } else {
        Err(ModelError::NotPositive {
            name,
            value: value.to_f64_lossy(),
        })
    }
}

fn non_negative<T: Real>(name: &'static str, value: T) -> Result<T, ModelError> {
    if value.is_finite() && value >= T::zero() {
        Ok(value)
    } else {
        Err(ModelError::Negative {
            name,
            value: value.to_f64_lossy(),
        })
    }
}

/// Masses, leg geometry and leg spring-damper of the hopper.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HopperParams<T> {
    body_mass: T,
    toe_mass: T,
    rest_length: T,
    leg_stiffness: T,
    leg_damping: T,
    gravity: T,
}

impl<T: Real> HopperParams<T> {
    pub fn new(
        body_mass: T,
        toe_mass: T,
        rest_length: T,
        leg_stiffness: T,
        leg_damping: T,
    ) -> Result<Self, ModelError> {
        Ok(Self {
            body_mass: positive("body_mass", body_mass)?,
            toe_mass: positive("toe_mass", toe_mass)?,
            rest_length: positive("rest_length", rest_length)?,
            leg_stiffness: positive("leg_stiffness", leg_stiffness)?,
            leg_damping: positive("leg_damping", leg_damping)?,
            gravity: T::lit(GRAVITY),
        })
    }

    /// Same hopper with a different leg. Damping may be zero here so that
    /// lossless test systems can be built.
    pub fn with_leg(self, leg_stiffness: T, leg_damping: T) -> Result<Self, ModelError> {
        Ok(Self {
            leg_stiffness: positive("leg_stiffness", leg_stiffness)?,
            leg_damping: non_negative("leg_damping", leg_damping)?,
            ..self
        })
    }

    pub fn with_gravity(self, gravity: T) -> Result<Self, ModelError> {
        Ok(Self {
            gravity: positive("gravity", gravity)?,
            ..self
        })
    }

    pub fn body_mass(&self) -> T {
        self.body_mass
    }
    pub fn toe_mass(&self) -> T {
        self.toe_mass
    }
    pub fn rest_length(&self) -> T {
        self.rest_length
    }
    pub fn leg_stiffness(&self) -> T {
        self.leg_stiffness
    }
    pub fn leg_damping(&self) -> T {
        self.leg_damping
    }
    pub fn gravity(&self) -> T {
        self.gravity
    }
    pub fn total_mass(&self) -> T {
        self.body_mass + self.toe_mass
    }

    /// Body position when standing at rest length on undeformed ground.
    /// Apex heights are reported relative to this.
    pub fn rest_body_height(&self) -> T {
        self.rest_length
    }
}

/// Ground stiffness and damping pair.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GroundProfile<T> {
    stiffness: T,
    damping: T,
}

impl<T: Real> GroundProfile<T> {
    pub fn new(stiffness: T, damping: T) -> Result<Self, ModelError> {
        Ok(Self {
            stiffness: positive("ground_stiffness", stiffness)?,
            damping: non_negative("ground_damping", damping)?,
        })
    }

    pub fn stiffness(&self) -> T {
        self.stiffness
    }
    pub fn damping(&self) -> T {
        self.damping
    }
}

/// Input energy stored in the leg before every touchdown.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnergyBudget<T>(T);

impl<T: Real> EnergyBudget<T> {
    pub fn new(input_energy: T) -> Result<Self, ModelError> {
        positive("input_energy", input_energy).map(Self)
    }

    pub fn input_energy(&self) -> T {
        self.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Phase {
    Flight,
    Stance,
}

impl Phase {
    pub fn as_str(self) -> &'static str {
        match self {
            Phase::Flight => "flight",
            Phase::Stance => "stance",
        }
    }
}

/// Snapshot of the hybrid system.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HybridState<T> {
    pub phase: Phase,
    pub time: T,
    pub body_pos: T,
    pub body_vel: T,
    pub toe_pos: T,
    pub toe_vel: T,
    pub precompression: T,
}

impl<T: Real> HybridState<T> {
    /// Continuous part as `[body_pos, body_vel, toe_pos, toe_vel]`.
    pub fn vector(&self) -> [T; 4] {
        [self.body_pos, self.body_vel, self.toe_pos, self.toe_vel]
    }

    pub fn from_vector(phase: Phase, time: T, y: &[T; 4], precompression: T) -> Self {
        Self {
            phase,
            time,
            body_pos: y[0],
            body_vel: y[1],
            toe_pos: y[2],
            toe_vel: y[3],
            precompression,
        }
    }

    pub fn leg_length(&self) -> T {
        self.body_pos - self.toe_pos
    }
}

/// Leg spring setpoint for a phase.
#[inline]
pub fn leg_setpoint<T: Real>(phase: Phase, rest_length: T, precompression: T) -> T {
    match phase {
        Phase::Flight => rest_length - precompression,
        Phase::Stance => rest_length,
    }
}

/// Compression that stores `energy` in the leg spring: `sqrt(2 E / k_l)`.
pub fn precompression_from_energy<T: Real>(
    energy: &EnergyBudget<T>,
    hopper: &HopperParams<T>,
) -> Result<T, ModelError> {
    let p = (T::lit(2.0) * energy.input_energy() / hopper.leg_stiffness()).sqrt();
    if p >= hopper.rest_length() {
        return Err(ModelError::CompressionExceedsLeg {
            compression: p.to_f64_lossy(),
            rest_length: hopper.rest_length().to_f64_lossy(),
        });
    }
    Ok(p)
}

#[inline]
fn leg_force_raw<T: Real>(hopper: &HopperParams<T>, setpoint: T, y: &[T; 4]) -> T {
    hopper.leg_stiffness * (setpoint - y[0] + y[2]) - hopper.leg_damping * (y[1] - y[3])
}

#[inline]
fn ground_force_raw<T: Real>(ground: &GroundProfile<T>, y: &[T; 4]) -> T {
    -ground.stiffness * y[2] - ground.damping * y[3]
}

/// Internal leg force; positive pushes the body up and the toe down.
pub fn leg_force<T: Real>(state: &HybridState<T>, hopper: &HopperParams<T>) -> T {
    let setpoint = leg_setpoint(state.phase, hopper.rest_length, state.precompression);
    leg_force_raw(hopper, setpoint, &state.vector())
}

/// Ground reaction on the toe. Not clamped: a rebounding ground may pull.
pub fn ground_force<T: Real>(state: &HybridState<T>, ground: &GroundProfile<T>) -> T {
    ground_force_raw(ground, &state.vector())
}

/// Right-hand side of the phase dynamics on the packed state vector.
#[inline]
pub fn phase_rhs<T: Real>(
    phase: Phase,
    precompression: T,
    hopper: &HopperParams<T>,
    ground: &GroundProfile<T>,
    y: &[T; 4],
) -> [T; 4] {
    let setpoint = leg_setpoint(phase, hopper.rest_length, precompression);
    let f_leg = leg_force_raw(hopper, setpoint, y);
    let f_toe = match phase {
        Phase::Flight => -f_leg,
        Phase::Stance => -f_leg + ground_force_raw(ground, y),
    };
    [
        y[1],
        f_leg / hopper.body_mass - hopper.gravity,
        y[3],
        f_toe / hopper.toe_mass - hopper.gravity,
    ]
}

/// Time derivative of `[body_pos, body_vel, toe_pos, toe_vel]`.
pub fn derivatives<T: Real>(
    state: &HybridState<T>,
    hopper: &HopperParams<T>,
    ground: &GroundProfile<T>,
) -> [T; 4] {
    phase_rhs(
        state.phase,
        state.precompression,
        hopper,
        ground,
        &state.vector(),
    )
}

/// Kinetic plus gravitational plus spring energy. The ground spring only
/// counts while in stance.
pub fn mechanical_energy<T: Real>(
    state: &HybridState<T>,
    hopper: &HopperParams<T>,
    ground: &GroundProfile<T>,
) -> T {
    let half = T::lit(0.5);
    let g = hopper.gravity;
    let setpoint = leg_setpoint(state.phase, hopper.rest_length, state.precompression);
    let stretch = state.leg_length() - setpoint;
    let mut e = half * hopper.body_mass * state.body_vel * state.body_vel
        + half * hopper.toe_mass * state.toe_vel * state.toe_vel
        + hopper.body_mass * g * state.body_pos
        + hopper.toe_mass * g * state.toe_pos
        + half * hopper.leg_stiffness * stretch * stretch;
    if state.phase == Phase::Stance {
        e += half * ground.stiffness * state.toe_pos * state.toe_pos;
    }
    e
}

/// Hopper hanging at rest before release: toe at `drop_height`, zero
/// velocities, leg stretched by the toe weight beyond its flight setpoint.
pub fn flight_equilibrium_drop_state<T: Real>(
    hopper: &HopperParams<T>,
    precompression: T,
    drop_height: T,
) -> Result<HybridState<T>, ModelError> {
    positive("drop_height", drop_height)?;
    non_negative("precompression", precompression)?;
    if precompression >= hopper.rest_length {
        return Err(ModelError::CompressionExceedsLeg {
            compression: precompression.to_f64_lossy(),
            rest_length: hopper.rest_length.to_f64_lossy(),
        });
    }
    let separation = hopper.rest_length - precompression
        + hopper.toe_mass * hopper.gravity / hopper.leg_stiffness;
    Ok(HybridState {
        phase: Phase::Flight,
        time: T::zero(),
        body_pos: drop_height + separation,
        body_vel: T::zero(),
        toe_pos: drop_height,
        toe_vel: T::zero(),
        precompression,
    })
}
