//! Two-mass vertical hopper on a spring-damper ground.
//!
//! The physics and integrator are generic over [`real::Real`] (`f32` or
//! `f64`). Sweeps, fitting and file output work in `f64`; the aliases below
//! name the `f64` instantiations.

pub mod config;
pub mod emulator;
pub mod integrator;
pub mod model;
pub mod output;
pub mod real;
pub mod sim;
pub mod sweep;

pub use model::GRAVITY;
pub use real::Real;

pub type HopperParams = model::HopperParams<f64>;
pub type GroundProfile = model::GroundProfile<f64>;
pub type EnergyBudget = model::EnergyBudget<f64>;
pub type HybridState = model::HybridState<f64>;
pub type IntegratorConfig = integrator::IntegratorConfig<f64>;
pub type EpisodeConfig = sim::EpisodeConfig<f64>;
pub type EpisodeOutcome = sim::EpisodeOutcome<f64>;
pub type HopRecord = sim::HopRecord<f64>;
pub type HopEnergy = sim::HopEnergy<f64>;
pub type LinkageGeometry = emulator::LinkageGeometry<f64>;
pub type PdGains = emulator::PdGains<f64>;

pub type HopperParamsF32 = model::HopperParams<f32>;
pub type GroundProfileF32 = model::GroundProfile<f32>;
pub type EnergyBudgetF32 = model::EnergyBudget<f32>;
pub type HybridStateF32 = model::HybridState<f32>;
pub type IntegratorConfigF32 = integrator::IntegratorConfig<f32>;
pub type EpisodeConfigF32 = sim::EpisodeConfig<f32>;
