//! Two-photon coincidence and fluorescence spectra of pulsed few-level
//! quantum systems.
//!
//! The dynamics follow a Lindblad master equation integrated with fixed-step
//! RK4 in Hartree atomic units. Two-time photon correlations come from the
//! quantum regression theorem: a conditional state `a ρ(t₁) a†` is propagated
//! with the same driven master equation and `⟨a†a⟩` is read out at `t₂`.

pub mod error;
pub mod grid;
pub mod models;
pub mod operator;
pub mod oracle;
pub mod output;
pub mod propagator;
pub mod pulse;
pub mod regression;
pub mod scan;
pub mod system;
pub mod units;

pub use error::{Error, Result};
pub use grid::TimeGrid;
pub use operator::{projector, validate_density, DensityMatrix, DensityReport, Operator, C64};
pub use propagator::{propagate, DensityTrajectory, Propagator, DEFAULT_DT};
pub use pulse::{pulse_field, Pulse};
pub use system::{ChannelId, DriveProgram, Frame, QuantumSystem};
pub use units::UnitContext;
