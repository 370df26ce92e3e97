//! Reference-command generation for a planar Lift+Cruise VTOL vehicle.
//!
//! Two generators are provided. [`olopt`] solves the thrust-minimization
//! problem pointwise on a timestamp grid and interpolates. [`tvopt`] tracks
//! the time-varying minimizer with a prediction-correction ODE on a
//! log-barrier formulation. [`sim`] closes the loop around the plant in
//! [`vehicle`] with the controllers in [`control`].

pub mod config;
pub mod control;
pub mod error;
pub mod jet;
pub mod ode;
pub mod olopt;
pub mod problem;
pub mod sim;
pub mod trajectory;
pub mod tvopt;
pub mod vehicle;
pub mod verify;

pub use config::{InitialDecision, Settings};
pub use control::{ControllerGains, PitchRefState, PitchReference};
pub use error::{Error, Result};
pub use olopt::{NewtonOptions, Schedule, SolutionTable, TableMode};
pub use problem::{DecisionVars, DesiredForce, ProblemContext, Thrusts};
pub use sim::{BenchmarkCell, LogRecord, Method, Metrics, SimOutput, TrajectoryLog};
pub use trajectory::{
    BezierCurve, ReferenceSample, ReferenceTrajectory, ScenarioKind, ScenarioSpec,
};
pub use tvopt::{BarrierProblem, Objective, TvOptConfig};
pub use vehicle::{AeroForces, ControlInput, VehicleParams, VehicleState};
