//! Two-dimensional advection-diffusion of temperature and a passive
//! concentration on a node-centred grid.

pub mod config;
pub mod control;
pub mod operators;
pub mod simulate;
pub mod tvd;

pub use control::{controller_update, detect_two_point_instabilities, ControllerAction, StepControllerState};
pub use operators::{advect, diffuse_stencil, wall_flux, AdvectionScheme, Velocity};
pub use simulate::{
    run_simulation, CourantNumbers, DtLimits, SimulationOptions, SimulationSummary, TrajectoryRow, TransportProblem,
    TransportSystem,
};
