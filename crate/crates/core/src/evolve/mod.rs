//! Time integration of the full models and of the coupled (ξ, v) systems.

mod coupled;
mod decomposition;
mod integrator;
mod trajectory;

pub use coupled::{simulate_coupled, CoupledMode, CoupledState, CoupledTrajectory, PathPoint};
pub use decomposition::{z_decomposition, Decomposition};
pub use integrator::{
    discrete_steady_state, imex_step_limit, step, IntegratorConfig, Scheme, DT_MIN,
};
pub use trajectory::{
    run_adaptive, track_layer, LayerCrossing, Snapshot, Trajectory, TrajectorySample,
};
