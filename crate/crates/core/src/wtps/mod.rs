//! Wind-turbine power system: parameters, power-coefficient surface, wind
//! profiles, the DAE model with its nonsmooth speed reference and objective
//! integrand, steady-state initialization, and the pitch-control scenario.

mod model;
mod params;
mod scenario;
mod steady;
mod wind;

pub use model::*;
pub use params::{CpPoly, WtpsParams};
pub use scenario::{trajectory_table, TrajectoryRow, WtpsScenario, TRAJECTORY_HEADER};
pub use steady::{steady_pitch, steady_power, steady_state, SteadyState, PITCH_RANGE, STEADY_TOL};
pub use wind::{synthetic_turbulence, SampledWind, TurbulenceSpec, WindProfile};
