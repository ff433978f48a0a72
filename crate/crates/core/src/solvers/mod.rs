//! Numerical machinery shared by the reconstruction methods.

pub mod ivp;
pub mod minimize;
pub mod newton;

pub use ivp::{
    integrate, integrate_on_grid, FnSystem, IvpMethod, IvpOptions, OdeSystem, Trajectory,
};
pub use minimize::{minimize, Bounds, MinimizeOptions, MinimizeReport};
pub use newton::{newton_solve, shoot, NewtonOptions, NewtonReport, ShootingProblem};
