//! Slow invariant manifold (SIM) reconstruction for multiscale kinetic ODEs.
//!
//! Given a kinetic model `dz/dt = S(z)` and fixed values for a subset of
//! components (the reaction progress variables, RPVs), the methods in
//! [`methods`] reconstruct the remaining components so that the full state
//! lies on, or close to, the slow manifold. Closed-form reference values for
//! the built-in test models live in [`oracle`].

pub mod adjoint;
pub mod error;
pub mod experiment;
pub mod jet;
pub mod methods;
pub mod model;
pub mod oracle;
pub mod parallel;
pub mod poi;
pub mod solvers;
pub mod taylor;

pub use error::{Result, SimError};
pub use model::{
    analytic_sim_point, make_davis_skodje, make_linear2d, make_linear3d, KineticModel, Polyhedron,
    RpvSpec,
};
pub use poi::{Diagnostics, Method, Poi};
