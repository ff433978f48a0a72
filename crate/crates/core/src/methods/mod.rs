//! SIM reconstruction methods. Each takes a [`KineticModel`] and an
//! [`RpvSpec`] and returns a [`Poi`](crate::Poi) whose fixed components are
//! exactly the RPV values.

mod bvp;
mod fcm;
mod fet;
mod mint0;
mod objective;
mod optimize;
mod stretching;
mod zdp;

pub use bvp::bvp_reconstruct;
pub use fcm::fcm;
pub use fet::{fet, FetPoint};
pub use mint0::{
    closed_form_start, min_feasible_t0, ConstraintCheck, MinT0Options, MinT0Problem, MinT0Result,
    StartProvider,
};
pub use objective::{Coefficient, Objective};
pub use optimize::{local_min_derivative, optimize_trajectory};
pub use stretching::{stretching_rates, StretchingRates};
pub use zdp::{qssa, zdp_local, zdp_nonlocal};

use crate::error::{Result, SimError};
use crate::model::{KineticModel, RpvSpec};
use crate::solvers::{integrate, IvpOptions, Trajectory};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Mode {
    /// Criterion evaluated at the anchor time itself.
    Local,
    /// RPVs anchored at `t_f = t*`, criterion acting over `[t0, t_f]`.
    #[default]
    Reverse,
}

/// Where Newton iterations and minimizers start for the free components.
#[derive(Debug, Clone, PartialEq, Default)]
pub enum Guess {
    /// The quasi-steady-state point (first derivative of free components zero).
    #[default]
    Qssa,
    Given(Vec<f64>),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum GradientSource {
    /// Derivative-free simplex with finite-difference Newton polish.
    #[default]
    FiniteDifference,
    /// Gradient from one backward state and one forward costate integration.
    Adjoint,
}

#[derive(Debug, Clone)]
pub struct MethodConfig {
    pub mode: Mode,
    pub objective: Objective,
    pub guess: Guess,
    /// Start values of the free components for the shooting formulation.
    pub k: Option<Vec<f64>>,
    pub gradient: GradientSource,
    pub ivp: IvpOptions,
}

impl MethodConfig {
    pub fn new(mode: Mode, objective: Objective) -> Self {
        Self {
            mode,
            objective,
            guess: Guess::Qssa,
            k: None,
            gradient: GradientSource::FiniteDifference,
            ivp: IvpOptions::tight(),
        }
    }

    pub fn reverse(objective: Objective) -> Self {
        Self::new(Mode::Reverse, objective)
    }

    pub fn local(objective: Objective) -> Self {
        Self::new(Mode::Local, objective)
    }

    pub fn with_guess(mut self, guess: Guess) -> Self {
        self.guess = guess;
        self
    }

    pub fn with_gradient(mut self, gradient: GradientSource) -> Self {
        self.gradient = gradient;
        self
    }

    pub fn with_ivp(mut self, ivp: IvpOptions) -> Self {
        self.ivp = ivp;
        self
    }
}

/// Newton target used inside the methods; the converged flag is set against
/// the looser [`METHOD_TOL`].
pub(crate) const NEWTON_TARGET: f64 = 1e-13;
pub(crate) const METHOD_TOL: f64 = 1e-10;

pub(crate) fn require_order(m: usize) -> Result<()> {
    if m == 0 {
        return Err(SimError::InvalidParameter(
            "derivative order m must be >= 1".into(),
        ));
    }
    Ok(())
}

/// Free-component start values according to `guess`.
pub(crate) fn free_guess(model: &KineticModel, rpv: &RpvSpec, guess: &Guess) -> Result<Vec<f64>> {
    let n_free = model.dim() - rpv.fixed_indices().len();
    match guess {
        Guess::Given(v) if v.len() != n_free => Err(SimError::DimensionMismatch {
            expected: n_free,
            got: v.len(),
        }),
        Guess::Given(v) => Ok(v.clone()),
        Guess::Qssa => {
            let poi = qssa(model, rpv)?;
            Ok(rpv.free_values(&poi.state))
        }
    }
}

/// Overwrites the fixed components with the RPV values, bit for bit.
pub(crate) fn pin_fixed(rpv: &RpvSpec, state: &mut [f64]) {
    for (&i, &v) in rpv.fixed_indices().iter().zip(rpv.fixed_values()) {
        state[i] = v;
    }
}

/// `v / (1 + |v|)`-style relative mismatch of the RPV components.
pub(crate) fn rpv_mismatch(rpv: &RpvSpec, z: &[f64]) -> Vec<f64> {
    rpv.fixed_indices()
        .iter()
        .zip(rpv.fixed_values())
        .map(|(&i, &v)| (z[i] - v) / (1.0 + v.abs()))
        .collect()
}

/// Start state at `t0` for forward shooting.
///
/// Integrating a guess straight back over the horizon multiplies its fast
/// component by the full fast growth, so the march goes in chunks of about
/// two fast time constants and puts the free components back on a
/// low-order zero-derivative point after each chunk. Stops early (keeping the last good state) if an
/// integration fails.
/// Order of the zero-derivative projection in [`backward_start`]. The QSSA
/// point keeps a fast fraction of `1/(1+gamma)` that biases the growth of
/// the RPVs chunk after chunk; order 4 makes that negligible.
const PROJECTION_ORDER: usize = 4;

pub(crate) fn backward_start(
    model: &KineticModel,
    rpv: &RpvSpec,
    z_tf: &[f64],
    t_f: f64,
    t0: f64,
    ivp: &IvpOptions,
) -> Vec<f64> {
    let mut z = z_tf.to_vec();
    let mut t = t_f;
    let min_chunk = (t_f - t0) / 1000.0;
    while t > t0 {
        let rate = model.jacobian(&z).singular_values().max();
        let chunk = if rate > 0.0 { 2.0 / rate } else { t - t0 };
        let next = (t - chunk.clamp(min_chunk, 1.0)).max(t0);
        match integrate(model, &z, t, next, ivp) {
            Ok(tr) if tr.final_state().iter().all(|v| v.is_finite()) => {
                z = tr.final_state().to_vec()
            }
            _ => return z,
        }
        t = next;
        let projected = RpvSpec::new(rpv.fixed_indices().to_vec(), rpv.fixed_values_of(&z), t)
            .and_then(|spec| zdp::project(model, &spec, PROJECTION_ORDER, rpv.free_values(&z)));
        if let Ok(p) = projected {
            z = p;
        }
    }
    z
}

/// First time a recorded trajectory state leaves the model's feasible set.
pub(crate) fn first_infeasible(model: &KineticModel, traj: &Trajectory) -> Option<f64> {
    let set = model.feasible_set()?;
    traj.times
        .iter()
        .zip(&traj.states)
        .find(|(_, z)| !set.contains(&z[..model.dim()]))
        .map(|(&t, _)| t)
}
