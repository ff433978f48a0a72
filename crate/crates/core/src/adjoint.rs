//! Optimal boundary control view of trajectory optimization: Hamiltonian
//! `H = Phi(z) + lambda^T S(z)`, costate dynamics `lambda' = -dH/dz`, and the
//! coupled primal/costate boundary value problem.

use nalgebra::DVector;

use crate::error::{Result, SimError};
use crate::methods::{qssa, Objective};
use crate::model::{KineticModel, RpvSpec};
use crate::poi::{Diagnostics, Method, Poi};
use crate::solvers::{integrate, newton_solve, FnSystem, IvpOptions, NewtonOptions, Trajectory};

pub use crate::oracle::{linear_adjoint_constants, LinearAdjointConstants};

/// A running cost `Phi(z)` with its state gradient.
pub trait Integrand: Sync {
    fn value(&self, model: &KineticModel, z: &[f64]) -> Result<f64>;

    fn gradient(&self, model: &KineticModel, z: &[f64]) -> Result<Vec<f64>> {
        richardson_gradient(|x| self.value(model, x), z)
    }
}

/// Closure adapter for [`Integrand`]; the gradient is always numerical.
pub struct FnIntegrand<F>(pub F);

impl<F> Integrand for FnIntegrand<F>
where
    F: Fn(&[f64]) -> f64 + Sync,
{
    fn value(&self, _model: &KineticModel, z: &[f64]) -> Result<f64> {
        Ok((self.0)(z))
    }
}

/// Central differences with step `1e-6 (1 + |z_i|)` and one Richardson
/// extrapolation against the doubled step.
pub fn richardson_gradient(f: impl Fn(&[f64]) -> Result<f64>, z: &[f64]) -> Result<Vec<f64>> {
    let mut x = z.to_vec();
    let mut central = |i: usize, h: f64| -> Result<f64> {
        x[i] = z[i] + h;
        let fp = f(&x)?;
        x[i] = z[i] - h;
        let fm = f(&x)?;
        x[i] = z[i];
        if !(fp.is_finite() && fm.is_finite()) {
            return Err(SimError::GradientProbe);
        }
        Ok((fp - fm) / (2.0 * h))
    };
    (0..z.len())
        .map(|i| {
            let h = 1e-6 * (1.0 + z[i].abs());
            let fine = central(i, h)?;
            let coarse = central(i, 2.0 * h)?;
            Ok((4.0 * fine - coarse) / 3.0)
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HamiltonianEval {
    pub value: f64,
    pub phi_term: f64,
    /// `lambda^T S(z)`.
    pub flow_term: f64,
}

pub fn hamiltonian(
    model: &KineticModel,
    phi: &dyn Integrand,
    z: &[f64],
    lambda: &[f64],
) -> Result<HamiltonianEval> {
    let n = model.dim();
    for len in [z.len(), lambda.len()] {
        if len != n {
            return Err(SimError::DimensionMismatch {
                expected: n,
                got: len,
            });
        }
    }
    let phi_term = phi.value(model, z)?;
    let flow_term: f64 = model.rhs(z).iter().zip(lambda).map(|(s, l)| s * l).sum();
    Ok(HamiltonianEval {
        value: phi_term + flow_term,
        phi_term,
        flow_term,
    })
}

/// `-(dPhi/dz + J_S^T lambda)`.
pub fn adjoint_rhs(
    model: &KineticModel,
    phi: &dyn Integrand,
    z: &[f64],
    lambda: &[f64],
) -> Result<Vec<f64>> {
    let grad = phi.gradient(model, z)?;
    let jt_l = model.jacobian(z).transpose() * DVector::from_column_slice(lambda);
    Ok(grad
        .iter()
        .zip(jt_l.iter())
        .map(|(g, j)| -(g + j))
        .collect())
}

/// Converged primal/costate pair on `[t0, t_f]`, stored in increasing time.
#[derive(Debug, Clone)]
pub struct AdjointSolution {
    pub primal: Trajectory,
    pub costate: Trajectory,
    pub poi: Poi,
    /// `H` at every stored time.
    pub hamiltonian: Vec<f64>,
}

impl AdjointSolution {
    /// `max_t |H(t) - H(t0)| / (1 + |H(t0)|)`.
    pub fn hamiltonian_drift(&self) -> f64 {
        let h0 = self.hamiltonian[0];
        self.hamiltonian
            .iter()
            .map(|h| (h - h0).abs())
            .fold(0.0, f64::max)
            / (1.0 + h0.abs())
    }
}

const ADJOINT_NEWTON_TOL: f64 = 1e-10;
const ADJOINT_ACCEPT: f64 = 1e-8;

/// Combined right-hand side for `[z; lambda]`.
fn coupled<'a>(
    model: &'a KineticModel,
    phi: &'a dyn Integrand,
) -> impl Fn(f64, &[f64], &mut [f64]) + Sync + 'a {
    let n = model.dim();
    // Integrators cannot propagate errors, so a failing gradient poisons the
    // state with NaN, which the integrator reports as non-finite.
    move |_t, y, dy| {
        let (z, l) = y.split_at(n);
        dy[..n].copy_from_slice(&model.rhs(z));
        match adjoint_rhs(model, phi, z, l) {
            Ok(r) => dy[n..].copy_from_slice(&r),
            Err(_) => dy[n..].fill(f64::NAN),
        }
    }
}

fn split(tr: &Trajectory, n: usize) -> (Trajectory, Trajectory) {
    let part = |range: std::ops::Range<usize>| Trajectory {
        times: tr.times.iter().rev().copied().collect(),
        states: tr
            .states
            .iter()
            .rev()
            .map(|y| y[range.clone()].to_vec())
            .collect(),
        derivatives: tr
            .derivatives
            .iter()
            .rev()
            .map(|y| y[range.clone()].to_vec())
            .collect(),
        rejected_steps: tr.rejected_steps,
    };
    (part(0..n), part(n..2 * n))
}

/// Primal/costate boundary value problem for `min integral Phi` with the RPVs
/// fixed at `t_f = t*`: `lambda(t0) = 0` for every component and
/// `lambda_free(t_f) = 0`.
///
/// Shoots backward from `t_f` on the free states and the RPV costates there.
pub fn solve_adjoint_bvp(
    model: &KineticModel,
    rpv: &RpvSpec,
    phi: &dyn Integrand,
) -> Result<AdjointSolution> {
    let n = model.dim();
    rpv.validate(n)?;
    let t0 = rpv.require_horizon()?;
    let t_f = rpv.t_star();
    let n_free = n - rpv.fixed_indices().len();
    let ivp = IvpOptions::tight();
    let rhs = coupled(model, phi);
    let system = FnSystem::new(2 * n, rhs);

    let end_state = |x: &[f64]| -> Vec<f64> {
        let mut y = rpv.assemble(n, &x[..n_free]);
        let mut lambda = vec![0.0; n];
        for (&i, &mu) in rpv.fixed_indices().iter().zip(&x[n_free..]) {
            lambda[i] = mu;
        }
        y.extend(lambda);
        y
    };
    let run = |x: &[f64]| integrate(&system, &end_state(x), t_f, t0, &ivp);

    let mut x0 = rpv.free_values(&qssa(model, rpv)?.state);
    x0.extend(vec![0.0; n - n_free]);
    let rep = newton_solve(
        |x| Ok(run(x)?.final_state()[n..].to_vec()),
        &x0,
        &NewtonOptions::default().with_tol(ADJOINT_NEWTON_TOL),
    )?;
    if rep.residual > ADJOINT_ACCEPT {
        return Err(SimError::NewtonDiverged {
            residual: rep.residual,
            iterations: rep.iterations,
        });
    }

    let tr = run(&rep.x)?;
    let (primal, costate) = split(&tr, n);
    let hamiltonian = primal
        .states
        .iter()
        .zip(&costate.states)
        .map(|(z, l)| hamiltonian(model, phi, z, l).map(|h| h.value))
        .collect::<Result<Vec<_>>>()?;
    let state = rpv.assemble(n, &rep.x[..n_free]);
    let diagnostics = Diagnostics {
        converged: true,
        residual: rep.residual,
        iterations: rep.iterations,
        horizon: Some(t0),
        ..Diagnostics::default()
    };
    Ok(AdjointSolution {
        primal,
        costate,
        poi: Poi::new(state, Method::Adjoint, diagnostics),
        hamiltonian,
    })
}

/// Gradient of a trajectory objective with respect to the free components at
/// `t_f`, from one backward state integration and one forward pass of the
/// coupled state/costate system.
///
/// Integrated objectives start the costate at zero and pick up `-dPhi/dz`;
/// the endpoint objective starts it at `dPhi/dz(z(t0))` without source.
pub fn objective_gradient(
    model: &KineticModel,
    rpv: &RpvSpec,
    objective: &Objective,
    free: &[f64],
    ivp: &IvpOptions,
) -> Result<Vec<f64>> {
    let n = model.dim();
    let t0 = rpv.require_horizon()?;
    let t_f = rpv.t_star();
    let z_tf = rpv.assemble(n, free);
    let back = integrate(model, &z_tf, t_f, t0, ivp)?;
    let z_t0 = back.final_state();

    let (lambda0, sign) = if objective.is_integrated() {
        (vec![0.0; n], -1.0)
    } else {
        (objective.gradient(model, z_t0)?, 1.0)
    };
    let source = objective.is_integrated();
    let system = FnSystem::new(2 * n, |_t: f64, y: &[f64], dy: &mut [f64]| {
        let (z, l) = y.split_at(n);
        dy[..n].copy_from_slice(&model.rhs(z));
        let jt_l = model.jacobian(z).transpose() * DVector::from_column_slice(l);
        let grad = if source {
            objective.gradient(model, z).ok()
        } else {
            Some(vec![0.0; n])
        };
        match grad {
            Some(g) => {
                for i in 0..n {
                    dy[n + i] = -(g[i] + jt_l[i]);
                }
            }
            None => dy[n..].fill(f64::NAN),
        }
    });
    let mut y0 = z_t0.to_vec();
    y0.extend(lambda0);
    let fwd = integrate(&system, &y0, t0, t_f, ivp)?;
    let lambda_tf = &fwd.final_state()[n..];
    Ok(rpv
        .free_indices(n)
        .iter()
        .map(|&i| sign * lambda_tf[i])
        .collect())
}
