//! Zero-derivative conditions: the m-th time derivative of every free
//! component vanishes, either at the anchor time or at the start of a
//! horizon that ends at the anchor time.

use crate::error::{Result, SimError};
use crate::model::{KineticModel, RpvSpec};
use crate::poi::{Diagnostics, Method, Poi};
use crate::solvers::{integrate, newton_solve, IvpOptions, NewtonOptions};
use crate::taylor::time_derivatives;

use super::{backward_start, pin_fixed, require_order, rpv_mismatch, METHOD_TOL, NEWTON_TARGET};

/// Free-component m-th derivatives relative to `|d_m| + |J|^m |z|`, the
/// size of the terms the derivative is assembled from. This keeps the
/// tolerance meaningful when the fast-mode factor `(1+gamma)^m` is large and
/// the derivative itself is computed with correspondingly large rounding.
fn relative_free_derivative(
    model: &KineticModel,
    rpv: &RpvSpec,
    z: &[f64],
    m: usize,
) -> Result<Vec<f64>> {
    let stack = time_derivatives(model, z, m)?;
    let d = stack.d(m);
    let norm = |v: &[f64]| v.iter().map(|x| x * x).sum::<f64>().sqrt();
    let rate = model.jacobian(z).singular_values().max();
    let scale = 1.0 + norm(d) + rate.powi(m as i32) * norm(z);
    Ok(rpv
        .free_indices(z.len())
        .iter()
        .map(|&i| d[i] / scale)
        .collect())
}

fn solve_local(
    model: &KineticModel,
    rpv: &RpvSpec,
    m: usize,
    guess: Vec<f64>,
    method: Method,
) -> Result<Poi> {
    let n = model.dim();
    let opts = NewtonOptions::default().with_tol(NEWTON_TARGET);
    let rep = newton_solve(
        |u| relative_free_derivative(model, rpv, &rpv.assemble(n, u), m),
        &guess,
        &opts,
    )?;
    if rep.residual > METHOD_TOL {
        return Err(SimError::NewtonDiverged {
            residual: rep.residual,
            iterations: rep.iterations,
        });
    }
    let diagnostics = Diagnostics {
        converged: true,
        residual: rep.residual,
        iterations: rep.iterations,
        ..Diagnostics::default()
    };
    Ok(Poi::new(rpv.assemble(n, &rep.x), method, diagnostics))
}

/// Local zero-derivative point from an explicit guess; state only.
pub(crate) fn project(
    model: &KineticModel,
    rpv: &RpvSpec,
    m: usize,
    guess: Vec<f64>,
) -> Result<Vec<f64>> {
    solve_local(model, rpv, m, guess, Method::ZdpLocal { m }).map(|p| p.state)
}

/// Quasi-steady state: first derivative of the free components zero.
pub fn qssa(model: &KineticModel, rpv: &RpvSpec) -> Result<Poi> {
    rpv.validate(model.dim())?;
    let n_free = model.dim() - rpv.fixed_indices().len();
    solve_local(model, rpv, 1, vec![0.0; n_free], Method::Qssa)
}

/// Local zero-derivative point of order `m`, started from the QSSA point.
pub fn zdp_local(model: &KineticModel, rpv: &RpvSpec, m: usize) -> Result<Poi> {
    rpv.validate(model.dim())?;
    require_order(m)?;
    let guess = rpv.free_values(&qssa(model, rpv)?.state);
    solve_local(model, rpv, m, guess, Method::ZdpLocal { m })
}

/// Nonlocal zero-derivative point: the RPVs are fixed at `t_f = t*` and the
/// m-th derivative of the free components vanishes at the horizon start.
///
/// Solved by forward shooting on the full state at `t0`, which only ever
/// integrates in the contracting direction.
pub fn zdp_nonlocal(model: &KineticModel, rpv: &RpvSpec, m: usize) -> Result<Poi> {
    let n = model.dim();
    rpv.validate(n)?;
    require_order(m)?;
    let t0 = rpv.require_horizon()?;
    let t_f = rpv.t_star();
    let ivp = IvpOptions::tight();

    let guess_tf = zdp_local(model, rpv, m)?.state;
    let marched = backward_start(model, rpv, &guess_tf, t_f, t0, &ivp);
    // The solution satisfies the local condition at t0 exactly.
    let start = RpvSpec::new(
        rpv.fixed_indices().to_vec(),
        rpv.fixed_values_of(&marched),
        t0,
    )
    .and_then(|spec| zdp_local(model, &spec, m))
    .map(|p| p.state)
    .unwrap_or(marched);
    let residual = |z0: &[f64]| -> Result<Vec<f64>> {
        let mut r = relative_free_derivative(model, rpv, z0, m)?;
        let tr = integrate(model, z0, t0, t_f, &ivp)?;
        r.extend(rpv_mismatch(rpv, tr.final_state()));
        Ok(r)
    };
    let rep = newton_solve(
        residual,
        &start,
        &NewtonOptions::default().with_tol(NEWTON_TARGET),
    )?;
    if rep.residual > METHOD_TOL {
        return Err(SimError::NewtonDiverged {
            residual: rep.residual,
            iterations: rep.iterations,
        });
    }
    let tr = integrate(model, &rep.x, t0, t_f, &ivp)?;
    let mut state = tr.final_state().to_vec();
    pin_fixed(rpv, &mut state);
    let mut diagnostics = Diagnostics {
        converged: true,
        residual: rep.residual,
        iterations: rep.iterations,
        horizon: Some(t0),
        ..Diagnostics::default()
    };
    if let Some(t) = super::first_infeasible(model, &tr) {
        diagnostics
            .flags
            .push(format!("trajectory leaves the feasible set at t = {t}"));
    }
    Ok(Poi::new(state, Method::ZdpNonlocal { m }, diagnostics))
}
