use crate::error::{Result, SimError};
use crate::model::{KineticModel, RpvSpec};
use crate::poi::{Diagnostics, Method, Poi};
use crate::solvers::{newton_solve, NewtonOptions};
use crate::taylor::time_derivatives;

use super::{qssa, stretching_rates, METHOD_TOL, NEWTON_TARGET};
use nalgebra::DMatrix;

/// `det(d1..dn)` and the product of the column norms.
fn curvature_det(model: &KineticModel, z: &[f64]) -> Result<(f64, f64)> {
    let n = model.dim();
    let stack = time_derivatives(model, z, n)?;
    let cols = DMatrix::from_fn(n, n, |i, j| stack.d(j + 1)[i]);
    let scale: f64 = cols.column_iter().map(|c| c.norm()).product();
    Ok((cols.determinant(), scale))
}

/// Flow-curvature point: the free component at which the first `n` time
/// derivatives become linearly dependent. Needs exactly one free component.
pub fn fcm(model: &KineticModel, rpv: &RpvSpec) -> Result<Poi> {
    let n = model.dim();
    rpv.validate(n)?;
    if n - rpv.fixed_indices().len() != 1 {
        return Err(SimError::InvalidParameter(
            "flow curvature gives one equation; exactly one component must be free".into(),
        ));
    }
    // The QSSA point sits between the slow and fast roots, on the slow side.
    let guess = rpv.free_values(&qssa(model, rpv)?.state);
    // Scale frozen at the guess: dividing by the local column norms would
    // flatten the determinant far from the root and let Newton wander to
    // the fast root.
    let (_, scale) = curvature_det(model, &rpv.assemble(n, &guess))?;
    let scale = if scale > 0.0 { scale } else { 1.0 };
    let rep = newton_solve(
        |u| Ok(vec![curvature_det(model, &rpv.assemble(n, u))?.0 / scale]),
        &guess,
        &NewtonOptions::default().with_tol(NEWTON_TARGET),
    )?;
    if rep.residual > METHOD_TOL {
        return Err(SimError::NewtonDiverged {
            residual: rep.residual,
            iterations: rep.iterations,
        });
    }
    let state = rpv.assemble(n, &rep.x);
    if n == 2 {
        if let Ok(rates) = stretching_rates(model, &state) {
            if rates.ratio < 1.0 {
                return Err(SimError::FastDirection { ratio: rates.ratio });
            }
        }
    }
    let diagnostics = Diagnostics {
        converged: true,
        residual: rep.residual,
        iterations: rep.iterations,
        ..Diagnostics::default()
    };
    Ok(Poi::new(state, Method::Fcm, diagnostics))
}
