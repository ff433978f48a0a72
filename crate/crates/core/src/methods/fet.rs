use crate::error::{Result, SimError};
use crate::model::{KineticModel, RpvSpec};
use crate::poi::{Diagnostics, Method, Poi};
use crate::solvers::{newton_solve, NewtonOptions};

use super::qssa;

/// Functional-equation truncation result: the point and the manifold slope
/// `d z_free / d z_fixed` there.
#[derive(Debug, Clone, PartialEq)]
pub struct FetPoint {
    pub poi: Poi,
    pub slope: f64,
    /// Residuals of the invariance equation and of its truncated derivative.
    pub residuals: [f64; 2],
}

const FET_TOL: f64 = 1e-12;

/// Planar manifold point from the invariance equation `S_b = p S_a` and its
/// derivative along the manifold with the curvature term dropped:
/// `p (dS_a/dz_a + p dS_a/dz_b) = dS_b/dz_a + p dS_b/dz_b`,
/// where `a` is the fixed and `b` the free component and `p` the slope.
pub fn fet(model: &KineticModel, rpv: &RpvSpec) -> Result<FetPoint> {
    if model.dim() != 2 {
        return Err(SimError::InvalidParameter(
            "FET is defined for planar models".into(),
        ));
    }
    rpv.validate(2)?;
    let a = rpv.fixed_indices()[0];
    let b = 1 - a;
    let residual = |x: &[f64]| -> [f64; 2] {
        let (zb, p) = (x[0], x[1]);
        let z = rpv.assemble(2, &[zb]);
        let s = model.rhs(&z);
        let j = model.jacobian(&z);
        [
            s[b] - p * s[a],
            p * (j[(a, a)] + p * j[(a, b)]) - (j[(b, a)] + p * j[(b, b)]),
        ]
    };

    let z_guess = qssa(model, rpv)?.state;
    let j = model.jacobian(&z_guess);
    // Slope of the QSSA curve S_b = 0.
    let p_guess = if j[(b, b)] != 0.0 {
        -j[(b, a)] / j[(b, b)]
    } else {
        0.0
    };
    let rep = newton_solve(
        |x| Ok(residual(x).to_vec()),
        &[z_guess[b], p_guess],
        &NewtonOptions::default().with_tol(1e-14),
    )?;
    let res = residual(&rep.x);
    let worst = res[0].abs().max(res[1].abs());
    if worst > FET_TOL {
        return Err(SimError::NewtonDiverged {
            residual: worst,
            iterations: rep.iterations,
        });
    }
    let state = rpv.assemble(2, &rep.x[..1]);
    let mut diagnostics = Diagnostics {
        converged: true,
        residual: worst,
        iterations: rep.iterations,
        ..Diagnostics::default()
    };
    if model.rhs(&state)[a] == 0.0 {
        diagnostics
            .flags
            .push("fixed-component rate vanishes; slope not determined by the flow".into());
    }
    Ok(FetPoint {
        poi: Poi::new(state, Method::Fet, diagnostics),
        slope: rep.x[1],
        residuals: res,
    })
}
