use crate::error::{Result, SimError};
use crate::model::{KineticModel, RpvSpec};
use crate::poi::{Diagnostics, Method, Poi};
use crate::solvers::{integrate, newton_solve, IvpOptions, NewtonOptions};

use super::{
    backward_start, first_infeasible, pin_fixed, qssa, rpv_mismatch, METHOD_TOL, NEWTON_TARGET,
};

/// Two-point boundary formulation: free components start at `K` at `t0`,
/// RPVs take their given values at `t_f = t*`. The POI is the end state.
///
/// Solved by forward shooting on the RPV components at `t0`.
pub fn bvp_reconstruct(model: &KineticModel, rpv: &RpvSpec, k: &[f64]) -> Result<Poi> {
    let n = model.dim();
    rpv.validate(n)?;
    let t0 = rpv.require_horizon()?;
    let t_f = rpv.t_star();
    let free = rpv.free_indices(n);
    if k.len() != free.len() {
        return Err(SimError::DimensionMismatch {
            expected: free.len(),
            got: k.len(),
        });
    }
    let ivp = IvpOptions::tight();
    let start_state = |w: &[f64]| -> Vec<f64> {
        let mut z0 = vec![0.0; n];
        for (&i, &v) in free.iter().zip(k) {
            z0[i] = v;
        }
        for (&i, &v) in rpv.fixed_indices().iter().zip(w) {
            z0[i] = v;
        }
        z0
    };

    let guess_tf = qssa(model, rpv)
        .map(|p| p.state)
        .unwrap_or_else(|_| rpv.assemble(n, &vec![0.0; free.len()]));
    let guess_t0 = backward_start(model, rpv, &guess_tf, t_f, t0, &ivp);
    let w0 = rpv.fixed_values_of(&guess_t0);

    let rep = newton_solve(
        |w| {
            let tr = integrate(model, &start_state(w), t0, t_f, &ivp)?;
            Ok(rpv_mismatch(rpv, tr.final_state()))
        },
        &w0,
        &NewtonOptions::default().with_tol(NEWTON_TARGET),
    )?;
    if rep.residual > METHOD_TOL {
        return Err(SimError::NewtonDiverged {
            residual: rep.residual,
            iterations: rep.iterations,
        });
    }

    let tr = integrate(model, &start_state(&rep.x), t0, t_f, &ivp)?;
    let mut state = tr.final_state().to_vec();
    pin_fixed(rpv, &mut state);
    let mut diagnostics = Diagnostics {
        converged: true,
        residual: rep.residual,
        iterations: rep.iterations,
        horizon: Some(t0),
        ..Diagnostics::default()
    };
    if let Some(t) = first_infeasible(model, &tr) {
        diagnostics
            .flags
            .push(format!("trajectory leaves the feasible set at t = {t}"));
    }
    Ok(Poi::new(state, Method::Bvp, diagnostics))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{make_davis_skodje, make_linear2d, Polyhedron};
    use crate::oracle::{ds_bvp_poi, linear_bvp_poi};

    #[test]
    fn linear_examples() {
        for &(g, expect) in &[(0.2, 0.9868), (2.0, 4.8201)] {
            let m = make_linear2d(g).unwrap();
            let rpv = RpvSpec::single(1, 5.0, 0.0)
                .unwrap()
                .with_horizon(-2.0)
                .unwrap();
            let p = bvp_reconstruct(&m, &rpv, &[0.0]).unwrap();
            assert!((p.state[0] - linear_bvp_poi(g, -2.0, 0.0, 0.0, 5.0)).abs() < 1e-9);
            assert!((p.state[0] - expect).abs() < 1e-4);
            assert_eq!(p.state[1], 5.0);
        }
    }

    #[test]
    fn davis_skodje_example() {
        let ds = make_davis_skodje(3.0).unwrap();
        let rpv = RpvSpec::single(0, 2.0, 0.0)
            .unwrap()
            .with_horizon(-1.0)
            .unwrap();
        let p = bvp_reconstruct(&ds, &rpv, &[0.0]).unwrap();
        assert!((p.state[1] - ds_bvp_poi(3.0, -1.0, 0.0, 0.0, 2.0)).abs() < 1e-9);
        assert_eq!(p.state[0], 2.0);
    }

    #[test]
    fn start_values_must_match_free_count() {
        let m = make_linear2d(2.0).unwrap();
        let rpv = RpvSpec::single(1, 5.0, 0.0)
            .unwrap()
            .with_horizon(-2.0)
            .unwrap();
        assert!(matches!(
            bvp_reconstruct(&m, &rpv, &[0.0, 1.0]),
            Err(SimError::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn leaving_feasible_set_is_flagged() {
        // K = -1 starts outside the positive orthant.
        let m = make_linear2d(2.0)
            .unwrap()
            .with_feasible_set(Polyhedron::positive_orthant(2));
        let rpv = RpvSpec::single(1, 5.0, 0.0)
            .unwrap()
            .with_horizon(-2.0)
            .unwrap();
        let p = bvp_reconstruct(&m, &rpv, &[-1.0]).unwrap();
        assert!(!p.diagnostics.flags.is_empty());
        let p = bvp_reconstruct(&m, &rpv, &[1.0]).unwrap();
        assert!(p.diagnostics.flags.is_empty());
    }
}
