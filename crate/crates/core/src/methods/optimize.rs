//! Trajectory optimization over the free components at the anchor time.

use crate::adjoint::objective_gradient;
use crate::error::{Result, SimError};
use crate::model::{KineticModel, RpvSpec};
use crate::poi::{Diagnostics, Method, Poi};
use crate::solvers::{
    integrate, integrate_on_grid, minimize, newton_solve, FnSystem, MinimizeOptions, NewtonOptions,
};

use super::{first_infeasible, free_guess, GradientSource, MethodConfig, Mode, Objective};

/// Passes of "integrate adaptively, freeze the grid, minimize on it".
const MAX_GRID_PASSES: usize = 3;

/// Minimizes `objective` over the free components at `t*`.
///
/// In reverse mode the decision point is integrated backward to `t0` with
/// the running cost carried as an extra quadrature state. The minimizer sees
/// the objective on a frozen step grid (taken from an adaptive run at the
/// current best point), so it is a smooth function of the decision point;
/// the grid is refreshed until the minimizer stops moving.
pub fn optimize_trajectory(
    model: &KineticModel,
    rpv: &RpvSpec,
    config: &MethodConfig,
) -> Result<Poi> {
    let n = model.dim();
    rpv.validate(n)?;
    config.objective.validate()?;
    let u0 = free_guess(model, rpv, &config.guess)?;
    let objective = &config.objective;

    if config.mode == Mode::Local {
        let rep = minimize(
            |u| {
                objective
                    .pointwise(model, &rpv.assemble(n, u))
                    .unwrap_or(f64::NAN)
            },
            &u0,
            None,
            &MinimizeOptions::default(),
        )?;
        let diagnostics = Diagnostics {
            converged: true,
            residual: rep.step_size,
            objective: Some(rep.f),
            iterations: rep.evaluations,
            ..Diagnostics::default()
        };
        return Ok(Poi::new(
            rpv.assemble(n, &rep.x),
            Method::Optimize,
            diagnostics,
        ));
    }

    let t0 = rpv.require_horizon()?;
    let t_f = rpv.t_star();
    let integrated = objective.is_integrated();
    let dim = if integrated { n + 1 } else { n };
    let system = FnSystem::new(dim, |_t: f64, y: &[f64], dy: &mut [f64]| {
        let z = &y[..n];
        dy[..n].copy_from_slice(&model.rhs(z));
        if integrated {
            dy[n] = objective.pointwise(model, z).unwrap_or(f64::NAN);
        }
    });
    let start = |u: &[f64]| {
        let mut y = rpv.assemble(n, u);
        y.resize(dim, 0.0);
        y
    };
    // Backward quadrature gives -integral over [t0, t_f].
    let cost = |y_t0: &[f64]| -> f64 {
        if integrated {
            -y_t0[n]
        } else {
            objective.pointwise(model, &y_t0[..n]).unwrap_or(f64::NAN)
        }
    };

    let (u, f, evaluations, residual) = match config.gradient {
        GradientSource::FiniteDifference => {
            let mut u = u0;
            let mut best = (f64::NAN, 0, 0.0);
            for _ in 0..MAX_GRID_PASSES {
                let grid = integrate(&system, &start(&u), t_f, t0, &config.ivp)?.times;
                let rep = minimize(
                    |v| match integrate_on_grid(&system, &start(v), &grid) {
                        Ok(tr) => cost(tr.final_state()),
                        Err(_) => f64::NAN,
                    },
                    &u,
                    None,
                    &MinimizeOptions::default(),
                )?;
                let moved = rep
                    .x
                    .iter()
                    .zip(&u)
                    .map(|(a, b)| (a - b).abs() / (1.0 + b.abs()))
                    .fold(0.0, f64::max);
                best = (rep.f, best.1 + rep.evaluations, rep.step_size);
                u = rep.x;
                if moved < 1e-12 {
                    break;
                }
            }
            (u, best.0, best.1, best.2)
        }
        GradientSource::Adjoint => {
            let g0 = objective_gradient(model, rpv, objective, &u0, &config.ivp)?;
            let scale = 1.0 + g0.iter().fold(0.0f64, |m, g| m.max(g.abs()));
            let rep = newton_solve(
                |v| {
                    let g = objective_gradient(model, rpv, objective, v, &config.ivp)?;
                    Ok(g.iter().map(|x| x / scale).collect())
                },
                &u0,
                &NewtonOptions::default().with_tol(1e-12),
            )?;
            if rep.residual > 1e-9 {
                return Err(SimError::NewtonDiverged {
                    residual: rep.residual,
                    iterations: rep.iterations,
                });
            }
            let tr = integrate(&system, &start(&rep.x), t_f, t0, &config.ivp)?;
            (rep.x, cost(tr.final_state()), rep.iterations, rep.residual)
        }
    };

    let state = rpv.assemble(n, &u);
    let tr = integrate(model, &state, t_f, t0, &config.ivp)?;
    if let Some(t) = first_infeasible(model, &tr) {
        return Err(SimError::Infeasible { t });
    }
    let diagnostics = Diagnostics {
        converged: true,
        residual,
        objective: Some(f),
        iterations: evaluations,
        horizon: Some(t0),
        ..Diagnostics::default()
    };
    Ok(Poi::new(state, Method::Optimize, diagnostics))
}

/// Minimizes `|d^m z/dt^m|^2` at the anchor time over the free components.
pub fn local_min_derivative(model: &KineticModel, rpv: &RpvSpec, m: usize) -> Result<Poi> {
    let config = MethodConfig::local(Objective::EndpointDerivativeNorm { m });
    let mut poi = optimize_trajectory(model, rpv, &config)?;
    poi.method = Method::LocalMinDerivative { m };
    Ok(poi)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::methods::Coefficient;
    use crate::model::{make_davis_skodje, make_linear2d, Polyhedron};
    use crate::oracle::linear_opt_poi;
    use approx::assert_relative_eq;

    fn rpv(value: f64, t0: f64) -> RpvSpec {
        RpvSpec::single(1, value, 0.0)
            .unwrap()
            .with_horizon(t0)
            .unwrap()
    }

    #[test]
    fn second_derivative_norm_matches_closed_form() {
        let m = make_linear2d(2.0).unwrap();
        let p = optimize_trajectory(
            &m,
            &rpv(5.0, -2.0),
            &MethodConfig::reverse(Objective::DerivativeNorm { m: 2 }),
        )
        .unwrap();
        assert_relative_eq!(
            p.state[0],
            linear_opt_poi(2.0, 2, -2.0, 0.0, 5.0),
            max_relative = 1e-8
        );
        assert_eq!(p.state[1], 5.0);
    }

    #[test]
    fn adjoint_gradient_route_agrees() {
        let m = make_linear2d(1.0).unwrap();
        let cfg = MethodConfig::reverse(Objective::DerivativeNorm { m: 2 })
            .with_gradient(GradientSource::Adjoint);
        let p = optimize_trajectory(&m, &rpv(5.0, -1.0), &cfg).unwrap();
        assert_relative_eq!(
            p.state[0],
            linear_opt_poi(1.0, 2, -1.0, 0.0, 5.0),
            max_relative = 1e-6
        );
    }

    #[test]
    fn unit_lagrangian_is_exact_on_linear_model() {
        let m = make_linear2d(2.0).unwrap();
        let obj = Objective::GeneralizedLagrangian {
            k1: Coefficient::Constant(1.0),
            k2: Coefficient::Constant(1.0),
        };
        let p = optimize_trajectory(&m, &rpv(5.0, -1.0), &MethodConfig::reverse(obj)).unwrap();
        assert!((p.state[0] - 5.0).abs() <= 1e-8);
    }

    #[test]
    fn state_weighted_lagrangian_on_davis_skodje() {
        let g = 3.0;
        let ds = make_davis_skodje(g).unwrap();
        let obj = Objective::GeneralizedLagrangian {
            k1: Coefficient::Constant(1.0),
            k2: Coefficient::state_fn(move |z| g / (z[0] + 1.0)),
        };
        let spec = RpvSpec::single(0, 2.0, 0.0)
            .unwrap()
            .with_horizon(-1.0)
            .unwrap();
        let p = optimize_trajectory(&ds, &spec, &MethodConfig::reverse(obj)).unwrap();
        assert!((p.state[1] - 2.0 / 3.0).abs() <= 1e-6, "{}", p.state[1]);
    }

    #[test]
    fn local_minimum_of_derivative_norm() {
        // gamma = 1, m = 2: A^2 = [[2.5, -2], [-2, 2.5]] so the minimizer of
        // |A^2 z|^2 along z2 = 3 is z1 = 3 (2.5*2 + 2*2.5) / (2.5^2 + 2^2) = 45/17.
        let m = make_linear2d(1.0).unwrap();
        let p = local_min_derivative(&m, &RpvSpec::single(1, 3.0, 0.0).unwrap(), 2).unwrap();
        assert_relative_eq!(p.state[0], 45.0 / 17.0, epsilon = 1e-8);
        assert_eq!(p.method, Method::LocalMinDerivative { m: 2 });

        let m = make_linear2d(2.0).unwrap();
        let p = local_min_derivative(&m, &RpvSpec::single(1, 5.0, 0.0).unwrap(), 1).unwrap();
        // A = [[-2, 1], [1, -2]]: minimize (-2 z1 + 5)^2 + (z1 - 10)^2.
        assert_relative_eq!(p.state[0], 4.0, epsilon = 1e-8);

        let p = local_min_derivative(&m, &RpvSpec::single(1, 0.0, 0.0).unwrap(), 3).unwrap();
        assert!(p.state[0].abs() < 1e-8 && p.diagnostics.objective.unwrap() < 1e-14);
    }

    #[test]
    fn infeasible_optimum_is_an_error() {
        // z1 <= 1 is violated by the optimum near z1 = z2 = 5.
        let set = Polyhedron::new(2).with_row(vec![1.0, 0.0], 1.0);
        let m = make_linear2d(2.0).unwrap().with_feasible_set(set);
        let r = optimize_trajectory(
            &m,
            &rpv(5.0, -1.0),
            &MethodConfig::reverse(Objective::DerivativeNorm { m: 2 }),
        );
        assert!(matches!(r, Err(SimError::Infeasible { .. })));
    }
}
