//! Smallest horizon start `t0` whose optimal trajectory still starts inside
//! a polyhedral feasible region, for the planar linear model.

use crate::error::{Result, SimError};
use crate::model::{KineticModel, Polyhedron, RpvSpec};
use crate::poi::{Diagnostics, Method, Poi};
use crate::solvers::{integrate, IvpOptions};

use super::{local_min_derivative, optimize_trajectory, MethodConfig, Objective};

#[derive(Debug, Clone, PartialEq)]
pub struct MinT0Problem {
    pub m: usize,
    /// RPV value `z2` at `t_f`.
    pub z2: f64,
    pub polyhedron: Polyhedron,
    pub t_f: f64,
}

/// How the optimal start state for a trial `t0` is obtained.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum StartProvider {
    /// Closed-form minimizer of `|A^m z(t0)|^2` (linear planar model only).
    #[default]
    ClosedForm,
    /// Reverse-mode endpoint optimization followed by backward integration.
    Numerical,
}

/// Where the polyhedron constraints are enforced.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ConstraintCheck {
    #[default]
    StartPoint,
    AlongTrajectory,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MinT0Options {
    pub provider: StartProvider,
    pub check: ConstraintCheck,
    /// Width of the final bisection bracket.
    pub tol: f64,
}

impl Default for MinT0Options {
    fn default() -> Self {
        Self {
            provider: StartProvider::default(),
            check: ConstraintCheck::default(),
            tol: 1e-10,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MinT0Result {
    pub t0_min: f64,
    pub poi: Poi,
    /// `z1(t_f) / z2(t_f)`; 1 on the slow manifold.
    pub ratio: f64,
    /// Local (`t0 = t_f`) minimizer of the same derivative norm, for comparison.
    pub local_poi: Poi,
    pub local_ratio: f64,
}

/// Optimal start and end states for horizon `[t0, t_f]` on the planar linear
/// model with `z2(t_f)` fixed, minimizing `|A^m z(t0)|^2`.
///
/// With `tau = t_f - t0`, slow and fast amplitudes at `t_f` are
/// `b = -z2 / (1 + xi e^{2 gamma tau})`, `a = z2 + b`, `xi = (1+gamma)^{2m}`.
pub fn closed_form_start(gamma: f64, m: usize, z2: f64, t0: f64, t_f: f64) -> ([f64; 2], [f64; 2]) {
    let tau = t_f - t0;
    let xi = (1.0 + gamma).powi(2 * m as i32);
    let b = -z2 / (1.0 + xi * (2.0 * gamma * tau).exp());
    let a = z2 + b;
    let (slow, fast) = (a * tau.exp(), b * ((1.0 + gamma) * tau).exp());
    ([slow + fast, slow - fast], [a + b, a - b])
}

/// Reads `gamma` back from the system matrix, insisting on the planar linear structure.
fn linear_gamma(model: &KineticModel) -> Result<f64> {
    let unsupported = || SimError::UnsupportedParameterization(model.name().to_string());
    let a = model.system_matrix().ok_or_else(unsupported)?;
    if a.nrows() != 2 {
        return Err(unsupported());
    }
    let gamma = 2.0 * a[(0, 1)];
    let expect = [
        -1.0 - gamma / 2.0,
        gamma / 2.0,
        gamma / 2.0,
        -1.0 - gamma / 2.0,
    ];
    let got = [a[(0, 0)], a[(0, 1)], a[(1, 0)], a[(1, 1)]];
    if gamma <= 0.0
        || expect
            .iter()
            .zip(&got)
            .any(|(e, g)| (e - g).abs() > 1e-14 * (1.0 + e.abs()))
    {
        return Err(unsupported());
    }
    Ok(gamma)
}

struct Trial {
    feasible: bool,
    z_tf: Vec<f64>,
}

pub fn min_feasible_t0(
    model: &KineticModel,
    problem: &MinT0Problem,
    opts: &MinT0Options,
) -> Result<MinT0Result> {
    if model.dim() != 2 {
        return Err(SimError::UnsupportedParameterization(
            model.name().to_string(),
        ));
    }
    super::require_order(problem.m)?;
    if !(opts.tol > 0.0) {
        return Err(SimError::InvalidParameter(
            "bisection tolerance must be positive".into(),
        ));
    }
    let (m, t_f) = (problem.m, problem.t_f);
    let gamma = match opts.provider {
        StartProvider::ClosedForm => Some(linear_gamma(model)?),
        StartProvider::Numerical => None,
    };
    let ivp = IvpOptions::tight();

    let trial = |t0: f64| -> Result<Trial> {
        let (z_t0, z_tf) = match gamma {
            Some(g) => {
                let (s, e) = closed_form_start(g, m, problem.z2, t0, t_f);
                (s.to_vec(), e.to_vec())
            }
            None => {
                let rpv = RpvSpec::single(1, problem.z2, t_f)?.with_horizon(t0)?;
                let cfg = MethodConfig::reverse(Objective::EndpointDerivativeNorm { m });
                let poi = optimize_trajectory(model, &rpv, &cfg)?;
                let back = integrate(model, &poi.state, t_f, t0, &ivp)?;
                (back.final_state().to_vec(), poi.state)
            }
        };
        let feasible = match opts.check {
            ConstraintCheck::StartPoint => problem.polyhedron.contains(&z_t0),
            ConstraintCheck::AlongTrajectory => {
                let tr = integrate(model, &z_t0, t0, t_f, &ivp)?;
                tr.states.iter().all(|z| problem.polyhedron.contains(z))
            }
        };
        Ok(Trial { feasible, z_tf })
    };

    let mut hi = t_f - opts.tol;
    let mut hi_trial = trial(hi)?;
    if !hi_trial.feasible {
        return Err(SimError::NoFeasibleT0 { t_f });
    }
    let mut lo = None;
    let mut step = 1.0;
    while step <= 64.0 {
        let t = t_f - step;
        let tr = trial(t)?;
        if !tr.feasible {
            lo = Some(t);
            break;
        }
        hi = t;
        hi_trial = tr;
        step *= 2.0;
    }
    let mut lo = lo.ok_or(SimError::UnboundedT0 { lower: t_f - 64.0 })?;
    let mut iterations = 0;
    while hi - lo > opts.tol {
        let mid = 0.5 * (lo + hi);
        let tr = trial(mid)?;
        if tr.feasible {
            hi = mid;
            hi_trial = tr;
        } else {
            lo = mid;
        }
        iterations += 1;
    }

    let z_tf = hi_trial.z_tf;
    let ratio = z_tf[0] / problem.z2;
    let mut state = z_tf;
    state[1] = problem.z2;
    let diagnostics = Diagnostics {
        converged: true,
        residual: hi - lo,
        iterations,
        horizon: Some(hi),
        ..Diagnostics::default()
    };
    let local_poi = local_min_derivative(model, &RpvSpec::single(1, problem.z2, t_f)?, m)?;
    let local_ratio = local_poi.state[0] / problem.z2;
    Ok(MinT0Result {
        t0_min: hi,
        poi: Poi::new(state, Method::MinFeasibleT0, diagnostics),
        ratio,
        local_poi,
        local_ratio,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::make_linear2d;

    fn problem(b1: f64) -> MinT0Problem {
        MinT0Problem {
            m: 2,
            z2: 3.0,
            polyhedron: Polyhedron::two_species_boundary(-2.0, b1, -0.25, 111.0),
            t_f: 0.0,
        }
    }

    #[test]
    fn reference_polyhedron() {
        let model = make_linear2d(1.0).unwrap();
        let r = min_feasible_t0(&model, &problem(122.0), &MinT0Options::default()).unwrap();
        assert!((r.t0_min + 2.6056).abs() < 5e-5, "{}", r.t0_min);
        assert!((r.ratio - 0.9993).abs() < 5e-5);
        assert!((r.poi.state[0] - 2.9980).abs() < 5e-5);
        assert!((r.local_poi.state[0] - 2.6471).abs() < 5e-5);
        assert!((r.local_ratio - 0.8824).abs() < 5e-5);
    }

    #[test]
    fn numerical_start_agrees_with_closed_form() {
        let model = make_linear2d(1.0).unwrap();
        let closed = min_feasible_t0(&model, &problem(122.0), &MinT0Options::default()).unwrap();
        let opts = MinT0Options {
            provider: StartProvider::Numerical,
            tol: 1e-8,
            ..MinT0Options::default()
        };
        let numeric = min_feasible_t0(&model, &problem(122.0), &opts).unwrap();
        assert!((closed.t0_min - numeric.t0_min).abs() < 1e-7);
        assert!((closed.ratio - numeric.ratio).abs() < 1e-9);
    }

    #[test]
    fn trajectory_check_matches_start_check() {
        let model = make_linear2d(1.0).unwrap();
        let a = min_feasible_t0(&model, &problem(222.0), &MinT0Options::default()).unwrap();
        let opts = MinT0Options {
            check: ConstraintCheck::AlongTrajectory,
            ..MinT0Options::default()
        };
        let b = min_feasible_t0(&model, &problem(222.0), &opts).unwrap();
        assert!((a.t0_min - b.t0_min).abs() < 1e-8);
    }

    #[test]
    fn region_excluding_the_local_point() {
        let model = make_linear2d(1.0).unwrap();
        // z1 <= 1 excludes every POI near (2.65, 3).
        let mut p = problem(122.0);
        p.polyhedron = p.polyhedron.with_row(vec![1.0, 0.0], 1.0);
        assert!(matches!(
            min_feasible_t0(&model, &p, &MinT0Options::default()),
            Err(SimError::NoFeasibleT0 { .. })
        ));
    }

    #[test]
    fn unbounded_region() {
        let model = make_linear2d(1.0).unwrap();
        let p = MinT0Problem {
            polyhedron: Polyhedron::positive_orthant(2),
            ..problem(0.0)
        };
        assert!(matches!(
            min_feasible_t0(&model, &p, &MinT0Options::default()),
            Err(SimError::UnboundedT0 { .. })
        ));
    }

    #[test]
    fn closed_form_needs_linear_model() {
        let ds = crate::model::make_davis_skodje(3.0).unwrap();
        assert!(min_feasible_t0(&ds, &problem(122.0), &MinT0Options::default()).is_err());
    }
}
