//! Damped Newton iteration with a forward-difference Jacobian, and single
//! shooting built on top of it.

use nalgebra::{DMatrix, DVector};

use crate::error::{Result, SimError};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NewtonOptions {
    /// Target for the infinity norm of the residual.
    pub tol: f64,
    pub max_iter: usize,
    pub damping: bool,
    /// Relative finite-difference step: `h_j = fd_step * (1 + |x_j|)`.
    pub fd_step: f64,
}

impl Default for NewtonOptions {
    fn default() -> Self {
        Self {
            tol: 1e-10,
            max_iter: 50,
            damping: true,
            fd_step: 1e-7,
        }
    }
}

impl NewtonOptions {
    pub fn with_tol(mut self, tol: f64) -> Self {
        self.tol = tol;
        self
    }
}

/// Outcome of a Newton solve. When `converged` is false, `x` is the iterate
/// with the smallest residual seen.
#[derive(Debug, Clone, PartialEq)]
pub struct NewtonReport {
    pub x: Vec<f64>,
    pub residual: f64,
    pub iterations: usize,
    pub converged: bool,
}

impl NewtonReport {
    pub fn into_result(self) -> Result<Self> {
        if self.converged {
            Ok(self)
        } else {
            Err(SimError::NewtonDiverged {
                residual: self.residual,
                iterations: self.iterations,
            })
        }
    }
}

fn inf_norm(v: &[f64]) -> f64 {
    v.iter().fold(0.0f64, |m, x| {
        if x.is_nan() {
            f64::INFINITY
        } else {
            m.max(x.abs())
        }
    })
}

fn fd_jacobian<F>(
    f: &mut F,
    x: &[f64],
    r: &[f64],
    step: f64,
    iteration: usize,
) -> Result<DMatrix<f64>>
where
    F: FnMut(&[f64]) -> Result<Vec<f64>>,
{
    let (m, n) = (r.len(), x.len());
    let mut jac = DMatrix::zeros(m, n);
    let mut xp = x.to_vec();
    for j in 0..n {
        let h = step * (1.0 + x[j].abs());
        xp[j] = x[j] + h;
        let rp = f(&xp)?;
        xp[j] = x[j];
        if rp.len() != m {
            return Err(SimError::DimensionMismatch {
                expected: m,
                got: rp.len(),
            });
        }
        for i in 0..m {
            jac[(i, j)] = (rp[i] - r[i]) / h;
        }
    }
    if jac.iter().any(|v| !v.is_finite()) {
        return Err(SimError::SingularJacobian { iteration });
    }
    Ok(jac)
}

/// Solves `f(x) = 0` for a square system.
///
/// Errors from `f` at the starting point propagate; failures during line
/// search count as a non-improving trial step.
pub fn newton_solve<F>(mut f: F, x0: &[f64], opts: &NewtonOptions) -> Result<NewtonReport>
where
    F: FnMut(&[f64]) -> Result<Vec<f64>>,
{
    if x0.iter().any(|v| !v.is_finite()) {
        return Err(SimError::InvalidParameter(
            "Newton start point is not finite".into(),
        ));
    }
    let mut x = x0.to_vec();
    let mut r = f(&x)?;
    if r.len() != x.len() {
        return Err(SimError::DimensionMismatch {
            expected: x.len(),
            got: r.len(),
        });
    }
    let mut norm = inf_norm(&r);
    let mut iterations = 0;
    while norm > opts.tol && iterations < opts.max_iter {
        iterations += 1;
        let jac = fd_jacobian(&mut f, &x, &r, opts.fd_step, iterations)?;
        let rhs = DVector::from_iterator(r.len(), r.iter().map(|v| -v));
        let delta = jac
            .lu()
            .solve(&rhs)
            .filter(|d| d.iter().all(|v| v.is_finite()))
            .ok_or(SimError::SingularJacobian {
                iteration: iterations,
            })?;

        let mut alpha = 1.0;
        let mut accepted = None;
        for _ in 0..=30 {
            let trial: Vec<f64> = x
                .iter()
                .zip(delta.iter())
                .map(|(a, d)| a + alpha * d)
                .collect();
            if let Ok(rt) = f(&trial) {
                let nt = inf_norm(&rt);
                if !opts.damping || nt < norm {
                    accepted = Some((trial, rt, nt));
                    break;
                }
            } else if !opts.damping {
                break;
            }
            alpha *= 0.5;
        }
        match accepted {
            Some((xt, rt, nt)) => {
                let step = alpha * delta.amax();
                x = xt;
                r = rt;
                norm = nt;
                if step <= 4.0 * f64::EPSILON * (1.0 + inf_norm(&x)) {
                    break;
                }
            }
            None => break,
        }
    }
    Ok(NewtonReport {
        converged: norm <= opts.tol,
        x,
        residual: norm,
        iterations,
    })
}

/// A square two-point boundary problem posed on unknown boundary values:
/// `residual(u)` integrates and returns the boundary mismatch.
pub struct ShootingProblem<F> {
    pub unknowns: usize,
    pub residual: F,
}

impl<F> ShootingProblem<F>
where
    F: FnMut(&[f64]) -> Result<Vec<f64>>,
{
    pub fn new(unknowns: usize, residual: F) -> Self {
        Self { unknowns, residual }
    }
}

/// Solves a shooting problem; the default tolerance is `1e-9`.
pub fn shoot<F>(
    problem: &mut ShootingProblem<F>,
    u0: &[f64],
    opts: Option<NewtonOptions>,
) -> Result<NewtonReport>
where
    F: FnMut(&[f64]) -> Result<Vec<f64>>,
{
    if u0.len() != problem.unknowns {
        return Err(SimError::DimensionMismatch {
            expected: problem.unknowns,
            got: u0.len(),
        });
    }
    let opts = opts.unwrap_or(NewtonOptions::default().with_tol(1e-9));
    newton_solve(&mut problem.residual, u0, &opts)?.into_result()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn square_root_of_four() {
        let rep = newton_solve(
            |x| Ok(vec![x[0] * x[0] - 4.0]),
            &[3.0],
            &NewtonOptions::default(),
        )
        .unwrap();
        assert!(rep.converged);
        assert_relative_eq!(rep.x[0], 2.0, epsilon = 1e-10);
    }

    #[test]
    fn already_solved_takes_zero_iterations() {
        let rep = newton_solve(|x| Ok(vec![x[0]]), &[0.0], &NewtonOptions::default()).unwrap();
        assert_eq!(rep.iterations, 0);
        assert_eq!(rep.x, vec![0.0]);
    }

    #[test]
    fn singular_jacobian_is_an_error() {
        let err = newton_solve(|_| Ok(vec![1.0]), &[0.0], &NewtonOptions::default()).unwrap_err();
        assert!(matches!(err, SimError::SingularJacobian { .. }));
    }

    #[test]
    fn no_root_returns_best_iterate_flagged() {
        // x^2 + 1 has no real root; the best residual is 1 at x = 0.
        let rep = newton_solve(
            |x| Ok(vec![x[0] * x[0] + 1.0]),
            &[1.0],
            &NewtonOptions::default(),
        )
        .unwrap();
        assert!(!rep.converged);
        assert!(rep.residual >= 1.0 && rep.residual < 1.1);
        assert!(rep.clone().into_result().is_err());
    }

    #[test]
    fn two_dimensional_system() {
        let f = |x: &[f64]| Ok(vec![x[0] + x[1] - 3.0, x[0] * x[1] - 2.0]);
        let rep = newton_solve(f, &[3.0, -0.5], &NewtonOptions::default()).unwrap();
        assert!(rep.converged);
        assert_relative_eq!(rep.x[0] * rep.x[1], 2.0, epsilon = 1e-9);
    }

    #[test]
    fn shooting_trivial_problem() {
        let mut p = ShootingProblem::new(2, |u: &[f64]| Ok(vec![u[0] - 1.5, u[1] + 4.0]));
        let rep = shoot(&mut p, &[0.0, 0.0], None).unwrap();
        assert_relative_eq!(rep.x[0], 1.5, epsilon = 1e-12);
        assert_relative_eq!(rep.x[1], -4.0, epsilon = 1e-12);
        assert!(shoot(&mut p, &[0.0], None).is_err());
    }

    #[test]
    fn non_square_rejected() {
        let err =
            newton_solve(|x| Ok(vec![x[0], x[0]]), &[1.0], &NewtonOptions::default()).unwrap_err();
        assert!(matches!(err, SimError::DimensionMismatch { .. }));
    }
}
