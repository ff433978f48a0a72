use std::fmt;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};

use crate::adjoint::Integrand;
use crate::error::{Result, SimError};
use crate::model::KineticModel;
use crate::taylor::time_derivatives;

pub type StateFn = Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>;

/// Weight in the generalized Lagrangian: a constant or a function of state.
#[derive(Clone)]
pub enum Coefficient {
    Constant(f64),
    StateFn(StateFn),
}

impl Coefficient {
    pub fn state_fn(f: impl Fn(&[f64]) -> f64 + Send + Sync + 'static) -> Self {
        Coefficient::StateFn(Arc::new(f))
    }

    pub fn at(&self, z: &[f64]) -> f64 {
        match self {
            Coefficient::Constant(c) => *c,
            Coefficient::StateFn(f) => f(z),
        }
    }
}

impl fmt::Debug for Coefficient {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Coefficient::Constant(c) => write!(f, "Constant({c})"),
            Coefficient::StateFn(_) => f.write_str("StateFn(..)"),
        }
    }
}

/// Trajectory criteria.
#[derive(Debug, Clone)]
pub enum Objective {
    /// `integral of |d^m z/dt^m|^2` over the horizon.
    DerivativeNorm { m: usize },
    /// `|d^m z/dt^m|^2` at the start of the horizon only.
    EndpointDerivativeNorm { m: usize },
    /// `integral of k1 |dz/dt|^2 - k2 |z|^2`.
    GeneralizedLagrangian { k1: Coefficient, k2: Coefficient },
}

impl Objective {
    pub fn order(&self) -> Option<usize> {
        match self {
            Objective::DerivativeNorm { m } | Objective::EndpointDerivativeNorm { m } => Some(*m),
            Objective::GeneralizedLagrangian { .. } => None,
        }
    }

    pub fn is_integrated(&self) -> bool {
        !matches!(self, Objective::EndpointDerivativeNorm { .. })
    }

    pub(crate) fn validate(&self) -> Result<()> {
        if self.order() == Some(0) {
            return Err(SimError::InvalidParameter(
                "derivative order m must be >= 1".into(),
            ));
        }
        Ok(())
    }

    /// Pointwise value of the criterion at state `z`.
    pub fn pointwise(&self, model: &KineticModel, z: &[f64]) -> Result<f64> {
        match self {
            Objective::DerivativeNorm { m } | Objective::EndpointDerivativeNorm { m } => {
                let d = time_derivatives(model, z, *m)?;
                Ok(d.d(*m).iter().map(|v| v * v).sum())
            }
            Objective::GeneralizedLagrangian { k1, k2 } => {
                let s = model.rhs(z);
                let s2: f64 = s.iter().map(|v| v * v).sum();
                let z2: f64 = z.iter().map(|v| v * v).sum();
                Ok(k1.at(z) * s2 - k2.at(z) * z2)
            }
        }
    }
}

fn matrix_power(a: &DMatrix<f64>, m: usize) -> DMatrix<f64> {
    let mut p = DMatrix::identity(a.nrows(), a.ncols());
    for _ in 0..m {
        p = a * p;
    }
    p
}

impl Integrand for Objective {
    fn value(&self, model: &KineticModel, z: &[f64]) -> Result<f64> {
        self.pointwise(model, z)
    }

    fn gradient(&self, model: &KineticModel, z: &[f64]) -> Result<Vec<f64>> {
        match (self, model.system_matrix()) {
            (
                Objective::DerivativeNorm { m } | Objective::EndpointDerivativeNorm { m },
                Some(a),
            ) => {
                // |A^m z|^2 has gradient 2 (A^m)^T A^m z.
                let p = matrix_power(a, *m);
                let g = p.transpose() * (&p * DVector::from_column_slice(z)) * 2.0;
                Ok(g.as_slice().to_vec())
            }
            _ => crate::adjoint::richardson_gradient(|x| self.pointwise(model, x), z),
        }
    }
}
