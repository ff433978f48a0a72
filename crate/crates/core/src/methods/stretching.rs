use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::error::{Result, SimError};
use crate::model::KineticModel;

/// Tangential and normal stretching rates of the flow at a state.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StretchingRates {
    pub omega_tau: f64,
    pub omega_nu: f64,
    /// `omega_nu / omega_tau`; above one where the flow along `S` is
    /// slower than the attraction towards it.
    pub ratio: f64,
}

pub fn stretching_rates(model: &KineticModel, z: &[f64]) -> Result<StretchingRates> {
    let n = model.dim();
    let s = DVector::from_vec(model.rhs(z));
    let norm = s.norm();
    if norm == 0.0 {
        return Err(SimError::Equilibrium);
    }
    let tangent = &s / norm;
    let jac = model.jacobian(z);
    let omega_tau = tangent.dot(&(&jac * &tangent));
    let omega_nu = if n == 2 {
        let normal = DVector::from_vec(vec![tangent[1], -tangent[0]]);
        normal.dot(&(&jac * &normal))
    } else {
        let sym = (&jac + jac.transpose()) * 0.5;
        let basis = complement_basis(&tangent);
        let restricted = basis.transpose() * sym * &basis;
        SymmetricEigen::new(restricted).eigenvalues.max()
    };
    Ok(StretchingRates {
        omega_tau,
        omega_nu,
        ratio: omega_nu / omega_tau,
    })
}

/// Orthonormal basis (as columns) of the complement of the unit vector `u`.
fn complement_basis(u: &DVector<f64>) -> DMatrix<f64> {
    let n = u.len();
    let mut cols: Vec<DVector<f64>> = Vec::with_capacity(n - 1);
    for k in 0..n {
        if cols.len() == n - 1 {
            break;
        }
        let mut v = DVector::zeros(n);
        v[k] = 1.0;
        v -= u * u.dot(&v);
        for c in &cols {
            v -= c * c.dot(&v);
        }
        let len = v.norm();
        if len > 1e-8 {
            cols.push(v / len);
        }
    }
    DMatrix::from_columns(&cols)
}
