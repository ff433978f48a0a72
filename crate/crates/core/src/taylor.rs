//! Exact time derivatives `d^k z / dt^k` along the flow, by propagating a
//! truncated Taylor polynomial through the vector field.

use nalgebra::DMatrix;

use crate::error::{Result, SimError};
use crate::jet::Jet;
use crate::model::KineticModel;

/// `d[k] = d^k z / dt^k` at the base state, for `k = 1..=m`.
#[derive(Debug, Clone, PartialEq)]
pub struct DerivativeStack {
    pub base: Vec<f64>,
    derivs: Vec<Vec<f64>>,
}

impl DerivativeStack {
    pub fn order(&self) -> usize {
        self.derivs.len()
    }

    /// The `k`-th derivative, `1 <= k <= order()`.
    pub fn d(&self, k: usize) -> &[f64] {
        assert!(
            k >= 1 && k <= self.derivs.len(),
            "derivative order {k} out of range"
        );
        &self.derivs[k - 1]
    }
}

/// Taylor coefficients `z_0..=z_m` of the trajectory through `z`.
///
/// Uses `(k+1) z_{k+1} = [S(z(t))]_k`; after step `k` the first `k+1`
/// coefficients of `z(t)` are final, so `S` sees a correct degree-`k` prefix.
pub fn taylor_coefficients(model: &KineticModel, z: &[f64], m: usize) -> Result<Vec<Vec<f64>>> {
    let n = model.dim();
    if z.len() != n {
        return Err(SimError::DimensionMismatch {
            expected: n,
            got: z.len(),
        });
    }
    let mut coeffs: Vec<Vec<f64>> = vec![z.to_vec()];
    for k in 0..m {
        let jets: Vec<Jet> = (0..n)
            .map(|i| Jet::new((0..=k).map(|j| coeffs[j][i]).collect()))
            .collect();
        let s = model.rhs_jet(&jets)?;
        coeffs.push(s.iter().map(|si| si.coeff(k) / (k + 1) as f64).collect());
    }
    Ok(coeffs)
}

pub fn time_derivatives(model: &KineticModel, z: &[f64], m: usize) -> Result<DerivativeStack> {
    if m == 0 {
        return Err(SimError::InvalidParameter(
            "derivative order m must be >= 1".into(),
        ));
    }
    let coeffs = taylor_coefficients(model, z, m)?;
    let mut factorial = 1.0;
    let derivs = coeffs
        .into_iter()
        .enumerate()
        .skip(1)
        .map(|(k, c)| {
            factorial *= k as f64;
            c.into_iter().map(|x| x * factorial).collect()
        })
        .collect();
    Ok(DerivativeStack {
        base: z.to_vec(),
        derivs,
    })
}

/// `J_S(z) S(z)`, the second time derivative.
pub fn second_derivative(model: &KineticModel, z: &[f64]) -> Vec<f64> {
    let s = nalgebra::DVector::from_vec(model.rhs(z));
    (model.jacobian(z) * s).as_slice().to_vec()
}

/// `det(d[1], ..., d[n])`.
pub fn flow_curvature_det(model: &KineticModel, z: &[f64]) -> Result<f64> {
    let n = model.dim();
    if n < 2 {
        return Err(SimError::InvalidParameter(
            "flow curvature needs dimension >= 2".into(),
        ));
    }
    let stack = time_derivatives(model, z, n)?;
    let cols = DMatrix::from_fn(n, n, |i, j| stack.d(j + 1)[i]);
    Ok(cols.determinant())
}

/// Diagonal entry of `A^m` for the planar linear model.
pub fn linear2d_power_diagonal(gamma: f64, m: u32) -> f64 {
    let sign = if m.is_multiple_of(2) { 1.0 } else { -1.0 };
    0.5 * (sign + (-1.0 - gamma).powi(m as i32))
}

/// `A^m` for the planar linear model from its eigen-decomposition.
pub fn linear2d_matrix_power(gamma: f64, m: u32) -> DMatrix<f64> {
    let sign = if m.is_multiple_of(2) { 1.0 } else { -1.0 };
    let d = linear2d_power_diagonal(gamma, m);
    let off = sign - d;
    DMatrix::from_row_slice(2, 2, &[d, off, off, d])
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{make_davis_skodje, make_linear2d, make_linear3d};
    use approx::assert_relative_eq;

    #[test]
    fn slow_and_fast_eigenvectors() {
        let m = make_linear2d(2.0).unwrap();
        let s = time_derivatives(&m, &[1.0, 1.0], 3).unwrap();
        for k in 1..=3 {
            let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
            assert_eq!(s.d(k), &[sign, sign]);
        }
        let s = time_derivatives(&m, &[1.0, -1.0], 2).unwrap();
        assert_eq!(s.d(1), &[-3.0, 3.0]);
        assert_eq!(s.d(2), &[9.0, -9.0]);
    }

    #[test]
    fn equilibrium_has_zero_derivatives() {
        let ds = make_davis_skodje(3.0).unwrap();
        let s = time_derivatives(&ds, &[0.0, 0.0], 6).unwrap();
        for k in 1..=6 {
            assert_eq!(s.d(k), &[0.0, 0.0]);
        }
    }

    #[test]
    fn order_zero_rejected() {
        let m = make_linear2d(1.0).unwrap();
        assert!(time_derivatives(&m, &[1.0, 1.0], 0).is_err());
    }

    #[test]
    fn second_derivative_examples() {
        let m = make_linear2d(2.0).unwrap();
        assert_eq!(second_derivative(&m, &[1.0, 1.0]), vec![1.0, 1.0]);
        assert_eq!(second_derivative(&m, &[1.0, -1.0]), vec![9.0, -9.0]);
        let ds = make_davis_skodje(3.0).unwrap();
        assert_eq!(second_derivative(&ds, &[0.0, 0.0]), vec![0.0, 0.0]);
        let z = [0.8, 0.1];
        let a = second_derivative(&ds, &z);
        let b = time_derivatives(&ds, &z, 2).unwrap();
        for i in 0..2 {
            assert_relative_eq!(a[i], b.d(2)[i], epsilon = 1e-12);
        }
    }

    #[test]
    fn curvature_det_on_linear_model() {
        let m = make_linear2d(2.0).unwrap();
        assert_eq!(flow_curvature_det(&m, &[1.0, 1.0]).unwrap(), 0.0);
        assert!(flow_curvature_det(&m, &[1.0, -1.0]).unwrap().abs() < 1e-12);
        // Independent 2x2 arithmetic: A = [[-2, 1], [1, -2]], z = (2, 1).
        let az = [-4.0 + 1.0, 2.0 - 2.0];
        let a2z = [-2.0 * az[0] + az[1], az[0] - 2.0 * az[1]];
        let expect = az[0] * a2z[1] - az[1] * a2z[0];
        assert_relative_eq!(
            flow_curvature_det(&m, &[2.0, 1.0]).unwrap(),
            expect,
            epsilon = 1e-12
        );
        assert!(expect != 0.0);
    }

    #[test]
    fn curvature_det_changes_sign_across_manifold() {
        let ds = make_davis_skodje(3.0).unwrap();
        let below = flow_curvature_det(&ds, &[2.0, 2.0 / 3.0 - 0.1]).unwrap();
        let above = flow_curvature_det(&ds, &[2.0, 2.0 / 3.0 + 0.1]).unwrap();
        assert!(above != 0.0);
        assert!(below * above < 0.0);
    }

    #[test]
    fn curvature_det_needs_two_dimensions() {
        let m = crate::model::KineticModel::from_generic("decay", Decay);
        assert!(flow_curvature_det(&m, &[1.0]).is_err());
    }

    struct Decay;
    impl crate::model::GenericField for Decay {
        fn dim(&self) -> usize {
            1
        }
        fn eval<T: crate::jet::Real>(&self, z: &[T]) -> Vec<T> {
            vec![-z[0].clone()]
        }
    }

    #[test]
    fn spectral_power_matches_repeated_product() {
        for &gamma in &[0.5, 2.0, 7.0] {
            let a = make_linear2d(gamma)
                .unwrap()
                .system_matrix()
                .unwrap()
                .clone();
            let mut p = DMatrix::identity(2, 2);
            for m in 1..=8u32 {
                p = &a * &p;
                let q = linear2d_matrix_power(gamma, m);
                for i in 0..4 {
                    assert_relative_eq!(p[i], q[i], max_relative = 1e-13, epsilon = 1e-13);
                }
            }
        }
    }

    #[test]
    fn power_diagonal_polynomial_ends() {
        // d_m = (-1)^m (1 + (m/2) gamma + ... + gamma^m / 2); check the printed ends.
        for m in 1..=3u32 {
            let sign = if m.is_multiple_of(2) { 1.0 } else { -1.0 };
            let gamma = 1e-7;
            let d = linear2d_power_diagonal(gamma, m);
            assert_relative_eq!(d * sign, 1.0 + 0.5 * m as f64 * gamma, epsilon = 1e-12);
            let big = 1e6;
            let d = linear2d_power_diagonal(big, m);
            assert_relative_eq!(d * sign / big.powi(m as i32), 0.5, epsilon = 1e-5);
        }
    }

    #[test]
    fn linear3d_powers() {
        let m = make_linear3d(2.0, 4.0).unwrap();
        let a = m.system_matrix().unwrap().clone();
        let z = [0.3, -1.1, 0.7];
        let s = time_derivatives(&m, &z, 8).unwrap();
        let mut v = nalgebra::DVector::from_column_slice(&z);
        for k in 1..=8 {
            v = &a * v;
            for i in 0..3 {
                assert!((s.d(k)[i] - v[i]).abs() <= 1e-13 * v.amax().max(1.0));
            }
        }
    }
}
