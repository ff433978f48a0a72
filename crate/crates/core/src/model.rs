//! Kinetic models `dz/dt = S(z)` and the three analytically solvable test
//! models: the 2-D linear model, Davis–Skodje, and the 3-D linear model.

use std::f64::consts::SQRT_2;
use std::fmt;
use std::sync::Arc;

use nalgebra::DMatrix;

use crate::error::{Result, SimError};
use crate::jet::{Jet, Real};
use crate::poi::{Diagnostics, Method, Poi};

/// Right-hand side of an autonomous kinetic model.
///
/// `rhs_jet` is what makes higher time derivatives exact. Implementors that
/// only provide `rhs` get [`SimError::NotJetComposable`] from derivative
/// stacks and a central-difference Jacobian.
pub trait VectorField: Send + Sync {
    fn dim(&self) -> usize;

    fn rhs(&self, z: &[f64]) -> Vec<f64>;

    fn rhs_jet(&self, _z: &[Jet]) -> Option<Vec<Jet>> {
        None
    }

    fn jacobian(&self, z: &[f64]) -> DMatrix<f64> {
        let n = self.dim();
        let mut jac = DMatrix::zeros(n, n);
        // Columns from first-order jets when available: exact.
        let probe: Vec<Jet> = z.iter().map(|&x| Jet::constant(x, 1)).collect();
        if self.rhs_jet(&probe).is_some() {
            for j in 0..n {
                let mut zj = probe.clone();
                zj[j] = Jet::variable(z[j], 1);
                let s = self.rhs_jet(&zj).expect("jet evaluation succeeded above");
                for i in 0..n {
                    jac[(i, j)] = s[i].coeff(1);
                }
            }
            return jac;
        }
        let mut zp = z.to_vec();
        for j in 0..n {
            let h = 1e-6 * (1.0 + z[j].abs());
            zp[j] = z[j] + h;
            let fp = self.rhs(&zp);
            zp[j] = z[j] - h;
            let fm = self.rhs(&zp);
            zp[j] = z[j];
            for i in 0..n {
                jac[(i, j)] = (fp[i] - fm[i]) / (2.0 * h);
            }
        }
        jac
    }
}

/// A vector field written once against [`Real`], usable on `f64` and jets.
pub trait GenericField: Send + Sync {
    fn dim(&self) -> usize;
    fn eval<T: Real>(&self, z: &[T]) -> Vec<T>;
}

/// Adapter turning a [`GenericField`] into a jet-capable [`VectorField`].
pub struct Generic<F>(pub F);

impl<F: GenericField> VectorField for Generic<F> {
    fn dim(&self) -> usize {
        self.0.dim()
    }
    fn rhs(&self, z: &[f64]) -> Vec<f64> {
        self.0.eval(z)
    }
    fn rhs_jet(&self, z: &[Jet]) -> Option<Vec<Jet>> {
        Some(self.0.eval(z))
    }
}

/// Closed-form solution, constant fitting and SIM for a built-in model.
pub trait AnalyticBundle: Send + Sync {
    /// Trajectory state at time `t` for integration constants `c`.
    fn solution(&self, c: &[f64], t: f64) -> Vec<f64>;
    /// Inverse of `solution`: constants of the trajectory through `z` at `t`.
    fn fit_constants(&self, z: &[f64], t: f64) -> Vec<f64>;
    /// RPV indices of the natural SIM parameterization.
    fn rpv_indices(&self) -> Vec<usize>;
    /// SIM point for the given fixed components, or `None` if the
    /// parameterization is not covered.
    fn sim_point(&self, fixed_indices: &[usize], fixed_values: &[f64]) -> Option<Vec<f64>>;
    fn equilibrium(&self) -> Vec<f64>;
}

/// Linear inequality region `{ z : a_i . z <= b_i }`.
#[derive(Debug, Clone, PartialEq)]
pub struct Polyhedron {
    rows: Vec<(Vec<f64>, f64)>,
    slack: f64,
}

impl Polyhedron {
    pub const DEFAULT_SLACK: f64 = 1e-10;

    /// Empty region (everything feasible) for states of dimension `_dim`.
    pub fn new(_dim: usize) -> Self {
        Self {
            rows: Vec::new(),
            slack: Self::DEFAULT_SLACK,
        }
    }

    /// `z_i >= 0` for every component, stored as `-z_i <= 0`.
    pub fn positive_orthant(dim: usize) -> Self {
        let mut p = Self::new(dim);
        for i in 0..dim {
            let mut a = vec![0.0; dim];
            a[i] = -1.0;
            p.rows.push((a, 0.0));
        }
        p
    }

    pub fn with_row(mut self, normal: Vec<f64>, offset: f64) -> Self {
        self.rows.push((normal, offset));
        self
    }

    pub fn with_slack(mut self, slack: f64) -> Self {
        self.slack = slack;
        self
    }

    /// The planar region of the minimal-t0 study: positivity plus the two
    /// boundary lines `z1 <= n1 z2 + b1` and `z1 <= n2 z2 + b2`.
    pub fn two_species_boundary(n1: f64, b1: f64, n2: f64, b2: f64) -> Self {
        Self::positive_orthant(2)
            .with_row(vec![1.0, -n1], b1)
            .with_row(vec![1.0, -n2], b2)
    }

    pub fn rows(&self) -> &[(Vec<f64>, f64)] {
        &self.rows
    }

    /// Largest `a . z - b` over all rows; `<= 0` inside.
    pub fn max_violation(&self, z: &[f64]) -> f64 {
        self.rows
            .iter()
            .map(|(a, b)| a.iter().zip(z).map(|(ai, zi)| ai * zi).sum::<f64>() - b)
            .fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn contains(&self, z: &[f64]) -> bool {
        self.max_violation(z) <= self.slack
    }
}

/// Reaction progress variables: which components are fixed, to what, and when.
///
/// Indices are zero-based (`0` is `z1`).
#[derive(Debug, Clone, PartialEq)]
pub struct RpvSpec {
    fixed_indices: Vec<usize>,
    fixed_values: Vec<f64>,
    t_star: f64,
    horizon_t0: Option<f64>,
}

impl RpvSpec {
    pub fn new(fixed_indices: Vec<usize>, fixed_values: Vec<f64>, t_star: f64) -> Result<Self> {
        if fixed_indices.is_empty() {
            return Err(SimError::InvalidParameter("RPV index set is empty".into()));
        }
        if fixed_indices.len() != fixed_values.len() {
            return Err(SimError::DimensionMismatch {
                expected: fixed_indices.len(),
                got: fixed_values.len(),
            });
        }
        let mut pairs: Vec<(usize, f64)> = fixed_indices.into_iter().zip(fixed_values).collect();
        pairs.sort_by_key(|p| p.0);
        if pairs.windows(2).any(|w| w[0].0 == w[1].0) {
            return Err(SimError::InvalidParameter("duplicate RPV index".into()));
        }
        if !t_star.is_finite() || pairs.iter().any(|p| !p.1.is_finite()) {
            return Err(SimError::InvalidParameter("non-finite RPV data".into()));
        }
        let (fixed_indices, fixed_values) = pairs.into_iter().unzip();
        Ok(Self {
            fixed_indices,
            fixed_values,
            t_star,
            horizon_t0: None,
        })
    }

    /// Single fixed component, the common case for planar models.
    pub fn single(index: usize, value: f64, t_star: f64) -> Result<Self> {
        Self::new(vec![index], vec![value], t_star)
    }

    pub fn with_horizon(mut self, t0: f64) -> Result<Self> {
        if !(t0 < self.t_star) {
            return Err(SimError::InvalidParameter(format!(
                "horizon t0 = {t0} must lie before t* = {}",
                self.t_star
            )));
        }
        self.horizon_t0 = Some(t0);
        Ok(self)
    }

    pub fn fixed_indices(&self) -> &[usize] {
        &self.fixed_indices
    }

    pub fn fixed_values(&self) -> &[f64] {
        &self.fixed_values
    }

    pub fn t_star(&self) -> f64 {
        self.t_star
    }

    pub fn horizon_t0(&self) -> Option<f64> {
        self.horizon_t0
    }

    pub fn require_horizon(&self) -> Result<f64> {
        self.horizon_t0
            .ok_or_else(|| SimError::InvalidParameter("method needs a horizon t0 < t*".into()))
    }

    /// Checks the index set is a proper, in-range subset of `0..n`.
    pub fn validate(&self, n: usize) -> Result<()> {
        if self.fixed_indices.iter().any(|&i| i >= n) || self.fixed_indices.len() >= n {
            return Err(SimError::InvalidParameter(format!(
                "RPV indices {:?} must be a proper subset of 0..{n}",
                self.fixed_indices
            )));
        }
        Ok(())
    }

    pub fn free_indices(&self, n: usize) -> Vec<usize> {
        (0..n).filter(|i| !self.fixed_indices.contains(i)).collect()
    }

    /// Full state with the fixed components taken verbatim.
    pub fn assemble(&self, n: usize, free_values: &[f64]) -> Vec<f64> {
        let mut z = vec![0.0; n];
        for (&i, &v) in self.free_indices(n).iter().zip(free_values) {
            z[i] = v;
        }
        for (&i, &v) in self.fixed_indices.iter().zip(&self.fixed_values) {
            z[i] = v;
        }
        z
    }

    pub fn free_values(&self, z: &[f64]) -> Vec<f64> {
        self.free_indices(z.len()).iter().map(|&i| z[i]).collect()
    }

    pub fn fixed_values_of(&self, z: &[f64]) -> Vec<f64> {
        self.fixed_indices.iter().map(|&i| z[i]).collect()
    }
}

/// An immutable kinetic model: vector field plus optional closed forms.
#[derive(Clone)]
pub struct KineticModel {
    name: String,
    field: Arc<dyn VectorField>,
    analytic: Option<Arc<dyn AnalyticBundle>>,
    system_matrix: Option<DMatrix<f64>>,
    feasible_set: Option<Polyhedron>,
}

impl fmt::Debug for KineticModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("KineticModel")
            .field("name", &self.name)
            .field("dim", &self.dim())
            .field("analytic", &self.analytic.is_some())
            .field("linear", &self.system_matrix.is_some())
            .field("feasible_set", &self.feasible_set)
            .finish()
    }
}

impl KineticModel {
    /// A user-supplied model without closed forms.
    pub fn from_field(name: impl Into<String>, field: impl VectorField + 'static) -> Self {
        Self {
            name: name.into(),
            field: Arc::new(field),
            analytic: None,
            system_matrix: None,
            feasible_set: None,
        }
    }

    pub fn from_generic(name: impl Into<String>, field: impl GenericField + 'static) -> Self {
        Self::from_field(name, Generic(field))
    }

    pub fn with_analytic(mut self, bundle: impl AnalyticBundle + 'static) -> Self {
        self.analytic = Some(Arc::new(bundle));
        self
    }

    pub fn with_feasible_set(mut self, set: Polyhedron) -> Self {
        self.feasible_set = Some(set);
        self
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn dim(&self) -> usize {
        self.field.dim()
    }

    pub fn rhs(&self, z: &[f64]) -> Vec<f64> {
        self.field.rhs(z)
    }

    pub fn rhs_jet(&self, z: &[Jet]) -> Result<Vec<Jet>> {
        self.field
            .rhs_jet(z)
            .ok_or_else(|| SimError::NotJetComposable(self.name.clone()))
    }

    pub fn jacobian(&self, z: &[f64]) -> DMatrix<f64> {
        self.field.jacobian(z)
    }

    pub fn analytic(&self) -> Option<&dyn AnalyticBundle> {
        self.analytic.as_deref()
    }

    pub fn require_analytic(&self) -> Result<&dyn AnalyticBundle> {
        self.analytic()
            .ok_or_else(|| SimError::MissingAnalytic(self.name.clone()))
    }

    /// System matrix `A` when the model is linear, `S(z) = A z`.
    pub fn system_matrix(&self) -> Option<&DMatrix<f64>> {
        self.system_matrix.as_ref()
    }

    pub fn feasible_set(&self) -> Option<&Polyhedron> {
        self.feasible_set.as_ref()
    }
}

/// `S(z) = A z` over any [`Real`].
struct LinearField {
    a: DMatrix<f64>,
}

impl GenericField for LinearField {
    fn dim(&self) -> usize {
        self.a.nrows()
    }

    fn eval<T: Real>(&self, z: &[T]) -> Vec<T> {
        (0..self.a.nrows())
            .map(|i| {
                let mut acc = z[0].clone() * self.a[(i, 0)];
                for (j, zj) in z.iter().enumerate().skip(1) {
                    acc = acc + zj.clone() * self.a[(i, j)];
                }
                acc
            })
            .collect()
    }
}

struct LinearFieldExact(Generic<LinearField>);

impl VectorField for LinearFieldExact {
    fn dim(&self) -> usize {
        self.0.dim()
    }
    fn rhs(&self, z: &[f64]) -> Vec<f64> {
        self.0.rhs(z)
    }
    fn rhs_jet(&self, z: &[Jet]) -> Option<Vec<Jet>> {
        self.0.rhs_jet(z)
    }
    fn jacobian(&self, _z: &[f64]) -> DMatrix<f64> {
        self.0 .0.a.clone()
    }
}

fn linear_model(
    name: &str,
    a: DMatrix<f64>,
    bundle: impl AnalyticBundle + 'static,
) -> KineticModel {
    let field = LinearFieldExact(Generic(LinearField { a: a.clone() }));
    let mut model = KineticModel::from_field(name, field).with_analytic(bundle);
    model.system_matrix = Some(a);
    model
}

fn require_positive(name: &str, value: f64) -> Result<()> {
    if value > 0.0 && value.is_finite() {
        Ok(())
    } else {
        Err(SimError::InvalidParameter(format!(
            "{name} must be positive and finite, got {value}"
        )))
    }
}

/// Closed forms of the planar linear model.
#[derive(Debug, Clone, Copy)]
pub struct Linear2dAnalytic {
    pub gamma: f64,
}

impl AnalyticBundle for Linear2dAnalytic {
    fn solution(&self, c: &[f64], t: f64) -> Vec<f64> {
        let slow = c[0] * (-t).exp();
        let fast = c[1] * ((-1.0 - self.gamma) * t).exp();
        vec![slow + fast, slow - fast]
    }

    fn fit_constants(&self, z: &[f64], t: f64) -> Vec<f64> {
        vec![
            0.5 * (z[0] + z[1]) * t.exp(),
            0.5 * (z[0] - z[1]) * ((1.0 + self.gamma) * t).exp(),
        ]
    }

    fn rpv_indices(&self) -> Vec<usize> {
        vec![1]
    }

    fn sim_point(&self, fixed_indices: &[usize], fixed_values: &[f64]) -> Option<Vec<f64>> {
        match fixed_indices {
            [_] => Some(vec![fixed_values[0]; 2]),
            _ => None,
        }
    }

    fn equilibrium(&self) -> Vec<f64> {
        vec![0.0, 0.0]
    }
}

/// The planar linear model with spectral gap `gamma`; SIM `z1 = z2`.
pub fn make_linear2d(gamma: f64) -> Result<KineticModel> {
    require_positive("gamma", gamma)?;
    let g2 = 0.5 * gamma;
    let a = DMatrix::from_row_slice(2, 2, &[-1.0 - g2, g2, g2, -1.0 - g2]);
    Ok(linear_model("linear2d", a, Linear2dAnalytic { gamma }))
}

/// Davis–Skodje vector field.
#[derive(Debug, Clone, Copy)]
pub struct DavisSkodje {
    pub gamma: f64,
}

impl DavisSkodje {
    /// The forcing term `((gamma-1) z1 + gamma z1^2) / (1+z1)^2`.
    pub fn forcing<T: Real>(&self, z1: &T) -> T {
        let g = self.gamma;
        let num = z1.clone() * (g - 1.0) + z1.clone() * z1.clone() * g;
        let den = (z1.clone() + 1.0).powi(2);
        num / den
    }

    fn forcing_slope(&self, z1: f64) -> f64 {
        self.gamma / (1.0 + z1).powi(2) - (1.0 - z1) / (1.0 + z1).powi(3)
    }
}

impl GenericField for DavisSkodje {
    fn dim(&self) -> usize {
        2
    }

    fn eval<T: Real>(&self, z: &[T]) -> Vec<T> {
        vec![
            -z[0].clone(),
            -(z[1].clone() * self.gamma) + self.forcing(&z[0]),
        ]
    }
}

struct DavisSkodjeField(DavisSkodje);

impl VectorField for DavisSkodjeField {
    fn dim(&self) -> usize {
        2
    }
    fn rhs(&self, z: &[f64]) -> Vec<f64> {
        self.0.eval(z)
    }
    fn rhs_jet(&self, z: &[Jet]) -> Option<Vec<Jet>> {
        Some(self.0.eval(z))
    }
    fn jacobian(&self, z: &[f64]) -> DMatrix<f64> {
        DMatrix::from_row_slice(
            2,
            2,
            &[-1.0, 0.0, self.0.forcing_slope(z[0]), -self.0.gamma],
        )
    }
}

#[derive(Debug, Clone, Copy)]
pub struct DavisSkodjeAnalytic {
    pub gamma: f64,
}

impl AnalyticBundle for DavisSkodjeAnalytic {
    fn solution(&self, c: &[f64], t: f64) -> Vec<f64> {
        vec![
            c[0] * (-t).exp(),
            c[1] * (-self.gamma * t).exp() + c[0] / (c[0] + t.exp()),
        ]
    }

    fn fit_constants(&self, z: &[f64], t: f64) -> Vec<f64> {
        let c1 = z[0] * t.exp();
        let c2 = (self.gamma * t).exp() * (z[1] - c1 / (c1 + t.exp()));
        vec![c1, c2]
    }

    fn rpv_indices(&self) -> Vec<usize> {
        vec![0]
    }

    fn sim_point(&self, fixed_indices: &[usize], fixed_values: &[f64]) -> Option<Vec<f64>> {
        match fixed_indices {
            [0] => {
                let z1 = fixed_values[0];
                Some(vec![z1, z1 / (z1 + 1.0)])
            }
            [1] if fixed_values[0] < 1.0 => {
                let z2 = fixed_values[0];
                Some(vec![z2 / (1.0 - z2), z2])
            }
            _ => None,
        }
    }

    fn equilibrium(&self) -> Vec<f64> {
        vec![0.0, 0.0]
    }
}

/// The Davis–Skodje model; SIM `z2 = z1 / (1 + z1)`.
pub fn make_davis_skodje(gamma: f64) -> Result<KineticModel> {
    if !(gamma > 1.0 && gamma.is_finite()) {
        return Err(SimError::InvalidParameter(format!(
            "Davis-Skodje gamma must exceed 1, got {gamma}"
        )));
    }
    let field = DavisSkodjeField(DavisSkodje { gamma });
    Ok(
        KineticModel::from_field("davis-skodje", field)
            .with_analytic(DavisSkodjeAnalytic { gamma }),
    )
}

#[derive(Debug, Clone, Copy)]
pub struct Linear3dAnalytic {
    pub gamma1: f64,
    pub gamma2: f64,
}

impl AnalyticBundle for Linear3dAnalytic {
    fn solution(&self, c: &[f64], t: f64) -> Vec<f64> {
        let e1 = c[0] * (-t).exp();
        let e2 = c[1] * ((-1.0 - self.gamma1) * t).exp();
        let e3 = c[2] * ((-1.0 - self.gamma2) * t).exp();
        vec![e1 + e2 + e3, SQRT_2 * (e1 - e2), e1 + e2 - e3]
    }

    fn fit_constants(&self, z: &[f64], t: f64) -> Vec<f64> {
        // Eigenvectors (1, sqrt2, 1), (1, -sqrt2, 1), (1, 0, -1) are orthogonal.
        vec![
            0.25 * (z[0] + SQRT_2 * z[1] + z[2]) * t.exp(),
            0.25 * (z[0] - SQRT_2 * z[1] + z[2]) * ((1.0 + self.gamma1) * t).exp(),
            0.5 * (z[0] - z[2]) * ((1.0 + self.gamma2) * t).exp(),
        ]
    }

    fn rpv_indices(&self) -> Vec<usize> {
        vec![0, 2]
    }

    fn sim_point(&self, fixed_indices: &[usize], fixed_values: &[f64]) -> Option<Vec<f64>> {
        match fixed_indices {
            [0, 2] => {
                let (z1, z3) = (fixed_values[0], fixed_values[1]);
                Some(vec![z1, (z1 + z3) / SQRT_2, z3])
            }
            _ => None,
        }
    }

    fn equilibrium(&self) -> Vec<f64> {
        vec![0.0; 3]
    }
}

/// The 3-D linear model; 2-D slow manifold `z2 = (z1 + z3) / sqrt 2`.
pub fn make_linear3d(gamma1: f64, gamma2: f64) -> Result<KineticModel> {
    require_positive("gamma1", gamma1)?;
    require_positive("gamma2", gamma2)?;
    let r = SQRT_2 * gamma1 / 4.0;
    let diag = -1.0 - gamma1 / 4.0 - gamma2 / 2.0;
    let cross = gamma2 / 2.0 - gamma1 / 4.0;
    #[rustfmt::skip]
    let a = DMatrix::from_row_slice(3, 3, &[
        diag,  r,                    cross,
        r,     -(1.0 + gamma1 / 2.0), r,
        cross, r,                    diag,
    ]);
    Ok(linear_model(
        "linear3d",
        a,
        Linear3dAnalytic { gamma1, gamma2 },
    ))
}

/// The exact SIM point for the RPV values, from the model's closed form.
pub fn analytic_sim_point(model: &KineticModel, rpv: &RpvSpec) -> Result<Poi> {
    rpv.validate(model.dim())?;
    let bundle = model.require_analytic()?;
    let mut state = bundle
        .sim_point(rpv.fixed_indices(), rpv.fixed_values())
        .ok_or_else(|| SimError::UnsupportedParameterization(model.name().to_string()))?;
    for (&i, &v) in rpv.fixed_indices().iter().zip(rpv.fixed_values()) {
        state[i] = v;
    }
    Ok(Poi::new(state, Method::Analytic, Diagnostics::exact()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn assert_vec(a: &[f64], b: &[f64], tol: f64) {
        assert_eq!(a.len(), b.len());
        for (x, y) in a.iter().zip(b) {
            assert!((x - y).abs() <= tol, "{a:?} vs {b:?}");
        }
    }

    #[test]
    fn linear2d_rhs_examples() {
        let m = make_linear2d(2.0).unwrap();
        assert_vec(&m.rhs(&[1.0, 1.0]), &[-1.0, -1.0], 0.0);
        assert_vec(&m.rhs(&[1.0, -1.0]), &[-3.0, 3.0], 0.0);
        let c = m.analytic().unwrap().fit_constants(&[5.0, 5.0], 0.0);
        assert_vec(&c, &[5.0, 0.0], 0.0);
    }

    #[test]
    fn parameter_validation() {
        assert!(make_linear2d(0.0).is_err());
        assert!(make_linear2d(-1.0).is_err());
        assert!(make_davis_skodje(1.0).is_err());
        assert!(make_davis_skodje(0.5).is_err());
        assert!(make_linear3d(1.0, 0.0).is_err());
        assert!(make_linear3d(-2.0, 1.0).is_err());
    }

    #[test]
    fn davis_skodje_examples() {
        let m = make_davis_skodje(3.0).unwrap();
        let s = m.rhs(&[2.0, 2.0 / 3.0]);
        assert_relative_eq!(s[0], -2.0, epsilon = 1e-15);
        assert_relative_eq!(s[1], -2.0 / 9.0, epsilon = 1e-15);
        assert_vec(&m.rhs(&[0.0, 0.0]), &[0.0, 0.0], 0.0);
        let c = m.analytic().unwrap().fit_constants(&[2.0, 2.0 / 3.0], 0.0);
        assert_relative_eq!(c[0], 2.0);
        assert!(c[1].abs() < 1e-15);
    }

    #[test]
    fn linear3d_examples() {
        let m = make_linear3d(2.0, 4.0).unwrap();
        let s = m.rhs(&[1.0, SQRT_2, 1.0]);
        assert_vec(&s, &[-1.0, -SQRT_2, -1.0], 1e-14);
        let c = m
            .analytic()
            .unwrap()
            .fit_constants(&[1.0, SQRT_2, 1.0], 0.0);
        assert_vec(&c, &[1.0, 0.0, 0.0], 1e-15);
        let p = m
            .analytic()
            .unwrap()
            .sim_point(&[0, 2], &[1.0, 1.0])
            .unwrap();
        assert_relative_eq!(p[1], SQRT_2, epsilon = 1e-15);
    }

    #[test]
    fn analytic_sim_points() {
        let lin = make_linear2d(2.0).unwrap();
        let p = analytic_sim_point(&lin, &RpvSpec::single(1, 5.0, 0.0).unwrap()).unwrap();
        assert_eq!(p.state, vec![5.0, 5.0]);

        let ds = make_davis_skodje(3.0).unwrap();
        let p = analytic_sim_point(&ds, &RpvSpec::single(0, 2.0, 0.0).unwrap()).unwrap();
        assert_relative_eq!(p.state[1], 2.0 / 3.0, epsilon = 1e-15);

        let l3 = make_linear3d(2.0, 4.0).unwrap();
        let rpv = RpvSpec::new(vec![0, 2], vec![0.0, 0.0], 0.0).unwrap();
        assert_eq!(analytic_sim_point(&l3, &rpv).unwrap().state, vec![0.0; 3]);
    }

    #[test]
    fn analytic_sim_point_needs_bundle() {
        let custom = KineticModel::from_generic(
            "custom",
            LinearField {
                a: DMatrix::identity(2, 2) * -1.0,
            },
        );
        let rpv = RpvSpec::single(0, 1.0, 0.0).unwrap();
        assert!(matches!(
            analytic_sim_point(&custom, &rpv),
            Err(SimError::MissingAnalytic(_))
        ));
    }

    #[test]
    fn rpv_validation() {
        assert!(RpvSpec::new(vec![], vec![], 0.0).is_err());
        assert!(RpvSpec::new(vec![0, 0], vec![1.0, 2.0], 0.0).is_err());
        let r = RpvSpec::single(1, 5.0, 0.0).unwrap();
        assert!(r.validate(2).is_ok());
        assert!(r.validate(1).is_err());
        assert!(RpvSpec::single(0, 1.0, 0.0)
            .unwrap()
            .with_horizon(0.5)
            .is_err());
        let r = RpvSpec::new(vec![2, 0], vec![3.0, 1.0], 0.0).unwrap();
        assert_eq!(r.fixed_indices(), &[0, 2]);
        assert_eq!(r.fixed_values(), &[1.0, 3.0]);
        assert_eq!(r.assemble(3, &[7.0]), vec![1.0, 7.0, 3.0]);
    }

    #[test]
    fn polyhedron_membership() {
        let p = Polyhedron::two_species_boundary(-2.0, 122.0, -0.25, 111.0);
        assert!(p.contains(&[1.0, 1.0]));
        assert!(!p.contains(&[-1e-6, 1.0]));
        assert!(p.contains(&[-1e-11, 1.0]));
        // z1 + 2 z2 = 122 exactly on B1
        assert!(p.contains(&[2.0, 60.0]));
        assert!(!p.contains(&[2.0, 60.001]));
    }

    #[test]
    fn jet_jacobian_matches_analytic() {
        let ds = DavisSkodje { gamma: 3.0 };
        let generic = Generic(ds);
        let z = [0.7, -0.2];
        let a = generic.jacobian(&z);
        let b = DavisSkodjeField(ds).jacobian(&z);
        for i in 0..2 {
            for j in 0..2 {
                assert_relative_eq!(a[(i, j)], b[(i, j)], epsilon = 1e-14);
            }
        }
    }
}
