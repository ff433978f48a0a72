use thiserror::Error;

/// Errors raised by models, solvers and reconstruction methods.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum SimError {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("model `{0}` has no analytic bundle")]
    MissingAnalytic(String),

    #[error("model `{0}` does not support this RPV parameterization analytically")]
    UnsupportedParameterization(String),

    #[error("model `{0}` cannot evaluate its right-hand side over jet arithmetic")]
    NotJetComposable(String),

    #[error("step limit of {max_steps} exhausted at t = {t}")]
    StepLimit { t: f64, max_steps: usize },

    #[error("step size underflow at t = {t} (h = {h})")]
    StepSizeUnderflow { t: f64, h: f64 },

    #[error("Newton iteration inside implicit step failed at t = {t}")]
    ImplicitNewton { t: f64 },

    #[error("non-finite state encountered at t = {t}")]
    NonFinite { t: f64 },

    #[error("singular Jacobian in Newton iteration {iteration}")]
    SingularJacobian { iteration: usize },

    #[error("Newton did not converge: best residual {residual:e} after {iterations} iterations")]
    NewtonDiverged { residual: f64, iterations: usize },

    #[error("minimizer exceeded {max_evals} objective evaluations")]
    MaxEvaluations { max_evals: usize },

    #[error("objective not finite at the starting point")]
    NonFiniteObjective,

    #[error("root lies on a fast direction (stretching ratio {ratio})")]
    FastDirection { ratio: f64 },

    #[error("trajectory leaves the feasible set near t = {t}")]
    Infeasible { t: f64 },

    #[error("finite-difference gradient probe was not finite")]
    GradientProbe,

    #[error("equilibrium input: S(z) = 0")]
    Equilibrium,

    #[error("no feasible t0 below t_f = {t_f}")]
    NoFeasibleT0 { t_f: f64 },

    #[error("feasible t0 unbounded below (checked down to {lower})")]
    UnboundedT0 { lower: f64 },

    #[error("{0}")]
    Config(String),
}

pub type Result<T> = std::result::Result<T, SimError>;
