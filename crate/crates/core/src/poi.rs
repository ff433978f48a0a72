use std::fmt;

/// Which reconstruction produced a [`Poi`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Method {
    Analytic,
    ZdpLocal { m: usize },
    ZdpNonlocal { m: usize },
    Qssa,
    Fcm,
    Fet,
    Bvp,
    Optimize,
    LocalMinDerivative { m: usize },
    Adjoint,
    MinFeasibleT0,
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Method::Analytic => write!(f, "analytic"),
            Method::ZdpLocal { m } => write!(f, "zdp-local(m={m})"),
            Method::ZdpNonlocal { m } => write!(f, "zdp-nonlocal(m={m})"),
            Method::Qssa => write!(f, "qssa"),
            Method::Fcm => write!(f, "fcm"),
            Method::Fet => write!(f, "fet"),
            Method::Bvp => write!(f, "bvp"),
            Method::Optimize => write!(f, "optimize"),
            Method::LocalMinDerivative { m } => write!(f, "local-min-derivative(m={m})"),
            Method::Adjoint => write!(f, "adjoint"),
            Method::MinFeasibleT0 => write!(f, "min-feasible-t0"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Diagnostics {
    pub converged: bool,
    /// Final residual infinity norm (or simplex/gradient size for minimizers).
    pub residual: f64,
    pub objective: Option<f64>,
    pub iterations: usize,
    /// Horizon start `t0` for nonlocal methods.
    pub horizon: Option<f64>,
    /// Non-fatal conditions, e.g. a trajectory leaving the feasible set.
    pub flags: Vec<String>,
}

impl Diagnostics {
    pub fn exact() -> Self {
        Self {
            converged: true,
            ..Self::default()
        }
    }
}

/// A reconstructed state at the anchor time `t*`.
#[derive(Debug, Clone, PartialEq)]
pub struct Poi {
    pub state: Vec<f64>,
    pub method: Method,
    pub diagnostics: Diagnostics,
}

impl Poi {
    pub fn new(state: Vec<f64>, method: Method, diagnostics: Diagnostics) -> Self {
        Self {
            state,
            method,
            diagnostics,
        }
    }
}
