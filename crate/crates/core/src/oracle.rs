//! Closed-form reference values for the planar linear and Davis–Skodje
//! models. Everything here uses elementary functions only and never touches
//! the integrators, so it can serve as an independent check on them.
//!
//! Most formulas are evaluated in a form divided through by the dominant
//! exponential, so that horizons like `t0 = -100` neither overflow nor
//! cancel. The `*_verbatim` variants keep the original arrangement of
//! exponentials and exist to cross-check the rearrangements.

use std::fmt;

use crate::taylor::linear2d_power_diagonal;

fn sign_pow(m: u32) -> f64 {
    if m.is_multiple_of(2) {
        1.0
    } else {
        -1.0
    }
}

/// POI free component `z1(t_f)` of the shooting formulation on the linear
/// model, with `z1(t0) = K` and `z2(t_f)` fixed.
pub fn linear_bvp_poi(gamma: f64, t0: f64, t_f: f64, k: f64, z2_tf: f64) -> f64 {
    let tau = t_f - t0;
    let slow = (-gamma * tau).exp();
    let fast = (-(1.0 + gamma) * tau).exp();
    z2_tf + 2.0 * (k * fast - z2_tf * slow) / (1.0 + slow)
}

pub fn linear_bvp_poi_verbatim(gamma: f64, t0: f64, t_f: f64, k: f64, z2_tf: f64) -> f64 {
    let num = 2.0 * (k / z2_tf) * ((-2.0 - gamma) * t_f).exp() * t0.exp()
        - 2.0 * ((-1.0 - gamma) * t_f).exp();
    let den = ((-1.0 - gamma) * t_f).exp() + (-t_f).exp() * (-gamma * t0).exp();
    z2_tf * (1.0 + num / den)
}

/// POI free component `z2(t_f)` of the shooting formulation on
/// Davis–Skodje, with `z2(t0) = K` and `z1(t_f)` fixed.
pub fn ds_bvp_poi(gamma: f64, t0: f64, t_f: f64, k: f64, z1_tf: f64) -> f64 {
    let decay = (gamma * (t0 - t_f)).exp();
    z1_tf / (z1_tf + 1.0) + k * decay - z1_tf * decay / (z1_tf + (t0 - t_f).exp())
}

/// `(1+gamma)^(2m-1)`: magnitude of the weight that the m-th derivative
/// objective puts on the fast mode relative to the slow one.
pub fn fast_mode_weight(gamma: f64, m: u32) -> f64 {
    (1.0 + gamma).powi(2 * m as i32 - 1)
}

/// POI `z1(t_f)` minimizing the integrated squared m-th derivative norm
/// over `[t0, t_f]` on the linear model.
pub fn linear_opt_poi(gamma: f64, m: u32, t0: f64, t_f: f64, z2_tf: f64) -> f64 {
    z2_tf * (1.0 + linear_opt_error(gamma, m, t_f - t0))
}

/// Relative deviation of [`linear_opt_poi`] from the SIM for horizon `tau`.
/// At `tau = 0` this is the pointwise limit `-2 / (1 + (1+gamma)^(2m))`.
pub fn linear_opt_error(gamma: f64, m: u32, tau: f64) -> f64 {
    let p = fast_mode_weight(gamma, m);
    if tau == 0.0 {
        return -2.0 / (1.0 + p * (1.0 + gamma));
    }
    let slow = (-2.0 * gamma * tau).exp();
    let e2 = (-2.0 * tau).exp_m1();
    let num = 2.0 * slow * e2;
    let den = -slow * e2 - p * (-2.0 * (1.0 + gamma) * tau).exp_m1();
    num / den
}

/// Same value with the exponentials arranged as in the original display
/// (`xi = (-1-gamma)^(2m-1)`, which is negative).
pub fn linear_opt_poi_verbatim(gamma: f64, m: u32, t0: f64, t_f: f64, z2_tf: f64) -> f64 {
    let xi = (-1.0 - gamma).powi(2 * m as i32 - 1);
    let e = f64::exp;
    let num =
        2.0 * e(-2.0 * gamma * t_f) * e(-2.0 * t_f) - 2.0 * e(-2.0 * gamma * t_f) * e(-2.0 * t0);
    let den = e(-2.0 * gamma * t_f) * e(-2.0 * t0)
        - e(-2.0 * gamma * t_f) * e(-2.0 * t_f)
        - xi * e((-1.0 - gamma) * 2.0 * t0)
        + xi * e((-1.0 - gamma) * 2.0 * t_f);
    z2_tf * (1.0 + num / den)
}

/// POI `z1(t_f)` of the nonlocal zero-derivative condition: m-th derivative
/// of `z1` vanishing at `t0`, `z2(t_f)` fixed.
pub fn zdp_nonlocal_linear_poi(gamma: f64, m: u32, t0: f64, t_f: f64, z2_tf: f64) -> f64 {
    let slow = (-gamma * (t_f - t0)).exp();
    z2_tf * (1.0 - 2.0 * slow / (slow + (1.0 + gamma).powi(m as i32)))
}

pub fn zdp_nonlocal_linear_poi_verbatim(gamma: f64, m: u32, t0: f64, t_f: f64, z2_tf: f64) -> f64 {
    let s = sign_pow(m);
    let fast = ((-1.0 - gamma) * t_f).exp();
    let num = 2.0 * (-s) * fast;
    let den = s * fast + (-1.0 - gamma).powi(m as i32) * (-gamma * t0).exp() * (-t_f).exp();
    z2_tf * (1.0 + num / den)
}

/// Constants of the closed-form primal/costate solution of the optimal
/// boundary-control problem on the linear model with `z2(t_f)` fixed:
///
/// `z = c1 e^{-t} (1,1) + c2 e^{-(1+gamma)t} (1,-1)`,
/// `lambda = (c3 e^t + c1 e^{-t}) (1,1) + (c4 e^{(1+gamma)t} + xi c2 e^{-(1+gamma)t}) (1,-1)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinearAdjointConstants {
    pub c1: f64,
    pub c2: f64,
    pub c3: f64,
    pub c4: f64,
    /// `(2 d_m - (-1)^m)^2 / (1+gamma)`.
    pub xi: f64,
    /// Diagonal of `A^m`.
    pub d_m: f64,
    pub gamma: f64,
}

impl LinearAdjointConstants {
    /// `H = -2 c1 c3 - 2 c2 c4 (1+gamma)`.
    pub fn hamiltonian(&self) -> f64 {
        -2.0 * self.c1 * self.c3 - 2.0 * self.c2 * self.c4 * (1.0 + self.gamma)
    }

    pub fn state(&self, t: f64) -> [f64; 2] {
        let slow = self.c1 * (-t).exp();
        let fast = self.c2 * (-(1.0 + self.gamma) * t).exp();
        [slow + fast, slow - fast]
    }

    pub fn costate(&self, t: f64) -> [f64; 2] {
        let g1 = 1.0 + self.gamma;
        let sym = self.c3 * t.exp() + self.c1 * (-t).exp();
        let anti = self.c4 * (g1 * t).exp() + self.xi * self.c2 * (-g1 * t).exp();
        [sym + anti, sym - anti]
    }

    /// `z1(t_f)` implied by the constants.
    pub fn poi_z1(&self, t_f: f64) -> f64 {
        self.state(t_f)[0]
    }
}

/// Constants of the optimal boundary-control solution, evaluated as printed
/// (exponentials combined pairwise into single `exp` calls).
pub fn linear_adjoint_constants(
    gamma: f64,
    m: u32,
    t0: f64,
    t_f: f64,
    z2_tf: f64,
) -> LinearAdjointConstants {
    let d_m = linear2d_power_diagonal(gamma, m);
    let xi = (2.0 * d_m - sign_pow(m)).powi(2) / (1.0 + gamma);
    let e = f64::exp;
    let g = gamma;
    let den = xi * e((-1.0 - g) * 2.0 * t0) - e((-1.0 - g) * 2.0 * t_f) * (xi + 1.0)
        + e(-2.0 * g * t_f - 2.0 * t0);
    let gap = e(g * t_f) - e(g * t0);
    let c1 = z2_tf * xi * (e(t_f + (-1.0 - g) * 2.0 * t0) - e((-1.0 - 2.0 * g) * t_f)) / den;
    let c2 = z2_tf * (e((-1.0 - g) * t_f) - e((1.0 - g) * t_f - 2.0 * t0)) / den;
    let c3 = z2_tf
        * xi
        * (e(t_f + (-4.0 - g) * t0) + e((-1.0 - g) * t_f - 2.0 * t0)
            - e((1.0 + g) * t_f + (-2.0 - g) * 2.0 * t0)
            - e((-1.0 - 2.0 * g) * t_f + (-2.0 + g) * t0))
        / (den * gap);
    let c4 = z2_tf
        * xi
        * (e(t_f + (-2.0 - g) * 2.0 * t0) - e(-t_f + (-1.0 - g) * 2.0 * t0)
            + e((-1.0 - g) * t_f + (-2.0 - g) * t0)
            - e((1.0 - g) * t_f + (-4.0 - g) * t0))
        / (den * gap);
    LinearAdjointConstants {
        c1,
        c2,
        c3,
        c4,
        xi,
        d_m,
        gamma,
    }
}

/// `z1(t_f)` from the costate-based error term; algebraically the same
/// expression as [`linear_opt_poi`] once `xi` is identified with
/// [`fast_mode_weight`].
pub fn adjoint_chi_poi(gamma: f64, m: u32, t0: f64, t_f: f64, z2_tf: f64) -> f64 {
    let k = linear_adjoint_constants(gamma, m, t0, t_f, z2_tf);
    let e = f64::exp;
    let num = 2.0 * e((-1.0 - gamma) * 2.0 * t_f) - 2.0 * e(-2.0 * gamma * t_f - 2.0 * t0);
    let den = e(-2.0 * gamma * t_f - 2.0 * t0) + k.xi * e((-1.0 - gamma) * 2.0 * t0)
        - (k.xi + 1.0) * e((-1.0 - gamma) * 2.0 * t_f);
    z2_tf * (1.0 + num / den)
}

/// Identifier of a closed-form reference, used to label experiment output.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Formula {
    LinearBvp,
    DsBvp,
    LinearOptimal,
    ZdpNonlocalLinear,
    AdjointHamiltonian,
}

impl fmt::Display for Formula {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Formula::LinearBvp => "linear-bvp",
            Formula::DsBvp => "ds-bvp",
            Formula::LinearOptimal => "linear-optimal",
            Formula::ZdpNonlocalLinear => "zdp-nonlocal-linear",
            Formula::AdjointHamiltonian => "adjoint-hamiltonian",
        })
    }
}

/// Inputs shared by the formulas. `rpv` is the fixed component value at
/// `t_f`; `k` is only read by the shooting formulas, `m` by the others.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OracleInputs {
    pub gamma: f64,
    pub m: u32,
    pub t0: f64,
    pub t_f: f64,
    pub k: f64,
    pub rpv: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OracleValue {
    pub formula: Formula,
    pub inputs: OracleInputs,
    /// POI free component first; the Hamiltonian formula appends
    /// `c1, c2, c3, c4, H`.
    pub values: Vec<f64>,
}

impl Formula {
    pub fn evaluate(self, x: OracleInputs) -> OracleValue {
        let values = match self {
            Formula::LinearBvp => vec![linear_bvp_poi(x.gamma, x.t0, x.t_f, x.k, x.rpv)],
            Formula::DsBvp => vec![ds_bvp_poi(x.gamma, x.t0, x.t_f, x.k, x.rpv)],
            Formula::LinearOptimal => vec![linear_opt_poi(x.gamma, x.m, x.t0, x.t_f, x.rpv)],
            Formula::ZdpNonlocalLinear => {
                vec![zdp_nonlocal_linear_poi(x.gamma, x.m, x.t0, x.t_f, x.rpv)]
            }
            Formula::AdjointHamiltonian => {
                let c = linear_adjoint_constants(x.gamma, x.m, x.t0, x.t_f, x.rpv);
                vec![c.poi_z1(x.t_f), c.c1, c.c2, c.c3, c.c4, c.hamiltonian()]
            }
        };
        OracleValue {
            formula: self,
            inputs: x,
            values,
        }
    }
}
