//! Experiment configuration: a TOML document with `[model]`, `[method]`,
//! `[rpv]` and optional `[sweep]`, `[mint0]`, `[check]`, `[output]` sections.
//! Keys can be overridden with `section.key=value` strings.

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Result, SimError};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSection {
    /// `linear2d`, `davis-skodje` or `linear3d`.
    pub name: String,
    pub gamma: Option<f64>,
    pub gamma1: Option<f64>,
    pub gamma2: Option<f64>,
}

/// A weight in the generalized Lagrangian: a number, or the named state
/// function `"gamma/(z1+1)"`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum CoefficientSpec {
    Constant(f64),
    Named(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MethodSection {
    /// `analytic`, `qssa`, `zdp-local`, `zdp-nonlocal`, `fcm`, `fet`, `bvp`,
    /// `optimize`, `local-min-derivative`, `adjoint` or `min-t0`.
    pub name: String,
    pub m: Option<usize>,
    /// Start values of the free components for `bvp`.
    pub k: Option<Vec<f64>>,
    /// `derivative-norm` (default), `endpoint-derivative-norm` or `lagrangian`.
    pub objective: Option<String>,
    pub k1: Option<CoefficientSpec>,
    pub k2: Option<CoefficientSpec>,
    /// `reverse` (default) or `local`.
    pub mode: Option<String>,
    /// `finite-difference` (default) or `adjoint`.
    pub gradient: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RpvSection {
    /// Zero-based component indices.
    pub indices: Vec<usize>,
    pub values: Vec<f64>,
    #[serde(default)]
    pub t_star: f64,
    /// Horizon start for the nonlocal methods.
    pub t0: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SweepVariable {
    T0,
    Gamma,
    M,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSection {
    pub variable: SweepVariable,
    /// Explicit values; otherwise `points` evenly spaced from `start` to `stop`.
    pub values: Option<Vec<f64>>,
    pub start: Option<f64>,
    pub stop: Option<f64>,
    pub points: Option<usize>,
}

impl SweepSection {
    /// Sweep values in declaration order.
    pub fn values(&self) -> Result<Vec<f64>> {
        let vals = match (&self.values, self.start, self.stop, self.points) {
            (Some(v), None, None, None) => v.clone(),
            (None, Some(a), Some(b), Some(n)) if n >= 2 => (0..n)
                .map(|i| {
                    if i == n - 1 {
                        b
                    } else {
                        a + (b - a) * i as f64 / (n - 1) as f64
                    }
                })
                .collect(),
            (None, Some(a), _, Some(1)) => vec![a],
            _ => {
                return Err(SimError::Config(
                    "[sweep] needs either `values` or `start`, `stop` and `points`".into(),
                ))
            }
        };
        if vals.is_empty() || vals.iter().any(|v| !v.is_finite()) {
            return Err(SimError::Config(
                "sweep values must be finite and non-empty".into(),
            ));
        }
        let ascending = vals.windows(2).all(|w| w[0] < w[1]);
        let descending = vals.windows(2).all(|w| w[0] > w[1]);
        if !(ascending || descending) {
            return Err(SimError::Config(
                "sweep values must be strictly monotone".into(),
            ));
        }
        if self.variable == SweepVariable::M && vals.iter().any(|v| v.fract() != 0.0 || *v < 1.0) {
            return Err(SimError::Config(
                "sweep over m needs positive integers".into(),
            ));
        }
        Ok(vals)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MinT0Section {
    pub n1: f64,
    pub b1: f64,
    pub n2: f64,
    pub b2: f64,
    /// `start-point` (default) or `along-trajectory`.
    pub check: Option<String>,
    /// `closed-form` (default) or `numerical`.
    pub provider: Option<String>,
}

/// One expected value: `column` must be within `tol` of `value` in every row.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Expectation {
    pub column: String,
    pub value: f64,
    pub tol: f64,
    /// Compare `|column|` instead of the signed value.
    #[serde(default)]
    pub absolute: bool,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CheckSection {
    pub max_abs_error: Option<f64>,
    pub max_rel_error: Option<f64>,
    /// The free component moves monotonically toward this value along the sweep.
    pub monotone_toward: Option<f64>,
    pub max_hamiltonian_drift: Option<f64>,
    #[serde(default)]
    pub expect: Vec<Expectation>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSection {
    pub path: Option<String>,
    /// Fill the `wall_time` column. Off by default so output is reproducible.
    #[serde(default)]
    pub timing: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub model: ModelSection,
    pub method: MethodSection,
    pub rpv: RpvSection,
    pub sweep: Option<SweepSection>,
    pub mint0: Option<MinT0Section>,
    #[serde(default)]
    pub check: CheckSection,
    #[serde(default)]
    pub output: OutputSection,
}

/// A parsed configuration together with the hash of its effective contents.
#[derive(Debug, Clone, PartialEq)]
pub struct LoadedConfig {
    pub config: ExperimentConfig,
    pub hash: String,
}

fn config_err(e: impl std::fmt::Display) -> SimError {
    SimError::Config(e.to_string())
}

/// Parses `text`, applies `overrides` (`section.key=value`, value in TOML
/// syntax, bare words taken as strings) and validates the result.
pub fn load(text: &str, overrides: &[String]) -> Result<LoadedConfig> {
    let mut table: toml::Table = text.parse().map_err(config_err)?;
    for o in overrides {
        apply_override(&mut table, o)?;
    }
    let canonical = toml::to_string(&table).map_err(config_err)?;
    let hash = Sha256::digest(canonical.as_bytes())
        .iter()
        .map(|b| format!("{b:02x}"))
        .collect();
    let config: ExperimentConfig = toml::Value::Table(table).try_into().map_err(config_err)?;
    validate(&config)?;
    Ok(LoadedConfig { config, hash })
}

fn apply_override(table: &mut toml::Table, spec: &str) -> Result<()> {
    let (path, raw) = spec.split_once('=').ok_or_else(|| {
        SimError::Config(format!(
            "override `{spec}` is not of the form section.key=value"
        ))
    })?;
    let keys: Vec<&str> = path.trim().split('.').collect();
    if keys.iter().any(|k| k.is_empty()) {
        return Err(SimError::Config(format!("bad override key `{path}`")));
    }
    let value = parse_value(raw.trim());
    let (last, parents) = keys.split_last().expect("split on a non-empty string");
    let mut cur = table;
    for k in parents {
        cur = cur
            .entry(k.to_string())
            .or_insert_with(|| toml::Value::Table(toml::Table::new()))
            .as_table_mut()
            .ok_or_else(|| {
                SimError::Config(format!("override `{path}`: `{k}` is not a section"))
            })?;
    }
    cur.insert(last.to_string(), value);
    Ok(())
}

fn parse_value(raw: &str) -> toml::Value {
    format!("v = {raw}")
        .parse::<toml::Table>()
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| toml::Value::String(raw.to_string()))
}

const MODELS: &[&str] = &["linear2d", "davis-skodje", "linear3d"];
const METHODS: &[&str] = &[
    "analytic",
    "qssa",
    "zdp-local",
    "zdp-nonlocal",
    "fcm",
    "fet",
    "bvp",
    "optimize",
    "local-min-derivative",
    "adjoint",
    "min-t0",
];

fn validate(c: &ExperimentConfig) -> Result<()> {
    if !MODELS.contains(&c.model.name.as_str()) {
        return Err(SimError::Config(format!(
            "unknown model `{}`",
            c.model.name
        )));
    }
    let method = c.method.name.as_str();
    if !METHODS.contains(&method) {
        return Err(SimError::Config(format!("unknown method `{method}`")));
    }
    let needs_m = matches!(
        method,
        "zdp-local" | "zdp-nonlocal" | "local-min-derivative" | "min-t0"
    );
    let sweeps_m = c
        .sweep
        .as_ref()
        .is_some_and(|s| s.variable == SweepVariable::M);
    if needs_m && c.method.m.is_none() && !sweeps_m {
        return Err(SimError::Config(format!("method `{method}` needs `m`")));
    }
    let needs_horizon = matches!(method, "zdp-nonlocal" | "bvp" | "adjoint")
        || (method == "optimize" && c.method.mode.as_deref() != Some("local"));
    let sweeps_t0 = c
        .sweep
        .as_ref()
        .is_some_and(|s| s.variable == SweepVariable::T0);
    if needs_horizon && c.rpv.t0.is_none() && !sweeps_t0 {
        return Err(SimError::Config(format!(
            "method `{method}` needs `rpv.t0` or a t0 sweep"
        )));
    }
    if method == "min-t0" {
        if c.model.name != "linear2d" {
            return Err(SimError::Config("min-t0 runs on linear2d only".into()));
        }
        if c.mint0.is_none() {
            return Err(SimError::Config("min-t0 needs a [mint0] section".into()));
        }
    }
    if method == "fet" && c.model.name == "linear3d" {
        return Err(SimError::Config("fet needs a planar model".into()));
    }
    if let Some(s) = &c.sweep {
        s.values()?;
        if s.variable == SweepVariable::Gamma && c.model.name == "linear3d" {
            return Err(SimError::Config(
                "linear3d has two rates; sweep gamma1/gamma2 via separate runs".into(),
            ));
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    const BASE: &str = r#"
[model]
name = "linear2d"
gamma = 2.0

[method]
name = "bvp"
k = [0.0]

[rpv]
indices = [1]
values = [5.0]
t0 = -2.0
"#;

    #[test]
    fn overrides_change_values_and_hash() {
        let a = load(BASE, &[]).unwrap();
        let b = load(
            BASE,
            &["model.gamma=0.2".into(), "output.path=out.csv".into()],
        )
        .unwrap();
        assert_eq!(b.config.model.gamma, Some(0.2));
        assert_eq!(b.config.output.path.as_deref(), Some("out.csv"));
        assert_ne!(a.hash, b.hash);
        assert_eq!(a.hash, load(BASE, &[]).unwrap().hash);
    }

    #[test]
    fn rejects_bad_configs() {
        assert!(load(BASE, &["model.name=brusselator".into()]).is_err());
        assert!(load(BASE, &["method.name=zdp-local".into()]).is_err());
        assert!(load(BASE, &["nonsense".into()]).is_err());
        assert!(load(BASE, &["model.colour=1".into()]).is_err());
        let no_t0 = BASE.replace("t0 = -2.0", "");
        assert!(load(&no_t0, &[]).is_err());
        assert!(load(
            &no_t0,
            &[
                "sweep.variable=t0".into(),
                "sweep.values=[-1.0, -2.0]".into()
            ]
        )
        .is_ok());
    }

    #[test]
    fn sweep_ranges() {
        let s = SweepSection {
            variable: SweepVariable::T0,
            values: None,
            start: Some(-2.0),
            stop: Some(-20.0),
            points: Some(10),
        };
        let v = s.values().unwrap();
        assert_eq!(v.len(), 10);
        assert_eq!((v[0], v[9]), (-2.0, -20.0));
        assert!((v[1] + 4.0).abs() < 1e-15);
        let bad = SweepSection {
            values: Some(vec![1.0, 3.0, 2.0]),
            start: None,
            stop: None,
            points: None,
            ..s.clone()
        };
        assert!(bad.values().is_err());
        let m = SweepSection {
            variable: SweepVariable::M,
            values: Some(vec![1.0, 2.5]),
            start: None,
            stop: None,
            points: None,
        };
        assert!(m.values().is_err());
    }
}
