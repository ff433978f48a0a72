//! Executes an experiment configuration: one method solve per sweep point,
//! compared against the closed-form reference where one exists.

use std::collections::BTreeMap;
use std::time::Instant;

use super::config::{CoefficientSpec, ExperimentConfig, LoadedConfig, SweepVariable};
use crate::adjoint::{linear_adjoint_constants, solve_adjoint_bvp};
use crate::error::{Result, SimError};
use crate::methods::{
    bvp_reconstruct, fcm, fet, local_min_derivative, min_feasible_t0, optimize_trajectory, qssa,
    zdp_local, zdp_nonlocal, Coefficient, ConstraintCheck, GradientSource, MethodConfig,
    MinT0Options, MinT0Problem, Mode, Objective, StartProvider,
};
use crate::model::{
    analytic_sim_point, make_davis_skodje, make_linear2d, make_linear3d, KineticModel, Polyhedron,
    RpvSpec,
};
use crate::oracle::{ds_bvp_poi, linear_bvp_poi, linear_opt_poi, zdp_nonlocal_linear_poi};
use crate::parallel::{self, Execution};
use crate::poi::Poi;

/// Parameters of a single sweep point after applying the sweep variable.
#[derive(Debug, Clone, PartialEq)]
pub struct Point {
    pub sweep_value: Option<f64>,
    pub gamma: Option<f64>,
    pub m: Option<usize>,
    pub t0: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Row {
    pub point: Point,
    pub poi: Poi,
    pub oracle: Option<f64>,
    pub abs_error: Option<f64>,
    pub wall_time: Option<f64>,
    pub extras: BTreeMap<&'static str, f64>,
}

impl Row {
    /// Looks a value up by CSV column name.
    pub fn column(&self, name: &str) -> Option<f64> {
        match name {
            "sweep_value" => self.point.sweep_value,
            "oracle_value" => self.oracle,
            "abs_error" => self.abs_error,
            "iterations" => Some(self.poi.diagnostics.iterations as f64),
            _ => {
                if let Some(i) = name.strip_prefix('z').and_then(|s| s.parse::<usize>().ok()) {
                    return self.poi.state.get(i.checked_sub(1)?).copied();
                }
                self.extras.get(name).copied()
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PointFailure {
    pub sweep_value: Option<f64>,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunReport {
    pub hash: String,
    pub dim: usize,
    pub extra_columns: Vec<&'static str>,
    pub timing: bool,
    pub rows: Vec<std::result::Result<Row, PointFailure>>,
    pub check_failures: Vec<String>,
}

impl RunReport {
    pub fn success(&self) -> bool {
        self.rows.iter().all(|r| r.is_ok()) && self.check_failures.is_empty()
    }

    /// First failing sweep point, else the first failed check.
    pub fn first_failure(&self) -> Option<String> {
        self.rows
            .iter()
            .find_map(|r| r.as_ref().err())
            .map(|f| match f.sweep_value {
                Some(v) => format!("sweep point {v}: {}", f.message),
                None => f.message.clone(),
            })
            .or_else(|| self.check_failures.first().cloned())
    }

    pub fn ok_rows(&self) -> impl Iterator<Item = &Row> {
        self.rows.iter().filter_map(|r| r.as_ref().ok())
    }

    pub fn columns(&self) -> Vec<String> {
        let mut cols = vec!["sweep_value".to_string()];
        cols.extend((1..=self.dim).map(|i| format!("z{i}")));
        cols.extend(["oracle_value", "abs_error", "iterations", "wall_time"].map(String::from));
        cols.extend(self.extra_columns.iter().map(|s| s.to_string()));
        cols
    }

    /// CSV text with a leading `# config-hash:` comment line.
    pub fn to_csv(&self) -> Result<String> {
        let fmt = |v: Option<f64>| v.map(|x| format!("{x:.16e}")).unwrap_or_default();
        let mut w = csv::Writer::from_writer(Vec::new());
        let io = |e: csv::Error| SimError::Config(format!("csv: {e}"));
        w.write_record(self.columns()).map_err(io)?;
        for r in &self.rows {
            let record: Vec<String> = match r {
                Ok(row) => {
                    let mut rec = vec![fmt(row.point.sweep_value)];
                    rec.extend(row.poi.state.iter().map(|&x| fmt(Some(x))));
                    rec.push(fmt(row.oracle));
                    rec.push(fmt(row.abs_error));
                    rec.push(row.poi.diagnostics.iterations.to_string());
                    rec.push(if self.timing {
                        fmt(row.wall_time)
                    } else {
                        String::new()
                    });
                    rec.extend(
                        self.extra_columns
                            .iter()
                            .map(|c| fmt(row.extras.get(c).copied())),
                    );
                    rec
                }
                Err(f) => {
                    let mut rec = vec![fmt(f.sweep_value)];
                    rec.resize(self.columns().len(), String::new());
                    rec
                }
            };
            w.write_record(&record).map_err(io)?;
        }
        let body = w
            .into_inner()
            .map_err(|e| SimError::Config(format!("csv: {e}")))?;
        let body = String::from_utf8(body).expect("csv output is UTF-8");
        Ok(format!("# config-hash: {}\n{body}", self.hash))
    }
}

fn extra_columns(method: &str) -> Vec<&'static str> {
    let mut cols = match method {
        "fet" => vec!["slope"],
        "adjoint" => vec!["hamiltonian", "hamiltonian_oracle", "hamiltonian_drift"],
        "min-t0" => vec!["t0_min", "ratio", "local_z1", "local_ratio"],
        _ => vec![],
    };
    cols.push("sim_distance");
    cols
}

fn points(c: &ExperimentConfig) -> Result<Vec<Point>> {
    let base = Point {
        sweep_value: None,
        gamma: c.model.gamma,
        m: c.method.m,
        t0: c.rpv.t0,
    };
    let Some(sweep) = &c.sweep else {
        return Ok(vec![base]);
    };
    Ok(sweep
        .values()?
        .into_iter()
        .map(|v| {
            let mut p = Point {
                sweep_value: Some(v),
                ..base.clone()
            };
            match sweep.variable {
                SweepVariable::T0 => p.t0 = Some(v),
                SweepVariable::Gamma => p.gamma = Some(v),
                SweepVariable::M => p.m = Some(v as usize),
            }
            p
        })
        .collect())
}

fn need<T>(v: Option<T>, what: &str) -> Result<T> {
    v.ok_or_else(|| SimError::Config(format!("missing `{what}`")))
}

fn build_model(c: &ExperimentConfig, p: &Point) -> Result<KineticModel> {
    match c.model.name.as_str() {
        "linear2d" => make_linear2d(need(p.gamma, "model.gamma")?),
        "davis-skodje" => make_davis_skodje(need(p.gamma, "model.gamma")?),
        "linear3d" => make_linear3d(
            need(c.model.gamma1, "model.gamma1")?,
            need(c.model.gamma2, "model.gamma2")?,
        ),
        other => Err(SimError::Config(format!("unknown model `{other}`"))),
    }
}

fn coefficient(spec: &Option<CoefficientSpec>, gamma: Option<f64>) -> Result<Coefficient> {
    match spec {
        None => Ok(Coefficient::Constant(1.0)),
        Some(CoefficientSpec::Constant(v)) => Ok(Coefficient::Constant(*v)),
        Some(CoefficientSpec::Named(s)) if s.replace(' ', "") == "gamma/(z1+1)" => {
            let g = need(gamma, "model.gamma")?;
            Ok(Coefficient::state_fn(move |z| g / (z[0] + 1.0)))
        }
        Some(CoefficientSpec::Named(s)) => {
            Err(SimError::Config(format!("unknown coefficient `{s}`")))
        }
    }
}

fn objective(c: &ExperimentConfig, p: &Point) -> Result<Objective> {
    let m = p.m.unwrap_or(2);
    match c.method.objective.as_deref().unwrap_or("derivative-norm") {
        "derivative-norm" => Ok(Objective::DerivativeNorm { m }),
        "endpoint-derivative-norm" => Ok(Objective::EndpointDerivativeNorm { m }),
        "lagrangian" => Ok(Objective::GeneralizedLagrangian {
            k1: coefficient(&c.method.k1, p.gamma)?,
            k2: coefficient(&c.method.k2, p.gamma)?,
        }),
        other => Err(SimError::Config(format!("unknown objective `{other}`"))),
    }
}

fn method_config(c: &ExperimentConfig, p: &Point) -> Result<MethodConfig> {
    let mode = match c.method.mode.as_deref().unwrap_or("reverse") {
        "reverse" => Mode::Reverse,
        "local" => Mode::Local,
        other => return Err(SimError::Config(format!("unknown mode `{other}`"))),
    };
    let gradient = match c.method.gradient.as_deref().unwrap_or("finite-difference") {
        "finite-difference" => GradientSource::FiniteDifference,
        "adjoint" => GradientSource::Adjoint,
        other => {
            return Err(SimError::Config(format!(
                "unknown gradient source `{other}`"
            )))
        }
    };
    Ok(MethodConfig::new(mode, objective(c, p)?).with_gradient(gradient))
}

fn solve(
    c: &ExperimentConfig,
    p: &Point,
    model: &KineticModel,
    rpv: &RpvSpec,
) -> Result<(Poi, BTreeMap<&'static str, f64>)> {
    let mut extras = BTreeMap::new();
    let m = || need(p.m, "method.m");
    let poi = match c.method.name.as_str() {
        "analytic" => analytic_sim_point(model, rpv)?,
        "qssa" => qssa(model, rpv)?,
        "zdp-local" => zdp_local(model, rpv, m()?)?,
        "zdp-nonlocal" => zdp_nonlocal(model, rpv, m()?)?,
        "fcm" => fcm(model, rpv)?,
        "fet" => {
            let r = fet(model, rpv)?;
            extras.insert("slope", r.slope);
            r.poi
        }
        "bvp" => {
            let n_free = model.dim() - rpv.fixed_indices().len();
            let k = c.method.k.clone().unwrap_or_else(|| vec![0.0; n_free]);
            bvp_reconstruct(model, rpv, &k)?
        }
        "optimize" => optimize_trajectory(model, rpv, &method_config(c, p)?)?,
        "local-min-derivative" => local_min_derivative(model, rpv, m()?)?,
        "adjoint" => {
            let obj = objective(c, p)?;
            let sol = solve_adjoint_bvp(model, rpv, &obj)?;
            extras.insert("hamiltonian", sol.hamiltonian[0]);
            extras.insert("hamiltonian_drift", sol.hamiltonian_drift());
            if let (Some(g), Objective::DerivativeNorm { m }, true) =
                (p.gamma, &obj, linear_z2_rpv(c))
            {
                let t0 = rpv.require_horizon()?;
                let k =
                    linear_adjoint_constants(g, *m as u32, t0, rpv.t_star(), rpv.fixed_values()[0]);
                extras.insert("hamiltonian_oracle", k.hamiltonian());
            }
            sol.poi
        }
        "min-t0" => {
            let s = need(c.mint0.as_ref(), "[mint0]")?;
            let problem = MinT0Problem {
                m: m()?,
                z2: rpv.fixed_values()[0],
                polyhedron: Polyhedron::two_species_boundary(s.n1, s.b1, s.n2, s.b2),
                t_f: rpv.t_star(),
            };
            let opts = MinT0Options {
                check: match s.check.as_deref().unwrap_or("start-point") {
                    "start-point" => ConstraintCheck::StartPoint,
                    "along-trajectory" => ConstraintCheck::AlongTrajectory,
                    other => {
                        return Err(SimError::Config(format!(
                            "unknown constraint check `{other}`"
                        )))
                    }
                },
                provider: match s.provider.as_deref().unwrap_or("closed-form") {
                    "closed-form" => StartProvider::ClosedForm,
                    "numerical" => StartProvider::Numerical,
                    other => {
                        return Err(SimError::Config(format!(
                            "unknown start provider `{other}`"
                        )))
                    }
                },
                ..MinT0Options::default()
            };
            let r = min_feasible_t0(model, &problem, &opts)?;
            extras.insert("t0_min", r.t0_min);
            extras.insert("ratio", r.ratio);
            extras.insert("local_z1", r.local_poi.state[0]);
            extras.insert("local_ratio", r.local_ratio);
            r.poi
        }
        other => return Err(SimError::Config(format!("unknown method `{other}`"))),
    };
    Ok((poi, extras))
}

/// Planar linear model with only `z2` fixed: the setting of the closed forms.
fn linear_z2_rpv(c: &ExperimentConfig) -> bool {
    c.model.name == "linear2d" && c.rpv.indices == [1]
}

/// Closed-form reference value of the free component, where one exists.
fn oracle(c: &ExperimentConfig, p: &Point, model: &KineticModel, rpv: &RpvSpec) -> Option<f64> {
    let t_f = rpv.t_star();
    let fixed = *rpv.fixed_values().first()?;
    let lagrangian = c.method.objective.as_deref() == Some("lagrangian");
    let free_sim = || {
        let sim = analytic_sim_point(model, rpv).ok()?;
        rpv.free_values(&sim.state).first().copied()
    };
    match c.method.name.as_str() {
        "analytic" => free_sim(),
        "optimize" | "adjoint" if lagrangian => free_sim(),
        "bvp" => {
            let k = c
                .method
                .k
                .as_ref()
                .and_then(|k| k.first().copied())
                .unwrap_or(0.0);
            let (g, t0) = (p.gamma?, p.t0?);
            match (c.model.name.as_str(), c.rpv.indices.as_slice()) {
                ("linear2d", [1]) => Some(linear_bvp_poi(g, t0, t_f, k, fixed)),
                ("davis-skodje", [0]) => Some(ds_bvp_poi(g, t0, t_f, k, fixed)),
                _ => None,
            }
        }
        "optimize" | "adjoint"
            if linear_z2_rpv(c)
                && c.method.objective.as_deref().unwrap_or("derivative-norm")
                    == "derivative-norm"
                && c.method.mode.as_deref() != Some("local") =>
        {
            Some(linear_opt_poi(
                p.gamma?,
                p.m.unwrap_or(2) as u32,
                p.t0?,
                t_f,
                fixed,
            ))
        }
        "zdp-nonlocal" if linear_z2_rpv(c) => Some(zdp_nonlocal_linear_poi(
            p.gamma?,
            p.m? as u32,
            p.t0?,
            t_f,
            fixed,
        )),
        _ => None,
    }
}

fn run_point(c: &ExperimentConfig, p: &Point) -> Result<Row> {
    let start = Instant::now();
    let model = build_model(c, p)?;
    let mut rpv = RpvSpec::new(c.rpv.indices.clone(), c.rpv.values.clone(), c.rpv.t_star)?;
    if let Some(t0) = p.t0 {
        rpv = rpv.with_horizon(t0)?;
    }
    let (poi, mut extras) = solve(c, p, &model, &rpv)?;
    let wall_time = start.elapsed().as_secs_f64();
    let free = rpv.free_indices(model.dim());
    let first_free = free.first().map(|&i| poi.state[i]);
    let oracle = oracle(c, p, &model, &rpv);
    let abs_error = oracle.zip(first_free).map(|(o, v)| (v - o).abs());
    if let Ok(sim) = analytic_sim_point(&model, &rpv) {
        let d = free
            .iter()
            .map(|&i| (poi.state[i] - sim.state[i]).powi(2))
            .sum::<f64>()
            .sqrt();
        extras.insert("sim_distance", d);
    }
    Ok(Row {
        point: p.clone(),
        poi,
        oracle,
        abs_error,
        wall_time: Some(wall_time),
        extras,
    })
}

/// Runs every sweep point (in parallel unless `exec` says otherwise) and
/// evaluates the `[check]` assertions.
pub fn run(loaded: &LoadedConfig, exec: Execution) -> Result<RunReport> {
    let c = &loaded.config;
    let pts = points(c)?;
    let dim = build_model(c, &pts[0])?.dim();
    let rows = parallel::map(&pts, exec, |p| {
        run_point(c, p).map_err(|e| PointFailure {
            sweep_value: p.sweep_value,
            message: e.to_string(),
        })
    });
    let mut report = RunReport {
        hash: loaded.hash.clone(),
        dim,
        extra_columns: extra_columns(&c.method.name),
        timing: c.output.timing,
        rows,
        check_failures: Vec::new(),
    };
    report.check_failures = checks(c, &report);
    Ok(report)
}

fn label(row: &Row) -> String {
    row.point
        .sweep_value
        .map(|v| format!("sweep point {v}"))
        .unwrap_or_else(|| "single point".into())
}

fn checks(c: &ExperimentConfig, report: &RunReport) -> Vec<String> {
    let ck = &c.check;
    let mut out = Vec::new();
    let rows: Vec<&Row> = report.ok_rows().collect();
    for row in &rows {
        if let Some(tol) = ck.max_abs_error {
            match row.abs_error {
                Some(e) if e <= tol => {}
                Some(e) => out.push(format!("{}: abs_error {e:e} exceeds {tol:e}", label(row))),
                None => out.push(format!("{}: no reference value for abs_error", label(row))),
            }
        }
        if let Some(tol) = ck.max_rel_error {
            match row.abs_error.zip(row.oracle) {
                Some((e, o)) if e <= tol * o.abs() => {}
                Some((e, o)) => out.push(format!(
                    "{}: relative error {:e} exceeds {tol:e}",
                    label(row),
                    e / o.abs()
                )),
                None => out.push(format!(
                    "{}: no reference value for relative error",
                    label(row)
                )),
            }
        }
        if let Some(tol) = ck.max_hamiltonian_drift {
            match row.extras.get("hamiltonian_drift") {
                Some(&d) if d <= tol => {}
                other => out.push(format!(
                    "{}: hamiltonian drift {other:?} exceeds {tol:e}",
                    label(row)
                )),
            }
        }
        for e in &ck.expect {
            let got = row
                .column(&e.column)
                .map(|v| if e.absolute { v.abs() } else { v });
            match got {
                Some(v) if (v - e.value).abs() <= e.tol => {}
                other => out.push(format!(
                    "{}: {} = {other:?}, expected {} within {}",
                    label(row),
                    e.column,
                    e.value,
                    e.tol
                )),
            }
        }
    }
    if let Some(target) = ck.monotone_toward {
        let free = c
            .rpv
            .indices
            .iter()
            .fold((0..report.dim).collect::<Vec<_>>(), |mut v, i| {
                v.retain(|j| j != i);
                v
            });
        if let Some(&f) = free.first() {
            let dist: Vec<f64> = rows
                .iter()
                .map(|r| (r.poi.state[f] - target).abs())
                .collect();
            // Once converged, distances sit at solver accuracy, hence the slack.
            if let Some(w) = dist
                .windows(2)
                .position(|w| w[1] > w[0] + 1e-10 * (1.0 + target.abs()))
            {
                out.push(format!(
                    "{}: distance to {target} grows",
                    label(rows[w + 1])
                ));
            }
        }
    }
    out
}
