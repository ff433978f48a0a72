//! Phase-portrait data for planar models: trajectories from a grid of
//! initial values and the analytic slow manifold, as CSV for plotting.

use crate::error::{Result, SimError};
use crate::model::{KineticModel, RpvSpec};
use crate::parallel::{self, Execution};
use crate::solvers::{integrate, IvpOptions};

#[derive(Debug, Clone, PartialEq)]
pub struct PortraitSpec {
    pub z1_range: (f64, f64),
    pub z2_range: (f64, f64),
    /// Initial values per axis.
    pub grid: usize,
    pub t_end: f64,
    /// Output samples per trajectory, evenly spaced in time.
    pub samples: usize,
    /// Points on the manifold polyline.
    pub sim_points: usize,
}

impl Default for PortraitSpec {
    fn default() -> Self {
        Self {
            z1_range: (0.0, 2.0),
            z2_range: (0.0, 2.0),
            grid: 5,
            t_end: 10.0,
            samples: 101,
            sim_points: 201,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Portrait {
    /// One polyline per initial value, `(t, z1, z2)` samples.
    pub trajectories: Vec<Vec<[f64; 3]>>,
    pub sim: Vec<[f64; 2]>,
}

fn linspace(a: f64, b: f64, n: usize) -> Vec<f64> {
    match n {
        0 => vec![],
        1 => vec![a],
        _ => (0..n)
            .map(|i| a + (b - a) * i as f64 / (n - 1) as f64)
            .collect(),
    }
}

pub fn phase_portrait(
    model: &KineticModel,
    spec: &PortraitSpec,
    exec: Execution,
) -> Result<Portrait> {
    if model.dim() != 2 {
        return Err(SimError::InvalidParameter(
            "phase portraits need a planar model".into(),
        ));
    }
    if !(spec.t_end > 0.0) || spec.samples < 2 {
        return Err(SimError::InvalidParameter(
            "portrait needs t_end > 0 and at least two samples".into(),
        ));
    }
    let starts: Vec<[f64; 2]> = linspace(spec.z1_range.0, spec.z1_range.1, spec.grid)
        .into_iter()
        .flat_map(|a| {
            linspace(spec.z2_range.0, spec.z2_range.1, spec.grid)
                .into_iter()
                .map(move |b| [a, b])
        })
        .collect();
    let ivp = IvpOptions::default();
    let trajectories = parallel::map(&starts, exec, |z0| -> Result<Vec<[f64; 3]>> {
        let tr = integrate(model, z0, 0.0, spec.t_end, &ivp)?;
        Ok(linspace(0.0, spec.t_end, spec.samples)
            .into_iter()
            .map(|t| {
                let z = tr.at(t);
                [t, z[0], z[1]]
            })
            .collect())
    })
    .into_iter()
    .collect::<Result<Vec<_>>>()?;

    let bundle = model.require_analytic()?;
    let sim = linspace(spec.z1_range.0, spec.z1_range.1, spec.sim_points)
        .into_iter()
        .filter_map(|z1| {
            let rpv = RpvSpec::single(0, z1, 0.0).ok()?;
            bundle
                .sim_point(rpv.fixed_indices(), rpv.fixed_values())
                .map(|z| [z[0], z[1]])
        })
        .collect();
    Ok(Portrait { trajectories, sim })
}

impl Portrait {
    /// Columns `kind,id,t,z1,z2`; manifold rows have kind `sim` and empty `t`.
    pub fn to_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        let io = |e: csv::Error| SimError::Config(format!("csv: {e}"));
        let f = |x: f64| format!("{x:.16e}");
        w.write_record(["kind", "id", "t", "z1", "z2"])
            .map_err(io)?;
        for (id, tr) in self.trajectories.iter().enumerate() {
            for s in tr {
                w.write_record([
                    "trajectory".into(),
                    id.to_string(),
                    f(s[0]),
                    f(s[1]),
                    f(s[2]),
                ])
                .map_err(io)?;
            }
        }
        for p in &self.sim {
            w.write_record(["sim".into(), "0".into(), String::new(), f(p[0]), f(p[1])])
                .map_err(io)?;
        }
        let bytes = w
            .into_inner()
            .map_err(|e| SimError::Config(format!("csv: {e}")))?;
        Ok(String::from_utf8(bytes).expect("csv output is UTF-8"))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{make_davis_skodje, make_linear2d, make_linear3d};

    #[test]
    fn linear_manifold_is_the_diagonal() {
        let p = phase_portrait(
            &make_linear2d(2.0).unwrap(),
            &PortraitSpec::default(),
            Execution::Parallel,
        )
        .unwrap();
        assert!(p.sim.iter().all(|s| s[0] == s[1]));
        assert_eq!(p.trajectories.len(), 25);
    }

    #[test]
    fn davis_skodje_manifold_and_decay() {
        let p = phase_portrait(
            &make_davis_skodje(3.0).unwrap(),
            &PortraitSpec::default(),
            Execution::Parallel,
        )
        .unwrap();
        assert!(p
            .sim
            .iter()
            .all(|s| (s[1] - s[0] / (1.0 + s[0])).abs() < 1e-15));
        for tr in &p.trajectories {
            let end = tr.last().unwrap();
            assert_eq!(end[0], 10.0);
            assert!(end[1].hypot(end[2]) < 1e-3);
        }
    }

    #[test]
    fn csv_shape() {
        let spec = PortraitSpec {
            grid: 2,
            samples: 3,
            sim_points: 4,
            ..PortraitSpec::default()
        };
        let csv = phase_portrait(&make_linear2d(1.0).unwrap(), &spec, Execution::Sequential)
            .unwrap()
            .to_csv()
            .unwrap();
        assert_eq!(csv.lines().count(), 1 + 4 * 3 + 4);
        assert!(phase_portrait(
            &make_linear3d(1.0, 2.0).unwrap(),
            &spec,
            Execution::Sequential
        )
        .is_err());
    }
}
