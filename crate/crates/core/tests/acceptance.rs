//! Acceptance checks, one PASS/FAIL line per criterion. Exits non-zero if
//! any criterion fails.

use std::process::ExitCode;
use std::time::Instant;

use nalgebra::DVector;
use simkit::adjoint::{linear_adjoint_constants, solve_adjoint_bvp};
use simkit::methods::{
    bvp_reconstruct, fcm, fet, min_feasible_t0, optimize_trajectory, stretching_rates, zdp_local,
    zdp_nonlocal, Coefficient, MethodConfig, MinT0Options, MinT0Problem, Objective,
};
use simkit::oracle::{ds_bvp_poi, linear_bvp_poi, linear_opt_poi, zdp_nonlocal_linear_poi};
use simkit::parallel::{self, Execution};
use simkit::taylor::{linear2d_matrix_power, time_derivatives};
use simkit::{make_davis_skodje, make_linear2d, make_linear3d, Polyhedron, Result, RpvSpec};

type Outcome = Result<(bool, String)>;
type Criterion = (&'static str, &'static str, fn() -> Outcome);

fn horizon(index: usize, value: f64, t0: f64) -> RpvSpec {
    RpvSpec::single(index, value, 0.0)
        .unwrap()
        .with_horizon(t0)
        .unwrap()
}

fn t0_grid(start: f64, stop: f64, n: usize) -> Vec<f64> {
    (0..n)
        .map(|i| start + (stop - start) * i as f64 / (n - 1) as f64)
        .collect()
}

/// Sweeps `t0`, compares with `oracle`, and checks monotone approach to `target`.
fn bvp_sweep(
    model: &simkit::KineticModel,
    rpv_index: usize,
    value: f64,
    grid: &[f64],
    oracle: impl Fn(f64) -> f64 + Sync,
    target: f64,
) -> Result<(f64, bool)> {
    let free = 1 - rpv_index;
    let pois = parallel::map(grid, Execution::Parallel, |&t0| {
        bvp_reconstruct(model, &horizon(rpv_index, value, t0), &[0.0]).map(|p| p.state[free])
    })
    .into_iter()
    .collect::<Result<Vec<f64>>>()?;
    let worst = pois
        .iter()
        .zip(grid)
        .map(|(v, &t0)| (v - oracle(t0)).abs())
        .fold(0.0, f64::max);
    let dist: Vec<f64> = pois.iter().map(|v| (v - target).abs()).collect();
    let monotone = dist.windows(2).all(|w| w[1] <= w[0] + 1e-10);
    Ok((worst, monotone))
}

fn ac1() -> Outcome {
    let start = Instant::now();
    let grid = t0_grid(-2.0, -20.0, 10);
    let mut ok = true;
    let mut detail = Vec::new();
    for g in [0.2, 2.0] {
        let m = make_linear2d(g)?;
        let (err, mono) = bvp_sweep(
            &m,
            1,
            5.0,
            &grid,
            |t0| linear_bvp_poi(g, t0, 0.0, 0.0, 5.0),
            5.0,
        )?;
        ok &= err <= 1e-6 && mono;
        detail.push(format!("gamma={g}: max|dz1|={err:.1e} monotone={mono}"));
    }
    let secs = start.elapsed().as_secs_f64();
    ok &= secs < 5.0;
    Ok((ok, format!("{}; {secs:.2}s", detail.join(", "))))
}

fn ac2() -> Outcome {
    let start = Instant::now();
    let grid = t0_grid(-1.0, -5.0, 9);
    let mut ok = true;
    let mut detail = Vec::new();
    for g in [1.2, 3.0] {
        let m = make_davis_skodje(g)?;
        let (err, mono) = bvp_sweep(
            &m,
            0,
            2.0,
            &grid,
            |t0| ds_bvp_poi(g, t0, 0.0, 0.0, 2.0),
            2.0 / 3.0,
        )?;
        ok &= err <= 1e-6 && mono;
        detail.push(format!("gamma={g}: max|dz2|={err:.1e} monotone={mono}"));
    }
    let secs = start.elapsed().as_secs_f64();
    ok &= secs < 5.0;
    Ok((ok, format!("{}; {secs:.2}s", detail.join(", "))))
}

fn ac3() -> Outcome {
    let model = make_linear2d(1.0)?;
    let solve = |b1: f64| {
        let p = MinT0Problem {
            m: 2,
            z2: 3.0,
            polyhedron: Polyhedron::two_species_boundary(-2.0, b1, -0.25, 111.0),
            t_f: 0.0,
        };
        min_feasible_t0(&model, &p, &MinT0Options::default())
    };
    let a = solve(122.0)?;
    let b = solve(222.0)?;
    let c = solve(22.0)?;
    let ok = (a.local_poi.state[0] - 2.6471).abs() <= 5e-4
        && (a.local_ratio - 0.8824).abs() <= 1e-4
        && (a.t0_min + 2.6056).abs() <= 1e-3
        && (a.poi.state[0] - 2.9980).abs() <= 5e-4
        && (a.ratio - 0.9993).abs() <= 1e-4
        && (b.t0_min + 3.2047).abs() <= 1e-3
        && (b.ratio - 0.9998).abs() <= 1e-4
        && (c.t0_min.abs() - 0.8957).abs() <= 1e-3
        && (c.ratio - 0.9794).abs() <= 1e-4;
    Ok((
        ok,
        format!(
            "local z1={:.4} r={:.4}; b1=122: t0={:.4} z1={:.4} r={:.4}; b1=222: t0={:.4} r={:.4}; b1=22: t0={:.4} (sign recorded) r={:.4}",
            a.local_poi.state[0], a.local_ratio, a.t0_min, a.poi.state[0], a.ratio, b.t0_min, b.ratio, c.t0_min, c.ratio
        ),
    ))
}

fn ac4() -> Outcome {
    let cases: Vec<(f64, f64)> = [0.5, 1.0, 2.0, 5.0]
        .iter()
        .flat_map(|&g| [-0.5, -1.0, -2.0].map(|t| (g, t)))
        .collect();
    let cfg = MethodConfig::reverse(Objective::DerivativeNorm { m: 2 });
    let errs = parallel::map(&cases, Execution::Parallel, |&(g, t0)| -> Result<f64> {
        let p = optimize_trajectory(&make_linear2d(g)?, &horizon(1, 5.0, t0), &cfg)?;
        let o = linear_opt_poi(g, 2, t0, 0.0, 5.0);
        Ok((p.state[0] - o).abs() / o.abs())
    })
    .into_iter()
    .collect::<Result<Vec<f64>>>()?;
    let worst = errs.iter().copied().fold(0.0, f64::max);
    Ok((
        worst <= 1e-6,
        format!("12 cases, max relative error {worst:.1e}"),
    ))
}

fn ac5() -> Outcome {
    let mut worst: f64 = 0.0;
    for m in 1..=3 {
        for g in [1.0, 2.0] {
            let model = make_linear2d(g)?;
            for t0 in [-1.0, -2.0] {
                let p = zdp_nonlocal(&model, &horizon(1, 5.0, t0), m)?;
                worst = worst
                    .max((p.state[0] - zdp_nonlocal_linear_poi(g, m as u32, t0, 0.0, 5.0)).abs());
            }
        }
    }
    let model = make_linear2d(2.0)?;
    let high_m = (zdp_nonlocal(&model, &horizon(1, 5.0, -1.0), 20)?.state[0] - 5.0).abs();
    let long = (zdp_nonlocal(&model, &horizon(1, 5.0, -30.0), 1)?.state[0] - 5.0).abs();
    let ok = worst <= 1e-8 && high_m <= 1e-8 && long <= 1e-8;
    Ok((
        ok,
        format!(
            "closed form max err {worst:.1e}; m=20: {high_m:.1e}; t0=-30: {long:.1e} (gamma=2)"
        ),
    ))
}

fn ac6() -> Outcome {
    let model = make_linear2d(2.0)?;
    let sol = solve_adjoint_bvp(
        &model,
        &horizon(1, 5.0, -1.0),
        &Objective::DerivativeNorm { m: 2 },
    )?;
    let direct = linear_opt_poi(2.0, 2, -1.0, 0.0, 5.0);
    let poi_err = (sol.poi.state[0] - direct).abs() / direct.abs();
    let h = linear_adjoint_constants(2.0, 2, -1.0, 0.0, 5.0).hamiltonian();
    let h_err = (sol.hamiltonian[0] - h).abs() / h.abs();
    let drift = sol.hamiltonian_drift();
    let bc = sol.costate.states[0]
        .iter()
        .fold(0.0f64, |m, v| m.max(v.abs()));
    let ok = poi_err <= 1e-6 && h_err <= 1e-6 && drift <= 1e-6 && bc <= 1e-8;
    Ok((
        ok,
        format!("POI rel err {poi_err:.1e}; H={:.6} vs {h:.6} (rel {h_err:.1e}); drift {drift:.1e}; |lambda(t0)| {bc:.1e}", sol.hamiltonian[0]),
    ))
}

fn ac7() -> Outcome {
    let unit = || Objective::GeneralizedLagrangian {
        k1: Coefficient::Constant(1.0),
        k2: Coefficient::Constant(1.0),
    };
    let lin = optimize_trajectory(
        &make_linear2d(2.0)?,
        &horizon(1, 5.0, -1.0),
        &MethodConfig::reverse(unit()),
    )?;
    let e_lin = (lin.state[0] - 5.0).abs();

    let g = 3.0;
    let ds_obj = Objective::GeneralizedLagrangian {
        k1: Coefficient::Constant(1.0),
        k2: Coefficient::state_fn(move |z| g / (z[0] + 1.0)),
    };
    let ds = optimize_trajectory(
        &make_davis_skodje(g)?,
        &horizon(0, 2.0, -1.0),
        &MethodConfig::reverse(ds_obj),
    )?;
    let e_ds = (ds.state[1] - 2.0 / 3.0).abs();

    let rpv3 = RpvSpec::new(vec![0, 2], vec![1.0, 0.5], 0.0)?.with_horizon(-1.0)?;
    let l3 = optimize_trajectory(
        &make_linear3d(2.0, 4.0)?,
        &rpv3,
        &MethodConfig::reverse(unit()),
    )?;
    let e_3d = (l3.state[1] - (l3.state[0] + l3.state[2]) / std::f64::consts::SQRT_2).abs();

    let ok = e_lin <= 1e-8 && e_ds <= 1e-6 && e_3d <= 1e-7;
    Ok((
        ok,
        format!("linear2d {e_lin:.1e}; Davis-Skodje {e_ds:.1e}; linear3d {e_3d:.1e}"),
    ))
}

fn ac8() -> Outcome {
    let mut ok = true;
    let mut detail = Vec::new();

    // Fast-to-slow amplitude ratio of the ZDP point shrinks by 1/(1+gamma) per order.
    let g = 2.0;
    let model = make_linear2d(g)?;
    let bundle = model.require_analytic()?;
    let rpv = RpvSpec::single(1, 5.0, 0.0)?;
    let ratio = |m: usize| -> Result<f64> {
        let c = bundle.fit_constants(&zdp_local(&model, &rpv, m)?.state, 0.0);
        Ok(c[1] / c[0])
    };
    let mut zdp_err: f64 = 0.0;
    for m in 1..=6 {
        zdp_err = zdp_err.max((ratio(m + 1)? / ratio(m)? - 1.0 / (1.0 + g)).abs());
    }
    ok &= zdp_err <= 1e-8;
    detail.push(format!("ZDP decay {zdp_err:.1e}"));

    let p = fcm(&model, &rpv)?;
    let fcm_ok = (p.state[0] - 5.0).abs() <= 1e-10 && p.diagnostics.residual <= 1e-10;
    ok &= fcm_ok;
    detail.push(format!(
        "FCM z1-5={:.1e} residual {:.1e}",
        p.state[0] - 5.0,
        p.diagnostics.residual
    ));

    let fet_at = |g: f64| fet(&make_davis_skodje(g)?, &RpvSpec::single(0, 2.0, 0.0)?);
    let f10 = fet_at(10.0)?;
    let fp = 10.0 / 9.0 - (1.0 - 2.0) / 27.0;
    let slope = fp / 9.0;
    let f = 10.0 * 2.0 / 3.0 - 2.0 / 9.0;
    let z2 = (f + slope * 2.0) / 10.0;
    let res = f10.residuals[0].abs().max(f10.residuals[1].abs());
    let elim = (f10.poi.state[1] - z2).abs().max((f10.slope - slope).abs());
    let mut dists = Vec::new();
    for g in [2.0, 5.0, 10.0, 100.0, 1000.0] {
        dists.push((fet_at(g)?.poi.state[1] - 2.0 / 3.0).abs());
    }
    let fet_mono = dists.windows(2).all(|w| w[1] < w[0]);
    ok &= res <= 1e-12 && elim <= 1e-6 && fet_mono;
    detail.push(format!(
        "FET residual {res:.1e}, elimination {elim:.1e}, decreasing {fet_mono}"
    ));

    let mut r_err: f64 = 0.0;
    for g in [0.5, 2.0, 7.0] {
        let r = stretching_rates(&make_linear2d(g)?, &[1.3, 1.3])?;
        r_err = r_err.max((r.ratio - (1.0 + g)).abs());
    }
    ok &= r_err <= 1e-10;
    detail.push(format!("stretching {r_err:.1e}"));

    let z = [0.7, -1.9];
    let stack = time_derivatives(&model, &z, 8)?;
    let mut jet_err: f64 = 0.0;
    for m in 1..=8u32 {
        let exact = linear2d_matrix_power(g, m) * DVector::from_column_slice(&z);
        for i in 0..2 {
            let d = stack.d(m as usize)[i];
            jet_err = jet_err.max((d - exact[i]).abs() / (1.0 + exact[i].abs()));
        }
    }
    ok &= jet_err <= 1e-13;
    detail.push(format!("jets vs A^m z {jet_err:.1e}"));
    Ok((ok, detail.join("; ")))
}

fn main() -> ExitCode {
    let suite = Instant::now();
    let criteria: [Criterion; 8] = [
        ("AC1", "linear BVP sweeps vs closed form", ac1),
        ("AC2", "Davis-Skodje BVP sweeps vs closed form", ac2),
        ("AC3", "minimal feasible t0", ac3),
        ("AC4", "trajectory optimization vs closed form", ac4),
        ("AC5", "nonlocal ZDP and limits", ac5),
        ("AC6", "primal-dual equivalence and Hamiltonian", ac6),
        ("AC7", "generalized Lagrangian exactness", ac7),
        ("AC8", "property suite", ac8),
    ];
    let mut failed = 0;
    for (id, title, check) in criteria {
        let (pass, detail) = match check() {
            Ok(r) => r,
            Err(e) => (false, format!("error: {e}")),
        };
        if !pass {
            failed += 1;
        }
        println!(
            "[{}] {id} {title}: {detail}",
            if pass { "PASS" } else { "FAIL" }
        );
    }
    let secs = suite.elapsed().as_secs_f64();
    println!("acceptance: {} of 8 passed in {secs:.1}s", 8 - failed);
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
