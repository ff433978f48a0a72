//! Derivative-free Nelder–Mead with box bounds by projection, followed by an
//! optional finite-difference Newton polish for smooth objectives.

use nalgebra::{DMatrix, DVector};

use crate::error::{Result, SimError};

#[derive(Debug, Clone, PartialEq)]
pub struct Bounds {
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
}

impl Bounds {
    pub fn new(lower: Vec<f64>, upper: Vec<f64>) -> Result<Self> {
        if lower.len() != upper.len() || lower.iter().zip(&upper).any(|(l, u)| l > u) {
            return Err(SimError::InvalidParameter("inconsistent bounds".into()));
        }
        Ok(Self { lower, upper })
    }

    fn project(&self, x: &mut [f64]) {
        for ((xi, l), u) in x.iter_mut().zip(&self.lower).zip(&self.upper) {
            *xi = xi.clamp(*l, *u);
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MinimizeOptions {
    /// Simplex extent (absolute, per coordinate) at which Nelder–Mead stops.
    pub x_tol: f64,
    /// Spread of objective values, relative to `1 + |f_best|`.
    pub f_tol: f64,
    pub max_evals: usize,
    /// Initial simplex edge relative to `max(|x0_i|, 1)`.
    pub initial_step: f64,
    /// Polish with Newton steps on a central-difference gradient and Hessian.
    pub refine: bool,
}

impl Default for MinimizeOptions {
    fn default() -> Self {
        Self {
            x_tol: 1e-10,
            f_tol: 1e-15,
            max_evals: 20_000,
            initial_step: 0.05,
            refine: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MinimizeReport {
    pub x: Vec<f64>,
    pub f: f64,
    pub evaluations: usize,
    /// Simplex extent at stop, or the last Newton step length after polishing.
    pub step_size: f64,
}

struct Counted<F> {
    f: F,
    evals: usize,
    max: usize,
}

impl<F: FnMut(&[f64]) -> f64> Counted<F> {
    fn call(&mut self, x: &[f64]) -> Result<f64> {
        if self.evals >= self.max {
            return Err(SimError::MaxEvaluations {
                max_evals: self.max,
            });
        }
        self.evals += 1;
        let v = (self.f)(x);
        Ok(if v.is_finite() { v } else { f64::INFINITY })
    }
}

/// Minimizes `objective` from `x0`. Non-finite objective values away from
/// `x0` are treated as `+inf`.
pub fn minimize<F>(
    objective: F,
    x0: &[f64],
    bounds: Option<&Bounds>,
    opts: &MinimizeOptions,
) -> Result<MinimizeReport>
where
    F: FnMut(&[f64]) -> f64,
{
    let n = x0.len();
    if n == 0 {
        return Err(SimError::InvalidParameter("nothing to minimize".into()));
    }
    if let Some(b) = bounds {
        if b.lower.len() != n {
            return Err(SimError::DimensionMismatch {
                expected: n,
                got: b.lower.len(),
            });
        }
    }
    let mut obj = Counted {
        f: objective,
        evals: 0,
        max: opts.max_evals,
    };
    let project = |x: &mut Vec<f64>| {
        if let Some(b) = bounds {
            b.project(x);
        }
    };
    let mut start = x0.to_vec();
    project(&mut start);
    let f0 = obj.call(&start)?;
    if !f0.is_finite() {
        return Err(SimError::NonFiniteObjective);
    }

    let mut simplex: Vec<(Vec<f64>, f64)> = vec![(start.clone(), f0)];
    for i in 0..n {
        let step = opts.initial_step * start[i].abs().max(1.0);
        let mut v = start.clone();
        v[i] += step;
        project(&mut v);
        if v[i] == start[i] {
            v[i] -= step;
            project(&mut v);
        }
        let fv = obj.call(&v)?;
        simplex.push((v, fv));
    }

    let extent = |s: &[(Vec<f64>, f64)]| -> f64 {
        s[1..]
            .iter()
            .flat_map(|(v, _)| v.iter().zip(&s[0].0).map(|(a, b)| (a - b).abs()))
            .fold(0.0, f64::max)
    };
    loop {
        simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
        let spread = simplex[n].1 - simplex[0].1;
        let size = extent(&simplex);
        if size <= opts.x_tol && spread <= opts.f_tol * (1.0 + simplex[0].1.abs()) {
            break;
        }
        if size <= opts.x_tol * 1e-3 {
            break;
        }
        let centroid: Vec<f64> = (0..n)
            .map(|j| simplex[..n].iter().map(|(v, _)| v[j]).sum::<f64>() / n as f64)
            .collect();
        let worst = simplex[n].clone();
        let along = |t: f64| -> Vec<f64> {
            let mut p: Vec<f64> = (0..n)
                .map(|j| centroid[j] + t * (worst.0[j] - centroid[j]))
                .collect();
            project(&mut p);
            p
        };
        let xr = along(-1.0);
        let fr = obj.call(&xr)?;
        if fr < simplex[0].1 {
            let xe = along(-2.0);
            let fe = obj.call(&xe)?;
            simplex[n] = if fe < fr { (xe, fe) } else { (xr, fr) };
        } else if fr < simplex[n - 1].1 {
            simplex[n] = (xr, fr);
        } else {
            let (xc, fc) = if fr < worst.1 {
                let xc = along(-0.5);
                let fc = obj.call(&xc)?;
                (xc, fc)
            } else {
                let xc = along(0.5);
                let fc = obj.call(&xc)?;
                (xc, fc)
            };
            if fc < worst.1.min(fr) {
                simplex[n] = (xc, fc);
            } else {
                let best = simplex[0].0.clone();
                for item in simplex.iter_mut().skip(1) {
                    let mut p: Vec<f64> = (0..n)
                        .map(|j| best[j] + 0.5 * (item.0[j] - best[j]))
                        .collect();
                    project(&mut p);
                    let fp = obj.call(&p)?;
                    *item = (p, fp);
                }
            }
        }
    }
    simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
    let (mut x, mut f) = simplex[0].clone();
    let mut step_size = extent(&simplex);

    if opts.refine {
        for _ in 0..20 {
            let Some(delta) = newton_direction(&mut obj, &x, f)? else {
                break;
            };
            let mut alpha = 1.0;
            let mut improved = false;
            for _ in 0..20 {
                let mut trial: Vec<f64> =
                    x.iter().zip(&delta).map(|(a, d)| a + alpha * d).collect();
                project(&mut trial);
                let ft = obj.call(&trial)?;
                // Near the minimum, decreases fall below rounding in f while
                // the Newton step itself is still accurate.
                if ft <= f + 1e-12 * (1.0 + f.abs()) {
                    step_size = trial
                        .iter()
                        .zip(&x)
                        .map(|(a, b)| (a - b).abs())
                        .fold(0.0, f64::max);
                    x = trial;
                    f = ft;
                    improved = true;
                    break;
                }
                alpha *= 0.5;
            }
            if !improved
                || step_size <= 1e-15 * (1.0 + x.iter().fold(0.0f64, |m, v| m.max(v.abs())))
            {
                break;
            }
        }
    }
    Ok(MinimizeReport {
        x,
        f,
        evaluations: obj.evals,
        step_size,
    })
}

/// Newton direction from central differences, or `None` when the Hessian
/// is not positive definite (the simplex result is kept in that case).
fn newton_direction<F: FnMut(&[f64]) -> f64>(
    obj: &mut Counted<F>,
    x: &[f64],
    fx: f64,
) -> Result<Option<Vec<f64>>> {
    let n = x.len();
    let h: Vec<f64> = x.iter().map(|v| 1e-4 * (1.0 + v.abs())).collect();
    let mut grad = DVector::zeros(n);
    let mut hess = DMatrix::zeros(n, n);
    let mut xp = x.to_vec();
    let mut fplus = vec![0.0; n];
    for i in 0..n {
        xp[i] = x[i] + h[i];
        let fp = obj.call(&xp)?;
        xp[i] = x[i] - h[i];
        let fm = obj.call(&xp)?;
        xp[i] = x[i];
        grad[i] = (fp - fm) / (2.0 * h[i]);
        hess[(i, i)] = (fp - 2.0 * fx + fm) / (h[i] * h[i]);
        fplus[i] = fp;
    }
    for i in 0..n {
        for j in (i + 1)..n {
            xp[i] = x[i] + h[i];
            xp[j] = x[j] + h[j];
            let fpp = obj.call(&xp)?;
            xp[i] = x[i];
            xp[j] = x[j];
            // f(x+hi+hj) - f(x+hi) - f(x+hj) + f(x) = hi hj f_ij + O(h^3)
            let v = (fpp - fplus[i] - fplus[j] + fx) / (h[i] * h[j]);
            hess[(i, j)] = v;
            hess[(j, i)] = v;
        }
    }
    if grad.iter().chain(hess.iter()).any(|v| !v.is_finite()) {
        return Ok(None);
    }
    Ok(hess
        .cholesky()
        .map(|c| (-c.solve(&grad)).as_slice().to_vec()))
}
