use serde::{Deserialize, Serialize};

use super::Interrupted;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct NelderMeadSettings {
    /// Edge length of the initial simplex in unit-cube coordinates.
    pub initial_step: f64,
    /// Relative spread of simplex values below which a run has converged.
    pub ftol: f64,
    /// Simplex diameter (max-norm) below which a run has converged.
    pub xtol: f64,
    /// Fresh simplices built around the best point after convergence. A
    /// simplex flattened onto a face of the cube is always rebuilt.
    pub max_restarts: usize,
}

impl Default for NelderMeadSettings {
    fn default() -> Self {
        NelderMeadSettings { initial_step: 0.25, ftol: 1e-10, xtol: 1e-7, max_restarts: 3 }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct NelderMeadOutcome {
    pub best: Vec<f64>,
    pub value: f64,
    pub evaluations: usize,
    pub iterations: usize,
    pub restarts: usize,
    pub converged: bool,
}

/// Values of a batch of points, evaluated in order.
pub type BatchEval<'a> = dyn Fn(&[Vec<f64>]) -> Result<Vec<f64>, Interrupted> + Sync + 'a;

fn project(mut x: Vec<f64>) -> Vec<f64> {
    for v in &mut x {
        *v = v.clamp(0.0, 1.0);
    }
    x
}

fn affine(a: &[f64], b: &[f64], t: f64) -> Vec<f64> {
    // a + t (b − a)
    project(a.iter().zip(b).map(|(a, b)| a + t * (b - a)).collect())
}

fn initial_simplex(x0: &[f64], step: f64) -> Vec<Vec<f64>> {
    (0..x0.len())
        .map(|i| {
            let mut x = x0.to_vec();
            x[i] = if x0[i] + step <= 1.0 { x0[i] + step } else { x0[i] - step };
            project(x)
        })
        .collect()
}

/// Bound-constrained Nelder–Mead on `[0, 1]ⁿ` with dimension-adaptive
/// coefficients (reflection 1, expansion 1 + 2/n, contraction 0.75 − 1/2n,
/// shrink 1 − 1/n). Trial points are projected onto the box.
pub fn nelder_mead(
    x0: &[f64],
    f0: Option<f64>,
    budget: usize,
    settings: &NelderMeadSettings,
    eval: &BatchEval<'_>,
) -> Result<NelderMeadOutcome, Interrupted> {
    let n = x0.len();
    let nf = n as f64;
    let (alpha, beta, gamma, delta) = (1.0, 1.0 + 2.0 / nf, 0.75 - 0.5 / nf, 1.0 - 1.0 / nf);
    let mut evals = 0usize;
    let mut iterations = 0usize;
    let mut restarts = 0usize;
    let mut fresh_starts = 0usize;

    let x0 = project(x0.to_vec());
    let f_start = match f0 {
        Some(f) => f,
        None => {
            evals += 1;
            eval(std::slice::from_ref(&x0))?[0]
        }
    };
    let mut best = (x0, f_start);
    let mut converged = false;
    let mut step = settings.initial_step;

    loop {
        let vertices = initial_simplex(&best.0, step);
        if evals + vertices.len() > budget {
            break;
        }
        let values = eval(&vertices)?;
        evals += vertices.len();
        let mut simplex: Vec<(Vec<f64>, f64)> = std::iter::once(best.clone()).chain(vertices.into_iter().zip(values)).collect();
        converged = false;
        let mut degenerate = false;
        let mut flat_diameter = 0.0;

        loop {
            simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
            let (fb, fw) = (simplex[0].1, simplex[n].1);
            let diameter = simplex[1..]
                .iter()
                .map(|(x, _)| x.iter().zip(&simplex[0].0).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max))
                .fold(0.0, f64::max);
            if fb.is_finite() && (fw - fb).abs() <= settings.ftol * (1.0 + fb.abs()) && diameter <= settings.xtol {
                converged = true;
                break;
            }
            if diameter == 0.0 || evals >= budget {
                break;
            }
            // A coordinate shared by every vertex can never change again.
            if (0..n).any(|j| simplex.iter().all(|(x, _)| x[j] == simplex[0].0[j])) {
                degenerate = true;
                flat_diameter = diameter;
                break;
            }
            iterations += 1;
            let mut centroid = vec![0.0; n];
            for (x, _) in &simplex[..n] {
                for (c, v) in centroid.iter_mut().zip(x) {
                    *c += v / nf;
                }
            }
            let worst = simplex[n].0.clone();
            let xr = affine(&centroid, &worst, -alpha);
            let fr = eval(std::slice::from_ref(&xr))?[0];
            evals += 1;
            if fr < fb {
                if evals < budget {
                    let xe = affine(&centroid, &xr, beta);
                    let fe = eval(std::slice::from_ref(&xe))?[0];
                    evals += 1;
                    simplex[n] = if fe < fr { (xe, fe) } else { (xr, fr) };
                } else {
                    simplex[n] = (xr, fr);
                }
                continue;
            }
            if fr < simplex[n - 1].1 {
                simplex[n] = (xr, fr);
                continue;
            }
            if evals >= budget {
                break;
            }
            let (xc, accept_at) = if fr < fw { (affine(&centroid, &xr, gamma), fr) } else { (affine(&centroid, &worst, gamma), fw) };
            let fc = eval(std::slice::from_ref(&xc))?[0];
            evals += 1;
            if (fr < fw && fc <= accept_at) || (fr >= fw && fc < accept_at) {
                simplex[n] = (xc, fc);
                continue;
            }
            if evals + n > budget {
                break;
            }
            let anchor = simplex[0].0.clone();
            let shrunk: Vec<Vec<f64>> = simplex[1..].iter().map(|(x, _)| affine(&anchor, x, delta)).collect();
            let values = eval(&shrunk)?;
            evals += n;
            for (slot, (x, f)) in simplex[1..].iter_mut().zip(shrunk.into_iter().zip(values)) {
                *slot = (x, f);
            }
        }

        simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
        let improved = simplex[0].1 < best.1 - settings.ftol * (1.0 + best.1.abs());
        if simplex[0].1 <= best.1 {
            best = simplex[0].clone();
        }
        if degenerate {
            step = if improved { flat_diameter.clamp(settings.xtol, settings.initial_step) } else { 0.5 * step };
            if step < settings.xtol {
                converged = true;
                break;
            }
            restarts += 1;
            continue;
        }
        if !converged || fresh_starts >= settings.max_restarts || (fresh_starts > 0 && !improved) {
            break;
        }
        step = settings.initial_step;
        fresh_starts += 1;
        restarts += 1;
    }
    Ok(NelderMeadOutcome { best: best.0, value: best.1, evaluations: evals, iterations, restarts, converged })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn quadratic(center: Vec<f64>) -> impl Fn(&[Vec<f64>]) -> Result<Vec<f64>, Interrupted> + Sync {
        move |xs: &[Vec<f64>]| {
            Ok(xs
                .iter()
                .map(|x| x.iter().zip(&center).enumerate().map(|(i, (a, c))| (1.0 + i as f64) * (a - c).powi(2)).sum())
                .collect())
        }
    }

    #[test]
    fn finds_interior_minimum() {
        let center = vec![0.3, 0.7, 0.55, 0.12];
        let f = quadratic(center.clone());
        let out = nelder_mead(&[0.9; 4], None, 5000, &NelderMeadSettings::default(), &f).unwrap();
        assert!(out.converged);
        for (a, b) in out.best.iter().zip(&center) {
            assert!((a - b).abs() < 1e-4, "{:?}", out.best);
        }
    }

    #[test]
    fn respects_bounds_and_budget() {
        let f = quadratic(vec![1.4, -0.3, 0.5]);
        let out = nelder_mead(&[0.5; 3], None, 400, &NelderMeadSettings::default(), &f).unwrap();
        assert!(out.best.iter().all(|v| (0.0..=1.0).contains(v)));
        assert!((out.best[0] - 1.0).abs() < 1e-4 && out.best[1].abs() < 1e-4);
        let short = nelder_mead(&[0.5; 3], None, 20, &NelderMeadSettings::default(), &f).unwrap();
        assert!(short.evaluations <= 20);
    }

    #[test]
    fn handles_infinite_values() {
        let f = |xs: &[Vec<f64>]| Ok(xs.iter().map(|x| if x[0] > 0.8 { f64::INFINITY } else { (x[0] - 0.4).powi(2) + x[1] * x[1] }).collect());
        let out = nelder_mead(&[0.95, 0.5], Some(f64::INFINITY), 2000, &NelderMeadSettings::default(), &f).unwrap();
        assert!((out.best[0] - 0.4).abs() < 1e-3 && out.best[1] < 1e-3, "{out:?}");
    }
}
