//! Preconditioned conjugate gradients restricted to mean-zero fields.
//!
//! The operators solved here are symmetric and positive definite on the
//! complement of the constants (`I - c L` and `-L` for a diffusion operator
//! `L`). Right-hand side, iterates and preconditioned residuals are all
//! projected onto that complement, so a singular `-L` is handled the same
//! way as the shifted operator.

use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LinearSolveOptions {
    /// Relative residual target `‖r‖ <= tol ‖b‖`.
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for LinearSolveOptions {
    fn default() -> Self {
        Self {
            tol: 1e-12,
            max_iter: 5000,
        }
    }
}

impl LinearSolveOptions {
    pub fn validate(&self) -> Result<()> {
        if !(self.tol > 0.0 && self.tol <= 1e-4) {
            return Err(Error::InvalidParameter(format!(
                "linear tolerance must lie in (0, 1e-4], got {}",
                self.tol
            )));
        }
        if self.max_iter == 0 {
            return Err(Error::InvalidParameter("max_iter must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct SolveStats {
    pub iterations: usize,
    pub relative_residual: f64,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn mean(a: &[f64]) -> f64 {
    a.iter().sum::<f64>() / a.len() as f64
}

pub(crate) fn project_mean_zero(a: &mut [f64]) {
    let m = mean(a);
    for v in a.iter_mut() {
        *v -= m;
    }
}

/// Solves `A x = P b` for mean-zero `x`, where `P` removes the mean.
///
/// `apply(v, out)` writes `A v`. `diag`, when given, is the diagonal of `A`
/// used as a Jacobi preconditioner. `x` holds the initial guess on entry.
pub fn solve_mean_zero<F>(
    apply: F,
    diag: Option<&[f64]>,
    b: &[f64],
    x: &mut [f64],
    opts: &LinearSolveOptions,
) -> Result<SolveStats>
where
    F: Fn(&[f64], &mut [f64]),
{
    let n = b.len();
    debug_assert_eq!(x.len(), n);
    let mut rhs = b.to_vec();
    project_mean_zero(&mut rhs);
    let bnorm = dot(&rhs, &rhs).sqrt();
    project_mean_zero(x);
    if bnorm == 0.0 {
        x.iter_mut().for_each(|v| *v = 0.0);
        return Ok(SolveStats::default());
    }

    let precondition = |r: &[f64], z: &mut [f64]| {
        match diag {
            Some(d) => {
                for k in 0..n {
                    z[k] = r[k] / d[k];
                }
            }
            None => z.copy_from_slice(r),
        }
        project_mean_zero(z);
    };

    let mut ax = vec![0.0; n];
    apply(x, &mut ax);
    let mut r: Vec<f64> = rhs.iter().zip(&ax).map(|(b, a)| b - a).collect();
    project_mean_zero(&mut r);
    let mut z = vec![0.0; n];
    precondition(&r, &mut z);
    let mut p = z.clone();
    let mut rz = dot(&r, &z);
    let mut q = vec![0.0; n];

    let target = opts.tol * bnorm;
    let mut rnorm = dot(&r, &r).sqrt();
    let mut it = 0;
    while rnorm > target {
        if it == opts.max_iter {
            return Err(Error::LinearSolve {
                iterations: it,
                residual: rnorm / bnorm,
                tolerance: opts.tol,
            });
        }
        apply(&p, &mut q);
        let pq = dot(&p, &q);
        if !(pq > 0.0) {
            return Err(Error::LinearSolve {
                iterations: it,
                residual: rnorm / bnorm,
                tolerance: opts.tol,
            });
        }
        let alpha = rz / pq;
        for k in 0..n {
            x[k] += alpha * p[k];
            r[k] -= alpha * q[k];
        }
        project_mean_zero(&mut r);
        precondition(&r, &mut z);
        let rz_new = dot(&r, &z);
        let beta = rz_new / rz;
        rz = rz_new;
        for k in 0..n {
            p[k] = z[k] + beta * p[k];
        }
        rnorm = dot(&r, &r).sqrt();
        it += 1;
    }
    project_mean_zero(x);
    Ok(SolveStats {
        iterations: it,
        relative_residual: rnorm / bnorm,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{DiffusionOperator, ScalarField, TorusGrid};

    #[test]
    fn solves_periodic_poisson() {
        // -Δ x = b with b = cos(2πx) on the unit torus: x = b / λ_h
        let g = TorusGrid::unit(32).unwrap();
        let op = DiffusionOperator::new(&ScalarField::constant(g, 1.0), 0.0).unwrap();
        let b = ScalarField::from_fn(g, |x, _| (2.0 * std::f64::consts::PI * x).cos());
        let apply = |v: &[f64], out: &mut [f64]| {
            op.apply(v, out);
            out.iter_mut().for_each(|o| *o = -*o);
        };
        let mut x = vec![0.0; g.len()];
        let opts = LinearSolveOptions {
            tol: 1e-13,
            max_iter: 500,
        };
        solve_mean_zero(apply, None, b.values(), &mut x, &opts).unwrap();
        let h = g.hx();
        let lam = (2.0 * (std::f64::consts::PI * h).sin() / h).powi(2);
        for (xi, bi) in x.iter().zip(b.values()) {
            assert!((xi - bi / lam).abs() < 1e-12);
        }
    }

    #[test]
    fn constant_rhs_gives_zero() {
        let g = TorusGrid::unit(8).unwrap();
        let op = DiffusionOperator::new(&ScalarField::constant(g, 1.0), 0.0).unwrap();
        let mut x = vec![3.0; g.len()];
        let stats = solve_mean_zero(
            |v, o| op.apply(v, o),
            None,
            &vec![2.0; g.len()],
            &mut x,
            &LinearSolveOptions::default(),
        )
        .unwrap();
        assert_eq!(stats.iterations, 0);
        assert!(x.iter().all(|v| *v == 0.0));
    }

    #[test]
    fn reports_non_convergence() {
        let g = TorusGrid::unit(16).unwrap();
        let op = DiffusionOperator::new(&ScalarField::constant(g, 1.0), 0.0).unwrap();
        let b = ScalarField::from_fn(g, |x, y| (x - 0.5).abs() * y);
        let apply = |v: &[f64], out: &mut [f64]| {
            op.apply(v, out);
            out.iter_mut().for_each(|o| *o = -*o);
        };
        let mut x = vec![0.0; g.len()];
        let opts = LinearSolveOptions {
            tol: 1e-14,
            max_iter: 2,
        };
        let err = solve_mean_zero(apply, None, b.values(), &mut x, &opts).unwrap_err();
        assert!(matches!(err, Error::LinearSolve { iterations: 2, .. }));
    }
}
