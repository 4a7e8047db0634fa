//! Preconditioned conjugate gradients with a Lanczos condition estimate.

use super::lanczos::LanczosTridiagonal;
use crate::error::{Error, Result};

/// A symmetric linear map applied matrix-free.
pub trait LinearOperator {
    fn dim(&self) -> usize;
    fn apply(&self, x: &[f64]) -> Vec<f64>;
}

impl<F: Fn(&[f64]) -> Vec<f64>> LinearOperator for (usize, F) {
    fn dim(&self) -> usize {
        self.0
    }
    fn apply(&self, x: &[f64]) -> Vec<f64> {
        (self.1)(x)
    }
}

/// Identity preconditioner.
pub struct Identity(pub usize);

impl LinearOperator for Identity {
    fn dim(&self) -> usize {
        self.0
    }
    fn apply(&self, x: &[f64]) -> Vec<f64> {
        x.to_vec()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PcgOptions {
    /// Relative reduction of the residual 2-norm required to stop.
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for PcgOptions {
    fn default() -> Self {
        PcgOptions {
            tol: 1e-6,
            max_iter: 1000,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PcgReport {
    pub iterations: usize,
    pub converged: bool,
    /// `‖r_k‖ / ‖r_0‖` after each iteration.
    pub residual_history: Vec<f64>,
    /// Condition estimate after each iteration.
    pub kappa_history: Vec<f64>,
    pub kappa_est: f64,
    pub lanczos_extremes: Option<(f64, f64)>,
    pub alpha: Vec<f64>,
    pub beta: Vec<f64>,
}

impl PcgReport {
    pub fn tridiagonal(&self) -> LanczosTridiagonal {
        LanczosTridiagonal::from_cg(&self.alpha, &self.beta)
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// Solves `F x = rhs` from a zero initial guess.
///
/// Stops once `‖r_k‖ ≤ tol ‖r_0‖`. Hitting `max_iter` is reported through
/// `converged = false` rather than an error; a nonpositive curvature `pᵀFp`
/// or preconditioned residual product `rᵀMr` is an error.
pub fn pcg(
    op: &dyn LinearOperator,
    precond: &dyn LinearOperator,
    rhs: &[f64],
    opts: PcgOptions,
) -> Result<(Vec<f64>, PcgReport)> {
    let n = op.dim();
    assert_eq!(rhs.len(), n);
    assert_eq!(precond.dim(), n);
    let mut x = vec![0.0; n];
    let mut r = rhs.to_vec();
    let r0 = norm(&r);
    let mut report = PcgReport {
        iterations: 0,
        converged: true,
        residual_history: Vec::new(),
        kappa_history: Vec::new(),
        kappa_est: 1.0,
        lanczos_extremes: None,
        alpha: Vec::new(),
        beta: Vec::new(),
    };
    if r0 == 0.0 {
        return Ok((x, report));
    }

    let mut z = precond.apply(&r);
    let mut rz = dot(&r, &z);
    if !(rz > 0.0) {
        return Err(Error::Indefinite {
            iteration: 0,
            what: "r'Mr",
            value: rz,
        });
    }
    let mut p = z.clone();
    report.converged = false;

    for k in 1..=opts.max_iter {
        let q = op.apply(&p);
        let pq = dot(&p, &q);
        if !(pq > 0.0) {
            return Err(Error::Indefinite {
                iteration: k,
                what: "p'Fp",
                value: pq,
            });
        }
        let alpha = rz / pq;
        for i in 0..n {
            x[i] += alpha * p[i];
            r[i] -= alpha * q[i];
        }
        report.alpha.push(alpha);
        report.iterations = k;
        let rel = norm(&r) / r0;
        report.residual_history.push(rel);

        let t = LanczosTridiagonal::from_cg(&report.alpha, &report.beta);
        report.kappa_history.push(t.condition());

        if rel <= opts.tol {
            report.converged = true;
            break;
        }
        if k == opts.max_iter {
            break;
        }

        z = precond.apply(&r);
        let rz_new = dot(&r, &z);
        if !(rz_new > 0.0) {
            return Err(Error::Indefinite {
                iteration: k,
                what: "r'Mr",
                value: rz_new,
            });
        }
        let beta = rz_new / rz;
        report.beta.push(beta);
        for i in 0..n {
            p[i] = z[i] + beta * p[i];
        }
        rz = rz_new;
    }

    // Trailing beta (if the loop stopped right after computing one) is not
    // part of the k × k tridiagonal.
    report.beta.truncate(report.alpha.len().saturating_sub(1));
    let t = report.tridiagonal();
    report.kappa_est = t.condition();
    report.lanczos_extremes = t.extremes();
    Ok((x, report))
}
