use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand::Rng;
use rand_distr::StandardNormal;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::meanfield::MomentTable;
use crate::poly::Poly;

/// Largest fraction of the trace the eigen-floor may discard.
pub const MAX_REMOVED_FRACTION: f64 = 1e-6;

/// Square root `F` with `F F^T = C` after flooring negative eigenvalues at 0.
pub fn psd_factor(c: &DMatrix<f64>) -> Result<(DMatrix<f64>, f64)> {
    let sym = (c + c.transpose()) * 0.5;
    let trace = sym.trace();
    let eig = SymmetricEigen::new(sym);
    let removed: f64 = eig.eigenvalues.iter().map(|&l| (-l).max(0.0)).sum();
    if removed > MAX_REMOVED_FRACTION * trace.abs() && removed > 0.0 {
        return Err(Error::CovarianceFactorization { removed, trace });
    }
    let roots = DVector::from_iterator(eig.eigenvalues.len(), eig.eigenvalues.iter().map(|&l| l.max(0.0).sqrt()));
    let frac = if trace > 0.0 { removed / trace } else { 0.0 };
    Ok((eig.eigenvectors * DMatrix::from_diagonal(&roots), frac))
}

/// Covariance diagnostics written next to driver output.
#[derive(Clone, Debug, Serialize)]
pub struct DriverDiagnostics {
    pub degree: usize,
    pub steps: usize,
    pub dt: f64,
    pub max_removed_fraction: f64,
    /// `int_0^T g_s(f) ds` implied by the step covariances.
    pub total_variance_one: f64,
}

/// Gaussian increments of `W(x^0), ..., W(x^D)` on a uniform grid, with
/// step covariance `int g_s(f x^{a+b}) ds` (trapezoid in `s`).
#[derive(Clone, Debug)]
pub struct GaussianDriver {
    pub dt: f64,
    pub degree: usize,
    covariances: Vec<DMatrix<f64>>,
    factors: Vec<DMatrix<f64>>,
    max_removed_fraction: f64,
}

impl GaussianDriver {
    pub fn new(table: &MomentTable, rate: &Poly, degree: usize, dt: f64, steps: usize) -> Result<Self> {
        let need = rate.degree() + 2 * degree;
        if table.degree < need {
            return Err(Error::InvalidArgument(format!(
                "driver of degree {degree} needs moments up to {need}, table has {}",
                table.degree
            )));
        }
        let dim = degree + 1;
        // g_s(f x^j) for j = 0..2D
        let weighted = |s: f64| -> Vec<f64> {
            (0..=2 * degree)
                .map(|j| rate.coeffs().iter().enumerate().map(|(m, c)| c * table.at(s, m + j)).sum())
                .collect()
        };
        let mut covariances = Vec::with_capacity(steps);
        let mut factors = Vec::with_capacity(steps);
        let mut max_removed_fraction: f64 = 0.0;
        let mut left = weighted(0.0);
        for n in 0..steps {
            let right = weighted((n + 1) as f64 * dt);
            let c = DMatrix::from_fn(dim, dim, |a, b| 0.5 * dt * (left[a + b] + right[a + b]));
            let (f, frac) = psd_factor(&c)?;
            max_removed_fraction = max_removed_fraction.max(frac);
            covariances.push(c);
            factors.push(f);
            left = right;
        }
        Ok(GaussianDriver {
            dt,
            degree,
            covariances,
            factors,
            max_removed_fraction,
        })
    }

    pub fn steps(&self) -> usize {
        self.covariances.len()
    }

    pub fn covariance(&self, step: usize) -> &DMatrix<f64> {
        &self.covariances[step]
    }

    pub fn factor(&self, step: usize) -> &DMatrix<f64> {
        &self.factors[step]
    }

    /// Sum of the step covariances over the first `steps` steps.
    pub fn cumulative_covariance(&self, steps: usize) -> DMatrix<f64> {
        let dim = self.degree + 1;
        self.covariances[..steps]
            .iter()
            .fold(DMatrix::zeros(dim, dim), |acc, c| acc + c)
    }

    /// One increment vector for step `step`.
    pub fn increment<R: Rng + ?Sized>(&self, step: usize, rng: &mut R) -> DVector<f64> {
        let dim = self.degree + 1;
        let z = DVector::from_fn(dim, |_, _| rng.sample::<f64, _>(StandardNormal));
        &self.factors[step] * z
    }

    pub fn diagnostics(&self) -> DriverDiagnostics {
        DriverDiagnostics {
            degree: self.degree,
            steps: self.steps(),
            dt: self.dt,
            max_removed_fraction: self.max_removed_fraction,
            total_variance_one: self.covariances.iter().map(|c| c[(0, 0)]).sum(),
        }
    }
}
