use std::sync::Arc;

use crate::error::{Error, Result};
use crate::geometry::Mesh;

use super::DiscreteSystem;
use crate::banded::BandedMatrix;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EigenOptions {
    pub tolerance: f64,
    pub max_iterations: usize,
}

impl Default for EigenOptions {
    fn default() -> Self {
        Self {
            tolerance: 1e-8,
            max_iterations: 500,
        }
    }
}

/// Smallest eigenvalue of the discrete biharmonic with the homogeneous
/// closure of the mesh's configuration (`μ₁` enters on a free end).
pub fn smallest_eigenvalue(mesh: &Arc<Mesh>, mu1: f64) -> Result<f64> {
    let system = DiscreteSystem::new(mesh, mu1)?;
    smallest_eigenvalue_with(&system, EigenOptions::default())
}

/// Inverse power iteration with the weighted Rayleigh quotient.
pub fn smallest_eigenvalue_with(system: &DiscreteSystem, options: EigenOptions) -> Result<f64> {
    smallest_eigenvalue_of(system, system.bending(), options)
}

/// Smallest eigenvalue of the first Dirichlet Laplacian, `-Δ_h`, on the
/// unknowns of a hinged system. It bounds `‖u‖² ≤ ‖∇u‖²/λ` with the edge
/// gradient norm.
pub fn dirichlet_laplace_eigenvalue(system: &DiscreteSystem, options: EigenOptions) -> Result<f64> {
    let negated = system.laplace().add_scaled(-2.0, system.laplace());
    smallest_eigenvalue_of(system, &negated, options)
}

/// Inverse iteration on any matrix of the system that is positive definite
/// in the weighted inner product.
pub fn smallest_eigenvalue_of(
    system: &DiscreteSystem,
    k: &BandedMatrix,
    options: EigenOptions,
) -> Result<f64> {
    let lu = k.factor()?;
    let mut x = vec![1.0; system.len()];
    let mut previous = f64::INFINITY;
    let mut change = f64::INFINITY;
    for _ in 0..options.max_iterations {
        let y = lu.solve(&x);
        let norm = system.dot(&y, &y).sqrt();
        x = y.into_iter().map(|v| v / norm).collect();
        let lambda = system.dot(&x, &k.mul_vec(&x));
        change = ((lambda - previous) / lambda).abs();
        if change <= options.tolerance {
            return Ok(lambda);
        }
        previous = lambda;
    }
    Err(Error::EigenNonConvergence {
        iterations: options.max_iterations,
        change,
    })
}
