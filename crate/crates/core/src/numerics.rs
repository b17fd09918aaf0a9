//! Complex Hermitian linear algebra kernel.
//!
//! Everything downstream works with Hermitian matrices: the sum-rate
//! objective matrix, the SDP variable and its constraint matrices, and
//! the covariance inverted by the MMSE filters. This module wraps the
//! three primitives they need: dominant eigenpair, projection onto the
//! PSD cone, and positive-definite solves.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::{Error, Result};

/// Absolute tolerance for the conjugate-symmetry check.
pub const HERMITIAN_TOL: f64 = 1e-12;

/// A square complex matrix validated (or constructed) to be Hermitian.
#[derive(Debug, Clone, PartialEq)]
pub struct HermitianMatrix {
    inner: DMatrix<Complex64>,
}

impl HermitianMatrix {
    /// Validates conjugate symmetry within [`HERMITIAN_TOL`] and stores the
    /// exactly symmetrized matrix `(m + m^H)/2`.
    pub fn new(m: DMatrix<Complex64>) -> Result<Self> {
        if m.nrows() == 0 || m.nrows() != m.ncols() {
            return Err(Error::DimensionMismatch(format!(
                "expected non-empty square matrix, got {}x{}",
                m.nrows(),
                m.ncols()
            )));
        }
        let asym = (&m - m.adjoint()).map(|z| z.norm()).max();
        if asym > 2.0 * HERMITIAN_TOL {
            return Err(Error::NotHermitian(asym / 2.0));
        }
        Ok(Self::symmetrize(m))
    }

    /// Wraps `(m + m^H)/2` without checking how far `m` was from Hermitian.
    pub fn symmetrize(m: DMatrix<Complex64>) -> Self {
        let sym = (&m + m.adjoint()).scale(0.5);
        Self { inner: sym }
    }

    pub fn identity(dim: usize) -> Self {
        Self {
            inner: DMatrix::identity(dim, dim),
        }
    }

    /// Builds `scale * v v^H`.
    pub fn scaled_outer(v: &DVector<Complex64>, scale: f64) -> Self {
        let m = (v * v.adjoint()).scale(scale);
        Self::symmetrize(m)
    }

    pub fn dim(&self) -> usize {
        self.inner.nrows()
    }

    pub fn matrix(&self) -> &DMatrix<Complex64> {
        &self.inner
    }

    pub fn into_matrix(self) -> DMatrix<Complex64> {
        self.inner
    }

    /// Real trace (imaginary parts of the diagonal are zero by construction).
    pub fn trace(&self) -> f64 {
        self.inner.diagonal().iter().map(|z| z.re).sum()
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.inner.norm()
    }

    /// Full eigendecomposition; eigenvalues ascending with matching columns.
    pub fn eigh(&self) -> Result<(DVector<f64>, DMatrix<Complex64>)> {
        let se = nalgebra::SymmetricEigen::try_new(self.inner.clone(), f64::EPSILON, 50_000)
            .ok_or_else(|| Error::DecompositionFailure(format!("{}x{} Hermitian", self.dim(), self.dim())))?;
        let mut order: Vec<usize> = (0..self.dim()).collect();
        order.sort_by(|&i, &j| se.eigenvalues[i].total_cmp(&se.eigenvalues[j]));
        let vals = DVector::from_iterator(self.dim(), order.iter().map(|&i| se.eigenvalues[i]));
        let vecs = DMatrix::from_columns(
            &order
                .iter()
                .map(|&i| se.eigenvectors.column(i).into_owned())
                .collect::<Vec<_>>(),
        );
        Ok((vals, vecs))
    }

    pub fn min_eigenvalue(&self) -> Result<f64> {
        let (vals, _) = self.eigh()?;
        Ok(vals[0])
    }
}

/// Real Frobenius inner product `Re tr(a b)` of two Hermitian matrices.
pub fn frobenius_inner(a: &HermitianMatrix, b: &HermitianMatrix) -> f64 {
    a.matrix()
        .iter()
        .zip(b.matrix().iter())
        .map(|(x, y)| (x * y.conj()).re)
        .sum()
}

/// Largest eigenvalue and a unit-norm eigenvector of a Hermitian matrix.
///
/// Power iteration with Rayleigh-quotient residual stopping, run from
/// both the normalized all-ones vector and a fixed pseudorandom vector
/// (either start alone can be orthogonal to, or inside but non-dominant
/// in, the top eigenspace). If neither run converges, which happens when
/// the top eigenvalue is nearly degenerate, the full decomposition is
/// used instead. Callers pass PSD matrices, for which the iteration
/// targets the algebraically largest eigenvalue.
pub fn dominant_eigenpair(
    m: &HermitianMatrix,
    tol: f64,
    max_iter: usize,
) -> Result<(f64, DVector<Complex64>)> {
    let n = m.dim();
    let scale = m.frobenius_norm();
    if scale == 0.0 {
        // Zero matrix: every unit vector is an eigenvector of 0.
        let mut u = DVector::zeros(n);
        u[0] = Complex64::new(1.0, 0.0);
        return Ok((0.0, u));
    }

    // The deterministic start can itself be a non-dominant eigenvector
    // (zero residual, wrong eigenvalue), so the pseudorandom run is not
    // just a stagnation fallback: both runs execute and the larger
    // converged eigenvalue wins.
    let ones = DVector::from_element(n, Complex64::new(1.0, 0.0)).scale(1.0 / (n as f64).sqrt());
    let mut converged: Option<(f64, DVector<Complex64>)> = None;
    let mut best_residual = f64::INFINITY;

    for start in [ones, pseudorandom_unit(n)] {
        match power_iterate(m, start, tol * scale, max_iter) {
            Ok((lambda, u)) => {
                if converged.as_ref().map_or(true, |(l, _)| lambda > *l) {
                    converged = Some((lambda, u));
                }
            }
            Err((res, _, _)) => best_residual = best_residual.min(res),
        }
    }

    if let Some(pair) = converged {
        return Ok(pair);
    }

    // Power iteration stalls when the top eigenvalue is (near) degenerate;
    // the full decomposition handles that case exactly.
    let (vals, vecs) = m.eigh()?;
    let top = vals.len() - 1;
    Ok((vals[top], vecs.column(top).into_owned()))
}

fn power_iterate(
    m: &HermitianMatrix,
    mut u: DVector<Complex64>,
    abs_tol: f64,
    max_iter: usize,
) -> std::result::Result<(f64, DVector<Complex64>), (f64, f64, DVector<Complex64>)> {
    let mut lambda = 0.0;
    let mut residual = f64::INFINITY;
    for _ in 0..max_iter {
        let v = m.matrix() * &u;
        lambda = u.dotc(&v).re;
        residual = (&v - u.scale(lambda)).norm();
        if residual <= abs_tol {
            return Ok((lambda, u));
        }
        let vn = v.norm();
        if vn < f64::MIN_POSITIVE {
            // Landed in the nullspace; only a restart can help.
            break;
        }
        u = v.unscale(vn);
    }
    Err((residual, lambda, u))
}

/// Fixed pseudorandom unit vector for the power-iteration restart.
fn pseudorandom_unit(n: usize) -> DVector<Complex64> {
    // Weyl sequence phases; deterministic and incommensurate with any
    // structured start.
    let v = DVector::from_iterator(
        n,
        (0..n).map(|i| {
            let t = (i as f64 + 1.0) * 0.754_877_666_246_692_8; // frac part of plastic ratio
            Complex64::from_polar(1.0, 2.0 * std::f64::consts::PI * (t - t.floor()))
        }),
    );
    let norm = v.norm();
    v.unscale(norm)
}

/// Frobenius-nearest PSD matrix: eigendecompose and clip negative
/// eigenvalues to zero.
pub fn psd_project(m: &HermitianMatrix) -> Result<HermitianMatrix> {
    let (vals, vecs) = m.eigh()?;
    let clipped = DVector::from_iterator(m.dim(), vals.iter().map(|&l| Complex64::new(l.max(0.0), 0.0)));
    let rebuilt = &vecs * DMatrix::from_diagonal(&clipped) * vecs.adjoint();
    Ok(HermitianMatrix::symmetrize(rebuilt))
}

/// Solves `a x = b` for Hermitian positive-definite `a` via Cholesky.
pub fn solve_hermitian_pd(a: &HermitianMatrix, b: &DVector<Complex64>) -> Result<DVector<Complex64>> {
    if b.len() != a.dim() {
        return Err(Error::DimensionMismatch(format!(
            "matrix is {}x{} but rhs has length {}",
            a.dim(),
            a.dim(),
            b.len()
        )));
    }
    let chol = nalgebra::Cholesky::new(a.matrix().clone()).ok_or(Error::SingularMatrix)?;
    Ok(chol.solve(b))
}
