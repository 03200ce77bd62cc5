//! Extreme singular values, spectral norms, and the two primal-dual norms
//! induced by a pair of step sizes.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::lp::PrimalDualPoint;

/// Largest and smallest nonzero singular values of a full-row-rank `A`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct SpectralData {
    pub lambda_max: f64,
    pub lambda_min: f64,
    pub kappa: f64,
}

/// Computes the extreme singular values from the eigenvalues of `AAᵀ`.
pub fn extreme_singular_values(a: &DMatrix<f64>) -> Result<SpectralData> {
    let gram = a * a.transpose();
    let eig = SymmetricEigen::try_new(gram, f64::EPSILON, 0)
        .ok_or(Error::ConvergenceFailure("symmetric eigensolver"))?;
    let hi = eig.eigenvalues.max();
    let lo = eig.eigenvalues.min();
    if !(lo > 0.0) {
        return Err(Error::RankDeficient { sigma_min: lo.max(0.0).sqrt(), sigma_max: hi.max(0.0).sqrt() });
    }
    let lambda_max = hi.sqrt();
    let lambda_min = lo.sqrt();
    Ok(SpectralData { lambda_max, lambda_min, kappa: lambda_max / lambda_min })
}

/// Spectral norm (largest singular value).
pub fn operator_norm(mtx: &DMatrix<f64>) -> Result<f64> {
    if mtx.is_empty() {
        return Ok(0.0);
    }
    if mtx.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFiniteData);
    }
    let svd = nalgebra::SVD::try_new(mtx.clone(), false, false, f64::EPSILON, 0)
        .ok_or(Error::ConvergenceFailure("singular value decomposition"))?;
    Ok(svd.singular_values.max())
}

/// Primal step `tau` and dual step `sigma`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct StepSizes {
    pub tau: f64,
    pub sigma: f64,
}

impl StepSizes {
    /// Checks positivity and `τσ‖A‖² ≤ 1` (with a relative slack of 1e-12).
    pub fn validated(tau: f64, sigma: f64, a_norm: f64) -> Result<Self> {
        let product = tau * sigma * a_norm * a_norm;
        if !(tau > 0.0 && sigma > 0.0 && tau.is_finite() && sigma.is_finite()) || product > 1.0 + 1e-12 {
            return Err(Error::InvalidStepSizes { product });
        }
        Ok(Self { tau, sigma })
    }

    /// `√(‖x‖²/τ + ‖y‖²/σ)`.
    pub fn mtilde_norm(&self, x: &DVector<f64>, y: &DVector<f64>) -> f64 {
        (x.norm_squared() / self.tau + y.norm_squared() / self.sigma).sqrt()
    }

    /// `√(zᵀMz)` with `M = [[I/τ, Aᵀ], [A, I/σ]]`, given `ax = A x`.
    ///
    /// This is the metric in which OnePDHG, as written for the saddle
    /// function `cᵀx + bᵀy − (Ax)ᵀy`, is a proximal-point step. Flipping
    /// the off-diagonal sign gives an equivalent norm in which the
    /// iteration is not nonexpansive.
    pub fn m_norm_with(&self, x: &DVector<f64>, y: &DVector<f64>, ax: &DVector<f64>) -> f64 {
        let quad = x.norm_squared() / self.tau + y.norm_squared() / self.sigma + 2.0 * y.dot(ax);
        quad.max(0.0).sqrt()
    }
}

/// Returns `(‖z‖_M, ‖z‖_M̃)`.
pub fn weighted_norms(z: &PrimalDualPoint, steps: &StepSizes, a: &DMatrix<f64>) -> Result<(f64, f64)> {
    let a_norm = operator_norm(a)?;
    let steps = StepSizes::validated(steps.tau, steps.sigma, a_norm)?;
    let ax = a * &z.x;
    Ok((steps.m_norm_with(&z.x, &z.y, &ax), steps.mtilde_norm(&z.x, &z.y)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn lp1_matrix() {
        let s = extreme_singular_values(&DMatrix::from_row_slice(1, 3, &[1.0, 1.0, 1.0])).unwrap();
        assert_relative_eq!(s.lambda_max, 3f64.sqrt(), max_relative = 1e-15);
        assert_eq!(s.kappa, 1.0);
    }

    #[test]
    fn lp2_matrix() {
        let a = DMatrix::from_row_slice(2, 3, &[1.0, 1.0, -1.0, 1.0, 0.0, 1.0]);
        let s = extreme_singular_values(&a).unwrap();
        assert_relative_eq!(s.kappa, 1.5f64.sqrt(), max_relative = 1e-14);
        assert_relative_eq!(s.lambda_max, 3f64.sqrt(), max_relative = 1e-14);
        assert_relative_eq!(s.lambda_min, 2f64.sqrt(), max_relative = 1e-14);
    }

    #[test]
    fn identity_matrix() {
        let s = extreme_singular_values(&DMatrix::identity(4, 4)).unwrap();
        assert_eq!((s.lambda_max, s.lambda_min, s.kappa), (1.0, 1.0, 1.0));
    }

    #[test]
    fn operator_norm_examples() {
        assert_relative_eq!(
            operator_norm(&DMatrix::from_row_slice(1, 2, &[1.0, 1.0])).unwrap(),
            2f64.sqrt(),
            max_relative = 1e-15
        );
        assert_relative_eq!(
            operator_norm(&DMatrix::from_diagonal(&DVector::from_vec(vec![3.0, 2.0]))).unwrap(),
            3.0,
            max_relative = 1e-15
        );
        assert_eq!(operator_norm(&DMatrix::zeros(0, 0)).unwrap(), 0.0);
    }

    #[test]
    fn weighted_norms_examples() {
        let a = DMatrix::from_row_slice(1, 2, &[1.0, 1.0]);
        let steps = StepSizes { tau: 0.5, sigma: 0.5 };
        let zero = PrimalDualPoint::new(DVector::zeros(2), DVector::zeros(1));
        assert_eq!(weighted_norms(&zero, &steps, &a).unwrap(), (0.0, 0.0));
        let z = PrimalDualPoint::new(DVector::from_vec(vec![1.0, 0.0]), DVector::zeros(1));
        let (m, mt) = weighted_norms(&z, &steps, &a).unwrap();
        assert_relative_eq!(m, 2f64.sqrt(), max_relative = 1e-15);
        assert_relative_eq!(mt, 2f64.sqrt(), max_relative = 1e-15);
    }

    #[test]
    fn rejects_oversized_steps() {
        let a = DMatrix::from_row_slice(1, 2, &[1.0, 1.0]);
        let steps = StepSizes { tau: 1.0, sigma: 1.0 };
        let z = PrimalDualPoint::new(DVector::zeros(2), DVector::zeros(1));
        assert!(matches!(weighted_norms(&z, &steps, &a), Err(Error::InvalidStepSizes { .. })));
        assert!(StepSizes::validated(-1.0, 1.0, 1.0).is_err());
    }
}
