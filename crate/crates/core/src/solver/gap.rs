//! The normalized duality gap
//! `ρ(r; z) = (1/r) · max { dᵀΔ : ‖Δ‖ ≤ r, x + Δx ≥ 0 }`
//! with `dx = −(c − Aᵀy)` and `dy = b − Ax`.
//!
//! For the diagonal norm `‖·‖_M̃` the maximizer for a ball multiplier `λ` is
//! available in closed form, `Δx = max(τ dx/λ, −x)`, `Δy = σ dy/λ`, and the
//! multiplier is found by bisection on `log λ`. For the full `‖·‖_M` norm the
//! dual block is eliminated and each multiplier requires a small
//! bound-constrained quadratic program.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lp::{LpInstance, PrimalDualPoint};
use crate::spectral::StepSizes;

/// Norm used for the ball in the normalized duality gap.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NormMode {
    /// `zᵀMz` with `M = [[I/τ, Aᵀ], [A, I/σ]]`.
    M,
    /// Diagonal surrogate `‖x‖²/τ + ‖y‖²/σ`.
    #[default]
    MTilde,
}

pub const DEFAULT_BISECTION_TOL: f64 = 1e-10;
const MAX_BISECTION_STEPS: usize = 200;

/// Maximizer of the trust-region problem and the resulting gap.
#[derive(Clone, Debug)]
pub struct GapSolution {
    pub rho: f64,
    pub delta_x: DVector<f64>,
    pub delta_y: DVector<f64>,
}

/// `ρ(r; z)` at the default bisection tolerance.
pub fn normalized_duality_gap(
    inst: &LpInstance,
    z: &PrimalDualPoint,
    r: f64,
    steps: &StepSizes,
    mode: NormMode,
) -> Result<f64> {
    normalized_duality_gap_with_tol(inst, z, r, steps, mode, DEFAULT_BISECTION_TOL)
}

pub fn normalized_duality_gap_with_tol(
    inst: &LpInstance,
    z: &PrimalDualPoint,
    r: f64,
    steps: &StepSizes,
    mode: NormMode,
    tol: f64,
) -> Result<f64> {
    let (dx, dy) = gap_direction(inst, &z.x, &inst.a().tr_mul(&z.y), &(inst.a() * &z.x));
    Ok(solve_gap(inst.a(), &z.x, &dx, &dy, r, steps, mode, tol)?.rho)
}

/// `(dx, dy) = (−(c − Aᵀy), b − Ax)` from precomputed products.
pub fn gap_direction(
    inst: &LpInstance,
    x: &DVector<f64>,
    aty: &DVector<f64>,
    ax: &DVector<f64>,
) -> (DVector<f64>, DVector<f64>) {
    debug_assert_eq!(x.len(), inst.n());
    (aty - inst.c(), inst.b() - ax)
}

/// Solves the trust-region problem; `r = 0` gives `ρ = 0`.
#[allow(clippy::too_many_arguments)]
pub fn solve_gap(
    a: &DMatrix<f64>,
    x: &DVector<f64>,
    dx: &DVector<f64>,
    dy: &DVector<f64>,
    r: f64,
    steps: &StepSizes,
    mode: NormMode,
    tol: f64,
) -> Result<GapSolution> {
    if !(r > 0.0) {
        return Ok(GapSolution { rho: 0.0, delta_x: DVector::zeros(x.len()), delta_y: DVector::zeros(dy.len()) });
    }
    match mode {
        NormMode::MTilde => solve_mtilde(x, dx, dy, r, steps, tol),
        NormMode::M => solve_m(a, x, dx, dy, r, steps, tol),
    }
}

fn finish(dx: &DVector<f64>, dy: &DVector<f64>, delta_x: DVector<f64>, delta_y: DVector<f64>, r: f64) -> GapSolution {
    let rho = ((dx.dot(&delta_x) + dy.dot(&delta_y)) / r).max(0.0);
    GapSolution { rho, delta_x, delta_y }
}

/// True when the linear objective grows without bound on `{Δx ≥ −x}`.
fn has_recession_ascent(dx: &DVector<f64>, dy: &DVector<f64>) -> bool {
    dy.iter().any(|&v| v != 0.0) || dx.iter().any(|&v| v > 0.0)
}

fn solve_mtilde(
    x: &DVector<f64>,
    dx: &DVector<f64>,
    dy: &DVector<f64>,
    r: f64,
    steps: &StepSizes,
    tol: f64,
) -> Result<GapSolution> {
    let (tau, sigma) = (steps.tau, steps.sigma);
    let r2 = r * r;
    let dy2 = dy.norm_squared();

    if !has_recession_ascent(dx, dy) {
        // λ → 0⁺ limit: every coordinate with a descent direction is clipped.
        let limit_sq: f64 = x.iter().zip(dx.iter()).filter(|(_, &d)| d < 0.0).map(|(&xi, _)| xi * xi / tau).sum();
        if limit_sq <= r2 {
            let delta_x = DVector::from_iterator(
                x.len(),
                x.iter().zip(dx.iter()).map(|(&xi, &d)| if d < 0.0 { -xi } else { 0.0 }),
            );
            return Ok(finish(dx, dy, delta_x, DVector::zeros(dy.len()), r));
        }
    }

    let norm_sq = |lam: f64| -> f64 {
        let px: f64 = x
            .iter()
            .zip(dx.iter())
            .map(|(&xi, &d)| {
                let v = (tau * d / lam).max(-xi);
                v * v
            })
            .sum();
        px / tau + sigma * dy2 / (lam * lam)
    };

    let mut hi = (tau * dx.norm_squared() + sigma * dy2).sqrt() / r;
    if hi == 0.0 {
        return Ok(GapSolution { rho: 0.0, delta_x: DVector::zeros(x.len()), delta_y: DVector::zeros(dy.len()) });
    }
    let mut lo = hi;
    let mut halvings = 0;
    while norm_sq(lo) <= r2 {
        hi = lo;
        lo *= 0.5;
        halvings += 1;
        if halvings > 4000 || lo == 0.0 {
            return Err(Error::BisectionFailure);
        }
    }
    let mut converged = false;
    for _ in 0..MAX_BISECTION_STEPS {
        if hi / lo - 1.0 <= tol {
            converged = true;
            break;
        }
        let mid = (lo * hi).sqrt();
        if norm_sq(mid) > r2 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    if !converged {
        return Err(Error::BisectionFailure);
    }

    // Within a fixed clipping pattern the squared norm is `a/λ² + const`,
    // so the multiplier can be solved for exactly.
    let clipped = |lam: f64| -> Vec<bool> { x.iter().zip(dx.iter()).map(|(&xi, &d)| tau * d / lam < -xi).collect() };
    let pattern = clipped(hi);
    let mut lam = hi;
    let fixed: f64 = x.iter().zip(&pattern).filter(|(_, &c)| c).map(|(&xi, _)| xi * xi / tau).sum();
    let scaled: f64 =
        tau * dx.iter().zip(&pattern).filter(|(_, &c)| !c).map(|(&d, _)| d * d).sum::<f64>() + sigma * dy2;
    if r2 > fixed && scaled > 0.0 {
        let exact = (scaled / (r2 - fixed)).sqrt();
        if exact.is_finite() && exact > 0.0 && clipped(exact) == pattern {
            lam = exact;
        }
    }
    let delta_x = DVector::from_iterator(x.len(), x.iter().zip(dx.iter()).map(|(&xi, &d)| (tau * d / lam).max(-xi)));
    let delta_y = dy * (sigma / lam);
    Ok(finish(dx, dy, delta_x, delta_y, r))
}

/// Reduced problem in `Δx` after eliminating `Δy = σ(dy/λ − AΔx)`.
struct MNormProblem<'a> {
    a: &'a DMatrix<f64>,
    x: &'a DVector<f64>,
    g: DVector<f64>,
    h: DMatrix<f64>,
    dy: &'a DVector<f64>,
    steps: StepSizes,
}

impl MNormProblem<'_> {
    fn delta(&self, lam: f64) -> Result<(DVector<f64>, DVector<f64>)> {
        // Substituting w = Δx + x ≥ 0 gives a nonnegative least-squares-type QP.
        let rhs = &self.h * self.x + &self.g / lam;
        let w = nonnegative_qp(&self.h, &rhs)?;
        let delta_x = w - self.x;
        let delta_y = (self.dy / lam - self.a * &delta_x) * self.steps.sigma;
        Ok((delta_x, delta_y))
    }

    fn norm(&self, dxv: &DVector<f64>, dyv: &DVector<f64>) -> f64 {
        self.steps.m_norm_with(dxv, dyv, &(self.a * dxv))
    }
}

fn solve_m(
    a: &DMatrix<f64>,
    x: &DVector<f64>,
    dx: &DVector<f64>,
    dy: &DVector<f64>,
    r: f64,
    steps: &StepSizes,
    tol: f64,
) -> Result<GapSolution> {
    let n = x.len();
    let (tau, sigma) = (steps.tau, steps.sigma);
    let h = DMatrix::<f64>::identity(n, n) / tau - a.tr_mul(a) * sigma;
    if h.clone().cholesky().is_none() {
        let product = tau * sigma * crate::spectral::operator_norm(a)?.powi(2);
        return Err(Error::InvalidStepSizes { product });
    }
    let problem = MNormProblem { a, x, g: dx - a.tr_mul(dy) * sigma, h, dy, steps: *steps };

    let scale = (tau * dx.norm_squared() + sigma * dy.norm_squared()).sqrt() / r;
    if scale == 0.0 {
        return Ok(GapSolution { rho: 0.0, delta_x: DVector::zeros(n), delta_y: DVector::zeros(dy.len()) });
    }
    let outside = |lam: f64| -> Result<bool> {
        let (u, v) = problem.delta(lam)?;
        Ok(problem.norm(&u, &v) > r)
    };

    let mut hi = scale;
    let mut guard = 0;
    while outside(hi)? {
        hi *= 2.0;
        guard += 1;
        if guard > 200 {
            return Err(Error::BisectionFailure);
        }
    }
    if !has_recession_ascent(dx, dy) {
        // Bounded objective: a tiny multiplier approximates the limit point.
        let tiny = hi * 1e-14;
        if !outside(tiny)? {
            let (u, v) = problem.delta(tiny)?;
            return Ok(finish(dx, dy, u, v, r));
        }
    }
    let mut lo = hi;
    guard = 0;
    while !outside(lo)? {
        hi = lo;
        lo *= 0.5;
        guard += 1;
        if guard > 4000 || lo == 0.0 {
            return Err(Error::BisectionFailure);
        }
    }
    let mut converged = false;
    for _ in 0..MAX_BISECTION_STEPS {
        if hi / lo - 1.0 <= tol {
            converged = true;
            break;
        }
        let mid = (lo * hi).sqrt();
        if outside(mid)? {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    if !converged {
        return Err(Error::BisectionFailure);
    }
    let (u, v) = problem.delta(hi)?;
    Ok(finish(dx, dy, u, v, r))
}

/// Minimizes `½wᵀHw − hᵀw` over `w ≥ 0` for positive-definite `H` with an
/// active-set method in the style of Lawson and Hanson.
pub fn nonnegative_qp(hmat: &DMatrix<f64>, h: &DVector<f64>) -> Result<DVector<f64>> {
    let n = h.len();
    let mut w = DVector::<f64>::zeros(n);
    let mut free = vec![false; n];
    let scale = 1.0 + h.amax() + hmat.amax();
    let tol = 1e-13 * scale;
    let solve_free = |free: &[bool]| -> Result<DVector<f64>> {
        let idx: Vec<usize> = (0..n).filter(|&i| free[i]).collect();
        let sub = DMatrix::from_fn(idx.len(), idx.len(), |i, j| hmat[(idx[i], idx[j])]);
        let rhs = DVector::from_iterator(idx.len(), idx.iter().map(|&i| h[i]));
        let sol = sub.cholesky().ok_or(Error::FactorizationFailure)?.solve(&rhs);
        let mut z = DVector::zeros(n);
        for (k, &i) in idx.iter().enumerate() {
            z[i] = sol[k];
        }
        Ok(z)
    };

    for _ in 0..(10 * n + 20) {
        let grad = h - hmat * &w;
        let candidate = (0..n).filter(|&i| !free[i]).max_by(|&i, &j| grad[i].total_cmp(&grad[j]));
        let Some(j) = candidate.filter(|&j| grad[j] > tol) else {
            return Ok(w);
        };
        free[j] = true;
        for _ in 0..(2 * n + 2) {
            let z = solve_free(&free)?;
            if (0..n).filter(|&i| free[i]).all(|i| z[i] > 0.0) {
                w = z;
                break;
            }
            let mut alpha = 1.0f64;
            for i in (0..n).filter(|&i| free[i] && z[i] <= 0.0) {
                let denom = w[i] - z[i];
                if denom > 0.0 {
                    alpha = alpha.min(w[i] / denom);
                }
            }
            w += (z - &w) * alpha;
            for i in 0..n {
                if free[i] && w[i] <= tol * 1e-3 {
                    free[i] = false;
                    w[i] = 0.0;
                }
            }
        }
    }
    Err(Error::ConvergenceFailure("bound-constrained QP"))
}
