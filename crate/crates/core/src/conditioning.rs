//! Closed-form condition numbers of an LP with a unique nondegenerate
//! optimum, and the iteration bounds they imply for rPDHG.
//!
//! Throughout, `Θ` is the optimal basis, `B = A_Θ`, `N = A_Θ̄` and
//! `T = B⁻¹N`. The central quantity is
//!
//! ```text
//! Φ = (‖x*‖₁ + ‖s*‖₁) · max{ max_j √(‖T_{·j}‖² + 1) / s*_{Θ̄(j)},
//!                             max_i √(‖T_{i·}‖² + 1) / x*_{Θ(i)} }
//! ```

use nalgebra::{DMatrix, DVector, SymmetricEigen, LU};
use serde::{Serialize, Serializer};

use crate::error::{Error, Result};
use crate::lp::{
    check_basis_indices, columns, compute_symmetric_form, is_singular, nonbasic, CertificateData, LpInstance,
};
use crate::spectral::{extreme_singular_values, operator_norm};

/// Tolerance for certificate feasibility and complementarity checks.
pub const CERTIFICATE_TOL: f64 = 1e-8;

/// Optimal basis together with a primal-dual optimal solution.
#[derive(Clone, Debug, PartialEq)]
pub struct OptimalCertificate {
    pub basis: Vec<usize>,
    pub x: DVector<f64>,
    pub y: DVector<f64>,
    pub s: DVector<f64>,
    /// `x*_Θ > 0` and `s*_Θ̄ > 0`.
    pub nondegenerate: bool,
    /// Primal and dual optima are both unique.
    pub unique: bool,
}

impl OptimalCertificate {
    /// Checks primal and dual feasibility, complementarity and the basis
    /// pattern, all relative to [`CERTIFICATE_TOL`].
    pub fn new(inst: &LpInstance, basis: Vec<usize>, x: DVector<f64>, y: DVector<f64>, s: DVector<f64>) -> Result<Self> {
        check_basis_indices(inst, &basis)?;
        if x.len() != inst.n() || s.len() != inst.n() || y.len() != inst.m() {
            return Err(Error::DimensionMismatch("certificate vectors do not match the instance".into()));
        }
        if x.iter().chain(y.iter()).chain(s.iter()).any(|v| !v.is_finite()) {
            return Err(Error::NonFiniteData);
        }
        let tol = CERTIFICATE_TOL;
        let fail = |msg: String| Err(Error::InvalidCertificate(msg));
        let primal = (inst.a() * &x - inst.b()).norm();
        if primal > tol * (1.0 + inst.b().norm()) {
            return fail(format!("||Ax - b|| = {primal:e}"));
        }
        let dual = (inst.a().tr_mul(&y) + &s - inst.c()).norm();
        if dual > tol * (1.0 + inst.c().norm()) {
            return fail(format!("||A^T y + s - c|| = {dual:e}"));
        }
        let x_scale = 1.0 + x.amax();
        let s_scale = 1.0 + s.amax();
        if x.min() < -tol * x_scale {
            return fail(format!("x has a negative entry {:e}", x.min()));
        }
        if s.min() < -tol * s_scale {
            return fail(format!("s has a negative entry {:e}", s.min()));
        }
        let comp = x.dot(&s).abs();
        if comp > tol * (1.0 + x.norm() * s.norm()) {
            return fail(format!("x^T s = {comp:e}"));
        }
        let nb = nonbasic(inst.n(), &basis);
        if let Some(&j) = nb.iter().find(|&&j| x[j].abs() > tol * x_scale) {
            return fail(format!("x_{} = {:e} is nonzero off the basis", j + 1, x[j]));
        }
        if let Some(&j) = basis.iter().find(|&&j| s[j].abs() > tol * s_scale) {
            return fail(format!("s_{} = {:e} is nonzero on the basis", j + 1, s[j]));
        }
        let nondegenerate = basis.iter().all(|&j| x[j] > 0.0) && nb.iter().all(|&j| s[j] > 0.0);
        Ok(Self { basis, x, y, s, nondegenerate, unique: nondegenerate })
    }

    pub fn from_data(inst: &LpInstance, data: &CertificateData) -> Result<Self> {
        Self::new(
            inst,
            data.basis.clone(),
            DVector::from_column_slice(&data.x),
            DVector::from_column_slice(&data.y),
            DVector::from_column_slice(&data.s),
        )
    }

    pub fn to_data(&self) -> CertificateData {
        CertificateData {
            basis: self.basis.clone(),
            x: self.x.iter().copied().collect(),
            y: self.y.iter().copied().collect(),
            s: self.s.iter().copied().collect(),
        }
    }

    pub fn nonbasic(&self) -> Vec<usize> {
        nonbasic(self.x.len(), &self.basis)
    }

    /// `‖w*‖ = √(‖x*‖² + ‖s*‖²)`.
    pub fn w_norm(&self) -> f64 {
        (self.x.norm_squared() + self.s.norm_squared()).sqrt()
    }

    pub fn x_l1(&self) -> f64 {
        self.x.lp_norm(1)
    }

    pub fn s_l1(&self) -> f64 {
        self.s.lp_norm(1)
    }

    fn require_nondegenerate(&self) -> Result<()> {
        if self.nondegenerate {
            Ok(())
        } else {
            Err(Error::DegenerateCertificate)
        }
    }
}

/// Basis-ordered quantities: `T = B⁻¹N`, `x*_Θ` and `s*_Θ̄`.
struct Tableau {
    lu: LU<f64, nalgebra::Dyn, nalgebra::Dyn>,
    t: DMatrix<f64>,
    x_b: DVector<f64>,
    s_n: DVector<f64>,
}

impl Tableau {
    fn new(inst: &LpInstance, cert: &OptimalCertificate) -> Result<Self> {
        cert.require_nondegenerate()?;
        let basis = &cert.basis;
        let nb = cert.nonbasic();
        let b = columns(inst.a(), basis);
        if is_singular(&b)? {
            return Err(Error::SingularBasis);
        }
        let lu = b.lu();
        let t = lu.solve(&columns(inst.a(), &nb)).ok_or(Error::SingularBasis)?;
        let x_b = DVector::from_iterator(basis.len(), basis.iter().map(|&j| cert.x[j]));
        let s_n = DVector::from_iterator(nb.len(), nb.iter().map(|&j| cert.s[j]));
        Ok(Self { lu, t, x_b, s_n })
    }

    /// `√(‖T_{·j}‖² + 1) / s*_{Θ̄(j)}` for each nonbasic `j`.
    fn column_factors(&self) -> impl Iterator<Item = f64> + '_ {
        self.t.column_iter().zip(self.s_n.iter()).map(|(col, &s)| (col.norm_squared() + 1.0).sqrt() / s)
    }

    /// `√(‖T_{i·}‖² + 1) / x*_{Θ(i)}` for each basic `i`.
    fn row_factors(&self) -> impl Iterator<Item = f64> + '_ {
        self.t.row_iter().zip(self.x_b.iter()).map(|(row, &x)| (row.norm_squared() + 1.0).sqrt() / x)
    }

    fn binv_a(&self, inst: &LpInstance) -> Result<DMatrix<f64>> {
        self.lu.solve(inst.a()).ok_or(Error::SingularBasis)
    }

    fn binv(&self) -> Result<DMatrix<f64>> {
        self.lu.try_inverse().ok_or(Error::SingularBasis)
    }
}

fn max_of(it: impl Iterator<Item = f64>) -> f64 {
    it.fold(f64::NEG_INFINITY, f64::max)
}

/// Smallest nonzero entry of `x* + s*`.
pub fn xi(cert: &OptimalCertificate) -> Result<f64> {
    cert.require_nondegenerate()?;
    Ok((&cert.x + &cert.s).min())
}

/// The condition number `Φ`, evaluated from the rows and columns of `B⁻¹N`.
pub fn phi(inst: &LpInstance, cert: &OptimalCertificate) -> Result<f64> {
    let tab = Tableau::new(inst, cert)?;
    let factor = max_of(tab.column_factors()).max(max_of(tab.row_factors()));
    Ok((cert.x_l1() + cert.s_l1()) * factor)
}

/// `‖x* + s*‖₁ / ξ · ‖B⁻¹A‖₂`, an upper bound on `Φ`.
pub fn phi_upper_bound(inst: &LpInstance, cert: &OptimalCertificate) -> Result<f64> {
    let tab = Tableau::new(inst, cert)?;
    let norm = operator_norm(&tab.binv_a(inst)?)?;
    Ok((&cert.x + &cert.s).lp_norm(1) / xi(cert)? * norm)
}

/// Edge directions of the feasible region at `x*`, in original coordinates:
/// `u^j` enters nonbasic column `Θ̄(j)` with unit weight and adjusts the
/// basic variables by `−B⁻¹N_{·j}`.
pub fn edge_directions(inst: &LpInstance, cert: &OptimalCertificate) -> Result<Vec<DVector<f64>>> {
    check_basis_indices(inst, &cert.basis)?;
    let b = columns(inst.a(), &cert.basis);
    if is_singular(&b)? {
        return Err(Error::SingularBasis);
    }
    let lu = b.lu();
    cert.nonbasic()
        .iter()
        .map(|&j| {
            let col = lu.solve(&inst.a().column(j).into_owned()).ok_or(Error::SingularBasis)?;
            let mut u = DVector::zeros(inst.n());
            u[j] = 1.0;
            for (k, &i) in cert.basis.iter().enumerate() {
                u[i] = -col[k];
            }
            Ok(u)
        })
        .collect()
}

/// Orthonormal rows spanning `Null(A)`, from the eigenvectors of the
/// projector `I − Aᵀ(AAᵀ)⁻¹A` with eigenvalue one.
pub fn nullspace_rows(inst: &LpInstance) -> Result<DMatrix<f64>> {
    let n = inst.n();
    let k = n - inst.m();
    let chol = (inst.a() * inst.a().transpose()).cholesky().ok_or(Error::FactorizationFailure)?;
    let proj = DMatrix::<f64>::identity(n, n) - inst.a().tr_mul(&chol.solve(inst.a()));
    let proj = (&proj + proj.transpose()) * 0.5;
    let eig = SymmetricEigen::try_new(proj, f64::EPSILON, 0).ok_or(Error::ConvergenceFailure("symmetric eigensolver"))?;
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[j].total_cmp(&eig.eigenvalues[i]));
    Ok(DMatrix::from_fn(k, n, |r, c| eig.eigenvectors[(c, order[r])]))
}

/// `Q_Θ̄⁻¹ Q_Θ` for an orthonormal nullspace basis `Q`.
fn q_ratio(inst: &LpInstance, cert: &OptimalCertificate) -> Result<DMatrix<f64>> {
    let q = nullspace_rows(inst)?;
    let nb = cert.nonbasic();
    let q_n = columns(&q, &nb);
    let q_b = columns(&q, &cert.basis);
    if nb.is_empty() {
        return Ok(DMatrix::zeros(0, cert.basis.len()));
    }
    if is_singular(&q_n)? {
        return Err(Error::SingularBasis);
    }
    q_n.lu().solve(&q_b).ok_or(Error::SingularBasis)
}

/// Max-abs residual of `Q_Θ̄⁻¹Q_Θ = −(B⁻¹N)ᵀ`.
pub fn nullspace_basis_check(inst: &LpInstance, cert: &OptimalCertificate) -> Result<f64> {
    check_basis_indices(inst, &cert.basis)?;
    let b = columns(inst.a(), &cert.basis);
    if is_singular(&b)? {
        return Err(Error::SingularBasis);
    }
    let t = b.lu().solve(&columns(inst.a(), &cert.nonbasic())).ok_or(Error::SingularBasis)?;
    let ratio = q_ratio(inst, cert)?;
    Ok((ratio + t.transpose()).amax())
}

/// Dual counterparts of the edge directions, built from the nullspace
/// basis: `v^i` has `e_i` on `Θ` and `−(Q_Θ̄⁻¹Q_Θ)_{·i}` on `Θ̄`, so it lies
/// in `Im(Aᵀ)`.
pub fn dual_edge_directions(inst: &LpInstance, cert: &OptimalCertificate) -> Result<Vec<DVector<f64>>> {
    let ratio = q_ratio(inst, cert)?;
    let nb = cert.nonbasic();
    Ok(cert
        .basis
        .iter()
        .enumerate()
        .map(|(col, &i)| {
            let mut v = DVector::zeros(inst.n());
            v[i] = 1.0;
            for (r, &j) in nb.iter().enumerate() {
                v[j] = -ratio[(r, col)];
            }
            v
        })
        .collect())
}

/// Stability and sharpness measures.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct StabilityMeasures {
    pub zeta_p: f64,
    pub zeta_d: f64,
    pub mu_p: f64,
    pub mu_d: f64,
    pub eta_p: f64,
    pub eta_d: f64,
}

/// `(ζ_p, ζ_d)` from the primal edge directions and the dual directions of
/// [`dual_edge_directions`]. This route shares no code with [`phi`].
pub fn zetas(inst: &LpInstance, cert: &OptimalCertificate) -> Result<(f64, f64)> {
    cert.require_nondegenerate()?;
    let nb = cert.nonbasic();
    let zeta_p = edge_directions(inst, cert)?
        .iter()
        .zip(&nb)
        .map(|(u, &j)| cert.s[j] / u.norm())
        .fold(f64::INFINITY, f64::min);
    let zeta_d = dual_edge_directions(inst, cert)?
        .iter()
        .zip(&cert.basis)
        .map(|(v, &i)| cert.x[i] / v.norm())
        .fold(f64::INFINITY, f64::min);
    Ok((zeta_p, zeta_d))
}

pub fn stability_measures(inst: &LpInstance, cert: &OptimalCertificate) -> Result<StabilityMeasures> {
    let (zeta_p, zeta_d) = zetas(inst, cert)?;
    let sym = compute_symmetric_form(inst);
    if sym.norm_c_bar <= 1e-14 * (1.0 + inst.c().norm()) {
        return Err(Error::ZeroObjectiveProjection);
    }
    Ok(StabilityMeasures {
        zeta_p,
        zeta_d,
        mu_p: zeta_p / sym.norm_c_bar,
        mu_d: zeta_d / sym.norm_q,
        eta_p: zeta_p,
        eta_d: zeta_d,
    })
}

/// Closed-form geometry of the sublevel set `{gap ≤ δ}` near `w*`.
#[derive(Clone, Debug)]
pub struct SublevelGeometry {
    pub delta: f64,
    /// Largest distance from `w*` to an extreme point of the sublevel set.
    pub d_hat: f64,
    /// Conic radius `δ / (‖x*‖₁ + ‖s*‖₁)`.
    pub r: f64,
    pub ratio: f64,
    /// Primal extreme points `x* + (δ/s*_j) u^j`.
    pub x_points: Vec<DVector<f64>>,
    /// Dual extreme points `s* + (δ/x*_i) v^i`.
    pub s_points: Vec<DVector<f64>>,
    /// Primal-only conic radius `δ / ‖s*‖₁`.
    pub r_primal: f64,
    /// Bracket on the primal-only diameter.
    pub d_primal_bracket: (f64, f64),
}

pub fn sublevel_geometry(inst: &LpInstance, cert: &OptimalCertificate, delta: f64) -> Result<SublevelGeometry> {
    if !(delta > 0.0 && delta.is_finite()) {
        return Err(Error::InvalidParameter(format!("delta = {delta} must be positive")));
    }
    cert.require_nondegenerate()?;
    let nb = cert.nonbasic();
    let x_points: Vec<DVector<f64>> = edge_directions(inst, cert)?
        .into_iter()
        .zip(&nb)
        .map(|(u, &j)| &cert.x + u * (delta / cert.s[j]))
        .collect();
    let s_points: Vec<DVector<f64>> = dual_edge_directions(inst, cert)?
        .into_iter()
        .zip(&cert.basis)
        .map(|(v, &i)| &cert.s + v * (delta / cert.x[i]))
        .collect();
    let primal_reach = x_points.iter().map(|p| (p - &cert.x).norm()).fold(0.0, f64::max);
    let dual_reach = s_points.iter().map(|p| (p - &cert.s).norm()).fold(0.0, f64::max);
    let d_hat = primal_reach.max(dual_reach);
    let r = delta / (cert.x_l1() + cert.s_l1());
    Ok(SublevelGeometry {
        delta,
        d_hat,
        r,
        ratio: d_hat / r,
        x_points,
        s_points,
        r_primal: delta / cert.s_l1(),
        d_primal_bracket: (primal_reach, 2.0 * primal_reach),
    })
}

/// Bound evaluated with `Φ̂ = Φ` and with `Φ̂ = 2Φ`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Bracket {
    pub optimistic: f64,
    pub conservative: f64,
}

impl Bracket {
    fn from_fn(phi: f64, f: impl Fn(f64) -> f64) -> Self {
        Self { optimistic: f(phi), conservative: f(2.0 * phi) }
    }
}

fn ln_clamped(v: f64) -> f64 {
    v.max(1.0).ln()
}

/// `380κΦ̂ [ln(380κΦ̂) + ln(‖w*‖/ε)]`.
pub fn global_bound(kappa: f64, phi_hat: f64, w_norm: f64, epsilon: f64) -> f64 {
    let c = 380.0 * kappa * phi_hat;
    c * (ln_clamped(c) + ln_clamped(w_norm / epsilon))
}

/// `380κΦ̂ ln(4560κ²Φ̂‖w*‖/ξ) + ⌈8(6√2 + 8)κΦ̂/β⌉`.
pub fn basis_bound(kappa: f64, phi_hat: f64, w_norm: f64, xi: f64, beta: f64) -> f64 {
    380.0 * kappa * phi_hat * ln_clamped(4560.0 * kappa * kappa * phi_hat * w_norm / xi)
        + (8.0 * (6.0 * 2f64.sqrt() + 8.0) * kappa * phi_hat / beta).ceil()
}

/// `⌈32‖B⁻¹‖‖A‖/β⌉ · max{0, ln(ξ/ε)}`; at `β = 1/e` the first factor is
/// `⌈32e‖B⁻¹‖‖A‖⌉`.
pub fn local_bound(binv_times_a: f64, xi: f64, epsilon: f64, beta: f64) -> f64 {
    (32.0 * binv_times_a / beta).ceil() * (xi / epsilon).ln().max(0.0)
}

/// Explicit iteration bounds. The constants (380, 4560, 32, ...) come from
/// the convergence proofs; they are not tuned.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BoundReport {
    #[serde(rename = "global_T")]
    pub global_t: Bracket,
    #[serde(rename = "T_basis")]
    pub t_basis: Bracket,
    #[serde(rename = "T_local")]
    pub t_local: f64,
    /// Global bound with `Φ̂` written as `(‖x*‖₁+‖s*‖₁)/min(ζ_p, ζ_d)`.
    #[serde(rename = "zeta_form_T")]
    pub zeta_form_t: Bracket,
    /// Global bound applied to the instance reweighted at the ℓ1-balancing
    /// ratio.
    #[serde(rename = "reweighted_T")]
    pub reweighted_t: Bracket,
    pub kappa: f64,
    pub phi: f64,
    pub w_norm: f64,
    pub xi: f64,
    pub epsilon: f64,
    #[serde(rename = "norm_Binv_norm_A")]
    pub binv_times_a: f64,
    pub beta: f64,
}

pub fn iteration_bounds(inst: &LpInstance, cert: &OptimalCertificate, epsilon: f64, beta: f64) -> Result<BoundReport> {
    if !(epsilon > 0.0 && epsilon.is_finite()) {
        return Err(Error::InvalidParameter(format!("epsilon = {epsilon} must be positive")));
    }
    if !(beta > 0.0 && beta < 1.0) {
        return Err(Error::InvalidParameter(format!("beta = {beta} must lie in (0, 1)")));
    }
    let spec = extreme_singular_values(inst.a())?;
    let phi_value = phi(inst, cert)?;
    let tab = Tableau::new(inst, cert)?;
    let binv_times_a = operator_norm(&tab.binv()?)? * spec.lambda_max;
    let xi_value = xi(cert)?;
    let w_norm = cert.w_norm();
    let kappa = spec.kappa;
    let (zeta_p, zeta_d) = zetas(inst, cert)?;
    let phi_zeta = (cert.x_l1() + cert.s_l1()) / zeta_p.min(zeta_d);
    let rw = optimal_reweight(cert, zeta_p, zeta_d);
    let spread = rw.omega_ratio.max(1.0 / rw.omega_ratio);
    Ok(BoundReport {
        global_t: Bracket::from_fn(phi_value, |p| global_bound(kappa, p, w_norm, epsilon)),
        t_basis: Bracket::from_fn(phi_value, |p| basis_bound(kappa, p, w_norm, xi_value, beta)),
        t_local: local_bound(binv_times_a, xi_value, epsilon, beta),
        zeta_form_t: Bracket::from_fn(phi_zeta, |p| global_bound(kappa, p, w_norm, epsilon)),
        reweighted_t: Bracket::from_fn(rw.phi_at_ratio, |p| global_bound(kappa, p, w_norm * spread, epsilon)),
        kappa,
        phi: phi_value,
        w_norm,
        xi: xi_value,
        epsilon,
        binv_times_a,
        beta,
    })
}

/// Static primal-dual reweighting summary.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Reweighting {
    /// `ω₁/ω₂ = ‖x*‖₁ / ‖s*‖₁`, which equalizes the ℓ1 norms of the
    /// reweighted optimal primal and dual slacks.
    pub omega_ratio: f64,
    /// `2·max{‖x*‖₁/ζ_p, ‖s*‖₁/ζ_d}` as printed in the reference statement.
    pub phi_opt: f64,
    /// `Φ_{ω₁,ω₂}` evaluated at `omega_ratio`, which equals
    /// `2·max{‖s*‖₁/ζ_p, ‖x*‖₁/ζ_d}`.
    pub phi_at_ratio: f64,
}

pub fn optimal_reweight(cert: &OptimalCertificate, zeta_p: f64, zeta_d: f64) -> Reweighting {
    let (xl, sl) = (cert.x_l1(), cert.s_l1());
    let omega_ratio = xl / sl;
    Reweighting {
        omega_ratio,
        phi_opt: 2.0 * (xl / zeta_p).max(sl / zeta_d),
        phi_at_ratio: phi_reweighted_raw(xl, sl, zeta_p, zeta_d, omega_ratio, 1.0),
    }
}

fn phi_reweighted_raw(xl: f64, sl: f64, zeta_p: f64, zeta_d: f64, w1: f64, w2: f64) -> f64 {
    (w2 * xl + w1 * sl) * (1.0 / (w1 * zeta_p)).max(1.0 / (w2 * zeta_d))
}

/// `Φ` of the instance with cost `ω₁c` and right-hand side `ω₂b`:
/// `(ω₂‖x*‖₁ + ω₁‖s*‖₁) · max{1/(ω₁ζ_p), 1/(ω₂ζ_d)}`.
pub fn phi_reweighted(cert: &OptimalCertificate, zeta_p: f64, zeta_d: f64, w1: f64, w2: f64) -> Result<f64> {
    if !(w1 > 0.0 && w2 > 0.0 && w1.is_finite() && w2.is_finite()) {
        return Err(Error::NonPositiveWeights);
    }
    Ok(phi_reweighted_raw(cert.x_l1(), cert.s_l1(), zeta_p, zeta_d, w1, w2))
}

/// Best objective gap of a suboptimal vertex, when it could be enumerated.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum SuboptimalGap {
    Value(f64),
    /// The feasible region has no other vertex.
    Infinite,
    /// Too many bases to enumerate.
    Unknown,
}

impl Serialize for SuboptimalGap {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            SuboptimalGap::Value(v) => s.serialize_f64(*v),
            SuboptimalGap::Infinite => s.serialize_str("infinite"),
            SuboptimalGap::Unknown => s.serialize_str("unknown"),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct SublevelSummary {
    pub delta: f64,
    #[serde(rename = "D_hat")]
    pub d_hat: f64,
    pub r: f64,
    pub ratio: f64,
}

/// Everything the laboratory knows about one certified instance.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ConditionReport {
    pub name: String,
    pub m: usize,
    pub n: usize,
    pub phi: f64,
    pub phi_upper: f64,
    /// `[Φ, 2Φ]`, the bracket on the limiting diameter-to-radius ratio.
    pub phi_hat_bracket: [f64; 2],
    pub kappa: f64,
    pub lambda_max: f64,
    pub lambda_min: f64,
    pub xi: f64,
    pub zeta_p: f64,
    pub zeta_d: f64,
    /// Absent when the cost has no component in `Null(A)`.
    pub mu_p: Option<f64>,
    pub mu_d: f64,
    pub eta_p: f64,
    pub eta_d: f64,
    #[serde(rename = "norm_Binv")]
    pub norm_binv: f64,
    #[serde(rename = "norm_A")]
    pub norm_a: f64,
    #[serde(rename = "norm_BinvA")]
    pub norm_binv_a: f64,
    pub w_norm: f64,
    pub x_l1: f64,
    pub s_l1: f64,
    pub nullspace_residual: f64,
    pub delta_bar_p: SuboptimalGap,
    pub sublevel: SublevelSummary,
    pub bounds: BoundReport,
    pub reweight: Reweighting,
}

/// Largest `C(n, m)` for which the report also enumerates vertices.
pub const REPORT_ENUMERATION_LIMIT: u128 = 20_000;

/// Computes the full report; `delta` sets the sublevel set that is sampled.
pub fn analyze(
    inst: &LpInstance,
    cert: &OptimalCertificate,
    epsilon: f64,
    beta: f64,
    delta: f64,
) -> Result<ConditionReport> {
    let spec = extreme_singular_values(inst.a())?;
    let tab = Tableau::new(inst, cert)?;
    let phi_value = phi(inst, cert)?;
    let (zeta_p, zeta_d) = zetas(inst, cert)?;
    let mu_p = match stability_measures(inst, cert) {
        Ok(m) => Some(m.mu_p),
        Err(Error::ZeroObjectiveProjection) => None,
        Err(e) => return Err(e),
    };
    let sym = compute_symmetric_form(inst);
    let norm_binv = operator_norm(&tab.binv()?)?;
    let geometry = sublevel_geometry(inst, cert, delta)?;
    let delta_bar_p = if crate::oracle::binomial(inst.n(), inst.m()) <= REPORT_ENUMERATION_LIMIT {
        match crate::oracle::best_suboptimal_gap(inst, cert)? {
            v if v.is_infinite() => SuboptimalGap::Infinite,
            v => SuboptimalGap::Value(v),
        }
    } else {
        SuboptimalGap::Unknown
    };
    Ok(ConditionReport {
        name: inst.name().to_string(),
        m: inst.m(),
        n: inst.n(),
        phi: phi_value,
        phi_upper: phi_upper_bound(inst, cert)?,
        phi_hat_bracket: [phi_value, 2.0 * phi_value],
        kappa: spec.kappa,
        lambda_max: spec.lambda_max,
        lambda_min: spec.lambda_min,
        xi: xi(cert)?,
        zeta_p,
        zeta_d,
        mu_p,
        mu_d: zeta_d / sym.norm_q,
        eta_p: zeta_p,
        eta_d: zeta_d,
        norm_binv,
        norm_a: spec.lambda_max,
        norm_binv_a: operator_norm(&tab.binv_a(inst)?)?,
        w_norm: cert.w_norm(),
        x_l1: cert.x_l1(),
        s_l1: cert.s_l1(),
        nullspace_residual: nullspace_basis_check(inst, cert)?,
        delta_bar_p,
        sublevel: SublevelSummary { delta, d_hat: geometry.d_hat, r: geometry.r, ratio: geometry.ratio },
        bounds: iteration_bounds(inst, cert, epsilon, beta)?,
        reweight: optimal_reweight(cert, zeta_p, zeta_d),
    })
}

impl ConditionReport {
    pub fn summary(&self) -> String {
        format!(
            "{}: m={} n={} kappa={:.6} phi={:.6e} phi_upper={:.6e} xi={:.6e} zeta_p={:.6e} zeta_d={:.6e} \
             |B^-1||A|={:.6e} global_T=[{:.3e}, {:.3e}]",
            self.name,
            self.m,
            self.n,
            self.kappa,
            self.phi,
            self.phi_upper,
            self.xi,
            self.zeta_p,
            self.zeta_d,
            self.bounds.binv_times_a,
            self.bounds.global_t.optimistic,
            self.bounds.global_t.conservative,
        )
    }
}
