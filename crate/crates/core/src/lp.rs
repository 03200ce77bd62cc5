//! Standard-form linear programs and their symmetric reformulation.
//!
//! The primal is `min cᵀx s.t. Ax = b, x ≥ 0` and the dual is
//! `max bᵀy s.t. Aᵀy + s = c, s ≥ 0`. Rows of `A` must be linearly
//! independent; the Cholesky factor of `AAᵀ` is computed once at validation
//! and reused by every projection.

use std::path::Path;

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Relative threshold on singular values below which rows count as dependent.
pub const RANK_TOL: f64 = 1e-10;

#[derive(Clone, Debug)]
pub struct LpInstance {
    name: String,
    a: DMatrix<f64>,
    b: DVector<f64>,
    c: DVector<f64>,
    gram: Cholesky<f64, Dyn>,
}

/// Checks dimensions, finiteness and row rank, and caches the `AAᵀ` factor.
pub fn validate_instance(
    name: impl Into<String>,
    a: DMatrix<f64>,
    b: DVector<f64>,
    c: DVector<f64>,
) -> Result<LpInstance> {
    let (m, n) = a.shape();
    if m == 0 {
        return Err(Error::DimensionMismatch("A has no rows".into()));
    }
    if n < m {
        return Err(Error::DimensionMismatch(format!("n = {n} < m = {m}")));
    }
    if b.len() != m {
        return Err(Error::DimensionMismatch(format!("b has length {}, expected {m}", b.len())));
    }
    if c.len() != n {
        return Err(Error::DimensionMismatch(format!("c has length {}, expected {n}", c.len())));
    }
    if a.iter().chain(b.iter()).chain(c.iter()).any(|v| !v.is_finite()) {
        return Err(Error::NonFiniteData);
    }
    let (sigma_min, sigma_max) = extreme_singular_values_svd(&a)?;
    if sigma_max == 0.0 || sigma_min <= RANK_TOL * sigma_max {
        return Err(Error::RankDeficient { sigma_min, sigma_max });
    }
    let gram = Cholesky::new(&a * a.transpose()).ok_or(Error::FactorizationFailure)?;
    Ok(LpInstance { name: name.into(), a, b, c, gram })
}

fn extreme_singular_values_svd(a: &DMatrix<f64>) -> Result<(f64, f64)> {
    let svd = nalgebra::SVD::try_new(a.clone(), false, false, f64::EPSILON, 0)
        .ok_or(Error::ConvergenceFailure("singular value decomposition"))?;
    let sv = &svd.singular_values;
    Ok((sv.min(), sv.max()))
}

impl LpInstance {
    /// Builds an instance from row-major data.
    pub fn from_rows(name: impl Into<String>, rows: &[Vec<f64>], b: &[f64], c: &[f64]) -> Result<Self> {
        let m = rows.len();
        let n = rows.first().map_or(0, Vec::len);
        if let Some((i, row)) = rows.iter().enumerate().find(|(_, r)| r.len() != n) {
            return Err(Error::DimensionMismatch(format!(
                "row {} of A has length {}, expected {n}",
                i + 1,
                row.len()
            )));
        }
        let a = DMatrix::from_fn(m, n, |i, j| rows[i][j]);
        validate_instance(name, a, DVector::from_column_slice(b), DVector::from_column_slice(c))
    }

    /// Same matrix with new `b` and `c`, reusing the cached factorization.
    pub fn with_rhs_and_cost(&self, b: DVector<f64>, c: DVector<f64>) -> Result<Self> {
        if b.len() != self.m() || c.len() != self.n() {
            return Err(Error::DimensionMismatch("replacement b or c has the wrong length".into()));
        }
        if b.iter().chain(c.iter()).any(|v| !v.is_finite()) {
            return Err(Error::NonFiniteData);
        }
        Ok(Self { name: self.name.clone(), a: self.a.clone(), b, c, gram: self.gram.clone() })
    }

    pub fn name(&self) -> &str {
        &self.name
    }
    pub fn m(&self) -> usize {
        self.a.nrows()
    }
    pub fn n(&self) -> usize {
        self.a.ncols()
    }
    pub fn a(&self) -> &DMatrix<f64> {
        &self.a
    }
    pub fn b(&self) -> &DVector<f64> {
        &self.b
    }
    pub fn c(&self) -> &DVector<f64> {
        &self.c
    }

    /// Solves `AAᵀ u = rhs` with the cached factor.
    pub fn gram_solve(&self, rhs: &DVector<f64>) -> DVector<f64> {
        self.gram.solve(rhs)
    }

    /// `Aᵀ(AAᵀ)⁻¹A v`, the orthogonal projection of `v` onto `Im(Aᵀ)`.
    pub fn project_row_space(&self, v: &DVector<f64>) -> DVector<f64> {
        self.a.tr_mul(&self.gram_solve(&(&self.a * v)))
    }

    /// Dual slack `c − Aᵀy`.
    pub fn slack(&self, y: &DVector<f64>) -> DVector<f64> {
        &self.c - self.a.tr_mul(y)
    }
}

/// The projected data of the symmetric primal-dual form.
#[derive(Clone, Debug, PartialEq)]
pub struct SymmetricForm {
    /// `Aᵀ(AAᵀ)⁻¹b`, the least-norm solution of `Ax = b`.
    pub q: DVector<f64>,
    /// Projection of `c` onto `Null(A)`.
    pub c_bar: DVector<f64>,
    pub norm_q: f64,
    pub norm_c_bar: f64,
}

pub fn compute_symmetric_form(inst: &LpInstance) -> SymmetricForm {
    let q = inst.a.tr_mul(&inst.gram_solve(&inst.b));
    let c_bar = &inst.c - inst.project_row_space(&inst.c);
    let norm_q = q.norm();
    let norm_c_bar = c_bar.norm();
    SymmetricForm { q, c_bar, norm_q, norm_c_bar }
}

/// A primal-dual pair `z = (x, y)`; the slack `s = c − Aᵀy` is derived on demand.
#[derive(Clone, Debug, PartialEq)]
pub struct PrimalDualPoint {
    pub x: DVector<f64>,
    pub y: DVector<f64>,
}

impl PrimalDualPoint {
    pub fn new(x: DVector<f64>, y: DVector<f64>) -> Self {
        Self { x, y }
    }

    pub fn origin(inst: &LpInstance) -> Self {
        Self { x: DVector::zeros(inst.n()), y: DVector::zeros(inst.m()) }
    }

    pub fn s(&self, inst: &LpInstance) -> DVector<f64> {
        inst.slack(&self.y)
    }
}

/// `cᵀx − bᵀy`.
pub fn duality_gap(inst: &LpInstance, x: &DVector<f64>, y: &DVector<f64>) -> f64 {
    inst.c.dot(x) - inst.b.dot(y)
}

/// `cᵀx − qᵀ(c − s)`, the gap written in the `(x, s)` variables.
pub fn duality_gap_xs(inst: &LpInstance, sym: &SymmetricForm, x: &DVector<f64>, s: &DVector<f64>) -> f64 {
    inst.c.dot(x) - sym.q.dot(&(&inst.c - s))
}

/// Relative KKT error with `x` clipped to the nonnegative orthant.
///
/// `‖Ax⁺−b‖/(1+‖b‖) + ‖(c−Aᵀy)⁻‖/(1+‖c‖) + |cᵀx⁺−bᵀy|/(1+|cᵀx⁺|+|bᵀy|)`
pub fn relative_error(inst: &LpInstance, x: &DVector<f64>, y: &DVector<f64>) -> f64 {
    let xp = x.map(|v| v.max(0.0));
    let primal = (&inst.a * &xp - &inst.b).norm() / (1.0 + inst.b.norm());
    let dual = inst.slack(y).map(|v| v.min(0.0)).norm() / (1.0 + inst.c.norm());
    let cx = inst.c.dot(&xp);
    let by = inst.b.dot(y);
    let gap = (cx - by).abs() / (1.0 + cx.abs() + by.abs());
    primal + dual + gap
}

/// Column reordering: new column `j` is old column `order[j]`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Permutation {
    pub order: Vec<usize>,
}

impl Permutation {
    pub fn identity(n: usize) -> Self {
        Self { order: (0..n).collect() }
    }

    pub fn is_identity(&self) -> bool {
        self.order.iter().enumerate().all(|(i, &j)| i == j)
    }

    /// Moves a vector from original to permuted coordinates.
    pub fn apply(&self, v: &DVector<f64>) -> DVector<f64> {
        DVector::from_iterator(self.order.len(), self.order.iter().map(|&j| v[j]))
    }

    /// Moves a vector from permuted back to original coordinates.
    pub fn restore(&self, v: &DVector<f64>) -> DVector<f64> {
        let mut out = DVector::zeros(v.len());
        for (new, &old) in self.order.iter().enumerate() {
            out[old] = v[new];
        }
        out
    }

    /// Inverse of [`permute_to_basis_order`] on the instance data.
    pub fn restore_instance(&self, inst: &LpInstance) -> Result<LpInstance> {
        let mut a = DMatrix::zeros(inst.m(), inst.n());
        for (new, &old) in self.order.iter().enumerate() {
            a.set_column(old, &inst.a.column(new));
        }
        validate_instance(inst.name.clone(), a, inst.b.clone(), self.restore(&inst.c))
    }
}

/// Checks that `basis` has `m` distinct in-range indices.
pub fn check_basis_indices(inst: &LpInstance, basis: &[usize]) -> Result<()> {
    if basis.len() != inst.m() {
        return Err(Error::InvalidBasis(format!("basis has {} indices, expected {}", basis.len(), inst.m())));
    }
    let mut seen = vec![false; inst.n()];
    for &j in basis {
        if j >= inst.n() {
            return Err(Error::InvalidBasis(format!("index {} out of range 1..={}", j + 1, inst.n())));
        }
        if std::mem::replace(&mut seen[j], true) {
            return Err(Error::InvalidBasis(format!("index {} repeated", j + 1)));
        }
    }
    Ok(())
}

/// Columns of `A` indexed by `cols`, in that order.
pub fn columns(a: &DMatrix<f64>, cols: &[usize]) -> DMatrix<f64> {
    DMatrix::from_fn(a.nrows(), cols.len(), |i, j| a[(i, cols[j])])
}

/// Complement of `basis` in `0..n`, ascending.
pub fn nonbasic(n: usize, basis: &[usize]) -> Vec<usize> {
    let mut in_basis = vec![false; n];
    for &j in basis {
        in_basis[j] = true;
    }
    (0..n).filter(|&j| !in_basis[j]).collect()
}

/// True when the square matrix is numerically singular.
pub fn is_singular(b: &DMatrix<f64>) -> Result<bool> {
    let (lo, hi) = extreme_singular_values_svd(b)?;
    Ok(hi == 0.0 || lo <= RANK_TOL * hi)
}

/// Reorders columns so that `basis` (in the given order) comes first and the
/// remaining columns follow in increasing index order.
pub fn permute_to_basis_order(inst: &LpInstance, basis: &[usize]) -> Result<(LpInstance, Permutation)> {
    check_basis_indices(inst, basis)?;
    if is_singular(&columns(&inst.a, basis))? {
        return Err(Error::SingularBasis);
    }
    let mut order = basis.to_vec();
    order.extend(nonbasic(inst.n(), basis));
    let perm = Permutation { order };
    let permuted = validate_instance(inst.name.clone(), columns(&inst.a, &perm.order), inst.b.clone(), perm.apply(&inst.c))?;
    Ok((permuted, perm))
}

/// Certificate block of the instance file (0-based basis indices).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CertificateData {
    pub basis: Vec<usize>,
    pub x: Vec<f64>,
    pub y: Vec<f64>,
    pub s: Vec<f64>,
}

/// On-disk JSON instance.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InstanceFile {
    pub name: String,
    pub m: usize,
    pub n: usize,
    #[serde(rename = "A")]
    pub a: Vec<Vec<f64>>,
    pub b: Vec<f64>,
    pub c: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub certificate: Option<CertificateData>,
}

impl InstanceFile {
    pub fn from_instance(inst: &LpInstance, certificate: Option<CertificateData>) -> Self {
        Self {
            name: inst.name.clone(),
            m: inst.m(),
            n: inst.n(),
            a: (0..inst.m()).map(|i| inst.a.row(i).iter().copied().collect()).collect(),
            b: inst.b.iter().copied().collect(),
            c: inst.c.iter().copied().collect(),
            certificate,
        }
    }

    /// Validates the declared sizes and the data.
    pub fn to_instance(&self) -> Result<LpInstance> {
        if self.a.len() != self.m {
            return Err(Error::DimensionMismatch(format!("A has {} rows but m = {}", self.a.len(), self.m)));
        }
        if self.a.iter().any(|r| r.len() != self.n) {
            return Err(Error::DimensionMismatch(format!("a row of A does not have n = {} entries", self.n)));
        }
        LpInstance::from_rows(self.name.clone(), &self.a, &self.b, &self.c)
    }

    pub fn read(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Ok(serde_json::from_str(&text)?)
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        std::fs::write(path, crate::format::to_json_pretty(self)?)?;
        Ok(())
    }
}
