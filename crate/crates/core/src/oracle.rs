//! Brute-force ground truth for small instances.
//!
//! Basis enumeration certifies optima, a sampling search bounds the
//! normalized duality gap from below, and a perturbation search bounds the
//! stability measures `ζ_p`, `ζ_d` from above. None of these routines share
//! code paths with the closed forms they are used to check.

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;

use crate::conditioning::{dual_edge_directions, edge_directions, OptimalCertificate};
use crate::error::{Error, Result};
use crate::lp::{columns, is_singular, nonbasic, LpInstance, PrimalDualPoint};
use crate::rng::Stream;
use crate::solver::gap_direction;
use crate::spectral::StepSizes;

/// Largest number of candidate bases the enumerator accepts.
pub const ENUMERATION_LIMIT: u128 = 1_000_000;

/// Largest `n + m` accepted by [`rho_grid_oracle`].
pub const GRID_ORACLE_MAX_DIM: usize = 8;

/// `C(n, k)`, saturating.
pub fn binomial(n: usize, k: usize) -> u128 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for i in 0..k {
        acc = acc.saturating_mul((n - i) as u128) / (i as u128 + 1);
    }
    acc
}

/// All `k`-subsets of `0..n` in lexicographic order.
fn combinations(n: usize, k: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    let mut idx: Vec<usize> = (0..k).collect();
    loop {
        out.push(idx.clone());
        let Some(i) = (0..k).rev().find(|&i| idx[i] != i + n - k) else {
            return out;
        };
        idx[i] += 1;
        for j in i + 1..k {
            idx[j] = idx[j - 1] + 1;
        }
    }
}

/// A feasible basic solution with its dual pair.
#[derive(Clone, Debug, PartialEq)]
pub struct BasicSolution {
    pub basis: Vec<usize>,
    pub x: DVector<f64>,
    pub y: DVector<f64>,
    pub s: DVector<f64>,
    pub objective: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct EnumerationResult {
    /// Optimal feasible bases (ties within `1e-10·(1 + |f*|)`).
    pub optimal: Vec<BasicSolution>,
    pub objective: f64,
    /// Exactly one optimal basis that is also nondegenerate.
    pub unique: bool,
    pub nondegenerate: bool,
    /// Objectives of all feasible basic solutions.
    pub feasible_objectives: Vec<f64>,
}

impl EnumerationResult {
    pub fn optimal_bases(&self) -> Vec<Vec<usize>> {
        self.optimal.iter().map(|s| s.basis.clone()).collect()
    }
}

struct Candidate {
    solution: BasicSolution,
    unbounded_ray: bool,
}

fn evaluate_basis(inst: &LpInstance, basis: &[usize]) -> Result<Option<Candidate>> {
    let b = columns(inst.a(), basis);
    if is_singular(&b)? {
        return Ok(None);
    }
    let lu = b.clone().lu();
    let Some(x_b) = lu.solve(inst.b()) else {
        return Ok(None);
    };
    if x_b.iter().any(|&v| v < -1e-12 * (1.0 + x_b.amax())) {
        return Ok(None);
    }
    let c_b = DVector::from_iterator(basis.len(), basis.iter().map(|&j| inst.c()[j]));
    let y = b.transpose().lu().solve(&c_b).ok_or(Error::SingularBasis)?;
    let mut s = inst.slack(&y);
    let mut x = DVector::zeros(inst.n());
    for (k, &j) in basis.iter().enumerate() {
        x[j] = x_b[k].max(0.0);
        s[j] = 0.0;
    }
    let scale = 1.0 + inst.c().amax();
    let mut unbounded_ray = false;
    for j in nonbasic(inst.n(), basis) {
        if s[j] < -1e-12 * scale {
            let col = lu.solve(&inst.a().column(j).into_owned()).ok_or(Error::SingularBasis)?;
            if col.iter().all(|&v| v <= 1e-12 * (1.0 + col.amax())) {
                unbounded_ray = true;
            }
        }
    }
    let objective = inst.c().dot(&x);
    Ok(Some(Candidate { solution: BasicSolution { basis: basis.to_vec(), x, y, s, objective }, unbounded_ray }))
}

/// Enumerates every basis and keeps the optimal feasible ones.
pub fn enumerate_optimal_basis(inst: &LpInstance) -> Result<EnumerationResult> {
    let count = binomial(inst.n(), inst.m());
    if count > ENUMERATION_LIMIT {
        return Err(Error::TooLarge(format!("C({}, {}) = {count} bases", inst.n(), inst.m())));
    }
    let combos = combinations(inst.n(), inst.m());
    let evaluated: Vec<Option<Candidate>> =
        combos.par_iter().map(|basis| evaluate_basis(inst, basis)).collect::<Result<_>>()?;
    let feasible: Vec<Candidate> = evaluated.into_iter().flatten().collect();
    if feasible.is_empty() {
        return Err(Error::Infeasible);
    }
    if feasible.iter().any(|c| c.unbounded_ray) {
        return Err(Error::Unbounded);
    }
    let objective = feasible.iter().map(|c| c.solution.objective).fold(f64::INFINITY, f64::min);
    let tie = 1e-10 * (1.0 + objective.abs());
    let feasible_objectives: Vec<f64> = feasible.iter().map(|c| c.solution.objective).collect();
    let optimal: Vec<BasicSolution> = feasible
        .into_iter()
        .filter(|c| c.solution.objective <= objective + tie)
        .map(|c| c.solution)
        .collect();
    let nondegenerate = optimal.len() == 1 && {
        let sol = &optimal[0];
        sol.basis.iter().all(|&j| sol.x[j] > 0.0) && nonbasic(inst.n(), &sol.basis).iter().all(|&j| sol.s[j] > 0.0)
    };
    Ok(EnumerationResult { unique: nondegenerate, nondegenerate, optimal, objective, feasible_objectives })
}

/// Certificate for the unique optimal basis, verified against the
/// certificate invariants.
pub fn certify(inst: &LpInstance) -> Result<OptimalCertificate> {
    let result = enumerate_optimal_basis(inst)?;
    if result.optimal.len() != 1 {
        return Err(Error::MultipleOptima { bases: result.optimal_bases() });
    }
    let sol = result.optimal.into_iter().next().expect("one optimal basis");
    if sol.s.min() < -1e-9 * (1.0 + sol.s.amax()) {
        return Err(Error::InvalidCertificate("optimal basis is not dual feasible".into()));
    }
    OptimalCertificate::new(inst, sol.basis, sol.x, sol.y, sol.s)
}

/// Smallest objective gap among feasible vertices that are not optimal;
/// infinite when every vertex is optimal.
pub fn best_suboptimal_gap(inst: &LpInstance, cert: &OptimalCertificate) -> Result<f64> {
    let result = match enumerate_optimal_basis(inst) {
        Ok(r) => r,
        Err(Error::TooLarge(msg)) => return Err(Error::TooLarge(msg)),
        Err(e) => return Err(e),
    };
    let f_star = inst.c().dot(&cert.x);
    let tie = 1e-10 * (1.0 + f_star.abs());
    Ok(result
        .feasible_objectives
        .iter()
        .map(|&f| f - f_star)
        .filter(|&g| g > tie)
        .fold(f64::INFINITY, f64::min))
}

/// Lower bound on `ρ(r; z)` in the `M̃` norm by dense sampling of the
/// feasible ball, local refinement, and every clipping pattern of the
/// boundary. Uses at least `10^6` evaluated points.
pub fn rho_grid_oracle(inst: &LpInstance, z: &PrimalDualPoint, r: f64, steps: &StepSizes) -> Result<f64> {
    rho_grid_oracle_with(inst, z, r, steps, 1_000_000, 0x5EED)
}

pub fn rho_grid_oracle_with(
    inst: &LpInstance,
    z: &PrimalDualPoint,
    r: f64,
    steps: &StepSizes,
    samples: usize,
    seed: u64,
) -> Result<f64> {
    let (n, m) = (inst.n(), inst.m());
    if n + m > GRID_ORACLE_MAX_DIM {
        return Err(Error::TooLarge(format!("n + m = {} exceeds {GRID_ORACLE_MAX_DIM}", n + m)));
    }
    if !(r > 0.0) {
        return Ok(0.0);
    }
    let (dx, dy) = gap_direction(inst, &z.x, &inst.a().tr_mul(&z.y), &(inst.a() * &z.x));
    // Whitened coordinates u = (Δx/√τ, Δy/√σ): the ball is Euclidean and the
    // objective is gᵀu.
    let (st, ss) = (steps.tau.sqrt(), steps.sigma.sqrt());
    let dim = n + m;
    let g: Vec<f64> = dx.iter().map(|v| v * st).chain(dy.iter().map(|v| v * ss)).collect();
    let lower: Vec<f64> = z.x.iter().map(|v| -v / st).collect();
    let sampler = BallSampler { g: &g, lower: &lower, r, n };

    let mut best = 0.0f64;
    let mut best_u = vec![0.0; dim];

    for value in sampler.pattern_candidates() {
        best = best.max(value);
    }

    let mut rng = Stream::new(seed);
    let random_budget = samples * 6 / 10;
    let g_norm = g.iter().map(|v| v * v).sum::<f64>().sqrt();
    let noise_levels = [1.0, 0.3, 0.1, 0.03, 0.01, 0.003, 1e-3, 1e-4];
    for i in 0..random_budget {
        let mut u: Vec<f64> = (0..dim).map(|_| rng.normal()).collect();
        if i % 2 == 1 && g_norm > 0.0 {
            let level = noise_levels[(i / 2) % noise_levels.len()];
            for (ui, gi) in u.iter_mut().zip(&g) {
                *ui = gi / g_norm + level * *ui;
            }
        }
        let norm = u.iter().map(|v| v * v).sum::<f64>().sqrt();
        if norm == 0.0 {
            continue;
        }
        let radius = if i % 5 == 0 { r * rng.uniform() } else { r };
        for ui in &mut u {
            *ui *= radius / norm;
        }
        let u = sampler.repair(u, i % 5 != 0);
        let value = sampler.value(&u);
        if value > best {
            best = value;
            best_u = u;
        }
    }

    // Stochastic hill climbing from the best sample; the feasible set is
    // convex, so any improvement path leads toward the global maximum.
    let mut step = 0.1 * r;
    let mut failures = 0;
    let mut current = sampler.value(&best_u);
    for _ in 0..(samples - random_budget) {
        let dir = rng.unit_vector(dim);
        let trial: Vec<f64> = best_u.iter().zip(&dir).map(|(u, d)| u + step * d).collect();
        let trial = sampler.repair(trial, true);
        let value = sampler.value(&trial);
        if value > current {
            current = value;
            best_u = trial;
            failures = 0;
        } else {
            failures += 1;
            if failures >= 40 {
                step *= 0.5;
                failures = 0;
                if step < 1e-13 * r {
                    step = 0.1 * r;
                }
            }
        }
    }
    best = best.max(current);
    Ok(best / r)
}

struct BallSampler<'a> {
    g: &'a [f64],
    lower: &'a [f64],
    r: f64,
    n: usize,
}

impl BallSampler<'_> {
    fn value(&self, u: &[f64]) -> f64 {
        u.iter().zip(self.g).map(|(a, b)| a * b).sum()
    }

    /// Clips to the orthant, shrinks into the ball, and optionally stretches
    /// back out to the sphere as far as feasibility allows.
    fn repair(&self, mut u: Vec<f64>, to_boundary: bool) -> Vec<f64> {
        for i in 0..self.n {
            u[i] = u[i].max(self.lower[i]);
        }
        let norm = u.iter().map(|v| v * v).sum::<f64>().sqrt();
        if norm > self.r {
            for v in &mut u {
                *v *= self.r / norm;
            }
        } else if to_boundary && norm > 0.0 {
            let mut alpha = self.r / norm;
            for i in 0..self.n {
                if u[i] < 0.0 {
                    alpha = alpha.min(self.lower[i] / u[i]);
                }
            }
            if alpha > 1.0 {
                for v in &mut u {
                    *v *= alpha;
                }
            }
        }
        u
    }

    /// For every subset of clipped primal coordinates, the best point that
    /// puts the remaining radius along the free part of `g`, plus the point
    /// with the free part at zero.
    fn pattern_candidates(&self) -> Vec<f64> {
        let mut out = Vec::new();
        let dim = self.g.len();
        let r2 = self.r * self.r;
        for mask in 0u32..(1u32 << self.n) {
            let clipped = |i: usize| i < self.n && mask & (1 << i) != 0;
            let used: f64 = (0..self.n).filter(|&i| clipped(i)).map(|i| self.lower[i] * self.lower[i]).sum();
            if used > r2 {
                continue;
            }
            let fixed: f64 = (0..self.n).filter(|&i| clipped(i)).map(|i| self.g[i] * self.lower[i]).sum();
            out.push(fixed);
            let free_norm = (0..dim).filter(|&i| !clipped(i)).map(|i| self.g[i] * self.g[i]).sum::<f64>().sqrt();
            if free_norm == 0.0 {
                continue;
            }
            let radius = (r2 - used).sqrt();
            let feasible = (0..self.n).filter(|&i| !clipped(i)).all(|i| radius * self.g[i] / free_norm >= self.lower[i]);
            if feasible {
                out.push(fixed + radius * free_norm);
            }
        }
        out
    }
}

/// Which data the perturbation search moves.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PerturbationMode {
    /// `c ← c + t·d` with `‖d‖ = 1`.
    Cost,
    /// `b ← b + t·A d` with `d ∈ Im(Aᵀ)`, `‖d‖ = 1`, so that
    /// `‖Δb‖_{(AAᵀ)⁻¹} = t`.
    Rhs,
}

#[derive(Clone, Debug)]
pub struct ZetaSearch {
    /// Smallest magnitude found that breaks the optimal basis.
    pub min_break: f64,
    pub direction: DVector<f64>,
    /// Smallest break over the directions aligned with edges.
    pub edge_min: f64,
    /// Smallest break over the random directions.
    pub random_min: f64,
}

/// Tolerance of the break-point bisection, absolute below 1 and relative
/// above.
pub const BREAK_TOL: f64 = 1e-9;

fn basis_survives(inst: &LpInstance, theta: &[usize]) -> bool {
    match enumerate_optimal_basis(inst) {
        Ok(result) if result.optimal.len() == 1 => {
            let mut got = result.optimal[0].basis.clone();
            got.sort_unstable();
            got == theta
        }
        _ => false,
    }
}

fn perturbed(inst: &LpInstance, mode: PerturbationMode, dir: &DVector<f64>, t: f64) -> Result<LpInstance> {
    match mode {
        PerturbationMode::Cost => inst.with_rhs_and_cost(inst.b().clone(), inst.c() + dir * t),
        PerturbationMode::Rhs => inst.with_rhs_and_cost(inst.b() + inst.a() * dir * t, inst.c().clone()),
    }
}

/// Smallest `t > 0` (to [`BREAK_TOL`]`·max(1, t)`) at which the basis no longer is the
/// unique optimum; infinite if it survives every tested magnitude.
fn break_point(inst: &LpInstance, theta: &[usize], mode: PerturbationMode, dir: &DVector<f64>, scale: f64) -> Result<f64> {
    let mut hi = scale.max(1e-6);
    let mut doublings = 0;
    while basis_survives(&perturbed(inst, mode, dir, hi)?, theta) {
        hi *= 2.0;
        doublings += 1;
        if doublings > 60 {
            return Ok(f64::INFINITY);
        }
    }
    let mut lo = 0.0;
    while hi - lo > BREAK_TOL * hi.max(1.0) {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if basis_survives(&perturbed(inst, mode, dir, mid)?, theta) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(hi)
}

/// Empirical upper bound on `ζ_p` (cost mode) or `ζ_d` (right-hand-side
/// mode) over `n_dirs` random unit directions plus the edge-aligned ones.
pub fn zeta_perturbation_search(
    inst: &LpInstance,
    cert: &OptimalCertificate,
    n_dirs: usize,
    mode: PerturbationMode,
    seed: u64,
) -> Result<ZetaSearch> {
    let count = binomial(inst.n(), inst.m());
    if count > ENUMERATION_LIMIT {
        return Err(Error::TooLarge(format!("C({}, {}) = {count} bases", inst.n(), inst.m())));
    }
    let mut theta = cert.basis.clone();
    theta.sort_unstable();
    if !basis_survives(inst, &theta) {
        return Err(Error::InvalidCertificate("certificate basis is not the unique optimum".into()));
    }

    let mut rng = Stream::new(seed);
    let mut directions: Vec<DVector<f64>> = Vec::with_capacity(n_dirs);
    for _ in 0..n_dirs {
        let v = DVector::from_vec(rng.unit_vector(inst.n()));
        let d = match mode {
            PerturbationMode::Cost => v,
            PerturbationMode::Rhs => {
                let p = inst.project_row_space(&v);
                let norm = p.norm();
                if norm < 1e-12 {
                    continue;
                }
                p / norm
            }
        };
        directions.push(d);
    }
    let random_count = directions.len();
    let edges = match mode {
        PerturbationMode::Cost => edge_directions(inst, cert)?,
        PerturbationMode::Rhs => dual_edge_directions(inst, cert)?,
    };
    directions.extend(edges.into_iter().map(|u| -&u / u.norm()));

    let scale = match mode {
        PerturbationMode::Cost => 0.25 * (1.0 + inst.c().norm()),
        PerturbationMode::Rhs => 0.25 * (1.0 + inst.b().norm()),
    };
    let breaks: Vec<f64> =
        directions.par_iter().map(|d| break_point(inst, &theta, mode, d, scale)).collect::<Result<_>>()?;
    let argmin = |range: std::ops::Range<usize>| -> (f64, usize) {
        range.fold((f64::INFINITY, usize::MAX), |acc, i| if breaks[i] < acc.0 { (breaks[i], i) } else { acc })
    };
    let (random_min, _) = argmin(0..random_count);
    let (edge_min, _) = argmin(random_count..directions.len());
    let (min_break, idx) = argmin(0..directions.len());
    let direction = if idx == usize::MAX { DVector::zeros(inst.n()) } else { directions[idx].clone() };
    Ok(ZetaSearch { min_break, direction, edge_min, random_min })
}

/// Dense matrix of all feasible vertices (one per column), for diagnostics.
pub fn feasible_vertices(inst: &LpInstance) -> Result<DMatrix<f64>> {
    let count = binomial(inst.n(), inst.m());
    if count > ENUMERATION_LIMIT {
        return Err(Error::TooLarge(format!("C({}, {}) = {count} bases", inst.n(), inst.m())));
    }
    let mut cols: Vec<DVector<f64>> = Vec::new();
    for basis in combinations(inst.n(), inst.m()) {
        if let Some(c) = evaluate_basis(inst, &basis)? {
            if !cols.iter().any(|v| (v - &c.solution.x).amax() <= 1e-12 * (1.0 + v.amax())) {
                cols.push(c.solution.x);
            }
        }
    }
    Ok(DMatrix::from_columns(&cols))
}
