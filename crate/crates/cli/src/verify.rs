//! Oracle cross-checks: trust-region bisection against the sampling oracle,
//! closed-form `ζ` against perturbation search, and the `Φ` identities.

use nalgebra::DVector;
use rayon::prelude::*;
use serde::Serialize;

use rpdhg::conditioning::{phi, sublevel_geometry, zetas, OptimalCertificate};
use rpdhg::harness::{generate_todd, ToddSpec};
use rpdhg::lp::{LpInstance, PrimalDualPoint};
use rpdhg::oracle::{self, PerturbationMode};
use rpdhg::rng::{derive_seed, Stream};
use rpdhg::solver::{normalized_duality_gap, NormMode};
use rpdhg::spectral::StepSizes;
use rpdhg::Result;

/// Outcome of one family of checks.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CheckSummary {
    pub name: &'static str,
    pub cases: usize,
    pub violations: usize,
    /// Largest violation-scale quantity observed (see each check).
    pub worst: f64,
}

impl CheckSummary {
    fn collect(name: &'static str, outcomes: Vec<Result<f64>>, limit: f64) -> Self {
        let mut summary = CheckSummary { name, cases: outcomes.len(), violations: 0, worst: 0.0 };
        for outcome in outcomes {
            match outcome {
                Ok(v) => {
                    summary.worst = summary.worst.max(v);
                    if !(v <= limit) {
                        summary.violations += 1;
                    }
                }
                Err(_) => summary.violations += 1,
            }
        }
        summary
    }

    pub fn passed(&self) -> bool {
        self.violations == 0
    }

    pub fn line(&self) -> String {
        format!(
            "{}: {} cases, {} violations, worst {:.3e} [{}]",
            self.name,
            self.cases,
            self.violations,
            self.worst,
            if self.passed() { "ok" } else { "FAIL" }
        )
    }
}

/// Tolerances of the suite.
pub const RHO_REL_TOL: f64 = 1e-4;
pub const IDENTITY_REL_TOL: f64 = 1e-9;
pub const CERT_TOL: f64 = 1e-9;
pub const ZETA_UNDERCUT_TOL: f64 = 1e-6;
pub const ZETA_EDGE_SLACK: f64 = 0.05;

fn rel_diff(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(f64::MIN_POSITIVE)
}

/// `|ρ_bisection − ρ_grid| / (1 + ρ_bisection)` on a random triple
/// `(instance, z, r)` with `n + m ≤ 8`.
pub fn rho_case(seed: u64, samples: usize) -> Result<f64> {
    let mut rng = Stream::new(seed);
    let m = 1 + (rng.uniform() * 2.0) as usize;
    let n = m + 1 + (rng.uniform() * (oracle::GRID_ORACLE_MAX_DIM - 2 * m) as f64) as usize;
    let rows: Vec<Vec<f64>> = (0..m).map(|_| (0..n).map(|_| rng.normal()).collect()).collect();
    let b: Vec<f64> = (0..m).map(|_| rng.normal()).collect();
    let c: Vec<f64> = (0..n).map(|_| rng.normal()).collect();
    let inst = LpInstance::from_rows(format!("rho-{seed}"), &rows, &b, &c)?;
    let x = DVector::from_iterator(n, (0..n).map(|_| if rng.uniform() < 0.3 { 0.0 } else { rng.half_normal() }));
    let y = DVector::from_iterator(m, (0..m).map(|_| rng.normal()));
    let z = PrimalDualPoint::new(x, y);
    let r = 0.1 + 2.0 * rng.uniform();
    let a_norm = rpdhg::spectral::extreme_singular_values(inst.a())?.lambda_max;
    let tau = (0.2 + 0.8 * rng.uniform()) / a_norm;
    let sigma = (0.2 + 0.8 * rng.uniform()) / a_norm;
    let steps = StepSizes::validated(tau, sigma, a_norm)?;
    let bisection = normalized_duality_gap(&inst, &z, r, &steps, NormMode::MTilde)?;
    let grid = oracle::rho_grid_oracle_with(&inst, &z, r, &steps, samples, seed ^ 0xA5A5)?;
    Ok((bisection - grid).abs() / (1.0 + bisection))
}

/// Worst relative gap between `Φ`, `(‖x*‖₁+‖s*‖₁)/min(ζ_p, ζ_d)` and the
/// sublevel ratio at `δ ∈ {1e-3, 1}`.
pub fn identity_case(inst: &LpInstance, cert: &OptimalCertificate) -> Result<f64> {
    let value = phi(inst, cert)?;
    let (zeta_p, zeta_d) = zetas(inst, cert)?;
    let mut worst = rel_diff(value, (cert.x_l1() + cert.s_l1()) / zeta_p.min(zeta_d));
    for delta in [1e-3, 1.0] {
        worst = worst.max(rel_diff(value, sublevel_geometry(inst, cert, delta)?.ratio));
    }
    Ok(worst)
}

/// Largest residual of the enumeration certificate: primal and dual
/// feasibility, complementarity, `s = c − Aᵀy`, and agreement with `known`.
pub fn certificate_case(inst: &LpInstance, known: Option<&OptimalCertificate>) -> Result<f64> {
    let cert = oracle::certify(inst)?;
    let scale = 1.0 + inst.b().amax() + inst.c().amax();
    let mut worst = (inst.a() * &cert.x - inst.b()).amax() / scale;
    worst = worst.max((inst.c() - inst.a().tr_mul(&cert.y) - &cert.s).amax() / scale);
    worst = worst.max(-cert.x.min().min(0.0) / scale);
    worst = worst.max(-cert.s.min().min(0.0) / scale);
    worst = worst.max(cert.x.dot(&cert.s).abs() / (scale * scale));
    if let Some(k) = known {
        if k.basis != cert.basis {
            return Ok(f64::INFINITY);
        }
        worst = worst.max((&k.x - &cert.x).amax() / scale);
    }
    Ok(worst)
}

/// Worst of the undercut `(ζ − search)/ζ` and the edge slack
/// `(edge search − ζ)/ζ − 0.05 + 1e-6`, both for `ζ_p` (cost) and `ζ_d`
/// (right-hand side); a value above `1e-6` is a violation.
pub fn zeta_case(inst: &LpInstance, cert: &OptimalCertificate, dirs: usize, seed: u64) -> Result<f64> {
    let (zeta_p, zeta_d) = zetas(inst, cert)?;
    let mut worst = f64::NEG_INFINITY;
    for (mode, zeta) in [(PerturbationMode::Cost, zeta_p), (PerturbationMode::Rhs, zeta_d)] {
        let search = oracle::zeta_perturbation_search(inst, cert, dirs, mode, seed)?;
        worst = worst.max((zeta - search.min_break) / zeta);
        worst = worst.max((search.edge_min - zeta) / zeta - ZETA_EDGE_SLACK + ZETA_UNDERCUT_TOL);
    }
    Ok(worst.max(0.0))
}

fn todd(m: usize, n: usize, seed: u64) -> Result<(LpInstance, OptimalCertificate)> {
    let t = generate_todd(&ToddSpec { m, n, seed, use_projected_c: true })?;
    Ok((t.instance, t.certificate))
}

/// Parameters of the random suite.
#[derive(Clone, Copy, Debug)]
pub struct SuiteParams {
    pub seed: u64,
    /// Cases per check.
    pub count: usize,
    /// Points evaluated by the `ρ` sampling oracle per case.
    pub samples: usize,
    /// Random directions per `ζ` search.
    pub dirs: usize,
}

impl Default for SuiteParams {
    fn default() -> Self {
        Self { seed: 1, count: 10, samples: 1_000_000, dirs: 100 }
    }
}

/// Runs every check on `count` random cases each.
pub fn run_suite(params: &SuiteParams) -> Vec<CheckSummary> {
    let seeds: Vec<u64> = (0..params.count as u64).map(|i| derive_seed(params.seed, i)).collect();
    let rho = seeds.par_iter().map(|&s| rho_case(s, params.samples)).collect();
    let identities = seeds
        .par_iter()
        .enumerate()
        .map(|(i, &s)| {
            let m = 3 + i % 4;
            let (inst, cert) = todd(m, 2 * m, s)?;
            identity_case(&inst, &cert)
        })
        .collect();
    let certificates = seeds
        .par_iter()
        .enumerate()
        .map(|(i, &s)| {
            let m = 2 + i % 3;
            let (inst, cert) = todd(m, 2 * m, s)?;
            certificate_case(&inst, Some(&cert))
        })
        .collect();
    let zeta = seeds
        .par_iter()
        .enumerate()
        .map(|(i, &s)| {
            let m = 1 + i % 2;
            let (inst, cert) = todd(m, m + 2 + i % 2, s)?;
            zeta_case(&inst, &cert, params.dirs, s)
        })
        .collect();
    vec![
        CheckSummary::collect("rho_bisection_vs_grid", rho, RHO_REL_TOL),
        CheckSummary::collect("phi_identities", identities, IDENTITY_REL_TOL),
        CheckSummary::collect("certificate_invariants", certificates, CERT_TOL),
        CheckSummary::collect("zeta_formula_vs_search", zeta, ZETA_UNDERCUT_TOL),
    ]
}

/// Checks that apply to one certified instance: the `Φ` identities, and
/// when the instance is small enough the enumeration certificate and the
/// `ζ` search.
pub fn run_instance(inst: &LpInstance, cert: &OptimalCertificate, dirs: usize, seed: u64) -> Vec<CheckSummary> {
    let mut out = vec![CheckSummary::collect("phi_identities", vec![identity_case(inst, cert)], IDENTITY_REL_TOL)];
    if oracle::binomial(inst.n(), inst.m()) <= 20_000 {
        out.push(CheckSummary::collect("certificate_invariants", vec![certificate_case(inst, Some(cert))], CERT_TOL));
        out.push(CheckSummary::collect("zeta_formula_vs_search", vec![zeta_case(inst, cert, dirs, seed)], ZETA_UNDERCUT_TOL));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn small_suite_passes() {
        let params = SuiteParams { seed: 3, count: 3, samples: 100_000, dirs: 30 };
        for check in run_suite(&params) {
            assert!(check.passed(), "{}", check.line());
        }
    }

    #[test]
    fn summary_counts_errors_as_violations() {
        let s = CheckSummary::collect("x", vec![Ok(0.5), Err(rpdhg::Error::Infeasible), Ok(2.0)], 1.0);
        assert_eq!((s.cases, s.violations, s.worst), (3, 2, 2.0));
        assert!(s.line().contains("FAIL"));
    }
}
