//! Trace-level invariant checks for rPDHG.
//!
//! Each check returns a list of human-readable violations; an empty list
//! means the invariant held everywhere it was evaluated.

use nalgebra::DVector;

use super::{gap_direction, pdhg_step, solve_gap, NormMode, SolveTrace, DEFAULT_BISECTION_TOL};
use crate::error::{Error, Result};
use crate::lp::{LpInstance, PrimalDualPoint};
use crate::spectral::StepSizes;

fn m_dist(inst: &LpInstance, steps: &StepSizes, x: &DVector<f64>, y: &DVector<f64>, star: &PrimalDualPoint) -> f64 {
    let dx = x - &star.x;
    let dy = y - &star.y;
    let adx = inst.a() * &dx;
    steps.m_norm_with(&dx, &dy, &adx)
}

/// `‖pdhg_step(z*) − z*‖ / (1 + ‖z*‖)`.
pub fn fixed_point_residual(inst: &LpInstance, steps: &StepSizes, star: &PrimalDualPoint) -> f64 {
    let next = pdhg_step(inst, star, steps);
    let diff = ((&next.x - &star.x).norm_squared() + (&next.y - &star.y).norm_squared()).sqrt();
    let size = (star.x.norm_squared() + star.y.norm_squared()).sqrt();
    diff / (1.0 + size)
}

/// Both nonexpansiveness clauses with absolute-plus-relative slack `slack`:
/// averages never leave the `M`-ball around `z*` through their outer
/// iterate, and outer iterates approach `z*` monotonically.
pub fn nonexpansiveness_violations(
    inst: &LpInstance,
    steps: &StepSizes,
    trace: &SolveTrace,
    star: &PrimalDualPoint,
    slack: f64,
) -> Vec<String> {
    let mut out = Vec::new();
    let outer: Vec<f64> = (0..=trace.restarts.len())
        .map(|n| {
            let z = trace.outer_iterate(n);
            m_dist(inst, steps, &z.x, &z.y, star)
        })
        .collect();
    for rec in &trace.inner {
        let d = m_dist(inst, steps, &rec.x_avg, &rec.y_avg, star);
        if d > outer[rec.n] + slack * (1.0 + outer[rec.n]) {
            out.push(format!("average (n={}, k={}) at M-distance {d:e} exceeds outer {:e}", rec.n, rec.k, outer[rec.n]));
        }
    }
    for w in outer.windows(2).enumerate() {
        let (i, pair) = w;
        if pair[1] > pair[0] + slack * (1.0 + pair[0]) {
            out.push(format!("outer iterate {} moved away from z*: {:e} > {:e}", i + 1, pair[1], pair[0]));
        }
    }
    out
}

/// `ρ_M(‖z̄^{n,k} − z^{n,0}‖_M; z̄^{n,k}) ≤ 8 ‖z^{n,0} − z*‖_M / k` on every
/// traced inner iterate (requires a full trace).
pub fn sublinear_decay_violations(
    inst: &LpInstance,
    steps: &StepSizes,
    trace: &SolveTrace,
    star: &PrimalDualPoint,
    slack: f64,
) -> Result<Vec<String>> {
    if trace.inner.is_empty() && trace.total_onepdhg > 0 {
        return Err(Error::InvalidParameter("sublinear decay check needs a full trace".into()));
    }
    let mut out = Vec::new();
    let outer: Vec<PrimalDualPoint> = (0..=trace.restarts.len()).map(|n| trace.outer_iterate(n)).collect();
    for rec in &trace.inner {
        let z0 = &outer[rec.n];
        let dist_star = m_dist(inst, steps, &z0.x, &z0.y, star);
        let r = m_dist(inst, steps, &rec.x_avg, &rec.y_avg, z0);
        let ax = inst.a() * &rec.x_avg;
        let aty = inst.a().tr_mul(&rec.y_avg);
        let (dx, dy) = gap_direction(inst, &rec.x_avg, &aty, &ax);
        let rho = solve_gap(inst.a(), &rec.x_avg, &dx, &dy, r, steps, NormMode::M, DEFAULT_BISECTION_TOL)?.rho;
        let bound = 8.0 * dist_star / rec.k as f64;
        if rho > bound + slack * (1.0 + bound) {
            out.push(format!("n={}, k={}: rho {rho:e} exceeds 8*Dist/k = {bound:e}", rec.n, rec.k));
        }
    }
    Ok(out)
}

/// Recorded gaps at successive restarts (from the second restart on) shrink
/// by at least `beta`.
pub fn restart_decrease_violations(trace: &SolveTrace, beta: f64, slack: f64) -> Vec<String> {
    let mut out = Vec::new();
    for pair in trace.restarts.windows(2) {
        let (prev, next) = (&pair[0], &pair[1]);
        if next.rho > beta * prev.rho * (1.0 + slack) + f64::MIN_POSITIVE {
            out.push(format!("restart {}: rho {:e} > beta * {:e}", next.n, next.rho, prev.rho));
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::solver::{run_rpdhg, SolverConfig, Target, TraceLevel, DEFAULT_BETA};

    #[test]
    fn lp1_trace_satisfies_all_invariants() {
        let inst = LpInstance::from_rows("LP1", &[vec![1.0, 1.0, 1.0]], &[2.0], &[2.0, -1.1, -0.9]).unwrap();
        let cert = crate::oracle::certify(&inst).unwrap();
        let star = PrimalDualPoint::new(cert.x.clone(), cert.y.clone());
        let mut config = SolverConfig::new(&inst, Target::Distance { eps: 1e-8 }).unwrap();
        config.trace_level = TraceLevel::Full;
        let (_, trace) = run_rpdhg(&inst, &config, Some(&cert)).unwrap();
        assert!(fixed_point_residual(&inst, &config.steps, &star) <= 1e-12);
        let v = nonexpansiveness_violations(&inst, &config.steps, &trace, &star, 1e-9);
        assert!(v.is_empty(), "{v:?}");
        assert!(sublinear_decay_violations(&inst, &config.steps, &trace, &star, 1e-9).unwrap().is_empty());
        assert!(restart_decrease_violations(&trace, DEFAULT_BETA, 1e-12).is_empty());
    }
}
