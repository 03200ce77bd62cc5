//! Instance generators, two-stage detection, and the batch experiments.

mod experiment;
mod stages;

pub use experiment::{
    fit_loglog, fit_unit_slope, records_csv, records_jsonl, run_experiment, run_todd_instance, write_records, ExperimentKind, ExperimentOutput,
    ExperimentParams, ExperimentRecord, LogLogFit, PerturbationRecord, Predictor, Response, CSV_HEADER,
};
pub use stages::{detect_stages, detect_stages_inner, stage_split_from_supports, StageSplit};

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::conditioning::OptimalCertificate;
use crate::error::{Error, Result};
use crate::lp::{validate_instance, LpInstance};
use crate::rng::Stream;

/// Parameters of one random instance with a planted optimal basis `{0, …, m−1}`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ToddSpec {
    pub m: usize,
    pub n: usize,
    pub seed: u64,
    /// Use the least-norm cost `c̄ = ŝ + Aᵀŷ` instead of `c = ŝ`.
    pub use_projected_c: bool,
}

#[derive(Clone, Debug)]
pub struct ToddInstance {
    pub instance: LpInstance,
    pub certificate: OptimalCertificate,
    /// Number of rank-deficient draws that were discarded.
    pub redraws: u32,
}

const MAX_REDRAWS: u32 = 32;

/// Draws `A` with i.i.d. standard normal entries (row by row), then
/// `x̂_Θ` and `ŝ_Θ̄` with i.i.d. half-normal entries, and sets `b = Ax̂`.
///
/// A rank-deficient draw is discarded and redrawn from substream
/// `(seed, attempt)`; the count is reported in [`ToddInstance::redraws`].
pub fn generate_todd(spec: &ToddSpec) -> Result<ToddInstance> {
    let ToddSpec { m, n, seed, use_projected_c } = *spec;
    if m == 0 || m >= n {
        return Err(Error::InvalidParameter(format!("need 1 <= m < n, got m = {m}, n = {n}")));
    }
    let name = format!("todd-{m}x{n}-{seed}");
    for attempt in 0..=MAX_REDRAWS {
        let mut rng = if attempt == 0 { Stream::new(seed) } else { Stream::substream(seed, attempt as u64) };
        let a = DMatrix::from_row_iterator(m, n, (0..m * n).map(|_| rng.normal()));
        let mut x_hat = DVector::zeros(n);
        let mut s_hat = DVector::zeros(n);
        for i in 0..m {
            x_hat[i] = rng.half_normal();
        }
        for j in m..n {
            s_hat[j] = rng.half_normal();
        }
        let b = &a * &x_hat;
        let raw = match validate_instance(name.clone(), a, b, s_hat.clone()) {
            Ok(inst) => inst,
            Err(Error::RankDeficient { .. }) => continue,
            Err(e) => return Err(e),
        };
        let (instance, y_hat) = if use_projected_c {
            let y_hat = -raw.gram_solve(&(raw.a() * &s_hat));
            let c_bar = &s_hat + raw.a().tr_mul(&y_hat);
            (raw.with_rhs_and_cost(raw.b().clone(), c_bar)?, y_hat)
        } else {
            (raw, DVector::zeros(m))
        };
        let certificate = OptimalCertificate::new(&instance, (0..m).collect(), x_hat, y_hat, s_hat)?;
        return Ok(ToddInstance { instance, certificate, redraws: attempt });
    }
    Err(Error::ConvergenceFailure("full-rank random draw"))
}

/// The two hand-built families.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Family {
    /// `A = [1, 1, 1]`, `b = 2`, `c = (2, −1 − γ/2, −1 + γ/2)`.
    Lp1,
    /// `A = [[1, 1, −1], [1, 0, 1]]`, `b = (1 + γ, 1 + 2γ)`, `c = (−0.5, 1, 0.5)`.
    Lp2,
}

impl Family {
    pub fn as_str(&self) -> &'static str {
        match self {
            Family::Lp1 => "LP1",
            Family::Lp2 => "LP2",
        }
    }
}

pub fn generate_family(kind: Family, gamma: f64) -> Result<LpInstance> {
    if !(gamma >= 0.0 && gamma.is_finite()) {
        return Err(Error::InvalidParameter(format!("gamma = {gamma} must be finite and nonnegative")));
    }
    let name = format!("{}-gamma-{gamma}", kind.as_str());
    match kind {
        Family::Lp1 => LpInstance::from_rows(
            name,
            &[vec![1.0, 1.0, 1.0]],
            &[2.0],
            &[2.0, -1.0 - gamma / 2.0, -1.0 + gamma / 2.0],
        ),
        Family::Lp2 => LpInstance::from_rows(
            name,
            &[vec![1.0, 1.0, -1.0], vec![1.0, 0.0, 1.0]],
            &[1.0 + gamma, 1.0 + 2.0 * gamma],
            &[-0.5, 1.0, 0.5],
        ),
    }
}

/// The instance `min (ω₁c)ᵀx s.t. Ax = ω₂b, x ≥ 0` with its certificate
/// `(ω₂x*, ω₁y*, ω₁s*)`.
pub fn reweighted_instance(
    inst: &LpInstance,
    cert: &OptimalCertificate,
    w1: f64,
    w2: f64,
) -> Result<(LpInstance, OptimalCertificate)> {
    if !(w1 > 0.0 && w2 > 0.0 && w1.is_finite() && w2.is_finite()) {
        return Err(Error::NonPositiveWeights);
    }
    let scaled = inst.with_rhs_and_cost(inst.b() * w2, inst.c() * w1)?;
    let cert = OptimalCertificate::new(&scaled, cert.basis.clone(), &cert.x * w2, &cert.y * w1, &cert.s * w1)?;
    Ok((scaled, cert))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lp::relative_error;

    #[test]
    fn todd_construction() {
        for seed in 0..5 {
            let spec = ToddSpec { m: 4, n: 9, seed, use_projected_c: false };
            let t = generate_todd(&spec).unwrap();
            let cert = &t.certificate;
            assert_eq!((t.instance.a() * &cert.x - t.instance.b()).amax(), 0.0);
            assert_eq!(cert.x.dot(&cert.s), 0.0);
            assert_eq!(cert.x.iter().filter(|&&v| v > 0.0).count(), 4);
            assert_eq!(cert.s.iter().filter(|&&v| v > 0.0).count(), 5);
            assert!(cert.nondegenerate);
            assert!(relative_error(&t.instance, &cert.x, &cert.y) <= 1e-8);
        }
    }

    #[test]
    fn todd_is_deterministic() {
        let spec = ToddSpec { m: 5, n: 10, seed: 42, use_projected_c: true };
        let a = generate_todd(&spec).unwrap();
        let b = generate_todd(&spec).unwrap();
        assert_eq!(a.instance.a(), b.instance.a());
        assert_eq!(a.instance.c(), b.instance.c());
        assert_eq!(a.certificate.y, b.certificate.y);
    }

    #[test]
    fn projected_cost_is_least_norm() {
        let spec = ToddSpec { m: 3, n: 7, seed: 9, use_projected_c: true };
        let t = generate_todd(&spec).unwrap();
        let inst = &t.instance;
        let cert = &t.certificate;
        assert!((inst.a() * inst.c()).amax() <= 1e-10 * (1.0 + inst.c().amax()));
        let mut rng = Stream::new(1);
        for _ in 0..100 {
            let y = DVector::from_iterator(3, (0..3).map(|_| rng.normal()));
            assert!(inst.c().norm() <= (&cert.s + inst.a().tr_mul(&y)).norm() + 1e-12);
        }
        assert!(relative_error(inst, &cert.x, &cert.y) <= 1e-8);
    }

    #[test]
    fn planted_basis_is_the_unique_optimum() {
        let spec = ToddSpec { m: 8, n: 16, seed: 2024, use_projected_c: true };
        let t = generate_todd(&spec).unwrap();
        let cert = crate::oracle::certify(&t.instance).unwrap();
        assert_eq!(cert.basis, (0..8).collect::<Vec<_>>());
    }

    #[test]
    fn rejects_bad_shapes() {
        assert!(generate_todd(&ToddSpec { m: 3, n: 3, seed: 0, use_projected_c: false }).is_err());
        assert!(generate_todd(&ToddSpec { m: 0, n: 3, seed: 0, use_projected_c: false }).is_err());
    }

    #[test]
    fn families() {
        let lp1 = generate_family(Family::Lp1, 0.0).unwrap();
        assert_eq!(lp1.c().as_slice(), &[2.0, -1.0, -1.0]);
        let lp2 = generate_family(Family::Lp2, 0.1).unwrap();
        assert!((lp2.b()[0] - 1.1).abs() < 1e-15 && (lp2.b()[1] - 1.2).abs() < 1e-15);
        let cert = crate::oracle::certify(&generate_family(Family::Lp1, 0.01).unwrap()).unwrap();
        assert_eq!(cert.x.as_slice(), &[0.0, 2.0, 0.0]);
        assert!(generate_family(Family::Lp1, -1.0).is_err());
    }

    #[test]
    fn reweighting_scales_the_certificate() {
        let inst = generate_family(Family::Lp1, 0.01).unwrap();
        let cert = crate::oracle::certify(&inst).unwrap();
        let (scaled, sc) = reweighted_instance(&inst, &cert, 2.0, 0.5).unwrap();
        assert_eq!(sc.x[1], 1.0);
        assert_eq!(scaled.c()[0], 4.0);
        assert!(matches!(reweighted_instance(&inst, &cert, 0.0, 1.0), Err(Error::NonPositiveWeights)));
    }
}
