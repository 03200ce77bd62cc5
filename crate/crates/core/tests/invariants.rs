//! Property tests for scaling laws and structural invariants.

use nalgebra::DVector;
use proptest::prelude::*;

use rpdhg::conditioning::{phi, zetas};
use rpdhg::harness::{detect_stages, detect_stages_inner, generate_todd, reweighted_instance, ToddSpec};
use rpdhg::lp::{relative_error, LpInstance, PrimalDualPoint};
use rpdhg::solver::{normalized_duality_gap, run_rpdhg, NormMode, SolverConfig, Target};
use rpdhg::spectral::{extreme_singular_values, StepSizes};

fn todd(m: usize, n: usize, seed: u64) -> rpdhg::harness::ToddInstance {
    generate_todd(&ToddSpec { m, n, seed, use_projected_c: true }).unwrap()
}

fn close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * a.abs().max(b.abs()).max(1e-300)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn zetas_scale_with_the_weights(seed in any::<u64>(), m in 2usize..6, w1 in 1e-3f64..1e3, w2 in 1e-3f64..1e3) {
        let t = todd(m, 2 * m, seed);
        let (zp, zd) = zetas(&t.instance, &t.certificate).unwrap();
        let (scaled, cert) = reweighted_instance(&t.instance, &t.certificate, w1, w2).unwrap();
        let (szp, szd) = zetas(&scaled, &cert).unwrap();
        prop_assert!(close(szp, w1 * zp, 1e-9), "zeta_p {szp} vs {}", w1 * zp);
        prop_assert!(close(szd, w2 * zd, 1e-9), "zeta_d {szd} vs {}", w2 * zd);
    }

    #[test]
    fn phi_is_invariant_under_uniform_weights(seed in any::<u64>(), m in 2usize..6, w in 1e-3f64..1e3) {
        let t = todd(m, 2 * m, seed);
        let base = phi(&t.instance, &t.certificate).unwrap();
        let (scaled, cert) = reweighted_instance(&t.instance, &t.certificate, w, w).unwrap();
        prop_assert!(close(phi(&scaled, &cert).unwrap(), base, 1e-9));
    }

    #[test]
    fn phi_matches_the_closed_form(seed in any::<u64>(), m in 2usize..7) {
        let t = todd(m, 2 * m + 1, seed);
        let (zp, zd) = zetas(&t.instance, &t.certificate).unwrap();
        let closed = (t.certificate.x_l1() + t.certificate.s_l1()) / zp.min(zd);
        prop_assert!(close(phi(&t.instance, &t.certificate).unwrap(), closed, 1e-9));
    }

    #[test]
    fn certificates_solve_the_instance(seed in any::<u64>(), m in 2usize..8) {
        let t = todd(m, 2 * m, seed);
        let c = &t.certificate;
        prop_assert!(relative_error(&t.instance, &c.x, &c.y) < 1e-10);
        prop_assert!(c.x.iter().chain(c.s.iter()).all(|v| *v >= 0.0));
    }

    #[test]
    fn normalized_gap_is_nonincreasing_in_the_radius(
        seed in any::<u64>(),
        r in 0.05f64..2.0,
        growth in 1.1f64..4.0,
        mtilde in any::<bool>(),
    ) {
        let t = todd(3, 6, seed);
        let inst: &LpInstance = &t.instance;
        let a_norm = extreme_singular_values(inst.a()).unwrap().lambda_max;
        let steps = StepSizes::validated(0.5 / a_norm, 0.5 / a_norm, a_norm).unwrap();
        let x = DVector::from_fn(inst.n(), |i, _| ((i as u64 ^ seed) % 3) as f64 * 0.5);
        let y = DVector::from_fn(inst.m(), |i, _| (i as f64) - 1.0);
        let z = PrimalDualPoint::new(x, y);
        let mode = if mtilde { NormMode::MTilde } else { NormMode::M };
        let near = normalized_duality_gap(inst, &z, r, &steps, mode).unwrap();
        let far = normalized_duality_gap(inst, &z, r * growth, &steps, mode).unwrap();
        prop_assert!(far <= near * (1.0 + 1e-6) + 1e-9, "rho({}) = {far} > rho({r}) = {near}", r * growth);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(8))]

    #[test]
    fn stages_partition_the_iteration_count(seed in any::<u64>(), m in 3usize..6) {
        let t = todd(m, 2 * m, seed);
        let mut config = SolverConfig::new(&t.instance, Target::RelativeError { eps: 1e-6 }).unwrap();
        config.check_every_iterate = true;
        let (result, trace) = run_rpdhg(&t.instance, &config, Some(&t.certificate)).unwrap();
        prop_assert_eq!(trace.total_onepdhg, result.onepdhg);
        for split in [detect_stages(&trace, &t.certificate), detect_stages_inner(&trace, &t.certificate)] {
            let (stage1, stage2) = match split {
                Ok(s) => (s.stage1_iters, s.stage2_iters),
                Err(rpdhg::Error::NeverStabilized { stage1, stage2 }) => (stage1, stage2),
                Err(e) => return Err(TestCaseError::fail(e.to_string())),
            };
            prop_assert_eq!(stage1 + stage2, result.onepdhg);
        }
    }
}
