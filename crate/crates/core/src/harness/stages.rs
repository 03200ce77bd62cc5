use serde::Serialize;

use crate::conditioning::OptimalCertificate;
use crate::error::{Error, Result};
use crate::solver::SolveTrace;

/// Split of a run into basis identification and local convergence.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct StageSplit {
    pub stage1_iters: usize,
    pub stage2_iters: usize,
    /// `(OnePDHG count, support)` of every inspected iterate.
    pub support_history: Vec<(usize, Vec<usize>)>,
}

/// Splits at the earliest entry of `history` after which every support
/// equals `theta`. `history` holds `(cumulative OnePDHG count, support)`
/// pairs in run order; `total` is the final count.
pub fn stage_split_from_supports(history: Vec<(usize, Vec<usize>)>, theta: &[usize], total: usize) -> Result<StageSplit> {
    let mut sorted_theta = theta.to_vec();
    sorted_theta.sort_unstable();
    let stable_from = history.iter().rposition(|(_, s)| *s != sorted_theta).map_or(0, |i| i + 1);
    if stable_from == history.len() {
        return Err(Error::NeverStabilized { stage1: total, stage2: 0 });
    }
    let stage1 = history[stable_from].0;
    Ok(StageSplit { stage1_iters: stage1, stage2_iters: total - stage1, support_history: history })
}

/// Stage split on the outer iterates `z^{n,0}`, `n ≥ 1`: Stage I ends at
/// the restart producing the first outer iterate from which on the support
/// of `x` equals the optimal basis.
pub fn detect_stages(trace: &SolveTrace, cert: &OptimalCertificate) -> Result<StageSplit> {
    let history = trace.restarts.iter().map(|r| (r.total, crate::solver::support(&r.x))).collect();
    stage_split_from_supports(history, &cert.basis, trace.total_onepdhg)
}

/// Stage split on every iterate `x^{n,k}`: Stage I ends at the last change
/// of support.
pub fn detect_stages_inner(trace: &SolveTrace, cert: &OptimalCertificate) -> Result<StageSplit> {
    stage_split_from_supports(trace.support_changes.clone(), &cert.basis, trace.total_onepdhg)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn boundary_after_first_unstable_loop() {
        let history = vec![(10, vec![1, 2]), (20, vec![1]), (30, vec![1]), (40, vec![1])];
        let split = stage_split_from_supports(history, &[1], 40).unwrap();
        assert_eq!((split.stage1_iters, split.stage2_iters), (20, 20));
    }

    #[test]
    fn stable_from_the_start() {
        let history = vec![(7, vec![0]), (15, vec![0])];
        let split = stage_split_from_supports(history, &[0], 15).unwrap();
        assert_eq!((split.stage1_iters, split.stage2_iters), (7, 8));
    }

    #[test]
    fn unstable_at_the_end() {
        let history = vec![(7, vec![0]), (15, vec![0, 1])];
        assert!(matches!(
            stage_split_from_supports(history, &[0], 15),
            Err(Error::NeverStabilized { stage1: 15, stage2: 0 })
        ));
        assert!(stage_split_from_supports(Vec::new(), &[0], 0).is_err());
    }
}
