use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::format::to_json_line;
use crate::lp::{duality_gap, relative_error, LpInstance, PrimalDualPoint};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TraceLevel {
    /// One record per restart.
    #[default]
    Restarts,
    /// Additionally one record per OnePDHG iteration, with iterates.
    Full,
}

/// State at the end of outer loop `n`, i.e. the new outer iterate `z^{n+1,0}`.
#[derive(Clone, Debug)]
pub struct RestartRecord {
    pub n: usize,
    /// Inner iterations of loop `n`.
    pub k: usize,
    /// Cumulative OnePDHG count after loop `n`.
    pub total: usize,
    /// `ρ(‖z^{n+1,0} − z^{n,0}‖; z^{n+1,0})` in the configured norm.
    pub rho: f64,
    /// `‖z^{n+1,0} − z^{n,0}‖_M̃`.
    pub mtilde_dist_moved: f64,
    pub support_size: usize,
    pub gap: f64,
    pub rel_err: f64,
    pub x: DVector<f64>,
    pub y: DVector<f64>,
}

/// One OnePDHG iterate `z^{n,k}` with its running average.
#[derive(Clone, Debug)]
pub struct InnerRecord {
    pub n: usize,
    pub k: usize,
    pub x: DVector<f64>,
    pub y: DVector<f64>,
    pub x_avg: DVector<f64>,
    pub y_avg: DVector<f64>,
    pub support: Vec<usize>,
    /// Restart-test gap of the average (absent for the first step).
    pub rho: Option<f64>,
    /// Distance of the average from the outer iterate, in the configured norm.
    pub dist_from_outer: f64,
    pub mtilde_dist_from_outer: f64,
    pub gap: f64,
    pub rel_err: f64,
}

#[derive(Clone, Debug)]
pub struct SolveTrace {
    pub level: TraceLevel,
    pub start: PrimalDualPoint,
    pub restarts: Vec<RestartRecord>,
    pub inner: Vec<InnerRecord>,
    pub total_onepdhg: usize,
    /// `(OnePDHG count, support of x)` each time the support of the current
    /// iterate changes, starting with the support of the initial point.
    /// Recorded at every trace level.
    pub support_changes: Vec<(usize, Vec<usize>)>,
}

/// One JSONL line of the exported trace.
#[derive(Serialize)]
struct TraceLine {
    n: usize,
    k: usize,
    rho: Option<f64>,
    mtilde_dist_moved: f64,
    support_size: usize,
    gap: f64,
    rel_err: f64,
}

impl SolveTrace {
    pub(crate) fn new(start: PrimalDualPoint, level: TraceLevel) -> Self {
        let support_changes = vec![(0, super::support(&start.x))];
        Self { level, start, restarts: Vec::new(), inner: Vec::new(), total_onepdhg: 0, support_changes }
    }

    /// Records the support of `x` if it differs from the last recorded one.
    pub(crate) fn note_support(&mut self, total: usize, x: &DVector<f64>) {
        let threshold = 1e-9 * (1.0 + x.amax());
        let last = &self.support_changes.last().expect("initial support is recorded").1;
        let mut expected = last.iter().copied().peekable();
        let same = x.iter().enumerate().filter(|(_, &v)| v > threshold).all(|(i, _)| expected.next() == Some(i))
            && expected.peek().is_none();
        if !same {
            self.support_changes.push((total, super::support(x)));
        }
    }

    #[allow(clippy::too_many_arguments)]
    pub(crate) fn push_inner(
        &mut self,
        inst: &LpInstance,
        n: usize,
        k: usize,
        x: &DVector<f64>,
        y: &DVector<f64>,
        x_avg: &DVector<f64>,
        y_avg: &DVector<f64>,
        rho: Option<f64>,
        dist_from_outer: f64,
        mtilde_dist_from_outer: f64,
    ) {
        self.inner.push(InnerRecord {
            n,
            k,
            x: x.clone(),
            y: y.clone(),
            x_avg: x_avg.clone(),
            y_avg: y_avg.clone(),
            support: super::support(x),
            rho,
            dist_from_outer,
            mtilde_dist_from_outer,
            gap: duality_gap(inst, x, y),
            rel_err: relative_error(inst, x, y),
        });
    }

    /// Outer iterate `z^{n,0}`.
    pub fn outer_iterate(&self, n: usize) -> PrimalDualPoint {
        if n == 0 {
            self.start.clone()
        } else {
            let r = &self.restarts[n - 1];
            PrimalDualPoint::new(r.x.clone(), r.y.clone())
        }
    }

    /// Outer iterates `z^{1,0}, z^{2,0}, …` with the cumulative OnePDHG count
    /// at which each was produced.
    pub fn outer_iterates(&self) -> impl Iterator<Item = (usize, &DVector<f64>, &DVector<f64>)> {
        self.restarts.iter().map(|r| (r.total, &r.x, &r.y))
    }

    /// JSONL export: one line per restart, or per iteration in full mode.
    pub fn to_jsonl(&self) -> Result<String> {
        let mut out = String::new();
        match self.level {
            TraceLevel::Restarts => {
                for r in &self.restarts {
                    out.push_str(&to_json_line(&TraceLine {
                        n: r.n,
                        k: r.k,
                        rho: Some(r.rho),
                        mtilde_dist_moved: r.mtilde_dist_moved,
                        support_size: r.support_size,
                        gap: r.gap,
                        rel_err: r.rel_err,
                    })?);
                    out.push('\n');
                }
            }
            TraceLevel::Full => {
                for rec in &self.inner {
                    out.push_str(&to_json_line(&TraceLine {
                        n: rec.n,
                        k: rec.k,
                        rho: rec.rho,
                        mtilde_dist_moved: rec.mtilde_dist_from_outer,
                        support_size: rec.support.len(),
                        gap: rec.gap,
                        rel_err: rec.rel_err,
                    })?);
                    out.push('\n');
                }
            }
        }
        Ok(out)
    }
}
