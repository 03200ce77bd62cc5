//! Restarted primal-dual hybrid gradient for standard-form linear programs,
//! together with the closed-form condition numbers that govern its
//! iteration counts and brute-force oracles that check them.
//!
//! ```
//! use rpdhg::lp::LpInstance;
//! use rpdhg::solver::{run_rpdhg, SolverConfig, Target};
//!
//! let inst = LpInstance::from_rows("t0", &[vec![1.0, 1.0]], &[1.0], &[0.0, 1.0])?;
//! let config = SolverConfig::new(&inst, Target::RelativeError { eps: 1e-8 })?;
//! let (result, _trace) = run_rpdhg(&inst, &config, None)?;
//! assert!((result.x[0] - 1.0).abs() < 1e-6);
//! # Ok::<(), rpdhg::Error>(())
//! ```

pub mod conditioning;
pub mod error;
pub mod format;
pub mod harness;
pub mod lp;
pub mod oracle;
pub mod rng;
pub mod solver;
pub mod spectral;

pub use conditioning::{ConditionReport, OptimalCertificate};
pub use error::{Error, Result};
pub use lp::{LpInstance, PrimalDualPoint};
pub use solver::{run_rpdhg, SolveResult, SolveTrace, SolverConfig, Target};

#[cfg(doctest)]
#[doc = include_str!("../../../README.md")]
mod readme {}

#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/instances.md")]
    mod instances {}
    #[doc = include_str!("../../../book/src/solver.md")]
    mod solver {}
    #[doc = include_str!("../../../book/src/conditioning.md")]
    mod conditioning {}
    #[doc = include_str!("../../../book/src/oracles.md")]
    mod oracles {}
    #[doc = include_str!("../../../book/src/experiments.md")]
    mod experiments {}
    #[doc = include_str!("../../../book/src/cli.md")]
    mod cli {}
}
