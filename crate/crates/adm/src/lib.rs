//! Objective common-weights scoring for multi-attribute comparison.
//!
//! Comparing entities on several attributes needs weights, and hand-picked
//! weights invite argument. This crate derives them from the data in two
//! steps:
//!
//! 1. **Frontier scores.** Every entity gets the best score any non-negative
//!    weighting could give it, subject to no entity's weighted output/input
//!    ratio exceeding 1 (the classic CCR efficiency program, solved exactly
//!    per entity by a small dense simplex). These scores are optimistic
//!    upper bounds and use a different weight vector per entity.
//! 2. **One formula for everyone.** A single weight set is then fitted by
//!    least squares so that `(u · outputs) / (v · inputs)` tracks the
//!    frontier scores — either plain least squares (optionally followed by
//!    [`cwfit::rescale`] so no score exceeds its bound) or a one-sided fit
//!    whose predictions never exceed the bounds in the first place. The
//!    one-sided fit provably fits at least as well as rescaling.
//!
//! The result is a transparent scoring formula, comparable scores, and a
//! ranking, produced without any judgement calls about weights.
//!
//! ```
//! use adm::{cwfit, dataset::Dataset, dea, report};
//!
//! let data = Dataset::builtin("hospital14")?;
//! let frontier = dea::ccr_scores(&data)?;
//! let fit = cwfit::fit_constrained(&data, &frontier.scores, &Default::default())?;
//! let ranking = report::rank(&fit.predicted, report::DEFAULT_TIE_TOL)?;
//! assert_eq!(fit.predicted.len(), 14);
//! assert!(fit.feasible);
//! assert_eq!(*ranking.ranks.iter().min().unwrap(), 1);
//! # Ok::<(), Box<dyn std::error::Error>>(())
//! ```
//!
//! Each module stands alone: [`dataset`] parses and validates the CSV
//! dialect, [`linprog`] is the simplex core, [`dea`] computes frontier
//! scores, [`cwfit`] fits and rescales formulas, [`synth`] builds known-truth
//! benchmarks, [`report`] ranks and serializes, and [`cli`] wires it all into
//! the `adm` binary. The `examples/` directory walks through every major
//! capability.

pub mod cli;
pub mod cwfit;
pub mod dataset;
pub mod dea;
pub mod linprog;
pub mod report;
pub mod synth;

pub use cwfit::{FitOptions, FitResult, Formula};
pub use dataset::Dataset;
pub use dea::DeaResult;
