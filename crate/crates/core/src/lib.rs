//! Generator and experiment harness for sequential transfer optimization
//! problems (STOPs) whose source-target similarity distribution is set
//! explicitly.
//!
//! The crate is organized around the pipeline:
//!
//! - [`families`]: eight shiftable benchmark functions in a normalized space.
//! - [`similarity`]: similarity distributions, inverse-transform sampling,
//!   Chebyshev similarity and the histogram estimator.
//! - [`generator`]: problem construction, the benchmark suite and knowledge
//!   bases.
//! - [`ea`]: the SBX / polynomial-mutation / truncation-selection backbone.
//! - [`transfer`]: no-transfer, random and seven similarity-based source
//!   selection algorithms.
//! - [`stats`]: Wilcoxon rank-sum testing, ranking groups and rank
//!   correlations.
//! - [`toy`]: the two-station interval-coverage family.
//! - [`cli`]: the `stopgen` command line.
//!
//! Runnable walkthroughs live in `examples/`.

pub mod cli;
pub mod ea;
pub mod error;
pub mod families;
pub mod generator;
pub mod seed;
pub mod similarity;
pub mod stats;
pub mod toy;
pub mod transfer;

pub use error::{Error, Result};
pub use families::{EvalBudget, FamilyId, TaskInstance};
pub use generator::{KnowledgeBase, StopProblem, TransferScenario};
pub use similarity::SimilaritySpec;
