//! Exact auditing and learning for multi-accuracy, multi-calibration and
//! their decision-level consequences over explicit finite populations.
//!
//! Modules:
//! - [`domain`], [`simplex`], [`loss`], [`rng`]: shared value types.
//! - [`metrics`]: enumeration-based auditors returning signed gap tables.
//! - [`rules`]: decision rules, affineness and Lipschitz probes.
//! - [`learn`]: audit-and-update learners and omniprediction.
//! - [`hardness`]: keyed subsets and conflict experiments.
//! - [`report`]: canonical JSON and CSV emission.

pub mod dec;
pub mod domain;
pub mod error;
pub mod hardness;
pub mod learn;
pub mod loss;
pub mod metrics;
pub mod report;
pub mod rng;
pub mod rules;
pub mod simplex;

pub use domain::{discretize, Assignment, Discretization, Group, GroupCollection, Nature, Population, Predictor, TypeSpace, VectorTable};
pub use error::{Error, Result};
pub use loss::{LossFunction, NontrivialityCertificate};
pub use metrics::{ActionFunction, AuditReport, MaMode};
pub use rng::RandomStream;
pub use rules::DecisionRule;
pub use simplex::{sample_type, simplex_project, unit_vector, StochasticVector};
