//! Tree ensembles for imbalanced binary classification.
//!
//! The crate provides four model families that share one CART implementation:
//!
//! - [`ssrf`]: a random forest with depth-capped trees whose split candidates
//!   are drawn with importance-weighted probabilities estimated by a pilot
//!   forest. With the importance blend set to zero it is a plain random forest.
//! - [`gbm`]: stagewise gradient boosting with squared or logistic loss.
//! - [`hybrid`]: the GBM-SSRF combiner, either as a convex blend of the two
//!   members or as boosting with small forests as the stage learners.
//! - [`metrics`]: confusion counts, accuracy, precision, recall, F1 and AUC-ROC.
//!
//! [`dataset`] handles CSV ingestion, imputation, z-score normalization,
//! stratified splits and a synthetic transaction generator. [`model_file`]
//! persists fitted models as checksummed JSON and [`cli`] wires everything into
//! the `gbm-ssrf` command.
//!
//! Runnable walkthroughs live in the crate's `examples/` directory:
//!
//! ```text
//! cargo run --release --example synthetic_data
//! cargo run --release --example decision_tree
//! cargo run --release --example random_forest
//! cargo run --release --example gradient_boosting
//! cargo run --release --example hybrid_blend
//! cargo run --release --example embedded_hybrid
//! cargo run --release --example metrics_report
//! cargo run --release --example csv_pipeline
//! cargo run --release --example persistence
//! cargo run --release --example benchmark
//! ```

pub mod cli;
pub mod dataset;
pub mod error;
pub mod gbm;
pub mod hybrid;
pub mod metrics;
pub mod model_file;
pub mod seed;
pub mod ssrf;
pub mod tree;

pub use dataset::{Dataset, PreprocessStats, SplitAssignment};
pub use error::{Error, Result};
pub use gbm::{GbmConfig, GbmModel, Loss};
pub use hybrid::{HybridConfig, HybridMode, HybridModel};
pub use metrics::{ConfusionCounts, MetricsReport};
pub use ssrf::{SsrfConfig, SsrfModel};
pub use tree::{TreeConfig, TreeNode};
