//! ROI-based saliency metrics and group fairness metrics for checking
//! whether a debiasing intervention moved a classifier's attention away from
//! a protected-attribute region.
//!
//! The crate bundles everything needed to run that check end to end at desk
//! scale: a small classifier with Integrated Gradients and epsilon-LRP
//! attributions ([`nn`], [`attribution`]), two debiasing baselines
//! ([`debias`]), a synthetic dataset generator with controllable
//! attribute-target correlation ([`data`]), file formats ([`io`]) and an
//! experiment runner ([`experiment`]).
//!
//! Runnable examples, one per capability:
//!
//! ```bash
//! cargo run --example saliency_metrics        # RRF, ADR, DIF on two maps
//! cargo run --example rddt_test               # paired t-test over a batch
//! cargo run --example fairness                # group rates, EO, Yule's phi
//! cargo run --example attribution             # IG and epsilon-LRP
//! cargo run --example synthetic_data          # generator, rebalance, splits
//! cargo run --example file_formats            # maps, ROI files, tables, checkpoints
//! cargo run --release --example threshold_optimization
//! cargo run --release --example cav_projection
//! cargo run --release --example experiment    # small end-to-end run
//! ```

pub mod attribution;
pub mod data;
pub mod debias;
pub mod error;
pub mod experiment;
pub mod fairness;
pub mod io;
pub mod metrics;
pub mod nn;
pub mod stats;
pub mod types;

pub use error::{Error, Result};
pub use types::{validate_roi, MetricName, MetricReport, MetricValue, RelevanceMap, Roi, SampleRow, SampleTable};
