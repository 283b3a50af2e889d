//! Tutorship-sequence analytics.
//!
//! The crate turns per-session tutoring logs into learner tutorship sequences
//! and runs the analyses built on them:
//!
//! * [`encoding`] maps a sequence of tutor identities to session offsets
//!   (`-1` for a first-seen tutor, otherwise sessions since the last meeting).
//! * [`distance`] compares encoded sequences with dynamic time warping.
//! * [`clustering`] groups learners with PAM k-medoids and validates the
//!   grouping with silhouette scores.
//! * [`metrics`] computes distributedness, the mean Shannon entropy over all
//!   contiguous subsequences.
//! * [`stats`] provides OLS slopes, Spearman correlation, one-way ANOVA and a
//!   Monte Carlo Tukey HSD.
//! * [`pipeline`] wires everything into a bucketed analysis report, and
//!   [`synth`] generates synthetic logs with planted structure.

pub mod clustering;
pub mod distance;
pub mod encoding;
pub mod error;
pub mod io;
pub mod metrics;
pub mod model;
pub mod pipeline;
pub mod stats;
pub mod synth;

pub use error::{Error, Result};
pub use model::{AnalysisConfig, LearnerRecord, ScoreSeries, SessionRecord, Skill, TutorshipSequence};

/// Version string recorded in reports and manifests.
pub const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");
