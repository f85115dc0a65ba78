//! Geographic differential privacy for mobile crowd coverage.
//!
//! This crate synthesizes location-obfuscation policies that satisfy
//! geographic epsilon-differential privacy while maximizing the expected
//! future coverage of a set of target locations by selected users. It
//! also ships the surrounding experiment pipeline: mobility profiling on
//! traces, group-wise prior estimation from obfuscated uploads, user
//! selection, baselines and coverage evaluation on synthetic worlds.
//!
//! Modules:
//! - [`location`]: the discrete location universe and its metric.
//! - [`mobility`]: traces, frequency/Poisson profiling, ROC scoring.
//! - [`privacy`]: policies, privacy verification, posteriors, bounds.
//! - [`lp`]: a dense two-phase simplex solver.
//! - [`synthesis`]: the coverage-maximizing policy LP and the Binomial
//!   report-rate rule.
//! - [`selection`]: group-wise estimation and biased user selection.
//! - [`harness`]: synthetic worlds, baselines, experiment reports.

pub mod error;
pub mod harness;
pub mod location;
pub mod lp;
pub mod mobility;
pub mod privacy;
pub mod selection;
pub mod synthesis;

pub use error::{Error, Result};
pub use location::{LocationId, LocationSet, TargetSet};
pub use mobility::{MobilityProfile, Period, TraceEvent, TraceSet};
pub use privacy::{DpReport, ObfuscationPolicy, PriorDistribution};
pub use selection::{SelectionParams, SelectionResult};
pub use synthesis::{SynthesisConfig, SynthesisResult};
