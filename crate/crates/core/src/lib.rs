//! Online facility location with uniform facility cost.
//!
//! The crate provides finite metric spaces ([`metric`]), instance families
//! and their JSON format ([`instance`]), the online algorithms
//! ([`algorithms`]), arrival-order models ([`arrival`]), an exact offline
//! optimum ([`offline`]) and a Monte Carlo harness that estimates expected
//! cost and competitive ratio ([`harness`]).

pub mod algorithms;
pub mod arrival;
pub mod error;
pub mod harness;
pub mod instance;
pub mod metric;
pub mod offline;
pub mod rng;

pub use algorithms::{run_fotakis, run_rofl, OpeningRule, RunRecord, TieBreak};
pub use error::{AlgorithmError, ArrivalError, HarnessError, InstanceError, MetricError, OfflineError};
pub use instance::{GeneratorParams, Instance};
pub use metric::{FacilitySet, MetricSpace, Point};
