//! Online algorithms for facility location with uniform opening cost.
//!
//! * [`run_rofl`]: the randomized family that opens a facility at each
//!   arriving demand with probability `g(d)`, where `d` is the distance to
//!   the nearest open facility. With `g(d) = min(d/f, 1)` this is
//!   Meyerson's algorithm.
//! * [`run_fotakis`]: the deterministic potential-based algorithm.

mod fotakis;
mod potential;
mod rofl;
mod state;

use std::fmt;

use serde::{Deserialize, Serialize, Serializer};

use crate::error::AlgorithmError;
use crate::metric::Point;

pub use fotakis::{run_fotakis, FotakisMode, FotakisRunner, TieBreak};
pub use potential::{adversarial_subset, potential, potential_argmax, subset_potential_argmax, POTENTIAL_TIE};
pub use rofl::{run_rofl, RoflRunner};
pub use state::LocationTable;

/// How an online algorithm decides to open facilities.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum OpeningRule {
    /// `g(d) = min(q d / f, 1)`; `q = 1` is Meyerson's algorithm.
    ClampedLinear { q: f64 },
    /// `g(d) = q d / f` when `d <= f`, else 1.
    PiecewiseLinear { q: f64 },
    /// Deterministic potential rule.
    FotakisPotential,
}

impl OpeningRule {
    pub const MEYERSON: OpeningRule = OpeningRule::ClampedLinear { q: 1.0 };

    pub fn clamped(q: f64) -> Self {
        OpeningRule::ClampedLinear { q }
    }

    pub fn piecewise(q: f64) -> Self {
        OpeningRule::PiecewiseLinear { q }
    }

    pub fn q(&self) -> Option<f64> {
        match self {
            OpeningRule::ClampedLinear { q } | OpeningRule::PiecewiseLinear { q } => Some(*q),
            OpeningRule::FotakisPotential => None,
        }
    }

    pub fn kind_name(&self) -> &'static str {
        match self {
            OpeningRule::ClampedLinear { .. } => "clamped_linear",
            OpeningRule::PiecewiseLinear { .. } => "piecewise_linear",
            OpeningRule::FotakisPotential => "fotakis_potential",
        }
    }

    pub fn validate(&self) -> Result<(), AlgorithmError> {
        match self.q() {
            Some(q) if !(q > 0.0 && q <= 1.0) => Err(AlgorithmError::BadRule(format!("q must lie in (0, 1], got {q}"))),
            _ => Ok(()),
        }
    }

    /// Opening probability at distance `d` (possibly infinite) with facility
    /// cost `f`. Always 0 for the potential rule.
    pub fn probability(&self, d: f64, f: f64) -> f64 {
        let x = d / f;
        match *self {
            OpeningRule::ClampedLinear { q } => (q * x).min(1.0),
            OpeningRule::PiecewiseLinear { q } => {
                if x <= 1.0 {
                    q * x
                } else {
                    1.0
                }
            }
            OpeningRule::FotakisPotential => 0.0,
        }
    }
}

impl fmt::Display for OpeningRule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.q() {
            Some(q) => write!(f, "{}(q={q})", self.kind_name()),
            None => f.write_str(self.kind_name()),
        }
    }
}

/// One online round.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RoundRecord {
    pub demand_index: usize,
    pub demand: Point,
    /// Distance to the nearest facility before this round's decision;
    /// `null` in JSON when no facility was open.
    #[serde(serialize_with = "extended_real")]
    pub distance: f64,
    /// Coin probability (randomized rules only).
    #[serde(skip_serializing_if = "Option::is_none")]
    pub probability: Option<f64>,
    /// Largest potential seen this round (potential rule only).
    #[serde(skip_serializing_if = "Option::is_none")]
    pub potential: Option<f64>,
    /// Facility opened this round, if any.
    pub opened: Option<Point>,
    pub facility_cost_paid: f64,
    pub assignment_cost_paid: f64,
    pub assigned_to: Point,
    pub facilities_after: usize,
}

/// Trace of a whole run.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunRecord {
    pub rule: OpeningRule,
    pub rounds: Vec<RoundRecord>,
    pub facilities: Vec<Point>,
    pub facility_total: f64,
    pub assignment_total: f64,
    pub grand_total: f64,
}

/// Cost totals of a run without the per-round trace.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct RunTotals {
    pub facility_total: f64,
    pub assignment_total: f64,
    pub facilities_opened: usize,
}

impl RunTotals {
    pub fn total(&self) -> f64 {
        self.facility_total + self.assignment_total
    }
}

/// Everything known about a round at the moment it is decided. `before`
/// holds nearest-facility distances of every demand location *before* this
/// round's opening.
pub struct RoundEvent<'a> {
    pub round: usize,
    pub demand_index: usize,
    pub location: usize,
    pub record: &'a RoundRecord,
    pub before: &'a LocationTable,
}

/// Receives every round of a run, in order.
pub trait RoundObserver {
    fn observe(&mut self, event: &RoundEvent<'_>);
}

impl RoundObserver for () {
    fn observe(&mut self, _: &RoundEvent<'_>) {}
}

/// Collects the per-round trace.
#[derive(Default)]
pub struct TraceCollector {
    pub rounds: Vec<RoundRecord>,
}

impl RoundObserver for TraceCollector {
    fn observe(&mut self, event: &RoundEvent<'_>) {
        self.rounds.push(event.record.clone());
    }
}

fn extended_real<S: Serializer>(v: &f64, s: S) -> Result<S::Ok, S::Error> {
    if v.is_finite() {
        s.serialize_f64(*v)
    } else {
        s.serialize_none()
    }
}

fn check_order(order: &[usize], count: usize) -> Result<(), AlgorithmError> {
    match order.iter().find(|&&i| i >= count) {
        Some(&index) => Err(AlgorithmError::BadOrder { index, count }),
        None => Ok(()),
    }
}
