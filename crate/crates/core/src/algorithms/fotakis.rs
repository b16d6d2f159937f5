use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use super::potential::{adversarial_subset, potential, potential_argmax, POTENTIAL_TIE};
use super::state::{DemandLocations, LocationTable};
use super::{check_order, OpeningRule, RoundEvent, RoundObserver, RoundRecord, RunRecord, RunTotals, TraceCollector};
use crate::error::AlgorithmError;
use crate::instance::Instance;
use crate::metric::{closer, Point};

/// Relative slack on the opening test `potential >= f`, so that sums such
/// as twelve copies of `1/12` still open.
const OPEN_TOLERANCE: f64 = 1e-9;

/// How to choose among points of maximum potential.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TieBreak {
    /// Smallest descriptor.
    #[default]
    LowestDescriptor,
    /// Prefer the subset point covering exactly the base points seen so
    /// far, padded with the highest-index base points.
    AdversarialSubset,
}

/// How nearest-facility distances of served demands are obtained.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum FotakisMode {
    /// Full scan over open facilities for every served demand, every round.
    #[default]
    Recompute,
    /// Incrementally maintained table. Produces bit-identical runs.
    Cached,
}

/// Runs the potential algorithm on `order`, recomputing potentials from
/// scratch each round.
pub fn run_fotakis(instance: &Instance, order: &[usize], tie_break: TieBreak) -> Result<RunRecord, AlgorithmError> {
    let mut runner = FotakisRunner::new(instance, tie_break, FotakisMode::Recompute);
    let mut trace = TraceCollector::default();
    let totals = runner.run_observed(order, &mut trace)?;
    Ok(RunRecord {
        rule: OpeningRule::FotakisPotential,
        rounds: trace.rounds,
        facilities: runner.table.facilities().to_vec(),
        facility_total: totals.facility_total,
        assignment_total: totals.assignment_total,
        grand_total: totals.total(),
    })
}

pub struct FotakisRunner<'a> {
    instance: &'a Instance,
    tie_break: TieBreak,
    mode: FotakisMode,
    locations: DemandLocations,
    table: LocationTable,
}

impl<'a> FotakisRunner<'a> {
    pub fn new(instance: &'a Instance, tie_break: TieBreak, mode: FotakisMode) -> Self {
        let locations = DemandLocations::new(instance.demands());
        let table = LocationTable::new(locations.locations.clone());
        Self {
            instance,
            tie_break,
            mode,
            locations,
            table,
        }
    }

    pub fn run(&mut self, order: &[usize]) -> Result<RunTotals, AlgorithmError> {
        self.run_observed(order, &mut ())
    }

    pub fn run_observed<O: RoundObserver>(
        &mut self,
        order: &[usize],
        observer: &mut O,
    ) -> Result<RunTotals, AlgorithmError> {
        let demands = self.instance.demands();
        check_order(order, demands.len())?;
        let space = self.instance.space();
        let f = self.instance.facility_cost();
        self.table.reset();
        let mut totals = RunTotals::default();
        let mut served: Vec<usize> = Vec::with_capacity(order.len());
        let mut seen_base = BTreeSet::new();

        for (round, &di) in order.iter().enumerate() {
            let loc = self.locations.location_of[di];
            let v = &demands[di];
            served.push(di);
            if let Point::Base(j) = v {
                seen_base.insert(*j);
            }
            let d_before = self.table.distance(loc);

            let (opened, best_potential) = if self.table.facilities().is_empty() {
                // Every potential is infinite before the first facility.
                (Some(v.clone()), None)
            } else {
                let dists: Vec<f64> = match self.mode {
                    FotakisMode::Recompute => served
                        .iter()
                        .map(|&i| space.nearest_unchecked(self.table.facilities(), &demands[i]).1)
                        .collect(),
                    FotakisMode::Cached => served
                        .iter()
                        .map(|&i| self.table.distance(self.locations.location_of[i]))
                        .collect(),
                };
                let pairs: Vec<(&Point, f64)> = served.iter().map(|&i| &demands[i]).zip(dists).collect();
                let (mut z, mut pz) = potential_argmax(space, &pairs);
                if self.tie_break == TieBreak::AdversarialSubset {
                    if let Some(adv) = adversarial_subset(space, &seen_base) {
                        let pa = potential(space, &adv, &pairs);
                        if pa >= pz - POTENTIAL_TIE {
                            (z, pz) = (adv, pa);
                        }
                    }
                }
                let open = pz >= f * (1.0 - OPEN_TOLERANCE);
                (open.then_some(z), Some(pz))
            };

            let (assignment, assigned_to) = match &opened {
                Some(z) => {
                    let dz = space.dist(z, v);
                    match self.table.nearest_facility(loc) {
                        Some(cur) if !closer((dz, z), (d_before, cur)) => (d_before, cur.clone()),
                        _ => (dz, z.clone()),
                    }
                }
                None => (
                    d_before,
                    self.table.nearest_facility(loc).expect("a facility is open").clone(),
                ),
            };
            let facility_paid = if opened.is_some() { f } else { 0.0 };
            totals.facility_total += facility_paid;
            totals.assignment_total += assignment;
            totals.facilities_opened += usize::from(opened.is_some());

            let record = RoundRecord {
                demand_index: di,
                demand: v.clone(),
                distance: d_before,
                probability: None,
                potential: best_potential,
                opened: opened.clone(),
                facility_cost_paid: facility_paid,
                assignment_cost_paid: assignment,
                assigned_to,
                facilities_after: self.table.facilities().len() + usize::from(opened.is_some()),
            };
            observer.observe(&RoundEvent {
                round,
                demand_index: di,
                location: loc,
                record: &record,
                before: &self.table,
            });
            if let Some(z) = opened {
                self.table.open(space, z);
            }
        }
        Ok(totals)
    }
}
