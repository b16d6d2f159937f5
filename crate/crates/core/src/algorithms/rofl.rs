use rand::Rng;

use super::state::{DemandLocations, LocationTable};
use super::{check_order, OpeningRule, RoundEvent, RoundObserver, RoundRecord, RunRecord, RunTotals, TraceCollector};
use crate::error::AlgorithmError;
use crate::instance::Instance;

/// Runs the randomized opening rule on `order` and returns the full trace.
pub fn run_rofl<R: Rng + ?Sized>(
    instance: &Instance,
    order: &[usize],
    rule: OpeningRule,
    rng: &mut R,
) -> Result<RunRecord, AlgorithmError> {
    let mut runner = RoflRunner::new(instance, rule)?;
    let mut trace = TraceCollector::default();
    let totals = runner.run_observed(order, rng, &mut trace)?;
    Ok(RunRecord {
        rule,
        rounds: trace.rounds,
        facilities: runner.table.facilities().to_vec(),
        facility_total: totals.facility_total,
        assignment_total: totals.assignment_total,
        grand_total: totals.total(),
    })
}

/// Reusable runner for many trials on one instance.
pub struct RoflRunner<'a> {
    instance: &'a Instance,
    rule: OpeningRule,
    locations: DemandLocations,
    table: LocationTable,
}

impl<'a> RoflRunner<'a> {
    pub fn new(instance: &'a Instance, rule: OpeningRule) -> Result<Self, AlgorithmError> {
        if rule == OpeningRule::FotakisPotential {
            return Err(AlgorithmError::WrongRule("fotakis_potential"));
        }
        rule.validate()?;
        let locations = DemandLocations::new(instance.demands());
        let table = LocationTable::new(locations.locations.clone());
        Ok(Self {
            instance,
            rule,
            locations,
            table,
        })
    }

    pub fn instance(&self) -> &Instance {
        self.instance
    }

    pub fn location_of(&self, demand: usize) -> usize {
        self.locations.location_of[demand]
    }

    pub fn run<R: Rng + ?Sized>(&mut self, order: &[usize], rng: &mut R) -> Result<RunTotals, AlgorithmError> {
        self.run_observed(order, rng, &mut ())
    }

    /// Executes one online pass. Exactly one uniform draw is consumed per
    /// round, whatever the opening probability.
    pub fn run_observed<R: Rng + ?Sized, O: RoundObserver>(
        &mut self,
        order: &[usize],
        rng: &mut R,
        observer: &mut O,
    ) -> Result<RunTotals, AlgorithmError> {
        let demands = self.instance.demands();
        check_order(order, demands.len())?;
        let space = self.instance.space();
        let f = self.instance.facility_cost();
        self.table.reset();
        let mut totals = RunTotals::default();

        for (round, &di) in order.iter().enumerate() {
            let loc = self.locations.location_of[di];
            let d = self.table.distance(loc);
            let p = self.rule.probability(d, f);
            let heads = rng.gen::<f64>() < p;
            let v = &demands[di];

            let (facility_paid, assignment, assigned_to) = if heads {
                (f, 0.0, v.clone())
            } else {
                let to = self
                    .table
                    .nearest_facility(loc)
                    .expect("a facility is open after round 0")
                    .clone();
                (0.0, d, to)
            };
            totals.facility_total += facility_paid;
            totals.assignment_total += assignment;
            totals.facilities_opened += usize::from(heads);

            let record = RoundRecord {
                demand_index: di,
                demand: v.clone(),
                distance: d,
                probability: Some(p),
                potential: None,
                opened: heads.then(|| v.clone()),
                facility_cost_paid: facility_paid,
                assignment_cost_paid: assignment,
                assigned_to,
                facilities_after: self.table.facilities().len() + usize::from(heads),
            };
            observer.observe(&RoundEvent {
                round,
                demand_index: di,
                location: loc,
                record: &record,
                before: &self.table,
            });
            if heads {
                self.table.open(space, v.clone());
            }
        }
        Ok(totals)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::instance::{gen_clique, gen_star};
    use crate::metric::{FacilitySet, MetricSpace, Point};
    use crate::rng::seeded;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn star_rounds() {
        let inst = gen_star(4).unwrap();
        for seed in 0..20 {
            let rec = run_rofl(&inst, &[2, 0, 3, 1], OpeningRule::MEYERSON, &mut seeded(seed)).unwrap();
            let first = &rec.rounds[0];
            assert_eq!(first.distance, f64::INFINITY);
            assert_eq!(first.probability, Some(1.0));
            assert_eq!(first.opened, Some(Point::Base(2)));
            assert_eq!(first.facility_cost_paid, 1.0);
            for r in &rec.rounds[1..] {
                assert_eq!(r.distance, 0.25);
                assert_eq!(r.probability, Some(0.25));
            }
        }
    }

    #[test]
    fn co_located_demand_never_opens() {
        let inst = gen_clique(0.5, 2).unwrap();
        for seed in 0..50 {
            let rec = run_rofl(&inst, &[0, 1, 2, 3], OpeningRule::MEYERSON, &mut seeded(seed)).unwrap();
            let r = &rec.rounds[1];
            assert_eq!((r.distance, r.probability, r.opened.is_none()), (0.0, Some(0.0), true));
            assert_eq!(r.assignment_cost_paid, 0.0);
        }
    }

    #[test]
    fn rejects_bad_inputs() {
        let inst = gen_star(4).unwrap();
        assert!(matches!(
            run_rofl(&inst, &[0, 9], OpeningRule::MEYERSON, &mut seeded(0)),
            Err(AlgorithmError::BadOrder { index: 9, count: 4 })
        ));
        assert!(matches!(
            run_rofl(&inst, &[0], OpeningRule::FotakisPotential, &mut seeded(0)),
            Err(AlgorithmError::WrongRule(_))
        ));
    }

    #[test]
    fn same_seed_same_record() {
        let inst = gen_clique(0.3, 5).unwrap();
        let order: Vec<usize> = (0..25).rev().collect();
        let a = run_rofl(&inst, &order, OpeningRule::clamped(0.5), &mut seeded(11)).unwrap();
        let b = run_rofl(&inst, &order, OpeningRule::clamped(0.5), &mut seeded(11)).unwrap();
        assert_eq!(a, b);
    }

    /// Straightforward transcription of the online loop with a full nearest
    /// scan each round; used to cross-check the incremental runner.
    fn naive_run(inst: &Instance, order: &[usize], rule: OpeningRule, rng: &mut ChaCha8Rng) -> (f64, Vec<f64>) {
        let space = inst.space();
        let mut fs = FacilitySet::new();
        let mut total = 0.0;
        let mut ds = Vec::new();
        for &i in order {
            let v = &inst.demands()[i];
            let (_, d) = space.nearest(&fs, v).unwrap();
            ds.push(d);
            let p = rule.probability(d, inst.facility_cost());
            if rng.gen::<f64>() < p {
                fs.insert(v.clone());
                total += inst.facility_cost();
            } else {
                total += d;
            }
        }
        (total, ds)
    }

    fn random_instance() -> impl Strategy<Value = (Instance, Vec<usize>, u64, f64)> {
        (2usize..8, 1usize..14, any::<u64>(), 0.1f64..=1.0, 0.2f64..3.0).prop_flat_map(|(n, nd, seed, q, f)| {
            let pts = proptest::collection::vec(proptest::collection::vec(0.0f64..2.0, 2), n);
            let dem = proptest::collection::vec(0..n, nd);
            (pts, dem, Just(seed), Just(q), Just(f)).prop_map(move |(pts, dem, seed, q, f)| {
                let inst = Instance::new(
                    MetricSpace::Euclidean { points: pts },
                    dem.iter().map(|&i| Point::Base(i)).collect(),
                    f,
                )
                .unwrap();
                let order: Vec<usize> = (0..dem.len()).collect();
                (inst, order, seed, q)
            })
        })
    }

    proptest! {
        #[test]
        fn matches_naive_loop((inst, order, seed, q) in random_instance()) {
            let rule = OpeningRule::clamped(q);
            let rec = run_rofl(&inst, &order, rule, &mut ChaCha8Rng::seed_from_u64(seed)).unwrap();
            let (total, ds) = naive_run(&inst, &order, rule, &mut ChaCha8Rng::seed_from_u64(seed));
            prop_assert!((rec.grand_total - total).abs() < 1e-9);
            let rec_ds: Vec<f64> = rec.rounds.iter().map(|r| r.distance).collect();
            prop_assert_eq!(rec_ds, ds);
        }

        #[test]
        fn record_invariants((inst, order, seed, q) in random_instance()) {
            let rec = run_rofl(&inst, &order, OpeningRule::piecewise(q), &mut ChaCha8Rng::seed_from_u64(seed)).unwrap();
            let f = inst.facility_cost();
            prop_assert!(rec.rounds[0].opened.is_some());
            let mut fac = 0.0;
            let mut asg = 0.0;
            for r in &rec.rounds {
                prop_assert!(r.assignment_cost_paid <= r.distance);
                if r.opened.is_some() {
                    prop_assert_eq!(r.assignment_cost_paid, 0.0);
                    prop_assert_eq!(r.facility_cost_paid, f);
                }
                fac += r.facility_cost_paid;
                asg += r.assignment_cost_paid;
            }
            prop_assert!((rec.facility_total - rec.facilities.len() as f64 * f).abs() < 1e-9);
            prop_assert!((rec.facility_total - fac).abs() < 1e-9);
            prop_assert!((rec.assignment_total - asg).abs() < 1e-9);
            prop_assert!((rec.grand_total - rec.facility_total - rec.assignment_total).abs() < 1e-12);
        }
    }
}
