//! Exact offline optimum by pruned subset search, a greedy upper bound, and
//! cluster extraction.

use std::collections::BTreeMap;

use serde::Serialize;

use crate::error::OfflineError;
use crate::instance::{Cluster, Instance};
use crate::metric::{FacilitySet, MetricSpace, Point};

/// Default cap on the number of facility sets the exact search may visit.
pub const DEFAULT_BUDGET: u64 = (1 << 24) - 1;

/// Costs closer than this are ties, decided by the facility descriptors.
const COST_TIE: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OfflineSolution {
    pub total: f64,
    pub facility_total: f64,
    pub assignment_total: f64,
    pub facilities: Vec<Point>,
    /// Facility serving each demand, by demand index.
    pub assignment: Vec<Point>,
    pub clusters: Vec<Cluster>,
}

/// Cost of opening `facilities` and sending each demand to its nearest one
/// (ties to the lowest descriptor).
pub fn evaluate(instance: &Instance, facilities: &FacilitySet) -> Result<OfflineSolution, OfflineError> {
    facilities.check(instance.space())?;
    let space = instance.space();
    let mut assignment = Vec::with_capacity(instance.demands().len());
    let mut assignment_total = 0.0;
    for v in instance.demands() {
        let (to, d) = space.nearest_unchecked(facilities.as_slice(), v);
        assignment.push(to.ok_or(OfflineError::NoCandidates)?.clone());
        assignment_total += d;
    }
    let facility_total = facilities.len() as f64 * instance.facility_cost();
    let mut sol = OfflineSolution {
        total: facility_total + assignment_total,
        facility_total,
        assignment_total,
        facilities: facilities.as_slice().to_vec(),
        assignment,
        clusters: Vec::new(),
    };
    sol.clusters = clusters_of(&sol);
    Ok(sol)
}

/// Partition of the demands by serving facility, in facility order.
/// Facilities serving no demand yield no cluster.
pub fn clusters_of(solution: &OfflineSolution) -> Vec<Cluster> {
    let mut groups: BTreeMap<&Point, Vec<usize>> = BTreeMap::new();
    for (i, f) in solution.assignment.iter().enumerate() {
        groups.entry(f).or_default().push(i);
    }
    groups
        .into_iter()
        .map(|(center, demand_indices)| Cluster {
            center: center.clone(),
            demand_indices,
        })
        .collect()
}

fn empty_solution() -> OfflineSolution {
    OfflineSolution {
        total: 0.0,
        facility_total: 0.0,
        assignment_total: 0.0,
        facilities: Vec::new(),
        assignment: Vec::new(),
        clusters: Vec::new(),
    }
}

/// Distinct demand locations with multiplicities, in descriptor order.
fn demand_locations(instance: &Instance) -> Vec<(Point, f64)> {
    let mut counts: BTreeMap<&Point, usize> = BTreeMap::new();
    for v in instance.demands() {
        *counts.entry(v).or_default() += 1;
    }
    counts.into_iter().map(|(p, c)| (p.clone(), c as f64)).collect()
}

fn prepare_candidates(space: &MetricSpace, candidates: &[Point]) -> Result<Vec<Point>, OfflineError> {
    for c in candidates {
        space.check(c)?;
    }
    let mut c = candidates.to_vec();
    c.sort();
    c.dedup();
    if c.is_empty() {
        return Err(OfflineError::NoCandidates);
    }
    Ok(c)
}

/// Number of non-empty subsets of `n` candidates with at most `max_size`
/// members.
fn subset_count(n: usize, max_size: usize) -> u128 {
    let mut total: u128 = 0;
    let mut binom: u128 = 1;
    for s in 1..=max_size.min(n) {
        binom = binom * (n - s + 1) as u128 / s as u128;
        total = total.saturating_add(binom);
    }
    total
}

/// Minimum-cost facility set drawn from `candidates`. Among solutions whose
/// costs agree within `1e-9`, the lexicographically smallest sorted
/// facility list wins.
///
/// An optimal set never needs more facilities than there are distinct
/// demand locations, so only subsets up to that size count against
/// `budget`; if they exceed it the search is refused.
pub fn solve_exact(instance: &Instance, candidates: &[Point], budget: u64) -> Result<OfflineSolution, OfflineError> {
    let space = instance.space();
    let cands = prepare_candidates(space, candidates)?;
    let locs = demand_locations(instance);
    if locs.is_empty() {
        return Ok(empty_solution());
    }
    let needed = subset_count(cands.len(), locs.len());
    if needed > budget as u128 {
        return Err(OfflineError::BudgetExceeded {
            candidates: cands.len(),
            subsets: needed,
            limit: budget,
        });
    }

    let f = instance.facility_cost();
    let dist: Vec<Vec<f64>> = cands
        .iter()
        .map(|c| locs.iter().map(|(p, _)| space.dist(c, p)).collect())
        .collect();
    let floor: f64 = locs
        .iter()
        .enumerate()
        .map(|(l, (_, w))| w * dist.iter().map(|row| row[l]).fold(f64::INFINITY, f64::min))
        .sum();

    let greedy = greedy_heuristic(instance, &cands)?;
    let mut search = Search {
        f,
        weights: locs.iter().map(|(_, w)| *w).collect(),
        dist: &dist,
        floor,
        max_size: locs.len(),
        best_cost: greedy.total,
        best_set: greedy
            .facilities
            .iter()
            .map(|p| cands.binary_search(p).expect("greedy opens candidates"))
            .collect(),
        chosen: Vec::new(),
    };
    let current = vec![f64::INFINITY; locs.len()];
    search.descend(0, &current);

    let set: FacilitySet = search.best_set.iter().map(|&i| cands[i].clone()).collect();
    evaluate(instance, &set)
}

struct Search<'a> {
    f: f64,
    weights: Vec<f64>,
    dist: &'a [Vec<f64>],
    /// Assignment cost if every candidate were open.
    floor: f64,
    max_size: usize,
    best_cost: f64,
    best_set: Vec<usize>,
    chosen: Vec<usize>,
}

impl Search<'_> {
    /// Visits every extension of `chosen` by candidates `from..`, in
    /// lexicographic order.
    fn descend(&mut self, from: usize, current: &[f64]) {
        if self.chosen.len() == self.max_size {
            return;
        }
        // Any extension opens at least one more facility and still pays the
        // floor assignment cost.
        if (self.chosen.len() + 1) as f64 * self.f + self.floor > self.best_cost + COST_TIE {
            return;
        }
        let mut next = vec![0.0; current.len()];
        for c in from..self.dist.len() {
            let mut assign = 0.0;
            for (l, slot) in next.iter_mut().enumerate() {
                *slot = current[l].min(self.dist[c][l]);
                assign += self.weights[l] * *slot;
            }
            self.chosen.push(c);
            let cost = self.chosen.len() as f64 * self.f + assign;
            let better =
                cost < self.best_cost - COST_TIE || (cost <= self.best_cost + COST_TIE && self.chosen < self.best_set);
            if better {
                self.best_cost = cost;
                self.best_set = self.chosen.clone();
            }
            let snapshot = next.clone();
            self.descend(c + 1, &snapshot);
            self.chosen.pop();
        }
    }
}

/// Opens, one at a time, the candidate giving the cheapest solution, until
/// no addition lowers the cost.
pub fn greedy_heuristic(instance: &Instance, candidates: &[Point]) -> Result<OfflineSolution, OfflineError> {
    let space = instance.space();
    let cands = prepare_candidates(space, candidates)?;
    let locs = demand_locations(instance);
    if locs.is_empty() {
        return Ok(empty_solution());
    }
    let f = instance.facility_cost();
    let dist: Vec<Vec<f64>> = cands
        .iter()
        .map(|c| locs.iter().map(|(p, _)| space.dist(c, p)).collect())
        .collect();
    let mut current = vec![f64::INFINITY; locs.len()];
    let mut open = FacilitySet::new();
    let mut cost = f64::INFINITY;
    loop {
        let mut best: Option<(usize, f64)> = None;
        for (c, row) in dist.iter().enumerate() {
            if open.contains(&cands[c]) {
                continue;
            }
            let assign: f64 = locs
                .iter()
                .enumerate()
                .map(|(l, (_, w))| w * current[l].min(row[l]))
                .sum();
            let total = (open.len() + 1) as f64 * f + assign;
            if best.is_none_or(|(_, b)| total < b) {
                best = Some((c, total));
            }
        }
        match best {
            Some((c, total)) if total < cost - 1e-12 => {
                for (l, d) in current.iter_mut().enumerate() {
                    *d = d.min(dist[c][l]);
                }
                open.insert(cands[c].clone());
                cost = total;
            }
            _ => break,
        }
    }
    evaluate(instance, &open)
}

/// Candidate facility locations used by [`solve_default`]: every point for
/// explicit, Euclidean and star spaces. For subset-point spaces: the demand
/// locations, plus for every offset `a` the subset points covering
/// consecutive runs of `subset_size` locations in decreasing-demand order
/// starting at `a`; these contain an optimal solution.
pub fn default_candidates(instance: &Instance) -> Vec<Point> {
    let space = instance.space();
    let MetricSpace::SubsetPoints { subset_size, .. } = *space else {
        return space.all_points();
    };
    let locs = demand_locations(instance);
    let mut out: Vec<Point> = locs.iter().map(|(p, _)| p.clone()).collect();
    let ranked = ranked_base_locations(&locs);
    for a in 0..ranked.len() {
        for chunk in ranked[a..].chunks(subset_size) {
            out.push(covering_subset(space, chunk));
        }
    }
    if out.is_empty() {
        out.push(Point::Base(0));
    }
    out.sort();
    out.dedup();
    out
}

/// Base-point demand locations by decreasing count, ties to lower index.
fn ranked_base_locations(locs: &[(Point, f64)]) -> Vec<(usize, f64)> {
    let mut ranked: Vec<(usize, f64)> = locs
        .iter()
        .filter_map(|(p, w)| p.base_index().map(|j| (j, *w)))
        .collect();
    ranked.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
    ranked
}

/// Subset point containing the given base indices, padded with the lowest
/// other indices.
fn covering_subset(space: &MetricSpace, chunk: &[(usize, f64)]) -> Point {
    let MetricSpace::SubsetPoints { m, subset_size, .. } = *space else {
        unreachable!("covering subsets exist only in subset-point spaces");
    };
    let mut set: Vec<usize> = chunk.iter().map(|&(j, _)| j).collect();
    set.sort_unstable();
    let mut pad = 0;
    while set.len() < subset_size && pad < m {
        if set.binary_search(&pad).is_err() {
            set.push(pad);
            set.sort_unstable();
        }
        pad += 1;
    }
    Point::Subset(set)
}

/// Exact optimum of a subset-point instance whose demands all sit at base
/// points, in time polynomial in the number of demands.
///
/// A base-point demand pays 0 at an open base point, `delta/2` inside an
/// open subset point and `delta` otherwise (some facility is always open).
/// With `a` base facilities and `b` subset facilities it is optimal to put
/// the base facilities on the `a` heaviest locations and let the subset
/// points cover the next `b * subset_size`, so the optimum is a minimum
/// over `(a, b)`.
pub fn solve_subset_points(instance: &Instance) -> Option<OfflineSolution> {
    let space = instance.space();
    let MetricSpace::SubsetPoints { subset_size, delta, .. } = *space else {
        return None;
    };
    let locs = demand_locations(instance);
    if locs.iter().any(|(p, _)| p.base_index().is_none()) {
        return None;
    }
    if locs.is_empty() {
        return Some(empty_solution());
    }
    let ranked = ranked_base_locations(&locs);
    let f = instance.facility_cost();
    let l = ranked.len();
    let mut prefix = vec![0.0; l + 1];
    for (i, (_, w)) in ranked.iter().enumerate() {
        prefix[i + 1] = prefix[i] + w;
    }
    let total_weight = prefix[l];
    let mut best: Option<(f64, usize, usize)> = None;
    for a in 0..=l {
        let max_b = (l - a).div_ceil(subset_size);
        for b in 0..=max_b {
            if a + b == 0 {
                continue;
            }
            let covered_end = (a + b * subset_size).min(l);
            let half = prefix[covered_end] - prefix[a];
            let far = total_weight - prefix[covered_end];
            let cost = (a + b) as f64 * f + delta / 2.0 * half + delta * far;
            if best.is_none_or(|(c, _, _)| cost < c - COST_TIE) {
                best = Some((cost, a, b));
            }
        }
    }
    let (_, a, b) = best.expect("at least one facility count is feasible");
    let mut set: FacilitySet = ranked[..a].iter().map(|&(j, _)| Point::Base(j)).collect();
    for chunk in ranked[a..].chunks(subset_size).take(b) {
        set.insert(covering_subset(space, chunk));
    }
    evaluate(instance, &set).ok()
}

/// Exact optimum with default candidates, using the closed subset-point
/// solver where it applies.
pub fn solve_default(instance: &Instance) -> Result<OfflineSolution, OfflineError> {
    if let Some(sol) = solve_subset_points(instance) {
        return Ok(sol);
    }
    solve_exact(instance, &default_candidates(instance), DEFAULT_BUDGET)
}
