//! Facility potentials `p(z) = sum_i max(D_i - d(z, v_i), 0)` over served
//! demands `v_i` with current nearest-facility distances `D_i`, and their
//! maximization.

use std::collections::BTreeSet;

use crate::metric::{MetricSpace, Point};

/// Potentials within this absolute distance of the maximum count as tied.
pub const POTENTIAL_TIE: f64 = 1e-12;

/// Potential of `z`; `served` pairs each served demand's location with its
/// current nearest-facility distance, in arrival order.
pub fn potential(space: &MetricSpace, z: &Point, served: &[(&Point, f64)]) -> f64 {
    served.iter().map(|(v, d)| (d - space.dist(z, v)).max(0.0)).sum()
}

/// Point of maximum potential over the whole space, ties to the smallest
/// descriptor. Subset-point spaces use [`subset_potential_argmax`]; other
/// spaces are scanned point by point.
pub fn potential_argmax(space: &MetricSpace, served: &[(&Point, f64)]) -> (Point, f64) {
    if let Some(best) = subset_potential_argmax(space, served) {
        return best;
    }
    let candidates = space.all_points();
    pick_lowest(space, candidates, served)
}

/// Maximizes the potential over a subset-point space without enumerating
/// its subset points. Returns `None` for other kinds of space.
///
/// For a subset point `s_I`, a served demand at base point `x_j` contributes
/// `max(D - delta/2, 0)` when `j` is in `I` and `max(D - delta, 0)` otherwise,
/// so the best `I` holds the `subset_size` base points with the largest
/// total gain (ties to lower indices). Demands located at subset points
/// `s_J` add their own candidate `J`. Base points are evaluated for every
/// index a served demand touches plus the smallest untouched index, which
/// stands in for all untouched ones.
pub fn subset_potential_argmax(space: &MetricSpace, served: &[(&Point, f64)]) -> Option<(Point, f64)> {
    let MetricSpace::SubsetPoints { m, subset_size, delta } = *space else {
        return None;
    };

    let mut gain: std::collections::BTreeMap<usize, f64> = Default::default();
    let mut touched = BTreeSet::new();
    let mut subset_locations = BTreeSet::new();
    for (v, d) in served {
        match v {
            Point::Base(j) => {
                touched.insert(*j);
                let g = (d - delta / 2.0).max(0.0) - (d - delta).max(0.0);
                *gain.entry(*j).or_insert(0.0) += g;
            }
            Point::Subset(set) => {
                touched.extend(set.iter().copied());
                subset_locations.insert((*v).clone());
            }
        }
    }

    let mut candidates: Vec<Point> = touched.iter().copied().map(Point::Base).collect();
    if let Some(free) = (0..m).find(|j| !touched.contains(j)) {
        candidates.push(Point::Base(free));
    }

    let mut gains = vec![0.0; m];
    for (j, g) in gain {
        gains[j] = g;
    }
    candidates.push(Point::Subset(lowest_best_subset(&gains, subset_size)));
    candidates.extend(subset_locations);

    Some(pick_lowest(space, candidates, served))
}

/// Lexicographically smallest `size`-subset whose total gain is within
/// [`POTENTIAL_TIE`] of the largest possible total.
fn lowest_best_subset(gains: &[f64], size: usize) -> Vec<usize> {
    let top = |from: usize, count: usize| -> f64 {
        let mut rest: Vec<f64> = gains[from..].to_vec();
        rest.sort_by(|a, b| b.total_cmp(a));
        rest.iter().take(count).sum()
    };
    let target = top(0, size) - POTENTIAL_TIE;
    let mut chosen = Vec::with_capacity(size);
    let mut sum = 0.0;
    for j in 0..gains.len() {
        let need = size - chosen.len();
        if need == 0 {
            break;
        }
        let must_take = gains.len() - j == need;
        if must_take || sum + gains[j] + top(j + 1, need - 1) >= target {
            chosen.push(j);
            sum += gains[j];
        }
    }
    chosen
}

fn pick_lowest(space: &MetricSpace, candidates: Vec<Point>, served: &[(&Point, f64)]) -> (Point, f64) {
    let scored: Vec<(Point, f64)> = candidates
        .into_iter()
        .map(|z| {
            let p = potential(space, &z, served);
            (z, p)
        })
        .collect();
    let max = scored.iter().map(|(_, p)| *p).fold(f64::NEG_INFINITY, f64::max);
    scored
        .into_iter()
        .filter(|(_, p)| *p >= max - POTENTIAL_TIE)
        .min_by(|a, b| a.0.cmp(&b.0))
        .expect("every space has at least one point")
}

/// The subset point an adversarial tie-break picks: every base index seen
/// so far plus the highest unused indices. `None` if the seen indices do
/// not fit in one subset or the space has no subset points.
pub fn adversarial_subset(space: &MetricSpace, seen: &BTreeSet<usize>) -> Option<Point> {
    let MetricSpace::SubsetPoints { m, subset_size, .. } = *space else {
        return None;
    };
    if seen.len() > subset_size {
        return None;
    }
    let mut set = seen.clone();
    let mut next = m;
    while set.len() < subset_size {
        next -= 1;
        set.insert(next);
    }
    Some(Point::Subset(set.into_iter().collect()))
}
