//! Finite metric spaces and distance / nearest-facility queries.
//!
//! Four representations are supported: a dense distance matrix, points in
//! Euclidean space, an implicit star (hub and equidistant leaves), and the
//! implicit "subset point" space whose points are addressed by index sets
//! and never enumerated unless explicitly asked for.

use std::cmp::Ordering;
use std::fmt;

use itertools::Itertools;
use serde::{Deserialize, Serialize};

use crate::error::MetricError;

/// Absolute tolerance used when checking metric axioms.
pub const AXIOM_TOLERANCE: f64 = 1e-9;

/// A point of a metric space.
///
/// `Base(i)` is the `i`-th ordinary point. `Subset(I)` is the implicit subset
/// point `s_I` of a [`MetricSpace::SubsetPoints`] space; `I` is sorted and
/// duplicate free. The derived ordering (all base points by index, then
/// subset points lexicographically) is the tie-break order used everywhere.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Point {
    #[serde(rename = "x")]
    Base(usize),
    #[serde(rename = "s")]
    Subset(Vec<usize>),
}

impl Point {
    pub fn base_index(&self) -> Option<usize> {
        match self {
            Point::Base(i) => Some(*i),
            Point::Subset(_) => None,
        }
    }
}

impl fmt::Display for Point {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Point::Base(i) => write!(f, "x{i}"),
            Point::Subset(set) => write!(f, "s{{{}}}", set.iter().join(",")),
        }
    }
}

/// A finite metric space.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum MetricSpace {
    /// Dense `n x n` distance matrix.
    Explicit { n: usize, distances: Vec<Vec<f64>> },
    /// Points of `R^dim` under the Euclidean norm.
    Euclidean { points: Vec<Vec<f64>> },
    /// `leaves` points pairwise `2 * spoke` apart, plus a hub (index
    /// `leaves`) at distance `spoke` from every leaf.
    Star { leaves: usize, spoke: f64 },
    /// `m` base points pairwise `delta` apart, plus one implicit point `s_I`
    /// for every `I` of size `subset_size`, with `d(s_I, x_j) = delta / 2`
    /// for `j` in `I` and `delta` otherwise, and `d(s_I, s_J) = delta`.
    SubsetPoints { m: usize, subset_size: usize, delta: f64 },
}

/// One metric-axiom violation found by [`MetricSpace::validate`].
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Violation {
    Shape {
        detail: String,
    },
    NonFinite {
        i: usize,
        j: usize,
        value: f64,
    },
    Diagonal {
        i: usize,
        value: f64,
    },
    Negative {
        i: usize,
        j: usize,
        value: f64,
    },
    Asymmetric {
        i: usize,
        j: usize,
        forward: f64,
        backward: f64,
    },
    Triangle {
        i: usize,
        j: usize,
        k: usize,
        direct: f64,
        via: f64,
    },
    Parameter {
        detail: String,
    },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::Shape { detail } | Violation::Parameter { detail } => f.write_str(detail),
            Violation::NonFinite { i, j, value } => write!(f, "d[{i}][{j}] = {value} is not finite"),
            Violation::Diagonal { i, value } => write!(f, "d[{i}][{i}] = {value}, expected 0"),
            Violation::Negative { i, j, value } => write!(f, "d[{i}][{j}] = {value} is negative"),
            Violation::Asymmetric {
                i,
                j,
                forward,
                backward,
            } => {
                write!(f, "d[{i}][{j}] = {forward} but d[{j}][{i}] = {backward}")
            }
            Violation::Triangle { i, j, k, direct, via } => {
                write!(f, "d[{i}][{k}] = {direct} exceeds d[{i}][{j}] + d[{j}][{k}] = {via}")
            }
        }
    }
}

impl MetricSpace {
    /// Number of base points (`m` for subset-point spaces; includes the hub
    /// for stars).
    pub fn base_count(&self) -> usize {
        match self {
            MetricSpace::Explicit { n, .. } => *n,
            MetricSpace::Euclidean { points } => points.len(),
            MetricSpace::Star { leaves, .. } => leaves + 1,
            MetricSpace::SubsetPoints { m, .. } => *m,
        }
    }

    /// Checks that `p` addresses a point of this space.
    pub fn check(&self, p: &Point) -> Result<(), MetricError> {
        match p {
            Point::Base(i) => {
                let count = self.base_count();
                if *i < count {
                    Ok(())
                } else {
                    Err(MetricError::OutOfRange {
                        point: p.clone(),
                        count,
                    })
                }
            }
            Point::Subset(set) => match self {
                MetricSpace::SubsetPoints { m, subset_size, .. } => {
                    if set.len() != *subset_size {
                        return Err(MetricError::BadSubset {
                            point: p.clone(),
                            reason: format!("expected {subset_size} indices, got {}", set.len()),
                        });
                    }
                    if !set.windows(2).all(|w| w[0] < w[1]) {
                        return Err(MetricError::BadSubset {
                            point: p.clone(),
                            reason: "indices must be sorted and unique".into(),
                        });
                    }
                    match set.last() {
                        Some(&last) if last >= *m => Err(MetricError::BadSubset {
                            point: p.clone(),
                            reason: format!("index {last} out of range for m = {m}"),
                        }),
                        _ => Ok(()),
                    }
                }
                _ => Err(MetricError::SubsetInPlainSpace { point: p.clone() }),
            },
        }
    }

    /// Distance between two points, validating both descriptors.
    pub fn distance(&self, a: &Point, b: &Point) -> Result<f64, MetricError> {
        self.check(a)?;
        self.check(b)?;
        Ok(self.dist(a, b))
    }

    /// Distance between two points already known to be valid.
    pub(crate) fn dist(&self, a: &Point, b: &Point) -> f64 {
        if a == b {
            return 0.0;
        }
        match (self, a, b) {
            (MetricSpace::Explicit { distances, .. }, Point::Base(i), Point::Base(j)) => distances[*i][*j],
            (MetricSpace::Euclidean { points }, Point::Base(i), Point::Base(j)) => points[*i]
                .iter()
                .zip(&points[*j])
                .map(|(x, y)| (x - y) * (x - y))
                .sum::<f64>()
                .sqrt(),
            (MetricSpace::Star { leaves, spoke }, Point::Base(i), Point::Base(j)) => {
                if i == leaves || j == leaves {
                    *spoke
                } else {
                    2.0 * spoke
                }
            }
            (MetricSpace::SubsetPoints { delta, .. }, Point::Base(_), Point::Base(_)) => *delta,
            (MetricSpace::SubsetPoints { delta, .. }, Point::Subset(set), Point::Base(j))
            | (MetricSpace::SubsetPoints { delta, .. }, Point::Base(j), Point::Subset(set)) => {
                if set.binary_search(j).is_ok() {
                    delta / 2.0
                } else {
                    *delta
                }
            }
            (MetricSpace::SubsetPoints { delta, .. }, Point::Subset(_), Point::Subset(_)) => *delta,
            _ => unreachable!("descriptor validity is checked before distance evaluation"),
        }
    }

    /// Closest facility to `v` and its distance. An empty facility set yields
    /// `(None, +inf)`. Ties go to the smallest descriptor.
    pub fn nearest<'a>(&self, facilities: &'a FacilitySet, v: &Point) -> Result<(Option<&'a Point>, f64), MetricError> {
        self.check(v)?;
        Ok(self.nearest_unchecked(facilities.as_slice(), v))
    }

    pub(crate) fn nearest_unchecked<'a>(&self, facilities: &'a [Point], v: &Point) -> (Option<&'a Point>, f64) {
        let mut best: Option<&Point> = None;
        let mut best_d = f64::INFINITY;
        for f in facilities {
            let d = self.dist(f, v);
            let better = match best {
                None => true,
                Some(b) => d < best_d || (d == best_d && f < b),
            };
            if better {
                best = Some(f);
                best_d = d;
            }
        }
        (best, best_d)
    }

    /// Lists every metric-axiom violation beyond [`AXIOM_TOLERANCE`].
    ///
    /// Euclidean, star and subset-point spaces are metrics by construction;
    /// only their parameters are checked.
    pub fn validate(&self) -> Vec<Violation> {
        let mut out = Vec::new();
        match self {
            MetricSpace::Explicit { n, distances } => {
                if distances.len() != *n || distances.iter().any(|row| row.len() != *n) {
                    out.push(Violation::Shape {
                        detail: format!("distance matrix is not {n} x {n}"),
                    });
                    return out;
                }
                validate_matrix(distances, &mut out);
            }
            MetricSpace::Euclidean { points } => {
                if let Some(first) = points.first() {
                    let dim = first.len();
                    if let Some((i, _)) = points.iter().enumerate().find(|(_, p)| p.len() != dim) {
                        out.push(Violation::Shape {
                            detail: format!("point {i} has a different dimension than point 0"),
                        });
                    }
                }
                if points.iter().flatten().any(|c| !c.is_finite()) {
                    out.push(Violation::Parameter {
                        detail: "non-finite coordinate".into(),
                    });
                }
            }
            MetricSpace::Star { spoke, .. } => {
                if !(spoke.is_finite() && *spoke >= 0.0) {
                    out.push(Violation::Parameter {
                        detail: format!("spoke length {spoke} must be finite and non-negative"),
                    });
                }
            }
            MetricSpace::SubsetPoints { m, subset_size, delta } => {
                if !(delta.is_finite() && *delta > 0.0) {
                    out.push(Violation::Parameter {
                        detail: format!("delta {delta} must be finite and positive"),
                    });
                }
                if *subset_size == 0 || subset_size > m {
                    out.push(Violation::Parameter {
                        detail: format!("subset_size {subset_size} must lie in 1..={m}"),
                    });
                }
            }
        }
        out
    }

    /// Every point of the space in descriptor order. Subset points are
    /// enumerated, so this is only sensible for small `m`.
    pub fn all_points(&self) -> Vec<Point> {
        let mut pts: Vec<Point> = (0..self.base_count()).map(Point::Base).collect();
        if let MetricSpace::SubsetPoints { m, subset_size, .. } = self {
            pts.extend((0..*m).combinations(*subset_size).map(Point::Subset));
        }
        pts
    }

    /// Materializes the space (all points, see [`Self::all_points`]) as an
    /// explicit matrix.
    pub fn to_explicit(&self) -> (MetricSpace, Vec<Point>) {
        let pts = self.all_points();
        let distances = pts
            .iter()
            .map(|a| pts.iter().map(|b| self.dist(a, b)).collect())
            .collect();
        (
            MetricSpace::Explicit {
                n: pts.len(),
                distances,
            },
            pts,
        )
    }
}

#[allow(clippy::needless_range_loop)]
fn validate_matrix(d: &[Vec<f64>], out: &mut Vec<Violation>) {
    let n = d.len();
    for i in 0..n {
        for j in 0..n {
            let v = d[i][j];
            if !v.is_finite() {
                out.push(Violation::NonFinite { i, j, value: v });
            }
        }
    }
    if !out.is_empty() {
        return;
    }
    for i in 0..n {
        if d[i][i].abs() > AXIOM_TOLERANCE {
            out.push(Violation::Diagonal { i, value: d[i][i] });
        }
        for j in 0..n {
            if d[i][j] < -AXIOM_TOLERANCE {
                out.push(Violation::Negative { i, j, value: d[i][j] });
            }
            if i < j && (d[i][j] - d[j][i]).abs() > AXIOM_TOLERANCE {
                out.push(Violation::Asymmetric {
                    i,
                    j,
                    forward: d[i][j],
                    backward: d[j][i],
                });
            }
        }
    }
    // Triangle checks are reported once per unordered endpoint pair.
    for i in 0..n {
        for k in (i + 1)..n {
            for j in 0..n {
                if j == i || j == k {
                    continue;
                }
                let via = d[i][j] + d[j][k];
                if d[i][k] > via + AXIOM_TOLERANCE {
                    out.push(Violation::Triangle {
                        i,
                        j,
                        k,
                        direct: d[i][k],
                        via,
                    });
                }
            }
        }
    }
}

/// A set of open facilities, kept sorted in descriptor order.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct FacilitySet {
    facilities: Vec<Point>,
}

impl FacilitySet {
    pub fn new() -> Self {
        Self::default()
    }

    /// Inserts `p`, returning false if it was already present.
    pub fn insert(&mut self, p: Point) -> bool {
        match self.facilities.binary_search(&p) {
            Ok(_) => false,
            Err(pos) => {
                self.facilities.insert(pos, p);
                true
            }
        }
    }

    pub fn contains(&self, p: &Point) -> bool {
        self.facilities.binary_search(p).is_ok()
    }

    pub fn len(&self) -> usize {
        self.facilities.len()
    }

    pub fn is_empty(&self) -> bool {
        self.facilities.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = &Point> {
        self.facilities.iter()
    }

    pub fn as_slice(&self) -> &[Point] {
        &self.facilities
    }

    pub fn check(&self, space: &MetricSpace) -> Result<(), MetricError> {
        self.facilities.iter().try_for_each(|p| space.check(p))
    }
}

impl FromIterator<Point> for FacilitySet {
    fn from_iter<T: IntoIterator<Item = Point>>(iter: T) -> Self {
        let mut facilities: Vec<Point> = iter.into_iter().collect();
        facilities.sort();
        facilities.dedup();
        Self { facilities }
    }
}

/// Total order on `(distance, descriptor)` pairs used for nearest queries.
pub(crate) fn closer(a: (f64, &Point), b: (f64, &Point)) -> bool {
    match a.0.partial_cmp(&b.0) {
        Some(Ordering::Less) => true,
        Some(Ordering::Equal) => a.1 < b.1,
        _ => false,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn matrix(rows: &[&[f64]]) -> MetricSpace {
        MetricSpace::Explicit {
            n: rows.len(),
            distances: rows.iter().map(|r| r.to_vec()).collect(),
        }
    }

    #[test]
    fn matrix_lookup_and_identity() {
        let s = matrix(&[&[0.0, 0.25], &[0.25, 0.0]]);
        assert_eq!(s.distance(&Point::Base(0), &Point::Base(1)).unwrap(), 0.25);
        assert_eq!(s.distance(&Point::Base(1), &Point::Base(1)).unwrap(), 0.0);
    }

    #[test]
    fn out_of_range_descriptor() {
        let s = matrix(&[&[0.0]]);
        assert!(matches!(
            s.distance(&Point::Base(0), &Point::Base(3)),
            Err(MetricError::OutOfRange { .. })
        ));
        assert!(matches!(
            s.distance(&Point::Base(0), &Point::Subset(vec![0])),
            Err(MetricError::SubsetInPlainSpace { .. })
        ));
    }

    #[test]
    fn subset_point_distances() {
        let s = MetricSpace::SubsetPoints {
            m: 4,
            subset_size: 2,
            delta: 1.0,
        };
        let s12 = Point::Subset(vec![0, 1]);
        assert_eq!(s.distance(&s12, &Point::Base(0)).unwrap(), 0.5);
        assert_eq!(s.distance(&s12, &Point::Base(3)).unwrap(), 1.0);
        assert_eq!(s.distance(&s12, &Point::Subset(vec![0, 2])).unwrap(), 1.0);
        assert_eq!(s.distance(&s12, &s12).unwrap(), 0.0);
        assert!(s.check(&Point::Subset(vec![1, 0])).is_err());
        assert!(s.check(&Point::Subset(vec![0, 4])).is_err());
        assert!(s.check(&Point::Subset(vec![0])).is_err());
    }

    #[test]
    fn nearest_of_empty_set_is_infinite() {
        let s = matrix(&[&[0.0, 1.0], &[1.0, 0.0]]);
        let empty = FacilitySet::new();
        let (f, d) = s.nearest(&empty, &Point::Base(0)).unwrap();
        assert!(f.is_none());
        assert_eq!(d, f64::INFINITY);
        assert_eq!(d.min(1.0), 1.0);
    }

    #[test]
    fn nearest_self_and_tie_break() {
        let s = matrix(&[&[0.0, 1.0, 1.0], &[1.0, 0.0, 2.0], &[1.0, 2.0, 0.0]]);
        let fs: FacilitySet = [Point::Base(2), Point::Base(1)].into_iter().collect();
        let (f, d) = s.nearest(&fs, &Point::Base(0)).unwrap();
        assert_eq!((f.unwrap(), d), (&Point::Base(1), 1.0));
        let (f, d) = s.nearest(&fs, &Point::Base(2)).unwrap();
        assert_eq!((f.unwrap(), d), (&Point::Base(2), 0.0));
    }

    #[test]
    fn star_geometry() {
        // k = 4, delta = 1/(4 * 2) = 1/8
        let s = MetricSpace::Star {
            leaves: 4,
            spoke: 0.125,
        };
        let fs: FacilitySet = [Point::Base(0)].into_iter().collect();
        let (f, d) = s.nearest(&fs, &Point::Base(1)).unwrap();
        assert_eq!((f.unwrap(), d), (&Point::Base(0), 0.25));
        assert_eq!(s.distance(&Point::Base(4), &Point::Base(2)).unwrap(), 0.125);
    }

    #[test]
    fn validate_reports_violations() {
        assert!(matrix(&[&[0.0, 1.0, 1.0], &[1.0, 0.0, 1.0], &[1.0, 1.0, 0.0]])
            .validate()
            .is_empty());

        let asym = matrix(&[&[0.0, 1.0], &[2.0, 0.0]]).validate();
        assert_eq!(asym.len(), 1);
        assert!(matches!(asym[0], Violation::Asymmetric { i: 0, j: 1, .. }));

        let tri = matrix(&[&[0.0, 1.0, 5.0], &[1.0, 0.0, 1.0], &[5.0, 1.0, 0.0]]).validate();
        assert_eq!(tri.len(), 1);
        assert!(matches!(tri[0], Violation::Triangle { i: 0, j: 1, k: 2, .. }));

        let bad_shape = MetricSpace::Explicit {
            n: 2,
            distances: vec![vec![0.0]],
        }
        .validate();
        assert!(matches!(bad_shape[0], Violation::Shape { .. }));
    }

    #[test]
    fn subset_points_satisfy_triangle_inequality() {
        for m in 2..=8 {
            for size in 1..=m {
                let s = MetricSpace::SubsetPoints {
                    m,
                    subset_size: size,
                    delta: 1.0,
                };
                let (explicit, _) = s.to_explicit();
                assert!(explicit.validate().is_empty(), "m={m} size={size}");
            }
        }
    }

    #[test]
    fn facility_set_is_sorted_and_deduplicated() {
        let mut fs = FacilitySet::new();
        assert!(fs.insert(Point::Subset(vec![0, 1])));
        assert!(fs.insert(Point::Base(3)));
        assert!(!fs.insert(Point::Base(3)));
        assert_eq!(fs.as_slice(), &[Point::Base(3), Point::Subset(vec![0, 1])]);
    }

    #[test]
    fn descriptor_json_shape() {
        assert_eq!(serde_json::to_string(&Point::Base(3)).unwrap(), r#"{"x":3}"#);
        assert_eq!(
            serde_json::to_string(&Point::Subset(vec![1, 2])).unwrap(),
            r#"{"s":[1,2]}"#
        );
    }
}
