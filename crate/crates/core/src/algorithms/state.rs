use std::collections::HashMap;

use crate::metric::{closer, MetricSpace, Point};

/// Open facilities plus, for every distinct demand location, the distance
/// to (and identity of) its nearest open facility.
///
/// Updated incrementally as facilities open; the values are exactly the
/// minima a full scan would produce, including the lowest-descriptor
/// tie-break.
#[derive(Debug, Clone)]
pub struct LocationTable {
    locations: Vec<Point>,
    facilities: Vec<Point>,
    dist: Vec<f64>,
    via: Vec<Option<usize>>,
}

impl LocationTable {
    pub(crate) fn new(locations: Vec<Point>) -> Self {
        let n = locations.len();
        Self {
            locations,
            facilities: Vec::new(),
            dist: vec![f64::INFINITY; n],
            via: vec![None; n],
        }
    }

    pub fn reset(&mut self) {
        self.facilities.clear();
        self.dist.fill(f64::INFINITY);
        self.via.fill(None);
    }

    pub fn locations(&self) -> &[Point] {
        &self.locations
    }

    /// Facilities in opening order.
    pub fn facilities(&self) -> &[Point] {
        &self.facilities
    }

    /// Nearest-facility distance of location `loc` (infinite when no
    /// facility is open).
    pub fn distance(&self, loc: usize) -> f64 {
        self.dist[loc]
    }

    pub fn nearest_facility(&self, loc: usize) -> Option<&Point> {
        self.via[loc].map(|i| &self.facilities[i])
    }

    pub(crate) fn open(&mut self, space: &MetricSpace, facility: Point) {
        let idx = self.facilities.len();
        for (loc, p) in self.locations.iter().enumerate() {
            let d = space.dist(&facility, p);
            let better = match self.via[loc] {
                None => true,
                Some(cur) => closer((d, &facility), (self.dist[loc], &self.facilities[cur])),
            };
            if better {
                self.dist[loc] = d;
                self.via[loc] = Some(idx);
            }
        }
        self.facilities.push(facility);
    }
}

/// Maps each demand to a dense location index.
#[derive(Debug, Clone)]
pub(crate) struct DemandLocations {
    pub locations: Vec<Point>,
    pub location_of: Vec<usize>,
}

impl DemandLocations {
    pub fn new(demands: &[Point]) -> Self {
        let mut index: HashMap<&Point, usize> = HashMap::new();
        let mut locations = Vec::new();
        let location_of = demands
            .iter()
            .map(|p| {
                *index.entry(p).or_insert_with(|| {
                    locations.push(p.clone());
                    locations.len() - 1
                })
            })
            .collect();
        Self { locations, location_of }
    }
}
