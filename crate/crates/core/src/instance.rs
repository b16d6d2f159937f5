//! Problem instances, the generator families used for lower-bound and
//! tightness experiments, and the instance JSON format.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::arrival::Distribution;
use crate::error::InstanceError;
use crate::metric::{MetricSpace, Point};

pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OptKind {
    /// Value of an optimal solution.
    Exact,
    /// Cost of some feasible solution, so `OPT <= value`.
    UpperBound,
}

impl fmt::Display for OptKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            OptKind::Exact => "exact",
            OptKind::UpperBound => "upper_bound",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KnownOpt {
    pub value: f64,
    pub kind: OptKind,
    pub note: String,
}

/// A cluster of an (optimal) solution: the demands served by `center`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Cluster {
    pub center: Point,
    pub demand_indices: Vec<usize>,
}

/// Parameters of a builtin instance family.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum GeneratorParams {
    Star { k: usize },
    Clique { delta: f64, k: usize },
    SubsetIid { n: usize },
    Fotakis { n: usize },
}

impl fmt::Display for GeneratorParams {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            GeneratorParams::Star { k } => write!(f, "star(k={k})"),
            GeneratorParams::Clique { delta, k } => write!(f, "clique(delta={delta},k={k})"),
            GeneratorParams::SubsetIid { n } => write!(f, "subset_iid(n={n})"),
            GeneratorParams::Fotakis { n } => write!(f, "fotakis(n={n})"),
        }
    }
}

impl GeneratorParams {
    pub fn family_name(&self) -> &'static str {
        match self {
            GeneratorParams::Star { .. } => "star",
            GeneratorParams::Clique { .. } => "clique",
            GeneratorParams::SubsetIid { .. } => "subset_iid",
            GeneratorParams::Fotakis { .. } => "fotakis",
        }
    }

    /// Compact `key=value;...` rendering used in CSV output.
    pub fn params_string(&self) -> String {
        match self {
            GeneratorParams::Star { k } => format!("k={k}"),
            GeneratorParams::Clique { delta, k } => format!("delta={delta};k={k}"),
            GeneratorParams::SubsetIid { n } | GeneratorParams::Fotakis { n } => format!("n={n}"),
        }
    }
}

/// A facility location instance: metric, demand multiset, facility cost.
///
/// Demands are kept in the generator's canonical order; arrival orders are
/// produced separately by [`crate::arrival`].
#[derive(Debug, Clone, PartialEq)]
pub struct Instance {
    space: MetricSpace,
    demands: Vec<Point>,
    facility_cost: f64,
    known_opt: Option<KnownOpt>,
    clusters: Option<Vec<Cluster>>,
    family: Option<GeneratorParams>,
}

impl Instance {
    pub fn new(space: MetricSpace, demands: Vec<Point>, facility_cost: f64) -> Result<Self, InstanceError> {
        if let Some(v) = space.validate().first() {
            return Err(InstanceError::Metric(v.to_string()));
        }
        if !(facility_cost.is_finite() && facility_cost > 0.0) {
            return Err(InstanceError::Parameter(format!(
                "facility_cost must be positive, got {facility_cost}"
            )));
        }
        for (index, d) in demands.iter().enumerate() {
            space
                .check(d)
                .map_err(|source| InstanceError::Demand { index, source })?;
        }
        Ok(Self {
            space,
            demands,
            facility_cost,
            known_opt: None,
            clusters: None,
            family: None,
        })
    }

    pub fn with_known_opt(mut self, known_opt: KnownOpt) -> Self {
        self.known_opt = Some(known_opt);
        self
    }

    pub fn with_clusters(mut self, clusters: Vec<Cluster>) -> Result<Self, InstanceError> {
        check_clusters(&self.space, self.demands.len(), &clusters)?;
        self.clusters = Some(clusters);
        Ok(self)
    }

    pub fn with_family(mut self, family: GeneratorParams) -> Self {
        self.family = Some(family);
        self
    }

    /// Same metric and facility cost with a different demand multiset.
    /// Clusters and the known optimum no longer apply and are dropped.
    pub fn with_demands(&self, demands: Vec<Point>) -> Result<Self, InstanceError> {
        let mut inst = Instance::new(self.space.clone(), demands, self.facility_cost)?;
        inst.family = self.family;
        Ok(inst)
    }

    pub fn space(&self) -> &MetricSpace {
        &self.space
    }

    pub fn demands(&self) -> &[Point] {
        &self.demands
    }

    pub fn facility_cost(&self) -> f64 {
        self.facility_cost
    }

    pub fn known_opt(&self) -> Option<&KnownOpt> {
        self.known_opt.as_ref()
    }

    pub fn clusters(&self) -> Option<&[Cluster]> {
        self.clusters.as_deref()
    }

    pub fn family(&self) -> Option<GeneratorParams> {
        self.family
    }

    /// Serializes to the versioned JSON document.
    pub fn to_json(&self) -> String {
        let doc = InstanceDoc {
            version: FORMAT_VERSION,
            facility_cost: self.facility_cost,
            metric: self.space.clone(),
            demands: self.demands.clone(),
            known_opt: self.known_opt.clone(),
            clusters: self.clusters.clone(),
            family: self.family,
        };
        serde_json::to_string_pretty(&doc).expect("instance documents always serialize")
    }

    /// Parses and validates a JSON document.
    pub fn from_json(text: &str) -> Result<Self, InstanceError> {
        let doc: InstanceDoc = serde_json::from_str(text).map_err(json_error)?;
        if doc.version != FORMAT_VERSION {
            return Err(InstanceError::Schema(format!(
                "unsupported version {}, expected {FORMAT_VERSION}",
                doc.version
            )));
        }
        let mut inst = Instance::new(doc.metric, doc.demands, doc.facility_cost)?;
        if let Some(k) = doc.known_opt {
            if !k.value.is_finite() {
                return Err(InstanceError::Schema("known_opt.value must be finite".into()));
            }
            inst = inst.with_known_opt(k);
        }
        if let Some(c) = doc.clusters {
            inst = inst.with_clusters(c)?;
        }
        inst.family = doc.family;
        Ok(inst)
    }
}

pub fn save_instance(instance: &Instance) -> String {
    instance.to_json()
}

pub fn load_instance(text: &str) -> Result<Instance, InstanceError> {
    Instance::from_json(text)
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct InstanceDoc {
    version: u32,
    facility_cost: f64,
    metric: MetricSpace,
    demands: Vec<Point>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    known_opt: Option<KnownOpt>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    clusters: Option<Vec<Cluster>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    family: Option<GeneratorParams>,
}

pub(crate) fn json_error(e: serde_json::Error) -> InstanceError {
    use serde_json::error::Category;
    match e.classify() {
        Category::Data => InstanceError::Schema(e.to_string()),
        _ => InstanceError::Json {
            line: e.line(),
            column: e.column(),
            message: e.to_string(),
        },
    }
}

fn check_clusters(space: &MetricSpace, demand_count: usize, clusters: &[Cluster]) -> Result<(), InstanceError> {
    let mut seen = vec![false; demand_count];
    for (c, cluster) in clusters.iter().enumerate() {
        space
            .check(&cluster.center)
            .map_err(|e| InstanceError::Clusters(format!("cluster {c} center: {e}")))?;
        for &i in &cluster.demand_indices {
            match seen.get_mut(i) {
                None => {
                    return Err(InstanceError::Clusters(format!(
                        "cluster {c} names demand {i}, but there are {demand_count}"
                    )))
                }
                Some(true) => {
                    return Err(InstanceError::Clusters(format!(
                        "demand {i} appears in more than one cluster"
                    )))
                }
                Some(s) => *s = true,
            }
        }
    }
    if let Some(i) = seen.iter().position(|s| !s) {
        return Err(InstanceError::Clusters(format!("demand {i} is not in any cluster")));
    }
    Ok(())
}

/// Star family: `k` leaf demands pairwise `2 delta` apart around an unused
/// center at distance `delta = 1 / (4 sqrt k)`.
pub fn gen_star(k: usize) -> Result<Instance, InstanceError> {
    if k < 2 {
        return Err(InstanceError::Parameter(format!("star needs k >= 2, got {k}")));
    }
    let delta = star_delta(k);
    let space = MetricSpace::Star {
        leaves: k,
        spoke: delta,
    };
    let demands = (0..k).map(Point::Base).collect();
    let opt = 1.0 + k as f64 * delta;
    Instance::new(space, demands, 1.0)?
        .with_known_opt(KnownOpt {
            value: opt,
            kind: OptKind::UpperBound,
            note: "open the center only: 1 + k*delta".into(),
        })
        .with_clusters(vec![Cluster {
            center: Point::Base(k),
            demand_indices: (0..k).collect(),
        }])
        .map(|i| i.with_family(GeneratorParams::Star { k }))
}

pub fn star_delta(k: usize) -> f64 {
    1.0 / (4.0 * (k as f64).sqrt())
}

/// Uniform clique: `k` points pairwise `delta` apart with `k` demands on each.
pub fn gen_clique(delta: f64, k: usize) -> Result<Instance, InstanceError> {
    if !(delta > 0.0 && delta < 1.0) {
        return Err(InstanceError::Parameter(format!(
            "clique needs 0 < delta < 1, got {delta}"
        )));
    }
    if k < 2 {
        return Err(InstanceError::Parameter(format!("clique needs k >= 2, got {k}")));
    }
    let distances = (0..k)
        .map(|i| (0..k).map(|j| if i == j { 0.0 } else { delta }).collect())
        .collect();
    let space = MetricSpace::Explicit { n: k, distances };
    let demands = (0..k).flat_map(|c| std::iter::repeat_n(Point::Base(c), k)).collect();
    let clusters = (0..k)
        .map(|c| Cluster {
            center: Point::Base(c),
            demand_indices: (c * k..(c + 1) * k).collect(),
        })
        .collect();
    Instance::new(space, demands, 1.0)?
        .with_known_opt(KnownOpt {
            value: k as f64,
            kind: OptKind::UpperBound,
            note: "one facility per point: k".into(),
        })
        .with_clusters(clusters)
        .map(|i| i.with_family(GeneratorParams::Clique { delta, k }))
}

/// The i.i.d. lower-bound family: a subset-point space with `m = n^2` base
/// points and subset size `n`, demands drawn uniformly from the base points.
#[derive(Debug, Clone)]
pub struct SubsetIidFamily {
    /// Template with no demands; each trial draws its own.
    pub template: Instance,
    pub distribution: Distribution,
    pub draws: usize,
}

pub fn gen_subset_iid(n: usize) -> Result<SubsetIidFamily, InstanceError> {
    if n < 2 {
        return Err(InstanceError::Parameter(format!("subset_iid needs n >= 2, got {n}")));
    }
    let m = n * n;
    let space = MetricSpace::SubsetPoints {
        m,
        subset_size: n,
        delta: 1.0,
    };
    let template = Instance::new(space, Vec::new(), 1.0)?
        .with_known_opt(KnownOpt {
            value: 1.0 + n as f64 / 2.0,
            kind: OptKind::UpperBound,
            note: "a covering subset point serves every draw at 1/2: 1 + n/2".into(),
        })
        .with_family(GeneratorParams::SubsetIid { n });
    Ok(SubsetIidFamily {
        template,
        distribution: Distribution::uniform_base(m),
        draws: n,
    })
}

/// Fotakis lower-bound instance: subset-point space with `m = 2n`, subset
/// size `n` and `delta = 1/sqrt(n-1)`, demands `x_0, ..., x_{n-1}` in order.
/// Requires `n - 1 = 4 t^2` so that `2/delta` and `(n-1) delta / 2` are
/// integers.
pub fn gen_fotakis(n: usize) -> Result<(Instance, Vec<usize>), InstanceError> {
    if n < 5 || fotakis_t(n).is_none() {
        return Err(InstanceError::Parameter(format!(
            "fotakis needs n >= 5 with n - 1 = 4 t^2 (5, 17, 37, 65, ...), got {n}"
        )));
    }
    let delta = fotakis_delta(n);
    let space = MetricSpace::SubsetPoints {
        m: 2 * n,
        subset_size: n,
        delta,
    };
    let demands = (0..n).map(Point::Base).collect();
    let inst = Instance::new(space, demands, 1.0)?
        .with_known_opt(KnownOpt {
            value: 1.0 + n as f64 * delta / 2.0,
            kind: OptKind::UpperBound,
            note: "subset point covering all demands: 1 + n*delta/2".into(),
        })
        .with_family(GeneratorParams::Fotakis { n });
    Ok((inst, (0..n).collect()))
}

fn fotakis_t(n: usize) -> Option<usize> {
    let s = n.checked_sub(1)?;
    if s % 4 != 0 {
        return None;
    }
    let t = ((s / 4) as f64).sqrt().round() as usize;
    (t >= 1 && t * t * 4 == s).then_some(t)
}

pub fn fotakis_delta(n: usize) -> f64 {
    1.0 / ((n - 1) as f64).sqrt()
}

/// Instantiates a family. For `subset_iid` the template (no demands) is
/// returned; use [`gen_subset_iid`] for the distribution.
pub fn generate(params: GeneratorParams) -> Result<Instance, InstanceError> {
    match params {
        GeneratorParams::Star { k } => gen_star(k),
        GeneratorParams::Clique { delta, k } => gen_clique(delta, k),
        GeneratorParams::SubsetIid { n } => gen_subset_iid(n).map(|f| f.template),
        GeneratorParams::Fotakis { n } => gen_fotakis(n).map(|(i, _)| i),
    }
}
