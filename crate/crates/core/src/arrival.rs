//! Arrival-order models: adversarial, uniformly random, i.i.d. draws, and
//! partially random orders in which a fraction of every optimal cluster
//! arrives in adversarial order and the rest is slotted in at random.

use rand::distributions::{Distribution as _, WeightedIndex};
use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::ArrivalError;
use crate::instance::{Cluster, Instance};
use crate::metric::{MetricSpace, Point};
use crate::offline;

/// Probability distribution over points for i.i.d. arrivals.
#[derive(Debug, Clone, PartialEq)]
pub enum Distribution {
    /// Uniform over base points `0..m`.
    UniformBase {
        m: usize,
    },
    Weighted {
        support: Vec<Point>,
        probs: Vec<f64>,
    },
}

impl Distribution {
    pub fn uniform_base(m: usize) -> Self {
        Distribution::UniformBase { m }
    }

    pub fn weighted(support: Vec<Point>, probs: Vec<f64>) -> Result<Self, ArrivalError> {
        if support.is_empty() || support.len() != probs.len() {
            return Err(ArrivalError::Invalid(
                "distribution support and probabilities must be non-empty and equally long".into(),
            ));
        }
        if probs.iter().any(|p| !(p.is_finite() && *p >= 0.0)) {
            return Err(ArrivalError::Invalid(
                "probabilities must be finite and non-negative".into(),
            ));
        }
        let total: f64 = probs.iter().sum();
        if (total - 1.0).abs() > 1e-12 {
            return Err(ArrivalError::Invalid(format!("probabilities sum to {total}, not 1")));
        }
        Ok(Distribution::Weighted { support, probs })
    }

    /// Uniform over the distinct demand locations of `instance`, or over the
    /// base points of a subset-point space.
    pub fn default_for(instance: &Instance) -> Self {
        if let MetricSpace::SubsetPoints { m, .. } = instance.space() {
            return Distribution::UniformBase { m: *m };
        }
        let mut support: Vec<Point> = instance.demands().to_vec();
        support.sort();
        support.dedup();
        if support.is_empty() {
            return Distribution::UniformBase {
                m: instance.space().base_count(),
            };
        }
        let p = 1.0 / support.len() as f64;
        let probs = vec![p; support.len()];
        Distribution::Weighted { support, probs }
    }
}

/// How the online sequence is produced.
#[derive(Debug, Clone, PartialEq)]
pub enum ArrivalModel {
    /// Fixed order of demand indices.
    Adversarial { order: Vec<usize> },
    /// Uniformly random permutation of the demands.
    UniformRandom,
    /// `n` independent draws; the drawn points replace the demand multiset.
    Iid {
        distribution: Option<Distribution>,
        n: usize,
    },
    /// Per cluster `j`, `floor((1 - rho) n_j)` demands arrive in adversarial
    /// relative order and every other demand takes a uniformly random slot
    /// among them. `adversarial_subsets[j]` lists cluster `j`'s adversarial
    /// demands in their relative order; when absent the adversary takes the
    /// demands farthest from the center, farthest first.
    PartialRandom {
        rho: f64,
        adversarial_subsets: Option<Vec<Vec<usize>>>,
        interleaver: String,
    },
    /// As above, but each cluster's adversarial subset is drawn uniformly.
    PartialRandomRandomAdv { rho: f64, interleaver: String },
}

impl ArrivalModel {
    pub fn name(&self) -> &'static str {
        match self {
            ArrivalModel::Adversarial { .. } => "adversarial",
            ArrivalModel::UniformRandom => "uniform",
            ArrivalModel::Iid { .. } => "iid",
            ArrivalModel::PartialRandom { .. } => "partial",
            ArrivalModel::PartialRandomRandomAdv { .. } => "partial_random_adv",
        }
    }

    pub fn rho(&self) -> Option<f64> {
        match self {
            ArrivalModel::PartialRandom { rho, .. } | ArrivalModel::PartialRandomRandomAdv { rho, .. } => Some(*rho),
            _ => None,
        }
    }

    pub fn interleaver(&self) -> Option<&str> {
        match self {
            ArrivalModel::PartialRandom { interleaver, .. }
            | ArrivalModel::PartialRandomRandomAdv { interleaver, .. } => Some(interleaver),
            _ => None,
        }
    }
}

/// JSON form of an arrival model inside experiment configs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ArrivalSpec {
    pub model: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub order: Option<Vec<usize>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rho: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub interleaver: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n: Option<usize>,
}

pub const DEFAULT_INTERLEAVER: &str = "cluster-blocks";

impl TryFrom<&ArrivalSpec> for ArrivalModel {
    type Error = ArrivalError;

    fn try_from(spec: &ArrivalSpec) -> Result<Self, ArrivalError> {
        let interleaver = || {
            spec.interleaver
                .clone()
                .unwrap_or_else(|| DEFAULT_INTERLEAVER.to_string())
        };
        let rho = || {
            spec.rho
                .ok_or_else(|| ArrivalError::Invalid(format!("model {:?} needs rho", spec.model)))
        };
        let model = match spec.model.as_str() {
            "adversarial" => ArrivalModel::Adversarial {
                order: spec
                    .order
                    .clone()
                    .ok_or_else(|| ArrivalError::Invalid("model \"adversarial\" needs order".into()))?,
            },
            "uniform" => ArrivalModel::UniformRandom,
            "iid" => ArrivalModel::Iid {
                distribution: None,
                n: spec
                    .n
                    .ok_or_else(|| ArrivalError::Invalid("model \"iid\" needs n".into()))?,
            },
            "partial" => ArrivalModel::PartialRandom {
                rho: rho()?,
                adversarial_subsets: None,
                interleaver: interleaver(),
            },
            "partial_random_adv" => ArrivalModel::PartialRandomRandomAdv {
                rho: rho()?,
                interleaver: interleaver(),
            },
            other => return Err(ArrivalError::Invalid(format!("unknown model {other:?}"))),
        };
        validate_model(&model)?;
        Ok(model)
    }
}

impl From<&ArrivalModel> for ArrivalSpec {
    fn from(m: &ArrivalModel) -> Self {
        ArrivalSpec {
            model: m.name().to_string(),
            order: match m {
                ArrivalModel::Adversarial { order } => Some(order.clone()),
                _ => None,
            },
            rho: m.rho(),
            interleaver: m.interleaver().map(str::to_string),
            n: match m {
                ArrivalModel::Iid { n, .. } => Some(*n),
                _ => None,
            },
        }
    }
}

/// Parses the JSON arrival fragment of an experiment.
pub fn parse_arrival(text: &str) -> Result<ArrivalModel, ArrivalError> {
    let spec: ArrivalSpec = serde_json::from_str(text).map_err(|e| ArrivalError::Invalid(e.to_string()))?;
    ArrivalModel::try_from(&spec)
}

fn validate_model(model: &ArrivalModel) -> Result<(), ArrivalError> {
    if let Some(rho) = model.rho() {
        if !(rho > 0.0 && rho < 1.0) {
            return Err(ArrivalError::Rho(rho));
        }
    }
    if let Some(name) = model.interleaver() {
        interleaver_by_name(name)?;
    }
    if let ArrivalModel::Iid { n, .. } = model {
        if *n == 0 {
            return Err(ArrivalError::Invalid("iid needs n >= 1".into()));
        }
    }
    Ok(())
}

/// Online sequence produced by a model.
#[derive(Debug, Clone, PartialEq)]
pub enum Arrivals {
    /// Permutation (or sequence) of the instance's demand indices.
    Order(Vec<usize>),
    /// Freshly drawn demand points, arriving in this order.
    Sampled(Vec<Point>),
}

/// Merges per-cluster sequences into one online order without changing the
/// relative order inside any cluster.
pub trait Interleaver: Send + Sync {
    fn interleave(&self, sequences: &[Vec<usize>]) -> Vec<usize>;
}

/// Clusters appear as contiguous blocks, in cluster order.
pub struct ClusterBlocks;

impl Interleaver for ClusterBlocks {
    fn interleave(&self, sequences: &[Vec<usize>]) -> Vec<usize> {
        sequences.concat()
    }
}

/// One demand from each non-exhausted cluster in turn.
pub struct RoundRobin;

impl Interleaver for RoundRobin {
    fn interleave(&self, sequences: &[Vec<usize>]) -> Vec<usize> {
        let total = sequences.iter().map(Vec::len).sum();
        let mut out = Vec::with_capacity(total);
        let longest = sequences.iter().map(Vec::len).max().unwrap_or(0);
        for t in 0..longest {
            out.extend(sequences.iter().filter_map(|s| s.get(t).copied()));
        }
        out
    }
}

pub fn builtin_interleavers() -> Vec<&'static str> {
    vec!["cluster-blocks", "round-robin"]
}

pub fn interleaver_by_name(name: &str) -> Result<Box<dyn Interleaver>, ArrivalError> {
    match name {
        "cluster-blocks" => Ok(Box::new(ClusterBlocks)),
        "round-robin" => Ok(Box::new(RoundRobin)),
        other => Err(ArrivalError::UnknownInterleaver(other.to_string())),
    }
}

/// `floor((1 - rho) n)`, robust to `1 - rho` rounding just below a multiple.
pub fn adversarial_count(rho: f64, n: usize) -> usize {
    ((1.0 - rho) * n as f64 + 1e-9).floor() as usize
}

struct ClusterPlan {
    members: Vec<usize>,
    /// Adversarial demands in relative order (fixed models only).
    adversarial: Vec<usize>,
    random: Vec<usize>,
    /// Members sorted farthest-from-center first.
    by_distance: Vec<usize>,
    adversarial_count: usize,
}

enum Plan {
    Fixed(Vec<usize>),
    Uniform(usize),
    Iid {
        dist: Distribution,
        weights: Option<WeightedIndex<f64>>,
        n: usize,
    },
    Partial {
        clusters: Vec<ClusterPlan>,
        random_subsets: bool,
    },
}

/// Prepared arrival model for one instance; sampling is cheap.
pub struct ArrivalSampler {
    plan: Plan,
    interleaver: Option<Box<dyn Interleaver>>,
}

impl ArrivalSampler {
    pub fn new(instance: &Instance, model: &ArrivalModel) -> Result<Self, ArrivalError> {
        validate_model(model)?;
        let count = instance.demands().len();
        let plan = match model {
            ArrivalModel::Adversarial { order } => {
                if let Some(&bad) = order.iter().find(|&&i| i >= count) {
                    return Err(ArrivalError::Invalid(format!(
                        "order names demand {bad}, instance has {count}"
                    )));
                }
                Plan::Fixed(order.clone())
            }
            ArrivalModel::UniformRandom => Plan::Uniform(count),
            ArrivalModel::Iid { distribution, n } => {
                let dist = distribution
                    .clone()
                    .unwrap_or_else(|| Distribution::default_for(instance));
                let weights = match &dist {
                    Distribution::UniformBase { .. } => None,
                    Distribution::Weighted { probs, .. } => {
                        Some(WeightedIndex::new(probs).map_err(|e| ArrivalError::Invalid(e.to_string()))?)
                    }
                };
                Plan::Iid { dist, weights, n: *n }
            }
            ArrivalModel::PartialRandom {
                rho,
                adversarial_subsets,
                ..
            } => {
                let clusters = cluster_plans(instance, *rho, adversarial_subsets.as_deref())?;
                Plan::Partial {
                    clusters,
                    random_subsets: false,
                }
            }
            ArrivalModel::PartialRandomRandomAdv { rho, .. } => Plan::Partial {
                clusters: cluster_plans(instance, *rho, None)?,
                random_subsets: true,
            },
        };
        let interleaver = model.interleaver().map(interleaver_by_name).transpose()?;
        Ok(Self { plan, interleaver })
    }

    /// Replaces the interleaving strategy of a partial model.
    pub fn with_interleaver(mut self, interleaver: Box<dyn Interleaver>) -> Self {
        self.interleaver = Some(interleaver);
        self
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Arrivals {
        match &self.plan {
            Plan::Fixed(order) => Arrivals::Order(order.clone()),
            Plan::Uniform(n) => {
                let mut order: Vec<usize> = (0..*n).collect();
                order.shuffle(rng);
                Arrivals::Order(order)
            }
            Plan::Iid { dist, weights, n } => Arrivals::Sampled(
                (0..*n)
                    .map(|_| match (dist, weights) {
                        (Distribution::UniformBase { m }, _) => Point::Base(rng.gen_range(0..*m)),
                        (Distribution::Weighted { support, .. }, Some(w)) => support[w.sample(rng)].clone(),
                        (Distribution::Weighted { .. }, None) => unreachable!("weighted plans carry an index"),
                    })
                    .collect(),
            ),
            Plan::Partial {
                clusters,
                random_subsets,
            } => {
                let sequences: Vec<Vec<usize>> = clusters
                    .iter()
                    .map(|c| {
                        if *random_subsets {
                            let mut members = c.members.clone();
                            members.shuffle(rng);
                            let (adv, rest) = members.split_at(c.adversarial_count);
                            let mut adv = adv.to_vec();
                            adv.sort_by_key(|d| c.by_distance.iter().position(|x| x == d));
                            slot_randomly(&adv, rest, rng)
                        } else {
                            slot_randomly(&c.adversarial, &c.random, rng)
                        }
                    })
                    .collect();
                let interleaver = self.interleaver.as_deref().unwrap_or(&ClusterBlocks);
                Arrivals::Order(interleaver.interleave(&sequences))
            }
        }
    }
}

/// Produces an online sequence for `instance` under `model`.
pub fn make_order<R: Rng + ?Sized>(
    instance: &Instance,
    model: &ArrivalModel,
    rng: &mut R,
) -> Result<Arrivals, ArrivalError> {
    Ok(ArrivalSampler::new(instance, model)?.sample(rng))
}

/// Places each random-order demand in a uniform slot `s` in
/// `0..=adversarial.len()` (before adversarial demand `s`, or after all of
/// them). Random demands sharing a slot appear in uniformly random order.
fn slot_randomly<R: Rng + ?Sized>(adversarial: &[usize], random: &[usize], rng: &mut R) -> Vec<usize> {
    let mut random = random.to_vec();
    random.shuffle(rng);
    let mut slotted: Vec<(usize, usize)> = random
        .into_iter()
        .map(|u| (rng.gen_range(0..=adversarial.len()), u))
        .collect();
    slotted.sort_by_key(|&(s, _)| s);
    let mut out = Vec::with_capacity(adversarial.len() + slotted.len());
    let mut it = slotted.into_iter().peekable();
    for s in 0..=adversarial.len() {
        while let Some(&(slot, u)) = it.peek() {
            if slot != s {
                break;
            }
            out.push(u);
            it.next();
        }
        if let Some(&a) = adversarial.get(s) {
            out.push(a);
        }
    }
    out
}

fn cluster_plans(
    instance: &Instance,
    rho: f64,
    subsets: Option<&[Vec<usize>]>,
) -> Result<Vec<ClusterPlan>, ArrivalError> {
    let clusters: Vec<Cluster> = match instance.clusters() {
        Some(c) => c.to_vec(),
        None => {
            let sol = offline::solve_default(instance).map_err(|e| ArrivalError::MissingClusters(e.to_string()))?;
            offline::clusters_of(&sol)
        }
    };
    if let Some(s) = subsets {
        if s.len() != clusters.len() {
            return Err(ArrivalError::Invalid(format!(
                "{} adversarial subsets given for {} clusters",
                s.len(),
                clusters.len()
            )));
        }
    }
    let space = instance.space();
    let demands = instance.demands();
    clusters
        .iter()
        .enumerate()
        .map(|(j, c)| {
            let mut by_distance = c.demand_indices.clone();
            by_distance.sort_by(|&a, &b| {
                let da = space.dist(&c.center, &demands[a]);
                let db = space.dist(&c.center, &demands[b]);
                db.total_cmp(&da).then(a.cmp(&b))
            });
            let count = adversarial_count(rho, c.demand_indices.len());
            let adversarial = match subsets {
                Some(s) => {
                    let chosen = &s[j];
                    if chosen.len() != count {
                        return Err(ArrivalError::Invalid(format!(
                            "cluster {j}: adversarial subset has {} demands, expected floor((1 - rho) * {}) = {count}",
                            chosen.len(),
                            c.demand_indices.len()
                        )));
                    }
                    if let Some(bad) = chosen.iter().find(|d| !c.demand_indices.contains(d)) {
                        return Err(ArrivalError::Invalid(format!(
                            "cluster {j}: demand {bad} is not a member"
                        )));
                    }
                    chosen.clone()
                }
                None => by_distance[..count].to_vec(),
            };
            let random = c
                .demand_indices
                .iter()
                .copied()
                .filter(|d| !adversarial.contains(d))
                .collect();
            Ok(ClusterPlan {
                members: c.demand_indices.clone(),
                adversarial,
                random,
                by_distance,
                adversarial_count: count,
            })
        })
        .collect()
}
