//! Observation-only replay of the cluster analysis: analysis coins, the
//! first balanced opening `T` of every optimal cluster, and the quantities
//! compared in the expected-distance and pre-`T` opening-probability
//! inequalities.

use rand::Rng;
use rayon::prelude::*;
use serde::Serialize;

use super::bounds::{ABS_TOLERANCE, STDERR_MULTIPLIER};
use super::stats::Summary;
use crate::algorithms::{OpeningRule, RoflRunner, RoundEvent, RoundObserver};
use crate::arrival::{ArrivalModel, ArrivalSampler, Arrivals};
use crate::error::HarnessError;
use crate::instance::{Cluster, Instance};
use crate::metric::Point;
use crate::offline;
use crate::rng::{analysis_rng, trial_rng};

/// One analysis coin, flipped when the algorithm opened at an in-cluster
/// demand before the cluster's first balanced opening.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CoinFlip {
    pub round: usize,
    pub demand: usize,
    /// Remaining in-cluster demand at most as far from the center with the
    /// smallest opening probability.
    pub w: usize,
    pub heads_probability: f64,
    pub heads: bool,
}

/// What one trial looked like from one cluster's point of view.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ClusterTrial {
    /// Round of the first balanced opening; `None` when there is none.
    pub t: Option<usize>,
    /// `|C_T|`: in-cluster demands arriving at round `T` or later (0 when
    /// there is no balanced opening).
    pub remaining_at_t: usize,
    /// `d*` of the balanced facility (0 when there is none).
    pub dstar_vt: f64,
    /// Sum of `d*` over `C_T`.
    pub dstar_remaining: f64,
    /// Sum of opening probabilities of in-cluster demands arriving up to and
    /// including round `T` (the whole cluster when there is none).
    pub p_until_t: f64,
    /// Sum of `d*` over the same demands.
    pub dstar_until_t: f64,
    pub coins: Vec<CoinFlip>,
}

struct ClusterInfo {
    center: Point,
    members: Vec<usize>,
}

struct Observer<'a, R> {
    rule: OpeningRule,
    f: f64,
    clusters: &'a [ClusterInfo],
    cluster_of: &'a [usize],
    dstar: &'a [f64],
    location_of: &'a [usize],
    alive: Vec<bool>,
    trials: Vec<ClusterTrial>,
    rng: R,
}

impl<R: Rng> RoundObserver for Observer<'_, R> {
    fn observe(&mut self, e: &RoundEvent<'_>) {
        let v = e.demand_index;
        let c = self.cluster_of[v];
        let state = &mut self.trials[c];
        if state.t.is_none() {
            let p_v = e.record.probability.expect("linear rules record probabilities");
            state.p_until_t += p_v;
            state.dstar_until_t += self.dstar[v];
            if e.record.opened.is_some() {
                let (w, p_w) = self.clusters[c]
                    .members
                    .iter()
                    .filter(|&&u| self.alive[u] && self.dstar[u] <= self.dstar[v])
                    .map(|&u| (u, self.rule.probability(e.before.distance(self.location_of[u]), self.f)))
                    .fold((v, p_v), |best, cand| {
                        if cand.1 < best.1 || (cand.1 == best.1 && cand.0 < best.0) {
                            cand
                        } else {
                            best
                        }
                    });
                let heads_probability = p_w / p_v;
                let heads = self.rng.gen::<f64>() < heads_probability;
                state.coins.push(CoinFlip {
                    round: e.round,
                    demand: v,
                    w,
                    heads_probability,
                    heads,
                });
                if heads {
                    let remaining: Vec<usize> = self.clusters[c]
                        .members
                        .iter()
                        .copied()
                        .filter(|&u| self.alive[u])
                        .collect();
                    state.t = Some(e.round);
                    state.remaining_at_t = remaining.len();
                    state.dstar_vt = self.dstar[v];
                    state.dstar_remaining = remaining.iter().map(|&u| self.dstar[u]).sum();
                }
            }
        }
        self.alive[v] = false;
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ClusterSummary {
    pub center: Point,
    pub size: usize,
    /// Fraction of trials with a balanced opening.
    pub balanced_rate: f64,
    /// `|C_T| d*_{v_T}`.
    pub lhs_expected_distance: Summary,
    /// `sum_{C_T} d*`.
    pub rhs_expected_distance: Summary,
    /// Paired difference of the two; its mean should be at most 0.
    pub expected_distance_gap: Summary,
    pub expected_distance_pass: bool,
    pub p_until_t: Summary,
    pub dstar_until_t: Summary,
    /// `sum p - 2q sum d*` over demands up to `T`; mean should be at most 1.
    pub opening_gap: Summary,
    pub opening_pass: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct InstrumentationSummary {
    pub rule: OpeningRule,
    pub trials: usize,
    pub seed: u64,
    pub clusters: Vec<ClusterSummary>,
}

impl InstrumentationSummary {
    pub fn all_pass(&self) -> bool {
        self.clusters.iter().all(|c| c.expected_distance_pass && c.opening_pass)
    }
}

/// Clusters to analyse: the instance's own, else those of an exact optimum.
pub fn analysis_clusters(instance: &Instance) -> Result<Vec<Cluster>, HarnessError> {
    match instance.clusters() {
        Some(c) => Ok(c.to_vec()),
        None => Ok(offline::clusters_of(&offline::solve_default(instance)?)),
    }
}

/// Runs `trials` uniformly random orders with the same streams as
/// [`super::estimate`] and returns every cluster's per-trial record.
pub fn instrument_trials(
    instance: &Instance,
    rule: OpeningRule,
    trials: usize,
    seed: u64,
) -> Result<Vec<Vec<ClusterTrial>>, HarnessError> {
    if rule.q().is_none() {
        return Err(HarnessError::Spec("instrumentation needs a linear opening rule".into()));
    }
    let clusters: Vec<ClusterInfo> = analysis_clusters(instance)?
        .into_iter()
        .map(|c| ClusterInfo {
            center: c.center,
            members: c.demand_indices,
        })
        .collect();
    let demands = instance.demands();
    let space = instance.space();
    let mut cluster_of = vec![0; demands.len()];
    let mut dstar = vec![0.0; demands.len()];
    for (j, c) in clusters.iter().enumerate() {
        for &u in &c.members {
            cluster_of[u] = j;
            dstar[u] = space.distance(&c.center, &demands[u]).map_err(offline_metric)? / instance.facility_cost();
        }
    }
    let probe = RoflRunner::new(instance, rule)?;
    let location_of: Vec<usize> = (0..demands.len()).map(|i| probe.location_of(i)).collect();
    let sampler = ArrivalSampler::new(instance, &ArrivalModel::UniformRandom)?;

    (0..trials as u64)
        .into_par_iter()
        .map_init(
            || RoflRunner::new(instance, rule).expect("rule validated above"),
            |runner, t| {
                let mut rng = trial_rng(seed, t);
                let Arrivals::Order(order) = sampler.sample(&mut rng) else {
                    unreachable!("uniform orders are permutations")
                };
                let mut obs = Observer {
                    rule,
                    f: instance.facility_cost(),
                    clusters: &clusters,
                    cluster_of: &cluster_of,
                    dstar: &dstar,
                    location_of: &location_of,
                    alive: vec![true; demands.len()],
                    trials: clusters
                        .iter()
                        .map(|_| ClusterTrial {
                            t: None,
                            remaining_at_t: 0,
                            dstar_vt: 0.0,
                            dstar_remaining: 0.0,
                            p_until_t: 0.0,
                            dstar_until_t: 0.0,
                            coins: Vec::new(),
                        })
                        .collect(),
                    rng: analysis_rng(seed, t),
                };
                runner.run_observed(&order, &mut rng, &mut obs)?;
                Ok(obs.trials)
            },
        )
        .collect()
}

fn offline_metric(e: crate::error::MetricError) -> HarnessError {
    HarnessError::Offline(e.into())
}

/// Per-cluster means, standard errors and pass/fail of both inequalities.
pub fn instrument_analysis(
    instance: &Instance,
    rule: OpeningRule,
    trials: usize,
    seed: u64,
) -> Result<InstrumentationSummary, HarnessError> {
    let per_trial = instrument_trials(instance, rule, trials, seed)?;
    let q = rule.q().expect("checked by instrument_trials");
    let clusters = analysis_clusters(instance)?;
    let summaries = clusters
        .iter()
        .enumerate()
        .map(|(j, c)| {
            let col = |f: &dyn Fn(&ClusterTrial) -> f64| -> Vec<f64> { per_trial.iter().map(|t| f(&t[j])).collect() };
            let lhs = col(&|t| t.remaining_at_t as f64 * t.dstar_vt);
            let rhs = col(&|t| t.dstar_remaining);
            let gap: Vec<f64> = lhs.iter().zip(&rhs).map(|(a, b)| a - b).collect();
            let p = col(&|t| t.p_until_t);
            let d = col(&|t| t.dstar_until_t);
            let opening: Vec<f64> = p.iter().zip(&d).map(|(p, d)| p - 2.0 * q * d).collect();
            let gap_s = Summary::of(&gap);
            let opening_s = Summary::of(&opening);
            ClusterSummary {
                center: c.center.clone(),
                size: c.demand_indices.len(),
                balanced_rate: per_trial.iter().filter(|t| t[j].t.is_some()).count() as f64
                    / per_trial.len().max(1) as f64,
                lhs_expected_distance: Summary::of(&lhs),
                rhs_expected_distance: Summary::of(&rhs),
                expected_distance_gap: gap_s,
                expected_distance_pass: gap_s.mean <= STDERR_MULTIPLIER * gap_s.stderr + ABS_TOLERANCE,
                p_until_t: Summary::of(&p),
                dstar_until_t: Summary::of(&d),
                opening_gap: opening_s,
                opening_pass: opening_s.mean <= 1.0 + STDERR_MULTIPLIER * opening_s.stderr + ABS_TOLERANCE,
            }
        })
        .collect();
    Ok(InstrumentationSummary {
        rule,
        trials,
        seed,
        clusters: summaries,
    })
}
