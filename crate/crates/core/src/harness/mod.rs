//! Monte Carlo estimation of expected cost and competitive ratio.
//!
//! Trial `i` of an experiment seeded with `s` draws everything (arrival
//! order, algorithm coins) from stream `i` of a ChaCha8 generator seeded
//! with `s`, so reports do not depend on thread scheduling.

mod bounds;
mod closed_form;
mod instrument;
mod report;
mod stats;

use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::algorithms::{FotakisMode, FotakisRunner, OpeningRule, RoflRunner, RoundEvent, RoundObserver, TieBreak};
use crate::arrival::{ArrivalModel, ArrivalSampler, ArrivalSpec, Arrivals};
use crate::error::HarnessError;
use crate::instance::{generate, json_error, GeneratorParams, Instance, OptKind};
use crate::offline;
use crate::rng::{bootstrap_rng, trial_rng};

pub use bounds::{
    bound_value, check_bound, BoundCheck, BoundKind, BoundParams, ABS_TOLERANCE, BOUND_NAMES, STDERR_MULTIPLIER,
};
pub use closed_form::{clique_location_cost, closed_form, fotakis_facilities, ClosedForm, Relation};
pub use instrument::{
    analysis_clusters, instrument_analysis, instrument_trials, ClusterSummary, ClusterTrial, CoinFlip,
    InstrumentationSummary,
};
pub use report::{write_csv, CsvRow, HEADER as CSV_HEADER};
pub use stats::{pairwise_sum, ratio_of_means_bootstrap, RatioEstimate, Summary};

pub const BOOTSTRAP_RESAMPLES: usize = 1000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OptMode {
    /// Offline solver (per trial for i.i.d. arrivals).
    #[default]
    Exact,
    /// The instance's recorded optimum bound or the family's formula.
    Analytic,
}

#[derive(Debug, Clone, PartialEq)]
pub enum InstanceSource {
    Generator(GeneratorParams),
    Given(Box<Instance>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentSpec {
    pub id: String,
    pub instance: InstanceSource,
    pub arrival: ArrivalModel,
    pub rule: OpeningRule,
    pub tie_break: TieBreak,
    pub trials: usize,
    pub seed: u64,
    pub opt_mode: OptMode,
    pub instrumentation: bool,
    /// Bounds to check; `None` picks the ones matching the arrival model.
    pub bounds: Option<Vec<String>>,
}

impl ExperimentSpec {
    pub fn new(instance: InstanceSource, arrival: ArrivalModel, rule: OpeningRule) -> Self {
        Self {
            id: "experiment".into(),
            instance,
            arrival,
            rule,
            tie_break: TieBreak::default(),
            trials: 1000,
            seed: 0,
            opt_mode: OptMode::default(),
            instrumentation: false,
            bounds: None,
        }
    }

    pub fn trials(mut self, trials: usize) -> Self {
        self.trials = trials;
        self
    }

    pub fn seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn opt_mode(mut self, mode: OptMode) -> Self {
        self.opt_mode = mode;
        self
    }

    pub fn id(mut self, id: impl Into<String>) -> Self {
        self.id = id.into();
        self
    }
}

/// JSON form of an experiment. Exactly one of `instance_path`, `instance`
/// (an inline instance document) and `generator` must be present.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentDoc {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub id: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub instance_path: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub instance: Option<serde_json::Value>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub generator: Option<GeneratorParams>,
    pub arrival: ArrivalSpec,
    pub rule: OpeningRule,
    #[serde(default)]
    pub tie_break: TieBreak,
    #[serde(default = "default_trials")]
    pub trials: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub opt_mode: OptMode,
    #[serde(default)]
    pub instrumentation: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bounds: Option<Vec<String>>,
}

fn default_trials() -> usize {
    1000
}

pub fn parse_experiment(text: &str) -> Result<ExperimentDoc, HarnessError> {
    serde_json::from_str(text).map_err(|e| HarnessError::Instance(json_error(e)))
}

impl ExperimentDoc {
    /// Resolves the instance source; `load` reads `instance_path`.
    pub fn into_spec(
        self,
        load: &dyn Fn(&str) -> Result<Instance, HarnessError>,
    ) -> Result<ExperimentSpec, HarnessError> {
        let instance = match (self.instance_path, self.instance, self.generator) {
            (Some(path), None, None) => InstanceSource::Given(Box::new(load(&path)?)),
            (None, Some(doc), None) => InstanceSource::Given(Box::new(Instance::from_json(&doc.to_string())?)),
            (None, None, Some(params)) => InstanceSource::Generator(params),
            _ => {
                return Err(HarnessError::Spec(
                    "give exactly one of instance_path, instance, generator".into(),
                ))
            }
        };
        let spec = ExperimentSpec {
            id: self.id.unwrap_or_else(|| "experiment".into()),
            arrival: arrival_model(&self.arrival, &resolve(&instance)?)?,
            instance,
            rule: self.rule,
            tie_break: self.tie_break,
            trials: self.trials,
            seed: self.seed,
            opt_mode: self.opt_mode,
            instrumentation: self.instrumentation,
            bounds: self.bounds,
        };
        validate(&spec)?;
        Ok(spec)
    }
}

/// Converts the JSON arrival fragment; an adversarial model without an
/// explicit order uses the instance's canonical demand order.
pub fn arrival_model(spec: &ArrivalSpec, instance: &Instance) -> Result<ArrivalModel, HarnessError> {
    let mut spec = spec.clone();
    if spec.model == "adversarial" && spec.order.is_none() {
        spec.order = Some((0..instance.demands().len()).collect());
    }
    Ok(ArrivalModel::try_from(&spec)?)
}

fn resolve(source: &InstanceSource) -> Result<Instance, HarnessError> {
    match source {
        InstanceSource::Generator(p) => Ok(generate(*p)?),
        InstanceSource::Given(i) => Ok((**i).clone()),
    }
}

fn validate(spec: &ExperimentSpec) -> Result<(), HarnessError> {
    if spec.trials == 0 {
        return Err(HarnessError::Spec("trials must be at least 1".into()));
    }
    spec.rule.validate()?;
    if let Some(names) = &spec.bounds {
        for name in names {
            if !BOUND_NAMES.contains(&name.as_str()) {
                return Err(HarnessError::UnknownBound(name.clone()));
            }
        }
    }
    if spec.instrumentation && (spec.rule.q().is_none() || spec.arrival != ArrivalModel::UniformRandom) {
        return Err(HarnessError::Spec(
            "instrumentation needs a linear rule and uniform random order".into(),
        ));
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EstimateReport {
    pub experiment_id: String,
    pub family: Option<String>,
    pub params: Option<String>,
    pub rule: OpeningRule,
    pub rule_kind: String,
    pub q: Option<f64>,
    pub tie_break: Option<TieBreak>,
    pub arrival_model: String,
    pub rho: Option<f64>,
    pub interleaver: Option<String>,
    pub trials: usize,
    pub seed: u64,
    /// How per-trial randomness is derived from `seed`.
    pub trial_streams: String,
    pub mean_cost: f64,
    pub stderr: f64,
    pub ci95_low: f64,
    pub ci95_high: f64,
    /// OPT, or the mean per-trial OPT for i.i.d. arrivals.
    pub opt_value: f64,
    pub opt_kind: OptKind,
    pub opt_note: String,
    pub ratio: f64,
    pub ratio_stderr: f64,
    pub ratio_ci_low: f64,
    pub ratio_ci_high: f64,
    pub closed_form: Option<ClosedForm>,
    pub bound_checks: Vec<BoundCheck>,
    pub instrumentation: Option<InstrumentationSummary>,
    #[serde(skip)]
    pub trial_costs: Vec<f64>,
    #[serde(skip)]
    pub trial_opts: Option<Vec<f64>>,
}

impl EstimateReport {
    pub fn summary(&self) -> Summary {
        Summary::of(&self.trial_costs)
    }

    /// Whether the mean cost is within `3 stderr` of an exact closed form,
    /// or not below `prediction - 3 stderr` for a lower-bound form.
    pub fn matches_closed_form(&self) -> Option<bool> {
        let c = self.closed_form.as_ref()?;
        let tol = STDERR_MULTIPLIER * self.stderr + ABS_TOLERANCE;
        Some(match c.alg_relation {
            Relation::Exact => (self.mean_cost - c.alg).abs() <= tol,
            Relation::LowerBound => self.mean_cost >= c.alg - tol,
        })
    }
}

/// Bounds applying to an experiment when none are named.
pub fn default_bounds(arrival: &ArrivalModel, rule: OpeningRule, family: Option<GeneratorParams>) -> Vec<String> {
    let linear = rule.q().is_some();
    let names: &[&str] = match arrival {
        ArrivalModel::UniformRandom if linear => &["random_order"],
        ArrivalModel::PartialRandom { .. } if linear => &["partial_adversarial"],
        ArrivalModel::PartialRandomRandomAdv { .. } if linear => &["partial_random_adversarial"],
        ArrivalModel::Iid { .. } if matches!(family, Some(GeneratorParams::SubsetIid { .. })) => &["iid_lower"],
        _ => &[],
    };
    names.iter().map(|s| s.to_string()).collect()
}

enum Runner<'a> {
    Rofl(RoflRunner<'a>),
    Fotakis(FotakisRunner<'a>),
}

impl<'a> Runner<'a> {
    fn new(instance: &'a Instance, rule: OpeningRule, tie_break: TieBreak) -> Result<Self, HarnessError> {
        Ok(match rule {
            OpeningRule::FotakisPotential => {
                Runner::Fotakis(FotakisRunner::new(instance, tie_break, FotakisMode::Cached))
            }
            _ => Runner::Rofl(RoflRunner::new(instance, rule)?),
        })
    }

    fn run<O: RoundObserver>(
        &mut self,
        order: &[usize],
        rng: &mut crate::rng::SimRng,
        obs: &mut O,
    ) -> Result<f64, HarnessError> {
        Ok(match self {
            Runner::Rofl(r) => r.run_observed(order, rng, obs)?.total(),
            Runner::Fotakis(r) => r.run_observed(order, obs)?.total(),
        })
    }
}

fn hint(e: crate::error::OfflineError) -> HarnessError {
    HarnessError::Offline(e)
}

pub fn estimate(spec: &ExperimentSpec) -> Result<EstimateReport, HarnessError> {
    validate(spec)?;
    let instance = resolve(&spec.instance)?;
    let family = instance.family();
    let sampler = ArrivalSampler::new(&instance, &spec.arrival)?;
    let iid = matches!(spec.arrival, ArrivalModel::Iid { .. });
    let exact_per_trial = iid && spec.opt_mode == OptMode::Exact;
    Runner::new(&instance, spec.rule, spec.tie_break)?;

    let outcomes: Vec<(f64, Option<f64>)> = (0..spec.trials as u64)
        .into_par_iter()
        .map_init(
            || Runner::new(&instance, spec.rule, spec.tie_break).expect("validated above"),
            |runner, t| -> Result<(f64, Option<f64>), HarnessError> {
                let mut rng = trial_rng(spec.seed, t);
                match sampler.sample(&mut rng) {
                    Arrivals::Order(order) => Ok((runner.run(&order, &mut rng, &mut ())?, None)),
                    Arrivals::Sampled(points) => {
                        let drawn = instance.with_demands(points)?;
                        let order: Vec<usize> = (0..drawn.demands().len()).collect();
                        let cost = Runner::new(&drawn, spec.rule, spec.tie_break)?.run(&order, &mut rng, &mut ())?;
                        let opt = if exact_per_trial {
                            Some(offline::solve_default(&drawn).map_err(hint)?.total)
                        } else {
                            None
                        };
                        Ok((cost, opt))
                    }
                }
            },
        )
        .collect::<Result<_, _>>()?;

    let costs: Vec<f64> = outcomes.iter().map(|o| o.0).collect();
    let summary = Summary::of(&costs);
    let (ci95_low, ci95_high) = summary.ci95();

    let closed = family
        .and_then(|f| closed_form(f, spec.rule).ok())
        .filter(|_| closed_form_applies(spec, &instance));
    let (opt_value, opt_kind, opt_note, ratio) = if exact_per_trial {
        let opts: Vec<f64> = outcomes.iter().map(|o| o.1.expect("per-trial optimum")).collect();
        let r = ratio_of_means_bootstrap(&costs, &opts, BOOTSTRAP_RESAMPLES, &mut bootstrap_rng(spec.seed));
        (
            pairwise_sum(&opts) / opts.len() as f64,
            OptKind::Exact,
            "mean of per-trial exact optima".to_string(),
            r,
        )
    } else {
        let (value, kind, note) = match spec.opt_mode {
            OptMode::Exact => {
                let sol = offline::solve_default(&instance).map_err(hint)?;
                (sol.total, OptKind::Exact, "offline exact solver".to_string())
            }
            OptMode::Analytic => analytic_opt(&instance, spec.rule)?,
        };
        let r = RatioEstimate {
            ratio: summary.mean / value,
            ci_low: ci95_low / value,
            ci_high: ci95_high / value,
            stderr: summary.stderr / value,
        };
        (value, kind, note, r)
    };

    let names = spec
        .bounds
        .clone()
        .unwrap_or_else(|| default_bounds(&spec.arrival, spec.rule, family));
    let params = BoundParams {
        q: spec.rule.q(),
        rho: spec.arrival.rho(),
        n: match spec.arrival {
            ArrivalModel::Iid { n, .. } => Some(n),
            _ => None,
        },
    };
    let bound_checks = names
        .iter()
        .map(|name| check_bound(name, params, ratio.ratio, ratio.stderr))
        .collect::<Result<Vec<_>, _>>()?;

    let instrumentation = if spec.instrumentation {
        Some(instrument_analysis(&instance, spec.rule, spec.trials, spec.seed)?)
    } else {
        None
    };

    Ok(EstimateReport {
        experiment_id: spec.id.clone(),
        family: family.map(|f| f.family_name().to_string()),
        params: family.map(|f| f.params_string()),
        rule: spec.rule,
        rule_kind: spec.rule.kind_name().to_string(),
        q: spec.rule.q(),
        tie_break: (spec.rule == OpeningRule::FotakisPotential).then_some(spec.tie_break),
        arrival_model: spec.arrival.name().to_string(),
        rho: spec.arrival.rho(),
        interleaver: spec.arrival.interleaver().map(str::to_string),
        trials: spec.trials,
        seed: spec.seed,
        trial_streams: format!("trial i uses stream i of ChaCha8 seeded with {}", spec.seed),
        mean_cost: summary.mean,
        stderr: summary.stderr,
        ci95_low,
        ci95_high,
        opt_value,
        opt_kind,
        opt_note,
        ratio: ratio.ratio,
        ratio_stderr: ratio.stderr,
        ratio_ci_low: ratio.ci_low,
        ratio_ci_high: ratio.ci_high,
        closed_form: closed,
        bound_checks,
        instrumentation,
        trial_costs: costs,
        trial_opts: exact_per_trial.then(|| outcomes.iter().map(|o| o.1.expect("per-trial optimum")).collect()),
    })
}

/// The formulas assume the family's canonical instance and, for the
/// potential algorithm, the adversarial order and tie-break.
fn closed_form_applies(spec: &ExperimentSpec, instance: &Instance) -> bool {
    match instance.family() {
        Some(GeneratorParams::Fotakis { n }) => {
            spec.tie_break == TieBreak::AdversarialSubset
                && spec.arrival
                    == ArrivalModel::Adversarial {
                        order: (0..n).collect(),
                    }
        }
        Some(GeneratorParams::SubsetIid { n }) => matches!(spec.arrival, ArrivalModel::Iid { n: m, .. } if m == n),
        Some(_) => !matches!(spec.arrival, ArrivalModel::Iid { .. }),
        None => false,
    }
}

fn analytic_opt(instance: &Instance, rule: OpeningRule) -> Result<(f64, OptKind, String), HarnessError> {
    if let Some(k) = instance.known_opt() {
        return Ok((k.value, k.kind, k.note.clone()));
    }
    if let Some(f) = instance.family() {
        if let Ok(c) = closed_form(f, rule) {
            return Ok((c.opt_bound, OptKind::UpperBound, c.note));
        }
    }
    Err(HarnessError::NoClosedForm(
        "instance has no recorded optimum; use --opt exact".into(),
    ))
}

/// Sweep axis with its grid values.
#[derive(Debug, Clone, PartialEq)]
pub enum SweepAxis {
    Q(Vec<f64>),
    Rho(Vec<f64>),
    K(Vec<usize>),
}

/// One estimate per grid point, in grid order.
pub fn sweep(base: &ExperimentSpec, axis: &SweepAxis) -> Result<Vec<EstimateReport>, HarnessError> {
    let specs: Vec<ExperimentSpec> = match axis {
        SweepAxis::Q(values) => values
            .iter()
            .map(|&q| {
                let rule = match base.rule {
                    OpeningRule::ClampedLinear { .. } => OpeningRule::clamped(q),
                    OpeningRule::PiecewiseLinear { .. } => OpeningRule::piecewise(q),
                    OpeningRule::FotakisPotential => {
                        return Err(HarnessError::Spec("a q sweep needs a linear rule".into()))
                    }
                };
                Ok(ExperimentSpec {
                    rule,
                    id: format!("{}/q={q}", base.id),
                    ..base.clone()
                })
            })
            .collect::<Result<_, HarnessError>>()?,
        SweepAxis::Rho(values) => values
            .iter()
            .map(|&rho| {
                let arrival = match &base.arrival {
                    ArrivalModel::PartialRandom {
                        adversarial_subsets: None,
                        interleaver,
                        ..
                    } => ArrivalModel::PartialRandom {
                        rho,
                        adversarial_subsets: None,
                        interleaver: interleaver.clone(),
                    },
                    ArrivalModel::PartialRandomRandomAdv { interleaver, .. } => ArrivalModel::PartialRandomRandomAdv {
                        rho,
                        interleaver: interleaver.clone(),
                    },
                    _ => return Err(HarnessError::Spec("a rho sweep needs a partial arrival model".into())),
                };
                Ok(ExperimentSpec {
                    arrival,
                    id: format!("{}/rho={rho}", base.id),
                    ..base.clone()
                })
            })
            .collect::<Result<_, HarnessError>>()?,
        SweepAxis::K(values) => values
            .iter()
            .map(|&k| {
                let family = match &base.instance {
                    InstanceSource::Generator(p) => Some(*p),
                    InstanceSource::Given(i) => i.family(),
                };
                let params = match family {
                    Some(GeneratorParams::Star { .. }) => GeneratorParams::Star { k },
                    Some(GeneratorParams::Clique { delta, .. }) => GeneratorParams::Clique { delta, k },
                    _ => return Err(HarnessError::Spec("a k sweep needs a star or clique generator".into())),
                };
                Ok(ExperimentSpec {
                    instance: InstanceSource::Generator(params),
                    id: format!("{}/k={k}", base.id),
                    ..base.clone()
                })
            })
            .collect::<Result<_, HarnessError>>()?,
    };
    specs.iter().map(estimate).collect()
}

/// Observed mean service cost (facility cost paid plus assignment cost) of
/// the rounds that found their nearest facility at one distance.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ServiceCostBucket {
    pub distance: f64,
    pub probability: f64,
    /// `p f + (1 - p) d`.
    pub predicted: f64,
    pub observed: Summary,
}

struct ServiceCosts<'a> {
    buckets: &'a mut BTreeMap<u64, (f64, f64, Vec<f64>)>,
}

impl RoundObserver for ServiceCosts<'_> {
    fn observe(&mut self, e: &RoundEvent<'_>) {
        let r = e.record;
        let entry =
            self.buckets
                .entry(r.distance.to_bits())
                .or_insert((r.distance, r.probability.unwrap_or(0.0), Vec::new()));
        entry.2.push(r.facility_cost_paid + r.assignment_cost_paid);
    }
}

/// Groups every round of `trials` uniformly random runs by its pre-arrival
/// nearest distance.
pub fn service_cost_by_distance(
    instance: &Instance,
    rule: OpeningRule,
    trials: usize,
    seed: u64,
) -> Result<Vec<ServiceCostBucket>, HarnessError> {
    let sampler = ArrivalSampler::new(instance, &ArrivalModel::UniformRandom)?;
    let mut runner = RoflRunner::new(instance, rule)?;
    let mut buckets = BTreeMap::new();
    for t in 0..trials as u64 {
        let mut rng = trial_rng(seed, t);
        let Arrivals::Order(order) = sampler.sample(&mut rng) else {
            unreachable!("uniform orders are permutations")
        };
        runner.run_observed(&order, &mut rng, &mut ServiceCosts { buckets: &mut buckets })?;
    }
    let f = instance.facility_cost();
    let mut out: Vec<ServiceCostBucket> = buckets
        .into_values()
        .map(|(distance, probability, costs)| ServiceCostBucket {
            distance,
            probability,
            predicted: if distance.is_finite() {
                probability * f + (1.0 - probability) * distance
            } else {
                f
            },
            observed: Summary::of(&costs),
        })
        .collect();
    out.sort_by(|a, b| a.distance.total_cmp(&b.distance));
    Ok(out)
}
