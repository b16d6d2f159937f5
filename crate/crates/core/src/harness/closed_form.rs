//! Predicted expected costs of the generated families.

use serde::Serialize;

use crate::algorithms::OpeningRule;
use crate::error::HarnessError;
use crate::instance::{fotakis_delta, star_delta, GeneratorParams};

/// How the predicted algorithm cost relates to the true expectation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Relation {
    Exact,
    /// The true expectation is at least the prediction.
    LowerBound,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ClosedForm {
    pub alg: f64,
    pub alg_relation: Relation,
    /// Cost of a feasible offline solution.
    pub opt_bound: f64,
    pub note: String,
}

impl ClosedForm {
    pub fn ratio(&self) -> f64 {
        self.alg / self.opt_bound
    }
}

/// Expected cost of one clique location that is not the first: each of its
/// `k` demands pays `g + (1 - g) delta` until one of them opens.
pub fn clique_location_cost(g: f64, delta: f64, k: usize) -> f64 {
    (g + (1.0 - g) * delta) * (1.0 - (1.0 - g).powi(k as i32)) / g
}

pub fn closed_form(family: GeneratorParams, rule: OpeningRule) -> Result<ClosedForm, HarnessError> {
    let none = || HarnessError::NoClosedForm(format!("{family} with rule {}", rule.kind_name()));
    match (family, rule) {
        (GeneratorParams::Star { k }, OpeningRule::ClampedLinear { .. } | OpeningRule::PiecewiseLinear { .. }) => {
            // every arrival after the first is 2 delta from every open facility
            let delta = star_delta(k);
            let g = rule.probability(2.0 * delta, 1.0);
            Ok(ClosedForm {
                alg: 1.0 + (k - 1) as f64 * (g + (1.0 - g) * 2.0 * delta),
                alg_relation: Relation::Exact,
                opt_bound: 1.0 + k as f64 * delta,
                note: "1 + (k-1)(g(2d) + (1 - g(2d)) 2d); OPT opens the center".into(),
            })
        }
        (
            GeneratorParams::Clique { delta, k },
            OpeningRule::ClampedLinear { .. } | OpeningRule::PiecewiseLinear { .. },
        ) => {
            let g = rule.probability(delta, 1.0);
            Ok(ClosedForm {
                alg: 1.0 + (k - 1) as f64 * clique_location_cost(g, delta, k),
                alg_relation: Relation::Exact,
                opt_bound: k as f64,
                note: "1 + (k-1)(g + (1-g)d)(1 - (1-g)^k)/g; OPT opens every point".into(),
            })
        }
        (GeneratorParams::SubsetIid { n }, _) => Ok(ClosedForm {
            alg: (n - 1) as f64,
            alg_relation: Relation::LowerBound,
            opt_bound: 1.0 + n as f64 / 2.0,
            note: "any online algorithm pays at least n-1; a covering subset point costs 1 + n/2".into(),
        }),
        (GeneratorParams::Fotakis { n }, OpeningRule::FotakisPotential) => {
            let delta = fotakis_delta(n);
            let m = (n - 1) as f64;
            Ok(ClosedForm {
                alg: 1.0 + m * 1.5 * delta - m * delta * delta / 4.0,
                alg_relation: Relation::Exact,
                opt_bound: 1.0 + n as f64 * delta / 2.0,
                note: "adversarial order and tie-break: 1 + (n-1) 3d/2 - (n-1) d^2/4".into(),
            })
        }
        _ => Err(none()),
    }
}

/// Facilities the potential algorithm opens on the Fotakis instance.
pub fn fotakis_facilities(n: usize) -> usize {
    let t = (((n - 1) as f64).sqrt() / 2.0).round() as usize;
    // (n-1) delta / 2 = sqrt(n-1) / 2 = t
    1 + t
}
