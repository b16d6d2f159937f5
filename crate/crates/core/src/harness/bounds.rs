//! Competitive-ratio bounds and their checks against estimates.

use serde::Serialize;

use crate::error::HarnessError;

/// Slack added to every bound comparison besides the Monte Carlo noise.
pub const ABS_TOLERANCE: f64 = 1e-9;
/// Bound comparisons allow this many standard errors of noise.
pub const STDERR_MULTIPLIER: f64 = 3.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum BoundKind {
    /// The ratio must not exceed the value.
    Upper,
    /// The ratio must reach the value.
    Lower,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BoundCheck {
    pub name: String,
    pub kind: BoundKind,
    pub value: f64,
    pub empirical: f64,
    pub tolerance: f64,
    pub pass: bool,
}

/// Parameters a bound formula may need.
#[derive(Debug, Clone, Copy, Default)]
pub struct BoundParams {
    pub q: Option<f64>,
    pub rho: Option<f64>,
    /// Demands per trial (i.i.d. construction).
    pub n: Option<usize>,
}

pub const BOUND_NAMES: [&str; 4] = [
    "random_order",
    "partial_adversarial",
    "partial_random_adversarial",
    "iid_lower",
];

/// Value and direction of the named bound at `params`.
pub fn bound_value(name: &str, params: BoundParams) -> Result<(BoundKind, f64), HarnessError> {
    let need = |what: &str, v: Option<f64>| v.ok_or_else(|| HarnessError::Spec(format!("bound {name:?} needs {what}")));
    match name {
        "random_order" => {
            let q = need("q", params.q)?;
            Ok((BoundKind::Upper, (1.0 + q) * f64::max(2.0, 1.0 / q)))
        }
        "partial_adversarial" => {
            let q = need("q", params.q)?;
            let rho = need("rho", params.rho)?;
            Ok((
                BoundKind::Upper,
                (1.0 + q) * f64::max(3.0 / rho - 1.0, (2.0 / rho - 1.0) / q),
            ))
        }
        "partial_random_adversarial" => {
            let q = need("q", params.q)?;
            let rho = need("rho", params.rho)?;
            Ok((
                BoundKind::Upper,
                (1.0 + q) * f64::max(4.0 - 2.0 * rho, (2.0 / rho - 1.0) / q),
            ))
        }
        "iid_lower" => {
            let n = need("n", params.n.map(|n| n as f64))?;
            Ok((BoundKind::Lower, 2.0 - 6.0 / (n + 2.0)))
        }
        other => Err(HarnessError::UnknownBound(other.to_string())),
    }
}

/// Checks an empirical ratio with standard error `stderr` against the named
/// bound.
pub fn check_bound(name: &str, params: BoundParams, ratio: f64, stderr: f64) -> Result<BoundCheck, HarnessError> {
    let (kind, value) = bound_value(name, params)?;
    let tolerance = STDERR_MULTIPLIER * stderr + ABS_TOLERANCE;
    let pass = match kind {
        BoundKind::Upper => ratio <= value + tolerance,
        BoundKind::Lower => ratio >= value - tolerance,
    };
    Ok(BoundCheck {
        name: name.to_string(),
        kind,
        value,
        empirical: ratio,
        tolerance,
        pass,
    })
}
