use rand::Rng;
use serde::Serialize;

/// Mean and standard error of a sample.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Summary {
    pub n: usize,
    pub mean: f64,
    /// Sample standard deviation over `sqrt(n)`; 0 for a single value.
    pub stderr: f64,
}

impl Summary {
    pub fn of(values: &[f64]) -> Self {
        let n = values.len();
        if n == 0 {
            return Summary {
                n,
                mean: f64::NAN,
                stderr: f64::NAN,
            };
        }
        let mean = pairwise_sum(values) / n as f64;
        if n == 1 {
            return Summary { n, mean, stderr: 0.0 };
        }
        let sq: Vec<f64> = values.iter().map(|v| (v - mean).powi(2)).collect();
        let var = pairwise_sum(&sq) / (n - 1) as f64;
        Summary {
            n,
            mean,
            stderr: (var / n as f64).sqrt(),
        }
    }

    pub fn ci95(&self) -> (f64, f64) {
        (self.mean - 1.96 * self.stderr, self.mean + 1.96 * self.stderr)
    }
}

/// Pairwise (cascade) summation in index order.
pub fn pairwise_sum(values: &[f64]) -> f64 {
    const BLOCK: usize = 64;
    if values.len() <= BLOCK {
        return values.iter().sum();
    }
    let mid = values.len() / 2;
    pairwise_sum(&values[..mid]) + pairwise_sum(&values[mid..])
}

/// `mean(num) / mean(den)` over paired samples with a percentile bootstrap
/// interval and the bootstrap standard deviation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RatioEstimate {
    pub ratio: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    pub stderr: f64,
}

pub fn ratio_of_means_bootstrap<R: Rng + ?Sized>(
    num: &[f64],
    den: &[f64],
    resamples: usize,
    rng: &mut R,
) -> RatioEstimate {
    assert_eq!(num.len(), den.len(), "bootstrap needs paired samples");
    let n = num.len();
    let ratio = pairwise_sum(num) / pairwise_sum(den);
    if n < 2 || resamples == 0 {
        return RatioEstimate {
            ratio,
            ci_low: ratio,
            ci_high: ratio,
            stderr: 0.0,
        };
    }
    let mut draws: Vec<f64> = (0..resamples)
        .map(|_| {
            let (mut a, mut b) = (0.0, 0.0);
            for _ in 0..n {
                let i = rng.gen_range(0..n);
                a += num[i];
                b += den[i];
            }
            a / b
        })
        .collect();
    let spread = Summary::of(&draws);
    draws.sort_by(f64::total_cmp);
    let at = |p: f64| draws[((p * (resamples - 1) as f64).round() as usize).min(resamples - 1)];
    RatioEstimate {
        ratio,
        ci_low: at(0.025),
        ci_high: at(0.975),
        stderr: spread.stderr * (resamples as f64).sqrt(),
    }
}
