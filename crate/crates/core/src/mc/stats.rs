use serde::Serialize;

use super::{simulate_z, McError, Samples, SimConfig};
use crate::classify::{ProblemSpec, SingularSet};

/// Lower 0.001 quantile of the standard normal.
pub const Z_CRITICAL: f64 = -3.090_232_306_167_813;

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct McEstimate {
    pub mean: f64,
    pub std_error: f64,
    pub n: usize,
    pub t: f64,
}

fn pairwise_sum(v: &[f64]) -> f64 {
    if v.len() <= 32 {
        return v.iter().sum();
    }
    let (a, b) = v.split_at(v.len() / 2);
    pairwise_sum(a) + pairwise_sum(b)
}

/// Sample mean and standard error (`n − 1` normalization).
pub fn estimate_mean(samples: &[f64], t: f64) -> McEstimate {
    let n = samples.len();
    assert!(n >= 2, "estimate_mean needs at least two samples");
    let mean = pairwise_sum(samples) / n as f64;
    let dev: Vec<f64> = samples.iter().map(|&x| (x - mean) * (x - mean)).collect();
    let var = pairwise_sum(&dev) / (n - 1) as f64;
    McEstimate {
        mean,
        std_error: (var / n as f64).sqrt(),
        n,
        t,
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
#[serde(tag = "outcome", rename_all = "snake_case")]
pub enum TestOutcome {
    ConsistentWithMartingale { z_score: f64 },
    MeanDeficit { z_score: f64 },
}

impl TestOutcome {
    pub fn is_deficit(&self) -> bool {
        matches!(self, TestOutcome::MeanDeficit { .. })
    }

    pub fn z_score(&self) -> f64 {
        match *self {
            TestOutcome::ConsistentWithMartingale { z_score } | TestOutcome::MeanDeficit { z_score } => z_score,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct MartingaleTest {
    pub estimate: McEstimate,
    pub outcome: TestOutcome,
    pub n_truncated: usize,
    pub n_hit_singular: usize,
    pub n_exited: usize,
    pub caveat: &'static str,
}

pub(crate) fn z_test(e: &McEstimate) -> TestOutcome {
    let z_score = if e.std_error > 0.0 {
        (e.mean - 1.0) / e.std_error
    } else if e.mean < 1.0 {
        f64::NEG_INFINITY
    } else {
        0.0
    };
    if z_score < Z_CRITICAL {
        TestOutcome::MeanDeficit { z_score }
    } else {
        TestOutcome::ConsistentWithMartingale { z_score }
    }
}

/// One-sided z-test of `E[Z_t] = 1` against `E[Z_t] < 1` at level 0.001.
pub fn martingale_test(
    spec: &ProblemSpec,
    a: &SingularSet,
    cfg: &SimConfig,
    t: f64,
) -> Result<MartingaleTest, McError> {
    let s = simulate_z(spec, a, cfg, &[t])?;
    Ok(test_samples(&s, 0))
}

/// The same test on samples already drawn, at `s.times[time_index]`.
pub fn test_samples(s: &Samples, time_index: usize) -> MartingaleTest {
    use super::PathStatus::*;
    let estimate = estimate_mean(&s.z[time_index], s.times[time_index]);
    MartingaleTest {
        outcome: z_test(&estimate),
        estimate,
        n_truncated: s.count(time_index, Truncated),
        n_hit_singular: s.count(time_index, HitSingular),
        n_exited: s.count(time_index, ExitedBoundary),
        caveat: "failure to reject is evidence, not proof: Z may be heavy-tailed",
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn mean_and_error() {
        let e = estimate_mean(&[1.0; 10], 0.0);
        assert_eq!((e.mean, e.std_error), (1.0, 0.0));
        let e = estimate_mean(&[0.0, 2.0], 1.0);
        assert_eq!((e.mean, e.std_error), (1.0, 1.0));
    }

    #[test]
    fn critical_value() {
        // Φ(−3.0902) = 0.001.
        let tail = 0.5 * libm_erfc(-Z_CRITICAL / std::f64::consts::SQRT_2);
        assert!((tail - 1e-3).abs() < 1e-9);
    }

    fn libm_erfc(x: f64) -> f64 {
        // Continued fraction, accurate for x > 2.
        let mut f = 0.0;
        for k in (1..200).rev() {
            f = k as f64 / 2.0 / (x + f);
        }
        (-x * x).exp() / std::f64::consts::PI.sqrt() / (x + f)
    }

    #[test]
    fn z_test_outcomes() {
        let e = McEstimate {
            mean: 0.9,
            std_error: 0.01,
            n: 100,
            t: 1.0,
        };
        assert!(z_test(&e).is_deficit());
        let e = McEstimate {
            mean: 0.99,
            std_error: 0.01,
            n: 100,
            t: 1.0,
        };
        assert!(!z_test(&e).is_deficit());
        let e = McEstimate {
            mean: 1.0,
            std_error: 0.0,
            n: 100,
            t: 1.0,
        };
        assert_eq!(z_test(&e), TestOutcome::ConsistentWithMartingale { z_score: 0.0 });
    }
}
