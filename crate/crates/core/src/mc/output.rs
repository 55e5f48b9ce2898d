use sha2::{Digest, Sha256};

use super::{estimate_mean, PathStatus, Samples};
use crate::classify::ProblemSpec;

/// SHA-256 of the problem data in a fixed textual layout.
pub fn spec_hash(spec: &ProblemSpec) -> String {
    let mut h = Sha256::new();
    let text = format!(
        "interval=({},{});x0={:e};mu={};sigma={};b={};c={:e}",
        spec.left, spec.right, spec.x0, spec.mu, spec.sigma, spec.b, spec.base_point
    );
    h.update(text.as_bytes());
    format!("{:x}", h.finalize())
}

/// Line-oriented summary: a hash header, then
/// `time mean std_error n_truncated n_hit_singular n_exited` per time.
pub fn render_text(spec: &ProblemSpec, samples: &Samples) -> String {
    let mut out = format!("# spec_hash {}\n", spec_hash(spec));
    out.push_str("# time mean std_error n_truncated n_hit_singular n_exited\n");
    for (i, &t) in samples.times.iter().enumerate() {
        let e = estimate_mean(&samples.z[i], t);
        out.push_str(&format!(
            "{:.16e} {:.16e} {:.16e} {} {} {}\n",
            t,
            e.mean,
            e.std_error,
            samples.count(i, PathStatus::Truncated),
            samples.count(i, PathStatus::HitSingular),
            samples.count(i, PathStatus::ExitedBoundary),
        ));
    }
    out
}
