//! Seeded, order-independent Monte Carlo over p-value samples.
//!
//! Each replicate fills a buffer of `n` p-values from its own stream,
//! keeps the smallest `prefix_len` of them in sorted order and checks every
//! rejection rule against that prefix. Only integer hit counts are reduced
//! across threads, so the result is bit-identical for any thread count.

use rand::Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::boundary::CurveKind;
use crate::error::{domain_err, Result};
use crate::rng::{replicate_rng, ReplicateRng};
use crate::statistics::{RejectionRule, StatisticSpec};
use crate::tail_approx::tail_pvalue;

/// Rejection frequency with its binomial standard error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Frequency {
    pub hits: u64,
    pub replicates: u64,
    pub estimate: f64,
    pub se: f64,
}

impl Frequency {
    pub fn new(hits: u64, replicates: u64) -> Self {
        let r = replicates as f64;
        let estimate = hits as f64 / r;
        Frequency {
            hits,
            replicates,
            estimate,
            se: (estimate * (1.0 - estimate) / r).sqrt(),
        }
    }
}

/// Counts, per rule, the replicates whose sample is rejected.
///
/// `draw` must overwrite `buf` with the `n` p-values of one replicate.
pub fn count_rejections<F>(n: usize, replicates: u64, seed: u64, rules: &[RejectionRule], draw: F) -> Vec<u64>
where
    F: Fn(&mut ReplicateRng, &mut Vec<f64>) + Sync,
{
    let prefix_len = rules.iter().map(|r| r.spec().k1).max().unwrap_or(0).min(n);
    let m = rules.len();
    (0..replicates)
        .into_par_iter()
        .fold(
            || (Vec::with_capacity(n), vec![0u64; m]),
            |(mut buf, mut hits), rep| {
                let mut rng = replicate_rng(seed, rep);
                draw(&mut rng, &mut buf);
                debug_assert_eq!(buf.len(), n);
                let prefix = smallest_sorted(&mut buf, prefix_len);
                for (h, rule) in hits.iter_mut().zip(rules) {
                    if rule.rejects_prefix(prefix) {
                        *h += 1;
                    }
                }
                (buf, hits)
            },
        )
        .map(|(_, hits)| hits)
        .reduce(
            || vec![0u64; m],
            |mut a, b| {
                a.iter_mut().zip(b).for_each(|(x, y)| *x += y);
                a
            },
        )
}

/// Partially sorts `buf` so its first `len` entries are the smallest, in
/// increasing order, and returns them.
pub fn smallest_sorted(buf: &mut [f64], len: usize) -> &[f64] {
    if len == 0 {
        return &buf[..0];
    }
    if len < buf.len() {
        buf.select_nth_unstable_by(len - 1, f64::total_cmp);
    }
    let prefix = &mut buf[..len];
    prefix.sort_unstable_by(f64::total_cmp);
    prefix
}

/// Fills `buf` with `n` independent uniforms.
pub fn draw_uniform(rng: &mut ReplicateRng, buf: &mut Vec<f64>, n: usize) {
    buf.clear();
    buf.extend((0..n).map(|_| rng.random::<f64>()));
}

/// Null exceedance of one statistic at threshold `b`, next to the analytic
/// approximation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct NullExceedance {
    pub spec: StatisticSpec,
    pub n: usize,
    pub b: f64,
    pub simulated: Frequency,
    /// `None` when the analytic approximation does not apply (`k1 = n`).
    pub approximate: Option<f64>,
}

/// Simulated `P{T >= b}` under the global null for several `(spec, b)`
/// pairs sharing the same uniform draws.
pub fn null_exceedance(n: usize, tests: &[(StatisticSpec, f64)], replicates: u64, seed: u64) -> Result<Vec<NullExceedance>> {
    if replicates == 0 {
        return Err(domain_err!("need at least one replicate"));
    }
    let rules = tests
        .iter()
        .map(|&(spec, b)| RejectionRule::new(spec, n, b))
        .collect::<Result<Vec<_>>>()?;
    let hits = count_rejections(n, replicates, seed, &rules, |rng, buf| draw_uniform(rng, buf, n));
    Ok(tests
        .iter()
        .zip(hits)
        .map(|(&(spec, b), h)| NullExceedance {
            spec,
            n,
            b,
            simulated: Frequency::new(h, replicates),
            approximate: (spec.k1 < n)
                .then(|| tail_pvalue(spec.kind, n, b, spec.k0, spec.k1).ok().map(|r| r.p_value))
                .flatten(),
        })
        .collect())
}

/// Convenience wrapper for a single statistic with the default index range.
pub fn null_exceedance_default(kind: CurveKind, n: usize, b: f64, replicates: u64, seed: u64) -> Result<NullExceedance> {
    let spec = StatisticSpec::default_for(kind, n);
    Ok(null_exceedance(n, &[(spec, b)], replicates, seed)?.remove(0))
}
