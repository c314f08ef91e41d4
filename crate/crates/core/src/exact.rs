//! Exact finite-sample band probabilities for uniform order statistics.
//!
//! `P{a_k < U_(k) <= b_k, k = 1..n}` is computed by Noé's recursion. All
//! bounds are merged into one partition `0 = t_0 < t_1 < ... < t_m = 1` of
//! the unit interval. With `N(t)` the number of observations `<= t`, the band
//! event is equivalent to
//!
//! ```text
//!   #{k: b_k <= t_i} <= N(t_i) <= #{k: a_k < t_i}   for every i,
//! ```
//!
//! and `N(t_{i+1}) - N(t_i)` given `N(t_i) = l` is `Bin(n - l, dt / (1 - t_i))`.
//! The distribution of `N(t_i)` is propagated across the partition.

use serde::Serialize;

use crate::boundary::{boundary_vector, BoundaryVector, CurveKind};
use crate::error::{domain_err, Error, Result};
use crate::special::NeumaierSum;

/// Cap on `n`; the recursion is cubic in the worst case.
pub const MAX_N: usize = 5000;

/// Band of lower and upper bounds for the `n` uniform order statistics.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BandSpec {
    pub n: usize,
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
}

impl BandSpec {
    pub fn new(lower: Vec<f64>, upper: Vec<f64>) -> Result<Self> {
        let n = lower.len();
        if n == 0 {
            return Err(domain_err!("band needs at least one order statistic"));
        }
        if upper.len() != n {
            return Err(domain_err!("lower has {n} entries but upper has {}", upper.len()));
        }
        if n > MAX_N {
            return Err(Error::Size {
                what: "n",
                value: n as u64,
                limit: MAX_N as u64,
            });
        }
        for (name, v) in [("lower", &lower), ("upper", &upper)] {
            if let Some(x) = v.iter().find(|x| !(0.0..=1.0).contains(*x)) {
                return Err(domain_err!("{name} bound {x} outside [0, 1]"));
            }
            if v.windows(2).any(|w| w[1] < w[0]) {
                return Err(domain_err!("{name} bounds must be nondecreasing"));
            }
        }
        if let Some(k) = (0..n).find(|&k| lower[k] > upper[k]) {
            return Err(domain_err!("lower bound exceeds upper bound at k = {}", k + 1));
        }
        Ok(BandSpec { n, lower, upper })
    }

    /// One-sided band: `U_(k) > lower_k` only.
    pub fn lower_only(lower: Vec<f64>) -> Result<Self> {
        let n = lower.len();
        Self::new(lower, vec![1.0; n])
    }
}

/// `P{a_k < U_(k) <= b_k for all k}`.
pub fn noncrossing_probability(band: &BandSpec) -> Result<f64> {
    Ok(noe(&band.lower, &band.upper))
}

/// `P{U_(k) <= c_k for some k0 <= k <= k1}`.
pub fn crossing_probability(n: usize, boundary: &BoundaryVector) -> Result<f64> {
    if boundary.n != n || boundary.k0 < 1 || boundary.k1 > n {
        return Err(domain_err!(
            "boundary indices {}..={} (built for n = {}) do not fit n = {n}",
            boundary.k0,
            boundary.k1,
            boundary.n
        ));
    }
    // After k1 the last value is implied by order, so padding with it keeps
    // the band nondecreasing without changing the event.
    let last = *boundary.c.last().expect("boundary is nonempty");
    let mut lower = vec![0.0; n];
    lower[boundary.k0 - 1..boundary.k1].copy_from_slice(&boundary.c);
    lower[boundary.k1..].fill(last);
    let band = BandSpec::lower_only(lower)?;
    Ok((1.0 - noncrossing_probability(&band)?).clamp(0.0, 1.0))
}

/// Smallest `b` whose exact crossing probability is at most `alpha`,
/// by bisection to a relative width of `1e-6`.
pub fn exact_threshold(kind: CurveKind, n: usize, alpha: f64, k0: usize, k1: usize) -> Result<f64> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(domain_err!("level alpha = {alpha} must lie in (0, 1)"));
    }
    let level = |b: f64| -> Result<f64> { crossing_probability(n, &boundary_vector(kind, n, b, k0, k1)?) };
    let mut hi = 1.0;
    while level(hi)? > alpha {
        hi *= 2.0;
        if hi > 1e7 {
            return Err(Error::Numeric(format!("no exact threshold below 1e7 for alpha = {alpha}")));
        }
    }
    let mut lo = hi / 2.0;
    while level(lo)? <= alpha {
        lo /= 2.0;
        if lo < 1e-8 {
            return Ok(lo);
        }
    }
    while hi - lo > 1e-6 * hi {
        let mid = 0.5 * (lo + hi);
        if level(mid)? > alpha {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(hi)
}

/// Noncrossing probability for a validated lower-only band. Used on hot
/// paths where the caller guarantees the band invariants.
pub(crate) fn noncrossing_lower_unchecked(lower: &[f64]) -> f64 {
    let upper = vec![1.0; lower.len()];
    noe(lower, &upper)
}

fn noe(lower: &[f64], upper: &[f64]) -> f64 {
    let n = lower.len();
    let mut points: Vec<f64> = lower
        .iter()
        .chain(upper.iter())
        .copied()
        .filter(|&t| t > 0.0)
        .chain(std::iter::once(1.0))
        .collect();
    points.sort_by(f64::total_cmp);
    points.dedup();

    // N(0) = 0, which violates the band if some b_k = 0.
    if upper[0] <= 0.0 {
        return 0.0;
    }

    let mut prob = vec![0.0; n + 1];
    prob[0] = 1.0;
    let mut next_sum = vec![NeumaierSum::new(); n + 1];
    let (mut ia, mut ib) = (0usize, 0usize);
    let mut t_prev = 0.0;
    let mut support = (0usize, 0usize);

    for &t in &points {
        while ia < n && lower[ia] < t {
            ia += 1;
        }
        while ib < n && upper[ib] <= t {
            ib += 1;
        }
        let (lo, hi) = (ib, ia);
        if lo > hi {
            return 0.0;
        }
        let p = (t - t_prev) / (1.0 - t_prev);
        for s in next_sum[lo..=hi].iter_mut() {
            *s = NeumaierSum::new();
        }
        for l in support.0..=support.1.min(hi) {
            let w = prob[l];
            if w == 0.0 {
                continue;
            }
            spread(n - l, p, lo.saturating_sub(l), hi - l, |d, mass| next_sum[l + d].add(w * mass));
        }
        prob.fill(0.0);
        let mut first = None;
        let mut last = lo;
        for j in lo..=hi {
            let v = next_sum[j].value();
            if v > 0.0 {
                prob[j] = v;
                first.get_or_insert(j);
                last = j;
            }
        }
        match first {
            Some(f) => support = (f, last),
            None => return 0.0,
        }
        t_prev = t;
    }
    prob[n].clamp(0.0, 1.0)
}

/// Visits `P{Bin(m, p) = d}` for `d` in `d_lo..=d_hi`, skipping masses that
/// are negligible relative to the largest visited one. Works outward from
/// the mode using the ratio recurrence so only one `exp` is needed.
fn spread(m: usize, p: f64, d_lo: usize, d_hi: usize, mut visit: impl FnMut(usize, f64)) {
    let d_hi = d_hi.min(m);
    if d_lo > d_hi {
        return;
    }
    if p >= 1.0 {
        if d_lo <= m && m <= d_hi {
            visit(m, 1.0);
        }
        return;
    }
    if p <= 0.0 {
        if d_lo == 0 {
            visit(0, 1.0);
        }
        return;
    }
    let mode = (((m + 1) as f64 * p).floor() as usize).clamp(d_lo, d_hi);
    let (ln_p, ln_q) = (p.ln(), (-p).ln_1p());
    let ln_start = ln_choose_small(m, mode) + mode as f64 * ln_p + (m - mode) as f64 * ln_q;
    let start = ln_start.exp();
    if start == 0.0 {
        return;
    }
    let odds = p / (1.0 - p);
    let cutoff = start * 1e-20;
    visit(mode, start);
    let mut v = start;
    for d in mode..d_hi {
        v *= (m - d) as f64 / (d + 1) as f64 * odds;
        if v < cutoff {
            break;
        }
        visit(d + 1, v);
    }
    let mut v = start;
    for d in (d_lo + 1..=mode).rev() {
        v *= d as f64 / (m - d + 1) as f64 / odds;
        if v < cutoff {
            break;
        }
        visit(d - 1, v);
    }
}

fn ln_choose_small(m: usize, k: usize) -> f64 {
    use statrs::function::gamma::ln_gamma;
    let k = k.min(m - k);
    if k == 0 {
        return 0.0;
    }
    if k < 30 {
        (0..k).map(|i| ((m - i) as f64 / (i + 1) as f64).ln()).sum()
    } else {
        ln_gamma(m as f64 + 1.0) - ln_gamma(k as f64 + 1.0) - ln_gamma((m - k) as f64 + 1.0)
    }
}
