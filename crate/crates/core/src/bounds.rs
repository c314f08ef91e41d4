//! Lower confidence bounds for the fraction of false null hypotheses.
//!
//! Both bounds invert a goodness-of-fit functional of the empirical
//! distribution `F_n` of the p-values. With `gamma = b_MBJ^2 / (2n)` the
//! Berk-Jones bound is the supremum of all `lambda` with
//!
//! ```text
//!   sup_t { (F - lambda) log[(F - lambda) / ((1 - lambda) t)] - [F - lambda - (1 - lambda) t] } > gamma
//! ```
//!
//! over `t` with `F_n(t) - lambda >= (1 - lambda) t`. For fixed `t` the
//! criterion `D_t(lambda)` is nonincreasing in `lambda` (its derivative is
//! `-log r + t (r - 1)` with `r t <= 1`), so the set of admissible `lambda`
//! is an interval `[0, lambda_hat)` and `lambda_hat` is the largest of the
//! per-`t` roots of `D_t(lambda) = gamma`. The supremum over `t` is attained
//! at the order statistics, so a sample costs one root solve per candidate.
//!
//! The higher-criticism bound uses `beta = b_MHC / sqrt(n)` and
//! `sup_t [F_n(t) - t - beta sqrt(t (1 - t))] / (1 - t)` over order
//! statistics in `[1/n, 1/2]`.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::boundary::CurveKind;
use crate::error::{domain_err, Result};
use crate::power::{CountMode, MixtureModel, Sided};
use crate::rng::replicate_rng;
use crate::statistics::PValueSample;
use crate::tail_approx::threshold;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BoundKind {
    Mbj,
    Mhc,
}

impl BoundKind {
    pub fn curve(self) -> CurveKind {
        match self {
            BoundKind::Mbj => CurveKind::Mbj,
            BoundKind::Mhc => CurveKind::Mhc,
        }
    }
}

impl std::str::FromStr for BoundKind {
    type Err = crate::error::Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "mbj" | "bj" => Ok(BoundKind::Mbj),
            "mhc" | "hc" => Ok(BoundKind::Mhc),
            other => Err(crate::error::Error::Input(format!("unknown bound kind '{other}' (expected mbj or mhc)"))),
        }
    }
}

/// Level-`alpha` critical values of both functionals for sample size `n`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BoundingSequence {
    pub n: usize,
    pub alpha: f64,
    pub b_mbj: f64,
    /// `b_mbj^2 / (2n)`.
    pub gamma: f64,
    pub b_mhc: f64,
    /// `b_mhc / sqrt(n)`.
    pub beta: f64,
}

impl BoundingSequence {
    pub fn new(n: usize, alpha: f64) -> Result<Self> {
        if n < 2 {
            return Err(domain_err!("bounding sequence needs n >= 2, got {n}"));
        }
        let k1 = n / 2;
        let b_mbj = threshold(CurveKind::Mbj, n, alpha, 1, k1)?;
        let b_mhc = threshold(CurveKind::Mhc, n, alpha, 1, k1)?;
        let nf = n as f64;
        Ok(BoundingSequence {
            n,
            alpha,
            b_mbj,
            gamma: b_mbj * b_mbj / (2.0 * nf),
            b_mhc,
            beta: b_mhc / nf.sqrt(),
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LowerBoundResult {
    pub lambda_hat: f64,
    /// Order statistic attaining the bound; `None` when `lambda_hat = 0`.
    pub active_t: Option<f64>,
    pub statistic_kind: BoundKind,
}

/// Poisson-type Berk-Jones criterion `a log(a / b) - (a - b)`.
#[inline]
fn bj_criterion(a: f64, b: f64) -> f64 {
    if a <= 0.0 {
        return 0.0;
    }
    if b <= 0.0 {
        return f64::INFINITY;
    }
    a * (a / b).ln() - (a - b)
}

/// `D_t(lambda)` for empirical level `f` at `t`.
#[inline]
pub fn bj_membership_criterion(f: f64, t: f64, lambda: f64) -> f64 {
    bj_criterion(f - lambda, (1.0 - lambda) * t)
}

/// Root in `lambda` of `D_t(lambda) = gamma` for one jump point, if the
/// point contributes at `lambda = 0`.
fn bj_root(f: f64, t: f64, gamma: f64) -> Option<f64> {
    if t >= 1.0 || f <= t || bj_criterion(f, t) <= gamma {
        return None;
    }
    // D vanishes at the feasibility edge (f - lambda) = (1 - lambda) t.
    let (mut lo, mut hi) = (0.0, (f - t) / (1.0 - t));
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if bj_membership_criterion(f, t, mid) > gamma {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Some(lo)
}

pub fn lower_bound_bj_with(sample: &PValueSample, seq: &BoundingSequence) -> LowerBoundResult {
    let n = sample.n();
    let nf = n as f64;
    let mut best = (0.0, None);
    for (i, &t) in sample.sorted().iter().enumerate() {
        if let Some(r) = bj_root((i + 1) as f64 / nf, t, seq.gamma) {
            if r > best.0 {
                best = (r, Some(t));
            }
        }
    }
    LowerBoundResult {
        lambda_hat: best.0,
        active_t: best.1,
        statistic_kind: BoundKind::Mbj,
    }
}

/// Upper end of the `t` range for the higher-criticism bound. `beta` is
/// calibrated on the lower half of the order statistics; letting the
/// supremum run over all of `(0, 1)` inflates the null error rate.
pub const HC_T_MAX: f64 = 0.5;

pub fn lower_bound_hc_with(sample: &PValueSample, seq: &BoundingSequence) -> LowerBoundResult {
    let n = sample.n();
    let nf = n as f64;
    let mut best = (0.0, None);
    for (i, &t) in sample.sorted().iter().enumerate() {
        if t < 1.0 / nf {
            continue;
        }
        if t > HC_T_MAX {
            break;
        }
        let v = ((i + 1) as f64 / nf - t - seq.beta * (t * (1.0 - t)).sqrt()) / (1.0 - t);
        if v > best.0 {
            best = (v, Some(t));
        }
    }
    LowerBoundResult {
        lambda_hat: best.0,
        active_t: best.1,
        statistic_kind: BoundKind::Mhc,
    }
}

fn check_alpha(alpha: f64) -> Result<()> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(domain_err!("level alpha = {alpha} must lie in (0, 1)"));
    }
    Ok(())
}

/// Berk-Jones lower confidence bound at level `1 - alpha`.
pub fn lower_bound_bj(sample: &PValueSample, alpha: f64) -> Result<LowerBoundResult> {
    check_alpha(alpha)?;
    Ok(lower_bound_bj_with(sample, &BoundingSequence::new(sample.n(), alpha)?))
}

/// Higher-criticism lower confidence bound at level `1 - alpha`.
pub fn lower_bound_hc(sample: &PValueSample, alpha: f64) -> Result<LowerBoundResult> {
    check_alpha(alpha)?;
    Ok(lower_bound_hc_with(sample, &BoundingSequence::new(sample.n(), alpha)?))
}

pub fn lower_bound(kind: BoundKind, sample: &PValueSample, alpha: f64) -> Result<LowerBoundResult> {
    match kind {
        BoundKind::Mbj => lower_bound_bj(sample, alpha),
        BoundKind::Mhc => lower_bound_hc(sample, alpha),
    }
}

/// Summary of both bounds over simulated mixtures with `round(lambda n)`
/// signals of mean `mu` and one-sided p-values.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BoundsSimulation {
    pub n: usize,
    pub alpha: f64,
    pub lambda: f64,
    pub mu: f64,
    pub replicates: u64,
    /// `P(lambda_hat_HC > lambda_hat_BJ)`.
    pub p_hc_greater: f64,
    /// `P(lambda_hat_HC < lambda_hat_BJ)`.
    pub p_hc_less: f64,
    /// Root mean squared error relative to `lambda` (absolute when `lambda = 0`).
    pub rel_l2_hc: f64,
    pub rel_l2_bj: f64,
    /// Fraction of replicates with `lambda_hat > lambda`.
    pub noncoverage_hc: f64,
    pub noncoverage_bj: f64,
}

#[derive(Default, Clone, Copy)]
struct Acc {
    hc_gt: u64,
    hc_lt: u64,
    sq_hc: f64,
    sq_bj: f64,
    miss_hc: u64,
    miss_bj: u64,
}

/// Monte Carlo comparison of the two bounds. Squared errors are summed in
/// replicate order so the result does not depend on the thread count.
pub fn simulate_bounds(n: usize, alpha: f64, lambda: f64, mu: f64, replicates: u64, seed: u64) -> Result<BoundsSimulation> {
    check_alpha(alpha)?;
    if !(0.0..1.0).contains(&lambda) {
        return Err(domain_err!("lambda = {lambda} must lie in [0, 1)"));
    }
    if replicates == 0 {
        return Err(domain_err!("need at least one replicate"));
    }
    let seq = BoundingSequence::new(n, alpha)?;
    let model = MixtureModel {
        p: lambda,
        mu,
        delta_sd: 0.0,
        sided: Sided::One,
        count_mode: CountMode::Deterministic,
    };
    model.validate()?;
    let pairs: Vec<(f64, f64)> = (0..replicates)
        .into_par_iter()
        .map_init(Vec::new, |buf, rep| {
            let mut rng = replicate_rng(seed, rep);
            model.draw(&mut rng, buf, n);
            let sample = PValueSample::new(std::mem::take(buf)).expect("p-values lie in [0, 1]");
            let hc = lower_bound_hc_with(&sample, &seq).lambda_hat;
            let bj = lower_bound_bj_with(&sample, &seq).lambda_hat;
            *buf = sample.into_inner();
            (hc, bj)
        })
        .collect();
    let acc = pairs.iter().fold(Acc::default(), |mut a, &(hc, bj)| {
        a.hc_gt += (hc > bj) as u64;
        a.hc_lt += (hc < bj) as u64;
        a.sq_hc += (hc - lambda).powi(2);
        a.sq_bj += (bj - lambda).powi(2);
        a.miss_hc += (hc > lambda) as u64;
        a.miss_bj += (bj > lambda) as u64;
        a
    });
    let r = replicates as f64;
    let scale = if lambda > 0.0 { lambda } else { 1.0 };
    Ok(BoundsSimulation {
        n,
        alpha,
        lambda,
        mu,
        replicates,
        p_hc_greater: acc.hc_gt as f64 / r,
        p_hc_less: acc.hc_lt as f64 / r,
        rel_l2_hc: (acc.sq_hc / r).sqrt() / scale,
        rel_l2_bj: (acc.sq_bj / r).sqrt() / scale,
        noncoverage_hc: acc.miss_hc as f64 / r,
        noncoverage_bj: acc.miss_bj as f64 / r,
    })
}

/// Empirical noncoverage `P(lambda_hat > lambda)` of one bound.
pub fn coverage_check(kind: BoundKind, n: usize, alpha: f64, lambda: f64, mu: f64, replicates: u64, seed: u64) -> Result<f64> {
    let s = simulate_bounds(n, alpha, lambda, mu, replicates, seed)?;
    Ok(match kind {
        BoundKind::Mbj => s.noncoverage_bj,
        BoundKind::Mhc => s.noncoverage_hc,
    })
}
