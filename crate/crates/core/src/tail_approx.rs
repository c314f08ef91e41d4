//! Analytic null tail probabilities and threshold calibration.
//!
//! For a boundary `c_k = C(k/n, b/sqrt(n))` with slopes `c'_k`, the null
//! probability that some `U_(k) <= c_k`, `k0 <= k <= k1`, is approximated by
//!
//! ```text
//!   sum_k [1 - (n - k + 1) c'_k / (n (1 - c_k))]^+ * P{Bin(n, c_k) = k}
//! ```
//!
//! The binomial masses are evaluated in log space from `ln c_k`, so curves
//! that underflow (large thresholds, small `k`) stay accurate.
//!
//! The Darling-Erdos and Ornstein-Uhlenbeck approximations are provided for
//! comparison only.

use serde::Serialize;

use crate::boundary::{boundary_vector, BoundaryVector, CurveKind};
use crate::error::{domain_err, Error, Result};
use crate::special::{ln_beta_pdf, normal_pdf, LnFactorials, NeumaierSum};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TailApproxResult {
    /// `min(1, raw_sum)`.
    pub p_value: f64,
    /// Unclipped sum of the terms.
    pub raw_sum: f64,
    /// Per-index contributions for `k = k0..=k1`.
    pub terms: Vec<f64>,
    pub clipped: bool,
}

impl TailApproxResult {
    fn from_terms(terms: Vec<f64>) -> Self {
        let raw_sum = terms.iter().copied().collect::<NeumaierSum>().value();
        TailApproxResult {
            p_value: raw_sum.min(1.0),
            raw_sum,
            clipped: raw_sum > 1.0,
            terms,
        }
    }
}

/// Bracket factor `[1 - (n - k + 1) c' / (n (1 - c))]` clamped to `[0, 1]`.
#[inline]
fn bracket(n: usize, k: usize, c: f64, c_prime: f64) -> f64 {
    let nf = n as f64;
    (1.0 - (nf - k as f64 + 1.0) * c_prime / (nf * (1.0 - c))).clamp(0.0, 1.0)
}

/// Approximate `P{U_(k) <= C(k/n, b/sqrt(n)) for some k0 <= k <= k1}`.
pub fn tail_pvalue(kind: CurveKind, n: usize, b: f64, k0: usize, k1: usize) -> Result<TailApproxResult> {
    if b.is_nan() || b <= 0.0 {
        return Err(domain_err!("threshold b = {b} must be positive"));
    }
    let bv = boundary_vector(kind, n, b, k0, k1)?;
    let table = LnFactorials::new(n);
    Ok(if kind == CurveKind::Mhc {
        TailApproxResult::from_terms(mhc_terms(&bv, &table))
    } else {
        TailApproxResult::from_terms(generic_terms(&bv, &table))
    })
}

pub(crate) fn generic_terms(bv: &BoundaryVector, table: &LnFactorials) -> Vec<f64> {
    let n = bv.n;
    bv.indices()
        .enumerate()
        .map(|(i, k)| {
            let c = bv.c[i];
            let ln_c = bv.ln_c[i];
            if ln_c.is_nan() || ln_c == f64::NEG_INFINITY || c >= 1.0 {
                return if c >= 1.0 { 1.0 } else { 0.0 };
            }
            let factor = bracket(n, k, c, bv.c_prime[i]);
            if factor == 0.0 {
                return 0.0;
            }
            factor * table.ln_binom_pmf(n, k, ln_c, (-c).ln_1p()).exp()
        })
        .collect()
}

/// Modified-HC terms: only `p_(k) >= 1/n` counts, so the binomial factor
/// becomes `Bin{n,k,max(1/n, c)} - Bin(n,k,1/n) * max(n c, 1)` (negative
/// values clamped to 0) and indices with `c <= 1/n` are dropped.
fn mhc_terms(bv: &BoundaryVector, table: &LnFactorials) -> Vec<f64> {
    let n = bv.n;
    let nf = n as f64;
    let inv_n = 1.0 / nf;
    let (ln_inv_n, ln_1m_inv_n) = (inv_n.ln(), (-inv_n).ln_1p());
    bv.indices()
        .enumerate()
        .map(|(i, k)| {
            let c = bv.c[i];
            if c <= inv_n {
                return 0.0;
            }
            let factor = bracket(n, k, c, bv.c_prime[i]);
            if factor == 0.0 {
                return 0.0;
            }
            let at_c = table.ln_binom_pmf(n, k, bv.ln_c[i], (-c).ln_1p()).exp();
            let at_inv_n = table.ln_binom_pmf(n, k, ln_inv_n, ln_1m_inv_n).exp();
            factor * (at_c - at_inv_n * (nf * c).max(1.0)).max(0.0)
        })
        .collect()
}

/// The same summation over a caller-supplied boundary. Entries may be zero
/// (no crossing possible) but must be nondecreasing and below 1; slopes must
/// be nonnegative.
pub fn tail_pvalue_generic(n: usize, boundary: &BoundaryVector) -> Result<TailApproxResult> {
    if boundary.n != n {
        return Err(domain_err!("boundary built for n = {} used with n = {n}", boundary.n));
    }
    if boundary.k0 < 1 || boundary.k1 > n {
        return Err(domain_err!("boundary indices {}..={} outside 1..={n}", boundary.k0, boundary.k1));
    }
    for w in boundary.c.windows(2) {
        if w[1] < w[0] {
            return Err(domain_err!("boundary is not monotone ({} then {})", w[0], w[1]));
        }
    }
    if let Some(&c) = boundary.c.iter().find(|&&c| !(0.0..1.0).contains(&c)) {
        return Err(domain_err!("boundary value {c} outside [0, 1)"));
    }
    if let Some(&s) = boundary.c_prime.iter().find(|&&s| s.is_nan() || s < 0.0) {
        return Err(domain_err!("boundary slope {s} is negative"));
    }
    let table = LnFactorials::new(n);
    Ok(TailApproxResult::from_terms(generic_terms(boundary, &table)))
}

/// Term in the alternative form `f(c; k, n + 1 - k) (c / k) [1 - (1 - k/n) c' / (1 - c)]`.
pub fn beta_form_term(n: usize, k: usize, c: f64, c_prime: f64) -> f64 {
    let nf = n as f64;
    let kf = k as f64;
    let dens = ln_beta_pdf(c, kf, nf + 1.0 - kf).exp();
    let factor = (1.0 - (1.0 - kf / nf) * c_prime / (1.0 - c)).max(0.0);
    dens * (c / kf) * factor
}

/// Largest threshold search bound before giving up.
const B_MAX: f64 = 1e7;

/// Threshold `b` with `tail_pvalue(kind, n, b, k0, k1) = alpha`.
///
/// The unclipped sum is decreasing in `b` except very close to `b = 0`
/// (where every bracket factor is negative and clamped), so the bracket is
/// grown outward from `b = 1` until it straddles `alpha`.
pub fn threshold(kind: CurveKind, n: usize, alpha: f64, k0: usize, k1: usize) -> Result<f64> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(domain_err!("level alpha = {alpha} must lie in (0, 1)"));
    }
    // Validate the index range once up front.
    boundary_vector(kind, n, 1.0, k0, k1)?;
    let table = LnFactorials::new(n);
    let eval = |b: f64| -> Result<f64> {
        let bv = boundary_vector(kind, n, b, k0, k1)?;
        let terms = if kind == CurveKind::Mhc {
            mhc_terms(&bv, &table)
        } else {
            generic_terms(&bv, &table)
        };
        Ok(terms.iter().copied().collect::<NeumaierSum>().value())
    };

    let (mut lo, mut hi);
    let p1 = eval(1.0)?;
    if p1 >= alpha {
        lo = 1.0;
        hi = 2.0;
        while eval(hi)? >= alpha {
            lo = hi;
            hi *= 2.0;
            if hi > B_MAX {
                return Err(Error::Numeric(format!("no threshold below {B_MAX} reaches level {alpha}")));
            }
        }
    } else {
        hi = 1.0;
        lo = 0.5;
        while eval(lo)? < alpha {
            hi = lo;
            lo *= 0.5;
            if lo < 1e-6 {
                return Err(Error::Numeric(format!("level {alpha} is not attained by the approximation")));
            }
        }
    }
    // Bisection in b; the stopping rule is on the level.
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        let p = eval(mid)?;
        if (p / alpha - 1.0).abs() < 1e-9 || hi - lo < 1e-13 * hi {
            return Ok(mid);
        }
        if p >= alpha {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct OuApproxResult {
    pub p_value: f64,
    /// Effective time horizon `T0 = 0.5 ln[tau1 (1 - tau0) / (tau0 (1 - tau1))]`.
    pub t0: f64,
}

/// `T0 b phi(b)`, clipped to `[0, 1]`.
pub fn ou_pvalue(b: f64, tau0: f64, tau1: f64) -> Result<OuApproxResult> {
    if !(tau0 > 0.0 && tau0 < tau1 && tau1 < 1.0) {
        return Err(domain_err!("need 0 < tau0 < tau1 < 1, got tau0 = {tau0}, tau1 = {tau1}"));
    }
    if b.is_nan() || b <= 0.0 {
        return Err(domain_err!("threshold b = {b} must be positive"));
    }
    let t0 = 0.5 * (tau1 * (1.0 - tau0) / (tau0 * (1.0 - tau1))).ln();
    Ok(OuApproxResult {
        p_value: (t0 * b * normal_pdf(b)).clamp(0.0, 1.0),
        t0,
    })
}

/// OU approximation with the default range `tau0 = 1/n`, `tau1 = 1/2`.
pub fn ou_pvalue_default(b: f64, n: usize) -> Result<OuApproxResult> {
    if n < 3 {
        return Err(domain_err!("need n >= 3 for the default OU range, got {n}"));
    }
    ou_pvalue(b, 1.0 / n as f64, 0.5)
}

/// Classical Darling-Erdos extreme-value approximation,
/// `1 - exp(-exp(-x))` with `x = a_n b - b_n`,
/// `a_n = sqrt(2 ln ln n)` and
/// `b_n = 2 ln ln n + ln ln ln n / 2 - ln(4 pi) / 2`.
pub fn darling_erdos_pvalue(b: f64, n: usize) -> Result<f64> {
    if n < 3 {
        return Err(domain_err!("Darling-Erdos normalization needs n >= 3, got {n}"));
    }
    if b.is_nan() || b <= 0.0 {
        return Err(domain_err!("threshold b = {b} must be positive"));
    }
    let ll = (n as f64).ln().ln();
    let a_n = (2.0 * ll).sqrt();
    let b_n = 2.0 * ll + 0.5 * ll.ln() - 0.5 * (4.0 * std::f64::consts::PI).ln();
    let tail = (-(a_n * b - b_n)).exp();
    Ok(-(-tail).exp_m1())
}
