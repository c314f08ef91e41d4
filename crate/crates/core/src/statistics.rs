//! Higher-criticism family statistics on an ordered p-value sample.

use serde::Serialize;

use crate::boundary::{curve_point, BoundaryVector, CurveKind};
use crate::error::{domain_err, Error, Result};

/// Sorted p-values in `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct PValueSample {
    p: Vec<f64>,
}

impl PValueSample {
    /// Validates and sorts (stable) arbitrary p-values.
    pub fn new(mut p: Vec<f64>) -> Result<Self> {
        validate(&p)?;
        p.sort_by(|a, b| a.total_cmp(b));
        Ok(PValueSample { p })
    }

    /// Wraps values that are already nondecreasing.
    pub fn from_sorted(p: Vec<f64>) -> Result<Self> {
        validate(&p)?;
        if p.windows(2).any(|w| w[1] < w[0]) {
            return Err(Error::Input("p-values are not sorted".into()));
        }
        Ok(PValueSample { p })
    }

    pub fn n(&self) -> usize {
        self.p.len()
    }

    pub fn sorted(&self) -> &[f64] {
        &self.p
    }

    /// `p_(k)`, 1-based.
    pub fn order_stat(&self, k: usize) -> f64 {
        self.p[k - 1]
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.p
    }
}

fn validate(p: &[f64]) -> Result<()> {
    if p.is_empty() {
        return Err(Error::Input("empty p-value sample".into()));
    }
    if let Some((i, v)) = p.iter().enumerate().find(|(_, v)| !(**v >= 0.0 && **v <= 1.0)) {
        return Err(Error::Input(format!("p-value #{} = {v} is outside [0, 1]", i + 1)));
    }
    Ok(())
}

/// Statistic kind plus the index range `k0..=k1` the maximum runs over.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct StatisticSpec {
    pub kind: CurveKind,
    pub k0: usize,
    pub k1: usize,
}

impl StatisticSpec {
    pub fn new(kind: CurveKind, k0: usize, k1: usize) -> Self {
        StatisticSpec { kind, k0, k1 }
    }

    /// `k0 = 1`, `k1 = floor(n / 2)` (at least 1).
    pub fn default_for(kind: CurveKind, n: usize) -> Self {
        StatisticSpec {
            kind,
            k0: 1,
            k1: (n / 2).max(1),
        }
    }

    /// `k1 = floor(frac * n)` clamped to `[k0, n]`.
    pub fn with_k1_fraction(kind: CurveKind, n: usize, k0: usize, frac: f64) -> Self {
        let k1 = ((frac * n as f64).floor() as usize).clamp(k0.max(1), n.max(1));
        StatisticSpec { kind, k0, k1 }
    }

    pub fn check(&self, n: usize) -> Result<()> {
        if self.k0 < 1 || self.k0 > self.k1 || self.k1 > n {
            return Err(domain_err!(
                "index range {}..={} invalid for a sample of size {n}",
                self.k0,
                self.k1
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StatisticResult {
    pub value: f64,
    /// Index attaining the maximum; `None` when no term is admissible.
    pub argmax_k: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub per_k: Option<Vec<f64>>,
}

/// Term at index `k` for an `n`-sample. Inadmissible MHC terms are `None`;
/// the one-sided BJ/MBJ/JW families contribute 0 when `p >= k/n`.
#[inline]
pub(crate) fn term(kind: CurveKind, n: usize, k: usize, p: f64) -> Option<f64> {
    let nf = n as f64;
    let x = k as f64 / nf;
    match kind {
        CurveKind::Hc | CurveKind::Mhc => {
            if kind == CurveKind::Mhc && p < 1.0 / nf {
                return None;
            }
            let num = x - p;
            if num == 0.0 {
                return Some(0.0);
            }
            let den = (p * (1.0 - p)).sqrt();
            if den == 0.0 {
                return Some(if num > 0.0 { f64::INFINITY } else { f64::NEG_INFINITY });
            }
            Some(nf.sqrt() * num / den)
        }
        CurveKind::Bj => {
            if p >= x {
                return Some(0.0);
            }
            if p == 0.0 {
                return Some(f64::INFINITY);
            }
            let upper = if x < 1.0 { (1.0 - x) * ((1.0 - x) / (1.0 - p)).ln() } else { 0.0 };
            let kl = x * (x / p).ln() + upper;
            Some((2.0 * nf * kl.max(0.0)).sqrt())
        }
        CurveKind::Mbj => {
            if p >= x {
                return Some(0.0);
            }
            if p == 0.0 {
                return Some(f64::INFINITY);
            }
            let d = x * (x / p).ln() - (x - p);
            Some((2.0 * nf * d.max(0.0)).sqrt())
        }
        CurveKind::Jw => Some(nf.sqrt() * (x.sqrt() - p.sqrt()).max(0.0)),
    }
}

/// Evaluates the statistic from the `k1` smallest order statistics of an
/// `n`-sample; `prefix[k - 1] = p_(k)` for `k <= k1`.
pub(crate) fn evaluate_prefix(spec: &StatisticSpec, n: usize, prefix: &[f64]) -> (f64, Option<usize>) {
    let mut best = f64::NEG_INFINITY;
    let mut arg = None;
    for k in spec.k0..=spec.k1 {
        if let Some(t) = term(spec.kind, n, k, prefix[k - 1]) {
            if arg.is_none() || t > best {
                best = t;
                arg = Some(k);
            }
        }
    }
    (best, arg)
}

/// Maximum term over `spec.k0..=spec.k1`.
pub fn evaluate(spec: &StatisticSpec, sample: &PValueSample) -> Result<StatisticResult> {
    spec.check(sample.n())?;
    let (value, argmax_k) = evaluate_prefix(spec, sample.n(), sample.sorted());
    Ok(StatisticResult {
        value,
        argmax_k,
        per_k: None,
    })
}

/// Like [`evaluate`] but also returns every term (`NaN` marks an
/// inadmissible MHC term).
pub fn evaluate_with_terms(spec: &StatisticSpec, sample: &PValueSample) -> Result<StatisticResult> {
    let mut res = evaluate(spec, sample)?;
    let n = sample.n();
    res.per_k = Some(
        (spec.k0..=spec.k1)
            .map(|k| term(spec.kind, n, k, sample.order_stat(k)).unwrap_or(f64::NAN))
            .collect(),
    );
    Ok(res)
}

/// Precomputed boundary test `T >= b` for fixed `(spec, n, b)`.
#[derive(Debug, Clone)]
pub struct RejectionRule {
    spec: StatisticSpec,
    n: usize,
    boundary: BoundaryVector,
}

impl RejectionRule {
    pub fn new(spec: StatisticSpec, n: usize, b: f64) -> Result<Self> {
        spec.check(n)?;
        if b.is_nan() || b <= 0.0 {
            return Err(domain_err!("threshold b = {b} must be positive"));
        }
        // Solved pointwise: the statistic allows k = n (x = 1), which
        // boundary_vector does not.
        let xi = b / (n as f64).sqrt();
        let mut c = Vec::with_capacity(spec.k1 - spec.k0 + 1);
        let mut cp = Vec::with_capacity(spec.k1 - spec.k0 + 1);
        for k in spec.k0..=spec.k1 {
            let p = curve_point(spec.kind, k as f64 / n as f64, xi)?;
            c.push(p.c);
            cp.push(p.c_prime);
        }
        let mut boundary = BoundaryVector::from_parts(n, spec.k0, c, cp)?;
        boundary.b = b;
        Ok(RejectionRule { spec, n, boundary })
    }

    pub fn boundary(&self) -> &BoundaryVector {
        &self.boundary
    }

    pub fn spec(&self) -> StatisticSpec {
        self.spec
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// True iff some admissible `p_(k) <= c_k` among the smallest order
    /// statistics in `prefix`.
    pub fn rejects_prefix(&self, prefix: &[f64]) -> bool {
        let inv_n = 1.0 / self.n as f64;
        self.boundary.c.iter().zip(self.spec.k0..=self.spec.k1).any(|(&c, k)| {
            let p = prefix[k - 1];
            p <= c && (self.spec.kind != CurveKind::Mhc || p >= inv_n)
        })
    }

    pub fn rejects(&self, sample: &PValueSample) -> bool {
        debug_assert_eq!(sample.n(), self.n);
        self.rejects_prefix(sample.sorted())
    }
}

/// Boundary form of `evaluate(spec, sample).value >= b`.
pub fn exceeds(spec: &StatisticSpec, sample: &PValueSample, b: f64) -> Result<bool> {
    Ok(RejectionRule::new(*spec, sample.n(), b)?.rejects(sample))
}
