//! Power under sparse Gaussian mixtures.
//!
//! The analytic path handles one-sided p-values with a fixed signal mean
//! `delta`. Writing `G` for the alternative distribution function of a
//! p-value, `U_i = G(P_i)` are uniform and the test rejects iff
//! `U_(k) <= d_k = G(c_k)` for some `k`. The transformed boundary `d` is
//! concave for small `k` and convex afterwards; conditionally on
//! `U_(j0) = x` at the split index `j0`, the concave prefix is handled
//! exactly by the Noé recursion and the convex suffix by the tail
//! approximation, and the two are combined by integrating over the Beta law
//! of `U_(j0)`.
//!
//! The Monte Carlo path covers everything else (two-sided p-values, random
//! signal means, binomial or fixed signal counts, the modified statistics).

use rand::Rng;
use rand_distr::{Binomial, Distribution, StandardNormal};
use serde::{Deserialize, Serialize};
use statrs::function::beta::beta_reg;

use crate::boundary::{BoundaryVector, CurveKind};
use crate::error::{domain_err, Error, Result};
use crate::exact::noncrossing_lower_unchecked;
use crate::montecarlo::{count_rejections, Frequency};
use crate::rng::ReplicateRng;
use crate::special::{ln_beta_pdf, normal_isf, normal_sf, two_sided_p, LnFactorials, NeumaierSum};
use crate::statistics::{RejectionRule, StatisticSpec};
use crate::tail_approx::{generic_terms, tail_pvalue};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Sided {
    One,
    Two,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CountMode {
    /// Number of signals drawn from `Bin(n, p)`.
    Binomial,
    /// Exactly `round(n p)` signals.
    Deterministic,
}

/// `(1 - p) F0 + p F0(. - delta)` with `delta ~ N(mu, delta_sd^2)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MixtureModel {
    pub p: f64,
    pub mu: f64,
    pub delta_sd: f64,
    pub sided: Sided,
    pub count_mode: CountMode,
}

impl MixtureModel {
    /// One-sided, fixed `delta`, binomial count: the analytic setting.
    pub fn fixed(p: f64, delta: f64) -> Self {
        MixtureModel {
            p,
            mu: delta,
            delta_sd: 0.0,
            sided: Sided::One,
            count_mode: CountMode::Binomial,
        }
    }

    /// Two-sided p-values, signal means with standard deviation 0.1, binomial count.
    pub fn random_mean(p: f64, mu: f64) -> Self {
        MixtureModel {
            p,
            mu,
            delta_sd: 0.1,
            sided: Sided::Two,
            count_mode: CountMode::Binomial,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0..1.0).contains(&self.p) {
            return Err(domain_err!("mixing fraction p = {} must lie in [0, 1)", self.p));
        }
        if !self.mu.is_finite() {
            return Err(domain_err!("signal mean mu = {} must be finite", self.mu));
        }
        if !(self.delta_sd >= 0.0 && self.delta_sd.is_finite()) {
            return Err(domain_err!("signal spread {} must be nonnegative", self.delta_sd));
        }
        Ok(())
    }

    fn is_null(&self) -> bool {
        self.p == 0.0 || (self.mu == 0.0 && self.delta_sd == 0.0)
    }

    /// Alternative distribution function of a one-sided p-value at `c`.
    fn one_sided_cdf(&self, c: f64) -> f64 {
        if c <= 0.0 {
            return 0.0;
        }
        if c >= 1.0 {
            return 1.0;
        }
        if self.mu == 0.0 {
            return c;
        }
        (1.0 - self.p) * c + self.p * normal_sf(normal_isf(c) - self.mu)
    }

    /// Fills `buf` with one replicate of `n` p-values.
    pub fn draw(&self, rng: &mut ReplicateRng, buf: &mut Vec<f64>, n: usize) {
        let signals = match self.count_mode {
            CountMode::Binomial if self.p > 0.0 => Binomial::new(n as u64, self.p)
                .expect("validated mixing fraction")
                .sample(rng) as usize,
            CountMode::Binomial => 0,
            CountMode::Deterministic => ((n as f64 * self.p).round() as usize).min(n),
        };
        buf.clear();
        // Null p-values are exactly uniform whichever sidedness is used.
        buf.extend((0..n - signals).map(|_| rng.random::<f64>()));
        for _ in 0..signals {
            let z: f64 = rng.sample(StandardNormal);
            let delta = if self.delta_sd > 0.0 {
                self.mu + self.delta_sd * rng.sample::<f64, _>(StandardNormal)
            } else {
                self.mu
            };
            let x = delta + z;
            buf.push(match self.sided {
                Sided::One => normal_sf(x),
                Sided::Two => two_sided_p(x),
            });
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PowerMethod {
    Analytic,
    MonteCarlo,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PowerResult {
    pub power: f64,
    pub method: PowerMethod,
    /// Split index of the transformed boundary (analytic only).
    #[serde(skip_serializing_if = "Option::is_none")]
    pub j0: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub se: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub replicates: Option<u64>,
}

fn check_analytic(kind: CurveKind, model: &MixtureModel) -> Result<()> {
    model.validate()?;
    if model.sided != Sided::One || model.delta_sd != 0.0 {
        return Err(domain_err!("analytic power needs one-sided p-values and a fixed signal mean"));
    }
    if kind == CurveKind::Mhc {
        return Err(domain_err!("analytic power is not available for the modified HC statistic"));
    }
    Ok(())
}

/// `d_k = (1 - p) c_k + p {1 - Phi[Phi^{-1}(1 - c_k) - delta]}` for `k = k0..=k1`.
pub fn transform_boundary(
    kind: CurveKind,
    n: usize,
    b: f64,
    k0: usize,
    k1: usize,
    model: &MixtureModel,
) -> Result<Vec<f64>> {
    check_analytic(kind, model)?;
    let bv = crate::boundary::boundary_vector(kind, n, b, k0, k1)?;
    Ok(bv.c.iter().map(|&c| model.one_sided_cdf(c)).collect())
}

/// Index after the last strictly concave second difference of `d`
/// (`d[0]` is the value at `k0`).
pub fn split_index(d: &[f64], k0: usize) -> usize {
    let last_concave = (1..d.len().saturating_sub(1))
        .rev()
        .find(|&i| d[i + 1] - 2.0 * d[i] + d[i - 1] < -1e-12);
    match last_concave {
        Some(i) => k0 + i + 1,
        None => k0,
    }
}

/// Hybrid exact/approximate power for one-sided p-values and fixed `delta`.
pub fn analytic_power(kind: CurveKind, n: usize, b: f64, k0: usize, k1: usize, model: &MixtureModel) -> Result<PowerResult> {
    let d = transform_boundary(kind, n, b, k0, k1, model)?;
    if model.is_null() {
        return Ok(PowerResult {
            power: tail_pvalue(kind, n, b, k0, k1)?.p_value,
            method: PowerMethod::Analytic,
            j0: None,
            se: None,
            replicates: None,
        });
    }
    let j0 = split_index(&d, k0);
    if j0 >= k1 {
        return Err(Error::Numeric(format!(
            "transformed boundary has no convex tail before k1 = {k1} (split index {j0})"
        )));
    }
    let hybrid = Hybrid::new(n, k0, k1, j0, &d);
    let power = hybrid.power()?;
    Ok(PowerResult {
        power: power.clamp(0.0, 1.0),
        method: PowerMethod::Analytic,
        j0: Some(j0),
        se: None,
        replicates: None,
    })
}

struct Hybrid<'a> {
    n: usize,
    k0: usize,
    k1: usize,
    j0: usize,
    d: &'a [f64],
    table: LnFactorials,
}

impl<'a> Hybrid<'a> {
    fn new(n: usize, k0: usize, k1: usize, j0: usize, d: &'a [f64]) -> Self {
        Hybrid {
            n,
            k0,
            k1,
            j0,
            d,
            table: LnFactorials::new(n - j0),
        }
    }

    fn d_at(&self, k: usize) -> f64 {
        self.d[k - self.k0]
    }

    /// `P{U_(k) <= d_k for some k0 <= k < j0 | U_(j0) = x}`.
    fn g1(&self, x: f64) -> f64 {
        if self.j0 <= self.k0 {
            return 0.0;
        }
        let lower: Vec<f64> = (1..self.j0)
            .map(|k| if k >= self.k0 { (self.d_at(k) / x).min(1.0) } else { 0.0 })
            .collect();
        1.0 - noncrossing_lower_unchecked(&lower)
    }

    /// `P{U_(k) <= d_k for some j0 < k <= k1 | U_(j0) = x}` by the tail
    /// approximation on the rescaled suffix.
    fn g2(&self, x: f64) -> Result<f64> {
        let m = self.n - self.j0;
        let e: Vec<f64> = (self.j0 + 1..=self.k1)
            .map(|k| ((self.d_at(k) - x) / (1.0 - x)).max(0.0))
            .collect();
        let bv = suffix_boundary(m, e)?;
        Ok(generic_terms(&bv, &self.table).into_iter().collect::<NeumaierSum>().value())
    }

    fn integrand(&self, x: f64) -> f64 {
        let a = self.j0 as f64;
        let b = (self.n - self.j0 + 1) as f64;
        let dens = ln_beta_pdf(x, a, b).exp();
        if dens == 0.0 {
            return 0.0;
        }
        let g1 = self.g1(x);
        let g2 = self.g2(x).unwrap_or(f64::NAN).min(1.0);
        dens * (g1 + g2 - g1 * g2)
    }

    fn power(&self) -> Result<f64> {
        let a = self.j0 as f64;
        let b = (self.n - self.j0 + 1) as f64;
        let dj = self.d_at(self.j0);
        let head = beta_reg(a, b, dj);
        let upper = beta_upper_quantile(a, b, 1e-7);
        if upper <= dj {
            return Ok(head);
        }
        let integral = integrate(|x| self.integrand(x), dj, upper, 1e-4);
        if !integral.is_finite() {
            return Err(Error::Numeric("power integrand is not finite".into()));
        }
        Ok(head + integral)
    }
}

/// Rescaled suffix boundary on `1..=e.len()` for an `m`-sample with
/// forward-difference slopes (last slope copied).
pub(crate) fn suffix_boundary(m: usize, e: Vec<f64>) -> Result<BoundaryVector> {
    if e.windows(2).any(|w| w[1] < w[0]) {
        return Err(Error::Numeric("rescaled suffix boundary is not monotone".into()));
    }
    let mf = m as f64;
    let mut slopes: Vec<f64> = e.windows(2).map(|w| mf * (w[1] - w[0])).collect();
    let last = slopes.last().copied().unwrap_or(mf * e[0]);
    slopes.push(last);
    BoundaryVector::from_parts(m, 1, e, slopes)
}

/// Smallest `x` with `P{Beta(a, b) > x} <= tail`.
fn beta_upper_quantile(a: f64, b: f64, tail: f64) -> f64 {
    let (mut lo, mut hi) = (0.0, 1.0);
    for _ in 0..100 {
        let mid = 0.5 * (lo + hi);
        if 1.0 - beta_reg(a, b, mid) > tail {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    hi
}

/// Adaptive Simpson over 32 initial panels.
fn integrate(f: impl Fn(f64) -> f64, a: f64, b: f64, tol: f64) -> f64 {
    const PANELS: usize = 32;
    let h = (b - a) / PANELS as f64;
    let mut total = NeumaierSum::new();
    for i in 0..PANELS {
        let (l, r) = (a + i as f64 * h, if i + 1 == PANELS { b } else { a + (i + 1) as f64 * h });
        let m = 0.5 * (l + r);
        let (fl, fm, fr) = (f(l), f(m), f(r));
        let whole = (r - l) / 6.0 * (fl + 4.0 * fm + fr);
        total.add(simpson(&f, l, r, fl, fm, fr, whole, tol / PANELS as f64, 30));
    }
    total.value()
}

#[allow(clippy::too_many_arguments)]
fn simpson(f: &impl Fn(f64) -> f64, a: f64, b: f64, fa: f64, fm: f64, fb: f64, whole: f64, tol: f64, depth: u32) -> f64 {
    let m = 0.5 * (a + b);
    let (lm, rm) = (0.5 * (a + m), 0.5 * (m + b));
    let (flm, frm) = (f(lm), f(rm));
    let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
    let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
    let delta = left + right - whole;
    if depth == 0 || delta.abs() <= 15.0 * tol {
        return left + right + delta / 15.0;
    }
    simpson(f, a, m, fa, flm, fm, left, tol / 2.0, depth - 1) + simpson(f, m, b, fm, frm, fb, right, tol / 2.0, depth - 1)
}

/// Simulated power of one statistic at threshold `b`.
pub fn mc_power(spec: &StatisticSpec, n: usize, b: f64, model: &MixtureModel, replicates: u64, seed: u64) -> Result<PowerResult> {
    Ok(mc_power_many(n, &[(*spec, b)], model, replicates, seed)?.remove(0))
}

/// Simulated power of several `(spec, b)` pairs on shared draws.
pub fn mc_power_many(
    n: usize,
    tests: &[(StatisticSpec, f64)],
    model: &MixtureModel,
    replicates: u64,
    seed: u64,
) -> Result<Vec<PowerResult>> {
    model.validate()?;
    if replicates == 0 {
        return Err(domain_err!("need at least one replicate"));
    }
    let rules = tests
        .iter()
        .map(|&(spec, b)| RejectionRule::new(spec, n, b))
        .collect::<Result<Vec<_>>>()?;
    let model = *model;
    let hits = count_rejections(n, replicates, seed, &rules, |rng, buf| model.draw(rng, buf, n));
    Ok(hits
        .into_iter()
        .map(|h| {
            let f = Frequency::new(h, replicates);
            PowerResult {
                power: f.estimate,
                method: PowerMethod::MonteCarlo,
                j0: None,
                se: Some(f.se),
                replicates: Some(replicates),
            }
        })
        .collect())
}
