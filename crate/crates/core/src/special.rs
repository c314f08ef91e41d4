//! Normal-distribution helpers, log-space binomial masses and compensated
//! summation shared by the numerical modules.

use std::f64::consts::{FRAC_1_SQRT_2, SQRT_2};

use statrs::function::erf::{erfc, erfc_inv};
use statrs::function::gamma::ln_gamma;

const LN_SQRT_2PI: f64 = 0.918_938_533_204_672_8;

/// Standard normal density.
pub fn normal_pdf(x: f64) -> f64 {
    (-0.5 * x * x - LN_SQRT_2PI).exp()
}

/// Upper tail `1 - Phi(x)`, accurate far into the tail.
pub fn normal_sf(x: f64) -> f64 {
    0.5 * erfc(x * FRAC_1_SQRT_2)
}

/// Inverse of the upper tail: returns `z` with `1 - Phi(z) = q`.
pub fn normal_isf(q: f64) -> f64 {
    SQRT_2 * erfc_inv(2.0 * q)
}

/// Two-sided normal p-value `2 (1 - Phi(|x|))`.
pub fn two_sided_p(x: f64) -> f64 {
    erfc(x.abs() * FRAC_1_SQRT_2).min(1.0)
}

/// The `|z|` whose two-sided p-value equals `p`.
pub fn two_sided_z(p: f64) -> f64 {
    SQRT_2 * erfc_inv(p)
}

/// Table of `ln k!` for `k = 0..=n`.
#[derive(Debug, Clone)]
pub struct LnFactorials {
    table: Vec<f64>,
}

impl LnFactorials {
    pub fn new(n: usize) -> Self {
        let mut table = Vec::with_capacity(n + 1);
        table.push(0.0);
        // Exact accumulation is fine for small k; switch to ln_gamma to avoid drift.
        for k in 1..=n {
            if k < 64 {
                let prev = table[k - 1];
                table.push(prev + (k as f64).ln());
            } else {
                table.push(ln_gamma(k as f64 + 1.0));
            }
        }
        LnFactorials { table }
    }

    pub fn max_n(&self) -> usize {
        self.table.len() - 1
    }

    #[inline]
    pub fn ln_fact(&self, k: usize) -> f64 {
        self.table[k]
    }

    #[inline]
    pub fn ln_choose(&self, n: usize, k: usize) -> f64 {
        debug_assert!(k <= n);
        self.table[n] - self.table[k] - self.table[n - k]
    }

    /// `ln P{Bin(n, c) = k}` given `ln c`; handles `c = 0` and `c = 1`.
    pub fn ln_binom_pmf(&self, n: usize, k: usize, ln_c: f64, ln_1mc: f64) -> f64 {
        let a = if k == 0 { 0.0 } else { k as f64 * ln_c };
        let b = if k == n { 0.0 } else { (n - k) as f64 * ln_1mc };
        self.ln_choose(n, k) + a + b
    }
}

/// `ln P{Bin(n, c) = k}` computed through the log-gamma function.
pub fn ln_binom_pmf(n: usize, k: usize, c: f64) -> f64 {
    if c <= 0.0 {
        return if k == 0 { 0.0 } else { f64::NEG_INFINITY };
    }
    if c >= 1.0 {
        return if k == n { 0.0 } else { f64::NEG_INFINITY };
    }
    let nf = n as f64;
    let kf = k as f64;
    ln_gamma(nf + 1.0) - ln_gamma(kf + 1.0) - ln_gamma(nf - kf + 1.0)
        + kf * c.ln()
        + (nf - kf) * (-c).ln_1p()
}

/// Log of the Beta(a, b) density at `x`.
pub fn ln_beta_pdf(x: f64, a: f64, b: f64) -> f64 {
    if x <= 0.0 || x >= 1.0 {
        return f64::NEG_INFINITY;
    }
    ln_gamma(a + b) - ln_gamma(a) - ln_gamma(b) + (a - 1.0) * x.ln() + (b - 1.0) * (-x).ln_1p()
}

/// `e^u - 1 - u` without cancellation for small `|u|`.
pub fn exp_m1_minus_x(u: f64) -> f64 {
    if u.abs() < 1e-2 {
        // Taylor series to u^7.
        let u2 = u * u;
        u2 * (0.5 + u * (1.0 / 6.0 + u * (1.0 / 24.0 + u * (1.0 / 120.0 + u * (1.0 / 720.0 + u / 5040.0)))))
    } else {
        u.exp_m1() - u
    }
}

/// Neumaier compensated accumulator.
#[derive(Debug, Clone, Copy, Default)]
pub struct NeumaierSum {
    sum: f64,
    comp: f64,
}

impl NeumaierSum {
    pub fn new() -> Self {
        Self::default()
    }

    #[inline]
    pub fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.comp += (self.sum - t) + x;
        } else {
            self.comp += (x - t) + self.sum;
        }
        self.sum = t;
    }

    pub fn value(&self) -> f64 {
        self.sum + self.comp
    }
}

impl std::iter::FromIterator<f64> for NeumaierSum {
    fn from_iter<I: IntoIterator<Item = f64>>(iter: I) -> Self {
        let mut acc = NeumaierSum::new();
        for x in iter {
            acc.add(x);
        }
        acc
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn normal_tail_roundtrip() {
        for &q in &[0.5, 0.1, 1e-3, 1e-8, 1e-30, 1e-200] {
            let z = normal_isf(q);
            assert!((normal_sf(z) / q - 1.0).abs() < 1e-10, "q={q}");
        }
        assert!((two_sided_p(1.959963984540054) / 0.05 - 1.0).abs() < 1e-10);
        assert!((two_sided_z(0.05) - 1.959963984540054).abs() < 1e-10);
    }

    #[test]
    fn binomial_masses_sum_to_one() {
        let table = LnFactorials::new(60);
        let c: f64 = 0.137;
        let s: f64 = (0..=60)
            .map(|k| table.ln_binom_pmf(60, k, c.ln(), (-c).ln_1p()).exp())
            .sum();
        assert!((s - 1.0).abs() < 1e-12);
        for k in [0, 1, 17, 60] {
            let a = table.ln_binom_pmf(60, k, c.ln(), (-c).ln_1p());
            assert!((a - ln_binom_pmf(60, k, c)).abs() < 1e-9);
        }
    }

    #[test]
    fn series_matches_direct() {
        for &u in &[-0.5f64, -0.011, -0.009, -1e-5, 0.003] {
            let direct = u.exp() - 1.0 - u;
            assert!((exp_m1_minus_x(u) - direct).abs() < 1e-12 * (1.0 + direct.abs()).max(direct.abs()) + 1e-16);
        }
    }

    #[test]
    fn compensated_sum() {
        let xs = [1e16, 1.0, -1e16, 1.0];
        let s: NeumaierSum = xs.iter().copied().collect();
        assert_eq!(s.value(), 2.0);
    }
}
