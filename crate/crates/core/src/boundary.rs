//! Rejection-boundary curves.
//!
//! Each statistic kind rejects at threshold `b` exactly when some ordered
//! p-value satisfies `p_(k) <= C(k/n, b / sqrt(n))`. This module solves for
//! `C(x, xi)` and its slope `C'(x, xi)` in `x`.
//!
//! The Berk-Jones curves are solved in the variable `u = ln(c / x)`, which
//! keeps the root well scaled even when `c` itself underflows.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{domain_err, Error, Result};
use crate::special::exp_m1_minus_x;

/// Statistic family. `Mhc` shares the HC curve; only the admissible indices
/// differ.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CurveKind {
    Hc,
    Mhc,
    Bj,
    Mbj,
    Jw,
}

impl CurveKind {
    pub const ALL: [CurveKind; 5] = [
        CurveKind::Hc,
        CurveKind::Mhc,
        CurveKind::Bj,
        CurveKind::Mbj,
        CurveKind::Jw,
    ];

    pub fn name(self) -> &'static str {
        match self {
            CurveKind::Hc => "hc",
            CurveKind::Mhc => "mhc",
            CurveKind::Bj => "bj",
            CurveKind::Mbj => "mbj",
            CurveKind::Jw => "jw",
        }
    }

    /// Target value of the defining function `f_kind(x, c)`.
    fn target(self, xi: f64) -> f64 {
        match self {
            CurveKind::Hc | CurveKind::Mhc | CurveKind::Jw => xi,
            CurveKind::Bj | CurveKind::Mbj => 0.5 * xi * xi,
        }
    }
}

impl fmt::Display for CurveKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for CurveKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "hc" => Ok(CurveKind::Hc),
            "mhc" => Ok(CurveKind::Mhc),
            "bj" => Ok(CurveKind::Bj),
            "mbj" => Ok(CurveKind::Mbj),
            "jw" => Ok(CurveKind::Jw),
            other => Err(Error::Input(format!("unknown statistic kind '{other}'"))),
        }
    }
}

/// A solved point on a boundary curve.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BoundaryPoint {
    pub x: f64,
    pub xi: f64,
    pub c: f64,
    /// `ln c`; finite even when `c` underflows to zero (BJ, MBJ, HC), and
    /// `-inf` when the curve is truncated at zero (JW).
    pub ln_c: f64,
    pub c_prime: f64,
}

/// Defining function of each curve family. `C(x, xi)` is the root in
/// `c in (0, x)` of `defining_function(kind, x, c) = target(xi)`.
pub fn defining_function(kind: CurveKind, x: f64, c: f64) -> f64 {
    match kind {
        CurveKind::Hc | CurveKind::Mhc => (x - c) / (c * (1.0 - c)).sqrt(),
        CurveKind::Bj => x * (x / c).ln() + xlogy_ratio(1.0 - x, 1.0 - c),
        CurveKind::Mbj => x * (x / c).ln() - (x - c),
        CurveKind::Jw => x.sqrt() - c.sqrt(),
    }
}

/// `a ln(a / b)` with the `0 ln 0 = 0` convention.
fn xlogy_ratio(a: f64, b: f64) -> f64 {
    if a == 0.0 {
        0.0
    } else {
        a * (a / b).ln()
    }
}

/// Residual `f_kind(x, c) - target(xi)`.
pub fn defining_residual(kind: CurveKind, x: f64, c: f64, xi: f64) -> f64 {
    defining_function(kind, x, c) - kind.target(xi)
}

fn check_args(x: f64, xi: f64) -> Result<()> {
    if !(x > 0.0 && x <= 1.0) {
        return Err(domain_err!("curve argument x = {x} outside (0, 1]"));
    }
    if !(xi >= 0.0 && xi.is_finite()) {
        return Err(domain_err!("scaled threshold xi = {xi} must be finite and >= 0"));
    }
    Ok(())
}

/// `C(x, xi)`.
pub fn curve_value(kind: CurveKind, x: f64, xi: f64) -> Result<f64> {
    curve_point(kind, x, xi).map(|p| p.c)
}

/// Solves the curve at `(x, xi)` and returns value, log-value and slope.
pub fn curve_point(kind: CurveKind, x: f64, xi: f64) -> Result<BoundaryPoint> {
    check_args(x, xi)?;
    if xi == 0.0 {
        return Ok(BoundaryPoint {
            x,
            xi,
            c: x,
            ln_c: x.ln(),
            c_prime: 1.0,
        });
    }
    let (c, ln_c) = match kind {
        CurveKind::Hc | CurveKind::Mhc => {
            // Smaller root of (1 + xi^2) c^2 - (2x + xi^2) c + x^2 = 0, written
            // as x^2 / ((1 + xi^2) r_+) to avoid cancellation.
            let xi2 = xi * xi;
            let denom = 2.0 * x + xi2 + xi * (xi2 + 4.0 * x * (1.0 - x)).sqrt();
            let ln_c = std::f64::consts::LN_2 + 2.0 * x.ln() - denom.ln();
            (ln_c.exp(), ln_c)
        }
        CurveKind::Mbj => {
            let u = solve_mbj(x, 0.5 * xi * xi)?;
            let ln_c = x.ln() + u;
            (x * u.exp(), ln_c)
        }
        CurveKind::Bj => {
            let u = solve_bj(x, 0.5 * xi * xi)?;
            let ln_c = x.ln() + u;
            (x * u.exp(), ln_c)
        }
        CurveKind::Jw => {
            let r = x.sqrt() - xi;
            if r > 0.0 {
                (r * r, 2.0 * r.ln())
            } else {
                (0.0, f64::NEG_INFINITY)
            }
        }
    };
    let c_prime = slope(kind, x, xi, c, ln_c);
    Ok(BoundaryPoint {
        x,
        xi,
        c,
        ln_c,
        c_prime,
    })
}

/// Slope from the solved value; `ln_c` is used where `x / c` would overflow.
fn slope(kind: CurveKind, x: f64, xi: f64, c: f64, ln_c: f64) -> f64 {
    match kind {
        CurveKind::Hc | CurveKind::Mhc => {
            let xi2 = xi * xi;
            1.0 / (1.0 + xi2) - xi * (1.0 - 2.0 * x) / ((1.0 + xi2) * (xi2 + 4.0 * x * (1.0 - x)).sqrt())
        }
        CurveKind::Mbj => {
            // log(x/c) / (x/c - 1)
            let l = x.ln() - ln_c;
            if l < 1e-8 {
                1.0 - 0.5 * l
            } else if l > 700.0 {
                // x/c overflows; (x/c - 1) ~ x/c.
                l * (-l).exp()
            } else {
                l / l.exp_m1()
            }
        }
        CurveKind::Bj => {
            if x >= 1.0 {
                return f64::INFINITY;
            }
            let l = x.ln() - ln_c;
            let num = l - ((1.0 - x) / (1.0 - c)).ln();
            if l > 700.0 {
                num * (-l).exp()
            } else {
                let den = l.exp() - (1.0 - x) / (1.0 - c);
                if den <= 0.0 {
                    1.0
                } else {
                    num / den
                }
            }
        }
        CurveKind::Jw => (1.0 - xi / x.sqrt()).max(0.0),
    }
}

/// `C'(x, xi)` for a previously solved `c`. Rejects `(x, c)` pairs that are
/// not on the curve.
pub fn curve_derivative(kind: CurveKind, x: f64, xi: f64, c: f64) -> Result<f64> {
    check_args(x, xi)?;
    if xi == 0.0 {
        if (c - x).abs() > 1e-12 * x.max(1e-300) {
            return Err(domain_err!("c = {c} is not on the curve at xi = 0 (expected {x})"));
        }
        return Ok(1.0);
    }
    if !(c >= 0.0 && c < x) {
        return Err(domain_err!("boundary value c = {c} outside [0, x) for x = {x}"));
    }
    if kind == CurveKind::Jw && c == 0.0 {
        if x.sqrt() > xi * (1.0 + 1e-12) {
            return Err(domain_err!("c = 0 is not on the JW curve at x = {x}, xi = {xi}"));
        }
        return Ok(0.0);
    }
    if c == 0.0 {
        return Err(domain_err!("c = 0 is not on the {kind} curve"));
    }
    let target = kind.target(xi);
    let resid = defining_residual(kind, x, c, xi);
    if resid.abs() > 1e-8 * target.max(1e-12) && resid.abs() > 1e-12 {
        return Err(domain_err!(
            "(x = {x}, c = {c}) is inconsistent with the {kind} curve at xi = {xi} (residual {resid:e})"
        ));
    }
    Ok(slope(kind, x, xi, c, c.ln()))
}

/// Safeguarded Newton iteration on a decreasing function with `g(lo) > 0 >= g(hi)`.
fn solve_decreasing<G, D>(g: G, dg: D, mut lo: f64, mut hi: f64) -> Result<f64>
where
    G: Fn(f64) -> f64,
    D: Fn(f64) -> f64,
{
    let mut u = 0.5 * (lo + hi);
    for _ in 0..200 {
        let gu = g(u);
        if gu == 0.0 {
            return Ok(u);
        }
        if gu > 0.0 {
            lo = u;
        } else {
            hi = u;
        }
        let d = dg(u);
        let mut next = if d < 0.0 { u - gu / d } else { f64::NAN };
        if !(next > lo && next < hi) {
            next = 0.5 * (lo + hi);
        }
        if (next - u).abs() <= 4.0 * f64::EPSILON * u.abs().max(1e-300) || hi - lo <= 4.0 * f64::EPSILON * lo.abs().max(hi.abs()) {
            return Ok(next);
        }
        u = next;
    }
    if (hi - lo) < 1e-12 * lo.abs().max(1.0) {
        Ok(0.5 * (lo + hi))
    } else {
        Err(Error::Numeric(format!("boundary root did not converge in [{lo}, {hi}]")))
    }
}

/// Solves `e^u - 1 - u = t / x` for `u < 0`.
fn solve_mbj(x: f64, t: f64) -> Result<f64> {
    let r = t / x;
    let lo = -(r + 2.0);
    solve_decreasing(|u| exp_m1_minus_x(u) - r, |u| u.exp_m1(), lo, 0.0)
}

/// Solves `-x u - (1 - x) ln(1 - x (e^u - 1) / (1 - x)) = t` for `u < 0`.
fn solve_bj(x: f64, t: f64) -> Result<f64> {
    if x >= 1.0 {
        return Ok(-t);
    }
    let q = 1.0 - x;
    let g = |u: f64| -> f64 {
        // log((1 - x)/(1 - x e^u)) = -ln_1p(-x (e^u - 1)/(1 - x))
        -x * u - q * (-x * u.exp_m1() / q).ln_1p() - t
    };
    let dg = |u: f64| -> f64 { x * u.exp_m1() / (1.0 - x * u.exp()) };
    let lo = (-t + q * q.ln()) / x - 1.0;
    solve_decreasing(g, dg, lo, 0.0)
}

/// Boundary values over an index range `k0..=k1` for sample size `n` and
/// threshold `b` on the statistic scale.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BoundaryVector {
    pub n: usize,
    pub b: f64,
    pub k0: usize,
    pub k1: usize,
    pub c: Vec<f64>,
    pub ln_c: Vec<f64>,
    pub c_prime: Vec<f64>,
}

impl BoundaryVector {
    /// Builds a boundary from caller-supplied values and slopes.
    pub fn from_parts(n: usize, k0: usize, c: Vec<f64>, c_prime: Vec<f64>) -> Result<Self> {
        if c.is_empty() || c.len() != c_prime.len() {
            return Err(domain_err!("boundary needs equal, nonzero numbers of values and slopes"));
        }
        let k1 = k0 + c.len() - 1;
        if k0 == 0 || k1 > n {
            return Err(domain_err!("boundary indices {k0}..={k1} outside 1..={n}"));
        }
        let ln_c = c.iter().map(|&v| if v > 0.0 { v.ln() } else { f64::NEG_INFINITY }).collect();
        Ok(BoundaryVector {
            n,
            b: f64::NAN,
            k0,
            k1,
            c,
            ln_c,
            c_prime,
        })
    }

    pub fn len(&self) -> usize {
        self.c.len()
    }

    pub fn is_empty(&self) -> bool {
        self.c.is_empty()
    }

    /// Boundary value at order-statistic index `k` (1-based).
    pub fn at(&self, k: usize) -> Option<f64> {
        (k >= self.k0 && k <= self.k1).then(|| self.c[k - self.k0])
    }

    pub fn indices(&self) -> std::ops::RangeInclusive<usize> {
        self.k0..=self.k1
    }
}

/// `C(k/n, b/sqrt(n))` and slopes for `k = k0..=k1`.
pub fn boundary_vector(kind: CurveKind, n: usize, b: f64, k0: usize, k1: usize) -> Result<BoundaryVector> {
    if n < 2 || k0 < 1 || k0 > k1 || k1 > n - 1 {
        return Err(domain_err!("index range {k0}..={k1} invalid for n = {n} (need 1 <= k0 <= k1 <= n - 1)"));
    }
    if !(b > 0.0 && b.is_finite()) {
        return Err(domain_err!("threshold b = {b} must be positive and finite"));
    }
    let xi = b / (n as f64).sqrt();
    let len = k1 - k0 + 1;
    let mut c = Vec::with_capacity(len);
    let mut ln_c = Vec::with_capacity(len);
    let mut c_prime = Vec::with_capacity(len);
    for k in k0..=k1 {
        let p = curve_point(kind, k as f64 / n as f64, xi)?;
        c.push(p.c);
        ln_c.push(p.ln_c);
        c_prime.push(p.c_prime);
    }
    Ok(BoundaryVector {
        n,
        b,
        k0,
        k1,
        c,
        ln_c,
        c_prime,
    })
}

/// Second differences of `C(., xi)` over an even grid on `(0, x_max]`; the
/// minimum is a numerical convexity check (values `>= -1e-9` pass).
pub fn min_second_difference(kind: CurveKind, xi: f64, x_max: f64, points: usize) -> Result<f64> {
    let h = x_max / points as f64;
    let vals = (1..=points)
        .map(|i| curve_value(kind, i as f64 * h, xi))
        .collect::<Result<Vec<_>>>()?;
    Ok(vals
        .windows(3)
        .map(|w| w[2] - 2.0 * w[1] + w[0])
        .fold(f64::INFINITY, f64::min))
}
