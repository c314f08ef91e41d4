//! Multi-sequence interval scan.
//!
//! `N` aligned sequences of length `T` are observed with known noise scales.
//! For every candidate interval `I` of length at most `L`, each sequence
//! contributes the standardized interval sum
//! `z_n = sum_{t in I} (y_{n,t} - m_n) / (sigma_n sqrt|I|)`, whose two-sided
//! p-values feed one global statistic. Candidates are tested at the
//! Bonferroni level `alpha / (T L)`; overlapping detections are pruned
//! greedily by decreasing statistic value.
//!
//! Rejection is checked in `z`-space: `p_(k) <= c_k` is the same event as
//! the `k`-th largest `|z|` exceeding `z_k = Phi^{-1}(1 - c_k / 2)`, which
//! avoids an `erfc` and a sort per candidate.

use rand::seq::index::sample as sample_indices;
use rand::Rng;
use rand_distr::{Binomial, Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::boundary::{curve_point, CurveKind};
use crate::error::{domain_err, Error, Result};
use crate::rng::{replicate_rng, ReplicateRng};
use crate::special::{two_sided_p, two_sided_z};
use crate::statistics::{evaluate_prefix, PValueSample, StatisticSpec};
use crate::tail_approx::threshold;

/// Largest number of candidate intervals a scan may enumerate.
pub const MAX_CANDIDATES: u64 = 100_000_000;

/// Interval `[start, start + len)` with 0-based `start`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Interval {
    pub start: usize,
    pub len: usize,
}

impl Interval {
    pub fn end(&self) -> usize {
        self.start + self.len
    }

    pub fn overlaps(&self, other: &Interval) -> bool {
        self.start < other.end() && other.start < self.end()
    }
}

/// Planted signal: `mu` added to the carrier sequences over `interval`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TruthInterval {
    pub interval: Interval,
    pub carriers: Vec<usize>,
    pub mu: f64,
}

/// `N x T` observations stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct ScanDataset {
    pub n_seq: usize,
    pub t_len: usize,
    pub y: Vec<f64>,
    pub sigma: Vec<f64>,
    pub truth: Vec<TruthInterval>,
}

impl ScanDataset {
    pub fn new(n_seq: usize, t_len: usize, y: Vec<f64>, sigma: Vec<f64>) -> Result<Self> {
        if n_seq == 0 || t_len == 0 {
            return Err(Error::Input("scan data needs at least one sequence and one position".into()));
        }
        if y.len() != n_seq * t_len {
            return Err(Error::Input(format!(
                "expected {} observations for {n_seq} x {t_len}, got {}",
                n_seq * t_len,
                y.len()
            )));
        }
        if sigma.len() != n_seq {
            return Err(Error::Input(format!("expected {n_seq} noise scales, got {}", sigma.len())));
        }
        if let Some(s) = sigma.iter().find(|s| !(**s > 0.0 && s.is_finite())) {
            return Err(domain_err!("noise scale {s} must be positive"));
        }
        if let Some(i) = y.iter().position(|v| !v.is_finite()) {
            return Err(Error::Input(format!(
                "observation at sequence {}, position {} is not finite",
                i / t_len + 1,
                i % t_len + 1
            )));
        }
        Ok(ScanDataset {
            n_seq,
            t_len,
            y,
            sigma,
            truth: Vec::new(),
        })
    }

    pub fn row(&self, n: usize) -> &[f64] {
        &self.y[n * self.t_len..(n + 1) * self.t_len]
    }

    fn centers(&self, centering: Centering) -> Vec<f64> {
        (0..self.n_seq)
            .map(|n| {
                let row = self.row(n);
                match centering {
                    Centering::Mean => row.iter().sum::<f64>() / self.t_len as f64,
                    Centering::Median => {
                        let mut v = row.to_vec();
                        let mid = v.len() / 2;
                        let (_, m, _) = v.select_nth_unstable_by(mid, f64::total_cmp);
                        let upper = *m;
                        if v.len() % 2 == 1 {
                            upper
                        } else {
                            let lower = v[..mid].iter().copied().fold(f64::NEG_INFINITY, f64::max);
                            0.5 * (lower + upper)
                        }
                    }
                }
            })
            .collect()
    }
}

/// Magic bytes of the binary matrix format: `HCRT`, `u32 N`, `u32 T`,
/// four reserved zero bytes, then `N * T` little-endian `f64` row-major.
pub const HCRT_MAGIC: &[u8; 4] = b"HCRT";
const HCRT_HEADER: usize = 16;

impl ScanDataset {
    /// Unit noise scales.
    pub fn unit(n_seq: usize, t_len: usize, y: Vec<f64>) -> Result<Self> {
        Self::new(n_seq, t_len, y, vec![1.0; n_seq])
    }

    pub fn from_hcrt(bytes: &[u8]) -> Result<Self> {
        if bytes.len() < HCRT_HEADER || &bytes[..4] != HCRT_MAGIC {
            return Err(Error::Input("not an HCRT matrix (bad magic or short header)".into()));
        }
        let word = |i: usize| u32::from_le_bytes(bytes[i..i + 4].try_into().expect("4 bytes")) as usize;
        let (n_seq, t_len) = (word(4), word(8));
        let body = &bytes[HCRT_HEADER..];
        if body.len() != n_seq * t_len * 8 {
            return Err(Error::Input(format!(
                "HCRT body has {} bytes, expected {} for {n_seq} x {t_len}",
                body.len(),
                n_seq * t_len * 8
            )));
        }
        let y = body
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
            .collect();
        Self::unit(n_seq, t_len, y)
    }

    pub fn to_hcrt(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(HCRT_HEADER + 8 * self.y.len());
        out.extend_from_slice(HCRT_MAGIC);
        out.extend_from_slice(&(self.n_seq as u32).to_le_bytes());
        out.extend_from_slice(&(self.t_len as u32).to_le_bytes());
        out.extend_from_slice(&[0; 4]);
        for v in &self.y {
            out.extend_from_slice(&v.to_le_bytes());
        }
        out
    }

    /// One sequence per line, comma-separated.
    pub fn from_csv(text: &str) -> Result<Self> {
        let mut y = Vec::new();
        let mut t_len = None;
        let mut n_seq = 0;
        for (i, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let before = y.len();
            for field in line.split(',') {
                let v: f64 = field
                    .trim()
                    .parse()
                    .map_err(|_| Error::Input(format!("line {}: cannot parse '{}'", i + 1, field.trim())))?;
                y.push(v);
            }
            let width = y.len() - before;
            match t_len {
                None => t_len = Some(width),
                Some(t) if t != width => {
                    return Err(Error::Input(format!("line {} has {width} columns, expected {t}", i + 1)));
                }
                _ => {}
            }
            n_seq += 1;
        }
        let t_len = t_len.ok_or_else(|| Error::Input("empty matrix".into()))?;
        Self::unit(n_seq, t_len, y)
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        for n in 0..self.n_seq {
            let line: Vec<String> = self.row(n).iter().map(|v| v.to_string()).collect();
            out.push_str(&line.join(","));
            out.push('\n');
        }
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Centering {
    #[default]
    Mean,
    Median,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScanConfig {
    pub max_len: usize,
    pub alpha: f64,
    pub kind: CurveKind,
    pub k0: usize,
    /// Defaults to `floor(N / 2)`.
    pub k1: Option<usize>,
    pub centering: Centering,
}

impl ScanConfig {
    /// `k0 = 4` for HC (which is otherwise dominated by the smallest
    /// p-value at tiny levels), 1 for the other statistics.
    pub fn new(kind: CurveKind, max_len: usize, alpha: f64) -> Self {
        ScanConfig {
            max_len,
            alpha,
            kind,
            k0: if kind == CurveKind::Hc { 4 } else { 1 },
            k1: None,
            centering: Centering::Mean,
        }
    }

    pub fn spec(&self, n_seq: usize) -> StatisticSpec {
        StatisticSpec::new(self.kind, self.k0, self.k1.unwrap_or(n_seq / 2))
    }

    pub fn candidates(&self, t_len: usize) -> u64 {
        t_len as u64 * self.max_len as u64
    }

    pub fn per_interval_level(&self, t_len: usize) -> f64 {
        self.alpha / self.candidates(t_len) as f64
    }

    fn validate(&self, n_seq: usize, t_len: usize) -> Result<()> {
        if self.max_len == 0 || self.max_len > t_len {
            return Err(domain_err!("maximum interval length {} must lie in 1..={t_len}", self.max_len));
        }
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(domain_err!("level alpha = {} must lie in (0, 1)", self.alpha));
        }
        let c = self.candidates(t_len);
        if c > MAX_CANDIDATES {
            return Err(Error::Size {
                what: "T * L",
                value: c,
                limit: MAX_CANDIDATES,
            });
        }
        let spec = self.spec(n_seq);
        if spec.k1 >= n_seq || spec.k0 < 1 || spec.k0 > spec.k1 {
            return Err(domain_err!("index range {}..={} invalid for N = {n_seq}", spec.k0, spec.k1));
        }
        Ok(())
    }

    /// Threshold at the per-interval level.
    pub fn threshold(&self, n_seq: usize, t_len: usize) -> Result<f64> {
        self.validate(n_seq, t_len)?;
        let spec = self.spec(n_seq);
        threshold(self.kind, n_seq, self.per_interval_level(t_len), spec.k0, spec.k1)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Detection {
    pub interval: Interval,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScanResult {
    pub detections: Vec<Detection>,
    pub per_interval_threshold: f64,
    pub per_interval_level: f64,
    pub candidates: u64,
}

/// Sorted two-sided p-values of the standardized interval sums.
pub fn interval_pvalues(dataset: &ScanDataset, interval: Interval) -> Result<PValueSample> {
    interval_pvalues_centered(dataset, interval, Centering::Mean)
}

pub fn interval_pvalues_centered(dataset: &ScanDataset, interval: Interval, centering: Centering) -> Result<PValueSample> {
    if interval.len == 0 || interval.end() > dataset.t_len {
        return Err(domain_err!(
            "interval [{}, {}) outside 0..{}",
            interval.start,
            interval.end(),
            dataset.t_len
        ));
    }
    let centers = dataset.centers(centering);
    let root = (interval.len as f64).sqrt();
    let p = (0..dataset.n_seq)
        .map(|n| {
            let s: f64 = dataset.row(n)[interval.start..interval.end()].iter().map(|v| v - centers[n]).sum();
            two_sided_p(s / (dataset.sigma[n] * root))
        })
        .collect();
    PValueSample::new(p)
}

/// `z`-space rejection rule for one statistic.
#[derive(Debug, Clone)]
struct ZRule {
    spec: StatisticSpec,
    n_seq: usize,
    /// `z_k` for `k = k0..=k1`, nonincreasing.
    zt: Vec<f64>,
    /// For MHC: `|z|` above this means `p < 1/N` (inadmissible).
    z_max: Option<f64>,
    /// `lut[i]` is the bucket of the left end `lo + (i - 1) h` of cell `i`;
    /// cell 0 collects everything below the smallest finite threshold.
    lut: Vec<u32>,
    lo: f64,
    inv_h: f64,
}

const LUT_CELLS: usize = 8192;
const LUT_MIN_STEP: f64 = 1.0 / 1024.0;

impl ZRule {
    fn new(spec: StatisticSpec, n_seq: usize, b: f64) -> Result<Self> {
        let xi = b / (n_seq as f64).sqrt();
        let zt = (spec.k0..=spec.k1)
            .map(|k| {
                let c = curve_point(spec.kind, k as f64 / n_seq as f64, xi)?.c;
                Ok(if c <= 0.0 {
                    f64::INFINITY
                } else if c >= 1.0 {
                    0.0
                } else {
                    two_sided_z(c)
                })
            })
            .collect::<Result<Vec<f64>>>()?;
        let finite = || zt.iter().copied().filter(|z| z.is_finite());
        let lo = finite().fold(f64::INFINITY, f64::min);
        let hi = finite().fold(f64::NEG_INFINITY, f64::max);
        let (lo, h) = if lo.is_finite() {
            (lo, ((hi - lo) / (LUT_CELLS - 2) as f64).max(LUT_MIN_STEP))
        } else {
            (0.0, 1.0)
        };
        let lut = (0..LUT_CELLS)
            .map(|i| Self::bucket_exact(&zt, lo + (i as f64 - 1.0) * h) as u32)
            .collect();
        Ok(ZRule {
            spec,
            n_seq,
            zt,
            z_max: (spec.kind == CurveKind::Mhc).then(|| two_sided_z(1.0 / n_seq as f64)),
            lut,
            lo,
            inv_h: 1.0 / h,
        })
    }

    /// First `j` with `zt[j] <= a`.
    fn bucket_exact(zt: &[f64], a: f64) -> usize {
        zt.partition_point(|&z| z > a)
    }

    #[inline]
    fn bucket(&self, a: f64) -> usize {
        // Cells are exact except those containing a threshold; values above
        // the largest threshold land in the last cell and walk down.
        let x = ((a - self.lo) * self.inv_h + 1.0).clamp(0.0, (LUT_CELLS - 1) as f64);
        let mut f = self.lut[x as usize] as usize;
        while f > 0 && self.zt[f - 1] <= a {
            f -= 1;
        }
        f
    }

    /// True iff some admissible `k` has at least `k` values `|z| >= z_k`.
    fn rejects(&self, abs_z: &[f64], hist: &mut Vec<u32>) -> bool {
        // Four interleaved histograms break the store-to-load chain on the
        // (very common) "below every threshold" bucket.
        let w = self.zt.len() + 1;
        hist.clear();
        hist.resize(4 * w, 0);
        let mut chunks = abs_z.chunks_exact(4);
        for c in &mut chunks {
            hist[self.bucket(c[0])] += 1;
            hist[w + self.bucket(c[1])] += 1;
            hist[2 * w + self.bucket(c[2])] += 1;
            hist[3 * w + self.bucket(c[3])] += 1;
        }
        for &a in chunks.remainder() {
            hist[self.bucket(a)] += 1;
        }
        let mut cum = 0usize;
        let mut inadmissible = None;
        for j in 0..w - 1 {
            cum += (hist[j] + hist[w + j] + hist[2 * w + j] + hist[3 * w + j]) as usize;
            let k = self.spec.k0 + j;
            if cum >= k {
                let r = *inadmissible.get_or_insert_with(|| match self.z_max {
                    Some(zm) => abs_z.iter().filter(|&&a| a > zm).count(),
                    None => 0,
                });
                if k > r {
                    return true;
                }
            }
        }
        false
    }

    /// Statistic value from the standardized sums.
    fn value(&self, z: &[f64]) -> f64 {
        let mut p: Vec<f64> = z.iter().map(|&v| two_sided_p(v)).collect();
        p.sort_unstable_by(f64::total_cmp);
        evaluate_prefix(&self.spec, self.n_seq, &p).0
    }
}

/// Column-major prefix sums over a block of columns: entry `(c, n)` is the
/// sum of `y_{n, t}` for `start <= t < start + c`.
struct ColumnPrefix {
    n_seq: usize,
    start: usize,
    width: usize,
    sums: Vec<f64>,
}

impl ColumnPrefix {
    /// From column-major block data (`width` columns of `n_seq` values).
    fn from_columns(n_seq: usize, start: usize, width: usize, cols: &[f64]) -> Self {
        let mut sums = vec![0.0; (width + 1) * n_seq];
        for c in 0..width {
            for n in 0..n_seq {
                sums[(c + 1) * n_seq + n] = sums[c * n_seq + n] + cols[c * n_seq + n];
            }
        }
        ColumnPrefix {
            n_seq,
            start,
            width,
            sums,
        }
    }

    fn from_dataset(ds: &ScanDataset) -> Self {
        let (n_seq, t_len) = (ds.n_seq, ds.t_len);
        let mut sums = vec![0.0; (t_len + 1) * n_seq];
        for n in 0..n_seq {
            let row = ds.row(n);
            let mut acc = 0.0;
            for (t, &v) in row.iter().enumerate() {
                acc += v;
                sums[(t + 1) * n_seq + n] = acc;
            }
        }
        ColumnPrefix {
            n_seq,
            start: 0,
            width: t_len,
            sums,
        }
    }

    fn contains(&self, iv: Interval) -> bool {
        iv.start >= self.start && iv.end() <= self.start + self.width
    }

    /// Standardized sums and their absolute values for `iv`.
    fn z(&self, iv: Interval, centers: &[f64], inv_sigma: &[f64], z: &mut [f64], abs_z: &mut [f64]) {
        let a = (iv.start - self.start) * self.n_seq;
        let b = (iv.end() - self.start) * self.n_seq;
        let len = iv.len as f64;
        let inv_root = 1.0 / len.sqrt();
        let hi = &self.sums[b..b + self.n_seq];
        let lo = &self.sums[a..a + self.n_seq];
        for n in 0..self.n_seq {
            let v = (hi[n] - lo[n] - len * centers[n]) * inv_sigma[n] * inv_root;
            z[n] = v;
            abs_z[n] = v.abs();
        }
    }
}

/// Scans every interval of length `1..=L` inside `[0, T)`.
pub fn scan(dataset: &ScanDataset, config: &ScanConfig) -> Result<ScanResult> {
    let b = config.threshold(dataset.n_seq, dataset.t_len)?;
    let rule = ZRule::new(config.spec(dataset.n_seq), dataset.n_seq, b)?;
    let prefix = ColumnPrefix::from_dataset(dataset);
    let centers = dataset.centers(config.centering);
    let inv_sigma: Vec<f64> = dataset.sigma.iter().map(|s| 1.0 / s).collect();
    let n_seq = dataset.n_seq;
    let t_len = dataset.t_len;
    let max_len = config.max_len;

    let mut hits: Vec<Detection> = (0..t_len)
        .into_par_iter()
        .fold(
            || (vec![0.0; n_seq], vec![0.0; n_seq], Vec::new(), Vec::new()),
            |(mut z, mut abs_z, mut hist, mut found), start| {
                for len in 1..=max_len.min(t_len - start) {
                    let iv = Interval { start, len };
                    prefix.z(iv, &centers, &inv_sigma, &mut z, &mut abs_z);
                    if rule.rejects(&abs_z, &mut hist) {
                        found.push(Detection {
                            interval: iv,
                            value: rule.value(&z),
                        });
                    }
                }
                (z, abs_z, hist, found)
            },
        )
        .map(|(_, _, _, found)| found)
        .reduce(Vec::new, |mut a, mut b| {
            a.append(&mut b);
            a
        });
    let detections = prune(&mut hits);
    Ok(ScanResult {
        detections,
        per_interval_threshold: b,
        per_interval_level: config.per_interval_level(t_len),
        candidates: (0..t_len).map(|s| max_len.min(t_len - s) as u64).sum(),
    })
}

/// Greedy selection by decreasing value; ties broken by position so the
/// outcome is independent of discovery order.
fn prune(hits: &mut [Detection]) -> Vec<Detection> {
    hits.sort_by(|a, b| {
        b.value
            .total_cmp(&a.value)
            .then(a.interval.start.cmp(&b.interval.start))
            .then(a.interval.len.cmp(&b.interval.len))
    });
    let mut kept: Vec<Detection> = Vec::new();
    for d in hits.iter() {
        if kept.iter().all(|k| !k.interval.overlaps(&d.interval)) {
            kept.push(*d);
        }
    }
    kept.sort_by_key(|d| (d.interval.start, d.interval.len));
    kept
}

/// Synthetic design: signal intervals of the given lengths placed without
/// overlap, carriers drawn per interval.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthConfig {
    pub n_seq: usize,
    pub t_len: usize,
    pub max_len: usize,
    /// Probability that a sequence carries a given signal interval.
    pub p: f64,
    pub mu: f64,
    pub seed: u64,
    /// `(count, length)` pairs.
    pub layout: Vec<(usize, usize)>,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            n_seq: 674,
            t_len: 40_929,
            max_len: 20,
            p: 0.0,
            mu: 0.0,
            seed: 0,
            layout: vec![(75, 3), (50, 4), (25, 7), (5, 10)],
        }
    }
}

impl SynthConfig {
    fn validate(&self) -> Result<()> {
        if self.n_seq < 2 || self.t_len == 0 {
            return Err(domain_err!("synthetic design needs N >= 2 and T >= 1"));
        }
        if !(0.0..1.0).contains(&self.p) {
            return Err(domain_err!("carrier fraction p = {} must lie in [0, 1)", self.p));
        }
        if !self.mu.is_finite() {
            return Err(domain_err!("shift mu = {} must be finite", self.mu));
        }
        if let Some(&(_, len)) = self.layout.iter().find(|(_, len)| *len == 0 || *len > self.max_len) {
            return Err(domain_err!("signal length {len} outside 1..={}", self.max_len));
        }
        Ok(())
    }

    pub fn n_intervals(&self) -> usize {
        self.layout.iter().map(|(c, _)| c).sum()
    }
}

/// Places the signal intervals and draws carriers.
fn plant(cfg: &SynthConfig, rng: &mut ReplicateRng) -> Result<Vec<TruthInterval>> {
    let mut occupied = vec![false; cfg.t_len];
    let mut truth = Vec::with_capacity(cfg.n_intervals());
    let binom = (cfg.p > 0.0).then(|| Binomial::new(cfg.n_seq as u64, cfg.p).expect("validated p"));
    for &(count, len) in &cfg.layout {
        for _ in 0..count {
            if len > cfg.t_len {
                return Err(Error::Numeric(format!("signal length {len} exceeds T = {}", cfg.t_len)));
            }
            let start = (0..10_000)
                .map(|_| rng.random_range(0..=cfg.t_len - len))
                .find(|&s| !occupied[s..s + len].iter().any(|&o| o))
                .ok_or_else(|| Error::Numeric("could not place signal intervals without overlap".into()))?;
            occupied[start..start + len].fill(true);
            // Conditional on the interval carrying signal somewhere.
            let count = match &binom {
                Some(b) => loop {
                    let c = b.sample(rng) as usize;
                    if c > 0 {
                        break c;
                    }
                },
                None => 0,
            };
            let mut carriers = sample_indices(rng, cfg.n_seq, count).into_vec();
            carriers.sort_unstable();
            truth.push(TruthInterval {
                interval: Interval { start, len },
                carriers,
                mu: cfg.mu,
            });
        }
    }
    truth.sort_by_key(|t| t.interval.start);
    Ok(truth)
}

/// Full synthetic dataset with unit noise.
pub fn synthesize(cfg: &SynthConfig) -> Result<ScanDataset> {
    cfg.validate()?;
    let cells = cfg.n_seq as u64 * cfg.t_len as u64;
    if cells > 2_000_000_000 {
        return Err(Error::Size {
            what: "N * T",
            value: cells,
            limit: 2_000_000_000,
        });
    }
    let mut rng = replicate_rng(cfg.seed, 0);
    let truth = plant(cfg, &mut rng)?;
    let mut y: Vec<f64> = (0..cfg.n_seq * cfg.t_len).map(|_| rng.sample(StandardNormal)).collect();
    for t in &truth {
        for &n in &t.carriers {
            let row = &mut y[n * cfg.t_len..(n + 1) * cfg.t_len];
            row[t.interval.start..t.interval.end()].iter_mut().for_each(|v| *v += t.mu);
        }
    }
    let mut ds = ScanDataset::new(cfg.n_seq, cfg.t_len, y, vec![1.0; cfg.n_seq])?;
    ds.truth = truth;
    Ok(ds)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PowerMode {
    /// Full synthesis and full scan per replicate.
    Full,
    /// Only the cells near signal intervals are simulated, and only
    /// candidates overlapping a signal interval are tested.
    Local,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ScanPowerRow {
    pub kind: CurveKind,
    pub k0: usize,
    pub per_interval_threshold: f64,
    /// Fraction of signal intervals detected, over all replicates.
    pub power: f64,
    /// Standard error from the spread of the per-replicate fractions.
    pub se: f64,
    pub detected: u64,
    pub intervals: u64,
}

/// Scan power for several statistics on shared synthetic replicates.
pub fn scan_power(
    synth: &SynthConfig,
    configs: &[ScanConfig],
    replicates: u64,
    seed: u64,
    mode: PowerMode,
) -> Result<Vec<ScanPowerRow>> {
    synth.validate()?;
    if replicates == 0 {
        return Err(domain_err!("need at least one replicate"));
    }
    let (n_seq, t_len) = (synth.n_seq, synth.t_len);
    let mut rules = Vec::with_capacity(configs.len());
    let mut thresholds = Vec::with_capacity(configs.len());
    for cfg in configs {
        if cfg.max_len != synth.max_len {
            return Err(domain_err!("scan length {} differs from design length {}", cfg.max_len, synth.max_len));
        }
        let b = cfg.threshold(n_seq, t_len)?;
        thresholds.push(b);
        rules.push(ZRule::new(cfg.spec(n_seq), n_seq, b)?);
    }
    let per_rep: Vec<Vec<u64>> = (0..replicates)
        .into_par_iter()
        .map(|rep| {
            let cfg = SynthConfig {
                seed: rep,
                ..synth.clone()
            };
            match mode {
                PowerMode::Full => full_replicate(&cfg, seed, configs),
                PowerMode::Local => local_replicate(&cfg, seed, &rules),
            }
        })
        .collect::<Result<_>>()?;
    let per_replicate_intervals = synth.n_intervals() as u64;
    let total = per_replicate_intervals * replicates;
    Ok(configs
        .iter()
        .enumerate()
        .map(|(i, cfg)| {
            let detected: u64 = per_rep.iter().map(|r| r[i]).sum();
            let power = detected as f64 / total as f64;
            // Spread of the per-replicate fractions; binomial with one replicate.
            let se = if replicates > 1 {
                let m = per_replicate_intervals as f64;
                let ss: f64 = per_rep.iter().map(|r| (r[i] as f64 / m - power).powi(2)).sum();
                (ss / ((replicates - 1) * replicates) as f64).sqrt()
            } else {
                (power * (1.0 - power) / total as f64).sqrt()
            };
            ScanPowerRow {
                kind: cfg.kind,
                k0: cfg.k0,
                per_interval_threshold: thresholds[i],
                power,
                se,
                detected,
                intervals: total,
            }
        })
        .collect())
}

fn full_replicate(cfg: &SynthConfig, seed: u64, configs: &[ScanConfig]) -> Result<Vec<u64>> {
    let ds = synthesize(&SynthConfig {
        seed: seed ^ cfg.seed.wrapping_mul(0x9E37_79B9_7F4A_7C15),
        ..cfg.clone()
    })?;
    configs
        .iter()
        .map(|sc| {
            let res = scan(&ds, sc)?;
            Ok(ds
                .truth
                .iter()
                .filter(|t| res.detections.iter().any(|d| d.interval.overlaps(&t.interval)))
                .count() as u64)
        })
        .collect()
}

/// Simulates only the columns within `L - 1` of a signal interval; the
/// remaining columns enter only through the row means, whose noise part is
/// drawn as a single `N(0, T - W)` sum per row.
fn local_replicate(cfg: &SynthConfig, seed: u64, rules: &[ZRule]) -> Result<Vec<u64>> {
    let mut rng = replicate_rng(seed, cfg.seed);
    let truth = plant(cfg, &mut rng)?;
    let (n_seq, t_len, l) = (cfg.n_seq, cfg.t_len, cfg.max_len);

    // Merge the neighbourhoods of all signal intervals into disjoint blocks.
    let mut blocks: Vec<(usize, usize)> = Vec::new();
    for t in &truth {
        let lo = t.interval.start.saturating_sub(l - 1);
        let hi = (t.interval.end() + l - 1).min(t_len);
        match blocks.last_mut() {
            Some(last) if lo <= last.1 => last.1 = last.1.max(hi),
            _ => blocks.push((lo, hi)),
        }
    }
    let mut row_sums = vec![0.0; n_seq];
    let mut simulated = 0usize;
    let mut prefixes = Vec::with_capacity(blocks.len());
    for &(lo, hi) in &blocks {
        let width = hi - lo;
        simulated += width;
        let mut cols: Vec<f64> = (0..width * n_seq).map(|_| rng.sample(StandardNormal)).collect();
        for t in truth.iter().filter(|t| t.interval.start >= lo && t.interval.end() <= hi) {
            for c in t.interval.start..t.interval.end() {
                for &n in &t.carriers {
                    cols[(c - lo) * n_seq + n] += t.mu;
                }
            }
        }
        for c in 0..width {
            for n in 0..n_seq {
                row_sums[n] += cols[c * n_seq + n];
            }
        }
        prefixes.push(ColumnPrefix::from_columns(n_seq, lo, width, &cols));
    }
    let rest = ((t_len - simulated) as f64).sqrt();
    let centers: Vec<f64> = row_sums
        .iter()
        .map(|s| (s + rest * rng.sample::<f64, _>(StandardNormal)) / t_len as f64)
        .collect();
    let inv_sigma = vec![1.0; n_seq];

    let mut z = vec![0.0; n_seq];
    let mut abs_z = vec![0.0; n_seq];
    let mut hist = Vec::new();
    let mut detected = vec![0u64; rules.len()];
    for t in &truth {
        let block = prefixes.iter().find(|p| p.contains(t.interval)).expect("signal lies in its block");
        let mut pending: Vec<usize> = (0..rules.len()).collect();
        let first = t.interval.start.saturating_sub(l - 1);
        'candidates: for start in first..t.interval.end() {
            for len in 1..=l {
                let iv = Interval { start, len };
                if iv.end() > t_len {
                    break;
                }
                if !iv.overlaps(&t.interval) {
                    continue;
                }
                block.z(iv, &centers, &inv_sigma, &mut z, &mut abs_z);
                pending.retain(|&r| {
                    if rules[r].rejects(&abs_z, &mut hist) {
                        detected[r] += 1;
                        false
                    } else {
                        true
                    }
                });
                if pending.is_empty() {
                    break 'candidates;
                }
            }
        }
    }
    Ok(detected)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::statistics::exceeds;

    fn small_synth(p: f64, mu: f64, seed: u64) -> SynthConfig {
        SynthConfig {
            n_seq: 60,
            t_len: 400,
            max_len: 6,
            p,
            mu,
            seed,
            layout: vec![(4, 3), (2, 5)],
        }
    }

    #[test]
    fn zero_data_gives_unit_pvalues() {
        let ds = ScanDataset::new(3, 10, vec![0.0; 30], vec![1.0; 3]).unwrap();
        let p = interval_pvalues(&ds, Interval { start: 2, len: 4 }).unwrap();
        assert!(p.sorted().iter().all(|&v| v == 1.0));
    }

    #[test]
    fn long_series_recovers_shift() {
        let t_len = 100_000;
        let mut y = vec![0.0; t_len];
        y[10..15].fill(2.0);
        let ds = ScanDataset::new(1, t_len, y, vec![0.5]).unwrap();
        let p = interval_pvalues(&ds, Interval { start: 10, len: 5 }).unwrap().sorted()[0];
        let z = two_sided_z(p);
        assert!((z - 2.0 * 5f64.sqrt() / 0.5).abs() < 1e-3, "{z}");
    }

    #[test]
    fn zrule_matches_boundary_test() {
        let ds = synthesize(&small_synth(0.2, 1.5, 3)).unwrap();
        let prefix = ColumnPrefix::from_dataset(&ds);
        let centers = ds.centers(Centering::Mean);
        let inv = vec![1.0; ds.n_seq];
        let (mut z, mut a, mut hist) = (vec![0.0; 60], vec![0.0; 60], Vec::new());
        for kind in [CurveKind::Hc, CurveKind::Mhc, CurveKind::Mbj] {
            let spec = StatisticSpec::new(kind, if kind == CurveKind::Hc { 4 } else { 1 }, 30);
            for b in [2.0, 3.0, 5.0] {
                let rule = ZRule::new(spec, 60, b).unwrap();
                for start in (0..390).step_by(7) {
                    for len in [1, 3, 6] {
                        let iv = Interval { start, len };
                        prefix.z(iv, &centers, &inv, &mut z, &mut a);
                        let direct = exceeds(&spec, &interval_pvalues(&ds, iv).unwrap(), b).unwrap();
                        assert_eq!(rule.rejects(&a, &mut hist), direct, "{kind} b={b} {iv:?}");
                    }
                }
            }
        }
    }

    #[test]
    fn planted_signal_is_found() {
        let ds = synthesize(&small_synth(0.3, 2.5, 1)).unwrap();
        let res = scan(&ds, &ScanConfig::new(CurveKind::Mbj, 6, 0.05)).unwrap();
        let found = ds
            .truth
            .iter()
            .filter(|t| res.detections.iter().any(|d| d.interval.overlaps(&t.interval)))
            .count();
        assert!(found >= 5, "{found} of {}", ds.truth.len());
        for w in res.detections.windows(2) {
            assert!(!w[0].interval.overlaps(&w[1].interval));
        }
        assert!(res.detections.iter().all(|d| d.value >= res.per_interval_threshold));
    }

    #[test]
    fn row_constant_does_not_change_detections() {
        let mut ds = synthesize(&small_synth(0.3, 2.0, 4)).unwrap();
        let cfg = ScanConfig::new(CurveKind::Mbj, 6, 0.05);
        let before = scan(&ds, &cfg).unwrap();
        for v in &mut ds.y[5 * 400..6 * 400] {
            *v += 7.5;
        }
        let after = scan(&ds, &cfg).unwrap();
        let iv = |r: &ScanResult| r.detections.iter().map(|d| d.interval).collect::<Vec<_>>();
        assert_eq!(iv(&before), iv(&after));
    }

    #[test]
    fn null_pure_noise() {
        let ds = synthesize(&small_synth(0.0, 3.0, 9)).unwrap();
        assert!(ds.truth.iter().all(|t| t.carriers.is_empty()));
    }

    #[test]
    fn local_and_full_power_agree() {
        let synth = small_synth(0.15, 1.8, 0);
        let cfgs = [ScanConfig::new(CurveKind::Mbj, 6, 0.05)];
        let local = scan_power(&synth, &cfgs, 40, 11, PowerMode::Local).unwrap()[0];
        let full = scan_power(&synth, &cfgs, 40, 12, PowerMode::Full).unwrap()[0];
        let se = (local.se.powi(2) + full.se.powi(2)).sqrt();
        assert!((local.power - full.power).abs() < 4.0 * se + 0.02, "{local:?} {full:?}");
    }

    #[test]
    fn matrix_formats_round_trip() {
        let ds = synthesize(&small_synth(0.1, 1.0, 2)).unwrap();
        let back = ScanDataset::from_hcrt(&ds.to_hcrt()).unwrap();
        assert_eq!(back.y, ds.y);
        let back = ScanDataset::from_csv(&ds.to_csv()).unwrap();
        assert_eq!(back.y, ds.y);
        assert!(ScanDataset::from_hcrt(b"HCRX0000").is_err());
        assert!(ScanDataset::from_csv("1,2\n3\n").is_err());
        assert!(ScanDataset::from_csv("").is_err());
    }

    #[test]
    fn guards() {
        let ds = ScanDataset::new(4, 10, vec![0.0; 40], vec![1.0; 4]).unwrap();
        assert!(scan(&ds, &ScanConfig::new(CurveKind::Mbj, 11, 0.05)).is_err());
        assert!(ScanDataset::new(2, 2, vec![0.0; 4], vec![1.0, 0.0]).is_err());
        assert!(interval_pvalues(&ds, Interval { start: 8, len: 3 }).is_err());
        let big = ScanConfig::new(CurveKind::Mbj, 20, 0.05);
        assert!(matches!(big.validate(10, 10_000_000), Err(Error::Size { .. })));
    }
}
