//! Acceptance criteria 1-10. Each criterion prints its checks followed by a
//! single `criterion N: PASS|FAIL` line. Pass criterion numbers as arguments
//! to run a subset.
//!
//! A failing check listed in `DOCUMENTED` still fails its criterion, but does
//! not fail the process; any other failure does.

use std::time::Instant;

use hicrit::boundary::{defining_function, defining_residual};
use hicrit::bounds::simulate_bounds;
use hicrit::exact::{crossing_probability, noncrossing_probability, BandSpec};
use hicrit::montecarlo::null_exceedance;
use hicrit::power::{analytic_power, mc_power, mc_power_many, MixtureModel};
use hicrit::scan::{scan_power, PowerMode, ScanConfig, SynthConfig};
use hicrit::tail_approx::{beta_form_term, ou_pvalue_default};
use hicrit::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use statrs::distribution::{Binomial, Discrete};

/// Known discrepancies with the reference values, as `(criterion, check
/// prefix, reason)`.
const DOCUMENTED: [(usize, &str, &str); 1] = [(
    2,
    "mhc n=400   b=3.13 ",
    "the statistic as defined (k <= n/2, p_(k) >= 1/n) simulates to 0.047, also with an independent \
     implementation; the reference 0.053 lies between this and the variant without the k <= n/2 cap \
     (about 0.056, see below), and neither reading reproduces it",
)];

/// Collects the checks of one criterion.
#[derive(Default)]
struct Log {
    criterion: usize,
    failed: usize,
    undocumented: usize,
    total: usize,
}

impl Log {
    fn check(&mut self, ok: bool, line: String) {
        self.total += 1;
        if ok {
            println!("    [ ok ] {line}");
            return;
        }
        self.failed += 1;
        match DOCUMENTED.iter().find(|(c, prefix, _)| *c == self.criterion && line.starts_with(prefix)) {
            Some((_, _, reason)) => println!("    [FAIL] {line}\n           documented: {reason}"),
            None => {
                self.undocumented += 1;
                println!("    [FAIL] {line}");
            }
        }
    }

    fn note(&self, line: String) {
        println!("    {line}");
    }

    fn passed(&self) -> bool {
        self.failed == 0
    }
}

use CurveKind::{Bj, Hc, Jw, Mbj, Mhc};

/// Reference p-values: statistic, threshold, n, approximate p-value, simulated p-value.
const PVALUES: [(CurveKind, f64, usize, f64, f64); 24] = [
    (Hc, 4.83, 400, 0.05, 0.048),
    (Hc, 10.0, 400, 0.01, 0.01),
    (Hc, 10.0, 1000, 0.01, 0.010),
    (Hc, 10.0, 5000, 0.01, 0.010),
    (Hc, 10.0, 30_000, 0.01, 0.010),
    (Hc, 31.0, 1000, 0.001, 0.0009),
    (Mhc, 3.13, 400, 0.05, 0.053),
    (Mhc, 3.91, 400, 0.01, 0.010),
    (Mhc, 3.94, 1000, 0.01, 0.0101),
    (Mhc, 3.98, 5000, 0.01, 0.0098),
    (Mhc, 4.00, 30_000, 0.01, 0.010),
    (Mhc, 4.97, 1000, 0.001, 0.0010),
    (Bj, 2.90, 400, 0.05, 0.048),
    (Bj, 3.45, 400, 0.01, 0.010),
    (Bj, 3.50, 1000, 0.01, 0.0095),
    (Bj, 3.57, 5000, 0.01, 0.0098),
    (Bj, 3.63, 30_000, 0.01, 0.0096),
    (Bj, 4.14, 1000, 0.001, 0.0009),
    (Mbj, 2.80, 400, 0.05, 0.046),
    (Mbj, 3.35, 400, 0.01, 0.0094),
    (Mbj, 3.40, 1000, 0.01, 0.0094),
    (Mbj, 3.48, 5000, 0.01, 0.0098),
    (Mbj, 3.56, 30_000, 0.01, 0.0090),
    (Mbj, 4.04, 1000, 0.001, 0.0009),
];

/// Half a unit in the last printed digit of a reference entry.
fn half_unit(printed: f64) -> f64 {
    let s = format!("{printed}");
    let decimals = s.split_once('.').map_or(0, |(_, d)| d.len());
    0.5 * 10f64.powi(-(decimals as i32))
}

fn criterion_1(log: &mut Log) {
    for (kind, b, n, approx, _) in PVALUES {
        let p = tail_pvalue(kind, n, b, 1, n / 2).unwrap().p_value;
        let rel = (p - approx).abs() / approx;
        log.check(rel <= 0.10, format!("{kind:>3} n={n:<5} b={b:<5} p={p:.5} reference {approx} (rel {rel:.3})"));
    }
}

fn criterion_2(log: &mut Log) {
    const REPS: u64 = 100_000;
    for (i, n) in [400usize, 1000, 5000].into_iter().enumerate() {
        let rows: Vec<_> = PVALUES.iter().filter(|r| r.2 == n).collect();
        let tests: Vec<_> = rows.iter().map(|r| (StatisticSpec::default_for(r.0, n), r.1)).collect();
        let sims = null_exceedance(n, &tests, REPS, 20 + i as u64).unwrap();
        for (row, sim) in rows.iter().zip(sims) {
            let f = sim.simulated;
            let tol = 3.0 * f.se + half_unit(row.4);
            log.check(
                (f.estimate - row.4).abs() <= tol,
                format!("{:>3} n={n:<5} b={:<5} simulated {:.5} ± {:.5}, reference {}", row.0, row.1, f.estimate, f.se, row.4),
            );
        }
    }
    let uncapped = null_exceedance(400, &[(StatisticSpec::new(Mhc, 1, 400), 3.13)], REPS, 29).unwrap()[0].simulated;
    log.note(format!("for reference, mhc n=400 b=3.13 with k up to n: {:.5} ± {:.5}", uncapped.estimate, uncapped.se));
    log.note("rows at n = 30000 are outside the simulated range".into());
}

fn criterion_3(log: &mut Log) {
    let n = 1000;
    for (delta, p, want_hc, want_mbj) in [(2.5, 0.02, 0.68, 0.90), (4.0, 0.005, 0.89, 0.87)] {
        for (kind, want) in [(Hc, want_hc), (Mbj, want_mbj)] {
            let b = threshold(kind, n, 0.01, 1, n / 2).unwrap();
            let pw = analytic_power(kind, n, b, 1, n / 2, &MixtureModel::fixed(p, delta)).unwrap().power;
            log.check((pw - want).abs() <= 0.02, format!("{kind:>3} delta={delta} p={p}: {pw:.4}, reference {want}"));
        }
    }
}

/// Reference power scenarios at n <= 5000: n, mu, p, thresholds and power for HC, BJ, MHC, MBJ.
type PowerRow = (usize, f64, f64, [f64; 4], [f64; 4]);

const POWER_ROWS: [PowerRow; 9] = [
    (400, 4.0, 0.01, [4.83, 2.90, 3.13, 2.80], [0.91, 0.87, 0.51, 0.88]),
    (400, 1.5, 0.1, [4.83, 2.90, 3.13, 2.80], [0.54, 0.76, 0.73, 0.79]),
    (1000, 1.5, 0.08, [10.0, 3.50, 3.94, 3.40], [0.19, 0.82, 0.81, 0.81]),
    (1000, 4.0, 0.005, [10.0, 3.50, 3.94, 3.40], [0.85, 0.81, 0.43, 0.83]),
    (1000, 5.0, 0.002, [31.0, 4.14, 4.97, 4.04], [0.67, 0.60, 0.04, 0.62]),
    (1000, 2.0, 0.05, [31.0, 4.14, 4.97, 4.04], [0.11, 0.79, 0.78, 0.80]),
    (5000, 4.0, 0.001, [10.0, 3.57, 3.98, 3.48], [0.71, 0.65, 0.32, 0.66]),
    (5000, 3.0, 0.003, [10.0, 3.57, 3.98, 3.48], [0.53, 0.62, 0.55, 0.63]),
    (5000, 1.0, 0.08, [10.0, 3.57, 3.98, 3.48], [0.05, 0.81, 0.74, 0.78]),
];

const POWER_KINDS: [CurveKind; 4] = [Hc, Bj, Mhc, Mbj];

fn criterion_4(log: &mut Log) {
    // Every row at n <= 5000 is simulated; the criterion needs at least ten
    // matches covering all statistics and sample sizes.
    let mut matched = Vec::new();
    for (i, &(n, mu, p, bs, want)) in POWER_ROWS.iter().enumerate() {
        let tests: Vec<_> = POWER_KINDS.iter().zip(bs).map(|(&k, b)| (StatisticSpec::default_for(k, n), b)).collect();
        let res = mc_power_many(n, &tests, &MixtureModel::random_mean(p, mu), 10_000, 40 + i as u64).unwrap();
        for ((kind, r), want) in POWER_KINDS.iter().zip(res).zip(want) {
            let ok = (r.power - want).abs() <= 0.03;
            if ok {
                matched.push((*kind, n));
            }
            log.note(format!(
                "{} {kind:>3} n={n:<5} mu={mu} p={p:<5}: {:.3}, reference {want}",
                if ok { "match" } else { "miss " },
                r.power
            ));
        }
    }
    let kinds_ok = POWER_KINDS.iter().all(|k| matched.iter().any(|m| m.0 == *k));
    let ns_ok = [400, 1000, 5000].iter().all(|n| matched.iter().any(|m| m.1 == *n));
    log.check(
        matched.len() >= 10 && kinds_ok && ns_ok,
        format!("{} of 36 rows within ±0.03; all statistics {kinds_ok}, all n {ns_ok}", matched.len()),
    );
}

fn criterion_5(log: &mut Log) {
    for ((_, b, n, _, _), want) in PVALUES[6..12].iter().zip([0.036, 0.008, 0.008, 0.008, 0.008, 0.001]) {
        let p = darling_erdos_pvalue(*b, *n).unwrap();
        log.check((p - want).abs() <= half_unit(want), format!("Darling-Erdos MHC n={n:<5} b={b}: {p:.5}, reference {want}"));
    }
    for ((_, b, n, _, _), want) in PVALUES[12..18].iter().zip([0.054, 0.01, 0.01, 0.01, 0.01, 0.001]) {
        let p = ou_pvalue_default(*b, *n).unwrap().p_value;
        log.check((p - want).abs() <= 0.005, format!("OU BJ n={n:<5} b={b}: {p:.5}, reference {want}"));
    }
}

fn criterion_6(log: &mut Log) {
    const REPS: u32 = 1_000_000;
    const BOUNDARIES: usize = 50;
    let mut rng = ChaCha20Rng::seed_from_u64(6);
    let (mut beyond3, mut worst, mut closed_worst) = (0, 0.0f64, 0.0f64);
    for n in 1..=20usize {
        let boundaries: Vec<Vec<f64>> = (0..BOUNDARIES)
            .map(|_| {
                let scale = rng.random_range(0.05..1.0);
                let mut c: Vec<f64> = (0..n).map(|_| scale * rng.random::<f64>()).collect();
                c.sort_by(f64::total_cmp);
                c
            })
            .collect();
        let exact: Vec<f64> = boundaries
            .iter()
            .map(|c| crossing_probability(n, &BoundaryVector::from_parts(n, 1, c.clone(), vec![0.0; n]).unwrap()).unwrap())
            .collect();
        // One set of uniform order statistics serves all boundaries of this size.
        let mut hits = [0u32; BOUNDARIES];
        let mut u = vec![0.0; n];
        for _ in 0..REPS {
            u.iter_mut().for_each(|v| *v = rng.random());
            u.sort_unstable_by(f64::total_cmp);
            for (h, c) in hits.iter_mut().zip(&boundaries) {
                *h += u.iter().zip(c).any(|(x, b)| x <= b) as u32;
            }
        }
        for (h, &e) in hits.iter().zip(&exact) {
            let se = (e * (1.0 - e) / REPS as f64).sqrt().max(1.0 / REPS as f64);
            let z = (*h as f64 / REPS as f64 - e).abs() / se;
            worst = worst.max(z);
            beyond3 += (z > 3.0) as usize;
        }
        if n <= 3 {
            for c in &boundaries {
                let p = 1.0 - noncrossing_probability(&BandSpec::lower_only(c.clone()).unwrap()).unwrap();
                closed_worst = closed_worst.max((p - closed_form_crossing(c)).abs());
            }
        }
    }
    // Among 1000 comparisons about 2.7 exceed 3 SE by chance; 9 or more has
    // probability below 0.5%.
    log.check(
        beyond3 <= 8 && worst < 5.0,
        format!("{} boundaries, {beyond3} beyond 3 SE, largest deviation {worst:.2} SE", 20 * BOUNDARIES),
    );
    log.check(closed_worst < 1e-12, format!("closed forms at n <= 3: largest difference {closed_worst:.2e}"));
}

/// Crossing probability of uniform order statistics for n <= 3.
fn closed_form_crossing(c: &[f64]) -> f64 {
    let stay = match *c {
        [a1] => 1.0 - a1,
        [a1, a2] => 1.0 - a2 * a2 - 2.0 * a1 * (1.0 - a2),
        [a1, a2, a3] => {
            1.0 - 3.0 * a1 + 6.0 * a1 * a2 - 3.0 * a2 * a2 + 3.0 * a1 * a3 * a3 + 3.0 * a2 * a2 * a3
                - 6.0 * a1 * a2 * a3
                - a3 * a3 * a3
        }
        _ => unreachable!(),
    };
    1.0 - stay
}

fn criterion_7(log: &mut Log) {
    let b1000 = threshold(Jw, 1000, 0.01, 1, 500).unwrap();
    let b5000 = threshold(Jw, 5000, 0.01, 1, 2500).unwrap();
    log.check((b1000 - 1.54).abs() <= 0.02, format!("JW threshold n=1000: {b1000:.4}, reference 1.54"));
    log.check((b5000 - 1.62).abs() <= 0.02, format!("JW threshold n=5000: {b5000:.4}, reference 1.62"));
    for (i, want) in [0.84, 0.57, 0.27].into_iter().enumerate() {
        let (n, mu, p, _, _) = POWER_ROWS[2 + i];
        let r = mc_power(&StatisticSpec::default_for(Jw, n), n, b1000, &MixtureModel::random_mean(p, mu), 10_000, 70 + i as u64)
            .unwrap();
        log.check((r.power - want).abs() <= 0.03, format!("JW power n={n} mu={mu} p={p}: {:.3}, reference {want}", r.power));
    }
}

fn criterion_8(log: &mut Log) {
    let null = simulate_bounds(400, 0.05, 0.0, 0.0, 100_000, 80).unwrap();
    let se = (0.05f64 * 0.95 / 100_000.0).sqrt();
    for (name, rate) in [("MBJ", null.noncoverage_bj), ("MHC", null.noncoverage_hc)] {
        log.check(rate <= 0.05 + 3.0 * se, format!("null P(lambda_hat_{name} > 0) = {rate:.5} (bound {:.5})", 0.05 + 3.0 * se));
    }
    for (lambda, want) in [(0.2, [0.03, 0.97, 0.23, 0.21]), (0.5, [0.0003, 1.0, 0.14, 0.11])] {
        let s = simulate_bounds(400, 0.05, lambda, 3.0, 10_000, 81).unwrap();
        let got = [s.p_hc_greater, s.p_hc_less, s.rel_l2_hc, s.rel_l2_bj];
        let ok = got.iter().zip(want).all(|(g, w)| (g - w).abs() <= 0.03);
        log.check(ok, format!("lambda={lambda} mu=3: {got:.4?}, reference {want:?}"));
    }
}

/// Reference scan power row: mu, p and the power per statistic.
type ScanRow = (f64, f64, &'static [(CurveKind, f64)]);

fn criterion_9(log: &mut Log) {
    let (n_seq, t_len, max_len) = (674, 40_929, 20);
    let expected = [
        (Mbj, 0.05, 5.98, 0.02),
        (Mbj, 0.01, 6.24, 0.02),
        (Mhc, 0.05, 9.1, 0.02),
        (Mhc, 0.01, 9.79, 0.02),
        (Hc, 0.05, 21.5, 0.3),
        (Hc, 0.01, 26.0, 0.3),
    ];
    for (kind, alpha, want, tol) in expected {
        let b = ScanConfig::new(kind, max_len, alpha).threshold(n_seq, t_len).unwrap();
        log.check((b - want).abs() <= tol, format!("scan threshold {kind:>3} alpha={alpha}: {b:.3}, reference {want}"));
    }
    const REPS: u64 = 200;
    let rows: [ScanRow; 3] = [
        (2.0, 0.02, &[(Hc, 0.79), (Mhc, 0.55), (Mbj, 0.81)]),
        (1.5, 0.03, &[(Mbj, 0.47)]),
        (1.0, 0.09, &[(Mbj, 0.42)]),
    ];
    for (i, (mu, p, cells)) in rows.into_iter().enumerate() {
        let synth = SynthConfig {
            mu,
            p,
            ..SynthConfig::default()
        };
        let cfgs: Vec<_> = cells.iter().map(|&(k, _)| ScanConfig::new(k, max_len, 0.05)).collect();
        let res = scan_power(&synth, &cfgs, REPS, 90 + i as u64, PowerMode::Local).unwrap();
        for (r, &(kind, want)) in res.iter().zip(cells) {
            log.check(
                (r.power - want).abs() <= 0.05,
                format!("scan power {kind:>3} mu={mu} p={p}: {:.3} ± {:.3} ({REPS} reps), reference {want}", r.power, r.se),
            );
        }
    }
}

fn criterion_10(log: &mut Log) {
    let kinds = CurveKind::ALL;
    let xs: Vec<f64> = (1..100).map(|i| i as f64 / 100.0).collect();
    let xis: Vec<f64> = (1..=30).map(|i| i as f64 * 0.1).collect();

    let mut worst = 0.0f64;
    for kind in kinds {
        for &x in &xs {
            for &xi in &xis {
                let c = curve_value(kind, x, xi).unwrap();
                if c > 0.0 {
                    let scale = (defining_function(kind, x, c) - defining_residual(kind, x, c, xi)).abs().max(1.0);
                    worst = worst.max(defining_residual(kind, x, c, xi).abs() / scale);
                }
            }
        }
    }
    log.check(worst <= 1e-10, format!("boundary back-substitution: worst residual {worst:.2e}"));

    let mut worst = 0.0f64;
    for kind in kinds {
        for &x in xs.iter().filter(|&&x| x > 0.02 && x < 0.95) {
            for &xi in xis.iter().filter(|&&xi| xi <= 2.0) {
                let c = curve_value(kind, x, xi).unwrap();
                let h = 1e-5 * x;
                let lo = curve_value(kind, x - h, xi).unwrap();
                if c <= 1e-6 || lo <= 0.0 {
                    continue;
                }
                let fd = (curve_value(kind, x + h, xi).unwrap() - lo) / (2.0 * h);
                let d = curve_derivative(kind, x, xi, c).unwrap();
                worst = worst.max((d - fd).abs() / d.abs().max(1.0));
            }
        }
    }
    log.check(worst <= 1e-6, format!("slope vs central differences: worst {worst:.2e}"));

    let mut worst = 0.0f64;
    for n in [2u64, 10, 100, 1000, 5000] {
        for k in [1, n / 3, n / 2, n - 1].into_iter().filter(|&k| k >= 1) {
            for q in [0.05, 0.3, 0.9] {
                let c = q * k as f64 / n as f64;
                let oracle = Binomial::new(c, n).unwrap().pmf(k);
                if oracle > 1e-280 {
                    worst = worst.max((beta_form_term(n as usize, k as usize, c, 0.0) - oracle).abs() / oracle);
                }
            }
        }
    }
    log.check(worst <= 1e-10, format!("beta-density form vs binomial mass: worst {worst:.2e}"));

    let mut monotone = true;
    for kind in kinds {
        for n in [50usize, 400, 1000, 5000] {
            let b0 = threshold(kind, n, 0.2, 1, n / 2).unwrap();
            let sums: Vec<f64> = (0..40).map(|i| tail_pvalue(kind, n, b0 * (1.0 + 0.05 * i as f64), 1, n / 2).unwrap().raw_sum).collect();
            monotone &= sums.windows(2).all(|w| w[1] <= w[0] * (1.0 + 1e-12));
        }
    }
    log.check(monotone, "tail p-value nonincreasing in b".into());

    let mut rng = ChaCha20Rng::seed_from_u64(10);
    let (mut agree, mut checked) = (true, 0);
    for _ in 0..10_000 {
        let n: usize = rng.random_range(2..300);
        let kind = kinds[rng.random_range(0..kinds.len())];
        let p: Vec<f64> = (0..n).map(|_| rng.random::<f64>() * if rng.random::<f64>() < 0.1 { 1e-3 } else { 1.0 }).collect();
        let sample = PValueSample::new(p).unwrap();
        let spec = StatisticSpec::default_for(kind, n);
        let value = evaluate(&spec, &sample).unwrap().value;
        let b = if value.is_finite() && value > 0.0 { value * rng.random_range(0.5..1.5) } else { rng.random_range(0.1..5.0) };
        if (value - b).abs() <= 1e-9 * b {
            continue;
        }
        agree &= exceeds(&spec, &sample, b).unwrap() == (value >= b);
        checked += 1;
    }
    log.check(agree && checked > 9_900, format!("exceeds/evaluate agree on {checked} random samples"));

    let spec = StatisticSpec::default_for(Mbj, 300);
    let run = |threads| {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .unwrap()
            .install(|| null_exceedance(300, &[(spec, 2.9)], 5000, 17).unwrap()[0].simulated)
    };
    let (one, four) = (run(1), run(4));
    log.check(one == four, format!("Monte Carlo with 1 and 4 threads: {} vs {} hits", one.hits, four.hits));
}

type Criterion = (usize, &'static str, fn(&mut Log));

fn main() {
    let criteria: [Criterion; 10] = [
        (1, "tail approximation reproduces the approximate p-values", criterion_1),
        (2, "simulated null exceedance reproduces the simulation column", criterion_2),
        (3, "analytic power", criterion_3),
        (4, "simulated power spot checks", criterion_4),
        (5, "Darling-Erdos and Ornstein-Uhlenbeck approximations", criterion_5),
        (6, "exact crossing probabilities vs brute force and closed forms", criterion_6),
        (7, "JW thresholds and power", criterion_7),
        (8, "confidence bound calibration and comparison", criterion_8),
        (9, "scan thresholds and scan power", criterion_9),
        (10, "property suite", criterion_10),
    ];
    let selected: Vec<usize> = std::env::args().skip(1).filter_map(|a| a.parse().ok()).collect();
    let mut failures = Vec::new();
    let mut summary = Vec::new();
    for (id, title, run) in criteria {
        if !selected.is_empty() && !selected.contains(&id) {
            continue;
        }
        println!("criterion {id}: {title}");
        let start = Instant::now();
        let mut log = Log {
            criterion: id,
            ..Log::default()
        };
        run(&mut log);
        let verdict = if log.passed() { "PASS" } else { "FAIL" };
        let documented = log.failed - log.undocumented;
        let line = format!(
            "criterion {id}: {verdict} ({}/{} checks{}, {:.1} s)",
            log.total - log.failed,
            log.total,
            if documented > 0 { format!(", {documented} documented discrepancy") } else { String::new() },
            start.elapsed().as_secs_f64()
        );
        println!("{line}\n");
        summary.push(line);
        if log.undocumented > 0 {
            failures.push(id);
        }
    }
    println!("summary:");
    summary.iter().for_each(|l| println!("  {l}"));
    if !failures.is_empty() {
        eprintln!("criteria with undocumented failures: {failures:?}");
        std::process::exit(1);
    }
}
