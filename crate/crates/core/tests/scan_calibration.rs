use hicrit::scan::{scan, synthesize, ScanConfig, SynthConfig};
use hicrit::CurveKind;

/// Fraction of pure-noise datasets with at least one detection.
fn null_rate(n_seq: usize, t_len: usize, max_len: usize, kind: CurveKind, scans: u64) -> (f64, f64) {
    let cfg = ScanConfig::new(kind, max_len, 0.05);
    let mut any = 0u64;
    for seed in 0..scans {
        let synth = SynthConfig {
            n_seq,
            t_len,
            max_len,
            p: 0.0,
            mu: 0.0,
            seed: 10_000 + seed,
            layout: Vec::new(),
        };
        let ds = synthesize(&synth).unwrap();
        any += !scan(&ds, &cfg).unwrap().detections.is_empty() as u64;
    }
    let rate = any as f64 / scans as f64;
    (rate, (0.05 * 0.95 / scans as f64).sqrt())
}

#[test]
fn null_false_positive_rate_is_bounded() {
    for kind in [CurveKind::Hc, CurveKind::Mhc, CurveKind::Mbj] {
        let (rate, se) = null_rate(100, 500, 5, kind, 900);
        println!("{kind}: P(any detection) = {rate:.4} (bound {:.4})", 0.05 + 3.0 * se);
        assert!(rate <= 0.05 + 3.0 * se, "{kind}: {rate}");
    }
}

#[test]
#[ignore = "full-size null calibration, about an hour"]
fn null_false_positive_rate_full_size() {
    let (rate, se) = null_rate(674, 40_929, 20, CurveKind::Mbj, 900);
    assert!(rate <= 0.05 + 3.0 * se, "{rate}");
}
