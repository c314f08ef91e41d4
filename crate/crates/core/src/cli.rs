//! Batch command-line front end.
//!
//! Every command prints one JSON object carrying a `schema` tag. With
//! `--manifest PATH` a run manifest (arguments, seed, version, wall-clock
//! time and the printed outputs) is written as well; `replay` re-executes a
//! manifest and checks that the outputs are reproduced exactly.
//!
//! Exit codes: 0 success, 2 input or domain error, 3 numeric failure.

use std::fs;
use std::io::Read;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};
use serde_json::{json, Map, Value};

use crate::boundary::{boundary_vector, CurveKind};
use crate::bounds::{lower_bound, BoundKind, BoundingSequence};
use crate::error::Error;
use crate::exact::{crossing_probability, exact_threshold};
use crate::montecarlo::null_exceedance;
use crate::power::{analytic_power, mc_power, CountMode, MixtureModel, Sided};
use crate::scan::{scan, scan_power, synthesize, Centering, PowerMode, ScanConfig, ScanDataset, SynthConfig, HCRT_MAGIC};
use crate::statistics::{evaluate, PValueSample, StatisticSpec};
use crate::tail_approx::{darling_erdos_pvalue, ou_pvalue_default, tail_pvalue, threshold};

pub const SCHEMA: &str = "hicrit/1";

#[derive(Parser, Debug)]
#[command(name = "hicrit", version, about = "Higher-criticism and Berk-Jones global tests")]
pub struct Cli {
    /// Worker threads (defaults to all cores).
    #[arg(long, global = true, env = "HICRIT_THREADS")]
    pub threads: Option<usize>,
    /// Also write a run manifest to this path.
    #[arg(long, global = true)]
    pub manifest: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug, Serialize)]
#[serde(tag = "command", rename_all = "kebab-case")]
pub enum Command {
    /// Evaluate a statistic on a file of p-values (one per line).
    Stat(StatArgs),
    /// Null tail probability P{T >= b}.
    Pvalue(PvalueArgs),
    /// Threshold b with P{T >= b} = alpha.
    Threshold(ThresholdArgs),
    /// Power under a sparse normal mixture.
    Power(PowerArgs),
    /// Simulated null exceedance next to the analytic approximation.
    SimulateNull(SimulateNullArgs),
    /// Lower confidence bound for the fraction of false nulls.
    LowerBound(LowerBoundArgs),
    /// Interval scan over a matrix of sequences.
    Scan(ScanArgs),
    /// Write a synthetic scan dataset.
    Synth(SynthArgs),
    /// Scan power on synthetic replicates.
    ScanPower(ScanPowerArgs),
    /// Re-run a manifest and compare outputs.
    Replay(ReplayArgs),
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::Stat(_) => "stat",
            Command::Pvalue(_) => "pvalue",
            Command::Threshold(_) => "threshold",
            Command::Power(_) => "power",
            Command::SimulateNull(_) => "simulate-null",
            Command::LowerBound(_) => "lower-bound",
            Command::Scan(_) => "scan",
            Command::Synth(_) => "synth",
            Command::ScanPower(_) => "scan-power",
            Command::Replay(_) => "replay",
        }
    }

    fn seed(&self) -> Option<u64> {
        match self {
            Command::Power(a) if !a.analytic => Some(a.seed),
            Command::SimulateNull(a) => Some(a.seed),
            Command::ScanPower(a) => Some(a.seed),
            Command::Scan(a) => a.synth.as_ref().map(|s| s.seed),
            Command::Synth(a) => Some(a.spec.seed),
            _ => None,
        }
    }
}

fn parse_kind(s: &str) -> Result<CurveKind, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

fn parse_bound_kind(s: &str) -> Result<BoundKind, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

fn parse_synth(s: &str) -> Result<SynthConfig, String> {
    parse_synth_spec(s).map_err(|e| e.to_string())
}

/// `key=value` list with keys `mu`, `p`, `seed`, `n`, `t`, `l` and
/// `layout` (`count x length` terms joined by `+`, e.g. `75x3+50x4`); unset
/// keys keep the defaults of the reference design.
pub fn parse_synth_spec(s: &str) -> crate::Result<SynthConfig> {
    let mut cfg = SynthConfig::default();
    for item in s.split(',').map(str::trim).filter(|i| !i.is_empty()) {
        let (key, value) = item
            .split_once('=')
            .ok_or_else(|| Error::Input(format!("expected key=value, got '{item}'")))?;
        let bad = || Error::Input(format!("cannot parse value '{value}' for '{key}'"));
        match key.trim() {
            "mu" => cfg.mu = value.parse().map_err(|_| bad())?,
            "p" => cfg.p = value.parse().map_err(|_| bad())?,
            "seed" => cfg.seed = value.parse().map_err(|_| bad())?,
            "n" => cfg.n_seq = value.parse().map_err(|_| bad())?,
            "t" => cfg.t_len = value.parse().map_err(|_| bad())?,
            "l" => cfg.max_len = value.parse().map_err(|_| bad())?,
            "layout" => {
                cfg.layout = value
                    .split('+')
                    .map(|term| {
                        let (c, l) = term.split_once('x').ok_or_else(bad)?;
                        Ok((c.trim().parse().map_err(|_| bad())?, l.trim().parse().map_err(|_| bad())?))
                    })
                    .collect::<crate::Result<_>>()?;
            }
            other => return Err(Error::Input(format!("unknown synthetic design key '{other}'"))),
        }
    }
    Ok(cfg)
}

#[derive(Args, Debug, Clone, Copy, Serialize, Deserialize)]
pub struct IndexArgs {
    /// First admissible index.
    #[arg(long, default_value_t = 1)]
    pub k0: usize,
    /// Last index as a fraction of n.
    #[arg(long, default_value_t = 0.5)]
    pub k1_frac: f64,
}

impl IndexArgs {
    fn spec(&self, kind: CurveKind, n: usize) -> crate::Result<StatisticSpec> {
        if !(self.k1_frac > 0.0 && self.k1_frac <= 1.0) {
            return Err(Error::Input(format!("--k1-frac {} must lie in (0, 1]", self.k1_frac)));
        }
        let spec = StatisticSpec::with_k1_fraction(kind, n, self.k0, self.k1_frac);
        spec.check(n)?;
        Ok(spec)
    }
}

#[derive(Args, Debug, Serialize)]
pub struct StatArgs {
    /// p-value file, one per line (`-` for stdin).
    pub input: PathBuf,
    #[arg(long, value_parser = parse_kind)]
    pub kind: CurveKind,
    #[command(flatten)]
    #[serde(flatten)]
    pub index: IndexArgs,
    /// Include every per-index term.
    #[arg(long)]
    pub terms: bool,
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum PvalueMethod {
    Approx,
    Exact,
    /// Darling-Erdos extreme-value approximation.
    De,
    /// Ornstein-Uhlenbeck approximation over t in (1/n, 1/2).
    Ou,
}

#[derive(Args, Debug, Serialize)]
pub struct PvalueArgs {
    #[arg(long, value_parser = parse_kind)]
    pub kind: CurveKind,
    #[arg(long)]
    pub n: usize,
    #[arg(long)]
    pub b: f64,
    #[command(flatten)]
    #[serde(flatten)]
    pub index: IndexArgs,
    #[arg(long, value_enum, default_value_t = PvalueMethod::Approx)]
    pub method: PvalueMethod,
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum ThresholdMethod {
    Approx,
    Exact,
}

#[derive(Args, Debug, Serialize)]
pub struct ThresholdArgs {
    #[arg(long, value_parser = parse_kind)]
    pub kind: CurveKind,
    #[arg(long)]
    pub n: usize,
    #[arg(long)]
    pub alpha: f64,
    #[command(flatten)]
    #[serde(flatten)]
    pub index: IndexArgs,
    #[arg(long, value_enum, default_value_t = ThresholdMethod::Approx)]
    pub method: ThresholdMethod,
}

#[derive(Args, Debug, Serialize)]
pub struct PowerArgs {
    #[arg(long, value_parser = parse_kind)]
    pub kind: CurveKind,
    #[arg(long)]
    pub n: usize,
    /// Level used to derive the threshold when `--b` is absent.
    #[arg(long, default_value_t = 0.05)]
    pub alpha: f64,
    #[arg(long)]
    pub b: Option<f64>,
    #[command(flatten)]
    #[serde(flatten)]
    pub index: IndexArgs,
    /// Mixing fraction.
    #[arg(long)]
    pub p: f64,
    /// Signal mean.
    #[arg(long)]
    pub mu: f64,
    /// Standard deviation of the signal mean (default 0.1).
    #[arg(long)]
    pub delta_sd: Option<f64>,
    /// One-sided p-values (simulation defaults to two-sided).
    #[arg(long)]
    pub one_sided: bool,
    /// Exactly round(n p) signals instead of a binomial count.
    #[arg(long)]
    pub fixed_count: bool,
    /// Analytic approximation (one-sided, fixed signal mean).
    #[arg(long)]
    pub analytic: bool,
    #[arg(long, default_value_t = 10_000)]
    pub reps: u64,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
}

#[derive(Args, Debug, Serialize)]
pub struct SimulateNullArgs {
    #[arg(long, value_parser = parse_kind)]
    pub kind: CurveKind,
    #[arg(long)]
    pub n: usize,
    #[arg(long, default_value_t = 0.05)]
    pub alpha: f64,
    #[arg(long)]
    pub b: Option<f64>,
    #[command(flatten)]
    #[serde(flatten)]
    pub index: IndexArgs,
    #[arg(long, default_value_t = 10_000)]
    pub reps: u64,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
}

#[derive(Args, Debug, Serialize)]
pub struct LowerBoundArgs {
    /// p-value file, one per line (`-` for stdin).
    pub input: PathBuf,
    #[arg(long, value_parser = parse_bound_kind, default_value = "mbj")]
    pub kind: BoundKind,
    #[arg(long, default_value_t = 0.05)]
    pub alpha: f64,
}

#[derive(Args, Debug, Serialize)]
pub struct ScanArgs {
    /// Matrix file: CSV (one sequence per line) or HCRT binary.
    #[arg(long, conflicts_with = "synth", required_unless_present = "synth")]
    pub data: Option<PathBuf>,
    /// Synthetic design, e.g. `mu=2,p=0.02,seed=7`.
    #[arg(long, value_parser = parse_synth)]
    pub synth: Option<SynthConfig>,
    #[arg(long, value_parser = parse_kind, default_value = "mbj")]
    pub kind: CurveKind,
    #[arg(long, default_value_t = 0.05)]
    pub alpha: f64,
    /// Maximum interval length (synthetic designs use their own `l`).
    #[arg(long, default_value_t = 20)]
    pub max_len: usize,
    /// Defaults to 4 for HC and 1 otherwise.
    #[arg(long)]
    pub k0: Option<usize>,
    #[arg(long, default_value_t = 0.5)]
    pub k1_frac: f64,
    /// Noise scale shared by all sequences of a data file.
    #[arg(long, default_value_t = 1.0)]
    pub sigma: f64,
    #[arg(long, value_enum, default_value_t = CenteringArg::Mean)]
    pub centering: CenteringArg,
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum CenteringArg {
    Mean,
    Median,
}

impl From<CenteringArg> for Centering {
    fn from(c: CenteringArg) -> Self {
        match c {
            CenteringArg::Mean => Centering::Mean,
            CenteringArg::Median => Centering::Median,
        }
    }
}

#[derive(Args, Debug, Serialize)]
pub struct SynthArgs {
    /// Design, e.g. `mu=2,p=0.02,seed=7,n=674,t=40929,l=20`.
    #[arg(long, value_parser = parse_synth, default_value = "")]
    pub spec: SynthConfig,
    /// Output file; `.csv` writes CSV, anything else HCRT binary.
    #[arg(long)]
    pub out: PathBuf,
    /// Also write the planted intervals as JSON.
    #[arg(long)]
    pub truth: Option<PathBuf>,
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum ModeArg {
    Local,
    Full,
}

#[derive(Args, Debug, Serialize)]
pub struct ScanPowerArgs {
    /// Design, e.g. `mu=2,p=0.02`; its seed is ignored in favour of `--seed`.
    #[arg(long, value_parser = parse_synth)]
    pub synth: SynthConfig,
    /// Comma-separated statistics.
    #[arg(long, value_delimiter = ',', value_parser = parse_kind, default_value = "hc,mhc,mbj")]
    pub kinds: Vec<CurveKind>,
    #[arg(long, default_value_t = 0.05)]
    pub alpha: f64,
    #[arg(long, default_value_t = 100)]
    pub reps: u64,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    #[arg(long, value_enum, default_value_t = ModeArg::Local)]
    pub mode: ModeArg,
}

#[derive(Args, Debug, Serialize)]
pub struct ReplayArgs {
    /// Manifest written by an earlier `--manifest` run.
    pub path: PathBuf,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub schema: String,
    pub command: String,
    /// Arguments after the program name, without `--manifest`.
    pub argv: Vec<String>,
    pub parameters: Value,
    pub seed: Option<u64>,
    pub version: String,
    pub wall_clock_seconds: f64,
    pub outputs: Value,
}

/// Failure with its process exit code.
#[derive(Debug, Clone, PartialEq)]
pub struct CliError {
    pub code: i32,
    pub message: String,
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        let code = match e {
            Error::Numeric(_) => 3,
            Error::Domain(_) | Error::Input(_) | Error::Size { .. } => 2,
        };
        CliError {
            code,
            message: e.to_string(),
        }
    }
}

fn io_error(path: &Path, e: std::io::Error) -> CliError {
    CliError {
        code: 2,
        message: format!("{}: {e}", path.display()),
    }
}

type CliResult<T> = std::result::Result<T, CliError>;

fn read_bytes(path: &Path) -> CliResult<Vec<u8>> {
    if path.as_os_str() == "-" {
        let mut buf = Vec::new();
        std::io::stdin().read_to_end(&mut buf).map_err(|e| io_error(path, e))?;
        Ok(buf)
    } else {
        fs::read(path).map_err(|e| io_error(path, e))
    }
}

/// One p-value per line; blank lines and `#` comments are skipped.
pub fn parse_pvalues(text: &str) -> crate::Result<PValueSample> {
    let mut p = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let v: f64 = line
            .parse()
            .map_err(|_| Error::Input(format!("line {}: cannot parse '{line}' as a number", i + 1)))?;
        if !(0.0..=1.0).contains(&v) {
            return Err(Error::Input(format!("line {}: p-value {v} outside [0, 1]", i + 1)));
        }
        p.push(v);
    }
    if p.is_empty() {
        return Err(Error::Input("no p-values in input".into()));
    }
    PValueSample::new(p)
}

fn read_pvalues(path: &Path) -> CliResult<PValueSample> {
    let bytes = read_bytes(path)?;
    let text = String::from_utf8(bytes).map_err(|_| CliError {
        code: 2,
        message: format!("{}: not UTF-8 text", path.display()),
    })?;
    Ok(parse_pvalues(&text)?)
}

fn read_matrix(path: &Path) -> CliResult<ScanDataset> {
    let bytes = read_bytes(path)?;
    if bytes.starts_with(HCRT_MAGIC) {
        return Ok(ScanDataset::from_hcrt(&bytes)?);
    }
    let text = String::from_utf8(bytes).map_err(|_| CliError {
        code: 2,
        message: format!("{}: neither HCRT binary nor UTF-8 CSV", path.display()),
    })?;
    Ok(ScanDataset::from_csv(&text)?)
}

fn to_value<T: Serialize>(v: &T) -> Value {
    serde_json::to_value(v).expect("serializable output")
}

/// Adds `schema` and `command` to an output object.
fn envelope(command: &str, body: Value) -> Value {
    let mut map = Map::new();
    map.insert("schema".into(), json!(SCHEMA));
    map.insert("command".into(), json!(command));
    if let Value::Object(fields) = body {
        map.extend(fields);
    }
    Value::Object(map)
}

fn resolve_b(kind: CurveKind, n: usize, spec: &StatisticSpec, b: Option<f64>, alpha: f64) -> crate::Result<f64> {
    match b {
        Some(b) => Ok(b),
        None => threshold(kind, n, alpha, spec.k0, spec.k1),
    }
}

/// Runs one parsed command and returns its JSON output.
pub fn execute(command: &Command) -> CliResult<Value> {
    let name = command.name();
    let body = match command {
        Command::Stat(a) => {
            let sample = read_pvalues(&a.input)?;
            let spec = a.index.spec(a.kind, sample.n())?;
            let res = if a.terms {
                crate::statistics::evaluate_with_terms(&spec, &sample)?
            } else {
                evaluate(&spec, &sample)?
            };
            let mut v = json!({"kind": a.kind, "n": sample.n(), "k0": spec.k0, "k1": spec.k1});
            merge(&mut v, to_value(&res));
            v
        }
        Command::Pvalue(a) => {
            let spec = a.index.spec(a.kind, a.n)?;
            let mut v = json!({"kind": a.kind, "n": a.n, "b": a.b, "k0": spec.k0, "k1": spec.k1, "method": a.method});
            let extra = match a.method {
                PvalueMethod::Approx => {
                    let r = tail_pvalue(a.kind, a.n, a.b, spec.k0, spec.k1)?;
                    json!({"p_value": r.p_value, "raw_sum": r.raw_sum, "clipped": r.clipped})
                }
                PvalueMethod::Exact => {
                    if a.kind == CurveKind::Mhc {
                        return Err(Error::Domain("the exact method does not cover the modified HC statistic".into()).into());
                    }
                    let bv = boundary_vector(a.kind, a.n, a.b, spec.k0, spec.k1)?;
                    json!({"p_value": crossing_probability(a.n, &bv)?})
                }
                PvalueMethod::De => json!({"p_value": darling_erdos_pvalue(a.b, a.n)?}),
                PvalueMethod::Ou => {
                    let r = ou_pvalue_default(a.b, a.n)?;
                    json!({"p_value": r.p_value, "t0": r.t0})
                }
            };
            merge(&mut v, extra);
            v
        }
        Command::Threshold(a) => {
            let spec = a.index.spec(a.kind, a.n)?;
            let b = match a.method {
                ThresholdMethod::Approx => threshold(a.kind, a.n, a.alpha, spec.k0, spec.k1)?,
                ThresholdMethod::Exact => {
                    if a.kind == CurveKind::Mhc {
                        return Err(Error::Domain("the exact method does not cover the modified HC statistic".into()).into());
                    }
                    exact_threshold(a.kind, a.n, a.alpha, spec.k0, spec.k1)?
                }
            };
            json!({"kind": a.kind, "n": a.n, "alpha": a.alpha, "k0": spec.k0, "k1": spec.k1, "method": a.method, "b": b})
        }
        Command::Power(a) => {
            let spec = a.index.spec(a.kind, a.n)?;
            let b = resolve_b(a.kind, a.n, &spec, a.b, a.alpha)?;
            let model = if a.analytic {
                MixtureModel::fixed(a.p, a.mu)
            } else {
                MixtureModel {
                    p: a.p,
                    mu: a.mu,
                    delta_sd: a.delta_sd.unwrap_or(0.1),
                    sided: if a.one_sided { Sided::One } else { Sided::Two },
                    count_mode: if a.fixed_count {
                        CountMode::Deterministic
                    } else {
                        CountMode::Binomial
                    },
                }
            };
            let res = if a.analytic {
                analytic_power(a.kind, a.n, b, spec.k0, spec.k1, &model)?
            } else {
                mc_power(&spec, a.n, b, &model, a.reps, a.seed)?
            };
            let mut v = json!({"kind": a.kind, "n": a.n, "b": b, "k0": spec.k0, "k1": spec.k1, "model": model});
            merge(&mut v, to_value(&res));
            v
        }
        Command::SimulateNull(a) => {
            let spec = a.index.spec(a.kind, a.n)?;
            let b = resolve_b(a.kind, a.n, &spec, a.b, a.alpha)?;
            let r = null_exceedance(a.n, &[(spec, b)], a.reps, a.seed)?.remove(0);
            to_value(&r)
        }
        Command::LowerBound(a) => {
            let sample = read_pvalues(&a.input)?;
            let seq = BoundingSequence::new(sample.n(), a.alpha)?;
            let r = lower_bound(a.kind, &sample, a.alpha)?;
            let mut v = json!({"n": sample.n(), "alpha": a.alpha, "bounding_sequence": seq});
            merge(&mut v, to_value(&r));
            v
        }
        Command::Scan(a) => run_scan(a)?,
        Command::Synth(a) => {
            let ds = synthesize(&a.spec)?;
            let bytes = if a.out.extension().is_some_and(|e| e.eq_ignore_ascii_case("csv")) {
                ds.to_csv().into_bytes()
            } else {
                ds.to_hcrt()
            };
            fs::write(&a.out, bytes).map_err(|e| io_error(&a.out, e))?;
            if let Some(path) = &a.truth {
                let text = serde_json::to_string_pretty(&ds.truth).expect("serializable truth");
                fs::write(path, text).map_err(|e| io_error(path, e))?;
            }
            json!({
                "design": a.spec,
                "out": a.out,
                "n_seq": ds.n_seq,
                "t_len": ds.t_len,
                "signal_intervals": ds.truth.len(),
                "carriers": ds.truth.iter().map(|t| t.carriers.len()).sum::<usize>(),
            })
        }
        Command::ScanPower(a) => {
            let configs: Vec<ScanConfig> = a
                .kinds
                .iter()
                .map(|&k| ScanConfig::new(k, a.synth.max_len, a.alpha))
                .collect();
            let mode = match a.mode {
                ModeArg::Local => PowerMode::Local,
                ModeArg::Full => PowerMode::Full,
            };
            let rows = scan_power(&a.synth, &configs, a.reps, a.seed, mode)?;
            json!({"design": a.synth, "alpha": a.alpha, "replicates": a.reps, "mode": mode, "rows": rows})
        }
        Command::Replay(a) => {
            let text = String::from_utf8(read_bytes(&a.path)?).map_err(|_| CliError {
                code: 2,
                message: format!("{}: not UTF-8", a.path.display()),
            })?;
            let manifest: RunManifest = serde_json::from_str(&text).map_err(|e| CliError {
                code: 2,
                message: format!("{}: not a run manifest: {e}", a.path.display()),
            })?;
            let argv = std::iter::once("hicrit".to_string()).chain(manifest.argv.iter().cloned());
            let cli = Cli::try_parse_from(argv).map_err(|e| CliError {
                code: 2,
                message: format!("manifest arguments do not parse: {e}"),
            })?;
            if matches!(cli.command, Command::Replay(_)) {
                return Err(Error::Input("a manifest cannot replay another replay".into()).into());
            }
            let outputs = execute(&cli.command)?;
            let reproduced = outputs == manifest.outputs;
            if !reproduced {
                return Err(CliError {
                    code: 3,
                    message: "replayed outputs differ from the manifest".into(),
                });
            }
            json!({"manifest": a.path, "reproduced": reproduced, "outputs": outputs})
        }
    };
    Ok(envelope(name, body))
}

fn merge(target: &mut Value, extra: Value) {
    if let (Value::Object(t), Value::Object(e)) = (target, extra) {
        t.extend(e);
    }
}

fn run_scan(a: &ScanArgs) -> CliResult<Value> {
    let (ds, max_len) = match (&a.data, &a.synth) {
        (Some(path), _) => {
            let mut ds = read_matrix(path)?;
            if !(a.sigma > 0.0 && a.sigma.is_finite()) {
                return Err(Error::Domain(format!("noise scale {} must be positive", a.sigma)).into());
            }
            ds.sigma = vec![a.sigma; ds.n_seq];
            (ds, a.max_len)
        }
        (None, Some(cfg)) => (synthesize(cfg)?, cfg.max_len),
        (None, None) => return Err(Error::Input("either --data or --synth is required".into()).into()),
    };
    if !(a.k1_frac > 0.0 && a.k1_frac < 1.0) {
        return Err(Error::Input(format!("--k1-frac {} must lie in (0, 1)", a.k1_frac)).into());
    }
    let mut cfg = ScanConfig::new(a.kind, max_len, a.alpha);
    if let Some(k0) = a.k0 {
        cfg.k0 = k0;
    }
    cfg.k1 = Some(((a.k1_frac * ds.n_seq as f64) as usize).max(cfg.k0));
    cfg.centering = a.centering.into();
    let res = scan(&ds, &cfg)?;
    let mut v = json!({
        "n_seq": ds.n_seq,
        "t_len": ds.t_len,
        "kind": cfg.kind,
        "k0": cfg.k0,
        "k1": cfg.k1,
        "max_len": cfg.max_len,
        "alpha": cfg.alpha,
    });
    merge(&mut v, to_value(&res));
    if !ds.truth.is_empty() {
        let hit = ds
            .truth
            .iter()
            .filter(|t| res.detections.iter().any(|d| d.interval.overlaps(&t.interval)))
            .count();
        let false_pos = res
            .detections
            .iter()
            .filter(|d| !ds.truth.iter().any(|t| t.interval.overlaps(&d.interval)))
            .count();
        merge(
            &mut v,
            json!({
                "signal_intervals": ds.truth.len(),
                "signal_detected": hit,
                "recall": hit as f64 / ds.truth.len() as f64,
                "unmatched_detections": false_pos,
            }),
        );
    }
    Ok(v)
}

fn configure_threads(threads: Option<usize>) -> CliResult<()> {
    match threads {
        Some(0) => Err(Error::Input("--threads must be at least 1".into()).into()),
        Some(t) => {
            // A second in-process run keeps the existing pool.
            let _ = rayon::ThreadPoolBuilder::new().num_threads(t).build_global();
            Ok(())
        }
        None => Ok(()),
    }
}

/// `argv` without `--manifest` and its value.
fn strip_manifest(argv: &[String]) -> Vec<String> {
    let mut out = Vec::with_capacity(argv.len());
    let mut skip = false;
    for a in argv {
        if skip {
            skip = false;
        } else if a == "--manifest" {
            skip = true;
        } else if !a.starts_with("--manifest=") {
            out.push(a.clone());
        }
    }
    out
}

/// Parses `argv` (including the program name), runs the command and returns
/// the exit code together with stdout and stderr text.
pub fn run(argv: &[String]) -> (i32, String, String) {
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let code = e.exit_code();
            let text = e.render().to_string();
            return if code == 0 { (0, text, String::new()) } else { (2, String::new(), text) };
        }
    };
    let started = Instant::now();
    let result = configure_threads(cli.threads).and_then(|_| execute(&cli.command));
    match result {
        Ok(out) => {
            if let Some(path) = &cli.manifest {
                let manifest = RunManifest {
                    schema: SCHEMA.into(),
                    command: cli.command.name().into(),
                    argv: strip_manifest(&argv[1..]),
                    parameters: to_value(&cli.command),
                    seed: cli.command.seed(),
                    version: env!("CARGO_PKG_VERSION").into(),
                    wall_clock_seconds: started.elapsed().as_secs_f64(),
                    outputs: out.clone(),
                };
                let text = serde_json::to_string_pretty(&manifest).expect("serializable manifest");
                if let Err(e) = fs::write(path, text) {
                    return (2, String::new(), format!("error: {}\n", io_error(path, e).message));
                }
            }
            let mut text = serde_json::to_string_pretty(&out).expect("serializable output");
            text.push('\n');
            (0, text, String::new())
        }
        Err(e) => (e.code, String::new(), format!("error: {}\n", e.message)),
    }
}
