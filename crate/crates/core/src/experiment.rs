//! Sweeps over the mean generation time `S = 1/λ`, figure-ready CSV output
//! and analytic/simulation cross-validation.
//!
//! A sweep writes `sweep.csv` with every metric plus one file per figure.
//! Each CSV starts with `#`-prefixed metadata lines (tool version, config
//! hash, seed base), then a single header line. Columns are only ever
//! appended at the end.

use std::fmt::Write as _;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::analytic::{fixed_metrics, FixedMetrics};
use crate::config::SystemConfig;
use crate::math::{log_space, mix_seed};
use crate::policy::{adaptive_params, fixed_params, Scheme};
use crate::sic::{MhTable, DEFAULT_MH_SAMPLES};
use crate::sim::{replicate, SimConfig, SimMetrics};
use crate::{Error, Result};

pub const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");

/// Column order of `sweep.csv`.
pub const SWEEP_COLUMNS: [&str; 19] = [
    "scheme",
    "source",
    "S_seconds",
    "pdr",
    "pdr_stderr",
    "mean_access_delay_s",
    "delay_stderr",
    "throughput_bps",
    "thr_stderr",
    "normalized_throughput",
    "nthr_stderr",
    "mean_aoi_s",
    "aoi_stderr",
    "cbr",
    "slots",
    "censored_flag",
    "pdr_per_message",
    "cbr_stderr",
    "pdr_mc_stderr",
];

/// Per-figure files: file name, value column, stderr column.
pub const FIGURE_FILES: [(&str, &str, &str); 5] = [
    ("fig1_pdr.csv", "pdr", "pdr_stderr"),
    (
        "fig2_access_delay.csv",
        "mean_access_delay_s",
        "delay_stderr",
    ),
    ("fig3_throughput.csv", "throughput_bps", "thr_stderr"),
    (
        "fig4_normalized_throughput.csv",
        "normalized_throughput",
        "nthr_stderr",
    ),
    ("fig5_aoi.csv", "mean_aoi_s", "aoi_stderr"),
];

pub const SWEEP_FILE: &str = "sweep.csv";
pub const MH_FILE: &str = "mh_table.csv";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Source {
    Sim,
    Analytic,
}

impl Source {
    pub fn as_str(self) -> &'static str {
        match self {
            Source::Sim => "sim",
            Source::Analytic => "analytic",
        }
    }
}

/// One line of `sweep.csv`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub scheme: Scheme,
    pub source: Source,
    #[serde(rename = "S_seconds")]
    pub s_seconds: f64,
    pub pdr: f64,
    pub pdr_stderr: f64,
    #[serde(rename = "mean_access_delay_s")]
    pub mean_access_delay: f64,
    pub delay_stderr: f64,
    pub throughput_bps: f64,
    pub thr_stderr: f64,
    pub normalized_throughput: f64,
    pub nthr_stderr: f64,
    #[serde(rename = "mean_aoi_s")]
    pub mean_aoi: f64,
    pub aoi_stderr: f64,
    pub cbr: f64,
    pub slots: u64,
    pub censored_flag: bool,
    pub pdr_per_message: f64,
    pub cbr_stderr: f64,
    /// Monte Carlo error of a closed-form `pdr` inherited from the `m_h`
    /// estimates; zero for simulated rows.
    pub pdr_mc_stderr: f64,
}

impl SweepRow {
    pub fn from_sim(scheme: Scheme, s: f64, m: &SimMetrics) -> Self {
        Self {
            scheme,
            source: Source::Sim,
            s_seconds: s,
            pdr: m.pdr,
            pdr_stderr: m.pdr_stderr,
            mean_access_delay: m.mean_access_delay,
            delay_stderr: m.delay_stderr,
            throughput_bps: m.throughput_bps,
            thr_stderr: m.throughput_stderr,
            normalized_throughput: m.normalized_throughput,
            nthr_stderr: m.nthr_stderr,
            mean_aoi: m.mean_aoi,
            aoi_stderr: m.aoi_stderr,
            cbr: m.cbr,
            slots: m.slots,
            censored_flag: m.censored,
            pdr_per_message: m.pdr_per_message,
            cbr_stderr: m.cbr_stderr,
            pdr_mc_stderr: 0.0,
        }
    }

    /// Closed-form row. Its standard-error columns are zero; the Monte
    /// Carlo error of `P_s` goes in `pdr_mc_stderr`.
    pub fn from_analytic(s: f64, m: &FixedMetrics) -> Self {
        Self {
            scheme: Scheme::Fixed,
            source: Source::Analytic,
            s_seconds: s,
            pdr: m.p_s,
            pdr_stderr: 0.0,
            mean_access_delay: m.ed,
            delay_stderr: 0.0,
            throughput_bps: m.theta_bps,
            thr_stderr: 0.0,
            normalized_throughput: m.theta_norm,
            nthr_stderr: 0.0,
            mean_aoi: m.ea,
            aoi_stderr: 0.0,
            cbr: m.cbr,
            slots: 0,
            censored_flag: false,
            pdr_per_message: m.theta_norm,
            cbr_stderr: 0.0,
            pdr_mc_stderr: m.p_s_mc_stderr,
        }
    }
}

/// What a sweep runs and where it writes.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepSpec {
    /// Mean generation times in seconds, strictly increasing.
    pub s_grid: Vec<f64>,
    pub schemes: Vec<Scheme>,
    pub sources: Vec<Source>,
    pub replications: usize,
    pub seed_base: u64,
    pub out_dir: PathBuf,
    /// Simulated seconds per replication; `None` uses [`default_horizon`].
    pub horizon: Option<f64>,
    /// Warm-up seconds; `None` uses 10% of the horizon.
    pub warmup: Option<f64>,
    /// Minimum post-warm-up slots per replication.
    pub min_slots: u64,
    pub mh_samples: u64,
    /// `m_h` cache file; `None` uses `out_dir/mh_table.csv`.
    pub mh_path: Option<PathBuf>,
}

impl SweepSpec {
    /// 40 log-spaced points over `[1 ms, 1 s]`, both schemes, simulation
    /// plus the fixed-scheme closed form.
    pub fn new(out_dir: impl Into<PathBuf>) -> Self {
        Self {
            s_grid: log_space(1e-3, 1.0, 40),
            schemes: vec![Scheme::Fixed, Scheme::Adaptive],
            sources: vec![Source::Sim, Source::Analytic],
            replications: 8,
            seed_base: 1,
            out_dir: out_dir.into(),
            horizon: None,
            warmup: None,
            min_slots: 100_000,
            mh_samples: DEFAULT_MH_SAMPLES,
            mh_path: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.s_grid.is_empty() {
            return Err(Error::config("S grid is empty"));
        }
        if self.s_grid.iter().any(|s| !(*s > 0.0 && s.is_finite())) {
            return Err(Error::config("S grid values must be positive"));
        }
        if self.s_grid.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::config("S grid must be strictly increasing"));
        }
        if self.schemes.is_empty() || self.sources.is_empty() {
            return Err(Error::config("no scheme or source selected"));
        }
        if self.replications == 0 {
            return Err(Error::config("replications must be at least 1"));
        }
        Ok(())
    }

    pub fn mh_path(&self) -> PathBuf {
        self.mh_path
            .clone()
            .unwrap_or_else(|| self.out_dir.join(MH_FILE))
    }

    /// Scheme/source pairs that produce rows. The closed form only exists
    /// for the fixed scheme.
    pub fn row_kinds(&self) -> Vec<(Scheme, Source)> {
        let mut kinds = Vec::new();
        for &scheme in &self.schemes {
            for &source in &self.sources {
                if source == Source::Sim || scheme == Scheme::Fixed {
                    kinds.push((scheme, source));
                }
            }
        }
        kinds
    }

    fn canonical(&self) -> String {
        let mut s = String::new();
        let _ = write!(
            s,
            "grid={:?};schemes={:?};sources={:?};reps={};seed={};horizon={:?};warmup={:?};min_slots={};mh_samples={}",
            self.s_grid,
            self.schemes,
            self.sources,
            self.replications,
            self.seed_base,
            self.horizon,
            self.warmup,
            self.min_slots,
            self.mh_samples
        );
        s
    }
}

/// Parses `log:LO:HI:N` or a comma-separated list of seconds.
pub fn parse_s_grid(text: &str) -> Result<Vec<f64>> {
    let bad = || Error::config(format!("cannot parse S grid {text:?}"));
    if let Some(rest) = text.strip_prefix("log:") {
        let parts: Vec<&str> = rest.split(':').collect();
        if parts.len() != 3 {
            return Err(bad());
        }
        let lo: f64 = parts[0].parse().map_err(|_| bad())?;
        let hi: f64 = parts[1].parse().map_err(|_| bad())?;
        let n: usize = parts[2].parse().map_err(|_| bad())?;
        if !(lo > 0.0 && hi >= lo && n >= 1) {
            return Err(bad());
        }
        return Ok(log_space(lo, hi, n));
    }
    text.split(',')
        .map(|p| p.trim().parse::<f64>().map_err(|_| bad()))
        .collect()
}

/// Simulated time per replication: long enough for hundreds of generation
/// periods and thousands of the longest slots.
pub fn default_horizon(s: f64, system: &SystemConfig) -> Result<f64> {
    let t_star = fixed_params(system)?.slot;
    Ok((200.0 * s).max(2000.0 * t_star))
}

/// SHA-256 over the system configuration and the sweep settings.
pub fn config_hash(system: &SystemConfig, spec: &SweepSpec) -> String {
    let mut hasher = Sha256::new();
    hasher.update(system.to_toml_string().as_bytes());
    hasher.update(spec.canonical().as_bytes());
    hasher.finalize().iter().fold(String::new(), |mut s, b| {
        let _ = write!(s, "{b:02x}");
        s
    })
}

fn point_seed(seed_base: u64, scheme: Scheme, index: usize) -> u64 {
    let stream = match scheme {
        Scheme::Fixed => 0,
        Scheme::Adaptive => 1 << 32,
    } + index as u64;
    mix_seed(seed_base, stream)
}

/// Output of [`sweep`].
#[derive(Debug, Clone)]
pub struct SweepOutput {
    pub rows: Vec<SweepRow>,
    pub files: Vec<PathBuf>,
}

/// Runs every requested scheme/source at every grid point and writes the
/// CSV files. Rows are ordered by scheme, then source, then `S`, whatever
/// order the parallel jobs finish in.
pub fn sweep(spec: &SweepSpec, system: &SystemConfig) -> Result<SweepOutput> {
    spec.validate()?;
    let kinds = spec.row_kinds();

    let analytic = if kinds.contains(&(Scheme::Fixed, Source::Analytic)) {
        let gamma = fixed_params(system)?.gamma;
        let path = spec.mh_path();
        let mut mh = MhTable::load_or_new(&path, system.epsilon())?;
        if mh.ensure(system.n(), gamma, spec.mh_samples, spec.seed_base)? > 0 {
            mh.save(&path)?;
        }
        Some(mh)
    } else {
        None
    };

    let jobs: Vec<(Scheme, Source, usize)> = kinds
        .iter()
        .flat_map(|&(scheme, source)| (0..spec.s_grid.len()).map(move |i| (scheme, source, i)))
        .collect();
    let rows: Vec<SweepRow> = jobs
        .par_iter()
        .map(|&(scheme, source, i)| {
            let s = spec.s_grid[i];
            let sys = system.with_lambda(1.0 / s)?;
            match source {
                Source::Analytic => {
                    let mh = analytic.as_ref().expect("m_h table prepared");
                    let m = fixed_metrics(&sys, mh)?;
                    Ok(SweepRow::from_analytic(s, &m))
                }
                Source::Sim => {
                    let horizon = match spec.horizon {
                        Some(h) => h,
                        None => default_horizon(s, &sys)?,
                    };
                    let cfg =
                        SimConfig::new(sys, scheme, horizon, point_seed(spec.seed_base, scheme, i))
                            .with_warmup(spec.warmup.unwrap_or(0.1 * horizon))
                            .with_min_slots(spec.min_slots);
                    let r = replicate(&cfg, spec.replications)?;
                    Ok(SweepRow::from_sim(scheme, s, &r.aggregate))
                }
            }
        })
        .collect::<Result<_>>()?;

    let files = write_sweep(&spec.out_dir, &rows, &metadata(system, spec))?;
    Ok(SweepOutput { rows, files })
}

fn metadata(system: &SystemConfig, spec: &SweepSpec) -> Vec<String> {
    vec![
        "sicma sweep".to_string(),
        format!("tool_version={TOOL_VERSION}"),
        format!("config_hash={}", config_hash(system, spec)),
        format!("seed_base={}", spec.seed_base),
        "units: S_seconds and delays in s; throughput_bps in bit/s (plot as kbit/s)".to_string(),
    ]
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    File::create(path)
        .map(BufWriter::new)
        .map_err(|e| Error::io(path, e))
}

fn write_meta(w: &mut impl Write, path: &Path, meta: &[String]) -> Result<()> {
    for line in meta {
        writeln!(w, "# {line}").map_err(|e| Error::io(path, e))?;
    }
    Ok(())
}

/// Writes `sweep.csv` and the five figure files into `dir`.
pub fn write_sweep(dir: &Path, rows: &[SweepRow], meta: &[String]) -> Result<Vec<PathBuf>> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut files = Vec::new();

    let path = dir.join(SWEEP_FILE);
    let mut out = create(&path)?;
    write_meta(&mut out, &path, meta)?;
    {
        let mut w = csv::Writer::from_writer(&mut out);
        for row in rows {
            w.serialize(row)?;
        }
        w.flush().map_err(|e| Error::io(&path, e))?;
    }
    out.flush().map_err(|e| Error::io(&path, e))?;
    files.push(path);

    for (name, value_col, stderr_col) in FIGURE_FILES {
        let path = dir.join(name);
        let mut out = create(&path)?;
        write_meta(&mut out, &path, meta)?;
        {
            let mut w = csv::Writer::from_writer(&mut out);
            w.write_record([
                "scheme",
                "source",
                "S_seconds",
                value_col,
                stderr_col,
                "censored_flag",
            ])?;
            for row in rows {
                let (v, se) = figure_value(row, value_col);
                w.write_record([
                    row.scheme.as_str().to_string(),
                    row.source.as_str().to_string(),
                    fmt_f64(row.s_seconds),
                    fmt_f64(v),
                    fmt_f64(se),
                    row.censored_flag.to_string(),
                ])?;
            }
            w.flush().map_err(|e| Error::io(&path, e))?;
        }
        out.flush().map_err(|e| Error::io(&path, e))?;
        files.push(path);
    }
    Ok(files)
}

fn fmt_f64(v: f64) -> String {
    // Same text the serde path produces for sweep.csv.
    let mut w = csv::WriterBuilder::new()
        .has_headers(false)
        .from_writer(vec![]);
    w.serialize(v).expect("float serializes");
    let bytes = w.into_inner().expect("in-memory writer");
    String::from_utf8(bytes)
        .expect("utf8")
        .trim_end()
        .to_string()
}

fn figure_value(row: &SweepRow, column: &str) -> (f64, f64) {
    match column {
        "pdr" => (row.pdr, row.pdr_stderr),
        "mean_access_delay_s" => (row.mean_access_delay, row.delay_stderr),
        "throughput_bps" => (row.throughput_bps, row.thr_stderr),
        "normalized_throughput" => (row.normalized_throughput, row.nthr_stderr),
        "mean_aoi_s" => (row.mean_aoi, row.aoi_stderr),
        other => unreachable!("unknown figure column {other}"),
    }
}

/// Reads a `sweep.csv` written by [`sweep`].
pub fn read_sweep(path: impl AsRef<Path>) -> Result<Vec<SweepRow>> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut rdr = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .from_reader(file);
    let headers = rdr.headers()?.clone();
    let expected = &SWEEP_COLUMNS[..];
    if headers.len() < expected.len() || headers.iter().zip(expected).any(|(a, b)| a != *b) {
        return Err(Error::Format {
            path: path.to_owned(),
            msg: format!("unexpected header {:?}", headers.iter().collect::<Vec<_>>()),
        });
    }
    rdr.deserialize().map(|r| r.map_err(Error::from)).collect()
}

/// The metrics checked by [`compare`].
pub const COMPARED_METRICS: [&str; 6] = [
    "pdr",
    "mean_access_delay",
    "throughput_bps",
    "normalized_throughput",
    "mean_aoi",
    "cbr",
];

/// Largest accepted |z|.
pub const Z_LIMIT: f64 = 3.0;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MetricCheck {
    pub s_seconds: f64,
    pub metric: String,
    pub analytic: f64,
    pub simulated: f64,
    /// Combined standard error used as the z denominator.
    pub stderr: f64,
    pub z: f64,
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ValidationReport {
    pub pass: bool,
    pub z_limit: f64,
    pub checks: Vec<MetricCheck>,
    /// Grid points without a counterpart in the other source.
    pub unmatched: Vec<f64>,
}

impl ValidationReport {
    pub fn failures(&self) -> impl Iterator<Item = &MetricCheck> {
        self.checks.iter().filter(|c| !c.pass)
    }

    pub fn summary(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(
            s,
            "{}: {} checks, {} failed (|z| <= {})",
            if self.pass { "PASS" } else { "FAIL" },
            self.checks.len(),
            self.failures().count(),
            self.z_limit
        );
        for c in self.failures() {
            let _ = writeln!(
                s,
                "  FAIL {} at S={}: analytic {:.6e} simulated {:.6e} z={:.2}",
                c.metric, c.s_seconds, c.analytic, c.simulated, c.z
            );
        }
        if let Some(worst) = self
            .checks
            .iter()
            .max_by(|a, b| a.z.abs().total_cmp(&b.z.abs()))
        {
            let _ = writeln!(
                s,
                "  max |z| = {:.2} ({} at S={})",
                worst.z.abs(),
                worst.metric,
                worst.s_seconds
            );
        }
        if !self.unmatched.is_empty() {
            let _ = writeln!(s, "  unmatched S values: {:?}", self.unmatched);
        }
        s
    }
}

fn metric_pair(row: &SweepRow, metric: &str) -> (f64, f64) {
    match metric {
        "pdr" => (row.pdr, row.pdr_stderr),
        "mean_access_delay" => (row.mean_access_delay, row.delay_stderr),
        "throughput_bps" => (row.throughput_bps, row.thr_stderr),
        "normalized_throughput" => (row.normalized_throughput, row.nthr_stderr),
        "mean_aoi" => (row.mean_aoi, row.aoi_stderr),
        "cbr" => (row.cbr, row.cbr_stderr),
        other => unreachable!("unknown metric {other}"),
    }
}

/// Standard error of a closed-form metric due to `pdr_mc_stderr`, by first
/// order propagation. Throughput scales with `P_s`; the age term
/// `E[Y]/P_s` moves by `E[Y] se / P_s^2` with `E[Y] = P_s S / Θ_norm`.
pub fn analytic_stderr(row: &SweepRow, metric: &str) -> f64 {
    let se = row.pdr_mc_stderr;
    if se == 0.0 {
        return metric_pair(row, metric).1;
    }
    let rel = se / row.pdr;
    match metric {
        "pdr" => se,
        "throughput_bps" => row.throughput_bps * rel,
        "normalized_throughput" => row.normalized_throughput * rel,
        "mean_aoi" => row.s_seconds * rel / row.normalized_throughput,
        _ => metric_pair(row, metric).1,
    }
}

/// z-score of a simulated value against the closed form.
///
/// The simulated standard error is floored at the estimator's resolution
/// `|value| / slots`, so a metric that never varied (for example a channel
/// busy in every observed slot) is not judged against a zero denominator.
pub fn z_score(analytic: (f64, f64), simulated: (f64, f64), slots: u64) -> (f64, f64) {
    let resolution = if slots > 0 {
        simulated.0.abs() / slots as f64
    } else {
        0.0
    };
    let se_sim = if simulated.1.is_finite() {
        simulated.1.max(resolution)
    } else {
        resolution
    };
    let se = (se_sim.powi(2) + analytic.1.powi(2)).sqrt();
    let diff = simulated.0 - analytic.0;
    let z = if diff == 0.0 {
        0.0
    } else if se > 0.0 {
        diff / se
    } else {
        diff.signum() * f64::INFINITY
    };
    (z, se)
}

/// Compares fixed-scheme closed-form rows with fixed-scheme simulation rows
/// at every `S` present in both. Passes iff every |z| is within
/// [`Z_LIMIT`]; the age metric is skipped at censored points.
pub fn compare(analytic: &[SweepRow], simulated: &[SweepRow]) -> ValidationReport {
    let analytic: Vec<&SweepRow> = analytic
        .iter()
        .filter(|r| r.scheme == Scheme::Fixed && r.source == Source::Analytic)
        .collect();
    let simulated: Vec<&SweepRow> = simulated
        .iter()
        .filter(|r| r.scheme == Scheme::Fixed && r.source == Source::Sim)
        .collect();
    let mut checks = Vec::new();
    let mut unmatched = Vec::new();
    for a in &analytic {
        let Some(s) = simulated.iter().find(|r| r.s_seconds == a.s_seconds) else {
            unmatched.push(a.s_seconds);
            continue;
        };
        for metric in COMPARED_METRICS {
            if metric == "mean_aoi" && s.censored_flag {
                continue;
            }
            let av = (metric_pair(a, metric).0, analytic_stderr(a, metric));
            let sv = metric_pair(s, metric);
            let (z, se) = z_score(av, sv, s.slots);
            checks.push(MetricCheck {
                s_seconds: a.s_seconds,
                metric: metric.to_string(),
                analytic: av.0,
                simulated: sv.0,
                stderr: se,
                z,
                pass: z.abs() <= Z_LIMIT,
            });
        }
    }
    for s in &simulated {
        if !analytic.iter().any(|a| a.s_seconds == s.s_seconds) {
            unmatched.push(s.s_seconds);
        }
    }
    let pass = !checks.is_empty() && checks.iter().all(|c| c.pass);
    ValidationReport {
        pass,
        z_limit: Z_LIMIT,
        checks,
        unmatched,
    }
}

/// Writes `validation.json` and `validation.txt` into `dir`.
pub fn write_report(dir: &Path, report: &ValidationReport) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let json = dir.join("validation.json");
    let text = serde_json::to_string_pretty(report).expect("report serializes");
    std::fs::write(&json, text).map_err(|e| Error::io(&json, e))?;
    let txt = dir.join("validation.txt");
    std::fs::write(&txt, report.summary()).map_err(|e| Error::io(&txt, e))?;
    Ok(())
}

/// Result of [`mh_precompute`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PrecomputeReport {
    /// Entries sampled by this call; zero when the cache was complete.
    pub sampled: usize,
    pub total: usize,
}

/// Thresholds the schemes can use: the fixed one and every adaptive
/// threshold on the SIC branch (`k = k_c..=n`).
pub fn policy_thresholds(system: &SystemConfig) -> Result<Vec<f64>> {
    let mut gammas = vec![fixed_params(system)?.gamma];
    for k in system.k_c()..=system.n() {
        gammas.push(adaptive_params(k, system)?.gamma);
    }
    Ok(gammas)
}

/// Fills the `m_h` cache at `path` for `h = 0..=h_max` at every policy
/// threshold and saves it. Existing matching entries are reused.
pub fn mh_precompute(
    system: &SystemConfig,
    h_max: usize,
    samples: u64,
    seed: u64,
    path: &Path,
) -> Result<PrecomputeReport> {
    if h_max == 0 {
        return Err(Error::domain("h_max must be at least 1"));
    }
    let mut table = MhTable::load_or_new(path, system.epsilon())?;
    let mut sampled = 0;
    for gamma in policy_thresholds(system)? {
        sampled += table.ensure(h_max, gamma, samples, seed)?;
    }
    if sampled > 0 || !path.exists() {
        table.save(path)?;
    }
    Ok(PrecomputeReport {
        sampled,
        total: table.len(),
    })
}
