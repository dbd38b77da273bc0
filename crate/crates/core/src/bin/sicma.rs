use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use sicma_core::experiment::{
    compare, mh_precompute, parse_s_grid, read_sweep, sweep, write_report, Source, SweepSpec,
    MH_FILE,
};
use sicma_core::sic::{MhTable, DEFAULT_MH_SAMPLES};
use sicma_core::{fixed_metrics, fixed_params, replicate, Scheme, SimConfig, SystemConfig};

#[derive(Parser)]
#[command(
    name = "sicma",
    version,
    about = "Random access with SIC: simulation and analysis"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Sweep the mean generation time and write figure CSVs.
    Sweep(SweepArgs),
    /// Check simulated fixed-scheme rows of a sweep against the closed form.
    Compare {
        /// sweep.csv holding both analytic and sim rows.
        sweep: PathBuf,
        /// Directory for validation.json and validation.txt.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Precompute the m_h cache for every policy threshold.
    Mh {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long, default_value = MH_FILE)]
        out: PathBuf,
        #[arg(long, default_value_t = DEFAULT_MH_SAMPLES)]
        samples: u64,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        /// Largest h; defaults to the number of nodes.
        #[arg(long)]
        h_max: Option<usize>,
    },
    /// Simulate one operating point and print the metrics as JSON.
    Single {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long, value_enum, default_value_t = SchemeArg::Fixed)]
        scheme: SchemeArg,
        /// Mean generation time in seconds; overrides lambda from the config.
        #[arg(long)]
        s: Option<f64>,
        #[arg(long, default_value_t = 8)]
        reps: usize,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[arg(long)]
        horizon: Option<f64>,
        #[arg(long)]
        warmup: Option<f64>,
        #[arg(long, default_value_t = 100_000)]
        min_slots: u64,
        /// Also print the closed form (fixed scheme only).
        #[arg(long)]
        analytic: bool,
        #[arg(long, default_value_t = DEFAULT_MH_SAMPLES)]
        mh_samples: u64,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum SchemeArg {
    Fixed,
    Adaptive,
    Both,
}

impl SchemeArg {
    fn schemes(self) -> Vec<Scheme> {
        match self {
            SchemeArg::Fixed => vec![Scheme::Fixed],
            SchemeArg::Adaptive => vec![Scheme::Adaptive],
            SchemeArg::Both => vec![Scheme::Fixed, Scheme::Adaptive],
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum SourceArg {
    Sim,
    Analytic,
    Both,
}

#[derive(Args)]
struct SweepArgs {
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = SchemeArg::Both)]
    scheme: SchemeArg,
    #[arg(long, value_enum, default_value_t = SourceArg::Both)]
    source: SourceArg,
    /// `log:LO:HI:N` or comma-separated seconds.
    #[arg(long, default_value = "log:0.001:1:40")]
    s_grid: String,
    #[arg(long, default_value_t = 8)]
    reps: usize,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    #[arg(long, default_value = "out")]
    out: PathBuf,
    #[arg(long)]
    horizon: Option<f64>,
    #[arg(long)]
    warmup: Option<f64>,
    #[arg(long, default_value_t = 100_000)]
    min_slots: u64,
    #[arg(long, default_value_t = DEFAULT_MH_SAMPLES)]
    mh_samples: u64,
    /// m_h cache; defaults to OUT/mh_table.csv.
    #[arg(long)]
    mh_cache: Option<PathBuf>,
    /// Run the comparison afterwards and fail on a mismatch.
    #[arg(long)]
    validate: bool,
}

fn load_config(path: &Option<PathBuf>) -> sicma_core::Result<SystemConfig> {
    match path {
        Some(p) => SystemConfig::load(p),
        None => Ok(SystemConfig::default()),
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}

fn run(cli: Cli) -> sicma_core::Result<bool> {
    match cli.command {
        Command::Sweep(a) => {
            let system = load_config(&a.config)?;
            let mut spec = SweepSpec::new(&a.out);
            spec.s_grid = parse_s_grid(&a.s_grid)?;
            spec.schemes = a.scheme.schemes();
            spec.sources = match a.source {
                SourceArg::Sim => vec![Source::Sim],
                SourceArg::Analytic => vec![Source::Analytic],
                SourceArg::Both => vec![Source::Sim, Source::Analytic],
            };
            spec.replications = a.reps;
            spec.seed_base = a.seed;
            spec.horizon = a.horizon;
            spec.warmup = a.warmup;
            spec.min_slots = a.min_slots;
            spec.mh_samples = a.mh_samples;
            spec.mh_path = a.mh_cache;
            let out = sweep(&spec, &system)?;
            for f in &out.files {
                println!("wrote {}", f.display());
            }
            if a.validate {
                let report = compare(&out.rows, &out.rows);
                write_report(&a.out, &report)?;
                print!("{}", report.summary());
                return Ok(report.pass);
            }
            Ok(true)
        }
        Command::Compare { sweep, out } => {
            let rows = read_sweep(&sweep)?;
            let report = compare(&rows, &rows);
            let dir = out.unwrap_or_else(|| sweep.parent().map(PathBuf::from).unwrap_or_default());
            write_report(&dir, &report)?;
            print!("{}", report.summary());
            Ok(report.pass)
        }
        Command::Mh {
            config,
            out,
            samples,
            seed,
            h_max,
        } => {
            let system = load_config(&config)?;
            let r = mh_precompute(&system, h_max.unwrap_or(system.n()), samples, seed, &out)?;
            println!(
                "{}: sampled {} entries, {} in cache",
                out.display(),
                r.sampled,
                r.total
            );
            Ok(true)
        }
        Command::Single {
            config,
            scheme,
            s,
            reps,
            seed,
            horizon,
            warmup,
            min_slots,
            analytic,
            mh_samples,
        } => {
            let mut system = load_config(&config)?;
            if let Some(s) = s {
                system = system.with_lambda(1.0 / s)?;
            }
            let horizon = match horizon {
                Some(h) => h,
                None => sicma_core::experiment::default_horizon(1.0 / system.lambda(), &system)?,
            };
            let mut report = serde_json::Map::new();
            for sch in scheme.schemes() {
                let cfg = SimConfig::new(system.clone(), sch, horizon, seed)
                    .with_warmup(warmup.unwrap_or(0.1 * horizon))
                    .with_min_slots(min_slots);
                let r = replicate(&cfg, reps)?;
                report.insert(
                    sch.to_string(),
                    serde_json::to_value(&r.aggregate).expect("metrics serialize"),
                );
            }
            if analytic {
                let mh = MhTable::build(
                    system.n(),
                    fixed_params(&system)?.gamma,
                    system.epsilon(),
                    mh_samples,
                    seed,
                )?;
                let m = fixed_metrics(&system, &mh)?;
                report.insert(
                    "analytic".into(),
                    serde_json::to_value(m).expect("metrics serialize"),
                );
            }
            println!(
                "{}",
                serde_json::to_string_pretty(&report).expect("report serializes")
            );
            Ok(true)
        }
    }
}
