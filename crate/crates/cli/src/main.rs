use std::fs::File;
use std::io::{self, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use bdris_core::harness::{
    emit_results, format_table, load_results, mean_nmse, read_pool, run_trial_detailed, summarize, sweep,
    write_pool, write_results, write_trp_set, RunConfig, SelectionScheme, SweepAxis, TrialSeed,
};
use bdris_core::trp::{build_pool, greedy_select, max_pairwise_correlation, random_select};
use clap::{Args, Parser, Subcommand, ValueEnum};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Channel estimation experiments for beyond-diagonal RIS.
#[derive(Parser)]
#[command(name = "bdris", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Build a random candidate pool of training patterns and save it.
    Pool {
        #[command(flatten)]
        config: ConfigArgs,
        /// Output file.
        #[arg(long, short)]
        out: PathBuf,
    },
    /// Select training patterns from a saved pool.
    Select {
        /// Pool file written by `bdris pool`.
        #[arg(long)]
        pool: PathBuf,
        /// Number of patterns to select.
        #[arg(long, short = 'd')]
        count: usize,
        #[arg(long, value_enum, default_value_t = Scheme::Greedy)]
        scheme: Scheme,
        /// Seed for random selection.
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, short)]
        out: PathBuf,
    },
    /// Run one Monte Carlo trial.
    Trial {
        #[command(flatten)]
        config: ConfigArgs,
        /// Trial index within the master seed's stream.
        #[arg(long, default_value_t = 0)]
        index: usize,
        /// Results CSV; printed to stdout when omitted.
        #[arg(long, short)]
        out: Option<PathBuf>,
        /// Write per-iteration training history as CSV.
        #[arg(long)]
        history: Option<PathBuf>,
        /// Save the selected patterns.
        #[arg(long)]
        save_trps: Option<PathBuf>,
    },
    /// Sweep one parameter over a list of values.
    Sweep {
        #[command(flatten)]
        config: ConfigArgs,
        #[arg(long, value_enum)]
        axis: Axis,
        /// Comma-separated axis values.
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true, required = true)]
        values: Vec<f64>,
        /// Comma-separated selection schemes; defaults to the configured one.
        #[arg(long, value_enum, value_delimiter = ',')]
        schemes: Vec<Scheme>,
        /// Results CSV.
        #[arg(long, short)]
        out: PathBuf,
    },
    /// Summarize a results CSV as a mean/std table.
    Report {
        results: PathBuf,
    },
    /// Print the effective configuration as TOML.
    Config {
        #[command(flatten)]
        config: ConfigArgs,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum Preset {
    Desk,
    Reference,
}

#[derive(Clone, Copy, ValueEnum)]
enum Scheme {
    Greedy,
    Random,
}

impl From<Scheme> for SelectionScheme {
    fn from(s: Scheme) -> Self {
        match s {
            Scheme::Greedy => SelectionScheme::Greedy,
            Scheme::Random => SelectionScheme::Random,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum Axis {
    TrpCount,
    NoisePower,
    GroupSize,
}

impl From<Axis> for SweepAxis {
    fn from(a: Axis) -> Self {
        match a {
            Axis::TrpCount => SweepAxis::TrpCount,
            Axis::NoisePower => SweepAxis::NoisePower,
            Axis::GroupSize => SweepAxis::GroupSize,
        }
    }
}

/// Configuration source plus per-key overrides.
#[derive(Args)]
struct ConfigArgs {
    /// TOML configuration file.
    #[arg(long, short, conflicts_with = "preset")]
    config: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = Preset::Desk)]
    preset: Preset,
    /// Master seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Monte Carlo trials per sweep point.
    #[arg(long)]
    trials: Option<usize>,
    /// Number of RIS elements; the array becomes a square UPA when it is a
    /// perfect square.
    #[arg(long)]
    elements: Option<usize>,
    #[arg(long)]
    group_size: Option<usize>,
    /// Number of training patterns D.
    #[arg(long)]
    trp_count: Option<usize>,
    /// Candidate pool size C.
    #[arg(long)]
    pool_size: Option<usize>,
    /// Noise power in dBm, or -inf.
    #[arg(long, allow_negative_numbers = true, allow_hyphen_values = true)]
    noise_dbm: Option<f64>,
    #[arg(long, value_enum)]
    scheme: Option<Scheme>,
    #[arg(long)]
    iterations: Option<usize>,
    /// Worker threads; 0 uses every core.
    #[arg(long)]
    workers: Option<usize>,
}

impl ConfigArgs {
    fn resolve(&self) -> Result<RunConfig> {
        let mut cfg = match &self.config {
            Some(path) => RunConfig::load(path)?,
            None => match self.preset {
                Preset::Desk => RunConfig::desk(),
                Preset::Reference => RunConfig::reference(),
            },
        };
        if let Some(v) = self.seed {
            cfg.experiment.master_seed = v;
        }
        if let Some(v) = self.trials {
            cfg.experiment.monte_carlo_trials = v;
        }
        if let Some(n) = self.elements {
            cfg.bdris.n_elements = n;
            let side = (n as f64).sqrt().round() as usize;
            cfg.scene.upa_dims = if side * side == n { [side, side] } else { [n, 1] };
        }
        if let Some(v) = self.group_size {
            cfg.bdris.group_size = v;
        }
        if let Some(v) = self.trp_count {
            cfg.selection.trp_count = v;
        }
        if let Some(v) = self.pool_size {
            cfg.selection.pool_size = Some(v);
        }
        if let Some(v) = self.noise_dbm {
            cfg.channel.noise_power_dbm = v;
        }
        if let Some(v) = self.scheme {
            cfg.selection.scheme = v.into();
        }
        if let Some(v) = self.iterations {
            cfg.train.max_iterations = v;
        }
        if let Some(v) = self.workers {
            cfg.experiment.workers = v;
        }
        cfg.validate().context("invalid configuration")?;
        Ok(cfg)
    }
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    let file = File::create(path).with_context(|| format!("cannot create {}", path.display()))?;
    Ok(BufWriter::new(file))
}

fn open(path: &Path) -> Result<BufReader<File>> {
    let file = File::open(path).with_context(|| format!("cannot open {}", path.display()))?;
    Ok(BufReader::new(file))
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Pool { config, out } => {
            let cfg = config.resolve()?;
            let bdris = cfg.bdris_config()?;
            let seed = TrialSeed::from_seed(cfg.experiment.master_seed);
            let pool = build_pool(&bdris, cfg.pool_size(), &mut ChaCha8Rng::seed_from_u64(seed.pool))?;
            write_pool(&pool, &bdris, create(&out)?)?;
            eprintln!("wrote {} patterns to {}", pool.pool_size(), out.display());
        }
        Command::Select {
            pool,
            count,
            scheme,
            seed,
            out,
        } => {
            let (bdris, pool) = read_pool(open(&pool)?)?;
            let set = match scheme {
                Scheme::Greedy => greedy_select(&pool, count)?,
                Scheme::Random => random_select(&pool, count, &mut ChaCha8Rng::seed_from_u64(seed))?,
            };
            write_trp_set(&set, &bdris, create(&out)?)?;
            if set.len() > 1 {
                eprintln!(
                    "selected {} of {} patterns, max |corr| {:.4}",
                    set.len(),
                    pool.pool_size(),
                    max_pairwise_correlation(&set)?
                );
            }
        }
        Command::Trial {
            config,
            index,
            out,
            history,
            save_trps,
        } => {
            let cfg = config.resolve()?;
            let seed = TrialSeed::derive(cfg.experiment.master_seed, 0, index, cfg.selection.scheme);
            let outcome = run_trial_detailed(&cfg, index, &seed)?;
            if let Some(path) = history {
                outcome.training.write_history_csv(&cfg.train, create(&path)?)?;
            }
            if let Some(path) = save_trps {
                write_trp_set(&outcome.trps, &cfg.bdris_config()?, create(&path)?)?;
            }
            let rows = [outcome.row];
            match out {
                Some(path) => emit_results(&rows, &path)?,
                None => write_results(&rows, io::stdout().lock())?,
            }
        }
        Command::Sweep {
            config,
            axis,
            values,
            schemes,
            out,
        } => {
            let cfg = config.resolve()?;
            let schemes: Vec<SelectionScheme> = if schemes.is_empty() {
                vec![cfg.selection.scheme]
            } else {
                schemes.into_iter().map(Into::into).collect()
            };
            let rows = sweep(&cfg, axis.into(), &values, &schemes)?;
            emit_results(&rows, &out)?;
            print!("{}", format_table(&summarize(&rows)));
        }
        Command::Report { results } => {
            let rows = load_results(&results)?;
            if rows.is_empty() {
                bail!("{} has no result rows", results.display());
            }
            let mut stdout = io::stdout().lock();
            write!(stdout, "{}", format_table(&summarize(&rows)))?;
            if let Some(m) = mean_nmse(&rows) {
                writeln!(stdout, "overall mean nmse {m:.4e} over {} rows", rows.len())?;
            }
        }
        Command::Config { config } => {
            let cfg = config.resolve()?;
            print!("{}", cfg.to_toml_string());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
