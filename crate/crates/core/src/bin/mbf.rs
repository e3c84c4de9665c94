use std::fs::File;
use std::io::{self, BufWriter};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use mbf::complexity::{flop_ledger, flops_total, Algorithm, Dims, MpfDims};
use mbf::harness::{
    emit_plot_data, format_summary, run_experiment, summarize, write_csv, ExperimentConfig, FilterKind, ScenarioKind,
};

#[derive(Parser)]
#[command(name = "mbf", version, about = "Bayesian filtering experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the experiment described by a config file.
    Run {
        /// Experiment description in `key = value` form.
        #[arg(long)]
        config: PathBuf,
        /// Overrides the config's output path.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Sweep filters and particle counts over one scenario.
    Sweep {
        /// `ssm1` or `ssm2`.
        #[arg(long)]
        scenario: ScenarioKind,
        /// Comma-separated subset of ekf,rbpf,dbf,sdbf,mpf,mbfa.
        #[arg(long, value_delimiter = ',', required = true)]
        filters: Vec<FilterKind>,
        /// Comma-separated particle counts.
        #[arg(long = "np", value_delimiter = ',', default_value = "100")]
        particles: Vec<usize>,
        /// Target counts (SSM#2).
        #[arg(long, value_delimiter = ',')]
        targets: Option<Vec<usize>>,
        /// Iterations per recursion of the dual networks.
        #[arg(long, default_value_t = 1)]
        ni: usize,
        /// Monte-Carlo runs per cell.
        #[arg(long, default_value_t = 100)]
        runs: usize,
        /// Master seed.
        #[arg(long, default_value_t = 7)]
        seed: u64,
        /// Position error in metres that counts as a lost track.
        #[arg(long)]
        threshold: Option<f64>,
        /// Worker threads; all cores when absent.
        #[arg(long)]
        workers: Option<usize>,
        /// Leave wall_ms empty so reruns are byte-identical.
        #[arg(long)]
        no_timing: bool,
        /// CSV destination; stdout when absent.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Closed-form flops of one recursion.
    Flops {
        /// ekf, rbpf, dbf, sdbf or mpf.
        #[arg(long)]
        alg: Algorithm,
        /// Measurement dimension.
        #[arg(long = "P")]
        p: Option<usize>,
        /// State dimension.
        #[arg(long = "D")]
        d: Option<usize>,
        /// Linear substate dimension.
        #[arg(long = "DL")]
        d_l: Option<usize>,
        /// Nonlinear substate dimension.
        #[arg(long = "DN")]
        d_n: Option<usize>,
        /// Particle count.
        #[arg(long = "np")]
        n_p: Option<usize>,
        /// Iterations per recursion.
        #[arg(long = "ni")]
        n_i: Option<usize>,
        /// MPF: number of filters.
        #[arg(long = "n")]
        n: Option<usize>,
        /// MPF: particles per filter.
        #[arg(long = "M")]
        m: Option<usize>,
        /// MPF: cross draws.
        #[arg(long = "L")]
        l: Option<usize>,
        /// MPF: measurement dimension.
        #[arg(long = "dy")]
        d_y: Option<usize>,
        /// MPF: per-filter state dimension.
        #[arg(long = "dx")]
        d_x: Option<usize>,
        /// Print the itemised ledger as CSV instead of the total.
        #[arg(long)]
        ledger: bool,
    },
    /// Turn a results CSV into whitespace-delimited series files.
    Plotdata {
        /// Results CSV.
        #[arg(long = "in")]
        input: PathBuf,
        /// Directory for the series files.
        #[arg(long)]
        out: PathBuf,
    },
}

fn execute(cfg: &ExperimentConfig, out: Option<PathBuf>) -> mbf::Result<()> {
    let records = run_experiment(cfg)?;
    match out.or_else(|| cfg.experiment.output.clone()) {
        Some(path) => {
            if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
                std::fs::create_dir_all(dir)?;
            }
            write_csv(&records, BufWriter::new(File::create(&path)?))?;
            eprint!("{}", format_summary(&summarize(&records)));
        }
        None => write_csv(&records, io::stdout().lock())?,
    }
    Ok(())
}

fn main_inner(cli: Cli) -> mbf::Result<()> {
    match cli.command {
        Command::Run { config, out } => execute(&ExperimentConfig::load(&config)?, out),
        Command::Sweep { scenario, filters, particles, targets, ni, runs, seed, threshold, workers, no_timing, out } => {
            let mut cfg = ExperimentConfig::default();
            let e = &mut cfg.experiment;
            e.scenario = scenario;
            e.filters = filters;
            e.particles = particles;
            e.targets = targets;
            e.iterations = ni;
            e.runs = runs;
            e.seed = seed;
            e.divergence_threshold = threshold;
            e.workers = workers;
            e.timing = !no_timing;
            cfg.validate()?;
            execute(&cfg, out)
        }
        Command::Flops { alg, p, d, d_l, d_n, n_p, n_i, n, m, l, d_y, d_x, ledger } => {
            let mpf = match (n, m, l, d_y, d_x) {
                (Some(n), Some(m), Some(l), Some(d_y), Some(d_x_i)) => Some(MpfDims { n, m, l, d_y, d_x_i }),
                _ => None,
            };
            let dims = Dims { p, d, d_l, d_n, n_p, n_i, mpf, ..Dims::default() };
            if ledger {
                flop_ledger(alg, &dims)?.write_csv(io::stdout().lock())
            } else {
                println!("{}", flops_total(alg, &dims)?);
                Ok(())
            }
        }
        Command::Plotdata { input, out } => {
            for path in emit_plot_data(&input, &out)? {
                println!("{}", path.display());
            }
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    match main_inner(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
