use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, ValueEnum};

use sbp_adaptive::study::{
    convergence_study, time_error_study, write_convergence_csv, write_series_csv,
};
use sbp_adaptive::validate::run_validation;
use sbp_adaptive::{Mode, SolverConfig};

#[derive(Debug, Clone, Copy, ValueEnum)]
enum CliMode {
    Conventional,
    Adaptive,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Study {
    Convergence,
    TimeError,
    Validate,
}

/// Periodic advection with stencil-adaptive SBP-SAT finite differences.
#[derive(Debug, Parser)]
#[command(name = "sbp-adaptive", version)]
struct Cli {
    /// Which experiment to run.
    #[arg(long, value_enum)]
    study: Study,

    /// Operator mode for the run.
    #[arg(long, value_enum, default_value = "conventional")]
    mode: CliMode,

    /// Number of blocks.
    #[arg(long = "K", default_value_t = 4)]
    blocks: usize,

    /// Intervals per block; comma separated list for convergence studies.
    #[arg(long = "N", value_delimiter = ',', default_values_t = vec![20, 40, 80, 160])]
    intervals: Vec<usize>,

    /// Final time.
    #[arg(long = "T", default_value_t = 1.0)]
    t_final: f64,

    /// SAT penalty parameter.
    #[arg(long, default_value_t = 1.0)]
    theta: f64,

    /// c in the re-optimization interval dtau = c/(K(N+1)).
    #[arg(long = "retau-factor", default_value_t = 0.5)]
    retau_factor: f64,

    #[arg(long = "abs-tol", default_value_t = 1e-10)]
    abs_tol: f64,

    #[arg(long = "rel-tol", default_value_t = 1e-10)]
    rel_tol: f64,

    /// Relative singular value cutoff in the stencil optimizer.
    #[arg(long = "rank-tol", default_value_t = 1e-10)]
    rank_tol: f64,

    /// Output CSV path; stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
}

fn output(path: &Option<PathBuf>) -> io::Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(File::create(p)?)),
        None => Box::new(io::stdout().lock()),
    })
}

fn main() -> ExitCode {
    let cli = Cli::parse();

    if cli.theta < 0.0 {
        eprintln!("error: --theta must be >= 0 for energy stability");
        return ExitCode::from(2);
    }
    if cli.abs_tol <= 0.0 || cli.rel_tol <= 0.0 || cli.retau_factor <= 0.0 {
        eprintln!("error: tolerances and --retau-factor must be positive");
        return ExitCode::from(2);
    }

    let mode = match cli.mode {
        CliMode::Conventional => Mode::Conventional,
        CliMode::Adaptive => Mode::Adaptive,
    };
    let mut config = SolverConfig::new(mode, cli.t_final);
    config.theta = cli.theta;
    config.abs_tol = cli.abs_tol;
    config.rel_tol = cli.rel_tol;
    config.retau_factor = cli.retau_factor;
    config.rank_tol = cli.rank_tol;

    match cli.study {
        Study::Validate => {
            let results = run_validation();
            let mut failed = 0;
            for r in &results {
                let verdict = if r.passed { "PASS" } else { "FAIL" };
                if r.detail.is_empty() {
                    println!("[{verdict}] {}", r.name);
                } else {
                    println!("[{verdict}] {} ({})", r.name, r.detail);
                }
                if !r.passed {
                    failed += 1;
                }
            }
            if failed > 0 {
                eprintln!("{failed} validation check(s) failed");
                return ExitCode::from(1);
            }
            ExitCode::SUCCESS
        }
        Study::Convergence => {
            match convergence_study(&config, cli.blocks, &cli.intervals) {
                Ok(records) => {
                    let mut out = match output(&cli.out) {
                        Ok(o) => o,
                        Err(e) => {
                            eprintln!("error: {e}");
                            return ExitCode::from(1);
                        }
                    };
                    if let Err(e) = write_convergence_csv(&mut out, &records) {
                        eprintln!("error: {e}");
                        return ExitCode::from(1);
                    }
                    ExitCode::SUCCESS
                }
                Err(e) => {
                    eprintln!("error: {e}");
                    ExitCode::from(1)
                }
            }
        }
        Study::TimeError => {
            if cli.intervals.len() != 1 {
                eprintln!("error: --study time-error takes a single --N value");
                return ExitCode::from(2);
            }
            match time_error_study(&config, cli.blocks, cli.intervals[0]) {
                Ok(result) => {
                    let mut out = match output(&cli.out) {
                        Ok(o) => o,
                        Err(e) => {
                            eprintln!("error: {e}");
                            return ExitCode::from(1);
                        }
                    };
                    if let Err(e) = write_series_csv(&mut out, &result.series) {
                        eprintln!("error: {e}");
                        return ExitCode::from(1);
                    }
                    ExitCode::SUCCESS
                }
                Err(e) => {
                    eprintln!("error: {e}");
                    ExitCode::from(1)
                }
            }
        }
    }
}
