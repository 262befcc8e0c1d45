//! `mhd25`: run experiments, fit decay exponents, tabulate the linear
//! dispersion relation and run the acceptance suite.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use mhd25_core::diagnostics::fit_decay_exponent;
use mhd25_core::harness::config::parse_real;
use mhd25_core::harness::experiment::{read_csv_series, run_experiment, summary_text};
use mhd25_core::harness::verify::{verify_suite, Fault, VerifyLevel};
use mhd25_core::harness::{ExperimentConfig, RunMode};
use mhd25_core::linear::acoustic_eigenvalues;
use mhd25_core::parallel::init_thread_pool_from_env;
use mhd25_core::spectral::SpectralGrid;
use mhd25_core::Error;

const EXIT_OTHER: u8 = 1;
const EXIT_CONFIG: u8 = 2;
const EXIT_GATE: u8 = 3;
const EXIT_ACCEPTANCE: u8 = 4;

#[derive(Parser)]
#[command(name = "mhd25", version, about = "2.5-D compressible non-resistive MHD perturbation solver")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the experiment described by a config file.
    Simulate {
        config: PathBuf,
        /// Overrides `output.path`.
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Same as `simulate` with `run.mode = linear_oracle`.
    Oracle {
        config: PathBuf,
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Fit `value ~ (1+t)^p` to a column of a records CSV.
    DecayFit {
        csv: PathBuf,
        /// Column name, or `l2_phi_u` for hypot(l2_phi, l2_u).
        #[arg(long)]
        quantity: String,
        /// Fit window `t0:t1`.
        #[arg(long)]
        window: String,
        /// Exponent to compare against.
        #[arg(long, allow_hyphen_values = true)]
        predicted: Option<f64>,
    },
    /// Eigenvalue sweep of the linearized mode matrix over the grid's |xi| range.
    Spectrum {
        config: PathBuf,
        #[arg(long, default_value_t = 32)]
        points: usize,
    },
    /// Run the acceptance suite.
    Verify {
        /// Add the long-running criteria (A2, A3, A6, A7).
        #[arg(long)]
        full: bool,
        /// Corrupt a component on purpose; the suite must then fail.
        #[arg(long, value_name = "FAULT")]
        inject_fault: Option<String>,
    },
}

fn exit_code(err: &Error) -> u8 {
    match err {
        Error::ValidityGate { .. } => EXIT_GATE,
        e if e.is_config() => EXIT_CONFIG,
        _ => EXIT_OTHER,
    }
}

fn fail(err: Error) -> ExitCode {
    eprintln!("error: {err}");
    ExitCode::from(exit_code(&err))
}

fn load(config: &PathBuf, output: Option<PathBuf>, mode: Option<RunMode>) -> Result<ExperimentConfig, Error> {
    let mut cfg = ExperimentConfig::from_file(config)?;
    if output.is_some() {
        cfg.output.path = output;
    }
    if let Some(m) = mode {
        cfg.mode = m;
    }
    Ok(cfg)
}

fn simulate(config: PathBuf, output: Option<PathBuf>, mode: Option<RunMode>) -> ExitCode {
    let cfg = match load(&config, output, mode) {
        Ok(c) => c,
        Err(e) => return fail(e),
    };
    match run_experiment(&cfg) {
        Ok(report) => {
            print!("{}", summary_text(&report));
            ExitCode::SUCCESS
        }
        Err(e) => fail(e),
    }
}

fn decay_fit(csv: PathBuf, quantity: String, window: String, predicted: Option<f64>) -> ExitCode {
    let window = match window
        .split_once(':')
        .ok_or_else(|| format!("window must be `t0:t1`, got `{window}`"))
        .and_then(|(a, b)| Ok((parse_real(a)?, parse_real(b)?)))
    {
        Ok(w) => w,
        Err(m) => return fail(Error::InvalidConfig(m)),
    };
    let result = read_csv_series(&csv, &quantity)
        .and_then(|series| fit_decay_exponent(&quantity, &series, window, predicted));
    match result {
        Ok(fit) => {
            println!("quantity = {}", fit.quantity);
            println!("window = {}:{}", fit.window.0, fit.window.1);
            println!("exponent = {:.16e}", fit.exponent);
            println!("r_squared = {:.16e}", fit.r_squared);
            println!("samples = {}", fit.samples);
            if let Some(p) = fit.predicted {
                println!("predicted = {p:.16e}");
                println!("deviation = {:.16e}", fit.exponent - p);
            }
            ExitCode::SUCCESS
        }
        Err(e) => fail(e),
    }
}

fn spectrum(config: PathBuf, points: usize) -> ExitCode {
    let run = || -> Result<(), Error> {
        let cfg = ExperimentConfig::from_file(&config)?;
        let grid = SpectralGrid::new(cfg.grid.n, cfg.grid.box_length)?;
        let (k0, k1) = (grid.min_wavenumber(), grid.max_wavenumber());
        let points = points.max(2);
        println!("xi,slow_re,slow_im,fast_re,fast_im,solenoidal_rate,spectral_abscissa");
        for i in 0..points {
            let k = k0 * (k1 / k0).powf(i as f64 / (points - 1) as f64);
            let (slow, fast) = acoustic_eigenvalues(k, &cfg.params)?;
            let heat = -cfg.params.mu * k * k;
            let abscissa = slow.re.max(fast.re).max(heat);
            println!(
                "{k:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{heat:.16e},{abscissa:.16e}",
                slow.re, slow.im, fast.re, fast.im
            );
        }
        Ok(())
    };
    match run() {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => fail(e),
    }
}

fn verify(full: bool, inject_fault: Option<String>) -> ExitCode {
    let fault = match inject_fault.map(|f| f.parse::<Fault>()).transpose() {
        Ok(f) => f,
        Err(m) => return fail(Error::InvalidConfig(m)),
    };
    let level = if full { VerifyLevel::Full } else { VerifyLevel::Quick };
    let report = verify_suite(level, fault, |r| println!("{r}"));
    let failed = report.results.iter().filter(|r| !r.passed).count();
    println!(
        "overall {} ({} criteria, {failed} failed)",
        if report.passed() { "PASS" } else { "FAIL" },
        report.results.len()
    );
    if report.passed() {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(EXIT_ACCEPTANCE)
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Err(e) = init_thread_pool_from_env() {
        return fail(e);
    }
    match cli.command {
        Command::Simulate { config, output } => simulate(config, output, None),
        Command::Oracle { config, output } => simulate(config, output, Some(RunMode::LinearOracle)),
        Command::DecayFit {
            csv,
            quantity,
            window,
            predicted,
        } => decay_fit(csv, quantity, window, predicted),
        Command::Spectrum { config, points } => spectrum(config, points),
        Command::Verify { full, inject_fault } => verify(full, inject_fault),
    }
}
