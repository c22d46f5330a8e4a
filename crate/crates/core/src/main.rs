use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use dlrom_core::study::{self, fmt_f64, StudyConfig};
use dlrom_core::Error;

#[derive(Parser)]
#[command(
    name = "dlrom",
    version,
    about = "Latent-dimension experiments for deep-learning reduced order models"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct RunArgs {
    /// Study configuration file (flat `key = value`).
    #[arg(long)]
    config: PathBuf,
    /// Overrides `snapshots.seed`.
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads for snapshot generation and sweeps.
    #[arg(long, default_value_t = 1)]
    jobs: usize,
    /// Overrides `output.dir`.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Sample inputs, solve the full-order model and write snapshot files.
    Generate(RunArgs),
    /// Latent-dimension sweep: autoencoder vs POD errors and spectral tails.
    Sweep(RunArgs),
    /// Relative POD, autoencoder and DL-ROM test errors at one latent size.
    Table1(RunArgs),
    /// Finite-difference checks of all layer kinds, activations and the loss.
    Gradcheck {
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Built-in oracle examples.
    Selftest,
}

fn load(args: &RunArgs) -> Result<(StudyConfig, PathBuf), Error> {
    let mut config = StudyConfig::load(&args.config)?;
    if let Some(seed) = args.seed {
        config = config.with_seed(seed);
    }
    if args.jobs == 0 {
        return Err(Error::Config("--jobs must be at least 1".into()));
    }
    let out = args
        .out
        .clone()
        .unwrap_or_else(|| config.output_dir.clone());
    Ok((config, out))
}

fn run(cli: Cli) -> Result<bool, Error> {
    match cli.command {
        Command::Generate(args) => {
            let (config, out) = load(&args)?;
            let s = study::generate(&config, args.jobs, &out)?;
            println!(
                "inputs  {} x {}  sha256 {}",
                s.rows, s.input_cols, s.inputs_checksum
            );
            println!(
                "outputs {} x {}  sha256 {}",
                s.rows, s.output_cols, s.outputs_checksum
            );
            println!("train rows {}, test rows {}", s.n_train, s.rows - s.n_train);
            Ok(true)
        }
        Command::Sweep(args) => {
            let (config, out) = load(&args)?;
            let report = study::sweep(&config, args.jobs, &out)?;
            println!("n,e_ae,e_pod,sqrt_tail_mu,sqrt_tail_u");
            for r in &report.rows {
                println!(
                    "{},{},{},{},{}",
                    r.n,
                    fmt_f64(r.e_ae),
                    fmt_f64(r.e_pod),
                    fmt_f64(r.sqrt_tail_mu),
                    fmt_f64(r.sqrt_tail_u)
                );
            }
            let show =
                |v: Option<f64>| v.map_or_else(|| "absent".to_string(), |x| format!("{x:.4}"));
            let s = report.slopes;
            println!(
                "slopes: ae {}  pod {}  mu {}  u {}",
                show(s.ae),
                show(s.pod),
                show(s.mu),
                show(s.u)
            );
            Ok(true)
        }
        Command::Table1(args) => {
            let (config, out) = load(&args)?;
            let row = study::table1(&config, &out)?;
            println!("n = {}", row.n);
            println!("POD     {:.2}%", 100.0 * row.pod);
            println!("AE      {:.2}%", 100.0 * row.ae);
            println!("DL-ROM  {:.2}%", 100.0 * row.dlrom);
            Ok(true)
        }
        Command::Gradcheck { seed } => {
            let cases = study::gradcheck(seed)?;
            let mut ok = true;
            for c in &cases {
                let tag = if c.passed() { "PASS" } else { "FAIL" };
                println!("{tag} {:<40} {:.3e}", c.name, c.max_relative_error);
                ok &= c.passed();
            }
            Ok(ok)
        }
        Command::Selftest => {
            let mut ok = true;
            for r in study::selftest()? {
                let tag = if r.passed { "PASS" } else { "FAIL" };
                println!("{tag} {:<28} {}", r.name, r.detail);
                ok &= r.passed;
            }
            Ok(ok)
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    match run(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(3),
        Err(e) => {
            eprintln!("error: {e}");
            let mut source = std::error::Error::source(&e);
            while let Some(s) = source {
                eprintln!("  caused by: {s}");
                source = s.source();
            }
            match e {
                Error::Config(_) => ExitCode::from(2),
                ref e if e.is_numerical() => ExitCode::from(3),
                _ => ExitCode::FAILURE,
            }
        }
    }
}
