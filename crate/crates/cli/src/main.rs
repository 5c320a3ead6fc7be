use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;
use resonance_cli::config::RawConfig;
use resonance_cli::{execute, Engine, RunConfig, Subcommand};

/// Ruelle–Pollicott resonances of prequantum transfer operators on the 2-torus.
#[derive(Parser, Debug)]
#[command(name = "resonances", version)]
struct Args {
    #[arg(value_enum)]
    subcommand: Subcommand,
    /// `cat` or `a,b,c,d` for the integer matrix [[a,b],[c,d]]
    #[arg(long, default_value = "cat")]
    map: String,
    #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
    eps1: f64,
    #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
    eps2: f64,
    /// zero | const:c | v0 | field:a*cos[k,l]+b*sin[k,l] (comma-separated terms are summed)
    #[arg(long, default_value = "zero")]
    potential: String,
    /// Comma-separated Planck levels
    #[arg(long = "N", default_value = "5")]
    n_list: String,
    #[arg(long, value_enum, default_value_t = Engine::Matrix)]
    engine: Engine,
    /// Transverse bands in the matrix truncation (refined against 2K)
    #[arg(long = "K", default_value_t = 6)]
    bands: usize,
    /// Longest period in the trace series
    #[arg(long, default_value_t = 10)]
    nmax: usize,
    #[arg(long, default_value = "runs")]
    out: PathBuf,
    #[arg(long, default_value_t = 7)]
    seed: u64,
    /// Worker threads (default: all available); does not affect results
    #[arg(long)]
    threads: Option<usize>,
}

fn main() -> ExitCode {
    let args = Args::parse();
    let raw = RawConfig {
        subcommand: args.subcommand,
        map: &args.map,
        eps1: args.eps1,
        eps2: args.eps2,
        potential: &args.potential,
        n_list: &args.n_list,
        engine: args.engine,
        bands: args.bands,
        n_max: args.nmax,
        seed: args.seed,
        out: args.out,
        threads: args.threads,
    };
    let result = RunConfig::from_raw(raw).and_then(|cfg| execute(&cfg));
    match result {
        Ok((report, dir)) => {
            for v in &report.verdicts {
                println!("{} {}: {}", if v.pass { "PASS" } else { "FAIL" }, v.name, v.detail);
            }
            println!("wrote {} ({})", dir.display(), report.config_hash);
            if report.passed() {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(2)
            }
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}
