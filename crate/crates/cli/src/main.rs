use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;
use spikefield_cli::{run_file, Kind, RunOptions};

#[derive(Parser)]
#[command(name = "spikefield", version, about = "Run spikefield experiments")]
struct Args {
    /// Experiment kind.
    #[arg(value_enum)]
    kind: Kind,
    /// JSON experiment config.
    #[arg(long)]
    config: PathBuf,
    /// Worker threads (results do not depend on it).
    #[arg(long)]
    workers: Option<usize>,
    #[arg(long, default_value = "out")]
    out: PathBuf,
    /// Also write `plot_*.csv` files with x,y,err triples.
    #[arg(long)]
    plotdata: bool,
    /// Exit with status 4 when an acceptance check fails.
    #[arg(long)]
    assert: bool,
}

fn main() -> ExitCode {
    let args = Args::parse();
    let opts = RunOptions {
        out: args.out,
        workers: args.workers,
        plotdata: args.plotdata,
        assert: args.assert,
    };
    match run_file(args.kind, &args.config, &opts) {
        Ok(report) => {
            for c in &report.checks {
                println!("{} {}: {}", if c.passed { "ok  " } else { "FAIL" }, c.name, c.detail);
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("{}", e.record());
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
