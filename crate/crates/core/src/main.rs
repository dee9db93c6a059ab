use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use evt_margin::pipeline::{self, RunConfig, Stage};
use evt_margin::synthetic;

/// Extreme-value margin requirements for futures price changes.
#[derive(Parser)]
#[command(name = "evt-margin", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// Run configuration (TOML).
    #[arg(long, short)]
    config: PathBuf,
    /// Overrides the configured seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Overrides the configured output directory.
    #[arg(long)]
    output_dir: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Summary statistics of price changes (table1).
    Summarize(Common),
    /// GEV fits of block maxima, minima and their union (table2, cdf data).
    Fit(Common),
    /// Optimal margins against the normal baseline (table3).
    Margins(Common),
    /// Liquidation, speculation and implied leverage statistics (table4).
    Analytics(Common),
    /// Every stage plus manifest.json.
    Run(Common),
    /// Monte Carlo and round-trip checks of a finished run.
    Verify(Common),
    /// Writes a synthetic price file, OHLCV file and config.
    Synth {
        /// Target directory.
        #[arg(long)]
        dir: PathBuf,
        #[arg(long, default_value_t = 50_000)]
        prices: usize,
        #[arg(long, default_value_t = 372)]
        days: usize,
        #[arg(long, default_value_t = 7)]
        seed: u64,
    },
}

fn load(c: &Common) -> evt_margin::Result<RunConfig> {
    Ok(RunConfig::load(&c.config)?.with_overrides(c.seed, c.output_dir.clone()))
}

fn stage(c: &Common, s: Stage) -> evt_margin::Result<ExitCode> {
    let cfg = load(c)?;
    for f in pipeline::run_stage(&cfg, s)? {
        println!("{}", cfg.output_path().join(f).display());
    }
    if s == Stage::Margins {
        print!("{}", pipeline::read_margins(&cfg.output_path())?.render_text());
    }
    Ok(ExitCode::SUCCESS)
}

fn run(cli: Cli) -> evt_margin::Result<ExitCode> {
    match cli.command {
        Command::Summarize(c) => stage(&c, Stage::Summarize),
        Command::Fit(c) => stage(&c, Stage::Fit),
        Command::Margins(c) => stage(&c, Stage::Margins),
        Command::Analytics(c) => stage(&c, Stage::Analytics),
        Command::Run(c) => {
            let cfg = load(&c)?;
            let m = pipeline::run_pipeline(&cfg)?;
            println!("{} outputs in {}", m.outputs.len(), cfg.output_path().display());
            println!("config hash {}", m.config_hash);
            Ok(ExitCode::SUCCESS)
        }
        Command::Verify(c) => {
            let cfg = load(&c)?;
            let r = pipeline::verify(&cfg)?;
            for cell in r.cells.iter().filter(|c| !c.pass) {
                println!(
                    "FAIL {:?} {}_{} p={} margin={} mc={} (se {}) residual={:e}",
                    cell.position,
                    cell.kind,
                    cell.frequency,
                    cell.probability,
                    cell.margin,
                    cell.mc_frequency,
                    cell.mc_stderr,
                    cell.roundtrip_residual
                );
            }
            println!(
                "{} passed, {} failed, max quantile/cdf residual {:e}",
                r.passed, r.failed, r.max_quantile_cdf_residual
            );
            Ok(if r.all_passed() { ExitCode::SUCCESS } else { ExitCode::from(3) })
        }
        Command::Synth { dir, prices, days, seed } => {
            synthetic::write_fixture(&dir, prices, days, seed)?;
            println!("{}", dir.join("config.toml").display());
            Ok(ExitCode::SUCCESS)
        }
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
