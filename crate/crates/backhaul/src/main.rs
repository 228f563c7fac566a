use std::path::PathBuf;
use std::process::ExitCode;

use backhaul::commands;
use backhaul::config::ScenarioConfig;
use backhaul::core::link_budget::Confidence;
use backhaul::core::network::Strategy;
use backhaul::error::{AppError, Result};
use backhaul::synth::{self, World};
use clap::{Parser, Subcommand};

/// Least-cost wireless backhaul planning over irregular terrain.
#[derive(Parser, Debug)]
#[command(version, about)]
struct Cli {
    /// Log level: error, warn, info, debug.
    #[arg(long, global = true, default_value = "warn")]
    log: String,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Tile the DEM, rank terrain irregularity and build the LOS lookup.
    Preprocess {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Extract settlements from the population layer.
    Settlements {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Extract settlements and build modeling regions.
    Regions {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Plan and cost every region under one strategy.
    Assess {
        #[arg(long)]
        config: PathBuf,
        /// clos or hybrid.
        #[arg(long)]
        strategy: String,
        #[arg(long)]
        seed: Option<u64>,
        /// p50, p90 or p99.
        #[arg(long)]
        confidence: Option<String>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Compare two `assess` outputs and report savings.
    Report {
        #[arg(long, num_args = 2, value_names = ["A", "B"])]
        compare: Vec<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Write the embedded constant tables as CSV.
    DumpTables {
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run the whole pipeline for every configured strategy.
    Run {
        #[arg(long)]
        config: PathBuf,
    },
    /// Generate a synthetic world with a ready-to-run scenario.json.
    Synth {
        /// flat, ridge or pair.
        #[arg(long)]
        world: String,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
}

fn dispatch(cmd: Command) -> Result<()> {
    match cmd {
        Command::Preprocess { config, out } => {
            let cfg = ScenarioConfig::load(&config)?;
            commands::preprocess(&cfg, &out.unwrap_or_else(|| commands::default_out(&cfg, "preprocess")))
        }
        Command::Settlements { config, out } => {
            let cfg = ScenarioConfig::load(&config)?;
            commands::demand(&cfg, &out.unwrap_or_else(|| commands::default_out(&cfg, "settlements")), false)
        }
        Command::Regions { config, out } => {
            let cfg = ScenarioConfig::load(&config)?;
            commands::demand(&cfg, &out.unwrap_or_else(|| commands::default_out(&cfg, "regions")), true)
        }
        Command::Assess {
            config,
            strategy,
            seed,
            confidence,
            out,
        } => {
            let cfg = ScenarioConfig::load(&config)?;
            let strategy = Strategy::parse(&strategy)
                .ok_or_else(|| AppError::config("assess", format!("unknown strategy {strategy:?}")))?;
            let confidence = confidence
                .map(|c| Confidence::parse(&c).ok_or_else(|| AppError::config("assess", format!("unknown confidence {c:?}"))))
                .transpose()?;
            let out = out.unwrap_or_else(|| commands::default_out(&cfg, strategy.name()));
            commands::assess(&cfg, strategy, seed, confidence, &out)
        }
        Command::Report { compare, out } => {
            let s = commands::report(&compare[0], &compare[1], out.as_deref())?;
            log::info!("total saving {:.1}%", s.total.saving_pct);
            Ok(())
        }
        Command::DumpTables { out } => commands::dump_tables(out.as_deref()),
        Command::Run { config } => {
            let cfg = ScenarioConfig::load(&config)?;
            let r = commands::run(&cfg)?;
            if let Some(s) = &r.savings {
                println!(
                    "clos {} USD, hybrid {} USD, saving {:.1}%",
                    s.total.clos_usd, s.total.hybrid_usd, s.total.saving_pct
                );
            }
            Ok(())
        }
        Command::Synth { world, seed, out } => {
            let w = World::parse(&world).ok_or_else(|| AppError::config("synth", format!("unknown world {world:?}")))?;
            synth::write_world(&synth::generate(w, seed), &out, seed).map(|_| ())
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    env_logger::Builder::new().parse_filters(&cli.log).init();
    match dispatch(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
