use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use condlab::games::Player;
use condlab_cli::{
    cmd_check, cmd_crossval, cmd_demo, cmd_play, cmd_preset, parse_mode, Report, EXIT_USAGE,
};

/// Workbench for condensations (bijective homomorphisms) of finite and
/// lazily presented relational structures: decision procedures, games,
/// back-and-forth systems and cross-validation suites.
#[derive(Parser)]
#[command(name = "condlab", version)]
struct Cli {
    /// Seed for all randomized machinery (CONDLAB_SEED overrides this).
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    /// Write the JSON report to this path.
    #[arg(long, global = true, value_name = "PATH")]
    json: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Decide a property of a structure pair read from two JSON files.
    Check {
        left: String,
        right: String,
        /// cond | bicond | game:N | bfs | rounds
        #[arg(long, default_value = "cond")]
        mode: String,
        /// Round count for the game mode.
        #[arg(long)]
        rounds: Option<usize>,
    },
    /// Cross-validate the four decision routes on exhaustive and sampled
    /// corpora; exits 0 only with zero disagreements.
    Crossval {
        /// Signature preset: r2 | r2s1
        #[arg(long, default_value = "r2")]
        preset: String,
        #[arg(long, default_value_t = 3)]
        max_n: usize,
        /// Random pairs per size above the exhaustive tier.
        #[arg(long, default_value_t = 200)]
        pair_count: usize,
    },
    /// Run a named demonstration: random-poset-nonrev | classC | example-I
    Demo {
        name: String,
        #[arg(long, default_value_t = 200)]
        budget: usize,
    },
    /// Print a named preset structure as JSON:
    /// classC-fin | classC-omega | random-poset | example-I
    Preset {
        name: String,
        #[arg(long, default_value_t = 8)]
        level: usize,
    },
    /// Play an n-round condensation game against the solver.
    Play {
        left: String,
        right: String,
        #[arg(long, default_value_t = 3)]
        rounds: usize,
        /// Which player the human takes: I or II
        #[arg(long, default_value = "I")]
        side: String,
    },
}

fn emit(report: Report, json: Option<PathBuf>, code: i32) -> ExitCode {
    report.print_human();
    if let Some(path) = json {
        if let Err(e) = report.write_json(&path) {
            eprintln!("cannot write report: {e}");
            return ExitCode::from(EXIT_USAGE as u8);
        }
    }
    ExitCode::from(code as u8)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let seed = std::env::var("CONDLAB_SEED")
        .ok()
        .and_then(|s| s.parse().ok())
        .unwrap_or(cli.seed);
    let result = match cli.command {
        Command::Check {
            left,
            right,
            mode,
            rounds,
        } => match parse_mode(&mode, rounds) {
            Ok(mode) => cmd_check(&left, &right, mode, seed),
            Err(e) => Err(e),
        },
        Command::Crossval {
            preset,
            max_n,
            pair_count,
        } => cmd_crossval(&preset, max_n, seed, pair_count),
        Command::Demo { name, budget } => cmd_demo(&name, budget, seed),
        Command::Preset { name, level } => {
            return match cmd_preset(&name, level, seed) {
                Ok(doc) => {
                    println!("{doc}");
                    ExitCode::SUCCESS
                }
                Err(e) => {
                    eprintln!("error: {e}");
                    ExitCode::from(EXIT_USAGE as u8)
                }
            }
        }
        Command::Play {
            left,
            right,
            rounds,
            side,
        } => {
            let side = match side.as_str() {
                "I" | "i" | "1" => Player::I,
                "II" | "ii" | "2" => Player::II,
                other => {
                    eprintln!("error: unknown side {other:?}; use I or II");
                    return ExitCode::from(EXIT_USAGE as u8);
                }
            };
            return match cmd_play(&left, &right, rounds, side) {
                Ok(code) => ExitCode::from(code as u8),
                Err(e) => {
                    eprintln!("error: {e}");
                    ExitCode::from(EXIT_USAGE as u8)
                }
            };
        }
    };
    match result {
        Ok((report, code)) => emit(report, cli.json, code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(EXIT_USAGE as u8)
        }
    }
}
