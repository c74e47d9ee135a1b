//! `grasspcp`: command-line front end for the experiments.
//!
//! Every command prints one result record (JSON by default) with the echoed
//! parameters, the measured values, the checked inequalities and the wall
//! time. Exit status is 0 when every checked inequality holds, 2 when one
//! fails and 1 on usage or input errors.

mod commands;
mod record;

use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use clap::{Parser, Subcommand, ValueEnum};
use serde::Serialize;

use record::Record;

#[derive(Parser, Debug)]
#[command(name = "grasspcp", version, about = "Desk-scale Grassmann PCP experiments")]
struct Cli {
    /// Root seed; every random choice is derived from it by label.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads (defaults to all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Write the record here instead of stdout.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[arg(long, global = true, value_enum, default_value_t = Format::Json)]
    format: Format,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
enum Format {
    Json,
    Csv,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Generate a random 3Lin instance with a planted assignment.
    #[command(name = "gen-3lin")]
    Gen3lin(commands::Gen3Lin),
    /// Value of a CSP instance (exact, local search or random baseline).
    CspValue(commands::CspValue),
    /// Turn a k-CSP into a k-partite one.
    ReduceKpartite(commands::ReduceKpartite),
    /// Make one part regular by expander clouds.
    ReduceRegularize(commands::ReduceRegularize),
    /// Make a partwise-regular instance fully regular.
    ReduceFullreg(commands::ReduceFullreg),
    /// Pass probability of the (k+1)-query consistency test.
    GrassmannTest(commands::GrassmannTest),
    /// Hyperedge counts versus the bilinear inner product.
    CountingLemma(commands::CountingLemma),
    /// Eigenvalues of the shift operator against their decay bound.
    BilinearSpectrum(commands::BilinearSpectrum),
    /// Covering and codimension-retention experiments.
    Covering(commands::Covering),
    /// Play the smooth parallel-repetition game.
    OuterGame(commands::OuterGame),
    /// Build the composed (k+1)-CSP.
    ComposedBuild(commands::ComposedBuild),
    /// Pass rate of planted tables on the composed CSP.
    ComposedCompleteness(commands::ComposedCompleteness),
    /// Turn composed-CSP tables into outer-game provers and play them.
    ExtractStrategies(commands::ExtractStrategies),
    /// Maximum k-dimensional matching.
    MatchingValue(commands::MatchingValue),
}

fn run(cli: &Cli) -> anyhow::Result<Record> {
    let seed = cli.seed;
    match &cli.command {
        Command::Gen3lin(a) => commands::gen_3lin(a, seed),
        Command::CspValue(a) => commands::csp_value(a, seed),
        Command::ReduceKpartite(a) => commands::reduce_kpartite(a),
        Command::ReduceRegularize(a) => commands::reduce_regularize(a, seed),
        Command::ReduceFullreg(a) => commands::reduce_fullreg(a),
        Command::GrassmannTest(a) => commands::grassmann_test(a, seed),
        Command::CountingLemma(a) => commands::counting_lemma(a, seed),
        Command::BilinearSpectrum(a) => commands::bilinear_spectrum(a),
        Command::Covering(a) => commands::covering(a, seed),
        Command::OuterGame(a) => commands::outer_game(a, seed),
        Command::ComposedBuild(a) => commands::composed_build(a, seed),
        Command::ComposedCompleteness(a) => commands::composed_completeness(a, seed),
        Command::ExtractStrategies(a) => commands::extract_strategies(a, seed),
        Command::MatchingValue(a) => commands::matching_value(a),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    if let Some(t) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(t.max(1)).build_global() {
            eprintln!("error: {e}");
            return ExitCode::from(1);
        }
    }
    let start = Instant::now();
    let rec = match run(&cli) {
        Ok(r) => r,
        Err(e) => {
            eprintln!("error: {e:#}");
            return ExitCode::from(1);
        }
    };
    let text = match cli.format {
        Format::Json => rec.to_json(start.elapsed().as_secs_f64()),
        Format::Csv => rec.to_csv(start.elapsed().as_secs_f64()),
    };
    let written = match &cli.out {
        Some(p) => std::fs::write(p, &text),
        None => {
            print!("{text}");
            Ok(())
        }
    };
    if let Err(e) = written {
        eprintln!("error: {e}");
        return ExitCode::from(1);
    }
    for a in rec.failures() {
        eprintln!("assertion failed: {} ({} vs {})", a.claim, a.lhs, a.rhs);
    }
    ExitCode::from(if rec.passed() { 0 } else { 2 })
}
