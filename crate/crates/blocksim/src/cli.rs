//! Command-line front end. Owns every file the tool reads or writes, maps
//! failures onto a stable exit-code contract, and never samples randomness
//! of its own: runs are exactly as reproducible as their scenario seed.
//!
//! Exit codes: 0 success, 1 runtime failure (I/O and the like), 2 anything
//! wrong with the inputs (bad flags, bad scenario, malformed exports).

use std::fs::{self, File};
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use crate::adversary::{run_attack, AttackOutcome, AttackSpec};
use crate::analysis::{
    first_relayer_attack, summarize, ChainExport, ClusterSet, ExportError, TxGraph,
};
use crate::netsim::{run_simulation, EventTrace, SimOutput, TraceError};
use crate::scenario::{ScenarioError, ScenarioFile};

#[derive(Debug, Parser)]
#[command(name = "blocksim", version, about = "Desk-scale proof-of-work network simulator")]
pub struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Simulate a scenario and write its trace, chain and metrics.
    Run {
        #[arg(long)]
        scenario: PathBuf,
        /// Output directory, created if missing.
        #[arg(long)]
        out: PathBuf,
        /// Overrides the scenario seed.
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Monte Carlo attack trials over a (share, confirmations) grid.
    Attack {
        #[arg(long)]
        scenario: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        /// Overrides the scenario's trial count.
        #[arg(long)]
        trials: Option<u64>,
        /// Worker threads; results are identical for any value.
        #[arg(long, default_value_t = 1)]
        jobs: usize,
        /// Grid cells as `share:confirmations`, comma separated, e.g.
        /// `0.1:6,0.3:6`. Defaults to the attack block's own cell.
        #[arg(long)]
        grid: Option<String>,
    },
    /// Turn a finished run's exports into clustering, deanonymization and
    /// metrics reports.
    Analyze {
        #[arg(long)]
        chain: PathBuf,
        #[arg(long)]
        trace: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Summarize the CSV reports in a directory, human-readably.
    Report {
        #[arg(long)]
        dir: PathBuf,
    },
}

/// Failure with its exit code attached.
#[derive(Debug)]
enum CmdError {
    /// The inputs are wrong; fix the scenario/flags and retry. Exit 2.
    Input(String),
    /// The environment failed us (I/O, ...). Exit 1.
    Runtime(String),
}

impl CmdError {
    fn input(msg: impl Into<String>) -> CmdError {
        CmdError::Input(msg.into())
    }

    fn exit_code(&self) -> u8 {
        match self {
            CmdError::Input(_) => 2,
            CmdError::Runtime(_) => 1,
        }
    }

    fn message(&self) -> &str {
        match self {
            CmdError::Input(m) | CmdError::Runtime(m) => m,
        }
    }
}

impl From<std::io::Error> for CmdError {
    fn from(e: std::io::Error) -> Self {
        CmdError::Runtime(e.to_string())
    }
}

impl From<ScenarioError> for CmdError {
    fn from(e: ScenarioError) -> Self {
        match e {
            ScenarioError::Io(io) => CmdError::Runtime(io.to_string()),
            other => CmdError::Input(other.to_string()),
        }
    }
}

impl From<crate::netsim::ConfigError> for CmdError {
    fn from(e: crate::netsim::ConfigError) -> Self {
        CmdError::Input(format!("{}: {}", e.field, e.message))
    }
}

impl From<ExportError> for CmdError {
    fn from(e: ExportError) -> Self {
        match e {
            ExportError::Io(io) => CmdError::Runtime(io.to_string()),
            parse => CmdError::Input(parse.to_string()),
        }
    }
}

impl From<TraceError> for CmdError {
    fn from(e: TraceError) -> Self {
        match e {
            TraceError::Io(io) => CmdError::Runtime(io.to_string()),
            parse => CmdError::Input(parse.to_string()),
        }
    }
}

pub fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter("BLOCKSIM_LOG")).init();
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Run { scenario, out, seed } => cmd_run(&scenario, &out, seed),
        Command::Attack { scenario, out, seed, trials, jobs, grid } => {
            cmd_attack(&scenario, &out, seed, trials, jobs, grid.as_deref())
        }
        Command::Analyze { chain, trace, out } => cmd_analyze(&chain, &trace, &out),
        Command::Report { dir } => cmd_report(&dir),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {}", e.message());
            ExitCode::from(e.exit_code())
        }
    }
}

fn load_scenario(path: &Path, seed: Option<u64>) -> Result<ScenarioFile, CmdError> {
    let mut sc = ScenarioFile::load(path)?;
    if let Some(seed) = seed {
        sc.seed = seed;
    }
    Ok(sc)
}

fn create_writer(dir: &Path, name: &str) -> Result<BufWriter<File>, CmdError> {
    Ok(BufWriter::new(File::create(dir.join(name))?))
}

fn cmd_run(scenario: &Path, out: &Path, seed: Option<u64>) -> Result<(), CmdError> {
    let sc = load_scenario(scenario, seed)?;
    let cfg = sc.sim_config();
    log::info!("running scenario {} with seed {}", scenario.display(), cfg.seed);
    let SimOutput { trace, chains } = run_simulation(&cfg)?;
    fs::create_dir_all(out)?;

    let mut w = create_writer(out, "trace.jsonl")?;
    trace.write_jsonl(&mut w)?;
    w.flush()?;

    // Node 0 is always honest; its view is the published chain.
    let export = ChainExport::from_store(&chains[0]);
    let mut w = create_writer(out, "chain.jsonl")?;
    export.write_jsonl(&mut w)?;
    w.flush()?;

    let mut w = create_writer(out, "metrics.csv")?;
    summarize(&trace).write_csv(&mut w)?;
    w.flush()?;

    write_resolved(&sc, out)?;
    log::info!("run complete: {} blocks, height {}", export.blocks.len(), export.height);
    Ok(())
}

fn write_resolved(sc: &ScenarioFile, out: &Path) -> Result<(), CmdError> {
    let mut w = create_writer(out, "resolved-config.json")?;
    w.write_all(sc.to_json_pretty().as_bytes())?;
    w.write_all(b"\n")?;
    w.flush()?;
    Ok(())
}

fn parse_grid(text: &str) -> Result<Vec<(f64, u64)>, CmdError> {
    let cells: Vec<(f64, u64)> = text
        .split(',')
        .map(str::trim)
        .filter(|c| !c.is_empty())
        .map(|cell| {
            let (q, z) = cell
                .split_once(':')
                .ok_or_else(|| CmdError::input(format!("grid: cell {cell:?} is not share:confirmations")))?;
            let q: f64 = q
                .trim()
                .parse()
                .map_err(|_| CmdError::input(format!("grid: bad share in {cell:?}")))?;
            let z: u64 = z
                .trim()
                .parse()
                .map_err(|_| CmdError::input(format!("grid: bad confirmation count in {cell:?}")))?;
            Ok((q, z))
        })
        .collect::<Result<_, CmdError>>()?;
    if cells.is_empty() {
        return Err(CmdError::input("grid: no cells given"));
    }
    Ok(cells)
}

fn cmd_attack(
    scenario: &Path,
    out: &Path,
    seed: Option<u64>,
    trials: Option<u64>,
    jobs: usize,
    grid: Option<&str>,
) -> Result<(), CmdError> {
    let mut sc = load_scenario(scenario, seed)?;
    if let (Some(trials), Some(block)) = (trials, sc.attack.as_mut()) {
        block.trial_count = trials;
    }
    let base = sc
        .attack_spec()
        .ok_or_else(|| CmdError::input("attack: scenario has no [attack] block"))?;
    let cells = match grid {
        Some(text) => parse_grid(text)?,
        None => vec![(base.attacker_share, base.confirmations_required)],
    };

    let mut results: Vec<(AttackSpec, AttackOutcome)> = Vec::with_capacity(cells.len());
    for (share, confirmations) in cells {
        let spec = AttackSpec {
            attacker_share: share,
            confirmations_required: confirmations,
            ..base.clone()
        };
        spec.validate()?;
        log::info!(
            "attack {:?}: share {share}, z {confirmations}, {} trials",
            spec.kind,
            spec.trial_count
        );
        let outcome = run_attack(&spec, jobs);
        results.push((spec, outcome));
    }

    fs::create_dir_all(out)?;
    let mut w = create_writer(out, "attack_results.csv")?;
    writeln!(w, "q,z,trials,successes,rate,ci_low,ci_high")?;
    for (spec, outcome) in &results {
        let (lo, hi) = outcome.confidence_interval();
        writeln!(
            w,
            "{},{},{},{},{},{lo},{hi}",
            spec.attacker_share,
            spec.confirmations_required,
            outcome.trial_count,
            outcome.success_count,
            outcome.success_rate(),
        )?;
    }
    w.flush()?;
    write_resolved(&sc, out)?;
    Ok(())
}

fn cmd_analyze(chain: &Path, trace: &Path, out: &Path) -> Result<(), CmdError> {
    let export = ChainExport::read_jsonl(BufReader::new(File::open(chain)?))
        .map_err(|e| match e {
            ExportError::Io(io) => CmdError::Runtime(io.to_string()),
            parse => CmdError::Input(format!("{}: {parse}", chain.display())),
        })?;
    let trace = EventTrace::read_jsonl(BufReader::new(File::open(trace)?))
        .map_err(|e| match e {
            TraceError::Io(io) => CmdError::Runtime(io.to_string()),
            parse => CmdError::Input(format!("{}: {parse}", trace.display())),
        })?;

    let graph = TxGraph::from_export(&export);
    let violations = graph.conservation_violations();
    if !violations.is_empty() {
        return Err(CmdError::input(format!(
            "{}: {} transactions overspend their inputs, first {}",
            chain.display(),
            violations.len(),
            violations[0].short()
        )));
    }

    fs::create_dir_all(out)?;
    let mut w = create_writer(out, "clusters.csv")?;
    ClusterSet::from_graph(&graph).write_csv(&mut w)?;
    w.flush()?;

    match first_relayer_attack(&trace) {
        Ok(report) => {
            let mut w = create_writer(out, "deanon.csv")?;
            report.write_csv(&mut w)?;
            w.flush()?;
            log::info!(
                "deanon: accuracy {:.3} over {} txs (baseline {:.3})",
                report.accuracy,
                report.total(),
                report.baseline
            );
        }
        Err(e) => println!("deanon skipped: {e}"),
    }

    let mut w = create_writer(out, "metrics.csv")?;
    summarize(&trace).write_csv(&mut w)?;
    w.flush()?;
    Ok(())
}

/// Prints whatever reports the directory holds. Purely cosmetic: every
/// number comes straight out of the CSVs.
fn cmd_report(dir: &Path) -> Result<(), CmdError> {
    let mut printed = 0;

    let metrics = dir.join("metrics.csv");
    if metrics.exists() {
        println!("== metrics ({}) ==", metrics.display());
        for (metric, key, value) in read_csv3(&metrics)? {
            match key.is_empty() {
                true => println!("  {metric:<28} {value}"),
                false => println!("  {metric:<28} [{key}] {value}"),
            }
        }
        printed += 1;
    }

    let attacks = dir.join("attack_results.csv");
    if attacks.exists() {
        println!("== attack results ({}) ==", attacks.display());
        for row in read_csv_rows(&attacks)? {
            if row.len() == 7 {
                println!(
                    "  share {:<5} z {:<3} rate {} [{}, {}] over {} trials",
                    row[0], row[1], row[4], row[5], row[6], row[2]
                );
            }
        }
        printed += 1;
    }

    let clusters = dir.join("clusters.csv");
    if clusters.exists() {
        let rows = read_csv_rows(&clusters)?;
        let addresses = rows.len();
        let clusters_n = rows
            .iter()
            .filter_map(|r| r.get(1))
            .collect::<std::collections::HashSet<_>>()
            .len();
        println!("== clustering ({}) ==", clusters.display());
        println!("  {addresses} addresses in {clusters_n} clusters");
        printed += 1;
    }

    let deanon = dir.join("deanon.csv");
    if deanon.exists() {
        let rows = read_csv_rows(&deanon)?;
        let correct = rows.iter().filter(|r| r.get(3).is_some_and(|c| c == "true")).count();
        println!("== deanonymization ({}) ==", deanon.display());
        if rows.is_empty() {
            println!("  no transactions observed");
        } else {
            println!(
                "  {}/{} sources guessed right ({:.1}%)",
                correct,
                rows.len(),
                100.0 * correct as f64 / rows.len() as f64
            );
        }
        printed += 1;
    }

    if printed == 0 {
        return Err(CmdError::input(format!("{}: no report CSVs found", dir.display())));
    }
    Ok(())
}

/// Data rows of a comma-separated file, header skipped. Our own writers
/// never emit quoting, so a plain split is exact.
fn read_csv_rows(path: &Path) -> Result<Vec<Vec<String>>, CmdError> {
    let text = fs::read_to_string(path)?;
    Ok(text
        .lines()
        .skip(1)
        .filter(|l| !l.trim().is_empty())
        .map(|l| l.split(',').map(str::to_string).collect())
        .collect())
}

fn read_csv3(path: &Path) -> Result<Vec<(String, String, String)>, CmdError> {
    Ok(read_csv_rows(path)?
        .into_iter()
        .filter(|r| r.len() == 3)
        .map(|mut r| (r.remove(0), r.remove(0), r.remove(0)))
        .collect())
}
