use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use rydkin_cli::app::{execute, load, replay, Overrides};
use rydkin_cli::presets::{default_preset, preset, PRESETS};
use rydkin_cli::{CliError, CliResult, ScenarioKind};

/// Simulate and analyse driven-dissipative Rydberg gases.
#[derive(Parser)]
#[command(name = "rydkin", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct RunArgs {
    /// Scenario configuration (TOML). Defaults to the built-in preset.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Built-in preset to use instead of a file.
    #[arg(long, conflicts_with = "config")]
    preset: Option<String>,
    #[arg(long)]
    seed: Option<u64>,
    /// Directory for the tables and the manifest.
    #[arg(long, default_value = "rydkin-out")]
    out_dir: PathBuf,
    #[arg(long)]
    trajectories: Option<usize>,
    /// Worker threads; all cores when unset.
    #[arg(long, env = "RYDKIN_THREADS")]
    threads: Option<usize>,
}

#[derive(Subcommand)]
enum Command {
    /// Resonant growth under the blockade constraint.
    #[command(name = "blockade_growth", alias = "blockade-growth")]
    BlockadeGrowth(RunArgs),
    /// Off-resonant growth and counting statistics against detuning.
    Facilitation(RunArgs),
    /// Statistics after injecting a variable number of seeds.
    #[command(name = "seeded_facilitation", alias = "seeded-facilitation")]
    SeededFacilitation(RunArgs),
    /// Mean excitation number over a (Rabi frequency, detuning) grid.
    #[command(name = "phase_diagram", alias = "phase-diagram")]
    PhaseDiagram(RunArgs),
    /// Stationary density scan and power-law fit on a lattice.
    #[command(name = "criticality_1d", alias = "criticality-1d")]
    Criticality1d(RunArgs),
    /// Remaining fraction after a de-excitation pulse against its detuning.
    #[command(name = "deexcitation_spectrum", alias = "deexcitation-spectrum")]
    DeexcitationSpectrum(RunArgs),
    /// Steady-state density histogram from quantum-jump trajectories.
    #[command(name = "qjmc_histogram", alias = "qjmc-histogram")]
    QjmcHistogram(RunArgs),
    /// Classical and quantum mean-field stationary states.
    #[command(name = "meanfield_scan", alias = "meanfield-scan")]
    MeanfieldScan(RunArgs),
    /// Incoherent rescaling of resonant growth curves.
    #[command(name = "collapse_demo", alias = "collapse-demo")]
    CollapseDemo(RunArgs),
    /// Repeat a run from its manifest and verify the checksums.
    Replay {
        #[arg(long)]
        manifest: PathBuf,
        #[arg(long, default_value = "rydkin-out")]
        out_dir: PathBuf,
        #[arg(long, env = "RYDKIN_THREADS")]
        threads: Option<usize>,
    },
    /// List the built-in presets, or print one.
    Preset { name: Option<String> },
}

fn run_kind(kind: ScenarioKind, args: RunArgs) -> CliResult<()> {
    let text = match (&args.config, &args.preset) {
        (Some(path), _) => std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?,
        (None, Some(name)) => preset(name)
            .ok_or_else(|| CliError::config("--preset", format!("unknown preset `{name}`")))?
            .to_string(),
        (None, None) => default_preset(kind).to_string(),
    };
    let overrides = Overrides {
        seed: args.seed,
        trajectories: args.trajectories,
    };
    let cfg = load(kind, &text, overrides)?;
    let written = execute(&cfg, &args.out_dir, threads(args.threads))?;
    for path in written {
        println!("{}", path.display());
    }
    Ok(())
}

fn threads(requested: Option<usize>) -> usize {
    requested.unwrap_or(0)
}

fn dispatch(cli: Cli) -> CliResult<()> {
    let (kind, args) = match cli.command {
        Command::BlockadeGrowth(a) => (ScenarioKind::BlockadeGrowth, a),
        Command::Facilitation(a) => (ScenarioKind::Facilitation, a),
        Command::SeededFacilitation(a) => (ScenarioKind::SeededFacilitation, a),
        Command::PhaseDiagram(a) => (ScenarioKind::PhaseDiagram, a),
        Command::Criticality1d(a) => (ScenarioKind::Criticality1d, a),
        Command::DeexcitationSpectrum(a) => (ScenarioKind::DeexcitationSpectrum, a),
        Command::QjmcHistogram(a) => (ScenarioKind::QjmcHistogram, a),
        Command::MeanfieldScan(a) => (ScenarioKind::MeanfieldScan, a),
        Command::CollapseDemo(a) => (ScenarioKind::CollapseDemo, a),
        Command::Replay {
            manifest,
            out_dir,
            threads: t,
        } => {
            replay(&manifest, &out_dir, threads(t))?;
            println!("reproduced {} in {}", manifest.display(), out_dir.display());
            return Ok(());
        }
        Command::Preset { name: None } => {
            for (name, _) in PRESETS {
                println!("{name}");
            }
            return Ok(());
        }
        Command::Preset { name: Some(name) } => {
            let text = preset(&name).ok_or_else(|| CliError::config("preset", format!("unknown preset `{name}`")))?;
            print!("{text}");
            return Ok(());
        }
    };
    run_kind(kind, args)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("rydkin: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
