//! Running a scenario end to end: load, override, resolve, run, write.

use std::path::{Path, PathBuf};
use std::time::Instant;

use crate::config::{Config, RawConfig, ScenarioKind, MAX_SEED};
use crate::error::{CliError, CliResult};
use crate::output::{write_bundle, Manifest, RunInfo, MANIFEST_FILE};
use crate::scenario::run_scenario;

/// Command-line values that replace entries of the configuration file.
#[derive(Debug, Clone, Copy, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub trajectories: Option<usize>,
}

/// Parse `text`, check it describes `kind` and apply `overrides`.
pub fn load(kind: ScenarioKind, text: &str, overrides: Overrides) -> CliResult<Config> {
    let mut raw = RawConfig::parse(text)?;
    if raw.scenario.kind != kind {
        return Err(CliError::config(
            "scenario.kind",
            format!("config describes `{}` but the `{kind}` subcommand was used", raw.scenario.kind),
        ));
    }
    if let Some(seed) = overrides.seed {
        if seed > MAX_SEED {
            return Err(CliError::config("--seed", format!("must not exceed {MAX_SEED}")));
        }
        raw.scenario.seed = Some(seed);
    }
    if let Some(n) = overrides.trajectories {
        if kind == ScenarioKind::MeanfieldScan {
            return Err(CliError::config("--trajectories", "meanfield_scan is deterministic"));
        }
        raw.scenario.trajectories = Some(n);
    }
    Config::from_raw(&raw)
}

/// Run `cfg` on a pool of `threads` workers and write tables plus manifest
/// into `out_dir`. Returns the written paths, manifest last.
pub fn execute(cfg: &Config, out_dir: &Path, threads: usize) -> CliResult<Vec<PathBuf>> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| CliError::config("--threads", e.to_string()))?;
    let start = Instant::now();
    let bundle = pool.install(|| run_scenario(cfg))?;
    let run = RunInfo {
        scenario: cfg.kind,
        seed: cfg.seed,
        code_version: env!("CARGO_PKG_VERSION").to_string(),
        threads: pool.current_num_threads(),
        wall_clock_seconds: start.elapsed().as_secs_f64(),
    };
    write_bundle(&bundle, cfg.to_raw(), run, out_dir)
}

/// Repeat the run recorded in `manifest_path` and compare checksums.
pub fn replay(manifest_path: &Path, out_dir: &Path, threads: usize) -> CliResult<Vec<PathBuf>> {
    let text = std::fs::read_to_string(manifest_path).map_err(|e| CliError::io(manifest_path, e))?;
    let old = Manifest::parse(&text)?;
    let cfg = Config::from_raw(&old.config)?;
    let written = execute(&cfg, out_dir, threads)?;
    let new_text = std::fs::read_to_string(out_dir.join(MANIFEST_FILE)).map_err(|e| CliError::io(out_dir, e))?;
    let new = Manifest::parse(&new_text)?;
    if new.checksums != old.checksums {
        let differing: Vec<&String> = old
            .checksums
            .keys()
            .chain(new.checksums.keys())
            .filter(|k| old.checksums.get(*k) != new.checksums.get(*k))
            .collect();
        return Err(CliError::Numerical(format!("replay differs from the manifest in {differing:?}")));
    }
    Ok(written)
}
