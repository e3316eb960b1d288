use std::f64::consts::TAU;
use std::fs;
use std::path::Path;
use std::process::Command;

use rydkin_cli::app::{execute, load, Overrides};
use rydkin_cli::config::Config;
use rydkin_cli::presets::PRESETS;
use rydkin_cli::units::{parse_quantity, Quantity};
use rydkin_cli::{CliError, Manifest, ScenarioKind};

const FACILITATION: &str = r#"
[scenario]
kind = "facilitation"
seed = 11
trajectories = 24

[physics]
rabi = "250 kHz"
detuning = "19 MHz"
dephasing = "700 kHz"
decay = "0.0125 /us"
c6 = "869.7 GHz um^6"
detection_eff = 0.4

[geometry]
mode = "continuum"
cloud = "cylinder"
radius = "3 um"
length = "40 um"
atom_count = 60

[[protocol]]
drive = "excitation"
duration = "20 us"

[scan]
detuning = ["19 MHz", "0 MHz", "-19 MHz"]

[output]
record_times = ["5 us", "10 us", "15 us", "20 us"]
"#;

fn rydkin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_rydkin"))
}

fn write_config(dir: &Path, text: &str) -> std::path::PathBuf {
    let path = dir.join("config.toml");
    fs::write(&path, text).unwrap();
    path
}

fn csv_files(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut files: Vec<_> = fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.extension().is_some_and(|e| e == "csv"))
        .map(|p| (p.file_name().unwrap().to_string_lossy().into_owned(), fs::read(&p).unwrap()))
        .collect();
    files.sort();
    files
}

fn data_rows(path: &Path) -> usize {
    fs::read_to_string(path).unwrap().lines().count() - 1
}

#[test]
fn tables_are_byte_identical_across_thread_counts() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = load(ScenarioKind::Facilitation, FACILITATION, Overrides::default()).unwrap();
    let one = tmp.path().join("one");
    let many = tmp.path().join("many");
    execute(&cfg, &one, 1).unwrap();
    execute(&cfg, &many, 4).unwrap();
    let (a, b) = (csv_files(&one), csv_files(&many));
    assert!(!a.is_empty());
    assert_eq!(a, b);
}

#[test]
fn binary_honours_thread_flag_and_environment() {
    let tmp = tempfile::tempdir().unwrap();
    let config = write_config(tmp.path(), FACILITATION);
    let flag = tmp.path().join("flag");
    let env = tmp.path().join("env");
    let status = rydkin()
        .args(["facilitation", "--threads", "3", "--config"])
        .arg(&config)
        .arg("--out-dir")
        .arg(&flag)
        .output()
        .unwrap();
    assert!(status.status.success(), "{}", String::from_utf8_lossy(&status.stderr));
    let status = rydkin()
        .env("RYDKIN_THREADS", "2")
        .args(["facilitation", "--config"])
        .arg(&config)
        .arg("--out-dir")
        .arg(&env)
        .output()
        .unwrap();
    assert!(status.status.success());
    assert_eq!(csv_files(&flag), csv_files(&env));
    let m = Manifest::parse(&fs::read_to_string(env.join("manifest")).unwrap()).unwrap();
    assert_eq!(m.run.threads, 2);
    let m = Manifest::parse(&fs::read_to_string(flag.join("manifest")).unwrap()).unwrap();
    assert_eq!(m.run.threads, 3);
}

#[test]
fn different_seeds_give_different_tables() {
    let tmp = tempfile::tempdir().unwrap();
    let a = load(ScenarioKind::Facilitation, FACILITATION, Overrides::default()).unwrap();
    let b = load(
        ScenarioKind::Facilitation,
        FACILITATION,
        Overrides {
            seed: Some(12),
            ..Overrides::default()
        },
    )
    .unwrap();
    execute(&a, &tmp.path().join("a"), 1).unwrap();
    execute(&b, &tmp.path().join("b"), 1).unwrap();
    assert_ne!(csv_files(&tmp.path().join("a")), csv_files(&tmp.path().join("b")));
}

#[test]
fn resolved_config_round_trip_is_idempotent_for_every_preset() {
    for (name, text) in PRESETS {
        let first = Config::parse(text).unwrap().to_raw().to_toml();
        let again = Config::parse(&first).unwrap();
        assert_eq!(again.to_raw().to_toml(), first, "{name}");
        assert_eq!(again, Config::parse(text).unwrap(), "{name}");
    }
}

#[test]
fn manifest_exposes_resolved_units_and_checksums() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = load(ScenarioKind::Facilitation, FACILITATION, Overrides::default()).unwrap();
    execute(&cfg, tmp.path(), 1).unwrap();
    let text = fs::read_to_string(tmp.path().join("manifest")).unwrap();
    let m = Manifest::parse(&text).unwrap();
    let physics = m.config.physics.as_ref().unwrap();
    let det = parse_quantity(physics.detuning.as_deref().unwrap(), Quantity::Frequency, true).unwrap();
    assert_eq!(det, TAU * 19.0);
    assert!(physics.detuning.as_deref().unwrap().ends_with("rad/us"));
    assert_eq!(m.run.seed, 11);
    assert_eq!(m.run.scenario, ScenarioKind::Facilitation);
    assert_eq!(m.checksums.len(), 1);
    assert!(m.checksums["facilitation__counts.csv"].starts_with("sha256:"));
    // The manifest alone reproduces the configuration.
    assert_eq!(Config::from_raw(&m.config).unwrap(), cfg);
}

#[test]
fn replay_reproduces_the_tables() {
    let tmp = tempfile::tempdir().unwrap();
    let config = write_config(tmp.path(), FACILITATION);
    let first = tmp.path().join("first");
    let out = rydkin()
        .args(["facilitation", "--threads", "1", "--config"])
        .arg(&config)
        .arg("--out-dir")
        .arg(&first)
        .output()
        .unwrap();
    assert!(out.status.success());
    let second = tmp.path().join("second");
    let out = rydkin()
        .args(["replay", "--threads", "2", "--manifest"])
        .arg(first.join("manifest"))
        .arg("--out-dir")
        .arg(&second)
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert_eq!(csv_files(&first), csv_files(&second));
}

#[test]
fn row_count_is_record_times_times_scan_points() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = load(ScenarioKind::Facilitation, FACILITATION, Overrides::default()).unwrap();
    execute(&cfg, tmp.path(), 1).unwrap();
    assert_eq!(data_rows(&tmp.path().join("facilitation__counts.csv")), 4 * 3);

    let grid = r#"
[scenario]
kind = "phase_diagram"
trajectories = 5

[physics]
dephasing = "700 kHz"
decay = "0.0125 /us"
c6 = "869.7 GHz um^6"

[geometry]
mode = "lattice"
dimension = 1
atom_count = 30
spacing = "6 um"

[[protocol]]
drive = "excitation"
duration = "50 us"
seeds = 2.0

[scan]
rabi = { from = "50 kHz", to = "250 kHz", steps = 3 }
detuning = ["10 MHz", "20 MHz"]

[output]
record_times = { from = "10 us", to = "50 us", steps = 5 }
"#;
    let cfg = load(ScenarioKind::PhaseDiagram, grid, Overrides::default()).unwrap();
    let dir = tmp.path().join("grid");
    execute(&cfg, &dir, 1).unwrap();
    assert_eq!(data_rows(&dir.join("phase_diagram__mean_count.csv")), 5 * 3 * 2);
}

#[test]
fn empty_observable_set_writes_only_the_manifest() {
    let tmp = tempfile::tempdir().unwrap();
    let text = FACILITATION.replace("[output]", "[output]\nobservables = []");
    let cfg = load(ScenarioKind::Facilitation, &text, Overrides::default()).unwrap();
    let written = execute(&cfg, tmp.path(), 1).unwrap();
    assert_eq!(written, vec![tmp.path().join("manifest")]);
    let names: Vec<_> = fs::read_dir(tmp.path()).unwrap().map(|e| e.unwrap().file_name()).collect();
    assert_eq!(names, vec!["manifest"]);
    let m = Manifest::parse(&fs::read_to_string(tmp.path().join("manifest")).unwrap()).unwrap();
    assert!(m.checksums.is_empty());
}

#[test]
fn unknown_keys_are_rejected_with_their_path() {
    let text = FACILITATION.replace("[[protocol]]\ndrive", "[[protocol]]\npower = \"1 mW\"\ndrive");
    match load(ScenarioKind::Facilitation, &text, Overrides::default()).unwrap_err() {
        CliError::Config { path, message } => {
            assert_eq!(path, "protocol[0].power");
            assert!(message.contains("unknown field"), "{message}");
        }
        e => panic!("unexpected {e}"),
    }
}

#[test]
fn keys_are_checked_against_the_scenario_kind() {
    let text = FACILITATION.replace("[scan]", "[scan]\nmean_seeds = [1.0]");
    match load(ScenarioKind::Facilitation, &text, Overrides::default()).unwrap_err() {
        CliError::Config { path, .. } => assert_eq!(path, "scan.mean_seeds"),
        e => panic!("unexpected {e}"),
    }
}

#[test]
fn quantities_without_units_are_rejected() {
    let text = FACILITATION.replace("\"250 kHz\"", "0.25");
    assert!(matches!(
        load(ScenarioKind::Facilitation, &text, Overrides::default()),
        Err(CliError::Config { ref path, .. }) if path == "physics.rabi"
    ));
    let text = FACILITATION.replace("\"250 kHz\"", "\"250\"");
    assert!(matches!(
        load(ScenarioKind::Facilitation, &text, Overrides::default()),
        Err(CliError::Config { ref path, .. }) if path == "physics.rabi"
    ));
}

fn exit_code(args: &[&str], config: Option<&str>) -> (i32, String) {
    let tmp = tempfile::tempdir().unwrap();
    let mut cmd = rydkin();
    cmd.args(args).arg("--out-dir").arg(tmp.path().join("out"));
    if let Some(text) = config {
        cmd.arg("--config").arg(write_config(tmp.path(), text));
    }
    let out = cmd.output().unwrap();
    (out.status.code().unwrap(), String::from_utf8_lossy(&out.stderr).into_owned())
}

#[test]
fn exit_code_for_config_errors_is_two() {
    let bad = FACILITATION.replace("seed = 11", "seed = 11\ncolour = \"blue\"");
    let (code, err) = exit_code(&["facilitation"], Some(&bad));
    assert_eq!(code, 2);
    assert!(err.contains("scenario.colour"), "{err}");

    let (code, err) = exit_code(&["phase_diagram"], Some(FACILITATION));
    assert_eq!(code, 2);
    assert!(err.contains("scenario.kind"), "{err}");
}

#[test]
fn exit_code_for_capacity_errors_is_three() {
    let text = r#"
[scenario]
kind = "qjmc_histogram"
trajectories = 2
t_end = "1 us"

[physics]
rabi = "1 rad/us"
decay = "1 /us"

[geometry]
mode = "lattice"
dimension = 1
atom_count = 15
"#;
    let (code, err) = exit_code(&["qjmc_histogram"], Some(text));
    assert_eq!(code, 3, "{err}");
}

#[test]
fn exit_code_for_numerical_failures_is_four() {
    // All points lie in the absorbing phase, so no power law can be fitted.
    let text = r#"
[scenario]
kind = "criticality_1d"
trajectories = 2

[physics]
dephasing = "700 kHz"
decay = "1 /us"
c6 = "869.7 GHz um^6"

[geometry]
mode = "lattice"
atom_count = 16
spacing = "5 um"
boundary = "periodic"

[[protocol]]
drive = "excitation"
duration = "20 us"
seeds = 1.0

[scan]
rabi = ["1 kHz", "2 kHz", "3 kHz", "4 kHz", "5 kHz"]
"#;
    let (code, err) = exit_code(&["criticality_1d"], Some(text));
    assert_eq!(code, 4, "{err}");
    assert!(err.contains("fit"), "{err}");
}

#[test]
fn exit_code_for_unwritable_output_is_one() {
    let tmp = tempfile::tempdir().unwrap();
    let blocker = tmp.path().join("file");
    fs::write(&blocker, "x").unwrap();
    let out = rydkin()
        .args(["meanfield_scan", "--out-dir"])
        .arg(&blocker)
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn presets_are_listed_and_printed() {
    let out = rydkin().arg("preset").output().unwrap();
    let list = String::from_utf8(out.stdout).unwrap();
    assert_eq!(list.lines().count(), PRESETS.len());
    let out = rydkin().args(["preset", "qjmc_histogram"]).output().unwrap();
    assert!(String::from_utf8(out.stdout).unwrap().contains("kind = \"qjmc_histogram\""));
}

#[test]
fn kebab_case_alias_runs_the_default_preset() {
    let tmp = tempfile::tempdir().unwrap();
    let out = rydkin()
        .args(["meanfield-scan", "--out-dir"])
        .arg(tmp.path())
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    for name in ["classical_roots", "quantum_roots", "trajectory"] {
        assert!(tmp.path().join(format!("meanfield_scan__{name}.csv")).exists());
    }
}

#[test]
fn seeded_scan_replaces_the_protocol_seed_count() {
    let text = r#"
[scenario]
kind = "seeded_facilitation"
trajectories = 50
bimodal = { n1 = 0.5, n2 = 10.0 }

[physics]
rabi = "250 kHz"
detuning = "24 MHz"
dephasing = "700 kHz"
decay = "0 /us"
c6 = "869.7 GHz um^6"
detection_eff = 0.4

[geometry]
mode = "lattice"
atom_count = 40
spacing = "20 um"

[[protocol]]
drive = "off"
duration = "1 us"
seeds = 0.0

[scan]
mean_seeds = [0.0, 3.0]
"#;
    let tmp = tempfile::tempdir().unwrap();
    let cfg = load(ScenarioKind::SeededFacilitation, text, Overrides::default()).unwrap();
    execute(&cfg, tmp.path(), 1).unwrap();
    let rows: Vec<Vec<f64>> = fs::read_to_string(tmp.path().join("seeded_facilitation__statistics.csv"))
        .unwrap()
        .lines()
        .skip(1)
        .map(|l| l.split(',').map(|v| v.parse().unwrap()).collect())
        .collect();
    // Atoms 20 µm apart do not interact; without drive only the seeds remain.
    assert_eq!(rows[0][2], 0.0);
    assert!((rows[1][2] - 3.0).abs() < 4.0 * rows[1][3], "{:?}", rows[1]);
}
