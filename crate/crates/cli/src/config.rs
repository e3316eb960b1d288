//! Scenario configuration: the strict TOML schema and its resolution into
//! internal units.
//!
//! [`RawConfig`] mirrors the file layout. [`Config::from_raw`] converts every
//! quantity, rejects keys that do not apply to the scenario kind, and
//! [`Config::to_raw`] emits the resolved values in canonical units.

use std::fmt;

use rydkin_core::model::two_photon_rabi;
use rydkin_core::{Boundary, CloudShape, GasGeometry, PhysicalParams, RateKernel, TwoPhotonParams};
use serde::{Deserialize, Serialize};

use crate::error::{CliError, CliResult};
use crate::units::{format_quantity, parse_quantity, Quantity};

/// Largest seed that survives a round trip through the manifest (TOML
/// integers are signed 64-bit).
pub const MAX_SEED: u64 = i64::MAX as u64;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScenarioKind {
    BlockadeGrowth,
    Facilitation,
    SeededFacilitation,
    PhaseDiagram,
    #[serde(rename = "criticality_1d")]
    Criticality1d,
    DeexcitationSpectrum,
    QjmcHistogram,
    MeanfieldScan,
    CollapseDemo,
}

impl ScenarioKind {
    pub const ALL: [ScenarioKind; 9] = [
        ScenarioKind::BlockadeGrowth,
        ScenarioKind::Facilitation,
        ScenarioKind::SeededFacilitation,
        ScenarioKind::PhaseDiagram,
        ScenarioKind::Criticality1d,
        ScenarioKind::DeexcitationSpectrum,
        ScenarioKind::QjmcHistogram,
        ScenarioKind::MeanfieldScan,
        ScenarioKind::CollapseDemo,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ScenarioKind::BlockadeGrowth => "blockade_growth",
            ScenarioKind::Facilitation => "facilitation",
            ScenarioKind::SeededFacilitation => "seeded_facilitation",
            ScenarioKind::PhaseDiagram => "phase_diagram",
            ScenarioKind::Criticality1d => "criticality_1d",
            ScenarioKind::DeexcitationSpectrum => "deexcitation_spectrum",
            ScenarioKind::QjmcHistogram => "qjmc_histogram",
            ScenarioKind::MeanfieldScan => "meanfield_scan",
            ScenarioKind::CollapseDemo => "collapse_demo",
        }
    }

    /// Tables this kind can produce.
    pub fn observables(self) -> &'static [&'static str] {
        match self {
            ScenarioKind::BlockadeGrowth => &["counts", "growth_rate", "exponent"],
            ScenarioKind::Facilitation => &["counts"],
            ScenarioKind::SeededFacilitation => &["statistics"],
            ScenarioKind::PhaseDiagram => &["mean_count"],
            ScenarioKind::Criticality1d => &["stationary_density", "fit"],
            ScenarioKind::DeexcitationSpectrum => &["remaining_fraction", "minima"],
            ScenarioKind::QjmcHistogram => &["histogram", "peaks"],
            ScenarioKind::MeanfieldScan => &["classical_roots", "quantum_roots", "trajectory"],
            ScenarioKind::CollapseDemo => &["curves", "deviation"],
        }
    }

    /// Kinds driven by the kinetic Monte Carlo engine.
    pub fn uses_kmc(self) -> bool {
        !matches!(self, ScenarioKind::QjmcHistogram | ScenarioKind::MeanfieldScan)
    }
}

impl fmt::Display for ScenarioKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KernelChoice {
    VanDerWaals,
    NearestNeighbour,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GeometryMode {
    Lattice,
    Continuum,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BoundaryChoice {
    Open,
    Periodic,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CloudChoice {
    Gaussian,
    Cylinder,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DriveChoice {
    Excitation,
    Deexcitation,
    Off,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InitialChoice {
    Center,
    Vacuum,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Spacing {
    Linear,
    Log,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum RawValue {
    Number(f64),
    Text(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawRange {
    pub from: RawValue,
    pub to: RawValue,
    pub steps: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub spacing: Option<Spacing>,
}

/// A scan axis or list of times: explicit values or a range.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum RawAxis {
    List(Vec<RawValue>),
    Range(RawRange),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawBimodal {
    pub n1: f64,
    pub n2: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawScenario {
    pub kind: ScenarioKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub trajectories: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub times_two_pi: Option<bool>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub t_end: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bins: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub samples: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub initial_state: Option<InitialChoice>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub initial_density: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub smoothing_window: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub neighbour_count: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub average_from: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fit_window: Option<[f64; 2]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fit_grid: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fit_min_points: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bimodal: Option<RawBimodal>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawTwoPhoton {
    pub rabi_420: String,
    pub rabi_1013: String,
    pub detuning_6p: String,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawPhysics {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rabi: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub detuning: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dephasing: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub decay: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub c6: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub detection_eff: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub kernel: Option<KernelChoice>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub spontaneous: Option<bool>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cutoff: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub motion: Option<bool>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mean_speed: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub motion_interval: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub two_photon: Option<RawTwoPhoton>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawGeometry {
    pub mode: GeometryMode,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dimension: Option<usize>,
    pub atom_count: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub spacing: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub boundary: Option<BoundaryChoice>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cloud: Option<CloudChoice>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sigma: Option<Vec<String>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub radius: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub length: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawSegment {
    pub drive: DriveChoice,
    pub duration: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rabi: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub detuning: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seeds: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawScan {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rabi: Option<RawAxis>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub detuning: Option<RawAxis>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mean_seeds: Option<RawAxis>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawOutput {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub record_times: Option<RawAxis>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scaled_times: Option<RawAxis>,
    /// Tables to write; all of the kind's observables when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub observables: Option<Vec<String>>,
}

/// The configuration file as written.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawConfig {
    pub scenario: RawScenario,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub physics: Option<RawPhysics>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub geometry: Option<RawGeometry>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub protocol: Vec<RawSegment>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scan: Option<RawScan>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output: Option<RawOutput>,
}

impl RawConfig {
    /// Parse TOML, reporting schema violations with their key path.
    pub fn parse(text: &str) -> CliResult<Self> {
        let de = toml::Deserializer::parse(text).map_err(|e| CliError::config("<document>", e.to_string()))?;
        serde_path_to_error::deserialize(de).map_err(|e| {
            let path = e.path().to_string();
            let message = e.into_inner().message().trim().to_string();
            CliError::config(if path == "." { "<document>".into() } else { path }, message)
        })
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("configuration serialises")
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Segment {
    pub drive: DriveChoice,
    pub duration: f64,
    pub rabi: Option<f64>,
    pub detuning: Option<f64>,
    pub seeds: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Physics {
    pub rabi: Option<f64>,
    pub two_photon: Option<TwoPhotonParams>,
    pub detuning: Option<f64>,
    pub dephasing: Option<f64>,
    pub decay: Option<f64>,
    pub c6: Option<f64>,
    pub detection_eff: Option<f64>,
    pub kernel: Option<KernelChoice>,
    pub spontaneous: Option<bool>,
    pub cutoff: Option<f64>,
    pub motion: Option<bool>,
    pub mean_speed: Option<f64>,
    pub motion_interval: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Options {
    pub t_end: Option<f64>,
    pub bins: Option<usize>,
    pub samples: Option<usize>,
    pub initial_state: Option<InitialChoice>,
    pub initial_density: Option<f64>,
    pub smoothing_window: Option<usize>,
    pub neighbour_count: Option<f64>,
    pub average_from: Option<f64>,
    pub fit_window: Option<[f64; 2]>,
    pub fit_grid: Option<usize>,
    pub fit_min_points: Option<usize>,
    pub bimodal: Option<(f64, f64)>,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Scan {
    pub rabi: Option<Vec<f64>>,
    pub detuning: Option<Vec<f64>>,
    pub mean_seeds: Option<Vec<f64>>,
}

/// Fully resolved configuration in internal units.
#[derive(Debug, Clone, PartialEq)]
pub struct Config {
    pub kind: ScenarioKind,
    pub seed: u64,
    pub trajectories: usize,
    pub times_two_pi: bool,
    pub options: Options,
    pub physics: Physics,
    pub geometry: Option<GasGeometry>,
    pub protocol: Vec<Segment>,
    pub scan: Scan,
    pub record_times: Option<Vec<f64>>,
    pub scaled_times: Option<Vec<f64>>,
    pub observables: Option<Vec<String>>,
}

pub const DEFAULT_SEED: u64 = 0;
pub const DEFAULT_TRAJECTORIES: usize = 100;

struct Resolver {
    times_two_pi: bool,
}

impl Resolver {
    fn quantity(&self, path: &str, text: &str, kind: Quantity) -> CliResult<f64> {
        parse_quantity(text, kind, self.times_two_pi).map_err(|m| CliError::config(path, m))
    }

    fn opt(&self, path: &str, text: &Option<String>, kind: Quantity) -> CliResult<Option<f64>> {
        text.as_deref().map(|t| self.quantity(path, t, kind)).transpose()
    }

    fn value(&self, path: &str, v: &RawValue, kind: Option<Quantity>) -> CliResult<f64> {
        match (v, kind) {
            (RawValue::Text(t), Some(k)) => self.quantity(path, t, k),
            (RawValue::Number(x), None) if x.is_finite() => Ok(*x),
            (RawValue::Number(_), Some(k)) => Err(CliError::config(
                path,
                format!("a unit is required, e.g. \"1 {}\"", k.canonical_unit()),
            )),
            (RawValue::Number(_), None) => Err(CliError::config(path, "value must be finite")),
            (RawValue::Text(_), None) => Err(CliError::config(path, "expected a plain number")),
        }
    }

    fn axis(&self, path: &str, axis: &RawAxis, kind: Option<Quantity>) -> CliResult<Vec<f64>> {
        let values = match axis {
            RawAxis::List(items) => items
                .iter()
                .enumerate()
                .map(|(i, v)| self.value(&format!("{path}[{i}]"), v, kind))
                .collect::<CliResult<Vec<f64>>>()?,
            RawAxis::Range(r) => {
                let from = self.value(&format!("{path}.from"), &r.from, kind)?;
                let to = self.value(&format!("{path}.to"), &r.to, kind)?;
                if r.steps == 0 {
                    return Err(CliError::config(format!("{path}.steps"), "must be at least 1"));
                }
                let log = r.spacing == Some(Spacing::Log);
                if log && !(from > 0.0 && to > 0.0) {
                    return Err(CliError::config(path.to_string(), "log spacing needs positive end points"));
                }
                (0..r.steps)
                    .map(|i| {
                        let f = if r.steps == 1 { 0.0 } else { i as f64 / (r.steps - 1) as f64 };
                        if log {
                            (from.ln() + f * (to.ln() - from.ln())).exp()
                        } else {
                            from + f * (to - from)
                        }
                    })
                    .collect()
            }
        };
        if values.is_empty() {
            return Err(CliError::config(path.to_string(), "must contain at least one value"));
        }
        Ok(values)
    }
}

/// Key paths present in `raw` that the scenario kind does not use.
fn unused_keys(raw: &RawConfig) -> Vec<String> {
    use ScenarioKind as K;
    let kind = raw.scenario.kind;
    let mut bad = Vec::new();
    let mut check = |path: &str, present: bool, allowed: bool| {
        if present && !allowed {
            bad.push(path.to_string());
        }
    };

    let s = &raw.scenario;
    check("scenario.trajectories", s.trajectories.is_some(), kind != K::MeanfieldScan);
    check("scenario.t_end", s.t_end.is_some(), kind == K::QjmcHistogram);
    check("scenario.bins", s.bins.is_some(), kind == K::QjmcHistogram);
    check("scenario.samples", s.samples.is_some(), kind == K::QjmcHistogram);
    check("scenario.initial_state", s.initial_state.is_some(), kind == K::QjmcHistogram);
    check("scenario.initial_density", s.initial_density.is_some(), kind == K::MeanfieldScan);
    check("scenario.smoothing_window", s.smoothing_window.is_some(), kind == K::BlockadeGrowth);
    check("scenario.neighbour_count", s.neighbour_count.is_some(), kind == K::BlockadeGrowth);
    let critical = kind == K::Criticality1d;
    check("scenario.average_from", s.average_from.is_some(), critical);
    check("scenario.fit_window", s.fit_window.is_some(), critical);
    check("scenario.fit_grid", s.fit_grid.is_some(), critical);
    check("scenario.fit_min_points", s.fit_min_points.is_some(), critical);
    check("scenario.bimodal", s.bimodal.is_some(), kind == K::SeededFacilitation);

    let kmc = kind.uses_kmc();
    if let Some(p) = &raw.physics {
        let qjmc = kind == K::QjmcHistogram;
        let mf = kind == K::MeanfieldScan;
        check("physics.detuning", p.detuning.is_some(), !qjmc);
        check("physics.dephasing", p.dephasing.is_some(), !qjmc);
        check("physics.c6", p.c6.is_some(), kmc);
        check("physics.detection_eff", p.detection_eff.is_some(), kmc);
        check("physics.kernel", p.kernel.is_some(), kmc);
        check("physics.spontaneous", p.spontaneous.is_some(), kmc || mf);
        check("physics.cutoff", p.cutoff.is_some(), kmc);
        check("physics.motion", p.motion.is_some(), kmc);
        check("physics.mean_speed", p.mean_speed.is_some(), kmc);
        check("physics.motion_interval", p.motion_interval.is_some(), kmc);
        check("physics.two_photon", p.two_photon.is_some(), kmc);
    }

    check("geometry", raw.geometry.is_some(), kind != K::MeanfieldScan);
    if let (Some(g), K::QjmcHistogram) = (&raw.geometry, kind) {
        check("geometry.spacing", g.spacing.is_some(), false);
        check("geometry.cloud", g.cloud.is_some(), false);
        check("geometry.sigma", g.sigma.is_some(), false);
        check("geometry.radius", g.radius.is_some(), false);
        check("geometry.length", g.length.is_some(), false);
    }

    check(
        "protocol",
        !raw.protocol.is_empty(),
        kmc && kind != K::CollapseDemo,
    );

    if let Some(sc) = &raw.scan {
        check(
            "scan.rabi",
            sc.rabi.is_some(),
            matches!(
                kind,
                K::BlockadeGrowth
                    | K::PhaseDiagram
                    | K::Criticality1d
                    | K::QjmcHistogram
                    | K::MeanfieldScan
                    | K::CollapseDemo
            ),
        );
        check(
            "scan.detuning",
            sc.detuning.is_some(),
            matches!(kind, K::Facilitation | K::PhaseDiagram | K::DeexcitationSpectrum),
        );
        check("scan.mean_seeds", sc.mean_seeds.is_some(), kind == K::SeededFacilitation);
    }

    if let Some(o) = &raw.output {
        check(
            "output.record_times",
            o.record_times.is_some(),
            kmc && !matches!(kind, K::DeexcitationSpectrum | K::CollapseDemo) || kind == K::MeanfieldScan,
        );
        check("output.scaled_times", o.scaled_times.is_some(), kind == K::CollapseDemo);
    }
    bad
}

impl Config {
    pub fn parse(text: &str) -> CliResult<Self> {
        Self::from_raw(&RawConfig::parse(text)?)
    }

    pub fn from_raw(raw: &RawConfig) -> CliResult<Self> {
        if let Some(path) = unused_keys(raw).into_iter().next() {
            return Err(CliError::config(
                path,
                format!("not used by scenario kind `{}`", raw.scenario.kind),
            ));
        }
        let s = &raw.scenario;
        let times_two_pi = s.times_two_pi.unwrap_or(true);
        let r = Resolver { times_two_pi };
        let seed = s.seed.unwrap_or(DEFAULT_SEED);
        if seed > MAX_SEED {
            return Err(CliError::config("scenario.seed", format!("must not exceed {MAX_SEED}")));
        }
        let trajectories = s.trajectories.unwrap_or(DEFAULT_TRAJECTORIES);
        if trajectories == 0 {
            return Err(CliError::config("scenario.trajectories", "must be at least 1"));
        }

        let options = Options {
            t_end: r.opt("scenario.t_end", &s.t_end, Quantity::Time)?,
            bins: s.bins,
            samples: s.samples,
            initial_state: s.initial_state,
            initial_density: s.initial_density,
            smoothing_window: s.smoothing_window,
            neighbour_count: s.neighbour_count,
            average_from: r.opt("scenario.average_from", &s.average_from, Quantity::Time)?,
            fit_window: s.fit_window,
            fit_grid: s.fit_grid,
            fit_min_points: s.fit_min_points,
            bimodal: s.bimodal.as_ref().map(|b| (b.n1, b.n2)),
        };

        let physics = match &raw.physics {
            Some(p) => resolve_physics(&r, p)?,
            None => Physics::default(),
        };

        let geometry = raw.geometry.as_ref().map(|g| resolve_geometry(&r, g, s.kind)).transpose()?;

        let protocol = raw
            .protocol
            .iter()
            .enumerate()
            .map(|(i, seg)| resolve_segment(&r, i, seg))
            .collect::<CliResult<Vec<_>>>()?;

        let raw_scan = raw.scan.clone().unwrap_or_default();
        let axis = |name: &str, a: &Option<RawAxis>, q: Option<Quantity>| {
            a.as_ref().map(|a| r.axis(&format!("scan.{name}"), a, q)).transpose()
        };
        let scan = Scan {
            rabi: axis("rabi", &raw_scan.rabi, Some(Quantity::Frequency))?,
            detuning: axis("detuning", &raw_scan.detuning, Some(Quantity::Frequency))?,
            mean_seeds: axis("mean_seeds", &raw_scan.mean_seeds, None)?,
        };
        let out = raw.output.clone().unwrap_or_default();
        let record_times = out
            .record_times
            .as_ref()
            .map(|a| r.axis("output.record_times", a, Some(Quantity::Time)))
            .transpose()?;
        let scaled_times = out
            .scaled_times
            .as_ref()
            .map(|a| r.axis("output.scaled_times", a, None))
            .transpose()?;

        if let Some(names) = &out.observables {
            for (i, name) in names.iter().enumerate() {
                if !s.kind.observables().contains(&name.as_str()) {
                    return Err(CliError::config(
                        format!("output.observables[{i}]"),
                        format!(
                            "`{name}` is not an observable of `{}`; expected one of {:?}",
                            s.kind,
                            s.kind.observables()
                        ),
                    ));
                }
            }
        }

        let cfg = Config {
            kind: s.kind,
            seed,
            trajectories,
            times_two_pi,
            options,
            physics,
            geometry,
            protocol,
            scan,
            record_times,
            scaled_times,
            observables: out.observables.clone(),
        };
        cfg.check_requirements()?;
        Ok(cfg)
    }

    /// Kind-specific required keys and value ranges.
    fn check_requirements(&self) -> CliResult<()> {
        use ScenarioKind as K;
        let kind = self.kind;
        let need = |present: bool, path: &str| {
            if present {
                Ok(())
            } else {
                Err(CliError::config(path, format!("required by scenario kind `{kind}`")))
            }
        };
        let p = &self.physics;
        match kind {
            K::QjmcHistogram => {
                need(p.rabi.is_some() || self.scan.rabi.is_some(), "physics.rabi")?;
                need(p.decay.is_some(), "physics.decay")?;
                need(self.options.t_end.is_some(), "scenario.t_end")?;
                need(self.geometry.is_some(), "geometry")?;
            }
            K::MeanfieldScan => {
                need(self.scan.rabi.is_some(), "scan.rabi")?;
                need(p.dephasing.is_some(), "physics.dephasing")?;
                need(p.decay.is_some(), "physics.decay")?;
            }
            _ => {
                need(self.geometry.is_some(), "geometry")?;
                need(p.dephasing.is_some(), "physics.dephasing")?;
                need(p.decay.is_some(), "physics.decay")?;
                need(p.c6.is_some(), "physics.c6")?;
            }
        }
        match kind {
            K::SeededFacilitation => {
                need(self.scan.mean_seeds.is_some(), "scan.mean_seeds")?;
                if !self.protocol.iter().any(|s| s.seeds.is_some()) {
                    return Err(CliError::config(
                        "protocol",
                        "one segment must declare `seeds`; its value is replaced by the scan",
                    ));
                }
            }
            K::PhaseDiagram => {
                need(self.scan.rabi.is_some(), "scan.rabi")?;
                need(self.scan.detuning.is_some(), "scan.detuning")?;
            }
            K::Criticality1d => {
                need(self.scan.rabi.is_some(), "scan.rabi")?;
                match self.geometry {
                    Some(GasGeometry::Lattice { dimension: 1, .. }) => {}
                    _ => return Err(CliError::config("geometry", "criticality_1d needs a one-dimensional lattice")),
                }
            }
            K::DeexcitationSpectrum => {
                need(self.scan.detuning.is_some(), "scan.detuning")?;
                let deex: Vec<usize> = (0..self.protocol.len())
                    .filter(|&i| self.protocol[i].drive == DriveChoice::Deexcitation)
                    .collect();
                if deex.len() != 1 {
                    return Err(CliError::config("protocol", "exactly one deexcitation segment is required"));
                }
                if self.protocol[deex[0]].detuning.is_some() {
                    return Err(CliError::config(
                        format!("protocol[{}].detuning", deex[0]),
                        "the deexcitation detuning is set by scan.detuning",
                    ));
                }
            }
            K::CollapseDemo => {
                need(self.scan.rabi.as_ref().is_some_and(|r| r.len() >= 2), "scan.rabi")?;
                need(self.scaled_times.is_some(), "output.scaled_times")?;
            }
            K::Facilitation | K::BlockadeGrowth => {}
            K::QjmcHistogram | K::MeanfieldScan => {}
        }
        if let Some(eta) = p.detection_eff {
            if !(eta > 0.0 && eta <= 1.0) {
                return Err(CliError::config("physics.detection_eff", "must lie in (0, 1]"));
            }
        }
        Ok(())
    }

    /// Emit the resolved values in canonical units.
    pub fn to_raw(&self) -> RawConfig {
        let q = |v: Option<f64>, k: Quantity| v.map(|v| format_quantity(v, k));
        let texts = |vals: &[f64], k: Quantity| {
            RawAxis::List(vals.iter().map(|&v| RawValue::Text(format_quantity(v, k))).collect())
        };
        let numbers = |vals: &[f64]| RawAxis::List(vals.iter().map(|&v| RawValue::Number(v)).collect());
        let o = &self.options;
        let p = &self.physics;
        let physics = RawPhysics {
            rabi: if p.two_photon.is_some() { None } else { q(p.rabi, Quantity::Frequency) },
            detuning: q(p.detuning, Quantity::Frequency),
            dephasing: q(p.dephasing, Quantity::Frequency),
            decay: q(p.decay, Quantity::Rate),
            c6: q(p.c6, Quantity::Interaction),
            detection_eff: p.detection_eff,
            kernel: p.kernel,
            spontaneous: p.spontaneous,
            cutoff: q(p.cutoff, Quantity::Length),
            motion: p.motion,
            mean_speed: q(p.mean_speed, Quantity::Speed),
            motion_interval: q(p.motion_interval, Quantity::Time),
            two_photon: p.two_photon.map(|tp| RawTwoPhoton {
                rabi_420: format_quantity(tp.rabi_420, Quantity::Frequency),
                rabi_1013: format_quantity(tp.rabi_1013, Quantity::Frequency),
                detuning_6p: format_quantity(tp.detuning_6p, Quantity::Frequency),
            }),
        };
        let scan = RawScan {
            rabi: self.scan.rabi.as_deref().map(|v| texts(v, Quantity::Frequency)),
            detuning: self.scan.detuning.as_deref().map(|v| texts(v, Quantity::Frequency)),
            mean_seeds: self.scan.mean_seeds.as_deref().map(numbers),
        };
        let output = RawOutput {
            record_times: self.record_times.as_deref().map(|v| texts(v, Quantity::Time)),
            scaled_times: self.scaled_times.as_deref().map(numbers),
            observables: self.observables.clone(),
        };
        RawConfig {
            scenario: RawScenario {
                kind: self.kind,
                seed: Some(self.seed),
                trajectories: (self.kind != ScenarioKind::MeanfieldScan).then_some(self.trajectories),
                times_two_pi: Some(self.times_two_pi),
                t_end: q(o.t_end, Quantity::Time),
                bins: o.bins,
                samples: o.samples,
                initial_state: o.initial_state,
                initial_density: o.initial_density,
                smoothing_window: o.smoothing_window,
                neighbour_count: o.neighbour_count,
                average_from: q(o.average_from, Quantity::Time),
                fit_window: o.fit_window,
                fit_grid: o.fit_grid,
                fit_min_points: o.fit_min_points,
                bimodal: o.bimodal.map(|(n1, n2)| RawBimodal { n1, n2 }),
            },
            physics: (physics != RawPhysics::default()).then_some(physics),
            geometry: self.geometry.as_ref().map(|g| emit_geometry(g, self.kind)),
            protocol: self
                .protocol
                .iter()
                .map(|s| RawSegment {
                    drive: s.drive,
                    duration: format_quantity(s.duration, Quantity::Time),
                    rabi: q(s.rabi, Quantity::Frequency),
                    detuning: q(s.detuning, Quantity::Frequency),
                    seeds: s.seeds,
                })
                .collect(),
            scan: (scan != RawScan::default()).then_some(scan),
            output: (output != RawOutput::default()).then_some(output),
        }
    }

    /// Physical parameters at one scan point. Scan values replace the
    /// corresponding `physics` entries.
    pub fn params_at(&self, rabi: Option<f64>, detuning: Option<f64>) -> CliResult<PhysicalParams> {
        let p = &self.physics;
        let rabi = rabi.or(p.rabi).unwrap_or(0.0);
        let detuning = detuning.or(p.detuning).unwrap_or(0.0);
        let dephasing = p.dephasing.ok_or_else(|| CliError::config("physics.dephasing", "missing"))?;
        let decay = p.decay.ok_or_else(|| CliError::config("physics.decay", "missing"))?;
        let c6 = p.c6.unwrap_or(0.0);
        PhysicalParams::new(rabi, detuning, dephasing, decay, c6, p.detection_eff.unwrap_or(1.0))
            .map_err(|e| CliError::from_core("physics", e))
    }

    pub fn kernel(&self) -> RateKernel {
        let default = if self.kind == ScenarioKind::Criticality1d {
            KernelChoice::NearestNeighbour
        } else {
            KernelChoice::VanDerWaals
        };
        match self.physics.kernel.unwrap_or(default) {
            KernelChoice::VanDerWaals => RateKernel::VanDerWaals,
            KernelChoice::NearestNeighbour => RateKernel::NearestNeighbour,
        }
    }

    pub fn spontaneous(&self) -> bool {
        self.physics
            .spontaneous
            .unwrap_or(self.kind != ScenarioKind::Criticality1d)
    }

    /// Whether table `name` should be written.
    pub fn wants(&self, name: &str) -> bool {
        self.observables.as_ref().is_none_or(|o| o.iter().any(|n| n == name))
    }

    /// Total protocol duration.
    pub fn protocol_end(&self) -> f64 {
        self.protocol.iter().map(|s| s.duration).sum()
    }
}

fn resolve_physics(r: &Resolver, p: &RawPhysics) -> CliResult<Physics> {
    use Quantity::*;
    let two_photon = p
        .two_photon
        .as_ref()
        .map(|tp| -> CliResult<TwoPhotonParams> {
            Ok(TwoPhotonParams {
                rabi_420: r.quantity("physics.two_photon.rabi_420", &tp.rabi_420, Frequency)?,
                rabi_1013: r.quantity("physics.two_photon.rabi_1013", &tp.rabi_1013, Frequency)?,
                detuning_6p: r.quantity("physics.two_photon.detuning_6p", &tp.detuning_6p, Frequency)?,
            })
        })
        .transpose()?;
    let rabi = match (&p.rabi, two_photon) {
        (Some(_), Some(_)) => {
            return Err(CliError::config(
                "physics.two_photon",
                "give either physics.rabi or physics.two_photon, not both",
            ))
        }
        (Some(t), None) => Some(r.quantity("physics.rabi", t, Frequency)?),
        (None, Some(tp)) => {
            Some(two_photon_rabi(&tp).map_err(|e| CliError::from_core("physics.two_photon", e))?)
        }
        (None, None) => None,
    };
    let physics = Physics {
        rabi,
        two_photon,
        detuning: r.opt("physics.detuning", &p.detuning, Frequency)?,
        dephasing: r.opt("physics.dephasing", &p.dephasing, Frequency)?,
        decay: r.opt("physics.decay", &p.decay, Rate)?,
        c6: r.opt("physics.c6", &p.c6, Interaction)?,
        detection_eff: p.detection_eff,
        kernel: p.kernel,
        spontaneous: p.spontaneous,
        cutoff: r.opt("physics.cutoff", &p.cutoff, Length)?,
        motion: p.motion,
        mean_speed: r.opt("physics.mean_speed", &p.mean_speed, Speed)?,
        motion_interval: r.opt("physics.motion_interval", &p.motion_interval, Time)?,
    };
    for (path, v) in [
        ("physics.rabi", physics.rabi),
        ("physics.dephasing", physics.dephasing),
        ("physics.decay", physics.decay),
        ("physics.c6", physics.c6),
        ("physics.mean_speed", physics.mean_speed),
    ] {
        if v.is_some_and(|v| v < 0.0) {
            return Err(CliError::config(path, "must be non-negative"));
        }
    }
    for (path, v) in [
        ("physics.cutoff", physics.cutoff),
        ("physics.motion_interval", physics.motion_interval),
    ] {
        if v.is_some_and(|v| v <= 0.0) {
            return Err(CliError::config(path, "must be positive"));
        }
    }
    if physics.dephasing == Some(0.0) {
        return Err(CliError::config("physics.dephasing", "must be positive"));
    }
    Ok(physics)
}

fn resolve_geometry(r: &Resolver, g: &RawGeometry, kind: ScenarioKind) -> CliResult<GasGeometry> {
    let dimension = g.dimension.unwrap_or(match g.cloud {
        Some(CloudChoice::Cylinder) => 3,
        _ => 1,
    });
    let boundary = match g.boundary {
        Some(BoundaryChoice::Periodic) => Boundary::Periodic,
        _ => Boundary::Open,
    };
    let geometry = match g.mode {
        GeometryMode::Lattice => {
            for (path, present) in [
                ("geometry.cloud", g.cloud.is_some()),
                ("geometry.sigma", g.sigma.is_some()),
                ("geometry.radius", g.radius.is_some()),
                ("geometry.length", g.length.is_some()),
            ] {
                if present {
                    return Err(CliError::config(path, "not used by a lattice"));
                }
            }
            let spacing = if kind == ScenarioKind::QjmcHistogram {
                1.0
            } else {
                let text = g
                    .spacing
                    .as_deref()
                    .ok_or_else(|| CliError::config("geometry.spacing", "required for a lattice"))?;
                r.quantity("geometry.spacing", text, Quantity::Length)?
            };
            GasGeometry::Lattice {
                dimension,
                spacing,
                atom_count: g.atom_count,
                boundary,
            }
        }
        GeometryMode::Continuum => {
            for (path, present) in [
                ("geometry.spacing", g.spacing.is_some()),
                ("geometry.boundary", g.boundary.is_some()),
            ] {
                if present {
                    return Err(CliError::config(path, "not used by a continuum cloud"));
                }
            }
            let cloud = match g.cloud {
                Some(CloudChoice::Gaussian) => {
                    for (path, present) in [
                        ("geometry.radius", g.radius.is_some()),
                        ("geometry.length", g.length.is_some()),
                    ] {
                        if present {
                            return Err(CliError::config(path, "not used by a Gaussian cloud"));
                        }
                    }
                    let sigmas = g
                        .sigma
                        .as_ref()
                        .ok_or_else(|| CliError::config("geometry.sigma", "required for a Gaussian cloud"))?;
                    if sigmas.len() != dimension {
                        return Err(CliError::config(
                            "geometry.sigma",
                            format!("expected {dimension} widths, one per dimension"),
                        ));
                    }
                    let mut sigma = [0.0; 3];
                    for (i, s) in sigmas.iter().enumerate() {
                        sigma[i] = r.quantity(&format!("geometry.sigma[{i}]"), s, Quantity::Length)?;
                    }
                    CloudShape::Gaussian { sigma }
                }
                Some(CloudChoice::Cylinder) => {
                    if g.sigma.is_some() {
                        return Err(CliError::config("geometry.sigma", "not used by a cylinder"));
                    }
                    let get = |path: &str, v: &Option<String>| {
                        let t = v
                            .as_deref()
                            .ok_or_else(|| CliError::config(path, "required for a cylinder"))?;
                        r.quantity(path, t, Quantity::Length)
                    };
                    CloudShape::Cylinder {
                        radius: get("geometry.radius", &g.radius)?,
                        length: get("geometry.length", &g.length)?,
                    }
                }
                None => return Err(CliError::config("geometry.cloud", "required for a continuum cloud")),
            };
            GasGeometry::Continuum {
                dimension,
                cloud,
                atom_count: g.atom_count,
            }
        }
    };
    geometry.validate().map_err(|e| CliError::from_core("geometry", e))?;
    Ok(geometry)
}

fn emit_geometry(g: &GasGeometry, kind: ScenarioKind) -> RawGeometry {
    let len = |v: f64| Some(format_quantity(v, Quantity::Length));
    match *g {
        GasGeometry::Lattice {
            dimension,
            spacing,
            atom_count,
            boundary,
        } => RawGeometry {
            mode: GeometryMode::Lattice,
            dimension: Some(dimension),
            atom_count,
            spacing: if kind == ScenarioKind::QjmcHistogram { None } else { len(spacing) },
            boundary: Some(match boundary {
                Boundary::Open => BoundaryChoice::Open,
                Boundary::Periodic => BoundaryChoice::Periodic,
            }),
            cloud: None,
            sigma: None,
            radius: None,
            length: None,
        },
        GasGeometry::Continuum {
            dimension,
            cloud,
            atom_count,
        } => {
            let mut raw = RawGeometry {
                mode: GeometryMode::Continuum,
                dimension: Some(dimension),
                atom_count,
                spacing: None,
                boundary: None,
                cloud: None,
                sigma: None,
                radius: None,
                length: None,
            };
            match cloud {
                CloudShape::Gaussian { sigma } => {
                    raw.cloud = Some(CloudChoice::Gaussian);
                    raw.sigma = Some(
                        sigma[..dimension]
                            .iter()
                            .map(|&s| format_quantity(s, Quantity::Length))
                            .collect(),
                    );
                }
                CloudShape::Cylinder { radius, length } => {
                    raw.cloud = Some(CloudChoice::Cylinder);
                    raw.radius = len(radius);
                    raw.length = len(length);
                }
            }
            raw
        }
    }
}

fn resolve_segment(r: &Resolver, i: usize, seg: &RawSegment) -> CliResult<Segment> {
    let path = |k: &str| format!("protocol[{i}].{k}");
    let duration = r.quantity(&path("duration"), &seg.duration, Quantity::Time)?;
    if !(duration > 0.0) {
        return Err(CliError::config(path("duration"), "must be positive"));
    }
    if seg.drive == DriveChoice::Off {
        for (k, present) in [("rabi", seg.rabi.is_some()), ("detuning", seg.detuning.is_some())] {
            if present {
                return Err(CliError::config(path(k), "not used by a segment with the laser off"));
            }
        }
    }
    if seg.drive == DriveChoice::Deexcitation {
        if seg.seeds.is_some() {
            return Err(CliError::config(path("seeds"), "seeds cannot be injected during de-excitation"));
        }
        if seg.rabi.is_none() {
            return Err(CliError::config(path("rabi"), "required for a deexcitation segment"));
        }
    }
    if let Some(s) = seg.seeds {
        if !(s >= 0.0 && s.is_finite()) {
            return Err(CliError::config(path("seeds"), "must be a non-negative number"));
        }
    }
    let rabi = r.opt(&path("rabi"), &seg.rabi, Quantity::Frequency)?;
    if rabi.is_some_and(|v| v < 0.0) {
        return Err(CliError::config(path("rabi"), "must be non-negative"));
    }
    Ok(Segment {
        drive: seg.drive,
        duration,
        rabi,
        detuning: r.opt(&path("detuning"), &seg.detuning, Quantity::Frequency)?,
        seeds: seg.seeds,
    })
}
