//! Built-in scenario configurations.

use crate::config::ScenarioKind;

/// `(name, TOML text)`; the preset named after a kind is its default.
pub const PRESETS: &[(&str, &str)] = &[
    ("blockade_growth", include_str!("../presets/blockade_growth.toml")),
    ("facilitation", include_str!("../presets/facilitation.toml")),
    ("seeded_facilitation", include_str!("../presets/seeded_facilitation.toml")),
    ("phase_diagram", include_str!("../presets/phase_diagram.toml")),
    ("criticality_1d", include_str!("../presets/criticality_1d.toml")),
    ("deexcitation_spectrum", include_str!("../presets/deexcitation_spectrum.toml")),
    (
        "deexcitation_spectrum_motion",
        include_str!("../presets/deexcitation_spectrum_motion.toml"),
    ),
    ("qjmc_histogram", include_str!("../presets/qjmc_histogram.toml")),
    ("meanfield_scan", include_str!("../presets/meanfield_scan.toml")),
    ("collapse_demo", include_str!("../presets/collapse_demo.toml")),
];

pub fn preset(name: &str) -> Option<&'static str> {
    PRESETS.iter().find(|(n, _)| *n == name).map(|(_, t)| *t)
}

pub fn default_preset(kind: ScenarioKind) -> &'static str {
    preset(kind.name()).expect("every kind has a preset")
}
