//! Quantities with explicit units.
//!
//! Config values are strings such as `"19 MHz"`, `"1 /us"` or
//! `"869.7 GHz um^6"`. They resolve to the internal units used by the core
//! crate: µm, µs, rad/µs for frequencies and 1/µs for rates.

use std::f64::consts::TAU;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Quantity {
    /// Angular frequency (Rabi frequencies, detunings, dephasing).
    Frequency,
    /// Plain rate, never multiplied by 2π.
    Rate,
    /// Van der Waals coefficient.
    Interaction,
    Length,
    Time,
    Speed,
}

impl Quantity {
    /// Unit of the canonical emitted form.
    pub fn canonical_unit(self) -> &'static str {
        match self {
            Quantity::Frequency => "rad/us",
            Quantity::Rate => "/us",
            Quantity::Interaction => "rad/us um^6",
            Quantity::Length => "um",
            Quantity::Time => "us",
            Quantity::Speed => "um/us",
        }
    }

    fn accepted(self) -> &'static str {
        match self {
            Quantity::Frequency => "Hz, kHz, MHz, GHz, rad/s, rad/ms, rad/us",
            Quantity::Rate => "/s, /ms, /us (also 1/us, us^-1)",
            Quantity::Interaction => "<frequency unit> um^6, e.g. GHz um^6",
            Quantity::Length => "nm, um, mm",
            Quantity::Time => "ns, us, ms, s",
            Quantity::Speed => "um/us, m/s, mm/s, nm/us",
        }
    }
}

/// Parse `"<number> <unit>"`. Ordinary frequencies (Hz…GHz) are multiplied by
/// 2π when `times_two_pi` is set; angular units never are.
pub fn parse_quantity(text: &str, kind: Quantity, times_two_pi: bool) -> Result<f64, String> {
    let text = text.trim();
    let split = text
        .find(|c: char| c.is_whitespace() || c == '/' || (c.is_alphabetic() && c != 'e' && c != 'E'))
        .ok_or_else(|| format!("`{text}` has no unit; expected one of {}", kind.accepted()))?;
    let (number, unit) = text.split_at(split);
    let value: f64 = number
        .trim()
        .parse()
        .map_err(|_| format!("`{}` is not a number", number.trim()))?;
    if !value.is_finite() {
        return Err(format!("`{text}` is not finite"));
    }
    let unit = normalise(unit);
    let factor = match kind {
        Quantity::Frequency => frequency_factor(&unit, times_two_pi),
        Quantity::Rate => rate_factor(&unit),
        Quantity::Interaction => unit
            .strip_suffix("um^6")
            .and_then(|f| frequency_factor(f, times_two_pi)),
        Quantity::Length => length_factor(&unit),
        Quantity::Time => time_factor(&unit),
        Quantity::Speed => speed_factor(&unit),
    };
    match factor {
        Some(f) => Ok(value * f),
        None => Err(format!(
            "unknown unit `{}`; expected one of {}",
            unit,
            kind.accepted()
        )),
    }
}

/// Canonical string for an internal value; parses back to the same value.
pub fn format_quantity(value: f64, kind: Quantity) -> String {
    format!("{value} {}", kind.canonical_unit())
}

/// Strip whitespace, multiplication signs and micro signs.
fn normalise(unit: &str) -> String {
    unit.chars()
        .filter(|c| !c.is_whitespace() && *c != '·' && *c != '*')
        .map(|c| if c == 'µ' || c == 'μ' { 'u' } else { c })
        .collect()
}

fn frequency_factor(unit: &str, times_two_pi: bool) -> Option<f64> {
    let cycles = match unit {
        "Hz" => Some(1e-6),
        "kHz" => Some(1e-3),
        "MHz" => Some(1.0),
        "GHz" => Some(1e3),
        _ => None,
    };
    if let Some(c) = cycles {
        return Some(if times_two_pi { c * TAU } else { c });
    }
    match unit {
        "rad/s" => Some(1e-6),
        "rad/ms" => Some(1e-3),
        "rad/us" => Some(1.0),
        _ => None,
    }
}

fn rate_factor(unit: &str) -> Option<f64> {
    let base = unit
        .strip_prefix("1/")
        .or_else(|| unit.strip_prefix('/'))
        .or_else(|| unit.strip_suffix("^-1"))?;
    time_factor(base).map(|t| 1.0 / t)
}

fn length_factor(unit: &str) -> Option<f64> {
    match unit {
        "nm" => Some(1e-3),
        "um" => Some(1.0),
        "mm" => Some(1e3),
        _ => None,
    }
}

fn time_factor(unit: &str) -> Option<f64> {
    match unit {
        "ns" => Some(1e-3),
        "us" => Some(1.0),
        "ms" => Some(1e3),
        "s" => Some(1e6),
        _ => None,
    }
}

fn speed_factor(unit: &str) -> Option<f64> {
    match unit {
        "um/us" | "m/s" => Some(1.0),
        "mm/s" | "nm/us" => Some(1e-3),
        _ => None,
    }
}
