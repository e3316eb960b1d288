//! Physical parameters, derived length and rate scales, and the single-atom
//! rate kernel.
//!
//! Internal units: lengths in µm, times in µs, frequencies angular (rad/µs).
//! The detuning sign convention is `Δ_eff = Δ − V`, so a positive (blue)
//! detuning is compensated by a repulsive van der Waals shift `V = C6/r⁶`.

use std::f64::consts::TAU;

use crate::error::{Error, Result};

/// Unit conversions from ordinary to angular frequencies.
pub mod units {
    use std::f64::consts::TAU;

    /// Angular frequency (rad/µs) for an ordinary frequency in MHz.
    pub fn mhz(f: f64) -> f64 {
        TAU * f
    }

    /// Angular frequency (rad/µs) for an ordinary frequency in kHz.
    pub fn khz(f: f64) -> f64 {
        TAU * f * 1e-3
    }

    /// Angular interaction coefficient (rad·µm⁶/µs) for `C6/h` in GHz·µm⁶.
    pub fn ghz_um6(c6: f64) -> f64 {
        TAU * c6 * 1e3
    }
}

/// Fraction of the dephasing rate at which the default interaction cutoff
/// is placed: `C6 / r_cut⁶ = γ · CUTOFF_SHIFT_FRACTION`.
pub const CUTOFF_SHIFT_FRACTION: f64 = 1e-2;

/// Interaction shifts are clamped to this multiple of the dephasing rate.
pub const SHIFT_CEILING_FACTOR: f64 = 1e6;

/// All model symbols in one validated record.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhysicalParams {
    /// Two-photon Rabi frequency Ω (rad/µs).
    pub rabi: f64,
    /// Laser detuning Δ (rad/µs); positive is compensated by repulsive interactions.
    pub detuning: f64,
    /// Dephasing rate γ (rad/µs).
    pub dephasing: f64,
    /// Radiative decay rate κ (1/µs).
    pub decay: f64,
    /// Van der Waals coefficient C6 (rad·µm⁶/µs).
    pub c6: f64,
    /// Detection efficiency η.
    pub detection_eff: f64,
}

impl PhysicalParams {
    pub fn new(
        rabi: f64,
        detuning: f64,
        dephasing: f64,
        decay: f64,
        c6: f64,
        detection_eff: f64,
    ) -> Result<Self> {
        let p = Self {
            rabi,
            detuning,
            dephasing,
            decay,
            c6,
            detection_eff,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.dephasing > 0.0 && self.dephasing.is_finite()) {
            return Err(Error::invalid("dephasing", "must be positive and finite"));
        }
        if !(self.rabi >= 0.0 && self.rabi.is_finite()) {
            return Err(Error::invalid("rabi", "must be non-negative and finite"));
        }
        if !(self.decay >= 0.0 && self.decay.is_finite()) {
            return Err(Error::invalid("decay", "must be non-negative and finite"));
        }
        if !(self.c6 >= 0.0 && self.c6.is_finite()) {
            return Err(Error::invalid("c6", "must be non-negative and finite"));
        }
        if !self.detuning.is_finite() {
            return Err(Error::invalid("detuning", "must be finite"));
        }
        if !(self.detection_eff > 0.0 && self.detection_eff <= 1.0) {
            return Err(Error::invalid("detection_eff", "must lie in (0, 1]"));
        }
        Ok(())
    }

    /// Copy with a different drive (Rabi frequency and detuning).
    pub fn with_drive(&self, rabi: f64, detuning: f64) -> Self {
        Self {
            rabi,
            detuning,
            ..*self
        }
    }

    /// Resonant incoherent rate Ω²/(2γ).
    pub fn resonant_rate(&self) -> f64 {
        self.rabi * self.rabi / (2.0 * self.dephasing)
    }

    /// Clamp value for interaction shifts, `10⁶ γ`.
    pub fn shift_ceiling(&self) -> f64 {
        SHIFT_CEILING_FACTOR * self.dephasing
    }

    /// Distance beyond which pair shifts are dropped: `C6/r⁶ = γ/100`.
    pub fn default_cutoff(&self) -> f64 {
        (self.c6 / (self.dephasing * CUTOFF_SHIFT_FRACTION)).powf(1.0 / 6.0)
    }
}

/// Single-photon Rabi frequencies and intermediate-state detuning of the
/// two-photon ladder.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TwoPhotonParams {
    pub rabi_420: f64,
    pub rabi_1013: f64,
    pub detuning_6p: f64,
}

/// Effective two-photon Rabi frequency `Ω₄₂₀ Ω₁₀₁₃ / (2 |Δ₆ₚ|)`.
pub fn two_photon_rabi(tp: &TwoPhotonParams) -> Result<f64> {
    if tp.detuning_6p == 0.0 || !tp.detuning_6p.is_finite() {
        return Err(Error::invalid(
            "detuning_6p",
            "intermediate-state detuning must be finite and non-zero",
        ));
    }
    let num = tp.rabi_420 * tp.rabi_420 * tp.rabi_1013 * tp.rabi_1013;
    Ok((num / (4.0 * tp.detuning_6p * tp.detuning_6p)).sqrt())
}

/// Length and rate scales implied by a parameter set.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DerivedScales {
    /// Dissipative blockade radius `R = (C6/γ)^{1/6}`.
    pub blockade_radius: f64,
    /// Facilitation radius `(C6/Δ)^{1/6}`; absent for `Δ ≤ 0`.
    pub facilitation_radius: Option<f64>,
    /// Width of the facilitation shell `γ r_fac / (6Δ)`; absent for `Δ ≤ 0`.
    pub facilitation_shell_width: Option<f64>,
    /// Facilitated (resonant) rate `Ω²/(2γ)`.
    pub rate_fac: f64,
    /// Off-resonant single-atom rate `Ω²/(2γ) / (1 + (Δ/γ)²)`.
    pub rate_spon: f64,
}

impl DerivedScales {
    /// Large-detuning form `Ω²γ/(2Δ²)` of the spontaneous rate. Agrees with
    /// [`DerivedScales::rate_spon`] up to a relative error `(γ/Δ)²`.
    pub fn rate_spon_asymptotic(p: &PhysicalParams) -> Option<f64> {
        (p.detuning != 0.0)
            .then(|| p.rabi * p.rabi * p.dephasing / (2.0 * p.detuning * p.detuning))
    }
}

pub fn derive_scales(p: &PhysicalParams) -> DerivedScales {
    let blockade_radius = (p.c6 / p.dephasing).powf(1.0 / 6.0);
    let (facilitation_radius, facilitation_shell_width) = if p.detuning > 0.0 && p.c6 > 0.0 {
        let r = (p.c6 / p.detuning).powf(1.0 / 6.0);
        (Some(r), Some(p.dephasing * r / (6.0 * p.detuning)))
    } else {
        (None, None)
    };
    DerivedScales {
        blockade_radius,
        facilitation_radius,
        facilitation_shell_width,
        rate_fac: p.resonant_rate(),
        rate_spon: flip_rate(p, 0.0),
    }
}

/// Incoherent flip rate of an atom whose levels are shifted by `shift`:
/// `Ω²/(2γ) / (1 + ((Δ − shift)/γ)²)`.
#[inline]
pub fn flip_rate(p: &PhysicalParams, shift: f64) -> f64 {
    let x = (p.detuning - shift) / p.dephasing;
    p.resonant_rate() / (1.0 + x * x)
}

/// Pair interaction `C6/r⁶`, clamped to `ceiling`.
#[inline]
pub fn pair_shift(c6: f64, dist2: f64, ceiling: f64) -> f64 {
    let r6 = dist2 * dist2 * dist2;
    if r6 * ceiling <= c6 {
        ceiling
    } else {
        c6 / r6
    }
}

/// Mean-field growth rate per atom when `neighbours` excited atoms sit at the
/// mean spacing `a` of excitations.
pub fn mean_field_growth_rate(p: &PhysicalParams, spacing: f64, neighbours: f64) -> f64 {
    if !spacing.is_finite() {
        return flip_rate(p, 0.0);
    }
    let ceiling = p.shift_ceiling();
    let shift = (neighbours * pair_shift(p.c6, spacing * spacing, ceiling)).min(ceiling);
    flip_rate(p, shift)
}

/// Excitation bits, positions and optional velocities of every atom.
#[derive(Debug, Clone, PartialEq)]
pub struct SpinConfiguration {
    pub excited: Vec<bool>,
    pub positions: Vec<[f64; 3]>,
    pub velocities: Option<Vec<[f64; 3]>>,
    /// Periodic box lengths per axis (`f64::INFINITY` on open axes).
    pub period: Option<[f64; 3]>,
}

impl SpinConfiguration {
    /// All atoms in the ground state at the given positions.
    pub fn ground(positions: Vec<[f64; 3]>) -> Self {
        Self {
            excited: vec![false; positions.len()],
            positions,
            velocities: None,
            period: None,
        }
    }

    pub fn len(&self) -> usize {
        self.positions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.positions.is_empty()
    }

    pub fn excited_count(&self) -> usize {
        self.excited.iter().filter(|&&e| e).count()
    }

    /// Excitation density `Σ n_k / N`.
    pub fn density(&self) -> f64 {
        if self.is_empty() {
            0.0
        } else {
            self.excited_count() as f64 / self.len() as f64
        }
    }

    /// Squared distance between atoms `a` and `b` (minimum image when periodic).
    #[inline]
    pub fn dist2(&self, a: usize, b: usize) -> f64 {
        squared_separation(&self.positions[a], &self.positions[b], self.period.as_ref())
    }

    pub fn validate(&self) -> Result<()> {
        if self.excited.len() != self.positions.len() {
            return Err(Error::Validation(format!(
                "{} excitation bits for {} positions",
                self.excited.len(),
                self.positions.len()
            )));
        }
        if let Some(v) = &self.velocities {
            if v.len() != self.positions.len() {
                return Err(Error::Validation(format!(
                    "{} velocities for {} positions",
                    v.len(),
                    self.positions.len()
                )));
            }
        }
        Ok(())
    }
}

#[inline]
pub(crate) fn squared_separation(a: &[f64; 3], b: &[f64; 3], period: Option<&[f64; 3]>) -> f64 {
    let mut s = 0.0;
    for axis in 0..3 {
        let mut d = a[axis] - b[axis];
        if let Some(p) = period {
            let l = p[axis];
            if l.is_finite() {
                d -= l * (d / l).round();
            }
        }
        s += d * d;
    }
    s
}

/// Van der Waals level shift of atom `k` due to all other excited atoms
/// within `cutoff`. Each pair contribution and the total are clamped to
/// `ceiling`.
pub fn interaction_shift(
    cfg: &SpinConfiguration,
    c6: f64,
    k: usize,
    cutoff: f64,
    ceiling: f64,
) -> f64 {
    let cut2 = cutoff * cutoff;
    let mut total = 0.0;
    for q in 0..cfg.len() {
        if q == k || !cfg.excited[q] {
            continue;
        }
        let d2 = cfg.dist2(k, q);
        if d2 <= cut2 {
            total += pair_shift(c6, d2, ceiling);
        }
    }
    total.min(ceiling)
}

/// Ratio between angular and ordinary frequency units.
pub const TWO_PI: f64 = TAU;
