//! Continuous-time kinetic Monte Carlo for the rate dynamics.
//!
//! Each atom carries at most two channels: a driven flip whose rate depends on
//! the van der Waals shift from excited neighbours, and radiative decay.
//! Events are drawn with the Gillespie direct method over a sum tree, so a
//! step costs `O(log N)` plus the neighbours of the flipped atom.

mod engine;
mod table;

use rand::seq::index::sample;
use rand_distr::{Distribution, Poisson};
use rayon::prelude::*;

pub use table::{build_channels, kmc_step, Channel, ChannelKind, RateTable, StepOutcome};

use crate::error::{Error, Result};
use crate::geometry::{sample_geometry, thermal_velocities, GasGeometry};
use crate::model::{PhysicalParams, SpinConfiguration};
use crate::rng::{stream_rng, SimRng};
use crate::stats::CountRecord;
use engine::Engine;

/// Default interval between ballistic position updates (µs).
pub const DEFAULT_MOTION_INTERVAL: f64 = 0.5;
/// Default mean thermal speed (µm/µs).
pub const DEFAULT_MEAN_SPEED: f64 = 0.11;
/// Relative tolerance when comparing record times with the protocol end.
const TIME_SLACK: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Drive {
    /// Ground atoms are driven up, excited atoms down, both with the shifted rate.
    Excitation,
    /// Only excited atoms are driven, towards a different (lossy) level.
    Deexcitation,
    /// No laser: only radiative decay.
    Off,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum RateKernel {
    /// Lorentzian rate with the summed van der Waals shift.
    #[default]
    VanDerWaals,
    /// Facilitated rate `Ω²/2γ` when any neighbour inside the cutoff is
    /// excited, the off-resonant rate otherwise. Used for lattice models
    /// whose blockade and facilitation reduce to nearest neighbours.
    NearestNeighbour,
}

/// Poissonian number of seed excitations placed on random ground atoms at
/// the start of a segment.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SeedInjection {
    pub mean_seeds: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProtocolSegment {
    pub duration: f64,
    pub drive: Drive,
    pub rabi: f64,
    pub detuning: f64,
    pub seed_injection: Option<SeedInjection>,
}

impl ProtocolSegment {
    pub fn excitation(duration: f64, rabi: f64, detuning: f64) -> Self {
        Self {
            duration,
            drive: Drive::Excitation,
            rabi,
            detuning,
            seed_injection: None,
        }
    }

    pub fn deexcitation(duration: f64, rabi: f64, detuning: f64) -> Self {
        Self {
            duration,
            drive: Drive::Deexcitation,
            rabi,
            detuning,
            seed_injection: None,
        }
    }

    pub fn dark(duration: f64) -> Self {
        Self {
            duration,
            drive: Drive::Off,
            rabi: 0.0,
            detuning: 0.0,
            seed_injection: None,
        }
    }

    pub fn with_seeds(mut self, mean_seeds: f64) -> Self {
        self.seed_injection = Some(SeedInjection { mean_seeds });
        self
    }

    fn validate(&self) -> Result<()> {
        if !(self.duration > 0.0 && self.duration.is_finite()) {
            return Err(Error::invalid("protocol", "segment durations must be positive"));
        }
        if !(self.rabi >= 0.0 && self.rabi.is_finite()) {
            return Err(Error::invalid("protocol", "segment Rabi frequency must be non-negative"));
        }
        if !self.detuning.is_finite() {
            return Err(Error::invalid("protocol", "segment detuning must be finite"));
        }
        if let Some(s) = self.seed_injection {
            if !(s.mean_seeds >= 0.0 && s.mean_seeds.is_finite()) {
                return Err(Error::invalid("protocol", "mean seed number must be non-negative"));
            }
            if self.drive == Drive::Deexcitation {
                return Err(Error::invalid("protocol", "seeds cannot be injected during de-excitation"));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct KmcConfig {
    /// Times (µs from protocol start) at which the excitation number is recorded.
    pub record_times: Vec<f64>,
    pub rng_seed: u64,
    pub trajectories: usize,
    pub motion_enabled: bool,
    pub motion_update_interval: f64,
    pub mean_speed: f64,
    /// Interaction range; defaults to `C6/r⁶ = γ/100` for the van der Waals
    /// kernel and to 1.01 nearest-neighbour distances otherwise.
    pub cutoff: Option<f64>,
    pub kernel: RateKernel,
    /// When false, atoms without an excited neighbour inside the cutoff
    /// cannot be excited.
    pub spontaneous: bool,
    /// Keep the final configuration of every trajectory.
    pub keep_final: bool,
}

impl Default for KmcConfig {
    fn default() -> Self {
        Self {
            record_times: Vec::new(),
            rng_seed: 0,
            trajectories: 1,
            motion_enabled: false,
            motion_update_interval: DEFAULT_MOTION_INTERVAL,
            mean_speed: DEFAULT_MEAN_SPEED,
            cutoff: None,
            kernel: RateKernel::VanDerWaals,
            spontaneous: true,
            keep_final: false,
        }
    }
}

impl KmcConfig {
    fn validate(&self, total: f64) -> Result<()> {
        if self.trajectories == 0 {
            return Err(Error::invalid("trajectories", "must be at least 1"));
        }
        if self.motion_enabled
            && !(self.motion_update_interval > 0.0 && self.motion_update_interval.is_finite())
        {
            return Err(Error::invalid("motion_update_interval", "must be positive"));
        }
        if let Some(c) = self.cutoff {
            if !(c > 0.0) {
                return Err(Error::invalid("cutoff", "must be positive"));
            }
        }
        let mut prev = f64::NEG_INFINITY;
        for &t in &self.record_times {
            if !(t > prev && t >= 0.0 && t.is_finite()) {
                return Err(Error::Validation(
                    "record times must be finite, non-negative and strictly increasing".into(),
                ));
            }
            if t > total * (1.0 + TIME_SLACK) + TIME_SLACK {
                return Err(Error::Validation(format!(
                    "record time {t} lies beyond the protocol end {total}"
                )));
            }
            prev = t;
        }
        Ok(())
    }
}

/// Excitation numbers of one trajectory at the configured record times.
#[derive(Debug, Clone, PartialEq)]
pub struct TrajectorySeries {
    pub record_times: Vec<f64>,
    pub counts: Vec<u32>,
    pub final_config: Option<SpinConfiguration>,
    /// Number of executed KMC events.
    pub events: u64,
}

/// Counts of an ensemble of independent trajectories.
#[derive(Debug, Clone, PartialEq)]
pub struct EnsembleResult {
    pub record_times: Vec<f64>,
    pub atom_count: usize,
    /// `counts[trajectory][time index]`.
    pub counts: Vec<Vec<u32>>,
    pub final_configs: Vec<SpinConfiguration>,
    pub rng_seed: u64,
    /// RNG stream used by each trajectory.
    pub streams: Vec<u64>,
}

impl EnsembleResult {
    pub fn trajectories(&self) -> usize {
        self.counts.len()
    }

    /// Counts of all trajectories at record time `index`.
    pub fn counts_at(&self, index: usize) -> Vec<u32> {
        self.counts.iter().map(|c| c[index]).collect()
    }

    /// Shots at record time `index`, labelled with the time.
    pub fn count_record(&self, index: usize) -> CountRecord {
        CountRecord::labelled(
            self.counts_at(index).into_iter().map(u64::from).collect(),
            format!("t={}", self.record_times[index]),
        )
    }

    /// Ensemble mean excitation number per record time.
    pub fn mean_counts(&self) -> Vec<f64> {
        let m = self.trajectories() as f64;
        (0..self.record_times.len())
            .map(|i| self.counts.iter().map(|c| c[i] as f64).sum::<f64>() / m)
            .collect()
    }

    /// Standard error of the mean excitation number per record time.
    pub fn std_error_counts(&self) -> Vec<f64> {
        let m = self.trajectories();
        let means = self.mean_counts();
        means
            .iter()
            .enumerate()
            .map(|(i, &mean)| {
                if m < 2 {
                    return f64::NAN;
                }
                let ss: f64 = self.counts.iter().map(|c| (c[i] as f64 - mean).powi(2)).sum();
                (ss / (m - 1) as f64 / m as f64).sqrt()
            })
            .collect()
    }

    /// Mean excitation density `⟨N_R⟩/N` per record time.
    pub fn mean_density(&self) -> Vec<f64> {
        self.mean_counts()
            .into_iter()
            .map(|m| m / self.atom_count as f64)
            .collect()
    }
}

fn total_duration(segments: &[ProtocolSegment]) -> f64 {
    segments.iter().map(|s| s.duration).sum()
}

fn nearest_distance(cfg: &SpinConfiguration) -> Option<f64> {
    let mut best = f64::INFINITY;
    for a in 0..cfg.len() {
        for b in (a + 1)..cfg.len() {
            let d2 = cfg.dist2(a, b);
            if d2 > 0.0 && d2 < best {
                best = d2;
            }
        }
    }
    best.is_finite().then(|| best.sqrt())
}

fn resolve_cutoff(
    kcfg: &KmcConfig,
    params: &PhysicalParams,
    spacing: Option<f64>,
    cfg: &SpinConfiguration,
) -> Result<f64> {
    if let Some(c) = kcfg.cutoff {
        return Ok(c);
    }
    Ok(match kcfg.kernel {
        RateKernel::VanDerWaals => params.default_cutoff(),
        RateKernel::NearestNeighbour => {
            let d = spacing.or_else(|| nearest_distance(cfg)).unwrap_or(1.0);
            1.01 * d
        }
    })
}

fn validate_inputs(
    params: &PhysicalParams,
    segments: &[ProtocolSegment],
    kcfg: &KmcConfig,
) -> Result<()> {
    params.validate()?;
    if segments.is_empty() {
        return Err(Error::invalid("protocol", "at least one segment is required"));
    }
    for s in segments {
        s.validate()?;
    }
    kcfg.validate(total_duration(segments))
}

/// Run trajectory `trajectory` of the ensemble described by `kcfg`, sampling
/// positions (and velocities when motion is on) from `geometry`.
pub fn run_protocol(
    geometry: &GasGeometry,
    params: &PhysicalParams,
    segments: &[ProtocolSegment],
    kcfg: &KmcConfig,
    trajectory: usize,
) -> Result<TrajectorySeries> {
    validate_inputs(params, segments, kcfg)?;
    let mut rng = stream_rng(kcfg.rng_seed, trajectory as u64);
    let speed = kcfg.motion_enabled.then_some(kcfg.mean_speed);
    let cfg = sample_geometry(geometry, speed, &mut rng)?;
    let cutoff = resolve_cutoff(kcfg, params, geometry.spacing(), &cfg)?;
    simulate(cfg, params, segments, kcfg, cutoff, &mut rng)
}

/// Like [`run_protocol`] but starting from a given configuration.
pub fn run_protocol_from(
    initial: &SpinConfiguration,
    params: &PhysicalParams,
    segments: &[ProtocolSegment],
    kcfg: &KmcConfig,
    trajectory: usize,
) -> Result<TrajectorySeries> {
    validate_inputs(params, segments, kcfg)?;
    initial.validate()?;
    let mut rng = stream_rng(kcfg.rng_seed, trajectory as u64);
    let mut cfg = initial.clone();
    if kcfg.motion_enabled && cfg.velocities.is_none() {
        cfg.velocities = Some(thermal_velocities(cfg.len(), kcfg.mean_speed, &mut rng)?);
    }
    let cutoff = resolve_cutoff(kcfg, params, None, &cfg)?;
    simulate(cfg, params, segments, kcfg, cutoff, &mut rng)
}

fn collect_ensemble(
    atom_count: usize,
    kcfg: &KmcConfig,
    run: impl Fn(usize) -> Result<TrajectorySeries> + Sync + Send,
) -> Result<EnsembleResult> {
    let series: Vec<TrajectorySeries> = (0..kcfg.trajectories)
        .into_par_iter()
        .map(&run)
        .collect::<Result<_>>()?;
    let mut counts = Vec::with_capacity(series.len());
    let mut final_configs = Vec::new();
    for s in series {
        counts.push(s.counts);
        if let Some(f) = s.final_config {
            final_configs.push(f);
        }
    }
    Ok(EnsembleResult {
        record_times: kcfg.record_times.clone(),
        atom_count,
        counts,
        final_configs,
        rng_seed: kcfg.rng_seed,
        streams: (0..kcfg.trajectories as u64).collect(),
    })
}

/// Independent trajectories, in parallel; results are ordered by trajectory
/// index and do not depend on the thread count.
pub fn run_ensemble(
    geometry: &GasGeometry,
    params: &PhysicalParams,
    segments: &[ProtocolSegment],
    kcfg: &KmcConfig,
) -> Result<EnsembleResult> {
    validate_inputs(params, segments, kcfg)?;
    geometry.validate()?;
    collect_ensemble(geometry.atom_count(), kcfg, |i| {
        run_protocol(geometry, params, segments, kcfg, i)
    })
}

/// Ensemble from a fixed initial configuration.
pub fn run_ensemble_from(
    initial: &SpinConfiguration,
    params: &PhysicalParams,
    segments: &[ProtocolSegment],
    kcfg: &KmcConfig,
) -> Result<EnsembleResult> {
    validate_inputs(params, segments, kcfg)?;
    initial.validate()?;
    collect_ensemble(initial.len(), kcfg, |i| {
        run_protocol_from(initial, params, segments, kcfg, i)
    })
}

fn inject_seeds(engine: &mut Engine, mean: f64, rng: &mut SimRng) {
    if mean <= 0.0 {
        return;
    }
    let drawn = Poisson::new(mean).expect("positive mean").sample(rng) as usize;
    let ground: Vec<usize> = (0..engine.cfg.len()).filter(|&k| !engine.cfg.excited[k]).collect();
    let amount = drawn.min(ground.len());
    for i in sample(rng, ground.len(), amount) {
        engine.flip(ground[i]);
    }
}

fn simulate(
    cfg: SpinConfiguration,
    params: &PhysicalParams,
    segments: &[ProtocolSegment],
    kcfg: &KmcConfig,
    cutoff: f64,
    rng: &mut SimRng,
) -> Result<TrajectorySeries> {
    let motion = kcfg.motion_enabled && cfg.velocities.is_some();
    let mut engine = Engine::new(cfg, params, kcfg.kernel, kcfg.spontaneous, cutoff, !motion);
    let times = &kcfg.record_times;
    let mut counts = Vec::with_capacity(times.len());
    let mut next_record = 0usize;
    let mut events = 0u64;

    let mut t = 0.0;
    let mut last_motion = 0.0;
    let mut next_motion = if motion {
        kcfg.motion_update_interval
    } else {
        f64::INFINITY
    };
    let mut seg_start = 0.0;

    for seg in segments {
        let seg_end = seg_start + seg.duration;
        engine.set_segment(seg);
        if let Some(s) = seg.seed_injection {
            inject_seeds(&mut engine, s.mean_seeds, rng);
        }
        while t < seg_end {
            let boundary = seg_end.min(next_motion);
            let event = match kmc_step(&engine.table, rng) {
                StepOutcome::Event {
                    atom,
                    kind,
                    waiting_time,
                } if t + waiting_time < boundary => Some((atom, kind, t + waiting_time)),
                _ => None,
            };
            match event {
                Some((atom, kind, t_event)) => {
                    while next_record < times.len() && times[next_record] < t_event {
                        counts.push(engine.excited_count as u32);
                        next_record += 1;
                    }
                    debug_assert!(kind == ChannelKind::Flip || engine.cfg.excited[atom]);
                    engine.flip(atom);
                    events += 1;
                    t = t_event;
                }
                None => {
                    // Memoryless: the pending event is discarded at the boundary.
                    while next_record < times.len() && times[next_record] < boundary {
                        counts.push(engine.excited_count as u32);
                        next_record += 1;
                    }
                    t = boundary;
                    if t >= next_motion {
                        engine.advance_motion(t - last_motion);
                        last_motion = t;
                        next_motion += kcfg.motion_update_interval;
                    }
                }
            }
        }
        seg_start = seg_end;
    }
    while next_record < times.len() {
        counts.push(engine.excited_count as u32);
        next_record += 1;
    }
    if motion && t > last_motion {
        engine.advance_motion(t - last_motion);
    }
    Ok(TrajectorySeries {
        record_times: times.clone(),
        counts,
        final_config: kcfg.keep_final.then_some(engine.cfg),
        events,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::Boundary;
    use crate::model::units::{ghz_um6, khz, mhz};
    use crate::model::interaction_shift;
    use rand::Rng;

    fn params() -> PhysicalParams {
        PhysicalParams::new(mhz(0.5), mhz(10.0), mhz(1.0), 0.05, 1000.0, 1.0).unwrap()
    }

    #[test]
    fn incremental_shifts_match_rebuild() {
        let p = params();
        let g = GasGeometry::Continuum {
            dimension: 3,
            cloud: crate::geometry::CloudShape::Gaussian { sigma: [4.0; 3] },
            atom_count: 60,
        };
        let mut rng = stream_rng(3, 0);
        let cfg = sample_geometry(&g, None, &mut rng).unwrap();
        let cutoff = p.default_cutoff();
        let seg = ProtocolSegment::excitation(1.0, p.rabi, p.detuning);
        let mut engine = Engine::new(cfg, &p, RateKernel::VanDerWaals, true, cutoff, true);
        engine.set_segment(&seg);
        for _ in 0..2000 {
            let k = rng.random_range(0..60);
            engine.flip(k);
        }
        let reference = build_channels(&engine.cfg, &p, &seg, RateKernel::VanDerWaals, true, cutoff);
        for k in 0..60 {
            let exact = interaction_shift(&engine.cfg, p.c6, k, cutoff, p.shift_ceiling());
            assert!((engine.shift_of(k) - exact).abs() <= 1e-9 * exact.max(1.0));
            let a = engine.table.flip_rate(k);
            let b = reference.flip_rate(k);
            assert!((a - b).abs() <= 1e-9 * b.max(1e-12), "{k}: {a} vs {b}");
            assert_eq!(engine.table.decay_rate(k), reference.decay_rate(k));
        }
        assert!((engine.table.total() - reference.total()).abs() < 1e-9 * reference.total());
    }

    #[test]
    fn decay_only_channel_when_drive_off() {
        let p = params();
        let mut cfg = SpinConfiguration::ground(vec![[0.0; 3], [50.0, 0.0, 0.0]]);
        cfg.excited[1] = true;
        let t = build_channels(&cfg, &p, &ProtocolSegment::dark(1.0), RateKernel::VanDerWaals, true, 10.0);
        let ch = t.channels();
        assert_eq!(ch.len(), 1);
        assert_eq!(ch[0].atom, 1);
        assert_eq!(ch[0].kind, ChannelKind::Decay);
        assert_eq!(ch[0].rate, p.decay);
    }

    #[test]
    fn deexcitation_drives_only_excited_atoms() {
        let p = params();
        let mut cfg = SpinConfiguration::ground(vec![[0.0; 3], [50.0, 0.0, 0.0]]);
        cfg.excited[0] = true;
        let seg = ProtocolSegment::deexcitation(1.0, mhz(1.0), 0.0);
        let t = build_channels(&cfg, &p, &seg, RateKernel::VanDerWaals, true, 10.0);
        assert_eq!(t.flip_rate(1), 0.0);
        let expected = mhz(1.0).powi(2) / (2.0 * p.dephasing);
        assert!((t.flip_rate(0) - expected).abs() < 1e-12);
    }

    #[test]
    fn frozen_configuration_fast_forwards() {
        let mut p = params();
        p.decay = 0.0;
        let g = GasGeometry::chain(4, 5.0, Boundary::Open);
        let kcfg = KmcConfig {
            record_times: vec![0.0, 1.0, 2.0],
            ..KmcConfig::default()
        };
        let segs = [ProtocolSegment::dark(2.0)];
        let s = run_protocol(&g, &p, &segs, &kcfg, 0).unwrap();
        assert_eq!(s.counts, vec![0, 0, 0]);
        assert_eq!(s.events, 0);
    }

    #[test]
    fn record_time_past_end_is_rejected() {
        let g = GasGeometry::chain(4, 5.0, Boundary::Open);
        let kcfg = KmcConfig {
            record_times: vec![0.0, 3.0],
            ..KmcConfig::default()
        };
        let err = run_protocol(&g, &params(), &[ProtocolSegment::dark(2.0)], &kcfg, 0).unwrap_err();
        assert!(matches!(err, Error::Validation(_)));
    }

    #[test]
    fn records_are_right_continuous_at_seed_injection() {
        let mut p = params();
        p.decay = 0.0;
        let g = GasGeometry::chain(50, 100.0, Boundary::Open);
        let kcfg = KmcConfig {
            record_times: vec![1.0, 2.0],
            ..KmcConfig::default()
        };
        let segs = [
            ProtocolSegment::dark(1.0),
            ProtocolSegment::dark(1.0).with_seeds(1e6),
        ];
        let s = run_protocol(&g, &p, &segs, &kcfg, 0).unwrap();
        assert_eq!(s.counts, vec![50, 50]);
    }

    #[test]
    fn ensemble_is_reproducible_and_ordered() {
        let p = PhysicalParams::new(khz(300.0), mhz(10.0), khz(700.0), 1.0 / 80.0, ghz_um6(869.7), 0.4)
            .unwrap();
        let g = GasGeometry::Continuum {
            dimension: 3,
            cloud: crate::geometry::CloudShape::Gaussian { sigma: [10.0, 10.0, 10.0] },
            atom_count: 200,
        };
        let kcfg = KmcConfig {
            record_times: vec![1.0, 5.0],
            trajectories: 6,
            rng_seed: 17,
            ..KmcConfig::default()
        };
        let segs = [ProtocolSegment::excitation(5.0, p.rabi, p.detuning)];
        let a = run_ensemble(&g, &p, &segs, &kcfg).unwrap();
        let b = run_ensemble(&g, &p, &segs, &kcfg).unwrap();
        assert_eq!(a, b);
        let single = run_protocol(&g, &p, &segs, &kcfg, 4).unwrap();
        assert_eq!(a.counts[4], single.counts);
    }

    #[test]
    fn motion_conserves_velocities_and_moves_atoms() {
        let p = params();
        let g = GasGeometry::chain(5, 3.0, Boundary::Open);
        let kcfg = KmcConfig {
            record_times: vec![10.0],
            motion_enabled: true,
            mean_speed: 1.0,
            keep_final: true,
            ..KmcConfig::default()
        };
        let segs = [ProtocolSegment::dark(10.0)];
        let s = run_protocol(&g, &p, &segs, &kcfg, 0).unwrap();
        let f = s.final_config.unwrap();
        let v = f.velocities.as_ref().unwrap();
        for k in 0..5 {
            let x0 = 3.0 * k as f64;
            assert!((f.positions[k][0] - (x0 + 10.0 * v[k][0])).abs() < 1e-9);
        }
    }
}
