//! Scenario dispatch: build protocols from the resolved configuration, run
//! the engines and turn their results into tables.
//!
//! Every scan point reuses the same seed, so points differ only through
//! their parameters (common random numbers). `collapse_demo` is the
//! exception: its rescaled curves would coincide exactly, so curve `i` runs
//! with seed `seed + i`.

use rydkin_core::kmc::{run_ensemble, DEFAULT_MEAN_SPEED, DEFAULT_MOTION_INTERVAL};
use rydkin_core::meanfield::{mf_stationary, mf_trajectory, qmf_stationary, MeanFieldParams};
use rydkin_core::model::{flip_rate, mean_field_growth_rate};
use rydkin_core::qjmc::{qjmc_histogram, ChainModel, HistogramOptions, InitialState};
use rydkin_core::rng::stream_rng;
use rydkin_core::stats::{
    bimodal_predict, collapse_check, fit_powerlaw_beta_with, growth_rate_curve, log_log_fit, mandel_q,
    thin_counts, CollapseMode, CollapseResult, Curve, PowerLawOptions, DEFAULT_SMOOTHING_WINDOW,
};
use rydkin_core::{
    BimodalParams, CloudShape, CountRecord, EnsembleResult, GasGeometry, KmcConfig, PhysicalParams,
    ProtocolSegment,
};

use crate::config::{Config, DriveChoice, InitialChoice, ScenarioKind};
use crate::error::{CliError, CliResult};
use crate::output::{Bundle, Table};

/// Stream offset for detection thinning, far above any trajectory index.
const DETECTION_STREAM: u64 = 1 << 48;
/// Assumed nearest-neighbour count for the growth-rate theory curve.
pub const DEFAULT_NEIGHBOUR_COUNT: f64 = 2.0;
/// Record times used by `criticality_1d` when none are configured.
const DEFAULT_AVERAGING_RECORDS: usize = 50;

pub fn run_scenario(cfg: &Config) -> CliResult<Bundle> {
    let tables = if cfg.observables.as_ref().is_some_and(|o| o.is_empty()) {
        Vec::new()
    } else {
        let all = match cfg.kind {
            ScenarioKind::BlockadeGrowth => blockade_growth(cfg)?,
            ScenarioKind::Facilitation => facilitation(cfg)?,
            ScenarioKind::SeededFacilitation => seeded_facilitation(cfg)?,
            ScenarioKind::PhaseDiagram => phase_diagram(cfg)?,
            ScenarioKind::Criticality1d => criticality(cfg)?,
            ScenarioKind::DeexcitationSpectrum => deexcitation_spectrum(cfg)?,
            ScenarioKind::QjmcHistogram => qjmc(cfg)?,
            ScenarioKind::MeanfieldScan => meanfield(cfg)?,
            ScenarioKind::CollapseDemo => collapse(cfg)?,
        };
        all.into_iter().filter(|t| cfg.wants(t.observable)).collect()
    };
    Ok(Bundle { kind: cfg.kind, tables })
}

fn geometry(cfg: &Config) -> CliResult<&GasGeometry> {
    cfg.geometry
        .as_ref()
        .ok_or_else(|| CliError::config("geometry", "required"))
}

fn kmc_config(cfg: &Config, record_times: Vec<f64>) -> KmcConfig {
    let p = &cfg.physics;
    KmcConfig {
        record_times,
        rng_seed: cfg.seed,
        trajectories: cfg.trajectories,
        motion_enabled: p.motion.unwrap_or(false),
        motion_update_interval: p.motion_interval.unwrap_or(DEFAULT_MOTION_INTERVAL),
        mean_speed: p.mean_speed.unwrap_or(DEFAULT_MEAN_SPEED),
        cutoff: p.cutoff,
        kernel: cfg.kernel(),
        spontaneous: cfg.spontaneous(),
        keep_final: false,
    }
}

/// Per-point overrides applied while building the protocol.
#[derive(Debug, Clone, Copy, Default)]
struct Overrides {
    deexcitation_detuning: Option<f64>,
    seeds: Option<f64>,
}

/// Protocol segments at one scan point. Without a configured protocol a
/// single excitation segment lasting until `default_end` is used.
fn segments(cfg: &Config, p: &PhysicalParams, o: Overrides, default_end: Option<f64>) -> CliResult<Vec<ProtocolSegment>> {
    if cfg.protocol.is_empty() {
        let end = default_end.ok_or_else(|| {
            CliError::config("protocol", "give a protocol or output.record_times to set its length")
        })?;
        return Ok(vec![ProtocolSegment::excitation(end, p.rabi, p.detuning)]);
    }
    let mut seeds_replaced = false;
    Ok(cfg
        .protocol
        .iter()
        .map(|s| {
            let mut seg = match s.drive {
                DriveChoice::Excitation => ProtocolSegment::excitation(
                    s.duration,
                    s.rabi.unwrap_or(p.rabi),
                    s.detuning.unwrap_or(p.detuning),
                ),
                DriveChoice::Deexcitation => ProtocolSegment::deexcitation(
                    s.duration,
                    s.rabi.unwrap_or(0.0),
                    s.detuning.or(o.deexcitation_detuning).unwrap_or(0.0),
                ),
                DriveChoice::Off => ProtocolSegment::dark(s.duration),
            };
            if let Some(n) = s.seeds {
                let n = match o.seeds {
                    Some(v) if !seeds_replaced => {
                        seeds_replaced = true;
                        v
                    }
                    _ => n,
                };
                seg = seg.with_seeds(n);
            }
            seg
        })
        .collect())
}

/// Record times from `output.record_times`, or the protocol end.
fn record_times(cfg: &Config) -> CliResult<Vec<f64>> {
    match (&cfg.record_times, cfg.protocol.is_empty()) {
        (Some(t), _) => Ok(t.clone()),
        (None, false) => Ok(vec![cfg.protocol_end()]),
        (None, true) => Err(CliError::config(
            "output.record_times",
            "required when no protocol is given",
        )),
    }
}

fn ensemble(cfg: &Config, p: &PhysicalParams, segs: &[ProtocolSegment], times: Vec<f64>) -> CliResult<EnsembleResult> {
    ensemble_with(cfg, p, segs, kmc_config(cfg, times))
}

fn ensemble_with(cfg: &Config, p: &PhysicalParams, segs: &[ProtocolSegment], kcfg: KmcConfig) -> CliResult<EnsembleResult> {
    run_ensemble(geometry(cfg)?, p, segs, &kcfg).map_err(|e| CliError::from_core("scenario", e))
}

fn q_or_nan(r: &CountRecord) -> f64 {
    mandel_q(r).unwrap_or(f64::NAN)
}

/// Mandel Q of the raw counts and of the counts after binomial detection
/// losses, for record `index`.
fn counting_statistics(cfg: &Config, e: &EnsembleResult, p: &PhysicalParams, point: usize, index: usize) -> (f64, f64) {
    let record = e.count_record(index);
    let q = q_or_nan(&record);
    let stream = DETECTION_STREAM + (point * e.record_times.len() + index) as u64;
    let detected = thin_counts(&record, p.detection_eff, &mut stream_rng(cfg.seed, stream))
        .map(|r| q_or_nan(&r))
        .unwrap_or(f64::NAN);
    (q, detected)
}

fn axis_or(values: &Option<Vec<f64>>, fallback: Option<f64>, path: &str) -> CliResult<Vec<f64>> {
    match (values, fallback) {
        (Some(v), _) => Ok(v.clone()),
        (None, Some(x)) => Ok(vec![x]),
        (None, None) => Err(CliError::config(path, "give a value or a scan axis")),
    }
}

/// Volume and dimension used to convert excitation numbers into spacings.
/// Cylinders are treated as quasi one-dimensional along their axis.
fn growth_volume(g: &GasGeometry) -> (f64, usize) {
    match *g {
        GasGeometry::Lattice { dimension, .. } => (g.extent().powi(dimension as i32), dimension),
        GasGeometry::Continuum { dimension, cloud, .. } => match cloud {
            CloudShape::Gaussian { sigma } => (sigma[..dimension].iter().map(|s| 2.0 * s).product(), dimension),
            CloudShape::Cylinder { length, .. } => (length, 1),
        },
    }
}

fn blockade_growth(cfg: &Config) -> CliResult<Vec<Table>> {
    let times = record_times(cfg)?;
    let window = cfg.options.smoothing_window.unwrap_or(DEFAULT_SMOOTHING_WINDOW);
    let neighbours = cfg.options.neighbour_count.unwrap_or(DEFAULT_NEIGHBOUR_COUNT);
    let g = geometry(cfg)?;
    let (volume, dim) = growth_volume(g);
    let rabis = axis_or(&cfg.scan.rabi, cfg.physics.rabi, "physics.rabi")?;

    let mut counts = Table::new(
        "counts",
        &["rabi_rad_per_us", "time_us", "mean_count", "std_error", "mandel_q", "mandel_q_detected"],
    );
    let mut growth = Table::new(
        "growth_rate",
        &["rabi_rad_per_us", "time_us", "spacing_um", "growth_rate_per_us", "theory_rate_per_us"],
    );
    let mut exponent = Table::new("exponent", &["rabi_rad_per_us", "slope", "intercept", "r_squared"]);
    for (point, &rabi) in rabis.iter().enumerate() {
        let p = cfg.params_at(Some(rabi), None)?;
        let segs = segments(cfg, &p, Overrides::default(), times.last().copied())?;
        let e = ensemble(cfg, &p, &segs, times.clone())?;
        let mean = e.mean_counts();
        let se = e.std_error_counts();
        for (i, &t) in times.iter().enumerate() {
            let (q, qd) = counting_statistics(cfg, &e, &p, point, i);
            counts.push(vec![rabi, t, mean[i], se[i], q, qd]);
        }
        if cfg.wants("growth_rate") {
            let curve = growth_rate_curve(&times, &mean, g.atom_count(), window, volume, dim)
                .map_err(|e| CliError::from_core("output.record_times", e))?;
            for i in 0..times.len() {
                let a = curve.spacing[i];
                growth.push(vec![rabi, times[i], a, curve.rate[i], mean_field_growth_rate(&p, a, neighbours)]);
            }
        }
        let fit = log_log_fit(&times, &mean);
        exponent.push(match fit {
            Some(f) => vec![rabi, f.slope, f.intercept, f.r_squared],
            None => vec![rabi, f64::NAN, f64::NAN, f64::NAN],
        });
    }
    Ok(vec![counts, growth, exponent])
}

fn facilitation(cfg: &Config) -> CliResult<Vec<Table>> {
    let times = record_times(cfg)?;
    let detunings = axis_or(&cfg.scan.detuning, cfg.physics.detuning, "physics.detuning")?;
    let mut counts = Table::new(
        "counts",
        &["detuning_rad_per_us", "time_us", "mean_count", "std_error", "mandel_q", "mandel_q_detected"],
    );
    for (point, &det) in detunings.iter().enumerate() {
        let p = cfg.params_at(None, Some(det))?;
        let segs = segments(cfg, &p, Overrides::default(), times.last().copied())?;
        let e = ensemble(cfg, &p, &segs, times.clone())?;
        let (mean, se) = (e.mean_counts(), e.std_error_counts());
        for (i, &t) in times.iter().enumerate() {
            let (q, qd) = counting_statistics(cfg, &e, &p, point, i);
            counts.push(vec![det, t, mean[i], se[i], q, qd]);
        }
    }
    Ok(vec![counts])
}

fn seeded_facilitation(cfg: &Config) -> CliResult<Vec<Table>> {
    let times = record_times(cfg)?;
    let seeds = cfg.scan.mean_seeds.clone().unwrap_or_default();
    let mut table = Table::new(
        "statistics",
        &[
            "mean_seeds",
            "time_us",
            "mean_count",
            "std_error",
            "mandel_q",
            "mandel_q_detected",
            "bimodal_mean",
            "bimodal_mandel_q",
        ],
    );
    for (point, &n_seed) in seeds.iter().enumerate() {
        let p = cfg.params_at(None, None)?;
        let o = Overrides {
            seeds: Some(n_seed),
            ..Overrides::default()
        };
        let segs = segments(cfg, &p, o, None)?;
        let e = ensemble(cfg, &p, &segs, times.clone())?;
        let (mean, se) = (e.mean_counts(), e.std_error_counts());
        let (bm, bq) = cfg
            .options
            .bimodal
            .and_then(|(n1, n2)| BimodalParams::new(n1, n2, n_seed, p.detection_eff).ok())
            .and_then(|b| bimodal_predict(&b).ok())
            .unwrap_or((f64::NAN, f64::NAN));
        for (i, &t) in times.iter().enumerate() {
            let (q, qd) = counting_statistics(cfg, &e, &p, point, i);
            table.push(vec![n_seed, t, mean[i], se[i], q, qd, bm, bq]);
        }
    }
    Ok(vec![table])
}

fn phase_diagram(cfg: &Config) -> CliResult<Vec<Table>> {
    let times = record_times(cfg)?;
    let rabis = cfg.scan.rabi.clone().unwrap_or_default();
    let detunings = cfg.scan.detuning.clone().unwrap_or_default();
    let mut table = Table::new(
        "mean_count",
        &["rabi_rad_per_us", "detuning_rad_per_us", "time_us", "mean_count", "std_error", "mandel_q"],
    );
    for &rabi in &rabis {
        for &det in &detunings {
            let p = cfg.params_at(Some(rabi), Some(det))?;
            let segs = segments(cfg, &p, Overrides::default(), None)?;
            let e = ensemble(cfg, &p, &segs, times.clone())?;
            let (mean, se) = (e.mean_counts(), e.std_error_counts());
            for (i, &t) in times.iter().enumerate() {
                table.push(vec![rabi, det, t, mean[i], se[i], q_or_nan(&e.count_record(i))]);
            }
        }
    }
    Ok(vec![table])
}

fn criticality(cfg: &Config) -> CliResult<Vec<Table>> {
    let end = if cfg.protocol.is_empty() {
        cfg.record_times
            .as_ref()
            .and_then(|t| t.last().copied())
            .ok_or_else(|| CliError::config("output.record_times", "required when no protocol is given"))?
    } else {
        cfg.protocol_end()
    };
    let times = cfg.record_times.clone().unwrap_or_else(|| {
        (0..DEFAULT_AVERAGING_RECORDS)
            .map(|i| end * (0.5 + 0.5 * (i + 1) as f64 / DEFAULT_AVERAGING_RECORDS as f64))
            .collect()
    });
    let from = cfg.options.average_from.unwrap_or(end / 2.0);
    let window: Vec<usize> = (0..times.len()).filter(|&i| times[i] >= from).collect();
    if window.is_empty() {
        return Err(CliError::config("scenario.average_from", "no record time lies in the averaging window"));
    }
    let n_atoms = geometry(cfg)?.atom_count() as f64;
    let rabis = cfg.scan.rabi.clone().unwrap_or_default();
    let mut stationary = Table::new("stationary_density", &["rabi_rad_per_us", "density", "std_error"]);
    let mut points = Vec::new();
    for &rabi in &rabis {
        let p = cfg.params_at(Some(rabi), None)?;
        let segs = segments(cfg, &p, Overrides::default(), Some(end))?;
        let e = ensemble(cfg, &p, &segs, times.clone())?;
        let per_traj: Vec<f64> = e
            .counts
            .iter()
            .map(|c| window.iter().map(|&i| c[i] as f64).sum::<f64>() / (window.len() as f64 * n_atoms))
            .collect();
        let n = per_traj.len() as f64;
        let mean = per_traj.iter().sum::<f64>() / n;
        let se = if per_traj.len() > 1 {
            (per_traj.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0) / n).sqrt()
        } else {
            f64::NAN
        };
        stationary.push(vec![rabi, mean, se]);
        points.push((rabi, mean));
    }
    let mut tables = vec![stationary];
    if cfg.wants("fit") {
        let defaults = PowerLawOptions::default();
        let opts = PowerLawOptions {
            grid: cfg.options.fit_grid.unwrap_or(defaults.grid),
            window: cfg.options.fit_window.map_or(defaults.window, |w| (w[0], w[1])),
            min_points: cfg.options.fit_min_points.unwrap_or(defaults.min_points),
        };
        let fit = fit_powerlaw_beta_with(&points, &opts).map_err(|e| CliError::from_core("scenario", e))?;
        let mut t = Table::new(
            "fit",
            &["beta", "omega_c_rad_per_us", "goodness", "window_lo_rad_per_us", "window_hi_rad_per_us", "points_used"],
        );
        t.push(vec![
            fit.beta,
            fit.omega_c,
            fit.goodness,
            fit.fit_window.0,
            fit.fit_window.1,
            fit.points_used as f64,
        ]);
        tables.push(t);
    }
    Ok(tables)
}

fn deexcitation_spectrum(cfg: &Config) -> CliResult<Vec<Table>> {
    let k = cfg
        .protocol
        .iter()
        .position(|s| s.drive == DriveChoice::Deexcitation)
        .expect("validated");
    let start: f64 = cfg.protocol[..k].iter().map(|s| s.duration).sum();
    let end = start + cfg.protocol[k].duration;
    let times = vec![start, end];
    let detunings = cfg.scan.detuning.clone().unwrap_or_default();
    let mut table = Table::new(
        "remaining_fraction",
        &["detuning_rad_per_us", "mean_before", "mean_after", "remaining_fraction", "std_error"],
    );
    let mut fractions = Vec::new();
    for &det in &detunings {
        let p = cfg.params_at(None, None)?;
        let o = Overrides {
            deexcitation_detuning: Some(det),
            ..Overrides::default()
        };
        let segs = segments(cfg, &p, o, None)?;
        let e = ensemble(cfg, &p, &segs, times.clone())?;
        let (f, se, before, after) = ratio_of_means(&e.counts);
        table.push(vec![det, before, after, f, se]);
        fractions.push(f);
    }
    let mut minima = Table::new("minima", &["detuning_rad_per_us", "remaining_fraction"]);
    for i in 1..fractions.len().saturating_sub(1) {
        if fractions[i] < fractions[i - 1] && fractions[i] < fractions[i + 1] {
            minima.push(vec![detunings[i], fractions[i]]);
        }
    }
    Ok(vec![table, minima])
}

/// `mean(after)/mean(before)` over paired records with a delta-method
/// standard error.
fn ratio_of_means(counts: &[Vec<u32>]) -> (f64, f64, f64, f64) {
    let n = counts.len() as f64;
    let b: Vec<f64> = counts.iter().map(|c| c[0] as f64).collect();
    let a: Vec<f64> = counts.iter().map(|c| c[1] as f64).collect();
    let mb = b.iter().sum::<f64>() / n;
    let ma = a.iter().sum::<f64>() / n;
    if !(mb > 0.0) {
        return (f64::NAN, f64::NAN, mb, ma);
    }
    let f = ma / mb;
    if counts.len() < 2 {
        return (f, f64::NAN, mb, ma);
    }
    let var = |x: &[f64], m: f64| x.iter().map(|v| (v - m).powi(2)).sum::<f64>() / (n - 1.0);
    let cov = a.iter().zip(&b).map(|(x, y)| (x - ma) * (y - mb)).sum::<f64>() / (n - 1.0);
    let rel = var(&a, ma) / (ma * ma) + var(&b, mb) / (mb * mb) - 2.0 * cov / (ma * mb);
    let se = if ma > 0.0 { f * (rel.max(0.0) / n).sqrt() } else { (var(&a, ma) / n).sqrt() / mb };
    (f, se, mb, ma)
}

fn qjmc(cfg: &Config) -> CliResult<Vec<Table>> {
    let GasGeometry::Lattice {
        dimension: 1,
        atom_count,
        boundary,
        ..
    } = *geometry(cfg)?
    else {
        return Err(CliError::config("geometry", "qjmc_histogram needs a one-dimensional lattice"));
    };
    let decay = cfg.physics.decay.unwrap_or_default();
    let rabis = axis_or(&cfg.scan.rabi, cfg.physics.rabi, "physics.rabi")?;
    let defaults = HistogramOptions::default();
    let opts = HistogramOptions {
        bins: cfg.options.bins.unwrap_or(defaults.bins),
        samples: cfg.options.samples.unwrap_or(defaults.samples),
        initial: match cfg.options.initial_state {
            Some(InitialChoice::Vacuum) => InitialState::Vacuum,
            _ => InitialState::CenterExcitation,
        },
        seed: cfg.seed,
    };
    let t_end = cfg.options.t_end.unwrap_or_default();
    let mut hist = Table::new("histogram", &["rabi_rad_per_us", "bin_lo", "bin_hi", "probability"]);
    let mut peaks = Table::new("peaks", &["rabi_rad_per_us", "bin_lo", "bin_hi", "probability"]);
    for &rabi in &rabis {
        let m = ChainModel::new(atom_count, rabi, decay, boundary).map_err(|e| CliError::from_core("geometry", e))?;
        let h = qjmc_histogram(&m, t_end, cfg.trajectories, &opts).map_err(|e| CliError::from_core("scenario", e))?;
        for (b, &prob) in h.probability.iter().enumerate() {
            hist.push(vec![rabi, h.bin_edges[b], h.bin_edges[b + 1], prob]);
        }
        for b in h.local_maxima() {
            peaks.push(vec![rabi, h.bin_edges[b], h.bin_edges[b + 1], h.probability[b]]);
        }
    }
    Ok(vec![hist, peaks])
}

fn meanfield(cfg: &Config) -> CliResult<Vec<Table>> {
    let rabis = cfg.scan.rabi.clone().unwrap_or_default();
    let spontaneous = cfg.physics.spontaneous.unwrap_or(true);
    let mut classical = Table::new(
        "classical_roots",
        &["rabi_rad_per_us", "rate_fac_per_us", "rate_spon_per_us", "density", "stable"],
    );
    let mut quantum = Table::new("quantum_roots", &["rabi_rad_per_us", "density", "stable"]);
    let mut trajectory = Table::new("trajectory", &["rabi_rad_per_us", "time_us", "density"]);
    for &rabi in &rabis {
        let p = cfg.params_at(Some(rabi), None)?;
        let spon = if spontaneous { flip_rate(&p, 0.0) } else { 0.0 };
        let mf = MeanFieldParams::new(p.resonant_rate(), spon, p.decay).map_err(|e| CliError::from_core("physics", e))?;
        for s in mf_stationary(&mf) {
            classical.push(vec![rabi, mf.rate_fac, mf.rate_spon, s.density, f64::from(u8::from(s.stable))]);
        }
        for s in qmf_stationary(rabi, p.decay).map_err(|e| CliError::from_core("physics", e))? {
            quantum.push(vec![rabi, s.density, f64::from(u8::from(s.stable))]);
        }
        if let Some(times) = &cfg.record_times {
            let n0 = cfg.options.initial_density.unwrap_or(0.0);
            let traj = mf_trajectory(n0, &mf, times).map_err(|e| CliError::from_core("scenario", e))?;
            for (t, n) in times.iter().zip(traj) {
                trajectory.push(vec![rabi, *t, n]);
            }
        }
    }
    let mut tables = vec![classical, quantum];
    if cfg.record_times.is_some() {
        tables.push(trajectory);
    }
    Ok(tables)
}

fn collapse(cfg: &Config) -> CliResult<Vec<Table>> {
    let scaled = cfg.scaled_times.clone().unwrap_or_default();
    let rabis = cfg.scan.rabi.clone().unwrap_or_default();
    let mut table = Table::new(
        "curves",
        &["rabi_rad_per_us", "time_us", "scaled_time", "mean_count", "std_error"],
    );
    let mut curves = Vec::new();
    let mut gamma = 0.0;
    for (i, &rabi) in rabis.iter().enumerate() {
        if !(rabi > 0.0) {
            return Err(CliError::config("scan.rabi", "collapse needs positive Rabi frequencies"));
        }
        let p = cfg.params_at(Some(rabi), None)?;
        gamma = p.dephasing;
        let times: Vec<f64> = scaled.iter().map(|tau| tau * p.dephasing / (rabi * rabi)).collect();
        let segs = segments(cfg, &p, Overrides::default(), times.last().copied())?;
        let kcfg = KmcConfig {
            rng_seed: cfg.seed.wrapping_add(i as u64),
            ..kmc_config(cfg, times.clone())
        };
        let e = ensemble_with(cfg, &p, &segs, kcfg)?;
        let (mean, se) = (e.mean_counts(), e.std_error_counts());
        for k in 0..times.len() {
            table.push(vec![rabi, times[k], scaled[k], mean[k], se[k]]);
        }
        curves.push(Curve {
            label: rabi,
            times,
            mean,
            std_error: se,
        });
    }
    let mut deviation = Table::new("deviation", &["max_deviation", "max_in_std_errors"]);
    if let CollapseResult::Deviation {
        max_deviation,
        max_in_std_errors,
    } = collapse_check(&curves, CollapseMode::Incoherent { dephasing: gamma })
        .map_err(|e| CliError::from_core("scenario", e))?
    {
        deviation.push(vec![max_deviation, max_in_std_errors]);
    }
    Ok(vec![table, deviation])
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ratio_of_identical_records_is_one() {
        let counts = vec![vec![3, 3], vec![5, 5], vec![4, 4]];
        let (f, se, b, a) = ratio_of_means(&counts);
        assert_eq!((f, b, a), (1.0, 4.0, 4.0));
        assert!(se.abs() < 1e-12);
    }

    #[test]
    fn ratio_standard_error_matches_delta_method() {
        let counts = vec![vec![10, 5], vec![12, 4], vec![8, 6], vec![10, 5]];
        let (f, se, _, _) = ratio_of_means(&counts);
        assert!((f - 0.5).abs() < 1e-12);
        // Var(a) = 2/3, Var(b) = 8/3, Cov = -4/3 (sample).
        let rel: f64 = (2.0 / 3.0) / 25.0 + (8.0 / 3.0) / 100.0 + 2.0 * (4.0 / 3.0) / 50.0;
        assert!((se - 0.5 * (rel / 4.0).sqrt()).abs() < 1e-12);
    }

    #[test]
    fn growth_volume_of_a_cylinder_is_its_length() {
        let g = GasGeometry::Continuum {
            dimension: 3,
            cloud: CloudShape::Cylinder { radius: 3.0, length: 80.0 },
            atom_count: 10,
        };
        assert_eq!(growth_volume(&g), (80.0, 1));
    }
}
