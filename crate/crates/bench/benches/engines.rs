use std::hint::black_box;

use criterion::{criterion_group, criterion_main, Criterion};
use rydkin_core::kmc::{run_ensemble, KmcConfig, ProtocolSegment};
use rydkin_core::model::units;
use rydkin_core::qjmc::{qjmc_trajectory, ChainModel, InitialState};
use rydkin_core::rng::stream_rng;
use rydkin_core::stats::fit_powerlaw_beta;
use rydkin_core::{Boundary, GasGeometry, PhysicalParams};

fn kmc_ensemble(c: &mut Criterion) {
    let p = PhysicalParams::new(
        units::khz(250.0),
        units::mhz(19.0),
        units::mhz(0.7),
        0.0125,
        units::ghz_um6(869.7),
        1.0,
    )
    .unwrap();
    let g = GasGeometry::chain(400, 6.0, Boundary::Periodic);
    let times: Vec<f64> = (1..=20).map(|i| 5.0 * i as f64).collect();
    let segs = [ProtocolSegment::excitation(100.0, p.rabi, p.detuning)];
    let cfg = KmcConfig {
        record_times: times,
        trajectories: 16,
        rng_seed: 1,
        ..KmcConfig::default()
    };
    c.bench_function("kmc ensemble, 400-site chain, 16 trajectories", |b| {
        b.iter(|| run_ensemble(black_box(&g), &p, &segs, &cfg).unwrap())
    });
}

fn qjmc_single_trajectory(c: &mut Criterion) {
    let m = ChainModel::new(10, 5.0, 1.0, Boundary::Periodic).unwrap();
    let times: Vec<f64> = (0..=40).map(|i| 0.2 * i as f64).collect();
    let mut stream = 0;
    c.bench_function("qjmc trajectory, 10 sites, t = 8/kappa", |b| {
        b.iter(|| {
            stream += 1;
            let mut rng = stream_rng(3, stream);
            qjmc_trajectory(black_box(&m), InitialState::CenterExcitation, &times, &mut rng).unwrap()
        })
    });
}

fn powerlaw_fit(c: &mut Criterion) {
    let points: Vec<(f64, f64)> = (0..60)
        .map(|i| {
            let o = i as f64 * 0.005;
            (o, if o > 0.08 { 2.0 * (o - 0.08).powf(0.27) } else { 0.0 })
        })
        .collect();
    c.bench_function("power-law fit, 60 points", |b| b.iter(|| fit_powerlaw_beta(black_box(&points)).unwrap()));
}

criterion_group!(benches, kmc_ensemble, qjmc_single_trajectory, powerlaw_fit);
criterion_main!(benches);
