#![allow(dead_code)]

use rydkin_core::kmc::{build_channels, ProtocolSegment, RateKernel};
use rydkin_core::ode::{integrate, Tolerances};
use rydkin_core::{PhysicalParams, SpinConfiguration};

/// Mean excitation number of the classical rate equation for all `2^N`
/// configurations, integrated exactly from the all-ground state.
pub fn classical_mean_excitations(
    positions: &[[f64; 3]],
    params: &PhysicalParams,
    segment: &ProtocolSegment,
    cutoff: f64,
    t_grid: &[f64],
) -> Vec<f64> {
    let n = positions.len();
    let dim = 1usize << n;
    // rates[b][k]: total rate for atom k to change its state from b.
    let rates: Vec<Vec<f64>> = (0..dim)
        .map(|b| {
            let mut cfg = SpinConfiguration::ground(positions.to_vec());
            for k in 0..n {
                cfg.excited[k] = b >> k & 1 == 1;
            }
            let table = build_channels(&cfg, params, segment, RateKernel::VanDerWaals, true, cutoff);
            (0..n).map(|k| table.flip_rate(k)).collect()
        })
        .collect();
    let decay = params.decay;
    let rhs = |_: f64, p: &[f64], dp: &mut [f64]| {
        dp.iter_mut().for_each(|v| *v = 0.0);
        for b in 0..dim {
            for k in 0..n {
                let mut out = rates[b][k];
                if b >> k & 1 == 1 {
                    out += decay;
                    dp[b & !(1 << k)] += decay * p[b];
                }
                dp[b ^ (1 << k)] += rates[b][k] * p[b];
                dp[b] -= out * p[b];
            }
        }
    };
    let mut p0 = vec![0.0; dim];
    p0[0] = 1.0;
    let out = integrate(rhs, 0.0, &p0, t_grid, &Tolerances::default()).expect("rate equation integrates");
    out.iter()
        .map(|p| p.iter().enumerate().map(|(b, &w)| w * b.count_ones() as f64).sum())
        .collect()
}

/// Mean and population standard deviation.
pub fn mean_std(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let m = xs.iter().sum::<f64>() / n;
    let v = xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / n;
    (m, v.sqrt())
}
