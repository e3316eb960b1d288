//! Small-system quantum references.
//!
//! * Quantum-jump trajectories for the kinetically constrained chain
//!   `H = Ω Σ_k (n_{k−1} + n_{k+1}) σx_k` with radiative decay.
//! * Dense Lindblad integration of the full two-level model with drive,
//!   detuning, van der Waals interactions, decay and dephasing.
//!
//! Basis states are bit strings; bit `k` set means atom `k` is excited.

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::geometry::Boundary;
use crate::model::{squared_separation, PhysicalParams};
use crate::ode::{integrate, Tolerances};
use crate::rng::stream_rng;

/// Largest chain for quantum-jump trajectories.
pub const MAX_TRAJECTORY_SITES: usize = 14;
/// Largest system for dense density-matrix evolution.
pub const MAX_DENSE_SITES: usize = 6;
/// Jump times are located to this precision (µs).
pub const JUMP_TIME_TOLERANCE: f64 = 1e-6;
/// Fixed trajectory step is this fraction of the fastest rate's inverse.
/// Residual non-vacuum weight below which a state is treated as vacuum.
pub const VACUUM_WEIGHT: f64 = 1e-12;
pub const STEP_FRACTION: f64 = 0.01;

const ZERO: Complex64 = Complex64::new(0.0, 0.0);

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChainModel {
    pub sites: usize,
    pub rabi: f64,
    pub decay: f64,
    pub boundary: Boundary,
}

impl ChainModel {
    pub fn new(sites: usize, rabi: f64, decay: f64, boundary: Boundary) -> Result<Self> {
        let m = Self {
            sites,
            rabi,
            decay,
            boundary,
        };
        m.validate()?;
        Ok(m)
    }

    pub fn validate(&self) -> Result<()> {
        if self.sites < 2 {
            return Err(Error::invalid("sites", "a chain needs at least 2 sites"));
        }
        if self.sites > MAX_TRAJECTORY_SITES {
            return Err(Error::Capacity(format!(
                "{} sites exceed the state-vector limit of {MAX_TRAJECTORY_SITES}",
                self.sites
            )));
        }
        if !(self.rabi >= 0.0 && self.rabi.is_finite()) {
            return Err(Error::invalid("rabi", "must be non-negative and finite"));
        }
        if !(self.decay >= 0.0 && self.decay.is_finite()) {
            return Err(Error::invalid("decay", "must be non-negative and finite"));
        }
        Ok(())
    }

    fn dim(&self) -> usize {
        1 << self.sites
    }

    /// Neighbour sites of `k`, with multiplicity (a periodic pair sees its
    /// partner on both sides).
    fn neighbours(&self, k: usize) -> Vec<usize> {
        let n = self.sites;
        let mut out = Vec::with_capacity(2);
        match self.boundary {
            Boundary::Open => {
                if k > 0 {
                    out.push(k - 1);
                }
                if k + 1 < n {
                    out.push(k + 1);
                }
            }
            Boundary::Periodic => {
                out.push((k + n - 1) % n);
                out.push((k + 1) % n);
            }
        }
        out
    }

    /// Constraint weights `C_k(b)`, laid out as `[b * sites + k]`.
    fn constraint_table(&self) -> Vec<u8> {
        let n = self.sites;
        let nbrs: Vec<Vec<usize>> = (0..n).map(|k| self.neighbours(k)).collect();
        let mut table = vec![0u8; self.dim() * n];
        for b in 0..self.dim() {
            for k in 0..n {
                table[b * n + k] = nbrs[k].iter().filter(|&&j| b >> j & 1 == 1).count() as u8;
            }
        }
        table
    }
}

/// Matrix-free constraint Hamiltonian.
#[derive(Debug, Clone)]
pub struct ConstraintHamiltonian {
    sites: usize,
    rabi: f64,
    weights: Vec<u8>,
}

impl ConstraintHamiltonian {
    pub fn dim(&self) -> usize {
        1 << self.sites
    }

    /// `out = H · psi`.
    pub fn apply(&self, psi: &[Complex64], out: &mut [Complex64]) {
        out.iter_mut().for_each(|v| *v = ZERO);
        let n = self.sites;
        for (b, &a) in psi.iter().enumerate() {
            if a == ZERO {
                continue;
            }
            let w = &self.weights[b * n..(b + 1) * n];
            for (k, &c) in w.iter().enumerate() {
                if c != 0 {
                    out[b ^ (1 << k)] += a * (self.rabi * c as f64);
                }
            }
        }
    }
}

pub fn build_constraint_hamiltonian(m: &ChainModel) -> Result<ConstraintHamiltonian> {
    m.validate()?;
    Ok(ConstraintHamiltonian {
        sites: m.sites,
        rabi: m.rabi,
        weights: m.constraint_table(),
    })
}

/// State vector with its squared norm.
#[derive(Debug, Clone, PartialEq)]
pub struct PureState {
    pub amplitudes: Vec<Complex64>,
    pub norm: f64,
}

impl PureState {
    pub fn basis(sites: usize, bits: usize) -> Self {
        let mut amplitudes = vec![ZERO; 1 << sites];
        amplitudes[bits] = Complex64::new(1.0, 0.0);
        Self {
            amplitudes,
            norm: 1.0,
        }
    }

    pub fn norm_sqr(&self) -> f64 {
        norm_sqr(&self.amplitudes)
    }

    pub fn normalize(&mut self) {
        let s = self.norm_sqr().sqrt();
        if s > 0.0 {
            self.amplitudes.iter_mut().for_each(|a| *a /= s);
        }
        self.norm = 1.0;
    }
}

fn norm_sqr(v: &[Complex64]) -> f64 {
    v.iter().map(|a| a.norm_sqr()).sum()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum InitialState {
    /// One excitation on site `sites / 2`.
    #[default]
    CenterExcitation,
    Vacuum,
    /// Arbitrary product state given as a bit string.
    Bits(usize),
}

impl InitialState {
    fn bits(self, sites: usize) -> Result<usize> {
        let b = match self {
            InitialState::CenterExcitation => 1 << (sites / 2),
            InitialState::Vacuum => 0,
            InitialState::Bits(b) => b,
        };
        if b >= 1 << sites {
            return Err(Error::invalid("initial_state", "bit string longer than the chain"));
        }
        Ok(b)
    }
}

/// Observables of one quantum-jump trajectory on the output grid.
#[derive(Debug, Clone, PartialEq)]
pub struct QjmcTrajectory {
    pub times: Vec<f64>,
    /// Excitation density `Σ⟨n_k⟩/N`.
    pub density: Vec<f64>,
    /// `site_occupation[time][k] = ⟨n_k⟩`.
    pub site_occupation: Vec<Vec<f64>>,
    /// `(time, site)` of every jump.
    pub jumps: Vec<(f64, usize)>,
}

/// Non-Hermitian evolution `dψ/dt = −i(H − iκ/2 Σ n_k)ψ` with fixed-step RK4.
struct Propagator {
    h: ConstraintHamiltonian,
    decay: f64,
    popcount: Vec<f64>,
    k: [Vec<Complex64>; 4],
    tmp: Vec<Complex64>,
}

impl Propagator {
    fn new(h: ConstraintHamiltonian, decay: f64) -> Self {
        let d = h.dim();
        Self {
            popcount: (0..d).map(|b: usize| b.count_ones() as f64).collect(),
            h,
            decay,
            k: std::array::from_fn(|_| vec![ZERO; d]),
            tmp: vec![ZERO; d],
        }
    }

    fn rhs(h: &ConstraintHamiltonian, decay: f64, pop: &[f64], psi: &[Complex64], out: &mut [Complex64]) {
        h.apply(psi, out);
        let minus_i = Complex64::new(0.0, -1.0);
        for ((o, &p), &n) in out.iter_mut().zip(psi).zip(pop) {
            *o = *o * minus_i - p * (0.5 * decay * n);
        }
    }

    /// One RK4 step of size `dt` from `psi` into `out`.
    fn step(&mut self, psi: &[Complex64], dt: f64, out: &mut [Complex64]) {
        let Self {
            h,
            decay,
            popcount,
            k,
            tmp,
        } = self;
        let [k1, k2, k3, k4] = k;
        Self::rhs(h, *decay, popcount, psi, k1);
        for i in 0..psi.len() {
            tmp[i] = psi[i] + k1[i] * (0.5 * dt);
        }
        Self::rhs(h, *decay, popcount, tmp, k2);
        for i in 0..psi.len() {
            tmp[i] = psi[i] + k2[i] * (0.5 * dt);
        }
        Self::rhs(h, *decay, popcount, tmp, k3);
        for i in 0..psi.len() {
            tmp[i] = psi[i] + k3[i] * dt;
        }
        Self::rhs(h, *decay, popcount, tmp, k4);
        for i in 0..psi.len() {
            out[i] = psi[i] + (k1[i] + (k2[i] + k3[i]) * 2.0 + k4[i]) * (dt / 6.0);
        }
    }
}

fn snap_to_vacuum(psi: &mut [Complex64]) {
    psi.iter_mut().for_each(|a| *a = ZERO);
    psi[0] = Complex64::new(1.0, 0.0);
}

fn site_occupation(psi: &[Complex64], sites: usize) -> Vec<f64> {
    let norm = norm_sqr(psi);
    let mut occ = vec![0.0; sites];
    for (b, a) in psi.iter().enumerate() {
        let p = a.norm_sqr();
        if p == 0.0 {
            continue;
        }
        for (k, o) in occ.iter_mut().enumerate() {
            if b >> k & 1 == 1 {
                *o += p;
            }
        }
    }
    if norm > 0.0 {
        occ.iter_mut().for_each(|o| *o /= norm);
    }
    occ
}

/// Fixed integration step for the chain: `0.01 / max(Ω, κ)`.
pub fn trajectory_step(m: &ChainModel) -> f64 {
    let fastest = m.rabi.max(m.decay);
    if fastest > 0.0 {
        STEP_FRACTION / fastest
    } else {
        f64::INFINITY
    }
}

/// One quantum-jump trajectory sampled on `t_grid` (sorted, non-negative).
pub fn qjmc_trajectory<R: Rng + ?Sized>(
    m: &ChainModel,
    initial: InitialState,
    t_grid: &[f64],
    rng: &mut R,
) -> Result<QjmcTrajectory> {
    let h = build_constraint_hamiltonian(m)?;
    if t_grid.windows(2).any(|w| w[1] < w[0]) || t_grid.first().is_some_and(|&t| t < 0.0) {
        return Err(Error::invalid("t_grid", "must be sorted and non-negative"));
    }
    let n = m.sites;
    let d = m.dim();
    let h_max = trajectory_step(m);
    let mut prop = Propagator::new(h, m.decay);
    let mut psi = PureState::basis(n, initial.bits(n)?).amplitudes;
    let mut trial = vec![ZERO; d];
    let mut threshold: f64 = rng.random();
    let mut vacuum = initial.bits(n)? == 0;
    let mut t = 0.0;
    let mut out = QjmcTrajectory {
        times: t_grid.to_vec(),
        density: Vec::with_capacity(t_grid.len()),
        site_occupation: Vec::with_capacity(t_grid.len()),
        jumps: Vec::new(),
    };

    for &target in t_grid {
        while t < target && !vacuum {
            let dt = h_max.min(target - t);
            prop.step(&psi, dt, &mut trial);
            let norm = norm_sqr(&trial);
            if norm > threshold {
                std::mem::swap(&mut psi, &mut trial);
                t = if dt == target - t { target } else { t + dt };
                if psi[0].norm_sqr() >= norm * (1.0 - VACUUM_WEIGHT) {
                    snap_to_vacuum(&mut psi);
                    vacuum = true;
                }
                continue;
            }
            // The norm crossed the threshold inside this step: bisect.
            let (mut lo, mut hi) = (0.0, dt);
            while hi - lo > JUMP_TIME_TOLERANCE {
                let mid = 0.5 * (lo + hi);
                prop.step(&psi, mid, &mut trial);
                if norm_sqr(&trial) > threshold {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            prop.step(&psi, hi, &mut trial);
            std::mem::swap(&mut psi, &mut trial);
            t += hi;

            let occ = site_occupation(&psi, n);
            let total: f64 = occ.iter().sum();
            let mut u = rng.random::<f64>() * total;
            let mut site = n - 1;
            for (k, &o) in occ.iter().enumerate() {
                if u < o {
                    site = k;
                    break;
                }
                u -= o;
            }
            while occ[site] == 0.0 && site > 0 {
                site -= 1;
            }
            let bit = 1 << site;
            trial.iter_mut().for_each(|v| *v = ZERO);
            for (b, &a) in psi.iter().enumerate() {
                if b & bit != 0 {
                    trial[b & !bit] = a;
                }
            }
            std::mem::swap(&mut psi, &mut trial);
            let s = norm_sqr(&psi).sqrt();
            psi.iter_mut().for_each(|a| *a /= s);
            out.jumps.push((t, site));
            threshold = rng.random();
            if psi[0].norm_sqr() >= 1.0 - VACUUM_WEIGHT {
                snap_to_vacuum(&mut psi);
                vacuum = true;
            }
        }
        if vacuum {
            t = t.max(target);
        }
        let occ = site_occupation(&psi, n);
        out.density.push(occ.iter().sum::<f64>() / n as f64);
        out.site_occupation.push(occ);
    }
    Ok(out)
}

/// Mean and standard error of `⟨n_k⟩(t)` over independent trajectories.
#[derive(Debug, Clone, PartialEq)]
pub struct QjmcEnsemble {
    pub times: Vec<f64>,
    /// `mean[time][site]`.
    pub mean: Vec<Vec<f64>>,
    pub std_error: Vec<Vec<f64>>,
    pub trajectories: usize,
}

impl QjmcEnsemble {
    /// Mean total excitation number per grid time.
    pub fn total_mean(&self) -> Vec<f64> {
        self.mean.iter().map(|row| row.iter().sum()).collect()
    }
}

/// Trajectory `i` uses stream `i` of `seed`; results do not depend on the
/// thread count.
pub fn qjmc_ensemble(
    m: &ChainModel,
    initial: InitialState,
    t_grid: &[f64],
    trajectories: usize,
    seed: u64,
) -> Result<QjmcEnsemble> {
    if trajectories < 2 {
        return Err(Error::invalid("trajectories", "at least two are needed for error bars"));
    }
    let runs: Vec<QjmcTrajectory> = (0..trajectories)
        .into_par_iter()
        .map(|i| qjmc_trajectory(m, initial, t_grid, &mut stream_rng(seed, i as u64)))
        .collect::<Result<_>>()?;
    let count = trajectories as f64;
    let mut mean = vec![vec![0.0; m.sites]; t_grid.len()];
    let mut sq = vec![vec![0.0; m.sites]; t_grid.len()];
    for r in &runs {
        for (ti, occ) in r.site_occupation.iter().enumerate() {
            for (k, &o) in occ.iter().enumerate() {
                mean[ti][k] += o;
                sq[ti][k] += o * o;
            }
        }
    }
    let mut std_error = sq;
    for (mrow, srow) in mean.iter_mut().zip(std_error.iter_mut()) {
        for (mv, sv) in mrow.iter_mut().zip(srow.iter_mut()) {
            *mv /= count;
            let var = ((*sv / count - *mv * *mv) * count / (count - 1.0)).max(0.0);
            *sv = (var / count).sqrt();
        }
    }
    Ok(QjmcEnsemble {
        times: t_grid.to_vec(),
        mean,
        std_error,
        trajectories,
    })
}

/// Normalised histogram of the time-averaged excitation density.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityHistogram {
    /// `bins + 1` edges spanning `[0, 1]`.
    pub bin_edges: Vec<f64>,
    pub probability: Vec<f64>,
    /// Time-averaged density of each trajectory.
    pub samples: Vec<f64>,
}

impl DensityHistogram {
    /// Indices of strict local maxima (plateaus count once), with the edges
    /// compared against zero outside the range.
    pub fn local_maxima(&self) -> Vec<usize> {
        let p = &self.probability;
        let mut out = Vec::new();
        let mut i = 0;
        while i < p.len() {
            let mut j = i;
            while j + 1 < p.len() && p[j + 1] == p[i] {
                j += 1;
            }
            let left = if i == 0 { 0.0 } else { p[i - 1] };
            let right = if j + 1 == p.len() { 0.0 } else { p[j + 1] };
            if p[i] > left && p[i] > right {
                out.push(i);
            }
            i = j + 1;
        }
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HistogramOptions {
    pub bins: usize,
    /// Samples per trajectory in the averaging window `[t_end/2, t_end]`.
    pub samples: usize,
    pub initial: InitialState,
    pub seed: u64,
}

impl Default for HistogramOptions {
    fn default() -> Self {
        Self {
            bins: 10,
            samples: 100,
            initial: InitialState::CenterExcitation,
            seed: 0,
        }
    }
}

/// Steady-state `P(n)` from the second-half time average of each trajectory.
pub fn qjmc_histogram(
    m: &ChainModel,
    t_end: f64,
    trajectories: usize,
    opts: &HistogramOptions,
) -> Result<DensityHistogram> {
    if !(t_end > 0.0 && t_end.is_finite()) {
        return Err(Error::invalid("t_end", "must be positive"));
    }
    if trajectories == 0 || opts.bins == 0 || opts.samples < 2 {
        return Err(Error::invalid("trajectories", "trajectories, bins and samples must be positive"));
    }
    let grid: Vec<f64> = (0..opts.samples)
        .map(|i| 0.5 * t_end * (1.0 + i as f64 / (opts.samples - 1) as f64))
        .collect();
    let samples: Vec<f64> = (0..trajectories)
        .into_par_iter()
        .map(|i| {
            let r = qjmc_trajectory(m, opts.initial, &grid, &mut stream_rng(opts.seed, i as u64))?;
            Ok(r.density.iter().sum::<f64>() / r.density.len() as f64)
        })
        .collect::<Result<_>>()?;
    let bins = opts.bins;
    let mut counts = vec![0usize; bins];
    for &s in &samples {
        let b = ((s * bins as f64) as usize).min(bins - 1);
        counts[b] += 1;
    }
    let probability = counts.iter().map(|&c| c as f64 / trajectories as f64).collect();
    Ok(DensityHistogram {
        bin_edges: (0..=bins).map(|i| i as f64 / bins as f64).collect(),
        probability,
        samples,
    })
}

/// Hermitian generator pieces of an `N`-atom two-level model: diagonal
/// energies plus single-site `σx_k` couplings whose weight may depend on the
/// basis state (symmetric under flipping `k`).
#[derive(Debug, Clone)]
pub struct DenseModel {
    pub sites: usize,
    diagonal: Vec<f64>,
    /// `flip[b * sites + k]` couples `b` and `b ^ (1 << k)`.
    flip: Vec<f64>,
    pub decay: f64,
    pub dephasing: f64,
}

impl DenseModel {
    fn check_capacity(sites: usize) -> Result<()> {
        if sites > MAX_DENSE_SITES {
            return Err(Error::Capacity(format!(
                "{sites} atoms exceed the dense limit of {MAX_DENSE_SITES}"
            )));
        }
        if sites == 0 {
            return Err(Error::invalid("positions", "at least one atom is required"));
        }
        Ok(())
    }

    pub fn dim(&self) -> usize {
        1 << self.sites
    }

    /// Dense Hamiltonian matrix, for inspection and tests.
    pub fn hamiltonian(&self) -> DMatrix<Complex64> {
        let d = self.dim();
        let n = self.sites;
        let mut h = DMatrix::from_element(d, d, ZERO);
        for b in 0..d {
            h[(b, b)] = Complex64::new(self.diagonal[b], 0.0);
            for k in 0..n {
                h[(b ^ (1 << k), b)] += Complex64::new(self.flip[b * n + k], 0.0);
            }
        }
        h
    }

    fn rhs(&self, rho: &[Complex64], out: &mut [Complex64]) {
        let d = self.dim();
        let n = self.sites;
        let minus_i = Complex64::new(0.0, -1.0);
        for a in 0..d {
            for b in 0..d {
                let idx = a * d + b;
                // −i[H, ρ]
                let mut comm = rho[idx] * (self.diagonal[a] - self.diagonal[b]);
                for k in 0..n {
                    let bit = 1 << k;
                    let wa = self.flip[a * n + k];
                    if wa != 0.0 {
                        comm += rho[(a ^ bit) * d + b] * wa;
                    }
                    let wb = self.flip[b * n + k];
                    if wb != 0.0 {
                        comm -= rho[a * d + (b ^ bit)] * wb;
                    }
                }
                let mut v = comm * minus_i;
                let diff = (a ^ b).count_ones() as f64;
                let exc = (a.count_ones() + b.count_ones()) as f64;
                v -= rho[idx] * (self.dephasing * diff + 0.5 * self.decay * exc);
                if self.decay > 0.0 {
                    // Feeding from states with bit k set on both sides.
                    let free = !(a | b) & (d - 1);
                    let mut m = free;
                    while m != 0 {
                        let bit = m & m.wrapping_neg();
                        v += rho[(a | bit) * d + (b | bit)] * self.decay;
                        m &= m - 1;
                    }
                }
                out[idx] = v;
            }
        }
    }
}

/// Full model: `H = Ω/2 Σσx − Δ Σn + Σ_{k<m} V_km n_k n_m`.
///
/// The detuning enters with a minus sign so that a repulsive shift `V = Δ`
/// brings a pair into resonance, matching the rate kernel.
pub fn rydberg_lindblad(params: &PhysicalParams, positions: &[[f64; 3]]) -> Result<DenseModel> {
    params.validate()?;
    let n = positions.len();
    DenseModel::check_capacity(n)?;
    let d = 1usize << n;
    let mut pair = vec![vec![0.0; n]; n];
    for a in 0..n {
        for b in (a + 1)..n {
            let r2 = squared_separation(&positions[a], &positions[b], None);
            if r2 <= 0.0 {
                return Err(Error::invalid("positions", "atoms must not coincide"));
            }
            pair[a][b] = params.c6 / (r2 * r2 * r2);
        }
    }
    let diagonal = (0..d)
        .map(|b| {
            let mut e = -params.detuning * b.count_ones() as f64;
            for a in 0..n {
                for c in (a + 1)..n {
                    if b >> a & 1 == 1 && b >> c & 1 == 1 {
                        e += pair[a][c];
                    }
                }
            }
            e
        })
        .collect();
    Ok(DenseModel {
        sites: n,
        diagonal,
        flip: vec![0.5 * params.rabi; d * n],
        decay: params.decay,
        dephasing: params.dephasing,
    })
}

/// Constrained chain with decay and optional dephasing.
pub fn chain_lindblad(m: &ChainModel, dephasing: f64) -> Result<DenseModel> {
    m.validate()?;
    DenseModel::check_capacity(m.sites)?;
    Ok(DenseModel {
        sites: m.sites,
        diagonal: vec![0.0; m.dim()],
        flip: m.constraint_table().into_iter().map(|c| m.rabi * c as f64).collect(),
        decay: m.decay,
        dephasing,
    })
}

/// Row-major density matrix of at most [`MAX_DENSE_SITES`] atoms.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseDensityMatrix {
    pub sites: usize,
    pub entries: Vec<Complex64>,
}

impl DenseDensityMatrix {
    /// Pure product state `|bits⟩⟨bits|`.
    pub fn basis(sites: usize, bits: usize) -> Result<Self> {
        DenseModel::check_capacity(sites)?;
        let d = 1usize << sites;
        if bits >= d {
            return Err(Error::invalid("bits", "bit string longer than the system"));
        }
        let mut entries = vec![ZERO; d * d];
        entries[bits * d + bits] = Complex64::new(1.0, 0.0);
        Ok(Self { sites, entries })
    }

    pub fn dim(&self) -> usize {
        1 << self.sites
    }

    pub fn trace(&self) -> Complex64 {
        let d = self.dim();
        (0..d).map(|a| self.entries[a * d + a]).sum()
    }

    /// `max |ρ_ab − conj(ρ_ba)|`.
    pub fn hermiticity_error(&self) -> f64 {
        let d = self.dim();
        let mut worst: f64 = 0.0;
        for a in 0..d {
            for b in a..d {
                worst = worst.max((self.entries[a * d + b] - self.entries[b * d + a].conj()).norm());
            }
        }
        worst
    }

    pub fn min_eigenvalue(&self) -> f64 {
        let d = self.dim();
        let m = DMatrix::from_fn(d, d, |a, b| {
            0.5 * (self.entries[a * d + b] + self.entries[b * d + a].conj())
        });
        m.symmetric_eigen()
            .eigenvalues
            .iter()
            .copied()
            .fold(f64::INFINITY, f64::min)
    }

    /// `⟨n_k⟩` for every site.
    pub fn site_occupation(&self) -> Vec<f64> {
        let d = self.dim();
        let mut occ = vec![0.0; self.sites];
        for b in 0..d {
            let p = self.entries[b * d + b].re;
            for (k, o) in occ.iter_mut().enumerate() {
                if b >> k & 1 == 1 {
                    *o += p;
                }
            }
        }
        occ
    }

    pub fn excitation_number(&self) -> f64 {
        self.site_occupation().iter().sum()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DenseEvolution {
    pub times: Vec<f64>,
    pub states: Vec<DenseDensityMatrix>,
}

impl DenseEvolution {
    /// Mean total excitation number per grid time.
    pub fn excitation_number(&self) -> Vec<f64> {
        self.states.iter().map(|s| s.excitation_number()).collect()
    }

    pub fn site_occupation(&self) -> Vec<Vec<f64>> {
        self.states.iter().map(|s| s.site_occupation()).collect()
    }
}

/// Integration tolerances for density matrices.
pub fn dense_tolerances() -> Tolerances {
    Tolerances {
        rtol: 1e-10,
        atol: 1e-12,
        ..Tolerances::default()
    }
}

/// Integrate the master equation of `model` from `rho0` at `t = 0`.
pub fn dense_evolve(
    model: &DenseModel,
    rho0: &DenseDensityMatrix,
    t_grid: &[f64],
    tol: &Tolerances,
) -> Result<DenseEvolution> {
    if rho0.sites != model.sites {
        return Err(Error::invalid("rho0", "size does not match the model"));
    }
    let states = integrate(|_, y: &[Complex64], dy| model.rhs(y, dy), 0.0, &rho0.entries, t_grid, tol)?;
    Ok(DenseEvolution {
        times: t_grid.to_vec(),
        states: states
            .into_iter()
            .map(|entries| DenseDensityMatrix {
                sites: model.sites,
                entries,
            })
            .collect(),
    })
}

/// Full-model evolution from the all-ground state.
pub fn dense_lindblad_evolve(
    params: &PhysicalParams,
    positions: &[[f64; 3]],
    t_grid: &[f64],
) -> Result<DenseEvolution> {
    let model = rydberg_lindblad(params, positions)?;
    let rho0 = DenseDensityMatrix::basis(model.sites, 0)?;
    dense_evolve(&model, &rho0, t_grid, &dense_tolerances())
}
