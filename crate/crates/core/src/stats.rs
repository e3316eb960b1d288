//! Counting statistics and critical-scaling analysis.

use rand::Rng;
use rand_distr::{Binomial, Distribution};

use crate::error::{Error, Result};

/// Excitation numbers of independent shots.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct CountRecord {
    pub shots: Vec<u64>,
    pub label: Option<String>,
}

impl CountRecord {
    pub fn new(shots: Vec<u64>) -> Self {
        Self { shots, label: None }
    }

    pub fn labelled(shots: Vec<u64>, label: impl Into<String>) -> Self {
        Self {
            shots,
            label: Some(label.into()),
        }
    }

    pub fn mean(&self) -> f64 {
        self.shots.iter().map(|&s| s as f64).sum::<f64>() / self.shots.len() as f64
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum VarianceEstimator {
    /// Divide by the number of shots.
    #[default]
    Population,
    /// Divide by the number of shots minus one.
    Sample,
}

/// Mandel `Q = Var(N)/⟨N⟩ − 1` with the population variance.
pub fn mandel_q(r: &CountRecord) -> Result<f64> {
    mandel_q_with(r, VarianceEstimator::Population)
}

pub fn mandel_q_with(r: &CountRecord, estimator: VarianceEstimator) -> Result<f64> {
    let n = r.shots.len();
    if n == 0 {
        return Err(Error::UndefinedStatistic("empty count record".into()));
    }
    let mean = r.mean();
    if !(mean > 0.0) {
        return Err(Error::UndefinedStatistic("Mandel Q of a record with zero mean".into()));
    }
    let ss: f64 = r.shots.iter().map(|&s| (s as f64 - mean).powi(2)).sum();
    let denom = match estimator {
        VarianceEstimator::Population => n as f64,
        VarianceEstimator::Sample => {
            if n < 2 {
                return Err(Error::UndefinedStatistic("sample variance of a single shot".into()));
            }
            (n - 1) as f64
        }
    };
    Ok(ss / denom / mean - 1.0)
}

/// Replace every shot by a Binomial(count, η) draw, modelling finite
/// detection efficiency.
pub fn thin_counts<R: Rng + ?Sized>(r: &CountRecord, eta: f64, rng: &mut R) -> Result<CountRecord> {
    if !(eta > 0.0 && eta <= 1.0) {
        return Err(Error::invalid("eta", "must lie in (0, 1]"));
    }
    let shots = r
        .shots
        .iter()
        .map(|&n| {
            if eta == 1.0 || n == 0 {
                n
            } else {
                Binomial::new(n, eta).expect("valid binomial").sample(rng)
            }
        })
        .collect();
    Ok(CountRecord {
        shots,
        label: r.label.clone(),
    })
}

/// Two-peak model: a shot either stays near `n1` (no seed detected, weight α)
/// or reaches `n2`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BimodalParams {
    pub n1: f64,
    pub n2: f64,
    pub mean_seeds: f64,
    pub eta: f64,
}

impl BimodalParams {
    pub fn new(n1: f64, n2: f64, mean_seeds: f64, eta: f64) -> Result<Self> {
        let b = Self {
            n1,
            n2,
            mean_seeds,
            eta,
        };
        b.validate()?;
        Ok(b)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.n1 >= 0.0 && self.n1.is_finite()) {
            return Err(Error::invalid("n1", "must be non-negative"));
        }
        if !(self.n2 > self.n1 && self.n2.is_finite()) {
            return Err(Error::invalid("n2", "must exceed n1"));
        }
        if !(self.mean_seeds >= 0.0) {
            return Err(Error::invalid("mean_seeds", "must be non-negative"));
        }
        if !(self.eta > 0.0 && self.eta <= 1.0) {
            return Err(Error::invalid("eta", "must lie in (0, 1]"));
        }
        Ok(())
    }

    /// Weight of the low peak, `α = exp(−⟨N_seed⟩/η)`.
    pub fn alpha(&self) -> f64 {
        (-self.mean_seeds / self.eta).exp()
    }
}

/// Mean and Mandel Q of the bimodal model.
pub fn bimodal_predict(b: &BimodalParams) -> Result<(f64, f64)> {
    b.validate()?;
    let alpha = b.alpha();
    let mean = alpha * b.n1 + (1.0 - alpha) * b.n2;
    if !(mean > 0.0) {
        return Err(Error::UndefinedStatistic("bimodal mean is zero".into()));
    }
    let var = alpha * (mean - b.n1).powi(2) + (1.0 - alpha) * (mean - b.n2).powi(2);
    Ok((mean, var / mean - 1.0))
}

/// Growth rate per ground-state atom against the mean spacing of excitations.
#[derive(Debug, Clone, PartialEq)]
pub struct GrowthCurve {
    pub time: Vec<f64>,
    /// `(dN/dt)/N_g` (1/µs).
    pub rate: Vec<f64>,
    /// `a = (V/N)^{1/d}` (µm); infinite while `N = 0`.
    pub spacing: Vec<f64>,
}

/// Default moving-average width for [`growth_rate_curve`].
pub const DEFAULT_SMOOTHING_WINDOW: usize = 5;

/// Smooth `mean_n(t)` with a centred moving average of `window` points
/// (shrinking symmetrically at the edges), differentiate with three-point
/// finite differences and normalise by `n_g`.
pub fn growth_rate_curve(
    times: &[f64],
    mean_n: &[f64],
    n_g: usize,
    window: usize,
    volume: f64,
    dimension: usize,
) -> Result<GrowthCurve> {
    if times.len() != mean_n.len() {
        return Err(Error::Validation("time and count series differ in length".into()));
    }
    if window < 3 || window % 2 == 0 {
        return Err(Error::invalid("window", "must be odd and at least 3"));
    }
    if times.len() < window {
        return Err(Error::Validation(format!(
            "{} points are fewer than the smoothing window {window}",
            times.len()
        )));
    }
    if n_g == 0 {
        return Err(Error::invalid("n_g", "must be positive"));
    }
    if times.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::Validation("times must be strictly increasing".into()));
    }
    let n = times.len();
    let half = window / 2;
    let smooth: Vec<f64> = (0..n)
        .map(|i| {
            let h = half.min(i).min(n - 1 - i);
            mean_n[i - h..=i + h].iter().sum::<f64>() / (2 * h + 1) as f64
        })
        .collect();
    let rate = (0..n)
        .map(|i| {
            let c = i.clamp(1, n - 2);
            three_point_derivative(&times[c - 1..=c + 1], &smooth[c - 1..=c + 1], times[i]) / n_g as f64
        })
        .collect();
    let spacing = smooth
        .iter()
        .map(|&m| {
            if m > 0.0 {
                (volume / m).powf(1.0 / dimension as f64)
            } else {
                f64::INFINITY
            }
        })
        .collect();
    Ok(GrowthCurve {
        time: times.to_vec(),
        rate,
        spacing,
    })
}

/// Derivative at `x` of the parabola through three points.
fn three_point_derivative(t: &[f64], y: &[f64], x: f64) -> f64 {
    let (t0, t1, t2) = (t[0], t[1], t[2]);
    y[0] * (2.0 * x - t1 - t2) / ((t0 - t1) * (t0 - t2))
        + y[1] * (2.0 * x - t0 - t2) / ((t1 - t0) * (t1 - t2))
        + y[2] * (2.0 * x - t0 - t1) / ((t2 - t0) * (t2 - t1))
}

/// Least-squares line `y = intercept + slope·x` with its coefficient of
/// determination.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LineFit {
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
}

pub fn linear_fit(x: &[f64], y: &[f64]) -> Option<LineFit> {
    let n = x.len();
    if n < 2 || n != y.len() {
        return None;
    }
    let mx = x.iter().sum::<f64>() / n as f64;
    let my = y.iter().sum::<f64>() / n as f64;
    let sxx: f64 = x.iter().map(|v| (v - mx).powi(2)).sum();
    let syy: f64 = y.iter().map(|v| (v - my).powi(2)).sum();
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    if !(sxx > 0.0) {
        return None;
    }
    let slope = sxy / sxx;
    let r_squared = if syy > 0.0 { (sxy * sxy / (sxx * syy)).min(1.0) } else { 1.0 };
    Some(LineFit {
        slope,
        intercept: my - slope * mx,
        r_squared,
    })
}

/// Slope of `log y` against `log x` over points with both positive.
pub fn log_log_fit(x: &[f64], y: &[f64]) -> Option<LineFit> {
    let (lx, ly): (Vec<f64>, Vec<f64>) = x
        .iter()
        .zip(y)
        .filter(|(a, b)| **a > 0.0 && **b > 0.0)
        .map(|(a, b)| (a.ln(), b.ln()))
        .unzip();
    linear_fit(&lx, &ly)
}

/// Result of fitting `n ∝ (Ω − Ω_c)^β`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PowerLawFit {
    pub beta: f64,
    pub omega_c: f64,
    /// Coefficient of determination of the log–log fit.
    pub goodness: f64,
    pub fit_window: (f64, f64),
    pub points_used: usize,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PowerLawOptions {
    /// Candidate Ω_c values on the coarse grid.
    pub grid: usize,
    /// Fit window `(Ω_c + lo·range, Ω_c + hi·range)`.
    pub window: (f64, f64),
    pub min_points: usize,
}

impl Default for PowerLawOptions {
    fn default() -> Self {
        Self {
            grid: 400,
            window: (0.02, 0.5),
            min_points: 4,
        }
    }
}

pub fn fit_powerlaw_beta(points: &[(f64, f64)]) -> Result<PowerLawFit> {
    fit_powerlaw_beta_with(points, &PowerLawOptions::default())
}

/// Scan Ω_c over the sampled range, fit `log n` against `log(Ω − Ω_c)` inside
/// the window for each candidate, keep the candidate with the best R² and
/// refine it by golden-section search.
pub fn fit_powerlaw_beta_with(points: &[(f64, f64)], opts: &PowerLawOptions) -> Result<PowerLawFit> {
    if points.iter().any(|(o, n)| !o.is_finite() || !n.is_finite()) {
        return Err(Error::FitFailure("non-finite data point".into()));
    }
    let lo = points.iter().map(|p| p.0).fold(f64::INFINITY, f64::min);
    let hi = points.iter().map(|p| p.0).fold(f64::NEG_INFINITY, f64::max);
    let range = hi - lo;
    if !(range > 0.0) || opts.grid < 2 {
        return Err(Error::FitFailure("degenerate Ω range".into()));
    }
    let eval = |omega_c: f64| fit_at(points, omega_c, range, opts);

    let mut best: Option<(f64, PowerLawFit)> = None;
    let step = range / opts.grid as f64;
    for i in 0..opts.grid {
        let c = lo + i as f64 * step;
        if let Some(f) = eval(c) {
            if best.is_none_or(|(_, b)| f.goodness > b.goodness) {
                best = Some((c, f));
            }
        }
    }
    let Some((c0, mut fit)) = best else {
        return Err(Error::FitFailure(format!(
            "no critical point candidate leaves {} usable points",
            opts.min_points
        )));
    };

    // Golden-section refinement on the neighbouring grid cells.
    let score = |c: f64| eval(c).map_or(f64::NEG_INFINITY, |f| f.goodness);
    let phi = (5f64.sqrt() - 1.0) / 2.0;
    let (mut a, mut b) = ((c0 - step).max(lo), (c0 + step).min(hi));
    let mut x1 = b - phi * (b - a);
    let mut x2 = a + phi * (b - a);
    let (mut f1, mut f2) = (score(x1), score(x2));
    for _ in 0..100 {
        if f1 >= f2 {
            b = x2;
            x2 = x1;
            f2 = f1;
            x1 = b - phi * (b - a);
            f1 = score(x1);
        } else {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = a + phi * (b - a);
            f2 = score(x2);
        }
        if (b - a).abs() < 1e-14 * range.max(1.0) {
            break;
        }
    }
    for c in [x1, x2] {
        if let Some(f) = eval(c) {
            if f.goodness > fit.goodness {
                fit = f;
            }
        }
    }
    Ok(fit)
}

fn fit_at(points: &[(f64, f64)], omega_c: f64, range: f64, opts: &PowerLawOptions) -> Option<PowerLawFit> {
    let w = (omega_c + opts.window.0 * range, omega_c + opts.window.1 * range);
    let (x, y): (Vec<f64>, Vec<f64>) = points
        .iter()
        .filter(|(o, n)| *o > w.0 && *o <= w.1 && *n > 0.0)
        .map(|(o, n)| ((o - omega_c).ln(), n.ln()))
        .unzip();
    if x.len() < opts.min_points {
        return None;
    }
    let line = linear_fit(&x, &y)?;
    Some(PowerLawFit {
        beta: line.slope,
        omega_c,
        goodness: line.r_squared,
        fit_window: w,
        points_used: x.len(),
    })
}

/// One member of a curve family, e.g. mean excitation number against time.
#[derive(Debug, Clone, PartialEq)]
pub struct Curve {
    /// Rabi frequency (incoherent collapse) or any label.
    pub label: f64,
    pub times: Vec<f64>,
    pub mean: Vec<f64>,
    /// Standard error of each mean; may be empty.
    pub std_error: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum CollapseMode {
    /// Rescale time by `Ω²/γ` with Ω taken from each curve's label.
    Incoherent { dephasing: f64 },
    /// Fit `log N` against `log t` for each curve.
    BlockadeScaling,
}

#[derive(Debug, Clone, PartialEq)]
pub enum CollapseResult {
    Deviation {
        /// Largest absolute difference between any pair after rescaling.
        max_deviation: f64,
        /// Largest difference in units of the combined standard error.
        max_in_std_errors: f64,
    },
    Exponents {
        /// Fitted log–log slope per curve.
        slopes: Vec<f64>,
    },
}

/// Measure how well a family of curves collapses.
pub fn collapse_check(curves: &[Curve], mode: CollapseMode) -> Result<CollapseResult> {
    if curves.len() < 2 && matches!(mode, CollapseMode::Incoherent { .. }) {
        return Err(Error::Validation("collapse needs at least two curves".into()));
    }
    for c in curves {
        if c.times.len() != c.mean.len() || (!c.std_error.is_empty() && c.std_error.len() != c.mean.len()) {
            return Err(Error::Validation("curve series differ in length".into()));
        }
    }
    match mode {
        CollapseMode::BlockadeScaling => {
            let slopes = curves
                .iter()
                .map(|c| {
                    log_log_fit(&c.times, &c.mean)
                        .map(|f| f.slope)
                        .ok_or_else(|| Error::FitFailure("too few positive points for a log–log fit".into()))
                })
                .collect::<Result<_>>()?;
            Ok(CollapseResult::Exponents { slopes })
        }
        CollapseMode::Incoherent { dephasing } => {
            let scaled: Vec<Vec<f64>> = curves
                .iter()
                .map(|c| c.times.iter().map(|t| t * c.label * c.label / dephasing).collect())
                .collect();
            let mut max_dev: f64 = 0.0;
            let mut max_se: f64 = 0.0;
            for a in 0..curves.len() {
                for b in 0..curves.len() {
                    if a == b {
                        continue;
                    }
                    for (i, &tau) in scaled[a].iter().enumerate() {
                        let Some((v, se)) = interpolate(&scaled[b], &curves[b].mean, &curves[b].std_error, tau)
                        else {
                            continue;
                        };
                        let d = (curves[a].mean[i] - v).abs();
                        max_dev = max_dev.max(d);
                        let sa = curves[a].std_error.get(i).copied().unwrap_or(0.0);
                        let s = (sa * sa + se * se).sqrt();
                        if d > 0.0 {
                            max_se = max_se.max(if s > 0.0 { d / s } else { f64::INFINITY });
                        }
                    }
                }
            }
            Ok(CollapseResult::Deviation {
                max_deviation: max_dev,
                max_in_std_errors: max_se,
            })
        }
    }
}

/// Linear interpolation of `(y, se)` at `x`; `None` outside the sampled range.
fn interpolate(xs: &[f64], ys: &[f64], se: &[f64], x: f64) -> Option<(f64, f64)> {
    let tol = 1e-12 * x.abs().max(1.0);
    let first = *xs.first()?;
    let last = *xs.last()?;
    if x < first - tol || x > last + tol {
        return None;
    }
    let se_at = |i: usize| se.get(i).copied().unwrap_or(0.0);
    if let Some(i) = xs.iter().position(|&v| (v - x).abs() <= tol) {
        return Some((ys[i], se_at(i)));
    }
    let j = xs.partition_point(|&v| v < x);
    let (x0, x1) = (xs[j - 1], xs[j]);
    let w = (x - x0) / (x1 - x0);
    let y = ys[j - 1] * (1.0 - w) + ys[j] * w;
    let s = ((se_at(j - 1) * (1.0 - w)).powi(2) + (se_at(j) * w).powi(2)).sqrt();
    Some((y, s))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::stream_rng;
    use proptest::prelude::*;
    use rand_distr::Poisson;

    fn poisson_record(lambda: f64, shots: usize, seed: u64) -> CountRecord {
        let mut rng = stream_rng(seed, 0);
        let d = Poisson::new(lambda).unwrap();
        CountRecord::new((0..shots).map(|_| d.sample(&mut rng) as u64).collect())
    }

    #[test]
    fn mandel_q_examples() {
        let q = mandel_q(&poisson_record(20.0, 100_000, 1)).unwrap();
        assert!(q.abs() < 0.02, "{q}");
        assert_eq!(mandel_q(&CountRecord::new(vec![7; 50])).unwrap(), -1.0);
        assert_eq!(mandel_q(&CountRecord::new(vec![0, 0, 40, 40])).unwrap(), 19.0);
        assert!(matches!(
            mandel_q(&CountRecord::new(vec![0, 0])),
            Err(Error::UndefinedStatistic(_))
        ));
    }

    #[test]
    fn sample_variance_toggle() {
        let r = CountRecord::new(vec![0, 0, 40, 40]);
        let q = mandel_q_with(&r, VarianceEstimator::Sample).unwrap();
        assert!((q - (1600.0 / 3.0 / 20.0 - 1.0)).abs() < 1e-12);
    }

    #[test]
    fn thinning_examples() {
        let r = poisson_record(20.0, 1000, 2);
        let mut rng = stream_rng(3, 0);
        assert_eq!(thin_counts(&r, 1.0, &mut rng).unwrap(), r);

        let big = poisson_record(20.0, 100_000, 4);
        let thinned = thin_counts(&big, 0.4, &mut rng).unwrap();
        let q = mandel_q(&thinned).unwrap();
        assert!(q.abs() < 0.02, "{q}");
        assert!((thinned.mean() - 8.0).abs() < 0.05);
    }

    #[test]
    fn thinning_scales_q_by_eta() {
        // Bimodal record with Q far from zero.
        let shots: Vec<u64> = (0..100_000).map(|i| if i % 2 == 0 { 0 } else { 40 }).collect();
        let r = CountRecord::new(shots);
        let eta = 0.4;
        let q = mandel_q(&r).unwrap();
        let thinned = thin_counts(&r, eta, &mut stream_rng(9, 0)).unwrap();
        let qt = mandel_q(&thinned).unwrap();
        // Q_thin = ηQ; the spread of the estimator is below 0.06 at 10⁵ shots.
        assert!((qt - eta * q).abs() < 3.0 * 0.06, "{qt} vs {}", eta * q);
    }

    #[test]
    fn bimodal_examples() {
        let b = BimodalParams::new(3.0, 40.0, 1e6, 0.4).unwrap();
        let (m, q) = bimodal_predict(&b).unwrap();
        assert_eq!(m, 40.0);
        assert_eq!(q, -1.0);

        let b = BimodalParams::new(5.0, 40.0, 0.0, 0.4).unwrap();
        assert_eq!(bimodal_predict(&b).unwrap(), (5.0, -1.0));

        let b = BimodalParams::new(0.0, 40.0, 0.4 * 2f64.ln(), 0.4).unwrap();
        let (m, q) = bimodal_predict(&b).unwrap();
        assert!((m - 20.0).abs() < 1e-12);
        assert!((q - 19.0).abs() < 1e-12);
        let direct = mandel_q(&CountRecord::new(vec![0, 0, 40, 40])).unwrap();
        assert!((q - direct).abs() < 1e-12);

        let b = BimodalParams::new(0.0, 40.0, 0.0, 0.4).unwrap();
        assert!(matches!(bimodal_predict(&b), Err(Error::UndefinedStatistic(_))));
    }

    #[test]
    fn growth_rate_of_linear_series() {
        let t: Vec<f64> = (0..20).map(|i| i as f64 * 0.5).collect();
        let n: Vec<f64> = t.iter().map(|x| 3.0 * x).collect();
        let g = growth_rate_curve(&t, &n, 10, 5, 1.0, 3).unwrap();
        for r in g.rate {
            assert!((r - 0.3).abs() < 1e-12);
        }
    }

    #[test]
    fn growth_rate_of_saturating_series() {
        let gamma = 0.7;
        let ng = 100usize;
        let t: Vec<f64> = (0..2000).map(|i| i as f64 * 1e-3).collect();
        let n: Vec<f64> = t.iter().map(|x| ng as f64 * (1.0 - (-gamma * x).exp())).collect();
        let g = growth_rate_curve(&t, &n, ng, 5, 1.0, 3).unwrap();
        assert!((g.rate[0] - gamma).abs() < 0.02 * gamma, "{}", g.rate[0]);
        assert!(g.spacing[0].is_infinite());
        assert!((g.spacing[1000] - (1.0 / n[1000]).cbrt()).abs() < 1e-3);
    }

    #[test]
    fn growth_rate_rejects_short_series() {
        let err = growth_rate_curve(&[0.0, 1.0, 2.0], &[0.0, 1.0, 2.0], 1, 5, 1.0, 1).unwrap_err();
        assert!(matches!(err, Error::Validation(_)));
    }

    #[test]
    fn powerlaw_fit_exact_linear() {
        let pts: Vec<(f64, f64)> = (0..40)
            .map(|i| {
                let o = i as f64 * 0.01;
                (o, (o - 0.1).max(0.0))
            })
            .collect();
        let f = fit_powerlaw_beta(&pts).unwrap();
        assert!((f.beta - 1.0).abs() < 1e-6, "{f:?}");
        assert!((f.omega_c - 0.1).abs() < 1e-6);
    }

    #[test]
    fn powerlaw_fit_noisy_synthetic() {
        let mut rng = stream_rng(21, 0);
        let pts: Vec<(f64, f64)> = (0..60)
            .map(|i| {
                let o = i as f64 * 0.005;
                let n = if o > 0.08 { 2.0 * (o - 0.08).powf(0.27) } else { 0.0 };
                let z: f64 = rand_distr::StandardNormal.sample(&mut rng);
                (o, n * (1.0 + 0.01 * z))
            })
            .collect();
        let f = fit_powerlaw_beta(&pts).unwrap();
        assert!((f.beta - 0.27).abs() < 0.03, "{f:?}");
        assert!((f.omega_c - 0.08).abs() < 0.005, "{f:?}");
        assert!((0.0..=1.0).contains(&f.goodness));
    }

    #[test]
    fn powerlaw_fit_needs_points() {
        let pts = [(0.0, 1.0), (1.0, 2.0), (2.0, 3.0)];
        assert!(matches!(fit_powerlaw_beta(&pts), Err(Error::FitFailure(_))));
    }

    #[test]
    fn collapse_of_identical_curves() {
        let c = Curve {
            label: 1.0,
            times: vec![0.0, 1.0, 2.0],
            mean: vec![0.0, 1.0, 1.5],
            std_error: vec![],
        };
        let r = collapse_check(&[c.clone(), c], CollapseMode::Incoherent { dephasing: 1.0 }).unwrap();
        assert_eq!(
            r,
            CollapseResult::Deviation {
                max_deviation: 0.0,
                max_in_std_errors: 0.0
            }
        );
    }

    #[test]
    fn collapse_rescales_time() {
        let f = |x: f64| 1.0 - (-x).exp();
        let a = Curve {
            label: 2.0,
            times: (0..10).map(|i| i as f64 * 0.1).collect(),
            mean: (0..10).map(|i| f(i as f64 * 0.1 * 4.0)).collect(),
            std_error: vec![],
        };
        let b = Curve {
            label: 1.0,
            times: (0..10).map(|i| i as f64 * 0.4).collect(),
            mean: (0..10).map(|i| f(i as f64 * 0.4)).collect(),
            std_error: vec![],
        };
        let CollapseResult::Deviation { max_deviation, .. } =
            collapse_check(&[a, b], CollapseMode::Incoherent { dephasing: 1.0 }).unwrap()
        else {
            panic!()
        };
        assert!(max_deviation < 1e-12);
    }

    #[test]
    fn blockade_scaling_slope() {
        let c = Curve {
            label: 0.0,
            times: (1..50).map(|i| i as f64).collect(),
            mean: (1..50).map(|i| 3.0 * (i as f64).powf(1.0 / 13.0)).collect(),
            std_error: vec![],
        };
        let CollapseResult::Exponents { slopes } = collapse_check(&[c], CollapseMode::BlockadeScaling).unwrap()
        else {
            panic!()
        };
        assert!((slopes[0] - 1.0 / 13.0).abs() < 1e-12);
    }

    proptest! {
        #[test]
        fn mandel_q_reorder_and_duplicate(shots in prop::collection::vec(0u64..100, 2..60), rot in 0usize..60) {
            prop_assume!(shots.iter().any(|&s| s > 0));
            let r = CountRecord::new(shots.clone());
            let q = mandel_q(&r).unwrap();
            let mut rotated = shots.clone();
            let k = rot % rotated.len();
            rotated.rotate_left(k);
            rotated.reverse();
            let q2 = mandel_q(&CountRecord::new(rotated)).unwrap();
            let mut doubled = shots.clone();
            doubled.extend_from_slice(&shots);
            let q3 = mandel_q(&CountRecord::new(doubled)).unwrap();
            prop_assert!((q - q2).abs() <= 1e-9 * q.abs().max(1.0));
            prop_assert!((q - q3).abs() <= 1e-9 * q.abs().max(1.0));
        }

        #[test]
        fn bimodal_matches_two_point_distribution(
            n1 in 0.0f64..20.0, gap in 0.5f64..50.0, seeds in 0.0f64..5.0, eta in 0.05f64..1.0
        ) {
            let b = BimodalParams::new(n1, n1 + gap, seeds, eta).unwrap();
            let (mean, q) = bimodal_predict(&b).unwrap();
            let a = b.alpha();
            let m = a * b.n1 + (1.0 - a) * b.n2;
            let second = a * b.n1 * b.n1 + (1.0 - a) * b.n2 * b.n2;
            let q_direct = (second - m * m) / m - 1.0;
            prop_assert!((mean - m).abs() < 1e-12 * m.max(1.0));
            prop_assert!((q - q_direct).abs() < 1e-9 * q.abs().max(1.0));
        }

        #[test]
        fn thinning_scales_q(
            weights in prop::collection::vec(0u64..60, 3..8), eta in 0.2f64..0.9, seed in 0u64..1000
        ) {
            prop_assume!(weights.iter().any(|&w| w > 0));
            // Large record built by cycling through the support values.
            let shots: Vec<u64> = (0..20_000).map(|i| weights[i % weights.len()]).collect();
            let r = CountRecord::new(shots);
            let q = mandel_q(&r).unwrap();
            let qt = mandel_q(&thin_counts(&r, eta, &mut stream_rng(seed, 1)).unwrap()).unwrap();
            // Delta-method bound on the estimator spread, generous for these supports.
            let mean = r.mean();
            let sigma = (2.0 / 20_000f64).sqrt() * (1.0 + q.abs() + 60.0 / mean.max(1.0));
            prop_assert!((qt - eta * q).abs() < 3.0 * sigma, "{} vs {}", qt, eta * q);
        }

        #[test]
        fn powerlaw_fit_scale_equivariant(c in 0.01f64..100.0) {
            let pts: Vec<(f64, f64)> = (0..30)
                .map(|i| {
                    let o = 0.1 + i as f64 * 0.01;
                    (o, (o - 0.12).max(0.0).powf(0.4) * (1.0 + 0.01 * ((i * 7 % 5) as f64 - 2.0)))
                })
                .collect();
            let scaled: Vec<(f64, f64)> = pts.iter().map(|(o, n)| (*o, n * c)).collect();
            let a = fit_powerlaw_beta(&pts).unwrap();
            let b = fit_powerlaw_beta(&scaled).unwrap();
            prop_assert!((a.beta - b.beta).abs() < 1e-6);
            prop_assert!((a.omega_c - b.omega_c).abs() < 1e-6);
        }

        #[test]
        fn growth_rate_commutes_with_time_shift(shift in -50.0f64..50.0) {
            let t: Vec<f64> = (0..15).map(|i| i as f64 * 0.3).collect();
            let n: Vec<f64> = t.iter().map(|x| 10.0 * (1.0 - (-x).exp()) + (x * 3.0).sin()).collect();
            let ts: Vec<f64> = t.iter().map(|x| x + shift).collect();
            let a = growth_rate_curve(&t, &n, 7, 5, 100.0, 3).unwrap();
            let b = growth_rate_curve(&ts, &n, 7, 5, 100.0, 3).unwrap();
            for (x, y) in a.rate.iter().zip(&b.rate) {
                prop_assert!((x - y).abs() < 1e-6 * x.abs().max(1.0));
            }
            prop_assert_eq!(a.spacing, b.spacing);
        }
    }
}
