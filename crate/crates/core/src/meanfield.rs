//! Homogeneous mean-field dynamics.
//!
//! The classical equation for the excitation density `n` is
//!
//! ```text
//! dn/dt = Γ_fac n(1 − 2n) + Γ_spon (1 − n)(1 − 2n) − κ n
//! ```
//!
//! which is a quadratic in `n`; its stationary points are found in closed
//! form and polished with Newton steps.
//!
//! The quantum variant treats the coherently facilitated chain
//! `H = Ω Σ_k (n_{k−1} + n_{k+1}) σx_k` with decay κ and no dephasing in a
//! product-state approximation. Its stationary active branches solve
//! `2n² − n + κ²/(16Ω²) = 0`, which has real roots only for `Ω ≥ κ/√2`.

use crate::error::{Error, Result};
use crate::ode::{self, Tolerances};

/// Tolerance on the stationary residual after polishing.
pub const ROOT_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MeanFieldParams {
    pub rate_fac: f64,
    pub rate_spon: f64,
    pub decay: f64,
}

impl MeanFieldParams {
    pub fn new(rate_fac: f64, rate_spon: f64, decay: f64) -> Result<Self> {
        let p = Self {
            rate_fac,
            rate_spon,
            decay,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("rate_fac", self.rate_fac),
            ("rate_spon", self.rate_spon),
            ("decay", self.decay),
        ] {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(Error::invalid(name, "must be non-negative and finite"));
            }
        }
        if self.rate_fac + self.rate_spon <= 0.0 {
            return Err(Error::invalid("rate_fac", "rate_fac + rate_spon must be positive"));
        }
        Ok(())
    }

    /// Coefficients `(a, b, c)` of the right-hand side `a n² + b n + c`.
    fn coefficients(&self) -> (f64, f64, f64) {
        (
            2.0 * (self.rate_spon - self.rate_fac),
            self.rate_fac - 3.0 * self.rate_spon - self.decay,
            self.rate_spon,
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StationarySolution {
    pub density: f64,
    pub stable: bool,
}

pub fn mf_rhs(n: f64, p: &MeanFieldParams) -> f64 {
    p.rate_fac * n * (1.0 - 2.0 * n) + p.rate_spon * (1.0 - n) * (1.0 - 2.0 * n) - p.decay * n
}

/// Analytic derivative of [`mf_rhs`] with respect to `n`.
pub fn mf_rhs_derivative(n: f64, p: &MeanFieldParams) -> f64 {
    let (a, b, _) = p.coefficients();
    2.0 * a * n + b
}

/// Integrate the classical mean-field equation and return `n` on `t_grid`.
/// Fails if the solution leaves `[0, 1]`; no clamping is applied.
pub fn mf_trajectory(n0: f64, p: &MeanFieldParams, t_grid: &[f64]) -> Result<Vec<f64>> {
    if !(0.0..=1.0).contains(&n0) {
        return Err(Error::invalid("n0", "initial density must lie in [0, 1]"));
    }
    p.validate()?;
    let tol = Tolerances {
        rtol: 1e-9,
        atol: 1e-14,
        ..Tolerances::default()
    };
    let t0 = t_grid.first().copied().unwrap_or(0.0).min(0.0);
    let states = ode::integrate(|_, y: &[f64], dy| dy[0] = mf_rhs(y[0], p), t0, &[n0], t_grid, &tol)?;
    let mut out = Vec::with_capacity(states.len());
    for (t, y) in t_grid.iter().zip(states) {
        let n = y[0];
        if !(-1e-12..=1.0 + 1e-12).contains(&n) {
            return Err(Error::Integrator {
                t: *t,
                step: 0.0,
                steps: 0,
                reason: format!("density {n} left [0, 1]"),
            });
        }
        out.push(n);
    }
    Ok(out)
}

/// All stationary densities in `[0, 1]` with their linear stability,
/// sorted by density.
pub fn mf_stationary(p: &MeanFieldParams) -> Vec<StationarySolution> {
    let (a, b, c) = p.coefficients();
    let mut roots = quadratic_roots(a, b, c);
    for r in roots.iter_mut() {
        *r = polish(*r, p);
    }
    let mut out: Vec<StationarySolution> = roots
        .into_iter()
        .filter(|r| (-ROOT_TOLERANCE..=1.0 + ROOT_TOLERANCE).contains(r))
        .map(|r| {
            let density = r.clamp(0.0, 1.0);
            let slope = mf_rhs_derivative(density, p);
            // A degenerate root is stable from the physical side n > 0 when
            // the curvature is negative.
            let stable = slope < 0.0 || (slope == 0.0 && a <= 0.0);
            StationarySolution { density, stable }
        })
        .collect();
    out.sort_by(|x, y| x.density.total_cmp(&y.density));
    out.dedup_by(|x, y| (x.density - y.density).abs() <= ROOT_TOLERANCE);
    out
}

/// The largest stable stationary density.
pub fn mf_stable_density(p: &MeanFieldParams) -> Option<f64> {
    mf_stationary(p)
        .into_iter()
        .filter(|s| s.stable)
        .map(|s| s.density)
        .reduce(f64::max)
}

/// Real roots of `a x² + b x + c` using the cancellation-free form.
fn quadratic_roots(a: f64, b: f64, c: f64) -> Vec<f64> {
    if a == 0.0 {
        return if b == 0.0 { vec![] } else { vec![-c / b] };
    }
    let disc = b * b - 4.0 * a * c;
    if disc < 0.0 {
        return vec![];
    }
    if disc == 0.0 {
        return vec![-b / (2.0 * a)];
    }
    let q = -0.5 * (b + b.signum() * disc.sqrt());
    let mut roots = vec![q / a];
    if q != 0.0 {
        roots.push(c / q);
    } else {
        roots.push(0.0);
    }
    roots
}

fn polish(mut n: f64, p: &MeanFieldParams) -> f64 {
    for _ in 0..8 {
        let f = mf_rhs(n, p);
        if f.abs() <= ROOT_TOLERANCE * 1e-3 {
            break;
        }
        let d = mf_rhs_derivative(n, p);
        if d == 0.0 {
            break;
        }
        let next = n - f / d;
        if (next - n).abs() <= f64::EPSILON * n.abs() {
            n = next;
            break;
        }
        n = next;
    }
    n
}

/// Right-hand side of the quantum mean-field system in Bloch variables
/// `(x, y, z) = (⟨σx⟩, ⟨σy⟩, ⟨σz⟩)` for the facilitated chain with decay.
pub fn qmf_rhs(state: [f64; 3], rabi: f64, decay: f64) -> [f64; 3] {
    let [x, y, z] = state;
    let n = 0.5 * (1.0 + z);
    [
        -2.0 * rabi * x * y - 0.5 * decay * x,
        2.0 * rabi * x * x - 4.0 * rabi * n * z - 0.5 * decay * y,
        4.0 * rabi * n * y - decay * (1.0 + z),
    ]
}

fn qmf_jacobian(state: [f64; 3], rabi: f64, decay: f64) -> [[f64; 3]; 3] {
    let [x, y, z] = state;
    [
        [-2.0 * rabi * y - 0.5 * decay, -2.0 * rabi * x, 0.0],
        [4.0 * rabi * x, -0.5 * decay, -2.0 * rabi * (1.0 + 2.0 * z)],
        [0.0, 2.0 * rabi * (1.0 + z), 2.0 * rabi * y - decay],
    ]
}

/// Routh–Hurwitz test: all eigenvalues of `j` have negative real part.
fn hurwitz_stable(j: &[[f64; 3]; 3]) -> bool {
    let trace = j[0][0] + j[1][1] + j[2][2];
    let minors = j[0][0] * j[1][1] - j[0][1] * j[1][0] + j[0][0] * j[2][2] - j[0][2] * j[2][0]
        + j[1][1] * j[2][2]
        - j[1][2] * j[2][1];
    let det = j[0][0] * (j[1][1] * j[2][2] - j[1][2] * j[2][1])
        - j[0][1] * (j[1][0] * j[2][2] - j[1][2] * j[2][0])
        + j[0][2] * (j[1][0] * j[2][1] - j[1][1] * j[2][0]);
    let (a1, a2, a3) = (-trace, minors, -det);
    a1 > 0.0 && a3 > 0.0 && a1 * a2 > a3
}

/// Critical drive of the quantum mean-field transition, `κ/√2`.
pub fn qmf_critical_rabi(decay: f64) -> f64 {
    decay / std::f64::consts::SQRT_2
}

/// Active stable branch `n₊ = [1 + √(1 − κ²/(2Ω²))]/4`, present for `Ω ≥ κ/√2`.
pub fn qmf_active_branch(rabi: f64, decay: f64) -> Option<f64> {
    let s = 1.0 - decay * decay / (2.0 * rabi * rabi);
    (rabi > 0.0 && s >= -ROOT_TOLERANCE).then(|| 0.25 * (1.0 + s.max(0.0).sqrt()))
}

/// Stationary densities of the quantum mean-field equations: the absorbing
/// state always, plus `n±` beyond the critical drive. Sorted by density.
pub fn qmf_stationary(rabi: f64, decay: f64) -> Result<Vec<StationarySolution>> {
    if !(decay > 0.0 && decay.is_finite()) {
        return Err(Error::invalid("decay", "must be positive"));
    }
    if !(rabi >= 0.0 && rabi.is_finite()) {
        return Err(Error::invalid("rabi", "must be non-negative"));
    }
    let mut out = vec![StationarySolution {
        density: 0.0,
        stable: hurwitz_stable(&qmf_jacobian([0.0, 0.0, -1.0], rabi, decay)),
    }];
    if rabi == 0.0 {
        return Ok(out);
    }
    let s = 1.0 - decay * decay / (2.0 * rabi * rabi);
    if s < -ROOT_TOLERANCE {
        return Ok(out);
    }
    let root = s.max(0.0).sqrt();
    let y = decay / (2.0 * rabi);
    let branches: &[f64] = if s <= ROOT_TOLERANCE { &[0.0] } else { &[-root, root] };
    for &sgn in branches {
        let n = 0.25 * (1.0 + sgn);
        let stable = hurwitz_stable(&qmf_jacobian([0.0, y, 2.0 * n - 1.0], rabi, decay));
        out.push(StationarySolution { density: n, stable });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn mf(f: f64, s: f64, k: f64) -> MeanFieldParams {
        MeanFieldParams::new(f, s, k).unwrap()
    }

    #[test]
    fn rhs_examples() {
        assert_eq!(mf_rhs(0.0, &mf(1.3, 0.0, 0.7)), 0.0);
        assert_abs_diff_eq!(mf_rhs(0.5, &mf(1.3, 0.4, 0.7)), -0.35, epsilon = 1e-15);
        assert_abs_diff_eq!(mf_rhs(0.25, &mf(1.0, 0.0, 0.5)), 0.0, epsilon = 1e-15);
    }

    #[test]
    fn stationary_examples() {
        let roots = mf_stationary(&mf(0.5, 0.0, 1.0));
        assert_eq!(roots, vec![StationarySolution { density: 0.0, stable: true }]);

        let roots = mf_stationary(&mf(2.0, 0.0, 1.0));
        assert_eq!(roots.len(), 2);
        assert_eq!(roots[0], StationarySolution { density: 0.0, stable: false });
        assert_abs_diff_eq!(roots[1].density, 0.25, epsilon = 1e-15);
        assert!(roots[1].stable);

        let roots = mf_stationary(&mf(1.0, 0.1, 1.0));
        let stable: Vec<_> = roots.iter().filter(|r| r.stable).collect();
        assert_eq!(stable.len(), 1);
        assert_abs_diff_eq!(stable[0].density, 1.0 / 6.0, epsilon = 1e-14);
    }

    #[test]
    fn threshold_root_is_double_zero() {
        let roots = mf_stationary(&mf(1.0, 0.0, 1.0));
        assert_eq!(roots, vec![StationarySolution { density: 0.0, stable: true }]);
    }

    #[test]
    fn spontaneous_rate_removes_absorbing_root() {
        for gs in [1e-9, 1e-4, 0.1, 3.0] {
            for gf in [0.1, 1.0, 5.0] {
                let roots = mf_stationary(&mf(gf, gs, 1.0));
                assert!(roots.iter().all(|r| r.density > 0.0), "{gf} {gs}: {roots:?}");
                assert!(!roots.is_empty());
            }
        }
    }

    #[test]
    fn equal_rates_reduce_to_linear_equation() {
        // Γ_fac = Γ_spon makes the quadratic term vanish.
        let p = mf(1.0, 1.0, 1.0);
        let roots = mf_stationary(&p);
        assert_eq!(roots.len(), 1);
        assert!(mf_rhs(roots[0].density, &p).abs() < 1e-15);
    }

    #[test]
    fn trajectory_examples() {
        let grid: Vec<f64> = (0..=20).map(|i| i as f64).collect();
        let zero = mf_trajectory(0.0, &mf(2.0, 0.0, 1.0), &grid).unwrap();
        assert!(zero.iter().all(|&n| n == 0.0));

        let active = mf_trajectory(0.01, &mf(2.0, 0.0, 1.0), &[0.0, 200.0]).unwrap();
        assert_abs_diff_eq!(active[1], 0.25, epsilon = 1e-6);

        // Pure decay: Γ_fac = Γ_spon = 0 is rejected by validation, so use a
        // vanishing facilitation rate against strong decay for n0 = 1 instead.
        let p = MeanFieldParams {
            rate_fac: 0.0,
            rate_spon: 0.0,
            decay: 0.8,
        };
        let states = ode::integrate(
            |_, y: &[f64], dy| dy[0] = mf_rhs(y[0], &p),
            0.0,
            &[1.0],
            &grid,
            &Tolerances::default(),
        )
        .unwrap();
        for (t, y) in grid.iter().zip(states) {
            assert_abs_diff_eq!(y[0], (-0.8 * t).exp(), epsilon = 1e-8);
        }
    }

    #[test]
    fn trajectory_rejects_out_of_range_start() {
        assert!(mf_trajectory(1.5, &mf(1.0, 0.0, 1.0), &[1.0]).is_err());
    }

    #[test]
    fn quantum_branches() {
        let k = 1.3;
        let below = qmf_stationary(0.5 * k, k).unwrap();
        assert_eq!(below, vec![StationarySolution { density: 0.0, stable: true }]);

        let at = qmf_stationary(qmf_critical_rabi(k), k).unwrap();
        assert_eq!(at.len(), 2);
        assert_abs_diff_eq!(at[1].density, 0.25, epsilon = 1e-12);

        let above = qmf_stationary(k, k).unwrap();
        assert_eq!(above.len(), 3);
        assert!(above[0].stable);
        assert!(!above[1].stable);
        assert!(above[2].stable);
        assert_abs_diff_eq!(above[2].density, (1.0 + 0.5f64.sqrt()) / 4.0, epsilon = 1e-15);
        for r in &above[1..] {
            let n = r.density;
            assert!((2.0 * n * n - n + k * k / (16.0 * k * k)).abs() < 1e-15);
        }
        assert!(qmf_stationary(1.0, 0.0).is_err());
    }

    proptest! {
        #[test]
        fn trajectories_converge_to_stable_roots(
            gf in 0.05f64..5.0,
            gs in 0.0f64..1.0,
            k in 0.05f64..5.0,
            n0 in 0.001f64..0.5,
        ) {
            let p = mf(gf, gs, k);
            let min_rate = [gf, k].into_iter().chain((gs > 0.0).then_some(gs)).fold(f64::INFINITY, f64::min);
            // Near the threshold relaxation is algebraic; skip the critical sliver.
            prop_assume!(gs > 1e-3 || (gf - k).abs() > 0.05);
            let t_end = 100.0 / min_rate;
            let end = mf_trajectory(n0, &p, &[t_end]).unwrap()[0];
            let stable: Vec<f64> = mf_stationary(&p).into_iter().filter(|r| r.stable).map(|r| r.density).collect();
            let dist = stable.iter().map(|r| (r - end).abs()).fold(f64::INFINITY, f64::min);
            prop_assert!(dist < 1e-6, "end {} stable {:?}", end, stable);
        }

        #[test]
        fn stationary_residuals_are_tiny(gf in 0.0f64..10.0, gs in 0.0f64..2.0, k in 0.0f64..10.0) {
            prop_assume!(gf + gs > 1e-6);
            let p = mf(gf, gs, k);
            for r in mf_stationary(&p) {
                prop_assert!(mf_rhs(r.density, &p).abs() < 1e-12);
            }
        }
    }
}
