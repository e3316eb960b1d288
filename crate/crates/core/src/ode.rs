//! Adaptive Dormand–Prince 5(4) integration with output on a fixed grid.

use std::ops::{Add, Mul};

use num_complex::Complex64;

use crate::error::{Error, Result};

/// Element type of an integrated state vector.
pub trait OdeValue: Copy + Default + Add<Output = Self> + Mul<f64, Output = Self> {
    fn magnitude(self) -> f64;
}

impl OdeValue for f64 {
    #[inline]
    fn magnitude(self) -> f64 {
        self.abs()
    }
}

impl OdeValue for Complex64 {
    #[inline]
    fn magnitude(self) -> f64 {
        self.norm()
    }
}

#[derive(Debug, Clone, Copy)]
pub struct Tolerances {
    pub rtol: f64,
    pub atol: f64,
    pub max_steps: usize,
    /// Initial step; chosen from the grid spacing when `None`.
    pub first_step: Option<f64>,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            rtol: 1e-9,
            atol: 1e-12,
            max_steps: 10_000_000,
            first_step: None,
        }
    }
}

// Dormand–Prince coefficients.
const C2: f64 = 1.0 / 5.0;
const C3: f64 = 3.0 / 10.0;
const C4: f64 = 4.0 / 5.0;
const C5: f64 = 8.0 / 9.0;
const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const B1: f64 = 35.0 / 384.0;
const B3: f64 = 500.0 / 1113.0;
const B4: f64 = 125.0 / 192.0;
const B5: f64 = -2187.0 / 6784.0;
const B6: f64 = 11.0 / 84.0;
// Difference between 5th- and 4th-order weights.
const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;

/// Integrate `dy/dt = f(t, y)` from `t0` and return the state at every time
/// in `grid` (non-decreasing, all `>= t0`). `rhs(t, y, dy)` writes into `dy`.
pub fn integrate<T, F>(
    mut rhs: F,
    t0: f64,
    y0: &[T],
    grid: &[f64],
    tol: &Tolerances,
) -> Result<Vec<Vec<T>>>
where
    T: OdeValue,
    F: FnMut(f64, &[T], &mut [T]),
{
    let n = y0.len();
    let mut y = y0.to_vec();
    let mut t = t0;
    let mut out = Vec::with_capacity(grid.len());
    let span = grid.last().map_or(0.0, |&e| e - t0);
    let mut h = tol
        .first_step
        .unwrap_or_else(|| (span / 100.0).max(1e-12))
        .max(f64::MIN_POSITIVE);

    let mut k: Vec<Vec<T>> = (0..7).map(|_| vec![T::default(); n]).collect();
    let mut tmp = vec![T::default(); n];
    let mut y_new = vec![T::default(); n];
    let mut steps = 0usize;
    let mut have_k1 = false;

    for &target in grid {
        if target < t {
            return Err(Error::invalid("grid", "output times must be non-decreasing and >= t0"));
        }
        while t < target {
            if steps >= tol.max_steps {
                return Err(Error::Integrator {
                    t,
                    step: h,
                    steps,
                    reason: "maximum number of steps exceeded".into(),
                });
            }
            let last = t + h >= target;
            let step = if last { target - t } else { h };
            if step <= f64::EPSILON * t.abs().max(1.0) * 4.0 && !last {
                return Err(Error::Integrator {
                    t,
                    step,
                    steps,
                    reason: "step size underflow".into(),
                });
            }
            if !have_k1 {
                rhs(t, &y, &mut k[0]);
                have_k1 = true;
            }
            stage(&y, &k, &[A21], step, &mut tmp);
            rhs(t + C2 * step, &tmp, &mut k[1]);
            stage(&y, &k, &[A31, A32], step, &mut tmp);
            rhs(t + C3 * step, &tmp, &mut k[2]);
            stage(&y, &k, &[A41, A42, A43], step, &mut tmp);
            rhs(t + C4 * step, &tmp, &mut k[3]);
            stage(&y, &k, &[A51, A52, A53, A54], step, &mut tmp);
            rhs(t + C5 * step, &tmp, &mut k[4]);
            stage(&y, &k, &[A61, A62, A63, A64, A65], step, &mut tmp);
            rhs(t + step, &tmp, &mut k[5]);
            stage(&y, &k, &[B1, 0.0, B3, B4, B5, B6], step, &mut y_new);
            rhs(t + step, &y_new, &mut k[6]);

            let mut err_sq = 0.0;
            for i in 0..n {
                let e = (k[0][i] * E1
                    + k[2][i] * E3
                    + k[3][i] * E4
                    + k[4][i] * E5
                    + k[5][i] * E6
                    + k[6][i] * E7)
                    * step;
                let scale = tol.atol + tol.rtol * y[i].magnitude().max(y_new[i].magnitude());
                let r = e.magnitude() / scale;
                err_sq += r * r;
            }
            let err = if n == 0 { 0.0 } else { (err_sq / n as f64).sqrt() };
            steps += 1;
            if !err.is_finite() {
                if step <= f64::EPSILON * t.abs().max(1.0) * 4.0 {
                    return Err(Error::Integrator {
                        t,
                        step,
                        steps,
                        reason: "non-finite state".into(),
                    });
                }
                h = step * 0.2;
                have_k1 = true;
                continue;
            }
            let factor = if err == 0.0 {
                5.0
            } else {
                (0.9 * err.powf(-0.2)).clamp(0.2, 5.0)
            };
            if err <= 1.0 {
                t = if last { target } else { t + step };
                std::mem::swap(&mut y, &mut y_new);
                k.swap(0, 6);
                if !last || factor < 1.0 {
                    h = step * factor;
                }
            } else {
                h = step * factor.min(1.0);
            }
        }
        out.push(y.clone());
    }
    Ok(out)
}

#[inline]
fn stage<T: OdeValue>(y: &[T], k: &[Vec<T>], a: &[f64], h: f64, out: &mut [T]) {
    for i in 0..y.len() {
        let mut acc = T::default();
        for (j, &aj) in a.iter().enumerate() {
            if aj != 0.0 {
                acc = acc + k[j][i] * aj;
            }
        }
        out[i] = y[i] + acc * h;
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exponential_decay_to_tight_tolerance() {
        let grid: Vec<f64> = (0..=10).map(|i| i as f64 * 0.5).collect();
        let out = integrate(|_, y: &[f64], dy| dy[0] = -1.3 * y[0], 0.0, &[1.0], &grid, &Tolerances::default())
            .unwrap();
        for (t, y) in grid.iter().zip(&out) {
            assert!((y[0] - (-1.3 * t).exp()).abs() < 1e-9);
        }
    }

    #[test]
    fn harmonic_oscillator_complex() {
        let grid = [0.0, 1.0, 2.0, 10.0];
        let i = Complex64::new(0.0, 1.0);
        let out = integrate(
            |_, y: &[Complex64], dy| dy[0] = -i * y[0] * 2.0,
            0.0,
            &[Complex64::new(1.0, 0.0)],
            &grid,
            &Tolerances::default(),
        )
        .unwrap();
        for (t, y) in grid.iter().zip(&out) {
            let exact = (-i * 2.0 * *t).exp();
            assert!((y[0] - exact).norm() < 1e-8);
        }
    }

    #[test]
    fn reports_step_budget_exhaustion() {
        let tol = Tolerances {
            max_steps: 3,
            ..Tolerances::default()
        };
        let err = integrate(|_, y: &[f64], dy| dy[0] = -50.0 * y[0], 0.0, &[1.0], &[100.0], &tol).unwrap_err();
        assert!(matches!(err, Error::Integrator { steps: 3, .. }));
    }
}
