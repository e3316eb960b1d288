//! Atom arrangements: regular lattices and continuum clouds, plus thermal
//! velocities for the ballistic-motion mode.

use rand::Rng;
use rand_distr::{Distribution, Normal, StandardNormal};

use crate::error::{Error, Result};
use crate::model::SpinConfiguration;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Boundary {
    #[default]
    Open,
    Periodic,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum CloudShape {
    /// Gaussian density with the given standard deviation per axis (µm).
    /// Only the first `dimension` axes are populated.
    Gaussian { sigma: [f64; 3] },
    /// Uniform density inside a cylinder along x (µm). Always three-dimensional.
    Cylinder { radius: f64, length: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum GasGeometry {
    Lattice {
        dimension: usize,
        spacing: f64,
        atom_count: usize,
        boundary: Boundary,
    },
    Continuum {
        dimension: usize,
        cloud: CloudShape,
        atom_count: usize,
    },
}

impl GasGeometry {
    /// Open or periodic one-dimensional chain.
    pub fn chain(atom_count: usize, spacing: f64, boundary: Boundary) -> Self {
        GasGeometry::Lattice {
            dimension: 1,
            spacing,
            atom_count,
            boundary,
        }
    }

    pub fn atom_count(&self) -> usize {
        match *self {
            GasGeometry::Lattice { atom_count, .. } | GasGeometry::Continuum { atom_count, .. } => {
                atom_count
            }
        }
    }

    pub fn dimension(&self) -> usize {
        match *self {
            GasGeometry::Lattice { dimension, .. } | GasGeometry::Continuum { dimension, .. } => {
                dimension
            }
        }
    }

    /// Lattice spacing, if this is a lattice.
    pub fn spacing(&self) -> Option<f64> {
        match *self {
            GasGeometry::Lattice { spacing, .. } => Some(spacing),
            GasGeometry::Continuum { .. } => None,
        }
    }

    /// Sites per axis for a lattice.
    fn side(&self) -> Result<usize> {
        let GasGeometry::Lattice {
            dimension,
            atom_count,
            ..
        } = *self
        else {
            return Err(Error::invalid("mode", "side length only defined for lattices"));
        };
        let side = (atom_count as f64).powf(1.0 / dimension as f64).round() as usize;
        if side.pow(dimension as u32) != atom_count {
            return Err(Error::invalid(
                "atom_count",
                format!("{atom_count} is not a perfect {dimension}-th power"),
            ));
        }
        Ok(side)
    }

    pub fn validate(&self) -> Result<()> {
        if !(1..=3).contains(&self.dimension()) {
            return Err(Error::invalid("dimension", "must be 1, 2 or 3"));
        }
        if self.atom_count() == 0 {
            return Err(Error::invalid("atom_count", "must be at least 1"));
        }
        match *self {
            GasGeometry::Lattice { spacing, .. } => {
                if !(spacing > 0.0 && spacing.is_finite()) {
                    return Err(Error::invalid("lattice_spacing", "must be positive"));
                }
                self.side()?;
            }
            GasGeometry::Continuum {
                dimension, cloud, ..
            } => match cloud {
                CloudShape::Gaussian { sigma } => {
                    if sigma[..dimension].iter().any(|s| !(*s > 0.0 && s.is_finite())) {
                        return Err(Error::invalid("cloud_spec", "Gaussian widths must be positive"));
                    }
                }
                CloudShape::Cylinder { radius, length } => {
                    if dimension != 3 {
                        return Err(Error::invalid("dimension", "a cylinder cloud is three-dimensional"));
                    }
                    if !(radius > 0.0 && length > 0.0 && radius.is_finite() && length.is_finite()) {
                        return Err(Error::invalid("cloud_spec", "cylinder radius and length must be positive"));
                    }
                }
            },
        }
        Ok(())
    }

    /// Bounding length along x, used for densities and mean spacings.
    pub fn extent(&self) -> f64 {
        match *self {
            GasGeometry::Lattice {
                spacing, dimension, atom_count, ..
            } => spacing * (atom_count as f64).powf(1.0 / dimension as f64),
            GasGeometry::Continuum { cloud, .. } => match cloud {
                CloudShape::Gaussian { sigma } => 2.0 * sigma[0],
                CloudShape::Cylinder { length, .. } => length,
            },
        }
    }
}

/// Draw atom positions for `g` and, when `mean_speed` is given, isotropic
/// Maxwell–Boltzmann velocities whose mean speed equals `mean_speed`.
/// All atoms start in the ground state.
pub fn sample_geometry<R: Rng + ?Sized>(
    g: &GasGeometry,
    mean_speed: Option<f64>,
    rng: &mut R,
) -> Result<SpinConfiguration> {
    g.validate()?;
    let n = g.atom_count();
    let mut period = None;
    let positions: Vec<[f64; 3]> = match *g {
        GasGeometry::Lattice {
            dimension,
            spacing,
            boundary,
            ..
        } => {
            let side = g.side()?;
            if boundary == Boundary::Periodic {
                let mut p = [f64::INFINITY; 3];
                for axis in p.iter_mut().take(dimension) {
                    *axis = side as f64 * spacing;
                }
                period = Some(p);
            }
            (0..n)
                .map(|i| {
                    let mut pos = [0.0; 3];
                    let mut rem = i;
                    for axis in pos.iter_mut().take(dimension) {
                        *axis = (rem % side) as f64 * spacing;
                        rem /= side;
                    }
                    pos
                })
                .collect()
        }
        GasGeometry::Continuum {
            dimension, cloud, ..
        } => match cloud {
            CloudShape::Gaussian { sigma } => (0..n)
                .map(|_| {
                    let mut pos = [0.0; 3];
                    for (axis, s) in pos.iter_mut().zip(sigma).take(dimension) {
                        let z: f64 = StandardNormal.sample(rng);
                        *axis = s * z;
                    }
                    pos
                })
                .collect(),
            CloudShape::Cylinder { radius, length } => (0..n)
                .map(|_| {
                    let x = (rng.random::<f64>() - 0.5) * length;
                    let r = radius * rng.random::<f64>().sqrt();
                    let phi = std::f64::consts::TAU * rng.random::<f64>();
                    [x, r * phi.cos(), r * phi.sin()]
                })
                .collect(),
        },
    };
    let velocities = match mean_speed {
        Some(v) => Some(thermal_velocities(n, v, rng)?),
        None => None,
    };
    Ok(SpinConfiguration {
        excited: vec![false; n],
        positions,
        velocities,
        period,
    })
}

/// Isotropic Maxwell–Boltzmann velocities with the given mean speed.
///
/// For a 3D Maxwell–Boltzmann gas `⟨|v|⟩ = σ √(8/π)` with σ the
/// per-component standard deviation.
pub fn thermal_velocities<R: Rng + ?Sized>(
    n: usize,
    mean_speed: f64,
    rng: &mut R,
) -> Result<Vec<[f64; 3]>> {
    if !(mean_speed >= 0.0 && mean_speed.is_finite()) {
        return Err(Error::invalid("mean_speed", "must be non-negative"));
    }
    let sigma = mean_speed * (std::f64::consts::PI / 8.0).sqrt();
    if sigma == 0.0 {
        return Ok(vec![[0.0; 3]; n]);
    }
    let normal = Normal::new(0.0, sigma).expect("positive width");
    Ok((0..n)
        .map(|_| [normal.sample(rng), normal.sample(rng), normal.sample(rng)])
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::stream_rng;

    #[test]
    fn chain_positions_are_a_grid() {
        let g = GasGeometry::chain(5, 1.0, Boundary::Open);
        let cfg = sample_geometry(&g, None, &mut stream_rng(1, 0)).unwrap();
        let xs: Vec<f64> = cfg.positions.iter().map(|p| p[0]).collect();
        assert_eq!(xs, vec![0.0, 1.0, 2.0, 3.0, 4.0]);
        assert!(cfg.period.is_none());
        assert!(cfg.velocities.is_none());
    }

    #[test]
    fn periodic_chain_uses_minimum_image() {
        let g = GasGeometry::chain(10, 2.0, Boundary::Periodic);
        let cfg = sample_geometry(&g, None, &mut stream_rng(1, 0)).unwrap();
        assert_eq!(cfg.dist2(0, 9), 4.0);
        assert_eq!(cfg.dist2(0, 5), 100.0);
    }

    #[test]
    fn square_lattice_requires_perfect_power() {
        let g = GasGeometry::Lattice {
            dimension: 2,
            spacing: 1.0,
            atom_count: 10,
            boundary: Boundary::Open,
        };
        assert!(g.validate().is_err());
        let g = GasGeometry::Lattice {
            dimension: 2,
            spacing: 1.0,
            atom_count: 9,
            boundary: Boundary::Open,
        };
        let cfg = sample_geometry(&g, None, &mut stream_rng(1, 0)).unwrap();
        assert_eq!(cfg.positions[4], [1.0, 1.0, 0.0]);
    }

    #[test]
    fn gaussian_cloud_widths() {
        let g = GasGeometry::Continuum {
            dimension: 3,
            cloud: CloudShape::Gaussian { sigma: [1.0; 3] },
            atom_count: 100_000,
        };
        let cfg = sample_geometry(&g, None, &mut stream_rng(11, 0)).unwrap();
        for axis in 0..3 {
            let n = cfg.len() as f64;
            let mean = cfg.positions.iter().map(|p| p[axis]).sum::<f64>() / n;
            let var = cfg.positions.iter().map(|p| (p[axis] - mean).powi(2)).sum::<f64>() / n;
            assert!((var.sqrt() - 1.0).abs() < 0.01, "axis {axis}: {}", var.sqrt());
        }
    }

    #[test]
    fn cylinder_cloud_stays_inside() {
        let g = GasGeometry::Continuum {
            dimension: 3,
            cloud: CloudShape::Cylinder {
                radius: 3.5,
                length: 100.0,
            },
            atom_count: 5000,
        };
        let cfg = sample_geometry(&g, None, &mut stream_rng(2, 0)).unwrap();
        assert!(cfg
            .positions
            .iter()
            .all(|p| p[0].abs() <= 50.0 && (p[1] * p[1] + p[2] * p[2]).sqrt() <= 3.5));
    }

    #[test]
    fn thermal_mean_speed() {
        let v = thermal_velocities(200_000, 0.11, &mut stream_rng(5, 0)).unwrap();
        let mean = v
            .iter()
            .map(|u| (u[0] * u[0] + u[1] * u[1] + u[2] * u[2]).sqrt())
            .sum::<f64>()
            / v.len() as f64;
        assert!((mean - 0.11).abs() < 0.02 * 0.11, "{mean}");
    }

    #[test]
    fn cylinder_must_be_three_dimensional() {
        let g = GasGeometry::Continuum {
            dimension: 1,
            cloud: CloudShape::Cylinder {
                radius: 1.0,
                length: 1.0,
            },
            atom_count: 3,
        };
        assert!(g.validate().is_err());
    }
}
