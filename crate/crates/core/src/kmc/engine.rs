//! Incremental bookkeeping of interaction shifts and rates.

use super::table::{atom_rates, RateTable};
use super::{Drive, ProtocolSegment, RateKernel};
use crate::model::{pair_shift, PhysicalParams, SpinConfiguration};

/// Per-atom neighbour lists within the cutoff, built on first use.
struct NeighbourCache {
    lists: Vec<Option<Vec<(u32, f64)>>>,
}

impl NeighbourCache {
    fn new(n: usize) -> Self {
        Self {
            lists: vec![None; n],
        }
    }

    fn get(&mut self, cfg: &SpinConfiguration, j: usize, c6: f64, cut2: f64, ceiling: f64) -> &[(u32, f64)] {
        self.lists[j].get_or_insert_with(|| {
            (0..cfg.len())
                .filter(|&q| q != j)
                .filter_map(|q| {
                    let d2 = cfg.dist2(j, q);
                    (d2 <= cut2).then(|| (q as u32, pair_shift(c6, d2, ceiling)))
                })
                .collect()
        })
    }
}

pub(crate) struct Engine {
    pub(crate) cfg: SpinConfiguration,
    params: PhysicalParams,
    drive: PhysicalParams,
    segment: Drive,
    kernel: RateKernel,
    spontaneous: bool,
    cutoff: f64,
    ceiling: f64,
    /// Sum of clamped pair shifts from excited neighbours (unclamped total).
    shift: Vec<f64>,
    excited_neighbours: Vec<u32>,
    /// Cached neighbour lists; `None` means scan all atoms (moving atoms).
    neighbours: Option<NeighbourCache>,
    pub(crate) table: RateTable,
    pub(crate) excited_count: usize,
}

impl Engine {
    pub(crate) fn new(
        cfg: SpinConfiguration,
        params: &PhysicalParams,
        kernel: RateKernel,
        spontaneous: bool,
        cutoff: f64,
        static_neighbours: bool,
    ) -> Self {
        let n = cfg.len();
        let ceiling = params.shift_ceiling();
        let neighbours = static_neighbours.then(|| NeighbourCache::new(n));
        let excited_count = cfg.excited_count();
        let mut engine = Self {
            cfg,
            params: *params,
            drive: params.with_drive(0.0, 0.0),
            segment: Drive::Off,
            kernel,
            spontaneous,
            cutoff,
            ceiling,
            shift: vec![0.0; n],
            excited_neighbours: vec![0; n],
            neighbours,
            table: RateTable::new(n),
            excited_count,
        };
        engine.recompute_shifts();
        engine
    }

    pub(crate) fn set_segment(&mut self, seg: &ProtocolSegment) {
        self.segment = seg.drive;
        self.drive = self.params.with_drive(seg.rabi, seg.detuning);
        self.refresh_all();
    }

    #[inline]
    fn rates(&self, k: usize) -> (f64, f64) {
        atom_rates(
            self.cfg.excited[k],
            self.shift[k].min(self.ceiling),
            self.excited_neighbours[k],
            &self.drive,
            self.segment,
            self.kernel,
            self.spontaneous,
            self.params.decay,
        )
    }

    #[inline]
    fn refresh(&mut self, k: usize) {
        let (f, d) = self.rates(k);
        self.table.set(k, f, d);
    }

    fn refresh_all(&mut self) {
        let rates: Vec<(f64, f64)> = (0..self.cfg.len()).map(|k| self.rates(k)).collect();
        self.table.set_all(rates.into_iter());
    }

    /// Rebuild shifts and neighbour counts from the excited atoms.
    fn recompute_shifts(&mut self) {
        self.shift.iter_mut().for_each(|s| *s = 0.0);
        self.excited_neighbours.iter_mut().for_each(|c| *c = 0);
        let excited: Vec<usize> = (0..self.cfg.len()).filter(|&k| self.cfg.excited[k]).collect();
        for j in excited {
            self.for_each_neighbour(j, |engine, q, v| {
                engine.shift[q] += v;
                engine.excited_neighbours[q] += 1;
            });
        }
    }

    fn for_each_neighbour(&mut self, j: usize, mut f: impl FnMut(&mut Self, usize, f64)) {
        let cut2 = self.cutoff * self.cutoff;
        if let Some(mut cache) = self.neighbours.take() {
            for &(q, v) in cache.get(&self.cfg, j, self.params.c6, cut2, self.ceiling) {
                f(self, q as usize, v);
            }
            self.neighbours = Some(cache);
        } else {
            for q in 0..self.cfg.len() {
                if q == j {
                    continue;
                }
                let d2 = self.cfg.dist2(j, q);
                if d2 <= cut2 {
                    let v = pair_shift(self.params.c6, d2, self.ceiling);
                    f(self, q, v);
                }
            }
        }
    }

    /// Toggle atom `j` and update everything that depends on it.
    pub(crate) fn flip(&mut self, j: usize) {
        let now_excited = !self.cfg.excited[j];
        self.cfg.excited[j] = now_excited;
        if now_excited {
            self.excited_count += 1;
        } else {
            self.excited_count -= 1;
        }
        self.for_each_neighbour(j, |engine, q, v| {
            if now_excited {
                engine.shift[q] += v;
                engine.excited_neighbours[q] += 1;
            } else {
                engine.excited_neighbours[q] -= 1;
                if engine.excited_neighbours[q] == 0 {
                    engine.shift[q] = 0.0;
                } else {
                    engine.shift[q] = (engine.shift[q] - v).max(0.0);
                }
            }
            engine.refresh(q);
        });
        self.refresh(j);
    }

    /// Move every atom ballistically by `dt` and rebuild shifts and rates.
    pub(crate) fn advance_motion(&mut self, dt: f64) {
        let Some(vel) = &self.cfg.velocities else {
            return;
        };
        for (p, v) in self.cfg.positions.iter_mut().zip(vel) {
            for axis in 0..3 {
                p[axis] += v[axis] * dt;
            }
        }
        self.recompute_shifts();
        self.refresh_all();
    }

    #[cfg(test)]
    pub(crate) fn shift_of(&self, k: usize) -> f64 {
        self.shift[k].min(self.ceiling)
    }
}
