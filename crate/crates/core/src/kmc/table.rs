use rand::Rng;

use super::{Drive, ProtocolSegment, RateKernel};
use crate::model::{flip_rate, interaction_shift, PhysicalParams, SpinConfiguration};

/// Binary sum tree over per-atom total rates.
///
/// Parents are always recomputed from their children, never updated by
/// deltas, so the tree carries no accumulated rounding drift.
#[derive(Debug, Clone)]
pub(crate) struct SumTree {
    size: usize,
    nodes: Vec<f64>,
}

impl SumTree {
    pub(crate) fn new(len: usize) -> Self {
        let size = len.max(1).next_power_of_two();
        Self {
            size,
            nodes: vec![0.0; 2 * size],
        }
    }

    #[inline]
    pub(crate) fn total(&self) -> f64 {
        self.nodes[1]
    }

    #[inline]
    pub(crate) fn set(&mut self, i: usize, value: f64) {
        let mut node = self.size + i;
        self.nodes[node] = value;
        while node > 1 {
            node /= 2;
            self.nodes[node] = self.nodes[2 * node] + self.nodes[2 * node + 1];
        }
    }

    /// Overwrite all leaves and rebuild the internal nodes.
    pub(crate) fn fill(&mut self, values: impl Iterator<Item = f64>) {
        let size = self.size;
        self.nodes[size..].iter_mut().for_each(|v| *v = 0.0);
        for (i, v) in values.enumerate() {
            self.nodes[size + i] = v;
        }
        for node in (1..size).rev() {
            self.nodes[node] = self.nodes[2 * node] + self.nodes[2 * node + 1];
        }
    }

    /// Leaf whose cumulative interval contains `u ∈ [0, total)`.
    #[inline]
    pub(crate) fn find(&self, mut u: f64) -> usize {
        let mut node = 1;
        while node < self.size {
            let left = self.nodes[2 * node];
            if u < left || self.nodes[2 * node + 1] <= 0.0 {
                node *= 2;
            } else {
                u -= left;
                node = 2 * node + 1;
            }
        }
        node - self.size
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ChannelKind {
    /// Driven state change: up for ground atoms, down for excited atoms.
    Flip,
    /// Radiative decay of an excited atom.
    Decay,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Channel {
    pub atom: usize,
    pub kind: ChannelKind,
    pub rate: f64,
}

/// Per-atom transition rates with a cumulative-sum index for event selection.
#[derive(Debug, Clone)]
pub struct RateTable {
    flip: Vec<f64>,
    decay: Vec<f64>,
    tree: SumTree,
}

impl RateTable {
    pub fn new(len: usize) -> Self {
        Self {
            flip: vec![0.0; len],
            decay: vec![0.0; len],
            tree: SumTree::new(len),
        }
    }

    #[inline]
    pub fn total(&self) -> f64 {
        self.tree.total()
    }

    pub fn len(&self) -> usize {
        self.flip.len()
    }

    pub fn is_empty(&self) -> bool {
        self.flip.is_empty()
    }

    #[inline]
    pub fn flip_rate(&self, atom: usize) -> f64 {
        self.flip[atom]
    }

    #[inline]
    pub fn decay_rate(&self, atom: usize) -> f64 {
        self.decay[atom]
    }

    #[inline]
    pub(crate) fn set(&mut self, atom: usize, flip: f64, decay: f64) {
        self.flip[atom] = flip;
        self.decay[atom] = decay;
        self.tree.set(atom, flip + decay);
    }

    pub(crate) fn set_all(&mut self, rates: impl Iterator<Item = (f64, f64)>) {
        for (i, (f, d)) in rates.enumerate() {
            self.flip[i] = f;
            self.decay[i] = d;
        }
        let totals: Vec<f64> = self.flip.iter().zip(&self.decay).map(|(f, d)| f + d).collect();
        self.tree.fill(totals.into_iter());
    }

    /// Non-zero channels ordered by (atom, kind).
    pub fn channels(&self) -> Vec<Channel> {
        let mut out = Vec::new();
        for atom in 0..self.len() {
            if self.flip[atom] > 0.0 {
                out.push(Channel {
                    atom,
                    kind: ChannelKind::Flip,
                    rate: self.flip[atom],
                });
            }
            if self.decay[atom] > 0.0 {
                out.push(Channel {
                    atom,
                    kind: ChannelKind::Decay,
                    rate: self.decay[atom],
                });
            }
        }
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum StepOutcome {
    Event {
        atom: usize,
        kind: ChannelKind,
        waiting_time: f64,
    },
    /// No channel is open; the configuration cannot change.
    Frozen,
}

/// Draw the waiting time and the next channel. Does not modify the table.
pub fn kmc_step<R: Rng + ?Sized>(table: &RateTable, rng: &mut R) -> StepOutcome {
    let total = table.total();
    if !(total > 0.0) {
        return StepOutcome::Frozen;
    }
    // 1 − U lies in (0, 1], so the logarithm is finite.
    let waiting_time = -(1.0 - rng.random::<f64>()).ln() / total;
    let atom = table.tree.find(rng.random::<f64>() * total);
    let (flip, decay) = (table.flip[atom], table.decay[atom]);
    let kind = if decay <= 0.0 || rng.random::<f64>() * (flip + decay) < flip {
        ChannelKind::Flip
    } else {
        ChannelKind::Decay
    };
    StepOutcome::Event {
        atom,
        kind,
        waiting_time,
    }
}

/// Rates of atom `k` given its environment.
///
/// `shift` is the clamped van der Waals shift and `excited_neighbours` the
/// number of excited atoms within the interaction range.
#[inline]
pub(crate) fn atom_rates(
    excited: bool,
    shift: f64,
    excited_neighbours: u32,
    drive: &PhysicalParams,
    segment: Drive,
    kernel: RateKernel,
    spontaneous: bool,
    decay: f64,
) -> (f64, f64) {
    let decay = if excited { decay } else { 0.0 };
    let flip = match segment {
        Drive::Off => 0.0,
        Drive::Excitation => match kernel {
            RateKernel::VanDerWaals => {
                if !spontaneous && excited_neighbours == 0 {
                    0.0
                } else {
                    flip_rate(drive, shift)
                }
            }
            RateKernel::NearestNeighbour => {
                if excited_neighbours > 0 {
                    drive.resonant_rate()
                } else if spontaneous {
                    flip_rate(drive, 0.0)
                } else {
                    0.0
                }
            }
        },
        Drive::Deexcitation => {
            if !excited {
                0.0
            } else {
                match kernel {
                    RateKernel::VanDerWaals => flip_rate(drive, shift),
                    RateKernel::NearestNeighbour => flip_rate(drive, 0.0),
                }
            }
        }
    };
    (flip, decay)
}

/// Build the full rate table for `cfg` from scratch.
///
/// `cutoff` bounds the interaction range; for the nearest-neighbour kernel
/// it should enclose exactly the lattice neighbours.
pub fn build_channels(
    cfg: &SpinConfiguration,
    params: &PhysicalParams,
    segment: &ProtocolSegment,
    kernel: RateKernel,
    spontaneous: bool,
    cutoff: f64,
) -> RateTable {
    let drive = params.with_drive(segment.rabi, segment.detuning);
    let ceiling = params.shift_ceiling();
    let cut2 = cutoff * cutoff;
    let mut table = RateTable::new(cfg.len());
    let rates = (0..cfg.len()).map(|k| {
        let shift = interaction_shift(cfg, params.c6, k, cutoff, ceiling);
        let neighbours = (0..cfg.len())
            .filter(|&q| q != k && cfg.excited[q] && cfg.dist2(k, q) <= cut2)
            .count() as u32;
        atom_rates(
            cfg.excited[k],
            shift,
            neighbours,
            &drive,
            segment.drive,
            kernel,
            spontaneous,
            params.decay,
        )
    });
    table.set_all(rates.collect::<Vec<_>>().into_iter());
    table
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sum_tree_selects_by_cumulative_rate() {
        let mut t = SumTree::new(5);
        t.fill([1.0, 0.0, 2.0, 0.5, 0.0].into_iter());
        assert_eq!(t.total(), 3.5);
        assert_eq!(t.find(0.0), 0);
        assert_eq!(t.find(0.999), 0);
        assert_eq!(t.find(1.0), 2);
        assert_eq!(t.find(2.999), 2);
        assert_eq!(t.find(3.0), 3);
        // Rounding past the end never lands on an empty leaf.
        assert_eq!(t.find(3.5000001), 3);
        t.set(3, 0.0);
        assert_eq!(t.find(3.2), 2);
    }
}
