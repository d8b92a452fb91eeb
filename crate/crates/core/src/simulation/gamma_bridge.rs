//! Gamma-subordinator paths on a coarse grid with lazily refined dyadic bridges.
//!
//! Increments between coarse nodes are drawn exactly. Inside a coarse interval the path is
//! refined by recursive midpoint splits (gamma bridge: the left share of an increment is
//! `Beta(a h/2, a h/2)`), each split drawn from a generator keyed by its position in the
//! dyadic tree. Values are therefore consistent however often or in whatever order they are
//! requested, and refining the grid never changes values at coarser nodes. Below the finest
//! level the path is interpolated linearly.

use rand::Rng;
use rand_distr::{Distribution, Gamma};

use crate::numerics::rng::{open_closed_uniform, RngConfig};

const TAG_BRIDGE: u64 = 0xb71d_6e00;

/// Coarse grid in deformed time shared by every gamma factor of a path.
#[derive(Debug, Clone, PartialEq)]
pub struct Grid {
    pub nodes: Vec<f64>,
    /// Dyadic refinement depth of interval `i` (between `nodes[i-1]` and `nodes[i]`); index 0 unused.
    pub depths: Vec<u32>,
}

impl Grid {
    /// Nodes at `0`, every checkpoint, and `end`; intervals are refined until cells are no
    /// wider than `end / cells`.
    pub fn new(end: f64, checkpoints: &[f64], cells: u32) -> Self {
        let mut nodes = vec![0.0, end];
        nodes.extend(checkpoints.iter().copied().filter(|&s| s > 0.0 && s < end));
        nodes.sort_by(f64::total_cmp);
        nodes.dedup();
        let target = end / f64::from(cells.max(1));
        let depths = std::iter::once(0)
            .chain(nodes.windows(2).map(|w| {
                let ratio = (w[1] - w[0]) / target;
                if ratio <= 1.0 {
                    0
                } else {
                    (ratio.log2().ceil() as u32).min(crate::numerics::MAX_DEPTH)
                }
            }))
            .collect();
        Self { nodes, depths }
    }
}

/// `ln X` for `X ~ Gamma(shape, 1)`, accurate for tiny shapes via
/// `X = Y U^{1/shape}`, `Y ~ Gamma(1 + shape, 1)`.
fn log_gamma_variate<R: Rng + ?Sized>(shape: f64, rng: &mut R) -> f64 {
    let y: f64 = Gamma::new(1.0 + shape, 1.0)
        .expect("positive shape")
        .sample(rng);
    y.ln() + open_closed_uniform(rng).ln() / shape
}

/// `Beta(alpha, alpha)` computed in log space so that tiny shapes do not produce `0/0`.
pub(crate) fn symmetric_beta<R: Rng + ?Sized>(alpha: f64, rng: &mut R) -> f64 {
    let lx = log_gamma_variate(alpha, rng);
    let ly = log_gamma_variate(alpha, rng);
    1.0 / (1.0 + (ly - lx).exp())
}

/// One gamma factor's values at the coarse nodes plus what is needed to refine them.
#[derive(Debug, Clone, PartialEq)]
pub struct GammaPath {
    pub factor: usize,
    pub shape: f64,
    pub values: Vec<f64>,
}

/// A dyadic cell `[left, right]` of coarse interval `interval` at `level`, numbered `index`
/// within that level.
#[derive(Debug, Clone, Copy)]
pub(crate) struct Cell {
    pub interval: usize,
    pub level: u32,
    pub index: u64,
    pub left: f64,
    pub right: f64,
}

impl Cell {
    pub fn coarse(grid: &Grid, interval: usize) -> Self {
        Self {
            interval,
            level: 0,
            index: 0,
            left: grid.nodes[interval - 1],
            right: grid.nodes[interval],
        }
    }

    pub fn mid(&self) -> f64 {
        0.5 * (self.left + self.right)
    }

    pub fn child(&self, right_half: bool) -> Self {
        let mid = self.mid();
        Self {
            interval: self.interval,
            level: self.level + 1,
            index: 2 * self.index + u64::from(right_half),
            left: if right_half { mid } else { self.left },
            right: if right_half { self.right } else { mid },
        }
    }
}

impl GammaPath {
    pub fn sample<R: Rng + ?Sized>(
        factor: usize,
        shape: f64,
        rate: f64,
        grid: &Grid,
        rng: &mut R,
    ) -> Self {
        let mut values = Vec::with_capacity(grid.nodes.len());
        values.push(0.0);
        let mut level = 0.0;
        for w in grid.nodes.windows(2) {
            let h = w[1] - w[0];
            let inc: f64 = Gamma::new(shape * h, 1.0 / rate)
                .expect("validated gamma")
                .sample(rng);
            level += inc;
            values.push(level);
        }
        Self {
            factor,
            shape,
            values,
        }
    }

    /// Value at the midpoint of `cell` given the values at its ends.
    pub(crate) fn split(
        &self,
        cell: &Cell,
        left: f64,
        right: f64,
        cfg: &RngConfig,
        path: u64,
    ) -> f64 {
        if right <= left {
            return left;
        }
        let mut rng = cfg.node_rng(
            path,
            &[
                TAG_BRIDGE,
                self.factor as u64,
                cell.interval as u64,
                u64::from(cell.level),
                cell.index,
            ],
        );
        let alpha = 0.5 * self.shape * (cell.right - cell.left);
        left + (right - left) * symmetric_beta(alpha, &mut rng)
    }

    /// `L_s` for deformed time `s` in `[0, grid end]`.
    pub fn value(&self, grid: &Grid, s: f64, cfg: &RngConfig, path: u64) -> f64 {
        let i = grid.nodes.partition_point(|&x| x <= s);
        if i >= grid.nodes.len() {
            return *self.values.last().expect("nonempty grid");
        }
        if grid.nodes[i - 1] == s {
            return self.values[i - 1];
        }
        let mut cell = Cell::coarse(grid, i);
        let (mut vl, mut vr) = (self.values[i - 1], self.values[i]);
        for _ in 0..grid.depths[i] {
            let vm = self.split(&cell, vl, vr, cfg, path);
            let right_half = s >= cell.mid();
            cell = cell.child(right_half);
            if right_half {
                vl = vm;
            } else {
                vr = vm;
            }
            if s == cell.left {
                return vl;
            }
        }
        vl + (vr - vl) * (s - cell.left) / (cell.right - cell.left)
    }
}
