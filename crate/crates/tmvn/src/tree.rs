//! Uniform binary partition of the variable indices, with node roles and
//! (for the exponential family) intervals, split points and basis centers.

use crate::error::{domain, Result};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

/// Position of a node relative to the first and last variable.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum NodeRole {
    Root,
    LeftBoundary,
    RightBoundary,
    Interior,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TreeNode {
    pub id: usize,
    pub level: usize,
    /// Inclusive 0-based index range.
    pub lo: usize,
    pub hi: usize,
    pub role: NodeRole,
    pub children: Option<(usize, usize)>,
    pub parent: Option<usize>,
    /// `[a_z, b_z]`, set by [`PartitionTree::assign_geometry`].
    pub interval: Option<(f64, f64)>,
    pub split_point: Option<f64>,
    pub basis_center: Option<f64>,
}

impl TreeNode {
    pub fn is_leaf(&self) -> bool {
        self.children.is_none()
    }

    pub fn len(&self) -> usize {
        self.hi - self.lo + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Interval, panicking if geometry was never assigned.
    pub fn ab(&self) -> (f64, f64) {
        self.interval.expect("geometry not assigned")
    }
}

/// Complete binary tree in breadth-first order: node `i` has children
/// `2i+1`, `2i+2`.
#[derive(Debug, Clone)]
pub struct PartitionTree {
    pub n: usize,
    pub depth: usize,
    pub nodes: Vec<TreeNode>,
}

/// Sorted locations and the decay length used to rescale them.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ZLocations {
    pub z: Vec<f64>,
    pub beta: f64,
    pub b_z: f64,
}

impl ZLocations {
    pub fn new(mut z: Vec<f64>, beta: f64, b_z: f64) -> Result<Self> {
        if !(beta > 0.0) || !beta.is_finite() {
            return domain(format!("beta must be positive, got {beta}"));
        }
        if z.iter().any(|v| !v.is_finite() || *v < 0.0 || *v > b_z) {
            return domain(format!("z-locations must lie in [0, {b_z}]"));
        }
        z.sort_by(f64::total_cmp);
        Ok(ZLocations { z, beta, b_z })
    }

    /// `n` uniform draws on `[0, b_z]` from a ChaCha8 stream seeded with `seed`.
    pub fn seeded_uniform(n: usize, seed: u64, b_z: f64, beta: f64) -> Result<Self> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let z = (0..n).map(|_| rng.random::<f64>() * b_z).collect();
        Self::new(z, beta, b_z)
    }

    /// Midpoints of `n` equal cells of `[0, b_z]`.
    pub fn evenly_spaced(n: usize, b_z: f64, beta: f64) -> Result<Self> {
        let z = (0..n).map(|j| (j as f64 + 0.5) * b_z / n as f64).collect();
        Self::new(z, beta, b_z)
    }

    /// Locations and domain length divided by β.
    pub fn scaled(&self) -> (Vec<f64>, f64) {
        (self.z.iter().map(|v| v / self.beta).collect(), self.b_z / self.beta)
    }
}

fn role_of(lo: usize, hi: usize, n: usize) -> NodeRole {
    match (lo == 0, hi == n - 1) {
        (true, true) => NodeRole::Root,
        (true, false) => NodeRole::LeftBoundary,
        (false, true) => NodeRole::RightBoundary,
        (false, false) => NodeRole::Interior,
    }
}

impl PartitionTree {
    /// Tree over `n = 2^L` indices with `2n - 1` nodes.
    pub fn build(n: usize) -> Result<Self> {
        if n < 2 || !n.is_power_of_two() {
            return domain(format!("N must be a power of two and at least 2, got {n}"));
        }
        let depth = n.trailing_zeros() as usize;
        let mut nodes = Vec::with_capacity(2 * n - 1);
        for level in 0..=depth {
            let count = 1usize << level;
            let width = n >> level;
            for j in 0..count {
                let id = nodes.len();
                let (lo, hi) = (j * width, (j + 1) * width - 1);
                let children = (level < depth).then(|| (2 * id + 1, 2 * id + 2));
                let parent = (id > 0).then(|| (id - 1) / 2);
                nodes.push(TreeNode {
                    id,
                    level,
                    lo,
                    hi,
                    role: role_of(lo, hi, n),
                    children,
                    parent,
                    interval: None,
                    split_point: None,
                    basis_center: None,
                });
            }
        }
        Ok(PartitionTree { n, depth, nodes })
    }

    pub fn root(&self) -> &TreeNode {
        &self.nodes[0]
    }

    pub fn node(&self, id: usize) -> &TreeNode {
        &self.nodes[id]
    }

    /// Leaf node owning variable `k`.
    pub fn leaf_of(&self, k: usize) -> &TreeNode {
        &self.nodes[self.n - 1 + k]
    }

    /// Ids of all nodes on `level`.
    pub fn level_ids(&self, level: usize) -> std::ops::Range<usize> {
        ((1 << level) - 1)..((1 << (level + 1)) - 1)
    }

    /// Sets intervals, split points and basis centers from sorted, already
    /// β-scaled locations on `[0, b_z]`.
    pub fn assign_geometry(&mut self, z: &[f64], b_z: f64) -> Result<()> {
        if z.len() != self.n {
            return domain(format!("expected {} z-locations, got {}", self.n, z.len()));
        }
        if z.windows(2).any(|w| w[1] < w[0]) {
            return domain("z-locations must be sorted");
        }
        self.nodes[0].interval = Some((0.0, b_z));
        for id in 0..self.nodes.len() {
            let (a, b) = self.nodes[id].ab();
            match self.nodes[id].children {
                Some((l, r)) => {
                    let left_max = z[self.nodes[l].hi];
                    let right_min = z[self.nodes[r].lo];
                    if !(left_max < right_min) {
                        return domain(format!(
                            "duplicate z-locations at {left_max} prevent separating node {id}"
                        ));
                    }
                    let c = 0.5 * (left_max + right_min);
                    let node = &mut self.nodes[id];
                    node.split_point = Some(c);
                    node.basis_center = Some(c);
                    self.nodes[l].interval = Some((a, c));
                    self.nodes[r].interval = Some((c, b));
                }
                None => {
                    self.nodes[id].basis_center = Some(0.5 * (a + b));
                }
            }
        }
        Ok(())
    }
}
