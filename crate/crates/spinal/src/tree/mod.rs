//! Arena trees for branching-process simulation and truncated observation.
//!
//! Nodes are stored in generation order (all of depth `d` before any of depth
//! `d+1`), children of a node occupy a contiguous id range, and ids increase in
//! birth order. That layout makes depth-window queries a prefix lookup, DFS
//! cheap, and the flat/JSON serializations canonical.
//!
//! A tree simulated "to generation `g`" has true children counts for every
//! node of depth `< g`; nodes at depth `g` exist but are leaves by fiat (their
//! counts were never drawn). Observation at horizon `h <= g` therefore never
//! reads a truncated count.

mod io;
mod sim;

pub use io::NodeRecord;
pub use sim::{simulate_gw, simulate_gw_with_budget, simulate_sst, simulate_sst_with_budget};

use thiserror::Error;

pub type NodeId = u32;

/// Simulation refuses to grow past this many nodes unless told otherwise.
pub const DEFAULT_NODE_BUDGET: u64 = 100_000_000;

#[derive(Debug, Error)]
pub enum TreeError {
    #[error("node budget {budget} exceeded at depth {depth}; lower the horizon or raise the budget")]
    NodeBudgetExceeded { budget: u64, depth: u32 },
    #[error("horizon {h} outside simulated range 1..={generated_to}")]
    HorizonOutOfRange { h: u32, generated_to: u32 },
    #[error("node {0} out of range")]
    NoSuchNode(NodeId),
    #[error("declared maximum children count {requested} is below observed maximum {observed}")]
    NMaxTooSmall { requested: usize, observed: usize },
    #[error("malformed tree data: {0}")]
    Malformed(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NodeKind {
    Normal,
    Special,
}

/// A rooted tree in canonical generation order (struct-of-arrays arena).
#[derive(Debug, Clone, PartialEq)]
pub struct Tree {
    parent: Vec<NodeId>, // parent[0] is a self-loop sentinel for the root
    first_child: Vec<NodeId>,
    child_count: Vec<u32>,
    depth: Vec<u32>,
    special: Vec<bool>,
    generated_to: u32,
}

impl Tree {
    pub fn len(&self) -> usize {
        self.parent.len()
    }

    pub fn is_empty(&self) -> bool {
        self.parent.is_empty()
    }

    pub fn root(&self) -> NodeId {
        0
    }

    pub fn parent_of(&self, v: NodeId) -> Option<NodeId> {
        if v == 0 {
            None
        } else {
            Some(self.parent[v as usize])
        }
    }

    pub fn num_children(&self, v: NodeId) -> u32 {
        self.child_count[v as usize]
    }

    pub fn children_of(&self, v: NodeId) -> std::ops::Range<NodeId> {
        let first = self.first_child[v as usize];
        first..first + self.child_count[v as usize]
    }

    pub fn depth_of(&self, v: NodeId) -> u32 {
        self.depth[v as usize]
    }

    pub fn kind_of(&self, v: NodeId) -> NodeKind {
        if self.special[v as usize] {
            NodeKind::Special
        } else {
            NodeKind::Normal
        }
    }

    pub fn is_special(&self, v: NodeId) -> bool {
        self.special[v as usize]
    }

    /// Deepest generation whose children counts were actually drawn; nodes at
    /// this depth are leaves by fiat.
    pub fn generated_to(&self) -> u32 {
        self.generated_to
    }

    pub fn max_depth(&self) -> u32 {
        self.depth.last().copied().unwrap_or(0)
    }

    /// Number of nodes with depth strictly below `d` (prefix of the id space).
    pub fn nodes_below_depth(&self, d: u32) -> usize {
        self.depth.partition_point(|&x| x < d)
    }

    pub fn contains_special(&self) -> bool {
        self.special.iter().any(|&s| s)
    }

    /// Ground-truth spine: the special node at each depth `0..h`. `None` when
    /// the tree has no complete labeled spine of that length.
    pub fn true_spine(&self, h: u32) -> Option<Vec<NodeId>> {
        let mut spine = Vec::with_capacity(h as usize);
        let mut v = self.root();
        for d in 0..h {
            if !self.is_special(v) || self.depth_of(v) != d {
                return None;
            }
            spine.push(v);
            if d + 1 < h {
                let next = self.children_of(v).find(|&c| self.is_special(c))?;
                v = next;
            }
        }
        Some(spine)
    }

    /// Restricts the tree to nodes of depth `< h`, with their children counts
    /// (children at depth `h` still count toward their parents).
    ///
    /// The horizon must satisfy `1 <= h <= generated_to` so every observed
    /// count is a true draw. The declared children-count bound defaults to the
    /// largest observed count (at least 1) and can be widened with
    /// [`ObservedTree::with_n_max`].
    pub fn observe(&self, h: u32) -> Result<ObservedTree<'_>, TreeError> {
        if h < 1 || h > self.generated_to {
            return Err(TreeError::HorizonOutOfRange {
                h,
                generated_to: self.generated_to,
            });
        }
        let observed_len = self.nodes_below_depth(h);
        let observed_max = (0..observed_len)
            .map(|v| self.child_count[v] as usize)
            .max()
            .unwrap_or(0);
        Ok(ObservedTree {
            tree: self,
            horizon: h,
            observed_len,
            n_max: observed_max.max(1),
        })
    }

    /// Rebuilds a tree from per-node records in canonical order.
    ///
    /// Records must be sorted by id starting at 0, the root must be the only
    /// parentless node, parents must precede children, depths and children
    /// counts must match the parent links, and each node's children must form
    /// a contiguous ascending id range. `generated_to` defaults to the maximum
    /// depth present.
    pub fn from_records(
        records: &[NodeRecord],
        generated_to: Option<u32>,
    ) -> Result<Tree, TreeError> {
        io::build(records, generated_to)
    }

    pub fn records(&self) -> Vec<NodeRecord> {
        (0..self.len() as NodeId)
            .map(|v| NodeRecord {
                id: v,
                parent: self.parent_of(v),
                depth: self.depth_of(v),
                child_count: self.num_children(v),
                kind: self.kind_of(v),
            })
            .collect()
    }

    pub fn write_flat<W: std::io::Write>(&self, w: &mut W) -> Result<(), TreeError> {
        io::write_flat(self, w)
    }

    pub fn read_flat<R: std::io::BufRead>(r: R) -> Result<Tree, TreeError> {
        io::read_flat(r)
    }

    pub fn to_json_string(&self) -> String {
        io::to_json_string(self)
    }

    pub fn from_json_str(s: &str) -> Result<Tree, TreeError> {
        io::from_json_str(s)
    }
}

/// A depth-window view: the observed forest `{v : depth(v) < h}` together
/// with the declared children-count bound used by estimators.
#[derive(Debug, Clone, Copy)]
pub struct ObservedTree<'a> {
    tree: &'a Tree,
    horizon: u32,
    observed_len: usize,
    n_max: usize,
}

impl<'a> ObservedTree<'a> {
    pub fn tree(&self) -> &'a Tree {
        self.tree
    }

    pub fn horizon(&self) -> u32 {
        self.horizon
    }

    /// `|T_h|`: number of observed nodes.
    pub fn num_observed(&self) -> usize {
        self.observed_len
    }

    pub fn is_observed(&self, v: NodeId) -> bool {
        (v as usize) < self.observed_len
    }

    pub fn observed_ids(&self) -> std::ops::Range<NodeId> {
        0..self.observed_len as NodeId
    }

    /// Declared bound on children counts (vector length minus one for every
    /// estimator output).
    pub fn n_max(&self) -> usize {
        self.n_max
    }

    /// Widens the declared children-count bound, e.g. to the true support of
    /// the birth law so estimator vectors align with it.
    pub fn with_n_max(mut self, n_max: usize) -> Result<Self, TreeError> {
        let observed = (0..self.observed_len)
            .map(|v| self.tree.child_count[v] as usize)
            .max()
            .unwrap_or(0);
        if n_max < observed {
            return Err(TreeError::NMaxTooSmall {
                requested: n_max,
                observed,
            });
        }
        self.n_max = n_max.max(1);
        Ok(self)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::prob::Distribution;

    fn sub() -> Distribution {
        Distribution::new(vec![0.35, 0.4, 0.25]).unwrap()
    }

    #[test]
    fn canonical_order_invariants_hold_on_a_simulated_tree() {
        let t = simulate_gw(&sub(), 12, 7).unwrap();
        for v in 1..t.len() as NodeId {
            let p = t.parent_of(v).unwrap();
            assert!(p < v, "parents precede children");
            assert_eq!(t.depth_of(v), t.depth_of(p) + 1);
            assert!(t.depth_of(v) >= t.depth_of(v - 1), "depth-sorted ids");
        }
        for v in 0..t.len() as NodeId {
            for c in t.children_of(v) {
                assert_eq!(t.parent_of(c), Some(v));
            }
        }
    }

    #[test]
    fn observe_window_is_a_prefix() {
        let t = simulate_gw(&sub(), 10, 3).unwrap();
        for h in 1..=10 {
            let o = t.observe(h).unwrap();
            let brute = (0..t.len() as NodeId)
                .filter(|&v| t.depth_of(v) < h)
                .count();
            assert_eq!(o.num_observed(), brute, "h={h}");
        }
        assert!(t.observe(0).is_err());
        assert!(t.observe(11).is_err());
    }

    #[test]
    fn with_n_max_cannot_shrink_below_observed() {
        let t = simulate_gw(&sub(), 6, 11).unwrap();
        let o = t.observe(4).unwrap();
        let observed = o.n_max();
        assert!(o.with_n_max(observed + 3).is_ok());
        if observed > 1 {
            assert!(t.observe(4).unwrap().with_n_max(observed - 1).is_err());
        }
    }
}
