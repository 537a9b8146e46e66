//! Algorithmic spine identification on a depth-truncated observation.
//!
//! Working only with the observed window of an unlabeled tree, three facts pin
//! node types down:
//!
//! * the root is special by convention (the observation model starts the
//!   spine there);
//! * a node whose observed subtree dies strictly before the horizon cannot be
//!   special, because the special lineage never goes extinct;
//! * below a known special node whose children are all observed, if exactly
//!   one child's subtree reaches the horizon, that child must be the special
//!   one.
//!
//! Everything else stays `Unknown`. The identified special nodes always form
//! a path from the root; its length is the identified prefix `K_h`. The
//! candidate set for the remaining ambiguity is the family of root-to-depth
//! `h-1` branches whose leaf was not ruled out, i.e. whose leaf still has at
//! least one child.

use std::io::Write;

use thiserror::Error;

use crate::prob::EmpiricalCounts;
use crate::tree::{NodeId, ObservedTree, Tree, TreeError};

#[derive(Debug, Error)]
pub enum SpineError {
    #[error("node {0} is not observed at this horizon")]
    NotObserved(NodeId),
    #[error(transparent)]
    Tree(#[from] TreeError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// What the observation alone proves about a node's type.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NodeStatus {
    IdentifiedNormal,
    IdentifiedSpecial,
    Unknown,
}

impl NodeStatus {
    pub fn as_str(self) -> &'static str {
        match self {
            NodeStatus::IdentifiedNormal => "normal",
            NodeStatus::IdentifiedSpecial => "special",
            NodeStatus::Unknown => "unknown",
        }
    }
}

/// A still-possible spine: the branch ending at `leaf` (depth `h-1`), carrying
/// the children counts of its `h` nodes as an exact empirical measure.
#[derive(Debug, Clone, PartialEq)]
pub struct Candidate {
    pub leaf: NodeId,
    pub counts: EmpiricalCounts,
}

impl Candidate {
    /// Materializes the root-to-leaf node sequence (length `h`).
    pub fn path(&self, tree: &Tree) -> Vec<NodeId> {
        let mut path = Vec::new();
        let mut v = self.leaf;
        loop {
            path.push(v);
            match tree.parent_of(v) {
                Some(p) => v = p,
                None => break,
            }
        }
        path.reverse();
        path
    }
}

#[derive(Debug, Clone)]
pub struct SpineReport {
    /// Status per observed node, indexed by node id.
    pub status: Vec<NodeStatus>,
    /// `K_h`: number of spine nodes identified from the root down.
    pub identified_prefix_len: usize,
    /// All branches still compatible with the observation, in DFS order.
    pub candidates: Vec<Candidate>,
}

impl SpineReport {
    /// Writes `node_id,depth,status` lines (with header) for every observed
    /// node.
    pub fn write_csv<W: Write>(&self, t: &ObservedTree<'_>, w: &mut W) -> Result<(), SpineError> {
        writeln!(w, "node_id,depth,status")?;
        for v in t.observed_ids() {
            writeln!(
                w,
                "{},{},{}",
                v,
                t.tree().depth_of(v),
                self.status[v as usize].as_str()
            )?;
        }
        Ok(())
    }
}

/// Observed height of the subtree at `v`: the longest downward path from `v`
/// inside the depth-`h` window. For a subtree that dies before the horizon
/// this is its true height; for one that reaches the horizon it is `h -
/// depth(v)`, the truncation limit.
pub fn observed_height(t: &ObservedTree<'_>, v: NodeId) -> Result<u32, SpineError> {
    if !t.is_observed(v) {
        return Err(SpineError::NotObserved(v));
    }
    let tree = t.tree();
    let h = t.horizon();
    // Iterative post-order over the subtree, bounded by the window.
    let mut best = 0u32;
    let mut stack = vec![v];
    while let Some(u) = stack.pop() {
        let du = tree.depth_of(u);
        best = best.max(du - tree.depth_of(v));
        if du + 1 <= h {
            // Children at depth h exist and count toward height h - depth(v),
            // but are not descended into.
            for c in tree.children_of(u) {
                if tree.depth_of(c) < h {
                    stack.push(c);
                } else {
                    best = best.max(h - tree.depth_of(v));
                }
            }
        }
    }
    Ok(best)
}

/// Observed heights for every observed node at once, indexed by node id.
///
/// Runs one reverse sweep over the id space: ids are generation-sorted, so
/// children are always processed before their parents.
pub fn observed_heights(t: &ObservedTree<'_>) -> Vec<u32> {
    let tree = t.tree();
    let h = t.horizon();
    let n = t.num_observed();
    let mut height = vec![0u32; n];
    for v in (0..n).rev() {
        let mut best = 0u32;
        for c in tree.children_of(v as NodeId) {
            let hc = if tree.depth_of(c) >= h {
                0 // window boundary: the child itself is the endpoint
            } else {
                height[c as usize]
            };
            best = best.max(hc + 1);
        }
        height[v] = best;
    }
    height
}

/// Runs the identification rules over the window and enumerates the surviving
/// candidate branches.
pub fn identify(t: &ObservedTree<'_>) -> SpineReport {
    let tree = t.tree();
    let h = t.horizon();
    let heights = observed_heights(t);
    let n = t.num_observed();

    let reaches = |v: NodeId| heights[v as usize] + tree.depth_of(v) >= h;

    let mut status = vec![NodeStatus::Unknown; n];
    for v in 0..n as NodeId {
        if !reaches(v) {
            status[v as usize] = NodeStatus::IdentifiedNormal;
        }
    }

    // Walk the forced prefix down from the root.
    status[0] = NodeStatus::IdentifiedSpecial;
    let mut identified_prefix_len = 1;
    let mut v = 0 as NodeId;
    while tree.depth_of(v) + 1 < h {
        let mut surviving = tree.children_of(v).filter(|&c| reaches(c));
        match (surviving.next(), surviving.next()) {
            (Some(c), None) => {
                status[c as usize] = NodeStatus::IdentifiedSpecial;
                identified_prefix_len += 1;
                v = c;
            }
            _ => break, // zero or several surviving children: ambiguity
        }
    }

    let candidates = candidates_with_measures(t);
    SpineReport {
        status,
        identified_prefix_len,
        candidates,
    }
}

/// Enumerates candidate branches in DFS (birth) order, each carrying the
/// children-count tallies of its `h` nodes.
///
/// The tallies are maintained incrementally along the DFS (push on the way
/// down, pop on the way up), so the whole enumeration costs one traversal of
/// the window regardless of how many candidates there are.
pub fn candidates_with_measures(t: &ObservedTree<'_>) -> Vec<Candidate> {
    let tree = t.tree();
    let h = t.horizon();
    let mut counts = EmpiricalCounts::new(t.n_max());
    let mut out = Vec::new();
    // Frames: (node, next child offset); offset u32::MAX marks "not entered".
    let mut stack: Vec<(NodeId, u32)> = vec![(tree.root(), u32::MAX)];
    while let Some((v, progress)) = stack.pop() {
        let k = tree.num_children(v);
        if progress == u32::MAX {
            counts
                .record(k as usize)
                .expect("observed counts fit n_max by construction");
            if tree.depth_of(v) + 1 == h {
                if k >= 1 {
                    out.push(Candidate {
                        leaf: v,
                        counts: counts.clone(),
                    });
                }
                counts.unrecord(k as usize).expect("just recorded");
                continue;
            }
            stack.push((v, 0));
            continue;
        }
        if progress < k {
            stack.push((v, progress + 1));
            stack.push((tree.children_of(v).start + progress, u32::MAX));
        } else {
            counts.unrecord(k as usize).expect("recorded on entry");
        }
    }
    out
}
