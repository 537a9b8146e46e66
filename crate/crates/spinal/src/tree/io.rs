//! Flat-record and JSON serialization for trees.
//!
//! Flat format: an optional `# generated_to=G` comment line, then one node per
//! line as `id,parent,depth,children,kind` with `parent = -1` for the root and
//! `kind` in `{normal, special}`. The JSON form is
//! `{"generated_to": G, "nodes": [{"id", "parent", "type"}, ...]}` with depths
//! and children counts recomputed from the parent links on load. Both formats
//! round-trip exactly; the comment line / explicit field preserves
//! `generated_to` even when the population dies before the cap.

use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};

use super::{NodeId, NodeKind, Tree, TreeError};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct NodeRecord {
    pub id: NodeId,
    pub parent: Option<NodeId>,
    pub depth: u32,
    pub child_count: u32,
    pub kind: NodeKind,
}

pub(super) fn write_flat<W: Write>(t: &Tree, w: &mut W) -> Result<(), TreeError> {
    writeln!(w, "# generated_to={}", t.generated_to)?;
    for v in 0..t.len() as NodeId {
        let parent = match t.parent_of(v) {
            Some(p) => p as i64,
            None => -1,
        };
        let kind = match t.kind_of(v) {
            NodeKind::Normal => "normal",
            NodeKind::Special => "special",
        };
        writeln!(
            w,
            "{},{},{},{},{}",
            v,
            parent,
            t.depth_of(v),
            t.num_children(v),
            kind
        )?;
    }
    Ok(())
}

pub(super) fn read_flat<R: BufRead>(r: R) -> Result<Tree, TreeError> {
    let mut generated_to = None;
    let mut records = Vec::new();
    for (lineno, line) in r.lines().enumerate() {
        let line = line?;
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        if let Some(rest) = line.strip_prefix('#') {
            let rest = rest.trim();
            if let Some(value) = rest.strip_prefix("generated_to=") {
                generated_to = Some(parse_num(value, lineno, "generated_to")?);
            }
            continue;
        }
        let fields: Vec<&str> = line.split(',').map(str::trim).collect();
        if fields.len() != 5 {
            return Err(TreeError::Malformed(format!(
                "line {}: expected 5 comma-separated fields, got {}",
                lineno + 1,
                fields.len()
            )));
        }
        let id: u32 = parse_num(fields[0], lineno, "id")?;
        let parent_raw: i64 = parse_num(fields[1], lineno, "parent")?;
        let parent = if parent_raw < 0 {
            None
        } else {
            Some(parent_raw as NodeId)
        };
        let depth: u32 = parse_num(fields[2], lineno, "depth")?;
        let child_count: u32 = parse_num(fields[3], lineno, "children")?;
        let kind = match fields[4] {
            "normal" => NodeKind::Normal,
            "special" => NodeKind::Special,
            other => {
                return Err(TreeError::Malformed(format!(
                    "line {}: unknown kind {other:?}",
                    lineno + 1
                )))
            }
        };
        records.push(NodeRecord {
            id,
            parent,
            depth,
            child_count,
            kind,
        });
    }
    build(&records, generated_to)
}

fn parse_num<T: std::str::FromStr>(s: &str, lineno: usize, what: &str) -> Result<T, TreeError> {
    s.parse().map_err(|_| {
        TreeError::Malformed(format!("line {}: bad {what} value {s:?}", lineno + 1))
    })
}

#[derive(Serialize, Deserialize)]
struct JsonTree {
    generated_to: u32,
    nodes: Vec<JsonNode>,
}

#[derive(Serialize, Deserialize)]
struct JsonNode {
    id: NodeId,
    parent: Option<NodeId>,
    #[serde(rename = "type")]
    kind: String,
}

pub(super) fn to_json_string(t: &Tree) -> String {
    let nodes = (0..t.len() as NodeId)
        .map(|v| JsonNode {
            id: v,
            parent: t.parent_of(v),
            kind: match t.kind_of(v) {
                NodeKind::Normal => "normal".to_string(),
                NodeKind::Special => "special".to_string(),
            },
        })
        .collect();
    serde_json::to_string(&JsonTree {
        generated_to: t.generated_to,
        nodes,
    })
    .expect("tree JSON serialization cannot fail")
}

pub(super) fn from_json_str(s: &str) -> Result<Tree, TreeError> {
    let parsed: JsonTree =
        serde_json::from_str(s).map_err(|e| TreeError::Malformed(e.to_string()))?;
    // Depths and children counts are derived, then validated by build().
    let n = parsed.nodes.len();
    let mut depth = vec![0u32; n];
    let mut child_count = vec![0u32; n];
    for node in &parsed.nodes {
        if node.id as usize >= n {
            return Err(TreeError::Malformed(format!("node id {} out of range", node.id)));
        }
    }
    for node in &parsed.nodes {
        if let Some(p) = node.parent {
            if p as usize >= n || p >= node.id {
                return Err(TreeError::Malformed(format!(
                    "node {}: parent {} must be an earlier id",
                    node.id, p
                )));
            }
            depth[node.id as usize] = depth[p as usize] + 1;
            child_count[p as usize] += 1;
        }
    }
    let records: Vec<NodeRecord> = parsed
        .nodes
        .iter()
        .map(|node| {
            Ok(NodeRecord {
                id: node.id,
                parent: node.parent,
                depth: depth[node.id as usize],
                child_count: child_count[node.id as usize],
                kind: match node.kind.as_str() {
                    "normal" => NodeKind::Normal,
                    "special" => NodeKind::Special,
                    other => {
                        return Err(TreeError::Malformed(format!("unknown kind {other:?}")))
                    }
                },
            })
        })
        .collect::<Result<_, TreeError>>()?;
    build(&records, Some(parsed.generated_to))
}

/// Validates records against the canonical-layout invariants and assembles the
/// arena. See [`Tree::from_records`].
pub(super) fn build(records: &[NodeRecord], generated_to: Option<u32>) -> Result<Tree, TreeError> {
    if records.is_empty() {
        return Err(TreeError::Malformed("empty tree".into()));
    }
    let n = records.len();
    let mut parent = vec![0 as NodeId; n];
    let mut first_child = vec![0 as NodeId; n];
    let mut child_count = vec![0u32; n];
    let mut depth = vec![0u32; n];
    let mut special = vec![false; n];
    let mut seen_children = vec![0u32; n];

    for (i, rec) in records.iter().enumerate() {
        if rec.id as usize != i {
            return Err(TreeError::Malformed(format!(
                "ids must be consecutive from 0; position {i} holds id {}",
                rec.id
            )));
        }
        special[i] = matches!(rec.kind, NodeKind::Special);
        depth[i] = rec.depth;
        match rec.parent {
            None => {
                if i != 0 {
                    return Err(TreeError::Malformed(format!(
                        "node {i} has no parent but is not the root"
                    )));
                }
                if rec.depth != 0 {
                    return Err(TreeError::Malformed("root depth must be 0".into()));
                }
            }
            Some(p) => {
                let p = p as usize;
                if i == 0 {
                    return Err(TreeError::Malformed("root cannot have a parent".into()));
                }
                if p >= i {
                    return Err(TreeError::Malformed(format!(
                        "node {i}: parent {p} must precede it"
                    )));
                }
                if records[p].depth + 1 != rec.depth {
                    return Err(TreeError::Malformed(format!(
                        "node {i}: depth {} inconsistent with parent depth {}",
                        rec.depth, records[p].depth
                    )));
                }
                parent[i] = p as NodeId;
                if seen_children[p] == 0 {
                    first_child[p] = i as NodeId;
                } else if first_child[p] + seen_children[p] != i as NodeId {
                    return Err(TreeError::Malformed(format!(
                        "node {i}: children of {p} must occupy a contiguous id range"
                    )));
                }
                seen_children[p] += 1;
                child_count[p] += 1;
            }
        }
        if i > 0 && depth[i] < depth[i - 1] {
            return Err(TreeError::Malformed(
                "ids must be sorted by generation".into(),
            ));
        }
    }
    for (i, rec) in records.iter().enumerate() {
        if rec.child_count != child_count[i] {
            return Err(TreeError::Malformed(format!(
                "node {i}: declared children count {} but {} children present",
                rec.child_count, child_count[i]
            )));
        }
    }
    let max_depth = depth.last().copied().unwrap_or(0);
    let generated_to = generated_to.unwrap_or(max_depth);
    if generated_to < max_depth {
        return Err(TreeError::Malformed(format!(
            "generated_to {generated_to} below deepest node {max_depth}"
        )));
    }
    Ok(Tree {
        parent,
        first_child,
        child_count,
        depth,
        special,
        generated_to,
    })
}

#[cfg(test)]
mod tests {
    use super::super::{simulate_gw, simulate_sst};
    use super::*;
    use crate::prob::{Distribution, TransformFn};

    #[test]
    fn flat_round_trip_is_exact() {
        let mu = Distribution::new(vec![0.35, 0.4, 0.25]).unwrap();
        let f = TransformFn::new(vec![0.0, 1.0, 3.0]).unwrap();
        let t = simulate_sst(&mu, &f, 25, 17).unwrap();
        let mut buf = Vec::new();
        t.write_flat(&mut buf).unwrap();
        let back = Tree::read_flat(&buf[..]).unwrap();
        assert_eq!(t, back);
    }

    #[test]
    fn json_round_trip_is_exact_even_after_early_extinction() {
        let mu = Distribution::new(vec![0.6, 0.3, 0.1]).unwrap();
        // Heavily subcritical: will usually die long before the cap, so
        // generated_to is not recoverable from the nodes alone.
        let t = simulate_gw(&mu, 50, 2).unwrap();
        assert!(t.max_depth() < 50, "seed chosen to die early");
        let back = Tree::from_json_str(&t.to_json_string()).unwrap();
        assert_eq!(t, back);
        assert_eq!(back.generated_to(), 50);
    }

    #[test]
    fn flat_without_header_infers_generation_from_depth() {
        let text = "0,-1,0,2,special\n1,0,1,0,special\n2,0,1,0,normal\n";
        let t = Tree::read_flat(text.as_bytes()).unwrap();
        assert_eq!(t.len(), 3);
        assert_eq!(t.generated_to(), 1);
        assert_eq!(t.num_children(0), 2);
        assert!(t.is_special(1) && !t.is_special(2));
    }

    #[test]
    fn malformed_inputs_are_rejected() {
        for (text, why) in [
            ("0,-1,0,1,special\n1,0,2,0,normal\n", "bad depth"),
            ("0,-1,0,2,special\n1,0,1,0,normal\n", "count mismatch"),
            ("0,-1,0,1,martian\n", "unknown kind"),
            ("1,-1,0,0,normal\n", "ids not from 0"),
            ("", "empty"),
        ] {
            assert!(Tree::read_flat(text.as_bytes()).is_err(), "{why}");
        }
    }

    #[test]
    fn records_round_trip_via_builder() {
        let mu = Distribution::new(vec![0.35, 0.4, 0.25]).unwrap();
        let t = simulate_gw(&mu, 8, 5).unwrap();
        let recs = t.records();
        let back = Tree::from_records(&recs, Some(t.generated_to())).unwrap();
        assert_eq!(t, back);
    }
}
