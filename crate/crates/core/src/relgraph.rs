//! Global directed sememe relation graph and per-pair induced subgraphs.

use std::collections::BTreeSet;

use serde::Serialize;
use serde_json::{json, Value};

use crate::error::{Error, Result};
use crate::lexicon::{RelationTriple, RelationTypeId, SememeId, SememeInventory};

/// Label carried by a subgraph edge. Attention ignores it.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub enum EdgeLabel {
    Relation(RelationTypeId),
    /// Synthetic edge from a sememe node into the virtual node.
    Virtual,
}

pub const VIRTUAL_LABEL: &str = "VIRTUAL";
pub const VIRTUAL_NODE_LABEL: &str = "<virtual>";

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SememeGraph {
    node_count: usize,
    edges: Vec<RelationTriple>,
    in_adjacency: Vec<Vec<usize>>,
    out_adjacency: Vec<Vec<usize>>,
}

/// Builds the graph over every sememe in `inventory`; edge order follows `triples`.
pub fn build_graph(inventory: &SememeInventory, triples: &[RelationTriple]) -> Result<SememeGraph> {
    let node_count = inventory.sememe_count();
    let relation_count = inventory.relation_count();
    let mut in_adjacency = vec![Vec::new(); node_count];
    let mut out_adjacency = vec![Vec::new(); node_count];
    for (e, t) in triples.iter().enumerate() {
        for id in [t.head.0, t.tail.0] {
            if id >= node_count {
                return Err(Error::IdOutOfRange {
                    id,
                    limit: node_count,
                });
            }
        }
        if t.relation.0 >= relation_count {
            return Err(Error::IdOutOfRange {
                id: t.relation.0,
                limit: relation_count,
            });
        }
        out_adjacency[t.head.0].push(e);
        in_adjacency[t.tail.0].push(e);
    }
    Ok(SememeGraph {
        node_count,
        edges: triples.to_vec(),
        in_adjacency,
        out_adjacency,
    })
}

impl SememeGraph {
    pub fn node_count(&self) -> usize {
        self.node_count
    }

    pub fn edges(&self) -> &[RelationTriple] {
        &self.edges
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn in_degree(&self, node: SememeId) -> usize {
        self.in_adjacency.get(node.0).map_or(0, Vec::len)
    }

    pub fn out_degree(&self, node: SememeId) -> usize {
        self.out_adjacency.get(node.0).map_or(0, Vec::len)
    }

    pub fn incoming(&self, node: SememeId) -> impl Iterator<Item = &RelationTriple> + '_ {
        self.in_adjacency
            .get(node.0)
            .into_iter()
            .flatten()
            .map(|&e| &self.edges[e])
    }

    pub fn outgoing(&self, node: SememeId) -> impl Iterator<Item = &RelationTriple> + '_ {
        self.out_adjacency
            .get(node.0)
            .into_iter()
            .flatten()
            .map(|&e| &self.edges[e])
    }

    /// Number of distinct relation types that label at least one edge.
    pub fn distinct_relation_types(&self) -> usize {
        self.edges
            .iter()
            .map(|t| t.relation)
            .collect::<BTreeSet<_>>()
            .len()
    }

    fn check(&self, id: SememeId) -> Result<()> {
        if id.0 >= self.node_count {
            return Err(Error::IdOutOfRange {
                id: id.0,
                limit: self.node_count,
            });
        }
        Ok(())
    }

    /// Induced subgraph over `head ∪ tail`. With `hops = 1`, intermediate
    /// nodes on directed length-2 paths between members are added as well.
    pub fn extract_subgraph(
        &self,
        head: &BTreeSet<SememeId>,
        tail: &BTreeSet<SememeId>,
        hops: usize,
    ) -> Result<PairSubgraph> {
        if head.is_empty() || tail.is_empty() {
            return Err(Error::Subgraph(
                "head and tail sememe sets must be non-empty".into(),
            ));
        }
        if hops > 1 {
            return Err(Error::Subgraph(format!("hops must be 0 or 1, got {hops}")));
        }
        for &id in head.iter().chain(tail) {
            self.check(id)?;
        }
        let members: BTreeSet<SememeId> = head.union(tail).copied().collect();
        let mut nodes = members.clone();
        if hops == 1 {
            for &u in &members {
                for first in self.outgoing(u) {
                    let mid = first.tail;
                    if members.contains(&mid) {
                        continue;
                    }
                    if self.outgoing(mid).any(|second| members.contains(&second.tail)) {
                        nodes.insert(mid);
                    }
                }
            }
        }
        let local_nodes: Vec<SememeId> = nodes.into_iter().collect();
        let local_of = |id: SememeId| local_nodes.binary_search(&id).ok();

        let mut edge_ids: Vec<usize> = Vec::new();
        for &u in &local_nodes {
            for &e in &self.out_adjacency[u.0] {
                if local_of(self.edges[e].tail).is_some() {
                    edge_ids.push(e);
                }
            }
        }
        edge_ids.sort_unstable();
        let local_edges = edge_ids
            .into_iter()
            .map(|e| {
                let t = &self.edges[e];
                LocalEdge {
                    src: local_of(t.head).expect("member"),
                    label: EdgeLabel::Relation(t.relation),
                    dst: local_of(t.tail).expect("member"),
                }
            })
            .collect();

        let mark =
            |set: &BTreeSet<SememeId>| -> Vec<usize> { set.iter().filter_map(|&id| local_of(id)).collect() };
        Ok(PairSubgraph {
            head_members: mark(head),
            tail_members: mark(tail),
            local_nodes,
            local_edges,
            virtual_index: None,
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct LocalEdge {
    pub src: usize,
    pub label: EdgeLabel,
    pub dst: usize,
}

/// Subgraph for one word pair, in local node indices.
///
/// Sememe nodes occupy `0..local_nodes.len()` in ascending global id; the
/// virtual node, once added, takes the last index.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PairSubgraph {
    pub local_nodes: Vec<SememeId>,
    pub local_edges: Vec<LocalEdge>,
    pub virtual_index: Option<usize>,
    pub head_members: Vec<usize>,
    pub tail_members: Vec<usize>,
}

impl PairSubgraph {
    pub fn sememe_count(&self) -> usize {
        self.local_nodes.len()
    }

    /// Sememe nodes plus the virtual node if present.
    pub fn node_count(&self) -> usize {
        self.local_nodes.len() + usize::from(self.virtual_index.is_some())
    }

    pub fn is_augmented(&self) -> bool {
        self.virtual_index.is_some()
    }

    /// Appends the virtual node and one edge from every sememe node into it.
    pub fn add_virtual_node(mut self) -> Result<PairSubgraph> {
        if self.is_augmented() {
            return Err(Error::Subgraph("virtual node already added".into()));
        }
        if self.local_nodes.is_empty() {
            return Err(Error::Subgraph("cannot augment an empty subgraph".into()));
        }
        let v = self.local_nodes.len();
        self.local_edges.extend((0..v).map(|src| LocalEdge {
            src,
            label: EdgeLabel::Virtual,
            dst: v,
        }));
        self.virtual_index = Some(v);
        Ok(self)
    }

    /// `incoming[i]` lists the sources of edges ending at `i`, deduplicated
    /// and sorted; parallel edges count once.
    pub fn incoming(&self) -> Vec<Vec<usize>> {
        let mut incoming = vec![BTreeSet::new(); self.node_count()];
        for e in &self.local_edges {
            incoming[e.dst].insert(e.src);
        }
        incoming.into_iter().map(|s| s.into_iter().collect()).collect()
    }

    pub fn in_degree(&self, node: usize) -> usize {
        self.local_edges.iter().filter(|e| e.dst == node).count()
    }

    pub fn out_degree(&self, node: usize) -> usize {
        self.local_edges.iter().filter(|e| e.src == node).count()
    }

    /// JSON view used by `inspect-pair`.
    pub fn to_json(&self, inventory: &SememeInventory) -> Value {
        let mut nodes: Vec<String> = self
            .local_nodes
            .iter()
            .map(|&id| inventory.sememe_label(id).unwrap_or_default().to_owned())
            .collect();
        if self.is_augmented() {
            nodes.push(VIRTUAL_NODE_LABEL.to_owned());
        }
        let edges: Vec<Value> = self
            .local_edges
            .iter()
            .map(|e| {
                let label = match e.label {
                    EdgeLabel::Relation(r) => inventory.relation_label(r).unwrap_or_default(),
                    EdgeLabel::Virtual => VIRTUAL_LABEL,
                };
                json!([e.src, label, e.dst])
            })
            .collect();
        json!({
            "nodes": nodes,
            "edges": edges,
            "virtual_index": self.virtual_index,
            "head_members": self.head_members,
            "tail_members": self.tail_members,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fixture(labels: &[&str], edges: &[(&str, &str, &str)]) -> (SememeInventory, SememeGraph) {
        let mut inv = SememeInventory::new();
        for l in labels {
            inv.intern_sememe(l);
        }
        let triples: Vec<_> = edges
            .iter()
            .map(|(h, r, t)| RelationTriple {
                head: inv.intern_sememe(h),
                relation: inv.intern_relation(r),
                tail: inv.intern_sememe(t),
            })
            .collect();
        let g = build_graph(&inv, &triples).unwrap();
        (inv, g)
    }

    fn set(inv: &SememeInventory, labels: &[&str]) -> BTreeSet<SememeId> {
        labels.iter().map(|l| inv.sememe_id(l).unwrap()).collect()
    }

    #[test]
    fn isolated_nodes() {
        let (_, g) = fixture(&["a", "b", "c", "d"], &[]);
        assert_eq!(g.node_count(), 4);
        assert_eq!(g.edge_count(), 0);
    }

    #[test]
    fn degrees() {
        let (inv, g) = fixture(&["a", "b", "c"], &[("a", "r", "c"), ("b", "r", "c")]);
        let c = inv.sememe_id("c").unwrap();
        assert_eq!(g.in_degree(c), 2);
        assert_eq!(g.out_degree(c), 0);
    }

    #[test]
    fn out_of_range_triple() {
        let (inv, _) = fixture(&["a"], &[]);
        let bad = RelationTriple {
            head: SememeId(0),
            relation: RelationTypeId(0),
            tail: SememeId(7),
        };
        assert!(matches!(
            build_graph(&inv, &[bad]),
            Err(Error::IdOutOfRange { .. })
        ));
    }

    #[test]
    fn induced_subgraph_drops_outside_edges() {
        let (inv, g) = fixture(&["a", "b", "c", "d"], &[("a", "r", "c"), ("c", "s", "d")]);
        let sg = g
            .extract_subgraph(&set(&inv, &["a", "b"]), &set(&inv, &["c"]), 0)
            .unwrap();
        assert_eq!(
            sg.local_nodes,
            set(&inv, &["a", "b", "c"]).into_iter().collect::<Vec<_>>()
        );
        assert_eq!(sg.local_edges.len(), 1);
        assert_eq!((sg.local_edges[0].src, sg.local_edges[0].dst), (0, 2));
        assert_eq!(sg.head_members, vec![0, 1]);
        assert_eq!(sg.tail_members, vec![2]);
    }

    #[test]
    fn disjoint_without_edges() {
        let (inv, g) = fixture(&["a", "b", "c"], &[("a", "r", "b")]);
        let sg = g
            .extract_subgraph(&set(&inv, &["a"]), &set(&inv, &["c"]), 0)
            .unwrap();
        assert_eq!(sg.sememe_count(), 2);
        assert!(sg.local_edges.is_empty());
    }

    #[test]
    fn shared_member_appears_once() {
        let (inv, g) = fixture(&["a"], &[]);
        let s = set(&inv, &["a"]);
        let sg = g.extract_subgraph(&s, &s, 0).unwrap();
        assert_eq!(sg.local_nodes.len(), 1);
        assert_eq!(sg.head_members, vec![0]);
        assert_eq!(sg.tail_members, vec![0]);
    }

    #[test]
    fn empty_sets_rejected() {
        let (inv, g) = fixture(&["a"], &[]);
        assert!(g
            .extract_subgraph(&BTreeSet::new(), &set(&inv, &["a"]), 0)
            .is_err());
    }

    #[test]
    fn one_hop_adds_path_midpoints() {
        let (inv, g) = fixture(
            &["a", "b", "m", "x"],
            &[("a", "r", "m"), ("m", "r", "b"), ("a", "r", "x")],
        );
        let sg = g
            .extract_subgraph(&set(&inv, &["a"]), &set(&inv, &["b"]), 1)
            .unwrap();
        assert_eq!(
            sg.local_nodes,
            set(&inv, &["a", "b", "m"]).into_iter().collect::<Vec<_>>()
        );
        assert_eq!(sg.local_edges.len(), 2);
        assert_eq!(sg.head_members, vec![0]);
        assert_eq!(sg.tail_members, vec![1]);
    }

    #[test]
    fn virtual_node_is_a_sink() {
        let (inv, g) = fixture(&["a", "b", "c"], &[("a", "r", "b")]);
        let sg = g
            .extract_subgraph(&set(&inv, &["a", "b"]), &set(&inv, &["c"]), 0)
            .unwrap()
            .add_virtual_node()
            .unwrap();
        let v = sg.virtual_index.unwrap();
        assert_eq!(v, 3);
        assert_eq!(sg.in_degree(v), 3);
        assert_eq!(sg.out_degree(v), 0);
        assert_eq!(sg.local_edges.len(), 4);
        assert!(sg.clone().add_virtual_node().is_err());

        let single = g
            .extract_subgraph(&set(&inv, &["a"]), &set(&inv, &["a"]), 0)
            .unwrap();
        let before = single.local_edges.len();
        let single = single.add_virtual_node().unwrap();
        assert_eq!(single.local_edges.len(), before + 1);
    }

    #[test]
    fn inspect_json_shape() {
        let (inv, g) = fixture(&["a", "b"], &[("a", "Part", "b")]);
        let sg = g
            .extract_subgraph(&set(&inv, &["a"]), &set(&inv, &["b"]), 0)
            .unwrap()
            .add_virtual_node()
            .unwrap();
        let v = sg.to_json(&inv);
        assert_eq!(v["nodes"], json!(["a", "b", "<virtual>"]));
        assert_eq!(v["edges"][0], json!([0, "Part", 1]));
        assert_eq!(v["edges"][1], json!([0, "VIRTUAL", 2]));
        assert_eq!(v["virtual_index"], json!(2));
    }
}
