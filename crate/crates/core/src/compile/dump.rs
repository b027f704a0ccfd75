//! Compiled-tree dump (`*.jt.json`).
//!
//! The dump carries the network so that a tree file alone is enough to run
//! inference. Mapping tables are optional; when present they are stored in
//! physical order and checked against a fresh build on load.

use serde::{Deserialize, Serialize};

use super::{build_mapping_tables, Clique, JunctionTree, Layout};
use crate::error::{Error, Result};
use crate::model::BayesianNetwork;
use crate::parser::{parse_native, serialize_native};

pub const DUMP_FORMAT: &str = "jtprop-tree/1";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TreeDump {
    pub format: String,
    pub layout: Layout,
    pub cliques: Vec<Vec<usize>>,
    pub edges: Vec<[usize; 2]>,
    pub separators: Vec<Vec<usize>>,
    pub roots: Vec<usize>,
    pub cpt_assignment: Vec<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mapping_tables: Option<Vec<[Vec<usize>; 2]>>,
    pub network: serde_json::Value,
}

impl TreeDump {
    pub fn new(net: &BayesianNetwork, tree: &JunctionTree, with_mappings: bool) -> Self {
        let network = serde_json::from_str(&serialize_native(net)).expect("native output is valid JSON");
        TreeDump {
            format: DUMP_FORMAT.to_string(),
            layout: tree.mappings.layout(),
            cliques: tree.cliques.iter().map(|c| c.scope.vars().to_vec()).collect(),
            edges: tree.separators.iter().map(|s| [s.cliques.0, s.cliques.1]).collect(),
            separators: tree.separators.iter().map(|s| s.scope.vars().to_vec()).collect(),
            roots: tree.roots.clone(),
            cpt_assignment: tree.cpt_assignment.clone(),
            mapping_tables: with_mappings.then(|| {
                tree.mappings.separators().iter().map(|m| [m.sides[0].1.physical(), m.sides[1].1.physical()]).collect()
            }),
            network,
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("dump serializes") + "\n"
    }
}

fn invalid(path: &str, message: impl Into<String>) -> Error {
    Error::SchemaViolation { path: path.to_string(), message: message.into() }
}

/// Rebuilds the network and tree from a dump, checking it is self-consistent.
pub fn load_tree(text: &str) -> Result<(BayesianNetwork, JunctionTree)> {
    let dump: TreeDump = serde_json::from_str(text).map_err(|e| Error::SyntaxError {
        line: e.line(),
        col: e.column(),
        message: e.to_string(),
    })?;
    if dump.format != DUMP_FORMAT {
        return Err(invalid("/format", format!("expected `{DUMP_FORMAT}`")));
    }
    let net = parse_native(&dump.network.to_string())?;
    let mut cliques = Vec::with_capacity(dump.cliques.len());
    for (id, members) in dump.cliques.iter().enumerate() {
        if members.iter().any(|&v| v >= net.len()) || members.windows(2).any(|w| w[0] >= w[1]) {
            return Err(invalid(&format!("/cliques/{id}"), "members must be ascending variable ids"));
        }
        cliques.push(Clique { id, scope: net.scope_of(members)? });
    }
    let edges: Vec<(usize, usize)> = dump.edges.iter().map(|e| (e[0], e[1])).collect();
    if edges.iter().any(|&(a, b)| a >= cliques.len() || b >= cliques.len() || a == b) {
        return Err(invalid("/edges", "edge endpoint out of range"));
    }
    let mut tree = JunctionTree::from_edges(cliques, &edges, dump.layout)?;
    let seps: Vec<Vec<usize>> = tree.separators.iter().map(|s| s.scope.vars().to_vec()).collect();
    if seps != dump.separators {
        return Err(invalid("/separators", "separators must be the clique intersections, in edge order"));
    }
    if tree.roots != dump.roots {
        return Err(invalid("/roots", "roots do not match the tree"));
    }
    if !tree.check_invariants() {
        return Err(invalid("/edges", "edges do not form a junction tree"));
    }
    if dump.cpt_assignment.len() != net.len() {
        return Err(invalid("/cpt_assignment", "need one clique per CPT"));
    }
    for (v, &c) in dump.cpt_assignment.iter().enumerate() {
        let covers = tree.cliques.get(c).is_some_and(|cl| net.cpt(v).table.scope().is_subset_of(&cl.scope));
        if !covers {
            return Err(Error::NoCoveringClique(net.variable(v).name.clone()));
        }
    }
    tree.cpt_assignment = dump.cpt_assignment;
    if let Some(tables) = &dump.mapping_tables {
        let rebuilt = build_mapping_tables(&tree, dump.layout)?;
        let same = tables.len() == rebuilt.separators().len()
            && tables
                .iter()
                .zip(rebuilt.separators())
                .all(|(t, m)| t[0] == m.sides[0].1.physical() && t[1] == m.sides[1].1.physical());
        if !same {
            return Err(invalid("/mapping_tables", "mapping tables disagree with the tree"));
        }
    }
    Ok((net, tree))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::compile::{compile, CompileOptions};
    use crate::model::fixtures;

    #[test]
    fn dump_round_trips() {
        let net = fixtures::five_node();
        for layout in [Layout::Flat, Layout::Interleaved] {
            let tree = compile(&net, CompileOptions { layout }).unwrap();
            for with in [false, true] {
                let text = TreeDump::new(&net, &tree, with).to_json();
                let (net2, tree2) = load_tree(&text).unwrap();
                assert_eq!(net2, net);
                assert_eq!(tree2, tree);
            }
        }
    }

    #[test]
    fn layout_tag_is_recorded() {
        let net = fixtures::diamond();
        let tree = compile(&net, CompileOptions { layout: Layout::Interleaved }).unwrap();
        let text = TreeDump::new(&net, &tree, false).to_json();
        assert!(text.contains("\"layout\": \"interleaved\""));
    }

    #[test]
    fn tampered_dump_is_rejected() {
        let net = fixtures::diamond();
        let tree = compile(&net, CompileOptions::default()).unwrap();
        let mut dump = TreeDump::new(&net, &tree, true);
        dump.cpt_assignment[3] = 0;
        assert!(matches!(load_tree(&dump.to_json()), Err(Error::NoCoveringClique(_))));
        let mut dump = TreeDump::new(&net, &tree, true);
        dump.mapping_tables.as_mut().unwrap()[0][0].swap(0, 1);
        assert!(matches!(load_tree(&dump.to_json()), Err(Error::SchemaViolation { .. })));
    }
}
