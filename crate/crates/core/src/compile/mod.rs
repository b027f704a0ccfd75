//! Offline compilation of a Bayesian network into a junction tree with
//! precomputed mapping tables.

mod dump;
mod graph;
mod mapping;
mod stats;

use std::collections::VecDeque;

use crate::error::{Error, Result};
use crate::model::{BayesianNetwork, VarId};
use crate::potential::Scope;

pub use dump::{load_tree, TreeDump, DUMP_FORMAT};
pub use graph::{
    extract_cliques, is_chordal, is_perfect_elimination_order, moralize, triangulate, MoralGraph, Triangulation,
    UndirectedGraph,
};
pub use mapping::{Layout, MappingTable, MappingTableSet, SeparatorMappings};
pub use stats::{histogram, tree_stats, HistogramBucket, SizeSummary, StatsReport};

pub type CliqueId = usize;
pub type SeparatorId = usize;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Clique {
    pub id: CliqueId,
    /// Members in ascending id order.
    pub scope: Scope,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Separator {
    pub id: SeparatorId,
    /// Endpoints, lower id first.
    pub cliques: (CliqueId, CliqueId),
    pub scope: Scope,
}

impl Separator {
    pub fn other(&self, clique: CliqueId) -> CliqueId {
        if self.cliques.0 == clique {
            self.cliques.1
        } else {
            self.cliques.0
        }
    }
}

/// A junction forest: one tree per connected component of the network.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct JunctionTree {
    pub cliques: Vec<Clique>,
    pub separators: Vec<Separator>,
    /// `(neighbor, separator)` pairs per clique, ascending by neighbor id.
    pub adjacency: Vec<Vec<(CliqueId, SeparatorId)>>,
    /// One root per component, ordered by the component's smallest clique id.
    pub roots: Vec<CliqueId>,
    /// Clique holding each variable's CPT, indexed by variable id.
    pub cpt_assignment: Vec<CliqueId>,
    pub mappings: MappingTableSet,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct CompileOptions {
    pub layout: Layout,
}

impl JunctionTree {
    /// Builds a tree from clique scopes: maximum spanning forest over
    /// intersection sizes, roots, and flat mapping tables. No CPTs assigned.
    pub fn from_cliques(scopes: Vec<Scope>, layout: Layout) -> Result<Self> {
        let cliques: Vec<Clique> = scopes.into_iter().enumerate().map(|(id, scope)| Clique { id, scope }).collect();
        let edges = spanning_edges(&cliques);
        Self::from_edges(cliques, &edges, layout)
    }

    /// Builds a tree with the given clique edges. Separator ids follow the
    /// sorted edge list.
    pub fn from_edges(cliques: Vec<Clique>, edges: &[(CliqueId, CliqueId)], layout: Layout) -> Result<Self> {
        let mut edges: Vec<(CliqueId, CliqueId)> = edges.iter().map(|&(a, b)| (a.min(b), a.max(b))).collect();
        edges.sort_unstable();
        let separators: Vec<Separator> = edges
            .iter()
            .enumerate()
            .map(|(id, &(a, b))| Separator {
                id,
                cliques: (a, b),
                scope: cliques[a].scope.intersection(&cliques[b].scope),
            })
            .collect();
        let mut adjacency = vec![Vec::new(); cliques.len()];
        for s in &separators {
            adjacency[s.cliques.0].push((s.cliques.1, s.id));
            adjacency[s.cliques.1].push((s.cliques.0, s.id));
        }
        adjacency.iter_mut().for_each(|a| a.sort_unstable());
        let roots = choose_roots(&cliques, &adjacency);
        let mut tree = JunctionTree {
            cliques,
            separators,
            adjacency,
            roots,
            cpt_assignment: Vec::new(),
            mappings: MappingTableSet::default(),
        };
        tree.mappings = build_mapping_tables(&tree, layout)?;
        Ok(tree)
    }

    pub fn len(&self) -> usize {
        self.cliques.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cliques.is_empty()
    }

    /// The first component's root.
    pub fn root(&self) -> Option<CliqueId> {
        self.roots.first().copied()
    }

    pub fn neighbors(&self, clique: CliqueId) -> &[(CliqueId, SeparatorId)] {
        &self.adjacency[clique]
    }

    /// Smallest clique containing `var`, ties to the lowest id.
    pub fn home_clique(&self, var: VarId) -> Option<CliqueId> {
        self.cliques.iter().filter(|c| c.scope.contains(var)).min_by_key(|c| (c.scope.table_size(), c.id)).map(|c| c.id)
    }

    pub fn mapping(&self, clique: CliqueId, separator: SeparatorId) -> Option<&MappingTable> {
        self.mappings.get(clique, separator)
    }

    pub fn relayout(&mut self, layout: Layout) {
        self.mappings = self.mappings.relayout(layout);
    }

    /// For every variable, the cliques containing it induce a connected subtree.
    pub fn has_running_intersection(&self) -> bool {
        let max_var = self.cliques.iter().flat_map(|c| c.scope.vars().iter().copied()).max();
        let Some(max_var) = max_var else { return true };
        (0..=max_var).all(|v| {
            let holders: Vec<CliqueId> = self.cliques.iter().filter(|c| c.scope.contains(v)).map(|c| c.id).collect();
            let Some(&start) = holders.first() else { return true };
            let mut seen = vec![false; self.cliques.len()];
            let mut queue = VecDeque::from([start]);
            seen[start] = true;
            let mut reached = 1;
            while let Some(c) = queue.pop_front() {
                for &(n, _) in &self.adjacency[c] {
                    if !seen[n] && self.cliques[n].scope.contains(v) {
                        seen[n] = true;
                        reached += 1;
                        queue.push_back(n);
                    }
                }
            }
            reached == holders.len()
        })
    }

    /// Structural invariants: forest shape, separators as intersections,
    /// running intersection, clique maximality.
    pub fn check_invariants(&self) -> bool {
        let forest = self.separators.len() + self.roots.len() == self.cliques.len();
        let seps = self.separators.iter().all(|s| {
            let (a, b) = s.cliques;
            s.scope == self.cliques[a].scope.intersection(&self.cliques[b].scope)
        });
        let maximal =
            self.cliques.iter().all(|c| !self.cliques.iter().any(|d| d.id != c.id && c.scope.is_subset_of(&d.scope)));
        forest && seps && maximal && self.has_running_intersection()
    }
}

/// Kruskal over clique pairs with a shared variable: heavier intersections
/// first, ties to the lexicographically smaller `(i, k)`.
fn spanning_edges(cliques: &[Clique]) -> Vec<(CliqueId, CliqueId)> {
    let mut candidates = Vec::new();
    for a in 0..cliques.len() {
        for b in a + 1..cliques.len() {
            let w = cliques[a].scope.intersection(&cliques[b].scope).len();
            if w > 0 {
                candidates.push((std::cmp::Reverse(w), a, b));
            }
        }
    }
    candidates.sort_unstable();
    let mut parent: Vec<usize> = (0..cliques.len()).collect();
    fn find(parent: &mut [usize], mut x: usize) -> usize {
        while parent[x] != x {
            parent[x] = parent[parent[x]];
            x = parent[x];
        }
        x
    }
    let mut edges = Vec::new();
    for (_, a, b) in candidates {
        let (ra, rb) = (find(&mut parent, a), find(&mut parent, b));
        if ra != rb {
            parent[ra] = rb;
            edges.push((a, b));
        }
    }
    edges
}

fn choose_roots(cliques: &[Clique], adjacency: &[Vec<(CliqueId, SeparatorId)>]) -> Vec<CliqueId> {
    let mut component = vec![usize::MAX; cliques.len()];
    let mut roots = Vec::new();
    for start in 0..cliques.len() {
        if component[start] != usize::MAX {
            continue;
        }
        let mut members = vec![start];
        component[start] = roots.len();
        let mut i = 0;
        while i < members.len() {
            for &(n, _) in &adjacency[members[i]] {
                if component[n] == usize::MAX {
                    component[n] = roots.len();
                    members.push(n);
                }
            }
            i += 1;
        }
        let root = members
            .iter()
            .copied()
            .max_by_key(|&c| (cliques[c].scope.table_size(), std::cmp::Reverse(c)))
            .expect("component is non-empty");
        roots.push(root);
    }
    roots
}

/// Maximum spanning forest over the clique graph, root selection and
/// mapping tables. Cliques are given as sorted member lists.
pub fn build_tree(net: &BayesianNetwork, cliques: &[Vec<VarId>], layout: Layout) -> Result<JunctionTree> {
    let scopes = cliques.iter().map(|c| net.scope_of(c)).collect::<Result<Vec<_>>>()?;
    JunctionTree::from_cliques(scopes, layout)
}

/// Each CPT goes to the smallest covering clique, ties to the lowest id.
pub fn assign_cpts(net: &BayesianNetwork, tree: &JunctionTree) -> Result<Vec<CliqueId>> {
    net.cpts()
        .iter()
        .map(|cpt| {
            tree.cliques
                .iter()
                .filter(|c| cpt.table.scope().is_subset_of(&c.scope))
                .min_by_key(|c| (c.scope.table_size(), c.id))
                .map(|c| c.id)
                .ok_or_else(|| Error::NoCoveringClique(net.variable(cpt.child).name.clone()))
        })
        .collect()
}

pub fn build_mapping_tables(tree: &JunctionTree, layout: Layout) -> Result<MappingTableSet> {
    let per_separator = tree
        .separators
        .iter()
        .map(|s| {
            let (a, b) = s.cliques;
            Ok(SeparatorMappings {
                sides: [
                    (a, MappingTable::build(&tree.cliques[a].scope, &s.scope, layout)?),
                    (b, MappingTable::build(&tree.cliques[b].scope, &s.scope, layout)?),
                ],
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(MappingTableSet { layout, per_separator })
}

/// The whole pipeline: moralize, triangulate, extract cliques, build the
/// tree, assign CPTs, precompute mapping tables.
pub fn compile(net: &BayesianNetwork, options: CompileOptions) -> Result<JunctionTree> {
    let moral = moralize(net);
    let tri = triangulate(&moral, &net.cardinalities());
    let cliques = extract_cliques(&tri.graph, &tri.elimination_order)?;
    let mut tree = build_tree(net, &cliques, options.layout)?;
    tree.cpt_assignment = assign_cpts(net, &tree)?;
    Ok(tree)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::fixtures;

    fn binary(vars: &[usize]) -> Scope {
        Scope::new(vars.iter().map(|&v| (v, 2))).unwrap()
    }

    #[test]
    fn diamond_tree() {
        let net = fixtures::diamond();
        let tree = compile(&net, CompileOptions::default()).unwrap();
        assert_eq!(tree.len(), 2);
        assert_eq!(tree.cliques[0].scope.vars(), &[0, 1, 2]);
        assert_eq!(tree.cliques[1].scope.vars(), &[1, 2, 3]);
        assert_eq!(tree.separators.len(), 1);
        assert_eq!(tree.separators[0].scope.vars(), &[1, 2]);
        assert_eq!(tree.roots, vec![0]);
        // D|B,C only fits the second clique; A, B, C fit the first (lower id on ties)
        assert_eq!(tree.cpt_assignment, vec![0, 0, 0, 1]);
        assert!(tree.check_invariants());
    }

    #[test]
    fn chain_of_three_cliques() {
        let tree =
            JunctionTree::from_cliques(vec![binary(&[0, 1]), binary(&[1, 2]), binary(&[2, 3])], Layout::Flat).unwrap();
        let edges: Vec<_> = tree.separators.iter().map(|s| (s.cliques, s.scope.vars().to_vec())).collect();
        assert_eq!(edges, vec![((0, 1), vec![1]), ((1, 2), vec![2])]);
        assert!(tree.has_running_intersection());
    }

    #[test]
    fn single_clique_tree() {
        let net = fixtures::single([0.3, 0.7]);
        let tree = compile(&net, CompileOptions::default()).unwrap();
        assert_eq!(tree.len(), 1);
        assert!(tree.separators.is_empty());
        assert_eq!(tree.roots, vec![0]);
        assert_eq!(tree.cpt_assignment, vec![0]);
    }

    #[test]
    fn five_node_network_gives_two_clique_shapes() {
        let net = fixtures::five_node();
        let tree = compile(&net, CompileOptions::default()).unwrap();
        let scopes: Vec<_> = tree.cliques.iter().map(|c| c.scope.vars().to_vec()).collect();
        assert_eq!(scopes, vec![vec![0, 1, 3], vec![1, 2], vec![3, 4]]);
        assert_eq!(tree.roots, vec![0]);
        let sep = tree.separators.iter().find(|s| s.cliques == (0, 1)).unwrap();
        assert_eq!(tree.mapping(0, sep.id).unwrap().list(0), vec![0, 1, 4, 5]);
        assert_eq!(tree.mapping(0, sep.id).unwrap().list(1), vec![2, 3, 6, 7]);
        assert_eq!(tree.mapping(1, sep.id).unwrap().list(0), vec![0, 1]);
        assert_eq!(tree.mapping(1, sep.id).unwrap().list(1), vec![2, 3]);
    }

    #[test]
    fn disconnected_network_compiles_to_a_forest() {
        use crate::model::{make_cpt, Variable};
        let vars: Vec<Variable> =
            ["A", "B", "C", "D"].iter().enumerate().map(|(i, n)| fixtures::var(i, n, 2)).collect();
        let cpts = vec![
            make_cpt(&vars, 0, vec![], vec![0.5, 0.5]).unwrap(),
            make_cpt(&vars, 1, vec![0], vec![0.5, 0.5, 0.1, 0.9]).unwrap(),
            make_cpt(&vars, 2, vec![], vec![0.2, 0.8]).unwrap(),
            make_cpt(&vars, 3, vec![2], vec![0.5, 0.5, 0.3, 0.7]).unwrap(),
        ];
        let net = BayesianNetwork::new(vars, cpts).unwrap();
        let tree = compile(&net, CompileOptions::default()).unwrap();
        assert_eq!(tree.len(), 2);
        assert!(tree.separators.is_empty());
        assert_eq!(tree.roots, vec![0, 1]);
        assert!(tree.check_invariants());
    }

    #[test]
    fn equal_size_tie_goes_to_lower_clique() {
        // A sits in both {A,B} and {A,C}; both have 4 entries
        let tree = JunctionTree::from_cliques(vec![binary(&[0, 1]), binary(&[0, 2])], Layout::Flat).unwrap();
        use crate::model::{make_cpt, Variable};
        let vars: Vec<Variable> = ["A", "B", "C"].iter().enumerate().map(|(i, n)| fixtures::var(i, n, 2)).collect();
        let cpts = vec![
            make_cpt(&vars, 0, vec![], vec![0.5, 0.5]).unwrap(),
            make_cpt(&vars, 1, vec![0], vec![0.5; 4]).unwrap(),
            make_cpt(&vars, 2, vec![0], vec![0.5; 4]).unwrap(),
        ];
        let net = BayesianNetwork::new(vars, cpts).unwrap();
        assert_eq!(assign_cpts(&net, &tree).unwrap(), vec![0, 0, 1]);
    }

    #[test]
    fn compilation_is_deterministic() {
        let net = crate::synth::gen_network(&crate::synth::GenSpec { seed: 11, variables: 12, ..Default::default() });
        let a = compile(&net, CompileOptions::default()).unwrap();
        let b = compile(&net, CompileOptions::default()).unwrap();
        assert_eq!(a, b);
        assert!(a.check_invariants());
    }
}
