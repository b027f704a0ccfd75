//! Moralization, min-fill triangulation and maximal-clique extraction.

use std::collections::BTreeSet;

use crate::error::{Error, Result};
use crate::model::{BayesianNetwork, VarId};

/// Undirected simple graph over dense vertex ids.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct UndirectedGraph {
    adj: Vec<BTreeSet<VarId>>,
}

/// The moral graph is just an undirected graph with a provenance.
pub type MoralGraph = UndirectedGraph;

impl UndirectedGraph {
    pub fn new(n: usize) -> Self {
        UndirectedGraph { adj: vec![BTreeSet::new(); n] }
    }

    pub fn from_edges(n: usize, edges: &[(VarId, VarId)]) -> Self {
        let mut g = Self::new(n);
        for &(a, b) in edges {
            g.add_edge(a, b);
        }
        g
    }

    pub fn len(&self) -> usize {
        self.adj.len()
    }

    pub fn is_empty(&self) -> bool {
        self.adj.is_empty()
    }

    pub fn add_edge(&mut self, a: VarId, b: VarId) -> bool {
        if a == b {
            return false;
        }
        self.adj[b].insert(a);
        self.adj[a].insert(b)
    }

    pub fn has_edge(&self, a: VarId, b: VarId) -> bool {
        self.adj[a].contains(&b)
    }

    pub fn neighbors(&self, v: VarId) -> &BTreeSet<VarId> {
        &self.adj[v]
    }

    /// Edges `(a, b)` with `a < b`, sorted.
    pub fn edges(&self) -> Vec<(VarId, VarId)> {
        let mut out = Vec::new();
        for (a, ns) in self.adj.iter().enumerate() {
            out.extend(ns.iter().filter(|&&b| b > a).map(|&b| (a, b)));
        }
        out
    }

    pub fn is_clique(&self, vs: &[VarId]) -> bool {
        vs.iter().enumerate().all(|(i, &a)| vs[i + 1..].iter().all(|&b| self.has_edge(a, b)))
    }
}

pub fn moralize(net: &BayesianNetwork) -> MoralGraph {
    let mut g = UndirectedGraph::new(net.len());
    for cpt in net.cpts() {
        for (i, &p) in cpt.parents.iter().enumerate() {
            g.add_edge(p, cpt.child);
            for &q in &cpt.parents[i + 1..] {
                g.add_edge(p, q);
            }
        }
    }
    g
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Triangulation {
    pub graph: UndirectedGraph,
    pub elimination_order: Vec<VarId>,
    pub fill_edges: Vec<(VarId, VarId)>,
}

/// Greedy min-fill elimination. Ties go to the vertex whose elimination
/// clique has the smaller table, then to the smaller id.
pub fn triangulate(g: &MoralGraph, cardinalities: &[usize]) -> Triangulation {
    let n = g.len();
    let mut work = g.clone();
    let mut chordal = g.clone();
    let mut alive = vec![true; n];
    let mut order = Vec::with_capacity(n);
    let mut fill_edges = Vec::new();

    for _ in 0..n {
        let mut best: Option<(usize, u128, VarId)> = None;
        for v in (0..n).filter(|&v| alive[v]) {
            let ns: Vec<VarId> = work.neighbors(v).iter().copied().collect();
            let mut fill = 0usize;
            for (i, &a) in ns.iter().enumerate() {
                fill += ns[i + 1..].iter().filter(|&&b| !work.has_edge(a, b)).count();
            }
            let size = std::iter::once(v)
                .chain(ns.iter().copied())
                .fold(1u128, |acc, u| acc.saturating_mul(cardinalities[u] as u128));
            let key = (fill, size, v);
            if best.is_none_or(|b| key < b) {
                best = Some(key);
            }
        }
        let (_, _, v) = best.expect("some vertex remains");
        let ns: Vec<VarId> = work.neighbors(v).iter().copied().collect();
        for (i, &a) in ns.iter().enumerate() {
            for &b in &ns[i + 1..] {
                if work.add_edge(a, b) {
                    chordal.add_edge(a, b);
                    fill_edges.push((a.min(b), a.max(b)));
                }
            }
        }
        for &u in &ns {
            work.adj[u].remove(&v);
        }
        work.adj[v].clear();
        alive[v] = false;
        order.push(v);
    }
    Triangulation { graph: chordal, elimination_order: order, fill_edges }
}

/// True iff `order` is a perfect elimination order of `g`.
pub fn is_perfect_elimination_order(g: &UndirectedGraph, order: &[VarId]) -> bool {
    if order.len() != g.len() {
        return false;
    }
    let mut pos = vec![usize::MAX; g.len()];
    for (i, &v) in order.iter().enumerate() {
        if pos[v] != usize::MAX {
            return false;
        }
        pos[v] = i;
    }
    order.iter().all(|&v| {
        let later: Vec<VarId> = g.neighbors(v).iter().copied().filter(|&u| pos[u] > pos[v]).collect();
        g.is_clique(&later)
    })
}

/// Maximum cardinality search followed by a PEO check.
pub fn is_chordal(g: &UndirectedGraph) -> bool {
    let n = g.len();
    let mut weight = vec![0usize; n];
    let mut numbered = vec![false; n];
    let mut visit = Vec::with_capacity(n);
    for _ in 0..n {
        let v = (0..n).filter(|&v| !numbered[v]).max_by_key(|&v| (weight[v], std::cmp::Reverse(v))).unwrap();
        numbered[v] = true;
        visit.push(v);
        for &u in g.neighbors(v) {
            if !numbered[u] {
                weight[u] += 1;
            }
        }
    }
    visit.reverse();
    is_perfect_elimination_order(g, &visit)
}

/// Maximal cliques of a chordal graph given a perfect elimination order,
/// each sorted ascending, the list sorted lexicographically.
pub fn extract_cliques(g: &UndirectedGraph, order: &[VarId]) -> Result<Vec<Vec<VarId>>> {
    if order.len() != g.len() {
        return Err(Error::NotChordal);
    }
    let mut pos = vec![usize::MAX; g.len()];
    for (i, &v) in order.iter().enumerate() {
        pos[v] = i;
    }
    let mut candidates: Vec<Vec<VarId>> = Vec::with_capacity(order.len());
    for &v in order {
        let mut c: Vec<VarId> = g.neighbors(v).iter().copied().filter(|&u| pos[u] > pos[v]).collect();
        if !g.is_clique(&c) {
            return Err(Error::NotChordal);
        }
        c.push(v);
        c.sort_unstable();
        candidates.push(c);
    }
    candidates.sort_by(|a, b| b.len().cmp(&a.len()).then_with(|| a.cmp(b)));
    let mut kept: Vec<Vec<VarId>> = Vec::new();
    for c in candidates {
        let covered = kept.iter().any(|k| c.iter().all(|v| k.binary_search(v).is_ok()));
        if !covered {
            kept.push(c);
        }
    }
    kept.sort();
    Ok(kept)
}
