//! Discrete Bayesian networks.

use std::collections::{BTreeMap, BTreeSet, HashSet};

use crate::error::{Error, Result};
use crate::potential::{PotentialTable, Scope};

pub type VarId = usize;

/// Tolerance for a CPT row summing to one.
pub const ROW_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Variable {
    pub id: VarId,
    pub name: String,
    pub cardinality: usize,
}

/// `P(child | parents)` stored over the scope `(parents..., child)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Cpt {
    pub child: VarId,
    pub parents: Vec<VarId>,
    pub table: PotentialTable,
}

impl Cpt {
    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        let card = self.table.scope().cards().last().copied().unwrap_or(1);
        self.table.values().chunks(card)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BayesianNetwork {
    variables: Vec<Variable>,
    /// Indexed by child id.
    cpts: Vec<Cpt>,
}

impl BayesianNetwork {
    /// Assembles and validates a network. `cpts` may be given in any order,
    /// but there must be exactly one per variable.
    pub fn new(variables: Vec<Variable>, cpts: Vec<Cpt>) -> Result<Self> {
        let mut names = HashSet::new();
        for (i, v) in variables.iter().enumerate() {
            if v.id != i {
                return Err(Error::SchemaViolation {
                    path: format!("/variables/{i}/id"),
                    message: format!("expected dense id {i}, found {}", v.id),
                });
            }
            if !names.insert(v.name.as_str()) {
                return Err(Error::DuplicateVariable(v.name.clone()));
            }
        }
        let mut slots: Vec<Option<Cpt>> = vec![None; variables.len()];
        for cpt in cpts {
            let var = variables.get(cpt.child).ok_or_else(|| Error::UnknownVariable(cpt.child.to_string()))?;
            if slots[cpt.child].is_some() {
                return Err(Error::DuplicateCpt(var.name.clone()));
            }
            let child = cpt.child;
            slots[child] = Some(cpt);
        }
        let cpts = slots
            .into_iter()
            .zip(&variables)
            .map(|(c, v)| c.ok_or_else(|| Error::MissingCpt(v.name.clone())))
            .collect::<Result<Vec<_>>>()?;
        let net = BayesianNetwork { variables, cpts };
        validate_network(&net)?;
        Ok(net)
    }

    pub fn into_parts(self) -> (Vec<Variable>, Vec<Cpt>) {
        (self.variables, self.cpts)
    }

    pub fn variables(&self) -> &[Variable] {
        &self.variables
    }

    pub fn variable(&self, id: VarId) -> &Variable {
        &self.variables[id]
    }

    pub fn len(&self) -> usize {
        self.variables.len()
    }

    pub fn is_empty(&self) -> bool {
        self.variables.is_empty()
    }

    pub fn cpts(&self) -> &[Cpt] {
        &self.cpts
    }

    pub fn cpt(&self, child: VarId) -> &Cpt {
        &self.cpts[child]
    }

    pub fn cardinality(&self, id: VarId) -> usize {
        self.variables[id].cardinality
    }

    pub fn cardinalities(&self) -> Vec<usize> {
        self.variables.iter().map(|v| v.cardinality).collect()
    }

    pub fn find(&self, name: &str) -> Option<VarId> {
        self.variables.iter().position(|v| v.name == name)
    }

    /// Scope over `vars` with this network's cardinalities, in the given order.
    pub fn scope_of(&self, vars: &[VarId]) -> Result<Scope> {
        Scope::new(vars.iter().map(|&v| (v, self.cardinality(v))))
    }
}

/// Builds a CPT for `child` over `(parents..., child)` from a flat row-major table.
pub fn make_cpt(variables: &[Variable], child: VarId, parents: Vec<VarId>, table: Vec<f64>) -> Result<Cpt> {
    let mut entries = Vec::with_capacity(parents.len() + 1);
    for &p in parents.iter().chain(std::iter::once(&child)) {
        let var = variables.get(p).ok_or_else(|| Error::UnknownVariable(p.to_string()))?;
        entries.push((p, var.cardinality));
    }
    let scope = Scope::new(entries)?;
    if table.len() != scope.table_size() {
        return Err(Error::TableSizeMismatch {
            variable: variables[child].name.clone(),
            expected: scope.table_size(),
            got: table.len(),
        });
    }
    Ok(Cpt { child, parents, table: PotentialTable::new(scope, table)? })
}

/// Checks every variable and CPT invariant, plus acyclicity.
pub fn validate_network(net: &BayesianNetwork) -> Result<()> {
    if net.variables.is_empty() {
        return Err(Error::EmptyNetwork);
    }
    for v in &net.variables {
        if v.cardinality < 2 {
            return Err(Error::CardinalityTooSmall { variable: v.name.clone(), cardinality: v.cardinality });
        }
    }
    for (id, cpt) in net.cpts.iter().enumerate() {
        let name = &net.variables[id].name;
        let mut expected = Vec::with_capacity(cpt.parents.len() + 1);
        for &p in cpt.parents.iter().chain(std::iter::once(&cpt.child)) {
            let var = net.variables.get(p).ok_or_else(|| Error::UnknownVariable(p.to_string()))?;
            expected.push((p, var.cardinality));
        }
        if cpt.child != id || Scope::new(expected)? != *cpt.table.scope() {
            return Err(Error::SchemaViolation {
                path: format!("/cpts/{id}"),
                message: format!("CPT scope of `{name}` must be (parents..., child)"),
            });
        }
        for &value in cpt.table.values() {
            if !(0.0..=1.0).contains(&value) {
                return Err(Error::CptEntryOutOfRange { variable: name.clone(), value });
            }
        }
        for (row, entries) in cpt.rows().enumerate() {
            let sum: f64 = entries.iter().sum();
            if (sum - 1.0).abs() > ROW_TOLERANCE {
                return Err(Error::CptRowNotNormalized { variable: name.clone(), row, sum });
            }
        }
    }
    topological_order(net).map(|_| ())
}

/// Kahn's algorithm; among ready variables the smallest id goes first.
pub fn topological_order(net: &BayesianNetwork) -> Result<Vec<VarId>> {
    let n = net.variables.len();
    let mut indegree = vec![0usize; n];
    let mut children = vec![Vec::new(); n];
    for cpt in &net.cpts {
        for &p in &cpt.parents {
            indegree[cpt.child] += 1;
            children[p].push(cpt.child);
        }
    }
    let mut ready: BTreeSet<VarId> = (0..n).filter(|&v| indegree[v] == 0).collect();
    let mut order = Vec::with_capacity(n);
    while let Some(v) = ready.pop_first() {
        order.push(v);
        for &c in &children[v] {
            indegree[c] -= 1;
            if indegree[c] == 0 {
                ready.insert(c);
            }
        }
    }
    if order.len() != n {
        return Err(Error::CyclicGraph);
    }
    Ok(order)
}

/// Observed states keyed by variable id.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Evidence {
    assignments: BTreeMap<VarId, usize>,
}

impl Evidence {
    pub fn new() -> Self {
        Self::default()
    }

    /// Adds one observation, checking it against the network.
    pub fn observe(&mut self, net: &BayesianNetwork, var: VarId, state: usize) -> Result<()> {
        let v = net.variables.get(var).ok_or_else(|| Error::UnknownVariable(var.to_string()))?;
        if state >= v.cardinality {
            return Err(Error::StateOutOfRange { variable: v.name.clone(), state, cardinality: v.cardinality });
        }
        if self.assignments.contains_key(&var) {
            return Err(Error::ConflictingEvidence(v.name.clone()));
        }
        self.assignments.insert(var, state);
        Ok(())
    }

    /// Parses `NAME=STATE`, where STATE is a state label or a numeric index.
    pub fn observe_named(&mut self, net: &BayesianNetwork, labels: &[Vec<String>], spec: &str) -> Result<()> {
        let (name, state) = spec.split_once('=').ok_or_else(|| Error::SyntaxError {
            line: 1,
            col: 1,
            message: format!("evidence `{spec}` must look like VAR=STATE"),
        })?;
        let var = net.find(name.trim()).ok_or_else(|| Error::UnknownVariable(name.trim().to_string()))?;
        let state = state.trim();
        let index =
            labels.get(var).and_then(|l| l.iter().position(|s| s == state)).or_else(|| state.parse().ok()).ok_or_else(
                || Error::StateOutOfRange {
                    variable: name.trim().to_string(),
                    state: usize::MAX,
                    cardinality: net.cardinality(var),
                },
            )?;
        self.observe(net, var, index)
    }

    pub fn get(&self, var: VarId) -> Option<usize> {
        self.assignments.get(&var).copied()
    }

    pub fn iter(&self) -> impl Iterator<Item = (VarId, usize)> + '_ {
        self.assignments.iter().map(|(&v, &s)| (v, s))
    }

    pub fn len(&self) -> usize {
        self.assignments.len()
    }

    pub fn is_empty(&self) -> bool {
        self.assignments.is_empty()
    }
}

/// Small hand-built networks shared by tests and examples.
pub mod fixtures {
    use super::*;

    pub fn var(id: VarId, name: &str, cardinality: usize) -> Variable {
        Variable { id, name: name.to_string(), cardinality }
    }

    pub fn single(p: [f64; 2]) -> BayesianNetwork {
        let vars = vec![var(0, "A", 2)];
        let cpt = make_cpt(&vars, 0, vec![], p.to_vec()).unwrap();
        BayesianNetwork::new(vars, vec![cpt]).unwrap()
    }

    /// A→B, A→C, B→D, C→D, all binary.
    pub fn diamond() -> BayesianNetwork {
        let vars = vec![var(0, "A", 2), var(1, "B", 2), var(2, "C", 2), var(3, "D", 2)];
        let cpts = vec![
            make_cpt(&vars, 0, vec![], vec![0.6, 0.4]).unwrap(),
            make_cpt(&vars, 1, vec![0], vec![0.2, 0.8, 0.75, 0.25]).unwrap(),
            make_cpt(&vars, 2, vec![0], vec![0.9, 0.1, 0.3, 0.7]).unwrap(),
            make_cpt(&vars, 3, vec![1, 2], vec![0.99, 0.01, 0.4, 0.6, 0.35, 0.65, 0.05, 0.95]).unwrap(),
        ];
        BayesianNetwork::new(vars, cpts).unwrap()
    }

    /// Binary chain X0→X1→…, each link a noisy copy.
    pub fn chain(n: usize) -> BayesianNetwork {
        let vars: Vec<Variable> = (0..n).map(|i| var(i, &format!("X{i}"), 2)).collect();
        let cpts = (0..n)
            .map(|i| {
                if i == 0 {
                    make_cpt(&vars, 0, vec![], vec![0.5, 0.5]).unwrap()
                } else {
                    make_cpt(&vars, i, vec![i - 1], vec![0.9, 0.1, 0.2, 0.8]).unwrap()
                }
            })
            .collect();
        BayesianNetwork::new(vars, cpts).unwrap()
    }

    /// A→C←B.
    pub fn collider() -> BayesianNetwork {
        let vars = vec![var(0, "A", 2), var(1, "B", 2), var(2, "C", 2)];
        let cpts = vec![
            make_cpt(&vars, 0, vec![], vec![0.5, 0.5]).unwrap(),
            make_cpt(&vars, 1, vec![], vec![0.1, 0.9]).unwrap(),
            make_cpt(&vars, 2, vec![0, 1], vec![0.9, 0.1, 0.5, 0.5, 0.4, 0.6, 0.2, 0.8]).unwrap(),
        ];
        BayesianNetwork::new(vars, cpts).unwrap()
    }

    /// Five binary variables whose junction tree has cliques {A,B,D}, {B,C}
    /// and {D,E}: D has parents A and B, C has parent B, E has parent D.
    pub fn five_node() -> BayesianNetwork {
        let vars = vec![var(0, "A", 2), var(1, "B", 2), var(2, "C", 2), var(3, "D", 2), var(4, "E", 2)];
        let cpts = vec![
            make_cpt(&vars, 0, vec![], vec![0.3, 0.7]).unwrap(),
            make_cpt(&vars, 1, vec![], vec![0.55, 0.45]).unwrap(),
            make_cpt(&vars, 2, vec![1], vec![0.1, 0.9, 0.6, 0.4]).unwrap(),
            make_cpt(&vars, 3, vec![0, 1], vec![0.8, 0.2, 0.5, 0.5, 0.25, 0.75, 0.05, 0.95]).unwrap(),
            make_cpt(&vars, 4, vec![3], vec![0.7, 0.3, 0.2, 0.8]).unwrap(),
        ];
        BayesianNetwork::new(vars, cpts).unwrap()
    }
}

#[cfg(test)]
mod tests {
    use super::fixtures::*;
    use super::*;

    fn binary_vars(names: &[&str]) -> Vec<Variable> {
        names.iter().enumerate().map(|(i, n)| var(i, n, 2)).collect()
    }

    #[test]
    fn smallest_valid_network() {
        let net = single([0.3, 0.7]);
        assert!(validate_network(&net).is_ok());
    }

    #[test]
    fn unnormalized_row_is_rejected() {
        let vars = binary_vars(&["A"]);
        let cpt = make_cpt(&vars, 0, vec![], vec![0.5, 0.6]).unwrap();
        let err = BayesianNetwork::new(vars, vec![cpt]).unwrap_err();
        assert!(matches!(err, Error::CptRowNotNormalized { row: 0, .. }), "{err:?}");
    }

    #[test]
    fn two_cycle_is_rejected() {
        let vars = binary_vars(&["A", "B"]);
        let cpts = vec![
            make_cpt(&vars, 0, vec![1], vec![0.5; 4]).unwrap(),
            make_cpt(&vars, 1, vec![0], vec![0.5; 4]).unwrap(),
        ];
        assert_eq!(BayesianNetwork::new(vars, cpts).unwrap_err(), Error::CyclicGraph);
    }

    #[test]
    fn cardinality_one_is_rejected() {
        let vars = vec![var(0, "A", 1)];
        let cpt = make_cpt(&vars, 0, vec![], vec![1.0]).unwrap();
        assert!(matches!(BayesianNetwork::new(vars, vec![cpt]), Err(Error::CardinalityTooSmall { .. })));
    }

    #[test]
    fn topological_orders() {
        let vars = binary_vars(&["A", "B"]);
        let chain = BayesianNetwork::new(
            vars.clone(),
            vec![make_cpt(&vars, 1, vec![0], vec![0.5; 4]).unwrap(), make_cpt(&vars, 0, vec![], vec![0.5; 2]).unwrap()],
        )
        .unwrap();
        assert_eq!(topological_order(&chain).unwrap(), vec![0, 1]);

        let indep = BayesianNetwork::new(
            vars.clone(),
            vec![make_cpt(&vars, 0, vec![], vec![0.5; 2]).unwrap(), make_cpt(&vars, 1, vec![], vec![0.5; 2]).unwrap()],
        )
        .unwrap();
        assert_eq!(topological_order(&indep).unwrap(), vec![0, 1]);

        // Reverse the declared ids so the tie-break actually matters: B(0)→A(1).
        let vars = binary_vars(&["B", "A"]);
        let rev = BayesianNetwork::new(
            vars.clone(),
            vec![make_cpt(&vars, 0, vec![1], vec![0.5; 4]).unwrap(), make_cpt(&vars, 1, vec![], vec![0.5; 2]).unwrap()],
        )
        .unwrap();
        assert_eq!(topological_order(&rev).unwrap(), vec![1, 0]);
    }

    #[test]
    fn diamond_order_is_tie_break_minimal() {
        let net = diamond();
        // enumerate all permutations, keep the valid ones, take the lexicographic minimum
        let mut best: Option<Vec<usize>> = None;
        let mut perm = vec![0, 1, 2, 3];
        permutations(&mut perm, 0, &mut |p| {
            let pos = |v: usize| p.iter().position(|&x| x == v).unwrap();
            let ok = net.cpts().iter().all(|c| c.parents.iter().all(|&q| pos(q) < pos(c.child)));
            if ok && best.as_ref().is_none_or(|b| p < b.as_slice()) {
                best = Some(p.to_vec());
            }
        });
        assert_eq!(best.unwrap(), vec![0, 1, 2, 3]);
        assert_eq!(topological_order(&net).unwrap(), vec![0, 1, 2, 3]);
    }

    fn permutations(v: &mut Vec<usize>, k: usize, f: &mut dyn FnMut(&[usize])) {
        if k == v.len() {
            f(v);
            return;
        }
        for i in k..v.len() {
            v.swap(k, i);
            permutations(v, k + 1, f);
            v.swap(k, i);
        }
    }

    #[test]
    fn evidence_checks() {
        let net = diamond();
        let mut e = Evidence::new();
        e.observe(&net, 3, 1).unwrap();
        assert!(matches!(e.observe(&net, 3, 0), Err(Error::ConflictingEvidence(_))));
        assert!(matches!(e.observe(&net, 2, 2), Err(Error::StateOutOfRange { .. })));
        assert!(matches!(e.observe(&net, 9, 0), Err(Error::UnknownVariable(_))));
        let labels = vec![vec!["no".to_string(), "yes".to_string()]; 4];
        e.observe_named(&net, &labels, "C=yes").unwrap();
        assert_eq!(e.get(2), Some(1));
        assert!(matches!(e.observe_named(&net, &labels, "Q=1"), Err(Error::UnknownVariable(_))));
    }
}
