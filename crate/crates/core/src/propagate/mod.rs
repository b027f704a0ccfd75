//! Hugin-style two-phase belief propagation over a compiled junction tree.
//!
//! A [`PropagationState`] owns mutable copies of every clique and separator
//! potential. Messages are applied one at a time in the collect/distribute
//! schedule; inside a message the parallel engine splits the separator
//! entries across worker threads.

mod kernel;

use crate::compile::{CliqueId, JunctionTree, SeparatorId};
use crate::error::{Error, Result};
use crate::model::{BayesianNetwork, Evidence, VarId};
use crate::potential::{PotentialTable, Scope};

/// Separators smaller than this run on the calling thread in parallel mode.
pub const DEFAULT_PARALLEL_THRESHOLD: usize = 64;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Engine {
    Sequential,
    Parallel { workers: usize, threshold: usize },
}

impl Engine {
    pub fn parallel(workers: usize) -> Self {
        Engine::Parallel { workers: workers.max(1), threshold: DEFAULT_PARALLEL_THRESHOLD }
    }

    /// Parallel with no small-message cutoff: every message goes to the pool.
    pub fn parallel_always(workers: usize) -> Self {
        Engine::Parallel { workers: workers.max(1), threshold: 0 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Message {
    pub source: CliqueId,
    pub target: CliqueId,
    pub separator: SeparatorId,
}

fn build_pool(workers: usize) -> Result<rayon::ThreadPool> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(workers.max(1))
        .thread_name(|i| format!("jtprop-worker-{i}"))
        .build()
        .map_err(|e| Error::Io(e.to_string()))
}

/// Messages of the collect phase: depth-first post-order from `root`,
/// children in ascending id order, each child sending to its parent.
pub fn collect_schedule(tree: &JunctionTree, root: CliqueId) -> Vec<Message> {
    let mut out = Vec::new();
    // (clique, parent link, next neighbor index)
    type Frame = (CliqueId, Option<(CliqueId, SeparatorId)>, usize);
    let mut stack: Vec<Frame> = vec![(root, None, 0)];
    while let Some(top) = stack.last_mut() {
        let (node, up, next) = *top;
        let neighbors = tree.neighbors(node);
        if next < neighbors.len() {
            top.2 += 1;
            let (child, sep) = neighbors[next];
            if up.map(|(p, _)| p) != Some(child) {
                stack.push((child, Some((node, sep)), 0));
            }
        } else {
            stack.pop();
            if let Some((parent, sep)) = up {
                out.push(Message { source: node, target: parent, separator: sep });
            }
        }
    }
    out
}

/// Messages of the distribute phase: pre-order from `root`, each parent
/// sending to a child just before that child's subtree is visited.
pub fn distribute_schedule(tree: &JunctionTree, root: CliqueId) -> Vec<Message> {
    let mut out = Vec::new();
    let mut stack: Vec<(CliqueId, Option<CliqueId>, usize)> = vec![(root, None, 0)];
    while let Some(top) = stack.last_mut() {
        let (node, parent, next) = *top;
        let neighbors = tree.neighbors(node);
        if next < neighbors.len() {
            top.2 += 1;
            let (child, sep) = neighbors[next];
            if parent != Some(child) {
                out.push(Message { source: node, target: child, separator: sep });
                stack.push((child, Some(node), 0));
            }
        } else {
            stack.pop();
        }
    }
    out
}

pub struct PropagationState<'t> {
    tree: &'t JunctionTree,
    cliques: Vec<PotentialTable>,
    separators: Vec<PotentialTable>,
    evidence_applied: bool,
    engine: Engine,
    pool: Option<rayon::ThreadPool>,
    messages_passed: usize,
}

impl<'t> PropagationState<'t> {
    /// Clique potentials are the product of their assigned CPTs; separators
    /// start at one.
    pub fn initialize(tree: &'t JunctionTree, net: &BayesianNetwork, engine: Engine) -> Result<Self> {
        let mut cliques: Vec<PotentialTable> =
            tree.cliques.iter().map(|c| PotentialTable::ones(c.scope.clone())).collect();
        if tree.cpt_assignment.len() != net.len() {
            return Err(Error::NoCoveringClique("<tree has no CPT assignment for this network>".into()));
        }
        for (cpt, &c) in net.cpts().iter().zip(&tree.cpt_assignment) {
            cliques[c].multiply_into(&cpt.table)?;
        }
        Self::from_potentials(tree, cliques, engine)
    }

    /// Starts from caller-supplied clique potentials (one per clique, same scopes).
    pub fn from_potentials(tree: &'t JunctionTree, cliques: Vec<PotentialTable>, engine: Engine) -> Result<Self> {
        if cliques.len() != tree.len() || cliques.iter().zip(&tree.cliques).any(|(p, c)| p.scope() != &c.scope) {
            return Err(Error::ScopeNotContained);
        }
        let separators = tree.separators.iter().map(|s| PotentialTable::ones(s.scope.clone())).collect();
        let mut state = PropagationState {
            tree,
            cliques,
            separators,
            evidence_applied: false,
            engine: Engine::Sequential,
            pool: None,
            messages_passed: 0,
        };
        state.set_engine(engine)?;
        Ok(state)
    }

    pub fn set_engine(&mut self, engine: Engine) -> Result<()> {
        self.pool =
            match engine {
                Engine::Sequential => None,
                Engine::Parallel { workers, .. } => {
                    // scatter writes rely on every target list set being a partition
                    debug_assert!(self.tree.mappings.separators().iter().all(|m| m
                        .sides
                        .iter()
                        .all(|(c, t)| t.is_partition(self.tree.cliques[*c].scope.table_size()))));
                    Some(build_pool(workers)?)
                }
            };
        self.engine = engine;
        Ok(())
    }

    pub fn engine(&self) -> Engine {
        self.engine
    }

    pub fn tree(&self) -> &'t JunctionTree {
        self.tree
    }

    pub fn clique_potentials(&self) -> &[PotentialTable] {
        &self.cliques
    }

    pub fn separator_potentials(&self) -> &[PotentialTable] {
        &self.separators
    }

    pub fn evidence_applied(&self) -> bool {
        self.evidence_applied
    }

    pub fn messages_passed(&self) -> usize {
        self.messages_passed
    }

    /// Zeroes every entry that disagrees with an observation, in the clique
    /// holding the observed variable's CPT (or its smallest clique when the
    /// tree has no CPT assignment).
    pub fn apply_evidence(&mut self, evidence: &Evidence) -> Result<()> {
        for (var, state) in evidence.iter() {
            let clique = self
                .tree
                .cpt_assignment
                .get(var)
                .copied()
                .or_else(|| self.tree.home_clique(var))
                .ok_or_else(|| Error::UnknownVariable(var.to_string()))?;
            let table = &mut self.cliques[clique];
            let pos = table.scope().position(var).ok_or_else(|| Error::UnknownVariable(var.to_string()))?;
            let stride = table.scope().strides()[pos];
            let card = table.scope().cards()[pos];
            if state >= card {
                return Err(Error::StateOutOfRange { variable: var.to_string(), state, cardinality: card });
            }
            for (i, v) in table.values_mut().iter_mut().enumerate() {
                if (i / stride) % card != state {
                    *v = 0.0;
                }
            }
        }
        self.evidence_applied |= !evidence.is_empty();
        Ok(())
    }

    fn check_message(&self, msg: Message) -> Result<()> {
        let ok = self.tree.separators.get(msg.separator).is_some_and(|s| {
            msg.source != msg.target && s.other(msg.source) == msg.target && s.other(msg.target) == msg.source
        });
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidMessage {
                source_clique: msg.source,
                target_clique: msg.target,
                separator: msg.separator,
            })
        }
    }

    /// Passes one message with the state's engine.
    pub fn message_passing(&mut self, msg: Message) -> Result<()> {
        self.check_message(msg)?;
        match self.engine {
            Engine::Parallel { workers, threshold } if self.separators[msg.separator].len() >= threshold => {
                let pool = self.pool.take().expect("parallel engine has a pool");
                let result = self.pass(msg, Some((&pool, workers)));
                self.pool = Some(pool);
                result
            }
            _ => self.pass(msg, None),
        }
    }

    /// Passes one message on `workers` threads regardless of the engine
    /// setting or separator size.
    pub fn run_parallel_message(&mut self, msg: Message, workers: usize) -> Result<()> {
        self.check_message(msg)?;
        let workers = workers.max(1);
        match self.pool.take() {
            Some(pool) if pool.current_num_threads() == workers => {
                let result = self.pass(msg, Some((&pool, workers)));
                self.pool = Some(pool);
                result
            }
            other => {
                self.pool = other;
                let pool = build_pool(workers)?;
                self.pass(msg, Some((&pool, workers)))
            }
        }
    }

    fn pass(&mut self, msg: Message, parallel: Option<(&rayon::ThreadPool, usize)>) -> Result<()> {
        let tree = self.tree;
        let mu_src = tree.mapping(msg.source, msg.separator).expect("checked message");
        let mu_tgt = tree.mapping(msg.target, msg.separator).expect("checked message");
        let (src, tgt) = pair_mut(&mut self.cliques, msg.source, msg.target);
        let sep = self.separators[msg.separator].values_mut();
        match parallel {
            None => kernel::pass_sequential(src.values(), tgt.values_mut(), sep, mu_src, mu_tgt, msg.separator)?,
            Some((pool, workers)) => kernel::pass_parallel(
                pool,
                workers,
                src.values(),
                tgt.values_mut(),
                sep,
                mu_src,
                mu_tgt,
                msg.separator,
            )?,
        }
        self.messages_passed += 1;
        Ok(())
    }

    /// Collect phase toward `root`. Returns the number of messages passed.
    pub fn collect_evidence(&mut self, root: CliqueId) -> Result<usize> {
        let schedule = collect_schedule(self.tree, root);
        for &m in &schedule {
            self.message_passing(m)?;
        }
        Ok(schedule.len())
    }

    /// Distribute phase away from `root`. Returns the number of messages passed.
    pub fn distribute_evidence(&mut self, root: CliqueId) -> Result<usize> {
        let schedule = distribute_schedule(self.tree, root);
        for &m in &schedule {
            self.message_passing(m)?;
        }
        Ok(schedule.len())
    }

    /// Collect then distribute on every component. Returns the message count,
    /// which is twice the number of separators.
    pub fn belief_propagation(&mut self) -> Result<usize> {
        let mut total = 0;
        for &root in &self.tree.roots {
            total += self.collect_evidence(root)?;
            total += self.distribute_evidence(root)?;
        }
        Ok(total)
    }

    /// Marginal of `var` from its smallest clique (ties to the lowest id).
    pub fn query_marginal(&self, var: VarId, normalize: bool) -> Result<PotentialTable> {
        let clique = self.tree.home_clique(var).ok_or_else(|| Error::UnknownVariable(var.to_string()))?;
        self.query_marginal_from(var, clique, normalize)
    }

    pub fn query_marginal_from(&self, var: VarId, clique: CliqueId, normalize: bool) -> Result<PotentialTable> {
        let table = self.cliques.get(clique).ok_or_else(|| Error::UnknownVariable(var.to_string()))?;
        let pos = table.scope().position(var).ok_or(Error::ScopeNotContained)?;
        let onto = Scope::new([(var, table.scope().cards()[pos])])?;
        let m = table.marginalize(&onto)?;
        if normalize {
            m.normalize()
        } else {
            Ok(m)
        }
    }

    /// Largest relative disagreement between a separator potential and the
    /// marginal of either endpoint clique onto it.
    pub fn consistency_error(&self) -> f64 {
        let mut worst: f64 = 0.0;
        for s in &self.tree.separators {
            let sep = &self.separators[s.id];
            for c in [s.cliques.0, s.cliques.1] {
                let m = self.cliques[c].marginalize(&s.scope).expect("separator within clique");
                for (a, b) in m.values().iter().zip(sep.values()) {
                    let scale = a.abs().max(b.abs());
                    if scale > 0.0 {
                        worst = worst.max((a - b).abs() / scale);
                    }
                }
            }
        }
        worst
    }

    pub fn is_globally_consistent(&self, rel_tol: f64) -> bool {
        self.consistency_error() <= rel_tol
    }
}

/// Shared access to `v[a]` and exclusive access to `v[b]`, `a != b`.
fn pair_mut<T>(v: &mut [T], a: usize, b: usize) -> (&T, &mut T) {
    assert_ne!(a, b);
    if a < b {
        let (lo, hi) = v.split_at_mut(b);
        (&lo[a], &mut hi[0])
    } else {
        let (lo, hi) = v.split_at_mut(a);
        (&hi[0], &mut lo[b])
    }
}

/// Compiles nothing: initializes, applies `evidence`, propagates and returns
/// normalized marginals for `vars`.
pub fn posterior_marginals(
    tree: &JunctionTree,
    net: &BayesianNetwork,
    evidence: &Evidence,
    vars: &[VarId],
    engine: Engine,
) -> Result<Vec<PotentialTable>> {
    let mut state = PropagationState::initialize(tree, net, engine)?;
    state.apply_evidence(evidence)?;
    state.belief_propagation()?;
    vars.iter().map(|&v| state.query_marginal(v, true)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::compile::{compile, CompileOptions, JunctionTree, Layout};
    use crate::model::fixtures;

    fn binary(vars: &[usize]) -> Scope {
        Scope::new(vars.iter().map(|&v| (v, 2))).unwrap()
    }

    /// left clique (A,B,D), right clique (B,C), separator (B).
    fn two_clique_tree() -> JunctionTree {
        JunctionTree::from_cliques(vec![binary(&[0, 1, 3]), binary(&[1, 2])], Layout::Flat).unwrap()
    }

    fn two_clique_state(tree: &JunctionTree, engine: Engine) -> PropagationState<'_> {
        let left = PotentialTable::new(binary(&[0, 1, 3]), (0..8).map(f64::from).collect()).unwrap();
        let right = PotentialTable::ones(binary(&[1, 2]));
        PropagationState::from_potentials(tree, vec![left, right], engine).unwrap()
    }

    const LEFT_TO_RIGHT: Message = Message { source: 0, target: 1, separator: 0 };

    #[test]
    fn two_clique_message() {
        let tree = two_clique_tree();
        let mut st = two_clique_state(&tree, Engine::Sequential);
        st.message_passing(LEFT_TO_RIGHT).unwrap();
        assert_eq!(st.separator_potentials()[0].values(), &[10.0, 18.0]);
        assert_eq!(st.clique_potentials()[1].values(), &[10.0, 10.0, 18.0, 18.0]);
        assert_eq!(st.clique_potentials()[0].values(), &(0..8).map(f64::from).collect::<Vec<_>>()[..]);
    }

    #[test]
    fn two_clique_message_parallel() {
        let tree = two_clique_tree();
        for workers in [1, 2, 8] {
            let mut st = two_clique_state(&tree, Engine::Sequential);
            st.run_parallel_message(LEFT_TO_RIGHT, workers).unwrap();
            assert_eq!(st.separator_potentials()[0].values(), &[10.0, 18.0]);
            assert_eq!(st.clique_potentials()[1].values(), &[10.0, 10.0, 18.0, 18.0]);
        }
    }

    #[test]
    fn zero_over_zero_is_zero() {
        let tree = two_clique_tree();
        let mut left = PotentialTable::new(binary(&[0, 1, 3]), (0..8).map(f64::from).collect()).unwrap();
        for i in [0, 1, 4, 5] {
            left.values_mut()[i] = 0.0;
        }
        let mut st = PropagationState::from_potentials(
            &tree,
            vec![left, PotentialTable::ones(binary(&[1, 2]))],
            Engine::Sequential,
        )
        .unwrap();
        st.separators[0].values_mut()[0] = 0.0;
        st.message_passing(LEFT_TO_RIGHT).unwrap();
        assert_eq!(st.separator_potentials()[0].values(), &[0.0, 18.0]);
        assert_eq!(st.clique_potentials()[1].values(), &[0.0, 0.0, 18.0, 18.0]);
    }

    #[test]
    fn nonzero_over_zero_is_an_error() {
        let tree = two_clique_tree();
        for engine in [Engine::Sequential, Engine::parallel_always(2)] {
            let mut st = two_clique_state(&tree, engine);
            st.separators[0].values_mut()[1] = 0.0;
            let err = st.message_passing(LEFT_TO_RIGHT).unwrap_err();
            assert_eq!(err, Error::InconsistentDivision { separator: 0, entry: 1, value: 18.0 });
        }
    }

    #[test]
    fn uniform_source_is_a_fixed_point() {
        let tree = two_clique_tree();
        let right = PotentialTable::new(binary(&[1, 2]), vec![0.1, 0.2, 0.3, 0.4]).unwrap();
        let mut st = PropagationState::from_potentials(
            &tree,
            vec![PotentialTable::ones(binary(&[0, 1, 3])), right.clone()],
            Engine::Sequential,
        )
        .unwrap();
        st.separators[0].values_mut().fill(4.0);
        st.message_passing(LEFT_TO_RIGHT).unwrap();
        assert_eq!(st.clique_potentials()[1], right);
    }

    #[test]
    fn invalid_message_is_rejected() {
        let tree = two_clique_tree();
        let mut st = two_clique_state(&tree, Engine::Sequential);
        let bad = Message { source: 0, target: 0, separator: 0 };
        assert!(matches!(st.message_passing(bad), Err(Error::InvalidMessage { .. })));
    }

    #[test]
    fn single_clique_initialization() {
        let net = fixtures::single([0.3, 0.7]);
        let tree = compile(&net, CompileOptions::default()).unwrap();
        let mut st = PropagationState::initialize(&tree, &net, Engine::Sequential).unwrap();
        assert_eq!(st.clique_potentials()[0].values(), &[0.3, 0.7]);
        assert_eq!(st.belief_propagation().unwrap(), 0);
        assert_eq!(st.query_marginal(0, true).unwrap().values(), &[0.3, 0.7]);

        let mut e = Evidence::new();
        e.observe(&net, 0, 1).unwrap();
        st.apply_evidence(&e).unwrap();
        assert_eq!(st.clique_potentials()[0].values(), &[0.0, 0.7]);
        assert!(st.evidence_applied());
    }

    #[test]
    fn empty_evidence_changes_nothing() {
        let net = fixtures::diamond();
        let tree = compile(&net, CompileOptions::default()).unwrap();
        let mut st = PropagationState::initialize(&tree, &net, Engine::Sequential).unwrap();
        let before = st.clique_potentials().to_vec();
        st.apply_evidence(&Evidence::new()).unwrap();
        assert_eq!(st.clique_potentials(), &before[..]);
        assert!(!st.evidence_applied());
    }

    #[test]
    fn clique_without_cpts_is_all_ones() {
        let tree = JunctionTree::from_cliques(vec![binary(&[0, 1]), binary(&[1, 2])], Layout::Flat).unwrap();
        let mut tree = tree;
        let vars: Vec<_> = ["A", "B", "C"].iter().enumerate().map(|(i, n)| fixtures::var(i, n, 2)).collect();
        let cpts = vec![
            crate::model::make_cpt(&vars, 0, vec![], vec![0.5, 0.5]).unwrap(),
            crate::model::make_cpt(&vars, 1, vec![0], vec![0.5, 0.5, 0.1, 0.9]).unwrap(),
            crate::model::make_cpt(&vars, 2, vec![], vec![0.2, 0.8]).unwrap(),
        ];
        let net = BayesianNetwork::new(vars, cpts).unwrap();
        // put everything in clique 0 except C, which must go to clique 1
        tree.cpt_assignment = vec![0, 0, 1];
        let st = PropagationState::initialize(&tree, &net, Engine::Sequential).unwrap();
        assert_eq!(st.clique_potentials()[1].values(), &[0.2, 0.8, 0.2, 0.8]);
        tree.cpt_assignment = vec![0, 0, 0];
        assert!(PropagationState::initialize(&tree, &net, Engine::Sequential).is_err());
    }

    #[test]
    fn schedules_on_five_node_tree() {
        let net = fixtures::five_node();
        let tree = compile(&net, CompileOptions::default()).unwrap();
        let root = tree.root().unwrap();
        assert_eq!(tree.cliques[root].scope.vars(), &[0, 1, 3]);
        let collect = collect_schedule(&tree, root);
        assert_eq!(collect.len(), 2);
        assert!(collect.iter().all(|m| m.target == root));
        assert_eq!(collect.iter().map(|m| m.source).collect::<Vec<_>>(), vec![1, 2]);
        let distribute = distribute_schedule(&tree, root);
        assert_eq!(distribute.len(), 2);
        assert!(distribute.iter().all(|m| m.source == root));
    }

    #[test]
    fn chain_schedules_from_the_middle() {
        let tree =
            JunctionTree::from_cliques(vec![binary(&[0, 1]), binary(&[1, 2]), binary(&[2, 3])], Layout::Flat).unwrap();
        let collect = collect_schedule(&tree, 1);
        assert_eq!(collect.iter().map(|m| (m.source, m.target)).collect::<Vec<_>>(), vec![(0, 1), (2, 1)]);
        let long = JunctionTree::from_cliques((0..6).map(|i| binary(&[i, i + 1])).collect(), Layout::Flat).unwrap();
        let c = collect_schedule(&long, 0);
        assert_eq!(c.iter().map(|m| m.source).collect::<Vec<_>>(), vec![5, 4, 3, 2, 1]);
        let d = distribute_schedule(&long, 0);
        assert_eq!(d.iter().map(|m| m.target).collect::<Vec<_>>(), vec![1, 2, 3, 4, 5]);
        assert_eq!(c.len() + d.len(), 2 * (long.len() - 1));
    }

    #[test]
    fn second_propagation_is_a_no_op() {
        let net = fixtures::diamond();
        let tree = compile(&net, CompileOptions::default()).unwrap();
        let mut e = Evidence::new();
        e.observe(&net, 3, 1).unwrap();
        let mut st = PropagationState::initialize(&tree, &net, Engine::Sequential).unwrap();
        st.apply_evidence(&e).unwrap();
        assert_eq!(st.belief_propagation().unwrap(), 2);
        let first: Vec<_> = (0..4).map(|v| st.query_marginal(v, true).unwrap()).collect();
        st.belief_propagation().unwrap();
        for (v, m) in first.iter().enumerate() {
            let again = st.query_marginal(v, true).unwrap();
            for (a, b) in again.values().iter().zip(m.values()) {
                assert!((a - b).abs() < 1e-12);
            }
        }
        assert!(st.is_globally_consistent(1e-9));
    }

    #[test]
    fn every_clique_gives_the_same_answer() {
        let net = fixtures::diamond();
        let tree = compile(&net, CompileOptions::default()).unwrap();
        let mut st = PropagationState::initialize(&tree, &net, Engine::Sequential).unwrap();
        st.belief_propagation().unwrap();
        for v in [1, 2] {
            let a = st.query_marginal_from(v, 0, true).unwrap();
            let b = st.query_marginal_from(v, 1, true).unwrap();
            for (x, y) in a.values().iter().zip(b.values()) {
                assert!((x - y).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn impossible_evidence_is_zero_mass() {
        let vars = vec![fixtures::var(0, "A", 2), fixtures::var(1, "B", 2)];
        let cpts = vec![
            crate::model::make_cpt(&vars, 0, vec![], vec![1.0, 0.0]).unwrap(),
            crate::model::make_cpt(&vars, 1, vec![0], vec![1.0, 0.0, 0.5, 0.5]).unwrap(),
        ];
        let net = BayesianNetwork::new(vars, cpts).unwrap();
        let tree = compile(&net, CompileOptions::default()).unwrap();
        let mut e = Evidence::new();
        e.observe(&net, 1, 1).unwrap();
        let r = posterior_marginals(&tree, &net, &e, &[0], Engine::Sequential);
        assert_eq!(r, Err(Error::ZeroMass));
    }
}
