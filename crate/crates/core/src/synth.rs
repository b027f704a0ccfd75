//! Seeded generators: random Bayesian networks for correctness tests, and
//! junction trees with controlled separator sizes for benchmarks.

use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;

use rand::seq::{IteratorRandom, SliceRandom};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::compile::{Clique, JunctionTree, Layout};
use crate::model::{make_cpt, BayesianNetwork, Variable};
use crate::potential::{PotentialTable, Scope};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TreeProfile {
    /// Separator tables from 2 to 256 entries.
    SmallSkewed,
    /// Separator tables from 8192 to about a million entries.
    LargeSkewed,
    /// Separator tables from 64 to 16384 entries.
    #[default]
    Mixed,
}

impl TreeProfile {
    /// Inclusive range of separator-size exponents (base 2).
    pub fn exponents(self) -> (u32, u32) {
        match self {
            TreeProfile::SmallSkewed => (1, 8),
            TreeProfile::LargeSkewed => (13, 20),
            TreeProfile::Mixed => (6, 14),
        }
    }
}

impl fmt::Display for TreeProfile {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            TreeProfile::SmallSkewed => "small-skewed",
            TreeProfile::LargeSkewed => "large-skewed",
            TreeProfile::Mixed => "mixed",
        })
    }
}

impl FromStr for TreeProfile {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "small-skewed" => Ok(TreeProfile::SmallSkewed),
            "large-skewed" => Ok(TreeProfile::LargeSkewed),
            "mixed" => Ok(TreeProfile::Mixed),
            _ => Err(format!("unknown profile `{s}` (expected small-skewed, large-skewed or mixed)")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct GenSpec {
    pub seed: u64,
    pub variables: usize,
    pub max_parents: usize,
    pub card_min: usize,
    pub card_max: usize,
    pub profile: TreeProfile,
}

impl Default for GenSpec {
    fn default() -> Self {
        GenSpec { seed: 0, variables: 10, max_parents: 3, card_min: 2, card_max: 4, profile: TreeProfile::Mixed }
    }
}

/// Random DAG over a random topological order. Each variable draws up to
/// `max_parents` parents among the variables before it; CPT rows are
/// positive and normalized. Variables are named `X0`, `X1`, …
pub fn gen_network(spec: &GenSpec) -> BayesianNetwork {
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let n = spec.variables;
    let (lo, hi) = (spec.card_min.max(2), spec.card_max.max(spec.card_min.max(2)));
    let vars: Vec<Variable> =
        (0..n).map(|id| Variable { id, name: format!("X{id}"), cardinality: rng.gen_range(lo..=hi) }).collect();
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut rng);
    let mut cpts = Vec::with_capacity(n);
    for (pos, &child) in order.iter().enumerate() {
        let k = rng.gen_range(0..=spec.max_parents.min(pos));
        let mut parents: Vec<usize> = order[..pos].iter().copied().choose_multiple(&mut rng, k);
        parents.sort_unstable();
        let rows: usize = parents.iter().map(|&p| vars[p].cardinality).product();
        let card = vars[child].cardinality;
        let mut table = Vec::with_capacity(rows * card);
        for _ in 0..rows {
            let row: Vec<f64> = (0..card).map(|_| rng.gen_range(0.05..1.0)).collect();
            let total: f64 = row.iter().sum();
            table.extend(row.iter().map(|x| x / total));
        }
        cpts.push(make_cpt(&vars, child, parents, table).expect("generated CPT is well formed"));
    }
    cpts.sort_by_key(|c| c.child);
    BayesianNetwork::new(vars, cpts).expect("generated network is valid")
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FamilySpec {
    pub profile: TreeProfile,
    pub count: usize,
    pub seed: u64,
    /// Approximate total clique-table entries per tree.
    pub budget: usize,
    /// Extra binary variables per clique beyond its separator to the parent.
    pub extra_bits: u32,
    pub max_cliques: usize,
}

impl Default for FamilySpec {
    fn default() -> Self {
        FamilySpec { profile: TreeProfile::Mixed, count: 5, seed: 0, budget: 1 << 21, extra_bits: 2, max_cliques: 4096 }
    }
}

#[derive(Debug, Clone)]
pub struct SyntheticTree {
    pub name: String,
    pub tree: JunctionTree,
    pub potentials: Vec<PotentialTable>,
}

impl SyntheticTree {
    pub fn avg_separator_size(&self) -> f64 {
        avg_separator_size(&self.tree)
    }
}

pub fn avg_separator_size(tree: &JunctionTree) -> f64 {
    if tree.separators.is_empty() {
        return 0.0;
    }
    tree.separators.iter().map(|s| s.scope.table_size() as f64).sum::<f64>() / tree.separators.len() as f64
}

/// Separator exponents for each tree of the family: evenly spread over the
/// profile's range, rounded. Distinct whenever `count` does not exceed the
/// number of exponents in the range.
fn family_exponents(profile: TreeProfile, count: usize) -> Vec<u32> {
    let (lo, hi) = profile.exponents();
    match count {
        0 => Vec::new(),
        1 => vec![hi],
        _ => (0..count).map(|i| lo + ((hi - lo) as f64 * i as f64 / (count - 1) as f64).round() as u32).collect(),
    }
}

/// Trees whose separators all have `2^e` entries, `e` rising across the family.
pub fn gen_tree_family(spec: &FamilySpec) -> Vec<SyntheticTree> {
    family_exponents(spec.profile, spec.count)
        .into_iter()
        .enumerate()
        .map(|(i, e)| {
            let mut rng =
                ChaCha8Rng::seed_from_u64(spec.seed.wrapping_mul(0x9E37_79B9_7F4A_7C15).wrapping_add(i as u64));
            let clique_bits = e + spec.extra_bits.max(1);
            let n = (spec.budget >> clique_bits).clamp(2, spec.max_cliques.max(2));
            let (tree, potentials) = gen_tree(&mut rng, n, e as usize, clique_bits as usize);
            SyntheticTree { name: format!("{}-{i}", spec.profile), tree, potentials }
        })
        .collect()
}

/// A random recursive tree of `n` cliques over binary variables. Each clique
/// after the first shares `sep_bits` variables with a random earlier clique
/// and adds fresh ones up to `clique_bits`.
pub fn gen_tree(
    rng: &mut impl Rng,
    n: usize,
    sep_bits: usize,
    clique_bits: usize,
) -> (JunctionTree, Vec<PotentialTable>) {
    assert!(clique_bits > sep_bits && n >= 1);
    let mut next_var = 0;
    let mut fresh = |k: usize| {
        let v: Vec<usize> = (next_var..next_var + k).collect();
        next_var += k;
        v
    };
    let mut members: Vec<Vec<usize>> = vec![fresh(clique_bits)];
    let mut edges = Vec::with_capacity(n - 1);
    for i in 1..n {
        let parent = rng.gen_range(0..i);
        let mut set: BTreeSet<usize> = members[parent].choose_multiple(rng, sep_bits).copied().collect();
        set.extend(fresh(clique_bits - sep_bits));
        members.push(set.into_iter().collect());
        edges.push((parent, i));
    }
    let cliques: Vec<Clique> = members
        .iter()
        .enumerate()
        .map(|(id, m)| Clique { id, scope: Scope::new(m.iter().map(|&v| (v, 2))).expect("distinct members") })
        .collect();
    let tree = JunctionTree::from_edges(cliques, &edges, Layout::Flat).expect("generated tree is valid");
    let potentials = random_potentials(rng, &tree);
    (tree, potentials)
}

/// Positive random clique potentials. Every clique except the first root is
/// normalized per entry of the separator toward its parent, so the product
/// stays a probability distribution and values neither overflow nor vanish
/// on large trees.
pub fn random_potentials(rng: &mut impl Rng, tree: &JunctionTree) -> Vec<PotentialTable> {
    let mut out: Vec<PotentialTable> = tree
        .cliques
        .iter()
        .map(|c| {
            let values = (0..c.scope.table_size()).map(|_| rng.gen_range(0.1..1.0)).collect();
            PotentialTable::new(c.scope.clone(), values).expect("sizes match")
        })
        .collect();
    let mut seen = vec![false; tree.len()];
    for &root in &tree.roots {
        let total = out[root].sum();
        out[root].values_mut().iter_mut().for_each(|x| *x /= total);
        seen[root] = true;
        let mut stack = vec![root];
        while let Some(node) = stack.pop() {
            for &(child, sep) in tree.neighbors(node) {
                if seen[child] {
                    continue;
                }
                seen[child] = true;
                let mu = tree.mapping(child, sep).expect("mapping exists");
                let values = out[child].values_mut();
                for j in 0..mu.entries() {
                    let mut total = 0.0;
                    mu.for_each(j, |r| total += values[r]);
                    mu.for_each(j, |r| values[r] /= total);
                }
                stack.push(child);
            }
        }
    }
    out
}
