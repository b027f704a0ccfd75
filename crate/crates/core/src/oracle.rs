//! Brute-force inference by materializing the full joint distribution.
//!
//! Deliberately naive and independent of the factor operations used by
//! propagation: CPT entries are looked up by hand-computed offsets and
//! multiplied along a depth-first walk over full assignments.

use crate::error::{Error, Result};
use crate::model::{topological_order, BayesianNetwork, Evidence, VarId};
use crate::potential::{PotentialTable, Scope};

pub const DEFAULT_JOINT_CAP: usize = 1 << 22;

/// The joint over all variables, in variable-id order.
#[derive(Debug, Clone, PartialEq)]
pub struct JointTable(pub PotentialTable);

impl JointTable {
    pub fn table(&self) -> &PotentialTable {
        &self.0
    }
}

pub fn enumerate_joint(net: &BayesianNetwork) -> Result<JointTable> {
    enumerate_joint_capped(net, DEFAULT_JOINT_CAP)
}

pub fn enumerate_joint_capped(net: &BayesianNetwork, cap: usize) -> Result<JointTable> {
    let cards = net.cardinalities();
    let size = cards.iter().try_fold(1usize, |acc, &c| acc.checked_mul(c)).unwrap_or(usize::MAX);
    if size > cap {
        return Err(Error::TooLarge { size, cap });
    }
    let scope = Scope::new(cards.iter().copied().enumerate())?;
    let n = cards.len();
    let mut joint_stride = vec![1usize; n];
    for v in (0..n.saturating_sub(1)).rev() {
        joint_stride[v] = joint_stride[v + 1] * cards[v + 1];
    }
    let order = topological_order(net)?;
    let mut values = vec![0.0; size];
    let mut assignment = vec![0usize; n];
    walk(net, &order, &joint_stride, 0, 1.0, &mut assignment, &mut values);
    Ok(JointTable(PotentialTable::new(scope, values)?))
}

fn cpt_entry(net: &BayesianNetwork, var: VarId, assignment: &[usize]) -> f64 {
    let cpt = net.cpt(var);
    let scope = cpt.table.scope();
    // scope is (parents..., child); last variable varies fastest
    let mut offset = 0;
    let mut stride = 1;
    for &v in scope.vars().iter().rev() {
        offset += assignment[v] * stride;
        stride *= net.cardinality(v);
    }
    cpt.table.values()[offset]
}

fn walk(
    net: &BayesianNetwork,
    order: &[VarId],
    joint_stride: &[usize],
    depth: usize,
    product: f64,
    assignment: &mut Vec<usize>,
    values: &mut [f64],
) {
    if depth == order.len() {
        let idx: usize = assignment.iter().zip(joint_stride).map(|(a, s)| a * s).sum();
        values[idx] = product;
        return;
    }
    let var = order[depth];
    for state in 0..net.cardinality(var) {
        assignment[var] = state;
        let p = product * cpt_entry(net, var, assignment);
        walk(net, order, joint_stride, depth + 1, p, assignment, values);
    }
}

/// Posterior marginal of `var` given `evidence`, normalized.
pub fn oracle_marginal(joint: &JointTable, var: VarId, evidence: &Evidence) -> Result<PotentialTable> {
    let scope = joint.0.scope();
    let pos = scope.position(var).ok_or_else(|| Error::UnknownVariable(var.to_string()))?;
    let card = scope.cards()[pos];
    let observed: Vec<(usize, usize)> = evidence
        .iter()
        .map(|(v, s)| scope.position(v).map(|p| (p, s)).ok_or_else(|| Error::UnknownVariable(v.to_string())))
        .collect::<Result<_>>()?;
    let strides = scope.strides();
    let cards = scope.cards();
    let mut out = vec![0.0; card];
    for (i, &p) in joint.0.values().iter().enumerate() {
        if observed.iter().all(|&(q, s)| (i / strides[q]) % cards[q] == s) {
            out[(i / strides[pos]) % card] += p;
        }
    }
    let total: f64 = out.iter().sum();
    if total.is_nan() || total <= 0.0 {
        return Err(Error::ZeroMass);
    }
    out.iter_mut().for_each(|x| *x /= total);
    PotentialTable::new(Scope::new([(var, card)])?, out)
}

/// Posterior marginals of every variable in one pass over the joint.
pub fn oracle_marginals(joint: &JointTable, evidence: &Evidence) -> Result<Vec<PotentialTable>> {
    let scope = joint.0.scope();
    let cards = scope.cards();
    for (v, _) in evidence.iter() {
        if v >= cards.len() {
            return Err(Error::UnknownVariable(v.to_string()));
        }
    }
    let mut sums: Vec<Vec<f64>> = cards.iter().map(|&c| vec![0.0; c]).collect();
    let mut assignment = vec![0usize; cards.len()];
    for &p in joint.0.values() {
        if evidence.iter().all(|(v, s)| assignment[v] == s) {
            for (v, &a) in assignment.iter().enumerate() {
                sums[v][a] += p;
            }
        }
        for v in (0..cards.len()).rev() {
            assignment[v] += 1;
            if assignment[v] < cards[v] {
                break;
            }
            assignment[v] = 0;
        }
    }
    sums.into_iter()
        .enumerate()
        .map(|(v, mut out)| {
            let total: f64 = out.iter().sum();
            if total.is_nan() || total <= 0.0 {
                return Err(Error::ZeroMass);
            }
            out.iter_mut().for_each(|x| *x /= total);
            PotentialTable::new(Scope::new([(v, cards[v])])?, out)
        })
        .collect()
}
