//! Potential tables over ordered variable scopes.
//!
//! Every table in the crate is a flat `Vec<f64>` indexed by a row-major
//! mixed-radix codec: the *last* scope variable varies fastest. For a scope
//! `(A, B, D)` of binary variables, index 5 decodes to `A=1, B=0, D=1`.

use crate::error::{Error, Result};
use crate::model::VarId;

/// An ordered list of variables with their cardinalities.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Scope {
    vars: Vec<VarId>,
    cards: Vec<usize>,
    strides: Vec<usize>,
    size: usize,
}

impl Scope {
    /// Builds a scope from `(variable, cardinality)` pairs, keeping their order.
    pub fn new(entries: impl IntoIterator<Item = (VarId, usize)>) -> Result<Self> {
        let (vars, cards): (Vec<_>, Vec<_>) = entries.into_iter().unzip();
        for (i, v) in vars.iter().enumerate() {
            if vars[..i].contains(v) {
                return Err(Error::DuplicateScopeVariable(*v));
            }
        }
        let mut strides = vec![0; vars.len()];
        let mut size: usize = 1;
        for i in (0..vars.len()).rev() {
            strides[i] = size;
            size = size.checked_mul(cards[i]).ok_or(Error::TableTooLarge)?;
        }
        Ok(Scope { vars, cards, strides, size })
    }

    pub fn empty() -> Self {
        Scope { size: 1, ..Default::default() }
    }

    pub fn vars(&self) -> &[VarId] {
        &self.vars
    }

    pub fn cards(&self) -> &[usize] {
        &self.cards
    }

    pub fn strides(&self) -> &[usize] {
        &self.strides
    }

    pub fn len(&self) -> usize {
        self.vars.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vars.is_empty()
    }

    /// Product of the cardinalities.
    pub fn table_size(&self) -> usize {
        self.size
    }

    pub fn position(&self, var: VarId) -> Option<usize> {
        self.vars.iter().position(|&v| v == var)
    }

    pub fn contains(&self, var: VarId) -> bool {
        self.position(var).is_some()
    }

    pub fn is_subset_of(&self, other: &Scope) -> bool {
        self.vars.iter().all(|&v| other.contains(v))
    }

    /// Variables of `self` that also appear in `other`, in `self`'s order.
    pub fn intersection(&self, other: &Scope) -> Scope {
        let entries = self.vars.iter().zip(&self.cards).filter(|(v, _)| other.contains(**v)).map(|(&v, &c)| (v, c));
        Scope::new(entries).expect("subset of a valid scope")
    }

    pub fn index_to_assignment(&self, index: usize) -> Result<Vec<usize>> {
        if index >= self.size {
            return Err(Error::IndexOutOfRange { index, size: self.size });
        }
        Ok(self.strides.iter().zip(&self.cards).map(|(&stride, &card)| (index / stride) % card).collect())
    }

    pub fn assignment_to_index(&self, assignment: &[usize]) -> Result<usize> {
        if assignment.len() != self.vars.len() {
            return Err(Error::AssignmentLength { expected: self.vars.len(), got: assignment.len() });
        }
        let mut index = 0;
        for (i, &state) in assignment.iter().enumerate() {
            if state >= self.cards[i] {
                return Err(Error::StateOutOfRange {
                    variable: self.vars[i].to_string(),
                    state,
                    cardinality: self.cards[i],
                });
            }
            index += state * self.strides[i];
        }
        Ok(index)
    }

    /// For every index of `self`, the index of the same assignment restricted
    /// to `sub`. Fails unless `sub ⊆ self`.
    pub fn projection(&self, sub: &Scope) -> Result<Vec<usize>> {
        // stride of each of our variables inside `sub` (0 if absent)
        let mut sub_stride = vec![0usize; self.len()];
        for (k, &v) in sub.vars.iter().enumerate() {
            let pos = self.position(v).ok_or(Error::ScopeNotContained)?;
            sub_stride[pos] = sub.strides[k];
        }
        let mut out = Vec::with_capacity(self.size);
        let mut state = vec![0usize; self.len()];
        let mut projected = 0usize;
        for _ in 0..self.size {
            out.push(projected);
            // odometer increment, last variable fastest
            for i in (0..self.len()).rev() {
                state[i] += 1;
                projected += sub_stride[i];
                if state[i] < self.cards[i] {
                    break;
                }
                projected -= sub_stride[i] * self.cards[i];
                state[i] = 0;
            }
        }
        Ok(out)
    }
}

/// A flat table of non-negative reals over a [`Scope`].
#[derive(Debug, Clone, PartialEq)]
pub struct PotentialTable {
    scope: Scope,
    values: Vec<f64>,
}

impl PotentialTable {
    pub fn new(scope: Scope, values: Vec<f64>) -> Result<Self> {
        if values.len() != scope.table_size() {
            return Err(Error::TableSizeMismatch {
                variable: format!("{:?}", scope.vars()),
                expected: scope.table_size(),
                got: values.len(),
            });
        }
        Ok(PotentialTable { scope, values })
    }

    pub fn ones(scope: Scope) -> Self {
        let values = vec![1.0; scope.table_size()];
        PotentialTable { scope, values }
    }

    pub fn scope(&self) -> &Scope {
        &self.scope
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn sum(&self) -> f64 {
        self.values.iter().sum()
    }

    /// `self[t] *= factor[project(t)]` for every entry.
    pub fn multiply_into(&mut self, factor: &PotentialTable) -> Result<()> {
        let proj = self.scope.projection(&factor.scope)?;
        for (v, p) in self.values.iter_mut().zip(proj) {
            *v *= factor.values[p];
        }
        Ok(())
    }

    /// Sums out every variable not in `onto`. The result uses `onto`'s order;
    /// each output entry accumulates its sources in ascending index order.
    pub fn marginalize(&self, onto: &Scope) -> Result<PotentialTable> {
        let proj = self.scope.projection(onto)?;
        let mut out = vec![0.0; onto.table_size()];
        for (&v, p) in self.values.iter().zip(proj) {
            out[p] += v;
        }
        Ok(PotentialTable { scope: onto.clone(), values: out })
    }

    pub fn normalize(&self) -> Result<PotentialTable> {
        let total = self.sum();
        if total.is_nan() || total <= 0.0 {
            return Err(Error::ZeroMass);
        }
        Ok(PotentialTable { scope: self.scope.clone(), values: self.values.iter().map(|v| v / total).collect() })
    }
}
