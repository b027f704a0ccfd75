//! Per-separator-entry index mapping tables.
//!
//! For a clique `c` and an adjacent separator `s`, entry `j` of `s` owns the
//! ascending list `μ[c,s][j]` of clique-table indices whose assignment agrees
//! with `j` on the separator variables. All lists have the same length
//! `|φ_c| / |φ_s|`, so a table is stored as a dense `|φ_s| × m` block, either
//! list-by-list (flat) or position-by-position (interleaved).

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::potential::Scope;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Layout {
    #[default]
    Flat,
    Interleaved,
}

impl std::str::FromStr for Layout {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "flat" => Ok(Layout::Flat),
            "interleaved" => Ok(Layout::Interleaved),
            other => Err(format!("unknown layout `{other}` (expected flat or interleaved)")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
enum IndexStorage {
    U32(Vec<u32>),
    U64(Vec<u64>),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MappingTable {
    entries: usize,
    per_entry: usize,
    layout: Layout,
    storage: IndexStorage,
}

impl MappingTable {
    /// Fails unless `separator ⊆ clique`.
    pub fn build(clique: &Scope, separator: &Scope, layout: Layout) -> Result<Self> {
        let proj = clique.projection(separator)?;
        let entries = separator.table_size();
        let per_entry = clique.table_size() / entries;
        let mut fill = vec![0usize; entries];
        let mut data = vec![0u64; clique.table_size()];
        for (r, j) in proj.into_iter().enumerate() {
            let slot = match layout {
                Layout::Flat => j * per_entry + fill[j],
                Layout::Interleaved => fill[j] * entries + j,
            };
            data[slot] = r as u64;
            fill[j] += 1;
        }
        Ok(Self::from_physical(entries, per_entry, layout, data))
    }

    fn from_physical(entries: usize, per_entry: usize, layout: Layout, data: Vec<u64>) -> Self {
        let storage = if data.len() <= u32::MAX as usize + 1 {
            IndexStorage::U32(data.into_iter().map(|x| x as u32).collect())
        } else {
            IndexStorage::U64(data)
        };
        MappingTable { entries, per_entry, layout, storage }
    }

    /// Number of separator entries `|φ_s|`.
    pub fn entries(&self) -> usize {
        self.entries
    }

    /// Length of every list, `|φ_c| / |φ_s|`.
    pub fn per_entry(&self) -> usize {
        self.per_entry
    }

    pub fn layout(&self) -> Layout {
        self.layout
    }

    pub fn uses_u32(&self) -> bool {
        matches!(self.storage, IndexStorage::U32(_))
    }

    /// Calls `f` on every index in `μ[j]`, ascending.
    #[inline]
    pub fn for_each(&self, j: usize, mut f: impl FnMut(usize)) {
        let (start, step) = match self.layout {
            Layout::Flat => (j * self.per_entry, 1),
            Layout::Interleaved => (j, self.entries),
        };
        match &self.storage {
            IndexStorage::U32(v) => v[start..].iter().step_by(step).take(self.per_entry).for_each(|&r| f(r as usize)),
            IndexStorage::U64(v) => v[start..].iter().step_by(step).take(self.per_entry).for_each(|&r| f(r as usize)),
        }
    }

    pub fn list(&self, j: usize) -> Vec<usize> {
        let mut out = Vec::with_capacity(self.per_entry);
        self.for_each(j, |r| out.push(r));
        out
    }

    /// Indices in storage order.
    pub fn physical(&self) -> Vec<usize> {
        match &self.storage {
            IndexStorage::U32(v) => v.iter().map(|&r| r as usize).collect(),
            IndexStorage::U64(v) => v.iter().map(|&r| r as usize).collect(),
        }
    }

    pub fn relayout(&self, layout: Layout) -> MappingTable {
        if layout == self.layout {
            return self.clone();
        }
        let mut data = vec![0u64; self.entries * self.per_entry];
        for j in 0..self.entries {
            let mut p = 0;
            self.for_each(j, |r| {
                let slot = match layout {
                    Layout::Flat => j * self.per_entry + p,
                    Layout::Interleaved => p * self.entries + j,
                };
                data[slot] = r as u64;
                p += 1;
            });
        }
        Self::from_physical(self.entries, self.per_entry, layout, data)
    }

    /// True iff the lists partition `0..clique_size` into equal parts.
    pub fn is_partition(&self, clique_size: usize) -> bool {
        if self.entries * self.per_entry != clique_size {
            return false;
        }
        let mut seen = vec![false; clique_size];
        let mut ok = true;
        for j in 0..self.entries {
            self.for_each(j, |r| {
                if r >= clique_size || std::mem::replace(&mut seen[r], true) {
                    ok = false;
                }
            });
        }
        ok
    }
}

/// Both tables of one separator: `(clique id, μ[clique, separator])` for each
/// endpoint, in the separator's endpoint order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SeparatorMappings {
    pub sides: [(usize, MappingTable); 2],
}

impl SeparatorMappings {
    pub fn for_clique(&self, clique: usize) -> Option<&MappingTable> {
        self.sides.iter().find(|(c, _)| *c == clique).map(|(_, t)| t)
    }
}

/// Mapping tables for every (clique, adjacent separator) pair, indexed by separator id.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct MappingTableSet {
    pub(crate) layout: Layout,
    pub(crate) per_separator: Vec<SeparatorMappings>,
}

impl MappingTableSet {
    pub fn layout(&self) -> Layout {
        self.layout
    }

    pub fn get(&self, clique: usize, separator: usize) -> Option<&MappingTable> {
        self.per_separator.get(separator)?.for_clique(clique)
    }

    pub fn separators(&self) -> &[SeparatorMappings] {
        &self.per_separator
    }

    pub fn relayout(&self, layout: Layout) -> MappingTableSet {
        MappingTableSet {
            layout,
            per_separator: self
                .per_separator
                .iter()
                .map(|m| SeparatorMappings {
                    sides: [
                        (m.sides[0].0, m.sides[0].1.relayout(layout)),
                        (m.sides[1].0, m.sides[1].1.relayout(layout)),
                    ],
                })
                .collect(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn binary(vars: &[usize]) -> Scope {
        Scope::new(vars.iter().map(|&v| (v, 2))).unwrap()
    }

    #[test]
    fn two_clique_tables() {
        // A=0, B=1, C=2, D=3
        let left = MappingTable::build(&binary(&[0, 1, 3]), &binary(&[1]), Layout::Flat).unwrap();
        assert_eq!(left.list(0), vec![0, 1, 4, 5]);
        assert_eq!(left.list(1), vec![2, 3, 6, 7]);
        let right = MappingTable::build(&binary(&[1, 2]), &binary(&[1]), Layout::Flat).unwrap();
        assert_eq!(right.list(0), vec![0, 1]);
        assert_eq!(right.list(1), vec![2, 3]);
        assert!(left.uses_u32());
    }

    #[test]
    fn interleaved_is_the_transpose() {
        let flat = MappingTable::build(&binary(&[0, 1, 3]), &binary(&[1]), Layout::Flat).unwrap();
        assert_eq!(flat.physical(), vec![0, 1, 4, 5, 2, 3, 6, 7]);
        let inter = flat.relayout(Layout::Interleaved);
        assert_eq!(inter.physical(), vec![0, 2, 1, 3, 4, 6, 5, 7]);
        assert_eq!(inter.list(0), flat.list(0));
        assert_eq!(inter.list(1), flat.list(1));
        assert_eq!(inter.relayout(Layout::Flat), flat);
        let built = MappingTable::build(&binary(&[0, 1, 3]), &binary(&[1]), Layout::Interleaved).unwrap();
        assert_eq!(built, inter);
    }

    #[test]
    fn identity_and_single_entry() {
        let s = Scope::new([(4, 3), (9, 2)]).unwrap();
        let id = MappingTable::build(&s, &s, Layout::Flat).unwrap();
        for j in 0..6 {
            assert_eq!(id.list(j), vec![j]);
        }
        let whole = MappingTable::build(&s, &Scope::empty(), Layout::Flat).unwrap();
        assert_eq!(whole.entries(), 1);
        assert_eq!(whole.relayout(Layout::Interleaved).physical(), whole.physical());
    }

    #[test]
    fn lists_agree_with_the_codec() {
        let clique = Scope::new([(0, 3), (2, 2), (5, 4)]).unwrap();
        let sep = Scope::new([(0, 3), (5, 4)]).unwrap();
        for layout in [Layout::Flat, Layout::Interleaved] {
            let t = MappingTable::build(&clique, &sep, layout).unwrap();
            assert!(t.is_partition(clique.table_size()));
            for j in 0..sep.table_size() {
                let want = sep.index_to_assignment(j).unwrap();
                let list = t.list(j);
                assert_eq!(list.len(), 2);
                assert!(list.windows(2).all(|w| w[0] < w[1]));
                for r in list {
                    let a = clique.index_to_assignment(r).unwrap();
                    assert_eq!(vec![a[0], a[2]], want);
                }
            }
        }
    }
}
