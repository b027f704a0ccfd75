use serde::Serialize;

use super::JunctionTree;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SizeSummary {
    pub max: usize,
    pub min: usize,
    pub avg: f64,
}

impl SizeSummary {
    fn of(sizes: &[usize]) -> Option<Self> {
        let max = *sizes.iter().max()?;
        let min = *sizes.iter().min()?;
        let avg = sizes.iter().map(|&s| s as f64).sum::<f64>() / sizes.len() as f64;
        Some(SizeSummary { max, min, avg })
    }
}

/// Half-open bucket `[lo, hi)` with `hi = 2 * lo`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct HistogramBucket {
    pub lo: usize,
    pub hi: usize,
    pub count: usize,
}

/// Junction-tree shape statistics: clique (CPT) and separator (SPT) table sizes.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StatsReport {
    pub nodes: usize,
    pub clique_tables: Option<SizeSummary>,
    pub separator_tables: Option<SizeSummary>,
    pub separator_histogram: Vec<HistogramBucket>,
}

/// Power-of-two histogram over the contiguous bucket range that covers the data.
pub fn histogram(sizes: &[usize]) -> Vec<HistogramBucket> {
    let bucket = |s: usize| s.max(1).ilog2();
    let (Some(lo), Some(hi)) = (sizes.iter().map(|&s| bucket(s)).min(), sizes.iter().map(|&s| bucket(s)).max()) else {
        return Vec::new();
    };
    (lo..=hi)
        .map(|k| HistogramBucket {
            lo: 1usize << k,
            hi: 1usize.checked_shl(k + 1).unwrap_or(usize::MAX),
            count: sizes.iter().filter(|&&s| bucket(s) == k).count(),
        })
        .collect()
}

pub fn tree_stats(tree: &JunctionTree) -> StatsReport {
    let cliques: Vec<usize> = tree.cliques.iter().map(|c| c.scope.table_size()).collect();
    let seps: Vec<usize> = tree.separators.iter().map(|s| s.scope.table_size()).collect();
    StatsReport {
        nodes: tree.len(),
        clique_tables: SizeSummary::of(&cliques),
        separator_tables: SizeSummary::of(&seps),
        separator_histogram: histogram(&seps),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::compile::{compile, CompileOptions, Layout};
    use crate::model::fixtures;
    use crate::potential::Scope;

    #[test]
    fn single_clique() {
        let s = Scope::new([(0, 2), (1, 2), (2, 2)]).unwrap();
        let tree = JunctionTree::from_cliques(vec![s], Layout::Flat).unwrap();
        let r = tree_stats(&tree);
        assert_eq!(r.nodes, 1);
        assert_eq!(r.clique_tables, Some(SizeSummary { max: 8, min: 8, avg: 8.0 }));
        assert_eq!(r.separator_tables, None);
        assert!(r.separator_histogram.is_empty());
    }

    #[test]
    fn diamond() {
        let tree = compile(&fixtures::diamond(), CompileOptions::default()).unwrap();
        let r = tree_stats(&tree);
        assert_eq!(r.nodes, 2);
        assert_eq!(r.clique_tables, Some(SizeSummary { max: 8, min: 8, avg: 8.0 }));
        assert_eq!(r.separator_tables, Some(SizeSummary { max: 4, min: 4, avg: 4.0 }));
        assert_eq!(r.separator_histogram, vec![HistogramBucket { lo: 4, hi: 8, count: 1 }]);
    }

    #[test]
    fn histogram_fills_gaps() {
        let h = histogram(&[2, 3, 17]);
        assert_eq!(h.iter().map(|b| (b.lo, b.count)).collect::<Vec<_>>(), vec![(2, 2), (4, 0), (8, 0), (16, 1)]);
    }
}
