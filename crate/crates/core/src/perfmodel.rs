//! Operation-count cost model for one message and for a full propagation,
//! plus fitting of the per-message launch overhead τ from timings.
//!
//! Costs are abstract operation counts. A throughput (operations per unit
//! time) converts them to time where a fit needs it.

use serde::Serialize;

use crate::compile::{CliqueId, JunctionTree, SeparatorId};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct MessageCost {
    pub source: CliqueId,
    pub target: CliqueId,
    pub separator: SeparatorId,
    pub source_size: usize,
    pub target_size: usize,
    pub separator_size: usize,
    pub additions: usize,
    pub multiplications: usize,
}

impl MessageCost {
    pub fn from_sizes(source_size: usize, target_size: usize, separator_size: usize) -> Self {
        MessageCost {
            source: 0,
            target: 0,
            separator: 0,
            source_size,
            target_size,
            separator_size,
            additions: source_size - separator_size,
            multiplications: target_size + separator_size,
        }
    }

    /// `|φi| + |φk|`, the sequential work of the message.
    pub fn work(&self) -> usize {
        self.source_size + self.target_size
    }

    /// Work when every separator entry runs on its own lane.
    pub fn parallel_time(&self) -> f64 {
        self.work() as f64 / self.separator_size as f64
    }

    /// Work when at most `lanes` separator entries run at once.
    pub fn parallel_time_capped(&self, lanes: usize) -> f64 {
        self.work() as f64 / self.separator_size.min(lanes.max(1)) as f64
    }
}

/// Cost of the message from `source` across `separator`.
pub fn message_cost(tree: &JunctionTree, separator: SeparatorId, source: CliqueId) -> MessageCost {
    let sep = &tree.separators[separator];
    let target = sep.other(source);
    let mut cost = MessageCost::from_sizes(
        tree.cliques[source].scope.table_size(),
        tree.cliques[target].scope.table_size(),
        sep.scope.table_size(),
    );
    cost.source = source;
    cost.target = target;
    cost.separator = separator;
    cost
}

/// Both directions of every edge: the 2(n−1) messages of a full propagation.
pub fn directed_messages(tree: &JunctionTree) -> Vec<MessageCost> {
    tree.separators
        .iter()
        .flat_map(|s| [message_cost(tree, s.id, s.cliques.0), message_cost(tree, s.id, s.cliques.1)])
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SpeedupEstimate {
    pub messages: usize,
    pub sequential: f64,
    pub parallel: f64,
    pub tau: f64,
    pub speedup: f64,
    pub min_separator: usize,
    pub max_separator: usize,
}

fn estimate(tree: &JunctionTree, tau: f64, time: impl Fn(&MessageCost) -> f64) -> SpeedupEstimate {
    let msgs = directed_messages(tree);
    let sequential: f64 = msgs.iter().map(|m| m.work() as f64).sum();
    let parallel = msgs.len() as f64 * tau + msgs.iter().map(&time).sum::<f64>();
    let speedup = if msgs.is_empty() { 1.0 } else { sequential / parallel };
    SpeedupEstimate {
        messages: msgs.len(),
        sequential,
        parallel,
        tau,
        speedup,
        min_separator: msgs.iter().map(|m| m.separator_size).min().unwrap_or(0),
        max_separator: msgs.iter().map(|m| m.separator_size).max().unwrap_or(0),
    }
}

/// Sequential work, parallel work `2(n−1)τ + Σ work/|φS|`, and their ratio.
pub fn tree_cost(tree: &JunctionTree, tau: f64) -> SpeedupEstimate {
    estimate(tree, tau, MessageCost::parallel_time)
}

/// As [`tree_cost`] with at most `lanes` separator entries processed at once.
pub fn tree_cost_capped(tree: &JunctionTree, tau: f64, lanes: usize) -> SpeedupEstimate {
    estimate(tree, tau, |m| m.parallel_time_capped(lanes))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TimingSample {
    /// Parallel work of the message in operations.
    pub work: f64,
    pub time: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TauFit {
    pub tau: f64,
    /// Operations per unit time; infinite when time does not grow with work.
    pub throughput: f64,
    /// Root-mean-square residual of the fitted line.
    pub residual: f64,
    pub overhead_dominated: bool,
}

/// Least-squares fit of `time = τ + work / throughput`.
pub fn estimate_tau(samples: &[TimingSample]) -> Result<TauFit> {
    let n = samples.len() as f64;
    let distinct = samples.iter().any(|s| s.work != samples[0].work);
    if samples.len() < 2 || !distinct {
        return Err(Error::InsufficientSamples);
    }
    let mean_w = samples.iter().map(|s| s.work).sum::<f64>() / n;
    let mean_t = samples.iter().map(|s| s.time).sum::<f64>() / n;
    let sxx: f64 = samples.iter().map(|s| (s.work - mean_w).powi(2)).sum();
    let sxy: f64 = samples.iter().map(|s| (s.work - mean_w) * (s.time - mean_t)).sum();
    let slope = sxy / sxx;
    let (tau, slope, overhead_dominated) =
        if slope <= 0.0 { (mean_t, 0.0, true) } else { ((mean_t - slope * mean_w).max(0.0), slope, false) };
    let sse: f64 = samples.iter().map(|s| (s.time - tau - slope * s.work).powi(2)).sum();
    Ok(TauFit {
        tau,
        throughput: if slope > 0.0 { 1.0 / slope } else { f64::INFINITY },
        residual: (sse / n).sqrt(),
        overhead_dominated,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct OverheadReport {
    /// Share of the parallel time spent launching messages.
    pub fraction: f64,
    /// Sequential time over total launch overhead; infinite when τ = 0.
    pub speedup_ceiling: f64,
}

/// `τ` in time units; `throughput` in operations per time unit.
pub fn overhead_fraction(tree: &JunctionTree, tau: f64, throughput: f64) -> OverheadReport {
    overhead(tree, tau, throughput, MessageCost::parallel_time)
}

/// As [`overhead_fraction`] with at most `lanes` separator entries at once.
pub fn overhead_fraction_capped(tree: &JunctionTree, tau: f64, throughput: f64, lanes: usize) -> OverheadReport {
    overhead(tree, tau, throughput, |m| m.parallel_time_capped(lanes))
}

fn overhead(tree: &JunctionTree, tau: f64, throughput: f64, time: impl Fn(&MessageCost) -> f64) -> OverheadReport {
    let msgs = directed_messages(tree);
    let launch = msgs.len() as f64 * tau;
    let work: f64 = msgs.iter().map(time).sum::<f64>() / throughput;
    let sequential: f64 = msgs.iter().map(|m| m.work() as f64).sum::<f64>() / throughput;
    let total = launch + work;
    OverheadReport {
        fraction: if total > 0.0 { launch / total } else { 0.0 },
        speedup_ceiling: if launch > 0.0 { sequential / launch } else { f64::INFINITY },
    }
}

/// Speedup ceiling from measured times: sequential time over the launch
/// overhead share of the parallel time.
pub fn measured_speedup_ceiling(sequential_time: f64, parallel_time: f64, overhead_fraction: f64) -> f64 {
    sequential_time / (overhead_fraction * parallel_time)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CostReport {
    pub messages: Vec<MessageCost>,
    pub estimate: SpeedupEstimate,
    pub tau_sweep: Vec<SpeedupEstimate>,
}

pub fn cost_report(tree: &JunctionTree, taus: &[f64]) -> CostReport {
    CostReport {
        messages: directed_messages(tree),
        estimate: tree_cost(tree, 0.0),
        tau_sweep: taus.iter().map(|&t| tree_cost(tree, t)).collect(),
    }
}

fn ranks(xs: &[f64]) -> Vec<f64> {
    let mut idx: Vec<usize> = (0..xs.len()).collect();
    idx.sort_by(|&a, &b| xs[a].total_cmp(&xs[b]));
    let mut out = vec![0.0; xs.len()];
    let mut i = 0;
    while i < idx.len() {
        let mut k = i;
        while k + 1 < idx.len() && xs[idx[k + 1]] == xs[idx[i]] {
            k += 1;
        }
        let rank = (i + k) as f64 / 2.0 + 1.0;
        for &j in &idx[i..=k] {
            out[j] = rank;
        }
        i = k + 1;
    }
    out
}

/// Spearman rank correlation, ties given their average rank. `None` when
/// either side is constant or the lengths differ.
pub fn spearman(xs: &[f64], ys: &[f64]) -> Option<f64> {
    if xs.len() != ys.len() || xs.len() < 2 {
        return None;
    }
    let (rx, ry) = (ranks(xs), ranks(ys));
    let n = xs.len() as f64;
    let mx = rx.iter().sum::<f64>() / n;
    let my = ry.iter().sum::<f64>() / n;
    let cov: f64 = rx.iter().zip(&ry).map(|(a, b)| (a - mx) * (b - my)).sum();
    let vx: f64 = rx.iter().map(|a| (a - mx).powi(2)).sum();
    let vy: f64 = ry.iter().map(|b| (b - my).powi(2)).sum();
    (vx > 0.0 && vy > 0.0).then(|| cov / (vx * vy).sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::compile::Layout;
    use crate::potential::Scope;

    fn binary(vars: &[usize]) -> Scope {
        Scope::new(vars.iter().map(|&v| (v, 2))).unwrap()
    }

    /// Cliques of size 8 and 4 sharing one binary variable.
    fn pair() -> JunctionTree {
        JunctionTree::from_cliques(vec![binary(&[0, 1, 3]), binary(&[1, 2])], Layout::Flat).unwrap()
    }

    #[test]
    fn message_formulas() {
        let c = MessageCost::from_sizes(8, 4, 2);
        assert_eq!((c.additions, c.multiplications), (6, 6));
        assert_eq!(c.parallel_time(), 6.0);
        assert_eq!(c.work() as f64 / c.parallel_time(), 2.0);
        assert_eq!(MessageCost::from_sizes(4, 8, 4).additions, 0);
        let m = message_cost(&pair(), 0, 0);
        assert_eq!((m.source, m.target, m.source_size, m.target_size, m.separator_size), (0, 1, 8, 4, 2));
    }

    #[test]
    fn two_clique_tree() {
        let tree = pair();
        let e = tree_cost(&tree, 0.0);
        assert_eq!((e.messages, e.sequential, e.parallel, e.speedup), (2, 24.0, 12.0, 2.0));
        let e = tree_cost(&tree, 6.0);
        assert_eq!((e.parallel, e.speedup), (24.0, 1.0));
    }

    #[test]
    fn capped_lanes() {
        let tree = pair();
        assert_eq!(tree_cost_capped(&tree, 0.0, 1).speedup, 1.0);
        assert_eq!(tree_cost_capped(&tree, 0.0, 64), tree_cost(&tree, 0.0));
    }

    #[test]
    fn single_clique_has_no_messages() {
        let tree = JunctionTree::from_cliques(vec![binary(&[0, 1])], Layout::Flat).unwrap();
        let e = tree_cost(&tree, 3.0);
        assert_eq!((e.messages, e.speedup), (0, 1.0));
        assert_eq!(overhead_fraction(&tree, 3.0, 1.0).fraction, 0.0);
    }

    #[test]
    fn zero_tau_has_no_overhead() {
        let r = overhead_fraction(&pair(), 0.0, 10.0);
        assert_eq!(r.fraction, 0.0);
        assert!(r.speedup_ceiling.is_infinite());
        let r = overhead_fraction(&pair(), 6.0, 1.0);
        assert_eq!(r.fraction, 0.5);
        assert_eq!(r.speedup_ceiling, 2.0);
    }

    #[test]
    fn measured_ceiling_bounds_measured_speedup() {
        // 137 ms sequential, 104 ms parallel, 36% of it launch overhead
        let ceiling = measured_speedup_ceiling(137.0, 104.0, 0.36);
        assert!((ceiling - 3.659).abs() < 1e-3);
        assert!(137.0 / 104.0 <= ceiling);
    }

    #[test]
    fn exact_linear_fit() {
        let samples: Vec<_> = (1..20).map(|k| TimingSample { work: 100.0 * k as f64, time: 5.0 + k as f64 }).collect();
        let fit = estimate_tau(&samples).unwrap();
        assert!((fit.tau - 5.0).abs() < 1e-6);
        assert!((fit.throughput - 100.0).abs() < 1e-6);
        assert!(fit.residual < 1e-9);
    }

    #[test]
    fn constant_time_is_overhead_dominated() {
        let samples: Vec<_> = (1..5).map(|k| TimingSample { work: k as f64, time: 3.0 }).collect();
        let fit = estimate_tau(&samples).unwrap();
        assert_eq!(fit.tau, 3.0);
        assert!(fit.throughput.is_infinite() && fit.overhead_dominated);
    }

    #[test]
    fn negative_intercept_is_clamped() {
        let samples = [TimingSample { work: 1.0, time: 0.5 }, TimingSample { work: 2.0, time: 2.5 }];
        let fit = estimate_tau(&samples).unwrap();
        assert_eq!(fit.tau, 0.0);
        assert!(fit.residual > 0.0);
    }

    #[test]
    fn too_few_samples() {
        assert_eq!(estimate_tau(&[]), Err(Error::InsufficientSamples));
        let same = [TimingSample { work: 1.0, time: 1.0 }, TimingSample { work: 1.0, time: 2.0 }];
        assert_eq!(estimate_tau(&same), Err(Error::InsufficientSamples));
    }

    #[test]
    fn spearman_basics() {
        assert_eq!(spearman(&[1.0, 2.0, 3.0], &[10.0, 20.0, 30.0]), Some(1.0));
        assert_eq!(spearman(&[1.0, 2.0, 3.0], &[3.0, 2.0, 1.0]), Some(-1.0));
        assert_eq!(spearman(&[1.0, 1.0], &[1.0, 2.0]), None);
        assert_eq!(ranks(&[5.0, 1.0, 5.0]), vec![2.5, 1.0, 2.5]);
    }
}
