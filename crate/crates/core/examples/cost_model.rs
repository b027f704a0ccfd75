// Operation counts for each message, the predicted speedup for a range of
// launch overheads, and an overhead fit from timings.

use jtprop::compile::{compile, CompileOptions};
use jtprop::model::fixtures;
use jtprop::perfmodel::{directed_messages, estimate_tau, tree_cost, TimingSample};

fn main() {
    let tree = compile(&fixtures::five_node(), CompileOptions::default()).unwrap();
    for m in directed_messages(&tree) {
        println!(
            "{} -> {}: |src|={} |tgt|={} |sep|={} adds={} mults={} parallel time={}",
            m.source,
            m.target,
            m.source_size,
            m.target_size,
            m.separator_size,
            m.additions,
            m.multiplications,
            m.parallel_time()
        );
    }
    for tau in [0.0, 1.0, 4.0, 16.0] {
        let e = tree_cost(&tree, tau);
        println!("tau={tau:>4}: sequential={} parallel={} speedup={:.3}", e.sequential, e.parallel, e.speedup);
    }

    let samples: Vec<TimingSample> =
        (1..=8).map(|k| TimingSample { work: 1000.0 * k as f64, time: 0.02 + k as f64 * 0.001 }).collect();
    let fit = estimate_tau(&samples).unwrap();
    println!("fitted tau={:.4} throughput={:.1}", fit.tau, fit.throughput);
}
