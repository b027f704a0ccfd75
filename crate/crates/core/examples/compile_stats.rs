// Table-size statistics and the separator-size histogram of a compiled
// random network.

use jtprop::compile::{compile, tree_stats, CompileOptions};
use jtprop::synth::{gen_network, GenSpec};

fn main() {
    let net = gen_network(&GenSpec { seed: 3, variables: 40, max_parents: 3, ..Default::default() });
    let tree = compile(&net, CompileOptions::default()).unwrap();
    let stats = tree_stats(&tree);
    println!("nodes: {}", stats.nodes);
    if let Some(c) = stats.clique_tables {
        println!("clique tables: max {} min {} avg {:.1}", c.max, c.min, c.avg);
    }
    if let Some(s) = stats.separator_tables {
        println!("separator tables: max {} min {} avg {:.1}", s.max, s.min, s.avg);
    }
    for b in &stats.separator_histogram {
        println!("[{:>5}, {:>5}) {}", b.lo, b.hi, "#".repeat(b.count));
    }
}
