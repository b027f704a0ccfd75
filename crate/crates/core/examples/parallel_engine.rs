// The parallel engine splits each message's separator entries across a
// worker pool. Every entry does the same arithmetic in the same order as
// the sequential engine, so the potentials match bit for bit.

use jtprop::compile::{compile, CompileOptions, Layout};
use jtprop::model::Evidence;
use jtprop::propagate::{Engine, PropagationState};
use jtprop::synth::{gen_network, GenSpec};

fn bits(state: &PropagationState<'_>) -> Vec<u64> {
    state.clique_potentials().iter().flat_map(|p| p.values().iter().map(|x| x.to_bits())).collect()
}

fn main() {
    let net = gen_network(&GenSpec { seed: 7, variables: 30, max_parents: 3, ..Default::default() });
    let mut evidence = Evidence::new();
    evidence.observe(&net, 3, 1).unwrap();

    for layout in [Layout::Flat, Layout::Interleaved] {
        let tree = compile(&net, CompileOptions { layout }).unwrap();
        let mut seq = PropagationState::initialize(&tree, &net, Engine::Sequential).unwrap();
        seq.apply_evidence(&evidence).unwrap();
        seq.belief_propagation().unwrap();
        for workers in [1, 2, 7] {
            let mut par = PropagationState::initialize(&tree, &net, Engine::parallel_always(workers)).unwrap();
            par.apply_evidence(&evidence).unwrap();
            par.belief_propagation().unwrap();
            assert_eq!(bits(&seq), bits(&par));
            println!("{layout:?} layout, {workers} workers: identical");
        }
    }
}
