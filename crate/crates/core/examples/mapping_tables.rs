// Mapping tables for a clique (A,B,D) and a clique (B,C) that share B.
//
// Each separator entry lists the clique-table indices that agree with it,
// so a message is a gather over one list and a scatter over the other.

use jtprop::compile::{Layout, MappingTable};
use jtprop::potential::Scope;

fn main() {
    let (a, b, c, d) = (0, 1, 2, 3);
    let abd = Scope::new([(a, 2), (b, 2), (d, 2)]).unwrap();
    let bc = Scope::new([(b, 2), (c, 2)]).unwrap();
    let sep = abd.intersection(&bc);

    for (name, clique) in [("ABD", &abd), ("BC", &bc)] {
        let mu = MappingTable::build(clique, &sep, Layout::Flat).unwrap();
        let lists: Vec<Vec<usize>> = (0..mu.entries()).map(|j| mu.list(j)).collect();
        println!("{name}: {lists:?}");
    }

    let flat = MappingTable::build(&abd, &sep, Layout::Flat).unwrap();
    let inter = flat.relayout(Layout::Interleaved);
    println!("flat storage        {:?}", flat.physical());
    println!("interleaved storage {:?}", inter.physical());
    assert_eq!(flat.list(0), vec![0, 1, 4, 5]);
    assert_eq!(inter.physical(), vec![0, 2, 1, 3, 4, 6, 5, 7]);
}
