// Read a network in the Hugin NET format, compile it and query it by
// state label.

use jtprop::cli::{infer, Loaded};
use jtprop::compile::{compile, CompileOptions};
use jtprop::parser::parse_net_document;
use jtprop::propagate::Engine;

const SPRINKLER: &str = r#"
net { }
node Cloudy { states = ("no" "yes"); }
node Sprinkler { states = ("off" "on"); }
node Rain { states = ("no" "yes"); }
node WetGrass { states = ("dry" "wet"); }
potential (Cloudy) { data = (0.5 0.5); }
potential (Sprinkler | Cloudy) { data = ((0.5 0.5) (0.9 0.1)); }
potential (Rain | Cloudy) { data = ((0.8 0.2) (0.2 0.8)); }
potential (WetGrass | Sprinkler Rain) {
    data = (((1.0 0.0) (0.1 0.9))
            ((0.1 0.9) (0.01 0.99)));
}
"#;

fn main() {
    let doc = parse_net_document(SPRINKLER).unwrap();
    let tree = compile(&doc.network, CompileOptions::default()).unwrap();
    let loaded = Loaded { network: doc.network, tree, labels: doc.state_labels };

    let evidence = vec!["WetGrass=wet".to_string()];
    let query = vec!["Sprinkler".to_string(), "Rain".to_string()];
    for m in infer(&loaded, &evidence, &query, Engine::Sequential).unwrap() {
        let parts: Vec<String> = m.states.iter().zip(&m.probabilities).map(|(s, p)| format!("{s}={p:.4}")).collect();
        println!("{}: {}", m.variable, parts.join(" "));
    }
}
