// Time both engines on trees whose separators grow from 64 to 16384
// entries and print the bench CSV. Set `JTPROP_BUDGET` for bigger trees.

use jtprop::cli::{bench_csv, family_cases, run_bench, BenchConfig};
use jtprop::synth::{FamilySpec, TreeProfile};

fn main() {
    let budget = std::env::var("JTPROP_BUDGET").ok().and_then(|s| s.parse().ok()).unwrap_or(1 << 18);
    let cases = family_cases(&FamilySpec { profile: TreeProfile::Mixed, budget, ..Default::default() });
    let report = run_bench(&cases, &BenchConfig { repeats: 3, ..Default::default() }).unwrap();
    print!("{}", bench_csv(&report));
    assert!(report.rows.iter().all(|r| r.identical));
}
