//! Replicated runs of the high-dimensional simulation, scored on the
//! best-ML model.
//!
//! cargo run --release --example benchmark -- [n] [d] [relevant_fraction] [M] [Q] [reps]

use std::time::Instant;

use sugsvarsel::eval::quartiles;
use sugsvarsel::{
    adjusted_rand_index, full_search, select_best, simulate, variable_recovery, BetaGrid,
    Criterion, Hyperparameters, ScenarioSpec, SearchConfig,
};

fn main() {
    let args: Vec<String> = std::env::args().collect();
    let n: usize = args.get(1).map_or(100, |s| s.parse().unwrap());
    let d: usize = args.get(2).map_or(200, |s| s.parse().unwrap());
    let frac: f64 = args.get(3).map_or(0.5, |s| s.parse().unwrap());
    let m: usize = args.get(4).map_or(20, |s| s.parse().unwrap());
    let q: usize = args.get(5).map_or(30, |s| s.parse().unwrap());
    let reps: u64 = args.get(6).map_or(10, |s| s.parse().unwrap());
    let (mut aris, mut rel, mut irr) = (vec![], vec![], vec![]);
    let start = Instant::now();
    for rep in 0..reps {
        let mut ds = simulate(&ScenarioSpec::high_dimensional(n, d, frac, 1000 + rep)).unwrap();
        sugsvarsel::data::standardize(&mut ds.data);
        let hyper = Hyperparameters::from_data(ds.data.view()).unwrap();
        let config = SearchConfig {
            subsamples: m,
            orderings: q,
            seed: rep,
            pml_mode: None,
            ..SearchConfig::default()
        };
        let set = full_search(ds.data.view(), &config, &hyper, &BetaGrid::default()).unwrap();
        let best = select_best(&set.models, Criterion::Ml).unwrap();
        let ari = adjusted_rand_index(&best.z, &ds.true_z).unwrap();
        let (r, i) = variable_recovery(&best.gamma, &ds.true_gamma).unwrap();
        println!(
            "rep {rep}: K={} ari={ari:.3} rel={r:.3} irr={i:.3} failures={}",
            best.n_clusters(),
            set.failures.len()
        );
        aris.push(ari);
        rel.push(r);
        irr.push(i);
    }
    for (name, values) in [("ARI", &aris), ("relevant", &rel), ("irrelevant", &irr)] {
        let q = quartiles(values).unwrap();
        println!(
            "{name}: median {:.3} [{:.3}, {:.3}]",
            q.median, q.lower, q.upper
        );
    }
    println!("{:.1}s", start.elapsed().as_secs_f64());
}
