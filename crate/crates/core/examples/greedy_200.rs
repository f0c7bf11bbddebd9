//! Times the greedy planner on a 200-node random topology.

use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use tmplan_core::*;

fn main() {
    let n = 200;
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut s = String::new();
    for i in 0..n {
        s += &format!("node v{i}\n");
    }
    let mut edges = std::collections::BTreeSet::new();
    for i in 1..n {
        edges.insert((rng.gen_range(0..i), i));
    }
    while edges.len() < 300 {
        let (a, b) = (rng.gen_range(0..n), rng.gen_range(0..n));
        if a != b {
            edges.insert((a.min(b), a.max(b)));
        }
    }
    for (a, b) in edges {
        s += &format!("link v{a} v{b}\n");
    }
    let t = parse_topology(&s).unwrap();
    let start = Instant::now();
    let r = shortest_paths(&t).unwrap();
    let routed = start.elapsed();
    let plan = greedy_plan(&r, &ResourceCatalog::uniform(&t), &GreedyOptions::default());
    println!(
        "{t}: routing {:?}, total {:?}, {} resources, complete {}",
        routed,
        start.elapsed(),
        plan.len(),
        plan.is_complete()
    );
}
