//! Brute-force reference implementations shared by the integration tests.
//! They work on plain sets and never call into the planners.
#![allow(dead_code)]

use std::collections::BTreeSet;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use tmplan_core::{parse_topology, Topology};

pub const CHAIN: &str = "node R1\nnode R2\nnode R3\nnode R4\nlink R1 R2\nlink R2 R3\nlink R3 R4\n";

/// Random connected topology: a random spanning tree plus extra links.
pub fn random_topology(seed: u64, n: usize, extra: usize, max_metric: u32) -> String {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut s = String::new();
    for i in 0..n {
        s += &format!("node n{i}\n");
    }
    let mut edges = BTreeSet::new();
    for i in 1..n {
        let j = rng.gen_range(0..i);
        edges.insert((j, i));
    }
    let max_edges = n * (n - 1) / 2;
    let target = (edges.len() + extra).min(max_edges);
    while edges.len() < target {
        let a = rng.gen_range(0..n);
        let b = rng.gen_range(0..n);
        if a != b {
            edges.insert((a.min(b), a.max(b)));
        }
    }
    for (a, b) in edges {
        let m = rng.gen_range(1..=max_metric);
        s += &format!("link n{a} n{b} {m}\n");
    }
    s
}

pub fn topo(text: &str) -> Topology {
    parse_topology(text).expect("valid topology")
}

/// A directed view of the topology with plain indices.
pub struct Graph {
    pub n: usize,
    /// `(tail, head, metric)` for directed link `2i` and `2i + 1`.
    pub arcs: Vec<(usize, usize, u64)>,
}

impl Graph {
    pub fn of(t: &Topology) -> Self {
        let mut arcs = Vec::new();
        for l in t.links() {
            let link = t.link(l);
            arcs.push((link.a.0, link.b.0, u64::from(link.metric)));
            arcs.push((link.b.0, link.a.0, u64::from(link.metric)));
        }
        Graph {
            n: t.node_count(),
            arcs,
        }
    }

    /// All-pairs distances by Floyd-Warshall.
    pub fn distances(&self) -> Vec<Vec<u64>> {
        let inf = u64::MAX / 4;
        let mut d = vec![vec![inf; self.n]; self.n];
        for (i, row) in d.iter_mut().enumerate() {
            row[i] = 0;
        }
        for &(a, b, w) in &self.arcs {
            d[a][b] = d[a][b].min(w);
        }
        for k in 0..self.n {
            for i in 0..self.n {
                for j in 0..self.n {
                    if d[i][k] + d[k][j] < d[i][j] {
                        d[i][j] = d[i][k] + d[k][j];
                    }
                }
            }
        }
        d
    }

    /// Lexicographically smallest shortest path, found by enumerating every
    /// simple path from `s` to `t`.
    pub fn lex_shortest_path(&self, s: usize, t: usize) -> Vec<usize> {
        let best_len = self.distances()[s][t];
        let mut best: Option<Vec<usize>> = None;
        let mut path = vec![s];
        self.walk(t, 0, best_len, &mut path, &mut best);
        best.expect("connected")
    }

    fn walk(&self, t: usize, len: u64, target: u64, path: &mut Vec<usize>, best: &mut Option<Vec<usize>>) {
        let cur = *path.last().unwrap();
        if cur == t {
            if len == target && best.as_ref().is_none_or(|b| path.as_slice() < b.as_slice()) {
                *best = Some(path.clone());
            }
            return;
        }
        for &(a, b, w) in &self.arcs {
            if a == cur && !path.contains(&b) && len + w <= target {
                path.push(b);
                self.walk(t, len + w, target, path, best);
                path.pop();
            }
        }
    }
}

/// Flow sets per node and directed link, all as plain sets.
pub struct Instance {
    pub flows: Vec<(usize, usize)>,
    pub node_sets: Vec<BTreeSet<usize>>,
    pub arc_sets: Vec<BTreeSet<usize>>,
    pub node_count: usize,
    pub link_count: usize,
}

impl Instance {
    /// Routes every ordered pair (or only `ingress < egress` when
    /// `downward`) along oracle paths.
    pub fn build(t: &Topology, downward: bool) -> Self {
        let g = Graph::of(t);
        let d = g.distances();
        let mut flows = Vec::new();
        for a in 0..g.n {
            for b in 0..g.n {
                if a != b && (!downward || a < b) {
                    flows.push((a, b));
                }
            }
        }
        let mut node_sets = vec![BTreeSet::new(); g.n];
        let mut arc_sets = vec![BTreeSet::new(); g.arcs.len()];
        for (i, &(a, b)) in flows.iter().enumerate() {
            // greedy lexicographic walk along the distance field
            let mut cur = a;
            node_sets[cur].insert(i);
            while cur != b {
                let (k, &(_, h, _)) = g
                    .arcs
                    .iter()
                    .enumerate()
                    .filter(|(_, &(x, h, w))| x == cur && w + d[h][b] == d[cur][b])
                    .min_by_key(|(_, &(_, h, _))| h)
                    .unwrap();
                arc_sets[k].insert(i);
                cur = h;
                node_sets[cur].insert(i);
            }
        }
        Instance {
            flows,
            node_sets,
            arc_sets,
            node_count: g.n,
            link_count: g.arcs.len() / 2,
        }
    }

    pub fn resource_count(&self) -> usize {
        self.node_count + self.link_count
    }

    /// Flows measurable with resource `x`: nodes `0..N`, then link pairs.
    pub fn measured_by(&self, x: usize) -> BTreeSet<usize> {
        if x < self.node_count {
            self.node_sets[x].clone()
        } else {
            let l = x - self.node_count;
            self.arc_sets[2 * l].union(&self.arc_sets[2 * l + 1]).copied().collect()
        }
    }

    /// Known flows after measuring `known` and subtracting to a fixpoint.
    pub fn closure(&self, mut known: BTreeSet<usize>) -> BTreeSet<usize> {
        loop {
            let mut changed = false;
            for set in &self.arc_sets {
                let unknown: Vec<usize> = set.iter().copied().filter(|f| !known.contains(f)).collect();
                if unknown.len() == 1 {
                    known.insert(unknown[0]);
                    changed = true;
                }
            }
            if !changed {
                return known;
            }
        }
    }

    pub fn determined_by(&self, resources: &[usize]) -> BTreeSet<usize> {
        let mut known = BTreeSet::new();
        for &x in resources {
            known.extend(self.measured_by(x));
        }
        self.closure(known)
    }

    pub fn complete(&self, resources: &[usize]) -> bool {
        self.determined_by(resources).len() == self.flows.len()
    }

    /// Smallest number of resources that determine every flow, by trying
    /// all subsets of increasing size.
    pub fn min_cardinality(&self) -> usize {
        let r = self.resource_count();
        for k in 0..=r {
            let mut found = false;
            for_each_combination(r, k, &mut |c| {
                if !found && self.complete(c) {
                    found = true;
                }
                !found
            });
            if found {
                return k;
            }
        }
        unreachable!("every flow is measurable at its ingress node")
    }

    /// Cheapest subset over all `2^R` subsets.
    pub fn min_cost(&self, cost: &[f64]) -> f64 {
        let r = self.resource_count();
        assert!(r <= 22, "too many resources for exhaustive search");
        let mut best = f64::INFINITY;
        for mask in 0u64..(1 << r) {
            let c: f64 = (0..r).filter(|i| mask >> i & 1 == 1).map(|i| cost[i]).sum();
            if c >= best {
                continue;
            }
            let set: Vec<usize> = (0..r).filter(|i| mask >> i & 1 == 1).collect();
            if self.complete(&set) {
                best = c;
            }
        }
        best
    }

    /// Fewest nodes needed with exactly `k` link pairs.
    pub fn min_nodes_with_links(&self, k: usize) -> Option<usize> {
        if k > self.link_count {
            return None;
        }
        let mut best: Option<usize> = None;
        for_each_combination(self.link_count, k, &mut |links| {
            let ls: Vec<usize> = links.iter().map(|l| l + self.node_count).collect();
            for m in 0..=self.node_count {
                if best.is_some_and(|b| m >= b) {
                    break;
                }
                let mut hit = false;
                for_each_combination(self.node_count, m, &mut |nodes| {
                    let mut set = ls.clone();
                    set.extend_from_slice(nodes);
                    if self.complete(&set) {
                        hit = true;
                    }
                    !hit
                });
                if hit {
                    best = Some(m);
                    break;
                }
            }
            true
        });
        best
    }
}

/// Calls `f` with every `k`-subset of `0..n` in lexicographic order until it
/// returns false.
pub fn for_each_combination(n: usize, k: usize, f: &mut dyn FnMut(&[usize]) -> bool) {
    if k > n {
        return;
    }
    let mut c: Vec<usize> = (0..k).collect();
    loop {
        if !f(&c) {
            return;
        }
        let mut i = k;
        while i > 0 && c[i - 1] == n - k + i - 1 {
            i -= 1;
        }
        if i == 0 {
            return;
        }
        c[i - 1] += 1;
        for j in i..k {
            c[j] = c[j - 1] + 1;
        }
    }
}

/// Small topologies used across several checks.
pub fn small_corpus() -> Vec<String> {
    let mut v = vec![
        CHAIN.to_string(),
        "node A\nnode B\nlink A B\n".to_string(),
        "node a\nnode b\nnode c\nlink a b\nlink b c\nlink c a\n".to_string(),
    ];
    v.extend((0..24).map(|s| random_topology(1000 + s, 4 + s as usize % 5, s as usize % 4, 1 + s as u32 % 3)));
    v
}

/// Connected graph with exactly `n` nodes and `e` links.
pub fn sized_topology(seed: u64, n: usize, e: usize) -> String {
    assert!(e + 1 >= n && e <= n * (n - 1) / 2);
    random_topology(seed, n, e + 1 - n, 1)
}
