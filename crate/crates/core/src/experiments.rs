//! Parameter sweeps over the planners.

use std::fmt::Write;
use std::ops::RangeInclusive;
use std::time::{Duration, Instant};

use rayon::prelude::*;

use crate::exact::{exact_plan, ExactError, ExactOptions, ExactStatus};
use crate::greedy::{greedy_plan, GreedyOptions};
use crate::resource::{Resource, ResourceCatalog};
use crate::routing::RoutingMatrix;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RowStatus {
    Optimal,
    BudgetExceeded,
    Infeasible,
}

impl RowStatus {
    pub fn as_str(self) -> &'static str {
        match self {
            RowStatus::Optimal => "optimal",
            RowStatus::BudgetExceeded => "budget-exceeded",
            RowStatus::Infeasible => "infeasible",
        }
    }

    fn from_exact(s: ExactStatus) -> Self {
        match s {
            ExactStatus::Optimal => RowStatus::Optimal,
            ExactStatus::BudgetExceeded => RowStatus::BudgetExceeded,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    /// Backup link pairs fixed for this row.
    pub k: usize,
    /// Fewest SDN nodes completing the matrix with exactly `k` pairs.
    pub sdn_nodes: Option<usize>,
    pub status: RowStatus,
    pub wall: Duration,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepResult {
    pub nodes: usize,
    pub links: usize,
    pub rows: Vec<SweepRow>,
}

impl SweepResult {
    /// `(K / |links|, SDN nodes / |nodes|)` per solved row.
    pub fn normalized(&self) -> Vec<(f64, f64)> {
        self.rows
            .iter()
            .filter_map(|r| {
                r.sdn_nodes
                    .map(|s| (r.k as f64 / self.links as f64, s as f64 / self.nodes as f64))
            })
            .collect()
    }

    /// Whether node counts never increase with `k` across solved rows.
    pub fn is_monotone(&self) -> bool {
        let solved: Vec<usize> = self.rows.iter().filter_map(|r| r.sdn_nodes).collect();
        solved.windows(2).all(|w| w[1] <= w[0])
    }

    pub fn to_csv(&self, wall_time: bool) -> String {
        let mut s = String::from("k,sdn_nodes,status,link_fraction,node_fraction");
        s.push_str(if wall_time { ",seconds\n" } else { "\n" });
        for r in &self.rows {
            let (nodes, frac) = match r.sdn_nodes {
                Some(n) => (n.to_string(), format!("{:.6}", n as f64 / self.nodes as f64)),
                None => (String::new(), String::new()),
            };
            let _ = write!(
                s,
                "{},{},{},{:.6},{}",
                r.k,
                nodes,
                r.status.as_str(),
                r.k as f64 / self.links as f64,
                frac
            );
            if wall_time {
                let _ = write!(s, ",{:.6}", r.wall.as_secs_f64());
            }
            s.push('\n');
        }
        s
    }
}

/// For each `k`, the fewest SDN nodes that determine every flow together
/// with exactly `k` backup link pairs. Node cost 1, link cost 0, no limits.
pub fn tradeoff_sweep(r: &RoutingMatrix, ks: RangeInclusive<usize>, node_budget: u64) -> SweepResult {
    let t = r.topology();
    let catalog = ResourceCatalog::with_kind_costs(t, 1.0, 0.0);
    let ks: Vec<usize> = ks.collect();
    let rows = ks
        .par_iter()
        .map(|&k| {
            let start = Instant::now();
            let out = exact_plan(
                r,
                &catalog,
                &ExactOptions {
                    link_cardinality: Some(k),
                    node_budget,
                    ..Default::default()
                },
            );
            let wall = start.elapsed();
            match out {
                Ok(o) => SweepRow {
                    k,
                    sdn_nodes: Some(
                        o.plan
                            .resources()
                            .iter()
                            .filter(|x| matches!(x, Resource::SdnNode(_)))
                            .count(),
                    ),
                    status: RowStatus::from_exact(o.status),
                    wall,
                },
                Err(e) => SweepRow {
                    k,
                    sdn_nodes: None,
                    status: row_error(&e),
                    wall,
                },
            }
        })
        .collect();
    SweepResult {
        nodes: t.node_count(),
        links: t.link_count(),
        rows,
    }
}

fn row_error(e: &ExactError) -> RowStatus {
    match e {
        ExactError::BudgetExhausted { .. } => RowStatus::BudgetExceeded,
        _ => RowStatus::Infeasible,
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct HybridRow {
    /// Resources taken from the greedy plan before exact completion.
    pub k: usize,
    pub total_resources: Option<usize>,
    pub total_cost: Option<f64>,
    pub status: RowStatus,
    /// Time spent in the exact phase.
    pub exact_wall: Duration,
}

#[derive(Debug, Clone, PartialEq)]
pub struct HybridResult {
    /// Length of the unrestricted greedy plan.
    pub greedy_len: usize,
    pub rows: Vec<HybridRow>,
}

impl HybridResult {
    pub fn to_csv(&self, wall_time: bool) -> String {
        let mut s = String::from("k,total_resources,total_cost,status");
        s.push_str(if wall_time { ",seconds\n" } else { "\n" });
        for r in &self.rows {
            let _ = write!(
                s,
                "{},{},{},{}",
                r.k,
                r.total_resources.map_or_else(String::new, |n| n.to_string()),
                r.total_cost.map_or_else(String::new, |c| c.to_string()),
                r.status.as_str()
            );
            if wall_time {
                let _ = write!(s, ",{:.6}", r.exact_wall.as_secs_f64());
            }
            s.push('\n');
        }
        s
    }
}

/// For each `k`, fixes the first `k` greedy choices and completes the plan
/// exactly. `None` runs `k` from zero to the full greedy length.
pub fn hybrid_sweep(
    r: &RoutingMatrix,
    catalog: &ResourceCatalog,
    ks: Option<RangeInclusive<usize>>,
    node_budget: u64,
) -> HybridResult {
    let full = greedy_plan(r, catalog, &GreedyOptions::default());
    let greedy_len = full.len();
    let ks: Vec<usize> = ks.map_or_else(|| (0..=greedy_len).collect(), |k| k.collect());
    let prefix = full.resources();
    let rows = ks
        .par_iter()
        .map(|&k| {
            let fixed = prefix[..k.min(greedy_len)].iter().map(|&x| (x, true)).collect();
            let start = Instant::now();
            let out = exact_plan(
                r,
                catalog,
                &ExactOptions {
                    fixed,
                    node_budget,
                    ..Default::default()
                },
            );
            let exact_wall = start.elapsed();
            match out {
                Ok(o) => HybridRow {
                    k,
                    total_resources: Some(o.plan.len()),
                    total_cost: Some(o.plan.total_cost),
                    status: RowStatus::from_exact(o.status),
                    exact_wall,
                },
                Err(e) => HybridRow {
                    k,
                    total_resources: None,
                    total_cost: None,
                    status: row_error(&e),
                    exact_wall,
                },
            }
        })
        .collect();
    HybridResult { greedy_len, rows }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::routing::{shortest_paths, shortest_paths_for};
    use crate::topology::parse_topology;

    fn downward() -> RoutingMatrix {
        let t = parse_topology("node R1\nnode R2\nnode R3\nnode R4\nlink R1 R2\nlink R2 R3\nlink R3 R4\n").unwrap();
        shortest_paths_for(&t, t.select_flows(|f| f.ingress < f.egress)).unwrap()
    }

    #[test]
    fn chain_sweep() {
        let res = tradeoff_sweep(&downward(), 0..=4, 1_000_000);
        let nodes: Vec<Option<usize>> = res.rows.iter().map(|r| r.sdn_nodes).collect();
        assert_eq!(nodes, [Some(1), Some(0), Some(0), Some(0), None]);
        assert_eq!(res.rows[4].status, RowStatus::Infeasible);
        assert!(res.is_monotone());
        assert_eq!(
            res.to_csv(false),
            "k,sdn_nodes,status,link_fraction,node_fraction\n\
             0,1,optimal,0.000000,0.250000\n\
             1,0,optimal,0.333333,0.000000\n\
             2,0,optimal,0.666667,0.000000\n\
             3,0,optimal,1.000000,0.000000\n\
             4,,infeasible,1.333333,\n"
        );
        assert_eq!(res.normalized()[0], (0.0, 0.25));
    }

    #[test]
    fn hybrid_endpoints() {
        let t = parse_topology(
            "node a\nnode b\nnode c\nnode d\nnode e\nnode f\nlink a b\nlink b c\nlink c d\nlink d e\nlink e f\nlink f a\nlink a d\n",
        )
        .unwrap();
        let r = shortest_paths(&t).unwrap();
        let c = ResourceCatalog::uniform(&t);
        let h = hybrid_sweep(&r, &c, None, 10_000_000);
        assert_eq!(h.rows.len(), h.greedy_len + 1);
        let first = h.rows.first().unwrap().total_cost.unwrap();
        let last = h.rows.last().unwrap().total_cost.unwrap();
        assert!(first <= last);
        assert_eq!(last, h.greedy_len as f64);
        let exact = exact_plan(&r, &c, &ExactOptions::default()).unwrap();
        assert_eq!(first, exact.plan.total_cost);
        assert!(h
            .to_csv(true)
            .starts_with("k,total_resources,total_cost,status,seconds\n0,"));
    }
}
