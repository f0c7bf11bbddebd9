//! Minimum-cost placement by search over resource subsets.
//!
//! Feasibility of a subset is decided by the peeling closure, which is
//! monotone: adding resources never undetermines a flow. The search uses
//! this twice. A branch is abandoned as soon as deploying every remaining
//! candidate would still leave flows undetermined, and only candidates that
//! still carry an undetermined flow are branched on, since any other choice
//! is redundant in every extension of the current set.

use std::collections::BTreeMap;

use thiserror::Error;

use crate::determinability::{check_feasibility, init_working_set, WorkingSet};
use crate::greedy::{greedy_plan, GreedyOptions};
use crate::plan::DeploymentPlan;
use crate::resource::{Resource, ResourceCatalog};
use crate::routing::RoutingMatrix;

pub const DEFAULT_NODE_BUDGET: u64 = 10_000_000;

const EPS: f64 = 1e-9;

#[derive(Debug, Clone)]
pub struct ExactOptions {
    /// Resources forced in (`true`) or out (`false`).
    pub fixed: BTreeMap<Resource, bool>,
    /// Reject plans costing more than this.
    pub cost_bound: Option<f64>,
    /// Maximum number of search nodes before giving up on optimality.
    pub node_budget: u64,
    /// Require exactly this many backup link pairs.
    pub link_cardinality: Option<usize>,
}

impl Default for ExactOptions {
    fn default() -> Self {
        Self {
            fixed: BTreeMap::new(),
            cost_bound: None,
            node_budget: DEFAULT_NODE_BUDGET,
            link_cardinality: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExactStatus {
    Optimal,
    /// The node budget ran out; the plan is the best one found.
    BudgetExceeded,
}

#[derive(Debug, Clone)]
pub struct ExactOutcome {
    pub plan: DeploymentPlan,
    pub status: ExactStatus,
    pub search_nodes: u64,
}

impl ExactOutcome {
    pub fn is_optimal(&self) -> bool {
        self.status == ExactStatus::Optimal
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ExactError {
    #[error("{undetermined} flows stay undetermined even with every allowed resource deployed")]
    Infeasible { undetermined: usize },
    #[error("no feasible plan satisfies the catalog limits")]
    LimitsInfeasible,
    #[error("no feasible plan costs at most {bound}")]
    CostBound { bound: f64 },
    #[error("{requested} backup link pairs requested but {available} are allowed and {fixed} are fixed")]
    Cardinality {
        requested: usize,
        available: usize,
        fixed: usize,
    },
    #[error("search budget exhausted after {nodes} nodes without a feasible plan")]
    BudgetExhausted { nodes: u64 },
}

/// Finds a minimum-cost resource set determining every flow.
///
/// With uniform candidate costs the search deepens on the number of
/// resources, otherwise it is a depth-first branch and bound seeded with the
/// greedy plan. Finite catalog limits are checked with
/// [`check_feasibility`] on every candidate solution.
pub fn exact_plan(
    r: &RoutingMatrix,
    catalog: &ResourceCatalog,
    opts: &ExactOptions,
) -> Result<ExactOutcome, ExactError> {
    let t = r.topology();
    let forced: Vec<Resource> = opts.fixed.iter().filter(|(_, &v)| v).map(|(&x, _)| x).collect();
    let cands: Vec<Resource> = Resource::all(t)
        .into_iter()
        .filter(|x| !opts.fixed.contains_key(x))
        .collect();
    let is_link = |x: &Resource| matches!(x, Resource::BackupLink(_));

    let forced_links = forced.iter().filter(|x| is_link(x)).count();
    let links_cap = match opts.link_cardinality {
        Some(k) => {
            let available = cands.iter().filter(|x| is_link(x)).count();
            if k < forced_links || k > forced_links + available {
                return Err(ExactError::Cardinality {
                    requested: k,
                    available,
                    fixed: forced_links,
                });
            }
            Some(k - forced_links)
        }
        None => None,
    };

    // unlike the greedy loop, the search starts from the peeled state:
    // flows alone on a link are known without any resource
    let mut root = init_working_set(r);
    root.peel();
    for &x in &forced {
        root.deploy(x);
    }
    let mut all = root.clone();
    for &x in &cands {
        all.deploy(x);
    }
    if all.undetermined_count() > 0 {
        return Err(ExactError::Infeasible {
            undetermined: all.undetermined_count(),
        });
    }

    let limited = catalog.has_limits();
    let forced_cost: f64 = forced.iter().map(|&x| catalog.cost(x)).sum();

    // order candidates by descending initial φ
    let mut scored: Vec<(usize, Resource)> = cands.iter().map(|&x| (root.score(x).flows, x)).collect();
    scored.sort_by(|a, b| b.0.cmp(&a.0).then(a.1.cmp(&b.1)));
    let order: Vec<Resource> = scored.into_iter().map(|(_, x)| x).collect();

    let mut pad_links: Vec<Resource> = cands.iter().copied().filter(is_link).collect();
    pad_links.sort_by(|a, b| catalog.cost(*a).total_cmp(&catalog.cost(*b)).then(a.cmp(b)));

    let mut search = Search {
        r,
        catalog,
        cands: order,
        forced: forced.clone(),
        limited,
        links_cap,
        pad_links,
        budget: opts.node_budget,
        nodes: 0,
        exceeded: false,
        best_cost: opts.cost_bound.map_or(f64::INFINITY, |b| b + EPS),
        best: None,
        stop_at_first: false,
        found_in_pass: false,
    };

    // incumbent
    if links_cap.is_none() {
        let g = greedy_plan(
            r,
            catalog,
            &GreedyOptions {
                preset: forced.clone(),
                excluded: opts.fixed.iter().filter(|(_, &v)| !v).map(|(&x, _)| x).collect(),
                ..Default::default()
            },
        );
        if g.is_complete() && g.total_cost < search.best_cost {
            search.best_cost = g.total_cost;
            search.best = Some(g.resources()[forced.len()..].to_vec());
        }
    }
    if let Some(cap) = links_cap {
        if let Some((set, cost)) = cardinality_incumbent(r, catalog, opts, &forced, cap) {
            let total = cost + search.pad_cost_of(&set);
            if total < search.best_cost {
                search.best_cost = total;
                search.best = Some(set);
            }
        }
    }
    if search.best.is_none() && limited {
        let everything: Vec<Resource> = forced.iter().chain(&cands).copied().collect();
        if !check_feasibility(r, &everything, catalog).is_complete() {
            return Err(ExactError::LimitsInfeasible);
        }
    }

    let uniform = catalog.uniform_cost(&search.cands).filter(|&c| c > 0.0);
    match uniform {
        Some(c) if links_cap.is_none() => {
            let max_k = search
                .best
                .as_ref()
                .map_or(search.cands.len(), |b| b.len().saturating_sub(1));
            search.stop_at_first = true;
            for k in 0..=max_k {
                if forced_cost + c * k as f64 >= search.best_cost - EPS {
                    break;
                }
                search.dfs(&root, &mut Vec::new(), 0, forced_cost, 0, Some(k));
                if search.exceeded || search.found_in_pass {
                    break;
                }
            }
        }
        _ => search.dfs(&root, &mut Vec::new(), 0, forced_cost, 0, None),
    }

    let status = if search.exceeded {
        ExactStatus::BudgetExceeded
    } else {
        ExactStatus::Optimal
    };
    let Some(chosen) = search.best.clone() else {
        if search.exceeded {
            return Err(ExactError::BudgetExhausted { nodes: search.nodes });
        }
        return Err(match opts.cost_bound {
            Some(bound) => ExactError::CostBound { bound },
            None => ExactError::LimitsInfeasible,
        });
    };
    let mut resources = forced.clone();
    resources.extend(chosen.iter().copied());
    if let Some(cap) = links_cap {
        let used = chosen.iter().filter(|x| is_link(x)).count();
        let extra: Vec<Resource> = search
            .pad_links
            .iter()
            .copied()
            .filter(|x| !chosen.contains(x))
            .take(cap - used)
            .collect();
        resources.extend(extra);
    }
    let plan = DeploymentPlan::from_resources(r, catalog, &resources, &forced);
    Ok(ExactOutcome {
        plan,
        status,
        search_nodes: search.nodes,
    })
}

/// Greedy links first (at most `cap`), then greedy nodes.
fn cardinality_incumbent(
    r: &RoutingMatrix,
    catalog: &ResourceCatalog,
    opts: &ExactOptions,
    forced: &[Resource],
    cap: usize,
) -> Option<(Vec<Resource>, f64)> {
    let t = r.topology();
    let excluded_fixed = opts.fixed.iter().filter(|(_, &v)| !v).map(|(&x, _)| x);
    let mut no_nodes: Vec<Resource> = excluded_fixed.clone().collect();
    no_nodes.extend(t.nodes().map(Resource::SdnNode));
    let links = greedy_plan(
        r,
        catalog,
        &GreedyOptions {
            preset: forced.to_vec(),
            excluded: no_nodes,
            max_steps: Some(cap),
            ..Default::default()
        },
    );
    let chosen = links.resources();
    let mut no_links: Vec<Resource> = excluded_fixed.collect();
    no_links.extend(t.links().map(Resource::BackupLink).filter(|x| !chosen.contains(x)));
    let full = greedy_plan(
        r,
        catalog,
        &GreedyOptions {
            preset: chosen,
            excluded: no_links,
            ..Default::default()
        },
    );
    if !full.is_complete() {
        return None;
    }
    let set: Vec<Resource> = full.resources()[forced.len()..].to_vec();
    let cost = set.iter().map(|&x| catalog.cost(x)).sum::<f64>() + forced.iter().map(|&x| catalog.cost(x)).sum::<f64>();
    Some((set, cost))
}

struct Search<'a> {
    r: &'a RoutingMatrix,
    catalog: &'a ResourceCatalog,
    cands: Vec<Resource>,
    forced: Vec<Resource>,
    limited: bool,
    links_cap: Option<usize>,
    pad_links: Vec<Resource>,
    budget: u64,
    nodes: u64,
    exceeded: bool,
    /// Solutions must cost strictly less than this.
    best_cost: f64,
    best: Option<Vec<Resource>>,
    stop_at_first: bool,
    found_in_pass: bool,
}

impl Search<'_> {
    fn pad_cost(&self, chosen: &[usize], links: usize) -> f64 {
        let Some(cap) = self.links_cap else { return 0.0 };
        self.pad_links
            .iter()
            .filter(|x| !chosen.iter().any(|&j| self.cands[j] == **x))
            .take(cap - links)
            .map(|&x| self.catalog.cost(x))
            .sum()
    }

    fn pad_cost_of(&self, set: &[Resource]) -> f64 {
        let Some(cap) = self.links_cap else { return 0.0 };
        let links = set.iter().filter(|x| matches!(x, Resource::BackupLink(_))).count();
        self.pad_links
            .iter()
            .filter(|x| !set.contains(x))
            .take(cap - links)
            .map(|&x| self.catalog.cost(x))
            .sum()
    }

    fn feasible(&self, chosen: &[usize]) -> bool {
        if !self.limited {
            return true;
        }
        let set: Vec<Resource> = self
            .forced
            .iter()
            .copied()
            .chain(chosen.iter().map(|&j| self.cands[j]))
            .collect();
        check_feasibility(self.r, &set, self.catalog).is_complete()
    }

    fn link_ok(&self, j: usize, links: usize) -> bool {
        match (self.cands[j], self.links_cap) {
            (Resource::BackupLink(_), Some(cap)) => links < cap,
            _ => true,
        }
    }

    fn useful(&self, ws: &WorkingSet<'_>, j: usize) -> bool {
        self.cands[j]
            .points()
            .into_iter()
            .any(|p| !ws.point_vector(p).is_zero())
    }

    fn dfs(
        &mut self,
        ws: &WorkingSet<'_>,
        chosen: &mut Vec<usize>,
        pos: usize,
        cost: f64,
        links: usize,
        depth_left: Option<usize>,
    ) {
        self.nodes += 1;
        if self.nodes > self.budget {
            self.exceeded = true;
            return;
        }
        let complete = ws.undetermined_count() == 0;
        if complete && self.feasible(chosen) {
            let total = cost + self.pad_cost(chosen, links);
            if total < self.best_cost - EPS {
                self.best_cost = total;
                self.best = Some(chosen.iter().map(|&j| self.cands[j]).collect());
                self.found_in_pass = true;
            }
            return;
        }
        if complete && !self.limited {
            return;
        }
        if depth_left == Some(0) {
            return;
        }

        let branch: Vec<usize> = (pos..self.cands.len())
            .filter(|&j| self.link_ok(j, links) && (self.limited || self.useful(ws, j)))
            .collect();
        if branch.is_empty() {
            return;
        }
        if !complete {
            let mut rest = ws.clone();
            for &j in &branch {
                rest.deploy(self.cands[j]);
            }
            if rest.undetermined_count() > 0 {
                return;
            }
        }
        let cheapest = branch
            .iter()
            .map(|&j| self.catalog.cost(self.cands[j]))
            .fold(f64::INFINITY, f64::min);
        if cost + cheapest >= self.best_cost - EPS {
            return;
        }

        for &j in &branch {
            let c = self.catalog.cost(self.cands[j]);
            if cost + c >= self.best_cost - EPS {
                continue;
            }
            let mut next = ws.clone();
            next.deploy(self.cands[j]);
            let is_link = matches!(self.cands[j], Resource::BackupLink(_));
            chosen.push(j);
            self.dfs(
                &next,
                chosen,
                j + 1,
                cost + c,
                links + usize::from(is_link),
                depth_left.map(|d| d - 1),
            );
            chosen.pop();
            if self.exceeded || (self.stop_at_first && self.found_in_pass) {
                return;
            }
        }
    }
}
