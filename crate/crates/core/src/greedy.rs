//! Greedy placement: repeatedly deploy the resource that determines the
//! most still-undetermined flows per unit cost.

use std::cmp::Ordering;

use rayon::prelude::*;

use crate::determinability::{init_working_set, Phi, WorkingSet};
use crate::resource::{Resource, ResourceCatalog};
use crate::routing::RoutingMatrix;

pub use crate::plan::{DeploymentPlan, PlanStep};

/// Flow count above which candidate scoring runs on the rayon pool.
const PARALLEL_FLOWS: usize = 2048;

#[derive(Debug, Clone, Default)]
pub struct GreedyOptions {
    /// Stop once at most this many flows are undetermined.
    pub phi_min: usize,
    /// Resources deployed first, in order, regardless of their score.
    pub preset: Vec<Resource>,
    /// Resources never chosen.
    pub excluded: Vec<Resource>,
    /// Stop after choosing this many resources beyond the preset ones.
    pub max_steps: Option<usize>,
}

/// Picks resources greedily until `|⋁W| <= phi_min`.
///
/// Each iteration scores every remaining candidate by `φ_x / Cost(x)`
/// (zero-cost candidates with `φ_x > 0` rank first) using flow weights, and
/// breaks ties by lower cost, then SDN nodes before backup links, then lower
/// index. Limits in the catalog are ignored while choosing and only applied
/// to the final assignment.
pub fn greedy_plan(r: &RoutingMatrix, catalog: &ResourceCatalog, opts: &GreedyOptions) -> DeploymentPlan {
    let mut ws = init_working_set(r);
    let mut steps = Vec::new();
    let mut cost = 0.0;
    let mut chosen: Vec<Resource> = Vec::new();

    for &x in &opts.preset {
        if chosen.contains(&x) {
            continue;
        }
        let phi = ws.deploy(x);
        cost += catalog.cost(x);
        chosen.push(x);
        steps.push(PlanStep {
            resource: x,
            phi,
            residual: ws.undetermined_count(),
            cost,
            preset: true,
        });
    }

    let mut candidates: Vec<Resource> = Resource::all(r.topology())
        .into_iter()
        .filter(|x| !chosen.contains(x) && !opts.excluded.contains(x))
        .collect();

    let mut stalled = false;
    let mut picked = 0;
    while ws.undetermined_count() > opts.phi_min {
        if opts.max_steps.is_some_and(|k| picked >= k) {
            break;
        }
        let scores = score_all(&mut ws, &candidates);
        let best = scores
            .iter()
            .filter(|(_, phi)| phi.flows > 0)
            .min_by(|a, b| rank(catalog, a, b));
        let Some(&(x, _)) = best else {
            stalled = true;
            break;
        };
        let phi = ws.deploy(x);
        cost += catalog.cost(x);
        candidates.retain(|&c| c != x);
        picked += 1;
        steps.push(PlanStep {
            resource: x,
            phi,
            residual: ws.undetermined_count(),
            cost,
            preset: false,
        });
    }

    let residual = ws.undetermined_count();
    DeploymentPlan::finish(r, catalog, steps, residual, stalled)
}

fn score_all(ws: &mut WorkingSet<'_>, candidates: &[Resource]) -> Vec<(Resource, Phi)> {
    if ws.undetermined_count() >= PARALLEL_FLOWS && candidates.len() > 1 {
        let base: &WorkingSet<'_> = ws;
        candidates
            .par_iter()
            .map_init(|| base.clone(), |w, &x| (x, w.score(x)))
            .collect()
    } else {
        candidates.iter().map(|&x| (x, ws.score(x))).collect()
    }
}

/// Orders candidates best first.
fn rank(catalog: &ResourceCatalog, a: &(Resource, Phi), b: &(Resource, Phi)) -> Ordering {
    let ratio = |(x, phi): &(Resource, Phi)| {
        let c = catalog.cost(*x);
        if c == 0.0 {
            f64::INFINITY
        } else {
            phi.weight / c
        }
    };
    ratio(b)
        .total_cmp(&ratio(a))
        .then_with(|| catalog.cost(a.0).total_cmp(&catalog.cost(b.0)))
        .then_with(|| a.0.cmp(&b.0))
}
