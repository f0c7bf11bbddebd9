//! Deployment plans shared by the greedy and exact planners.

use std::fmt::Write;

use crate::determinability::{check_feasibility, init_working_set, DeterminabilityResult, Phi};
use crate::resource::{Resource, ResourceCatalog};
use crate::routing::RoutingMatrix;

/// One chosen resource with the state right after committing it.
#[derive(Debug, Clone, PartialEq)]
pub struct PlanStep {
    pub resource: Resource,
    /// Flows newly determined by this resource at the time it was added.
    pub phi: Phi,
    /// Undetermined flows after this step.
    pub residual: usize,
    /// Total cost up to and including this step.
    pub cost: f64,
    /// Whether the resource was forced into the plan rather than chosen.
    pub preset: bool,
}

/// Chosen resources in deployment order and the resulting flow assignment.
#[derive(Debug, Clone, PartialEq)]
pub struct DeploymentPlan {
    pub steps: Vec<PlanStep>,
    /// Assignment under the catalog's limits.
    pub assignment: DeterminabilityResult,
    /// Undetermined flows ignoring limits, `|⋁W|` at termination.
    pub residual: usize,
    pub total_cost: f64,
    /// The planner stopped because no candidate determined further flows
    /// while the residual was still above the threshold.
    pub stalled: bool,
    /// The assignment under catalog limits leaves more flows undetermined
    /// than the unlimited residual.
    pub limits_violated: bool,
}

impl DeploymentPlan {
    pub fn resources(&self) -> Vec<Resource> {
        self.steps.iter().map(|s| s.resource).collect()
    }

    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }

    /// Whether every flow is determined under the catalog limits.
    pub fn is_complete(&self) -> bool {
        self.assignment.is_complete()
    }

    /// Replays a resource list in order, recording per-step φ, and assigns
    /// flows under the catalog limits.
    pub fn from_resources(
        r: &RoutingMatrix,
        catalog: &ResourceCatalog,
        resources: &[Resource],
        preset: &[Resource],
    ) -> Self {
        let mut ws = init_working_set(r);
        let mut steps = Vec::with_capacity(resources.len());
        let mut cost = 0.0;
        for &x in resources {
            let phi = ws.deploy(x);
            cost += catalog.cost(x);
            steps.push(PlanStep {
                resource: x,
                phi,
                residual: ws.undetermined_count(),
                cost,
                preset: preset.contains(&x),
            });
        }
        let residual = ws.undetermined_count();
        Self::finish(r, catalog, steps, residual, false)
    }

    pub(crate) fn finish(
        r: &RoutingMatrix,
        catalog: &ResourceCatalog,
        steps: Vec<PlanStep>,
        residual: usize,
        stalled: bool,
    ) -> Self {
        let resources: Vec<Resource> = steps.iter().map(|s| s.resource).collect();
        let assignment = check_feasibility(r, &resources, catalog);
        let limits_violated = assignment.undetermined_count() > residual;
        let total_cost = resources.iter().map(|&x| catalog.cost(x)).sum();
        Self {
            steps,
            assignment,
            residual,
            total_cost,
            stalled,
            limits_violated,
        }
    }

    /// `step,kind,resource,phi,residual,cost` rows.
    pub fn to_csv(&self, r: &RoutingMatrix) -> String {
        let t = r.topology();
        let mut s = String::from("step,kind,resource,phi,residual,cost\n");
        for (i, st) in self.steps.iter().enumerate() {
            let _ = writeln!(
                s,
                "{},{},{},{},{},{}",
                i + 1,
                st.resource.kind(),
                st.resource.label(t),
                st.phi.flows,
                st.residual,
                st.cost
            );
        }
        s
    }

    /// `flow,ingress,egress,source,at` rows describing the assignment.
    pub fn assignment_csv(&self, r: &RoutingMatrix) -> String {
        use crate::determinability::FlowSource;
        use crate::resource::MeasurePoint;
        let t = r.topology();
        let mut s = String::from("flow,ingress,egress,source,at\n");
        for (f, src) in r.flows().iter().zip(self.assignment.sources()) {
            let (kind, at) = match src {
                FlowSource::Measured(p @ MeasurePoint::Node(_)) => ("sdn-counter", p.label(t)),
                FlowSource::Measured(p @ MeasurePoint::Backup(_)) => ("backup-link", p.label(t)),
                FlowSource::Derived(d) => ("derived", t.dir_link_label(d)),
                FlowSource::Undetermined => ("undetermined", String::new()),
            };
            let _ = writeln!(
                s,
                "{},{},{},{},{}",
                f.id.0,
                t.name(f.ingress),
                t.name(f.egress),
                kind,
                at
            );
        }
        s
    }
}
