//! Planning measurement resources for complete traffic matrices in hybrid
//! SDN/OSPF networks.
//!
//! Given a topology and its OSPF routing, the planners choose SDN nodes
//! (flow-table byte counters) and backup link pairs (one flow at a time
//! rerouted onto an otherwise idle port and counted via SNMP) so that every
//! ingress-egress flow is either measured directly or follows from link
//! loads by subtraction. The simulator replays a plan against synthetic
//! traffic with MIB-quantized counters and reconstructs the matrix.

pub mod determinability;
pub mod exact;
pub mod experiments;
pub mod flowvec;
pub mod greedy;
pub mod milp;
pub mod plan;
pub mod resource;
pub mod routing;
pub mod sim;
pub mod sndlib;
pub mod topology;
pub mod traffic;

pub use determinability::{
    check_feasibility, determine_from, init_working_set, DeterminabilityResult, FlowSource, Phi, WorkingSet,
};
pub use flowvec::FlowVector;
pub use greedy::{greedy_plan, GreedyOptions};
pub use plan::{DeploymentPlan, PlanStep};
pub use resource::{MeasurePoint, Resource, ResourceCatalog, ResourceSpec};
pub use routing::{link_loads, shortest_paths, shortest_paths_for, RoutingMatrix};
pub use topology::{parse_topology, DirLink, Flow, FlowId, LinkId, NodeId, Topology};
pub use traffic::{gen_traffic, TrafficMatrix};
