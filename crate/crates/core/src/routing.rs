//! Deterministic single-path OSPF routing and the binary traversal relation.

use std::cmp::Reverse;
use std::collections::BinaryHeap;
use std::fmt::Write;
use std::sync::Arc;

use rayon::prelude::*;
use thiserror::Error;

use crate::flowvec::FlowVector;
use crate::topology::{DirLink, Flow, FlowId, NodeId, Topology};
use crate::traffic::TrafficMatrix;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum RoutingError {
    #[error("no route from `{from}` to `{to}`")]
    Unreachable { from: String, to: String },
    #[error("flow {0} refers to a node outside the topology")]
    BadFlow(usize),
}

/// Node and link sequence of one flow.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Path {
    pub nodes: Vec<NodeId>,
    pub links: Vec<DirLink>,
}

/// Routing paths plus, for every node and directed link, the vector of
/// flows traversing it.
#[derive(Debug, Clone)]
pub struct RoutingMatrix {
    topology: Arc<Topology>,
    flows: Vec<Flow>,
    paths: Vec<Path>,
    node_flows: Vec<FlowVector>,
    link_flows: Vec<FlowVector>,
}

/// Routes all `N(N-1)` flows of the topology.
pub fn shortest_paths(t: &Topology) -> Result<RoutingMatrix, RoutingError> {
    shortest_paths_for(t, t.enumerate_flows())
}

/// Routes the given flows. Flow ids must equal their position in `flows`.
///
/// Among equal-cost paths the one with the lexicographically smallest node
/// sequence (by node position) wins. Because the choice at each hop only
/// depends on the current node and the destination, the result is
/// consistent with hop-by-hop forwarding.
pub fn shortest_paths_for(t: &Topology, flows: Vec<Flow>) -> Result<RoutingMatrix, RoutingError> {
    let n = t.node_count();
    for (i, f) in flows.iter().enumerate() {
        if f.id != FlowId(i) || f.ingress.0 >= n || f.egress.0 >= n || f.ingress == f.egress {
            return Err(RoutingError::BadFlow(i));
        }
    }

    let mut needed = vec![false; n];
    for f in &flows {
        needed[f.egress.0] = true;
    }
    let dist_to: Vec<Option<Vec<u64>>> = (0..n)
        .into_par_iter()
        .map(|target| needed[target].then(|| distances_to(t, NodeId(target))))
        .collect();

    let paths = flows
        .par_iter()
        .map(|f| {
            let dist = dist_to[f.egress.0].as_ref().expect("distances computed");
            trace_path(t, dist, f.ingress, f.egress)
        })
        .collect::<Result<Vec<_>, _>>()?;

    let m = flows.len();
    let mut node_flows = vec![FlowVector::zeros(m); n];
    let mut link_flows = vec![FlowVector::zeros(m); t.dir_link_count()];
    for (i, p) in paths.iter().enumerate() {
        for v in &p.nodes {
            node_flows[v.0].set(i);
        }
        for l in &p.links {
            link_flows[l.0].set(i);
        }
    }

    Ok(RoutingMatrix {
        topology: Arc::new(t.clone()),
        flows,
        paths,
        node_flows,
        link_flows,
    })
}

/// Shortest distance from every node to `target`.
fn distances_to(t: &Topology, target: NodeId) -> Vec<u64> {
    let mut dist = vec![u64::MAX; t.node_count()];
    let mut heap = BinaryHeap::new();
    dist[target.0] = 0;
    heap.push(Reverse((0u64, target.0)));
    while let Some(Reverse((d, u))) = heap.pop() {
        if d > dist[u] {
            continue;
        }
        // links into u are the reverses of its outgoing links
        for &out in t.outgoing(NodeId(u)) {
            let inbound = out.rev();
            let w = t.tail(inbound);
            let nd = d + u64::from(t.metric(inbound));
            if nd < dist[w.0] {
                dist[w.0] = nd;
                heap.push(Reverse((nd, w.0)));
            }
        }
    }
    dist
}

fn trace_path(t: &Topology, dist: &[u64], from: NodeId, to: NodeId) -> Result<Path, RoutingError> {
    if dist[from.0] == u64::MAX {
        return Err(RoutingError::Unreachable {
            from: t.name(from).to_string(),
            to: t.name(to).to_string(),
        });
    }
    let mut nodes = vec![from];
    let mut links = Vec::new();
    let mut cur = from;
    while cur != to {
        // outgoing links are sorted by head, so the first match is the
        // lexicographically smallest continuation
        let next = t
            .outgoing(cur)
            .iter()
            .copied()
            .find(|&d| {
                let h = t.head(d);
                dist[h.0] != u64::MAX && dist[h.0] + u64::from(t.metric(d)) == dist[cur.0]
            })
            .expect("a shortest-path successor exists for every reachable node");
        links.push(next);
        cur = t.head(next);
        nodes.push(cur);
    }
    Ok(Path { nodes, links })
}

impl RoutingMatrix {
    pub fn topology(&self) -> &Topology {
        &self.topology
    }

    pub fn flows(&self) -> &[Flow] {
        &self.flows
    }

    pub fn flow(&self, f: FlowId) -> &Flow {
        &self.flows[f.0]
    }

    pub fn flow_count(&self) -> usize {
        self.flows.len()
    }

    pub fn path(&self, f: FlowId) -> &Path {
        &self.paths[f.0]
    }

    /// Vector of flows traversing node `n` (endpoints included).
    pub fn node_flows(&self, n: NodeId) -> &FlowVector {
        &self.node_flows[n.0]
    }

    /// Vector of flows traversing directed link `d`.
    pub fn link_flows(&self, d: DirLink) -> &FlowVector {
        &self.link_flows[d.0]
    }

    pub fn traverses_link(&self, d: DirLink, f: FlowId) -> bool {
        self.link_flows[d.0].get(f.0)
    }

    pub fn traverses_node(&self, n: NodeId, f: FlowId) -> bool {
        self.node_flows[n.0].get(f.0)
    }

    /// Replaces the per-flow attributes (bounds, weights) without rerouting.
    /// Ingress and egress must be unchanged.
    pub fn with_flow_attributes(mut self, update: impl Fn(&mut Flow)) -> Self {
        for f in &mut self.flows {
            let (i, e) = (f.ingress, f.egress);
            update(f);
            assert!(f.ingress == i && f.egress == e, "flow endpoints changed");
        }
        self
    }

    /// `flow,ingress,egress,path` rows, path nodes separated by spaces.
    pub fn paths_csv(&self) -> String {
        let t = &self.topology;
        let mut s = String::from("flow,ingress,egress,path\n");
        for (f, p) in self.flows.iter().zip(&self.paths) {
            let seq: Vec<&str> = p.nodes.iter().map(|&n| t.name(n)).collect();
            let _ = writeln!(
                s,
                "{},{},{},{}",
                f.id.0,
                t.name(f.ingress),
                t.name(f.egress),
                seq.join(" ")
            );
        }
        s
    }
}

/// Per-directed-link load vector `L = R F`.
pub fn link_loads(r: &RoutingMatrix, tm: &TrafficMatrix) -> Vec<f64> {
    assert_eq!(tm.len(), r.flow_count(), "traffic matrix dimension mismatch");
    r.link_flows
        .iter()
        .map(|v| v.iter_ones().map(|f| tm.rate(FlowId(f))).sum())
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::topology::parse_topology;

    fn chain() -> Topology {
        parse_topology("node R1\nnode R2\nnode R3\nnode R4\nlink R1 R2\nlink R2 R3\nlink R3 R4\n").unwrap()
    }

    #[test]
    fn chain_paths() {
        let t = chain();
        let r = shortest_paths(&t).unwrap();
        let idx = |a: &str, b: &str| {
            r.flows()
                .iter()
                .position(|f| t.flow_label(f) == format!("{a}->{b}"))
                .unwrap()
        };
        let f14 = idx("R1", "R4");
        let names: Vec<_> = r.path(FlowId(f14)).nodes.iter().map(|&n| t.name(n)).collect();
        assert_eq!(names, ["R1", "R2", "R3", "R4"]);

        let r2 = t.node_by_name("R2").unwrap();
        let r3 = t.node_by_name("R3").unwrap();
        let d = t.find_dir_link(r2, r3).unwrap();
        let on: Vec<_> = r.link_flows(d).iter_ones().collect();
        let mut expected = vec![idx("R1", "R3"), idx("R1", "R4"), idx("R2", "R3"), idx("R2", "R4")];
        expected.sort();
        assert_eq!(on, expected);
    }

    #[test]
    fn single_link_traversal() {
        let t = parse_topology("node A\nnode B\nlink A B\n").unwrap();
        let r = shortest_paths(&t).unwrap();
        let ab = FlowId(0);
        assert!(r.traverses_link(DirLink(0), ab));
        assert!(!r.traverses_link(DirLink(1), ab));
        assert!(r.traverses_node(NodeId(0), ab));
        assert!(r.traverses_node(NodeId(1), ab));
    }

    #[test]
    fn tie_break_prefers_smaller_intermediate() {
        // square A-B-C-D-A with unit metrics; A->C has two equal paths
        let t = parse_topology("node A\nnode B\nnode C\nnode D\nlink A B\nlink B C\nlink C D\nlink D A\n").unwrap();
        let r = shortest_paths(&t).unwrap();
        let f = r.flows().iter().find(|f| t.flow_label(f) == "A->C").unwrap();
        let names: Vec<_> = r.path(f.id).nodes.iter().map(|&n| t.name(n)).collect();
        assert_eq!(names, ["A", "B", "C"]);
        let g = r.flows().iter().find(|f| t.flow_label(f) == "B->D").unwrap();
        let names: Vec<_> = r.path(g.id).nodes.iter().map(|&n| t.name(n)).collect();
        assert_eq!(names, ["B", "A", "D"]);
    }

    #[test]
    fn metrics_steer_paths() {
        let t = parse_topology("node A\nnode B\nnode C\nlink A B 5\nlink B C\nlink A C 2\n").unwrap();
        let r = shortest_paths(&t).unwrap();
        let f = r.flows().iter().find(|f| t.flow_label(f) == "A->B").unwrap();
        let names: Vec<_> = r.path(f.id).nodes.iter().map(|&n| t.name(n)).collect();
        assert_eq!(names, ["A", "C", "B"]);
    }

    #[test]
    fn loads_on_chain() {
        let t = chain();
        let flows = t.select_flows(|f| f.ingress < f.egress);
        let r = shortest_paths_for(&t, flows).unwrap();
        // f13, f14, f23, f24 at 1, others 0
        let rates: Vec<f64> = r
            .flows()
            .iter()
            .map(|f| {
                let l = t.flow_label(f);
                if ["R1->R3", "R1->R4", "R2->R3", "R2->R4"].contains(&l.as_str()) {
                    1.0
                } else {
                    0.0
                }
            })
            .collect();
        let loads = link_loads(&r, &TrafficMatrix::from_rates(rates));
        let d = t
            .find_dir_link(t.node_by_name("R2").unwrap(), t.node_by_name("R3").unwrap())
            .unwrap();
        assert_eq!(loads[d.0], 4.0);
        let zero = link_loads(&r, &TrafficMatrix::from_rates(vec![0.0; 6]));
        assert!(zero.iter().all(|&x| x == 0.0));
    }

    #[test]
    fn rejects_misnumbered_flows() {
        let t = chain();
        let mut flows = t.enumerate_flows();
        flows.swap(0, 1);
        assert_eq!(shortest_paths_for(&t, flows).unwrap_err(), RoutingError::BadFlow(0));
    }

    #[test]
    fn paths_csv_format() {
        let t = parse_topology("node A\nnode B\nlink A B\n").unwrap();
        let r = shortest_paths(&t).unwrap();
        assert_eq!(r.paths_csv(), "flow,ingress,egress,path\n0,A,B,A B\n1,B,A,B A\n");
    }
}
