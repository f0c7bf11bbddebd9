//! Which flows a set of deployed resources makes measurable, and which
//! further flows follow by subtracting known flows from link loads.
//!
//! The state is a working set of flow vectors, one per node and per directed
//! link, each holding the still undetermined flows traversing that resource.
//! Deploying a resource removes its flows from every vector. Whenever a link
//! vector is left with a single flow, that flow equals the link load minus
//! the known flows and is removed as well ("peeling"); only link vectors
//! peel, as a node has no counter aggregating exactly its traversing flows.

use std::cmp::Reverse;
use std::fmt;

use crate::flowvec::FlowVector;
use crate::resource::{MeasurePoint, Resource, ResourceCatalog};
use crate::routing::RoutingMatrix;
use crate::topology::{DirLink, FlowId, NodeId};

/// Undetermined flows per resource, the state of the greedy planner.
#[derive(Clone)]
pub struct WorkingSet<'r> {
    routing: &'r RoutingMatrix,
    /// Node vectors at `0..N`, directed link vectors at `N..N + 2E`.
    vectors: Vec<FlowVector>,
    counts: Vec<usize>,
    undetermined: FlowVector,
    undetermined_count: usize,
    undetermined_weight: f64,
    /// Whether no link vector currently holds exactly one flow.
    at_fixpoint: bool,
    /// Link slots whose count changed since the last peeling round.
    touched: Vec<usize>,
    journal: Option<Journal>,
}

#[derive(Clone, Default)]
struct Journal {
    cleared: Vec<(u32, u32)>,
    flows: Vec<u32>,
    at_fixpoint: bool,
    weight: f64,
}

/// Number of flows (and their summed weight) a deployment determines.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Phi {
    pub flows: usize,
    pub weight: f64,
}

/// Builds the initial working set: bit `i` of each resource's vector is set
/// iff flow `i` traverses it. The initial set is not peeled.
pub fn init_working_set(r: &RoutingMatrix) -> WorkingSet<'_> {
    let t = r.topology();
    let m = r.flow_count();
    let mut vectors = Vec::with_capacity(t.node_count() + t.dir_link_count());
    vectors.extend(t.nodes().map(|n| r.node_flows(n).clone()));
    vectors.extend(t.dir_links().map(|d| r.link_flows(d).clone()));
    let counts = vectors.iter().map(FlowVector::count).collect();
    let undetermined = FlowVector::ones(m);
    let undetermined_weight = r.flows().iter().map(|f| f.weight).sum();
    let mut ws = WorkingSet {
        routing: r,
        vectors,
        counts,
        undetermined,
        undetermined_count: m,
        undetermined_weight,
        at_fixpoint: false,
        touched: Vec::new(),
        journal: None,
    };
    ws.at_fixpoint = !ws.link_slots().any(|s| ws.counts[s] == 1);
    ws
}

impl<'r> WorkingSet<'r> {
    pub fn routing(&self) -> &'r RoutingMatrix {
        self.routing
    }

    fn node_count(&self) -> usize {
        self.routing.topology().node_count()
    }

    fn link_slots(&self) -> std::ops::Range<usize> {
        self.node_count()..self.vectors.len()
    }

    fn slot(&self, p: MeasurePoint) -> usize {
        match p {
            MeasurePoint::Node(n) => n.0,
            MeasurePoint::Backup(d) => self.node_count() + d.0,
        }
    }

    pub fn node_vector(&self, n: NodeId) -> &FlowVector {
        &self.vectors[n.0]
    }

    pub fn link_vector(&self, d: DirLink) -> &FlowVector {
        &self.vectors[self.node_count() + d.0]
    }

    /// Undetermined flows at a measurement point.
    pub fn point_vector(&self, p: MeasurePoint) -> &FlowVector {
        &self.vectors[self.slot(p)]
    }

    /// `⋁W`, the currently undetermined flows.
    pub fn undetermined(&self) -> &FlowVector {
        &self.undetermined
    }

    pub fn undetermined_count(&self) -> usize {
        self.undetermined_count
    }

    pub fn undetermined_weight(&self) -> f64 {
        self.undetermined_weight
    }

    pub fn is_determined(&self, f: FlowId) -> bool {
        !self.undetermined.get(f.0)
    }

    /// Marks `f` as known and removes it from every vector.
    /// Returns false if it already was.
    pub fn determine(&mut self, f: FlowId) -> bool {
        if !self.undetermined.clear(f.0) {
            return false;
        }
        self.undetermined_count -= 1;
        let w = self.routing.flow(f).weight;
        self.undetermined_weight -= w;
        let n = self.node_count();
        let path = self.routing.path(f);
        for v in &path.nodes {
            self.clear_bit(v.0, f.0);
        }
        for l in &path.links {
            let s = n + l.0;
            self.clear_bit(s, f.0);
            if self.counts[s] == 1 {
                self.at_fixpoint = false;
            }
            self.touched.push(s);
        }
        if let Some(j) = &mut self.journal {
            j.flows.push(f.0 as u32);
        }
        true
    }

    fn clear_bit(&mut self, slot: usize, f: usize) {
        if self.vectors[slot].clear(f) {
            self.counts[slot] -= 1;
            if let Some(j) = &mut self.journal {
                j.cleared.push((slot as u32, f as u32));
            }
        }
    }

    /// Removes all flows at `p`, returning them in ascending order.
    pub fn measure_all(&mut self, p: MeasurePoint) -> Vec<FlowId> {
        let flows: Vec<FlowId> = self.point_vector(p).iter_ones().map(FlowId).collect();
        for &f in &flows {
            self.determine(f);
        }
        flows
    }

    /// Runs peeling to its fixpoint. Each round handles the link vectors of
    /// cardinality one in ascending link order; returns `(flow, link)` in
    /// elimination order.
    pub fn peel(&mut self) -> Vec<(FlowId, DirLink)> {
        let n = self.node_count();
        let mut order = Vec::new();
        let mut pending: Vec<usize> = if self.at_fixpoint {
            std::mem::take(&mut self.touched)
        } else {
            self.touched.clear();
            self.link_slots().collect()
        };
        loop {
            pending.sort_unstable();
            pending.dedup();
            pending.retain(|&s| self.counts[s] == 1);
            if pending.is_empty() {
                break;
            }
            for &s in &pending {
                if self.counts[s] != 1 {
                    continue;
                }
                let f = FlowId(self.vectors[s].first().expect("count is one"));
                order.push((f, DirLink(s - n)));
                self.determine(f);
            }
            pending = std::mem::take(&mut self.touched);
        }
        self.touched.clear();
        self.at_fixpoint = true;
        order
    }

    /// Deploys a resource under unlimited quotas and peels. Returns the
    /// number of newly determined flows.
    pub fn deploy(&mut self, x: Resource) -> Phi {
        let (before, before_w) = (self.undetermined_count, self.undetermined_weight);
        for p in x.points() {
            self.measure_all(p);
        }
        self.peel();
        Phi {
            flows: before - self.undetermined_count,
            weight: (before_w - self.undetermined_weight).max(0.0),
        }
    }

    /// `φ_x = |⋁W| − |⋁W_x|`, leaving the working set unchanged.
    pub fn score(&mut self, x: Resource) -> Phi {
        self.begin();
        let phi = self.deploy(x);
        self.rollback();
        phi
    }

    fn begin(&mut self) {
        assert!(self.journal.is_none(), "nested trial");
        self.journal = Some(Journal {
            at_fixpoint: self.at_fixpoint,
            weight: self.undetermined_weight,
            ..Default::default()
        });
    }

    fn rollback(&mut self) {
        let j = self.journal.take().expect("trial in progress");
        for &(s, f) in &j.cleared {
            self.vectors[s as usize].set(f as usize);
            self.counts[s as usize] += 1;
        }
        for &f in &j.flows {
            self.undetermined.set(f as usize);
        }
        self.undetermined_count += j.flows.len();
        self.undetermined_weight = j.weight;
        self.at_fixpoint = j.at_fixpoint;
        self.touched.clear();
    }
}

impl fmt::Debug for WorkingSet<'_> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("WorkingSet")
            .field("undetermined", &self.undetermined_count)
            .field("at_fixpoint", &self.at_fixpoint)
            .finish()
    }
}

/// Peels a bare list of link vectors to the fixpoint, in place.
///
/// Returns `(flow, vector index)` in elimination order; each round
/// processes singleton vectors by ascending index.
pub fn peel(vectors: &mut [FlowVector]) -> Vec<(FlowId, usize)> {
    let mut order = Vec::new();
    loop {
        let singles: Vec<usize> = (0..vectors.len()).filter(|&i| vectors[i].count() == 1).collect();
        if singles.is_empty() {
            return order;
        }
        for i in singles {
            if vectors[i].count() != 1 {
                continue;
            }
            let f = vectors[i].first().expect("count is one");
            order.push((FlowId(f), i));
            for w in vectors.iter_mut() {
                w.clear(f);
            }
        }
    }
}

/// How every flow is obtained under a deployment.
#[derive(Debug, Clone, PartialEq)]
pub struct DeterminabilityResult {
    /// Directly counted flows, in assignment order.
    pub measured: Vec<(FlowId, MeasurePoint)>,
    /// Flows computed from a link load, in a valid elimination order.
    pub derived: Vec<(FlowId, DirLink)>,
    pub undetermined: FlowVector,
    /// Undetermined flows that traverse a deployed measurement point whose
    /// quota or load limit was exhausted.
    pub quota_blocked: Vec<FlowId>,
}

/// Where a single flow's value comes from.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FlowSource {
    Measured(MeasurePoint),
    Derived(DirLink),
    Undetermined,
}

impl DeterminabilityResult {
    pub fn is_complete(&self) -> bool {
        self.undetermined.is_zero()
    }

    pub fn undetermined_count(&self) -> usize {
        self.undetermined.count()
    }

    /// Per-flow source, indexed by flow id.
    pub fn sources(&self) -> Vec<FlowSource> {
        let mut s = vec![FlowSource::Undetermined; self.undetermined.width()];
        for &(f, p) in &self.measured {
            s[f.0] = FlowSource::Measured(p);
        }
        for &(f, l) in &self.derived {
            s[f.0] = FlowSource::Derived(l);
        }
        s
    }

    /// Flows measured at a point, ascending.
    pub fn measured_at(&self, p: MeasurePoint) -> Vec<FlowId> {
        let mut v: Vec<FlowId> = self.measured.iter().filter(|(_, q)| *q == p).map(|(f, _)| *f).collect();
        v.sort();
        v
    }

    /// Replays the result against the routing: every measured flow traverses
    /// its point, each derivation only needs flows known earlier, no link
    /// derives twice, and the three groups partition the flow set.
    pub fn validate(&self, r: &RoutingMatrix) -> Result<(), String> {
        let m = r.flow_count();
        if self.undetermined.width() != m {
            return Err("undetermined vector has wrong width".into());
        }
        let mut known = FlowVector::zeros(m);
        for &(f, p) in &self.measured {
            let on = match p {
                MeasurePoint::Node(n) => r.traverses_node(n, f),
                MeasurePoint::Backup(d) => r.traverses_link(d, f),
            };
            if !on {
                return Err(format!("flow {} measured off its path", f.0));
            }
            if !known.set(f.0) {
                return Err(format!("flow {} measured twice", f.0));
            }
        }
        let mut used = std::collections::HashSet::new();
        for &(f, l) in &self.derived {
            if !r.traverses_link(l, f) {
                return Err(format!("flow {} derived on a link it does not traverse", f.0));
            }
            if !used.insert(l) {
                return Err(format!("link {} derives more than one flow", l.0));
            }
            if r.link_flows(l).iter_ones().any(|g| g != f.0 && !known.get(g)) {
                return Err(format!("flow {} derived before its link peers are known", f.0));
            }
            if !known.set(f.0) {
                return Err(format!("flow {} determined twice", f.0));
            }
        }
        if known.and(&self.undetermined).count() != 0 || known.or(&self.undetermined).count() != m {
            return Err("measured, derived and undetermined do not partition the flows".into());
        }
        Ok(())
    }
}

/// Peels starting from an explicit set of measured flows.
pub fn determine_from(r: &RoutingMatrix, measured: &[(FlowId, MeasurePoint)]) -> Result<DeterminabilityResult, String> {
    let mut ws = init_working_set(r);
    for &(f, p) in measured {
        let on = match p {
            MeasurePoint::Node(n) => r.traverses_node(n, f),
            MeasurePoint::Backup(d) => r.traverses_link(d, f),
        };
        if !on {
            return Err(format!("flow {} does not traverse the measurement point", f.0));
        }
        if !ws.determine(f) {
            return Err(format!("flow {} listed twice", f.0));
        }
    }
    let derived = ws.peel();
    Ok(DeterminabilityResult {
        measured: measured.to_vec(),
        derived,
        undetermined: ws.undetermined().clone(),
        quota_blocked: Vec::new(),
    })
}

/// Assigns traversing flows to the deployed resources and peels.
///
/// Without finite limits every traversing flow is measured, at the first
/// deployed point it traverses. With limits, flows are assigned one at a
/// time, most constrained first (fewest points with remaining capacity, then
/// longest path), and peeling runs after each assignment so that derivable
/// flows do not consume quota.
pub fn check_feasibility(r: &RoutingMatrix, deployed: &[Resource], catalog: &ResourceCatalog) -> DeterminabilityResult {
    let limited = deployed.iter().any(|&x| !catalog.spec(x).is_unlimited());
    if !limited {
        let mut ws = init_working_set(r);
        let mut measured = Vec::new();
        for &x in deployed {
            for p in x.points() {
                measured.extend(ws.measure_all(p).into_iter().map(|f| (f, p)));
            }
        }
        let derived = ws.peel();
        return DeterminabilityResult {
            measured,
            derived,
            undetermined: ws.undetermined().clone(),
            quota_blocked: Vec::new(),
        };
    }

    let points: Vec<MeasurePoint> = deployed.iter().flat_map(|x| x.points()).collect();
    let mut quota: Vec<Option<u64>> = points.iter().map(|&p| catalog.max_flows(p)).collect();
    let mut load: Vec<Option<f64>> = points.iter().map(|&p| catalog.max_load(p)).collect();
    let traverses = |p: MeasurePoint, f: FlowId| match p {
        MeasurePoint::Node(n) => r.traverses_node(n, f),
        MeasurePoint::Backup(d) => r.traverses_link(d, f),
    };

    let mut ws = init_working_set(r);
    let mut derived = ws.peel();
    let mut measured = Vec::new();
    loop {
        let fits = |i: usize, f: FlowId, quota: &[Option<u64>], load: &[Option<f64>]| {
            let bound = r.flow(f).upper_bound;
            quota[i].is_none_or(|q| q > 0) && load[i].is_none_or(|l| bound <= l)
        };
        // (rank, flow) with rank = (options, widest quota first, point id)
        type Ranked = ((usize, Reverse<usize>, FlowId), FlowId);
        let mut best: Option<Ranked> = None;
        for f in ws.undetermined().iter_ones().map(FlowId) {
            let options = (0..points.len())
                .filter(|&i| traverses(points[i], f) && fits(i, f, &quota, &load))
                .count();
            if options == 0 {
                continue;
            }
            let key = (options, Reverse(r.path(f).links.len()), f);
            if best.as_ref().is_none_or(|(k, _)| key < *k) {
                best = Some((key, f));
            }
        }
        let Some((_, f)) = best else { break };
        let slot = (0..points.len())
            .filter(|&i| traverses(points[i], f) && fits(i, f, &quota, &load))
            .max_by_key(|&i| (quota[i].map_or(u64::MAX, |q| q), Reverse(i)))
            .expect("at least one option");
        if let Some(q) = &mut quota[slot] {
            *q -= 1;
        }
        if let Some(l) = &mut load[slot] {
            *l -= r.flow(f).upper_bound;
        }
        measured.push((f, points[slot]));
        ws.determine(f);
        derived.extend(ws.peel());
    }

    let quota_blocked = ws
        .undetermined()
        .iter_ones()
        .map(FlowId)
        .filter(|&f| points.iter().any(|&p| traverses(p, f)))
        .collect();
    DeterminabilityResult {
        measured,
        derived,
        undetermined: ws.undetermined().clone(),
        quota_blocked,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::resource::ResourceSpec;
    use crate::routing::{shortest_paths, shortest_paths_for};
    use crate::topology::{parse_topology, LinkId, Topology};

    fn chain() -> Topology {
        parse_topology("node R1\nnode R2\nnode R3\nnode R4\nlink R1 R2\nlink R2 R3\nlink R3 R4\n").unwrap()
    }

    /// Flow ids in the downward instance: f12=0, f13=1, f14=2, f23=3, f24=4, f34=5.
    fn downward() -> RoutingMatrix {
        let t = chain();
        let flows = t.select_flows(|f| f.ingress < f.egress);
        shortest_paths_for(&t, flows).unwrap()
    }

    fn ids(v: &FlowVector) -> Vec<usize> {
        v.iter_ones().collect()
    }

    const R2: NodeId = NodeId(1);
    const R2R3: Resource = Resource::BackupLink(LinkId(1));

    #[test]
    fn initial_vectors() {
        let r = downward();
        let ws = init_working_set(&r);
        assert_eq!(ids(ws.node_vector(R2)), [0, 1, 2, 3, 4]);
        assert_eq!(ids(ws.link_vector(LinkId(1).forward())), [1, 2, 3, 4]);
        assert!(ws.link_vector(LinkId(1).reverse()).is_zero());
        assert_eq!(ws.undetermined_count(), 6);
    }

    #[test]
    fn empty_flow_set() {
        let t = chain();
        let r = shortest_paths_for(&t, Vec::new()).unwrap();
        let mut ws = init_working_set(&r);
        assert!(t.nodes().all(|n| ws.node_vector(n).is_zero()));
        assert!(ws.peel().is_empty());
        assert_eq!(ws.score(Resource::SdnNode(R2)).flows, 0);
    }

    #[test]
    fn scores_on_chain() {
        let r = downward();
        let mut ws = init_working_set(&r);
        assert_eq!(ws.score(Resource::SdnNode(R2)).flows, 6);
        assert_eq!(ws.score(R2R3).flows, 6);
        assert_eq!(ws.score(Resource::SdnNode(NodeId(0))).flows, 3);
        // scoring leaves the state untouched
        assert_eq!(ws.undetermined_count(), 6);
        assert_eq!(ids(ws.link_vector(LinkId(1).forward())), [1, 2, 3, 4]);
        ws.deploy(R2R3);
        assert_eq!(ws.undetermined_count(), 0);
        assert_eq!(ws.score(Resource::SdnNode(NodeId(3))).flows, 0);
    }

    #[test]
    fn measured_three_cascade() {
        let r = downward();
        let p = MeasurePoint::Backup(LinkId(1).forward());
        let res = determine_from(&r, &[(FlowId(1), p), (FlowId(2), p), (FlowId(4), p)]).unwrap();
        assert!(res.is_complete());
        assert_eq!(
            res.derived,
            [
                (FlowId(0), LinkId(0).forward()),
                (FlowId(3), LinkId(1).forward()),
                (FlowId(5), LinkId(2).forward())
            ]
        );
        res.validate(&r).unwrap();
    }

    #[test]
    fn bare_peel() {
        let mut all_empty = vec![FlowVector::zeros(4); 3];
        assert!(peel(&mut all_empty).is_empty());

        // two flows sharing every link never peel
        let both = FlowVector::from_indices(2, [0, 1]);
        let mut v = vec![both.clone(), both];
        assert!(peel(&mut v).is_empty());
        assert!(v.iter().all(|w| w.count() == 2));

        let mut v = vec![
            FlowVector::from_indices(3, [0, 1]),
            FlowVector::from_indices(3, [1]),
            FlowVector::from_indices(3, [1, 2]),
        ];
        assert_eq!(peel(&mut v), [(FlowId(1), 1), (FlowId(0), 0), (FlowId(2), 2)]);
    }

    #[test]
    fn feasibility_without_limits() {
        let r = downward();
        let c = ResourceCatalog::uniform(r.topology());
        let res = check_feasibility(&r, &[Resource::SdnNode(R2)], &c);
        assert!(res.is_complete());
        assert_eq!(res.measured.len(), 5);
        res.validate(&r).unwrap();
        let none = check_feasibility(&r, &[], &c);
        assert_eq!(none.undetermined_count(), 6);
        assert!(none.derived.is_empty());
    }

    #[test]
    fn empty_deployment_on_full_chain_is_undetermined() {
        let t = chain();
        let r = shortest_paths(&t).unwrap();
        let res = check_feasibility(&r, &[], &ResourceCatalog::uniform(&t));
        assert_eq!(res.undetermined_count(), 12);
    }

    #[test]
    fn quota_three_on_backup_link() {
        let r = downward();
        let mut c = ResourceCatalog::uniform(r.topology());
        c.set(
            R2R3,
            ResourceSpec {
                max_flows: Some(3),
                ..Default::default()
            },
        );
        let res = check_feasibility(&r, &[R2R3], &c);
        assert!(res.is_complete());
        let p = MeasurePoint::Backup(LinkId(1).forward());
        assert_eq!(res.measured_at(p), [FlowId(1), FlowId(2), FlowId(4)]);
        assert!(res.derived.contains(&(FlowId(3), LinkId(1).forward())));
        res.validate(&r).unwrap();
    }

    #[test]
    fn quota_exhaustion_is_reported() {
        let r = downward();
        let mut c = ResourceCatalog::uniform(r.topology());
        c.set(
            R2R3,
            ResourceSpec {
                max_flows: Some(1),
                ..Default::default()
            },
        );
        let res = check_feasibility(&r, &[R2R3], &c);
        assert!(!res.is_complete());
        assert!(!res.quota_blocked.is_empty());
        res.validate(&r).unwrap();
    }

    #[test]
    fn load_limit_excludes_unbounded_flows() {
        let t = chain();
        let flows = t.select_flows(|f| f.ingress < f.egress);
        let r = shortest_paths_for(&t, flows).unwrap();
        let mut c = ResourceCatalog::uniform(&t);
        c.set(
            Resource::SdnNode(R2),
            ResourceSpec {
                max_load: Some(1e9),
                ..Default::default()
            },
        );
        let res = check_feasibility(&r, &[Resource::SdnNode(R2)], &c);
        assert!(res.measured.is_empty());

        let r = r.with_flow_attributes(|f| f.upper_bound = 4e8);
        let res = check_feasibility(&r, &[Resource::SdnNode(R2)], &c);
        // two flows fit under the load cap, the rest must come from peeling
        assert_eq!(res.measured.len(), 2);
        res.validate(&r).unwrap();
    }

    #[test]
    fn validate_catches_bad_orders() {
        let r = downward();
        let p = MeasurePoint::Backup(LinkId(1).forward());
        let mut res = determine_from(&r, &[(FlowId(1), p), (FlowId(2), p), (FlowId(4), p)]).unwrap();
        res.derived.swap(0, 1);
        assert!(res.validate(&r).is_ok());

        // f12 on R1->R2 needs f13 and f14, which are not yet known
        let bad = DeterminabilityResult {
            measured: vec![(FlowId(2), p)],
            derived: vec![(FlowId(0), LinkId(0).forward()), (FlowId(1), LinkId(0).forward())],
            undetermined: FlowVector::from_indices(6, [3, 4, 5]),
            quota_blocked: Vec::new(),
        };
        assert!(bad.validate(&r).is_err());
        assert!(determine_from(&r, &[(FlowId(0), p)]).is_err());
    }
}
