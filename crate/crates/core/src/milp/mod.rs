//! Binary program for minimum-cost placement, for use with external MILP
//! solvers.
//!
//! Variables, all binary:
//!
//! * `P_n_<node>` and `P_l_<from>_<to>`: resource deployed. Both directions
//!   of a backup pair have a variable and are tied by an equality row.
//! * `M_f<id>_n_<node>`, `M_f<id>_l_<from>_<to>`: flow measured at a point.
//! * `D_f<id>_l_<from>_<to>`: flow derived from a link load.
//!
//! Measurement and derivation variables exist only where the flow's path
//! traverses the point. Node names are escaped so that variable names stay
//! valid LP identifiers and parse back unambiguously.

pub mod lp;

use std::collections::{BTreeMap, HashMap};
use std::fmt;

use thiserror::Error;

use crate::determinability::DeterminabilityResult;
use crate::flowvec::FlowVector;
use crate::resource::{MeasurePoint, Resource, ResourceCatalog};
use crate::routing::RoutingMatrix;
use crate::topology::{DirLink, FlowId, NodeId, Topology};

pub use lp::{export_lp, parse_lp, LpParseError};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Sense {
    Le,
    Ge,
    Eq,
}

impl Sense {
    pub fn symbol(self) -> &'static str {
        match self {
            Sense::Le => "<=",
            Sense::Ge => ">=",
            Sense::Eq => "=",
        }
    }

    pub fn holds(self, lhs: f64, rhs: f64) -> bool {
        const TOL: f64 = 1e-6;
        match self {
            Sense::Le => lhs <= rhs + TOL,
            Sense::Ge => lhs >= rhs - TOL,
            Sense::Eq => (lhs - rhs).abs() <= TOL,
        }
    }
}

/// One linear row `Σ coef·var sense rhs`.
#[derive(Debug, Clone, PartialEq)]
pub struct Constraint {
    pub name: String,
    pub terms: Vec<(f64, usize)>,
    pub sense: Sense,
    pub rhs: f64,
}

/// A minimization over binary variables.
#[derive(Debug, Clone, Default)]
pub struct MilpModel {
    /// Free-text header lines.
    pub comments: Vec<String>,
    pub objective_name: String,
    pub objective: Vec<(f64, usize)>,
    pub constraints: Vec<Constraint>,
    variables: Vec<String>,
    index: HashMap<String, usize>,
}

impl PartialEq for MilpModel {
    fn eq(&self, other: &Self) -> bool {
        self.comments == other.comments
            && self.objective_name == other.objective_name
            && self.objective == other.objective
            && self.constraints == other.constraints
            && self.variables == other.variables
    }
}

impl MilpModel {
    pub fn new() -> Self {
        Self {
            objective_name: "obj".into(),
            ..Default::default()
        }
    }

    /// Adds a variable, or returns the existing index of that name.
    pub fn add_var(&mut self, name: impl Into<String>) -> usize {
        let name = name.into();
        if let Some(&i) = self.index.get(&name) {
            return i;
        }
        let i = self.variables.len();
        self.index.insert(name.clone(), i);
        self.variables.push(name);
        i
    }

    pub fn var(&self, name: &str) -> Option<usize> {
        self.index.get(name).copied()
    }

    pub fn var_name(&self, i: usize) -> &str {
        &self.variables[i]
    }

    pub fn variables(&self) -> &[String] {
        &self.variables
    }

    pub fn var_count(&self) -> usize {
        self.variables.len()
    }

    pub fn add_constraint(&mut self, name: impl Into<String>, terms: Vec<(f64, usize)>, sense: Sense, rhs: f64) {
        self.constraints.push(Constraint {
            name: name.into(),
            terms,
            sense,
            rhs,
        });
    }

    pub fn constraint(&self, name: &str) -> Option<&Constraint> {
        self.constraints.iter().find(|c| c.name == name)
    }

    pub fn objective_value(&self, values: &[f64]) -> f64 {
        self.objective.iter().map(|&(c, v)| c * values[v]).sum()
    }

    /// Names of rows violated by an assignment.
    pub fn violated(&self, values: &[f64]) -> Vec<&str> {
        self.constraints
            .iter()
            .filter(|c| {
                let lhs: f64 = c.terms.iter().map(|&(k, v)| k * values[v]).sum();
                !c.sense.holds(lhs, c.rhs)
            })
            .map(|c| c.name.as_str())
            .collect()
    }
}

impl fmt::Display for MilpModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} binaries, {} rows", self.variables.len(), self.constraints.len())
    }
}

/// Escapes a node name for use inside an LP identifier: every byte outside
/// `[A-Za-z0-9.]` becomes `~HH`.
pub fn escape_name(name: &str) -> String {
    let mut s = String::with_capacity(name.len());
    for b in name.bytes() {
        if b.is_ascii_alphanumeric() || b == b'.' {
            s.push(b as char);
        } else {
            s.push_str(&format!("~{b:02X}"));
        }
    }
    s
}

fn node_tag(t: &Topology, n: NodeId) -> String {
    escape_name(t.name(n))
}

fn link_tag(t: &Topology, d: DirLink) -> String {
    format!("{}_{}", node_tag(t, t.tail(d)), node_tag(t, t.head(d)))
}

pub fn p_node_name(t: &Topology, n: NodeId) -> String {
    format!("P_n_{}", node_tag(t, n))
}

pub fn p_link_name(t: &Topology, d: DirLink) -> String {
    format!("P_l_{}", link_tag(t, d))
}

pub fn m_name(t: &Topology, f: FlowId, p: MeasurePoint) -> String {
    match p {
        MeasurePoint::Node(n) => format!("M_f{}_n_{}", f.0, node_tag(t, n)),
        MeasurePoint::Backup(d) => format!("M_f{}_l_{}", f.0, link_tag(t, d)),
    }
}

pub fn d_name(t: &Topology, f: FlowId, d: DirLink) -> String {
    format!("D_f{}_l_{}", f.0, link_tag(t, d))
}

/// Extra rows for partial assignments and the backup-count sweep.
#[derive(Debug, Clone, Default)]
pub struct MilpOptions {
    pub fixed: BTreeMap<Resource, bool>,
    /// Adds `Σ P(link pair) = K`.
    pub link_cardinality: Option<usize>,
}

/// Builds the placement program.
///
/// The measurement-capacity row of each point uses the smaller of
/// `MaxFlows` and the number of flows that can be measured there, so
/// unlimited points still link measurement to deployment. The load row is
/// emitted only for points with a finite `MaxLoad`; at such points flows
/// without a finite rate bound get no measurement variable.
pub fn build_milp(r: &RoutingMatrix, catalog: &ResourceCatalog, opts: &MilpOptions) -> MilpModel {
    let t = r.topology();
    let mut m = MilpModel::new();
    m.comments.push("measurement resource placement".into());
    m.comments.push(format!(
        "nodes={} links={} flows={}",
        t.node_count(),
        t.link_count(),
        r.flow_count()
    ));

    let p_node: Vec<usize> = t.nodes().map(|n| m.add_var(p_node_name(t, n))).collect();
    let p_link: Vec<usize> = t.dir_links().map(|d| m.add_var(p_link_name(t, d))).collect();

    for n in t.nodes() {
        let c = catalog.cost(Resource::SdnNode(n));
        if c != 0.0 {
            m.objective.push((c, p_node[n.0]));
        }
    }
    for l in t.links() {
        let c = catalog.cost(Resource::BackupLink(l));
        if c != 0.0 {
            m.objective.push((c, p_link[l.forward().0]));
        }
    }

    // measurement variables per point
    let mut points: Vec<(MeasurePoint, usize)> = t.nodes().map(|n| (MeasurePoint::Node(n), p_node[n.0])).collect();
    points.extend(t.dir_links().map(|d| (MeasurePoint::Backup(d), p_link[d.0])));
    let mut cover: Vec<Vec<(f64, usize)>> = vec![Vec::new(); r.flow_count()];
    let mut capacity_rows = Vec::new();
    for &(p, pv) in &points {
        let on = match p {
            MeasurePoint::Node(n) => r.node_flows(n),
            MeasurePoint::Backup(d) => r.link_flows(d),
        };
        let max_load = catalog.max_load(p);
        let mut vars = Vec::new();
        for f in on.iter_ones().map(FlowId) {
            let bound = r.flow(f).upper_bound;
            if max_load.is_some() && !bound.is_finite() {
                continue;
            }
            let v = m.add_var(m_name(t, f, p));
            cover[f.0].push((1.0, v));
            vars.push((f, v));
        }
        if vars.is_empty() {
            continue;
        }
        capacity_rows.push((p, pv, vars, max_load));
    }
    for f in r.flows() {
        for &d in &r.path(f.id).links {
            let v = m.add_var(d_name(t, f.id, d));
            cover[f.id.0].push((1.0, v));
        }
    }

    for (f, terms) in cover.into_iter().enumerate() {
        m.add_constraint(format!("cover_f{f}"), terms, Sense::Eq, 1.0);
    }
    for (p, pv, vars, max_load) in capacity_rows {
        let tag = match p {
            MeasurePoint::Node(n) => format!("n_{}", node_tag(t, n)),
            MeasurePoint::Backup(d) => format!("l_{}", link_tag(t, d)),
        };
        let cap = catalog
            .max_flows(p)
            .map_or(vars.len() as u64, |q| q.min(vars.len() as u64));
        let mut terms: Vec<(f64, usize)> = vars.iter().map(|&(_, v)| (1.0, v)).collect();
        terms.push((-(cap as f64), pv));
        m.add_constraint(format!("flows_{tag}"), terms, Sense::Le, 0.0);
        if let Some(l) = max_load {
            let mut terms: Vec<(f64, usize)> = vars
                .iter()
                .map(|&(f, v)| (r.flow(f).upper_bound, v))
                .filter(|&(b, _)| b != 0.0)
                .collect();
            terms.push((-l, pv));
            m.add_constraint(format!("load_{tag}"), terms, Sense::Le, 0.0);
        }
    }
    for d in t.dir_links() {
        let terms: Vec<(f64, usize)> = r
            .link_flows(d)
            .iter_ones()
            .map(|f| (1.0, m.var(&d_name(t, FlowId(f), d)).expect("derivation variable")))
            .collect();
        if !terms.is_empty() {
            m.add_constraint(format!("derive_{}", link_tag(t, d)), terms, Sense::Le, 1.0);
        }
    }
    for l in t.links() {
        let (a, b) = (p_link[l.forward().0], p_link[l.reverse().0]);
        m.add_constraint(
            format!("pair_{}", link_tag(t, l.forward())),
            vec![(1.0, a), (-1.0, b)],
            Sense::Eq,
            0.0,
        );
    }
    for (&x, &v) in &opts.fixed {
        let (name, var) = match x {
            Resource::SdnNode(n) => (format!("fix_n_{}", node_tag(t, n)), p_node[n.0]),
            Resource::BackupLink(l) => (format!("fix_l_{}", link_tag(t, l.forward())), p_link[l.forward().0]),
        };
        m.add_constraint(name, vec![(1.0, var)], Sense::Eq, if v { 1.0 } else { 0.0 });
    }
    if let Some(k) = opts.link_cardinality {
        let terms = t.links().map(|l| (1.0, p_link[l.forward().0])).collect();
        m.add_constraint("links_total", terms, Sense::Eq, k as f64);
    }
    m
}

/// Maps model variables back to resources and flow sources.
#[derive(Debug, Clone)]
pub struct MilpLayout {
    resources: Vec<(Resource, usize)>,
    measured: Vec<(FlowId, MeasurePoint, usize)>,
    derived: Vec<(FlowId, DirLink, usize)>,
}

impl MilpLayout {
    /// Recovers variable roles by name. Variables absent from the model
    /// are skipped.
    pub fn new(r: &RoutingMatrix, m: &MilpModel) -> Self {
        let t = r.topology();
        let mut resources = Vec::new();
        for n in t.nodes() {
            if let Some(v) = m.var(&p_node_name(t, n)) {
                resources.push((Resource::SdnNode(n), v));
            }
        }
        for l in t.links() {
            if let Some(v) = m.var(&p_link_name(t, l.forward())) {
                resources.push((Resource::BackupLink(l), v));
            }
        }
        let mut measured = Vec::new();
        let mut derived = Vec::new();
        for f in r.flows() {
            for &n in &r.path(f.id).nodes {
                let p = MeasurePoint::Node(n);
                if let Some(v) = m.var(&m_name(t, f.id, p)) {
                    measured.push((f.id, p, v));
                }
            }
            for &d in &r.path(f.id).links {
                let p = MeasurePoint::Backup(d);
                if let Some(v) = m.var(&m_name(t, f.id, p)) {
                    measured.push((f.id, p, v));
                }
                if let Some(v) = m.var(&d_name(t, f.id, d)) {
                    derived.push((f.id, d, v));
                }
            }
        }
        Self {
            resources,
            measured,
            derived,
        }
    }
}

/// A 0/1 solution decoded into resources and flow sources.
#[derive(Debug, Clone)]
pub struct DecodedSolution {
    pub resources: Vec<Resource>,
    pub measured: Vec<(FlowId, MeasurePoint)>,
    /// Derivations as chosen by the solver, not necessarily in a valid order.
    pub derived: Vec<(FlowId, DirLink)>,
}

fn is_one(x: f64) -> bool {
    x > 0.5
}

pub fn decode_solution(layout: &MilpLayout, values: &[f64]) -> DecodedSolution {
    DecodedSolution {
        resources: layout
            .resources
            .iter()
            .filter(|&&(_, v)| is_one(values[v]))
            .map(|&(x, _)| x)
            .collect(),
        measured: layout
            .measured
            .iter()
            .filter(|&&(_, _, v)| is_one(values[v]))
            .map(|&(f, p, _)| (f, p))
            .collect(),
        derived: layout
            .derived
            .iter()
            .filter(|&&(_, _, v)| is_one(values[v]))
            .map(|&(f, d, _)| (f, d))
            .collect(),
    }
}

/// Outcome of ordering a decoded solution's derivations.
#[derive(Debug, Clone, PartialEq)]
pub enum DerivationCheck {
    /// The derivations can be carried out in this order.
    Valid(DeterminabilityResult),
    /// These derivations depend on each other in a cycle.
    Cyclic(Vec<(FlowId, DirLink)>),
}

/// Orders the derivations of a decoded solution so that each one only uses
/// flows known before it, or finds a dependency cycle.
pub fn check_derivations(r: &RoutingMatrix, s: &DecodedSolution) -> DerivationCheck {
    let m = r.flow_count();
    let mut known = FlowVector::zeros(m);
    for &(f, _) in &s.measured {
        known.set(f.0);
    }
    let mut pending: Vec<(FlowId, DirLink)> = s.derived.clone();
    let mut order = Vec::new();
    loop {
        let before = pending.len();
        pending.retain(|&(f, d)| {
            let ready = r.link_flows(d).iter_ones().all(|g| g == f.0 || known.get(g));
            if ready {
                known.set(f.0);
                order.push((f, d));
            }
            !ready
        });
        if pending.is_empty() || pending.len() == before {
            break;
        }
    }
    if pending.is_empty() {
        return DerivationCheck::Valid(DeterminabilityResult {
            measured: s.measured.clone(),
            derived: order,
            undetermined: known.not(),
            quota_blocked: Vec::new(),
        });
    }

    // every stuck derivation waits on another stuck flow; walk until a repeat
    let by_flow: HashMap<usize, DirLink> = pending.iter().map(|&(f, d)| (f.0, d)).collect();
    let wait_on = |f: usize| {
        r.link_flows(by_flow[&f])
            .iter_ones()
            .find(|&g| g != f && !known.get(g) && by_flow.contains_key(&g))
    };
    let mut seen: Vec<usize> = Vec::new();
    let mut cur = pending[0].0 .0;
    while !seen.contains(&cur) {
        seen.push(cur);
        match wait_on(cur) {
            Some(g) => cur = g,
            // a flow neither known nor derived: report the stuck set
            None => return DerivationCheck::Cyclic(pending),
        }
    }
    let start = seen.iter().position(|&f| f == cur).unwrap();
    DerivationCheck::Cyclic(seen[start..].iter().map(|&f| (FlowId(f), by_flow[&f])).collect())
}

/// Adds `Σ D(cycle) <= |cycle| - 1`.
pub fn add_cycle_cut(m: &mut MilpModel, r: &RoutingMatrix, cycle: &[(FlowId, DirLink)]) {
    let t = r.topology();
    let terms = cycle
        .iter()
        .map(|&(f, d)| (1.0, m.var(&d_name(t, f, d)).expect("derivation variable")))
        .collect();
    let name = format!(
        "cycle_{}",
        m.constraints.iter().filter(|c| c.name.starts_with("cycle_")).count()
    );
    m.add_constraint(name, terms, Sense::Le, cycle.len() as f64 - 1.0);
}

/// A MILP backend. Returns `None` for an infeasible model.
pub trait MilpSolver {
    fn solve(&mut self, m: &MilpModel) -> Result<Option<Vec<f64>>, String>;
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum MilpError {
    #[error("solver failed: {0}")]
    Solver(String),
    #[error("model is infeasible")]
    Infeasible,
    #[error("solution violates rows {0:?}")]
    Violated(Vec<String>),
    #[error("no valid derivation order after {0} cuts")]
    TooManyCuts(usize),
}

/// A solved and order-checked placement.
#[derive(Debug, Clone)]
pub struct MilpResult {
    pub objective: f64,
    pub solution: DecodedSolution,
    pub result: DeterminabilityResult,
    pub cuts: usize,
}

/// Solves, and while the decoded derivations are cyclic adds a cut and
/// solves again.
pub fn solve_with_cuts(
    r: &RoutingMatrix,
    m: &mut MilpModel,
    solver: &mut dyn MilpSolver,
    max_cuts: usize,
) -> Result<MilpResult, MilpError> {
    let layout = MilpLayout::new(r, m);
    for cuts in 0..=max_cuts {
        let values = solver
            .solve(m)
            .map_err(MilpError::Solver)?
            .ok_or(MilpError::Infeasible)?;
        let bad = m.violated(&values);
        if !bad.is_empty() {
            return Err(MilpError::Violated(bad.into_iter().map(String::from).collect()));
        }
        let solution = decode_solution(&layout, &values);
        match check_derivations(r, &solution) {
            DerivationCheck::Valid(result) => {
                return Ok(MilpResult {
                    objective: m.objective_value(&values),
                    solution,
                    result,
                    cuts,
                })
            }
            DerivationCheck::Cyclic(cycle) => add_cycle_cut(m, r, &cycle),
        }
    }
    Err(MilpError::TooManyCuts(max_cuts))
}
