//! Measurement resources and their costs and limits.
//!
//! A catalog file refines the default catalog (unit cost, no limits):
//!
//! ```text
//! default node cost=4
//! default link cost=1 max_flows=6
//! node R2 cost=2 max_load=1e9
//! link R2 R3 max_flows=3
//! flow R1 R3 bound=2e7 weight=0.5
//! ```
//!
//! `max_flows`, `max_load` and `bound` accept `inf`. Explicit lines override
//! the `default` line of their kind key by key, regardless of line order.

use std::collections::BTreeMap;

use thiserror::Error;

use crate::topology::{tokenize, DirLink, Flow, LinkId, NodeId, Topology};

/// A deployable measurement resource.
///
/// The derived ordering (nodes before links, then by index) is the
/// canonical deployment tie-break.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Resource {
    /// Upgrade the node to an SDN router with flow-table byte counters.
    SdnNode(NodeId),
    /// Provision a backup port pair parallel to both directions of a link.
    BackupLink(LinkId),
}

impl Resource {
    /// Every resource of the topology in canonical order.
    pub fn all(t: &Topology) -> Vec<Resource> {
        t.nodes()
            .map(Resource::SdnNode)
            .chain(t.links().map(Resource::BackupLink))
            .collect()
    }

    pub fn kind(self) -> &'static str {
        match self {
            Resource::SdnNode(_) => "sdn-node",
            Resource::BackupLink(_) => "backup-link",
        }
    }

    /// `R2` for a node, `R2:R3` for a link pair.
    pub fn label(self, t: &Topology) -> String {
        match self {
            Resource::SdnNode(n) => t.name(n).to_string(),
            Resource::BackupLink(l) => t.link_label(l),
        }
    }

    /// `node:R2` or `link:R2:R3`, the syntax read by [`parse_resource`].
    pub fn spec(self, t: &Topology) -> String {
        match self {
            Resource::SdnNode(_) => format!("node:{}", self.label(t)),
            Resource::BackupLink(_) => format!("link:{}", self.label(t)),
        }
    }

    /// Measurement points this resource provides.
    pub fn points(self) -> Vec<MeasurePoint> {
        match self {
            Resource::SdnNode(n) => vec![MeasurePoint::Node(n)],
            Resource::BackupLink(l) => {
                vec![MeasurePoint::Backup(l.forward()), MeasurePoint::Backup(l.reverse())]
            }
        }
    }
}

/// A place where individual flows can be counted.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum MeasurePoint {
    /// A flow-table entry on an SDN node.
    Node(NodeId),
    /// The backup port of one direction of a link.
    Backup(DirLink),
}

impl MeasurePoint {
    pub fn resource(self) -> Resource {
        match self {
            MeasurePoint::Node(n) => Resource::SdnNode(n),
            MeasurePoint::Backup(d) => Resource::BackupLink(d.link()),
        }
    }

    pub fn label(self, t: &Topology) -> String {
        match self {
            MeasurePoint::Node(n) => t.name(n).to_string(),
            MeasurePoint::Backup(d) => t.dir_link_label(d),
        }
    }
}

/// Cost and limits of one resource. `None` limits are unbounded.
///
/// For a backup link the limits apply to each direction separately, as each
/// direction is rerouted by the policy of its own ingress router.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ResourceSpec {
    pub cost: f64,
    pub max_flows: Option<u64>,
    pub max_load: Option<f64>,
}

impl Default for ResourceSpec {
    fn default() -> Self {
        Self {
            cost: 1.0,
            max_flows: None,
            max_load: None,
        }
    }
}

impl ResourceSpec {
    pub fn is_unlimited(&self) -> bool {
        self.max_flows.is_none() && self.max_load.is_none()
    }
}

/// Per-flow attribute overrides from a catalog file.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct FlowOverride {
    pub upper_bound: Option<f64>,
    pub weight: Option<f64>,
}

/// Costs and limits for every resource of a topology.
#[derive(Debug, Clone, PartialEq)]
pub struct ResourceCatalog {
    nodes: Vec<ResourceSpec>,
    links: Vec<ResourceSpec>,
    flows: BTreeMap<(NodeId, NodeId), FlowOverride>,
}

impl ResourceCatalog {
    /// Unit costs and no limits.
    pub fn uniform(t: &Topology) -> Self {
        Self {
            nodes: vec![ResourceSpec::default(); t.node_count()],
            links: vec![ResourceSpec::default(); t.link_count()],
            flows: BTreeMap::new(),
        }
    }

    /// Uniform catalog with one cost per kind.
    pub fn with_kind_costs(t: &Topology, node_cost: f64, link_cost: f64) -> Self {
        let mut c = Self::uniform(t);
        c.nodes.iter_mut().for_each(|s| s.cost = node_cost);
        c.links.iter_mut().for_each(|s| s.cost = link_cost);
        c
    }

    pub fn spec(&self, r: Resource) -> &ResourceSpec {
        match r {
            Resource::SdnNode(n) => &self.nodes[n.0],
            Resource::BackupLink(l) => &self.links[l.0],
        }
    }

    pub fn set(&mut self, r: Resource, spec: ResourceSpec) {
        assert!(
            spec.cost >= 0.0 && spec.cost.is_finite(),
            "cost must be finite and >= 0"
        );
        match r {
            Resource::SdnNode(n) => self.nodes[n.0] = spec,
            Resource::BackupLink(l) => self.links[l.0] = spec,
        }
    }

    pub fn cost(&self, r: Resource) -> f64 {
        self.spec(r).cost
    }

    pub fn max_flows(&self, p: MeasurePoint) -> Option<u64> {
        self.spec(p.resource()).max_flows
    }

    pub fn max_load(&self, p: MeasurePoint) -> Option<f64> {
        self.spec(p.resource()).max_load
    }

    /// Whether any resource carries a finite limit.
    pub fn has_limits(&self) -> bool {
        self.nodes.iter().chain(&self.links).any(|s| !s.is_unlimited())
    }

    /// Whether all listed resources share one cost.
    pub fn uniform_cost(&self, resources: &[Resource]) -> Option<f64> {
        let first = self.cost(*resources.first()?);
        resources.iter().all(|&r| self.cost(r) == first).then_some(first)
    }

    pub fn flow_override(&self, ingress: NodeId, egress: NodeId) -> Option<&FlowOverride> {
        self.flows.get(&(ingress, egress))
    }

    /// Applies flow bound and weight overrides to a flow.
    pub fn apply_to_flow(&self, f: &mut Flow) {
        if let Some(o) = self.flows.get(&(f.ingress, f.egress)) {
            if let Some(b) = o.upper_bound {
                f.upper_bound = b;
            }
            if let Some(w) = o.weight {
                f.weight = w;
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("line {line}, column {column}: {message}")]
pub struct CatalogError {
    pub line: usize,
    pub column: usize,
    pub message: String,
}

#[derive(Debug, Clone, Copy, Default)]
struct PartialSpec {
    cost: Option<f64>,
    max_flows: Option<Option<u64>>,
    max_load: Option<Option<f64>>,
}

impl PartialSpec {
    fn over(self, base: PartialSpec) -> ResourceSpec {
        let d = ResourceSpec::default();
        ResourceSpec {
            cost: self.cost.or(base.cost).unwrap_or(d.cost),
            max_flows: self.max_flows.or(base.max_flows).unwrap_or(d.max_flows),
            max_load: self.max_load.or(base.max_load).unwrap_or(d.max_load),
        }
    }
}

/// Parses a catalog file against a topology.
pub fn parse_catalog(t: &Topology, text: &str) -> Result<ResourceCatalog, CatalogError> {
    let mut node_default = PartialSpec::default();
    let mut link_default = PartialSpec::default();
    let mut nodes = vec![PartialSpec::default(); t.node_count()];
    let mut links = vec![PartialSpec::default(); t.link_count()];
    let mut flows = BTreeMap::new();

    for (lineno, line) in text.lines().enumerate() {
        let line_no = lineno + 1;
        let err = |column: usize, message: String| CatalogError {
            line: line_no,
            column,
            message,
        };
        let tokens = tokenize(line);
        let Some(&(col, keyword)) = tokens.first() else {
            continue;
        };
        let node = |i: usize| -> Result<NodeId, CatalogError> {
            let (c, name) = *tokens
                .get(i)
                .ok_or_else(|| err(col, format!("missing node id after `{keyword}`")))?;
            t.node_by_name(name)
                .ok_or_else(|| err(c, format!("unknown node `{name}`")))
        };
        match keyword {
            "default" => {
                let (kc, kind) = *tokens
                    .get(1)
                    .ok_or_else(|| err(col, "expected `default node|link ...`".into()))?;
                let target = match kind {
                    "node" => &mut node_default,
                    "link" => &mut link_default,
                    _ => return Err(err(kc, format!("unknown resource kind `{kind}`"))),
                };
                parse_spec_keys(&tokens[2..], target).map_err(|(c, m)| err(c, m))?;
            }
            "node" => {
                let n = node(1)?;
                parse_spec_keys(&tokens[2..], &mut nodes[n.0]).map_err(|(c, m)| err(c, m))?;
            }
            "link" => {
                let a = node(1)?;
                let b = node(2)?;
                let l = t
                    .find_link(a, b)
                    .ok_or_else(|| err(tokens[1].0, format!("no link `{}` - `{}`", t.name(a), t.name(b))))?;
                parse_spec_keys(&tokens[3..], &mut links[l.0]).map_err(|(c, m)| err(c, m))?;
            }
            "flow" => {
                let a = node(1)?;
                let b = node(2)?;
                if a == b {
                    return Err(err(tokens[2].0, "flow endpoints must differ".into()));
                }
                let o: &mut FlowOverride = flows.entry((a, b)).or_default();
                for &(c, kv) in &tokens[3..] {
                    let (k, v) = split_kv(kv).ok_or_else(|| err(c, format!("expected key=value, got `{kv}`")))?;
                    match k {
                        "bound" => {
                            o.upper_bound =
                                Some(parse_nonneg(v, true).ok_or_else(|| err(c, format!("invalid bound `{v}`")))?)
                        }
                        "weight" => {
                            o.weight =
                                Some(parse_nonneg(v, false).ok_or_else(|| err(c, format!("invalid weight `{v}`")))?)
                        }
                        _ => return Err(err(c, format!("unknown flow key `{k}`"))),
                    }
                }
            }
            other => return Err(err(col, format!("unknown directive `{other}`"))),
        }
    }

    Ok(ResourceCatalog {
        nodes: nodes.into_iter().map(|p| p.over(node_default)).collect(),
        links: links.into_iter().map(|p| p.over(link_default)).collect(),
        flows,
    })
}

fn split_kv(s: &str) -> Option<(&str, &str)> {
    let (k, v) = s.split_once('=')?;
    (!k.is_empty() && !v.is_empty()).then_some((k, v))
}

fn parse_nonneg(v: &str, allow_inf: bool) -> Option<f64> {
    if v == "inf" {
        return allow_inf.then_some(f64::INFINITY);
    }
    let x: f64 = v.parse().ok()?;
    (x.is_finite() && x >= 0.0).then_some(x)
}

fn parse_spec_keys(tokens: &[(usize, &str)], spec: &mut PartialSpec) -> Result<(), (usize, String)> {
    for &(c, kv) in tokens {
        let (k, v) = split_kv(kv).ok_or_else(|| (c, format!("expected key=value, got `{kv}`")))?;
        match k {
            "cost" => {
                spec.cost = Some(parse_nonneg(v, false).ok_or_else(|| (c, format!("invalid cost `{v}`")))?);
            }
            "max_flows" => {
                spec.max_flows = Some(if v == "inf" {
                    None
                } else {
                    match v.parse::<u64>() {
                        Ok(n) if n > 0 => Some(n),
                        _ => return Err((c, format!("max_flows must be a positive integer or inf, got `{v}`"))),
                    }
                });
            }
            "max_load" => {
                spec.max_load = Some(match parse_nonneg(v, true) {
                    Some(x) if x.is_infinite() => None,
                    Some(x) if x > 0.0 => Some(x),
                    _ => return Err((c, format!("max_load must be positive or inf, got `{v}`"))),
                });
            }
            _ => return Err((c, format!("unknown key `{k}`"))),
        }
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ResourceSpecError {
    #[error("expected `node:<id>` or `link:<a>:<b>`, got `{0}`")]
    Syntax(String),
    #[error("unknown node `{0}`")]
    UnknownNode(String),
    #[error("no link `{0}` - `{1}`")]
    UnknownLink(String, String),
}

/// Parses `node:<id>` or `link:<a>:<b>`.
pub fn parse_resource(t: &Topology, s: &str) -> Result<Resource, ResourceSpecError> {
    let node = |name: &str| {
        t.node_by_name(name)
            .ok_or_else(|| ResourceSpecError::UnknownNode(name.to_string()))
    };
    let parts: Vec<&str> = s.trim().split(':').collect();
    match parts.as_slice() {
        ["node", n] => Ok(Resource::SdnNode(node(n)?)),
        ["link", a, b] => {
            let (na, nb) = (node(a)?, node(b)?);
            t.find_link(na, nb)
                .map(Resource::BackupLink)
                .ok_or_else(|| ResourceSpecError::UnknownLink(a.to_string(), b.to_string()))
        }
        _ => Err(ResourceSpecError::Syntax(s.to_string())),
    }
}

/// Parses a comma-separated list of resources, each optionally suffixed
/// with `=0` or `=1` (default `=1`).
pub fn parse_fixing(t: &Topology, s: &str) -> Result<BTreeMap<Resource, bool>, ResourceSpecError> {
    let mut out = BTreeMap::new();
    for item in s.split(',').map(str::trim).filter(|i| !i.is_empty()) {
        let (r, v) = match item.rsplit_once('=') {
            Some((r, "1")) => (r, true),
            Some((r, "0")) => (r, false),
            Some(_) => return Err(ResourceSpecError::Syntax(item.to_string())),
            None => (item, true),
        };
        out.insert(parse_resource(t, r)?, v);
    }
    Ok(out)
}
