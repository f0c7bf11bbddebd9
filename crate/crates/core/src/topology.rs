//! Network topology, directed link expansion and the ingress-egress flow set.
//!
//! The native topology format is line oriented:
//!
//! ```text
//! # comment
//! node R1
//! node R2
//! link R1 R2 10
//! ```
//!
//! Every `link` line declares one bidirectional IP link between two previously
//! declared nodes, with an optional positive integer OSPF metric (default 1)
//! that applies to both directions. Undirected link `i` expands to the directed
//! links `2i` (as written) and `2i + 1` (reverse).

use std::collections::{HashMap, VecDeque};
use std::fmt;

use thiserror::Error;

/// Index of a node in file order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct NodeId(pub usize);

/// Index of an undirected IP link in file order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct LinkId(pub usize);

/// Index of a directed link. `2i` is link `i` as written, `2i + 1` its reverse.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct DirLink(pub usize);

/// Position of a flow in the canonical flow order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct FlowId(pub usize);

impl DirLink {
    /// The opposite direction of the same IP link.
    #[inline]
    pub fn rev(self) -> DirLink {
        DirLink(self.0 ^ 1)
    }

    #[inline]
    pub fn link(self) -> LinkId {
        LinkId(self.0 / 2)
    }

    /// Whether this is the direction as written in the topology file.
    #[inline]
    pub fn is_forward(self) -> bool {
        self.0.is_multiple_of(2)
    }
}

impl LinkId {
    #[inline]
    pub fn forward(self) -> DirLink {
        DirLink(2 * self.0)
    }

    #[inline]
    pub fn reverse(self) -> DirLink {
        DirLink(2 * self.0 + 1)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Link {
    pub a: NodeId,
    pub b: NodeId,
    pub metric: u32,
}

/// Structural problems with a topology, independent of how it was read.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum TopologyError {
    #[error("duplicate node `{0}`")]
    DuplicateNode(String),
    #[error("unknown node `{0}`")]
    UnknownNode(String),
    #[error("invalid node id `{0}`")]
    InvalidName(String),
    #[error("self-loop on node `{0}`")]
    SelfLoop(String),
    #[error("duplicate link `{0}` - `{1}`")]
    DuplicateLink(String, String),
    #[error("non-positive metric {0}")]
    NonPositiveMetric(i64),
    #[error("topology has no nodes")]
    Empty,
    #[error("topology is disconnected: `{unreachable}` is not reachable from `{root}`")]
    Disconnected { root: String, unreachable: String },
}

/// Errors from [`parse_topology`]. Line and column numbers are 1-based.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ParseTopologyError {
    #[error("line {line}, column {column}: {message}")]
    Syntax {
        line: usize,
        column: usize,
        message: String,
    },
    #[error("line {line}, column {column}: {source}")]
    Invalid {
        line: usize,
        column: usize,
        source: TopologyError,
    },
    #[error(transparent)]
    Structure(#[from] TopologyError),
}

/// Checks that `name` is usable as a node id: non-empty, no whitespace or
/// control characters, and none of the reserved characters `# , : =`.
pub fn is_valid_node_name(name: &str) -> bool {
    !name.is_empty()
        && name
            .chars()
            .all(|c| !c.is_whitespace() && !c.is_control() && !matches!(c, '#' | ',' | ':' | '='))
}

/// Immutable network topology.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Topology {
    names: Vec<String>,
    index: HashMap<String, NodeId>,
    links: Vec<Link>,
    /// Outgoing directed links per node, sorted by target node.
    out: Vec<Vec<DirLink>>,
}

/// Incremental construction of a [`Topology`].
#[derive(Debug, Default)]
pub struct TopologyBuilder {
    names: Vec<String>,
    index: HashMap<String, NodeId>,
    links: Vec<Link>,
    pairs: HashMap<(NodeId, NodeId), LinkId>,
}

impl TopologyBuilder {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add_node(&mut self, name: &str) -> Result<NodeId, TopologyError> {
        if !is_valid_node_name(name) {
            return Err(TopologyError::InvalidName(name.to_string()));
        }
        if self.index.contains_key(name) {
            return Err(TopologyError::DuplicateNode(name.to_string()));
        }
        let id = NodeId(self.names.len());
        self.names.push(name.to_string());
        self.index.insert(name.to_string(), id);
        Ok(id)
    }

    pub fn node(&self, name: &str) -> Result<NodeId, TopologyError> {
        self.index
            .get(name)
            .copied()
            .ok_or_else(|| TopologyError::UnknownNode(name.to_string()))
    }

    pub fn add_link(&mut self, a: &str, b: &str, metric: i64) -> Result<LinkId, TopologyError> {
        let na = self.node(a)?;
        let nb = self.node(b)?;
        self.add_link_ids(na, nb, metric)
    }

    pub fn add_link_ids(&mut self, a: NodeId, b: NodeId, metric: i64) -> Result<LinkId, TopologyError> {
        if a == b {
            return Err(TopologyError::SelfLoop(self.names[a.0].clone()));
        }
        if metric <= 0 {
            return Err(TopologyError::NonPositiveMetric(metric));
        }
        let key = (a.min(b), a.max(b));
        if self.pairs.contains_key(&key) {
            return Err(TopologyError::DuplicateLink(
                self.names[a.0].clone(),
                self.names[b.0].clone(),
            ));
        }
        let metric = u32::try_from(metric).map_err(|_| TopologyError::NonPositiveMetric(metric))?;
        let id = LinkId(self.links.len());
        self.links.push(Link { a, b, metric });
        self.pairs.insert(key, id);
        Ok(id)
    }

    /// Validates connectivity and freezes the topology.
    pub fn build(self) -> Result<Topology, TopologyError> {
        if self.names.is_empty() {
            return Err(TopologyError::Empty);
        }
        let mut out = vec![Vec::new(); self.names.len()];
        for (i, l) in self.links.iter().enumerate() {
            let id = LinkId(i);
            out[l.a.0].push(id.forward());
            out[l.b.0].push(id.reverse());
        }
        let links = &self.links;
        let target = |d: DirLink| {
            let l = links[d.0 / 2];
            if d.is_forward() {
                l.b
            } else {
                l.a
            }
        };
        for adj in &mut out {
            adj.sort_by_key(|&d| target(d));
        }

        let mut seen = vec![false; self.names.len()];
        let mut queue = VecDeque::from([NodeId(0)]);
        seen[0] = true;
        while let Some(n) = queue.pop_front() {
            for &d in &out[n.0] {
                let t = target(d);
                if !seen[t.0] {
                    seen[t.0] = true;
                    queue.push_back(t);
                }
            }
        }
        if let Some(u) = seen.iter().position(|s| !s) {
            return Err(TopologyError::Disconnected {
                root: self.names[0].clone(),
                unreachable: self.names[u].clone(),
            });
        }

        Ok(Topology {
            names: self.names,
            index: self.index,
            links: self.links,
            out,
        })
    }
}

impl Topology {
    pub fn builder() -> TopologyBuilder {
        TopologyBuilder::new()
    }

    pub fn node_count(&self) -> usize {
        self.names.len()
    }

    /// Number of undirected IP links.
    pub fn link_count(&self) -> usize {
        self.links.len()
    }

    pub fn dir_link_count(&self) -> usize {
        2 * self.links.len()
    }

    pub fn nodes(&self) -> impl ExactSizeIterator<Item = NodeId> {
        (0..self.names.len()).map(NodeId)
    }

    pub fn links(&self) -> impl ExactSizeIterator<Item = LinkId> {
        (0..self.links.len()).map(LinkId)
    }

    pub fn dir_links(&self) -> impl ExactSizeIterator<Item = DirLink> {
        (0..2 * self.links.len()).map(DirLink)
    }

    pub fn name(&self, n: NodeId) -> &str {
        &self.names[n.0]
    }

    pub fn node_by_name(&self, name: &str) -> Option<NodeId> {
        self.index.get(name).copied()
    }

    pub fn link(&self, l: LinkId) -> Link {
        self.links[l.0]
    }

    pub fn find_link(&self, a: NodeId, b: NodeId) -> Option<LinkId> {
        self.out[a.0].iter().find(|&&d| self.head(d) == b).map(|d| d.link())
    }

    /// The directed link from `a` to `b`, if the two nodes are adjacent.
    pub fn find_dir_link(&self, a: NodeId, b: NodeId) -> Option<DirLink> {
        self.out[a.0].iter().copied().find(|&d| self.head(d) == b)
    }

    /// Source node of a directed link.
    pub fn tail(&self, d: DirLink) -> NodeId {
        let l = self.links[d.0 / 2];
        if d.is_forward() {
            l.a
        } else {
            l.b
        }
    }

    /// Target node of a directed link.
    pub fn head(&self, d: DirLink) -> NodeId {
        let l = self.links[d.0 / 2];
        if d.is_forward() {
            l.b
        } else {
            l.a
        }
    }

    pub fn metric(&self, d: DirLink) -> u32 {
        self.links[d.0 / 2].metric
    }

    /// Outgoing directed links of `n`, sorted by target node index.
    pub fn outgoing(&self, n: NodeId) -> &[DirLink] {
        &self.out[n.0]
    }

    pub fn degree(&self, n: NodeId) -> usize {
        self.out[n.0].len()
    }

    /// `2E / N`.
    pub fn average_degree(&self) -> f64 {
        2.0 * self.links.len() as f64 / self.names.len() as f64
    }

    /// `from->to` label of a directed link.
    pub fn dir_link_label(&self, d: DirLink) -> String {
        format!("{}->{}", self.name(self.tail(d)), self.name(self.head(d)))
    }

    /// `a:b` label of an undirected link, in file orientation.
    pub fn link_label(&self, l: LinkId) -> String {
        let link = self.links[l.0];
        format!("{}:{}", self.name(link.a), self.name(link.b))
    }

    /// Every ordered pair of distinct nodes, in canonical order.
    pub fn enumerate_flows(&self) -> Vec<Flow> {
        let n = self.node_count();
        let mut flows = Vec::with_capacity(n * n.saturating_sub(1));
        for i in 0..n {
            for e in 0..n {
                if i != e {
                    flows.push(Flow::new(FlowId(flows.len()), NodeId(i), NodeId(e)));
                }
            }
        }
        flows
    }

    /// The flows accepted by `keep`, renumbered so that ids stay contiguous.
    pub fn select_flows(&self, mut keep: impl FnMut(&Flow) -> bool) -> Vec<Flow> {
        renumber(self.enumerate_flows().into_iter().filter(|f| keep(f)))
    }

    pub fn flow_label(&self, f: &Flow) -> String {
        format!("{}->{}", self.name(f.ingress), self.name(f.egress))
    }

    /// Writes the topology back in the native text format.
    pub fn to_native(&self) -> String {
        let mut s = String::new();
        for name in &self.names {
            s.push_str("node ");
            s.push_str(name);
            s.push('\n');
        }
        for l in &self.links {
            s.push_str(&format!("link {} {}", self.name(l.a), self.name(l.b)));
            if l.metric != 1 {
                s.push_str(&format!(" {}", l.metric));
            }
            s.push('\n');
        }
        s
    }
}

impl fmt::Display for Topology {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{} nodes, {} links, {} flows",
            self.node_count(),
            self.link_count(),
            self.node_count() * self.node_count().saturating_sub(1)
        )
    }
}

/// An ingress-egress flow.
#[derive(Debug, Clone, PartialEq)]
pub struct Flow {
    pub id: FlowId,
    pub ingress: NodeId,
    pub egress: NodeId,
    /// Upper bound on the flow rate in bit/s.
    pub upper_bound: f64,
    /// Externally supplied urgency weight, e.g. a flow spread value.
    pub weight: f64,
}

impl Flow {
    pub fn new(id: FlowId, ingress: NodeId, egress: NodeId) -> Self {
        Self {
            id,
            ingress,
            egress,
            upper_bound: f64::INFINITY,
            weight: 1.0,
        }
    }
}

/// Reassigns contiguous ids in iteration order.
pub fn renumber(flows: impl IntoIterator<Item = Flow>) -> Vec<Flow> {
    flows
        .into_iter()
        .enumerate()
        .map(|(i, mut f)| {
            f.id = FlowId(i);
            f
        })
        .collect()
}

/// Splits a line into `(column, token)` pairs, dropping any `#` comment.
pub(crate) fn tokenize(line: &str) -> Vec<(usize, &str)> {
    let line = match line.find('#') {
        Some(i) => &line[..i],
        None => line,
    };
    let mut tokens = Vec::new();
    let mut start: Option<(usize, usize)> = None;
    for (col, (byte, c)) in line.char_indices().enumerate() {
        if c.is_whitespace() {
            if let Some((scol, sbyte)) = start.take() {
                tokens.push((scol + 1, &line[sbyte..byte]));
            }
        } else if start.is_none() {
            start = Some((col, byte));
        }
    }
    if let Some((scol, sbyte)) = start {
        tokens.push((scol + 1, &line[sbyte..]));
    }
    tokens
}

/// Parses the native topology format.
pub fn parse_topology(text: &str) -> Result<Topology, ParseTopologyError> {
    let mut b = TopologyBuilder::new();
    for (lineno, line) in text.lines().enumerate() {
        let line_no = lineno + 1;
        let tokens = tokenize(line);
        let Some(&(col, keyword)) = tokens.first() else {
            continue;
        };
        let invalid = |column: usize, source: TopologyError| ParseTopologyError::Invalid {
            line: line_no,
            column,
            source,
        };
        match keyword {
            "node" => {
                if tokens.len() != 2 {
                    return Err(syntax(line_no, col, "expected `node <id>`"));
                }
                let (ncol, name) = tokens[1];
                b.add_node(name).map_err(|e| invalid(ncol, e))?;
            }
            "link" => {
                if !(3..=4).contains(&tokens.len()) {
                    return Err(syntax(line_no, col, "expected `link <idA> <idB> [metric]`"));
                }
                let (acol, a) = tokens[1];
                let (bcol, bname) = tokens[2];
                let na = b.node(a).map_err(|e| invalid(acol, e))?;
                let nb = b.node(bname).map_err(|e| invalid(bcol, e))?;
                let (mcol, metric) = match tokens.get(3) {
                    Some(&(mcol, m)) => {
                        let v: i64 = m
                            .parse()
                            .map_err(|_| syntax(line_no, mcol, &format!("invalid metric `{m}`")))?;
                        if v > i64::from(u32::MAX) {
                            return Err(syntax(line_no, mcol, "metric out of range"));
                        }
                        (mcol, v)
                    }
                    None => (col, 1),
                };
                b.add_link_ids(na, nb, metric).map_err(|e| {
                    let c = match e {
                        TopologyError::NonPositiveMetric(_) => mcol,
                        _ => col,
                    };
                    invalid(c, e)
                })?;
            }
            other => {
                return Err(syntax(line_no, col, &format!("unknown directive `{other}`")));
            }
        }
    }
    Ok(b.build()?)
}

fn syntax(line: usize, column: usize, message: &str) -> ParseTopologyError {
    ParseTopologyError::Syntax {
        line,
        column,
        message: message.to_string(),
    }
}
