//! Conversion of SNDlib network files (XML or native text) to the native
//! topology format.
//!
//! Only the network structure is read: node ids and the endpoints of each
//! link. Parallel links collapse into one undirected link, self-loops are
//! dropped, and ids that are not valid node names are sanitized. Every such
//! change is noted as a comment in the output. Metrics default to 1.

use std::collections::{BTreeSet, HashMap};
use std::fmt::Write;

use thiserror::Error;

use crate::topology::is_valid_node_name;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SndlibError {
    #[error("malformed XML: {0}")]
    Xml(String),
    #[error("line {line}: {message}")]
    Native { line: usize, message: String },
    #[error("missing element `{0}`")]
    Missing(&'static str),
    #[error("link `{link}` refers to unknown node `{node}`")]
    UnknownNode { link: String, node: String },
    #[error("duplicate node id `{0}`")]
    DuplicateNode(String),
    #[error("network has no nodes")]
    Empty,
}

/// Network structure as read from the file.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct SndlibNetwork {
    pub nodes: Vec<String>,
    /// `(id, source, target)`.
    pub links: Vec<(String, String, String)>,
}

/// Reads either the XML or the native text flavour, chosen by the first
/// non-blank character.
pub fn parse_sndlib(text: &str) -> Result<SndlibNetwork, SndlibError> {
    let net = if text.trim_start().starts_with('<') {
        parse_xml(text)?
    } else {
        parse_native(text)?
    };
    if net.nodes.is_empty() {
        return Err(SndlibError::Empty);
    }
    let mut seen = BTreeSet::new();
    for n in &net.nodes {
        if !seen.insert(n.as_str()) {
            return Err(SndlibError::DuplicateNode(n.clone()));
        }
    }
    for (id, a, b) in &net.links {
        for end in [a, b] {
            if !seen.contains(end.as_str()) {
                return Err(SndlibError::UnknownNode {
                    link: id.clone(),
                    node: end.clone(),
                });
            }
        }
    }
    Ok(net)
}

fn child<'a, 'i>(parent: roxmltree::Node<'a, 'i>, name: &str) -> Option<roxmltree::Node<'a, 'i>> {
    parent.children().find(|n| n.has_tag_name(name))
}

fn text_of(parent: roxmltree::Node<'_, '_>, name: &'static str) -> Result<String, SndlibError> {
    child(parent, name)
        .and_then(|n| n.text())
        .map(|s| s.trim().to_string())
        .ok_or(SndlibError::Missing(name))
}

fn parse_xml(text: &str) -> Result<SndlibNetwork, SndlibError> {
    let doc = roxmltree::Document::parse(text).map_err(|e| SndlibError::Xml(e.to_string()))?;
    let structure = doc
        .descendants()
        .find(|n| n.has_tag_name("networkStructure"))
        .ok_or(SndlibError::Missing("networkStructure"))?;
    let mut net = SndlibNetwork::default();
    if let Some(nodes) = child(structure, "nodes") {
        for n in nodes.children().filter(|n| n.has_tag_name("node")) {
            let id = n.attribute("id").ok_or(SndlibError::Missing("node id"))?;
            net.nodes.push(id.to_string());
        }
    }
    if let Some(links) = child(structure, "links") {
        for l in links.children().filter(|n| n.has_tag_name("link")) {
            let id = l.attribute("id").unwrap_or("").to_string();
            net.links.push((id, text_of(l, "source")?, text_of(l, "target")?));
        }
    }
    Ok(net)
}

/// Splits a native-format line into words and parentheses.
fn words(line: &str) -> Vec<&str> {
    let mut out = Vec::new();
    let mut start = None;
    for (i, c) in line.char_indices() {
        if c.is_whitespace() || c == '(' || c == ')' {
            if let Some(s) = start.take() {
                out.push(&line[s..i]);
            }
            if !c.is_whitespace() {
                out.push(&line[i..i + 1]);
            }
        } else if start.is_none() {
            start = Some(i);
        }
    }
    if let Some(s) = start {
        out.push(&line[s..]);
    }
    out
}

fn parse_native(text: &str) -> Result<SndlibNetwork, SndlibError> {
    #[derive(PartialEq)]
    enum State {
        Top,
        Nodes,
        Links,
        Skip,
    }
    let mut state = State::Top;
    let mut net = SndlibNetwork::default();
    let mut saw_nodes = false;
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let content = raw.split('#').next().unwrap_or("");
        // native files open with a `?SNDlib native format; ...` header
        if state == State::Top && content.trim_start().starts_with('?') {
            continue;
        }
        let w = words(content);
        if w.is_empty() {
            continue;
        }
        let err = |m: &str| SndlibError::Native {
            line,
            message: m.to_string(),
        };
        match state {
            State::Top => {
                if w.len() != 2 || w[1] != "(" {
                    return Err(err("expected `SECTION (`"));
                }
                state = match w[0] {
                    "NODES" => {
                        saw_nodes = true;
                        State::Nodes
                    }
                    "LINKS" => State::Links,
                    _ => State::Skip,
                }
            }
            _ if w == [")"] => state = State::Top,
            State::Skip => {}
            State::Nodes => {
                if w.len() < 2 || w[1] != "(" {
                    return Err(err("expected `<id> ( <x> <y> )`"));
                }
                net.nodes.push(w[0].to_string());
            }
            State::Links => {
                if w.len() < 5 || w[1] != "(" || w[4] != ")" {
                    return Err(err("expected `<id> ( <source> <target> ) ...`"));
                }
                net.links.push((w[0].to_string(), w[2].to_string(), w[3].to_string()));
            }
        }
    }
    if state != State::Top {
        return Err(SndlibError::Native {
            line: text.lines().count(),
            message: "unclosed section".into(),
        });
    }
    if !saw_nodes {
        return Err(SndlibError::Missing("NODES"));
    }
    Ok(net)
}

fn sanitize(id: &str) -> String {
    let s: String = id
        .chars()
        .map(|c| {
            if c.is_whitespace() || c.is_control() || "#,:=".contains(c) {
                '_'
            } else {
                c
            }
        })
        .collect();
    if s.is_empty() {
        "_".into()
    } else {
        s
    }
}

/// Converts an SNDlib network file to native topology text.
pub fn convert_sndlib(text: &str) -> Result<String, SndlibError> {
    let net = parse_sndlib(text)?;
    let mut out = String::from("# converted from SNDlib network structure\n");
    let mut names: HashMap<&str, String> = HashMap::new();
    let mut used = BTreeSet::new();
    for id in &net.nodes {
        let mut name = if is_valid_node_name(id) {
            id.clone()
        } else {
            sanitize(id)
        };
        if used.contains(&name) {
            let base = name.clone();
            let mut k = 2;
            while used.contains(&format!("{base}_{k}")) {
                k += 1;
            }
            name = format!("{base}_{k}");
        }
        if &name != id {
            let _ = writeln!(out, "# node `{}` renamed to `{name}`", id.escape_debug());
        }
        used.insert(name.clone());
        names.insert(id, name);
    }
    for id in &net.nodes {
        let _ = writeln!(out, "node {}", names[id.as_str()]);
    }
    let mut seen: HashMap<(String, String), String> = HashMap::new();
    for (id, a, b) in &net.links {
        let (a, b) = (&names[a.as_str()], &names[b.as_str()]);
        if a == b {
            let _ = writeln!(out, "# dropped self-loop `{}` at {a}", id.escape_debug());
            continue;
        }
        let key = if a < b {
            (a.clone(), b.clone())
        } else {
            (b.clone(), a.clone())
        };
        if let Some(first) = seen.get(&key) {
            let _ = writeln!(
                out,
                "# merged parallel link `{}` into `{}`",
                id.escape_debug(),
                first.escape_debug()
            );
            continue;
        }
        seen.insert(key, id.clone());
        let _ = writeln!(out, "link {a} {b}");
    }
    Ok(out)
}
