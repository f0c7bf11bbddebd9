//! Replaying a plan against ground-truth traffic.

use std::cmp::Reverse;
use std::collections::{BTreeMap, BinaryHeap};
use std::fmt::Write;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::counter::{micro_rate, Port, PortHistory};
use super::schedule::MeasurementSchedule;
use super::timing::TimingModel;
use super::{throughput_ns, Nanos, SimError};
use crate::determinability::DeterminabilityResult;
use crate::resource::MeasurePoint;
use crate::routing::RoutingMatrix;
use crate::topology::{DirLink, FlowId, NodeId, Topology};
use crate::traffic::TrafficMatrix;

#[derive(Debug, Clone)]
pub struct SimConfig {
    pub timing: TimingModel,
    pub seed: u64,
    /// Header overhead added to every counted byte, e.g. `0.0257`.
    pub overhead: f64,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            timing: TimingModel::ideal(),
            seed: 0,
            overhead: 0.0,
        }
    }
}

/// Where a reconstructed rate came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Source {
    SdnCounter(NodeId),
    BackupLink(DirLink),
    Derived(DirLink),
    Unknown,
}

impl Source {
    pub fn kind(self) -> &'static str {
        match self {
            Source::SdnCounter(_) => "sdn-counter",
            Source::BackupLink(_) => "backup-link",
            Source::Derived(_) => "derived",
            Source::Unknown => "unknown",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FlowReport {
    pub flow: FlowId,
    pub true_bps: f64,
    pub measured_bps: Option<f64>,
    pub source: Source,
}

impl FlowReport {
    /// `|measured − true| / true`; absolute error for zero-rate flows.
    pub fn rel_error(&self) -> Option<f64> {
        let m = self.measured_bps?;
        let err = (m - self.true_bps).abs();
        Some(if self.true_bps == 0.0 { err } else { err / self.true_bps })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReconstructionReport {
    pub flows: Vec<FlowReport>,
    /// Measured load of every directed link over the monitoring interval.
    pub link_loads: Vec<f64>,
}

impl ReconstructionReport {
    pub fn is_complete(&self) -> bool {
        self.flows.iter().all(|f| f.measured_bps.is_some())
    }

    pub fn unknown_count(&self) -> usize {
        self.flows.iter().filter(|f| f.measured_bps.is_none()).count()
    }

    /// Largest relative error over reconstructed flows.
    pub fn max_rel_error(&self) -> f64 {
        self.flows.iter().filter_map(FlowReport::rel_error).fold(0.0, f64::max)
    }

    pub fn to_csv(&self, r: &RoutingMatrix) -> String {
        let t = r.topology();
        let mut s = String::from("flow,true_bps,measured_bps,source,rel_error\n");
        for f in &self.flows {
            let measured = f.measured_bps.map_or_else(String::new, |m| m.to_string());
            let err = f.rel_error().map_or_else(String::new, |e| format!("{e:e}"));
            let _ = writeln!(
                s,
                "{},{},{},{},{}",
                t.flow_label(r.flow(f.flow)),
                f.true_bps,
                measured,
                f.source.kind(),
                err
            );
        }
        s
    }
}

#[derive(Debug, Clone, Copy)]
struct Poll {
    port: Port,
    request: Nanos,
}

#[derive(Debug, Clone, Copy)]
enum Event {
    /// Isolate `flow` (or nothing) on the backup of a link.
    Reroute {
        link: DirLink,
        flow: Option<FlowId>,
    },
    Poll(usize),
}

fn device_of(t: &Topology, p: Port) -> usize {
    match p {
        Port::FlowEntry { node, .. } => node,
        Port::Link(d) | Port::Backup(d) => t.tail(DirLink(d)).0,
    }
}

fn port_label(t: &Topology, p: Port) -> String {
    match p {
        Port::FlowEntry { node, flow } => format!("{} entry of flow {flow}", t.name(NodeId(node))),
        Port::Link(d) => t.dir_link_label(DirLink(d)),
        Port::Backup(d) => format!("backup {}", t.dir_link_label(DirLink(d))),
    }
}

/// Simulates counter polling for an assignment and schedule, then
/// reconstructs every flow: measured flows from their counters and derived
/// flows by subtracting known flows from link loads, in elimination order.
pub fn run_measurement(
    r: &RoutingMatrix,
    tm: &TrafficMatrix,
    assignment: &DeterminabilityResult,
    sched: &MeasurementSchedule,
    cfg: &SimConfig,
) -> Result<ReconstructionReport, SimError> {
    let t = r.topology();
    if tm.len() != r.flow_count() {
        return Err(SimError::Dimension {
            expected: r.flow_count(),
            got: tm.len(),
        });
    }
    let timing = &cfg.timing;
    let guard = timing.guard();
    let t_global = sched.t_global;
    if t_global <= guard {
        return Err(SimError::TimingTooCoarse {
            window: t_global,
            period: timing.mib_period,
        });
    }
    if !sched.is_empty() && sched.t_meas <= guard {
        return Err(SimError::TimingTooCoarse {
            window: sched.t_meas,
            period: timing.mib_period,
        });
    }

    let wire = 1.0 + cfg.overhead;
    let rate: Vec<u128> = tm.rates().iter().map(|&x| micro_rate(x * wire)).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let phase: Vec<Nanos> = t.nodes().map(|_| timing.random_phase(&mut rng)).collect();

    // ports and their initial rates
    let mut initial: BTreeMap<Port, u128> = BTreeMap::new();
    for &(f, p) in &assignment.measured {
        if let MeasurePoint::Node(n) = p {
            initial.insert(Port::FlowEntry { node: n.0, flow: f.0 }, rate[f.0]);
        }
    }
    let link_total: Vec<u128> = t
        .dir_links()
        .map(|d| r.link_flows(d).iter_ones().map(|f| rate[f]).sum())
        .collect();
    for d in t.dir_links() {
        initial.insert(Port::Link(d.0), link_total[d.0]);
        initial.insert(Port::Backup(d.0), 0);
    }
    let mut ports: BTreeMap<Port, PortHistory> = initial
        .into_iter()
        .map(|(p, x)| {
            let offset = if timing.random_offsets { rng.gen() } else { 0 };
            (p, PortHistory::new(x, offset))
        })
        .collect();

    // events
    let mut polls: Vec<Poll> = Vec::new();
    let mut events: Vec<(Nanos, u8, Event)> = Vec::new();
    let pair = |polls: &mut Vec<Poll>, events: &mut Vec<(Nanos, u8, Event)>, port, a, b| {
        let i = polls.len();
        polls.push(Poll { port, request: a });
        polls.push(Poll { port, request: b });
        events.push((a, 1, Event::Poll(i)));
        events.push((b, 1, Event::Poll(i + 1)));
        i
    };
    let mut flow_polls: Vec<Option<(usize, Source)>> = vec![None; r.flow_count()];
    for &(f, p) in &assignment.measured {
        if let MeasurePoint::Node(n) = p {
            let port = Port::FlowEntry { node: n.0, flow: f.0 };
            let i = pair(&mut polls, &mut events, port, guard, t_global);
            flow_polls[f.0] = Some((i, Source::SdnCounter(n)));
        }
    }
    for (&d, slots) in &sched.slots {
        for s in slots {
            events.push((
                s.start,
                0,
                Event::Reroute {
                    link: d,
                    flow: Some(s.flow),
                },
            ));
            let i = pair(&mut polls, &mut events, Port::Backup(d.0), s.start + guard, s.end());
            flow_polls[s.flow.0] = Some((i, Source::BackupLink(d)));
        }
        if let Some(last) = slots.last() {
            events.push((last.end(), 0, Event::Reroute { link: d, flow: None }));
        }
    }
    let mut load_polls = Vec::with_capacity(t.dir_link_count());
    for d in t.dir_links() {
        let a = pair(&mut polls, &mut events, Port::Link(d.0), guard, t_global);
        let b = pair(&mut polls, &mut events, Port::Backup(d.0), guard, t_global);
        load_polls.push((a, b));
    }

    // stable by insertion order within equal (time, kind)
    let mut queue: BinaryHeap<Reverse<(Nanos, u8, usize)>> = events
        .iter()
        .enumerate()
        .map(|(i, &(at, kind, _))| Reverse((at, kind, i)))
        .collect();
    let mut readings: Vec<(Nanos, u64, u128)> = vec![(0, 0, 0); polls.len()];
    while let Some(Reverse((now, _, i))) = queue.pop() {
        match events[i].2 {
            Event::Reroute { link, flow } => {
                let isolated = flow.map_or(0, |f| rate[f.0]);
                ports
                    .get_mut(&Port::Backup(link.0))
                    .expect("backup port")
                    .set_rate(now, isolated);
                ports
                    .get_mut(&Port::Link(link.0))
                    .expect("link port")
                    .set_rate(now, link_total[link.0] - isolated);
            }
            Event::Poll(k) => {
                let p = polls[k];
                let hist = &ports[&p.port];
                let at = timing.refresh_at_or_before(p.request, phase[device_of(t, p.port)]);
                let delay = timing.random_delay(&mut rng);
                readings[k] = (
                    p.request + delay,
                    hist.register(at, timing.units_per_byte),
                    hist.units(at, timing.units_per_byte),
                );
            }
        }
    }

    let rate_of = |i: usize, port: Port| -> Result<f64, SimError> {
        let (t1, c1, u1) = readings[i];
        let (t2, c2, u2) = readings[i + 1];
        if u2 - u1 >= 1u128 << 64 {
            return Err(SimError::CounterAliased {
                port: port_label(t, port),
            });
        }
        throughput_ns(c1, c2, t1, t2, timing.units_per_byte)
    };

    let mut link_loads = Vec::with_capacity(t.dir_link_count());
    for d in t.dir_links() {
        let (a, b) = load_polls[d.0];
        link_loads.push(rate_of(a, Port::Link(d.0))? + rate_of(b, Port::Backup(d.0))?);
    }

    let mut value: Vec<Option<f64>> = vec![None; r.flow_count()];
    let mut source = vec![Source::Unknown; r.flow_count()];
    for (f, fp) in flow_polls.iter().enumerate() {
        if let Some((i, src)) = *fp {
            value[f] = Some(rate_of(i, polls[i].port)?);
            source[f] = src;
        }
    }
    for &(f, d) in &assignment.derived {
        let others: f64 = r
            .link_flows(d)
            .iter_ones()
            .filter(|&g| g != f.0)
            .map(|g| value[g].expect("derivation order uses known flows"))
            .sum();
        value[f.0] = Some(link_loads[d.0] - others);
        source[f.0] = Source::Derived(d);
    }

    let flows = r
        .flows()
        .iter()
        .map(|fl| FlowReport {
            flow: fl.id,
            true_bps: tm.rate(fl.id),
            measured_bps: value[fl.id.0],
            source: source[fl.id.0],
        })
        .collect();
    Ok(ReconstructionReport { flows, link_loads })
}
