use std::collections::BTreeMap;

use super::{Nanos, SimError};
use crate::determinability::DeterminabilityResult;
use crate::resource::MeasurePoint;
use crate::topology::{DirLink, FlowId, Topology};

/// One flow isolated on a backup link during `[start, start + duration)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Slot {
    pub flow: FlowId,
    pub start: Nanos,
    pub duration: Nanos,
}

impl Slot {
    pub fn end(&self) -> Nanos {
        self.start + self.duration
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct MeasurementSchedule {
    pub t_meas: Nanos,
    pub t_global: Nanos,
    /// Sequential slots per directed backup link.
    pub slots: BTreeMap<DirLink, Vec<Slot>>,
}

impl MeasurementSchedule {
    /// Flows that fit on one backup link, `⌊T_global / T_meas⌋`.
    pub fn capacity(&self) -> usize {
        (self.t_global / self.t_meas) as usize
    }

    pub fn is_empty(&self) -> bool {
        self.slots.is_empty()
    }

    pub fn slot_count(&self) -> usize {
        self.slots.values().map(Vec::len).sum()
    }

    /// `link,flow,start_s,end_s` rows.
    pub fn to_csv(&self, t: &Topology, flow_label: impl Fn(FlowId) -> String) -> String {
        let mut s = String::from("link,flow,start_s,end_s\n");
        for (&d, slots) in &self.slots {
            for sl in slots {
                s.push_str(&format!(
                    "{},{},{},{}\n",
                    t.dir_link_label(d),
                    flow_label(sl.flow),
                    sl.start as f64 / 1e9,
                    sl.end() as f64 / 1e9
                ));
            }
        }
        s
    }
}

/// Gives every flow measured on a backup link its own slot of length
/// `t_meas`, back to back from time zero in flow-id order. SDN-measured
/// flows are read from flow tables and need no slot.
pub fn schedule_backup(
    t: &Topology,
    assignment: &DeterminabilityResult,
    t_meas: Nanos,
    t_global: Nanos,
) -> Result<MeasurementSchedule, SimError> {
    if t_meas == 0 || t_meas > t_global {
        return Err(SimError::BadInterval);
    }
    let mut per_link: BTreeMap<DirLink, Vec<FlowId>> = BTreeMap::new();
    for &(f, p) in &assignment.measured {
        if let MeasurePoint::Backup(d) = p {
            per_link.entry(d).or_default().push(f);
        }
    }
    let mut sched = MeasurementSchedule {
        t_meas,
        t_global,
        slots: BTreeMap::new(),
    };
    let capacity = sched.capacity();
    for (d, mut flows) in per_link {
        if flows.len() > capacity {
            return Err(SimError::ScheduleOverflow {
                link: t.dir_link_label(d),
                needed: flows.len(),
                capacity,
            });
        }
        flows.sort();
        let slots = flows
            .into_iter()
            .enumerate()
            .map(|(i, flow)| Slot {
                flow,
                start: i as Nanos * t_meas,
                duration: t_meas,
            })
            .collect();
        sched.slots.insert(d, slots);
    }
    Ok(sched)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::determinability::check_feasibility;
    use crate::resource::{Resource, ResourceCatalog, ResourceSpec};
    use crate::routing::shortest_paths_for;
    use crate::topology::{parse_topology, LinkId};

    const SEC: Nanos = 1_000_000_000;

    #[test]
    fn chain_backup_slots() {
        let t = parse_topology("node R1\nnode R2\nnode R3\nnode R4\nlink R1 R2\nlink R2 R3\nlink R3 R4\n").unwrap();
        let r = shortest_paths_for(&t, t.select_flows(|f| f.ingress < f.egress)).unwrap();
        let x = Resource::BackupLink(LinkId(1));
        let mut c = ResourceCatalog::uniform(&t);
        c.set(
            x,
            ResourceSpec {
                max_flows: Some(3),
                ..Default::default()
            },
        );
        let a = check_feasibility(&r, &[x], &c);
        let s = schedule_backup(&t, &a, 10 * SEC, 30 * SEC).unwrap();
        let slots = &s.slots[&DirLink(2)];
        let got: Vec<(usize, Nanos, Nanos)> = slots.iter().map(|s| (s.flow.0, s.start, s.end())).collect();
        assert_eq!(
            got,
            [(1, 0, 10 * SEC), (2, 10 * SEC, 20 * SEC), (4, 20 * SEC, 30 * SEC)]
        );

        let unlimited = check_feasibility(&r, &[x], &ResourceCatalog::uniform(&t));
        let err = schedule_backup(&t, &unlimited, 10 * SEC, 30 * SEC).unwrap_err();
        assert_eq!(
            err,
            SimError::ScheduleOverflow {
                link: "R2->R3".into(),
                needed: 4,
                capacity: 3
            }
        );
        assert!(s
            .to_csv(&t, |f| f.0.to_string())
            .starts_with("link,flow,start_s,end_s\nR2->R3,1,0,10\n"));
    }

    #[test]
    fn empty_and_bad_intervals() {
        let t = parse_topology("node A\nnode B\nlink A B\n").unwrap();
        let none = DeterminabilityResult {
            measured: vec![],
            derived: vec![],
            undetermined: crate::flowvec::FlowVector::zeros(2),
            quota_blocked: vec![],
        };
        assert!(schedule_backup(&t, &none, SEC, SEC).unwrap().is_empty());
        assert_eq!(schedule_backup(&t, &none, 0, SEC), Err(SimError::BadInterval));
        assert_eq!(schedule_backup(&t, &none, 2 * SEC, SEC), Err(SimError::BadInterval));
    }
}
