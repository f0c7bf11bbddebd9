//! Counter timing and reconstruction properties.

mod common;

use common::{random_topology, topo};
use proptest::prelude::*;
use tmplan_core::sim::{
    nanos, run_measurement, schedule_backup, throughput_ns, PortHistory, SimConfig, TimingModel, NANOS_PER_SEC,
};
use tmplan_core::*;

const SEC: u64 = NANOS_PER_SEC;

/// Polls a constant-rate counter at two request times.
fn measure_once(rate_bps: f64, period: u64, phase: u64, t1: u64, t2: u64) -> f64 {
    let m = TimingModel::with_period(period);
    let port = PortHistory::new((rate_bps * 1e6) as u128, 12345);
    let c1 = port.register(m.refresh_at_or_before(t1, phase), 1);
    let c2 = port.register(m.refresh_at_or_before(t2, phase), 1);
    throughput_ns(c1, c2, t1, t2, 1).unwrap()
}

proptest! {
    #[test]
    fn error_bound_over_phases(
        rate in 1e6f64..1e8,
        period_ms in 10u64..2000,
        windows in 20u64..500,
        phase_frac in 0.0f64..1.0,
        start in 0u64..1000,
    ) {
        let period = period_ms * 1_000_000;
        let phase = (phase_frac * period as f64) as u64;
        let t1 = period + start * 1_000_003;
        let t2 = t1 + windows * period;
        let eta = measure_once(rate, period, phase, t1, t2);
        let bound = 2.0 * period as f64 / (t2 - t1) as f64;
        prop_assert!(((eta - rate) / rate).abs() <= bound);
    }

    #[test]
    fn synchronized_polls_are_exact(rate_mbps in 1u32..100, period_ms in 1u64..2000, phase_ms in 0u64..2000, k in 1u64..50) {
        let period = period_ms * 1_000_000;
        let phase = (phase_ms * 1_000_000) % period;
        let t1 = phase + 3 * period;
        let t2 = t1 + k * 100 * period;
        let rate = f64::from(rate_mbps) * 1e6;
        prop_assert_eq!(measure_once(rate, period, phase, t1, t2), rate);
    }

    #[test]
    fn ideal_runs_conserve_link_loads(seed in any::<u64>(), n in 3usize..=7, tm_seed in any::<u64>()) {
        let t = topo(&random_topology(seed, n, 3, 2));
        let r = shortest_paths(&t).unwrap();
        let c = ResourceCatalog::uniform(&t);
        let plan = greedy_plan(&r, &c, &GreedyOptions::default());
        let a = &plan.assignment;
        let per_link = a.measured.iter().filter(|(_, p)| matches!(p, MeasurePoint::Backup(_))).count().max(1) as u64;
        let sched = schedule_backup(&t, a, 10 * SEC, per_link * 10 * SEC).unwrap();
        let tm = gen_traffic(r.flow_count(), 1e6, 100e6, tm_seed).unwrap();
        let rep = run_measurement(&r, &tm, a, &sched, &SimConfig::default()).unwrap();
        prop_assert!(rep.is_complete());
        prop_assert!(rep.max_rel_error() <= 1e-9);
        let measured: Vec<f64> = rep.flows.iter().map(|f| f.measured_bps.unwrap()).collect();
        for d in t.dir_links() {
            let sum: f64 = r.link_flows(d).iter_ones().map(|f| measured[f]).sum();
            let load = rep.link_loads[d.0];
            prop_assert!((sum - load).abs() <= 1e-9 * load.max(1.0), "{} vs {}", sum, load);
        }
    }

    #[test]
    fn derived_error_bounded_by_inputs(seed in any::<u64>(), n in 3usize..=6, delay in 0usize..3) {
        let t = topo(&random_topology(seed, n, 2, 1));
        let r = shortest_paths(&t).unwrap();
        let plan = greedy_plan(&r, &ResourceCatalog::uniform(&t), &GreedyOptions::default());
        let a = &plan.assignment;
        let slots = a.measured.len().max(1) as u64;
        let sched = schedule_backup(&t, a, 50 * SEC, slots * 50 * SEC).unwrap();
        let tm = gen_traffic(r.flow_count(), 1e6, 100e6, seed).unwrap();
        let preset = ["hp-switch", "netgear-switch", "fast-agent"][delay];
        let cfg = SimConfig { timing: TimingModel::preset(preset).unwrap(), seed, overhead: 0.0 };
        let rep = run_measurement(&r, &tm, a, &sched, &cfg).unwrap();
        let err: Vec<f64> = rep.flows.iter().map(|f| f.measured_bps.unwrap() - f.true_bps).collect();
        for &(f, d) in &a.derived {
            let true_load: f64 = r.link_flows(d).iter_ones().map(|g| tm.rate(FlowId(g))).sum();
            let load_err = (rep.link_loads[d.0] - true_load).abs();
            let inputs: f64 = r.link_flows(d).iter_ones().filter(|&g| g != f.0).map(|g| err[g].abs()).sum();
            prop_assert!(err[f.0].abs() <= inputs + load_err + 1e-6 * true_load);
        }
    }
}

#[test]
fn nanos_helper() {
    assert_eq!(nanos(2.5), 2_500_000_000);
}
