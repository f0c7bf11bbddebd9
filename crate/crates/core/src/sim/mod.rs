//! Discrete-event simulation of counter-based measurement.
//!
//! Traffic is a constant-bit-rate fluid. Counters are integers that only
//! change at their device's MIB refresh instants, and every poll returns the
//! last refreshed value after a random response delay.

mod counter;
mod measure;
mod schedule;
mod timing;

use thiserror::Error;

pub use counter::{Port, PortHistory};
pub use measure::{run_measurement, FlowReport, ReconstructionReport, SimConfig, Source};
pub use schedule::{schedule_backup, MeasurementSchedule, Slot};
pub use timing::{TimingModel, PRESETS};

/// Simulation time in nanoseconds.
pub type Nanos = u64;

pub const NANOS_PER_SEC: u64 = 1_000_000_000;

/// Converts seconds to nanoseconds, rounding to the nearest nanosecond.
pub fn nanos(secs: f64) -> Nanos {
    assert!(secs >= 0.0 && secs.is_finite(), "time must be finite and >= 0");
    (secs * NANOS_PER_SEC as f64).round() as Nanos
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SimError {
    #[error("second sample time {t2} is not after the first {t1}")]
    NonIncreasingTime { t1: f64, t2: f64 },
    #[error("backup link {link} needs {needed} slots but only {capacity} fit in the monitoring interval")]
    ScheduleOverflow {
        link: String,
        needed: usize,
        capacity: usize,
    },
    #[error("measurement slot must be positive and no longer than the monitoring interval")]
    BadInterval,
    #[error("measurement window of {window} ns does not exceed the MIB refresh period of {period} ns")]
    TimingTooCoarse { window: Nanos, period: Nanos },
    #[error("counter on {port} advanced by 2^64 or more between two polls")]
    CounterAliased { port: String },
    #[error("traffic matrix has {got} rates for {expected} flows")]
    Dimension { expected: usize, got: usize },
    #[error("unknown timing preset `{0}`")]
    UnknownPreset(String),
}

/// `η = 8 (C2 ⊖ C1) / (t2 − t1)` in bit/s, for byte counts and times in
/// seconds, with `⊖` the 64-bit wrapping difference.
pub fn throughput(c1: u64, c2: u64, t1: f64, t2: f64) -> Result<f64, SimError> {
    // written to also reject NaN
    if t2.partial_cmp(&t1) != Some(std::cmp::Ordering::Greater) {
        return Err(SimError::NonIncreasingTime { t1, t2 });
    }
    Ok(8.0 * c2.wrapping_sub(c1) as f64 / (t2 - t1))
}

/// Same as [`throughput`] for counters in `units_per_byte` sub-byte units
/// and times in nanoseconds. Computed in integers with one final rounding,
/// so a rate that the counters represent exactly comes out exactly.
pub fn throughput_ns(c1: u64, c2: u64, t1: Nanos, t2: Nanos, units_per_byte: u64) -> Result<f64, SimError> {
    if t2 <= t1 {
        return Err(SimError::NonIncreasingTime {
            t1: t1 as f64 / 1e9,
            t2: t2 as f64 / 1e9,
        });
    }
    let num = 8 * u128::from(c2.wrapping_sub(c1)) * u128::from(NANOS_PER_SEC);
    let den = u128::from(t2 - t1) * u128::from(units_per_byte);
    Ok((num / den) as f64 + (num % den) as f64 / den as f64)
}
