//! Byte counters as piecewise-linear functions of time.

use super::Nanos;

/// A counting interface.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Port {
    /// Flow-table entry of one flow on an SDN node.
    FlowEntry { node: usize, flow: usize },
    /// The regular port of a directed link.
    Link(usize),
    /// The backup port parallel to a directed link.
    Backup(usize),
}

/// Rate history of one port. Rates are integer micro-bits per second so
/// that accumulation is exact.
#[derive(Debug, Clone)]
pub struct PortHistory {
    /// `(start, accumulated µbit·ns at start, rate µbit/s)`, sorted by start.
    segments: Vec<(Nanos, u128, u128)>,
    offset: u64,
}

/// Converts bit/s to integer µbit/s.
pub fn micro_rate(bps: f64) -> u128 {
    assert!(bps >= 0.0 && bps.is_finite(), "rate must be finite and >= 0");
    (bps * 1e6).round() as u128
}

impl PortHistory {
    pub fn new(rate: u128, offset: u64) -> Self {
        Self {
            segments: vec![(0, 0, rate)],
            offset,
        }
    }

    pub fn rate(&self) -> u128 {
        self.segments.last().expect("non-empty").2
    }

    /// Changes the rate from time `t` on. Times must not decrease.
    pub fn set_rate(&mut self, t: Nanos, rate: u128) {
        let acc = self.accumulated(t);
        let last = self.segments.last_mut().expect("non-empty");
        assert!(t >= last.0, "rate changes must be in time order");
        if t == last.0 {
            last.2 = rate;
        } else {
            self.segments.push((t, acc, rate));
        }
    }

    /// µbit·ns transferred in `[0, t]`.
    pub fn accumulated(&self, t: Nanos) -> u128 {
        let i = self.segments.partition_point(|s| s.0 <= t) - 1;
        let (start, acc, rate) = self.segments[i];
        acc + rate * u128::from(t - start)
    }

    /// Counter units transferred in `[0, t]`, unwrapped.
    pub fn units(&self, t: Nanos, units_per_byte: u64) -> u128 {
        // 8 bits per byte, 1e6 µbit per bit, 1e9 ns per second
        self.accumulated(t) * u128::from(units_per_byte) / 8_000_000_000_000_000
    }

    /// The 64-bit counter register at time `t`.
    pub fn register(&self, t: Nanos, units_per_byte: u64) -> u64 {
        (self.units(t, units_per_byte) as u64).wrapping_add(self.offset)
    }
}
