use rand::Rng;

use super::{Nanos, SimError};

const MS: Nanos = 1_000_000;
const SEC: Nanos = 1_000 * MS;

/// Counter refresh and response behaviour of the polled devices.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TimingModel {
    pub name: String,
    /// MIB refresh period. Zero means counters are always current.
    pub mib_period: Nanos,
    pub jitter_min: Nanos,
    pub jitter_max: Nanos,
    /// Counter resolution. Real octet counters use 1.
    pub units_per_byte: u64,
    /// Start counters at random values instead of zero.
    pub random_offsets: bool,
}

/// Named presets: an idealized device and four refresh periods observed on
/// real switches and routers.
pub const PRESETS: &[&str] = &["ideal", "hp-switch", "netgear-switch", "slow-agent", "fast-agent"];

impl TimingModel {
    /// Zero refresh period, no jitter and micro-byte resolution, so
    /// reconstruction is exact up to floating-point rounding.
    pub fn ideal() -> Self {
        Self {
            name: "ideal".into(),
            mib_period: 0,
            jitter_min: 0,
            jitter_max: 0,
            units_per_byte: 1_000_000,
            random_offsets: true,
        }
    }

    fn device(name: &str, period: Nanos, jitter: (Nanos, Nanos)) -> Self {
        Self {
            name: name.into(),
            mib_period: period,
            jitter_min: jitter.0,
            jitter_max: jitter.1,
            units_per_byte: 1,
            random_offsets: true,
        }
    }

    pub fn preset(name: &str) -> Result<Self, SimError> {
        Ok(match name {
            "ideal" => Self::ideal(),
            "hp-switch" => Self::device(name, 500 * MS, (MS, 2 * MS)),
            "netgear-switch" => Self::device(name, SEC, (MS, 2 * MS)),
            "slow-agent" => Self::device(name, 10 * SEC, (2 * MS, 3 * MS)),
            "fast-agent" => Self::device(name, 10 * MS, (MS, 3 * MS)),
            _ => return Err(SimError::UnknownPreset(name.into())),
        })
    }

    /// A byte-resolution device with the given period and no jitter.
    pub fn with_period(period: Nanos) -> Self {
        Self::device("custom", period, (0, 0))
    }

    /// Margin after a reroute before the first poll, so that the refreshed
    /// value already reflects the new state.
    pub fn guard(&self) -> Nanos {
        self.mib_period
    }

    pub fn random_phase(&self, rng: &mut impl Rng) -> Nanos {
        if self.mib_period == 0 {
            0
        } else {
            rng.gen_range(0..self.mib_period)
        }
    }

    pub fn random_delay(&self, rng: &mut impl Rng) -> Nanos {
        rng.gen_range(self.jitter_min..=self.jitter_max)
    }

    /// Latest refresh instant at or before `t` for a device with `phase`.
    pub fn refresh_at_or_before(&self, t: Nanos, phase: Nanos) -> Nanos {
        if self.mib_period == 0 {
            return t;
        }
        if t < phase {
            // the boot-time value
            return 0;
        }
        t - (t - phase) % self.mib_period
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn presets_resolve() {
        for &p in PRESETS {
            assert_eq!(TimingModel::preset(p).unwrap().name, p);
        }
        assert!(TimingModel::preset("nope").is_err());
        assert_eq!(TimingModel::preset("hp-switch").unwrap().mib_period, 500 * MS);
    }

    #[test]
    fn refresh_instants() {
        let m = TimingModel::with_period(SEC);
        assert_eq!(m.refresh_at_or_before(5 * SEC + 300, 200), 5 * SEC + 200);
        assert_eq!(m.refresh_at_or_before(5 * SEC + 100, 200), 4 * SEC + 200);
        assert_eq!(m.refresh_at_or_before(100, 200), 0);
        assert_eq!(TimingModel::ideal().refresh_at_or_before(77, 0), 77);
    }
}
