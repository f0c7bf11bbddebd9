//! Ground-truth traffic matrices.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::topology::FlowId;

/// Default lower and upper generated rate, 1 and 100 Mbit/s.
pub const DEFAULT_RATE_RANGE: (f64, f64) = (1e6, 100e6);

#[derive(Debug, Clone, Copy, PartialEq, Error)]
#[error("invalid rate range [{lo}, {hi}]")]
pub struct RateRangeError {
    pub lo: f64,
    pub hi: f64,
}

/// How a generated matrix was drawn.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Generation {
    pub lo: f64,
    pub hi: f64,
    pub seed: u64,
}

/// Rate per flow in bit/s, indexed by flow id.
#[derive(Debug, Clone, PartialEq)]
pub struct TrafficMatrix {
    rates: Vec<f64>,
    generation: Option<Generation>,
}

impl TrafficMatrix {
    pub fn from_rates(rates: Vec<f64>) -> Self {
        assert!(
            rates.iter().all(|r| r.is_finite() && *r >= 0.0),
            "rates must be finite and non-negative"
        );
        Self {
            rates,
            generation: None,
        }
    }

    pub fn len(&self) -> usize {
        self.rates.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rates.is_empty()
    }

    pub fn rate(&self, f: FlowId) -> f64 {
        self.rates[f.0]
    }

    pub fn rates(&self) -> &[f64] {
        &self.rates
    }

    pub fn generation(&self) -> Option<Generation> {
        self.generation
    }
}

/// Draws `flows` rates uniformly from `[lo, hi]`, reproducibly for a seed.
pub fn gen_traffic(flows: usize, lo: f64, hi: f64, seed: u64) -> Result<TrafficMatrix, RateRangeError> {
    if !(lo.is_finite() && hi.is_finite() && 0.0 <= lo && lo <= hi) {
        return Err(RateRangeError { lo, hi });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let rates = (0..flows)
        .map(|_| if lo == hi { lo } else { rng.gen_range(lo..=hi) })
        .collect();
    Ok(TrafficMatrix {
        rates,
        generation: Some(Generation { lo, hi, seed }),
    })
}
