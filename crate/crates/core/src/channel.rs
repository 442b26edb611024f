//! BPSK over AWGN: modulation, noise, and channel LLRs.
//!
//! Bit 0 maps to amplitude -1.0 and bit 1 to +1.0, so positive received
//! values (and positive LLRs) favor bit 1. Noise is Gaussian with standard
//! deviation `sigma`, drawn from a seeded ChaCha12 stream through the
//! `rand_distr` ziggurat sampler: the same `(input, sigma, seed)` always
//! reproduces the same output on a given platform. Worker ranks needing
//! independent noise derive sub-streams by stream index rather than by
//! reseeding.

use crate::codec::{LlrVector, LLR_CLAMP};
use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;
use rand_distr::{Distribution, Normal};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum ChannelError {
    #[error("noise standard deviation must be positive, got {sigma}")]
    NonPositiveSigma { sigma: f64 },
}

/// AWGN channel parameters: noise standard deviation and RNG seed.
#[derive(Clone, Copy, Debug)]
pub struct ChannelParams {
    sigma: f64,
    seed: u64,
}

impl ChannelParams {
    pub fn new(sigma: f64, seed: u64) -> Result<Self, ChannelError> {
        if !sigma.is_finite() || sigma <= 0.0 {
            return Err(ChannelError::NonPositiveSigma { sigma });
        }
        Ok(ChannelParams { sigma, seed })
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Independent generator for sub-stream `stream` of this seed. Stream 0
    /// is the one `awgn` uses.
    pub fn noise_rng(&self, stream: u64) -> ChaCha12Rng {
        let mut rng = ChaCha12Rng::seed_from_u64(self.seed);
        rng.set_stream(stream);
        rng
    }
}

/// BPSK map: 0 -> -1.0, 1 -> +1.0.
pub fn bpsk_modulate(bits: &[u8]) -> Vec<f64> {
    bits.iter().map(|&b| if b & 1 == 1 { 1.0 } else { -1.0 }).collect()
}

/// Adds Gaussian noise with variance `sigma^2` from the seeded stream.
pub fn awgn(x: &[f64], params: &ChannelParams) -> Vec<f64> {
    let mut rng = params.noise_rng(0);
    let normal = Normal::new(0.0, params.sigma).expect("sigma validated at construction");
    x.iter().map(|&xi| xi + normal.sample(&mut rng)).collect()
}

/// Channel LLR `R_v = 2 y_v / sigma^2`, clamped to the codec's LLR range.
pub fn channel_llr(y: &[f64], params: &ChannelParams) -> LlrVector {
    let scale = 2.0 / (params.sigma * params.sigma);
    LlrVector(y.iter().map(|&yi| (scale * yi).clamp(-LLR_CLAMP, LLR_CLAMP)).collect())
}

/// Noise standard deviation for a target `Eb/N0` in dB at code rate `rate`,
/// with unit-energy BPSK symbols: `sigma = sqrt(1 / (2 * rate * 10^(dB/10)))`.
pub fn sigma_from_ebn0_db(ebn0_db: f64, rate: f64) -> f64 {
    let ebn0 = 10f64.powf(ebn0_db / 10.0);
    (1.0 / (2.0 * rate * ebn0)).sqrt()
}
