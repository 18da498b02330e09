//! Counter-based seed derivation.
//!
//! Every random stream in an experiment is keyed by its coordinates (master
//! seed, stratum, draw index, attempt, role) rather than by the order in which
//! workers happen to pick up tasks.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

pub type StreamRng = ChaCha8Rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u64)]
pub enum Role {
    Program = 1,
    Env = 2,
    Agent = 3,
    AgentB = 4,
}

#[inline]
fn splitmix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Folds `parts` into `master`. Stable across platforms and releases.
pub fn derive(master: u64, parts: &[u64]) -> u64 {
    parts
        .iter()
        .fold(splitmix(master), |acc, &p| splitmix(acc ^ splitmix(p).rotate_left(29)))
}

pub fn stream(seed: u64) -> StreamRng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Address of one draw: stratum position (0 for unstratified sampling) and the
/// draw's index within it.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct DrawKey {
    pub stratum: u32,
    pub index: u64,
}

impl DrawKey {
    pub fn new(stratum: u32, index: u64) -> Self {
        DrawKey { stratum, index }
    }

    pub fn program_seed(&self, master: u64) -> u64 {
        derive(master, &[Role::Program as u64, u64::from(self.stratum), self.index])
    }

    /// Seed for `role` on the `attempt`-th program tried for this draw. The
    /// negation variant is deliberately not an input: both halves of an
    /// antithetic pair share their streams.
    pub fn trial_seed(&self, master: u64, attempt: u32, role: Role) -> u64 {
        derive(
            master,
            &[role as u64, u64::from(self.stratum), self.index, u64::from(attempt)],
        )
    }
}
