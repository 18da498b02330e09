use rand::Rng;

use super::{argmax_uniform, Agent, AgentError, Percept};
use crate::seed::{stream, StreamRng};

/// Tracks the mean reward of each action and plays the best one, except for
/// a fixed fraction `epsilon` of cycles where it acts uniformly at random.
/// Observations are ignored.
pub struct FreqAgent {
    epsilon: f64,
    means: Vec<f64>,
    counts: Vec<u64>,
    last_action: Option<u8>,
    rng: StreamRng,
}

impl FreqAgent {
    pub const DEFAULT_EPSILON: f64 = 0.05;

    pub fn new(epsilon: f64) -> Self {
        FreqAgent {
            epsilon,
            means: Vec::new(),
            counts: Vec::new(),
            last_action: None,
            rng: stream(0),
        }
    }

    pub fn means(&self) -> &[f64] {
        &self.means
    }

    pub fn counts(&self) -> &[u64] {
        &self.counts
    }
}

impl Agent for FreqAgent {
    fn reset(&mut self, num_symbols: u32, _obs_cells: usize, seed: u64) -> Result<(), AgentError> {
        self.means = vec![0.0; num_symbols as usize];
        self.counts = vec![0; num_symbols as usize];
        self.last_action = None;
        self.rng = stream(seed);
        Ok(())
    }

    fn act(&mut self, percept: Option<&Percept>) -> Result<u8, AgentError> {
        if let (Some(p), Some(a)) = (percept, self.last_action) {
            let a = a as usize;
            self.counts[a] += 1;
            self.means[a] += (p.reward - self.means[a]) / self.counts[a] as f64;
        }
        let action = if self.epsilon > 0.0 && self.rng.random_bool(self.epsilon) {
            self.rng.random_range(0..self.means.len())
        } else {
            argmax_uniform(&self.means, &mut self.rng)
        };
        self.last_action = Some(action as u8);
        Ok(action as u8)
    }
}
