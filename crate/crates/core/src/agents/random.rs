use rand::Rng;

use super::{Agent, AgentError, Percept};
use crate::seed::{stream, StreamRng};

/// Uniformly random actions, independent of every percept.
pub struct RandomAgent {
    rng: StreamRng,
    num_symbols: u32,
}

impl RandomAgent {
    pub fn new() -> Self {
        RandomAgent {
            rng: stream(0),
            num_symbols: 2,
        }
    }
}

impl Default for RandomAgent {
    fn default() -> Self {
        Self::new()
    }
}

impl Agent for RandomAgent {
    fn reset(&mut self, num_symbols: u32, _obs_cells: usize, seed: u64) -> Result<(), AgentError> {
        self.rng = stream(seed);
        self.num_symbols = num_symbols;
        Ok(())
    }

    fn act(&mut self, _percept: Option<&Percept>) -> Result<u8, AgentError> {
        Ok(self.rng.random_range(0..self.num_symbols) as u8)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use smallvec::smallvec;

    #[test]
    fn uniform_frequencies() {
        let mut a = RandomAgent::new();
        a.reset(5, 1, 17).unwrap();
        let n = 100_000;
        let mut counts = [0usize; 5];
        for _ in 0..n {
            counts[a.act(None).unwrap() as usize] += 1;
        }
        for c in counts {
            assert!((c as f64 / n as f64 - 0.2).abs() < 0.01, "{counts:?}");
        }
    }

    #[test]
    fn actions_ignore_reward_sign() {
        let run = |sign: f64| {
            let mut a = RandomAgent::new();
            a.reset(5, 1, 3).unwrap();
            let mut out = vec![a.act(None).unwrap()];
            for t in 0..200 {
                let p = Percept {
                    reward: sign * (t as f64 - 100.0),
                    observation: smallvec![t as u8 % 5],
                };
                out.push(a.act(Some(&p)).unwrap());
            }
            out
        };
        assert_eq!(run(1.0), run(-1.0));
    }
}
