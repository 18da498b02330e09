use rand::Rng;

use super::{argmax_uniform, Agent, AgentError, Percept};
use crate::seed::{stream, StreamRng};

/// Watkins Q(lambda) over a table indexed by (last observation, action).
///
/// Actions are epsilon-greedy. Eligibility traces accumulate, decay by
/// `gamma * lambda` after greedy actions, and are cleared after exploratory
/// ones. With `lambda = 0` this is one-step Q-learning.
pub struct QTabAgent {
    alpha: f64,
    gamma: f64,
    lambda: f64,
    epsilon: f64,
    num_actions: usize,
    num_symbols: usize,
    q: Vec<f64>,
    traces: Vec<f64>,
    /// Indices with a non-zero trace, in first-touched order.
    traced: Vec<usize>,
    state: usize,
    last_action: usize,
    rng: StreamRng,
}

impl QTabAgent {
    /// alpha, gamma, lambda, epsilon
    pub const DEFAULTS: (f64, f64, f64, f64) = (0.5, 0.8, 0.8, 0.02);

    pub fn new(alpha: f64, gamma: f64, lambda: f64, epsilon: f64) -> Self {
        QTabAgent {
            alpha,
            gamma,
            lambda,
            epsilon,
            num_actions: 0,
            num_symbols: 0,
            q: Vec::new(),
            traces: Vec::new(),
            traced: Vec::new(),
            state: 0,
            last_action: 0,
            rng: stream(0),
        }
    }

    pub fn q_values(&self) -> &[f64] {
        &self.q
    }

    fn encode(&self, observation: &[u8]) -> usize {
        observation
            .iter()
            .fold(0usize, |acc, &o| acc * self.num_symbols + o as usize)
    }

    /// Epsilon-greedy choice in `state`; the flag is true when the choice is
    /// one of the greedy actions.
    fn choose(&mut self, state: usize) -> (usize, bool) {
        let row = &self.q[state * self.num_actions..(state + 1) * self.num_actions];
        if self.epsilon > 0.0 && self.rng.random_bool(self.epsilon) {
            let a = self.rng.random_range(0..self.num_actions);
            let best = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            (a, row[a] == best)
        } else {
            (argmax_uniform(row, &mut self.rng), true)
        }
    }
}

impl Agent for QTabAgent {
    fn reset(&mut self, num_symbols: u32, obs_cells: usize, seed: u64) -> Result<(), AgentError> {
        self.num_symbols = num_symbols as usize;
        self.num_actions = num_symbols as usize;
        let states = self.num_symbols.pow(obs_cells as u32);
        self.q = vec![0.0; states * self.num_actions];
        self.traces = vec![0.0; states * self.num_actions];
        self.traced.clear();
        self.state = 0;
        self.last_action = 0;
        self.rng = stream(seed);
        Ok(())
    }

    fn act(&mut self, percept: Option<&Percept>) -> Result<u8, AgentError> {
        let Some(p) = percept else {
            // first cycle: the all-zero observation stands in for a state
            self.state = 0;
            let (a, _) = self.choose(0);
            self.last_action = a;
            return Ok(a as u8);
        };
        let next_state = self.encode(&p.observation);
        let (next_action, greedy) = self.choose(next_state);
        let n = self.num_actions;
        let best_next = self.q[next_state * n..(next_state + 1) * n]
            .iter()
            .copied()
            .fold(f64::NEG_INFINITY, f64::max);
        let idx = self.state * n + self.last_action;
        let delta = p.reward + self.gamma * best_next - self.q[idx];
        if self.traces[idx] == 0.0 {
            self.traced.push(idx);
        }
        self.traces[idx] += 1.0;

        let decay = self.gamma * self.lambda;
        let keep = greedy && decay > 0.0;
        let step = self.alpha * delta;
        for &i in &self.traced {
            self.q[i] += step * self.traces[i];
            self.traces[i] = if keep { self.traces[i] * decay } else { 0.0 };
        }
        if keep {
            let traces = &mut self.traces;
            self.traced.retain(|&i| {
                if traces[i] > 1e-12 {
                    true
                } else {
                    traces[i] = 0.0;
                    false
                }
            });
        } else {
            self.traced.clear();
        }

        self.state = next_state;
        self.last_action = next_action;
        Ok(next_action as u8)
    }
}
