use serde::{Deserialize, Serialize};

use crate::agents::{Agent, AgentError, Percept};
use crate::machine::{CycleOutcome, Environment, MachineConfig, Program};
use crate::seed::stream;

/// Per-cycle scoring of a trial.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
pub enum Scoring {
    /// Mean reward over the `T` cycles.
    #[default]
    Mean,
    /// `(1 - gamma) * sum gamma^(t-1) r_t`, stopping early once the bound on
    /// the remaining reward `100 gamma^t / (1 - gamma)` drops below 0.5.
    Discounted(f64),
}

impl Scoring {
    pub fn discount(&self) -> Option<f64> {
        match self {
            Scoring::Mean => None,
            Scoring::Discounted(g) => Some(*g),
        }
    }
}

pub const DISCOUNT_RESIDUAL_CUTOFF: f64 = 0.5;

#[derive(Debug, Clone, PartialEq)]
pub struct EpisodeScore {
    pub value: f64,
    /// Cycles actually simulated.
    pub cycles: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Discard {
    StepLimitExceeded,
    Agent(AgentError),
}

impl Discard {
    pub fn status(&self) -> &'static str {
        match self {
            Discard::StepLimitExceeded => "step_limit",
            Discard::Agent(e) => e.status(),
        }
    }
}

impl From<AgentError> for Discard {
    fn from(e: AgentError) -> Self {
        Discard::Agent(e)
    }
}

/// Seeds of one trial: the environment's `%` stream and the agent's reset seed.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TrialSeeds {
    pub env: u64,
    pub agent: u64,
}

/// Runs `episodes` cycles of agent against `program`.
pub fn run_trial(
    agent: &mut dyn Agent,
    program: &Program,
    episodes: u64,
    seeds: TrialSeeds,
    machine: &MachineConfig,
    scoring: Scoring,
) -> Result<EpisodeScore, Discard> {
    agent.reset(machine.num_symbols, machine.obs_cells, seeds.agent)?;
    let mut env = Environment::new(program, machine, stream(seeds.env));
    let mut percept: Option<Percept> = None;
    let mut total = 0.0;
    let mut weight = 1.0;
    let mut cycles = 0u64;
    let discount = scoring.discount();
    while cycles < episodes {
        let action = agent.act(percept.as_ref())?;
        let p = match env.step(action) {
            CycleOutcome::Percept(p) => p,
            CycleOutcome::StepLimitExceeded => return Err(Discard::StepLimitExceeded),
        };
        cycles += 1;
        match discount {
            None => total += p.reward,
            Some(g) => {
                total += weight * p.reward;
                weight *= g;
                // weight is now g^t
                if 100.0 * weight / (1.0 - g) < DISCOUNT_RESIDUAL_CUTOFF {
                    break;
                }
            }
        }
        percept = Some(Percept {
            reward: p.reward,
            observation: p.observation,
        });
    }
    agent.end_trial()?;
    let value = match discount {
        None => total / episodes as f64,
        Some(g) => (1.0 - g) * total,
    };
    Ok(EpisodeScore { value, cycles })
}

/// Scores of one program run with the negation bit off and on.
#[derive(Debug, Clone, PartialEq)]
pub struct PairScore {
    pub program: Program,
    pub score0: f64,
    pub score1: f64,
}

impl PairScore {
    /// The antithetic estimate `(score0 + score1) / 2`.
    pub fn mean(&self) -> f64 {
        (self.score0 + self.score1) / 2.0
    }
}

/// Runs both negation variants of `program` under identical seeds. Either
/// variant discarding discards the pair.
pub fn run_pair(
    agent: &mut dyn Agent,
    program: &Program,
    episodes: u64,
    seeds: TrialSeeds,
    machine: &MachineConfig,
    scoring: Scoring,
) -> Result<PairScore, Discard> {
    let plain = program.with_negate(false);
    let negated = program.with_negate(true);
    let s0 = run_trial(agent, &plain, episodes, seeds, machine, scoring)?;
    let s1 = run_trial(agent, &negated, episodes, seeds, machine, scoring)?;
    Ok(PairScore {
        program: plain,
        score0: s0.value,
        score1: s1.value,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::agents::{AgentSpec, FreqAgent, RandomAgent};

    fn prog(s: &str) -> Program {
        s.parse().unwrap()
    }

    const SEEDS: TrialSeeds = TrialSeeds { env: 11, agent: 12 };

    #[test]
    fn random_on_echo_env_scores_near_zero() {
        let cfg = MachineConfig::default();
        let mut agent = RandomAgent::new();
        let s = run_trial(&mut agent, &prog(",."), 10_000, SEEDS, &cfg, Scoring::Mean).unwrap();
        assert!(s.value.abs() < 2.0, "{}", s.value);
        assert_eq!(s.cycles, 10_000);
    }

    #[test]
    fn freq_on_echo_env_finds_the_top_action() {
        let cfg = MachineConfig::default();
        let mut agent = FreqAgent::new(0.05);
        let s = run_trial(&mut agent, &prog(",."), 10_000, SEEDS, &cfg, Scoring::Mean).unwrap();
        assert!((85.0..=100.0).contains(&s.value), "{}", s.value);
        // negated: the best action is 0, same payoff
        let s = run_trial(&mut agent, &prog("!,."), 10_000, SEEDS, &cfg, Scoring::Mean).unwrap();
        assert!((85.0..=100.0).contains(&s.value), "{}", s.value);
    }

    #[test]
    fn timeout_discards() {
        let cfg = MachineConfig::default();
        let mut agent = RandomAgent::new();
        let r = run_trial(&mut agent, &prog(",.+[]"), 100, SEEDS, &cfg, Scoring::Mean);
        assert_eq!(r, Err(Discard::StepLimitExceeded));
        let r = run_pair(&mut agent, &prog(",.+[]"), 100, SEEDS, &cfg, Scoring::Mean);
        assert_eq!(r.unwrap_err().status(), "step_limit");
    }

    #[test]
    fn random_pair_cancels_exactly() {
        let cfg = MachineConfig::default();
        let mut agent = AgentSpec::random().build().unwrap();
        for code in [",.", ",>%.<.", "%,[>.+<-],.", ",+.,,..", ">,%+.[-<]"] {
            let p = run_pair(agent.as_mut(), &prog(code), 500, SEEDS, &cfg, Scoring::Mean).unwrap();
            assert_eq!(p.score0, -p.score1, "{code}");
            assert_eq!(p.mean(), 0.0);
        }
    }

    #[test]
    fn freq_adapts_to_both_variants() {
        let cfg = MachineConfig::default();
        let mut agent = FreqAgent::new(0.05);
        let p = run_pair(&mut agent, &prog(",."), 10_000, SEEDS, &cfg, Scoring::Mean).unwrap();
        assert!(p.score0 > 85.0 && p.score1 > 85.0, "{p:?}");
    }

    #[test]
    fn discounted_scoring_stops_early() {
        let cfg = MachineConfig::default();
        let mut agent = FreqAgent::new(0.0);
        // constant reward +100: discounted score is 100 * (1 - g^t)
        let g: f64 = 0.9;
        let s = run_trial(
            &mut agent,
            &prog(",[-]-."),
            100_000,
            SEEDS,
            &cfg,
            Scoring::Discounted(g),
        )
        .unwrap();
        let t = s.cycles as f64;
        assert!(100.0 * g.powf(t) / (1.0 - g) < 0.5);
        assert!(100.0 * g.powf(t - 1.0) / (1.0 - g) >= 0.5);
        assert!((s.value - 100.0 * (1.0 - g.powf(t))).abs() < 1e-9);
    }
}
