//! Evaluation of one sample-space draw: pick a program (optionally inside a
//! stratum), run every agent's antithetic pair on it, and resample on discard.

use serde::{Deserialize, Serialize};

use super::trial::{run_pair, Scoring, TrialSeeds};
use super::EstimatorError;
use crate::agents::AgentSpec;
use crate::machine::{MachineConfig, Program};
use crate::sampler::{dry_run, sample_program, screen_static, ScreenConfig, Stratum, StratumId};
use crate::seed::{derive, stream, DrawKey, Role};

/// Everything a trial needs besides the agent and the program.
#[derive(Debug, Clone, PartialEq)]
pub struct TrialConfig {
    pub machine: MachineConfig,
    pub screen: ScreenConfig,
    pub episodes: u64,
    pub scoring: Scoring,
    /// Programs tried per draw before giving up.
    pub max_attempts: u32,
    /// Raw programs tried per program before giving up on a stratum.
    pub max_program_attempts: u64,
}

impl Default for TrialConfig {
    fn default() -> Self {
        TrialConfig {
            machine: MachineConfig::default(),
            screen: ScreenConfig::default(),
            episodes: 1000,
            scoring: Scoring::Mean,
            max_attempts: 1000,
            max_program_attempts: 50_000_000,
        }
    }
}

impl TrialConfig {
    pub fn with_episodes(mut self, episodes: u64) -> Self {
        self.episodes = episodes;
        self
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiscardRecord {
    pub program: String,
    pub status: String,
}

/// Result of one draw. `scores[a]` is agent `a`'s `(score0, score1)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DrawOutcome {
    pub key: DrawKey,
    pub stratum: Option<StratumId>,
    pub program: String,
    pub scores: Vec<(f64, f64)>,
    pub discards: Vec<DiscardRecord>,
    /// Raw programs drawn and rejected before one was accepted.
    pub rejects: u64,
}

impl DrawOutcome {
    pub fn pair_mean(&self, agent: usize) -> f64 {
        let (a, b) = self.scores[agent];
        (a + b) / 2.0
    }

    /// Program length after simplification.
    pub fn program_len(&self) -> usize {
        self.program.chars().count()
    }
}

fn next_program<R: rand::Rng>(
    rng: &mut R,
    stratum: Option<&Stratum>,
    cfg: &TrialConfig,
    rejects: &mut u64,
) -> Option<Program> {
    for _ in 0..cfg.max_program_attempts {
        let raw = sample_program(rng, &cfg.machine);
        let ok = screen_static(&raw)
            .ok()
            .filter(|p| stratum.is_none_or(|s| s.contains(&p.code, &cfg.machine)))
            .filter(|p| !cfg.screen.dry_run || dry_run(p, cfg.screen.dry_run_cycles, rng, &cfg.machine));
        match ok {
            Some(p) => return Some(p),
            None => *rejects += 1,
        }
    }
    None
}

/// Agent seed for `spec` given the draw's shared agent seed.
pub fn agent_seed(spec: &AgentSpec, shared: u64) -> u64 {
    if spec.seed == 0 {
        shared
    } else {
        derive(shared, &[spec.seed])
    }
}

/// Evaluates draw `key`. Programs come from the draw's own stream; every
/// attempt after a discard gets fresh environment and agent seeds, shared
/// by all agents so comparisons stay paired.
pub fn evaluate_draw(
    key: DrawKey,
    master_seed: u64,
    stratum: Option<&Stratum>,
    agents: &[AgentSpec],
    cfg: &TrialConfig,
) -> Result<DrawOutcome, EstimatorError> {
    let mut built = agents
        .iter()
        .map(|s| s.build().map_err(|e| EstimatorError::Agent(e.to_string())))
        .collect::<Result<Vec<_>, _>>()?;
    let mut rng = stream(key.program_seed(master_seed));
    let mut discards = Vec::new();
    let mut rejects = 0u64;
    'attempts: for attempt in 0..cfg.max_attempts {
        let program = next_program(&mut rng, stratum, cfg, &mut rejects).ok_or(EstimatorError::StratumExhausted {
            stratum: stratum.map_or(0, |s| s.id),
        })?;
        let shared_agent = key.trial_seed(master_seed, attempt, Role::Agent);
        let env = key.trial_seed(master_seed, attempt, Role::Env);
        let mut scores = Vec::with_capacity(agents.len());
        for (spec, agent) in agents.iter().zip(built.iter_mut()) {
            let seeds = TrialSeeds {
                env,
                agent: agent_seed(spec, shared_agent),
            };
            match run_pair(agent.as_mut(), &program, cfg.episodes, seeds, &cfg.machine, cfg.scoring) {
                Ok(p) => scores.push((p.score0, p.score1)),
                Err(d) => {
                    discards.push(DiscardRecord {
                        program: program.code.to_string(),
                        status: d.status().to_string(),
                    });
                    continue 'attempts;
                }
            }
        }
        return Ok(DrawOutcome {
            key,
            stratum: stratum.map(|s| s.id),
            program: program.code.to_string(),
            scores,
            discards,
            rejects,
        });
    }
    Err(EstimatorError::TooManyDiscards {
        key,
        attempts: cfg.max_attempts,
    })
}
