//! AIQ estimation: simple Monte Carlo, adaptive stratified sampling and
//! common-random-numbers comparison, all over antithetic program pairs.

pub mod adaptive;
mod draw;
mod trial;

use std::collections::HashMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use adaptive::{run_adaptive, run_simple, warmup_per_stratum, AdaptiveRun};
pub use draw::{agent_seed, evaluate_draw, DiscardRecord, DrawOutcome, TrialConfig};
pub use trial::{run_pair, run_trial, Discard, EpisodeScore, PairScore, Scoring, TrialSeeds, DISCOUNT_RESIDUAL_CUTOFF};

use crate::agents::AgentSpec;
use crate::sampler::{StratumId, StratumTable};
use crate::seed::DrawKey;
use crate::stats::{MeanEstimate, StratumStats, Z95};
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EstimatorError {
    #[error("agent setup failed: {0}")]
    Agent(String),
    #[error("stratum {stratum} produced no accepted program within the attempt cap")]
    StratumExhausted { stratum: StratumId },
    #[error("draw {key:?} discarded {attempts} programs in a row")]
    TooManyDiscards { key: DrawKey, attempts: u32 },
    #[error("budget {budget} is below the {needed} draws the warm-up needs")]
    InsufficientBudget { budget: u64, needed: u64 },
    #[error("stratum position {stratum} ended with {n} samples; at least 2 are needed")]
    UnderSampled { stratum: usize, n: u64 },
    #[error("at least 2 samples are needed, got {0}")]
    TooFewSamples(u64),
    #[error("no strata to sample")]
    NoStrata,
    #[error("{0}")]
    Evaluator(String),
}

/// Per-stratum breakdown of a stratified estimate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StratumRow {
    pub id: StratumId,
    pub predicate: String,
    pub weight: f64,
    pub n: u64,
    pub mean: f64,
    pub sd: f64,
}

/// A point estimate of AIQ (or of an AIQ difference).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub mean: f64,
    pub stderr: f64,
    pub ci_halfwidth: f64,
    /// Completed pairs.
    pub n: u64,
    /// Pairs thrown away and redrawn.
    pub discards: u64,
    /// Raw programs rejected by screening.
    pub rejects: u64,
    pub strata: Vec<StratumRow>,
}

impl Estimate {
    fn new(est: MeanEstimate<f64>, n: u64) -> Self {
        Estimate {
            mean: est.mean,
            stderr: est.stderr,
            ci_halfwidth: Z95 * est.stderr,
            n,
            discards: 0,
            rejects: 0,
            strata: Vec::new(),
        }
    }

    fn from_stats(s: &StratumStats<f64>) -> Self {
        Self::new(
            MeanEstimate {
                mean: s.mean,
                stderr: s.stderr(),
            },
            s.n,
        )
    }

    fn with_counts(mut self, outcomes: &[DrawOutcome]) -> Self {
        self.discards = outcomes.iter().map(|o| o.discards.len() as u64).sum();
        self.rejects = outcomes.iter().map(|o| o.rejects).sum();
        self
    }

    pub fn as_mean_estimate(&self) -> MeanEstimate<f64> {
        MeanEstimate {
            mean: self.mean,
            stderr: self.stderr,
        }
    }

    pub fn interval(&self) -> (f64, f64) {
        (self.mean - self.ci_halfwidth, self.mean + self.ci_halfwidth)
    }

    /// True when both 95% intervals are disjoint and this one lies above.
    pub fn clearly_above(&self, other: &Estimate) -> bool {
        self.interval().0 > other.interval().1
    }
}

/// `b - a` on one shared program sample.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonResult {
    pub delta: Estimate,
    pub a: Estimate,
    pub b: Estimate,
    /// Per-draw `pair_mean(b) - pair_mean(a)`.
    pub diffs: Vec<f64>,
}

type BatchHook<'a> = Box<dyn FnMut(&[DrawOutcome]) -> Result<()> + Send + 'a>;

/// Evaluates draws for one experiment. Holds previously completed outcomes
/// (so a resumed run skips them) and an optional hook called after every
/// batch with that batch's new outcomes.
pub struct Session<'a> {
    pub master_seed: u64,
    pub agents: Vec<AgentSpec>,
    pub cfg: TrialConfig,
    cache: HashMap<DrawKey, DrawOutcome>,
    outcomes: Vec<DrawOutcome>,
    on_batch: Option<BatchHook<'a>>,
    batches: usize,
}

impl<'a> Session<'a> {
    pub fn new(master_seed: u64, agents: Vec<AgentSpec>, cfg: TrialConfig) -> Self {
        Session {
            master_seed,
            agents,
            cfg,
            cache: HashMap::new(),
            outcomes: Vec::new(),
            on_batch: None,
            batches: 0,
        }
    }

    /// Outcomes to reuse instead of re-evaluating their keys.
    pub fn with_completed(mut self, done: impl IntoIterator<Item = DrawOutcome>) -> Self {
        self.cache.extend(done.into_iter().map(|o| (o.key, o)));
        self
    }

    pub fn on_batch(mut self, hook: impl FnMut(&[DrawOutcome]) -> Result<()> + Send + 'a) -> Self {
        self.on_batch = Some(Box::new(hook));
        self
    }

    /// Every outcome so far, in evaluation order.
    pub fn outcomes(&self) -> &[DrawOutcome] {
        &self.outcomes
    }

    pub fn into_outcomes(self) -> Vec<DrawOutcome> {
        self.outcomes
    }

    pub fn batches(&self) -> usize {
        self.batches
    }

    /// Evaluates `keys` in parallel and returns their outcomes in key order.
    pub fn evaluate(&mut self, keys: &[DrawKey], table: Option<&StratumTable>) -> Result<Vec<DrawOutcome>> {
        for spec in &self.agents {
            spec.validate()?;
        }
        let (seed, agents, cfg, cache) = (self.master_seed, &self.agents, &self.cfg, &self.cache);
        let results: Vec<Result<(DrawOutcome, bool)>> =
            keys.par_iter()
                .map(|&key| {
                    if let Some(o) = cache.get(&key) {
                        return Ok((o.clone(), false));
                    }
                    let stratum = match table {
                        Some(t) => Some(t.strata.get(key.stratum as usize).ok_or_else(|| {
                            EstimatorError::Evaluator(format!("no stratum at position {}", key.stratum))
                        })?),
                        None => None,
                    };
                    Ok((evaluate_draw(key, seed, stratum, agents, cfg)?, true))
                })
                .collect();
        let mut batch = Vec::with_capacity(keys.len());
        let mut fresh = Vec::new();
        for r in results {
            let (o, new) = r?;
            if new {
                fresh.push(o.clone());
            }
            batch.push(o);
        }
        self.outcomes.extend(batch.iter().cloned());
        self.batches += 1;
        if let Some(hook) = self.on_batch.as_mut() {
            hook(&fresh)?;
        }
        Ok(batch)
    }

    /// Plain Monte Carlo over `n` pairs in batches of `batch`; one estimate
    /// per agent, all on the same draws.
    pub fn simple(&mut self, n: u64, batch: u64) -> Result<Vec<Estimate>> {
        let k = self.agents.len();
        let mut per_agent = vec![StratumStats::<f64>::new(); k];
        run_simple::<f64, _, Error>(n, batch, |keys| {
            let out = self.evaluate(keys, None)?;
            for o in &out {
                for (a, s) in per_agent.iter_mut().enumerate() {
                    s.push(o.pair_mean(a));
                }
            }
            Ok(out.iter().map(|o| o.pair_mean(0)).collect())
        })?;
        let outcomes = self.outcomes();
        Ok(per_agent
            .iter()
            .map(|s| Estimate::from_stats(s).with_counts(outcomes))
            .collect())
    }

    /// Adaptive stratified estimate for the first agent.
    pub fn stratified(&mut self, table: &StratumTable, budget: u64, batch: u64) -> Result<Estimate> {
        let weights = table.weights();
        let run = run_adaptive::<f64, _, Error>(&weights, budget, batch, |keys| {
            Ok(self
                .evaluate(keys, Some(table))?
                .iter()
                .map(|o| o.pair_mean(0))
                .collect())
        })?;
        let mut est = Estimate::new(run.estimate, run.total_draws()).with_counts(self.outcomes());
        est.strata = table
            .strata
            .iter()
            .zip(&run.stats)
            .map(|(s, st)| StratumRow {
                id: s.id,
                predicate: s.predicate(),
                weight: s.mass,
                n: st.n,
                mean: st.mean,
                sd: st.sd(),
            })
            .collect();
        Ok(est)
    }

    /// CRN comparison of agents 0 (a) and 1 (b) over `n` shared pairs.
    pub fn compare(&mut self, n: u64, batch: u64) -> Result<ComparisonResult> {
        if self.agents.len() != 2 {
            return Err(EstimatorError::Evaluator("comparison needs exactly two agents".into()).into());
        }
        let ests = self.simple(n, batch)?;
        let diffs: Vec<f64> = self.outcomes.iter().map(|o| o.pair_mean(1) - o.pair_mean(0)).collect();
        let delta =
            Estimate::from_stats(&StratumStats::from_values(diffs.iter().copied())).with_counts(self.outcomes());
        let mut it = ests.into_iter();
        let (a, b) = (it.next().unwrap(), it.next().unwrap());
        Ok(ComparisonResult { delta, a, b, diffs })
    }
}

/// AIQ of `agent` by plain Monte Carlo over `n` antithetic pairs.
pub fn simple_mc(agent: &AgentSpec, n: u64, master_seed: u64, cfg: &TrialConfig) -> Result<Estimate> {
    let mut s = Session::new(master_seed, vec![agent.clone()], cfg.clone());
    Ok(s.simple(n, DEFAULT_BATCH)?.remove(0))
}

/// AIQ of `agent` by adaptive stratified sampling with `budget` pairs.
pub fn adaptive_stratified(
    agent: &AgentSpec,
    table: &StratumTable,
    budget: u64,
    batch: u64,
    master_seed: u64,
    cfg: &TrialConfig,
) -> Result<Estimate> {
    Session::new(master_seed, vec![agent.clone()], cfg.clone()).stratified(table, budget, batch)
}

/// `AIQ(b) - AIQ(a)` on one shared sample of `n` pairs.
pub fn compare_crn(
    a: &AgentSpec,
    b: &AgentSpec,
    n: u64,
    master_seed: u64,
    cfg: &TrialConfig,
) -> Result<ComparisonResult> {
    Session::new(master_seed, vec![a.clone(), b.clone()], cfg.clone()).compare(n, DEFAULT_BATCH)
}

/// Draws per batch when the caller does not choose.
pub const DEFAULT_BATCH: u64 = 200;
