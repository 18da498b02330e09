//! Sampling loops, independent of what a draw evaluates to.
//!
//! Both loops hand batches of [`DrawKey`]s to an evaluator and fold the
//! returned values into per-stratum statistics in key order, so the result
//! depends only on the keys, never on how a batch was scheduled.

use num_traits::Float;

use super::EstimatorError;
use crate::seed::DrawKey;
use crate::stats::{allocate, stratified, MeanEstimate, StratumStats, MIN_ALLOC_SD};

/// Warm-up draws per stratum: at least 10 each, and at least a tenth of the
/// budget overall.
pub fn warmup_per_stratum(strata: usize, budget: u64) -> u64 {
    let k = strata as u64;
    let total = (10 * k).max(budget.div_ceil(10));
    total.div_ceil(k)
}

#[derive(Debug, Clone, PartialEq)]
pub struct AdaptiveRun<F> {
    pub stats: Vec<StratumStats<F>>,
    /// Draws given to each stratum in each round, warm-up first.
    pub rounds: Vec<Vec<u64>>,
    pub estimate: MeanEstimate<F>,
}

impl<F: Float> AdaptiveRun<F> {
    pub fn total_draws(&self) -> u64 {
        self.stats.iter().map(|s| s.n).sum()
    }

    /// Share of all draws that went to each stratum.
    pub fn allocation_fractions(&self) -> Vec<f64> {
        let total = self.total_draws() as f64;
        self.stats.iter().map(|s| s.n as f64 / total).collect()
    }
}

fn keys_for(alloc: &[u64], next: &mut [u64]) -> Vec<DrawKey> {
    let mut keys = Vec::with_capacity(alloc.iter().sum::<u64>() as usize);
    for (pos, (&a, n)) in alloc.iter().zip(next.iter_mut()).enumerate() {
        keys.extend((*n..*n + a).map(|i| DrawKey::new(pos as u32, i)));
        *n += a;
    }
    keys
}

fn absorb<F: Float>(stats: &mut [StratumStats<F>], keys: &[DrawKey], values: &[F]) -> Result<(), EstimatorError> {
    if keys.len() != values.len() {
        return Err(EstimatorError::Evaluator(format!(
            "evaluator returned {} values for {} keys",
            values.len(),
            keys.len()
        )));
    }
    for (k, &v) in keys.iter().zip(values) {
        stats[k.stratum as usize].push(v);
    }
    Ok(())
}

/// Adaptive stratified sampling with `budget` draws in total.
///
/// A uniform warm-up round is followed by rounds of `batch` draws, each split
/// across strata in proportion to `w_i * max(sd_i, 1e-6)` with at least one
/// draw per stratum. The estimate is `sum w_i mean_i` with standard error
/// `sqrt(sum w_i^2 s_i^2 / n_i)`.
pub fn run_adaptive<F, E, Err>(weights: &[F], budget: u64, batch: u64, mut eval: E) -> Result<AdaptiveRun<F>, Err>
where
    F: Float,
    E: FnMut(&[DrawKey]) -> Result<Vec<F>, Err>,
    Err: From<EstimatorError>,
{
    let k = weights.len();
    if k == 0 {
        return Err(EstimatorError::NoStrata.into());
    }
    if batch == 0 {
        return Err(EstimatorError::InsufficientBudget { budget, needed: 1 }.into());
    }
    let warm = warmup_per_stratum(k, budget);
    let needed = (warm * k as u64).max(2 * k as u64);
    if budget < needed {
        return Err(EstimatorError::InsufficientBudget { budget, needed }.into());
    }
    let mut stats = vec![StratumStats::<F>::new(); k];
    let mut next = vec![0u64; k];
    let mut rounds = Vec::new();

    let alloc = vec![warm; k];
    let keys = keys_for(&alloc, &mut next);
    let values = eval(&keys)?;
    absorb(&mut stats, &keys, &values)?;
    rounds.push(alloc);
    let mut used = warm * k as u64;

    let floor = F::from(MIN_ALLOC_SD).unwrap();
    while used < budget {
        let size = batch.min(budget - used);
        let scores: Vec<F> = weights
            .iter()
            .zip(&stats)
            .map(|(&w, s)| w * s.sd().max(floor))
            .collect();
        let alloc = allocate(&scores, size);
        let keys = keys_for(&alloc, &mut next);
        let values = eval(&keys)?;
        absorb(&mut stats, &keys, &values)?;
        used += alloc.iter().sum::<u64>();
        rounds.push(alloc);
    }

    if let Some((pos, s)) = stats.iter().enumerate().find(|(_, s)| s.n < 2) {
        return Err(EstimatorError::UnderSampled { stratum: pos, n: s.n }.into());
    }
    let estimate = stratified(weights, &stats);
    Ok(AdaptiveRun {
        stats,
        rounds,
        estimate,
    })
}

/// Plain Monte Carlo over `n` draws of stratum position 0, in batches.
pub fn run_simple<F, E, Err>(n: u64, batch: u64, mut eval: E) -> Result<(StratumStats<F>, MeanEstimate<F>), Err>
where
    F: Float,
    E: FnMut(&[DrawKey]) -> Result<Vec<F>, Err>,
    Err: From<EstimatorError>,
{
    if n < 2 {
        return Err(EstimatorError::TooFewSamples(n).into());
    }
    let batch = batch.max(1);
    let mut stats = [StratumStats::<F>::new()];
    let mut start = 0u64;
    while start < n {
        let end = (start + batch).min(n);
        let keys: Vec<DrawKey> = (start..end).map(|i| DrawKey::new(0, i)).collect();
        let values = eval(&keys)?;
        absorb(&mut stats, &keys, &values)?;
        start = end;
    }
    let s = stats[0];
    Ok((
        s,
        MeanEstimate {
            mean: s.mean,
            stderr: s.stderr(),
        },
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::seed::{derive, stream};
    use rand::Rng;
    use rand_distr_free::standard_normal;

    /// Box-Muller, kept local so the oracle does not share code with the
    /// estimator under test.
    mod rand_distr_free {
        use rand::Rng;
        pub fn standard_normal<R: Rng>(rng: &mut R) -> f64 {
            let u1: f64 = 1.0 - rng.random::<f64>();
            let u2: f64 = rng.random();
            (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos()
        }
    }

    struct Synthetic {
        weights: Vec<f64>,
        means: Vec<f64>,
        sds: Vec<f64>,
    }

    impl Synthetic {
        fn truth(&self) -> f64 {
            self.weights.iter().zip(&self.means).map(|(w, m)| w * m).sum()
        }

        fn eval(&self, seed: u64) -> impl FnMut(&[DrawKey]) -> Result<Vec<f64>, EstimatorError> + '_ {
            move |keys| {
                Ok(keys
                    .iter()
                    .map(|k| {
                        let mut rng = stream(derive(seed, &[u64::from(k.stratum), k.index]));
                        let p = k.stratum as usize;
                        self.means[p] + self.sds[p] * standard_normal(&mut rng)
                    })
                    .collect())
            }
        }
    }

    fn example() -> Synthetic {
        Synthetic {
            weights: vec![0.5, 0.3, 0.2],
            means: vec![10.0, -20.0, 50.0],
            sds: vec![1.0, 10.0, 20.0],
        }
    }

    #[test]
    fn warmup_sizes() {
        assert_eq!(warmup_per_stratum(20, 2000), 10);
        assert_eq!(warmup_per_stratum(3, 10_000), 334);
        assert_eq!(warmup_per_stratum(1, 50), 10);
    }

    #[test]
    fn budget_is_spent_exactly() {
        let s = example();
        for (budget, batch) in [(100, 7), (1000, 100), (1001, 1000), (60, 1)] {
            let run = run_adaptive(&s.weights, budget, batch, s.eval(1)).unwrap();
            assert_eq!(run.total_draws(), budget);
            assert_eq!(run.rounds.iter().flatten().sum::<u64>(), budget);
        }
    }

    #[test]
    fn allocation_approaches_optimal_fractions() {
        // optimal n_i ∝ w_i s_i: 0.5, 3, 4 over 7.5
        let s = example();
        let run = run_adaptive(&s.weights, 20_000, 500, s.eval(3)).unwrap();
        let denom: f64 = s.weights.iter().zip(&s.sds).map(|(w, sd)| w * sd).sum();
        for (i, frac) in run.allocation_fractions().iter().enumerate() {
            let opt = s.weights[i] * s.sds[i] / denom;
            assert!((frac - opt).abs() < 0.05, "stratum {i}: {frac} vs {opt}");
        }
    }

    #[test]
    fn single_stratum_matches_simple() {
        let s = Synthetic {
            weights: vec![1.0],
            means: vec![3.0],
            sds: vec![2.0],
        };
        let strat = run_adaptive(&s.weights, 500, 37, s.eval(8)).unwrap();
        let (stats, simple) = run_simple(500, 64, s.eval(8)).unwrap();
        assert_eq!(strat.stats[0], stats);
        assert_eq!(strat.estimate, simple);
    }

    #[test]
    fn too_small_budget_fails() {
        let s = example();
        let r = run_adaptive(&s.weights, 20, 5, s.eval(1));
        assert!(matches!(r, Err(EstimatorError::InsufficientBudget { needed: 30, .. })));
        let r = run_simple::<f64, _, EstimatorError>(1, 5, |k| Ok(vec![0.0; k.len()]));
        assert!(matches!(r, Err(EstimatorError::TooFewSamples(1))));
    }

    #[test]
    fn doubling_budget_shrinks_stderr_by_root_two() {
        let s = example();
        let mean_se = |budget: u64| {
            let reps = 40;
            (0..reps)
                .map(|r| {
                    run_adaptive(&s.weights, budget, 200, s.eval(100 + r))
                        .unwrap()
                        .estimate
                        .stderr
                })
                .sum::<f64>()
                / reps as f64
        };
        let ratio = mean_se(2000) / mean_se(4000);
        assert!((ratio - 2f64.sqrt()).abs() < 0.05 * 2f64.sqrt(), "{ratio}");
    }

    #[test]
    fn unbiased_on_average() {
        let s = example();
        let reps = 300;
        let ests: Vec<f64> = (0..reps)
            .map(|r| {
                run_adaptive(&s.weights, 300, 50, s.eval(1000 + r))
                    .unwrap()
                    .estimate
                    .mean
            })
            .collect();
        let mean = ests.iter().sum::<f64>() / reps as f64;
        let sd = (ests.iter().map(|e| (e - mean).powi(2)).sum::<f64>() / (reps as f64 - 1.0)).sqrt();
        assert!(
            (mean - s.truth()).abs() < 4.0 * sd / (reps as f64).sqrt(),
            "{mean} vs {}",
            s.truth()
        );
    }

    #[test]
    fn f32_estimates() {
        let weights = [0.5f32, 0.5];
        let run = run_adaptive(
            &weights,
            200,
            20,
            |keys: &[DrawKey]| -> Result<Vec<f32>, EstimatorError> {
                let mut rng = stream(keys.len() as u64);
                Ok(keys
                    .iter()
                    .map(|k| k.stratum as f32 * 10.0 + rng.random::<f32>())
                    .collect())
            },
        )
        .unwrap();
        assert!((run.estimate.mean - 5.5).abs() < 0.2);
    }
}
