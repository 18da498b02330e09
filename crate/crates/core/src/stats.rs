//! Streaming moments and the stratified-estimate arithmetic, generic over the
//! float type.

use num_traits::Float;
use serde::{Deserialize, Serialize};

/// z for an approximate 95% interval.
pub const Z95: f64 = 1.96;

/// Lower bound on a stratum's standard deviation when allocating, so that no
/// stratum with positive mass stops being sampled.
pub const MIN_ALLOC_SD: f64 = 1e-6;

/// Count, mean and sum of squared deviations, updated one value at a time.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StratumStats<F> {
    pub n: u64,
    pub mean: F,
    pub m2: F,
}

impl<F: Float> Default for StratumStats<F> {
    fn default() -> Self {
        Self::new()
    }
}

impl<F: Float> StratumStats<F> {
    pub fn new() -> Self {
        StratumStats {
            n: 0,
            mean: F::zero(),
            m2: F::zero(),
        }
    }

    pub fn from_values<I: IntoIterator<Item = F>>(values: I) -> Self {
        let mut s = Self::new();
        s.extend(values);
        s
    }

    pub fn push(&mut self, x: F) {
        self.n += 1;
        let n = F::from(self.n).unwrap();
        let delta = x - self.mean;
        self.mean = self.mean + delta / n;
        self.m2 = self.m2 + delta * (x - self.mean);
    }

    /// Unbiased sample variance; zero below two samples.
    pub fn variance(&self) -> F {
        if self.n < 2 {
            F::zero()
        } else {
            self.m2 / F::from(self.n - 1).unwrap()
        }
    }

    pub fn sd(&self) -> F {
        self.variance().sqrt()
    }

    pub fn stderr(&self) -> F {
        if self.n == 0 {
            return F::zero();
        }
        (self.variance() / F::from(self.n).unwrap()).sqrt()
    }

    /// Pooled statistics of the union of both samples.
    pub fn merge(&self, other: &Self) -> Self {
        if other.n == 0 {
            return *self;
        }
        if self.n == 0 {
            return *other;
        }
        let n = self.n + other.n;
        let (na, nb, nt) = (F::from(self.n).unwrap(), F::from(other.n).unwrap(), F::from(n).unwrap());
        let delta = other.mean - self.mean;
        StratumStats {
            n,
            mean: self.mean + delta * nb / nt,
            m2: self.m2 + other.m2 + delta * delta * na * nb / nt,
        }
    }
}

impl<F: Float> Extend<F> for StratumStats<F> {
    fn extend<I: IntoIterator<Item = F>>(&mut self, iter: I) {
        for x in iter {
            self.push(x);
        }
    }
}

pub fn merge_stats<F: Float>(a: &StratumStats<F>, b: &StratumStats<F>) -> StratumStats<F> {
    a.merge(b)
}

/// Point estimate with its standard error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeanEstimate<F> {
    pub mean: F,
    pub stderr: F,
}

impl<F: Float> MeanEstimate<F> {
    pub fn ci_halfwidth(&self) -> F {
        F::from(Z95).unwrap() * self.stderr
    }

    pub fn interval(&self) -> (F, F) {
        let h = self.ci_halfwidth();
        (self.mean - h, self.mean + h)
    }

    /// True when the two 95% intervals are disjoint and `self` lies above.
    pub fn clearly_above(&self, other: &Self) -> bool {
        self.interval().0 > other.interval().1
    }
}

/// Stratified mean `sum w_i mean_i` and standard error
/// `sqrt(sum w_i^2 s_i^2 / n_i)`. Strata with zero weight are ignored.
pub fn stratified<F: Float>(weights: &[F], stats: &[StratumStats<F>]) -> MeanEstimate<F> {
    let mut mean = F::zero();
    let mut var = F::zero();
    for (&w, s) in weights.iter().zip(stats) {
        if w == F::zero() || s.n == 0 {
            continue;
        }
        mean = mean + w * s.mean;
        var = var + w * w * s.variance() / F::from(s.n).unwrap();
    }
    MeanEstimate {
        mean,
        stderr: var.sqrt(),
    }
}

/// Splits `total` draws across strata in proportion to `scores` (typically
/// `w_i * sd_i`). Every stratum with a positive score gets at least one draw
/// when `total` allows it; the rest goes by largest remainder, ties to the
/// lower index.
pub fn allocate<F: Float>(scores: &[F], total: u64) -> Vec<u64> {
    let k = scores.len();
    let mut out = vec![0u64; k];
    let positive: Vec<usize> = (0..k).filter(|&i| scores[i] > F::zero()).collect();
    if positive.is_empty() || total == 0 {
        return out;
    }
    let mut left = total;
    if total >= positive.len() as u64 {
        for &i in &positive {
            out[i] = 1;
        }
        left -= positive.len() as u64;
    }
    let sum = positive.iter().fold(F::zero(), |acc, &i| acc + scores[i]);
    let left_f = F::from(left).unwrap();
    let mut given = 0u64;
    let mut remainders: Vec<(usize, F)> = Vec::with_capacity(positive.len());
    for &i in &positive {
        let exact = left_f * scores[i] / sum;
        let whole = exact.floor();
        let whole_u = whole.to_u64().unwrap_or(0);
        out[i] += whole_u;
        given += whole_u;
        remainders.push((i, exact - whole));
    }
    remainders.sort_by(|a, b| {
        b.1.partial_cmp(&a.1)
            .unwrap_or(std::cmp::Ordering::Equal)
            .then(a.0.cmp(&b.0))
    });
    for (i, _) in remainders.into_iter().take((left - given) as usize) {
        out[i] += 1;
    }
    out
}
