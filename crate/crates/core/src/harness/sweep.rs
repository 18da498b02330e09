use crate::agents::AgentSpec;
use crate::error::ConfigError;
use crate::estimator::{Estimate, Session, TrialConfig};
use crate::Result;

/// Expands `|`-separated alternatives inside parameter values into the
/// cartesian product: `freq:eps=0.01|0.1` gives two specs,
/// `q:alpha=0.1|0.5,lambda=0|0.9` four.
pub fn expand_grid(pattern: &str) -> Result<Vec<AgentSpec>, ConfigError> {
    let (name, rest) = match pattern.split_once(':') {
        Some((n, r)) if !r.contains("cmd=") => (n, r),
        _ => return Ok(vec![pattern.parse()?]),
    };
    let mut variants = vec![String::new()];
    for kv in rest.split(',').map(str::trim).filter(|s| !s.is_empty()) {
        let (k, v) = kv.split_once('=').unwrap_or((kv, ""));
        let options: Vec<&str> = v.split('|').collect();
        variants = variants
            .iter()
            .flat_map(|prefix| {
                options.iter().map(move |o| {
                    let sep = if prefix.is_empty() { "" } else { "," };
                    format!("{prefix}{sep}{k}={o}")
                })
            })
            .collect();
    }
    variants.iter().map(|v| format!("{name}:{v}").parse()).collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepResult {
    pub rows: Vec<(AgentSpec, Estimate)>,
    /// Row with the highest mean; the first such row on ties.
    pub best: usize,
}

impl SweepResult {
    pub fn best_spec(&self) -> &AgentSpec {
        &self.rows[self.best].0
    }
}

pub fn best_index(estimates: &[Estimate]) -> usize {
    estimates
        .iter()
        .enumerate()
        .fold(0, |best, (i, e)| if e.mean > estimates[best].mean { i } else { best })
}

/// Evaluates every grid point on one shared sample of `n` pairs.
pub fn parameter_sweep(grid: &[AgentSpec], n: u64, batch: u64, seed: u64, cfg: &TrialConfig) -> Result<SweepResult> {
    if grid.is_empty() {
        return Err(ConfigError::Invalid("empty sweep grid".into()).into());
    }
    let estimates = Session::new(seed, grid.to_vec(), cfg.clone()).simple(n, batch)?;
    let best = best_index(&estimates);
    Ok(SweepResult {
        rows: grid.iter().cloned().zip(estimates).collect(),
        best,
    })
}
