use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::estimator::DrawOutcome;
use crate::Result;

/// Completed draws of one job, written at batch boundaries.
///
/// Draw outcomes depend only on their keys, so resuming amounts to feeding
/// these back as a cache: the estimator replays the same allocation rounds
/// and skips every draw it already has.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    /// Config text the draws were produced under, minus scheduling keys.
    pub fingerprint: String,
    pub episodes: u64,
    pub job: usize,
    pub batches: usize,
    pub outcomes: Vec<DrawOutcome>,
}

impl Checkpoint {
    pub fn path(dir: &Path, episodes: u64, job: usize) -> PathBuf {
        dir.join(format!("checkpoint_T{episodes}_{job}.json"))
    }

    /// Writes atomically via a temporary file.
    pub fn save(&self, path: &Path) -> Result<()> {
        let tmp = path.with_extension("json.tmp");
        fs::write(&tmp, serde_json::to_vec(self)?)?;
        fs::rename(&tmp, path)?;
        Ok(())
    }

    /// Loads `path` if it exists and belongs to the same experiment.
    pub fn load_matching(path: &Path, fingerprint: &str, episodes: u64, job: usize) -> Result<Option<Checkpoint>> {
        if !path.is_file() {
            return Ok(None);
        }
        let cp: Checkpoint = serde_json::from_slice(&fs::read(path)?)?;
        Ok((cp.fingerprint == fingerprint && cp.episodes == episodes && cp.job == job).then_some(cp))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::seed::DrawKey;

    #[test]
    fn save_and_load() {
        let dir = tempfile::tempdir().unwrap();
        let path = Checkpoint::path(dir.path(), 100, 0);
        let cp = Checkpoint {
            fingerprint: "seed = 1".into(),
            episodes: 100,
            job: 0,
            batches: 2,
            outcomes: vec![DrawOutcome {
                key: DrawKey::new(0, 1),
                stratum: None,
                program: ",.".into(),
                scores: vec![(0.1 + 0.2, -1.0 / 3.0)],
                discards: vec![],
                rejects: 0,
            }],
        };
        cp.save(&path).unwrap();
        assert_eq!(Checkpoint::load_matching(&path, "seed = 1", 100, 0).unwrap(), Some(cp));
        assert_eq!(Checkpoint::load_matching(&path, "seed = 2", 100, 0).unwrap(), None);
        assert_eq!(Checkpoint::load_matching(&path, "seed = 1", 100, 1).unwrap(), None);
    }
}
