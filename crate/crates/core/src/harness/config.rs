use std::fmt;
use std::fmt::Write as _;
use std::path::PathBuf;
use std::str::FromStr;

use crate::agents::AgentSpec;
use crate::error::ConfigError;
use crate::estimator::{Scoring, TrialConfig, DEFAULT_BATCH};
use crate::machine::MachineConfig;
use crate::sampler::ScreenConfig;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Mode {
    #[default]
    Simple,
    Stratified,
    Compare,
    Sweep,
}

impl Mode {
    pub fn name(self) -> &'static str {
        match self {
            Mode::Simple => "simple",
            Mode::Stratified => "stratified",
            Mode::Compare => "compare",
            Mode::Sweep => "sweep",
        }
    }
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Mode {
    type Err = ConfigError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "simple" => Ok(Mode::Simple),
            "stratified" => Ok(Mode::Stratified),
            "compare" => Ok(Mode::Compare),
            "sweep" => Ok(Mode::Sweep),
            other => Err(ConfigError::Invalid(format!(
                "unknown mode {other:?} (simple, stratified, compare, sweep)"
            ))),
        }
    }
}

/// Everything needed to reproduce an experiment.
///
/// Stored as flat `key = value` text, one key per line, `#` comments.
/// `agent` may repeat; `episodes` takes a comma-separated list.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub machine: MachineConfig,
    pub screen: ScreenConfig,
    pub agents: Vec<AgentSpec>,
    pub mode: Mode,
    /// Pairs per estimate.
    pub samples: u64,
    pub episodes: Vec<u64>,
    pub batch: u64,
    /// `None` is the undiscounted mean reward.
    pub discount: Option<f64>,
    pub seed: u64,
    /// 0 uses every available core.
    pub threads: usize,
    pub table: Option<PathBuf>,
    pub out_dir: PathBuf,
    /// Batches between checkpoint writes; 0 disables checkpoints.
    pub checkpoint_interval: usize,
    pub max_attempts: u32,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            machine: MachineConfig::default(),
            screen: ScreenConfig::default(),
            agents: Vec::new(),
            mode: Mode::Simple,
            samples: 10_000,
            episodes: vec![1000],
            batch: DEFAULT_BATCH,
            discount: None,
            seed: 1,
            threads: 0,
            table: None,
            out_dir: PathBuf::from("aiq-out"),
            checkpoint_interval: 1,
            max_attempts: 1000,
        }
    }
}

/// Keys accepted by [`ExperimentConfig::from_text`].
pub const KEYS: &[&str] = &[
    "mode",
    "agent",
    "num_symbols",
    "obs_cells",
    "step_limit",
    "max_program_len",
    "dry_run",
    "dry_run_cycles",
    "samples",
    "episodes",
    "batch",
    "discount",
    "seed",
    "threads",
    "table",
    "out_dir",
    "checkpoint_interval",
    "max_attempts",
];

fn num<T: FromStr>(key: &str, v: &str) -> Result<T, String> {
    v.parse().map_err(|_| format!("{key}: cannot parse {v:?}"))
}

fn parse_bool(key: &str, v: &str) -> Result<bool, String> {
    match v {
        "true" | "yes" | "on" | "1" => Ok(true),
        "false" | "no" | "off" | "0" => Ok(false),
        _ => Err(format!("{key}: expected true or false, got {v:?}")),
    }
}

impl ExperimentConfig {
    /// Sets one key. `agent` appends.
    pub fn set(&mut self, key: &str, value: &str) -> Result<(), ConfigError> {
        let v = value.trim();
        let r: Result<(), String> = (|| {
            match key {
                "mode" => self.mode = v.parse().map_err(|e: ConfigError| e.to_string())?,
                "agent" => self.agents.push(v.parse().map_err(|e: ConfigError| e.to_string())?),
                "num_symbols" => self.machine.num_symbols = num(key, v)?,
                "obs_cells" => self.machine.obs_cells = num(key, v)?,
                "step_limit" => self.machine.step_limit = num(key, v)?,
                "max_program_len" => self.machine.max_program_len = num(key, v)?,
                "dry_run" => self.screen.dry_run = parse_bool(key, v)?,
                "dry_run_cycles" => self.screen.dry_run_cycles = num(key, v)?,
                "samples" => self.samples = num(key, v)?,
                "episodes" => self.episodes = v.split(',').map(|t| num(key, t.trim())).collect::<Result<_, _>>()?,
                "batch" => self.batch = num(key, v)?,
                "discount" => {
                    self.discount = match v {
                        "none" | "" => None,
                        g => Some(num(key, g)?),
                    }
                }
                "seed" => self.seed = num(key, v)?,
                "threads" => self.threads = num(key, v)?,
                "table" => self.table = (!v.is_empty() && v != "none").then(|| PathBuf::from(v)),
                "out_dir" => self.out_dir = PathBuf::from(v),
                "checkpoint_interval" => self.checkpoint_interval = num(key, v)?,
                "max_attempts" => self.max_attempts = num(key, v)?,
                _ => return Err(String::new()),
            }
            Ok(())
        })();
        r.map_err(|reason| {
            if reason.is_empty() {
                ConfigError::UnknownKey(key.to_string())
            } else {
                ConfigError::Invalid(reason)
            }
        })
    }

    pub fn from_text(text: &str) -> Result<Self, ConfigError> {
        let mut cfg = ExperimentConfig::default();
        let mut saw_agent = false;
        for (n, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (k, v) = line.split_once('=').ok_or_else(|| ConfigError::File {
                line: n + 1,
                reason: format!("expected key = value, got {line:?}"),
            })?;
            let k = k.trim();
            if k == "agent" && !saw_agent {
                cfg.agents.clear();
                saw_agent = true;
            }
            cfg.set(k, v).map_err(|e| ConfigError::File {
                line: n + 1,
                reason: e.to_string(),
            })?;
        }
        Ok(cfg)
    }

    /// Text form that [`from_text`](Self::from_text) reads back to an equal
    /// config.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let mut kv = |k: &str, v: &dyn fmt::Display| {
            let _ = writeln!(s, "{k} = {v}");
        };
        kv("mode", &self.mode);
        for a in &self.agents {
            kv("agent", a);
        }
        kv("num_symbols", &self.machine.num_symbols);
        kv("obs_cells", &self.machine.obs_cells);
        kv("step_limit", &self.machine.step_limit);
        kv("max_program_len", &self.machine.max_program_len);
        kv("dry_run", &self.screen.dry_run);
        kv("dry_run_cycles", &self.screen.dry_run_cycles);
        kv("samples", &self.samples);
        let eps: Vec<String> = self.episodes.iter().map(u64::to_string).collect();
        kv("episodes", &eps.join(","));
        kv("batch", &self.batch);
        match self.discount {
            Some(g) => kv("discount", &g),
            None => kv("discount", &"none"),
        }
        kv("seed", &self.seed);
        kv("threads", &self.threads);
        match &self.table {
            Some(p) => kv("table", &p.display()),
            None => kv("table", &"none"),
        }
        kv("out_dir", &self.out_dir.display());
        kv("checkpoint_interval", &self.checkpoint_interval);
        kv("max_attempts", &self.max_attempts);
        s
    }

    /// Checks everything that can be checked before running.
    pub fn validate(&self) -> Result<(), ConfigError> {
        self.machine.validate()?;
        if self.agents.is_empty() {
            return Err(ConfigError::Invalid("no agent given".into()));
        }
        for a in &self.agents {
            a.validate()?;
        }
        if self.episodes.is_empty() || self.episodes.contains(&0) {
            return Err(ConfigError::Invalid(
                "episodes must be a nonempty list of positive lengths".into(),
            ));
        }
        if self.samples < 2 {
            return Err(ConfigError::Invalid("samples must be at least 2".into()));
        }
        if self.batch == 0 {
            return Err(ConfigError::Invalid("batch must be positive".into()));
        }
        if let Some(g) = self.discount {
            if !(0.0..1.0).contains(&g) {
                return Err(ConfigError::Invalid(format!("discount must be in [0, 1), got {g}")));
            }
        }
        match self.mode {
            Mode::Compare if self.agents.len() != 2 => {
                return Err(ConfigError::Invalid("compare needs exactly two agents".into()))
            }
            Mode::Stratified => match &self.table {
                None => return Err(ConfigError::Invalid("stratified mode needs a stratum table".into())),
                Some(p) if !p.is_file() => {
                    return Err(ConfigError::Invalid(format!(
                        "stratum table {} does not exist",
                        p.display()
                    )))
                }
                _ => {}
            },
            _ => {}
        }
        if self.max_attempts == 0 {
            return Err(ConfigError::Invalid("max_attempts must be positive".into()));
        }
        Ok(())
    }

    pub fn scoring(&self) -> Scoring {
        self.discount.map_or(Scoring::Mean, Scoring::Discounted)
    }

    pub fn trial_config(&self, episodes: u64) -> TrialConfig {
        TrialConfig {
            machine: self.machine.clone(),
            screen: self.screen.clone(),
            episodes,
            scoring: self.scoring(),
            max_attempts: self.max_attempts,
            ..TrialConfig::default()
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> ExperimentConfig {
        ExperimentConfig {
            agents: vec![AgentSpec::freq(0.05), "q0".parse().unwrap()],
            mode: Mode::Compare,
            samples: 123,
            episodes: vec![100, 1000, 10_000],
            discount: Some(0.95),
            table: Some("strata.tsv".into()),
            out_dir: "out dir".into(),
            threads: 3,
            ..ExperimentConfig::default()
        }
    }

    #[test]
    fn text_round_trip() {
        for cfg in [ExperimentConfig::default(), sample()] {
            let text = cfg.to_text();
            assert_eq!(ExperimentConfig::from_text(&text).unwrap(), cfg, "{text}");
        }
    }

    #[test]
    fn every_written_key_is_documented() {
        for line in sample().to_text().lines() {
            let key = line.split('=').next().unwrap().trim();
            assert!(KEYS.contains(&key), "{key}");
        }
    }

    #[test]
    fn unknown_key_is_reported_with_its_line() {
        let err = ExperimentConfig::from_text("seed = 3\n\nbogus = 1\n").unwrap_err();
        match err {
            ConfigError::File { line, reason } => {
                assert_eq!(line, 3);
                assert!(reason.contains("bogus"));
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn validation() {
        let mut cfg = ExperimentConfig {
            agents: vec![AgentSpec::random()],
            ..ExperimentConfig::default()
        };
        assert!(cfg.validate().is_ok());
        cfg.episodes.clear();
        assert!(cfg.validate().is_err());
        cfg.episodes = vec![10];
        cfg.mode = Mode::Compare;
        assert!(cfg.validate().is_err());
        cfg.mode = Mode::Stratified;
        cfg.table = Some("/nonexistent/table.tsv".into());
        assert!(cfg.validate().is_err());
        cfg.mode = Mode::Simple;
        cfg.agents = vec!["hlq".parse().unwrap()];
        assert!(matches!(cfg.validate(), Err(ConfigError::Unimplemented(_))));
    }
}
