//! Agents and the agent interface.
//!
//! An agent is reset at the start of every trial and then asked for one
//! action per cycle. The first call of a trial has no percept; every later
//! call carries the reward and observation produced by the previous action.

mod external;
mod freq;
mod qtab;
mod random;

use std::fmt;
use std::str::FromStr;

use thiserror::Error;

use crate::error::ConfigError;
use crate::machine::Observation;

pub use external::{serve, ExternalAgent, DEFAULT_TIMEOUT_MS};
pub use freq::FreqAgent;
pub use qtab::QTabAgent;
pub use random::RandomAgent;

#[derive(Debug, Clone, PartialEq)]
pub struct Percept {
    pub reward: f64,
    pub observation: Observation,
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum AgentError {
    #[error("protocol error: {0}")]
    Protocol(String),
    #[error("agent did not answer within {0} ms")]
    Timeout(u64),
    #[error("agent process exited: {0}")]
    ChildExit(String),
    #[error("agent io: {0}")]
    Io(String),
}

impl AgentError {
    /// Short status tag for trial logs.
    pub fn status(&self) -> &'static str {
        match self {
            AgentError::Protocol(_) => "agent_protocol_error",
            AgentError::Timeout(_) => "agent_timeout",
            AgentError::ChildExit(_) => "agent_exit",
            AgentError::Io(_) => "agent_io_error",
        }
    }
}

pub trait Agent: Send {
    /// Returns the agent to its initial state for a fresh trial.
    fn reset(&mut self, num_symbols: u32, obs_cells: usize, seed: u64) -> Result<(), AgentError>;

    fn act(&mut self, percept: Option<&Percept>) -> Result<u8, AgentError>;

    /// Called once after the last cycle of a trial.
    fn end_trial(&mut self) -> Result<(), AgentError> {
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum AgentKind {
    Random,
    Freq {
        epsilon: f64,
    },
    QTab {
        alpha: f64,
        gamma: f64,
        lambda: f64,
        epsilon: f64,
    },
    /// Registered so configs naming it fail with a clear message.
    Hlq,
    External {
        command: String,
        timeout_ms: u64,
    },
}

/// An agent kind, its parameters and a seed offset mixed into every trial's
/// agent seed.
#[derive(Debug, Clone, PartialEq)]
pub struct AgentSpec {
    pub kind: AgentKind,
    pub seed: u64,
}

impl AgentSpec {
    pub fn random() -> Self {
        AgentKind::Random.into()
    }

    pub fn freq(epsilon: f64) -> Self {
        AgentKind::Freq { epsilon }.into()
    }

    pub fn qtab(alpha: f64, gamma: f64, lambda: f64, epsilon: f64) -> Self {
        AgentKind::QTab {
            alpha,
            gamma,
            lambda,
            epsilon,
        }
        .into()
    }

    pub fn external(command: impl Into<String>) -> Self {
        AgentKind::External {
            command: command.into(),
            timeout_ms: DEFAULT_TIMEOUT_MS,
        }
        .into()
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let bad = |reason: &str| ConfigError::Agent {
            spec: self.to_string(),
            reason: reason.to_string(),
        };
        let eps_ok = |e: f64| (0.0..=1.0).contains(&e);
        match &self.kind {
            AgentKind::Random => Ok(()),
            AgentKind::Freq { epsilon } if !eps_ok(*epsilon) => Err(bad("eps must lie in [0, 1]")),
            AgentKind::Freq { .. } => Ok(()),
            AgentKind::QTab {
                alpha,
                gamma,
                lambda,
                epsilon,
            } => {
                if !eps_ok(*epsilon) {
                    Err(bad("eps must lie in [0, 1]"))
                } else if !(*alpha > 0.0 && *alpha <= 1.0) {
                    Err(bad("alpha must lie in (0, 1]"))
                } else if !(0.0..1.0).contains(gamma) {
                    Err(bad("gamma must lie in [0, 1)"))
                } else if !(0.0..=1.0).contains(lambda) {
                    Err(bad("lambda must lie in [0, 1]"))
                } else {
                    Ok(())
                }
            }
            AgentKind::Hlq => Err(ConfigError::Unimplemented(
                "hlq (its adaptive learning-rate rule lives in an external reference)".into(),
            )),
            AgentKind::External { command, .. } if command.trim().is_empty() => Err(bad("empty command")),
            AgentKind::External { .. } => Ok(()),
        }
    }

    /// Instantiates the agent. Configuration problems surface here, before any
    /// trial runs.
    pub fn build(&self) -> Result<Box<dyn Agent>, ConfigError> {
        self.validate()?;
        Ok(match &self.kind {
            AgentKind::Random => Box::new(RandomAgent::new()),
            AgentKind::Freq { epsilon } => Box::new(FreqAgent::new(*epsilon)),
            AgentKind::QTab {
                alpha,
                gamma,
                lambda,
                epsilon,
            } => Box::new(QTabAgent::new(*alpha, *gamma, *lambda, *epsilon)),
            AgentKind::External { command, timeout_ms } => Box::new(ExternalAgent::new(command.clone(), *timeout_ms)),
            AgentKind::Hlq => unreachable!("rejected by validate"),
        })
    }

    /// Short label for tables and plots.
    pub fn label(&self) -> String {
        match &self.kind {
            AgentKind::Random => "Random".into(),
            AgentKind::Freq { .. } => "Freq".into(),
            AgentKind::QTab { lambda, .. } if *lambda == 0.0 => "Q(0)".into(),
            AgentKind::QTab { lambda, .. } => format!("Q({lambda})"),
            AgentKind::Hlq => "HLQ".into(),
            AgentKind::External { .. } => "External".into(),
        }
    }
}

impl From<AgentKind> for AgentSpec {
    fn from(kind: AgentKind) -> Self {
        AgentSpec { kind, seed: 0 }
    }
}

impl fmt::Display for AgentSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let seed = if self.seed != 0 {
            format!("seed={},", self.seed)
        } else {
            String::new()
        };
        let seed_only = seed.trim_end_matches(',');
        match &self.kind {
            AgentKind::Random if seed_only.is_empty() => write!(f, "random"),
            AgentKind::Random => write!(f, "random:{seed_only}"),
            AgentKind::Freq { epsilon } => write!(f, "freq:{seed}eps={epsilon}"),
            AgentKind::QTab {
                alpha,
                gamma,
                lambda,
                epsilon,
            } => write!(f, "q:{seed}alpha={alpha},gamma={gamma},lambda={lambda},eps={epsilon}"),
            AgentKind::Hlq => write!(f, "hlq"),
            AgentKind::External { command, timeout_ms } => {
                write!(f, "ext:{seed}timeout_ms={timeout_ms},cmd={command}")
            }
        }
    }
}

impl FromStr for AgentSpec {
    type Err = ConfigError;

    /// `random`, `freq:eps=0.05`, `q:alpha=0.1,gamma=0.9,lambda=0.9,eps=0.05`,
    /// `hlq`, or `ext:timeout_ms=5000,cmd=<command line>` (`cmd` takes the rest
    /// of the string). Any form may carry `seed=<n>`.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let s = s.trim();
        let bad = |reason: String| ConfigError::Agent {
            spec: s.to_string(),
            reason,
        };
        let (name, rest) = s.split_once(':').unwrap_or((s, ""));
        let (params, command) = match rest.find("cmd=") {
            Some(i) => (&rest[..i], Some(rest[i + 4..].to_string())),
            None => (rest, None),
        };
        let mut seed = 0u64;
        let mut eps = None;
        let mut alpha = None;
        let mut gamma = None;
        let mut lambda = None;
        let mut timeout_ms = DEFAULT_TIMEOUT_MS;
        for kv in params.split(',').map(str::trim).filter(|p| !p.is_empty()) {
            let (k, v) = kv
                .split_once('=')
                .ok_or_else(|| bad(format!("expected key=value, got {kv:?}")))?;
            let num = || v.parse::<f64>().map_err(|_| bad(format!("{k}: not a number: {v:?}")));
            match k {
                "seed" => seed = v.parse().map_err(|_| bad(format!("seed: not an integer: {v:?}")))?,
                "eps" | "epsilon" => eps = Some(num()?),
                "alpha" => alpha = Some(num()?),
                "gamma" => gamma = Some(num()?),
                "lambda" => lambda = Some(num()?),
                "timeout_ms" => {
                    timeout_ms = v
                        .parse()
                        .map_err(|_| bad(format!("timeout_ms: not an integer: {v:?}")))?
                }
                _ => return Err(bad(format!("unknown parameter {k:?}"))),
            }
        }
        let defaults = QTabAgent::DEFAULTS;
        let kind = match name.to_ascii_lowercase().as_str() {
            "random" => AgentKind::Random,
            "freq" => AgentKind::Freq {
                epsilon: eps.unwrap_or(FreqAgent::DEFAULT_EPSILON),
            },
            "q" | "qtab" | "qlambda" => AgentKind::QTab {
                alpha: alpha.unwrap_or(defaults.0),
                gamma: gamma.unwrap_or(defaults.1),
                lambda: lambda.unwrap_or(defaults.2),
                epsilon: eps.unwrap_or(defaults.3),
            },
            "q0" => AgentKind::QTab {
                alpha: alpha.unwrap_or(defaults.0),
                gamma: gamma.unwrap_or(defaults.1),
                lambda: lambda.unwrap_or(0.0),
                epsilon: eps.unwrap_or(defaults.3),
            },
            "hlq" => AgentKind::Hlq,
            "ext" | "external" => AgentKind::External {
                command: command.ok_or_else(|| bad("external agent needs cmd=<command>".into()))?,
                timeout_ms,
            },
            other => return Err(bad(format!("unknown agent kind {other:?}"))),
        };
        Ok(AgentSpec { kind, seed })
    }
}

/// Uniform choice among the indices holding the maximum value.
pub(crate) fn argmax_uniform<R: rand::Rng>(values: &[f64], rng: &mut R) -> usize {
    let best = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let ties = values.iter().filter(|&&v| v == best).count();
    let pick = if ties > 1 { rng.random_range(0..ties) } else { 0 };
    values
        .iter()
        .enumerate()
        .filter(|(_, &v)| v == best)
        .nth(pick)
        .map(|(i, _)| i)
        .unwrap_or(0)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn spec_text_round_trips() {
        for s in [
            "random",
            "random:seed=4",
            "freq:eps=0.05",
            "q:alpha=0.1,gamma=0.9,lambda=0.9,eps=0.05",
            "q:seed=2,alpha=0.5,gamma=0,lambda=0,eps=0.01",
            "hlq",
            "ext:timeout_ms=200,cmd=python3 agent.py --a=1,2",
        ] {
            let spec: AgentSpec = s.parse().unwrap();
            assert_eq!(spec.to_string(), s);
            assert_eq!(spec.to_string().parse::<AgentSpec>().unwrap(), spec);
        }
    }

    #[test]
    fn invalid_specs() {
        assert!("freq:eps=2".parse::<AgentSpec>().unwrap().validate().is_err());
        assert!("q:gamma=1".parse::<AgentSpec>().unwrap().validate().is_err());
        assert!("q:alpha=0".parse::<AgentSpec>().unwrap().validate().is_err());
        assert!("q:lambda=1.5".parse::<AgentSpec>().unwrap().validate().is_err());
        assert!("bogus".parse::<AgentSpec>().is_err());
        assert!("freq:speed=3".parse::<AgentSpec>().is_err());
        assert!("ext:timeout_ms=5".parse::<AgentSpec>().is_err());
    }

    #[test]
    fn hlq_is_registered_but_unimplemented() {
        let spec: AgentSpec = "hlq".parse().unwrap();
        match spec.build() {
            Err(ConfigError::Unimplemented(msg)) => assert!(msg.contains("external reference")),
            other => panic!("expected Unimplemented, got {:?}", other.map(|_| ())),
        }
    }

    #[test]
    fn labels() {
        assert_eq!(AgentSpec::qtab(0.1, 0.5, 0.0, 0.05).label(), "Q(0)");
        assert_eq!(AgentSpec::qtab(0.1, 0.5, 0.9, 0.05).label(), "Q(0.9)");
        assert_eq!(AgentSpec::freq(0.1).label(), "Freq");
    }
}
