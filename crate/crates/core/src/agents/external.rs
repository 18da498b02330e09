//! Adapter for agents running in a child process.
//!
//! Line protocol on the child's stdin/stdout:
//!
//! ```text
//! harness -> agent   INIT <m> <obs_cells> <seed>
//! agent -> harness   OK
//! harness -> agent   PERCEPT NONE                 (first cycle)
//!                    PERCEPT <reward> <o1> .. <ok> (later cycles)
//! agent -> harness   <action>                     (one integer in 0..m)
//! harness -> agent   END                          (after the last cycle)
//! ```
//!
//! A child serves any number of trials, each opened by `INIT` and closed by
//! `END`.

use std::fmt::Write as _;
use std::io::{BufRead, BufReader, Write};
use std::process::{Child, ChildStdin, Command, Stdio};
use std::sync::mpsc::{self, Receiver, RecvTimeoutError};
use std::thread::{self, JoinHandle};
use std::time::Duration;

use super::{Agent, AgentError, Percept};

pub const DEFAULT_TIMEOUT_MS: u64 = 10_000;

struct Running {
    child: Child,
    stdin: ChildStdin,
    lines: Receiver<std::io::Result<String>>,
    reader: Option<JoinHandle<()>>,
}

impl Running {
    fn spawn(command: &str) -> Result<Running, AgentError> {
        let mut child = Command::new("sh")
            .arg("-c")
            .arg(command)
            .stdin(Stdio::piped())
            .stdout(Stdio::piped())
            .stderr(Stdio::inherit())
            .spawn()
            .map_err(|e| AgentError::Io(format!("spawn {command:?}: {e}")))?;
        let stdin = child
            .stdin
            .take()
            .ok_or_else(|| AgentError::Io("child stdin unavailable".into()))?;
        let stdout = child
            .stdout
            .take()
            .ok_or_else(|| AgentError::Io("child stdout unavailable".into()))?;
        let (tx, rx) = mpsc::channel();
        let reader = thread::spawn(move || {
            for line in BufReader::new(stdout).lines() {
                let stop = line.is_err();
                if tx.send(line).is_err() || stop {
                    break;
                }
            }
        });
        Ok(Running {
            child,
            stdin,
            lines: rx,
            reader: Some(reader),
        })
    }

    fn send(&mut self, line: &str) -> Result<(), AgentError> {
        self.stdin
            .write_all(line.as_bytes())
            .and_then(|_| self.stdin.flush())
            .map_err(|e| self.exit_error(format!("write failed: {e}")))
    }

    fn recv(&mut self, timeout_ms: u64) -> Result<String, AgentError> {
        match self.lines.recv_timeout(Duration::from_millis(timeout_ms)) {
            Ok(Ok(line)) => Ok(line.trim().to_string()),
            Ok(Err(e)) => Err(AgentError::Io(e.to_string())),
            Err(RecvTimeoutError::Timeout) => Err(AgentError::Timeout(timeout_ms)),
            Err(RecvTimeoutError::Disconnected) => Err(self.exit_error("stdout closed".into())),
        }
    }

    fn exit_error(&mut self, what: String) -> AgentError {
        thread::sleep(Duration::from_millis(10));
        match self.child.try_wait() {
            Ok(Some(status)) => AgentError::ChildExit(format!("{what} ({status})")),
            _ => AgentError::ChildExit(what),
        }
    }
}

impl Drop for Running {
    fn drop(&mut self) {
        let _ = self.child.kill();
        let _ = self.child.wait();
        // a grandchild may still hold stdout open, so the reader is detached
        drop(self.reader.take());
    }
}

/// Forwards percepts to a child process and returns its actions.
pub struct ExternalAgent {
    command: String,
    timeout_ms: u64,
    num_symbols: u32,
    running: Option<Running>,
    line: String,
}

impl ExternalAgent {
    pub fn new(command: String, timeout_ms: u64) -> Self {
        ExternalAgent {
            command,
            timeout_ms,
            num_symbols: 2,
            running: None,
            line: String::new(),
        }
    }

    fn exchange(&mut self) -> Result<String, AgentError> {
        let running = self
            .running
            .as_mut()
            .ok_or_else(|| AgentError::Io("agent not initialized".into()))?;
        let result = running.send(&self.line).and_then(|_| running.recv(self.timeout_ms));
        if result.is_err() {
            // the child's state is unknown now; start over on the next reset
            self.running = None;
        }
        result
    }
}

impl Agent for ExternalAgent {
    fn reset(&mut self, num_symbols: u32, obs_cells: usize, seed: u64) -> Result<(), AgentError> {
        if self.running.is_none() {
            self.running = Some(Running::spawn(&self.command)?);
        }
        self.num_symbols = num_symbols;
        self.line.clear();
        let _ = writeln!(self.line, "INIT {num_symbols} {obs_cells} {seed}");
        let reply = self.exchange()?;
        if reply != "OK" {
            self.running = None;
            return Err(AgentError::Protocol(format!("expected OK after INIT, got {reply:?}")));
        }
        Ok(())
    }

    fn act(&mut self, percept: Option<&Percept>) -> Result<u8, AgentError> {
        self.line.clear();
        match percept {
            None => self.line.push_str("PERCEPT NONE\n"),
            Some(p) => {
                let _ = write!(self.line, "PERCEPT {}", p.reward);
                for o in &p.observation {
                    let _ = write!(self.line, " {o}");
                }
                self.line.push('\n');
            }
        }
        let reply = self.exchange()?;
        match reply.parse::<u32>() {
            Ok(a) if a < self.num_symbols => Ok(a as u8),
            _ => {
                self.running = None;
                Err(AgentError::Protocol(format!(
                    "expected an action in 0..{}, got {reply:?}",
                    self.num_symbols
                )))
            }
        }
    }

    fn end_trial(&mut self) -> Result<(), AgentError> {
        if let Some(r) = self.running.as_mut() {
            if let Err(e) = r.send("END\n") {
                self.running = None;
                return Err(e);
            }
        }
        Ok(())
    }
}

/// Runs `agent` as the child side of the protocol until `input` closes.
pub fn serve<R: BufRead, W: Write>(agent: &mut dyn Agent, input: R, mut output: W) -> Result<(), AgentError> {
    let io = |e: std::io::Error| AgentError::Io(e.to_string());
    let bad = |l: &str| AgentError::Protocol(format!("unexpected line {l:?}"));
    for line in input.lines() {
        let line = line.map_err(io)?;
        let mut words = line.split_whitespace();
        let reply = match words.next() {
            Some("INIT") => {
                let mut num = || {
                    words
                        .next()
                        .and_then(|w| w.parse::<u64>().ok())
                        .ok_or_else(|| bad(&line))
                };
                let (m, obs, seed) = (num()?, num()?, num()?);
                agent.reset(m as u32, obs as usize, seed)?;
                "OK".to_string()
            }
            Some("PERCEPT") => {
                let rest: Vec<&str> = words.collect();
                let percept = match rest.as_slice() {
                    ["NONE"] => None,
                    [r, obs @ ..] => Some(Percept {
                        reward: r.parse().map_err(|_| bad(&line))?,
                        observation: obs
                            .iter()
                            .map(|o| o.parse())
                            .collect::<Result<_, _>>()
                            .map_err(|_| bad(&line))?,
                    }),
                    [] => return Err(bad(&line)),
                };
                agent.act(percept.as_ref())?.to_string()
            }
            Some("END") => {
                agent.end_trial()?;
                continue;
            }
            None => continue,
            Some(_) => return Err(bad(&line)),
        };
        writeln!(output, "{reply}").and_then(|_| output.flush()).map_err(io)?;
    }
    Ok(())
}
