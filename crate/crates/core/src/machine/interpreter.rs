use rand::Rng;
use smallvec::SmallVec;

use super::program::{Instr, Program};
use super::reward::normalize_reward;
use crate::error::ConfigError;

pub type Observation = SmallVec<[u8; 4]>;

/// Reference-machine parameters.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MachineConfig {
    /// Alphabet size `m` shared by cells, actions and observations.
    pub num_symbols: u32,
    pub obs_cells: usize,
    /// Instructions a program may execute in one interaction cycle.
    pub step_limit: u64,
    /// Longest raw program the sampler will return.
    pub max_program_len: usize,
}

impl Default for MachineConfig {
    fn default() -> Self {
        MachineConfig {
            num_symbols: 5,
            obs_cells: 1,
            step_limit: 1000,
            max_program_len: 1000,
        }
    }
}

impl MachineConfig {
    pub fn validate(&self) -> Result<(), ConfigError> {
        if !(2..=256).contains(&self.num_symbols) {
            return Err(ConfigError::Machine(format!(
                "num_symbols must be in 2..=256, got {}",
                self.num_symbols
            )));
        }
        if self.obs_cells == 0 {
            return Err(ConfigError::Machine("obs_cells must be at least 1".into()));
        }
        if self.step_limit == 0 {
            return Err(ConfigError::Machine("step_limit must be positive".into()));
        }
        if self.max_program_len == 0 {
            return Err(ConfigError::Machine("max_program_len must be positive".into()));
        }
        Ok(())
    }

    /// Number of distinct observation tuples, `m^obs_cells`.
    pub fn num_observations(&self) -> usize {
        (self.num_symbols as usize).pow(self.obs_cells as u32)
    }
}

/// Bracket jump table.
///
/// Matched `[`/`]` map to each other. An unmatched `[` maps to `code.len()`
/// (taking it falls off the end and ends the cycle's run) and an unmatched `]`
/// maps to its own index plus one, which makes it a no-op.
pub fn resolve_brackets(code: &[Instr]) -> Vec<usize> {
    let mut table: Vec<usize> = (0..code.len()).map(|i| i + 1).collect();
    let mut open = Vec::new();
    for (i, instr) in code.iter().enumerate() {
        match instr {
            Instr::LoopStart => open.push(i),
            Instr::LoopEnd => {
                if let Some(j) = open.pop() {
                    table[i] = j;
                    table[j] = i;
                }
            }
            _ => {}
        }
    }
    for j in open {
        table[j] = code.len();
    }
    table
}

/// A program prepared for execution: instructions plus the continuation index
/// taken when a bracket jumps.
#[derive(Debug, Clone)]
pub struct Executable {
    ops: Vec<Instr>,
    jump_to: Vec<u32>,
    negate: bool,
}

impl Executable {
    pub fn new(program: &Program) -> Self {
        let ops = program.code.as_slice().to_vec();
        let table = resolve_brackets(&ops);
        let len = ops.len();
        let jump_to = ops
            .iter()
            .enumerate()
            .map(|(i, op)| {
                let t = table[i];
                let next = match op {
                    Instr::LoopStart if t == len => len,
                    Instr::LoopStart => t + 1,
                    Instr::LoopEnd if t == i + 1 => i + 1,
                    Instr::LoopEnd => t + 1,
                    _ => i + 1,
                };
                next as u32
            })
            .collect();
        Executable {
            ops,
            jump_to,
            negate: program.negate,
        }
    }

    pub fn negate(&self) -> bool {
        self.negate
    }
}

/// Agent actions seen so far. The input tape presents them most recent first,
/// with zeros beyond the oldest.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ActionHistory {
    oldest_first: Vec<u8>,
}

impl ActionHistory {
    pub fn new() -> Self {
        Self::default()
    }

    /// Builds a history from actions listed most recent first.
    pub fn from_recent_first(actions: &[u8]) -> Self {
        ActionHistory {
            oldest_first: actions.iter().rev().copied().collect(),
        }
    }

    pub fn push(&mut self, action: u8) {
        self.oldest_first.push(action);
    }

    pub fn len(&self) -> usize {
        self.oldest_first.len()
    }

    pub fn is_empty(&self) -> bool {
        self.oldest_first.is_empty()
    }

    /// The `back`-th most recent action (0 = latest), or 0 past the history.
    #[inline]
    pub fn recent(&self, back: usize) -> u8 {
        let n = self.oldest_first.len();
        if back < n {
            self.oldest_first[n - 1 - back]
        } else {
            0
        }
    }

    pub fn clear(&mut self) {
        self.oldest_first.clear();
    }
}

/// Work tape and head. Persists across the cycles of one trial.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MachineState {
    tape: Vec<u8>,
    head: usize,
    /// Physical index of logical cell 0.
    origin: usize,
}

impl Default for MachineState {
    fn default() -> Self {
        MachineState {
            tape: vec![0; 16],
            head: 0,
            origin: 0,
        }
    }
}

impl MachineState {
    pub fn new() -> Self {
        Self::default()
    }

    /// Logical head position; starts at 0 and may go negative.
    pub fn head(&self) -> i64 {
        self.head as i64 - self.origin as i64
    }

    pub fn cell(&self, logical: i64) -> u8 {
        let phys = logical + self.origin as i64;
        if phys < 0 {
            return 0;
        }
        self.tape.get(phys as usize).copied().unwrap_or(0)
    }

    /// All materialized cells.
    pub fn cells(&self) -> &[u8] {
        &self.tape
    }

    fn grow_left(&mut self) {
        let extra = self.tape.len().max(16);
        let mut tape = vec![0; extra + self.tape.len()];
        tape[extra..].copy_from_slice(&self.tape);
        self.tape = tape;
        self.head += extra;
        self.origin += extra;
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CyclePercept {
    pub reward_symbol: u8,
    pub observation: Observation,
    pub reward: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub enum CycleOutcome {
    Percept(CyclePercept),
    StepLimitExceeded,
}

impl CycleOutcome {
    pub fn percept(self) -> Option<CyclePercept> {
        match self {
            CycleOutcome::Percept(p) => Some(p),
            CycleOutcome::StepLimitExceeded => None,
        }
    }
}

/// Runs one interaction cycle from the first instruction.
///
/// The first `.` writes the reward symbol, the next `obs_cells` writes form the
/// observation, and one further write ends the run. Outputs still missing when
/// the code runs out are 0.
pub fn run_cycle<R: Rng + ?Sized>(
    state: &mut MachineState,
    exe: &Executable,
    history: &ActionHistory,
    rng: &mut R,
    config: &MachineConfig,
) -> CycleOutcome {
    let m = config.num_symbols;
    let top = (m - 1) as u8;
    let wanted = 1 + config.obs_cells;
    let mut out: SmallVec<[u8; 8]> = SmallVec::new();
    let mut reads = 0usize;
    let mut steps = 0u64;
    let mut pc = 0usize;
    let ops = &exe.ops;

    while pc < ops.len() {
        steps += 1;
        if steps >= config.step_limit {
            return CycleOutcome::StepLimitExceeded;
        }
        match ops[pc] {
            Instr::Right => {
                state.head += 1;
                if state.head == state.tape.len() {
                    let n = state.tape.len();
                    state.tape.resize(n * 2, 0);
                }
            }
            Instr::Left => {
                if state.head == 0 {
                    state.grow_left();
                }
                state.head -= 1;
            }
            Instr::Inc => {
                let c = &mut state.tape[state.head];
                *c = if *c == top { 0 } else { *c + 1 };
            }
            Instr::Dec => {
                let c = &mut state.tape[state.head];
                *c = if *c == 0 { top } else { *c - 1 };
            }
            Instr::Write => {
                if out.len() == wanted {
                    break;
                }
                out.push(state.tape[state.head]);
            }
            Instr::Read => {
                state.tape[state.head] = history.recent(reads);
                reads += 1;
            }
            Instr::LoopStart => {
                if state.tape[state.head] == 0 {
                    pc = exe.jump_to[pc] as usize;
                    continue;
                }
            }
            Instr::LoopEnd => {
                if state.tape[state.head] != 0 {
                    pc = exe.jump_to[pc] as usize;
                    continue;
                }
            }
            Instr::Rand => {
                state.tape[state.head] = rng.random_range(0..m) as u8;
            }
        }
        pc += 1;
    }

    out.resize(wanted, 0);
    let reward_symbol = out[0];
    CycleOutcome::Percept(CyclePercept {
        reward_symbol,
        observation: out[1..].iter().copied().collect(),
        reward: normalize_reward(reward_symbol, m, exe.negate),
    })
}

/// One trial's environment: an executable, its tape, the action history and
/// the `%` random stream.
#[derive(Debug, Clone)]
pub struct Environment<R> {
    exe: Executable,
    state: MachineState,
    history: ActionHistory,
    rng: R,
    config: MachineConfig,
}

impl<R: Rng> Environment<R> {
    pub fn new(program: &Program, config: &MachineConfig, rng: R) -> Self {
        Environment {
            exe: Executable::new(program),
            state: MachineState::new(),
            history: ActionHistory::new(),
            rng,
            config: config.clone(),
        }
    }

    /// Appends `action` to the history and runs one cycle.
    pub fn step(&mut self, action: u8) -> CycleOutcome {
        debug_assert!(u32::from(action) < self.config.num_symbols);
        self.history.push(action);
        run_cycle(&mut self.state, &self.exe, &self.history, &mut self.rng, &self.config)
    }

    pub fn state(&self) -> &MachineState {
        &self.state
    }

    pub fn rng_mut(&mut self) -> &mut R {
        &mut self.rng
    }
}
