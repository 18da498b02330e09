//! Program sampling, simplification and screening.
//!
//! Raw programs come from a prefix-free process: a fair coin for the negation
//! bit, then symbols drawn uniformly from the nine instructions plus an END
//! marker until END appears. A particular code of length `l` therefore has
//! probability `(1/10)^(l+1)` per negation value.

mod strata;

use rand::Rng;
use thiserror::Error;

use crate::machine::{Code, CycleOutcome, Environment, Instr, MachineConfig, Program};

pub use strata::{
    build_stratum_table, classify, classify_stratum, responsive, sample_from_stratum, CellCounts, Features, LengthBin,
    Motif, Scheme, Stratum, StratumId, StratumTable, MIN_STRATUM_COUNT, PROBE_CYCLES, SCHEME_VERSION,
};

#[derive(Debug, Error, PartialEq, Eq)]
pub enum SamplerError {
    #[error("stratum {0} is not in the table")]
    UnknownStratum(StratumId),
    #[error("gave up drawing from stratum {id} after {attempts} attempts")]
    AttemptsExhausted { id: StratumId, attempts: u64 },
    #[error("stratum {id} has only {count} pre-sample programs (need {MIN_STRATUM_COUNT})")]
    TooCoarse { id: StratumId, count: u64 },
    #[error("pre-sample size {0} is below the minimum of 100000")]
    PresampleTooSmall(u64),
    #[error("malformed stratum table: {0}")]
    BadTable(String),
}

/// A program exactly as drawn, before simplification.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct RawProgram {
    pub negate: bool,
    pub code: Code,
}

/// Draws one raw program. Draws longer than `max_program_len` are discarded
/// and redrawn.
pub fn sample_program<R: Rng + ?Sized>(rng: &mut R, config: &MachineConfig) -> RawProgram {
    let negate = rng.random_bool(0.5);
    let mut code = Vec::new();
    loop {
        let sym = rng.random_range(0..10u8);
        if sym == 9 {
            return RawProgram {
                negate,
                code: Code(code),
            };
        }
        if code.len() == config.max_program_len {
            code.clear();
            continue;
        }
        code.push(Instr::ALL[sym as usize]);
    }
}

fn cancels(a: Instr, b: Instr) -> bool {
    use Instr::*;
    matches!(
        (a, b),
        (Inc, Dec) | (Dec, Inc) | (Left, Right) | (Right, Left) | (LoopStart, LoopEnd)
    )
}

/// Deletes adjacent `+-`, `-+`, `<>`, `><` and `[]` pairs until none remain.
pub fn simplify(code: &Code) -> Code {
    let mut out: Vec<Instr> = Vec::with_capacity(code.len());
    for &i in code.as_slice() {
        match out.last() {
            Some(&top) if cancels(top, i) => {
                out.pop();
            }
            _ => out.push(i),
        }
    }
    Code(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Reject {
    EmptyAfterSimplify,
    NoRead,
    NoWrite,
    DryRunTimeout,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ScreenConfig {
    pub dry_run: bool,
    pub dry_run_cycles: usize,
}

impl Default for ScreenConfig {
    fn default() -> Self {
        ScreenConfig {
            dry_run: true,
            dry_run_cycles: 20,
        }
    }
}

/// Simplification plus the static read/write checks.
pub fn screen_static(raw: &RawProgram) -> Result<Program, Reject> {
    let code = simplify(&raw.code);
    if code.is_empty() {
        return Err(Reject::EmptyAfterSimplify);
    }
    if !code.contains(Instr::Read) {
        return Err(Reject::NoRead);
    }
    if !code.contains(Instr::Write) {
        return Err(Reject::NoWrite);
    }
    Ok(Program::new(raw.negate, code))
}

/// Runs `cycles` cycles with uniformly random actions; false on any timeout.
pub fn dry_run<R: Rng>(program: &Program, cycles: usize, rng: &mut R, config: &MachineConfig) -> bool {
    let m = config.num_symbols;
    let mut env = Environment::new(program, config, rng);
    for _ in 0..cycles {
        let action = env.rng_mut().random_range(0..m) as u8;
        if env.step(action) == CycleOutcome::StepLimitExceeded {
            return false;
        }
    }
    true
}

pub fn screen<R: Rng>(
    raw: &RawProgram,
    screen_cfg: &ScreenConfig,
    rng: &mut R,
    config: &MachineConfig,
) -> Result<Program, Reject> {
    let program = screen_static(raw)?;
    if screen_cfg.dry_run && !dry_run(&program, screen_cfg.dry_run_cycles, rng, config) {
        return Err(Reject::DryRunTimeout);
    }
    Ok(program)
}

/// Draws raw programs from `rng` until one passes screening.
pub fn sample_screened<R: Rng>(rng: &mut R, screen_cfg: &ScreenConfig, config: &MachineConfig) -> Program {
    loop {
        let raw = sample_program(rng, config);
        if let Ok(p) = screen(&raw, screen_cfg, rng, config) {
            return p;
        }
    }
}
