//! The extended BF reference machine.
//!
//! Programs run one interaction cycle at a time. Each cycle restarts at the
//! first instruction while the work tape and head carry over, `,` reads the
//! agent's actions most recent first, and `.` emits the reward symbol followed
//! by the observation cells.

mod interpreter;
mod program;
mod reward;

pub use interpreter::{
    resolve_brackets, run_cycle, ActionHistory, CycleOutcome, CyclePercept, Environment, Executable, MachineConfig,
    MachineState, Observation,
};
pub use program::{parse_program_lines, Code, Instr, Program};
pub use reward::normalize_reward;
