use std::fmt;
use std::str::FromStr;

use crate::error::ParseError;

/// One symbol of the extended BF instruction set.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
#[repr(u8)]
pub enum Instr {
    Right,
    Left,
    Inc,
    Dec,
    Write,
    Read,
    LoopStart,
    LoopEnd,
    /// `%`: overwrite the current cell with a uniformly random symbol.
    Rand,
}

impl Instr {
    pub const ALL: [Instr; 9] = [
        Instr::Right,
        Instr::Left,
        Instr::Inc,
        Instr::Dec,
        Instr::Write,
        Instr::Read,
        Instr::LoopStart,
        Instr::LoopEnd,
        Instr::Rand,
    ];

    pub fn as_char(self) -> char {
        match self {
            Instr::Right => '>',
            Instr::Left => '<',
            Instr::Inc => '+',
            Instr::Dec => '-',
            Instr::Write => '.',
            Instr::Read => ',',
            Instr::LoopStart => '[',
            Instr::LoopEnd => ']',
            Instr::Rand => '%',
        }
    }

    pub fn from_char(c: char) -> Option<Instr> {
        Some(match c {
            '>' => Instr::Right,
            '<' => Instr::Left,
            '+' => Instr::Inc,
            '-' => Instr::Dec,
            '.' => Instr::Write,
            ',' => Instr::Read,
            '[' => Instr::LoopStart,
            ']' => Instr::LoopEnd,
            '%' => Instr::Rand,
            _ => return None,
        })
    }
}

/// A sequence of instructions. Wraps `Vec<Instr>` so it can be parsed from and
/// printed as plain BF text.
#[derive(Debug, Clone, Default, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Code(pub Vec<Instr>);

impl Code {
    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn contains(&self, instr: Instr) -> bool {
        self.0.contains(&instr)
    }

    pub fn as_slice(&self) -> &[Instr] {
        &self.0
    }
}

impl From<Vec<Instr>> for Code {
    fn from(v: Vec<Instr>) -> Self {
        Code(v)
    }
}

impl fmt::Display for Code {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for i in &self.0 {
            write!(f, "{}", i.as_char())?;
        }
        Ok(())
    }
}

impl FromStr for Code {
    type Err = ParseError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        s.chars()
            .enumerate()
            .map(|(pos, c)| Instr::from_char(c).ok_or(ParseError::BadSymbol { pos, symbol: c }))
            .collect::<Result<Vec<_>, _>>()
            .map(Code)
    }
}

/// An environment program: the reward-negation bit followed by code.
///
/// Text form is an optional leading `!` (negated) and then the code verbatim,
/// e.g. `!,.%`.
#[derive(Debug, Clone, Default, PartialEq, Eq, Hash)]
pub struct Program {
    pub negate: bool,
    pub code: Code,
}

impl Program {
    pub fn new(negate: bool, code: Code) -> Self {
        Program { negate, code }
    }

    /// The same code with the negation bit set to `negate`.
    pub fn with_negate(&self, negate: bool) -> Program {
        Program {
            negate,
            code: self.code.clone(),
        }
    }
}

impl fmt::Display for Program {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.negate {
            f.write_str("!")?;
        }
        self.code.fmt(f)
    }
}

impl FromStr for Program {
    type Err = ParseError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let s = s.trim_end_matches(['\r', '\n']);
        match s.strip_prefix('!') {
            Some(rest) => rest
                .parse()
                .map(|code| Program::new(true, code))
                .map_err(|e| e.shift(1)),
            None => s.parse().map(|code| Program::new(false, code)),
        }
    }
}

/// Parses a program file: one program per line, blank lines and `#` comments skipped.
pub fn parse_program_lines(text: &str) -> Result<Vec<Program>, ParseError> {
    text.lines()
        .map(str::trim)
        .filter(|l| !l.is_empty() && !l.starts_with('#'))
        .map(str::parse)
        .collect()
}
