//! Strata over screened programs.
//!
//! The default scheme crosses a motif class with a length bin. Motifs are
//! checked in priority order: adjacent `,.`, then `%`, then `[`, else plain.
//! Length bins are 1-5, 6-10, 11-20, 21-40 and 41+ on the simplified code.
//! The `responsive` scheme additionally splits every cell by whether the
//! program's reward reacts to the agent's actions in a short fixed probe.
//!
//! Masses are frequencies from a recorded pre-sample; bins whose pre-sample
//! count falls under [`MIN_STRATUM_COUNT`] are folded into the neighbouring
//! bin of the same row.

use std::fmt;
use std::fmt::Write as _;
use std::str::FromStr;

use rand::Rng;
use rayon::prelude::*;

use super::{dry_run, sample_program, sample_screened, screen_static, SamplerError, ScreenConfig};
use crate::machine::{Code, CycleOutcome, Environment, Instr, MachineConfig, Program};
use crate::seed;

pub type StratumId = u32;

pub const SCHEME_VERSION: &str = "motif-length-v1";
pub const MIN_STRATUM_COUNT: u64 = 100;
pub const MIN_PRESAMPLE: u64 = 100_000;

/// Cycles run by the responsiveness probe.
pub const PROBE_CYCLES: usize = 10;
const PROBE_ENV_SEED: u64 = 0x5eed_0001;
const PROBE_ACTION_SEEDS: [u64; 2] = [0x5eed_0002, 0x5eed_0003];

const NUM_MOTIFS: usize = 4;
const NUM_BINS: usize = 5;
const BIN_LOWER: [usize; NUM_BINS] = [1, 6, 11, 21, 41];

/// Pre-sample counts of one row group, indexed `[motif][bin]`.
/// Responsiveness, motif, minimum length and maximum length.
type ParsedPredicate = (Option<bool>, Option<Motif>, usize, Option<usize>);

pub type CellCounts = [[u64; NUM_BINS]; NUM_MOTIFS];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub enum Scheme {
    /// 4 motifs x 5 length bins.
    #[default]
    MotifLength,
    /// The default cells, each split by [`responsive`].
    Responsive,
}

impl Scheme {
    pub fn name(self) -> &'static str {
        match self {
            Scheme::MotifLength => SCHEME_VERSION,
            Scheme::Responsive => "responsive-motif-length-v1",
        }
    }

    fn groups(self) -> usize {
        match self {
            Scheme::MotifLength => 1,
            Scheme::Responsive => 2,
        }
    }
}

impl fmt::Display for Scheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Scheme {
    type Err = SamplerError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "motif-length" | SCHEME_VERSION => Ok(Scheme::MotifLength),
            "responsive" | "responsive-motif-length-v1" => Ok(Scheme::Responsive),
            other => Err(SamplerError::BadTable(format!("unknown scheme {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Motif {
    ReadWrite,
    Rand,
    Loop,
    Plain,
}

impl Motif {
    pub const ALL: [Motif; NUM_MOTIFS] = [Motif::ReadWrite, Motif::Rand, Motif::Loop, Motif::Plain];

    pub fn of(code: &Code) -> Motif {
        let ops = code.as_slice();
        if ops.windows(2).any(|w| w == [Instr::Read, Instr::Write]) {
            Motif::ReadWrite
        } else if code.contains(Instr::Rand) {
            Motif::Rand
        } else if code.contains(Instr::LoopStart) {
            Motif::Loop
        } else {
            Motif::Plain
        }
    }

    fn index(self) -> usize {
        self as usize
    }

    pub fn name(self) -> &'static str {
        match self {
            Motif::ReadWrite => "read-write",
            Motif::Rand => "rand",
            Motif::Loop => "loop",
            Motif::Plain => "plain",
        }
    }

    fn from_name(s: &str) -> Option<Motif> {
        Motif::ALL.into_iter().find(|m| m.name() == s)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct LengthBin(pub u8);

impl LengthBin {
    pub fn of(len: usize) -> LengthBin {
        LengthBin(BIN_LOWER.iter().rposition(|&lo| len >= lo).unwrap_or(0) as u8)
    }

    pub fn lower(self) -> usize {
        BIN_LOWER[self.0 as usize]
    }

    pub fn upper(self) -> Option<usize> {
        BIN_LOWER.get(self.0 as usize + 1).map(|next| next - 1)
    }
}

fn cell_id(group: usize, motif: Motif, bin: LengthBin) -> StratumId {
    ((group * NUM_MOTIFS + motif.index()) * NUM_BINS + bin.0 as usize) as StratumId
}

/// Default-scheme cell of a simplified program.
pub fn classify(code: &Code) -> (Motif, LengthBin) {
    (Motif::of(code), LengthBin::of(code.len()))
}

fn probe_rewards(program: &Program, machine: &MachineConfig, action_seed: u64) -> [u8; PROBE_CYCLES] {
    let mut env = Environment::new(program, machine, seed::stream(PROBE_ENV_SEED));
    let mut actions = seed::stream(action_seed);
    let mut out = [u8::MAX; PROBE_CYCLES];
    for slot in out.iter_mut() {
        let a = actions.random_range(0..machine.num_symbols) as u8;
        match env.step(a) {
            CycleOutcome::Percept(p) => *slot = p.reward_symbol,
            CycleOutcome::StepLimitExceeded => break,
        }
    }
    out
}

/// Whether `code`'s reward symbols differ between two fixed random action
/// sequences over [`PROBE_CYCLES`] cycles with the same `%` stream. A pure
/// function of the code; programs whose rewards ignore the actions are
/// false.
pub fn responsive(code: &Code, machine: &MachineConfig) -> bool {
    let program = Program::new(false, code.clone());
    let [a, b] = PROBE_ACTION_SEEDS;
    probe_rewards(&program, machine, a) != probe_rewards(&program, machine, b)
}

/// The properties strata are defined on.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Features {
    pub motif: Motif,
    pub len: usize,
    /// Only computed when the scheme needs it.
    pub responsive: Option<bool>,
}

impl Features {
    pub fn of(code: &Code, scheme: Scheme, machine: &MachineConfig) -> Features {
        Features {
            motif: Motif::of(code),
            len: code.len(),
            responsive: match scheme {
                Scheme::MotifLength => None,
                Scheme::Responsive => Some(responsive(code, machine)),
            },
        }
    }

    fn group(&self) -> usize {
        usize::from(self.responsive == Some(true))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Stratum {
    pub id: StratumId,
    /// `None` matches both.
    pub responsive: Option<bool>,
    /// `None` matches every motif.
    pub motif: Option<Motif>,
    pub min_len: usize,
    /// Inclusive; `None` is unbounded.
    pub max_len: Option<usize>,
    pub mass: f64,
    pub count: u64,
}

impl Stratum {
    /// Membership by length and motif only, ignoring responsiveness.
    fn matches_static(&self, code: &Code) -> bool {
        let len = code.len();
        self.motif.is_none_or(|m| m == Motif::of(code))
            && len >= self.min_len
            && self.max_len.is_none_or(|hi| len <= hi)
    }

    pub fn matches(&self, f: &Features) -> bool {
        self.responsive.is_none_or(|r| f.responsive == Some(r))
            && self.motif.is_none_or(|m| m == f.motif)
            && f.len >= self.min_len
            && self.max_len.is_none_or(|hi| f.len <= hi)
    }

    /// Whether `code` belongs here. The probe only runs when the cheaper
    /// checks pass.
    pub fn contains(&self, code: &Code, machine: &MachineConfig) -> bool {
        self.matches_static(code) && self.responsive.is_none_or(|r| responsive(code, machine) == r)
    }

    pub fn predicate(&self) -> String {
        let mut out = String::new();
        if let Some(r) = self.responsive {
            let _ = write!(out, "resp={};", if r { "yes" } else { "no" });
        }
        let _ = write!(out, "motif={}", self.motif.map_or("any", Motif::name));
        match self.max_len {
            Some(hi) => {
                let _ = write!(out, ";len={}-{hi}", self.min_len);
            }
            None => {
                let _ = write!(out, ";len={}+", self.min_len);
            }
        }
        out
    }

    fn parse_predicate(s: &str) -> Option<ParsedPredicate> {
        let (responsive, s) = match s.strip_prefix("resp=") {
            Some(rest) => {
                let (r, rest) = rest.split_once(';')?;
                let r = match r {
                    "yes" => true,
                    "no" => false,
                    _ => return None,
                };
                (Some(r), rest)
            }
            None => (None, s),
        };
        let (m, l) = s.split_once(';')?;
        let motif = match m.strip_prefix("motif=")? {
            "any" => None,
            name => Some(Motif::from_name(name)?),
        };
        let l = l.strip_prefix("len=")?;
        if let Some(lo) = l.strip_suffix('+') {
            return Some((responsive, motif, lo.parse().ok()?, None));
        }
        let (lo, hi) = l.split_once('-')?;
        Some((responsive, motif, lo.parse().ok()?, Some(hi.parse().ok()?)))
    }
}

impl fmt::Display for Stratum {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} ({})", self.id, self.predicate())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StratumTable {
    pub strata: Vec<Stratum>,
    pub seed: u64,
    pub presample: u64,
    pub scheme: String,
}

/// Consecutive bins `(lo, hi, count)` of one row after folding sparse bins
/// into their neighbour.
fn fold_row(row: &[u64; NUM_BINS]) -> Vec<(usize, usize, u64)> {
    let mut groups: Vec<(usize, usize, u64)> = Vec::new();
    let mut pending: Option<(usize, usize, u64)> = None;
    for b in (0..NUM_BINS).rev() {
        let (_, hi, c) = pending.unwrap_or((b, b, 0));
        let grp = (b, hi, c + row[b]);
        if grp.2 >= MIN_STRATUM_COUNT {
            groups.push(grp);
            pending = None;
        } else {
            pending = Some(grp);
        }
    }
    if let Some((lo, hi, c)) = pending {
        match groups.last_mut() {
            Some(last) => {
                last.0 = lo;
                last.2 += c;
            }
            None => groups.push((lo, hi, c)),
        }
    }
    groups.reverse();
    groups
}

impl StratumTable {
    /// Builds a default-scheme table from cell counts.
    pub fn from_counts(counts: &CellCounts, seed: u64, presample: u64) -> Result<StratumTable, SamplerError> {
        Self::from_group_counts(Scheme::MotifLength, &[*counts], seed, presample)
    }

    /// Builds the table from per-group cell counts (one group for the
    /// default scheme; non-responsive then responsive for the other), folding
    /// sparse bins into a neighbour and dropping rows that never occurred.
    pub fn from_group_counts(
        scheme: Scheme,
        counts: &[CellCounts],
        seed: u64,
        presample: u64,
    ) -> Result<StratumTable, SamplerError> {
        if counts.len() != scheme.groups() {
            return Err(SamplerError::BadTable(format!(
                "scheme {scheme} needs {} count groups, got {}",
                scheme.groups(),
                counts.len()
            )));
        }
        let total: u64 = counts.iter().flatten().flatten().sum();
        let mut strata = Vec::new();
        for (group, cells) in counts.iter().enumerate() {
            let responsive = match scheme {
                Scheme::MotifLength => None,
                Scheme::Responsive => Some(group == 1),
            };
            for motif in Motif::ALL {
                let row = &cells[motif.index()];
                if row.iter().sum::<u64>() == 0 {
                    continue;
                }
                for (lo, hi, c) in fold_row(row) {
                    let id = cell_id(group, motif, LengthBin(lo as u8));
                    if c < MIN_STRATUM_COUNT {
                        return Err(SamplerError::TooCoarse { id, count: c });
                    }
                    strata.push(Stratum {
                        id,
                        responsive,
                        motif: Some(motif),
                        min_len: BIN_LOWER[lo],
                        max_len: LengthBin(hi as u8).upper(),
                        mass: c as f64 / total as f64,
                        count: c,
                    });
                }
            }
        }
        Ok(StratumTable {
            strata,
            seed,
            presample,
            scheme: scheme.name().to_string(),
        })
    }

    /// A one-stratum table covering every screened program.
    pub fn whole() -> StratumTable {
        StratumTable {
            strata: vec![Stratum {
                id: 0,
                responsive: None,
                motif: None,
                min_len: 0,
                max_len: None,
                mass: 1.0,
                count: 0,
            }],
            seed: 0,
            presample: 0,
            scheme: "whole".to_string(),
        }
    }

    pub fn len(&self) -> usize {
        self.strata.len()
    }

    pub fn is_empty(&self) -> bool {
        self.strata.is_empty()
    }

    pub fn weights(&self) -> Vec<f64> {
        self.strata.iter().map(|s| s.mass).collect()
    }

    pub fn position(&self, id: StratumId) -> Option<usize> {
        self.strata.iter().position(|s| s.id == id)
    }

    fn needs_probe(&self) -> bool {
        self.strata.iter().any(|s| s.responsive.is_some())
    }

    /// Position of the stratum containing `code`, if any.
    pub fn locate(&self, code: &Code, machine: &MachineConfig) -> Option<usize> {
        let f = Features {
            motif: Motif::of(code),
            len: code.len(),
            responsive: self.needs_probe().then(|| responsive(code, machine)),
        };
        self.strata.iter().position(|s| s.matches(&f))
    }

    pub fn to_text(&self, header: &[String]) -> String {
        let mut out = String::new();
        out.push_str("# aiq stratum table\n");
        for h in header {
            let _ = writeln!(out, "# {h}");
        }
        let _ = writeln!(out, "# scheme={}", self.scheme);
        let _ = writeln!(out, "# seed={}", self.seed);
        let _ = writeln!(out, "# presample={}", self.presample);
        out.push_str("id\tpredicate\tmass\tcount\n");
        for s in &self.strata {
            let _ = writeln!(out, "{}\t{}\t{}\t{}", s.id, s.predicate(), s.mass, s.count);
        }
        out
    }

    pub fn from_text(text: &str) -> Result<StratumTable, SamplerError> {
        let bad = |m: String| SamplerError::BadTable(m);
        let mut table = StratumTable {
            strata: Vec::new(),
            seed: 0,
            presample: 0,
            scheme: String::new(),
        };
        for (n, line) in text.lines().enumerate() {
            let line = line.trim_end();
            if let Some(c) = line.strip_prefix('#') {
                let c = c.trim();
                if let Some(v) = c.strip_prefix("seed=") {
                    table.seed = v.parse().map_err(|_| bad(format!("line {}: seed", n + 1)))?;
                } else if let Some(v) = c.strip_prefix("presample=") {
                    table.presample = v.parse().map_err(|_| bad(format!("line {}: presample", n + 1)))?;
                } else if let Some(v) = c.strip_prefix("scheme=") {
                    table.scheme = v.to_string();
                }
                continue;
            }
            if line.is_empty() || line.starts_with("id\t") {
                continue;
            }
            let f: Vec<&str> = line.split('\t').collect();
            if f.len() != 4 {
                return Err(bad(format!("line {}: expected 4 fields", n + 1)));
            }
            let (responsive, motif, min_len, max_len) =
                Stratum::parse_predicate(f[1]).ok_or_else(|| bad(format!("line {}: predicate", n + 1)))?;
            table.strata.push(Stratum {
                id: f[0].parse().map_err(|_| bad(format!("line {}: id", n + 1)))?,
                responsive,
                motif,
                min_len,
                max_len,
                mass: f[2].parse().map_err(|_| bad(format!("line {}: mass", n + 1)))?,
                count: f[3].parse().map_err(|_| bad(format!("line {}: count", n + 1)))?,
            });
        }
        if table.strata.is_empty() {
            return Err(bad("no strata".into()));
        }
        let sum: f64 = table.weights().iter().sum();
        if (sum - 1.0).abs() > 1e-9 {
            return Err(bad(format!("masses sum to {sum}")));
        }
        Ok(table)
    }
}

/// Stratum id of a screened program, or `None` if its cell was dropped from
/// the table.
pub fn classify_stratum(program: &Program, table: &StratumTable, machine: &MachineConfig) -> Option<StratumId> {
    table.locate(&program.code, machine).map(|i| table.strata[i].id)
}

/// Draws `presample` screened programs and records the frequency of each
/// stratum. Program `i` comes from its own derived stream, so the result does
/// not depend on thread count.
pub fn build_stratum_table(
    presample: u64,
    seed: u64,
    scheme: Scheme,
    machine: &MachineConfig,
    screen_cfg: &ScreenConfig,
) -> Result<StratumTable, SamplerError> {
    if presample < MIN_PRESAMPLE {
        return Err(SamplerError::PresampleTooSmall(presample));
    }
    let empty = || vec![[[0u64; NUM_BINS]; NUM_MOTIFS]; scheme.groups()];
    let counts = (0..presample)
        .into_par_iter()
        .fold(empty, |mut acc, i| {
            let mut rng = seed::stream(seed::derive(seed, &[seed::Role::Program as u64, u64::MAX, i]));
            let p = sample_screened(&mut rng, screen_cfg, machine);
            let f = Features::of(&p.code, scheme, machine);
            acc[f.group()][f.motif.index()][LengthBin::of(f.len).0 as usize] += 1;
            acc
        })
        .reduce(empty, |mut a, b| {
            for (x, y) in a.iter_mut().flatten().flatten().zip(b.iter().flatten().flatten()) {
                *x += y;
            }
            a
        });
    StratumTable::from_group_counts(scheme, &counts, seed, presample)
}

/// Rejection-samples a screened program from stratum `id`: the prior
/// conditioned on the stratum. The dry run only happens for programs that
/// already classify into the stratum, which leaves the conditional law
/// unchanged.
pub fn sample_from_stratum<R: Rng>(
    id: StratumId,
    table: &StratumTable,
    rng: &mut R,
    machine: &MachineConfig,
    screen_cfg: &ScreenConfig,
    max_attempts: u64,
) -> Result<Program, SamplerError> {
    let pos = table.position(id).ok_or(SamplerError::UnknownStratum(id))?;
    let stratum = &table.strata[pos];
    for _ in 0..max_attempts {
        let raw = sample_program(rng, machine);
        let Ok(p) = screen_static(&raw) else { continue };
        if !stratum.contains(&p.code, machine) {
            continue;
        }
        if screen_cfg.dry_run && !dry_run(&p, screen_cfg.dry_run_cycles, rng, machine) {
            continue;
        }
        return Ok(p);
    }
    Err(SamplerError::AttemptsExhausted {
        id,
        attempts: max_attempts,
    })
}
