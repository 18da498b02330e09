use std::collections::BTreeMap;
use std::collections::BTreeSet;
use std::path::Path;

use rayon::prelude::*;

use crate::error::ConfigError;
use crate::machine::{MachineConfig, Program};
use crate::sampler::{classify, responsive, sample_screened, ScreenConfig};
#[cfg(test)]
use crate::sampler::{sample_program, screen};
use crate::seed::{derive, stream, Role};
use crate::Result;

pub const MIN_DIST_PROGRAMS: u64 = 1000;

/// Empirical distribution of simplified program lengths.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct LengthCdf {
    pub counts: BTreeMap<usize, u64>,
    pub total: u64,
}

impl LengthCdf {
    pub fn from_lengths<I: IntoIterator<Item = usize>>(lengths: I) -> Self {
        let mut cdf = LengthCdf::default();
        for l in lengths {
            *cdf.counts.entry(l).or_default() += 1;
            cdf.total += 1;
        }
        cdf
    }

    /// Fraction of programs of length at most `len`.
    pub fn at(&self, len: usize) -> f64 {
        if self.total == 0 {
            return 0.0;
        }
        let below: u64 = self.counts.range(..=len).map(|(_, c)| c).sum();
        below as f64 / self.total as f64
    }

    pub fn max_len(&self) -> usize {
        self.counts.keys().next_back().copied().unwrap_or(0)
    }
}

/// `n` screened programs; program `i` has its own stream, so the result is
/// independent of thread count.
pub fn sample_programs(n: u64, seed: u64, machine: &MachineConfig, screen: &ScreenConfig) -> Vec<Program> {
    (0..n)
        .into_par_iter()
        .map(|i| {
            let mut rng = stream(derive(seed, &[Role::Program as u64, u64::MAX - 1, i]));
            sample_screened(&mut rng, screen, machine)
        })
        .collect()
}

pub fn sample_lengths(n: u64, seed: u64, machine: &MachineConfig, screen: &ScreenConfig) -> Vec<usize> {
    sample_programs(n, seed, machine, screen)
        .iter()
        .map(|p| p.code.len())
        .collect()
}

/// `index,program,length,motif,length_bin,responsive` rows.
pub fn program_table(programs: &[Program], machine: &MachineConfig) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["index", "program", "length", "motif", "length_bin", "responsive"])?;
    for (i, p) in programs.iter().enumerate() {
        let (motif, bin) = classify(&p.code);
        w.write_record([
            i.to_string(),
            p.to_string(),
            p.code.len().to_string(),
            motif.name().to_string(),
            bin.0.to_string(),
            responsive(&p.code, machine).to_string(),
        ])?;
    }
    let bytes = w.into_inner().map_err(|e| std::io::Error::other(e.to_string()))?;
    Ok(String::from_utf8(bytes).expect("csv output is UTF-8"))
}

/// Prior CDF of simplified lengths over `n` screened programs.
pub fn run_distribution_analysis(
    n: u64,
    seed: u64,
    machine: &MachineConfig,
    screen: &ScreenConfig,
) -> Result<LengthCdf> {
    if n < MIN_DIST_PROGRAMS {
        return Err(ConfigError::Invalid(format!(
            "distribution analysis needs at least {MIN_DIST_PROGRAMS} programs, got {n}"
        ))
        .into());
    }
    Ok(LengthCdf::from_lengths(sample_lengths(n, seed, machine, screen)))
}

/// Lengths of the programs a run actually evaluated, read from its trial
/// log: one per completed draw.
pub fn lengths_from_trial_log(path: &Path) -> Result<Vec<usize>> {
    let mut r = csv::ReaderBuilder::new().comment(Some(b'#')).from_path(path)?;
    let mut seen = BTreeSet::new();
    let mut out = Vec::new();
    for rec in r.records() {
        let rec = rec?;
        let (idx, stratum, program, status) = (&rec[0], &rec[1], &rec[2], &rec[6]);
        if status == "ok" && seen.insert((stratum.to_string(), idx.to_string())) {
            out.push(program.chars().count());
        }
    }
    Ok(out)
}

/// `length,count,cdf` rows, plus `cdf_sampled` when an overlay is given.
pub fn cdf_table(prior: &LengthCdf, overlay: Option<&LengthCdf>) -> String {
    let mut s = String::from(if overlay.is_some() {
        "length,count,cdf,cdf_sampled\n"
    } else {
        "length,count,cdf\n"
    });
    let top = prior.max_len().max(overlay.map_or(0, LengthCdf::max_len));
    for len in 1..=top {
        let count = prior.counts.get(&len).copied().unwrap_or(0);
        s.push_str(&format!("{len},{count},{}", prior.at(len)));
        if let Some(o) = overlay {
            s.push_str(&format!(",{}", o.at(len)));
        }
        s.push('\n');
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cdf_basics() {
        let c = LengthCdf::from_lengths([2, 2, 5, 9]);
        assert_eq!(c.at(1), 0.0);
        assert_eq!(c.at(2), 0.5);
        assert_eq!(c.at(8), 0.75);
        assert_eq!(c.at(100), 1.0);
        let t = cdf_table(&c, Some(&LengthCdf::from_lengths([3])));
        assert!(t.starts_with("length,count,cdf,cdf_sampled\n1,0,0,0\n2,2,0.5,0\n3,0,0.5,1\n"));
        assert!(t.ends_with("9,1,1,1\n"));
    }

    #[test]
    fn program_table_rows() {
        let m = MachineConfig::default();
        let ps = sample_programs(5, 9, &m, &ScreenConfig::default());
        assert_eq!(ps, sample_programs(5, 9, &m, &ScreenConfig::default()));
        let t = program_table(&ps, &m).unwrap();
        let mut r = csv::Reader::from_reader(t.as_bytes());
        let rows: Vec<csv::StringRecord> = r.records().map(|x| x.unwrap()).collect();
        assert_eq!(rows.len(), 5);
        for (row, p) in rows.iter().zip(&ps) {
            assert_eq!(&row[1], p.to_string());
            assert_eq!(row[2].parse::<usize>().unwrap(), p.code.len());
        }
    }

    #[test]
    fn small_n_is_rejected() {
        let r = run_distribution_analysis(10, 1, &MachineConfig::default(), &ScreenConfig::default());
        assert!(r.is_err());
    }

    #[test]
    fn prior_cdf_is_monotone_and_complete() {
        let c = run_distribution_analysis(5000, 3, &MachineConfig::default(), &ScreenConfig::default()).unwrap();
        let mut last = 0.0;
        for l in 0..=c.max_len() {
            let v = c.at(l);
            assert!(v >= last);
            last = v;
        }
        assert_eq!(c.at(c.max_len()), 1.0);
        assert_eq!(c.at(1), 0.0, "a screened program holds both , and .");

        // raw length exceeds L with probability 0.9^(L+1); simplification only
        // shortens, and conditioning on acceptance inflates by 1/P(accept)
        let (m, sc) = (MachineConfig::default(), ScreenConfig::default());
        let mut rng = stream(derive(17, &[]));
        let accepted = (0..100_000)
            .filter(|_| screen(&sample_program(&mut rng, &m), &sc, &mut rng, &m).is_ok())
            .count();
        let scale = 100_000.0 / accepted as f64;
        for l in [20, 30, 40] {
            assert!(1.0 - c.at(l) <= scale * 0.9f64.powi(l as i32 + 1), "tail at {l}");
        }
    }
}
