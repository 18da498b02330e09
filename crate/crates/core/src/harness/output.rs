//! Delimited-text writers. Every file starts with `#` comment lines naming
//! the command and seed that produced it.

use std::fs;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::agents::AgentSpec;
use crate::estimator::{DrawOutcome, Estimate};
use crate::Result;

/// Where a file came from.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Provenance {
    pub command: String,
    pub seed: u64,
}

impl Provenance {
    pub fn new(command: impl Into<String>, seed: u64) -> Self {
        Provenance {
            command: command.into(),
            seed,
        }
    }

    pub fn header(&self) -> String {
        format!("# command: {}\n# seed: {}\n", self.command, self.seed)
    }

    pub fn lines(&self) -> Vec<String> {
        vec![format!("command: {}", self.command), format!("seed: {}", self.seed)]
    }
}

/// Writes `body` after the provenance header and any extra comment lines.
pub fn write_text(path: &Path, prov: &Provenance, extra: &[String], body: &str) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir)?;
    }
    let mut f = fs::File::create(path)?;
    f.write_all(prov.header().as_bytes())?;
    for line in extra {
        writeln!(f, "# {line}")?;
    }
    f.write_all(body.as_bytes())?;
    Ok(())
}

fn csv_body<F>(fill: F) -> Result<String>
where
    F: FnOnce(&mut csv::Writer<Vec<u8>>) -> Result<()>,
{
    let mut w = csv::Writer::from_writer(Vec::new());
    fill(&mut w)?;
    let bytes = w.into_inner().map_err(|e| std::io::Error::other(e.to_string()))?;
    Ok(String::from_utf8(bytes).expect("csv output is UTF-8"))
}

pub const TRIAL_LOG_COLUMNS: [&str; 7] = [
    "sample_idx",
    "stratum",
    "program",
    "agent",
    "score0",
    "score1",
    "status",
];

/// One row per agent per completed pair, plus one row per discarded program.
pub fn trial_log(agents: &[AgentSpec], outcomes: &[DrawOutcome]) -> Result<String> {
    csv_body(|w| {
        w.write_record(TRIAL_LOG_COLUMNS)?;
        for o in outcomes {
            let idx = o.key.index.to_string();
            let stratum = o.stratum.map(|s| s.to_string()).unwrap_or_default();
            for d in &o.discards {
                w.write_record([&idx, &stratum, &d.program, "", "", "", &d.status])?;
            }
            for (a, (s0, s1)) in agents.iter().zip(&o.scores) {
                w.write_record([
                    idx.as_str(),
                    &stratum,
                    &o.program,
                    &a.to_string(),
                    &s0.to_string(),
                    &s1.to_string(),
                    "ok",
                ])?;
            }
        }
        Ok(())
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub agent: String,
    pub episodes: u64,
    pub mean: f64,
    pub stderr: f64,
    pub ci: f64,
    pub n: u64,
    pub discards: u64,
}

impl SummaryRow {
    pub fn new(agent: impl Into<String>, episodes: u64, e: &Estimate) -> Self {
        SummaryRow {
            agent: agent.into(),
            episodes,
            mean: e.mean,
            stderr: e.stderr,
            ci: e.ci_halfwidth,
            n: e.n,
            discards: e.discards,
        }
    }
}

pub fn summary_csv(rows: &[SummaryRow]) -> Result<String> {
    csv_body(|w| {
        for r in rows {
            w.serialize(r)?;
        }
        Ok(())
    })
}

/// Reads summary rows back, skipping comment lines.
pub fn read_summary_csv(path: &Path) -> Result<Vec<SummaryRow>> {
    let mut r = csv::ReaderBuilder::new().comment(Some(b'#')).from_path(path)?;
    let rows = r.deserialize().collect::<Result<Vec<SummaryRow>, _>>()?;
    Ok(rows)
}

/// Human-readable block for one estimate.
pub fn estimate_text(label: &str, episodes: u64, e: &Estimate) -> String {
    let mut s = format!(
        "{label}  T={episodes}  mean {:.4} ± {:.4}  (stderr {:.4}, n {}, discards {}, rejects {})\n",
        e.mean, e.ci_halfwidth, e.stderr, e.n, e.discards, e.rejects
    );
    for r in &e.strata {
        s.push_str(&format!(
            "    stratum {:>3} {:<36} w {:.5}  n {:>6}  mean {:9.4}  sd {:9.4}\n",
            r.id, r.predicate, r.weight, r.n, r.mean, r.sd
        ));
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::estimator::DiscardRecord;
    use crate::seed::DrawKey;

    #[test]
    fn trial_log_rows() {
        let o = DrawOutcome {
            key: DrawKey::new(2, 7),
            stratum: Some(11),
            program: ",.".into(),
            scores: vec![(50.0, -50.0)],
            discards: vec![DiscardRecord {
                program: "+[,.]".into(),
                status: "step_limit".into(),
            }],
            rejects: 3,
        };
        let text = trial_log(&[AgentSpec::random()], &[o]).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "sample_idx,stratum,program,agent,score0,score1,status");
        assert_eq!(lines[1], "7,11,\"+[,.]\",,,,step_limit");
        assert_eq!(lines[2], "7,11,\",.\",random,50,-50,ok");
    }

    #[test]
    fn summary_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("s.csv");
        let rows = vec![SummaryRow {
            agent: "freq:eps=0.05".into(),
            episodes: 100,
            mean: 1.0 / 3.0,
            stderr: 0.1,
            ci: 0.196,
            n: 10,
            discards: 1,
        }];
        write_text(
            &path,
            &Provenance::new("aiq eval", 4),
            &[],
            &summary_csv(&rows).unwrap(),
        )
        .unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        assert!(text.starts_with("# command: aiq eval\n# seed: 4\n"));
        assert_eq!(read_summary_csv(&path).unwrap(), rows);
    }
}
