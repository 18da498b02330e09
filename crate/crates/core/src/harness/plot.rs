use std::path::Path;

use super::output::{read_summary_csv, SummaryRow};
use crate::Result;

/// Collects summary rows from several runs into agent-by-episode-length
/// series, sorted by agent then `T`. A later file overrides an earlier one
/// for the same `(agent, T)`.
pub fn collect_series<P: AsRef<Path>>(paths: &[P]) -> Result<Vec<SummaryRow>> {
    let mut rows: Vec<SummaryRow> = Vec::new();
    for p in paths {
        for r in read_summary_csv(p.as_ref())? {
            rows.retain(|x| !(x.agent == r.agent && x.episodes == r.episodes));
            rows.push(r);
        }
    }
    rows.sort_by(|a, b| a.agent.cmp(&b.agent).then(a.episodes.cmp(&b.episodes)));
    Ok(rows)
}

/// `agent,episodes,mean,ci_low,ci_high` lines.
pub fn series_table(rows: &[SummaryRow]) -> String {
    let mut s = String::from("agent,episodes,mean,ci_low,ci_high\n");
    for r in rows {
        let agent = if r.agent.contains([',', '"']) {
            format!("\"{}\"", r.agent.replace('"', "\"\""))
        } else {
            r.agent.clone()
        };
        s.push_str(&format!(
            "{agent},{},{},{},{}\n",
            r.episodes,
            r.mean,
            r.mean - r.ci,
            r.mean + r.ci
        ));
    }
    s
}
