use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::{Deserialize, Serialize};

use super::checkpoint::Checkpoint;
use super::config::{ExperimentConfig, Mode};
use super::output::{estimate_text, summary_csv, trial_log, write_text, Provenance, SummaryRow};
use super::sweep::best_index;
use crate::agents::AgentSpec;
use crate::error::ConfigError;
use crate::estimator::{ComparisonResult, DrawOutcome, Estimate, Session};
use crate::sampler::StratumTable;
use crate::{Error, Result};

#[derive(Debug, Clone, Default)]
pub struct RunOptions {
    pub provenance: Provenance,
    /// Stop with [`Error::Interrupted`] after this many batches, leaving a
    /// checkpoint behind. Used to exercise resumption.
    pub stop_after_batches: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgentEstimate {
    pub agent: String,
    pub estimate: Estimate,
}

/// Machine-readable result for one episode length.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimateRecord {
    pub command: String,
    pub seed: u64,
    pub mode: String,
    pub episodes: u64,
    pub agents: Vec<AgentEstimate>,
    /// `b - a` in compare mode.
    pub delta: Option<Estimate>,
    /// Winning spec in sweep mode.
    pub best: Option<String>,
}

#[derive(Debug, Clone)]
pub struct EpisodeResult {
    pub episodes: u64,
    pub estimates: Vec<(AgentSpec, Estimate)>,
    pub comparison: Option<ComparisonResult>,
    pub best: Option<usize>,
    /// Every evaluated draw, job by job.
    pub outcomes: Vec<DrawOutcome>,
    pub record: EstimateRecord,
    pub seconds: f64,
}

#[derive(Debug, Clone)]
pub struct ExperimentReport {
    pub results: Vec<EpisodeResult>,
    pub files: Vec<PathBuf>,
}

impl ExperimentReport {
    pub fn summary_rows(&self) -> Vec<SummaryRow> {
        let mut rows = Vec::new();
        for r in &self.results {
            for (a, e) in &r.estimates {
                rows.push(SummaryRow::new(a.to_string(), r.episodes, e));
            }
            if let Some(c) = &r.comparison {
                rows.push(SummaryRow::new("delta(b-a)", r.episodes, &c.delta));
            }
        }
        rows
    }

    pub fn text(&self) -> String {
        self.results.iter().map(episode_text).collect()
    }
}

fn episode_text(r: &EpisodeResult) -> String {
    let mut s = String::new();
    for (a, e) in &r.estimates {
        s.push_str(&estimate_text(&a.to_string(), r.episodes, e));
    }
    if let Some(c) = &r.comparison {
        s.push_str(&estimate_text("delta(b-a)", r.episodes, &c.delta));
    }
    if let Some(b) = r.best {
        s.push_str(&format!("best: {}\n", r.estimates[b].0));
    }
    s
}

/// Config text without the keys that only affect scheduling or file
/// placement, so a checkpoint stays valid across thread counts.
fn fingerprint(cfg: &ExperimentConfig) -> String {
    let mut c = cfg.clone();
    c.threads = 0;
    c.out_dir = PathBuf::new();
    c.checkpoint_interval = 0;
    c.to_text()
}

pub fn load_table(path: &Path) -> Result<StratumTable> {
    let text =
        fs::read_to_string(path).map_err(|e| ConfigError::Invalid(format!("stratum table {}: {e}", path.display())))?;
    Ok(StratumTable::from_text(&text)?)
}

struct JobContext<'c> {
    cfg: &'c ExperimentConfig,
    fingerprint: String,
    episodes: u64,
    stop_after: Option<usize>,
}

enum JobOutput {
    Estimates(Vec<Estimate>),
    Comparison(Box<ComparisonResult>),
}

fn run_job(
    ctx: &JobContext<'_>,
    job: usize,
    agents: Vec<AgentSpec>,
    table: Option<&StratumTable>,
    batches_run: &mut usize,
) -> Result<(JobOutput, Vec<DrawOutcome>)> {
    let cfg = ctx.cfg;
    let cp_path = Checkpoint::path(&cfg.out_dir, ctx.episodes, job);
    let checkpoints = cfg.checkpoint_interval > 0 || ctx.stop_after.is_some();
    let loaded = if checkpoints {
        Checkpoint::load_matching(&cp_path, &ctx.fingerprint, ctx.episodes, job)?
    } else {
        None
    };
    let mut cp = loaded.unwrap_or_else(|| Checkpoint {
        fingerprint: ctx.fingerprint.clone(),
        episodes: ctx.episodes,
        job,
        batches: 0,
        outcomes: Vec::new(),
    });
    let interval = cfg.checkpoint_interval;
    let stop_after = ctx.stop_after;
    let cached = cp.outcomes.clone();
    let mut session = Session::new(cfg.seed, agents, cfg.trial_config(ctx.episodes))
        .with_completed(cached)
        .on_batch(|fresh| {
            *batches_run += 1;
            cp.batches += 1;
            cp.outcomes.extend_from_slice(fresh);
            let stop = stop_after.is_some_and(|s| *batches_run >= s);
            if stop || (interval > 0 && cp.batches % interval == 0) {
                cp.save(&cp_path)?;
            }
            if stop {
                return Err(Error::Interrupted(*batches_run));
            }
            Ok(())
        });
    let out = match (cfg.mode, table) {
        (Mode::Stratified, Some(t)) => JobOutput::Estimates(vec![session.stratified(t, cfg.samples, cfg.batch)?]),
        (Mode::Compare, _) => JobOutput::Comparison(Box::new(session.compare(cfg.samples, cfg.batch)?)),
        _ => JobOutput::Estimates(session.simple(cfg.samples, cfg.batch)?),
    };
    let outcomes = session.into_outcomes();
    if cp_path.is_file() {
        fs::remove_file(&cp_path)?;
    }
    Ok((out, outcomes))
}

/// Runs every episode length of `cfg` and writes, under `cfg.out_dir`:
/// `trials_T<T>.csv`, `summary_T<T>.txt`, `summary_T<T>.json` per length,
/// then `summary.csv` and `timing.txt`. Everything except `timing.txt` is a
/// pure function of the config.
pub fn run_experiment(cfg: &ExperimentConfig, opts: &RunOptions) -> Result<ExperimentReport> {
    cfg.validate()?;
    let table = match (cfg.mode, &cfg.table) {
        (Mode::Stratified, Some(p)) => Some(load_table(p)?),
        _ => None,
    };
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.threads)
        .build()
        .map_err(|e| ConfigError::Invalid(format!("thread pool: {e}")))?;
    fs::create_dir_all(&cfg.out_dir)?;
    let prov = &opts.provenance;
    let config_lines: Vec<String> = cfg.to_text().lines().map(|l| format!("config: {l}")).collect();
    let mut files = Vec::new();
    let mut results = Vec::new();
    let mut timing = String::from("episodes,seconds\n");
    let mut batches_run = 0usize;

    for &episodes in &cfg.episodes {
        let started = Instant::now();
        let ctx = JobContext {
            cfg,
            fingerprint: fingerprint(cfg),
            episodes,
            stop_after: opts.stop_after_batches,
        };
        let jobs: Vec<Vec<AgentSpec>> = match cfg.mode {
            Mode::Stratified => cfg.agents.iter().map(|a| vec![a.clone()]).collect(),
            _ => vec![cfg.agents.clone()],
        };
        let mut estimates = Vec::new();
        let mut comparison = None;
        let mut outcomes = Vec::new();
        for (job, agents) in jobs.into_iter().enumerate() {
            let (out, mut o) = pool.install(|| run_job(&ctx, job, agents.clone(), table.as_ref(), &mut batches_run))?;
            match out {
                JobOutput::Estimates(es) => estimates.extend(agents.into_iter().zip(es)),
                JobOutput::Comparison(c) => {
                    estimates.push((agents[0].clone(), c.a.clone()));
                    estimates.push((agents[1].clone(), c.b.clone()));
                    comparison = Some(*c);
                }
            }
            outcomes.append(&mut o);
        }
        let best = (cfg.mode == Mode::Sweep)
            .then(|| best_index(&estimates.iter().map(|(_, e)| e.clone()).collect::<Vec<_>>()));
        let record = EstimateRecord {
            command: prov.command.clone(),
            seed: cfg.seed,
            mode: cfg.mode.to_string(),
            episodes,
            agents: estimates
                .iter()
                .map(|(a, e)| AgentEstimate {
                    agent: a.to_string(),
                    estimate: e.clone(),
                })
                .collect(),
            delta: comparison.as_ref().map(|c| c.delta.clone()),
            best: best.map(|b| estimates[b].0.to_string()),
        };
        let result = EpisodeResult {
            episodes,
            estimates,
            comparison,
            best,
            outcomes,
            record,
            seconds: started.elapsed().as_secs_f64(),
        };

        let log_agents: Vec<AgentSpec> = match cfg.mode {
            Mode::Stratified => vec![],
            _ => cfg.agents.clone(),
        };
        let log = if cfg.mode == Mode::Stratified {
            // each job evaluated its own draws with a single agent
            let mut body = String::new();
            let mut first = true;
            let mut start = 0;
            for (i, a) in cfg.agents.iter().enumerate() {
                let n = job_len(&result.outcomes[start..], i, cfg.agents.len());
                let part = trial_log(std::slice::from_ref(a), &result.outcomes[start..start + n])?;
                body.push_str(if first {
                    &part
                } else {
                    part.split_once('\n').map_or("", |x| x.1)
                });
                first = false;
                start += n;
            }
            body
        } else {
            trial_log(&log_agents, &result.outcomes)?
        };
        let p = cfg.out_dir.join(format!("trials_T{episodes}.csv"));
        write_text(&p, prov, &config_lines, &log)?;
        files.push(p);
        let p = cfg.out_dir.join(format!("summary_T{episodes}.txt"));
        write_text(&p, prov, &[], &episode_text(&result))?;
        files.push(p);
        let p = cfg.out_dir.join(format!("summary_T{episodes}.json"));
        fs::write(&p, serde_json::to_string_pretty(&result.record)? + "\n")?;
        files.push(p);
        timing.push_str(&format!("{episodes},{:.3}\n", result.seconds));
        results.push(result);
    }

    let report = ExperimentReport { results, files };
    let p = cfg.out_dir.join("summary.csv");
    write_text(&p, prov, &config_lines, &summary_csv(&report.summary_rows())?)?;
    let mut files = report.files.clone();
    files.push(p);
    let p = cfg.out_dir.join("timing.txt");
    write_text(&p, prov, &[], &timing)?;
    files.push(p);
    Ok(ExperimentReport { files, ..report })
}

/// Number of leading outcomes that belong to job `job`: a job's draws run
/// until the next job restarts its keys at stratum 0, index 0.
fn job_len(outcomes: &[DrawOutcome], job: usize, jobs: usize) -> usize {
    if job + 1 == jobs {
        return outcomes.len();
    }
    outcomes
        .iter()
        .enumerate()
        .skip(1)
        .find(|(_, o)| o.key.stratum == 0 && o.key.index == 0)
        .map_or(outcomes.len(), |(i, _)| i)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn base(dir: &Path) -> ExperimentConfig {
        ExperimentConfig {
            agents: vec![AgentSpec::freq(0.05)],
            samples: 30,
            episodes: vec![20, 40],
            batch: 8,
            out_dir: dir.to_path_buf(),
            ..ExperimentConfig::default()
        }
    }

    fn read_all(files: &[PathBuf]) -> Vec<(String, String)> {
        files
            .iter()
            .filter(|p| !p.ends_with("timing.txt"))
            .map(|p| {
                (
                    p.file_name().unwrap().to_string_lossy().into(),
                    fs::read_to_string(p).unwrap(),
                )
            })
            .collect()
    }

    #[test]
    fn random_summary_is_zero() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = ExperimentConfig {
            agents: vec![AgentSpec::random()],
            samples: 100,
            episodes: vec![100],
            ..base(dir.path())
        };
        let r = run_experiment(&cfg, &RunOptions::default()).unwrap();
        let row = &r.summary_rows()[0];
        assert_eq!((row.mean, row.ci), (0.0, 0.0));
        let text = fs::read_to_string(dir.path().join("summary.csv")).unwrap();
        assert!(text.contains("random,100,0.0,0.0,0.0,100,"), "{text}");
    }

    #[test]
    fn outputs_are_reproducible_and_thread_independent() {
        let a = tempfile::tempdir().unwrap();
        let b = tempfile::tempdir().unwrap();
        let opts = RunOptions {
            provenance: Provenance::new("aiq eval --test", 1),
            ..RunOptions::default()
        };
        let ra = run_experiment(
            &ExperimentConfig {
                threads: 1,
                ..base(a.path())
            },
            &opts,
        )
        .unwrap();
        let rb = run_experiment(
            &ExperimentConfig {
                threads: 8,
                ..base(b.path())
            },
            &opts,
        )
        .unwrap();
        let (fa, fb) = (read_all(&ra.files), read_all(&rb.files));
        assert_eq!(fa.len(), 7);
        for ((na, ta), (nb, tb)) in fa.iter().zip(&fb) {
            assert_eq!(na, nb);
            // config text records the thread count; everything else matches
            let strip = |t: &str| {
                t.lines()
                    .filter(|l| !l.contains("threads =") && !l.contains("out_dir ="))
                    .collect::<Vec<_>>()
                    .join("\n")
            };
            assert_eq!(strip(ta), strip(tb), "{na}");
        }
        assert!(fa
            .iter()
            .all(|(_, t)| t.starts_with("# command: aiq eval --test\n# seed: 1\n") || t.starts_with('{')));
    }

    #[test]
    fn interrupted_run_resumes_to_identical_outputs() {
        let full_dir = tempfile::tempdir().unwrap();
        let cut_dir = tempfile::tempdir().unwrap();
        let full = run_experiment(&base(full_dir.path()), &RunOptions::default()).unwrap();
        let cfg = base(cut_dir.path());
        for stop in [2, 3] {
            let r = run_experiment(
                &cfg,
                &RunOptions {
                    stop_after_batches: Some(stop),
                    ..RunOptions::default()
                },
            );
            assert!(matches!(r, Err(Error::Interrupted(_))), "{r:?}");
        }
        assert!(Checkpoint::path(cut_dir.path(), 20, 0).is_file());
        let resumed = run_experiment(&cfg, &RunOptions::default()).unwrap();
        assert!(!Checkpoint::path(cut_dir.path(), 20, 0).is_file());
        let strip = |files: &[PathBuf]| {
            read_all(files)
                .into_iter()
                .map(|(n, t)| {
                    (
                        n,
                        t.lines()
                            .filter(|l| !l.contains("out_dir"))
                            .collect::<Vec<_>>()
                            .join("\n"),
                    )
                })
                .collect::<Vec<_>>()
        };
        assert_eq!(strip(&full.files), strip(&resumed.files));
    }

    #[test]
    fn compare_and_sweep_modes() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = ExperimentConfig {
            mode: Mode::Compare,
            agents: vec![AgentSpec::random(), AgentSpec::freq(0.05)],
            episodes: vec![50],
            ..base(dir.path())
        };
        let r = run_experiment(&cfg, &RunOptions::default()).unwrap();
        let c = r.results[0].comparison.as_ref().unwrap();
        assert_eq!(c.diffs.len(), 30);
        assert_eq!(r.results[0].record.delta.as_ref().unwrap(), &c.delta);

        let cfg = ExperimentConfig {
            mode: Mode::Sweep,
            agents: vec![AgentSpec::freq(1.0), AgentSpec::freq(0.05)],
            ..cfg
        };
        let r = run_experiment(&cfg, &RunOptions::default()).unwrap();
        assert_eq!(r.results[0].best, Some(1));
    }

    #[test]
    fn stratified_mode_logs_each_agent() {
        let dir = tempfile::tempdir().unwrap();
        let table_path = dir.path().join("whole.tsv");
        fs::write(&table_path, StratumTable::whole().to_text(&[])).unwrap();
        let cfg = ExperimentConfig {
            mode: Mode::Stratified,
            agents: vec![AgentSpec::random(), AgentSpec::freq(0.05)],
            samples: 20,
            episodes: vec![30],
            table: Some(table_path),
            ..base(dir.path())
        };
        let r = run_experiment(&cfg, &RunOptions::default()).unwrap();
        assert_eq!(r.results[0].estimates.len(), 2);
        assert_eq!(r.results[0].estimates[0].1.mean, 0.0);
        let log = fs::read_to_string(dir.path().join("trials_T30.csv")).unwrap();
        let ok_rows = log.lines().filter(|l| l.ends_with(",ok")).count();
        assert_eq!(ok_rows, 40);
        assert_eq!(log.lines().filter(|l| l.starts_with("sample_idx")).count(), 1);
    }

    #[test]
    fn missing_table_is_a_config_error() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = ExperimentConfig {
            mode: Mode::Stratified,
            table: Some(dir.path().join("nope.tsv")),
            ..base(dir.path())
        };
        let err = run_experiment(&cfg, &RunOptions::default()).unwrap_err();
        assert!(err.is_config());
    }
}
