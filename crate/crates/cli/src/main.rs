use std::fs;
use std::io::{self, BufWriter};
use std::path::PathBuf;
use std::process::ExitCode;

use aiq::agents::{serve, AgentSpec};
use aiq::harness::output::write_text;
use aiq::harness::{
    cdf_table, collect_series, expand_grid, lengths_from_trial_log, program_table, run_distribution_analysis,
    run_experiment, sample_programs, series_table, ExperimentConfig, LengthCdf, Mode, Provenance, RunOptions,
};
use aiq::sampler::{build_stratum_table, Scheme};
use aiq::{ConfigError, Error};
use clap::{Args, Parser, Subcommand};

/// Estimate the Algorithmic Intelligence Quotient of reinforcement-learning
/// agents over sampled BF environment programs.
#[derive(Parser, Debug)]
#[command(name = "aiq", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Stratum table operations.
    #[command(subcommand)]
    Strata(StrataCommand),
    /// Write a table of screened programs with their stratum features.
    Sample(SampleArgs),
    /// Estimate the AIQ of one or more agents.
    Eval(EvalArgs),
    /// Estimate AIQ(b) - AIQ(a) with common random numbers.
    Compare(CompareArgs),
    /// Evaluate a parameter grid on one shared program sample.
    Sweep(SweepArgs),
    /// Write the CDF of screened program lengths.
    Dist(DistArgs),
    /// Merge summary files into agent-by-episode-length series.
    Plotdata(PlotArgs),
    /// Serve a built-in agent over the external-agent line protocol.
    #[command(hide = true)]
    ServeAgent {
        #[arg(long)]
        agent: String,
    },
}

#[derive(Subcommand, Debug)]
enum StrataCommand {
    /// Pre-sample programs and write the stratum table.
    Build(StrataBuildArgs),
}

#[derive(Args, Debug)]
struct CommonArgs {
    /// Base config file of `key = value` lines; flags override it.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Alphabet size m.
    #[arg(long)]
    num_symbols: Option<u32>,
    /// Observation cells per percept.
    #[arg(long)]
    obs_cells: Option<usize>,
    /// Instructions a program may run per cycle.
    #[arg(long)]
    step_limit: Option<u64>,
    /// Longest raw program the sampler returns.
    #[arg(long)]
    max_program_len: Option<usize>,
    /// Skip the random-action dry run when screening programs.
    #[arg(long)]
    no_dry_run: bool,
    /// Cycles of the screening dry run.
    #[arg(long)]
    dry_run_cycles: Option<usize>,
    /// Master seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads; 0 uses every core.
    #[arg(long)]
    threads: Option<usize>,
    /// Extra `key=value` config overrides.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
}

#[derive(Args, Debug)]
struct RunArgs {
    #[command(flatten)]
    common: CommonArgs,
    /// Antithetic pairs per agent and episode length.
    #[arg(long)]
    samples: Option<u64>,
    /// Episode lengths, comma separated.
    #[arg(long)]
    episodes: Option<String>,
    /// Pairs per batch; checkpoints fall on batch boundaries.
    #[arg(long)]
    batch: Option<u64>,
    /// Geometric discount in [0, 1), or `none` for the mean reward.
    #[arg(long)]
    discount: Option<String>,
    /// Directory for trial logs, summaries and checkpoints.
    #[arg(long)]
    out_dir: Option<PathBuf>,
    /// Batches between checkpoints; 0 disables them.
    #[arg(long)]
    checkpoint_interval: Option<usize>,
    /// Draw attempts per sample before giving up.
    #[arg(long)]
    max_attempts: Option<u64>,
}

#[derive(Args, Debug)]
struct StrataBuildArgs {
    #[command(flatten)]
    common: CommonArgs,
    /// Programs to pre-sample.
    #[arg(long, default_value_t = 100_000)]
    presample: u64,
    /// `motif-length` or `responsive`.
    #[arg(long, default_value = "motif-length")]
    scheme: String,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Debug)]
struct SampleArgs {
    #[command(flatten)]
    common: CommonArgs,
    /// Number of programs.
    #[arg(long, default_value_t = 20)]
    n: u64,
    /// Output file; stdout when absent.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct EvalArgs {
    #[command(flatten)]
    run: RunArgs,
    /// Agent spec such as `random`, `freq:eps=0.05` or
    /// `q:alpha=0.5,gamma=0.8,lambda=0.8,eps=0.02`; repeatable.
    #[arg(long)]
    agent: Vec<String>,
    /// Stratum table; switches to adaptive stratified sampling.
    #[arg(long)]
    table: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct CompareArgs {
    #[command(flatten)]
    run: RunArgs,
    #[arg(long)]
    agent_a: String,
    #[arg(long)]
    agent_b: String,
}

#[derive(Args, Debug)]
struct SweepArgs {
    #[command(flatten)]
    run: RunArgs,
    /// Agent spec with `|`-separated alternatives, e.g. `freq:eps=0.01|0.1`;
    /// repeatable.
    #[arg(long, required = true)]
    grid: Vec<String>,
}

#[derive(Args, Debug)]
struct DistArgs {
    #[command(flatten)]
    common: CommonArgs,
    /// Programs to sample for the prior CDF.
    #[arg(long, default_value_t = 200_000)]
    n: u64,
    /// Trial log whose evaluated programs are overlaid as a second CDF.
    #[arg(long)]
    log: Option<PathBuf>,
    #[arg(long, default_value = "length_cdf.csv")]
    out: PathBuf,
}

#[derive(Args, Debug)]
struct PlotArgs {
    /// `summary.csv` files from earlier runs.
    #[arg(long = "in", required = true, num_args = 1..)]
    inputs: Vec<PathBuf>,
    #[arg(long, default_value = "series.csv")]
    out: PathBuf,
}

fn command_line() -> String {
    std::env::args()
        .map(|a| {
            if !a.is_empty() && a.chars().all(|c| c.is_ascii_alphanumeric() || "-_=.,:/+@%".contains(c)) {
                a
            } else {
                format!("'{}'", a.replace('\'', r"'\''"))
            }
        })
        .collect::<Vec<_>>()
        .join(" ")
}

fn apply(cfg: &mut ExperimentConfig, pairs: Vec<(&str, Option<String>)>) -> Result<(), ConfigError> {
    for (k, v) in pairs {
        if let Some(v) = v {
            cfg.set(k, &v)?;
        }
    }
    Ok(())
}

fn resolve_common(c: &CommonArgs) -> Result<ExperimentConfig, Error> {
    let mut cfg = match &c.config {
        Some(p) => ExperimentConfig::from_text(&fs::read_to_string(p)?)?,
        None => ExperimentConfig::default(),
    };
    apply(
        &mut cfg,
        vec![
            ("num_symbols", c.num_symbols.map(|v| v.to_string())),
            ("obs_cells", c.obs_cells.map(|v| v.to_string())),
            ("step_limit", c.step_limit.map(|v| v.to_string())),
            ("max_program_len", c.max_program_len.map(|v| v.to_string())),
            ("dry_run", c.no_dry_run.then(|| "false".into())),
            ("dry_run_cycles", c.dry_run_cycles.map(|v| v.to_string())),
            ("seed", c.seed.map(|v| v.to_string())),
            ("threads", c.threads.map(|v| v.to_string())),
        ],
    )?;
    for kv in &c.set {
        let (k, v) = kv
            .split_once('=')
            .ok_or_else(|| ConfigError::Invalid(format!("--set expects KEY=VALUE, got {kv:?}")))?;
        let k = k.trim();
        if k == "agent" {
            return Err(ConfigError::Invalid("use --agent to set agents".into()).into());
        }
        cfg.set(k, v)?;
    }
    cfg.machine.validate()?;
    Ok(cfg)
}

fn resolve_run(r: &RunArgs, mode: Mode, agents: &[String], table: Option<&PathBuf>) -> Result<ExperimentConfig, Error> {
    let mut cfg = resolve_common(&r.common)?;
    apply(
        &mut cfg,
        vec![
            ("samples", r.samples.map(|v| v.to_string())),
            ("episodes", r.episodes.clone()),
            ("batch", r.batch.map(|v| v.to_string())),
            ("discount", r.discount.clone()),
            ("out_dir", r.out_dir.as_ref().map(|p| p.display().to_string())),
            ("checkpoint_interval", r.checkpoint_interval.map(|v| v.to_string())),
            ("max_attempts", r.max_attempts.map(|v| v.to_string())),
        ],
    )?;
    cfg.mode = mode;
    if let Some(t) = table {
        cfg.table = Some(t.clone());
    }
    if !agents.is_empty() {
        cfg.agents.clear();
        for a in agents {
            cfg.set("agent", a)?;
        }
    }
    cfg.validate()?;
    Ok(cfg)
}

/// Prints the resolved config to stderr in the file format, so the output
/// can be fed back with `--config`.
fn announce(cfg: &ExperimentConfig) {
    eprintln!("# resolved config (master seed {})", cfg.seed);
    eprint!("{}", cfg.to_text());
}

fn global_pool(threads: usize) {
    // a second call in one process keeps the first pool
    let _ = rayon::ThreadPoolBuilder::new().num_threads(threads).build_global();
}

fn run_and_print(cfg: &ExperimentConfig) -> Result<(), Error> {
    announce(cfg);
    let opts = RunOptions {
        provenance: Provenance::new(command_line(), cfg.seed),
        ..RunOptions::default()
    };
    let report = run_experiment(cfg, &opts)?;
    print!("{}", report.text());
    println!("results written to {}", cfg.out_dir.display());
    Ok(())
}

fn run(cli: Cli) -> Result<(), Error> {
    match cli.command {
        Command::Strata(StrataCommand::Build(a)) => {
            let cfg = resolve_common(&a.common)?;
            let scheme: Scheme = a.scheme.parse()?;
            announce(&cfg);
            global_pool(cfg.threads);
            let table = build_stratum_table(a.presample, cfg.seed, scheme, &cfg.machine, &cfg.screen)?;
            let prov = Provenance::new(command_line(), cfg.seed);
            if let Some(dir) = a.out.parent().filter(|d| !d.as_os_str().is_empty()) {
                fs::create_dir_all(dir)?;
            }
            fs::write(&a.out, table.to_text(&prov.lines()))?;
            println!("{} strata written to {}", table.len(), a.out.display());
        }
        Command::Sample(a) => {
            let cfg = resolve_common(&a.common)?;
            announce(&cfg);
            global_pool(cfg.threads);
            let programs = sample_programs(a.n, cfg.seed, &cfg.machine, &cfg.screen);
            let body = program_table(&programs, &cfg.machine)?;
            match &a.out {
                Some(p) => write_text(p, &Provenance::new(command_line(), cfg.seed), &[], &body)?,
                None => print!("{body}"),
            }
        }
        Command::Eval(a) => {
            let mode = if a.table.is_some() {
                Mode::Stratified
            } else {
                Mode::Simple
            };
            let cfg = resolve_run(&a.run, mode, &a.agent, a.table.as_ref())?;
            run_and_print(&cfg)?;
        }
        Command::Compare(a) => {
            let cfg = resolve_run(&a.run, Mode::Compare, &[a.agent_a, a.agent_b], None)?;
            run_and_print(&cfg)?;
        }
        Command::Sweep(a) => {
            let mut grid = Vec::new();
            for g in &a.grid {
                grid.extend(expand_grid(g)?);
            }
            let specs: Vec<String> = grid.iter().map(AgentSpec::to_string).collect();
            let cfg = resolve_run(&a.run, Mode::Sweep, &specs, None)?;
            run_and_print(&cfg)?;
        }
        Command::Dist(a) => {
            let cfg = resolve_common(&a.common)?;
            announce(&cfg);
            global_pool(cfg.threads);
            let prior = run_distribution_analysis(a.n, cfg.seed, &cfg.machine, &cfg.screen)?;
            let overlay = match &a.log {
                Some(p) => Some(LengthCdf::from_lengths(lengths_from_trial_log(p)?)),
                None => None,
            };
            let prov = Provenance::new(command_line(), cfg.seed);
            let extra = vec![format!("programs: {}", a.n)];
            write_text(&a.out, &prov, &extra, &cdf_table(&prior, overlay.as_ref()))?;
            println!("P(length <= 10) = {:.4}", prior.at(10));
            if let Some(o) = &overlay {
                println!("P(length <= 10 | evaluated) = {:.4}", o.at(10));
            }
            println!("written to {}", a.out.display());
        }
        Command::Plotdata(a) => {
            let rows = collect_series(&a.inputs)?;
            let inputs: Vec<String> = a.inputs.iter().map(|p| format!("input: {}", p.display())).collect();
            write_text(
                &a.out,
                &Provenance::new(command_line(), 0),
                &inputs,
                &series_table(&rows),
            )?;
            println!("{} rows written to {}", rows.len(), a.out.display());
        }
        Command::ServeAgent { agent } => {
            let spec: AgentSpec = agent.parse()?;
            let mut agent = spec.build()?;
            let stdin = io::stdin().lock();
            serve(agent.as_mut(), stdin, BufWriter::new(io::stdout().lock())).map_err(io::Error::other)?;
        }
    }
    Ok(())
}

fn exit_code(e: &Error) -> u8 {
    match e {
        _ if e.is_config() => 2,
        Error::Io(_) | Error::Csv(_) | Error::Json(_) => 3,
        _ => 1,
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("aiq: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
