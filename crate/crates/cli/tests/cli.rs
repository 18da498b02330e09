use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use aiq::harness::ExperimentConfig;

const BIN: &str = env!("CARGO_BIN_EXE_aiq");

fn aiq(args: &[&str]) -> Output {
    Command::new(BIN).args(args).output().expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn path(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn random_eval_prints_exact_zero() {
    let dir = tempfile::tempdir().unwrap();
    let o = aiq(&[
        "eval",
        "--agent",
        "random",
        "--samples",
        "100",
        "--episodes",
        "100",
        "--seed",
        "1",
        "--out-dir",
        path(dir.path()),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(stdout(&o).contains("mean 0.0000 ± 0.0000"), "{}", stdout(&o));
    for f in ["summary.csv", "summary_T100.txt", "trials_T100.csv"] {
        let text = fs::read_to_string(dir.path().join(f)).unwrap();
        assert!(text.starts_with("# command: "), "{f}");
        assert!(text.contains("eval --agent random --samples 100"), "{f}");
        assert!(text.contains("# seed: 1\n"), "{f}");
    }
}

#[test]
fn resolved_config_reparses_to_itself() {
    let dir = tempfile::tempdir().unwrap();
    let o = aiq(&[
        "eval",
        "--agent",
        "freq:eps=0.1",
        "--agent",
        "random",
        "--samples",
        "6",
        "--episodes",
        "10,20",
        "--discount",
        "0.9",
        "--seed",
        "77",
        "--batch",
        "3",
        "--num-symbols",
        "4",
        "--set",
        "max_attempts=50",
        "--out-dir",
        path(dir.path()),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let err = stderr(&o);
    assert!(err.contains("master seed 77"));
    let cfg = ExperimentConfig::from_text(&err).unwrap();
    assert_eq!(
        cfg.to_text(),
        err.lines().skip(1).map(|l| format!("{l}\n")).collect::<String>()
    );
    assert_eq!(cfg.seed, 77);
    assert_eq!(cfg.episodes, vec![10, 20]);
    assert_eq!(cfg.discount, Some(0.9));
    assert_eq!(cfg.machine.num_symbols, 4);
    assert_eq!(cfg.max_attempts, 50);
    assert_eq!(cfg.agents.len(), 2);

    // the printed config is a valid --config file
    let file = dir.path().join("resolved.txt");
    fs::write(&file, &err).unwrap();
    let o2 = aiq(&["eval", "--config", path(&file)]);
    assert!(o2.status.success(), "{}", stderr(&o2));
    assert_eq!(stdout(&o), stdout(&o2));
}

#[test]
fn hlq_is_a_config_error_naming_the_reference() {
    let o = aiq(&["eval", "--agent", "hlq", "--samples", "10"]);
    assert_eq!(o.status.code(), Some(2));
    let e = stderr(&o);
    assert!(e.contains("hlq") && e.contains("external reference"), "{e}");
    assert_eq!(e.trim().lines().count(), 1);
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(aiq(&["eval", "--bogus-flag"]).status.code(), Some(2));
    assert_eq!(
        aiq(&["eval", "--agent", "random", "--set", "nope=1"]).status.code(),
        Some(2)
    );
    assert_eq!(
        aiq(&["eval", "--agent", "random", "--samples", "0"]).status.code(),
        Some(2)
    );
    assert_eq!(
        aiq(&["compare", "--agent-a", "random", "--agent-b", "q:alpha=2"])
            .status
            .code(),
        Some(2)
    );
    let missing = dir.path().join("missing.tsv");
    assert_eq!(
        aiq(&["eval", "--agent", "random", "--table", path(&missing)])
            .status
            .code(),
        Some(2)
    );
    let blocker = dir.path().join("file");
    fs::write(&blocker, "").unwrap();
    let under_file = blocker.join("out");
    let o = aiq(&[
        "eval",
        "--agent",
        "random",
        "--samples",
        "4",
        "--episodes",
        "5",
        "--out-dir",
        path(&under_file),
    ]);
    assert_eq!(o.status.code(), Some(3), "{}", stderr(&o));
    assert!(aiq(&["--help"]).status.success());
}

#[test]
fn help_documents_every_run_flag() {
    let h = stdout(&aiq(&["eval", "--help"]));
    for flag in [
        "--config",
        "--num-symbols",
        "--obs-cells",
        "--step-limit",
        "--max-program-len",
        "--no-dry-run",
        "--dry-run-cycles",
        "--seed",
        "--threads",
        "--set",
        "--samples",
        "--episodes",
        "--batch",
        "--discount",
        "--out-dir",
        "--checkpoint-interval",
        "--max-attempts",
        "--agent",
        "--table",
    ] {
        assert!(h.contains(flag), "{flag} missing from eval --help");
    }
    for cmd in ["strata", "sample", "eval", "compare", "sweep", "dist", "plotdata"] {
        assert!(stdout(&aiq(&["--help"])).contains(cmd));
    }
}

#[test]
fn dist_is_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a.csv");
    let b = dir.path().join("b.csv");
    for out in [&a, &b] {
        let o = aiq(&["dist", "--n", "1000", "--seed", "1", "--out", path(out)]);
        assert!(o.status.success(), "{}", stderr(&o));
    }
    let strip = |p: &Path| {
        fs::read_to_string(p)
            .unwrap()
            .lines()
            .filter(|l| !l.starts_with("# command"))
            .collect::<Vec<_>>()
            .join("\n")
    };
    assert_eq!(strip(&a), strip(&b));
    assert!(strip(&a).contains("length,count,cdf"));
    assert_eq!(aiq(&["dist", "--n", "10", "--out", path(&a)]).status.code(), Some(2));
}

#[test]
fn sample_writes_program_table() {
    let o = aiq(&["sample", "--n", "7", "--seed", "3"]);
    assert!(o.status.success());
    let out = stdout(&o);
    assert!(out.starts_with("index,program,length,motif,length_bin,responsive\n"));
    let mut r = csv::Reader::from_reader(out.as_bytes());
    assert_eq!(r.records().count(), 7);
}

#[test]
fn strata_build_then_stratified_eval() {
    let dir = tempfile::tempdir().unwrap();
    let table = dir.path().join("strata.tsv");
    let o = aiq(&[
        "strata",
        "build",
        "--presample",
        "100000",
        "--seed",
        "5",
        "--out",
        path(&table),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let text = fs::read_to_string(&table).unwrap();
    assert!(text.contains("# command: ") && text.contains("# seed: 5"));
    assert!(text.contains("scheme=motif-length-v1"));
    let o = aiq(&["strata", "build", "--presample", "10", "--out", path(&table)]);
    assert_eq!(o.status.code(), Some(2));
    let o = aiq(&["strata", "build", "--scheme", "nonsense", "--out", path(&table)]);
    assert_eq!(o.status.code(), Some(2));

    let o = aiq(&[
        "strata",
        "build",
        "--seed",
        "5",
        "--scheme",
        "responsive",
        "--out",
        path(&table),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let out = dir.path().join("run");
    let o = aiq(&[
        "eval",
        "--agent",
        "random",
        "--table",
        path(&table),
        "--samples",
        "400",
        "--episodes",
        "20",
        "--batch",
        "50",
        "--out-dir",
        path(&out),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let s = stdout(&o);
    assert!(s.contains("mean 0.0000 ± 0.0000"), "{s}");
    assert!(s.contains("stratum"), "{s}");
}

#[test]
fn compare_sweep_and_plotdata() {
    let dir = tempfile::tempdir().unwrap();
    let c = dir.path().join("c");
    let o = aiq(&[
        "compare",
        "--agent-a",
        "random",
        "--agent-b",
        "freq:eps=0.05",
        "--samples",
        "20",
        "--episodes",
        "30",
        "--out-dir",
        path(&c),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(stdout(&o).contains("delta(b-a)"));

    let s = dir.path().join("s");
    let o = aiq(&[
        "sweep",
        "--grid",
        "freq:eps=0|0.5|1",
        "--grid",
        "random",
        "--samples",
        "10",
        "--episodes",
        "20,40",
        "--out-dir",
        path(&s),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert_eq!(stdout(&o).matches("best: ").count(), 2);
    let summary = fs::read_to_string(s.join("summary.csv")).unwrap();
    let rows = summary.lines().filter(|l| !l.starts_with('#')).count() - 1;
    assert_eq!(rows, 4 * 2);

    let series = dir.path().join("series.csv");
    let o = aiq(&[
        "plotdata",
        "--in",
        path(&c.join("summary.csv")),
        path(&s.join("summary.csv")),
        "--out",
        path(&series),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let text = fs::read_to_string(&series).unwrap();
    assert!(text.contains("agent,episodes,mean,ci_low,ci_high\n"));
    assert!(text.contains("\nrandom,20,0,0,0\n"), "{text}");
    assert!(text.contains("\nrandom,30,0,0,0\n"), "{text}");
}

#[test]
fn served_builtin_agent_matches_in_process() {
    let dir = tempfile::tempdir().unwrap();
    for inner in ["random", "freq:eps=0.05"] {
        let ext = format!("ext:cmd={BIN} serve-agent --agent {inner}");
        let o = aiq(&[
            "eval",
            "--agent",
            &ext,
            "--agent",
            inner,
            "--samples",
            "40",
            "--episodes",
            "40",
            "--out-dir",
            path(dir.path()),
        ]);
        assert!(o.status.success(), "{}", stderr(&o));
        let out = stdout(&o);
        let means: Vec<&str> = out.lines().filter_map(|l| l.split("  T=40  ").nth(1)).collect();
        assert_eq!(means.len(), 2, "{out}");
        assert_eq!(means[0], means[1]);
    }
}
