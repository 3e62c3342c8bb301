//! End-to-end exercises of the `gradtaint` binary: exit codes, file
//! plumbing, recipe resolution, and idempotent re-runs. Result quality is
//! covered by the acceptance suite; these tests keep sizes tiny.

use std::path::Path;
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_gradtaint"))
}

fn run_in(workdir: &Path, args: &[&str]) -> Output {
    bin()
        .arg("--workdir")
        .arg(workdir)
        .args(args)
        .output()
        .expect("binary runs")
}

fn ok(workdir: &Path, args: &[&str]) -> String {
    let out = run_in(workdir, args);
    assert!(
        out.status.success(),
        "command {args:?} failed:\nstdout: {}\nstderr: {}",
        String::from_utf8_lossy(&out.stdout),
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8_lossy(&out.stdout).into_owned()
}

fn read(workdir: &Path, name: &str) -> String {
    std::fs::read_to_string(workdir.join(name))
        .unwrap_or_else(|e| panic!("reading {name}: {e}"))
}

#[test]
fn full_pipeline_produces_every_artifact() {
    let dir = tempfile::tempdir().unwrap();
    let w = dir.path();
    ok(w, &["collect", "--target", "vuln-len", "--count", "200", "--rng-seed", "3"]);
    ok(w, &["train", "--target", "vuln-len", "--hidden", "8", "--epochs", "6", "--rng-seed", "3"]);
    ok(w, &["saliency"]);
    ok(w, &["hot-bytes", "--fraction", "0.05"]);
    let stdout = ok(w, &["score", "--target", "vuln-len", "--method", "neural"]);
    assert!(stdout.contains("accuracy="), "score prints a summary: {stdout}");
    ok(
        w,
        &[
            "fuzz",
            "--target",
            "vuln-len",
            "--front-end",
            "random",
            "--iter",
            "3",
            "--budget-secs",
            "5",
            "--rng-seed",
            "3",
        ],
    );
    ok(w, &["flows", "--target", "vuln-len", "--count", "4", "--rng-seed", "3"]);
    ok(w, &["report"]);

    assert!(read(w, "data.ndjson").lines().count() > 200, "dataset lines: samples + header");
    let metrics = read(w, "metrics.csv");
    assert!(metrics.starts_with("train_samples,test_samples,pruned_sinks,final_loss"));
    assert!(read(w, "saliency.csv").starts_with("byte_index,score,rank\n"));
    let hot = read(w, "hot.csv");
    assert!(hot.starts_with("rank,byte_index\n"));
    assert_eq!(hot.lines().count(), 1 + 12, "5% of 256 bytes = 12 hot bytes");
    assert!(read(w, "score.csv").starts_with("target,method,hot,tp,fp,accuracy,fpr\n"));
    assert!(read(w, "campaign_random.csv").starts_with("timestamp_ms,edges_total,mutants_total\n"));
    let config = read(w, "campaign_random.config.txt");
    assert!(config.contains("target=vuln-len\n") && config.contains("front_end=random\n"));
    assert!(read(w, "flows.csv").starts_with("input_id,byte_index,sink_id,detector\n"));
    assert!(read(w, "flow_summary.csv").starts_with("target,total,neural,rule_dta\n"));
    let timings = read(w, "timings.csv");
    assert!(timings.starts_with("phase,seconds\n"));
    assert!(timings.contains("data_collection,") && timings.contains("training,"));

    let report = read(w, "report.md");
    for section in
        ["## Hot-byte accuracy", "## Edge coverage", "## Information flow", "## Runtime breakdown"]
    {
        assert!(report.contains(section), "report.md lacks {section}");
    }
    assert!(report.contains("vuln-len"));
    let report_csv = read(w, "report.csv");
    assert!(report_csv.starts_with("table,target,metric,value\n"));
    for row in ["hot_accur,vuln-len,neural.accuracy,", "edge_coverage,vuln-len,random,", "info_loss,vuln-len,total,"] {
        assert!(report_csv.contains(row), "report.csv lacks {row}:\n{report_csv}");
    }
}

#[test]
fn reruns_overwrite_pure_outputs_identically() {
    let dir = tempfile::tempdir().unwrap();
    let w = dir.path();
    ok(w, &["collect", "--target", "compose", "--count", "80", "--rng-seed", "1"]);
    ok(w, &["train", "--target", "compose", "--hidden", "4", "--epochs", "5", "--rng-seed", "1"]);
    ok(w, &["saliency"]);
    ok(w, &["hot-bytes", "--fraction", "0.2"]);
    ok(w, &["score", "--target", "compose"]);
    let snapshot = |w: &Path| -> Vec<Vec<u8>> {
        ["data.ndjson", "model.gtnn", "saliency.csv", "hot.csv", "score.csv"]
            .iter()
            .map(|f| std::fs::read(w.join(f)).unwrap())
            .collect()
    };
    let before = snapshot(w);
    ok(w, &["collect", "--target", "compose", "--count", "80", "--rng-seed", "1"]);
    ok(w, &["train", "--target", "compose", "--hidden", "4", "--epochs", "5", "--rng-seed", "1"]);
    ok(w, &["saliency"]);
    ok(w, &["hot-bytes", "--fraction", "0.2"]);
    ok(w, &["score", "--target", "compose"]);
    let after = snapshot(w);
    assert_eq!(before, after, "seeded re-runs must reproduce outputs byte-for-byte");
}

#[test]
fn recipe_supplies_defaults_and_flags_override() {
    let dir = tempfile::tempdir().unwrap();
    let w = dir.path();
    std::fs::write(
        w.join("run.recipe"),
        "# pinned run\ntarget=compose\ncount=30\nrng_seed=7\nhidden=4\nepochs=4\n",
    )
    .unwrap();
    let recipe = w.join("run.recipe");
    let recipe = recipe.to_str().unwrap();
    ok(w, &["--recipe", recipe, "collect"]);
    let from_recipe = read(w, "data.ndjson").lines().count();
    ok(w, &["--recipe", recipe, "collect", "--count", "60"]);
    let overridden = read(w, "data.ndjson").lines().count();
    assert!(overridden > from_recipe, "--count must override the recipe value");
    ok(w, &["--recipe", recipe, "train"]);
    ok(w, &["--recipe", recipe, "saliency", "--scope", "fine:compose.z"]);
    assert!(read(w, "saliency.csv").starts_with("byte_index,score,rank\n"));
}

#[test]
fn saliency_variants_mean_pgm_and_input_file() {
    let dir = tempfile::tempdir().unwrap();
    let w = dir.path();
    ok(w, &["collect", "--target", "compose", "--count", "60", "--rng-seed", "2"]);
    ok(w, &["train", "--target", "compose", "--hidden", "4", "--epochs", "4", "--rng-seed", "2"]);
    ok(w, &["saliency", "--mean-over", "data.ndjson", "--pgm", "map.pgm", "--pgm-height", "4"]);
    let pgm = std::fs::read(w.join("map.pgm")).unwrap();
    assert!(pgm.starts_with(b"P5\n"), "PGM header");
    std::fs::write(w.join("probe.bin"), [9u8, 1, 2, 3, 4, 5]).unwrap();
    ok(w, &["saliency", "--input-file", "probe.bin"]);
    let out = run_in(w, &["saliency", "--input-file", "probe.bin", "--mean-over", "data.ndjson"]);
    assert_eq!(out.status.code(), Some(2), "mutually exclusive sources");
}

#[test]
fn sweep_emits_stratum_rows() {
    let dir = tempfile::tempdir().unwrap();
    let w = dir.path();
    ok(
        w,
        &[
            "sweep",
            "--target",
            "vuln-len",
            "--corpus-count",
            "1600",
            "--test-count",
            "6",
            "--strata",
            "5,full",
            "--hidden",
            "4",
            "--epochs",
            "4",
            "--rng-seed",
            "2",
        ],
    );
    let sweep = read(w, "sweep.csv");
    let mut lines = sweep.lines();
    assert_eq!(lines.next(), Some("sinks_covered,flows_detected"));
    assert_eq!(lines.count(), 2, "one row per stratum");
}

#[test]
fn usage_errors_exit_one_and_help_exits_zero() {
    let dir = tempfile::tempdir().unwrap();
    let w = dir.path();
    assert_eq!(run_in(w, &["collect", "--no-such-flag"]).status.code(), Some(1));
    assert_eq!(run_in(w, &["no-such-command"]).status.code(), Some(1));
    assert_eq!(run_in(w, &[]).status.code(), Some(1));
    assert_eq!(run_in(w, &["--help"]).status.code(), Some(0));
    assert_eq!(run_in(w, &["fuzz", "--help"]).status.code(), Some(0));
}

#[test]
fn contract_errors_exit_two() {
    let dir = tempfile::tempdir().unwrap();
    let w = dir.path();
    // Unknown target.
    assert_eq!(
        run_in(w, &["collect", "--target", "toy-pdf", "--count", "5"]).status.code(),
        Some(2)
    );
    // Missing dataset file.
    assert_eq!(run_in(w, &["train", "--target", "compose"]).status.code(), Some(2));
    // Missing required option entirely.
    assert_eq!(run_in(w, &["collect", "--target", "compose"]).status.code(), Some(2));
    // Bad strategy name.
    assert_eq!(
        run_in(w, &["collect", "--target", "compose", "--count", "5", "--strategy", "exhaustive"])
            .status
            .code(),
        Some(2)
    );
    // Bad GT_THREADS value.
    ok(w, &["collect", "--target", "compose", "--count", "40", "--rng-seed", "1"]);
    ok(w, &["train", "--target", "compose", "--hidden", "4", "--epochs", "4", "--rng-seed", "1"]);
    let out = bin()
        .arg("--workdir")
        .arg(w)
        .args(["flows", "--target", "compose", "--count", "3"])
        .env("GT_THREADS", "zero")
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn report_on_empty_directory_is_header_only() {
    let dir = tempfile::tempdir().unwrap();
    let w = dir.path();
    ok(w, &["report"]);
    let report = read(w, "report.md");
    assert!(report.contains("## Hot-byte accuracy"));
    assert!(report.contains("## Edge coverage"));
    assert!(report.contains("## Information flow"));
    assert_eq!(read(w, "report.csv"), "table,target,metric,value\n");
    // Re-running with the report files present must not feed them back in.
    ok(w, &["report"]);
    assert_eq!(read(w, "report.csv"), "table,target,metric,value\n");
}
