//! Command-line driver for the gradtaint pipeline.
//!
//! Subcommands cover the full experiment loop: `collect` execution traces,
//! `train` a surrogate model, derive `saliency` maps and `hot-bytes`,
//! `score` hot bytes against ground truth, run mutation campaigns (`fuzz`),
//! evaluate information flows (`flows`, `sweep`), and aggregate every
//! result CSV in a working directory into one report (`report`).
//!
//! Every knob resolves from three places, in priority order: an explicit
//! flag, a `--recipe` file of `key=value` lines, then the built-in default.
//! Relative paths resolve against `--workdir`. Exit codes: 0 success,
//! 1 usage error, 2 contract violation (bad arguments, missing files,
//! malformed data). `GT_THREADS` caps flow-oracle worker parallelism.

use clap::{Parser, Subcommand};
use gradtaint::corpus::{fit_length, generate_corpus, Strategy, DEFAULT_FLIP_MAX};
use gradtaint::embedding::{fit_neural_program, FitMode, NeuralProgram, TraceDataset};
use gradtaint::error::{Error, Result};
use gradtaint::floweval::{
    coverage_sweep, detect_flows_neural, detect_flows_rule_dta, flow_csv, flow_summary_csv,
    ground_truth_flows_par, FlowSummaryRow, FlowThreshold, DEFAULT_RELATIVE_THRESHOLD,
};
use gradtaint::fuzz::{
    campaign_csv, config_kv, neural_ranking, random_ranking, rule_dta_ranking, run_campaign,
    CampaignConfig, FrontEnd,
};
use gradtaint::nn::TrainConfig;
use gradtaint::recipe::Recipe;
use gradtaint::saliency::{
    coarse_saliency, fine_saliency, hot_count, mean_coarse_saliency, pgm_strip, saliency_csv,
    top_k, HotByteSet, SaliencyMap, Scope,
};
use gradtaint::score::{hot_byte_accuracy, score_csv, Phase, PhaseTimer};
use gradtaint::targets::{build_target, Target};
use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::time::Duration;

#[derive(Parser)]
#[command(name = "gradtaint", version, about = "Neural taint inference pipeline")]
struct Cli {
    /// Recipe file of key=value defaults; explicit flags override it.
    #[arg(long, global = true)]
    recipe: Option<PathBuf>,
    /// Directory all relative paths resolve against.
    #[arg(long, global = true, default_value = ".")]
    workdir: PathBuf,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Generate a trace corpus for a target and save it as NDJSON.
    Collect {
        #[arg(long)]
        target: Option<String>,
        /// Number of samples (seed variants) to trace.
        #[arg(long)]
        count: Option<usize>,
        /// Mutation strategy: random_flip | coverage_guided.
        #[arg(long)]
        strategy: Option<String>,
        /// Upper bound on byte flips per mutant.
        #[arg(long)]
        flip_max: Option<usize>,
        #[arg(long)]
        rng_seed: Option<u64>,
        /// Base input file; defaults to the target's canonical seed.
        #[arg(long)]
        seed_file: Option<String>,
        /// Output dataset path.
        #[arg(long)]
        out: Option<String>,
    },
    /// Fit a neural surrogate on a collected dataset.
    Train {
        /// Input dataset (as written by `collect`).
        #[arg(long)]
        data: Option<String>,
        #[arg(long)]
        target: Option<String>,
        #[arg(long)]
        hidden: Option<usize>,
        #[arg(long)]
        epochs: Option<usize>,
        /// Model family: mlp | logistic.
        #[arg(long)]
        mode: Option<String>,
        #[arg(long)]
        rng_seed: Option<u64>,
        /// Output checkpoint path.
        #[arg(long)]
        out: Option<String>,
        /// Output fit-metrics CSV path.
        #[arg(long)]
        metrics: Option<String>,
    },
    /// Compute a saliency map from a trained checkpoint.
    Saliency {
        #[arg(long)]
        model: Option<String>,
        /// coarse | fine:<sink_id>.
        #[arg(long)]
        scope: Option<String>,
        /// Evaluate at this input file instead of the target seed.
        #[arg(long)]
        input_file: Option<String>,
        /// Average the coarse map over every input in this dataset.
        #[arg(long)]
        mean_over: Option<String>,
        #[arg(long)]
        out: Option<String>,
        /// Also emit the map as a grayscale PGM strip.
        #[arg(long)]
        pgm: Option<String>,
        #[arg(long)]
        pgm_height: Option<usize>,
    },
    /// Select the top-fraction hot bytes from a saliency map.
    HotBytes {
        /// Input saliency CSV.
        #[arg(long)]
        map: Option<String>,
        #[arg(long)]
        fraction: Option<f64>,
        #[arg(long)]
        out: Option<String>,
    },
    /// Score a hot-byte set against a target's ground truth.
    Score {
        /// Input hot-byte CSV.
        #[arg(long)]
        hot: Option<String>,
        #[arg(long)]
        target: Option<String>,
        /// Label for the method column.
        #[arg(long)]
        method: Option<String>,
        #[arg(long)]
        out: Option<String>,
    },
    /// Run a ranked mutation campaign against a target.
    Fuzz {
        #[arg(long)]
        target: Option<String>,
        /// neural | rule_dta | random.
        #[arg(long)]
        front_end: Option<String>,
        /// Number of doubling rounds.
        #[arg(long)]
        iter: Option<usize>,
        #[arg(long)]
        budget_secs: Option<u64>,
        #[arg(long)]
        rng_seed: Option<u64>,
        /// Campaign seed input; defaults to the target's canonical seed.
        #[arg(long)]
        seed_file: Option<String>,
        /// Checkpoint for the neural front end.
        #[arg(long)]
        model: Option<String>,
        /// Dataset whose inputs drive the rule_dta ranking.
        #[arg(long)]
        data: Option<String>,
        #[arg(long)]
        out: Option<String>,
        /// Campaign configuration key=value file.
        #[arg(long)]
        config_out: Option<String>,
    },
    /// Compare detected flows against the exhaustive oracle on unseen inputs.
    Flows {
        #[arg(long)]
        target: Option<String>,
        #[arg(long)]
        model: Option<String>,
        /// Number of unseen test inputs.
        #[arg(long)]
        count: Option<usize>,
        #[arg(long)]
        flip_max: Option<usize>,
        #[arg(long)]
        rng_seed: Option<u64>,
        /// rel:<f> (fraction of per-input max) or abs:<f>.
        #[arg(long)]
        threshold: Option<String>,
        #[arg(long)]
        out: Option<String>,
        #[arg(long)]
        summary: Option<String>,
    },
    /// Sweep detected flows across sink-coverage strata of one corpus.
    Sweep {
        #[arg(long)]
        target: Option<String>,
        #[arg(long)]
        corpus_count: Option<usize>,
        #[arg(long)]
        test_count: Option<usize>,
        /// Comma-separated sink counts; `full` means every sink.
        #[arg(long)]
        strata: Option<String>,
        #[arg(long)]
        hidden: Option<usize>,
        #[arg(long)]
        epochs: Option<usize>,
        #[arg(long)]
        flip_max: Option<usize>,
        #[arg(long)]
        rng_seed: Option<u64>,
        #[arg(long)]
        threshold: Option<String>,
        #[arg(long)]
        out: Option<String>,
    },
    /// Aggregate every known result CSV under the workdir into a report.
    Report {
        #[arg(long)]
        out_md: Option<String>,
        #[arg(long)]
        out_csv: Option<String>,
    },
}

fn main() {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
            let _ = e.print();
            std::process::exit(code);
        }
    };
    if let Err(e) = run(cli) {
        eprintln!("error: {e}");
        std::process::exit(2);
    }
}

fn run(cli: Cli) -> Result<()> {
    let recipe = match &cli.recipe {
        Some(path) => Recipe::parse(&std::fs::read_to_string(path)?)?,
        None => Recipe::new(),
    };
    let ctx = Ctx { workdir: cli.workdir.clone(), recipe };
    match cli.cmd {
        Cmd::Collect { target, count, strategy, flip_max, rng_seed, seed_file, out } => {
            cmd_collect(&ctx, target, count, strategy, flip_max, rng_seed, seed_file, out)
        }
        Cmd::Train { data, target, hidden, epochs, mode, rng_seed, out, metrics } => {
            cmd_train(&ctx, data, target, hidden, epochs, mode, rng_seed, out, metrics)
        }
        Cmd::Saliency { model, scope, input_file, mean_over, out, pgm, pgm_height } => {
            cmd_saliency(&ctx, model, scope, input_file, mean_over, out, pgm, pgm_height)
        }
        Cmd::HotBytes { map, fraction, out } => cmd_hot_bytes(&ctx, map, fraction, out),
        Cmd::Score { hot, target, method, out } => cmd_score(&ctx, hot, target, method, out),
        Cmd::Fuzz {
            target,
            front_end,
            iter,
            budget_secs,
            rng_seed,
            seed_file,
            model,
            data,
            out,
            config_out,
        } => cmd_fuzz(
            &ctx, target, front_end, iter, budget_secs, rng_seed, seed_file, model, data, out,
            config_out,
        ),
        Cmd::Flows { target, model, count, flip_max, rng_seed, threshold, out, summary } => {
            cmd_flows(&ctx, target, model, count, flip_max, rng_seed, threshold, out, summary)
        }
        Cmd::Sweep {
            target,
            corpus_count,
            test_count,
            strata,
            hidden,
            epochs,
            flip_max,
            rng_seed,
            threshold,
            out,
        } => cmd_sweep(
            &ctx, target, corpus_count, test_count, strata, hidden, epochs, flip_max, rng_seed,
            threshold, out,
        ),
        Cmd::Report { out_md, out_csv } => cmd_report(&ctx, out_md, out_csv),
    }
}

/// Shared option resolution: flag value, then recipe key, then default.
struct Ctx {
    workdir: PathBuf,
    recipe: Recipe,
}

impl Ctx {
    fn path(&self, rel: &str) -> PathBuf {
        let p = Path::new(rel);
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            self.workdir.join(p)
        }
    }

    fn opt<T>(&self, flag: Option<T>, key: &str, default: T) -> Result<T>
    where
        T: std::str::FromStr,
        T::Err: std::fmt::Display,
    {
        match flag {
            Some(v) => Ok(v),
            None => self.recipe.get_or(key, default),
        }
    }

    fn req<T>(&self, flag: Option<T>, key: &str) -> Result<T>
    where
        T: std::str::FromStr,
        T::Err: std::fmt::Display,
    {
        match flag {
            Some(v) => Ok(v),
            None if self.recipe.contains(key) => self.recipe.require_as(key),
            None => Err(Error::contract(format!(
                "missing {key}: pass --{} or set `{key}` in the recipe",
                key.replace('_', "-")
            ))),
        }
    }

    fn opt_str(&self, flag: Option<String>, key: &str, default: &str) -> String {
        flag.or_else(|| self.recipe.get(key).map(str::to_string))
            .unwrap_or_else(|| default.to_string())
    }

    fn maybe_str(&self, flag: Option<String>, key: &str) -> Option<String> {
        flag.or_else(|| self.recipe.get(key).map(str::to_string))
    }

    fn target(&self, flag: Option<String>) -> Result<Target> {
        let name = self.maybe_str(flag, "target").ok_or_else(|| {
            Error::contract("no target: pass --target or set `target` in the recipe")
        })?;
        build_target(&name)
    }
}

fn write_out(path: &Path, bytes: &[u8]) -> Result<()> {
    if let Some(parent) = path.parent() {
        if !parent.as_os_str().is_empty() {
            std::fs::create_dir_all(parent)?;
        }
    }
    std::fs::write(path, bytes)?;
    println!("wrote {}", path.display());
    Ok(())
}

/// Merges one phase's wall-clock seconds into `timings.csv`, keeping the
/// other phases' previous values.
fn update_timings(ctx: &Ctx, phase: Phase, seconds: f64) -> Result<()> {
    let path = ctx.path("timings.csv");
    let mut spent: BTreeMap<&str, f64> = Phase::ALL.iter().map(|p| (p.name(), 0.0)).collect();
    if let Ok(text) = std::fs::read_to_string(&path) {
        for line in text.lines().skip(1) {
            let Some((name, secs)) = line.split_once(',') else { continue };
            if let (Some(slot), Ok(v)) = (spent.get_mut(name), secs.parse::<f64>()) {
                *slot = v;
            }
        }
    }
    spent.insert(phase.name(), seconds);
    let mut out = String::from("phase,seconds\n");
    let mut total = 0.0;
    for p in Phase::ALL {
        let v = spent[p.name()];
        total += v;
        writeln!(out, "{},{:.3}", p.name(), v).expect("string write");
    }
    writeln!(out, "total,{total:.3}").expect("string write");
    write_out(&path, out.as_bytes())
}

/// Worker count for the flow oracle: hardware parallelism, capped by the
/// GT_THREADS environment variable when set.
fn gt_threads() -> Result<usize> {
    let hw = std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1);
    match std::env::var("GT_THREADS") {
        Err(_) => Ok(hw),
        Ok(raw) => match raw.parse::<usize>() {
            Ok(cap) if cap >= 1 => Ok(hw.min(cap)),
            _ => Err(Error::contract(format!(
                "GT_THREADS must be a positive integer, got {raw:?}"
            ))),
        },
    }
}

fn read_seed_file(ctx: &Ctx, path: &str, m: usize) -> Result<Vec<u8>> {
    let bytes = std::fs::read(ctx.path(path))?;
    Ok(fit_length(&bytes, m))
}

fn parse_strategy(s: &str) -> Result<Strategy> {
    Strategy::parse(s)
        .ok_or_else(|| Error::contract(format!("unknown strategy {s:?} (random_flip | coverage_guided)")))
}

fn parse_threshold(s: &str) -> Result<FlowThreshold> {
    let (kind, value) = s
        .split_once(':')
        .ok_or_else(|| Error::contract(format!("threshold {s:?} is not rel:<f> or abs:<f>")))?;
    let v: f64 = value
        .parse()
        .map_err(|e| Error::contract(format!("threshold value {value:?}: {e}")))?;
    match kind {
        "rel" | "relative" => Ok(FlowThreshold::RelativeToMax(v)),
        "abs" | "absolute" => Ok(FlowThreshold::Absolute(v)),
        _ => Err(Error::contract(format!("threshold kind {kind:?} is not rel or abs"))),
    }
}

fn parse_scope(s: &str) -> Result<Scope> {
    if s == "coarse" {
        return Ok(Scope::Coarse);
    }
    match s.split_once(':') {
        Some(("fine", sink)) if !sink.is_empty() => Ok(Scope::Fine(sink.to_string())),
        _ => Err(Error::contract(format!("scope {s:?} is not coarse or fine:<sink_id>"))),
    }
}

/// Offset mixed into the RNG seed for held-out test inputs so they differ
/// from a training corpus collected under the same recipe seed.
const TEST_SEED_OFFSET: u64 = 0x7e57;

fn dataset_inputs(ds: &TraceDataset) -> Vec<Vec<u8>> {
    (0..ds.len()).map(|i| ds.input(i).to_vec()).collect()
}

#[allow(clippy::too_many_arguments)]
fn cmd_collect(
    ctx: &Ctx,
    target: Option<String>,
    count: Option<usize>,
    strategy: Option<String>,
    flip_max: Option<usize>,
    rng_seed: Option<u64>,
    seed_file: Option<String>,
    out: Option<String>,
) -> Result<()> {
    let target = ctx.target(target)?;
    let count = ctx.req(count, "count")?;
    let strategy = parse_strategy(&ctx.opt_str(strategy, "strategy", "random_flip"))?;
    let flip_max = ctx.opt(flip_max, "flip_max", DEFAULT_FLIP_MAX)?;
    let rng_seed = ctx.opt(rng_seed, "rng_seed", 0)?;
    let seed = match ctx.maybe_str(seed_file, "seed_file") {
        Some(path) => read_seed_file(ctx, &path, target.input_len())?,
        None => target.seed.clone(),
    };
    let out = ctx.path(&ctx.opt_str(out, "data_out", "data.ndjson"));

    let mut timer = PhaseTimer::new();
    let ds = timer.time(Phase::DataCollection, || {
        generate_corpus(&target.program, &seed, count, rng_seed, strategy, flip_max)
    })?;
    ds.save(&out)?;
    println!("wrote {} ({} samples, m={})", out.display(), ds.len(), ds.m());
    update_timings(ctx, Phase::DataCollection, timer.duration(Phase::DataCollection).as_secs_f64())
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

#[allow(clippy::too_many_arguments)]
fn cmd_train(
    ctx: &Ctx,
    data: Option<String>,
    target: Option<String>,
    hidden: Option<usize>,
    epochs: Option<usize>,
    mode: Option<String>,
    rng_seed: Option<u64>,
    out: Option<String>,
    metrics: Option<String>,
) -> Result<()> {
    let data = ctx.path(&ctx.opt_str(data, "data_out", "data.ndjson"));
    let target = ctx.target(target)?;
    let hidden = ctx.opt(hidden, "hidden", 64)?;
    let epochs = ctx.opt(epochs, "epochs", TrainConfig::default().epochs)?;
    let mode = match ctx.opt_str(mode, "mode", "mlp").as_str() {
        "mlp" => FitMode::Mlp,
        "logistic" => FitMode::Logistic,
        other => return Err(Error::contract(format!("unknown mode {other:?} (mlp | logistic)"))),
    };
    let rng_seed = ctx.opt(rng_seed, "rng_seed", 0)?;
    let out = ctx.path(&ctx.opt_str(out, "model_out", "model.gtnn"));
    let metrics_path = ctx.path(&ctx.opt_str(metrics, "metrics_out", "metrics.csv"));

    let mut ds = TraceDataset::load(&data)?;
    let cfg = TrainConfig { epochs, rng_seed, ..TrainConfig::default() };
    let mut timer = PhaseTimer::new();
    let (np, fit) = timer.time(Phase::Training, || -> Result<_> {
        ds.prune_constant_sinks()?;
        ds.normalize()?;
        fit_neural_program(&ds, &cfg, hidden, mode, target.name())
    })?;
    np.save(&out)?;
    println!("wrote {} ({} sinks, hidden={hidden})", out.display(), np.sinks.len());

    let final_loss = fit.epoch_losses.last().copied().unwrap_or(f64::NAN);
    let csv = format!(
        "train_samples,test_samples,pruned_sinks,final_loss,test_accuracy,test_mse\n\
         {},{},{},{final_loss},{},{}\n",
        fit.train_samples,
        fit.test_samples,
        fit.pruned_sink_ids.len(),
        fmt_opt(fit.test_accuracy),
        fmt_opt(fit.test_mse),
    );
    write_out(&metrics_path, csv.as_bytes())?;
    update_timings(ctx, Phase::Training, timer.duration(Phase::Training).as_secs_f64())
}

#[allow(clippy::too_many_arguments)]
fn cmd_saliency(
    ctx: &Ctx,
    model: Option<String>,
    scope: Option<String>,
    input_file: Option<String>,
    mean_over: Option<String>,
    out: Option<String>,
    pgm: Option<String>,
    pgm_height: Option<usize>,
) -> Result<()> {
    let model = ctx.path(&ctx.opt_str(model, "model_out", "model.gtnn"));
    let scope = parse_scope(&ctx.opt_str(scope, "scope", "coarse"))?;
    let out = ctx.path(&ctx.opt_str(out, "saliency_out", "saliency.csv"));
    let np = NeuralProgram::load(&model)?;
    let m = np.net.input_dim();

    let input_file = ctx.maybe_str(input_file, "input_file");
    let mean_over = ctx.maybe_str(mean_over, "mean_over");
    if input_file.is_some() && mean_over.is_some() {
        return Err(Error::contract("--input-file and --mean-over are mutually exclusive"));
    }

    let mut timer = PhaseTimer::new();
    let map = timer.time(Phase::Saliency, || -> Result<SaliencyMap> {
        if let Some(data) = &mean_over {
            if let Scope::Fine(_) = scope {
                return Err(Error::contract("mean maps are coarse only"));
            }
            let ds = TraceDataset::load(&ctx.path(data))?;
            return mean_coarse_saliency(&np, &dataset_inputs(&ds));
        }
        let input = match &input_file {
            Some(path) => read_seed_file(ctx, path, m)?,
            None => build_target(&np.target_name)?.seed,
        };
        match &scope {
            Scope::Coarse => coarse_saliency(&np, &input),
            Scope::Fine(sink) => fine_saliency(&np, &input, sink),
        }
    })?;
    write_out(&out, saliency_csv(&map).as_bytes())?;
    if let Some(pgm_path) = ctx.maybe_str(pgm, "pgm_out") {
        let height = ctx.opt(pgm_height, "pgm_height", 16)?;
        write_out(&ctx.path(&pgm_path), &pgm_strip(&map, height))?;
    }
    update_timings(ctx, Phase::Saliency, timer.duration(Phase::Saliency).as_secs_f64())
}

/// Reads back a `byte_index,score,rank` CSV into per-byte scores.
fn parse_saliency_csv(text: &str) -> Result<Vec<f64>> {
    let mut lines = text.lines();
    match lines.next() {
        Some("byte_index,score,rank") => {}
        other => {
            return Err(Error::format(
                "saliency csv",
                format!("unexpected header {other:?}"),
            ))
        }
    }
    let mut scores = Vec::new();
    for (row, line) in lines.enumerate() {
        let mut cols = line.split(',');
        let (Some(idx), Some(score)) = (cols.next(), cols.next()) else {
            return Err(Error::format("saliency csv", format!("row {row}: too few columns")));
        };
        let idx: usize = idx
            .parse()
            .map_err(|e| Error::format("saliency csv", format!("row {row}: {e}")))?;
        if idx != row {
            return Err(Error::format(
                "saliency csv",
                format!("row {row} indexes byte {idx}; rows must be in byte order"),
            ));
        }
        scores.push(
            score.parse().map_err(|e| Error::format("saliency csv", format!("row {row}: {e}")))?,
        );
    }
    if scores.is_empty() {
        return Err(Error::format("saliency csv", "no data rows".to_string()));
    }
    Ok(scores)
}

fn cmd_hot_bytes(
    ctx: &Ctx,
    map: Option<String>,
    fraction: Option<f64>,
    out: Option<String>,
) -> Result<()> {
    let map_path = ctx.path(&ctx.opt_str(map, "saliency_out", "saliency.csv"));
    let fraction = ctx.opt(fraction, "fraction", 0.05)?;
    let out = ctx.path(&ctx.opt_str(out, "hot_out", "hot.csv"));

    let scores = parse_saliency_csv(&std::fs::read_to_string(&map_path)?)?;
    let m = scores.len();
    let map = SaliencyMap { scores, scope: Scope::Coarse, source_input: Vec::new() };
    let hot = top_k(&map, hot_count(m, fraction)?)?;
    let mut csv = String::from("rank,byte_index\n");
    for (rank, idx) in hot.indices.iter().enumerate() {
        writeln!(csv, "{},{idx}", rank + 1).expect("string write");
    }
    write_out(&out, csv.as_bytes())
}

fn parse_hot_csv(text: &str) -> Result<Vec<usize>> {
    let mut lines = text.lines();
    if lines.next() != Some("rank,byte_index") {
        return Err(Error::format("hot csv", "unexpected header".to_string()));
    }
    lines
        .map(|line| {
            let idx = line
                .split_once(',')
                .map(|(_, idx)| idx)
                .ok_or_else(|| Error::format("hot csv", format!("bad row {line:?}")))?;
            idx.parse().map_err(|e| Error::format("hot csv", format!("row {line:?}: {e}")))
        })
        .collect()
}

fn cmd_score(
    ctx: &Ctx,
    hot: Option<String>,
    target: Option<String>,
    method: Option<String>,
    out: Option<String>,
) -> Result<()> {
    let hot_path = ctx.path(&ctx.opt_str(hot, "hot_out", "hot.csv"));
    let target = ctx.target(target)?;
    let method = ctx.opt_str(method, "method", "neural");
    let out = ctx.path(&ctx.opt_str(out, "score_out", "score.csv"));

    let indices = parse_hot_csv(&std::fs::read_to_string(&hot_path)?)?;
    let k = indices.len();
    let hot = HotByteSet { indices, k };
    let score = hot_byte_accuracy(&hot, &target.ground_truth_mask())?;
    println!(
        "{} {method}: accuracy={:.4} fpr={:.4} (tp={} fp={})",
        target.name(),
        score.accuracy,
        score.fpr,
        score.tp,
        score.fp
    );
    let rows = vec![(target.name().to_string(), method, score, k)];
    write_out(&out, score_csv(&rows).as_bytes())
}

#[allow(clippy::too_many_arguments)]
fn cmd_fuzz(
    ctx: &Ctx,
    target: Option<String>,
    front_end: Option<String>,
    iter: Option<usize>,
    budget_secs: Option<u64>,
    rng_seed: Option<u64>,
    seed_file: Option<String>,
    model: Option<String>,
    data: Option<String>,
    out: Option<String>,
    config_out: Option<String>,
) -> Result<()> {
    let target = ctx.target(target)?;
    let fe_name = ctx.opt_str(front_end, "front_end", "neural");
    let fe = FrontEnd::parse(&fe_name)
        .ok_or_else(|| Error::contract(format!("unknown front end {fe_name:?}")))?;
    let cfg = CampaignConfig {
        iter: ctx.opt(iter, "iter", CampaignConfig::default().iter)?,
        time_budget: Duration::from_secs(ctx.opt(budget_secs, "budget_secs", 60)?),
        front_end: fe,
        rng_seed: ctx.opt(rng_seed, "rng_seed", 0)?,
    };
    let seed = match ctx.maybe_str(seed_file, "campaign_seed_file") {
        Some(path) => read_seed_file(ctx, &path, target.input_len())?,
        None => target.seed.clone(),
    };
    let default_out = format!("campaign_{}.csv", fe.name());
    let out = ctx.path(&ctx.opt_str(out, "campaign_out", &default_out));
    let config_path = match ctx.maybe_str(config_out, "campaign_config_out") {
        Some(p) => ctx.path(&p),
        None => out.with_extension("config.txt"),
    };

    let ranking = match fe {
        FrontEnd::Neural => {
            let model = ctx.path(&ctx.opt_str(model, "model_out", "model.gtnn"));
            let np = NeuralProgram::load(&model)?;
            if np.target_name != target.name() {
                return Err(Error::contract(format!(
                    "model was trained on {} but the campaign target is {}",
                    np.target_name,
                    target.name()
                )));
            }
            neural_ranking(&np, &seed)?
        }
        FrontEnd::RuleDta => {
            let data = ctx.path(&ctx.opt_str(data, "data_out", "data.ndjson"));
            let ds = TraceDataset::load(&data)?;
            let inputs = dataset_inputs(&ds);
            rule_dta_ranking(&target.program, inputs.iter().map(Vec::as_slice))?
        }
        FrontEnd::Random => random_ranking(seed.len(), cfg.rng_seed),
    };
    let report = run_campaign(&target.program, &seed, &ranking, &cfg)?;
    println!(
        "{} {}: edges={} mutants={}",
        target.name(),
        fe.name(),
        report.edges_total(),
        report.mutants_total
    );
    write_out(&out, campaign_csv(&report).as_bytes())?;
    write_out(&config_path, config_kv(&cfg, target.name()).as_bytes())
}

fn strip_header(csv: &str) -> &str {
    csv.split_once('\n').map(|(_, rest)| rest).unwrap_or("")
}

#[allow(clippy::too_many_arguments)]
fn cmd_flows(
    ctx: &Ctx,
    target: Option<String>,
    model: Option<String>,
    count: Option<usize>,
    flip_max: Option<usize>,
    rng_seed: Option<u64>,
    threshold: Option<String>,
    out: Option<String>,
    summary: Option<String>,
) -> Result<()> {
    let target = ctx.target(target)?;
    let model = ctx.path(&ctx.opt_str(model, "model_out", "model.gtnn"));
    let count = ctx.opt(count, "flow_count", 100)?;
    let flip_max = ctx.opt(flip_max, "flip_max", DEFAULT_FLIP_MAX)?;
    let rng_seed = ctx.opt(rng_seed, "rng_seed", 0)?;
    let threshold = parse_threshold(&ctx.opt_str(
        threshold,
        "threshold",
        &format!("rel:{DEFAULT_RELATIVE_THRESHOLD}"),
    ))?;
    let out = ctx.path(&ctx.opt_str(out, "flows_out", "flows.csv"));
    let summary_path = ctx.path(&ctx.opt_str(summary, "flow_summary_out", "flow_summary.csv"));

    let np = NeuralProgram::load(&model)?;
    if np.target_name != target.name() {
        return Err(Error::contract(format!(
            "model was trained on {} but flows are for {}",
            np.target_name,
            target.name()
        )));
    }
    let test = generate_corpus(
        &target.program,
        &target.seed,
        count,
        rng_seed.wrapping_add(TEST_SEED_OFFSET),
        Strategy::RandomFlip,
        flip_max,
    )?;
    let inputs = dataset_inputs(&test);
    let truth = ground_truth_flows_par(&target.program, &inputs, gt_threads()?)?;
    let neural = detect_flows_neural(&np, &inputs, threshold)?;
    let rule = detect_flows_rule_dta(&target.program, &inputs)?;

    let mut csv = flow_csv(&truth, "oracle");
    csv.push_str(strip_header(&flow_csv(&neural, "neural")));
    csv.push_str(strip_header(&flow_csv(&rule, "rule_dta")));
    write_out(&out, csv.as_bytes())?;

    let row = FlowSummaryRow {
        target: target.name().to_string(),
        total: truth.len(),
        neural: neural.intersection(&truth).count(),
        rule_dta: rule.intersection(&truth).count(),
    };
    println!(
        "{}: oracle={} neural={} rule_dta={}",
        row.target, row.total, row.neural, row.rule_dta
    );
    write_out(&summary_path, flow_summary_csv(&[row]).as_bytes())
}

/// Parses `strata` like "2,4,full" into sink counts, `full` meaning every
/// sink the target declares.
fn parse_strata(spec: &str, n_sinks: usize) -> Result<Vec<usize>> {
    let mut counts = Vec::new();
    for part in spec.split(',') {
        let part = part.trim();
        let c = if part == "full" {
            n_sinks
        } else {
            part.parse()
                .map_err(|e| Error::contract(format!("stratum {part:?}: {e}")))?
        };
        counts.push(c);
    }
    if counts.is_empty() {
        return Err(Error::contract("empty strata list"));
    }
    Ok(counts)
}

/// Five sink counts evenly spaced up to all `n` sinks.
fn default_strata(n: usize) -> Vec<usize> {
    let mut counts: Vec<usize> = (1..=5).map(|i| (n * i).div_ceil(5)).collect();
    counts.dedup();
    counts
}

#[allow(clippy::too_many_arguments)]
fn cmd_sweep(
    ctx: &Ctx,
    target: Option<String>,
    corpus_count: Option<usize>,
    test_count: Option<usize>,
    strata: Option<String>,
    hidden: Option<usize>,
    epochs: Option<usize>,
    flip_max: Option<usize>,
    rng_seed: Option<u64>,
    threshold: Option<String>,
    out: Option<String>,
) -> Result<()> {
    let target = ctx.target(target)?;
    let corpus_count = ctx.opt(corpus_count, "sweep_corpus_count", 1600)?;
    let test_count = ctx.opt(test_count, "sweep_test_count", 30)?;
    let hidden = ctx.opt(hidden, "sweep_hidden", 8)?;
    let epochs = ctx.opt(epochs, "sweep_epochs", 24)?;
    let flip_max = ctx.opt(flip_max, "flip_max", DEFAULT_FLIP_MAX)?;
    let rng_seed = ctx.opt(rng_seed, "rng_seed", 0)?;
    let threshold = parse_threshold(&ctx.opt_str(
        threshold,
        "threshold",
        &format!("rel:{DEFAULT_RELATIVE_THRESHOLD}"),
    ))?;
    let out = ctx.path(&ctx.opt_str(out, "sweep_out", "sweep.csv"));

    let n_sinks = target.program.sinks.len();
    let counts = match ctx.maybe_str(strata, "strata") {
        Some(spec) => parse_strata(&spec, n_sinks)?,
        None => default_strata(n_sinks),
    };

    let corpus =
        generate_corpus(&target.program, &target.seed, corpus_count, rng_seed, Strategy::RandomFlip, flip_max)?;
    let test = generate_corpus(
        &target.program,
        &target.seed,
        test_count,
        rng_seed.wrapping_add(TEST_SEED_OFFSET),
        Strategy::RandomFlip,
        flip_max,
    )?;
    let inputs = dataset_inputs(&test);
    let truth = ground_truth_flows_par(&target.program, &inputs, gt_threads()?)?;
    let strata_ds = gradtaint::corpus::stratify_by_sink_coverage(&corpus, &counts)?;
    let cfg = TrainConfig { epochs, rng_seed, ..TrainConfig::default() };
    let points = coverage_sweep(&target.program, &strata_ds, &inputs, &truth, &cfg, hidden, threshold)?;

    let mut csv = String::from("sinks_covered,flows_detected\n");
    for p in &points {
        writeln!(csv, "{},{}", p.sinks_covered, p.flows_detected).expect("string write");
    }
    write_out(&out, csv.as_bytes())
}

/// One result file recognized by `report`, keyed by its header line.
enum Known {
    Score(Vec<Vec<String>>),
    Campaign { target: String, front_end: String, edges: String, mutants: String },
    FlowSummary(Vec<Vec<String>>),
    Sweep { source: String, rows: Vec<Vec<String>> },
    Timings { source: String, rows: Vec<Vec<String>> },
}

fn classify_csv(path: &Path, text: &str) -> Option<Known> {
    let mut lines = text.lines();
    let header = lines.next()?;
    let source = path.file_stem()?.to_string_lossy().into_owned();
    let rows =
        |lines: std::str::Lines| -> Vec<Vec<String>> {
            lines.map(|l| l.split(',').map(str::to_string).collect()).collect()
        };
    match header {
        "target,method,hot,tp,fp,accuracy,fpr" => Some(Known::Score(rows(lines))),
        "target,total,neural,rule_dta" => Some(Known::FlowSummary(rows(lines))),
        "sinks_covered,flows_detected" => Some(Known::Sweep { source, rows: rows(lines) }),
        "phase,seconds" => Some(Known::Timings { source, rows: rows(lines) }),
        "timestamp_ms,edges_total,mutants_total" => {
            let last = lines.last();
            let (edges, mutants) = match last {
                Some(row) => {
                    let mut cols = row.split(',');
                    cols.next();
                    (
                        cols.next().unwrap_or("0").to_string(),
                        cols.next().unwrap_or("0").to_string(),
                    )
                }
                None => ("0".to_string(), "0".to_string()),
            };
            // The campaign CSV carries no labels; recover them from the
            // sibling config file when present.
            let kv = std::fs::read_to_string(path.with_extension("config.txt"))
                .ok()
                .and_then(|t| Recipe::parse(&t).ok());
            let get = |key: &str| -> String {
                kv.as_ref().and_then(|r| r.get(key)).unwrap_or(&source).to_string()
            };
            Some(Known::Campaign {
                target: get("target"),
                front_end: get("front_end"),
                edges,
                mutants,
            })
        }
        _ => None,
    }
}

fn md_table(out: &mut String, headers: &[&str], rows: &[Vec<String>]) {
    writeln!(out, "| {} |", headers.join(" | ")).expect("string write");
    writeln!(out, "|{}", "---|".repeat(headers.len())).expect("string write");
    for row in rows {
        writeln!(out, "| {} |", row.join(" | ")).expect("string write");
    }
    out.push('\n');
}

fn cmd_report(ctx: &Ctx, out_md: Option<String>, out_csv: Option<String>) -> Result<()> {
    let out_md = ctx.path(&ctx.opt_str(out_md, "report_md", "report.md"));
    let out_csv = ctx.path(&ctx.opt_str(out_csv, "report_csv", "report.csv"));

    let mut files: Vec<PathBuf> = match std::fs::read_dir(&ctx.workdir) {
        Ok(entries) => entries
            .filter_map(|e| e.ok())
            .map(|e| e.path())
            .filter(|p| p.extension().is_some_and(|x| x == "csv"))
            .filter(|p| p != &out_md && p != &out_csv)
            .collect(),
        Err(_) => Vec::new(),
    };
    files.sort();

    let mut scores: Vec<Vec<String>> = Vec::new();
    let mut campaigns: Vec<Vec<String>> = Vec::new();
    let mut summaries: Vec<Vec<String>> = Vec::new();
    let mut sweeps: Vec<(String, Vec<Vec<String>>)> = Vec::new();
    let mut timings: Vec<(String, Vec<Vec<String>>)> = Vec::new();
    for path in &files {
        let Ok(text) = std::fs::read_to_string(path) else { continue };
        match classify_csv(path, &text) {
            Some(Known::Score(rows)) => scores.extend(rows),
            Some(Known::FlowSummary(rows)) => summaries.extend(rows),
            Some(Known::Sweep { source, rows }) => sweeps.push((source, rows)),
            Some(Known::Timings { source, rows }) => timings.push((source, rows)),
            Some(Known::Campaign { target, front_end, edges, mutants }) => {
                campaigns.push(vec![target, front_end, edges, mutants])
            }
            None => {}
        }
    }
    scores.sort();
    campaigns.sort();
    summaries.sort();

    let mut md = String::from("# gradtaint report\n\n## Hot-byte accuracy\n\n");
    md_table(&mut md, &["target", "method", "hot", "tp", "fp", "accuracy", "fpr"], &scores);
    md.push_str("## Edge coverage\n\n");
    md_table(&mut md, &["target", "front_end", "edges", "mutants"], &campaigns);
    md.push_str("## Information flow\n\n");
    md_table(&mut md, &["target", "total", "neural", "rule_dta"], &summaries);
    for (source, rows) in &sweeps {
        writeln!(md, "## Coverage sweep ({source})\n").expect("string write");
        md_table(&mut md, &["sinks_covered", "flows_detected"], rows);
    }
    for (source, rows) in &timings {
        writeln!(md, "## Runtime breakdown ({source})\n").expect("string write");
        md_table(&mut md, &["phase", "seconds"], rows);
    }

    let mut csv = String::from("table,target,metric,value\n");
    for row in &scores {
        if let [target, method, _hot, _tp, _fp, accuracy, fpr] = row.as_slice() {
            writeln!(csv, "hot_accur,{target},{method}.accuracy,{accuracy}").expect("string write");
            writeln!(csv, "hot_accur,{target},{method}.fpr,{fpr}").expect("string write");
        }
    }
    for row in &campaigns {
        if let [target, front_end, edges, _mutants] = row.as_slice() {
            writeln!(csv, "edge_coverage,{target},{front_end},{edges}").expect("string write");
        }
    }
    for row in &summaries {
        if let [target, total, neural, rule] = row.as_slice() {
            writeln!(csv, "info_loss,{target},total,{total}").expect("string write");
            writeln!(csv, "info_loss,{target},neural,{neural}").expect("string write");
            writeln!(csv, "info_loss,{target},rule_dta,{rule}").expect("string write");
        }
    }
    for (source, rows) in &sweeps {
        for (i, row) in rows.iter().enumerate() {
            if let [sinks, flows] = row.as_slice() {
                writeln!(csv, "sweep,{source},stratum{}.sinks_covered,{sinks}", i + 1)
                    .expect("string write");
                writeln!(csv, "sweep,{source},stratum{}.flows_detected,{flows}", i + 1)
                    .expect("string write");
            }
        }
    }
    for (source, rows) in &timings {
        for row in rows {
            if let [phase, seconds] = row.as_slice() {
                writeln!(csv, "runtime,{source},{phase},{seconds}").expect("string write");
            }
        }
    }

    write_out(&out_md, md.as_bytes())?;
    write_out(&out_csv, csv.as_bytes())
}
