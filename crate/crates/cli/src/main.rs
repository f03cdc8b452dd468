//! `trajseek` command-line driver.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use trajseek::datagen::{generate, sample_queries, GenProfile, ProfileKind};
use trajseek::io::{load_segments, load_store, save_results, save_segments, save_store};
use trajseek::oracle::brute_force_search;
use trajseek::perfmodel::{
    calibrate_cpu, calibrate_surfaces, estimate_alpha, recommend_batch_size, AlphaConfig, CpuCalibration, GridSpec,
    PerfModel, Prediction,
};
use trajseek::planner::periodic;
use trajseek::{
    canonicalize, sort_queries, BatchRecord, BinExtentRule, Engine, Planner, SegmentStore, TemporalIndex,
    TrajectorySegment, DEFAULT_BIN_COUNT,
};

#[derive(Parser)]
#[command(name = "trajseek", version, about = "Distance threshold search over trajectory segments")]
struct Cli {
    /// Worker threads; 0 uses every hardware thread, 1 runs serially.
    #[arg(long, global = true, env = "TRAJSEEK_WORKERS", default_value_t = 0)]
    workers: usize,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a random-walk dataset, or sample a query set from one.
    Gen(GenArgs),
    /// Build the temporal index and print its statistics.
    Index(IndexArgs),
    /// Run a batched search.
    Search(SearchArgs),
    /// Run the brute-force reference search.
    Oracle(OracleArgs),
    /// Measure response surfaces and host overhead into a model file.
    Calibrate(CalibrateArgs),
    /// Estimate hit-rate profiles and add them to a model file.
    Alpha(AlphaArgs),
    /// Predict response times over batch sizes and recommend one.
    Predict(PredictArgs),
    /// Measure periodic-batching searches over a range of batch sizes.
    Sweep(SweepArgs),
}

#[derive(Args)]
struct GenArgs {
    #[arg(long, value_parser = parse_profile)]
    profile: ProfileKind,
    #[arg(long)]
    trajectories: usize,
    #[arg(long)]
    timesteps: Option<usize>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Sample this many whole trajectories from the generated set and write
    /// only those (a query set).
    #[arg(long)]
    sample: Option<usize>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct DbArgs {
    #[arg(long)]
    db: PathBuf,
    #[arg(long, default_value_t = DEFAULT_BIN_COUNT)]
    bins: usize,
    /// Reject files whose rows are not already in storage order.
    #[arg(long)]
    strict: bool,
}

#[derive(Args)]
struct IndexArgs {
    #[command(flatten)]
    db: DbArgs,
    #[arg(long, value_enum, default_value_t = RuleArg::Empirical)]
    rule: RuleArg,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum RuleArg {
    Empirical,
    Nominal,
}

#[derive(Clone, Copy, ValueEnum)]
enum PlannerArg {
    Periodic,
    SetsplitFixed,
    SetsplitMax,
    SetsplitMinmax,
    GreedyMin,
    GreedyMax,
}

#[derive(Args)]
struct SearchArgs {
    #[command(flatten)]
    db: DbArgs,
    #[arg(long)]
    queries: PathBuf,
    /// Threshold distance.
    #[arg(long)]
    d: f64,
    #[arg(long, value_enum, default_value_t = PlannerArg::Periodic)]
    planner: PlannerArg,
    #[arg(long)]
    batch_size: Option<usize>,
    #[arg(long)]
    num_batches: Option<usize>,
    #[arg(long)]
    min: Option<usize>,
    #[arg(long)]
    max: Option<usize>,
    #[arg(long)]
    bound: Option<usize>,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    stats: Option<PathBuf>,
    /// Write results in canonical order.
    #[arg(long)]
    sorted: bool,
}

#[derive(Args)]
struct OracleArgs {
    #[arg(long)]
    db: PathBuf,
    #[arg(long)]
    queries: PathBuf,
    #[arg(long)]
    d: f64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct CalibrateArgs {
    #[arg(long)]
    out: PathBuf,
    /// Threshold distance the model is built for.
    #[arg(long)]
    d: f64,
    #[arg(long, default_value_t = 10)]
    c_min: usize,
    #[arg(long, default_value_t = 20_000)]
    c_max: usize,
    #[arg(long, default_value_t = 10)]
    c_points: usize,
    #[arg(long, default_value_t = 5)]
    reps: usize,
    /// Query set sizes to calibrate host overhead at.
    #[arg(long, value_delimiter = ',', default_value = "10000")]
    cpu_queries: Vec<usize>,
}

#[derive(Args)]
struct AlphaArgs {
    #[command(flatten)]
    db: DbArgs,
    /// Query pool to sample batches from.
    #[arg(long)]
    queries: PathBuf,
    #[arg(long)]
    model: PathBuf,
    #[arg(long, value_parser = parse_sizes, default_value = "10:300:10")]
    s: Sizes,
    #[arg(long, default_value_t = 50)]
    epochs: usize,
    #[arg(long, default_value_t = 64)]
    max_trials: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Args)]
struct PredictArgs {
    #[command(flatten)]
    db: DbArgs,
    #[arg(long)]
    queries: PathBuf,
    #[arg(long)]
    model: PathBuf,
    #[arg(long, value_parser = parse_sizes, default_value = "10:300:10")]
    s: Sizes,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct SweepArgs {
    #[command(flatten)]
    db: DbArgs,
    #[arg(long)]
    queries: PathBuf,
    #[arg(long)]
    d: f64,
    #[arg(long, value_parser = parse_sizes, default_value = "10:300:10")]
    s: Sizes,
    #[arg(long, default_value_t = 3)]
    reps: usize,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Clone, Debug)]
struct Sizes(Vec<usize>);

/// `lo:hi:step` or a comma-separated list.
fn parse_sizes(text: &str) -> Result<Sizes, String> {
    let parse = |t: &str| t.trim().parse::<usize>().map_err(|e| format!("bad batch size {t:?}: {e}"));
    let v: Vec<usize> = if text.contains(':') {
        let parts: Vec<&str> = text.split(':').collect();
        let [lo, hi, step] = parts[..] else {
            return Err("expected lo:hi:step".into());
        };
        let (lo, hi, step) = (parse(lo)?, parse(hi)?, parse(step)?);
        if step == 0 || lo > hi {
            return Err("need lo <= hi and step > 0".into());
        }
        (lo..=hi).step_by(step).collect()
    } else {
        text.split(',').map(parse).collect::<Result<_, _>>()?
    };
    if v.is_empty() || v.contains(&0) {
        return Err("batch sizes must be positive".into());
    }
    Ok(Sizes(v))
}

fn parse_profile(text: &str) -> Result<ProfileKind, String> {
    text.parse().map_err(|e: trajseek::Error| e.to_string())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}

fn run(cli: Cli) -> Result<()> {
    let engine = Engine::new(cli.workers)?;
    match cli.command {
        Command::Gen(a) => gen(a),
        Command::Index(a) => index(a),
        Command::Search(a) => search(&engine, a),
        Command::Oracle(a) => oracle(a),
        Command::Calibrate(a) => calibrate(&engine, a),
        Command::Alpha(a) => alpha(&engine, a),
        Command::Predict(a) => predict(a),
        Command::Sweep(a) => sweep(&engine, a),
    }
}

fn gen(a: GenArgs) -> Result<()> {
    let mut profile = GenProfile::with_kind(a.profile, a.trajectories, a.seed);
    if let Some(t) = a.timesteps {
        profile.timesteps = t;
    }
    let store = generate(&profile)?;
    match a.sample {
        Some(n) => save_segments(&a.out, &sample_queries(&store, n, a.seed)?)?,
        None => save_store(&a.out, &store)?,
    }
    Ok(())
}

fn open_db(db: &DbArgs, rule: BinExtentRule) -> Result<(SegmentStore, TemporalIndex)> {
    let store = load_store(&db.db, db.strict)?;
    let index = TemporalIndex::build_with_rule(&store, db.bins, rule)?;
    Ok((store, index))
}

fn open_queries(path: &Path) -> Result<Vec<TrajectorySegment>> {
    Ok(sort_queries(load_segments(path, false)?)?)
}

fn write_json<T: Serialize>(value: &T, out: Option<&Path>) -> Result<()> {
    let text = serde_json::to_string_pretty(value)?;
    match out {
        Some(p) => std::fs::write(p, text + "\n").with_context(|| format!("writing {}", p.display())),
        None => {
            println!("{text}");
            Ok(())
        }
    }
}

fn index(a: IndexArgs) -> Result<()> {
    let rule = match a.rule {
        RuleArg::Empirical => BinExtentRule::Empirical,
        RuleArg::Nominal => BinExtentRule::Nominal,
    };
    let (_, index) = open_db(&a.db, rule)?;
    write_json(&index.stats(), a.out.as_deref())
}

fn need(v: Option<usize>, flag: &str, planner: &str) -> Result<usize> {
    v.with_context(|| format!("--{flag} is required for the {planner} planner"))
}

fn planner_from(a: &SearchArgs) -> Result<Planner> {
    Ok(match a.planner {
        PlannerArg::Periodic => Planner::Periodic {
            batch_size: need(a.batch_size, "batch-size", "periodic")?,
        },
        PlannerArg::SetsplitFixed => Planner::SetSplitFixed {
            num_batches: need(a.num_batches, "num-batches", "setsplit-fixed")?,
        },
        PlannerArg::SetsplitMax => Planner::SetSplitMax {
            max: need(a.max, "max", "setsplit-max")?,
        },
        PlannerArg::SetsplitMinmax => Planner::SetSplitMinMax {
            min: need(a.min, "min", "setsplit-minmax")?,
            max: need(a.max, "max", "setsplit-minmax")?,
        },
        PlannerArg::GreedyMin => Planner::GreedyMin {
            bound: need(a.bound, "bound", "greedy-min")?,
        },
        PlannerArg::GreedyMax => Planner::GreedyMax {
            bound: need(a.bound, "bound", "greedy-max")?,
        },
    })
}

#[derive(Serialize)]
struct SearchReport {
    planner: Planner,
    workers: usize,
    bins: usize,
    threshold: f64,
    entries: usize,
    queries: usize,
    batches: usize,
    interactions: u64,
    temporal_misses: u64,
    spatial_misses: u64,
    hits: u64,
    wasteful_fraction: f64,
    max_batch_queries: usize,
    max_batch_interactions: u64,
    /// Batches holding more queries than the planner's maximum, if it has one.
    batches_over_max: usize,
    plan_seconds: f64,
    kernel_seconds: f64,
    host_seconds: f64,
    search_seconds: f64,
    per_batch: Vec<BatchRecord>,
}

fn search(engine: &Engine, a: SearchArgs) -> Result<()> {
    let planner = planner_from(&a)?;
    let (store, index) = open_db(&a.db, BinExtentRule::Empirical)?;
    let queries = open_queries(&a.queries)?;
    let started = Instant::now();
    let plan = planner.plan(&queries, &index)?;
    let plan_seconds = started.elapsed().as_secs_f64();
    let (mut results, stats) = engine.run_search(&store, &index, &queries, &plan, a.d)?;
    if a.sorted {
        canonicalize(&mut results);
    }
    if let Some(out) = &a.out {
        save_results(out, &results)?;
    }
    let over = match planner {
        Planner::SetSplitMax { max } | Planner::SetSplitMinMax { max, .. } => plan.count_larger_than(max),
        _ => 0,
    };
    let report = SearchReport {
        planner,
        workers: engine.workers(),
        bins: index.bin_count(),
        threshold: a.d,
        entries: store.len(),
        queries: queries.len(),
        batches: plan.len(),
        interactions: stats.interactions_computed,
        temporal_misses: stats.temporal_misses,
        spatial_misses: stats.spatial_misses,
        hits: stats.hits,
        wasteful_fraction: stats.wasteful_fraction(),
        max_batch_queries: plan.max_batch_len(),
        max_batch_interactions: plan.max_batch_interactions(),
        batches_over_max: over,
        plan_seconds,
        kernel_seconds: stats.kernel_seconds,
        host_seconds: stats.host_seconds,
        search_seconds: stats.total_seconds,
        per_batch: stats.per_batch,
    };
    match &a.stats {
        Some(p) => write_json(&report, Some(p)),
        None => {
            eprintln!(
                "{} results, {} batches, {} interactions, {:.3}s",
                report.hits, report.batches, report.interactions, report.search_seconds
            );
            Ok(())
        }
    }
}

fn oracle(a: OracleArgs) -> Result<()> {
    let store = load_store(&a.db, false)?;
    let queries = open_queries(&a.queries)?;
    let mut results = brute_force_search(&store, &queries, a.d)?;
    canonicalize(&mut results);
    save_results(&a.out, &results)?;
    Ok(())
}

fn calibrate(engine: &Engine, a: CalibrateArgs) -> Result<()> {
    let mut grid = GridSpec::log_spaced(a.c_min, a.c_max, a.c_points)?;
    grid.reps = a.reps;
    grid.d = a.d;
    let surfaces = calibrate_surfaces(engine, &grid)?;
    for f in &surfaces.flagged {
        eprintln!("flagged {:?} at q={} c={}: {}", f.surface, f.q, f.c, f.reason);
    }
    let mut model = PerfModel::new(engine.workers(), a.d, surfaces);
    for &n in &a.cpu_queries {
        let mut cal = CpuCalibration::new(n);
        cal.reps = a.reps;
        let cpu = calibrate_cpu(engine, &cal)?;
        if cpu.fit.degenerate {
            eprintln!("host overhead fit at {n} queries is degenerate");
        }
        model.cpu.push(cpu);
    }
    model.save(&a.out)?;
    Ok(())
}

fn alpha(engine: &Engine, a: AlphaArgs) -> Result<()> {
    let mut model = PerfModel::load(&a.model)?;
    let (store, index) = open_db(&a.db, BinExtentRule::Empirical)?;
    let pool = open_queries(&a.queries)?;
    let cfg = AlphaConfig {
        epochs: a.epochs,
        max_trials: a.max_trials,
        seed: a.seed,
        ..AlphaConfig::default()
    };
    let plan = periodic(&pool, &index, 1)?;
    let true_hits = engine.run_search(&store, &index, &pool, &plan, model.threshold)?.1.hits;
    for &s in &a.s.0 {
        let p = estimate_alpha(engine, &store, &index, &pool, s, model.threshold, &cfg, Some(true_hits))?;
        if !p.converged {
            eprintln!("alpha profile for s={s} did not converge in {} trials", p.trials);
        }
        model.alpha.retain(|q| q.batch_size != s);
        model.alpha.push(p);
    }
    model.alpha.sort_by_key(|p| p.batch_size);
    model.save(&a.model)?;
    Ok(())
}

#[derive(Serialize)]
struct PredictReport {
    recommended_batch_size: usize,
    predictions: Vec<Prediction>,
}

fn predict(a: PredictArgs) -> Result<()> {
    let model = PerfModel::load(&a.model)?;
    let (store, index) = open_db(&a.db, BinExtentRule::Empirical)?;
    let queries = open_queries(&a.queries)?;
    if model.alpha.is_empty() {
        bail!("model has no alpha profiles; run the alpha command first");
    }
    let cpu = model.cpu_for(queries.len()).context("model has no host overhead calibration")?;
    let (best, predictions) = recommend_batch_size(
        &a.s.0,
        &queries,
        &store,
        &index,
        &model.surfaces,
        |s| model.alpha_for(s).expect("profiles present"),
        cpu,
    )?;
    write_json(
        &PredictReport {
            recommended_batch_size: best,
            predictions,
        },
        a.out.as_deref(),
    )
}

fn sweep(engine: &Engine, a: SweepArgs) -> Result<()> {
    let (store, index) = open_db(&a.db, BinExtentRule::Empirical)?;
    let queries = open_queries(&a.queries)?;
    let file = File::create(&a.out).with_context(|| format!("creating {}", a.out.display()))?;
    let mut w = BufWriter::new(file);
    writeln!(w, "s,batches,interactions,hits,temporal_misses,host_seconds,kernel_seconds,total_seconds")?;
    for &s in &a.s.0 {
        let plan = periodic(&queries, &index, s)?;
        let mut runs = Vec::with_capacity(a.reps.max(1));
        for _ in 0..a.reps.max(1) {
            runs.push(engine.run_search(&store, &index, &queries, &plan, a.d)?.1);
        }
        runs.sort_by(|x, y| x.total_seconds.total_cmp(&y.total_seconds));
        let st = &runs[runs.len() / 2];
        writeln!(
            w,
            "{s},{},{},{},{},{},{},{}",
            plan.len(),
            st.interactions_computed,
            st.hits,
            st.temporal_misses,
            st.host_seconds,
            st.kernel_seconds,
            st.total_seconds
        )?;
    }
    w.flush()?;
    Ok(())
}
