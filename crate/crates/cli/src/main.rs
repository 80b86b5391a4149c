mod config;

use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};

use affordsim_core::affordance::compute_affordance;
use affordsim_core::dataset::{write_dataset, CollectConfig};
use affordsim_core::harness::{
    emit_report, evaluate_detailed, replay, run_tta_experiment, EpisodeRecord, ReportFormat,
    TtaScenario,
};
use affordsim_core::policy::{PolicyKind, TtaScorer};
use affordsim_core::render::{export, render, sample_camera, Intrinsics};
use affordsim_core::scene::{build_object, io as scene_io, SizeRanges};
use affordsim_core::{seed, AffordanceMap, CameraView, Category};

use config::{parse_categories, parse_resolution, RunConfig};

/// Cameras tried by `render-affordance`.
const VIEW_CANDIDATES: u64 = 16;

#[derive(Parser)]
#[command(
    name = "affordsim",
    version,
    about = "Articulated-object manipulation simulator and dataset toolkit"
)]
struct Cli {
    /// Directory for outputs written without an explicit path.
    #[arg(long, global = true, env = "AFFORDSIM_OUT_DIR", default_value = "out")]
    out_dir: PathBuf,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Collect prompt records from successful oracle episodes.
    GenDataset(GenDataset),
    /// Render an object and write its affordance heat map and depth image.
    RenderAffordance(RenderAffordance),
    /// Evaluate a policy and write a per-category report.
    RunEval(RunEval),
    /// Sequential test-time adaptation run.
    RunTta(RunTta),
    /// Re-run a recorded episode and check it reproduces.
    Replay {
        #[arg(long)]
        trace: PathBuf,
    },
    /// Write a procedural object as scene JSON.
    ExportScene {
        #[arg(long)]
        category: Category,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Args)]
struct GenDataset {
    /// Comma-separated categories, or `all`.
    #[arg(long, default_value = "all")]
    categories: String,
    #[arg(long, default_value_t = 10)]
    per_category: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// JSONL path; images go to `images/` beside it.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, default_value = "336x336")]
    resolution: String,
}

#[derive(Args)]
struct RenderAffordance {
    #[arg(long)]
    category: Category,
    /// Object seed; the camera seed is derived from it.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 0)]
    joint: usize,
    #[arg(long)]
    probe_delta: Option<f64>,
    #[arg(long, default_value = "336x336")]
    resolution: String,
    /// Output file prefix.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct RunEval {
    /// TOML or JSON run configuration.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    policy: Option<PolicyKind>,
    #[arg(long)]
    categories: Option<String>,
    #[arg(long)]
    episodes: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, default_value = "json")]
    format: ReportFormat,
    #[arg(long)]
    out: Option<PathBuf>,
    /// Write one replayable trace per episode into this directory.
    #[arg(long)]
    traces: Option<PathBuf>,
}

#[derive(Args)]
struct RunTta {
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    episodes: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// Disable the forbidden-region shift.
    #[arg(long)]
    no_shift: bool,
    /// Run the base policy without re-ranking or updates.
    #[arg(long)]
    no_adapt: bool,
    /// Scorer state: loaded if present, saved after the run.
    #[arg(long)]
    scorer: Option<PathBuf>,
    #[arg(long)]
    out: Option<PathBuf>,
}

fn main() -> Result<()> {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match cli.command {
        Command::GenDataset(a) => gen_dataset(&cli.out_dir, a),
        Command::RenderAffordance(a) => render_affordance(&cli.out_dir, a),
        Command::RunEval(a) => run_eval(&cli.out_dir, a),
        Command::RunTta(a) => run_tta(&cli.out_dir, a),
        Command::Replay { trace } => replay_trace(&trace),
        Command::ExportScene {
            category,
            seed,
            out,
        } => {
            let obj = build_object(category, seed, &SizeRanges::default())?;
            let path = out.unwrap_or_else(|| cli.out_dir.join(format!("{category}-{seed}.json")));
            write(&path, scene_io::to_json(&obj)?)?;
            println!("wrote {}", path.display());
            Ok(())
        }
    }
}

fn write(path: &Path, contents: impl AsRef<[u8]>) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    }
    std::fs::write(path, contents).with_context(|| format!("writing {}", path.display()))
}

fn gen_dataset(out_dir: &Path, a: GenDataset) -> Result<()> {
    let cfg = CollectConfig {
        categories: parse_categories(&a.categories)?,
        episodes_per_category: a.per_category,
        seed: a.seed,
        resolution: parse_resolution(&a.resolution)?,
        ..Default::default()
    };
    let path = a.out.unwrap_or_else(|| out_dir.join("dataset.jsonl"));
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir)?;
    }
    let s = write_dataset(&cfg, &path)?;
    println!(
        "{} episodes, {} successes, {} errors, {} records -> {}",
        s.attempted,
        s.succeeded,
        s.errors,
        s.records,
        path.display()
    );
    Ok(())
}

fn render_affordance(out_dir: &Path, a: RenderAffordance) -> Result<()> {
    let [w, h] = parse_resolution(&a.resolution)?;
    let obj = build_object(a.category, a.seed, &SizeRanges::default())?;
    let q = obj.joint_values();
    let target = obj.bounds(&q).center();
    // Best of a few random views: the one showing most of the target part.
    let mut best: Option<(CameraView, AffordanceMap)> = None;
    for attempt in 0..VIEW_CANDIDATES {
        let cam = sample_camera(
            seed::derive(a.seed, attempt),
            target,
            Intrinsics::for_resolution(w, h),
        );
        let view = render(&obj, &q, &cam)?;
        let amap = compute_affordance(&obj, &view, a.joint, a.probe_delta)?;
        if best
            .as_ref()
            .is_none_or(|(_, b)| amap.valid_count() > b.valid_count())
        {
            best = Some((view, amap));
        }
    }
    let (view, amap) = best.context("no camera attempts")?;
    if amap.valid_count() == 0 {
        log::warn!("target part is not visible from any sampled camera");
    }
    let prefix = a
        .out
        .unwrap_or_else(|| out_dir.join(format!("{}-{}-j{}", a.category, a.seed, a.joint)));
    let with = |suffix: &str| PathBuf::from(format!("{}{suffix}", prefix.display()));
    if let Some(dir) = prefix.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir)?;
    }
    export::heatmap_image(&view, &amap.scores, &amap.valid).save(with("-affordance.png"))?;
    export::save_pgm16(
        &with("-affordance.pgm"),
        w,
        h,
        &export::quantize_u16(&amap.scores, 1.0),
    )?;
    let max_depth = view
        .depth
        .iter()
        .copied()
        .fold(0.0, f64::max)
        .max(f64::EPSILON);
    export::save_pgm16(
        &with("-depth.pgm"),
        w,
        h,
        &export::quantize_u16(&view.depth, max_depth),
    )?;
    println!(
        "{} valid pixels, probe {} ({}), wrote {}-*",
        amap.valid_count(),
        amap.probe_delta,
        amap.kind.as_str(),
        prefix.display()
    );
    Ok(())
}

fn load_config(path: Option<&Path>) -> Result<RunConfig> {
    path.map_or_else(|| Ok(RunConfig::default()), RunConfig::load)
}

fn run_eval(out_dir: &Path, a: RunEval) -> Result<()> {
    let mut cfg = load_config(a.config.as_deref())?;
    if let Some(p) = a.policy {
        cfg.policy = p;
    }
    if let Some(c) = &a.categories {
        cfg.categories = parse_categories(c)?;
    }
    if let Some(n) = a.episodes {
        cfg.episodes_per_category = n;
    }
    if let Some(s) = a.seed {
        cfg.seed = s;
    }

    let mut report = if cfg.policy == PolicyKind::AffordanceTta {
        if a.traces.is_some() {
            bail!("--traces is not supported for adaptive runs");
        }
        let opts = affordsim_core::harness::TtaOptions {
            categories: cfg.categories.clone(),
            resolution: cfg.resolution,
            scenario: TtaScenario::disabled(),
            ..cfg.tta.clone()
        };
        let episodes = cfg.episodes_per_category * cfg.categories.len();
        run_tta_experiment(
            cfg.policy.base().as_ref(),
            &opts,
            episodes,
            &cfg.aia,
            cfg.seed,
            None,
        )?
        .report
    } else {
        let policy = cfg.policy.base();
        let (mut report, outcomes) = evaluate_detailed(
            policy.as_ref(),
            &cfg.categories,
            cfg.episodes_per_category,
            &cfg.aia,
            cfg.seed,
            cfg.resolution,
        )?;
        if let Some(dir) = &a.traces {
            std::fs::create_dir_all(dir)?;
            for (result, outcome) in report.episodes.iter_mut().zip(outcomes) {
                if let Some(record) = outcome.record {
                    let path = dir.join(format!("{}.json", result.episode_id));
                    write(&path, serde_json::to_string_pretty(&record)?)?;
                    result.trace_path = Some(path.display().to_string());
                }
            }
        }
        report
    };
    report.policy = cfg.policy.as_str().to_string();

    let path = a
        .out
        .unwrap_or_else(|| out_dir.join(format!("report.{}", a.format.extension())));
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir)?;
    }
    emit_report(&report, a.format, &path)?;
    for s in &report.categories {
        println!(
            "{:<11} {:>4} initial {:.3} long {:.3}",
            s.category, s.episodes, s.initial_rate, s.long_rate
        );
    }
    println!(
        "AVG              initial {:.3} long {:.3} -> {}",
        report.avg_initial_rate,
        report.avg_long_rate,
        path.display()
    );
    Ok(())
}

fn run_tta(out_dir: &Path, a: RunTta) -> Result<()> {
    let cfg = load_config(a.config.as_deref())?;
    let mut opts = cfg.tta.clone();
    if a.no_shift {
        opts.scenario = TtaScenario::disabled();
    }
    if a.no_adapt {
        opts.adapt = false;
    }
    let scorer = match &a.scorer {
        Some(p) if p.exists() => Some(TtaScorer::load(p)?),
        _ => None,
    };
    let episodes = a.episodes.unwrap_or(300);
    let base = PolicyKind::Affordance.base();
    let rep = run_tta_experiment(
        base.as_ref(),
        &opts,
        episodes,
        &cfg.aia,
        a.seed.unwrap_or(cfg.seed),
        scorer,
    )?;
    if let Some(p) = &a.scorer {
        rep.scorer.save(p)?;
    }
    let path = a.out.unwrap_or_else(|| out_dir.join("tta.json"));
    write(&path, serde_json::to_string_pretty(&rep)? + "\n")?;
    println!(
        "windows {:?}, forced failures {}, overall {:.3} -> {}",
        rep.window_rates,
        rep.forced_failures,
        rep.overall_rate(),
        path.display()
    );
    Ok(())
}

fn replay_trace(path: &Path) -> Result<()> {
    let text =
        std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let record: EpisodeRecord = serde_json::from_str(&text)?;
    let again = replay(&record)?;
    println!(
        "episode {} ({}): displacement {:.6}, {} steps, {:?}",
        record.spec.episode_id,
        record.spec.category,
        again.displacement,
        again.steps,
        again.termination
    );
    if again != record.trace {
        bail!("replay diverged from the recorded trace");
    }
    println!("replay matches the recorded trace");
    Ok(())
}
