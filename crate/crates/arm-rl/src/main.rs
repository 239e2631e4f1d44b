//! `arm-rl`: train, evaluate, and inspect reacher/tracker agents.

use std::path::PathBuf;

use anyhow::Context;
use clap::{Parser, Subcommand};

use arm_rl::env::compute_reward;
use arm_rl::harness::{
    evaluate, plot, save_mask_png, save_png, train, EvalOptions, RunConfig,
};
use arm_rl::vision::{
    hough_circles, isolate_target, threshold_channel, Channel, Detection, HoughConfig, Image,
    MAX_TARGET_RADIUS, MIN_TARGET_RADIUS,
};

#[derive(Parser)]
#[command(
    name = "arm-rl",
    version,
    about = "Vision-based reacher/tracker experiments on a simulated 6-DOF arm"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train an agent; writes metrics.csv and one checkpoint per trial.
    Train {
        /// Config file of `key = value` lines (defaults apply when omitted).
        #[arg(long)]
        config: Option<PathBuf>,
        /// Override one config key, e.g. --set agent=dqn (repeatable,
        /// wins over the file).
        #[arg(long = "set", value_name = "KEY=VALUE")]
        set: Vec<String>,
    },
    /// Roll out a checkpoint greedily and report per-episode results.
    Evaluate {
        /// Checkpoint written by `train` (trial0.ckpt, ...).
        checkpoint: PathBuf,
        /// Config file describing the environment to evaluate in.
        #[arg(long)]
        config: Option<PathBuf>,
        /// Override one config key (repeatable).
        #[arg(long = "set", value_name = "KEY=VALUE")]
        set: Vec<String>,
        #[arg(long, default_value_t = 10)]
        episodes: usize,
        /// Save the camera frame as PNG at episode start and every 10 steps.
        #[arg(long)]
        dump_frames: bool,
        /// Episode i resets with seed `seed + i`.
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Directory for frame dumps (default: the run's output dir).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Render learning-curve SVGs (reward and episode length) from CSVs.
    Plot {
        /// metrics.csv files; each becomes one labelled series.
        #[arg(required = true)]
        csvs: Vec<PathBuf>,
        #[arg(long, default_value = "plots")]
        out: PathBuf,
        /// Trailing smoothing window, in episodes.
        #[arg(long, default_value_t = 20)]
        window: usize,
    },
    /// Run the detection pipeline on a PNG frame and print what it sees.
    VisionDebug {
        /// PNG image to analyse (e.g. a frame from `evaluate --dump-frames`).
        image: PathBuf,
        /// Also dump the intermediate masks and an annotated detection here.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

/// Build the run config from file + overrides, then let `ARM_RL_OUTPUT`
/// trump the output directory.
fn load_config(config: Option<&PathBuf>, sets: &[String]) -> anyhow::Result<RunConfig> {
    let text = match config {
        Some(path) => Some(
            std::fs::read_to_string(path)
                .with_context(|| format!("reading config {}", path.display()))?,
        ),
        None => None,
    };
    let mut cfg = RunConfig::from_sources(text.as_deref(), sets)?;
    if let Ok(dir) = std::env::var("ARM_RL_OUTPUT") {
        if !dir.is_empty() {
            cfg.output_dir = PathBuf::from(dir);
        }
    }
    Ok(cfg)
}

fn cmd_train(config: Option<&PathBuf>, sets: &[String]) -> anyhow::Result<()> {
    let cfg = load_config(config, sets)?;
    println!(
        "training {} on {:?} ({} mode), {} trial(s) x {} steps, base seed {}",
        cfg.agent,
        cfg.env.variant,
        format!("{:?}", cfg.env.observation_mode).to_lowercase(),
        cfg.trials,
        cfg.total_steps,
        cfg.base_seed
    );
    let result = train(&cfg)?;
    println!(
        "logged {} episodes to {}",
        result.rows.len(),
        result.csv_path.display()
    );
    for path in &result.checkpoint_paths {
        println!("checkpoint: {}", path.display());
    }
    Ok(())
}

fn cmd_evaluate(
    checkpoint: &PathBuf,
    config: Option<&PathBuf>,
    sets: &[String],
    episodes: usize,
    dump_frames: bool,
    seed: u64,
    out: Option<PathBuf>,
) -> anyhow::Result<()> {
    let cfg = load_config(config, sets)?;
    let opts = EvalOptions {
        episodes,
        dump_frames,
        seed,
        output_dir: out.unwrap_or_else(|| cfg.output_dir.clone()),
    };
    let summary = evaluate(&cfg.env, checkpoint, &opts)?;
    for ep in &summary.episodes {
        println!(
            "episode {:>3}: return {:>9.3}  length {:>4}  goal {}",
            ep.episode,
            ep.episode_return,
            ep.length,
            if ep.reached_goal { "yes" } else { "no" }
        );
    }
    println!(
        "mean return {:.3}, mean length {:.1}, goal rate {:.0}%",
        summary.mean_return,
        summary.mean_length,
        summary.goal_rate * 100.0
    );
    if summary.frames_written > 0 {
        println!(
            "wrote {} frames under {}",
            summary.frames_written,
            opts.output_dir.join("frames").display()
        );
    }
    Ok(())
}

fn cmd_plot(csvs: &[PathBuf], out: &PathBuf, window: usize) -> anyhow::Result<()> {
    let written = plot(csvs, out, window)?;
    for path in &written {
        println!("wrote {}", path.display());
    }
    Ok(())
}

/// Draw the detection (circle outline + centre crosshair) onto a copy of
/// the frame.
fn annotate(frame: &Image, det: &Detection) -> Image {
    let mut img = frame.clone();
    let outline = [0, 255, 0];
    let (w, h) = (img.width() as i64, img.height() as i64);
    let mut put = |x: i64, y: i64| {
        if x >= 0 && y >= 0 && x < w && y < h {
            img.set(x as usize, y as usize, outline);
        }
    };
    let steps = (det.radius * 8.0).max(64.0) as usize;
    for i in 0..steps {
        let a = i as f64 / steps as f64 * std::f64::consts::TAU;
        put(
            (det.center.0 + det.radius * a.cos()).round() as i64,
            (det.center.1 + det.radius * a.sin()).round() as i64,
        );
    }
    let (cx, cy) = (det.center.0.round() as i64, det.center.1.round() as i64);
    for d in -4..=4 {
        put(cx + d, cy);
        put(cx, cy + d);
    }
    img
}

fn cmd_vision_debug(image_path: &PathBuf, out: Option<&PathBuf>) -> anyhow::Result<()> {
    let decoded = image::open(image_path)
        .with_context(|| format!("reading image {}", image_path.display()))?
        .to_rgb8();
    let (w, h) = decoded.dimensions();
    let frame = Image::from_raw(w as usize, h as usize, decoded.into_raw())
        .context("decoded image has inconsistent dimensions")?;

    let env_cfg = arm_rl::env::EnvConfig::default();
    let cutoffs = env_cfg.cutoffs;
    let hough = HoughConfig::default();
    let isolated = isolate_target(&frame, &cutoffs);
    println!(
        "{}x{} frame, {} isolated pixels (cutoffs r>={} g<{} b<{})",
        frame.width(),
        frame.height(),
        isolated.count_set(),
        cutoffs.red,
        cutoffs.green,
        cutoffs.blue
    );

    let detections = hough_circles(&isolated, &hough, MIN_TARGET_RADIUS, MAX_TARGET_RADIUS);
    if detections.is_empty() {
        println!("no circles detected");
    }
    for (i, d) in detections.iter().enumerate() {
        println!(
            "detection {}: center ({:.1}, {:.1}), radius {:.1}, votes {}",
            i, d.center.0, d.center.1, d.radius, d.votes
        );
    }
    let best = detections.first();
    println!(
        "reward under the default environment config: {:.4}",
        compute_reward(best, false, &env_cfg)
    );

    if let Some(dir) = out {
        std::fs::create_dir_all(dir)?;
        save_png(&frame, &dir.join("frame.png"))?;
        save_mask_png(
            &threshold_channel(&frame, Channel::Red, cutoffs.red),
            &dir.join("threshold_red.png"),
        )?;
        save_mask_png(&isolated, &dir.join("isolated.png"))?;
        if let Some(d) = best {
            save_png(&annotate(&frame, d), &dir.join("detection.png"))?;
        }
        println!("wrote pipeline stages under {}", dir.display());
    }
    Ok(())
}

fn main() -> anyhow::Result<()> {
    let cli = Cli::parse();
    match &cli.command {
        Command::Train { config, set } => cmd_train(config.as_ref(), set),
        Command::Evaluate {
            checkpoint,
            config,
            set,
            episodes,
            dump_frames,
            seed,
            out,
        } => cmd_evaluate(
            checkpoint,
            config.as_ref(),
            set,
            *episodes,
            *dump_frames,
            *seed,
            out.clone(),
        ),
        Command::Plot { csvs, out, window } => cmd_plot(csvs, out, *window),
        Command::VisionDebug { image, out } => cmd_vision_debug(image, out.as_ref()),
    }
}
