use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Args, ValueEnum};

use rollgan::dataset::{load_dataset, Manifest, MANIFEST_FILE};
use rollgan::dcgan::{load_checkpoint, save_checkpoint, GanArchitecture, GanConfig, TrainState};
use rollgan::preprocess::Mode;

use crate::fsutil::{create_dir, write_atomic};

pub const EXTRA_ITERATIONS: u64 = 20_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Preset {
    /// Binary rolls, 50k iterations.
    Base,
    /// 20k more iterations on top of a base checkpoint given with --resume.
    ExtraIterations,
    /// The base settings, meant for a smaller dataset.
    SmallCorpus,
    /// Velocity-coded rolls.
    FullDynamics,
}

#[derive(Args)]
pub struct TrainArgs {
    dataset_dir: PathBuf,
    /// Directory for checkpoints and the loss log.
    #[arg(long, default_value = "run")]
    out: PathBuf,
    #[arg(long, value_enum, default_value_t = Preset::Base)]
    preset: Preset,
    #[arg(long)]
    mode: Option<Mode>,
    #[arg(long)]
    seed: Option<u64>,
    /// Total iteration count to reach, counting resumed iterations.
    #[arg(long)]
    iterations: Option<u64>,
    #[arg(long)]
    batch_size: Option<usize>,
    /// 0 keeps only the final checkpoint.
    #[arg(long)]
    checkpoint_every: Option<u64>,
    /// Continue from this checkpoint.
    #[arg(long)]
    resume: Option<PathBuf>,
    /// Network shape, e.g. `latent=100;gen=512,256,128,64;disc=64,128,256,512`.
    #[arg(long, value_parser = parse_arch)]
    arch: Option<GanArchitecture>,
}

fn parse_arch(s: &str) -> Result<GanArchitecture, String> {
    GanArchitecture::from_descriptor(s).map_err(|e| e.to_string())
}

pub fn preset_config(preset: Preset) -> GanConfig {
    match preset {
        Preset::Base | Preset::ExtraIterations | Preset::SmallCorpus => GanConfig::default(),
        Preset::FullDynamics => GanConfig { mode: Mode::Velocity, ..GanConfig::default() },
    }
}

fn initial_state(args: &TrainArgs) -> Result<TrainState> {
    let Some(resume) = &args.resume else {
        if args.preset == Preset::ExtraIterations {
            bail!("preset extra-iterations needs the base checkpoint via --resume");
        }
        let mut config = preset_config(args.preset);
        config.mode = args.mode.unwrap_or(config.mode);
        config.seed = args.seed.unwrap_or(config.seed);
        config.batch_size = args.batch_size.unwrap_or(config.batch_size);
        config.total_iterations = args.iterations.unwrap_or(config.total_iterations);
        config.checkpoint_every = args.checkpoint_every.unwrap_or(config.checkpoint_every);
        if let Some(arch) = &args.arch {
            config.arch = arch.clone();
        }
        if config.batch_size == 0 {
            bail!("--batch-size must be at least 1");
        }
        return Ok(TrainState::new(config));
    };

    if args.seed.is_some() || args.batch_size.is_some() {
        bail!("--seed and --batch-size are fixed by the checkpoint being resumed");
    }
    let bytes = fs::read(resume).with_context(|| format!("reading {}", resume.display()))?;
    let mut state = load_checkpoint(&bytes, args.arch.as_ref()).with_context(|| format!("loading {}", resume.display()))?;
    if let Some(mode) = args.mode {
        if mode != state.config.mode {
            bail!("checkpoint was trained in {} mode, not {mode}", state.config.mode);
        }
    }
    state.config.total_iterations = match (args.iterations, args.preset) {
        (Some(total), _) => total,
        (None, Preset::ExtraIterations) => state.iteration + EXTRA_ITERATIONS,
        (None, _) => state.config.total_iterations,
    };
    state.config.checkpoint_every = args.checkpoint_every.unwrap_or(state.config.checkpoint_every);
    Ok(state)
}

fn check_manifest(dataset_dir: &Path, mode: Mode) -> Result<()> {
    let path = dataset_dir.join(MANIFEST_FILE);
    let Ok(text) = fs::read_to_string(&path) else {
        return Ok(());
    };
    let manifest: Manifest = serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))?;
    if manifest.mode != mode {
        bail!("dataset was built in {} mode but training is configured for {mode}", manifest.mode);
    }
    Ok(())
}

/// Loss rows of an earlier run up to `iteration`, without the header.
fn earlier_rows(csv: &Path, iteration: u64) -> String {
    let Ok(text) = fs::read_to_string(csv) else {
        return String::new();
    };
    text.lines()
        .skip(1)
        .filter(|l| l.split(',').next().and_then(|i| i.parse::<u64>().ok()).is_some_and(|i| i <= iteration))
        .map(|l| format!("{l}\n"))
        .collect()
}

pub fn run(args: TrainArgs) -> Result<()> {
    let mut state = initial_state(&args)?;
    check_manifest(&args.dataset_dir, state.config.mode)?;
    let dataset = load_dataset(&args.dataset_dir)?;
    create_dir(&args.out)?;

    let start = state.iteration;
    let steps = state.config.total_iterations.saturating_sub(start);
    log::info!("training {} -> {} on {} images, {}", start, state.config.total_iterations, dataset.len(), state.config.arch);
    let out = args.out.clone();
    let report = state.run(&dataset, steps, |s| {
        let path = out.join(format!("checkpoint-{:06}.rgan", s.iteration));
        write_atomic(&path, &save_checkpoint(s)).map_err(|e| format!("{e:#}"))?;
        log::info!("iteration {}: wrote {}", s.iteration, path.display());
        Ok(path.display().to_string())
    })?;

    let csv_path = args.out.join("losses.csv");
    let mut csv = report.to_csv();
    if start > 0 {
        let (header, rows) = csv.split_once('\n').expect("header line");
        csv = format!("{header}\n{}{rows}", earlier_rows(&csv_path, start));
    }
    write_atomic(&csv_path, csv.as_bytes())?;

    let last = |v: &[f64]| v.last().map_or("-".to_string(), |x| format!("{x:.4}"));
    println!(
        "iterations {}..{} in {:.1}s, final d_loss {} g_loss {}, checkpoint {}",
        start,
        state.iteration,
        report.elapsed.as_secs_f64(),
        last(&report.d_loss),
        last(&report.g_loss),
        report.checkpoints.last().map_or("-", |c| c.1.as_str())
    );
    Ok(())
}
