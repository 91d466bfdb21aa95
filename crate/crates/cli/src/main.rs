//! `rollgan`: MIDI ⇄ piano-roll images, DCGAN training and sampling.

mod analyze;
mod fsutil;
mod train;

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand, ValueEnum};

use rollgan::dataset::{build_dataset, image_file_name, list_midi_files, roundtrip_check, MANIFEST_FILE};
use rollgan::dcgan::{load_checkpoint, sample};
use rollgan::midi::{from_mtx, parse_smf, to_mtx, write_smf};
use rollgan::pianoroll::{decode_image, window_to_midi, write_png};
use rollgan::preprocess::{Mode, PreprocessConfig};
use rollgan::synth::{synth_corpus, DEFAULT_SYNTH_COUNT, DEFAULT_SYNTH_SEED};

use fsutil::{create_dir, write_atomic};

#[derive(Parser)]
#[command(name = "rollgan", version, about = "MIDI piano rolls as images, and a DCGAN that dreams up new ones")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum Direction {
    MidiToMtx,
    MtxToMidi,
}

#[derive(Subcommand)]
enum Command {
    /// Convert between Standard MIDI Files and MTX text.
    Convert {
        input: PathBuf,
        output: PathBuf,
        /// Guessed from the input when omitted.
        #[arg(long, value_enum)]
        direction: Option<Direction>,
    },
    /// Turn a directory of MIDI files into numbered 64x64 PNGs and a manifest.
    BuildDataset {
        midi_dir: PathBuf,
        out_dir: PathBuf,
        #[arg(long, default_value_t = Mode::Binary)]
        mode: Mode,
        /// Let the sustain pedal hold notes for as long as it stays down.
        #[arg(long)]
        no_sustain_cap: bool,
    },
    /// Train the DCGAN on a dataset directory.
    Train(train::TrainArgs),
    /// Sample images from a checkpoint and decode each to MIDI.
    Generate {
        checkpoint: PathBuf,
        out_dir: PathBuf,
        #[arg(short, long, default_value_t = 64, value_parser = clap::value_parser!(u32).range(1..))]
        n: u32,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Check that every MIDI file survives the image codec unchanged.
    RoundtripCheck {
        midi_dir: PathBuf,
        #[arg(long, default_value_t = Mode::Binary)]
        mode: Mode,
    },
    /// Pitch, chord and rhythm statistics of MIDI files or images.
    Analyze(analyze::AnalyzeArgs),
    /// Write the bundled synthetic test corpus.
    SynthCorpus {
        out_dir: PathBuf,
        #[arg(long, default_value_t = DEFAULT_SYNTH_SEED)]
        seed: u64,
        #[arg(long, default_value_t = DEFAULT_SYNTH_COUNT)]
        count: usize,
    },
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {}", format!("{e:#}").replace('\n', " "));
            ExitCode::FAILURE
        }
    }
}

fn run(command: Command) -> Result<ExitCode> {
    match command {
        Command::Convert { input, output, direction } => convert(&input, &output, direction)?,
        Command::BuildDataset { midi_dir, out_dir, mode, no_sustain_cap } => {
            let mut config = PreprocessConfig::with_mode(mode);
            if no_sustain_cap {
                config.sustain_cap = None;
            }
            build(&midi_dir, &out_dir, &config)?;
        }
        Command::Train(args) => train::run(args)?,
        Command::Generate { checkpoint, out_dir, n, seed } => generate(&checkpoint, &out_dir, n as usize, seed)?,
        Command::RoundtripCheck { midi_dir, mode } => return roundtrip(&midi_dir, mode),
        Command::Analyze(args) => analyze::run(args)?,
        Command::SynthCorpus { out_dir, seed, count } => {
            create_dir(&out_dir)?;
            for piece in synth_corpus(seed, count) {
                write_atomic(&out_dir.join(&piece.name), &piece.to_bytes())?;
            }
            println!("wrote {count} files to {}", out_dir.display());
        }
    }
    Ok(ExitCode::SUCCESS)
}

fn read(path: &Path) -> Result<Vec<u8>> {
    fs::read(path).with_context(|| format!("reading {}", path.display()))
}

fn convert(input: &Path, output: &Path, direction: Option<Direction>) -> Result<()> {
    let bytes = read(input)?;
    let direction = direction.unwrap_or(if bytes.starts_with(b"MThd") { Direction::MidiToMtx } else { Direction::MtxToMidi });
    let out = match direction {
        Direction::MidiToMtx => {
            let file = parse_smf(&bytes).with_context(|| format!("parsing {}", input.display()))?;
            to_mtx(&file).into_bytes()
        }
        Direction::MtxToMidi => {
            let text = String::from_utf8(bytes).with_context(|| format!("{} is not UTF-8 text", input.display()))?;
            let file = from_mtx(&text).with_context(|| format!("parsing {}", input.display()))?;
            write_smf(&file).with_context(|| format!("serializing {}", input.display()))?
        }
    };
    write_atomic(output, &out)
}

fn build(midi_dir: &Path, out_dir: &Path, config: &PreprocessConfig) -> Result<()> {
    let files = list_midi_files(midi_dir)?;
    let dataset = build_dataset(&files, config)?;
    create_dir(out_dir)?;
    // stale images from an earlier, larger build would otherwise be picked up
    for entry in fs::read_dir(out_dir).with_context(|| format!("reading {}", out_dir.display()))? {
        let path = entry?.path();
        let name = path.file_name().and_then(|n| n.to_str()).unwrap_or_default();
        let numbered = name.strip_suffix(".png").is_some_and(|s| s.len() == 6 && s.bytes().all(|b| b.is_ascii_digit()));
        if numbered && name >= image_file_name(dataset.images.len()).as_str() {
            fs::remove_file(&path).with_context(|| format!("removing {}", path.display()))?;
        }
    }
    for (i, image) in dataset.images.iter().enumerate() {
        write_atomic(&out_dir.join(image_file_name(i)), &write_png(image))?;
    }
    write_atomic(&out_dir.join(MANIFEST_FILE), dataset.manifest.to_json().as_bytes())?;
    let skipped = dataset.manifest.sources.iter().filter(|s| s.error.is_some()).count();
    println!(
        "{} images from {} files ({} skipped), {} slots",
        dataset.images.len(),
        files.len() - skipped,
        skipped,
        dataset.manifest.total_slots
    );
    Ok(())
}

fn generate(checkpoint: &Path, out_dir: &Path, n: usize, seed: u64) -> Result<()> {
    let state = load_checkpoint(&read(checkpoint)?, None).with_context(|| format!("loading {}", checkpoint.display()))?;
    let mode = state.config.mode;
    let images = sample(&state.gan, n, seed)?;
    create_dir(out_dir)?;
    let mut notes = 0;
    for (i, image) in images.iter().enumerate() {
        let midi = window_to_midi(&decode_image(image, mode));
        notes += midi.tracks[0].events.iter().filter(|e| matches!(e.kind, rollgan::EventKind::NoteOn { velocity: 1.., .. })).count();
        write_atomic(&out_dir.join(format!("sample_{i:03}.png")), &write_png(image))?;
        write_atomic(&out_dir.join(format!("sample_{i:03}.mid")), &write_smf(&midi)?)?;
    }
    println!("wrote {n} samples ({notes} notes) to {}", out_dir.display());
    Ok(())
}

fn roundtrip(midi_dir: &Path, mode: Mode) -> Result<ExitCode> {
    let files = list_midi_files(midi_dir)?;
    if files.is_empty() {
        bail!("no MIDI files in {}", midi_dir.display());
    }
    let config = PreprocessConfig::with_mode(mode);
    let mut failed = 0;
    for path in &files {
        let name = path.file_name().unwrap_or_default().to_string_lossy();
        match read(path).and_then(|b| parse_smf(&b).context("unparseable")) {
            Err(e) => {
                failed += 1;
                println!("FAIL {name} {e:#}");
            }
            Ok(file) => {
                let r = roundtrip_check(&file, &config);
                if r.passed() {
                    println!("PASS {name} windows={}", r.windows);
                } else {
                    failed += 1;
                    println!(
                        "FAIL {name} windows={} codec_mismatches={:?} midi_mismatches={:?}",
                        r.windows, r.codec_mismatches, r.midi_mismatches
                    );
                }
            }
        }
    }
    println!("{} of {} files passed", files.len() - failed, files.len());
    Ok(if failed == 0 { ExitCode::SUCCESS } else { ExitCode::FAILURE })
}
