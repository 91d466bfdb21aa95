use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::Args;

use rollgan::analysis::{analyze, AnalysisReport, ChordQuality, Summary};
use rollgan::midi::{from_mtx, parse_smf};
use rollgan::pianoroll::{decode_image, read_png};
use rollgan::preprocess::{collapse_silence, file_to_grid, Mode, NoteGrid, PreprocessConfig};

const PITCH_CLASSES: [&str; 12] = ["C", "C#", "D", "D#", "E", "F", "F#", "G", "G#", "A", "A#", "B"];

#[derive(Args)]
pub struct AnalyzeArgs {
    /// MIDI (.mid/.midi), MTX (.mtx) or image (.png) files, or directories of them.
    #[arg(required = true)]
    paths: Vec<PathBuf>,
    /// A second set to compare against.
    #[arg(long, num_args = 1..)]
    against: Vec<PathBuf>,
    /// Codec used to decode images.
    #[arg(long, default_value_t = Mode::Binary)]
    mode: Mode,
    /// Print JSON instead of text.
    #[arg(long)]
    json: bool,
}

fn extension(path: &Path) -> String {
    path.extension().and_then(|e| e.to_str()).unwrap_or_default().to_ascii_lowercase()
}

fn expand(paths: &[PathBuf]) -> Result<Vec<PathBuf>> {
    let mut out = Vec::new();
    for path in paths {
        if path.is_dir() {
            let mut found: Vec<PathBuf> = fs::read_dir(path)
                .with_context(|| format!("reading {}", path.display()))?
                .filter_map(|e| e.ok().map(|e| e.path()))
                .filter(|p| p.is_file() && matches!(extension(p).as_str(), "mid" | "midi" | "mtx" | "png"))
                .collect();
            found.sort();
            out.extend(found);
        } else {
            out.push(path.clone());
        }
    }
    if out.is_empty() {
        bail!("no MIDI, MTX or PNG files found");
    }
    Ok(out)
}

fn load_grid(path: &Path, mode: Mode) -> Result<NoteGrid> {
    let bytes = fs::read(path).with_context(|| format!("reading {}", path.display()))?;
    let ctx = || format!("parsing {}", path.display());
    if extension(path) == "png" {
        return Ok(decode_image(&read_png(&bytes).with_context(ctx)?, mode));
    }
    let file = if extension(path) == "mtx" {
        from_mtx(std::str::from_utf8(&bytes).with_context(ctx)?).with_context(ctx)?
    } else {
        parse_smf(&bytes).with_context(ctx)?
    };
    Ok(collapse_silence(&file_to_grid(&file, &PreprocessConfig::with_mode(mode))))
}

fn reports(paths: &[PathBuf], mode: Mode) -> Result<Vec<(PathBuf, AnalysisReport)>> {
    expand(paths)?.into_iter().map(|p| Ok((p.clone(), analyze(&load_grid(&p, mode)?)))).collect()
}

fn chord_counts(r: &AnalysisReport) -> [usize; 4] {
    let mut counts = [0; 4];
    for e in &r.chord_events {
        counts[e.quality as usize] += 1;
    }
    counts
}

fn print_item(path: &Path, r: &AnalysisReport) {
    let chords = chord_counts(r);
    let chords: Vec<String> = ChordQuality::ALL.iter().zip(chords).map(|(q, c)| format!("{q}={c}")).collect();
    println!(
        "{}\tslots={} onsets={} density={:.4} rhythm={:.4} lag={} chords[{}]",
        path.display(),
        r.slots,
        r.onsets,
        r.note_density,
        r.repeated_rhythm_score,
        r.rhythm_lag.map_or("-".to_string(), |l| l.to_string()),
        chords.join(" ")
    );
}

fn print_summary(label: &str, s: &Summary) {
    println!("[{label}]");
    println!("items\t{}", s.items);
    println!("slots\t{}", s.slots);
    println!("onsets\t{}", s.onsets);
    println!("note_density\t{:.4}", s.note_density);
    println!("mean_rhythm_score\t{:.4}", s.mean_rhythm_score);
    for (name, share) in PITCH_CLASSES.iter().zip(s.pitch_class_distribution()) {
        println!("pitch_class.{name}\t{share:.4}");
    }
    for (q, share) in ChordQuality::ALL.iter().zip(s.chord_distribution()) {
        println!("chord.{q}\t{share:.4}");
    }
}

fn print_diff(a: &Summary, b: &Summary) {
    println!("[difference: against - paths]");
    println!("note_density\t{:+.4}", b.note_density - a.note_density);
    println!("mean_rhythm_score\t{:+.4}", b.mean_rhythm_score - a.mean_rhythm_score);
    for (i, name) in PITCH_CLASSES.iter().enumerate() {
        println!("pitch_class.{name}\t{:+.4}", b.pitch_class_distribution()[i] - a.pitch_class_distribution()[i]);
    }
    for (i, q) in ChordQuality::ALL.iter().enumerate() {
        println!("chord.{q}\t{:+.4}", b.chord_distribution()[i] - a.chord_distribution()[i]);
    }
    let (pa, pb) = (a.pitch_class_distribution(), b.pitch_class_distribution());
    let l1: f64 = pa.iter().zip(pb).map(|(x, y)| (x - y).abs()).sum();
    println!("pitch_class_l1\t{l1:.4}");
}

pub fn run(args: AnalyzeArgs) -> Result<()> {
    let first = reports(&args.paths, args.mode)?;
    let second = if args.against.is_empty() { None } else { Some(reports(&args.against, args.mode)?) };
    let summary = |set: &[(PathBuf, AnalysisReport)]| Summary::of(&set.iter().map(|r| r.1.clone()).collect::<Vec<_>>());

    if args.json {
        let set = |set: &[(PathBuf, AnalysisReport)]| {
            serde_json::json!({
                "items": set.iter().map(|(p, r)| serde_json::json!({"path": p.display().to_string(), "report": r})).collect::<Vec<_>>(),
                "summary": summary(set),
            })
        };
        let mut out = serde_json::json!({ "paths": set(&first) });
        if let Some(second) = &second {
            out["against"] = set(second);
        }
        println!("{}", serde_json::to_string_pretty(&out)?);
        return Ok(());
    }

    for (p, r) in &first {
        print_item(p, r);
    }
    let a = summary(&first);
    print_summary("paths", &a);
    if let Some(second) = &second {
        for (p, r) in second {
            print_item(p, r);
        }
        let b = summary(second);
        print_summary("against", &b);
        print_diff(&a, &b);
    }
    Ok(())
}
