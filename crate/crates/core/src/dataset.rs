//! Building an image corpus from a directory of MIDI files, and checking
//! that the image codec loses nothing a MIDI listener could hear.

use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::midi::{parse_smf, write_smf, MidiFile};
use crate::pianoroll::{decode_image, encode_window, read_png, window_to_midi, PianoRollError, PianoRollImage};
use crate::preprocess::{collapse_silence, concat_grids, file_to_grid, segment, Mode, NoteGrid, PreprocessConfig, WINDOW_SLOTS};

pub const MANIFEST_FILE: &str = "manifest.json";
pub const MANIFEST_SCHEMA_VERSION: u32 = 1;

#[derive(Debug, thiserror::Error)]
pub enum DatasetError {
    #[error("no parseable MIDI files among {0} inputs")]
    NoValidInputs(usize),
    #[error("no images in {0}")]
    NoImages(PathBuf),
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: io::Error },
    #[error("{path}: {source}")]
    Image { path: PathBuf, source: PianoRollError },
}

fn io_err(path: &Path) -> impl FnOnce(io::Error) -> DatasetError + '_ {
    move |source| DatasetError::Io { path: path.to_path_buf(), source }
}

/// `.mid` and `.midi` files directly inside `dir`, sorted by file name.
pub fn list_midi_files(dir: &Path) -> Result<Vec<PathBuf>, DatasetError> {
    let mut files = Vec::new();
    for entry in fs::read_dir(dir).map_err(io_err(dir))? {
        let path = entry.map_err(io_err(dir))?.path();
        let ext = path.extension().and_then(|e| e.to_str()).map(str::to_ascii_lowercase);
        if path.is_file() && matches!(ext.as_deref(), Some("mid" | "midi")) {
            files.push(path);
        }
    }
    files.sort_by(|a, b| a.file_name().cmp(&b.file_name()));
    Ok(files)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SourceEntry {
    pub file: String,
    /// Grid length before silence collapsing; absent for skipped files.
    pub slots: Option<usize>,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub schema_version: u32,
    pub mode: Mode,
    pub sustain_cap_seconds: Option<f64>,
    pub slot_seconds: f64,
    pub window_slots: usize,
    pub sources: Vec<SourceEntry>,
    /// Length of the concatenated corpus after silence collapsing.
    pub total_slots: usize,
    pub dropped_slots: usize,
    pub images: usize,
}

impl Manifest {
    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("manifest serializes");
        s.push('\n');
        s
    }
}

#[derive(Debug, Clone)]
pub struct Dataset {
    pub images: Vec<PianoRollImage>,
    pub manifest: Manifest,
}

/// Name of the `i`th image file.
pub fn image_file_name(i: usize) -> String {
    format!("{i:06}.png")
}

fn file_label(path: &Path) -> String {
    path.file_name().map_or_else(|| path.display().to_string(), |n| n.to_string_lossy().into_owned())
}

fn read_midi(path: &Path) -> Result<MidiFile, String> {
    let bytes = fs::read(path).map_err(|e| e.to_string())?;
    parse_smf(&bytes).map_err(|e| e.to_string())
}

/// Converts `files` in the given order. Files that cannot be read or parsed
/// are skipped with a warning and recorded in the manifest.
pub fn build_dataset(files: &[PathBuf], config: &PreprocessConfig) -> Result<Dataset, DatasetError> {
    let results: Vec<Result<NoteGrid, String>> =
        files.par_iter().map(|path| read_midi(path).map(|f| file_to_grid(&f, config))).collect();

    let mut sources = Vec::with_capacity(files.len());
    let mut grids = Vec::new();
    for (path, result) in files.iter().zip(results) {
        let file = file_label(path);
        match result {
            Ok(grid) => {
                sources.push(SourceEntry { file, slots: Some(grid.len()), error: None });
                grids.push(grid);
            }
            Err(e) => {
                log::warn!("skipping {}: {e}", path.display());
                sources.push(SourceEntry { file, slots: None, error: Some(e) });
            }
        }
    }
    if grids.is_empty() {
        return Err(DatasetError::NoValidInputs(files.len()));
    }

    let corpus = collapse_silence(&concat_grids(&grids).expect("all grids share the configured mode"));
    let images: Vec<PianoRollImage> = segment(&corpus, WINDOW_SLOTS)
        .iter()
        .map(|w| encode_window(w).expect("segments are full windows"))
        .collect();
    let manifest = Manifest {
        schema_version: MANIFEST_SCHEMA_VERSION,
        mode: config.mode,
        sustain_cap_seconds: config.sustain_cap.map(|c| c.as_f64()),
        slot_seconds: config.slot.as_f64(),
        window_slots: WINDOW_SLOTS,
        sources,
        total_slots: corpus.len(),
        dropped_slots: corpus.len() % WINDOW_SLOTS,
        images: images.len(),
    };
    Ok(Dataset { images, manifest })
}

/// Reads every `NNNNNN.png` in `dir`, in name order.
pub fn load_dataset(dir: &Path) -> Result<Vec<PianoRollImage>, DatasetError> {
    let mut paths = Vec::new();
    for entry in fs::read_dir(dir).map_err(io_err(dir))? {
        let path = entry.map_err(io_err(dir))?.path();
        let numbered = path
            .file_name()
            .and_then(|n| n.to_str())
            .and_then(|n| n.strip_suffix(".png"))
            .is_some_and(|stem| stem.len() == 6 && stem.bytes().all(|b| b.is_ascii_digit()));
        if numbered {
            paths.push(path);
        }
    }
    if paths.is_empty() {
        return Err(DatasetError::NoImages(dir.to_path_buf()));
    }
    paths.sort();
    paths
        .iter()
        .map(|p| {
            let bytes = fs::read(p).map_err(io_err(p))?;
            read_png(&bytes).map_err(|source| DatasetError::Image { path: p.clone(), source })
        })
        .collect()
}

/// Outcome of [`roundtrip_check`] for one file.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RoundTrip {
    pub windows: usize,
    /// Windows whose image did not decode to the same cells.
    pub codec_mismatches: Vec<usize>,
    /// Windows whose decoded MIDI did not reproduce the activity bitmap.
    pub midi_mismatches: Vec<usize>,
}

impl RoundTrip {
    pub fn passed(&self) -> bool {
        self.codec_mismatches.is_empty() && self.midi_mismatches.is_empty()
    }
}

/// Runs one file through preprocess, image encode/decode, MIDI synthesis,
/// serialization and preprocess again, window by window. A trailing partial
/// window is checked too, padded with silence.
pub fn roundtrip_check(file: &MidiFile, config: &PreprocessConfig) -> RoundTrip {
    let grid = collapse_silence(&file_to_grid(file, config));
    let mut windows = segment(&grid, WINDOW_SLOTS);
    let tail = grid.len() % WINDOW_SLOTS;
    if tail > 0 {
        windows.push(grid.slice(grid.len() - tail, grid.len()).padded_to(WINDOW_SLOTS));
    }
    let plain = PreprocessConfig { mode: config.mode, ..PreprocessConfig::default() };
    let mut report = RoundTrip { windows: windows.len(), codec_mismatches: Vec::new(), midi_mismatches: Vec::new() };
    for (i, window) in windows.iter().enumerate() {
        let image = encode_window(window).expect("full window");
        let decoded = decode_image(&image, config.mode);
        if decoded != *window {
            report.codec_mismatches.push(i);
        }
        let reparsed = write_smf(&window_to_midi(&decoded))
            .ok()
            .and_then(|bytes| parse_smf(&bytes).ok())
            .map(|midi| file_to_grid(&midi, &plain).padded_to(WINDOW_SLOTS));
        if reparsed.map(|g| g.activity()) != Some(window.activity()) {
            report.midi_mismatches.push(i);
        }
    }
    report
}
