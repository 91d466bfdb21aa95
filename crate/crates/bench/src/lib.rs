//! Fixtures shared by the benchmarks.

use std::fs;
use std::path::PathBuf;

use rollgan::preprocess::{Mode, NoteGrid, ROWS, WINDOW_SLOTS};

/// Raw bytes of a bundled MIDI recording.
pub fn corpus_file(name: &str) -> Vec<u8> {
    let path = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../corpus/real").join(name);
    fs::read(&path).unwrap_or_else(|e| panic!("reading {}: {e}", path.display()))
}

/// A deterministic window with roughly one cell in `every` sounding.
pub fn busy_window(mode: Mode, every: usize) -> NoteGrid {
    let mut w = NoteGrid::silent(mode, WINDOW_SLOTS);
    for slot in 0..WINDOW_SLOTS {
        for row in 0..ROWS {
            let h = (slot * 131 + row * 71) % every;
            if h == 0 {
                w.set(row, slot, 1 + ((slot * 7 + row) % 127) as u8);
            }
        }
    }
    w
}
