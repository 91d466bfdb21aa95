//! From a parsed MIDI file to a quantized 64-row note grid.
//!
//! Tracks are merged, tempo is flattened to 120 bpm, the sustain pedal is
//! resolved (with an automatic cut-off), onsets and releases are snapped to
//! sixteenth-note slots, and pitches are folded into 64 rows.

mod grid;
mod notes;
mod tempo;

pub use grid::{
    collapse_silence, concat_grids, fold_pitch, segment, to_grid, Column, GridError, Mode, NoteGrid, HIGHEST_NOTE,
    LOWEST_NOTE, MAX_INTERNAL_SILENCE, ROWS, WINDOW_SLOTS,
};
pub use notes::{quantize, resolve_sustain, QuantizedNote, TimedNote, DEFAULT_SLOT, DEFAULT_SUSTAIN_CAP};
pub use tempo::{build_tempo_map, ticks_to_seconds, Seconds, TempoMap, TempoSegment};

use crate::midi::MidiFile;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PreprocessConfig {
    pub mode: Mode,
    /// `None` disables the pedal cut-off.
    pub sustain_cap: Option<Seconds>,
    pub slot: Seconds,
}

impl Default for PreprocessConfig {
    fn default() -> Self {
        PreprocessConfig { mode: Mode::Binary, sustain_cap: Some(DEFAULT_SUSTAIN_CAP), slot: DEFAULT_SLOT }
    }
}

impl PreprocessConfig {
    pub fn with_mode(mode: Mode) -> Self {
        PreprocessConfig { mode, ..Default::default() }
    }
}

/// The per-file pipeline up to (not including) silence collapsing.
pub fn file_to_grid(file: &MidiFile, config: &PreprocessConfig) -> NoteGrid {
    let map = build_tempo_map(file);
    let events = file.merged_events();
    let notes = resolve_sustain(&events, &map, config.sustain_cap);
    to_grid(&quantize(&notes, config.slot), config.mode)
}
