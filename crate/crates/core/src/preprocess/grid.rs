use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::notes::QuantizedNote;

/// Number of pitch rows in a grid.
pub const ROWS: usize = 64;
/// MIDI note of row 0.
pub const LOWEST_NOTE: u8 = 28;
/// MIDI note of row 63.
pub const HIGHEST_NOTE: u8 = LOWEST_NOTE + ROWS as u8 - 1;
/// Longest run of silent columns kept between notes (one 4/4 bar of sixteenths).
pub const MAX_INTERNAL_SILENCE: usize = 16;
/// Slots covered by one image: 64 pixels of three slots each.
pub const WINDOW_SLOTS: usize = 192;

/// Whether cells hold the full velocity or only on/off (127).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    #[default]
    Binary,
    Velocity,
}

impl Mode {
    pub fn as_str(self) -> &'static str {
        match self {
            Mode::Binary => "binary",
            Mode::Velocity => "velocity",
        }
    }
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Mode {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "binary" => Ok(Mode::Binary),
            "velocity" => Ok(Mode::Velocity),
            other => Err(format!("unknown mode `{other}` (expected binary or velocity)")),
        }
    }
}

pub type Column = [u8; ROWS];

/// A 64-row piano roll; each column is one slot, each cell a velocity (0 = silent).
#[derive(Clone, PartialEq, Eq)]
pub struct NoteGrid {
    mode: Mode,
    columns: Vec<Column>,
}

impl fmt::Debug for NoteGrid {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "NoteGrid({}, {} slots, {} active)", self.mode, self.len(), self.active_cells())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum GridError {
    #[error("cannot concatenate {0} and {1} grids")]
    ModeMismatch(Mode, Mode),
    #[error("no grids to concatenate")]
    Empty,
}

impl NoteGrid {
    pub fn empty(mode: Mode) -> Self {
        NoteGrid { mode, columns: Vec::new() }
    }

    pub fn silent(mode: Mode, slots: usize) -> Self {
        NoteGrid { mode, columns: vec![[0; ROWS]; slots] }
    }

    /// Panics if a binary grid holds a nonzero value other than 127 or any cell exceeds 127.
    pub fn from_columns(mode: Mode, columns: Vec<Column>) -> Self {
        assert!(columns.iter().flatten().all(|&c| c <= 127), "cell values must be 0..=127");
        if mode == Mode::Binary {
            assert!(columns.iter().flatten().all(|&c| c == 0 || c == 127), "binary cells must be 0 or 127");
        }
        NoteGrid { mode, columns }
    }

    pub fn mode(&self) -> Mode {
        self.mode
    }

    /// Number of slots T.
    pub fn len(&self) -> usize {
        self.columns.len()
    }

    pub fn is_empty(&self) -> bool {
        self.columns.is_empty()
    }

    pub fn columns(&self) -> &[Column] {
        &self.columns
    }

    pub fn get(&self, row: usize, slot: usize) -> u8 {
        self.columns[slot][row]
    }

    /// Writes a cell, clamping to the mode (binary stores 127 for any nonzero value).
    pub fn set(&mut self, row: usize, slot: usize, value: u8) {
        let value = match self.mode {
            Mode::Binary if value > 0 => 127,
            _ => value.min(127),
        };
        self.columns[slot][row] = value;
    }

    pub fn active_cells(&self) -> usize {
        self.columns.iter().flatten().filter(|&&c| c != 0).count()
    }

    /// Per-cell on/off pattern, column-major.
    pub fn activity(&self) -> Vec<bool> {
        self.columns.iter().flatten().map(|&c| c != 0).collect()
    }

    /// Copy extended with silent columns (or truncated) to exactly `slots`.
    pub fn padded_to(&self, slots: usize) -> NoteGrid {
        let mut columns = self.columns.clone();
        columns.resize(slots, [0; ROWS]);
        NoteGrid { mode: self.mode, columns }
    }

    /// Columns `[start, end)` as a new grid.
    pub fn slice(&self, start: usize, end: usize) -> NoteGrid {
        NoteGrid { mode: self.mode, columns: self.columns[start..end].to_vec() }
    }
}

fn is_silent(column: &Column) -> bool {
    column.iter().all(|&c| c == 0)
}

/// Maps any MIDI note into the 64-row window by octave transposition.
pub fn fold_pitch(note: u8) -> u8 {
    let mut n = note;
    while n < LOWEST_NOTE {
        n += 12;
    }
    while n > HIGHEST_NOTE {
        n -= 12;
    }
    n - LOWEST_NOTE
}

pub fn to_grid(notes: &[QuantizedNote], mode: Mode) -> NoteGrid {
    let slots = notes.iter().map(|n| n.offset_slot).max().unwrap_or(0) as usize;
    let mut grid = NoteGrid::silent(mode, slots);
    for note in notes {
        debug_assert!(note.offset_slot > note.onset_slot);
        let row = usize::from(fold_pitch(note.pitch));
        let value = match mode {
            Mode::Binary => 127,
            Mode::Velocity => note.velocity.min(127),
        };
        for column in &mut grid.columns[note.onset_slot as usize..note.offset_slot as usize] {
            column[row] = column[row].max(value);
        }
    }
    grid
}

/// Trims silent edges and shortens internal silences to [`MAX_INTERNAL_SILENCE`].
pub fn collapse_silence(grid: &NoteGrid) -> NoteGrid {
    let Some(first) = grid.columns.iter().position(|c| !is_silent(c)) else {
        return NoteGrid::empty(grid.mode);
    };
    let last = grid.columns.iter().rposition(|c| !is_silent(c)).unwrap_or(first);
    let mut columns = Vec::with_capacity(last - first + 1);
    let mut run = 0;
    for column in &grid.columns[first..=last] {
        if is_silent(column) {
            run += 1;
            if run > MAX_INTERNAL_SILENCE {
                continue;
            }
        } else {
            run = 0;
        }
        columns.push(*column);
    }
    NoteGrid { mode: grid.mode, columns }
}

/// Joins grids end to end in the given order.
pub fn concat_grids(grids: &[NoteGrid]) -> Result<NoteGrid, GridError> {
    let mode = grids.first().ok_or(GridError::Empty)?.mode;
    if let Some(other) = grids.iter().find(|g| g.mode != mode) {
        return Err(GridError::ModeMismatch(mode, other.mode));
    }
    let columns = grids.iter().flat_map(|g| g.columns.iter().copied()).collect();
    Ok(NoteGrid { mode, columns })
}

/// Splits into consecutive windows of `window_slots`; a partial tail is dropped.
pub fn segment(grid: &NoteGrid, window_slots: usize) -> Vec<NoteGrid> {
    assert!(window_slots > 0, "window must be at least one slot");
    grid.columns
        .chunks_exact(window_slots)
        .map(|c| NoteGrid { mode: grid.mode, columns: c.to_vec() })
        .collect()
}
