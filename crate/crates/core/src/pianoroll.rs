//! 64×192-slot windows as 64×64 RGB images, three slots per pixel.
//!
//! Slot `3x + k` of a pitch row lands in channel `k` (R, G, B) of column `x`.
//! Image row 0 is the highest pitch.

use std::io::Cursor;

use crate::midi::{Event, EventKind, MidiFile, Track, DEFAULT_TEMPO};
use crate::preprocess::{Mode, NoteGrid, LOWEST_NOTE, ROWS, WINDOW_SLOTS};

pub const IMAGE_SIZE: usize = 64;
pub const CHANNELS: usize = 3;
/// Division of decoded MIDI files; one slot is [`TICKS_PER_SLOT`] ticks.
pub const OUTPUT_DIVISION: u16 = 120;
pub const TICKS_PER_SLOT: u64 = 30;
/// Lowest level decoded as an active cell in binary mode.
pub const BINARY_THRESHOLD: u8 = 128;

const LEN: usize = IMAGE_SIZE * IMAGE_SIZE * CHANNELS;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum PianoRollError {
    #[error("window must be {ROWS}x{WINDOW_SLOTS} slots, got {rows}x{slots}")]
    BadWindowShape { rows: usize, slots: usize },
    #[error("image buffer must hold {LEN} bytes, got {0}")]
    BadImageShape(usize),
    #[error("cannot decode PNG: {0}")]
    PngDecodeError(String),
    #[error("image must be {IMAGE_SIZE}x{IMAGE_SIZE}, got {width}x{height}")]
    WrongDimensions { width: u32, height: u32 },
}

/// Row-major `(y, x, channel)` 8-bit RGB raster.
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct PianoRollImage {
    pixels: Vec<u8>,
}

impl std::fmt::Debug for PianoRollImage {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let lit = self.pixels.iter().filter(|&&p| p != 0).count();
        write!(f, "PianoRollImage({lit} nonzero channels)")
    }
}

impl Default for PianoRollImage {
    fn default() -> Self {
        Self::black()
    }
}

impl PianoRollImage {
    pub fn black() -> Self {
        PianoRollImage { pixels: vec![0; LEN] }
    }

    pub fn from_raw(pixels: Vec<u8>) -> Result<Self, PianoRollError> {
        if pixels.len() != LEN {
            return Err(PianoRollError::BadImageShape(pixels.len()));
        }
        Ok(PianoRollImage { pixels })
    }

    pub fn as_raw(&self) -> &[u8] {
        &self.pixels
    }

    pub fn into_raw(self) -> Vec<u8> {
        self.pixels
    }

    pub fn pixel(&self, y: usize, x: usize) -> [u8; 3] {
        let i = (y * IMAGE_SIZE + x) * CHANNELS;
        [self.pixels[i], self.pixels[i + 1], self.pixels[i + 2]]
    }

    pub fn set_pixel(&mut self, y: usize, x: usize, rgb: [u8; 3]) {
        let i = (y * IMAGE_SIZE + x) * CHANNELS;
        self.pixels[i..i + 3].copy_from_slice(&rgb);
    }

    fn channel_mut(&mut self, row: usize, slot: usize) -> &mut u8 {
        let (y, x, k) = (ROWS - 1 - row, slot / CHANNELS, slot % CHANNELS);
        &mut self.pixels[(y * IMAGE_SIZE + x) * CHANNELS + k]
    }

    fn channel(&self, row: usize, slot: usize) -> u8 {
        let (y, x, k) = (ROWS - 1 - row, slot / CHANNELS, slot % CHANNELS);
        self.pixels[(y * IMAGE_SIZE + x) * CHANNELS + k]
    }
}

/// Cell value 0..=127 to an 8-bit level, `round_half_up(v * 255 / 127)`.
pub fn velocity_to_level(v: u8) -> u8 {
    ((510 * u32::from(v) + 127) / 254) as u8
}

/// 8-bit level to a cell value, `round_half_up(level * 127 / 255)`.
pub fn level_to_velocity(level: u8) -> u8 {
    ((254 * u32::from(level) + 255) / 510) as u8
}

pub fn encode_window(window: &NoteGrid) -> Result<PianoRollImage, PianoRollError> {
    if window.len() != WINDOW_SLOTS {
        return Err(PianoRollError::BadWindowShape { rows: ROWS, slots: window.len() });
    }
    let mut image = PianoRollImage::black();
    for (slot, column) in window.columns().iter().enumerate() {
        for (row, &cell) in column.iter().enumerate() {
            if cell == 0 {
                continue;
            }
            *image.channel_mut(row, slot) = match window.mode() {
                Mode::Binary => 255,
                Mode::Velocity => velocity_to_level(cell),
            };
        }
    }
    Ok(image)
}

pub fn decode_image(image: &PianoRollImage, mode: Mode) -> NoteGrid {
    let mut grid = NoteGrid::silent(mode, WINDOW_SLOTS);
    for slot in 0..WINDOW_SLOTS {
        for row in 0..ROWS {
            let level = image.channel(row, slot);
            let cell = match mode {
                Mode::Binary if level >= BINARY_THRESHOLD => 127,
                Mode::Binary => 0,
                Mode::Velocity => level_to_velocity(level),
            };
            if cell != 0 {
                grid.set(row, slot, cell);
            }
        }
    }
    grid
}

/// Each maximal run of nonzero cells in a row becomes one note.
///
/// Works for any grid length; the output is format 0 at division 120 and
/// 120 bpm, so one slot is 30 ticks.
pub fn window_to_midi(window: &NoteGrid) -> MidiFile {
    // (tick, is_on, pitch, velocity); offs sort before ons at the same tick
    let mut notes: Vec<(u64, bool, u8, u8)> = Vec::new();
    for row in 0..ROWS {
        let pitch = row as u8 + LOWEST_NOTE;
        let mut start: Option<(usize, u8)> = None;
        for slot in 0..=window.len() {
            let cell = if slot < window.len() { window.get(row, slot) } else { 0 };
            match (start, cell) {
                (None, 0) => {}
                (None, v) => start = Some((slot, v)),
                (Some((s, peak)), 0) => {
                    notes.push((s as u64 * TICKS_PER_SLOT, true, pitch, peak));
                    notes.push((slot as u64 * TICKS_PER_SLOT, false, pitch, 0));
                    start = None;
                }
                (Some((s, peak)), v) => start = Some((s, peak.max(v))),
            }
        }
    }
    notes.sort_by_key(|&(tick, on, pitch, _)| (tick, on, pitch));

    let mut events = vec![Event::new(0, EventKind::Tempo(DEFAULT_TEMPO))];
    events.extend(notes.iter().map(|&(tick, _, pitch, velocity)| Event::new(tick, EventKind::note_on(0, pitch, velocity))));
    let end = events.last().map_or(0, |e| e.tick);
    events.push(Event::new(end, EventKind::EndOfTrack));
    MidiFile { format: 0, division: OUTPUT_DIVISION, tracks: vec![Track { events }] }
}

pub fn write_png(image: &PianoRollImage) -> Vec<u8> {
    let mut out = Vec::new();
    {
        let mut encoder = png::Encoder::new(&mut out, IMAGE_SIZE as u32, IMAGE_SIZE as u32);
        encoder.set_color(png::ColorType::Rgb);
        encoder.set_depth(png::BitDepth::Eight);
        let mut writer = encoder.write_header().expect("writing to a Vec cannot fail");
        writer.write_image_data(&image.pixels).expect("buffer size matches header");
    }
    out
}

pub fn read_png(bytes: &[u8]) -> Result<PianoRollImage, PianoRollError> {
    let err = |e: png::DecodingError| PianoRollError::PngDecodeError(e.to_string());
    let mut decoder = png::Decoder::new(Cursor::new(bytes));
    decoder.set_transformations(png::Transformations::EXPAND);
    let mut reader = decoder.read_info().map_err(err)?;
    let (width, height) = (reader.info().width, reader.info().height);
    if (width, height) != (IMAGE_SIZE as u32, IMAGE_SIZE as u32) {
        return Err(PianoRollError::WrongDimensions { width, height });
    }
    let size = reader.output_buffer_size().ok_or_else(|| PianoRollError::PngDecodeError("image too large".into()))?;
    let mut buf = vec![0; size];
    let info = reader.next_frame(&mut buf).map_err(err)?;
    if info.bit_depth != png::BitDepth::Eight {
        return Err(PianoRollError::PngDecodeError(format!("unsupported bit depth {:?}", info.bit_depth)));
    }
    let buf = &buf[..info.buffer_size()];
    let pixels = match info.color_type {
        png::ColorType::Rgb => buf.to_vec(),
        png::ColorType::Rgba => buf.chunks_exact(4).flat_map(|p| [p[0], p[1], p[2]]).collect(),
        other => return Err(PianoRollError::PngDecodeError(format!("unsupported color type {other:?}"))),
    };
    PianoRollImage::from_raw(pixels)
}
