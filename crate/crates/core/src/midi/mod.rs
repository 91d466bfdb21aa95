//! Standard MIDI File and MTX text codecs.
//!
//! Events carry absolute tick times. Channels are stored 0-based and printed
//! 1-based in MTX. A parsed `NoteOff` is normalized to `NoteOn` with velocity 0.

mod mtx;
mod smf;

pub use mtx::{from_mtx, to_mtx, MtxError};
pub use smf::{parse_smf, write_smf, NoteOffStyle, SmfError, SmfWriter};

/// Default tempo when a file carries no Tempo meta event (120 bpm).
pub const DEFAULT_TEMPO: u32 = 500_000;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct MidiFile {
    pub format: u16,
    pub division: u16,
    pub tracks: Vec<Track>,
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Track {
    pub events: Vec<Event>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Event {
    pub tick: u64,
    pub kind: EventKind,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum EventKind {
    NoteOn { channel: u8, note: u8, velocity: u8 },
    PolyPressure { channel: u8, note: u8, value: u8 },
    ControlChange { channel: u8, controller: u8, value: u8 },
    ProgramChange { channel: u8, program: u8 },
    ChannelPressure { channel: u8, value: u8 },
    /// 14-bit value, 8192 = centre.
    PitchBend { channel: u8, value: u16 },
    Tempo(u32),
    TimeSig { numerator: u8, denominator_pow: u8, clocks: u8, notated32: u8 },
    /// Any other meta event, payload kept verbatim.
    Meta { kind: u8, data: Vec<u8> },
    /// `F0` (or `F7` when `escape`) system exclusive payload, opaque.
    SysEx { escape: bool, data: Vec<u8> },
    EndOfTrack,
}

/// Controller number of the sustain (damper) pedal.
pub const SUSTAIN_CONTROLLER: u8 = 64;

impl Event {
    pub fn new(tick: u64, kind: EventKind) -> Self {
        Event { tick, kind }
    }
}

impl EventKind {
    pub fn note_on(channel: u8, note: u8, velocity: u8) -> Self {
        EventKind::NoteOn { channel, note, velocity }
    }

    pub fn note_off(channel: u8, note: u8) -> Self {
        EventKind::NoteOn { channel, note, velocity: 0 }
    }

    /// Channel below 16, data bytes below 128, tempo within 24 bits.
    fn in_range(&self) -> bool {
        let data = |b: &[u8]| b.iter().all(|&b| b < 0x80);
        match *self {
            EventKind::NoteOn { channel, note, velocity } => channel < 16 && data(&[note, velocity]),
            EventKind::PolyPressure { channel, note, value } => channel < 16 && data(&[note, value]),
            EventKind::ControlChange { channel, controller, value } => channel < 16 && data(&[controller, value]),
            EventKind::ProgramChange { channel, program } => channel < 16 && data(&[program]),
            EventKind::ChannelPressure { channel, value } => channel < 16 && data(&[value]),
            EventKind::PitchBend { channel, value } => channel < 16 && value < 0x4000,
            EventKind::Tempo(t) => t < 1 << 24,
            _ => true,
        }
    }
}

impl MidiFile {
    /// Validates the structural invariants shared by both codecs.
    pub fn check(&self) -> Result<(), InvariantError> {
        if self.division == 0 || self.division & 0x8000 != 0 {
            return Err(InvariantError::Division(self.division));
        }
        if self.format > 1 {
            return Err(InvariantError::Format(self.format));
        }
        if self.format == 0 && self.tracks.len() != 1 {
            return Err(InvariantError::Format0Tracks(self.tracks.len()));
        }
        for (i, track) in self.tracks.iter().enumerate() {
            if track.events.windows(2).any(|w| w[1].tick < w[0].tick) {
                return Err(InvariantError::Unsorted(i));
            }
            let body = track.events.split_last().map_or(&[][..], |(_, rest)| rest);
            if body.iter().any(|e| e.kind == EventKind::EndOfTrack) {
                return Err(InvariantError::EarlyEndOfTrack(i));
            }
            if let Some(e) = track.events.iter().find(|e| !e.kind.in_range()) {
                return Err(InvariantError::DataRange { track: i, tick: e.tick });
            }
        }
        Ok(())
    }

    /// Every event of every track, merged into a single stream sorted by tick.
    /// Equal ticks keep track order, then file order.
    pub fn merged_events(&self) -> Vec<Event> {
        let mut all: Vec<(usize, usize, &Event)> = self
            .tracks
            .iter()
            .enumerate()
            .flat_map(|(t, track)| track.events.iter().enumerate().map(move |(i, e)| (t, i, e)))
            .collect();
        all.sort_by_key(|&(t, i, e)| (e.tick, t, i));
        all.into_iter().map(|(_, _, e)| e.clone()).collect()
    }

    /// Tick of the latest event in any track (0 for an empty file).
    pub fn last_tick(&self) -> u64 {
        self.tracks
            .iter()
            .filter_map(|t| t.events.last())
            .map(|e| e.tick)
            .max()
            .unwrap_or(0)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum InvariantError {
    #[error("division must be a positive ticks-per-quarter value, got {0:#06x}")]
    Division(u16),
    #[error("unsupported SMF format {0}")]
    Format(u16),
    #[error("format 0 requires exactly one track, found {0}")]
    Format0Tracks(usize),
    #[error("events of track {0} are not sorted by tick")]
    Unsorted(usize),
    #[error("track {0} has events after its end-of-track marker")]
    EarlyEndOfTrack(usize),
    #[error("track {track}: event at tick {tick} has a channel or data value out of range")]
    DataRange { track: usize, tick: u64 },
}
