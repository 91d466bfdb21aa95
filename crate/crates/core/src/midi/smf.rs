use super::{Event, EventKind, InvariantError, MidiFile, Track};

/// Largest value representable by a four-byte variable-length quantity.
const MAX_VARINT: u64 = 0x0FFF_FFFF;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum SmfError {
    #[error("malformed header: {0}")]
    MalformedHeader(&'static str),
    #[error("truncated chunk at byte {offset}")]
    TruncatedChunk { offset: usize },
    #[error("SMPTE time division is not supported")]
    SmpteDivisionUnsupported,
    #[error("unsupported SMF format {0}")]
    UnsupportedFormat(u16),
    #[error("variable-length quantity longer than four bytes at byte {offset}")]
    BadVarint { offset: usize },
    #[error("invalid event at byte {offset}: {reason}")]
    InvalidEvent { offset: usize, reason: &'static str },
    #[error("delta time {delta} exceeds the variable-length range")]
    TickOverflow { delta: u64 },
    #[error(transparent)]
    Invariant(#[from] InvariantError),
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
    /// Absolute offset of `bytes[0]` in the file, for diagnostics.
    base: usize,
}

impl<'a> Reader<'a> {
    fn new(bytes: &'a [u8], base: usize) -> Self {
        Reader { bytes, pos: 0, base }
    }

    fn offset(&self) -> usize {
        self.base + self.pos
    }

    fn is_empty(&self) -> bool {
        self.pos >= self.bytes.len()
    }

    fn take(&mut self, n: usize) -> Result<&'a [u8], SmfError> {
        if self.bytes.len() - self.pos < n {
            return Err(SmfError::TruncatedChunk { offset: self.offset() });
        }
        let out = &self.bytes[self.pos..self.pos + n];
        self.pos += n;
        Ok(out)
    }

    fn u8(&mut self) -> Result<u8, SmfError> {
        Ok(self.take(1)?[0])
    }

    fn peek(&self) -> Option<u8> {
        self.bytes.get(self.pos).copied()
    }

    fn u32(&mut self) -> Result<u32, SmfError> {
        let b = self.take(4)?;
        Ok(u32::from_be_bytes([b[0], b[1], b[2], b[3]]))
    }

    fn varint(&mut self) -> Result<u64, SmfError> {
        let start = self.offset();
        let mut value = 0u64;
        for _ in 0..4 {
            let b = self.u8()?;
            value = (value << 7) | u64::from(b & 0x7f);
            if b & 0x80 == 0 {
                return Ok(value);
            }
        }
        Err(SmfError::BadVarint { offset: start })
    }

    fn data_byte(&mut self) -> Result<u8, SmfError> {
        let offset = self.offset();
        let b = self.u8()?;
        if b & 0x80 != 0 {
            return Err(SmfError::InvalidEvent { offset, reason: "status byte where data byte expected" });
        }
        Ok(b)
    }
}

/// Parses a Standard MIDI File (format 0 or 1, PPQN division).
pub fn parse_smf(bytes: &[u8]) -> Result<MidiFile, SmfError> {
    let mut r = Reader::new(bytes, 0);
    if r.take(4).map_err(|_| SmfError::MalformedHeader("missing MThd"))? != b"MThd" {
        return Err(SmfError::MalformedHeader("missing MThd"));
    }
    let len = r.u32().map_err(|_| SmfError::MalformedHeader("truncated header"))? as usize;
    if len < 6 {
        return Err(SmfError::MalformedHeader("header chunk shorter than 6 bytes"));
    }
    let header = r.take(len).map_err(|_| SmfError::MalformedHeader("truncated header"))?;
    let format = u16::from_be_bytes([header[0], header[1]]);
    let ntrks = u16::from_be_bytes([header[2], header[3]]);
    let division = u16::from_be_bytes([header[4], header[5]]);
    if division & 0x8000 != 0 {
        return Err(SmfError::SmpteDivisionUnsupported);
    }
    if division == 0 {
        return Err(SmfError::MalformedHeader("zero division"));
    }
    if format > 1 {
        return Err(SmfError::UnsupportedFormat(format));
    }
    if format == 0 && ntrks != 1 {
        return Err(SmfError::MalformedHeader("format 0 must contain exactly one track"));
    }

    let mut tracks = Vec::with_capacity(usize::from(ntrks));
    while tracks.len() < usize::from(ntrks) {
        let chunk_start = r.offset();
        let id = r.take(4)?;
        let len = r.u32()? as usize;
        let body_start = r.offset();
        let body = r.take(len).map_err(|_| SmfError::TruncatedChunk { offset: chunk_start })?;
        if id == b"MTrk" {
            tracks.push(parse_track(body, body_start)?);
        }
        // Alien chunks are skipped.
    }
    Ok(MidiFile { format, division, tracks })
}

fn parse_track(body: &[u8], base: usize) -> Result<Track, SmfError> {
    let mut r = Reader::new(body, base);
    let mut events = Vec::new();
    let mut tick = 0u64;
    let mut running: Option<u8> = None;
    while !r.is_empty() {
        tick += r.varint()?;
        let offset = r.offset();
        let status = match r.peek() {
            Some(b) if b & 0x80 != 0 => {
                r.pos += 1;
                b
            }
            Some(_) => running.ok_or(SmfError::InvalidEvent { offset, reason: "data byte without running status" })?,
            None => return Err(SmfError::TruncatedChunk { offset }),
        };
        let kind = match status {
            0x80..=0xEF => {
                running = Some(status);
                channel_message(status, &mut r)?
            }
            0xF0 | 0xF7 => {
                let len = r.varint()? as usize;
                let data = r.take(len)?.to_vec();
                EventKind::SysEx { escape: status == 0xF7, data }
            }
            0xFF => {
                let kind = r.u8()?;
                let len = r.varint()? as usize;
                let data = r.take(len)?;
                match (kind, len) {
                    (0x2F, _) => {
                        events.push(Event::new(tick, EventKind::EndOfTrack));
                        // Anything after the end-of-track marker is ignored.
                        return Ok(Track { events });
                    }
                    (0x51, 3) => EventKind::Tempo(u32::from_be_bytes([0, data[0], data[1], data[2]])),
                    (0x58, 4) => EventKind::TimeSig {
                        numerator: data[0],
                        denominator_pow: data[1],
                        clocks: data[2],
                        notated32: data[3],
                    },
                    _ => EventKind::Meta { kind, data: data.to_vec() },
                }
            }
            _ => return Err(SmfError::InvalidEvent { offset, reason: "system real-time or common message in file" }),
        };
        events.push(Event::new(tick, kind));
    }
    Ok(Track { events })
}

fn channel_message(status: u8, r: &mut Reader<'_>) -> Result<EventKind, SmfError> {
    let channel = status & 0x0f;
    Ok(match status & 0xf0 {
        0x80 => {
            let note = r.data_byte()?;
            let _release_velocity = r.data_byte()?;
            EventKind::note_off(channel, note)
        }
        0x90 => EventKind::NoteOn { channel, note: r.data_byte()?, velocity: r.data_byte()? },
        0xA0 => EventKind::PolyPressure { channel, note: r.data_byte()?, value: r.data_byte()? },
        0xB0 => EventKind::ControlChange { channel, controller: r.data_byte()?, value: r.data_byte()? },
        0xC0 => EventKind::ProgramChange { channel, program: r.data_byte()? },
        0xD0 => EventKind::ChannelPressure { channel, value: r.data_byte()? },
        _ => {
            let lsb = r.data_byte()?;
            let msb = r.data_byte()?;
            EventKind::PitchBend { channel, value: u16::from(msb) << 7 | u16::from(lsb) }
        }
    })
}

/// How note releases (`NoteOn` with velocity 0) are written.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub enum NoteOffStyle {
    #[default]
    NoteOnZero,
    /// `8n` status with release velocity 64.
    NoteOff,
}

/// SMF serializer. Running status is used for channel messages unless disabled.
#[derive(Debug, Clone, Copy)]
pub struct SmfWriter {
    pub running_status: bool,
    pub note_off: NoteOffStyle,
}

impl Default for SmfWriter {
    fn default() -> Self {
        SmfWriter { running_status: true, note_off: NoteOffStyle::NoteOnZero }
    }
}

/// Serializes with the default writer settings.
pub fn write_smf(file: &MidiFile) -> Result<Vec<u8>, SmfError> {
    SmfWriter::default().write(file)
}

impl SmfWriter {
    pub fn write(&self, file: &MidiFile) -> Result<Vec<u8>, SmfError> {
        file.check()?;
        let mut out = Vec::new();
        out.extend_from_slice(b"MThd");
        out.extend_from_slice(&6u32.to_be_bytes());
        out.extend_from_slice(&file.format.to_be_bytes());
        out.extend_from_slice(&(file.tracks.len() as u16).to_be_bytes());
        out.extend_from_slice(&file.division.to_be_bytes());
        for track in &file.tracks {
            let body = self.track_body(track)?;
            out.extend_from_slice(b"MTrk");
            out.extend_from_slice(&(body.len() as u32).to_be_bytes());
            out.extend_from_slice(&body);
        }
        Ok(out)
    }

    fn track_body(&self, track: &Track) -> Result<Vec<u8>, SmfError> {
        let mut buf = Vec::new();
        let mut last_tick = 0u64;
        let mut running: Option<u8> = None;
        let mut ended = false;
        for event in &track.events {
            let delta = event.tick - last_tick;
            if delta > MAX_VARINT {
                return Err(SmfError::TickOverflow { delta });
            }
            last_tick = event.tick;
            write_varint(&mut buf, delta);
            match &event.kind {
                EventKind::EndOfTrack => {
                    buf.extend_from_slice(&[0xFF, 0x2F, 0x00]);
                    ended = true;
                    break;
                }
                EventKind::Tempo(t) => {
                    let b = t.to_be_bytes();
                    buf.extend_from_slice(&[0xFF, 0x51, 0x03, b[1], b[2], b[3]]);
                    running = None;
                }
                EventKind::TimeSig { numerator, denominator_pow, clocks, notated32 } => {
                    buf.extend_from_slice(&[0xFF, 0x58, 0x04, *numerator, *denominator_pow, *clocks, *notated32]);
                    running = None;
                }
                EventKind::Meta { kind, data } => {
                    buf.extend_from_slice(&[0xFF, *kind]);
                    write_varint(&mut buf, data.len() as u64);
                    buf.extend_from_slice(data);
                    running = None;
                }
                EventKind::SysEx { escape, data } => {
                    buf.push(if *escape { 0xF7 } else { 0xF0 });
                    write_varint(&mut buf, data.len() as u64);
                    buf.extend_from_slice(data);
                    running = None;
                }
                kind => {
                    let (status, data) = self.channel_bytes(kind);
                    if !(self.running_status && running == Some(status)) {
                        buf.push(status);
                    }
                    running = Some(status);
                    buf.extend_from_slice(&data);
                }
            }
        }
        if !ended {
            write_varint(&mut buf, 0);
            buf.extend_from_slice(&[0xFF, 0x2F, 0x00]);
        }
        Ok(buf)
    }

    fn channel_bytes(&self, kind: &EventKind) -> (u8, Vec<u8>) {
        match *kind {
            EventKind::NoteOn { channel, note, velocity: 0 } if self.note_off == NoteOffStyle::NoteOff => {
                (0x80 | channel, vec![note, 64])
            }
            EventKind::NoteOn { channel, note, velocity } => (0x90 | channel, vec![note, velocity]),
            EventKind::PolyPressure { channel, note, value } => (0xA0 | channel, vec![note, value]),
            EventKind::ControlChange { channel, controller, value } => (0xB0 | channel, vec![controller, value]),
            EventKind::ProgramChange { channel, program } => (0xC0 | channel, vec![program]),
            EventKind::ChannelPressure { channel, value } => (0xD0 | channel, vec![value]),
            EventKind::PitchBend { channel, value } => {
                (0xE0 | channel, vec![(value & 0x7f) as u8, (value >> 7 & 0x7f) as u8])
            }
            _ => unreachable!("not a channel message"),
        }
    }
}

fn write_varint(buf: &mut Vec<u8>, value: u64) {
    debug_assert!(value <= MAX_VARINT);
    for shift in [21u32, 14, 7] {
        if value >> shift != 0 {
            buf.push(((value >> shift) & 0x7f) as u8 | 0x80);
        }
    }
    buf.push((value & 0x7f) as u8);
}
