//! Line-oriented text form of a MIDI file, in the style of `mf2t`.
//!
//! ```text
//! MFile 1 2 384
//! MTrk
//! 0 Tempo 500000
//! 0 TimeSig 4/4 24 8
//! 1 Meta TrkEnd
//! TrkEnd
//! ```

use std::fmt::Write as _;

use super::{Event, EventKind, MidiFile, Track};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum MtxError {
    #[error("line {line}: syntax error: {msg}")]
    SyntaxError { line: usize, msg: String },
    #[error("line {line}: {what} value {value} out of range")]
    ValueOutOfRange { line: usize, what: &'static str, value: i64 },
}

const TEXT_META_NAMES: [(u8, &str); 7] = [
    (0x01, "Text"),
    (0x02, "Copyright"),
    (0x03, "TrkName"),
    (0x04, "InstrName"),
    (0x05, "Lyric"),
    (0x06, "Marker"),
    (0x07, "Cue"),
];

/// Renders a file as MTX text. Every line, including the last, ends in LF.
pub fn to_mtx(file: &MidiFile) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "MFile {} {} {}", file.format, file.tracks.len(), file.division);
    for (index, track) in file.tracks.iter().enumerate() {
        out.push_str("MTrk\n");
        for event in &track.events {
            let _ = write!(out, "{} ", event.tick);
            write_kind(&mut out, &event.kind, index == 0);
            out.push('\n');
        }
        out.push_str("TrkEnd\n");
    }
    out
}

fn write_kind(out: &mut String, kind: &EventKind, first_track: bool) {
    let _ = match kind {
        EventKind::NoteOn { channel, note, velocity } => {
            write!(out, "On ch={} n={} v={}", channel + 1, note, velocity)
        }
        EventKind::PolyPressure { channel, note, value } => {
            write!(out, "PoPr ch={} n={} v={}", channel + 1, note, value)
        }
        EventKind::ControlChange { channel, controller, value } => {
            write!(out, "Par ch={} c={} v={}", channel + 1, controller, value)
        }
        EventKind::ProgramChange { channel, program } => write!(out, "PrCh ch={} p={}", channel + 1, program),
        EventKind::ChannelPressure { channel, value } => write!(out, "ChPr ch={} v={}", channel + 1, value),
        EventKind::PitchBend { channel, value } => write!(out, "Pb ch={} v={}", channel + 1, value),
        EventKind::Tempo(t) => write!(out, "Tempo {t}"),
        EventKind::TimeSig { numerator, denominator_pow, clocks, notated32 } => {
            // The denominator is printed as a power of two, like mf2t does.
            let denominator = 1u64.checked_shl(u32::from(*denominator_pow)).filter(|_| *denominator_pow < 32);
            match denominator {
                Some(d) => write!(out, "TimeSig {numerator}/{d} {clocks} {notated32}"),
                None => write!(out, "Meta 0x58 {}", hex(&[*numerator, *denominator_pow, *clocks, *notated32])),
            }
        }
        EventKind::Meta { kind: 0x59, data } if data.len() == 2 && data[1] <= 1 => {
            let mode = if data[1] == 0 { "major" } else { "minor" };
            write!(out, "KeySig {} {}", data[0] as i8, mode)
        }
        EventKind::Meta { kind, data } => match text_meta_name(*kind, first_track) {
            Some(name) if is_plain_text(data) => {
                write!(out, "Meta {name} \"{}\"", String::from_utf8_lossy(data))
            }
            _ if data.is_empty() => write!(out, "Meta 0x{kind:02x}"),
            _ => write!(out, "Meta 0x{kind:02x} {}", hex(data)),
        },
        EventKind::SysEx { escape: false, data } => write!(out, "SysEx {}", hex(data)),
        EventKind::SysEx { escape: true, data } => write!(out, "Arb {}", hex(data)),
        EventKind::EndOfTrack => write!(out, "Meta TrkEnd"),
    };
}

fn text_meta_name(kind: u8, first_track: bool) -> Option<&'static str> {
    if kind == 0x03 && first_track {
        return Some("SeqName");
    }
    TEXT_META_NAMES.iter().find(|(k, _)| *k == kind).map(|(_, n)| *n)
}

fn is_plain_text(data: &[u8]) -> bool {
    data.iter().all(|&b| (0x20..0x7f).contains(&b) && b != b'"' && b != b'\\')
}

fn hex(data: &[u8]) -> String {
    data.iter().map(|b| format!("{b:02x}")).collect::<Vec<_>>().join(" ")
}

/// Parses MTX text as produced by [`to_mtx`]. Blank lines are ignored.
pub fn from_mtx(text: &str) -> Result<MidiFile, MtxError> {
    let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l.trim())).filter(|(_, l)| !l.is_empty());

    let (header_line, header) = lines.next().ok_or_else(|| syntax(1, "empty input"))?;
    let fields: Vec<&str> = header.split_whitespace().collect();
    if fields.len() != 4 || fields[0] != "MFile" {
        return Err(syntax(header_line, "expected `MFile <format> <ntrks> <division>`"));
    }
    let format = number(header_line, fields[1], "format", 0, 1)? as u16;
    let ntrks = number(header_line, fields[2], "track count", 0, 0xffff)? as usize;
    let division = number(header_line, fields[3], "division", 1, 0x7fff)? as u16;

    let mut tracks = Vec::new();
    let mut current: Option<Track> = None;
    for (line, content) in lines {
        match (content, current.as_mut()) {
            ("MTrk", None) => current = Some(Track::default()),
            ("TrkEnd", Some(_)) => tracks.push(current.take().unwrap_or_default()),
            (_, Some(track)) => {
                let event = parse_event(line, content)?;
                if track.events.last().is_some_and(|prev| prev.tick > event.tick) {
                    return Err(syntax(line, "tick goes backwards"));
                }
                if track.events.last().is_some_and(|prev| prev.kind == EventKind::EndOfTrack) {
                    return Err(syntax(line, "event after end of track"));
                }
                track.events.push(event);
            }
            (_, None) => return Err(syntax(line, "expected `MTrk`")),
        }
    }
    if current.is_some() {
        return Err(syntax(text.lines().count(), "missing `TrkEnd`"));
    }
    if tracks.len() != ntrks {
        return Err(syntax(header_line, "track count does not match the number of MTrk blocks"));
    }
    if format == 0 && ntrks != 1 {
        return Err(syntax(header_line, "format 0 requires exactly one track"));
    }
    Ok(MidiFile { format, division, tracks })
}

fn syntax(line: usize, msg: &str) -> MtxError {
    MtxError::SyntaxError { line, msg: msg.to_string() }
}

fn number(line: usize, token: &str, what: &'static str, min: i64, max: i64) -> Result<i64, MtxError> {
    let value: i64 = token.parse().map_err(|_| syntax(line, &format!("bad {what} `{token}`")))?;
    if value < min || value > max {
        return Err(MtxError::ValueOutOfRange { line, what, value });
    }
    Ok(value)
}

/// Reads `key=value` and range-checks it.
fn keyed(line: usize, token: Option<&str>, key: &str, what: &'static str, min: i64, max: i64) -> Result<i64, MtxError> {
    let token = token.ok_or_else(|| syntax(line, &format!("missing `{key}=`")))?;
    let value = token
        .strip_prefix(key)
        .and_then(|t| t.strip_prefix('='))
        .ok_or_else(|| syntax(line, &format!("expected `{key}=`, got `{token}`")))?;
    number(line, value, what, min, max)
}

fn parse_event(line: usize, content: &str) -> Result<Event, MtxError> {
    let (tick_str, rest) = content.split_once(' ').ok_or_else(|| syntax(line, "expected `<tick> <event>`"))?;
    let tick: u64 = tick_str.parse().map_err(|_| syntax(line, &format!("bad tick `{tick_str}`")))?;
    let rest = rest.trim_start();
    let mut tokens = rest.split_whitespace();
    let name = tokens.next().ok_or_else(|| syntax(line, "missing event name"))?;

    let channel = |tokens: &mut std::str::SplitWhitespace<'_>| -> Result<u8, MtxError> {
        Ok(keyed(line, tokens.next(), "ch", "channel", 1, 16)? as u8 - 1)
    };
    let kind = match name {
        "On" => {
            let channel = channel(&mut tokens)?;
            let note = keyed(line, tokens.next(), "n", "note", 0, 127)? as u8;
            let velocity = keyed(line, tokens.next(), "v", "velocity", 0, 127)? as u8;
            EventKind::NoteOn { channel, note, velocity }
        }
        "Off" => {
            // Accepted for compatibility with other dumpers; normalized like the binary parser.
            let channel = channel(&mut tokens)?;
            let note = keyed(line, tokens.next(), "n", "note", 0, 127)? as u8;
            let _ = keyed(line, tokens.next(), "v", "velocity", 0, 127)?;
            EventKind::note_off(channel, note)
        }
        "PoPr" => {
            let channel = channel(&mut tokens)?;
            let note = keyed(line, tokens.next(), "n", "note", 0, 127)? as u8;
            let value = keyed(line, tokens.next(), "v", "pressure", 0, 127)? as u8;
            EventKind::PolyPressure { channel, note, value }
        }
        "Par" => {
            let channel = channel(&mut tokens)?;
            let controller = keyed(line, tokens.next(), "c", "controller", 0, 127)? as u8;
            let value = keyed(line, tokens.next(), "v", "controller value", 0, 127)? as u8;
            EventKind::ControlChange { channel, controller, value }
        }
        "PrCh" => {
            let channel = channel(&mut tokens)?;
            let program = keyed(line, tokens.next(), "p", "program", 0, 127)? as u8;
            EventKind::ProgramChange { channel, program }
        }
        "ChPr" => {
            let channel = channel(&mut tokens)?;
            let value = keyed(line, tokens.next(), "v", "pressure", 0, 127)? as u8;
            EventKind::ChannelPressure { channel, value }
        }
        "Pb" => {
            let channel = channel(&mut tokens)?;
            let value = keyed(line, tokens.next(), "v", "pitch bend", 0, 0x3fff)? as u16;
            EventKind::PitchBend { channel, value }
        }
        "Tempo" => {
            let value = tokens.next().ok_or_else(|| syntax(line, "missing tempo"))?;
            EventKind::Tempo(number(line, value, "tempo", 1, 0xff_ffff)? as u32)
        }
        "TimeSig" => {
            let sig = tokens.next().ok_or_else(|| syntax(line, "missing time signature"))?;
            let (n, d) = sig.split_once('/').ok_or_else(|| syntax(line, "expected `<num>/<den>`"))?;
            let numerator = number(line, n, "time signature numerator", 0, 255)? as u8;
            let denominator = number(line, d, "time signature denominator", 1, 1 << 31)?;
            if denominator & (denominator - 1) != 0 {
                return Err(syntax(line, "time signature denominator must be a power of two"));
            }
            let clocks = number(line, tokens.next().unwrap_or(""), "clocks", 0, 255)? as u8;
            let notated32 = number(line, tokens.next().unwrap_or(""), "notated 32nds", 0, 255)? as u8;
            EventKind::TimeSig { numerator, denominator_pow: denominator.trailing_zeros() as u8, clocks, notated32 }
        }
        "KeySig" => {
            let sf = number(line, tokens.next().unwrap_or(""), "key signature", -128, 127)? as i8;
            let mode = match tokens.next() {
                Some("major") => 0,
                Some("minor") => 1,
                _ => return Err(syntax(line, "expected `major` or `minor`")),
            };
            EventKind::Meta { kind: 0x59, data: vec![sf as u8, mode] }
        }
        "Meta" => {
            let what = tokens.next().ok_or_else(|| syntax(line, "missing meta type"))?;
            if what == "TrkEnd" {
                EventKind::EndOfTrack
            } else if let Some(code) = what.strip_prefix("0x") {
                let kind = u8::from_str_radix(code, 16).map_err(|_| syntax(line, "bad meta type"))?;
                let data = parse_hex(line, tokens)?;
                match (kind, data.len()) {
                    (0x2f, 0) => EventKind::EndOfTrack,
                    (0x51, 3) => EventKind::Tempo(u32::from_be_bytes([0, data[0], data[1], data[2]])),
                    (0x58, 4) if data[1] < 32 => EventKind::TimeSig {
                        numerator: data[0],
                        denominator_pow: data[1],
                        clocks: data[2],
                        notated32: data[3],
                    },
                    _ => EventKind::Meta { kind, data },
                }
            } else {
                let kind = match what {
                    "SeqName" => 0x03,
                    other => TEXT_META_NAMES
                        .iter()
                        .find(|(_, n)| *n == other)
                        .map(|(k, _)| *k)
                        .ok_or_else(|| syntax(line, &format!("unknown meta `{other}`")))?,
                };
                let text = rest[4..].trim_start()[what.len()..].trim();
                let inner = text
                    .strip_prefix('"')
                    .and_then(|t| t.strip_suffix('"'))
                    .ok_or_else(|| syntax(line, "expected quoted text"))?;
                EventKind::Meta { kind, data: inner.as_bytes().to_vec() }
            }
        }
        "SysEx" => EventKind::SysEx { escape: false, data: parse_hex(line, tokens)? },
        "Arb" => EventKind::SysEx { escape: true, data: parse_hex(line, tokens)? },
        other => return Err(syntax(line, &format!("unknown event `{other}`"))),
    };
    Ok(Event::new(tick, kind))
}

fn parse_hex<'a>(line: usize, tokens: impl Iterator<Item = &'a str>) -> Result<Vec<u8>, MtxError> {
    tokens
        .map(|t| u8::from_str_radix(t, 16).map_err(|_| syntax(line, &format!("bad hex byte `{t}`"))))
        .collect()
}
