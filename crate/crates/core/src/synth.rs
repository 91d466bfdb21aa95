//! Seeded generator of small piano pieces, used as a test corpus.
//!
//! Pieces loop a four-chord progression in the left hand under a scale
//! melody, with sustain pedal, tempo changes, slight timing jitter and notes
//! outside the 64-row window. Even pieces are format 1 with a separate tempo
//! track; odd ones are format 0. Writer settings vary between files.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::midi::{Event, EventKind, MidiFile, NoteOffStyle, SmfWriter, Track, SUSTAIN_CONTROLLER};

pub const DEFAULT_SYNTH_SEED: u64 = 2024;
pub const DEFAULT_SYNTH_COUNT: usize = 80;

const DIVISIONS: [u16; 6] = [96, 120, 192, 384, 480, 960];
const MAJOR: [u8; 7] = [0, 2, 4, 5, 7, 9, 11];
const MINOR: [u8; 7] = [0, 2, 3, 5, 7, 8, 10];
const PROGRESSIONS: [[usize; 4]; 5] = [[0, 4, 5, 3], [0, 5, 3, 4], [0, 3, 4, 0], [5, 3, 0, 4], [1, 4, 0, 0]];

#[derive(Debug, Clone)]
pub struct SynthPiece {
    pub name: String,
    pub file: MidiFile,
    pub writer: SmfWriter,
}

impl SynthPiece {
    pub fn to_bytes(&self) -> Vec<u8> {
        self.writer.write(&self.file).expect("generated files satisfy the invariants")
    }
}

struct Note {
    on: u64,
    off: u64,
    channel: u8,
    pitch: u8,
    velocity: u8,
}

fn scale_note(root: u8, scale: &[u8; 7], degree: usize, octave: u8) -> u8 {
    let d = degree % 7;
    let o = octave + (degree / 7) as u8;
    (12 * o + root + scale[d]).min(127)
}

fn to_events(notes: &[Note], mut extra: Vec<Event>) -> Vec<Event> {
    // (tick, order, event): releases first, then controllers, then strikes
    let mut keyed: Vec<(u64, u8, usize, Event)> = Vec::new();
    for (i, n) in notes.iter().enumerate() {
        keyed.push((n.off, 0, i, Event::new(n.off, EventKind::note_off(n.channel, n.pitch))));
        keyed.push((n.on, 2, i, Event::new(n.on, EventKind::note_on(n.channel, n.pitch, n.velocity))));
    }
    for (i, e) in extra.drain(..).enumerate() {
        keyed.push((e.tick, 1, i, e));
    }
    keyed.sort_by_key(|k| (k.0, k.1, k.2));
    let mut events: Vec<Event> = keyed.into_iter().map(|k| k.3).collect();
    let end = events.last().map_or(0, |e| e.tick);
    events.push(Event::new(end, EventKind::EndOfTrack));
    events
}

/// Piece number `index` of the corpus generated from `seed`.
pub fn synth_piece(seed: u64, index: usize) -> SynthPiece {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index as u64);

    let division = DIVISIONS[rng.random_range(0..DIVISIONS.len())];
    let q = u64::from(division);
    let sixteenth = q / 4;
    let bar = 4 * q;
    let bars = rng.random_range(20..40u64);
    let root = rng.random_range(0..12u8);
    let scale = if rng.random_bool(0.5) { &MAJOR } else { &MINOR };
    let progression = PROGRESSIONS[rng.random_range(0..PROGRESSIONS.len())];
    let left_channel = if index % 4 == 0 { 1 } else { 0 };
    let jitter = (sixteenth / 6).max(1);
    let wide = index % 5 == 0;

    let mut right = Vec::new();
    let mut left = Vec::new();
    let mut controls = Vec::new();
    let mut tempos = vec![Event::new(0, EventKind::Tempo(rng.random_range(380_000..900_000)))];

    for b in 0..bars {
        let start = b * bar;
        if b > 0 && rng.random_bool(0.15) {
            tempos.push(Event::new(start, EventKind::Tempo(rng.random_range(380_000..900_000))));
        }
        let degree = progression[(b % 4) as usize];

        // left hand: block chord or broken chord
        let bass_octave = if wide && b % 3 == 0 { 1 } else { 3 };
        let chord: Vec<u8> = [0, 2, 4].iter().map(|&i| scale_note(root, scale, degree + i, bass_octave)).collect();
        let vel = rng.random_range(40..90u8);
        if rng.random_bool(0.5) {
            let len = if rng.random_bool(0.5) { bar } else { 2 * q };
            for &pitch in &chord {
                left.push(Note { on: start, off: start + len - jitter, channel: left_channel, pitch, velocity: vel });
            }
        } else {
            for step in 0..8u64 {
                let pitch = chord[(step % 3) as usize] + if step >= 4 { 12 } else { 0 };
                let on = start + step * 2 * sixteenth;
                left.push(Note { on, off: on + 2 * sixteenth - 1, channel: left_channel, pitch, velocity: vel });
            }
        }

        // right hand: scale walk in sixteenths and eighths
        let mut t = start;
        let mut step = rng.random_range(0..7usize);
        let melody_octave = if wide && b % 4 == 1 { 7 } else { 5 };
        while t < start + bar {
            let len = sixteenth * [1, 2, 2, 3, 4][rng.random_range(0..5)];
            let len = len.min(start + bar - t);
            if rng.random_bool(0.85) {
                let shift = if t > 0 && rng.random_bool(0.3) { rng.random_range(0..=jitter) } else { 0 };
                right.push(Note {
                    on: t - shift.min(t),
                    off: t + len - 1,
                    channel: 0,
                    pitch: scale_note(root, scale, step + 14, melody_octave - 2),
                    velocity: rng.random_range(50..120),
                });
            }
            step = (step + [1, 1, 2, 6, 5][rng.random_range(0..5)]) % 14;
            t += len;
        }

        // pedal down for most bars, sometimes held over several
        if rng.random_bool(0.6) {
            controls.push(Event::new(start + 1, EventKind::ControlChange { channel: 0, controller: SUSTAIN_CONTROLLER, value: 127 }));
            if b % 4 != 3 || rng.random_bool(0.5) {
                let up = start + bar - sixteenth / 2;
                controls.push(Event::new(up, EventKind::ControlChange { channel: 0, controller: SUSTAIN_CONTROLLER, value: 0 }));
            }
        }
    }
    let end = bars * bar;
    controls.push(Event::new(end, EventKind::ControlChange { channel: 0, controller: SUSTAIN_CONTROLLER, value: 0 }));

    let name_meta = Event::new(0, EventKind::Meta { kind: 0x03, data: format!("piece {index}").into_bytes() });
    let time_sig = Event::new(0, EventKind::TimeSig { numerator: 4, denominator_pow: 2, clocks: 24, notated32: 8 });
    let program = Event::new(0, EventKind::ProgramChange { channel: 0, program: 0 });

    let tracks = if index % 2 == 0 {
        let mut conductor = vec![name_meta, time_sig];
        conductor.extend(tempos);
        let end_tick = conductor.last().map_or(0, |e| e.tick);
        conductor.push(Event::new(end_tick, EventKind::EndOfTrack));
        let mut right_extra = vec![program];
        right_extra.extend(controls);
        vec![Track { events: conductor }, Track { events: to_events(&right, right_extra) }, Track { events: to_events(&left, Vec::new()) }]
    } else {
        let mut extra = vec![name_meta, time_sig, program];
        extra.extend(tempos);
        extra.extend(controls);
        right.extend(left);
        vec![Track { events: to_events(&right, extra) }]
    };
    let format = if tracks.len() == 1 { 0 } else { 1 };
    let writer = SmfWriter {
        running_status: index % 3 != 0,
        note_off: if index % 2 == 0 { NoteOffStyle::NoteOff } else { NoteOffStyle::NoteOnZero },
    };
    SynthPiece { name: format!("synth_{index:03}.mid"), file: MidiFile { format, division, tracks }, writer }
}

/// The first `count` pieces for `seed`.
pub fn synth_corpus(seed: u64, count: usize) -> Vec<SynthPiece> {
    (0..count).map(|i| synth_piece(seed, i)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::midi::parse_smf;

    #[test]
    fn pieces_are_valid_and_reparse() {
        for piece in synth_corpus(DEFAULT_SYNTH_SEED, 12) {
            piece.file.check().unwrap();
            let back = parse_smf(&piece.to_bytes()).unwrap();
            assert_eq!(back, piece.file, "{}", piece.name);
        }
    }

    #[test]
    fn generation_is_deterministic() {
        assert_eq!(synth_piece(7, 3).to_bytes(), synth_piece(7, 3).to_bytes());
        assert_ne!(synth_piece(7, 3).to_bytes(), synth_piece(7, 4).to_bytes());
    }
}
