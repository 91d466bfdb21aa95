use crate::midi::{Event, EventKind, SUSTAIN_CONTROLLER};

use super::tempo::{Seconds, TempoMap};

/// How long a held sustain pedal keeps acting before it is treated as released.
pub const DEFAULT_SUSTAIN_CAP: Seconds = Seconds::whole(3);

/// One sixteenth note at 120 bpm.
pub const DEFAULT_SLOT: Seconds = Seconds::from_raw(1, 8);

/// A sounding note with exact onset and release times.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TimedNote {
    pub onset: Seconds,
    pub release: Seconds,
    pub pitch: u8,
    pub velocity: u8,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct QuantizedNote {
    pub onset_slot: u64,
    pub offset_slot: u64,
    pub pitch: u8,
    pub velocity: u8,
}

struct PedalSpan {
    down: Seconds,
    up: Option<Seconds>,
}

struct Pending {
    channel: u8,
    note: TimedNote,
}

/// Pairs note starts with releases and applies the sustain pedal.
///
/// A pedal (controller 64, value >= 64) that is down when a key is released
/// holds the note until the pedal comes up, but never longer than `cap` after
/// the pedal went down; `None` means no cap. A re-struck pitch cuts the
/// previous note at the new onset. Notes left open are released at the time
/// of the last event. Everything else is dropped, as are zero-length notes.
pub fn resolve_sustain(events: &[Event], map: &TempoMap, cap: Option<Seconds>) -> Vec<TimedNote> {
    debug_assert!(events.windows(2).all(|w| w[0].tick <= w[1].tick));
    let end = events.last().map_or(Seconds::ZERO, |e| map.ticks_to_seconds(e.tick));
    let pedals = pedal_spans(events, map);

    let mut open: Vec<Option<(Seconds, u8)>> = vec![None; 16 * 128];
    let mut done: Vec<Pending> = Vec::new();
    for event in events {
        let EventKind::NoteOn { channel, note, velocity } = event.kind else { continue };
        let t = map.ticks_to_seconds(event.tick);
        let slot = usize::from(channel & 0x0f) * 128 + usize::from(note & 0x7f);
        if velocity > 0 {
            if let Some((onset, vel)) = open[slot].take() {
                done.push(Pending { channel, note: TimedNote { onset, release: t, pitch: note, velocity: vel } });
            }
            open[slot] = Some((t, velocity));
        } else if let Some((onset, vel)) = open[slot].take() {
            let release = sustained_release(&pedals[usize::from(channel & 0x0f)], t, cap, end);
            done.push(Pending { channel, note: TimedNote { onset, release, pitch: note, velocity: vel } });
        }
    }
    for (slot, entry) in open.into_iter().enumerate() {
        if let Some((onset, velocity)) = entry {
            let note = TimedNote { onset, release: end, pitch: (slot % 128) as u8, velocity };
            done.push(Pending { channel: (slot / 128) as u8, note });
        }
    }

    // A pedal-held note still sounding at a re-strike ends there.
    done.sort_by_key(|p| (p.channel, p.note.pitch, p.note.onset));
    for i in 1..done.len() {
        let (prev, next) = (&done[i - 1], &done[i]);
        if prev.channel == next.channel && prev.note.pitch == next.note.pitch && prev.note.release > next.note.onset {
            done[i - 1].note.release = done[i].note.onset;
        }
    }

    let mut notes: Vec<TimedNote> = done.into_iter().map(|p| p.note).filter(|n| n.release > n.onset).collect();
    notes.sort_by_key(|n| (n.onset, n.pitch, n.release));
    notes
}

fn pedal_spans(events: &[Event], map: &TempoMap) -> Vec<Vec<PedalSpan>> {
    let mut spans: Vec<Vec<PedalSpan>> = (0..16).map(|_| Vec::new()).collect();
    let mut down: [Option<Seconds>; 16] = [None; 16];
    for event in events {
        let EventKind::ControlChange { channel, controller: SUSTAIN_CONTROLLER, value } = event.kind else {
            continue;
        };
        let ch = usize::from(channel & 0x0f);
        let t = map.ticks_to_seconds(event.tick);
        match (value >= 64, down[ch]) {
            (true, None) => down[ch] = Some(t),
            (false, Some(start)) => {
                spans[ch].push(PedalSpan { down: start, up: Some(t) });
                down[ch] = None;
            }
            _ => {}
        }
    }
    for (ch, start) in down.into_iter().enumerate() {
        if let Some(start) = start {
            spans[ch].push(PedalSpan { down: start, up: None });
        }
    }
    spans
}

fn sustained_release(spans: &[PedalSpan], key_off: Seconds, cap: Option<Seconds>, end: Seconds) -> Seconds {
    let i = spans.partition_point(|s| s.down <= key_off);
    let Some(span) = i.checked_sub(1).map(|i| &spans[i]) else { return key_off };
    if span.up.is_some_and(|up| up <= key_off) {
        return key_off;
    }
    let limit = match (span.up, cap) {
        (Some(up), Some(cap)) => up.min(span.down + cap),
        (Some(up), None) => up,
        (None, Some(cap)) => span.down + cap,
        (None, None) => end,
    };
    // A pedal that already timed out before the key came up has no effect.
    limit.max(key_off)
}

/// Snaps onsets and releases to the slot grid, rounding halves up. Every
/// note keeps at least one slot.
pub fn quantize(notes: &[TimedNote], slot: Seconds) -> Vec<QuantizedNote> {
    assert!(slot > Seconds::ZERO, "slot duration must be positive");
    notes
        .iter()
        .map(|n| {
            let onset_slot = n.onset.round_half_up_in(slot).max(0) as u64;
            let mut offset_slot = n.release.round_half_up_in(slot).max(0) as u64;
            if offset_slot <= onset_slot {
                offset_slot = onset_slot + 1;
            }
            QuantizedNote { onset_slot, offset_slot, pitch: n.pitch, velocity: n.velocity }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::midi::EventKind as K;

    // division 2 at 500000 us/quarter: one tick is exactly 0.25 s.
    fn map() -> TempoMap {
        TempoMap::from_changes(2, [(0, 500_000)])
    }

    fn at(seconds_x4: u64, kind: K) -> Event {
        Event::new(seconds_x4, kind)
    }

    fn pedal(value: u8) -> K {
        K::ControlChange { channel: 0, controller: 64, value }
    }

    fn secs(x4: i128) -> Seconds {
        Seconds::new(x4, 4)
    }

    #[test]
    fn pedal_up_extends_release() {
        let events = [at(0, K::note_on(0, 60, 90)), at(2, pedal(127)), at(4, K::note_off(0, 60)), at(8, pedal(0))];
        let notes = resolve_sustain(&events, &map(), Some(DEFAULT_SUSTAIN_CAP));
        assert_eq!(notes, vec![TimedNote { onset: secs(0), release: secs(8), pitch: 60, velocity: 90 }]);
    }

    #[test]
    fn pedal_never_released_is_capped() {
        let events = [at(0, K::note_on(0, 60, 90)), at(2, pedal(127)), at(4, K::note_off(0, 60)), at(40, K::EndOfTrack)];
        let notes = resolve_sustain(&events, &map(), Some(DEFAULT_SUSTAIN_CAP));
        assert_eq!(notes[0].release, secs(14));
        let uncapped = resolve_sustain(&events, &map(), None);
        assert_eq!(uncapped[0].release, secs(40));
    }

    #[test]
    fn no_pedal_is_plain_pairing() {
        let events = [at(0, K::note_on(0, 60, 90)), at(4, K::note_off(0, 60)), at(4, K::note_on(0, 62, 50)), at(5, K::note_off(0, 62))];
        let notes = resolve_sustain(&events, &map(), Some(DEFAULT_SUSTAIN_CAP));
        assert_eq!(
            notes,
            vec![
                TimedNote { onset: secs(0), release: secs(4), pitch: 60, velocity: 90 },
                TimedNote { onset: secs(4), release: secs(5), pitch: 62, velocity: 50 },
            ]
        );
    }

    #[test]
    fn restrike_cuts_previous_note() {
        // held key struck again
        let events = [at(0, K::note_on(0, 60, 90)), at(3, K::note_on(0, 60, 70)), at(6, K::note_off(0, 60))];
        let notes = resolve_sustain(&events, &map(), None);
        assert_eq!(notes.len(), 2);
        assert_eq!((notes[0].release, notes[1].onset, notes[1].release), (secs(3), secs(3), secs(6)));

        // pedal-held note struck again
        let events = [
            at(0, pedal(100)),
            at(0, K::note_on(0, 60, 90)),
            at(1, K::note_off(0, 60)),
            at(3, K::note_on(0, 60, 70)),
            at(4, K::note_off(0, 60)),
            at(6, pedal(0)),
        ];
        let notes = resolve_sustain(&events, &map(), None);
        assert_eq!(notes[0].release, secs(3));
        assert_eq!(notes[1].release, secs(6));
    }

    #[test]
    fn timed_out_pedal_does_not_shorten() {
        // pedal down at 0, cap 3 s, key released at 5 s
        let events = [at(0, pedal(127)), at(0, K::note_on(0, 60, 90)), at(20, K::note_off(0, 60))];
        let notes = resolve_sustain(&events, &map(), Some(DEFAULT_SUSTAIN_CAP));
        assert_eq!(notes[0].release, secs(20));
    }

    #[test]
    fn pedal_hysteresis_and_channels() {
        // Rising values above 64 do not restart the pedal; other channels are independent.
        let events = [
            at(0, K::note_on(0, 60, 90)),
            at(1, pedal(65)),
            at(2, pedal(68)),
            at(2, K::ControlChange { channel: 1, controller: 64, value: 127 }),
            at(4, K::note_off(0, 60)),
            at(4, K::note_on(1, 50, 10)),
            at(5, K::note_off(1, 50)),
            at(40, K::EndOfTrack),
        ];
        let notes = resolve_sustain(&events, &map(), Some(DEFAULT_SUSTAIN_CAP));
        assert_eq!(notes[0].release, secs(13));
        assert_eq!(notes[1].release, secs(14));
    }

    #[test]
    fn open_and_orphan_notes() {
        let events = [at(0, K::note_off(0, 61)), at(1, K::note_on(0, 60, 90)), at(9, K::EndOfTrack)];
        let notes = resolve_sustain(&events, &map(), None);
        assert_eq!(notes, vec![TimedNote { onset: secs(1), release: secs(9), pitch: 60, velocity: 90 }]);
    }

    #[test]
    fn zero_length_notes_dropped() {
        let events = [at(1, K::note_on(0, 60, 90)), at(1, K::note_off(0, 60))];
        assert!(resolve_sustain(&events, &map(), None).is_empty());
    }

    #[test]
    fn quantize_examples() {
        let slot = Seconds::new(1, 8);
        let n = |onset: Seconds, release: Seconds| TimedNote { onset, release, pitch: 60, velocity: 1 };
        let q = quantize(
            &[
                n(Seconds::new(808, 768), Seconds::new(2, 1)),
                n(Seconds::ZERO, Seconds::new(1, 100)),
                n(Seconds::new(1, 16), Seconds::new(3, 16)),
            ],
            slot,
        );
        assert_eq!((q[0].onset_slot, q[0].offset_slot), (8, 16));
        assert_eq!((q[1].onset_slot, q[1].offset_slot), (0, 1));
        assert_eq!((q[2].onset_slot, q[2].offset_slot), (1, 2));
    }
}
