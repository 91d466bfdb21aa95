use proptest::prelude::*;
use std::collections::BTreeSet;

use rollgan::analysis::{analyze, chord_quality, ChordQuality};
use rollgan::midi::{parse_smf, write_smf};
use rollgan::pianoroll::{
    decode_image, encode_window, level_to_velocity, read_png, velocity_to_level, window_to_midi, write_png,
};
use rollgan::preprocess::{file_to_grid, Mode, NoteGrid, PreprocessConfig, ROWS, WINDOW_SLOTS};

fn window(mode: Mode, density: u32) -> impl Strategy<Value = NoteGrid> {
    let cell = move || match mode {
        Mode::Binary => prop_oneof![density => Just(0u8), 1 => Just(127u8)].boxed(),
        Mode::Velocity => prop_oneof![density => Just(0u8), 1 => 1u8..128].boxed(),
    };
    prop::collection::vec(prop::collection::vec(cell(), ROWS), WINDOW_SLOTS)
        .prop_map(move |cols| NoteGrid::from_columns(mode, cols.into_iter().map(|c| c.try_into().unwrap()).collect()))
}

fn shifted(g: &NoteGrid, k: usize) -> NoteGrid {
    let mut out = NoteGrid::silent(g.mode(), g.len());
    for slot in 0..g.len() {
        for row in 0..ROWS - k {
            out.set(row + k, slot, g.get(row, slot));
        }
    }
    out
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn binary_windows_round_trip(w in window(Mode::Binary, 3)) {
        let image = encode_window(&w).unwrap();
        prop_assert!(image.as_raw().iter().all(|&l| l == 0 || l == 255));
        prop_assert_eq!(decode_image(&image, Mode::Binary), w);
    }

    #[test]
    fn velocity_windows_round_trip(w in window(Mode::Velocity, 3)) {
        prop_assert_eq!(decode_image(&encode_window(&w).unwrap(), Mode::Velocity), w);
    }

    #[test]
    fn encoding_is_injective(a in window(Mode::Binary, 8), b in window(Mode::Binary, 8)) {
        prop_assert_eq!(a == b, encode_window(&a).unwrap() == encode_window(&b).unwrap());
    }

    #[test]
    fn png_round_trip(w in window(Mode::Velocity, 2)) {
        let image = encode_window(&w).unwrap();
        prop_assert_eq!(read_png(&write_png(&image)).unwrap(), image);
    }

    #[test]
    fn decoded_midi_reproduces_activity(w in window(Mode::Binary, 12), mode in prop_oneof![Just(Mode::Binary), Just(Mode::Velocity)]) {
        let midi = parse_smf(&write_smf(&window_to_midi(&w)).unwrap()).unwrap();
        let back = file_to_grid(&midi, &PreprocessConfig::with_mode(mode)).padded_to(WINDOW_SLOTS);
        prop_assert_eq!(back.activity(), w.activity());
    }

    #[test]
    fn velocity_midi_keeps_run_peaks(w in window(Mode::Velocity, 12)) {
        let back = file_to_grid(&window_to_midi(&w), &PreprocessConfig::with_mode(Mode::Velocity)).padded_to(WINDOW_SLOTS);
        for row in 0..ROWS {
            let mut slot = 0;
            while slot < WINDOW_SLOTS {
                if w.get(row, slot) == 0 {
                    slot += 1;
                    continue;
                }
                let start = slot;
                while slot < WINDOW_SLOTS && w.get(row, slot) != 0 {
                    slot += 1;
                }
                let peak = (start..slot).map(|s| w.get(row, s)).max().unwrap();
                prop_assert!((start..slot).all(|s| back.get(row, s) == peak));
            }
        }
    }

    #[test]
    fn transposition_rotates_histogram(w in window(Mode::Binary, 10), k in 0usize..12) {
        // keep everything inside the window after shifting up by k
        let mut base = w.clone();
        for slot in 0..base.len() {
            for row in ROWS - 12..ROWS {
                base.set(row, slot, 0);
            }
        }
        let a = analyze(&base);
        let b = analyze(&shifted(&base, k));
        for pc in 0..12 {
            prop_assert_eq!(b.pitch_class_histogram[(pc + k) % 12], a.pitch_class_histogram[pc]);
        }
        prop_assert_eq!(&b.chord_events, &a.chord_events);
        prop_assert_eq!(b.repeated_rhythm_score, a.repeated_rhythm_score);
        prop_assert_eq!(b.onsets, a.onsets);
    }

    #[test]
    fn analysis_is_pure_and_bounded(w in window(Mode::Velocity, 6)) {
        let r = analyze(&w);
        prop_assert_eq!(&r, &analyze(&w));
        prop_assert_eq!(r.pitch_class_histogram.iter().sum::<u64>(), r.onsets);
        prop_assert!((0.0..=1.0).contains(&r.repeated_rhythm_score));
        prop_assert_eq!(r.note_density, r.onsets as f64 / WINDOW_SLOTS as f64);
    }
}

#[test]
fn every_velocity_survives_the_image_levels() {
    for v in 0..=127u8 {
        assert_eq!(level_to_velocity(velocity_to_level(v)), v);
    }
    assert_eq!((velocity_to_level(0), velocity_to_level(127)), (0, 255));
}

#[test]
fn threshold_at_mid_gray() {
    let mut image = encode_window(&NoteGrid::silent(Mode::Binary, WINDOW_SLOTS)).unwrap();
    image.set_pixel(63, 5, [127, 128, 255]);
    let g = decode_image(&image, Mode::Binary);
    assert_eq!((g.get(0, 15), g.get(0, 16), g.get(0, 17)), (0, 127, 127));
}

#[test]
fn triads_are_found_in_every_key_and_voicing() {
    let qualities = [(ChordQuality::Major, [0, 4, 7]), (ChordQuality::Minor, [0, 3, 7]), (ChordQuality::Quartal, [0, 5, 10])];
    for (quality, intervals) in qualities {
        for root in 28u8..40 {
            for spread in [0u8, 12, 24] {
                let mut g = NoteGrid::silent(Mode::Binary, 2);
                for (i, step) in intervals.into_iter().enumerate() {
                    let note = root + step + if i == 2 { spread } else { 0 };
                    g.set(usize::from(note - 28), 1, 127);
                }
                let events = analyze(&g).chord_events;
                assert_eq!(events.len(), 1, "root {root}");
                assert_eq!((events[0].slot, events[0].quality), (1, quality), "root {root} spread {spread}");
            }
        }
    }
}

#[test]
fn chord_quality_matches_set_oracle() {
    let shapes = [(ChordQuality::Major, [0, 4, 7]), (ChordQuality::Minor, [0, 3, 7]), (ChordQuality::Quartal, [0, 5, 10])];
    for mask in 0u16..1 << 12 {
        let classes: BTreeSet<u16> = (0..12).filter(|pc| mask >> pc & 1 == 1).collect();
        let want = if classes.len() < 3 {
            None
        } else {
            shapes
                .iter()
                .find(|(_, shape)| (0..12).any(|root| shape.iter().all(|i| classes.contains(&((root + i) % 12)))))
                .map_or(Some(ChordQuality::Other), |s| Some(s.0))
        };
        assert_eq!(chord_quality(mask), want, "{classes:?}");
    }
}
