use std::fs;
use std::path::PathBuf;

use rollgan::dataset::{list_midi_files, roundtrip_check};
use rollgan::midi::parse_smf;
use rollgan::preprocess::{Mode, PreprocessConfig};
use rollgan::synth::{synth_corpus, DEFAULT_SYNTH_COUNT, DEFAULT_SYNTH_SEED};

fn corpus(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../corpus").join(name)
}

#[test]
fn synthetic_files_match_the_generator() {
    let files = list_midi_files(&corpus("synthetic")).unwrap();
    assert_eq!(files.len(), DEFAULT_SYNTH_COUNT);
    for (path, piece) in files.iter().zip(synth_corpus(DEFAULT_SYNTH_SEED, DEFAULT_SYNTH_COUNT)) {
        assert_eq!(path.file_name().unwrap().to_str().unwrap(), piece.name);
        assert!(fs::read(path).unwrap() == piece.to_bytes(), "{} differs from the generator", piece.name);
    }
}

#[test]
fn every_bundled_file_round_trips_in_both_modes() {
    for dir in ["real", "synthetic"] {
        for path in list_midi_files(&corpus(dir)).unwrap() {
            let file = parse_smf(&fs::read(&path).unwrap()).unwrap();
            for mode in [Mode::Binary, Mode::Velocity] {
                let r = roundtrip_check(&file, &PreprocessConfig::with_mode(mode));
                assert!(r.windows > 0 && r.passed(), "{} ({mode}): {r:?}", path.display());
            }
        }
    }
}
