//! MIDI piano recordings to 64×64 RGB piano-roll images, a DCGAN trained on
//! them, and the way back from generated images to MIDI.

pub mod analysis;
pub mod dataset;
pub mod dcgan;
pub mod midi;
pub mod pianoroll;
pub mod preprocess;
pub mod synth;

pub use analysis::{analyze, AnalysisReport, ChordQuality, Summary};
pub use dataset::{build_dataset, list_midi_files, load_dataset, roundtrip_check, Dataset, DatasetError, Manifest};
pub use dcgan::{Gan, GanArchitecture, GanConfig, TrainReport, TrainState};
pub use midi::{from_mtx, parse_smf, to_mtx, write_smf, Event, EventKind, MidiFile, Track};
pub use pianoroll::{decode_image, encode_window, read_png, window_to_midi, write_png, PianoRollImage};
pub use preprocess::{file_to_grid, Mode, NoteGrid, PreprocessConfig};
