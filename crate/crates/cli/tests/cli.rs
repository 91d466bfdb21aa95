use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use rollgan::midi::{parse_smf, to_mtx, write_smf, Event, EventKind, MidiFile, Track};

fn rollgan(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_rollgan")).args(args).output().expect("binary runs")
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn corpus(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../corpus").join(name)
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn small_file() -> MidiFile {
    let events = vec![
        Event::new(0, EventKind::Tempo(500_000)),
        Event::new(0, EventKind::ControlChange { channel: 0, controller: 64, value: 0 }),
        Event::new(107, EventKind::note_on(0, 63, 91)),
        Event::new(400, EventKind::note_off(0, 63)),
        Event::new(400, EventKind::EndOfTrack),
    ];
    MidiFile { format: 0, division: 384, tracks: vec![Track { events }] }
}

#[test]
fn convert_both_ways() {
    let dir = tempfile::tempdir().unwrap();
    let (mid, mtx, back, mtx2) = ["a.mid", "a.mtx", "b.mid", "b.mtx"].map(|n| dir.path().join(n)).into();
    fs::write(&mid, write_smf(&small_file()).unwrap()).unwrap();
    assert!(rollgan(&["convert", s(&mid), s(&mtx)]).status.success());
    let text = fs::read_to_string(&mtx).unwrap();
    assert_eq!(text, to_mtx(&small_file()));
    assert!(text.contains("0 Tempo 500000\n") && text.contains("107 On ch=1 n=63 v=91\n") && text.contains("0 Par ch=1 c=64 v=0\n"));
    assert!(rollgan(&["convert", s(&mtx), s(&back)]).status.success());
    assert_eq!(parse_smf(&fs::read(&back).unwrap()).unwrap(), small_file());
    assert!(rollgan(&["convert", s(&back), s(&mtx2), "--direction", "midi-to-mtx"]).status.success());
    assert_eq!(fs::read(&mtx2).unwrap(), fs::read(&mtx).unwrap());
}

#[test]
fn corrupt_input_fails_with_one_line() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.mid");
    let out = dir.path().join("out.mtx");
    fs::write(&bad, b"MThd\0\0\0\x06\0\0").unwrap();
    let o = rollgan(&["convert", s(&bad), s(&out)]);
    assert!(!o.status.success());
    assert!(stderr(&o).starts_with("error: ") && stderr(&o).trim_end().lines().count() == 1, "{}", stderr(&o));
    assert!(!out.exists());
    assert_eq!(fs::read_dir(dir.path()).unwrap().count(), 1, "no stray temporary files");
}

#[test]
fn empty_directory_has_no_valid_inputs() {
    let dir = tempfile::tempdir().unwrap();
    let o = rollgan(&["build-dataset", s(dir.path()), s(&dir.path().join("out"))]);
    assert!(!o.status.success());
    assert!(stderr(&o).contains("no parseable MIDI files"), "{}", stderr(&o));
}

#[test]
fn dataset_build_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    for out in [&a, &b] {
        let o = rollgan(&["build-dataset", s(&corpus("synthetic")), s(out)]);
        assert!(o.status.success(), "{}", stderr(&o));
    }
    let names = |d: &Path| {
        let mut v: Vec<_> = fs::read_dir(d).unwrap().map(|e| e.unwrap().file_name()).collect();
        v.sort();
        v
    };
    assert_eq!(names(&a), names(&b));
    assert!(names(&a).len() > 100);
    for n in names(&a) {
        assert!(fs::read(a.join(&n)).unwrap() == fs::read(b.join(&n)).unwrap(), "{n:?} differs");
    }
    let manifest: serde_json::Value = serde_json::from_slice(&fs::read(a.join("manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["schema_version"], 1);
    assert_eq!(manifest["sources"].as_array().unwrap().len(), 80);
}

#[test]
fn bad_files_are_skipped_not_fatal() {
    let dir = tempfile::tempdir().unwrap();
    let src = dir.path().join("src");
    fs::create_dir(&src).unwrap();
    fs::copy(corpus("synthetic").join("synth_001.mid"), src.join("good.mid")).unwrap();
    fs::write(src.join("broken.mid"), b"garbage").unwrap();
    let out = dir.path().join("out");
    let o = rollgan(&["build-dataset", s(&src), s(&out)]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(stderr(&o).contains("broken.mid"));
    assert!(out.join("000000.png").exists());
}

#[test]
fn roundtrip_check_reports_per_file() {
    let o = rollgan(&["roundtrip-check", s(&corpus("real"))]);
    assert!(o.status.success());
    let out = String::from_utf8(o.stdout).unwrap();
    assert_eq!(out.lines().filter(|l| l.starts_with("PASS ")).count(), 23);

    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("x.mid"), b"MThd").unwrap();
    let o = rollgan(&["roundtrip-check", s(dir.path())]);
    assert!(!o.status.success());
    assert!(String::from_utf8(o.stdout).unwrap().starts_with("FAIL x.mid"));
}

#[test]
fn train_generate_and_resume() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("data");
    assert!(rollgan(&["build-dataset", s(&corpus("real")), s(&data)]).status.success());
    let arch = "latent=8;gen=8,8,4,4;disc=4,4,8,8";
    let run = |out: &Path, extra: &[&str]| {
        let mut args = vec!["train", s(&data), "--out", s(out)];
        args.extend_from_slice(extra);
        let o = rollgan(&args);
        assert!(o.status.success(), "{}", stderr(&o));
    };
    let (one, two) = (dir.path().join("one"), dir.path().join("two"));
    run(&one, &["--arch", arch, "--iterations", "6", "--batch-size", "3", "--checkpoint-every", "3", "--seed", "4"]);
    run(&two, &["--arch", arch, "--iterations", "3", "--batch-size", "3", "--checkpoint-every", "3", "--seed", "4"]);
    let ckpt = two.join("checkpoint-000003.rgan");
    run(&two, &["--resume", s(&ckpt), "--iterations", "6"]);
    assert_eq!(fs::read_to_string(one.join("losses.csv")).unwrap(), fs::read_to_string(two.join("losses.csv")).unwrap());
    assert_eq!(fs::read(one.join("checkpoint-000006.rgan")).unwrap(), fs::read(two.join("checkpoint-000006.rgan")).unwrap());

    let o = rollgan(&["train", s(&data), "--out", s(&two), "--resume", s(&ckpt), "--mode", "velocity"]);
    assert!(!o.status.success());
    let o = rollgan(&["train", s(&data), "--out", s(&two), "--preset", "full-dynamics", "--arch", arch]);
    assert!(stderr(&o).contains("binary mode"), "{}", stderr(&o));

    let final_ckpt = one.join("checkpoint-000006.rgan");
    let (g1, g2) = (dir.path().join("g1"), dir.path().join("g2"));
    for g in [&g1, &g2] {
        assert!(rollgan(&["generate", s(&final_ckpt), s(g), "-n", "2", "--seed", "9"]).status.success());
    }
    for name in ["sample_000.png", "sample_001.png", "sample_000.mid", "sample_001.mid"] {
        assert_eq!(fs::read(g1.join(name)).unwrap(), fs::read(g2.join(name)).unwrap());
    }
    parse_smf(&fs::read(g1.join("sample_001.mid")).unwrap()).unwrap();
    let o = rollgan(&["generate", s(&final_ckpt), s(&g1), "-n", "0"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn resume_rejects_damaged_checkpoints() {
    let dir = tempfile::tempdir().unwrap();
    let ckpt = dir.path().join("c.rgan");
    fs::write(&ckpt, b"RGANCKPT\x01\0\0\0").unwrap();
    let o = rollgan(&["generate", s(&ckpt), s(dir.path())]);
    assert!(!o.status.success());
    assert!(stderr(&o).contains("corrupt"), "{}", stderr(&o));
}

#[test]
fn analyze_compares_two_sets() {
    let o = rollgan(&["analyze", s(&corpus("real")), "--against", s(&corpus("synthetic"))]);
    assert!(o.status.success(), "{}", stderr(&o));
    let out = String::from_utf8(o.stdout).unwrap();
    assert!(out.contains("[paths]") && out.contains("[against]") && out.contains("pitch_class_l1"));
    let o = rollgan(&["analyze", "--json", s(&corpus("synthetic").join("synth_000.mid"))]);
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(v["paths"]["summary"]["items"], 1);
}
