//! Pitch, chord and rhythm statistics of note grids.

use std::fmt;

use serde::Serialize;

use crate::preprocess::{NoteGrid, LOWEST_NOTE, ROWS};

/// Longest lag tried by the rhythm score: six 4/4 bars of sixteenths.
pub const MAX_RHYTHM_LAG: usize = 96;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum ChordQuality {
    Major,
    Minor,
    Quartal,
    Other,
}

impl ChordQuality {
    pub const ALL: [ChordQuality; 4] = [ChordQuality::Major, ChordQuality::Minor, ChordQuality::Quartal, ChordQuality::Other];

    pub fn as_str(self) -> &'static str {
        match self {
            ChordQuality::Major => "major",
            ChordQuality::Minor => "minor",
            ChordQuality::Quartal => "quartal",
            ChordQuality::Other => "other",
        }
    }
}

impl fmt::Display for ChordQuality {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Interval sets as 12-bit pitch-class masks, checked in this order.
const TRIADS: [(ChordQuality, [u8; 3]); 3] = [
    (ChordQuality::Major, [0, 4, 7]),
    (ChordQuality::Minor, [0, 3, 7]),
    (ChordQuality::Quartal, [0, 5, 10]),
];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct ChordEvent {
    pub slot: usize,
    pub quality: ChordQuality,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AnalysisReport {
    pub slots: usize,
    pub onsets: u64,
    /// Onsets per pitch class, C first.
    pub pitch_class_histogram: [u64; 12],
    /// Onsets per slot.
    pub note_density: f64,
    pub chord_events: Vec<ChordEvent>,
    pub repeated_rhythm_score: f64,
    /// Lag of the best rhythm correlation, if any lag was measurable.
    pub rhythm_lag: Option<usize>,
}

fn pitch_class(row: usize) -> usize {
    (row + usize::from(LOWEST_NOTE)) % 12
}

/// Quality of a pitch-class set given as a 12-bit mask. Sets of fewer than
/// three classes are not chords.
pub fn chord_quality(mask: u16) -> Option<ChordQuality> {
    if mask.count_ones() < 3 {
        return None;
    }
    for (quality, intervals) in TRIADS {
        for root in 0..12 {
            let triad = intervals.iter().fold(0u16, |m, &i| m | 1 << ((root + i) % 12));
            if mask & triad == triad {
                return Some(quality);
            }
        }
    }
    Some(ChordQuality::Other)
}

/// Onsets are the first slots of maximal runs of nonzero cells.
pub fn onset_series(grid: &NoteGrid) -> Vec<u32> {
    let cols = grid.columns();
    (0..cols.len())
        .map(|t| (0..ROWS).filter(|&r| cols[t][r] != 0 && (t == 0 || cols[t - 1][r] == 0)).count() as u32)
        .collect()
}

fn pearson(a: &[u32], b: &[u32]) -> Option<f64> {
    let n = a.len() as f64;
    let mean = |s: &[u32]| s.iter().map(|&v| f64::from(v)).sum::<f64>() / n;
    let (ma, mb) = (mean(a), mean(b));
    let (mut cov, mut va, mut vb) = (0.0, 0.0, 0.0);
    for (&x, &y) in a.iter().zip(b) {
        let (dx, dy) = (f64::from(x) - ma, f64::from(y) - mb);
        cov += dx * dy;
        va += dx * dx;
        vb += dy * dy;
    }
    (va > 0.0 && vb > 0.0).then(|| cov / (va * vb).sqrt())
}

/// Best Pearson correlation of the series with itself shifted by 1..=96
/// slots, clamped to [0, 1]; 0 when the series is constant.
pub fn rhythm_score(series: &[u32]) -> (f64, Option<usize>) {
    let mut best: Option<(f64, usize)> = None;
    for lag in 1..=MAX_RHYTHM_LAG.min(series.len().saturating_sub(2)) {
        if let Some(r) = pearson(&series[..series.len() - lag], &series[lag..]) {
            if best.map_or(true, |(b, _)| r > b) {
                best = Some((r, lag));
            }
        }
    }
    match best {
        Some((r, lag)) => (r.clamp(0.0, 1.0), Some(lag)),
        None => (0.0, None),
    }
}

pub fn analyze(grid: &NoteGrid) -> AnalysisReport {
    let cols = grid.columns();
    let mut histogram = [0u64; 12];
    for (t, col) in cols.iter().enumerate() {
        for row in 0..ROWS {
            if col[row] != 0 && (t == 0 || cols[t - 1][row] == 0) {
                histogram[pitch_class(row)] += 1;
            }
        }
    }
    let chord_events = cols
        .iter()
        .enumerate()
        .filter_map(|(slot, col)| {
            let mask = (0..ROWS).filter(|&r| col[r] != 0).fold(0u16, |m, r| m | 1 << pitch_class(r));
            chord_quality(mask).map(|quality| ChordEvent { slot, quality })
        })
        .collect();
    let series = onset_series(grid);
    let (score, lag) = rhythm_score(&series);
    let onsets: u64 = histogram.iter().sum();
    AnalysisReport {
        slots: cols.len(),
        onsets,
        pitch_class_histogram: histogram,
        note_density: if cols.is_empty() { 0.0 } else { onsets as f64 / cols.len() as f64 },
        chord_events,
        repeated_rhythm_score: score,
        rhythm_lag: lag,
    }
}

/// Totals over a set of reports.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Summary {
    pub items: usize,
    pub slots: usize,
    pub onsets: u64,
    pub pitch_class_histogram: [u64; 12],
    pub note_density: f64,
    /// Chord events per quality, in [`ChordQuality::ALL`] order.
    pub chord_counts: [u64; 4],
    pub mean_rhythm_score: f64,
}

impl Summary {
    pub fn of(reports: &[AnalysisReport]) -> Summary {
        let mut s = Summary {
            items: reports.len(),
            slots: 0,
            onsets: 0,
            pitch_class_histogram: [0; 12],
            note_density: 0.0,
            chord_counts: [0; 4],
            mean_rhythm_score: 0.0,
        };
        for r in reports {
            s.slots += r.slots;
            s.onsets += r.onsets;
            for (a, b) in s.pitch_class_histogram.iter_mut().zip(r.pitch_class_histogram) {
                *a += b;
            }
            for e in &r.chord_events {
                s.chord_counts[e.quality as usize] += 1;
            }
            s.mean_rhythm_score += r.repeated_rhythm_score;
        }
        if s.slots > 0 {
            s.note_density = s.onsets as f64 / s.slots as f64;
        }
        if !reports.is_empty() {
            s.mean_rhythm_score /= reports.len() as f64;
        }
        s
    }

    /// Pitch-class shares, summing to 1 (all zero without onsets).
    pub fn pitch_class_distribution(&self) -> [f64; 12] {
        let total = self.onsets.max(1) as f64;
        self.pitch_class_histogram.map(|c| c as f64 / total)
    }

    /// Chord-quality shares among chord events.
    pub fn chord_distribution(&self) -> [f64; 4] {
        let total = self.chord_counts.iter().sum::<u64>().max(1) as f64;
        self.chord_counts.map(|c| c as f64 / total)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::preprocess::Mode;

    /// Row of a MIDI note.
    fn row(note: u8) -> usize {
        usize::from(note - LOWEST_NOTE)
    }

    #[test]
    fn triads() {
        let mut g = NoteGrid::silent(Mode::Binary, 4);
        for n in [60, 64, 67] {
            g.set(row(n), 0, 127);
        }
        for n in [57, 60, 64] {
            g.set(row(n), 1, 127);
        }
        for n in [62, 67, 72] {
            g.set(row(n), 2, 127);
        }
        for n in [60, 61, 62] {
            g.set(row(n), 3, 127);
        }
        let r = analyze(&g);
        let q: Vec<_> = r.chord_events.iter().map(|e| (e.slot, e.quality)).collect();
        use ChordQuality::*;
        assert_eq!(q, vec![(0, Major), (1, Minor), (2, Quartal), (3, Other)]);
    }

    #[test]
    fn octave_doublings_ignored() {
        assert_eq!(chord_quality(1 << 0 | 1 << 4), None);
        assert_eq!(chord_quality(1 << 2 | 1 << 6 | 1 << 9), Some(ChordQuality::Major));
    }

    #[test]
    fn empty_grid() {
        let r = analyze(&NoteGrid::empty(Mode::Binary));
        assert_eq!((r.onsets, r.note_density, r.repeated_rhythm_score), (0, 0.0, 0.0));
        assert_eq!(r.pitch_class_histogram, [0; 12]);
        assert!(r.chord_events.is_empty());
    }

    #[test]
    fn periodic_onsets_score_one() {
        let mut g = NoteGrid::silent(Mode::Binary, 64);
        for t in (0..64).step_by(4) {
            g.set(row(60), t, 127);
        }
        let r = analyze(&g);
        assert_eq!((r.repeated_rhythm_score, r.rhythm_lag), (1.0, Some(4)));
        assert_eq!(r.onsets, 16);
        assert_eq!(r.pitch_class_histogram[0], 16);
        assert_eq!(r.note_density, 0.25);
    }

    #[test]
    fn held_note_is_one_onset() {
        let mut g = NoteGrid::silent(Mode::Binary, 10);
        for t in 0..10 {
            g.set(row(61), t, 127);
        }
        let r = analyze(&g);
        assert_eq!((r.onsets, r.pitch_class_histogram[1]), (1, 1));
        assert_eq!(rhythm_score(&[3, 3, 3, 3]), (0.0, None));
    }
}
