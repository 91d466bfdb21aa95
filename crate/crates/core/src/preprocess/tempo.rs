use std::fmt;
use std::ops::{Add, Sub};

use num_rational::Ratio;
use num_traits::{ToPrimitive, Zero};

use crate::midi::{EventKind, MidiFile, DEFAULT_TEMPO};

/// An exact time in seconds.
///
/// Tick times convert to rationals with denominator `division * 10^6`, so
/// keeping them exact makes slot rounding independent of float error.
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Seconds(Ratio<i128>);

impl Seconds {
    pub const ZERO: Seconds = Seconds(Ratio::new_raw(0, 1));

    pub fn new(numer: i128, denom: i128) -> Self {
        Seconds(Ratio::new(numer, denom))
    }

    pub const fn whole(secs: i64) -> Self {
        Seconds(Ratio::new_raw(secs as i128, 1))
    }

    /// `numer / denom`, which must already be in lowest terms with `denom > 0`.
    pub const fn from_raw(numer: i128, denom: i128) -> Self {
        Seconds(Ratio::new_raw(numer, denom))
    }

    pub fn ratio(self) -> Ratio<i128> {
        self.0
    }

    pub fn as_f64(self) -> f64 {
        self.0.to_f64().unwrap_or(f64::NAN)
    }

    pub fn is_zero(self) -> bool {
        self.0.is_zero()
    }

    /// `floor(self / unit + 1/2)`, the half-up rounding used for slots.
    pub fn round_half_up_in(self, unit: Seconds) -> i128 {
        let x = self.0 / unit.0 + Ratio::new(1, 2);
        x.floor().to_integer()
    }
}

impl Add for Seconds {
    type Output = Seconds;
    fn add(self, rhs: Seconds) -> Seconds {
        Seconds(self.0 + rhs.0)
    }
}

impl Sub for Seconds {
    type Output = Seconds;
    fn sub(self, rhs: Seconds) -> Seconds {
        Seconds(self.0 - rhs.0)
    }
}

impl fmt::Debug for Seconds {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}s", self.0)
    }
}

impl fmt::Display for Seconds {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:.6}s", self.as_f64())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TempoSegment {
    pub start_tick: u64,
    pub us_per_quarter: u32,
}

/// Piecewise-constant tempo over the whole tick axis.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TempoMap {
    division: u16,
    segments: Vec<TempoSegment>,
    /// Time at which each segment starts.
    offsets: Vec<Seconds>,
}

impl TempoMap {
    /// Builds a map from `(tick, tempo)` changes in tick order. A missing
    /// change at tick 0 gets the MIDI default; at equal ticks the last wins.
    pub fn from_changes(division: u16, changes: impl IntoIterator<Item = (u64, u32)>) -> Self {
        assert!(division > 0, "division must be positive");
        let mut segments = vec![TempoSegment { start_tick: 0, us_per_quarter: DEFAULT_TEMPO }];
        for (tick, tempo) in changes {
            let last = segments.last_mut().expect("non-empty");
            if last.start_tick == tick {
                last.us_per_quarter = tempo;
            } else {
                debug_assert!(tick > last.start_tick, "tempo changes must be sorted");
                segments.push(TempoSegment { start_tick: tick, us_per_quarter: tempo });
            }
        }
        let mut offsets = Vec::with_capacity(segments.len());
        let mut acc = Seconds::ZERO;
        for (i, seg) in segments.iter().enumerate() {
            if i > 0 {
                let prev = segments[i - 1];
                acc = acc + span(division, prev.us_per_quarter, seg.start_tick - prev.start_tick);
            }
            offsets.push(acc);
        }
        TempoMap { division, segments, offsets }
    }

    pub fn division(&self) -> u16 {
        self.division
    }

    pub fn segments(&self) -> &[TempoSegment] {
        &self.segments
    }

    pub fn ticks_to_seconds(&self, tick: u64) -> Seconds {
        let i = self.segments.partition_point(|s| s.start_tick <= tick) - 1;
        let seg = self.segments[i];
        self.offsets[i] + span(self.division, seg.us_per_quarter, tick - seg.start_tick)
    }
}

fn span(division: u16, us_per_quarter: u32, ticks: u64) -> Seconds {
    Seconds::new(i128::from(ticks) * i128::from(us_per_quarter), i128::from(division) * 1_000_000)
}

/// Collects Tempo events from every track of the file.
pub fn build_tempo_map(file: &MidiFile) -> TempoMap {
    let mut changes: Vec<(u64, u32)> = file
        .merged_events()
        .into_iter()
        .filter_map(|e| match e.kind {
            EventKind::Tempo(t) => Some((e.tick, t)),
            _ => None,
        })
        .collect();
    // merged_events is already tick-sorted and stable, so "last wins" holds.
    changes.dedup_by(|later, earlier| {
        if later.0 == earlier.0 {
            earlier.1 = later.1;
            true
        } else {
            false
        }
    });
    TempoMap::from_changes(file.division, changes)
}

pub fn ticks_to_seconds(map: &TempoMap, tick: u64) -> Seconds {
    map.ticks_to_seconds(tick)
}
