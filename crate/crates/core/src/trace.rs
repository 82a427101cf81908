//! Race-lap traces: the disturbance driving the plant.
//!
//! A trace is a time series of engine speed plus a fired/coasting flag.
//! Speed is interpolated linearly between samples; the flag is held at the
//! value of the most recent sample. Traces are ingested from CSV with
//! columns `time_s, speed_rpm, fired` (fired as 0/1).

use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// One trace sample: engine speed and load state at a point in time.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EngineSample {
    /// Time, s.
    pub t: f64,
    /// Engine speed, rpm.
    pub n: f64,
    /// True under full load, false while coasting.
    pub fired: bool,
}

#[derive(Debug, Serialize, Deserialize)]
struct CsvRow {
    time_s: f64,
    speed_rpm: f64,
    fired: u8,
}

/// An ordered lap trace.
#[derive(Debug, Clone, PartialEq)]
pub struct LapTrace {
    samples: Vec<EngineSample>,
}

impl LapTrace {
    /// Builds a trace, enforcing the trace invariants: non-empty, strictly
    /// increasing time, non-negative speeds, and at least one fired and one
    /// coasting sample.
    pub fn new(samples: Vec<EngineSample>) -> Result<Self> {
        if samples.is_empty() {
            return Err(Error::Config("trace is empty".into()));
        }
        for pair in samples.windows(2) {
            if !(pair[1].t > pair[0].t) {
                return Err(Error::Config(format!(
                    "trace time must be strictly increasing (t = {} followed by {})",
                    pair[0].t, pair[1].t
                )));
            }
        }
        for s in &samples {
            if !(s.n >= 0.0) || !s.n.is_finite() || !s.t.is_finite() {
                return Err(Error::Config(format!(
                    "invalid trace sample at t = {}: n = {}",
                    s.t, s.n
                )));
            }
        }
        if samples.iter().all(|s| s.fired) || samples.iter().all(|s| !s.fired) {
            return Err(Error::Config(
                "trace must contain at least one fired and one coasting segment".into(),
            ));
        }
        Ok(Self { samples })
    }

    pub fn samples(&self) -> &[EngineSample] {
        &self.samples
    }

    pub fn start_time(&self) -> f64 {
        self.samples[0].t
    }

    pub fn end_time(&self) -> f64 {
        self.samples[self.samples.len() - 1].t
    }

    pub fn duration(&self) -> f64 {
        self.end_time() - self.start_time()
    }

    /// Speed range covered by the trace, rpm.
    pub fn speed_range(&self) -> (f64, f64) {
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for s in &self.samples {
            lo = lo.min(s.n);
            hi = hi.max(s.n);
        }
        (lo, hi)
    }

    /// Interpolated sample at time `t` (clamped to the trace span). Speed
    /// is linear between samples, the fired flag is zero-order held.
    pub fn sample_at(&self, t: f64) -> EngineSample {
        match self
            .samples
            .binary_search_by(|s| s.t.partial_cmp(&t).expect("finite trace times"))
        {
            Ok(i) => self.samples[i],
            Err(0) => EngineSample { t, ..self.samples[0] },
            Err(i) if i >= self.samples.len() => {
                let last = self.samples[self.samples.len() - 1];
                EngineSample { t, ..last }
            }
            Err(i) => {
                let (a, b) = (self.samples[i - 1], self.samples[i]);
                let w = (t - a.t) / (b.t - a.t);
                EngineSample {
                    t,
                    n: a.n + w * (b.n - a.n),
                    fired: a.fired,
                }
            }
        }
    }

    /// Sequential interpolation cursor for monotonically increasing query
    /// times; O(1) per step instead of a binary search.
    pub fn cursor(&self) -> TraceCursor<'_> {
        TraceCursor { trace: self, index: 0 }
    }

    /// Reads a trace from CSV with header `time_s,speed_rpm,fired`.
    pub fn from_csv_reader<R: Read>(reader: R) -> Result<Self> {
        let mut rdr = csv::Reader::from_reader(reader);
        let mut samples = Vec::new();
        for row in rdr.deserialize::<CsvRow>() {
            let row = row?;
            samples.push(EngineSample {
                t: row.time_s,
                n: row.speed_rpm,
                fired: row.fired != 0,
            });
        }
        Self::new(samples)
    }

    pub fn from_csv_path<P: AsRef<Path>>(path: P) -> Result<Self> {
        let path = path.as_ref();
        let file = std::fs::File::open(path).map_err(|e| {
            Error::Config(format!("cannot open trace file {}: {e}", path.display()))
        })?;
        Self::from_csv_reader(std::io::BufReader::new(file))
    }

    /// Writes the trace back out in the ingestion format.
    pub fn to_csv_writer<W: Write>(&self, writer: W) -> Result<()> {
        let mut wtr = csv::Writer::from_writer(writer);
        for s in &self.samples {
            wtr.serialize(CsvRow {
                time_s: s.t,
                speed_rpm: s.n,
                fired: u8::from(s.fired),
            })?;
        }
        wtr.flush()?;
        Ok(())
    }

    /// Stable identity hash over the sample values (FNV-1a on the raw bits).
    pub fn id_hash(&self) -> u64 {
        let mut hash: u64 = 0xcbf2_9ce4_8422_2325;
        let mut eat = |bytes: &[u8]| {
            for &b in bytes {
                hash ^= u64::from(b);
                hash = hash.wrapping_mul(0x0000_0100_0000_01b3);
            }
        };
        for s in &self.samples {
            eat(&s.t.to_bits().to_le_bytes());
            eat(&s.n.to_bits().to_le_bytes());
            eat(&[u8::from(s.fired)]);
        }
        hash
    }

    /// Built-in 90 s lap: alternating full-load straights and coasting
    /// corner phases, sampled every 0.5 s. Synthetic stand-in for
    /// unpublished telemetry; any user trace in the same format works.
    pub fn synthetic_default() -> Self {
        // (duration s, fired, rpm at segment start, rpm at segment end)
        const SEGMENTS: &[(f64, bool, f64, f64)] = &[
            (10.0, true, 4500.0, 7000.0),
            (6.0, false, 7000.0, 3200.0),
            (6.0, true, 3200.0, 6200.0),
            (4.0, false, 6200.0, 3800.0),
            (8.0, true, 3800.0, 6800.0),
            (7.0, false, 6800.0, 3000.0),
            (9.0, true, 3000.0, 6600.0),
            (5.0, false, 6600.0, 4200.0),
            (7.0, true, 4200.0, 6900.0),
            (8.0, false, 6900.0, 3400.0),
            (12.0, true, 3400.0, 7000.0),
            (8.0, false, 7000.0, 4500.0),
        ];
        const SAMPLE_DT: f64 = 0.5;

        let mut samples = Vec::new();
        let mut seg_start = 0.0;
        for &(dur, fired, n0, n1) in SEGMENTS {
            let steps = (dur / SAMPLE_DT).round() as usize;
            for k in 0..steps {
                let frac = k as f64 / steps as f64;
                samples.push(EngineSample {
                    t: seg_start + k as f64 * SAMPLE_DT,
                    n: n0 + frac * (n1 - n0),
                    fired,
                });
            }
            seg_start += dur;
        }
        // Close the lap with the final speed.
        samples.push(EngineSample {
            t: seg_start,
            n: SEGMENTS[SEGMENTS.len() - 1].3,
            fired: SEGMENTS[SEGMENTS.len() - 1].1,
        });
        Self::new(samples).expect("built-in lap satisfies the trace invariants")
    }
}

/// Forward-only interpolation cursor over a trace.
pub struct TraceCursor<'a> {
    trace: &'a LapTrace,
    index: usize,
}

impl TraceCursor<'_> {
    /// Sample at `t`; query times must be non-decreasing between calls.
    pub fn sample_at(&mut self, t: f64) -> EngineSample {
        let samples = self.trace.samples();
        while self.index + 1 < samples.len() && samples[self.index + 1].t <= t {
            self.index += 1;
        }
        let a = samples[self.index];
        if self.index + 1 >= samples.len() || t <= a.t {
            return EngineSample { t, ..a };
        }
        let b = samples[self.index + 1];
        let w = (t - a.t) / (b.t - a.t);
        EngineSample {
            t,
            n: a.n + w * (b.n - a.n),
            fired: a.fired,
        }
    }

    /// Rewinds to the trace start (used when looping laps).
    pub fn reset(&mut self) {
        self.index = 0;
    }
}
