use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::Result;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceSample {
    pub t: f64,
    /// Queue delay, seconds.
    pub qdelay: f64,
    pub p_base: f64,
    pub p_drop: f64,
    /// Per-flow congestion window, packets.
    pub windows: Vec<f64>,
    /// Per-flow cumulative marks.
    pub marks: Vec<u64>,
}

/// One sawtooth cycle, bounded by two consecutive window reductions.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CycleRecord {
    pub start: f64,
    pub duration: f64,
    pub q_min: f64,
    pub q_max: f64,
    /// Time-averaged queue delay over the cycle.
    pub q_mean: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ReductionEvent {
    pub t: f64,
    pub flow: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimTrace {
    pub target: f64,
    pub duration: f64,
    pub base_rtt: f64,
    pub link_rate: f64,
    pub flow_count: usize,
    pub samples: Vec<TraceSample>,
    pub cycles: Vec<CycleRecord>,
    pub reductions: Vec<ReductionEvent>,
}

pub const CSV_HEADER: &str = "t,flow_id,window_pkts,qdelay_s,p_base,p_drop,marks_cum";

impl SimTrace {
    /// Long format, one row per flow per sample. Values are printed with
    /// Rust's shortest round-trip formatting, so re-runs are byte-identical.
    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "{CSV_HEADER}")?;
        for s in &self.samples {
            for (i, (w, m)) in s.windows.iter().zip(&s.marks).enumerate() {
                writeln!(out, "{},{},{},{},{},{},{}", s.t, i, w, s.qdelay, s.p_base, s.p_drop, m)?;
            }
        }
        Ok(())
    }

    pub fn to_csv_string(&self) -> String {
        let mut buf = Vec::new();
        self.write_csv(&mut buf).expect("writing to a Vec cannot fail");
        String::from_utf8(buf).expect("CSV output is ASCII")
    }

    /// Sample-averaged queue delay after `from` seconds.
    pub fn mean_qdelay_after(&self, from: f64) -> Option<f64> {
        let tail: Vec<_> = self.samples.iter().filter(|s| s.t >= from).collect();
        (!tail.is_empty()).then(|| tail.iter().map(|s| s.qdelay).sum::<f64>() / tail.len() as f64)
    }
}
