use serde::{Deserialize, Serialize};

use super::trace::{CycleRecord, SimTrace};
use crate::error::{Error, Result};

/// Cycles starting in the first fifth of a run are discarded.
pub const WARM_UP_FRACTION: f64 = 0.2;
pub const MIN_CYCLES: usize = 10;

/// Splits a queue-delay signal into cycles at each reduction.
///
/// Only cycles bounded by two reductions are kept; the stretch before the
/// first reduction and after the last one are dropped.
#[derive(Debug, Clone, Default)]
pub struct CycleRecorder {
    open: Option<(f64, f64, f64, f64)>, // start, min, max, integral
    cycles: Vec<CycleRecord>,
}

impl CycleRecorder {
    pub fn new() -> Self {
        Self::default()
    }

    /// Queue delay `q` held over the step of length `dt` ending at `t`.
    pub fn observe(&mut self, q: f64, dt: f64) {
        if let Some((_, min, max, integral)) = &mut self.open {
            *min = min.min(q);
            *max = max.max(q);
            *integral += q * dt;
        }
    }

    /// A reduction at `t` leaving the queue at `q_after`.
    pub fn reduction(&mut self, t: f64, q_after: f64) {
        if let Some((start, min, max, integral)) = self.open.take() {
            let duration = t - start;
            if duration > 0.0 {
                self.cycles.push(CycleRecord {
                    start,
                    duration,
                    q_min: min,
                    q_max: max,
                    q_mean: integral / duration,
                });
            }
        }
        self.open = Some((t, q_after, q_after, 0.0));
    }

    pub fn cycles(&self) -> &[CycleRecord] {
        &self.cycles
    }

    pub fn into_cycles(self) -> Vec<CycleRecord> {
        self.cycles
    }
}

/// Steady-state sawtooth statistics of one run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CycleStats {
    pub cycles: usize,
    pub mean_duration: f64,
    pub std_duration: f64,
    pub mean_q_min: f64,
    pub std_q_min: f64,
    pub mean_q_max: f64,
    pub std_q_max: f64,
    /// Time-weighted mean queue delay over the retained cycles.
    pub mean_q: f64,
    pub amplitude: f64,
    pub target: f64,
    /// Fraction of the amplitude lying below `target`.
    pub lambda_hat: f64,
    /// Fraction of the amplitude lying below the mean queue delay.
    pub lambda0_hat: f64,
}

fn mean_std(xs: impl Iterator<Item = f64> + Clone) -> (f64, f64) {
    let n = xs.clone().count() as f64;
    let mean = xs.clone().sum::<f64>() / n;
    let var = xs.map(|x| (x - mean).powi(2)).sum::<f64>() / n;
    (mean, var.sqrt())
}

pub fn measure_cycles(trace: &SimTrace) -> Result<CycleStats> {
    measure_cycles_with(trace, WARM_UP_FRACTION, MIN_CYCLES)
}

pub fn measure_cycles_with(trace: &SimTrace, warm_up: f64, min_cycles: usize) -> Result<CycleStats> {
    stats_from_cycles(&trace.cycles, trace.target, warm_up * trace.duration, min_cycles)
}

/// Statistics over `cycles` starting at or after `from`.
pub fn stats_from_cycles(
    cycles: &[CycleRecord],
    target: f64,
    from: f64,
    min_cycles: usize,
) -> Result<CycleStats> {
    let kept: Vec<_> = cycles.iter().filter(|c| c.start >= from).collect();
    if kept.len() < min_cycles.max(1) {
        return Err(Error::InsufficientCycles {
            found: kept.len(),
            required: min_cycles.max(1),
        });
    }
    let (mean_duration, std_duration) = mean_std(kept.iter().map(|c| c.duration));
    let (mean_q_min, std_q_min) = mean_std(kept.iter().map(|c| c.q_min));
    let (mean_q_max, std_q_max) = mean_std(kept.iter().map(|c| c.q_max));
    let total: f64 = kept.iter().map(|c| c.duration).sum();
    let mean_q = kept.iter().map(|c| c.q_mean * c.duration).sum::<f64>() / total;
    let amplitude = mean_q_max - mean_q_min;
    if amplitude.is_nan() || amplitude <= 0.0 {
        return Err(Error::invalid("trace", "sawtooth amplitude is zero"));
    }
    Ok(CycleStats {
        cycles: kept.len(),
        mean_duration,
        std_duration,
        mean_q_min,
        std_q_min,
        mean_q_max,
        std_q_max,
        mean_q,
        amplitude,
        target,
        lambda_hat: (target - mean_q_min) / amplitude,
        lambda0_hat: (mean_q - mean_q_min) / amplitude,
    })
}
