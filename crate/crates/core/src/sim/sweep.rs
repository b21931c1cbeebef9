use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::cycles::{measure_cycles, CycleStats};
use super::engine::sim_run;
use super::scenario::SimScenario;
use crate::error::{ensure_positive, Error, Result};

/// Runs scenarios in parallel; results keep the input order.
pub fn run_all(scenarios: &[SimScenario]) -> Result<Vec<CycleStats>> {
    scenarios
        .par_iter()
        .map(|s| sim_run(s).and_then(|t| measure_cycles(&t)))
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepPoint {
    pub factor: f64,
    pub link_rate: f64,
    pub stats: CycleStats,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CapacityReport {
    pub points: Vec<SweepPoint>,
    /// Largest relative change of mean q_min against the first factor.
    pub q_min_drift: f64,
    pub q_max_drift: f64,
}

fn scaled_windows(base: &SimScenario, factor: f64) -> SimScenario {
    let mut s = base.clone();
    for f in &mut s.flows {
        f.initial_window = f.initial_window.map(|w| w * factor);
    }
    s
}

/// Re-runs `base` at each multiple of its link rate.
pub fn capacity_invariance_check(base: &SimScenario, factors: &[f64]) -> Result<CapacityReport> {
    if factors.is_empty() {
        return Err(Error::invalid("factors", "need at least one capacity factor"));
    }
    let scenarios = factors
        .iter()
        .map(|&k| {
            ensure_positive("capacity factor", k)?;
            let mut s = scaled_windows(base, k);
            s.link_rate *= k;
            Ok(s)
        })
        .collect::<Result<Vec<_>>>()?;
    let stats = run_all(&scenarios)?;
    let drift = |get: fn(&CycleStats) -> f64| {
        let first = get(&stats[0]);
        stats.iter().map(|s| ((get(s) - first) / first).abs()).fold(0.0, f64::max)
    };
    let q_min_drift = drift(|s| s.mean_q_min);
    let q_max_drift = drift(|s| s.mean_q_max);
    let points = factors
        .iter()
        .zip(&scenarios)
        .zip(stats)
        .map(|((&factor, s), stats)| SweepPoint {
            factor,
            link_rate: s.link_rate,
            stats,
        })
        .collect();
    Ok(CapacityReport {
        points,
        q_min_drift,
        q_max_drift,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RttScalingReport {
    pub factor: f64,
    pub base: CycleStats,
    pub scaled: CycleStats,
    pub amplitude_ratio: f64,
}

/// Scales the base RTT and `target` together, so the whole operating-point
/// RTT grows by `factor`, and compares sawtooth amplitudes.
pub fn rtt_scaling_check(base: &SimScenario, factor: f64) -> Result<RttScalingReport> {
    ensure_positive("rtt factor", factor)?;
    let mut scaled = scaled_windows(base, factor);
    scaled.base_rtt *= factor;
    scaled.aqm.target *= factor;
    let mut stats = run_all(&[base.clone(), scaled])?;
    let scaled = stats.pop().expect("two runs");
    let base = stats.pop().expect("two runs");
    Ok(RttScalingReport {
        factor,
        amplitude_ratio: scaled.amplitude / base.amplitude,
        base,
        scaled,
    })
}
