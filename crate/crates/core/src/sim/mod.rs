//! Deterministic fluid simulation of flows through a PI² bottleneck.

mod cycles;
mod engine;
mod scenario;
mod sweep;
mod trace;

pub use cycles::{
    measure_cycles, measure_cycles_with, stats_from_cycles, CycleRecorder, CycleStats, MIN_CYCLES,
    WARM_UP_FRACTION,
};
pub use engine::{sim_run, BLOW_UP_FACTOR};
pub use scenario::{FlowSpec, MarkModel, SimScenario};
pub use sweep::{
    capacity_invariance_check, rtt_scaling_check, run_all, CapacityReport, RttScalingReport,
    SweepPoint,
};
pub use trace::{CycleRecord, ReductionEvent, SimTrace, TraceSample, CSV_HEADER};
