//! Sawtooth geometry and PI² AQM analysis.
//!
//! The crate is organised bottom-up:
//!
//! * [`cc_models`]: closed-form Reno / CReno / Cubic window and rate models.
//! * [`geometry`]: sawtooth fractions, RTT scaling, recovery times and the
//!   AQM transition region.
//! * [`aqm`]: the PI² control law.
//! * [`sim`]: a deterministic fluid simulator of long-running flows through a
//!   PI² bottleneck, plus cycle statistics measured from its traces.
//! * [`dataset`]: per-country CDN latency / bandwidth table and its
//!   user-weighted aggregates.
//! * [`target`]: the geometry-factor pipeline that turns a typical base RTT
//!   into a recommended `target` queue delay.

pub mod aqm;
pub mod cc_models;
pub mod dataset;
mod error;
pub mod geometry;
pub mod manifest;
pub mod sim;
pub mod target;
pub mod units;

pub use aqm::{classic_drop_prob, default_gains, pi2_update, Pi2Config, Pi2State};
pub use cc_models::{CcMode, CcParams, RttDecomposition};
pub use dataset::{CountryRecord, DatasetSummary};
pub use error::{Error, Result};
pub use geometry::{RttKind, SawtoothGeometry, TransitionRegion};
pub use sim::{
    capacity_invariance_check, measure_cycles, sim_run, CycleStats, MarkModel, SimScenario,
    SimTrace,
};
pub use target::{TargetInputs, TargetReport};
