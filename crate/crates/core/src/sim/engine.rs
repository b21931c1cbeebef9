//! Fixed-step fluid model of long-running flows sharing one PI² bottleneck.
//!
//! Windows grow continuously (AIMD at `a` packets per RTT, Cubic along its
//! cubic curve), the queue is whatever does not fit in the base BDP, and
//! congestion signals arrive according to the scenario's [`MarkModel`].

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::cycles::CycleRecorder;
use super::scenario::{MarkModel, SimScenario};
use super::trace::{ReductionEvent, SimTrace, TraceSample};
use crate::aqm::{classic_drop_prob, pi2_update, Pi2State};
use crate::cc_models::{CcMode, CcParams};
use crate::error::{Error, Result};

/// Runs are aborted once the queue exceeds this multiple of `target`.
pub const BLOW_UP_FACTOR: f64 = 100.0;

const EPS: f64 = 1e-9;

#[derive(Debug, Clone)]
struct Flow {
    params: CcParams,
    w: f64,
    // Cubic: window at the last reduction, its epoch and K.
    w_max: f64,
    epoch: f64,
    k: f64,
    // Reno-friendly estimate for hybrid Cubic.
    w_reno: f64,
    hold_until: f64,
    pending: Option<f64>,
    hazard: f64,
    marks: u64,
}

impl Flow {
    fn new(params: CcParams, w0: f64) -> Result<Self> {
        let k = if params.mode == CcMode::Cubic {
            crate::cc_models::cubic_k(w0, &params)?
        } else {
            0.0
        };
        // Cubic starts on its plateau, as if it had just reached W_max.
        Ok(Flow {
            params,
            w: w0,
            w_max: w0,
            epoch: -k,
            k,
            w_reno: w0,
            hold_until: f64::NEG_INFINITY,
            pending: None,
            hazard: 0.0,
            marks: 0,
        })
    }

    fn grow(&mut self, t: f64, rtt: f64, dt: f64) {
        let p = &self.params;
        match p.mode {
            CcMode::Reno | CcMode::CReno => self.w += p.a / rtt * dt,
            CcMode::Cubic => {
                let cubic = self.w_max + p.c * (t - self.epoch - self.k).powi(3);
                if p.hybrid {
                    self.w_reno += p.a / rtt * dt;
                    self.w = cubic.max(self.w_reno);
                } else {
                    self.w = cubic;
                }
            }
        }
        self.w = self.w.max(1.0);
    }

    fn reduce(&mut self, t: f64) {
        let b = self.params.b;
        if self.params.mode == CcMode::Cubic {
            self.w_max = self.w;
            self.epoch = t;
            self.k = (self.w_max * (1.0 - b) / self.params.c).cbrt();
            self.w_reno = b * self.w_max;
        }
        self.w = (b * self.w).max(1.0);
        self.hazard = 0.0;
    }
}

fn queue_delay(flows: &[Flow], link_rate: f64, base_rtt: f64) -> f64 {
    let total: f64 = flows.iter().map(|f| f.w).sum();
    (total / link_rate - base_rtt).max(0.0)
}

pub fn sim_run(scenario: &SimScenario) -> Result<SimTrace> {
    scenario.validate()?;
    let dt = scenario.step();
    let aqm = scenario.aqm;
    let n = scenario.flows.len();
    let share = scenario.link_rate * scenario.base_rtt / n.max(1) as f64;
    let mut flows = scenario
        .flows
        .iter()
        .map(|spec| Flow::new(spec.params, spec.initial_window.unwrap_or(share).max(1.0)))
        .collect::<Result<Vec<_>>>()?;

    let mut rng = ChaCha8Rng::seed_from_u64(scenario.seed);
    let mut state = Pi2State {
        p_base: scenario.initial_p_base,
        q_prev: 0.0,
    };
    let mut q = queue_delay(&flows, scenario.link_rate, scenario.base_rtt);
    let mut recorder = CycleRecorder::new();
    let mut samples = Vec::new();
    let mut reductions = Vec::new();

    let steps = (scenario.duration / dt).round() as u64;
    let mut updates = 1u64;
    let mut sample_idx = 0u64;
    let take_sample = |t: f64, q: f64, state: &Pi2State, flows: &[Flow]| TraceSample {
        t,
        qdelay: q,
        p_base: state.p_base,
        p_drop: classic_drop_prob(state),
        windows: flows.iter().map(|f| f.w).collect(),
        marks: flows.iter().map(|f| f.marks).collect(),
    };
    samples.push(take_sample(0.0, q, &state, &flows));
    sample_idx += 1;

    for step in 1..=steps {
        let t = step as f64 * dt;
        let rtt = scenario.base_rtt + q;
        for f in &mut flows {
            f.grow(t, rtt, dt);
        }
        q = queue_delay(&flows, scenario.link_rate, scenario.base_rtt);
        if q > BLOW_UP_FACTOR * aqm.target {
            return Err(Error::NumericalBlowUp { t, qdelay: q });
        }
        recorder.observe(q, dt);

        while t + EPS >= updates as f64 * aqm.tupdate {
            state = pi2_update(state, q, &aqm)?;
            updates += 1;
        }
        let p = classic_drop_prob(&state);
        let rtt = scenario.base_rtt + q;

        let mut reduced = false;
        for (i, f) in flows.iter_mut().enumerate() {
            if let Some(at) = f.pending {
                if t + EPS >= at {
                    f.pending = None;
                    f.reduce(t);
                    f.hold_until = t + rtt;
                    reductions.push(ReductionEvent { t, flow: i });
                    reduced = true;
                }
                continue;
            }
            if t < f.hold_until || p <= 0.0 {
                continue;
            }
            let packets = f.w / rtt * dt;
            let marked = match scenario.mark_model {
                MarkModel::Bernoulli => {
                    let prob = -(packets * (-p).ln_1p()).exp_m1();
                    rng.random::<f64>() < prob
                }
                MarkModel::DeterministicHazard => {
                    f.hazard += p * packets;
                    f.hazard >= 1.0
                }
            };
            if marked {
                f.marks += 1;
                if scenario.feedback_lag {
                    f.pending = Some(t + rtt);
                    f.hazard = 0.0;
                } else {
                    f.reduce(t);
                    f.hold_until = t + rtt;
                    reductions.push(ReductionEvent { t, flow: i });
                    reduced = true;
                }
            }
        }
        if reduced {
            q = queue_delay(&flows, scenario.link_rate, scenario.base_rtt);
            recorder.reduction(t, q);
        }

        if t + EPS >= sample_idx as f64 * scenario.sample_interval {
            samples.push(take_sample(t, q, &state, &flows));
            sample_idx += 1;
        }
    }

    Ok(SimTrace {
        target: aqm.target,
        duration: scenario.duration,
        base_rtt: scenario.base_rtt,
        link_rate: scenario.link_rate,
        flow_count: n,
        samples,
        cycles: recorder.into_cycles(),
        reductions,
    })
}
