use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::aqm::Pi2Config;
use crate::cc_models::{CcMode, CcParams};
use crate::error::{ensure_non_negative, ensure_positive, Error, Result};
use crate::geometry::{recovery_time, RttKind};
use crate::units::{parse_rate, parse_time};

/// How congestion signals are drawn from the AQM probability.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MarkModel {
    /// Each packet sent is marked independently with probability `p`.
    #[default]
    Bernoulli,
    /// A flow is marked exactly when its expected marks since the last
    /// reduction reach one.
    DeterministicHazard,
}

impl std::str::FromStr for MarkModel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "bernoulli" => Ok(MarkModel::Bernoulli),
            "hazard" | "deterministic_hazard" | "deterministic-hazard" => {
                Ok(MarkModel::DeterministicHazard)
            }
            other => Err(Error::invalid(
                "mark_model",
                format!("`{other}` (expected bernoulli or deterministic_hazard)"),
            )),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FlowSpec {
    pub params: CcParams,
    /// Initial window in packets; defaults to an equal share of the base BDP.
    pub initial_window: Option<f64>,
}

impl FlowSpec {
    pub fn new(params: CcParams) -> Self {
        FlowSpec {
            params,
            initial_window: None,
        }
    }
}

/// One bottleneck, its AQM and the long-running flows through it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimScenario {
    /// Bottleneck capacity, packets/s.
    pub link_rate: f64,
    /// Round-trip propagation delay, seconds.
    pub base_rtt: f64,
    pub flows: Vec<FlowSpec>,
    pub aqm: Pi2Config,
    /// Simulated time, seconds.
    pub duration: f64,
    /// Step size; `None` means `min(tupdate/8, base_rtt/20)`.
    pub dt: Option<f64>,
    pub seed: u64,
    pub mark_model: MarkModel,
    /// Spacing of trace samples, seconds.
    pub sample_interval: f64,
    /// Apply each reduction one RTT after the mark instead of instantly.
    pub feedback_lag: bool,
    pub initial_p_base: f64,
}

pub const DEFAULT_DURATION: f64 = 60.0;
pub const DEFAULT_SAMPLE_INTERVAL: f64 = 0.010;
pub const DEFAULT_SEED: u64 = 1;

impl SimScenario {
    pub fn new(link_rate: f64, base_rtt: f64, flows: Vec<FlowSpec>, aqm: Pi2Config) -> Self {
        SimScenario {
            link_rate,
            base_rtt,
            flows,
            aqm,
            duration: DEFAULT_DURATION,
            dt: None,
            seed: DEFAULT_SEED,
            mark_model: MarkModel::default(),
            sample_interval: DEFAULT_SAMPLE_INTERVAL,
            feedback_lag: false,
            initial_p_base: 0.0,
        }
    }

    /// A single flow of `mode` with default parameters.
    pub fn single_flow(link_rate: f64, base_rtt: f64, mode: CcMode, aqm: Pi2Config) -> Self {
        Self::new(link_rate, base_rtt, vec![FlowSpec::new(CcParams::for_mode(mode))], aqm)
    }

    pub fn with_duration(mut self, duration: f64) -> Self {
        self.duration = duration;
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn with_mark_model(mut self, model: MarkModel) -> Self {
        self.mark_model = model;
        self
    }

    pub fn step(&self) -> f64 {
        self.dt
            .unwrap_or_else(|| (self.aqm.tupdate / 8.0).min(self.base_rtt / 20.0))
    }

    pub fn validate(&self) -> Result<()> {
        ensure_positive("link_rate", self.link_rate)?;
        ensure_positive("base_rtt", self.base_rtt)?;
        ensure_positive("duration", self.duration)?;
        ensure_positive("sample_interval", self.sample_interval)?;
        self.aqm.validate()?;
        let dt = ensure_positive("dt", self.step())?;
        if dt > self.aqm.tupdate / 4.0 {
            return Err(Error::invalid(
                "dt",
                format!("{dt} s exceeds tupdate/4 = {} s", self.aqm.tupdate / 4.0),
            ));
        }
        if !(0.0..=self.aqm.p_max).contains(&self.initial_p_base) {
            return Err(Error::invalid("initial_p_base", "must lie in [0, p_max]"));
        }
        for flow in &self.flows {
            flow.params.validate()?;
            if let Some(w) = flow.initial_window {
                ensure_positive("initial_window", w)?;
            }
        }
        Ok(())
    }

    /// Advisories that do not stop a run, e.g. a duration too short for the
    /// expected number of sawtooth cycles.
    pub fn warnings(&self) -> Vec<String> {
        let mut out = Vec::new();
        if self.flows.is_empty() {
            return out;
        }
        let rate = self.link_rate / self.flows.len() as f64;
        let r_avg = self.base_rtt + self.aqm.target;
        for (i, flow) in self.flows.iter().enumerate() {
            let expected = if flow.params.is_aimd() {
                recovery_time(rate, r_avg, RttKind::Avg, &flow.params).ok()
            } else {
                crate::geometry::cubic_cycle_time(rate * r_avg, &flow.params).ok()
            };
            if let Some(t) = expected {
                if self.duration < 12.5 * t {
                    out.push(format!(
                        "flow {i}: duration {:.1} s is short against an expected cycle of {:.2} s; \
                         fewer than 10 cycles may remain after warm-up",
                        self.duration, t
                    ));
                }
            }
        }
        out
    }

    /// Parses the flat `key = value` scenario format.
    pub fn parse(text: &str) -> Result<Self> {
        Self::parse_with_overrides(text, &[])
    }

    /// Parses a scenario then applies `key=value` overrides in order, as if
    /// they were appended to the file.
    pub fn parse_with_overrides(text: &str, overrides: &[(String, String)]) -> Result<Self> {
        let mut builder = ScenarioBuilder::default();
        for (idx, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| Error::Parse {
                line: idx as u64 + 1,
                column: line.to_string(),
                reason: "expected `key = value`".into(),
            })?;
            builder.set(key.trim(), value.trim()).map_err(|e| Error::Parse {
                line: idx as u64 + 1,
                column: key.trim().to_string(),
                reason: e.to_string(),
            })?;
        }
        for (k, v) in overrides {
            builder.set(k, v).map_err(|e| Error::InvalidInput {
                name: "override",
                reason: format!("`{k}`: {e}"),
            })?;
        }
        builder.build()
    }

    /// Renders the resolved scenario in the same `key = value` format.
    pub fn to_kv(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "link_rate = {}pps", self.link_rate);
        let _ = writeln!(s, "base_rtt = {}s", self.base_rtt);
        let _ = writeln!(s, "duration = {}s", self.duration);
        let _ = writeln!(s, "dt = {}s", self.step());
        let _ = writeln!(s, "seed = {}", self.seed);
        let model = match self.mark_model {
            MarkModel::Bernoulli => "bernoulli",
            MarkModel::DeterministicHazard => "deterministic_hazard",
        };
        let _ = writeln!(s, "mark_model = {model}");
        let _ = writeln!(s, "sample_interval = {}s", self.sample_interval);
        let _ = writeln!(s, "feedback_lag = {}", self.feedback_lag);
        let _ = writeln!(s, "initial_p_base = {}", self.initial_p_base);
        let _ = writeln!(s, "target = {}s", self.aqm.target);
        let _ = writeln!(s, "tupdate = {}s", self.aqm.tupdate);
        let _ = writeln!(s, "rmax = {}s", self.aqm.rmax);
        let _ = writeln!(s, "alpha = {}", self.aqm.alpha);
        let _ = writeln!(s, "beta = {}", self.aqm.beta);
        let _ = writeln!(s, "p_max = {}", self.aqm.p_max);
        let modes: Vec<_> = self.flows.iter().map(|f| f.params.mode.name()).collect();
        let _ = writeln!(s, "flows = {}", modes.join(", "));
        for (i, f) in self.flows.iter().enumerate() {
            let _ = writeln!(s, "flow.{i}.a = {}", f.params.a);
            let _ = writeln!(s, "flow.{i}.b = {}", f.params.b);
            let _ = writeln!(s, "flow.{i}.c = {}", f.params.c);
            let _ = writeln!(s, "flow.{i}.hybrid = {}", f.params.hybrid);
            if let Some(w) = f.initial_window {
                let _ = writeln!(s, "flow.{i}.initial_window = {w}");
            }
        }
        s
    }
}

fn parse_f64(name: &'static str, v: &str) -> Result<f64> {
    v.parse::<f64>()
        .ok()
        .filter(|x| x.is_finite())
        .ok_or_else(|| Error::invalid(name, format!("`{v}` is not a number")))
}

fn parse_bool(name: &'static str, v: &str) -> Result<bool> {
    match v.to_ascii_lowercase().as_str() {
        "true" | "yes" | "on" | "1" => Ok(true),
        "false" | "no" | "off" | "0" => Ok(false),
        _ => Err(Error::invalid(name, format!("`{v}` is not a boolean"))),
    }
}

/// Accumulates keys; gains are re-derived from `tupdate`/`rmax` unless set
/// explicitly.
#[derive(Debug, Clone)]
struct ScenarioBuilder {
    link_rate: Option<f64>,
    base_rtt: Option<f64>,
    flows: Vec<FlowSpec>,
    aqm: Pi2Config,
    alpha_set: bool,
    beta_set: bool,
    duration: f64,
    dt: Option<f64>,
    seed: u64,
    mark_model: MarkModel,
    sample_interval: f64,
    feedback_lag: bool,
    initial_p_base: f64,
}

impl Default for ScenarioBuilder {
    fn default() -> Self {
        ScenarioBuilder {
            link_rate: None,
            base_rtt: None,
            flows: Vec::new(),
            aqm: Pi2Config::default(),
            alpha_set: false,
            beta_set: false,
            duration: DEFAULT_DURATION,
            dt: None,
            seed: DEFAULT_SEED,
            mark_model: MarkModel::default(),
            sample_interval: DEFAULT_SAMPLE_INTERVAL,
            feedback_lag: false,
            initial_p_base: 0.0,
        }
    }
}

impl ScenarioBuilder {
    fn set(&mut self, key: &str, value: &str) -> Result<()> {
        match key {
            "link_rate" => self.link_rate = Some(parse_rate(value)?),
            "base_rtt" => self.base_rtt = Some(parse_time(value)?),
            "duration" => self.duration = parse_time(value)?,
            "dt" => self.dt = Some(parse_time(value)?),
            "seed" => {
                self.seed = value
                    .parse()
                    .map_err(|_| Error::invalid("seed", format!("`{value}` is not a u64")))?
            }
            "mark_model" => self.mark_model = value.parse()?,
            "sample_interval" => self.sample_interval = parse_time(value)?,
            "feedback_lag" => self.feedback_lag = parse_bool("feedback_lag", value)?,
            "initial_p_base" => {
                self.initial_p_base = ensure_non_negative("initial_p_base", parse_f64("initial_p_base", value)?)?
            }
            "target" => self.aqm.target = parse_time(value)?,
            "tupdate" => {
                self.aqm.tupdate = parse_time(value)?;
                self.rederive_gains()?;
            }
            "rmax" => {
                self.aqm.rmax = parse_time(value)?;
                self.rederive_gains()?;
            }
            "alpha" => {
                self.aqm.alpha = parse_f64("alpha", value)?;
                self.alpha_set = true;
            }
            "beta" => {
                self.aqm.beta = parse_f64("beta", value)?;
                self.beta_set = true;
            }
            "p_max" => self.aqm.p_max = parse_f64("p_max", value)?,
            "flows" => {
                self.flows = value
                    .split(',')
                    .map(str::trim)
                    .filter(|s| !s.is_empty() && *s != "none")
                    .map(|m| Ok(FlowSpec::new(CcParams::for_mode(m.parse::<CcMode>()?))))
                    .collect::<Result<_>>()?;
            }
            other => {
                let Some(rest) = other.strip_prefix("flow.") else {
                    return Err(Error::invalid("key", format!("unknown key `{other}`")));
                };
                let (idx, field) = rest
                    .split_once('.')
                    .ok_or_else(|| Error::invalid("key", format!("expected flow.N.field, got `{other}`")))?;
                let idx: usize = idx
                    .parse()
                    .map_err(|_| Error::invalid("key", format!("bad flow index in `{other}`")))?;
                let flow = self.flows.get_mut(idx).ok_or_else(|| {
                    Error::invalid("key", format!("`{other}`: flow {idx} not declared in `flows`"))
                })?;
                match field {
                    "cc" => flow.params = CcParams::for_mode(value.parse()?),
                    "a" => flow.params.a = parse_f64("a", value)?,
                    "b" => flow.params.b = parse_f64("b", value)?,
                    "c" => flow.params.c = parse_f64("c", value)?,
                    "hybrid" => flow.params.hybrid = parse_bool("hybrid", value)?,
                    "initial_window" => flow.initial_window = Some(parse_f64("initial_window", value)?),
                    _ => return Err(Error::invalid("key", format!("unknown flow field `{field}`"))),
                }
            }
        }
        Ok(())
    }

    fn rederive_gains(&mut self) -> Result<()> {
        let (alpha, beta) = crate::aqm::default_gains(self.aqm.tupdate, self.aqm.rmax)?;
        if !self.alpha_set {
            self.aqm.alpha = alpha;
        }
        if !self.beta_set {
            self.aqm.beta = beta;
        }
        Ok(())
    }

    fn build(self) -> Result<SimScenario> {
        let scenario = SimScenario {
            link_rate: self.link_rate.ok_or_else(|| Error::invalid("link_rate", "missing"))?,
            base_rtt: self.base_rtt.ok_or_else(|| Error::invalid("base_rtt", "missing"))?,
            flows: self.flows,
            aqm: self.aqm,
            duration: self.duration,
            dt: self.dt,
            seed: self.seed,
            mark_model: self.mark_model,
            sample_interval: self.sample_interval,
            feedback_lag: self.feedback_lag,
            initial_p_base: self.initial_p_base,
        };
        scenario.validate()?;
        Ok(scenario)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    const LOW_RATE: &str = "\
# single CReno flow, low BDP
link_rate = 4mbit
base_rtt = 10ms
target = 15ms
duration = 120s
seed = 7
mark_model = deterministic_hazard
flows = creno
";

    #[test]
    fn parses_scenario_file() {
        let s = SimScenario::parse(LOW_RATE).unwrap();
        assert_relative_eq!(s.link_rate, 4e6 / 12000.0);
        assert_relative_eq!(s.base_rtt, 0.010);
        assert_eq!(s.flows.len(), 1);
        assert_eq!(s.flows[0].params, CcParams::creno());
        assert_eq!(s.mark_model, MarkModel::DeterministicHazard);
        assert_eq!(s.seed, 7);
        assert_relative_eq!(s.step(), 0.0005);
        assert_relative_eq!(s.aqm.alpha, 0.16, epsilon = 1e-15);
    }

    #[test]
    fn kv_round_trip() {
        let s = SimScenario::parse(LOW_RATE).unwrap();
        let again = SimScenario::parse(&s.to_kv()).unwrap();
        assert_eq!(again.link_rate, s.link_rate);
        assert_eq!(again.flows, s.flows);
        assert_eq!(again.aqm, s.aqm);
        assert_eq!(again.step(), s.step());
    }

    #[test]
    fn overrides_and_flow_fields() {
        let overrides = vec![
            ("flows".to_string(), "cubic, reno".to_string()),
            ("flow.0.hybrid".to_string(), "true".to_string()),
            ("flow.1.initial_window".to_string(), "12".to_string()),
            ("rmax".to_string(), "200ms".to_string()),
        ];
        let s = SimScenario::parse_with_overrides(LOW_RATE, &overrides).unwrap();
        assert_eq!(s.flows.len(), 2);
        assert!(s.flows[0].params.hybrid);
        assert_eq!(s.flows[1].initial_window, Some(12.0));
        assert_relative_eq!(s.aqm.alpha, 0.04, epsilon = 1e-15);

        let fresh = SimScenario::parse("link_rate = 10mbit\nbase_rtt = 20ms\nrmax = 200ms\n").unwrap();
        assert_relative_eq!(fresh.aqm.alpha, 0.04, epsilon = 1e-15);
        assert_relative_eq!(fresh.aqm.beta, 1.5, epsilon = 1e-15);
    }

    #[test]
    fn errors_name_the_line() {
        let err = SimScenario::parse("link_rate = 4mbit\nbase_rtt = 10\n").unwrap_err();
        match err {
            Error::Parse { line, column, .. } => {
                assert_eq!(line, 2);
                assert_eq!(column, "base_rtt");
            }
            other => panic!("unexpected {other:?}"),
        }
        assert!(SimScenario::parse("link_rate = 4mbit\n").is_err());
        assert!(SimScenario::parse("link_rate = 4mbit\nbase_rtt = 10ms\nbogus = 1\n").is_err());
        assert!(SimScenario::parse("link_rate = 4mbit\nbase_rtt = 10ms\nflow.0.b = 0.5\n").is_err());
        assert!(SimScenario::parse("link_rate = 4mbit\nbase_rtt = 10ms\ndt = 10ms\n").is_err());
    }

    #[test]
    fn warns_on_short_duration() {
        let s = SimScenario::parse(LOW_RATE).unwrap();
        assert!(s.warnings().is_empty());
        let big = SimScenario::parse(&LOW_RATE.replace("4mbit", "1gbit")).unwrap();
        assert_eq!(big.warnings().len(), 1);
    }
}
