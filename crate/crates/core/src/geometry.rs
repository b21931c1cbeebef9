//! Sawtooth geometry: where the time-average sits within a cycle, how the
//! RTT extremes scale with the average, how long a cycle lasts, and where the
//! AQM stops holding the average at `target`.

use serde::{Deserialize, Serialize};

use crate::aqm::Pi2Config;
use crate::cc_models::{cubic_k, CcMode, CcParams};
use crate::error::{ensure_decrease_factor, ensure_non_negative, ensure_positive, Error, Result};

/// Empirical fraction of the amplitude below `target` for AIMD sawteeth once
/// the cycle is well above the transition region.
pub const LAMBDA_AIMD: f64 = 0.9;
/// Empirical fraction of the amplitude below `target` for Cubic sawteeth.
pub const LAMBDA_CUBIC: f64 = 0.85;

/// Geometry of one controller's sawtooth.
///
/// `lambda0` is the fraction of the amplitude below the cycle average and
/// `lambda` the fraction below the AQM `target`. For sawteeth at or above the
/// transition region `lambda0 <= lambda <= 1`; that ordering is not enforced
/// because it does not hold inside the region.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SawtoothGeometry {
    pub lambda0: f64,
    pub lambda: f64,
    pub b: f64,
    pub geometry_factor: f64,
}

impl SawtoothGeometry {
    pub fn new(lambda0: f64, lambda: f64, b: f64) -> Result<Self> {
        if !(lambda0 > 0.0 && lambda0 < 1.0) {
            return Err(Error::invalid("lambda0", format!("must lie in (0, 1), got {lambda0}")));
        }
        Ok(SawtoothGeometry {
            lambda0,
            lambda,
            b,
            geometry_factor: crate::target::geometry_factor(lambda, b)?,
        })
    }

    /// Geometry with the default empirical `lambda` for the controller.
    pub fn for_params(params: &CcParams) -> Result<Self> {
        let lambda = match params.mode {
            CcMode::Reno | CcMode::CReno => LAMBDA_AIMD,
            CcMode::Cubic => LAMBDA_CUBIC,
        };
        Self::new(lambda0_for(params)?, lambda, params.b)
    }
}

/// `λ₀ ≈ (2+b) / 3(1+b)` for an AIMD sawtooth whose per-round RTT increment is
/// small compared with `R_min`.
pub fn lambda0_aimd_approx(b: f64) -> Result<f64> {
    let b = ensure_decrease_factor(b)?;
    Ok((2.0 + b) / (3.0 * (1.0 + b)))
}

/// λ₀ for an AIMD sawtooth including the correction terms in
/// `ratio = R_a / R_min`, where `R_a = a/r` is the RTT added per round.
pub fn lambda0_aimd_full(b: f64, ratio: f64) -> Result<f64> {
    let b = ensure_decrease_factor(b)?;
    let x = ensure_non_negative("R_a/R_min", ratio)?;
    Ok((2.0 + b) / (3.0 * (1.0 + b))
        + b / (1.0 + b) * x
        + b * b / (3.0 * (1.0 - b * b)) * x * x)
}

/// λ₀ of a Cubic sawtooth, 3/4 whatever the decrease factor.
pub fn lambda0_cubic() -> f64 {
    0.75
}

pub fn lambda0_for(params: &CcParams) -> Result<f64> {
    match params.mode {
        CcMode::Reno | CcMode::CReno => lambda0_aimd_approx(params.b),
        CcMode::Cubic => Ok(lambda0_cubic()),
    }
}

/// Time-average RTT over a Cubic cycle peaking at `r_cmax`: `R_cmax (3+b)/4`.
/// `b` may be anywhere in `[0, 1]`.
pub fn cubic_avg_rtt(r_cmax: f64, b: f64) -> Result<f64> {
    ensure_positive("R_cmax", r_cmax)?;
    if !(0.0..=1.0).contains(&b) {
        return Err(Error::invalid("b", format!("must lie in [0, 1], got {b}")));
    }
    Ok(r_cmax * (3.0 + b) / 4.0)
}

/// RTT extremes and amplitude of a sawtooth with time-average `r_avg`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RttScaling {
    pub r_max: f64,
    pub r_min: f64,
    pub d_max: f64,
}

/// Solves `R_min = b R_max`, `R_0 = R_max (λ₀ + b - λ₀ b)` and
/// `d_max = R_max - R_min` for a given average RTT `R_0`.
///
/// `b = 1` (no decrease) is accepted and gives zero amplitude.
pub fn rtt_scaling(r_avg: f64, lambda0: f64, b: f64) -> Result<RttScaling> {
    ensure_positive("R_0", r_avg)?;
    if !(lambda0 > 0.0 && lambda0 < 1.0) {
        return Err(Error::invalid("lambda0", format!("must lie in (0, 1), got {lambda0}")));
    }
    if !(b > 0.0 && b <= 1.0) {
        return Err(Error::invalid("b", format!("must lie in (0, 1], got {b}")));
    }
    let r_max = r_avg / (lambda0 + b - lambda0 * b);
    let r_min = b * r_max;
    Ok(RttScaling {
        r_max,
        r_min,
        d_max: r_max - r_min,
    })
}

fn ensure_aimd(params: &CcParams, what: &str) -> Result<()> {
    params.validate()?;
    if params.is_aimd() {
        Ok(())
    } else {
        Err(Error::Unsupported(format!(
            "{what} is defined for AIMD controllers only (got {}); use cubic_cycle_time",
            params.mode
        )))
    }
}

/// Rounds between reductions of an AIMD flow: `J = r R_min (1-b) / (a b)`.
pub fn rounds_per_cycle(rate: f64, r_min: f64, params: &CcParams) -> Result<f64> {
    ensure_positive("rate", rate)?;
    ensure_positive("R_min", r_min)?;
    ensure_aimd(params, "rounds_per_cycle")?;
    Ok(rate * r_min * (1.0 - params.b) / (params.a * params.b))
}

/// Which RTT of the cycle a recovery time is expressed in.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RttKind {
    Min,
    Max,
    Avg,
}

impl std::str::FromStr for RttKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "min" => Ok(RttKind::Min),
            "max" => Ok(RttKind::Max),
            "avg" | "mean" => Ok(RttKind::Avg),
            other => Err(Error::invalid("rtt kind", format!("`{other}` (expected min, max or avg)"))),
        }
    }
}

/// Coefficient `k` in `T = k r R²` for the chosen RTT.
///
/// Uses `J(J-1) ≈ J²`. The `Avg` form converts through [`rtt_scaling`] with
/// λ₀ from [`lambda0_aimd_approx`].
pub fn recovery_coefficient(kind: RttKind, params: &CcParams) -> Result<f64> {
    ensure_aimd(params, "recovery_time")?;
    let (a, b) = (params.a, params.b);
    let min_form = (1.0 - b * b) / (2.0 * a * b * b);
    Ok(match kind {
        RttKind::Min => min_form,
        RttKind::Max => min_form * b * b,
        RttKind::Avg => {
            let l0 = lambda0_aimd_approx(b)?;
            let shape = l0 + b - l0 * b;
            (1.0 - b * b) / (2.0 * a * shape * shape)
        }
    })
}

/// Duration of one AIMD sawtooth cycle for a flow of packet rate `rate`.
pub fn recovery_time(rate: f64, rtt: f64, kind: RttKind, params: &CcParams) -> Result<f64> {
    ensure_positive("rate", rate)?;
    ensure_positive("rtt", rtt)?;
    Ok(recovery_coefficient(kind, params)? * rate * rtt * rtt)
}

/// Duration of one pure-Cubic cycle, `K = (W_cmax (1-b) / C)^(1/3)`.
pub fn cubic_cycle_time(w_max: f64, params: &CcParams) -> Result<f64> {
    params.validate()?;
    if params.mode != CcMode::Cubic {
        return Err(Error::Unsupported(format!(
            "cubic_cycle_time needs cubic mode, got {}",
            params.mode
        )));
    }
    cubic_k(w_max, params)
}

/// Average RTTs bounding the transition region at one packet rate.
///
/// Below `rtt_floor` the recovery time is shorter than `Tupdate`, so the AQM
/// holds the sawtooth average at `target`. At `rtt_center` the recovery time
/// equals `Rmax`, the AQM convergence time.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TransitionRegion {
    pub rate: f64,
    pub rtt_floor: f64,
    pub rtt_center: f64,
}

pub fn transition_region(rate: f64, pi2: &Pi2Config, params: &CcParams) -> Result<TransitionRegion> {
    ensure_positive("rate", rate)?;
    pi2.validate()?;
    let coeff = recovery_coefficient(RttKind::Avg, params)?;
    let invert = |duration: f64| (duration / (coeff * rate)).sqrt();
    Ok(TransitionRegion {
        rate,
        rtt_floor: invert(pi2.tupdate),
        rtt_center: invert(pi2.rmax),
    })
}

/// Exact rational forms of the closed-form results, for parameters that are
/// themselves rational (b = 1/2, b = 7/10, a = 9/17, ...).
pub mod exact {
    use num_rational::Rational64;

    use super::RttKind;
    use crate::error::{Error, Result};

    fn r(n: i64, d: i64) -> Rational64 {
        Rational64::new(n, d)
    }

    fn ensure_open_unit(name: &'static str, v: Rational64) -> Result<Rational64> {
        if v > r(0, 1) && v < r(1, 1) {
            Ok(v)
        } else {
            Err(Error::invalid(name, format!("must lie in (0, 1), got {v}")))
        }
    }

    pub fn lambda0_aimd_approx(b: Rational64) -> Result<Rational64> {
        let b = ensure_open_unit("b", b)?;
        Ok((r(2, 1) + b) / (r(3, 1) * (r(1, 1) + b)))
    }

    pub fn lambda0_cubic() -> Rational64 {
        r(3, 4)
    }

    /// `(3+b)/4`: the Cubic average RTT as a fraction of its peak.
    pub fn cubic_avg_fraction(b: Rational64) -> Rational64 {
        (r(3, 1) + b) / r(4, 1)
    }

    /// λ₀ of a Cubic cycle from its average: `((3+b)/4 - b) / (1 - b)`.
    pub fn lambda0_cubic_from_average(b: Rational64) -> Result<Rational64> {
        let b = ensure_open_unit("b", b)?;
        Ok((cubic_avg_fraction(b) - b) / (r(1, 1) - b))
    }

    pub fn reno_friendly_increase(b: Rational64) -> Rational64 {
        r(3, 1) * (r(1, 1) - b) / (r(1, 1) + b)
    }

    pub fn recovery_coefficient(kind: RttKind, a: Rational64, b: Rational64) -> Result<Rational64> {
        let b = ensure_open_unit("b", b)?;
        if a <= r(0, 1) {
            return Err(Error::invalid("a", format!("must be > 0, got {a}")));
        }
        let one = r(1, 1);
        let min_form = (one - b * b) / (r(2, 1) * a * b * b);
        Ok(match kind {
            RttKind::Min => min_form,
            RttKind::Max => min_form * b * b,
            RttKind::Avg => {
                let l0 = lambda0_aimd_approx(b)?;
                let shape = l0 + b - l0 * b;
                (one - b * b) / (r(2, 1) * a * shape * shape)
            }
        })
    }

    pub fn geometry_factor(lambda: Rational64, b: Rational64) -> Result<Rational64> {
        let b = ensure_open_unit("b", b)?;
        Ok(lambda * (r(1, 1) - b) / b)
    }
}
