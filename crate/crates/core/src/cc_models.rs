//! Closed-form models of Reno, Cubic-in-Reno-mode (CReno) and pure Cubic.
//!
//! Windows are in packets and may be fractional. Rates are packets/s with the
//! fixed packet size of [`crate::units::PACKET_SIZE_BYTES`].

use serde::{Deserialize, Serialize};

use crate::error::{ensure_decrease_factor, ensure_non_negative, ensure_positive, Error, Result};

/// Cubic aggressiveness constant (segments/s³) used by all known implementations.
pub const CUBIC_C: f64 = 0.4;
/// Cubic multiplicative-decrease factor.
pub const CUBIC_B: f64 = 0.7;
pub const RENO_B: f64 = 0.5;
pub const RENO_A: f64 = 1.0;

/// Coefficient of the rounded switchover curve `R = 1.22 / r^(2/5)`.
pub const SWITCHOVER_APPROX_COEFF: f64 = 1.22;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CcMode {
    Reno,
    #[serde(rename = "creno")]
    CReno,
    Cubic,
}

impl CcMode {
    pub fn is_aimd(self) -> bool {
        matches!(self, CcMode::Reno | CcMode::CReno)
    }

    pub fn name(self) -> &'static str {
        match self {
            CcMode::Reno => "reno",
            CcMode::CReno => "creno",
            CcMode::Cubic => "cubic",
        }
    }
}

impl std::str::FromStr for CcMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "reno" => Ok(CcMode::Reno),
            "creno" | "cubic-reno" => Ok(CcMode::CReno),
            "cubic" => Ok(CcMode::Cubic),
            other => Err(Error::invalid(
                "cc",
                format!("unknown controller `{other}` (expected reno, creno or cubic)"),
            )),
        }
    }
}

impl std::fmt::Display for CcMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// Congestion-controller constants.
///
/// `a` is the additive increase in segments per round, `b` the multiplicative
/// decrease factor and `c` the Cubic aggressiveness constant. `hybrid` only
/// applies to [`CcMode::Cubic`]: the window is the larger of the cubic curve
/// and a Reno-friendly estimate growing by `a` per round, as Linux does.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CcParams {
    pub mode: CcMode,
    pub a: f64,
    pub b: f64,
    pub c: f64,
    #[serde(default)]
    pub hybrid: bool,
}

/// Additive increase that makes an AIMD flow with decrease `b` as aggressive
/// as Reno: `3(1-b)/(1+b)`.
pub fn reno_friendly_increase(b: f64) -> f64 {
    3.0 * (1.0 - b) / (1.0 + b)
}

impl CcParams {
    pub fn new(mode: CcMode, a: f64, b: f64, c: f64) -> Result<Self> {
        let params = CcParams {
            mode,
            a,
            b,
            c,
            hybrid: false,
        };
        params.validate()?;
        Ok(params)
    }

    pub fn reno() -> Self {
        CcParams {
            mode: CcMode::Reno,
            a: RENO_A,
            b: RENO_B,
            c: CUBIC_C,
            hybrid: false,
        }
    }

    pub fn creno() -> Self {
        CcParams {
            mode: CcMode::CReno,
            a: reno_friendly_increase(CUBIC_B),
            b: CUBIC_B,
            c: CUBIC_C,
            hybrid: false,
        }
    }

    pub fn cubic() -> Self {
        CcParams {
            mode: CcMode::Cubic,
            a: reno_friendly_increase(CUBIC_B),
            b: CUBIC_B,
            c: CUBIC_C,
            hybrid: false,
        }
    }

    pub fn for_mode(mode: CcMode) -> Self {
        match mode {
            CcMode::Reno => Self::reno(),
            CcMode::CReno => Self::creno(),
            CcMode::Cubic => Self::cubic(),
        }
    }

    pub fn with_hybrid(mut self, hybrid: bool) -> Self {
        self.hybrid = hybrid;
        self
    }

    pub fn is_aimd(&self) -> bool {
        self.mode.is_aimd()
    }

    pub fn validate(&self) -> Result<()> {
        ensure_decrease_factor(self.b)?;
        ensure_positive("a", self.a)?;
        ensure_positive("C", self.c)?;
        if self.hybrid && self.mode != CcMode::Cubic {
            return Err(Error::invalid("hybrid", "only meaningful for cubic mode"));
        }
        Ok(())
    }
}

fn ensure_probability(p: f64) -> Result<f64> {
    if p.is_finite() && p > 0.0 && p <= 1.0 {
        Ok(p)
    } else {
        Err(Error::invalid("p", format!("drop probability must lie in (0, 1], got {p}")))
    }
}

/// Steady-state packet rate of Reno (and of Cubic in Reno mode):
/// `r = (1/R) sqrt(3 / 2p)`.
pub fn rate_creno(p: f64, rtt: f64) -> Result<f64> {
    ensure_probability(p)?;
    ensure_positive("rtt", rtt)?;
    Ok((1.5 / p).sqrt() / rtt)
}

/// Steady-state packet rate of pure Cubic:
/// `r = (C (3+b) / (4 (1-b) p³ R))^(1/4)`.
pub fn rate_cubic(p: f64, rtt: f64, params: &CcParams) -> Result<f64> {
    ensure_probability(p)?;
    ensure_positive("rtt", rtt)?;
    params.validate()?;
    if params.mode != CcMode::Cubic {
        return Err(Error::Unsupported(format!(
            "rate_cubic needs cubic mode, got {}",
            params.mode
        )));
    }
    let b = params.b;
    Ok((params.c * (3.0 + b) / (4.0 * (1.0 - b) * p.powi(3) * rtt)).powf(0.25))
}

/// RTT at which pure Cubic and Reno-mode rates coincide for a flow of packet
/// rate `rate`: `R = (27 (1-b) / (2 C (3+b) r²))^(1/5)`.
///
/// Above this RTT the cubic rate exceeds the Reno-mode rate at equal drop
/// probability, so Cubic leaves its Reno-friendly mode.
pub fn switchover_rtt(rate: f64, params: &CcParams) -> Result<f64> {
    ensure_positive("rate", rate)?;
    let b = ensure_decrease_factor(params.b)?;
    let c = ensure_positive("C", params.c)?;
    Ok((27.0 * (1.0 - b) / (2.0 * c * (3.0 + b) * rate * rate)).powf(0.2))
}

/// The rounded form `R = 1.22 / r^(2/5)` for b = 0.7, C = 0.4.
pub fn switchover_rtt_approx(rate: f64) -> Result<f64> {
    ensure_positive("rate", rate)?;
    Ok(SWITCHOVER_APPROX_COEFF / rate.powf(0.4))
}

/// Time from a reduction until a Cubic window regains `w_max`:
/// `K = (W_max (1-b) / C)^(1/3)`.
pub fn cubic_k(w_max: f64, params: &CcParams) -> Result<f64> {
    ensure_non_negative("w_max", w_max)?;
    ensure_decrease_factor(params.b)?;
    ensure_positive("C", params.c)?;
    Ok((w_max * (1.0 - params.b) / params.c).cbrt())
}

/// Cubic window `t` seconds after a reduction from `w_max`:
/// `W(t) = W_max + C (t - K)³`.
pub fn cubic_window(t: f64, w_max: f64, params: &CcParams) -> Result<f64> {
    ensure_non_negative("t", t)?;
    ensure_positive("w_max", w_max)?;
    let k = cubic_k(w_max, params)?;
    Ok(w_max + params.c * (t - k).powi(3))
}

/// AIMD window after `rounds` rounds of additive increase from `w_min`.
pub fn aimd_window(rounds: f64, w_min: f64, params: &CcParams) -> Result<f64> {
    ensure_non_negative("rounds", rounds)?;
    ensure_non_negative("w_min", w_min)?;
    params.validate()?;
    Ok(w_min + rounds * params.a)
}

/// Decomposition of the instantaneous RTT over one sawtooth cycle.
///
/// `R(t) = R_b + q(t)`; the cycle spans `[R_min, R_max]` around the
/// time-average `R_0`, and `d_max = R_max - R_min = q_max - q_min`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RttDecomposition {
    pub base_rtt: f64,
    pub q_min: f64,
    pub q_avg: f64,
    pub q_max: f64,
    pub r_min: f64,
    pub r_avg: f64,
    pub r_max: f64,
    pub d_max: f64,
}

impl RttDecomposition {
    pub fn from_queue(base_rtt: f64, q_min: f64, q_avg: f64, q_max: f64) -> Result<Self> {
        ensure_positive("base_rtt", base_rtt)?;
        ensure_non_negative("q_min", q_min)?;
        if !(q_min <= q_avg && q_avg <= q_max) {
            return Err(Error::invalid(
                "queue delay",
                format!("need q_min <= q_avg <= q_max, got {q_min}, {q_avg}, {q_max}"),
            ));
        }
        Ok(RttDecomposition {
            base_rtt,
            q_min,
            q_avg,
            q_max,
            r_min: base_rtt + q_min,
            r_avg: base_rtt + q_avg,
            r_max: base_rtt + q_max,
            d_max: q_max - q_min,
        })
    }

    /// RTT at queue delay `q`.
    pub fn rtt(&self, q: f64) -> f64 {
        self.base_rtt + q
    }

    /// Queue delay above the minimum, `d = q - q_min`.
    pub fn excess(&self, q: f64) -> f64 {
        q - self.q_min
    }

    /// Fraction of the amplitude that sits below the average.
    pub fn lambda0(&self) -> Option<f64> {
        (self.d_max > 0.0).then(|| (self.q_avg - self.q_min) / self.d_max)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn default_params() {
        let creno = CcParams::creno();
        assert_relative_eq!(creno.a, 9.0 / 17.0, epsilon = 1e-15);
        assert_relative_eq!(creno.a, 0.529, epsilon = 1e-3);
        assert_eq!(CcParams::reno().b, 0.5);
        assert_eq!(CcParams::cubic().c, 0.4);
        for p in [CcParams::reno(), CcParams::creno(), CcParams::cubic()] {
            p.validate().unwrap();
        }
    }

    #[test]
    fn params_reject_out_of_range() {
        assert!(CcParams::new(CcMode::Reno, 1.0, 1.0, 0.4).is_err());
        assert!(CcParams::new(CcMode::Reno, 1.0, 0.0, 0.4).is_err());
        assert!(CcParams::new(CcMode::Reno, 0.0, 0.5, 0.4).is_err());
        assert!(CcParams::new(CcMode::Cubic, 0.5, 0.7, 0.0).is_err());
        assert!(CcParams::creno().with_hybrid(true).validate().is_err());
        assert!(CcParams::cubic().with_hybrid(true).validate().is_ok());
    }

    #[test]
    fn mode_parsing() {
        assert_eq!("Reno".parse::<CcMode>().unwrap(), CcMode::Reno);
        assert_eq!("creno".parse::<CcMode>().unwrap(), CcMode::CReno);
        assert!("bbr".parse::<CcMode>().is_err());
    }

    #[test]
    fn creno_rate_examples() {
        assert_relative_eq!(rate_creno(1.0, 1.0).unwrap(), 1.5f64.sqrt(), epsilon = 1e-15);
        assert_relative_eq!(rate_creno(1.0, 1.0).unwrap(), 1.2247, epsilon = 1e-4);
        assert_relative_eq!(rate_creno(0.01, 0.025).unwrap(), 489.8979485566356, epsilon = 1e-9);
        let r = rate_creno(0.02, 0.05).unwrap();
        assert_eq!(rate_creno(0.02, 0.025).unwrap(), 2.0 * r);
    }

    #[test]
    fn creno_rate_rejects_bad_input() {
        assert!(rate_creno(0.0, 0.1).is_err());
        assert!(rate_creno(1.5, 0.1).is_err());
        assert!(rate_creno(0.1, 0.0).is_err());
        assert!(rate_creno(f64::NAN, 0.1).is_err());
    }

    #[test]
    fn cubic_rate_examples() {
        let cubic = CcParams::cubic();
        let r = rate_cubic(1.0, 1.0, &cubic).unwrap();
        assert_relative_eq!(r, (1.48f64 / 1.2).powf(0.25), epsilon = 1e-15);
        assert_relative_eq!(r, 1.0538, epsilon = 1e-4);
        let r16 = rate_cubic(0.3, 16.0, &cubic).unwrap();
        assert_relative_eq!(r16, rate_cubic(0.3, 1.0, &cubic).unwrap() / 2.0, epsilon = 1e-14);
        assert!(rate_cubic(0.1, 1.0, &CcParams::creno()).is_err());
    }

    #[test]
    fn switchover_examples() {
        let cubic = CcParams::cubic();
        assert_relative_eq!(switchover_rtt_approx(1.65).unwrap(), 1.22 / 1.65f64.powf(0.4));
        // (1.65 / r)^(2/5) at r = 1.65 is one second.
        assert_relative_eq!((1.65f64 / 1.65).powf(0.4), 1.0);
        assert_relative_eq!(switchover_rtt(1.65, &cubic).unwrap(), 1.0, epsilon = 5e-3);
        let r = 8333.0;
        assert_relative_eq!(switchover_rtt_approx(r).unwrap(), 0.033, epsilon = 5e-4);
        assert_relative_eq!(switchover_rtt(r, &cubic).unwrap(), 0.033, epsilon = 5e-4);
        assert!(switchover_rtt(0.0, &cubic).is_err());
    }

    #[test]
    fn switchover_rates_coincide() {
        let cubic = CcParams::cubic();
        for rate in [1.0, 50.0, 8333.0, 1e6] {
            let rtt = switchover_rtt(rate, &cubic).unwrap();
            // Reno-mode rate equation solved for p at (rate, rtt).
            let p = 1.5 / (rate * rtt).powi(2);
            let reno = rate_creno(p.min(1.0), rtt).unwrap();
            let cub = rate_cubic(p.min(1.0), rtt, &cubic).unwrap();
            if p <= 1.0 {
                assert_relative_eq!(reno, cub, max_relative = 1e-9);
            }
        }
    }

    #[test]
    fn cubic_window_shape() {
        let cubic = CcParams::cubic();
        let k = cubic_k(100.0, &cubic).unwrap();
        assert_relative_eq!(k, 75f64.cbrt(), epsilon = 1e-12);
        assert_relative_eq!(k, 4.217, epsilon = 1e-3);
        assert_relative_eq!(cubic_window(k, 100.0, &cubic).unwrap(), 100.0, epsilon = 1e-10);
        assert_relative_eq!(cubic_window(0.0, 100.0, &cubic).unwrap(), 70.0, epsilon = 1e-10);
        let mut prev = 0.0;
        for i in 0..=100 {
            let w = cubic_window(k * i as f64 / 100.0, 100.0, &cubic).unwrap();
            assert!(w >= prev);
            prev = w;
        }
        assert!(cubic_window(-1.0, 100.0, &cubic).is_err());
    }

    #[test]
    fn aimd_window_examples() {
        let reno = CcParams::reno();
        assert_eq!(aimd_window(0.0, 50.0, &reno).unwrap(), 50.0);
        assert_eq!(aimd_window(50.0, 50.0, &reno).unwrap(), 100.0);
        assert!(aimd_window(-1.0, 50.0, &reno).is_err());
    }

    #[test]
    fn decomposition_invariants() {
        let d = RttDecomposition::from_queue(0.010, 0.008, 0.012, 0.016).unwrap();
        assert_relative_eq!(d.r_max - d.r_min, d.d_max, epsilon = 1e-15);
        assert_relative_eq!(d.q_max - d.q_min, d.d_max, epsilon = 1e-15);
        assert!(d.r_min <= d.r_avg && d.r_avg <= d.r_max);
        assert_relative_eq!(d.lambda0().unwrap(), 0.5, epsilon = 1e-12);
        assert_relative_eq!(d.rtt(0.012), 0.022);
        assert_relative_eq!(d.excess(0.012), 0.004, epsilon = 1e-15);
        assert!(RttDecomposition::from_queue(0.010, 0.02, 0.01, 0.03).is_err());
    }
}
