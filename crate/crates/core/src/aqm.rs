//! PI² AQM control law.
//!
//! Every `tupdate` the controller samples the queue delay and nudges a base
//! probability `p'`: the integral term pulls the standing queue back to
//! `target` over roughly `rmax`, the proportional term reacts to the change
//! since the previous sample. Classic (non-scalable) traffic is dropped or
//! marked with `p = p'^2`.

use serde::{Deserialize, Serialize};

use crate::error::{ensure_non_negative, ensure_positive, Error, Result};

pub const DEFAULT_TARGET: f64 = 0.015;
pub const DEFAULT_TUPDATE: f64 = 0.016;
pub const DEFAULT_RMAX: f64 = 0.100;
pub const DEFAULT_P_MAX: f64 = 1.0;

/// Exponent applied to the base probability for Classic traffic.
pub const CLASSIC_EXPONENT: i32 = 2;

/// Gains from the reference rule: `alpha = 0.1 tupdate / rmax²`,
/// `beta = 0.3 / rmax` (both per second).
pub fn default_gains(tupdate: f64, rmax: f64) -> Result<(f64, f64)> {
    ensure_positive("tupdate", tupdate)?;
    ensure_positive("rmax", rmax)?;
    Ok((0.1 * tupdate / (rmax * rmax), 0.3 / rmax))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Pi2Config {
    /// Queue-delay operating point, seconds.
    pub target: f64,
    /// Sampling / update interval, seconds.
    pub tupdate: f64,
    /// Maximum design RTT, seconds.
    pub rmax: f64,
    /// Integral gain, probability per second of delay error per update.
    pub alpha: f64,
    /// Proportional gain, probability per second of delay change per update.
    pub beta: f64,
    /// Cap on the base probability.
    pub p_max: f64,
}

impl Default for Pi2Config {
    fn default() -> Self {
        Self::new(DEFAULT_TARGET, DEFAULT_TUPDATE, DEFAULT_RMAX)
            .expect("built-in PI2 defaults are valid")
    }
}

impl Pi2Config {
    /// Config with gains from [`default_gains`] and `p_max = 1`.
    pub fn new(target: f64, tupdate: f64, rmax: f64) -> Result<Self> {
        let (alpha, beta) = default_gains(tupdate, rmax)?;
        let cfg = Pi2Config {
            target,
            tupdate,
            rmax,
            alpha,
            beta,
            p_max: DEFAULT_P_MAX,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn with_target(mut self, target: f64) -> Self {
        self.target = target;
        self
    }

    /// Re-derives `alpha`/`beta` after `tupdate` or `rmax` changed.
    pub fn with_default_gains(mut self) -> Result<Self> {
        let (alpha, beta) = default_gains(self.tupdate, self.rmax)?;
        self.alpha = alpha;
        self.beta = beta;
        Ok(self)
    }

    pub fn validate(&self) -> Result<()> {
        ensure_positive("target", self.target)?;
        ensure_positive("tupdate", self.tupdate)?;
        ensure_positive("rmax", self.rmax)?;
        ensure_non_negative("alpha", self.alpha)?;
        ensure_non_negative("beta", self.beta)?;
        if self.rmax < self.tupdate {
            return Err(Error::invalid(
                "rmax",
                format!("must be >= tupdate ({} s), got {} s", self.tupdate, self.rmax),
            ));
        }
        if !(self.p_max > 0.0 && self.p_max <= 1.0) {
            return Err(Error::invalid("p_max", format!("must lie in (0, 1], got {}", self.p_max)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct Pi2State {
    /// Base probability `p'`, kept within `[0, p_max]`.
    pub p_base: f64,
    /// Queue delay at the previous update, seconds.
    pub q_prev: f64,
}

/// One controller update with the queue delay sampled now.
pub fn pi2_update(state: Pi2State, q_now: f64, cfg: &Pi2Config) -> Result<Pi2State> {
    ensure_non_negative("queue delay", q_now)?;
    let delta = cfg.alpha * (q_now - cfg.target) + cfg.beta * (q_now - state.q_prev);
    Ok(Pi2State {
        p_base: (state.p_base + delta).clamp(0.0, cfg.p_max),
        q_prev: q_now,
    })
}

/// Drop / mark probability for Classic traffic.
pub fn classic_drop_prob(state: &Pi2State) -> f64 {
    state.p_base.powi(CLASSIC_EXPONENT).clamp(0.0, 1.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    #[test]
    fn gains_rule() {
        let (alpha, beta) = default_gains(0.016, 0.100).unwrap();
        assert_relative_eq!(alpha, 0.16, epsilon = 1e-15);
        assert_relative_eq!(beta, 3.0, epsilon = 1e-15);
        let (a2, b2) = default_gains(0.016, 0.200).unwrap();
        assert_relative_eq!(a2, alpha / 4.0, epsilon = 1e-15);
        assert_relative_eq!(b2, beta / 2.0, epsilon = 1e-15);
        let (a3, b3) = default_gains(0.032, 0.100).unwrap();
        assert_relative_eq!(a3, alpha * 2.0, epsilon = 1e-15);
        assert_eq!(b3, beta);
        assert!(default_gains(0.0, 0.1).is_err());
    }

    #[test]
    fn gain_ratio_favours_proportional_term() {
        for (tupdate, rmax) in [(0.016, 0.1), (0.01, 0.05), (0.016, 0.3)] {
            let (alpha, beta) = default_gains(tupdate, rmax).unwrap();
            assert_relative_eq!(beta / alpha, 3.0 * rmax / tupdate, max_relative = 1e-12);
        }
    }

    #[test]
    fn config_validation() {
        let cfg = Pi2Config::default();
        assert_eq!(cfg.target, 0.015);
        assert_eq!(cfg.tupdate, 0.016);
        assert_eq!(cfg.rmax, 0.1);
        assert!(Pi2Config::new(0.015, 0.1, 0.05).is_err());
        assert!(Pi2Config::new(0.0, 0.016, 0.1).is_err());
        let mut bad = cfg;
        bad.p_max = 0.0;
        assert!(bad.validate().is_err());
    }

    #[test]
    fn update_examples() {
        let cfg = Pi2Config::default();
        let at_target = Pi2State { p_base: 0.2, q_prev: cfg.target };
        assert_eq!(pi2_update(at_target, cfg.target, &cfg).unwrap(), at_target);

        let q = cfg.target + 0.010;
        let s = Pi2State { p_base: 0.1, q_prev: q };
        let next = pi2_update(s, q, &cfg).unwrap();
        assert_relative_eq!(next.p_base - 0.1, 0.0016, epsilon = 1e-15);

        let idle = pi2_update(Pi2State::default(), 0.0, &cfg).unwrap();
        assert_eq!(idle.p_base, 0.0);
        assert!(pi2_update(s, -0.001, &cfg).is_err());
    }

    #[test]
    fn squared_output() {
        assert_eq!(classic_drop_prob(&Pi2State { p_base: 0.0, q_prev: 0.0 }), 0.0);
        assert_relative_eq!(classic_drop_prob(&Pi2State { p_base: 0.1, q_prev: 0.0 }), 0.01, epsilon = 1e-17);
        assert_eq!(classic_drop_prob(&Pi2State { p_base: 1.0, q_prev: 0.0 }), 1.0);
    }

    proptest! {
        #[test]
        fn probability_stays_in_range(
            qs in proptest::collection::vec(0.0f64..0.5, 1..200),
            p_max in 0.05f64..=1.0,
        ) {
            let cfg = Pi2Config { p_max, ..Pi2Config::default() };
            let mut s = Pi2State::default();
            for q in qs {
                s = pi2_update(s, q, &cfg).unwrap();
                prop_assert!(s.p_base >= 0.0 && s.p_base <= p_max);
                let p = classic_drop_prob(&s);
                prop_assert!((0.0..=1.0).contains(&p));
            }
        }

        #[test]
        fn constant_excess_delay_raises_probability(excess in 1e-4f64..0.2, start in 0.0f64..0.5) {
            let cfg = Pi2Config::default();
            let q = cfg.target + excess;
            let mut s = Pi2State { p_base: start, q_prev: q };
            for _ in 0..50 {
                let next = pi2_update(s, q, &cfg).unwrap();
                prop_assert!(next.p_base >= s.p_base);
                prop_assert!(next.p_base > s.p_base || next.p_base == cfg.p_max);
                s = next;
            }
        }
    }
}
