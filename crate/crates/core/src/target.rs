//! Derivation of a default `target` queue delay:
//!
//! ```text
//! target ≈ λ(1-b)/b · f · R_typ
//! ```
//!
//! where `λ(1-b)/b` is the geometry factor of the dominant sawtooth (mixed
//! across controllers by traffic weight), `f` a safety factor and `R_typ` a
//! globally typical base RTT.

use serde::{Deserialize, Serialize};

use crate::cc_models::{CcMode, CUBIC_B, RENO_B};
use crate::error::{ensure_decrease_factor, ensure_positive, Error, Result};
use crate::geometry::{LAMBDA_AIMD, LAMBDA_CUBIC};
use crate::units::round_to;

pub const DEFAULT_R_TYP: f64 = 0.025;
pub const DEFAULT_SAFETY_FACTOR: f64 = 2.0;
pub const DEFAULT_CRENO_WEIGHT: f64 = 0.7;
pub const DEFAULT_CUBIC_WEIGHT: f64 = 0.3;

const WEIGHT_SUM_TOLERANCE: f64 = 1e-9;

/// `λ(1-b)/b`.
pub fn geometry_factor(lambda: f64, b: f64) -> Result<f64> {
    if !(lambda > 0.0 && lambda <= 1.0) {
        return Err(Error::invalid("lambda", format!("must lie in (0, 1], got {lambda}")));
    }
    let b = ensure_decrease_factor(b)?;
    Ok(lambda * (1.0 - b) / b)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MixEntry {
    pub controller: CcMode,
    pub weight: f64,
    pub lambda: f64,
    pub b: f64,
}

impl MixEntry {
    /// Entry with the controller's default `λ` and `b`.
    pub fn for_controller(controller: CcMode, weight: f64) -> Self {
        let (lambda, b) = match controller {
            CcMode::Reno => (LAMBDA_AIMD, RENO_B),
            CcMode::CReno => (LAMBDA_AIMD, CUBIC_B),
            CcMode::Cubic => (LAMBDA_CUBIC, CUBIC_B),
        };
        MixEntry {
            controller,
            weight,
            lambda,
            b,
        }
    }

    pub fn geometry_factor(&self) -> Result<f64> {
        geometry_factor(self.lambda, self.b)
    }
}

fn validate_mix(mix: &[MixEntry]) -> Result<()> {
    if mix.is_empty() {
        return Err(Error::invalid("mix", "needs at least one controller"));
    }
    if let Some(e) = mix.iter().find(|e| !(e.weight.is_finite() && e.weight >= 0.0)) {
        return Err(Error::invalid("weight", format!("{} has weight {}", e.controller, e.weight)));
    }
    let total: f64 = mix.iter().map(|e| e.weight).sum();
    if (total - 1.0).abs() > WEIGHT_SUM_TOLERANCE {
        return Err(Error::invalid("weights", format!("must sum to 1, got {total}")));
    }
    Ok(())
}

/// Traffic-weighted mean of the controllers' geometry factors.
pub fn mixed_geometry_factor(mix: &[MixEntry]) -> Result<f64> {
    validate_mix(mix)?;
    mix.iter()
        .map(|e| Ok(e.weight * e.geometry_factor()?))
        .sum()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TargetInputs {
    /// Typical base RTT, seconds.
    pub r_typ: f64,
    /// Safety factor, >= 1.
    pub f: f64,
    pub mix: Vec<MixEntry>,
}

impl Default for TargetInputs {
    fn default() -> Self {
        TargetInputs {
            r_typ: DEFAULT_R_TYP,
            f: DEFAULT_SAFETY_FACTOR,
            mix: vec![
                MixEntry::for_controller(CcMode::CReno, DEFAULT_CRENO_WEIGHT),
                MixEntry::for_controller(CcMode::Cubic, DEFAULT_CUBIC_WEIGHT),
            ],
        }
    }
}

impl TargetInputs {
    pub fn validate(&self) -> Result<()> {
        ensure_positive("r_typ", self.r_typ)?;
        if !(self.f.is_finite() && self.f >= 1.0) {
            return Err(Error::invalid("f", format!("safety factor must be >= 1, got {}", self.f)));
        }
        validate_mix(&self.mix)?;
        for e in &self.mix {
            e.geometry_factor()?;
        }
        Ok(())
    }
}

/// Recommended `target` in seconds, computed in full precision.
pub fn recommend_target(inputs: &TargetInputs) -> Result<f64> {
    inputs.validate()?;
    Ok(mixed_geometry_factor(&inputs.mix)? * inputs.f * inputs.r_typ)
}

/// How intermediate values are rounded in a [`TargetReport`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Rounding {
    /// Full precision throughout; only the reported millisecond value is rounded.
    #[default]
    Full,
    /// Per-controller factors and the mixed factor to 2 dp, `R_typ` to whole
    /// milliseconds, then multiply.
    Staged,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ControllerFactor {
    pub controller: CcMode,
    pub weight: f64,
    pub lambda: f64,
    pub b: f64,
    pub geometry_factor: f64,
}

/// Where `R_typ` came from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "source", rename_all = "snake_case")]
pub enum RtypProvenance {
    Explicit,
    Dataset {
        path: String,
        sha256: String,
        exclusions: Vec<String>,
        total_users: u64,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TargetReport {
    pub inputs: TargetInputs,
    pub rounding: Rounding,
    pub factors: Vec<ControllerFactor>,
    pub mixed_geometry_factor: f64,
    /// `R_typ` as used in the final product, milliseconds.
    pub r_typ_ms: f64,
    pub target_s: f64,
    /// `target_s` in milliseconds rounded to 2 dp.
    pub target_ms: f64,
    pub r_typ_provenance: RtypProvenance,
}

pub fn build_report(
    inputs: &TargetInputs,
    rounding: Rounding,
    provenance: RtypProvenance,
) -> Result<TargetReport> {
    inputs.validate()?;
    let staged = rounding == Rounding::Staged;
    let factors = inputs
        .mix
        .iter()
        .map(|e| {
            let g = e.geometry_factor()?;
            Ok(ControllerFactor {
                controller: e.controller,
                weight: e.weight,
                lambda: e.lambda,
                b: e.b,
                geometry_factor: if staged { round_to(g, 2) } else { g },
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let mut mixed: f64 = factors.iter().map(|c| c.weight * c.geometry_factor).sum();
    let mut r_typ_ms = inputs.r_typ * 1e3;
    if staged {
        mixed = round_to(mixed, 2);
        r_typ_ms = r_typ_ms.round();
    }
    let target_s = mixed * inputs.f * r_typ_ms / 1e3;
    Ok(TargetReport {
        inputs: inputs.clone(),
        rounding,
        factors,
        mixed_geometry_factor: mixed,
        r_typ_ms,
        target_s,
        target_ms: round_to(target_s * 1e3, 2),
        r_typ_provenance: provenance,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn table_rows() {
        assert_eq!(round_to(geometry_factor(0.9, 0.5).unwrap(), 2), 0.90);
        assert_eq!(round_to(geometry_factor(0.9, 0.7).unwrap(), 2), 0.39);
        assert_eq!(round_to(geometry_factor(0.85, 0.7).unwrap(), 2), 0.36);
        assert!(geometry_factor(0.0, 0.5).is_err());
        assert!(geometry_factor(0.9, 1.0).is_err());
    }

    #[test]
    fn mixed_factor_examples() {
        let inputs = TargetInputs::default();
        let full = mixed_geometry_factor(&inputs.mix).unwrap();
        // 0.7 * 0.9*0.3/0.7 + 0.3 * 0.85*0.3/0.7
        assert_relative_eq!(full, 0.27 + 0.3 * 0.85 * 0.3 / 0.7, epsilon = 1e-15);
        assert_eq!(round_to(full, 2), 0.38);
        // With the table's 2 dp factors the mix is 0.381.
        assert_relative_eq!(0.7 * 0.39 + 0.3 * 0.36, 0.381, epsilon = 1e-12);

        let single = [MixEntry::for_controller(CcMode::Cubic, 1.0)];
        assert_eq!(mixed_geometry_factor(&single).unwrap(), geometry_factor(0.85, 0.7).unwrap());

        let half = [
            MixEntry::for_controller(CcMode::CReno, 0.5),
            MixEntry::for_controller(CcMode::Cubic, 0.5),
        ];
        assert_relative_eq!(mixed_geometry_factor(&half).unwrap(), 0.375, epsilon = 1e-12);

        let bad = [MixEntry::for_controller(CcMode::CReno, 0.6)];
        assert!(matches!(mixed_geometry_factor(&bad), Err(Error::InvalidInput { .. })));
    }

    #[test]
    fn recommended_target() {
        let inputs = TargetInputs::default();
        let full = recommend_target(&inputs).unwrap();
        assert_eq!(round_to(full * 1e3, 0), 19.0);

        let staged = build_report(&inputs, Rounding::Staged, RtypProvenance::Explicit).unwrap();
        assert_eq!(staged.mixed_geometry_factor, 0.38);
        assert_eq!(staged.target_ms, 19.0);

        let f1 = TargetInputs { f: 1.0, ..inputs.clone() };
        let r1 = build_report(&f1, Rounding::Staged, RtypProvenance::Explicit).unwrap();
        assert_eq!(r1.target_ms, 9.5);

        let f15 = TargetInputs { f: 1.5, ..inputs.clone() };
        let r15 = build_report(&f15, Rounding::Staged, RtypProvenance::Explicit).unwrap();
        assert_eq!(r15.target_ms, 14.25);

        let wide = TargetInputs { r_typ: 0.034, ..inputs.clone() };
        let r34 = build_report(&wide, Rounding::Staged, RtypProvenance::Explicit).unwrap();
        assert_eq!(r34.target_ms, 25.84);

        assert!(recommend_target(&TargetInputs { f: 0.5, ..inputs }).is_err());
    }

    #[test]
    fn linear_in_f_and_rtyp() {
        let base = TargetInputs::default();
        let t = recommend_target(&base).unwrap();
        let t_f = recommend_target(&TargetInputs { f: base.f * 2.0, ..base.clone() }).unwrap();
        let t_r = recommend_target(&TargetInputs { r_typ: base.r_typ * 2.0, ..base.clone() }).unwrap();
        assert_eq!(t_f, 2.0 * t);
        assert_eq!(t_r, 2.0 * t);
    }
}
