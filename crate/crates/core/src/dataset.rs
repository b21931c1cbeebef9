//! Per-country CDN latency and fixed-access bandwidth table.
//!
//! The bundled CSV covers the 43 countries with the most Internet users
//! (about 90% of the world's users). Aggregates are weighted by users.

use std::io::Read;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::cc_models::{switchover_rtt, CcParams};
use crate::error::{ensure_non_negative, Error, Result};
use crate::geometry::{lambda0_aimd_approx, lambda0_cubic};
use crate::units::mbps_to_pps;

/// The bundled table.
pub const BUNDLED_CSV: &str = include_str!("../data/country_cdn_rtt.csv");
pub const BUNDLED_NAME: &str = "<bundled>/country_cdn_rtt.csv";

/// Environment variable overriding the default dataset path.
pub const DATASET_ENV: &str = "PI2LAB_DATASET";

/// World Internet users at the time the table was compiled (table footer).
pub const WORLD_INTERNET_USERS: u64 = 4_761_334_541;

pub const COLUMNS: [&str; 6] = [
    "country",
    "population",
    "pct_online",
    "users",
    "fixed_mbps",
    "cdn_latency_ms",
];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CountryRecord {
    #[serde(rename = "country")]
    pub name: String,
    pub population: u64,
    /// Fraction of the population online, in [0, 1].
    pub pct_online: f64,
    pub users: u64,
    pub fixed_mbps: f64,
    pub cdn_latency_ms: f64,
}

impl CountryRecord {
    fn check(&self, line: u64) -> Result<()> {
        let fail = |column: &str, reason: String| Error::Parse {
            line,
            column: column.to_string(),
            reason,
        };
        if self.users > self.population {
            return Err(fail(
                "users",
                format!("{} users exceeds population {}", self.users, self.population),
            ));
        }
        if !(self.pct_online.is_finite() && (0.0..=1.0).contains(&self.pct_online)) {
            return Err(fail("pct_online", format!("{} is not a fraction in [0, 1]", self.pct_online)));
        }
        for (column, v) in [("fixed_mbps", self.fixed_mbps), ("cdn_latency_ms", self.cdn_latency_ms)] {
            if !(v.is_finite() && v >= 0.0) {
                return Err(fail(column, format!("{v} must be finite and >= 0")));
            }
        }
        Ok(())
    }
}

/// Parses a dataset from any reader. The header row is required.
pub fn parse_dataset<R: Read>(reader: R) -> Result<Vec<CountryRecord>> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let headers = match rdr.headers() {
        Ok(h) => h.clone(),
        Err(e) => return Err(csv_error(e)),
    };
    if headers.is_empty() || (headers.len() == 1 && headers[0].is_empty()) {
        return Ok(Vec::new());
    }
    for expected in COLUMNS {
        if !headers.iter().any(|h| h == expected) {
            return Err(Error::Parse {
                line: 1,
                column: expected.to_string(),
                reason: "missing column in header".into(),
            });
        }
    }
    let mut records = Vec::new();
    for result in rdr.deserialize::<CountryRecord>() {
        let record = result.map_err(|e| csv_error_with_headers(e, &headers))?;
        let line = records.len() as u64 + 2;
        record.check(line)?;
        records.push(record);
    }
    Ok(records)
}

fn csv_error(e: csv::Error) -> Error {
    csv_error_with_headers(e, &csv::StringRecord::new())
}

fn csv_error_with_headers(e: csv::Error, headers: &csv::StringRecord) -> Error {
    let line = e.position().map(|p| p.line()).unwrap_or(0);
    let column = match e.kind() {
        csv::ErrorKind::Deserialize { err, .. } => err
            .field()
            .and_then(|i| headers.get(i as usize))
            .unwrap_or("?")
            .to_string(),
        csv::ErrorKind::UnequalLengths { .. } => "*".to_string(),
        _ => "?".to_string(),
    };
    let reason = match e.kind() {
        csv::ErrorKind::Deserialize { err, .. } => err.kind().to_string(),
        _ => e.to_string(),
    };
    Error::Parse { line, column, reason }
}

/// Raw dataset bytes plus where they came from.
#[derive(Debug, Clone)]
pub struct DatasetSource {
    pub name: String,
    pub bytes: Vec<u8>,
}

impl DatasetSource {
    pub fn bundled() -> Self {
        DatasetSource {
            name: BUNDLED_NAME.to_string(),
            bytes: BUNDLED_CSV.as_bytes().to_vec(),
        }
    }

    pub fn from_path(path: &Path) -> Result<Self> {
        Ok(DatasetSource {
            name: path.display().to_string(),
            bytes: std::fs::read(path)?,
        })
    }

    /// `path` if given, else `$PI2LAB_DATASET`, else the bundled table.
    pub fn resolve(path: Option<&Path>) -> Result<Self> {
        match path {
            Some(p) => Self::from_path(p),
            None => match std::env::var_os(DATASET_ENV) {
                Some(p) if !p.is_empty() => Self::from_path(Path::new(&p)),
                _ => Ok(Self::bundled()),
            },
        }
    }

    pub fn sha256(&self) -> String {
        hex::encode(Sha256::digest(&self.bytes))
    }

    pub fn records(&self) -> Result<Vec<CountryRecord>> {
        parse_dataset(self.bytes.as_slice())
    }
}

pub fn load_dataset(path: &Path) -> Result<Vec<CountryRecord>> {
    DatasetSource::from_path(path)?.records()
}

pub fn bundled_dataset() -> Vec<CountryRecord> {
    parse_dataset(BUNDLED_CSV.as_bytes()).expect("bundled dataset parses")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetSummary {
    pub weighted_rtt_ms: f64,
    pub weighted_bw_mbps: f64,
    pub total_users: u64,
    pub exclusions: Vec<String>,
}

fn is_excluded(name: &str, exclude: &[String]) -> bool {
    exclude.iter().any(|e| e.eq_ignore_ascii_case(name))
}

/// User-weighted mean CDN latency and fixed bandwidth.
///
/// Exclusions match country names case-insensitively.
pub fn weighted_summary(records: &[CountryRecord], exclude: &[String]) -> Result<DatasetSummary> {
    let (mut users, mut rtt, mut bw) = (0u64, 0.0, 0.0);
    for r in records.iter().filter(|r| !is_excluded(&r.name, exclude)) {
        users += r.users;
        rtt += r.users as f64 * r.cdn_latency_ms;
        bw += r.users as f64 * r.fixed_mbps;
    }
    if users == 0 {
        return Err(Error::EmptySelection);
    }
    Ok(DatasetSummary {
        weighted_rtt_ms: rtt / users as f64,
        weighted_bw_mbps: bw / users as f64,
        total_users: users,
        exclusions: exclude.to_vec(),
    })
}

/// Mean of the CReno and Cubic below-average fractions, `(9/17 + 3/4) / 2`.
pub fn default_lambda0_mix() -> f64 {
    let creno = lambda0_aimd_approx(crate::cc_models::CUBIC_B).expect("b = 0.7 is in range");
    (creno + lambda0_cubic()) / 2.0
}

/// CDN RTT under load in milliseconds: base latency plus `λ₀ · target`.
pub fn under_load_rtt(record: &CountryRecord, target: f64, lambda0_mix: f64) -> Result<f64> {
    ensure_non_negative("target", target)?;
    if !(lambda0_mix.is_finite() && (0.0..=1.0).contains(&lambda0_mix)) {
        return Err(Error::invalid("lambda0_mix", format!("must lie in [0, 1], got {lambda0_mix}")));
    }
    Ok(record.cdn_latency_ms + 1e3 * lambda0_mix * target)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CountryClass {
    pub country: String,
    pub users: u64,
    pub fixed_mbps: f64,
    pub rate_pps: f64,
    pub rtt_loaded_ms: f64,
    pub switchover_rtt_ms: f64,
    /// Loaded RTT strictly above the switchover curve (pure Cubic mode).
    /// Points exactly on the curve count as below (Reno mode).
    pub above_curve: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SwitchoverClassification {
    pub target_s: f64,
    pub lambda0_mix: f64,
    pub countries: Vec<CountryClass>,
    pub total_users: u64,
    pub users_above: u64,
}

impl SwitchoverClassification {
    /// Users above the curve, ignoring `exclude`, as a fraction of `denominator` users.
    pub fn share_above(&self, exclude: &[String], denominator: u64) -> f64 {
        let above: u64 = self
            .countries
            .iter()
            .filter(|c| c.above_curve && !is_excluded(&c.country, exclude))
            .map(|c| c.users)
            .sum();
        above as f64 / denominator as f64
    }
}

/// Places each country relative to the CReno/Cubic switchover curve.
pub fn classify_switchover(
    records: &[CountryRecord],
    target: f64,
    lambda0_mix: f64,
    cubic: &CcParams,
) -> Result<SwitchoverClassification> {
    let mut countries = Vec::with_capacity(records.len());
    for r in records {
        let rtt_loaded_ms = under_load_rtt(r, target, lambda0_mix)?;
        let rate_pps = mbps_to_pps(r.fixed_mbps);
        let switchover_ms = if rate_pps > 0.0 {
            switchover_rtt(rate_pps, cubic)? * 1e3
        } else {
            f64::INFINITY
        };
        countries.push(CountryClass {
            country: r.name.clone(),
            users: r.users,
            fixed_mbps: r.fixed_mbps,
            rate_pps,
            rtt_loaded_ms,
            switchover_rtt_ms: switchover_ms,
            above_curve: rtt_loaded_ms > switchover_ms,
        });
    }
    let total_users = countries.iter().map(|c| c.users).sum();
    let users_above = countries.iter().filter(|c| c.above_curve).map(|c| c.users).sum();
    Ok(SwitchoverClassification {
        target_s: target,
        lambda0_mix,
        countries,
        total_users,
        users_above,
    })
}

/// Log-spaced samples `(rate_pps, rtt_ms)` of the switchover curve.
pub fn switchover_curve(from_pps: f64, to_pps: f64, points: usize, cubic: &CcParams) -> Result<Vec<(f64, f64)>> {
    crate::error::ensure_positive("from rate", from_pps)?;
    crate::error::ensure_positive("to rate", to_pps)?;
    if points < 2 || to_pps <= from_pps {
        return Err(Error::invalid("curve", "need at least 2 points over an increasing rate range"));
    }
    let (lo, hi) = (from_pps.ln(), to_pps.ln());
    (0..points)
        .map(|i| {
            let rate = (lo + (hi - lo) * i as f64 / (points - 1) as f64).exp();
            Ok((rate, switchover_rtt(rate, cubic)? * 1e3))
        })
        .collect()
}
