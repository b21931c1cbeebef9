//! Packet-rate / bit-rate conversion and unit-suffixed value parsing.
//!
//! All internal quantities are SI: seconds and packets per second. Packets
//! are a fixed 1500 B.

use crate::error::{Error, Result};

pub const PACKET_SIZE_BYTES: f64 = 1500.0;
pub const PACKET_SIZE_BITS: f64 = PACKET_SIZE_BYTES * 8.0;

pub fn bps_to_pps(bits_per_sec: f64) -> f64 {
    bits_per_sec / PACKET_SIZE_BITS
}

pub fn mbps_to_pps(mbps: f64) -> f64 {
    bps_to_pps(mbps * 1e6)
}

pub fn pps_to_mbps(pps: f64) -> f64 {
    pps * PACKET_SIZE_BITS / 1e6
}

/// Parses a rate such as `100mbit`, `4Mbit`, `2.5gbit`, `64kbit`, `9600bit`
/// or `8333pps` into packets per second.
pub fn parse_rate(text: &str) -> Result<f64> {
    let s = text.trim().to_ascii_lowercase();
    let (number, scale_pps) = if let Some(n) = s.strip_suffix("pps") {
        (n, 1.0)
    } else if let Some(n) = s.strip_suffix("gbit") {
        (n, 1e9 / PACKET_SIZE_BITS)
    } else if let Some(n) = s.strip_suffix("mbit") {
        (n, 1e6 / PACKET_SIZE_BITS)
    } else if let Some(n) = s.strip_suffix("kbit") {
        (n, 1e3 / PACKET_SIZE_BITS)
    } else if let Some(n) = s.strip_suffix("bit") {
        (n, 1.0 / PACKET_SIZE_BITS)
    } else {
        return Err(Error::invalid(
            "rate",
            format!("`{text}` needs a unit suffix (pps, bit, kbit, mbit, gbit)"),
        ));
    };
    let value = parse_number("rate", text, number)?;
    Ok(value * scale_pps)
}

/// Parses a duration such as `16ms`, `0.1s` or `500us` into seconds.
pub fn parse_time(text: &str) -> Result<f64> {
    let s = text.trim().to_ascii_lowercase();
    let (number, scale) = if let Some(n) = s.strip_suffix("ms") {
        (n, 1e-3)
    } else if let Some(n) = s.strip_suffix("us") {
        (n, 1e-6)
    } else if let Some(n) = s.strip_suffix('s') {
        (n, 1.0)
    } else {
        return Err(Error::invalid(
            "time",
            format!("`{text}` needs a unit suffix (s, ms, us)"),
        ));
    };
    let value = parse_number("time", text, number)?;
    Ok(value * scale)
}

fn parse_number(name: &'static str, original: &str, number: &str) -> Result<f64> {
    let value: f64 = number
        .trim()
        .parse()
        .map_err(|_| Error::invalid(name, format!("cannot parse `{original}`")))?;
    if !value.is_finite() || value < 0.0 {
        return Err(Error::invalid(name, format!("`{original}` must be finite and >= 0")));
    }
    Ok(value)
}

/// Rounds half away from zero to `decimals` places.
pub fn round_to(value: f64, decimals: i32) -> f64 {
    let scale = 10f64.powi(decimals);
    (value * scale).round() / scale
}

pub fn format_ms(seconds: f64) -> String {
    format!("{:.3} ms", seconds * 1e3)
}
