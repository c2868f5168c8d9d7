use std::io::Write;

use serde::{Deserialize, Deserializer, Serialize};

use crate::env::StepMetrics;
use crate::error::Result;

/// JSON has no NaN; serde_json writes it as `null`, which reads back as NaN.
pub(crate) fn nan_from_null<'de, D: Deserializer<'de>>(d: D) -> std::result::Result<f64, D::Error> {
    Ok(Option::<f64>::deserialize(d)?.unwrap_or(f64::NAN))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Phase {
    Train,
    Eval,
}

impl Phase {
    pub fn name(self) -> &'static str {
        match self {
            Phase::Train => "train",
            Phase::Eval => "eval",
        }
    }
}

/// One TTI.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsRow {
    pub phase: Phase,
    pub episode: usize,
    pub tti: usize,
    #[serde(deserialize_with = "nan_from_null")]
    pub reward: f64,
    #[serde(deserialize_with = "nan_from_null")]
    pub qoe: f64,
    #[serde(deserialize_with = "nan_from_null")]
    pub delay_s: f64,
    #[serde(deserialize_with = "nan_from_null")]
    pub smoothness_penalty: f64,
    #[serde(deserialize_with = "nan_from_null")]
    pub mean_power_dbm: f64,
    /// -1 while no area is active.
    pub min_resolution_index: i64,
    #[serde(deserialize_with = "nan_from_null")]
    pub mean_rate_bps: f64,
    pub active_ues: usize,
    pub active_areas: usize,
}

impl MetricsRow {
    pub fn from_step(phase: Phase, episode: usize, tti: usize, reward: f64, m: &StepMetrics) -> Self {
        MetricsRow {
            phase,
            episode,
            tti,
            reward,
            qoe: m.qoe,
            delay_s: m.delay_s,
            smoothness_penalty: m.smoothness_penalty,
            mean_power_dbm: m.mean_power_level_dbm(),
            min_resolution_index: m.min_resolution_index().map_or(-1, |r| r as i64),
            mean_rate_bps: m.mean_rate_bps(),
            active_ues: m.active_ues,
            active_areas: m.active_areas,
        }
    }
}

/// Per-episode means of the TTI rows.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpisodeRow {
    pub phase: Phase,
    pub episode: usize,
    pub ttis: usize,
    #[serde(deserialize_with = "nan_from_null")]
    pub reward: f64,
    #[serde(deserialize_with = "nan_from_null")]
    pub qoe: f64,
    #[serde(deserialize_with = "nan_from_null")]
    pub delay_s: f64,
    #[serde(deserialize_with = "nan_from_null")]
    pub smoothness_penalty: f64,
    /// Over TTIs with at least one UE.
    #[serde(deserialize_with = "nan_from_null")]
    pub mean_power_dbm: f64,
    /// Over TTIs with at least one area.
    #[serde(deserialize_with = "nan_from_null")]
    pub min_resolution_index: f64,
    #[serde(deserialize_with = "nan_from_null")]
    pub mean_rate_bps: f64,
    #[serde(deserialize_with = "nan_from_null")]
    pub active_ues: f64,
}

fn mean_by<F: Fn(&MetricsRow) -> Option<f64>>(rows: &[MetricsRow], f: F) -> f64 {
    let (sum, n) = rows.iter().filter_map(f).fold((0.0, 0usize), |(s, n), v| (s + v, n + 1));
    if n == 0 {
        f64::NAN
    } else {
        sum / n as f64
    }
}

impl EpisodeRow {
    pub fn summarize(rows: &[MetricsRow]) -> Option<Self> {
        let first = rows.first()?;
        Some(EpisodeRow {
            phase: first.phase,
            episode: first.episode,
            ttis: rows.len(),
            reward: mean_by(rows, |r| Some(r.reward)),
            qoe: mean_by(rows, |r| Some(r.qoe)),
            delay_s: mean_by(rows, |r| Some(r.delay_s)),
            smoothness_penalty: mean_by(rows, |r| Some(r.smoothness_penalty)),
            mean_power_dbm: mean_by(rows, |r| (r.active_ues > 0).then_some(r.mean_power_dbm)),
            min_resolution_index: mean_by(rows, |r| (r.min_resolution_index >= 0).then_some(r.min_resolution_index as f64)),
            mean_rate_bps: mean_by(rows, |r| (r.active_ues > 0).then_some(r.mean_rate_bps)),
            active_ues: mean_by(rows, |r| Some(r.active_ues as f64)),
        })
    }
}

/// Phase-level means used for agent comparison.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PhaseSummary {
    pub ttis: usize,
    #[serde(deserialize_with = "nan_from_null")]
    pub reward: f64,
    #[serde(deserialize_with = "nan_from_null")]
    pub qoe: f64,
    #[serde(deserialize_with = "nan_from_null")]
    pub delay_s: f64,
    #[serde(deserialize_with = "nan_from_null")]
    pub smoothness_penalty: f64,
    #[serde(deserialize_with = "nan_from_null")]
    pub min_resolution_index: f64,
    #[serde(deserialize_with = "nan_from_null")]
    pub mean_power_dbm: f64,
    /// Mean selected power over TTIs in which every area is burning.
    #[serde(deserialize_with = "nan_from_null")]
    pub mean_power_dbm_all_areas: f64,
}

impl PhaseSummary {
    pub fn from_rows(rows: &[MetricsRow], max_areas: usize) -> Self {
        PhaseSummary {
            ttis: rows.len(),
            reward: mean_by(rows, |r| Some(r.reward)),
            qoe: mean_by(rows, |r| Some(r.qoe)),
            delay_s: mean_by(rows, |r| Some(r.delay_s)),
            smoothness_penalty: mean_by(rows, |r| Some(r.smoothness_penalty)),
            min_resolution_index: mean_by(rows, |r| (r.min_resolution_index >= 0).then_some(r.min_resolution_index as f64)),
            mean_power_dbm: mean_by(rows, |r| (r.active_ues > 0).then_some(r.mean_power_dbm)),
            mean_power_dbm_all_areas: mean_by(rows, |r| (r.active_areas == max_areas && r.active_ues > 0).then_some(r.mean_power_dbm)),
        }
    }
}

/// Decimal text with 9 significant digits, `%g`-style: plain notation for
/// exponents in `[-4, 9)`, scientific otherwise; trailing zeros dropped.
pub fn fmt_sig(x: f64) -> String {
    const DIGITS: usize = 9;
    if x.is_nan() {
        return "NaN".into();
    }
    if x.is_infinite() {
        return if x > 0.0 { "inf".into() } else { "-inf".into() };
    }
    if x == 0.0 {
        return "0".into();
    }
    let sci = format!("{:.*e}", DIGITS - 1, x);
    let (mantissa, exp) = sci.split_once('e').expect("scientific format has an exponent");
    let exp: i32 = exp.parse().expect("integer exponent");
    if (-4..DIGITS as i32).contains(&exp) {
        let decimals = (DIGITS as i32 - 1 - exp).max(0) as usize;
        trim_zeros(format!("{x:.decimals$}"))
    } else {
        format!("{}e{exp}", trim_zeros(mantissa.to_string()))
    }
}

fn trim_zeros(s: String) -> String {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.').to_string()
    } else {
        s
    }
}

pub const TTI_HEADER: [&str; 12] = [
    "phase",
    "episode",
    "tti",
    "reward",
    "qoe",
    "delay_s",
    "smoothness_penalty",
    "mean_power_dbm",
    "min_resolution_index",
    "mean_rate_bps",
    "active_ues",
    "active_areas",
];

pub const EPISODE_HEADER: [&str; 11] = [
    "phase",
    "episode",
    "ttis",
    "reward",
    "qoe",
    "delay_s",
    "smoothness_penalty",
    "mean_power_dbm",
    "min_resolution_index",
    "mean_rate_bps",
    "active_ues",
];

pub fn write_tti_csv<W: Write>(rows: &[MetricsRow], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(TTI_HEADER)?;
    for r in rows {
        w.write_record([
            r.phase.name().to_string(),
            r.episode.to_string(),
            r.tti.to_string(),
            fmt_sig(r.reward),
            fmt_sig(r.qoe),
            fmt_sig(r.delay_s),
            fmt_sig(r.smoothness_penalty),
            fmt_sig(r.mean_power_dbm),
            r.min_resolution_index.to_string(),
            fmt_sig(r.mean_rate_bps),
            r.active_ues.to_string(),
            r.active_areas.to_string(),
        ])?;
    }
    w.flush().map_err(csv::Error::from)?;
    Ok(())
}

pub fn write_episode_csv<W: Write>(rows: &[EpisodeRow], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(EPISODE_HEADER)?;
    for r in rows {
        w.write_record([
            r.phase.name().to_string(),
            r.episode.to_string(),
            r.ttis.to_string(),
            fmt_sig(r.reward),
            fmt_sig(r.qoe),
            fmt_sig(r.delay_s),
            fmt_sig(r.smoothness_penalty),
            fmt_sig(r.mean_power_dbm),
            fmt_sig(r.min_resolution_index),
            fmt_sig(r.mean_rate_bps),
            fmt_sig(r.active_ues),
        ])?;
    }
    w.flush().map_err(csv::Error::from)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn significant_digit_examples() {
        assert_eq!(fmt_sig(0.0), "0");
        assert_eq!(fmt_sig(1.0), "1");
        assert_eq!(fmt_sig(-0.25), "-0.25");
        assert_eq!(fmt_sig(1.0 / 3.0), "0.333333333");
        assert_eq!(fmt_sig(123456789.4), "123456789");
        assert_eq!(fmt_sig(1234567894.0), "1.23456789e9");
        assert_eq!(fmt_sig(9.9999999996), "10");
        assert_eq!(fmt_sig(0.000012345), "1.2345e-5");
        assert_eq!(fmt_sig(f64::NEG_INFINITY), "-inf");
    }

    proptest! {
        #[test]
        fn nine_digits_round_trip(x in -1e12f64..1e12) {
            let back: f64 = fmt_sig(x).parse().unwrap();
            let tol = x.abs() * 5e-9 + 1e-300;
            prop_assert!((back - x).abs() <= tol, "{x} -> {}", fmt_sig(x));
        }
    }

    #[test]
    fn undefined_means_survive_json() {
        let s = PhaseSummary::from_rows(&[], 2);
        let text = serde_json::to_string(&s).unwrap();
        assert!(text.contains("\"qoe\":null"), "{text}");
        let back: PhaseSummary = serde_json::from_str(&text).unwrap();
        assert!(back.qoe.is_nan() && back.mean_power_dbm_all_areas.is_nan());
        assert_eq!(back.ttis, 0);
    }

    #[test]
    fn csv_has_header_and_rows() {
        let row = MetricsRow {
            phase: Phase::Eval,
            episode: 3,
            tti: 7,
            reward: 1.5,
            qoe: 1.5,
            delay_s: 0.0,
            smoothness_penalty: 0.125,
            mean_power_dbm: 25.0,
            min_resolution_index: 2,
            mean_rate_bps: 3.2e7,
            active_ues: 4,
            active_areas: 1,
        };
        let mut buf = Vec::new();
        write_tti_csv(&[row], &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], TTI_HEADER.join(","));
        assert_eq!(lines[1], "eval,3,7,1.5,1.5,0,0.125,25,2,32000000,4,1");
    }
}
