//! Video frames, delay and the QoE reward.
//!
//! Per TTI every active UE ships one frame at its area's resolution. The
//! slot delay is how far the slowest frame overshoots the frame deadline, the
//! quality of a UE is `ln(rate / min_rate)` and the reward is
//!
//! ```text
//! kappa / (I K) * sum(q_now - |q_now - q_prev|) - omega * delay
//! ```

use serde::{Deserialize, Serialize};

use crate::error::{Result, SimError};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Resolution {
    pub label: String,
    pub width: u32,
    pub height: u32,
    pub min_rate_bps: f64,
}

impl Resolution {
    fn new(label: &str, width: u32, height: u32, min_rate_bps: f64) -> Self {
        Resolution {
            label: label.to_string(),
            width,
            height,
            min_rate_bps,
        }
    }

    pub fn pixels(&self) -> f64 {
        f64::from(self.width) * f64::from(self.height)
    }
}

/// Ordered resolutions, lowest first.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ResolutionLadder(Vec<Resolution>);

impl Default for ResolutionLadder {
    fn default() -> Self {
        ResolutionLadder(vec![
            Resolution::new("144p", 256, 144, 80e3),
            Resolution::new("240p", 426, 240, 300e3),
            Resolution::new("360p", 640, 360, 700e3),
            Resolution::new("480p", 854, 480, 1000e3),
            Resolution::new("720p", 1280, 720, 2000e3),
            Resolution::new("1080p", 1920, 1080, 3000e3),
        ])
    }
}

impl ResolutionLadder {
    pub fn new(entries: Vec<Resolution>) -> Result<Self> {
        let ladder = ResolutionLadder(entries);
        ladder.validate()?;
        Ok(ladder)
    }

    pub fn validate(&self) -> Result<()> {
        if self.0.is_empty() {
            return Err(SimError::config("qoe.ladder", "must not be empty"));
        }
        if self.0.iter().any(|r| !(r.min_rate_bps > 0.0)) {
            return Err(SimError::config("qoe.ladder", "min rates must be > 0"));
        }
        for pair in self.0.windows(2) {
            if !(pair[1].min_rate_bps > pair[0].min_rate_bps) {
                return Err(SimError::config("qoe.ladder", "min rates must strictly increase"));
            }
            if !(pair[1].pixels() > pair[0].pixels()) {
                return Err(SimError::config("qoe.ladder", "pixel counts must strictly increase"));
            }
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn get(&self, index: usize) -> Option<&Resolution> {
        self.0.get(index)
    }

    pub fn entries(&self) -> &[Resolution] {
        &self.0
    }

    fn entry(&self, index: usize) -> Result<&Resolution> {
        self.0
            .get(index)
            .ok_or_else(|| SimError::Contract(format!("resolution index {index} outside ladder of {}", self.0.len())))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct QoeWeights {
    /// Weight of the quality terms.
    pub kappa: f64,
    /// Delay penalty per second.
    pub omega: f64,
    /// Frame deadline T_l, seconds.
    pub frame_deadline_s: f64,
    pub bits_per_pixel: f64,
}

impl Default for QoeWeights {
    fn default() -> Self {
        QoeWeights {
            kappa: 1.0,
            omega: 0.5,
            frame_deadline_s: 1.0 / 30.0,
            bits_per_pixel: 12.0,
        }
    }
}

impl QoeWeights {
    pub fn validate(&self) -> Result<()> {
        if !(self.omega > 0.0) {
            return Err(SimError::config("qoe.omega", "must be > 0"));
        }
        if !(self.kappa > self.omega) {
            return Err(SimError::config("qoe.kappa", "must exceed qoe.omega"));
        }
        if !(self.frame_deadline_s > 0.0) {
            return Err(SimError::config("qoe.frame_deadline_s", "must be > 0"));
        }
        if !(self.bits_per_pixel > 0.0) {
            return Err(SimError::config("qoe.bits_per_pixel", "must be > 0"));
        }
        Ok(())
    }
}

/// Uplink time of one frame; `+inf` when the rate is zero.
pub fn frame_tx_time(ladder: &ResolutionLadder, res: usize, rate_bps: f64, w: &QoeWeights) -> Result<f64> {
    let bits = ladder.entry(res)?.pixels() * w.bits_per_pixel;
    if rate_bps <= 0.0 {
        return Ok(f64::INFINITY);
    }
    Ok(bits / rate_bps)
}

/// Overshoot of the slowest frame past the deadline, clamped at zero.
pub fn slot_delay(times: &[f64], w: &QoeWeights) -> f64 {
    times
        .iter()
        .copied()
        .fold(None, |acc: Option<f64>, t| Some(acc.map_or(t, |a| a.max(t))))
        .map_or(0.0, |worst| (worst - w.frame_deadline_s).max(0.0))
}

/// `ln(rate / min_rate)`; `-inf` for a dropped frame (rate <= 0).
pub fn quality(ladder: &ResolutionLadder, res: usize, rate_bps: f64) -> Result<f64> {
    let min_rate = ladder.entry(res)?.min_rate_bps;
    if rate_bps <= 0.0 {
        return Ok(f64::NEG_INFINITY);
    }
    Ok((rate_bps / min_rate).ln())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QoeBreakdown {
    pub reward: f64,
    /// `sum(q_now) / (I K)`.
    pub mean_quality: f64,
    /// `sum(|q_now - q_prev|) / (I K)`, unweighted.
    pub smoothness_penalty: f64,
    pub delay_s: f64,
}

/// The per-TTI QoE. `per_ue` holds `(q_now, q_prev)` for every active UE.
pub fn qoe_reward(per_ue: &[(f64, f64)], delay_s: f64, w: &QoeWeights, areas: usize, ues_per_area: usize) -> QoeBreakdown {
    let n = areas * ues_per_area;
    let (mean_quality, smoothness_penalty) = if n == 0 {
        (0.0, 0.0)
    } else {
        let q: f64 = per_ue.iter().map(|&(now, _)| now).sum();
        let s: f64 = per_ue
            .iter()
            .map(|&(now, prev)| if now == prev { 0.0 } else { (now - prev).abs() })
            .sum();
        (q / n as f64, s / n as f64)
    };
    let quality_term = mean_quality - smoothness_penalty;
    let reward = w.kappa * if quality_term.is_nan() { f64::NEG_INFINITY } else { quality_term } - w.omega * delay_s;
    QoeBreakdown {
        reward,
        mean_quality,
        smoothness_penalty,
        delay_s,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn default_ladder_is_valid() {
        let ladder = ResolutionLadder::default();
        ladder.validate().unwrap();
        assert_eq!(ladder.len(), 6);
        let rates: Vec<f64> = ladder.entries().iter().map(|r| r.min_rate_bps).collect();
        assert_eq!(rates, vec![80e3, 300e3, 700e3, 1000e3, 2000e3, 3000e3]);
    }

    #[test]
    fn non_monotone_ladder_rejected() {
        let mut entries = ResolutionLadder::default().entries().to_vec();
        entries.swap(1, 2);
        assert!(ResolutionLadder::new(entries).is_err());
    }

    #[test]
    fn frame_time_examples() {
        let ladder = ResolutionLadder::default();
        let w = QoeWeights::default();
        let t = frame_tx_time(&ladder, 4, 3e6, &w).unwrap();
        assert!((t - 3.6864).abs() < 1e-12);
        let half = frame_tx_time(&ladder, 4, 6e6, &w).unwrap();
        assert_eq!(half * 2.0, t);
        let unit = frame_tx_time(&ladder, 0, 256.0 * 144.0 * 12.0, &w).unwrap();
        assert_eq!(unit, 1.0);
        assert_eq!(frame_tx_time(&ladder, 0, 0.0, &w).unwrap(), f64::INFINITY);
        assert!(frame_tx_time(&ladder, 6, 1.0, &w).is_err());
    }

    #[test]
    fn delay_examples() {
        let w = QoeWeights { frame_deadline_s: 0.033, ..Default::default() };
        assert_eq!(slot_delay(&[0.01, 0.033], &w), 0.0);
        assert!((slot_delay(&[0.01, 0.05], &w) - 0.017).abs() < 1e-15);
        assert_eq!(slot_delay(&[], &w), 0.0);
    }

    #[test]
    fn quality_examples() {
        let ladder = ResolutionLadder::default();
        assert_eq!(quality(&ladder, 0, 80e3).unwrap(), 0.0);
        assert!((quality(&ladder, 0, std::f64::consts::E * 80e3).unwrap() - 1.0).abs() < 1e-15);
        assert!((quality(&ladder, 0, 40e3).unwrap() + std::f64::consts::LN_2).abs() < 1e-15);
        assert_eq!(quality(&ladder, 0, 0.0).unwrap(), f64::NEG_INFINITY);
    }

    #[test]
    fn reward_examples() {
        let w = QoeWeights { kappa: 1.0, omega: 0.5, ..Default::default() };
        let ones = vec![(1.0, 1.0); 20];
        assert!((qoe_reward(&ones, 0.0, &w, 5, 4).reward - 1.0).abs() < 1e-15);
        assert_eq!(qoe_reward(&[(1.0, 0.0)], 0.0, &w, 1, 1).reward, 0.0);
        assert_eq!(qoe_reward(&[(1.0, 0.0)], 0.5, &w, 1, 1).reward, -0.25);
        assert_eq!(qoe_reward(&[], 0.0, &w, 0, 4).reward, 0.0);
    }

    #[test]
    fn weights_need_kappa_above_omega() {
        let w = QoeWeights { kappa: 0.4, omega: 0.5, ..Default::default() };
        assert!(w.validate().is_err());
    }

    proptest! {
        #[test]
        fn reward_slope_in_delay_is_minus_omega(
            q in proptest::collection::vec((-3.0f64..3.0, -3.0f64..3.0), 1..20),
            d in 0.0f64..5.0,
            extra in 0.0f64..5.0,
        ) {
            let w = QoeWeights::default();
            let n = q.len();
            let a = qoe_reward(&q, d, &w, n, 1).reward;
            let b = qoe_reward(&q, d + extra, &w, n, 1).reward;
            prop_assert!(b <= a);
            prop_assert!(((a - b) - w.omega * extra).abs() < 1e-9);
        }

        #[test]
        fn below_minimum_rate_contributes_negatively(
            others in proptest::collection::vec(0.0f64..3.0, 0..10),
            deficit in 0.01f64..0.99,
        ) {
            // Parity baseline: every UE exactly at its minimum rate.
            let w = QoeWeights::default();
            let ladder = ResolutionLadder::default();
            let n = others.len() + 1;
            let mut parity: Vec<(f64, f64)> = others.iter().map(|&q| (q, q)).collect();
            parity.push((0.0, 0.0));
            let q_low = quality(&ladder, 2, 700e3 * (1.0 - deficit)).unwrap();
            let mut forced = parity.clone();
            forced[n - 1] = (q_low, 0.0);
            prop_assert!(q_low < 0.0);
            prop_assert!(qoe_reward(&forced, 0.0, &w, n, 1).reward < qoe_reward(&parity, 0.0, &w, n, 1).reward);
        }
    }
}
