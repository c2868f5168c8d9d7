//! Uplink link budgets between UAV-UEs and the UAV-BS.
//!
//! Per TTI and per UE: 3D distance, LoS pathloss, fractional power control,
//! received power with a Rician small-scale fading draw, co-channel
//! interference from the other active UEs, SINR and Shannon rate.
//!
//! Transmit power follows fractional power control on the free-space LoS
//! pathloss, while received power uses the gain/exponent law
//! `P_tx * G * d^-alpha * 10^(-fading_db/10)`. Both conventions are kept
//! side by side on purpose.

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Result, SimError};
use crate::scenario::UavPose;

pub const SPEED_OF_LIGHT: f64 = 2.997_924_58e8;

/// Rice factors at or above this are treated as a pure LoS channel.
pub const PURE_LOS_KAPPA: f64 = 1e6;

/// Allowed fractional pathloss compensation factors.
pub const RHO_U_LEVELS: [f64; 8] = [0.0, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9, 1.0];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ChannelParams {
    pub carrier_hz: f64,
    pub light_speed: f64,
    /// Extra LoS attenuation, dB.
    pub eta_los_db: f64,
    /// Pathloss exponent of the received-power law.
    pub alpha: f64,
    /// Amplifier/antenna power gain, dB.
    pub gain_db: f64,
    pub bandwidth_hz: f64,
    pub noise_dbm: f64,
    /// Rice factor, linear.
    pub rice_kappa: f64,
    /// Fractional pathloss compensation.
    pub rho_u: f64,
}

impl Default for ChannelParams {
    fn default() -> Self {
        ChannelParams {
            carrier_hz: 2e9,
            light_speed: SPEED_OF_LIGHT,
            eta_los_db: 0.1,
            alpha: 2.0,
            gain_db: -31.5,
            bandwidth_hz: 3e6,
            noise_dbm: -96.0,
            rice_kappa: db_to_linear(12.0),
            rho_u: 0.6,
        }
    }
}

impl ChannelParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.carrier_hz > 0.0) {
            return Err(SimError::config("channel.carrier_hz", "must be > 0"));
        }
        if !(self.light_speed > 0.0) {
            return Err(SimError::config("channel.light_speed", "must be > 0"));
        }
        if !(self.bandwidth_hz > 0.0) {
            return Err(SimError::config("channel.bandwidth_hz", "must be > 0"));
        }
        if !(self.alpha >= 2.0) {
            return Err(SimError::config("channel.alpha", "must be >= 2"));
        }
        if !(self.rice_kappa >= 0.0) {
            return Err(SimError::config("channel.rice_kappa", "must be >= 0"));
        }
        if !RHO_U_LEVELS.iter().any(|r| (r - self.rho_u).abs() < 1e-12) {
            return Err(SimError::config(
                "channel.rho_u",
                format!("must be one of {RHO_U_LEVELS:?}"),
            ));
        }
        for (field, v) in [
            ("channel.eta_los_db", self.eta_los_db),
            ("channel.gain_db", self.gain_db),
            ("channel.noise_dbm", self.noise_dbm),
        ] {
            if !v.is_finite() {
                return Err(SimError::config(field, "must be finite"));
            }
        }
        Ok(())
    }

    pub fn noise_mw(&self) -> f64 {
        dbm_to_mw(self.noise_dbm)
    }
}

pub fn dbm_to_mw(dbm: f64) -> f64 {
    10f64.powf(dbm / 10.0)
}

pub fn mw_to_dbm(mw: f64) -> f64 {
    10.0 * mw.log10()
}

pub fn db_to_linear(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

pub fn distance_3d(a: &UavPose, b: &UavPose) -> f64 {
    let (dx, dy, dh) = (a.x - b.x, a.y - b.y, a.h - b.h);
    (dx * dx + dy * dy + dh * dh).sqrt()
}

/// Free-space LoS pathloss in dB: `20 log10(4 pi f_c d / c) + eta_LoS`.
pub fn pathloss_los(d: f64, p: &ChannelParams) -> Result<f64> {
    if !(d > 0.0) {
        return Err(SimError::Domain(format!("pathloss at distance {d} m")));
    }
    Ok(20.0 * (4.0 * std::f64::consts::PI * p.carrier_hz * d / p.light_speed).log10() + p.eta_los_db)
}

/// Fractional power control: `min(p_max, 10 log10(B) + rho_u * PL)`, dBm.
pub fn tx_power_fpc(p_max_dbm: f64, pathloss_db: f64, p: &ChannelParams) -> f64 {
    p_max_dbm.min(10.0 * p.bandwidth_hz.log10() + p.rho_u * pathloss_db)
}

/// Received power in mW for a transmit power in dBm.
pub fn received_power(p_tx_dbm: f64, d: f64, fading_db: f64, p: &ChannelParams) -> Result<f64> {
    if !(d > 0.0) {
        return Err(SimError::Domain(format!("received power at distance {d} m")));
    }
    let dbm = p_tx_dbm + p.gain_db - 10.0 * p.alpha * d.log10() - fading_db;
    Ok(dbm_to_mw(dbm))
}

/// SINR against noise plus the summed interferer powers (all mW), and the
/// Shannon rate in bit/s.
pub fn sinr_and_rate(p_rx_mw: f64, interferers_mw: &[f64], p: &ChannelParams) -> (f64, f64) {
    let interference: f64 = interferers_mw.iter().sum();
    let sinr = p_rx_mw / (p.noise_mw() + interference);
    (sinr, p.bandwidth_hz * (1.0 + sinr).log2())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FadingDraw {
    pub amplitude: f64,
    pub fading_db: f64,
}

/// Rician amplitude sampler normalized to unit mean power.
///
/// With Rice factor `kappa = rho^2 / (2 sigma0^2)` and `rho^2 + 2 sigma0^2 = 1`
/// the amplitude is `|rho + sigma0 (X + iY)|` for independent standard normals.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RicianFading {
    kappa: f64,
    rho: f64,
    sigma0: f64,
}

impl RicianFading {
    pub fn new(kappa: f64) -> Result<Self> {
        if !(kappa >= 0.0) {
            return Err(SimError::Domain(format!("Rice factor {kappa}")));
        }
        let rho = (kappa / (kappa + 1.0)).sqrt();
        let sigma0 = (0.5 / (kappa + 1.0)).sqrt();
        Ok(RicianFading { kappa, rho, sigma0 })
    }

    pub fn kappa(&self) -> f64 {
        self.kappa
    }

    /// Dominant-path amplitude.
    pub fn rho(&self) -> f64 {
        self.rho
    }

    /// Scattered-path standard deviation per quadrature component.
    pub fn sigma0(&self) -> f64 {
        self.sigma0
    }

    pub fn is_pure_los(&self) -> bool {
        self.kappa >= PURE_LOS_KAPPA
    }

    /// Draws one amplitude. The pure-LoS limit consumes no randomness.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> FadingDraw {
        if self.is_pure_los() {
            return FadingDraw {
                amplitude: 1.0,
                fading_db: 0.0,
            };
        }
        let i: f64 = rng.sample(StandardNormal);
        let q: f64 = rng.sample(StandardNormal);
        let amplitude = (self.rho + self.sigma0 * i).hypot(self.sigma0 * q);
        FadingDraw {
            amplitude,
            fading_db: -10.0 * (amplitude * amplitude).log10(),
        }
    }
}

pub fn sample_rician_fading<R: Rng + ?Sized>(p: &ChannelParams, rng: &mut R) -> Result<FadingDraw> {
    Ok(RicianFading::new(p.rice_kappa)?.sample(rng))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LinkBudget {
    pub d_3d: f64,
    pub pathloss_db: f64,
    pub fading_db: f64,
    pub p_tx_dbm: f64,
    pub p_rx_mw: f64,
    pub interference_mw: f64,
    pub sinr: f64,
    pub rate_bps: f64,
}

/// One uplink transmitter: its pose and the selected maximum power.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UplinkTx {
    pub pose: UavPose,
    pub p_max_dbm: f64,
}

/// Link budgets of all active UEs towards the BS for one TTI.
///
/// Every UE in `ues` is active; each one interferes with all the others.
/// Distances are floored at `min_distance`.
pub fn link_budgets(
    bs: &UavPose,
    ues: &[UplinkTx],
    fading_db: &[f64],
    p: &ChannelParams,
    min_distance: f64,
) -> Result<Vec<LinkBudget>> {
    if fading_db.len() != ues.len() {
        return Err(SimError::Contract(format!(
            "{} fading draws for {} transmitters",
            fading_db.len(),
            ues.len()
        )));
    }
    let mut partial = Vec::with_capacity(ues.len());
    for (ue, &fading) in ues.iter().zip(fading_db) {
        let d = distance_3d(bs, &ue.pose).max(min_distance);
        let pathloss = pathloss_los(d, p)?;
        let p_tx = tx_power_fpc(ue.p_max_dbm, pathloss, p);
        let p_rx = received_power(p_tx, d, fading, p)?;
        partial.push((d, pathloss, fading, p_tx, p_rx));
    }
    let mut out = Vec::with_capacity(ues.len());
    let mut others = Vec::with_capacity(ues.len());
    for (k, &(d_3d, pathloss_db, fading_db, p_tx_dbm, p_rx_mw)) in partial.iter().enumerate() {
        others.clear();
        others.extend(partial.iter().enumerate().filter(|(m, _)| *m != k).map(|(_, e)| e.4));
        let (sinr, rate_bps) = sinr_and_rate(p_rx_mw, &others, p);
        out.push(LinkBudget {
            d_3d,
            pathloss_db,
            fading_db,
            p_tx_dbm,
            p_rx_mw,
            interference_mw: others.iter().sum(),
            sinr,
            rate_bps,
        });
    }
    Ok(out)
}
