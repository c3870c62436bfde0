//! Downlink channel: LoS/NLoS free-space path loss with Rayleigh fading,
//! SNR-threshold decoding and the resulting transmission time.

use std::f64::consts::PI;

use rand::Rng;
use rand_distr::Exp1;
use thiserror::Error;

use crate::kinematics::Position;
use crate::SimRng;

pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ChannelError {
    #[error("coincident endpoints: base station and UAV share a position")]
    CoincidentEndpoints,
    #[error("UAV is {0} m below the base station")]
    BelowBaseStation(f64),
    #[error("linear value {0} has no dB representation")]
    NonPositive(f64),
    #[error("invalid channel parameter `{name}`: {reason}")]
    InvalidParam { name: &'static str, reason: &'static str },
}

pub fn db_to_linear(x_db: f64) -> f64 {
    10f64.powf(x_db / 10.0)
}

pub fn linear_to_db(x: f64) -> Result<f64, ChannelError> {
    if x > 0.0 {
        Ok(10.0 * x.log10())
    } else {
        Err(ChannelError::NonPositive(x))
    }
}

/// dBm to milliwatts.
pub fn dbm_to_mw(x_dbm: f64) -> f64 {
    db_to_linear(x_dbm)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChannelParams {
    /// Environment constant `a` of the elevation-angle LoS model.
    pub a: f64,
    /// Environment constant `b` of the elevation-angle LoS model.
    pub b: f64,
    pub fc_hz: f64,
    /// Path-loss exponent.
    pub alpha: f64,
    /// Excess loss in LoS, linear.
    pub eta_los: f64,
    /// Excess loss in NLoS, linear.
    pub eta_nlos: f64,
    pub noise_dbm: f64,
    pub tx_power_dbm: f64,
    pub bandwidth_hz: f64,
    pub snr_threshold_db: f64,
    /// C&C payload size in bits.
    pub cnc_bits: u32,
}

impl Default for ChannelParams {
    fn default() -> Self {
        Self {
            a: 9.61,
            b: 0.16,
            fc_hz: 5e9,
            alpha: 2.0,
            eta_los: db_to_linear(1.0),
            eta_nlos: db_to_linear(20.0),
            noise_dbm: -104.0,
            tx_power_dbm: 18.0,
            bandwidth_hz: 2e7,
            snr_threshold_db: 5.5,
            cnc_bits: 104 * 8,
        }
    }
}

impl ChannelParams {
    pub fn validate(&self) -> Result<(), ChannelError> {
        let positive = [
            ("a", self.a),
            ("b", self.b),
            ("fc_hz", self.fc_hz),
            ("alpha", self.alpha),
            ("bandwidth_hz", self.bandwidth_hz),
        ];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(ChannelError::InvalidParam {
                    name,
                    reason: "must be finite and strictly positive",
                });
            }
        }
        if !(self.eta_los >= 1.0) {
            return Err(ChannelError::InvalidParam {
                name: "eta_los",
                reason: "must be at least 1 (0 dB)",
            });
        }
        if !(self.eta_nlos >= self.eta_los) {
            return Err(ChannelError::InvalidParam {
                name: "eta_nlos",
                reason: "must not be below eta_los",
            });
        }
        for (name, v) in [
            ("noise_dbm", self.noise_dbm),
            ("tx_power_dbm", self.tx_power_dbm),
            ("snr_threshold_db", self.snr_threshold_db),
        ] {
            if !v.is_finite() {
                return Err(ChannelError::InvalidParam { name, reason: "must be finite" });
            }
        }
        if self.cnc_bits == 0 {
            return Err(ChannelError::InvalidParam {
                name: "cnc_bits",
                reason: "must be positive",
            });
        }
        Ok(())
    }

    pub fn snr_threshold(&self) -> f64 {
        db_to_linear(self.snr_threshold_db)
    }

    /// `(4 pi d f_c / c)^alpha`.
    pub fn free_space_factor(&self, distance_m: f64) -> f64 {
        (4.0 * PI * distance_m * self.fc_hz / SPEED_OF_LIGHT).powf(self.alpha)
    }

    /// Total path loss (linear, >= 1 for practical distances) for one state.
    pub fn path_loss(&self, distance_m: f64, is_los: bool) -> f64 {
        let eta = if is_los { self.eta_los } else { self.eta_nlos };
        self.free_space_factor(distance_m) * eta
    }

    /// Mean SNR (unit-mean fading) for one propagation state.
    pub fn mean_snr(&self, distance_m: f64, is_los: bool) -> f64 {
        dbm_to_mw(self.tx_power_dbm) / (self.path_loss(distance_m, is_los) * dbm_to_mw(self.noise_dbm))
    }

    /// Time to push `cnc_bits` through the link at the Shannon rate; `None` when the rate is zero.
    pub fn transmission_time(&self, snr_linear: f64) -> Option<f64> {
        let rate = self.bandwidth_hz * (snr_linear + 1.0).log2();
        (rate > 0.0).then(|| f64::from(self.cnc_bits) / rate)
    }

    pub fn decodes(&self, snr_linear: f64) -> bool {
        snr_linear > self.snr_threshold()
    }
}

/// One stochastic realization of the downlink for a single C&C transmission.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChannelDraw {
    pub is_los: bool,
    /// `|beta|^2`.
    pub fading_power: f64,
    pub snr_linear: f64,
    pub decoded: bool,
    /// `None` means the packet never arrives.
    pub tx_time_s: Option<f64>,
}

impl ChannelDraw {
    /// Decode flag and timing for a given SNR; propagation fields are left neutral.
    pub fn from_snr(snr_linear: f64, params: &ChannelParams) -> Self {
        Self {
            is_los: true,
            fading_power: 1.0,
            snr_linear,
            decoded: params.decodes(snr_linear),
            tx_time_s: params.transmission_time(snr_linear),
        }
    }

    /// Deterministic part of the channel: everything after LoS state and fading are fixed.
    pub fn realize(distance_m: f64, is_los: bool, fading_power: f64, params: &ChannelParams) -> Self {
        let gain = fading_power / params.path_loss(distance_m, is_los);
        let snr = dbm_to_mw(params.tx_power_dbm) * gain / dbm_to_mw(params.noise_dbm);
        Self {
            is_los,
            fading_power,
            ..Self::from_snr(snr, params)
        }
    }

    /// A draw that decodes and arrives after exactly `tx_time_s`.
    pub fn delivered(tx_time_s: f64) -> Self {
        Self {
            is_los: true,
            fading_power: 1.0,
            snr_linear: f64::INFINITY,
            decoded: true,
            tx_time_s: Some(tx_time_s),
        }
    }

    pub fn lost() -> Self {
        Self {
            is_los: false,
            fading_power: 0.0,
            snr_linear: 0.0,
            decoded: false,
            tx_time_s: None,
        }
    }

    /// Arrival offset of a decoded packet.
    pub fn arrival_delay(&self) -> Option<f64> {
        if self.decoded {
            self.tx_time_s
        } else {
            None
        }
    }
}

fn elevation(bs: Position, uav: Position) -> Result<(f64, f64), ChannelError> {
    let d = bs.distance(uav);
    if d == 0.0 {
        return Err(ChannelError::CoincidentEndpoints);
    }
    let h = uav.z - bs.z;
    if h < 0.0 {
        return Err(ChannelError::BelowBaseStation(-h));
    }
    debug_assert!(h <= d * (1.0 + 1e-12));
    let theta = (h / d).min(1.0).asin().to_degrees();
    Ok((d, theta))
}

/// Probability that the BS-to-UAV link is line-of-sight.
pub fn los_probability(bs: Position, uav: Position, params: &ChannelParams) -> Result<f64, ChannelError> {
    let (_, theta) = elevation(bs, uav)?;
    Ok(los_probability_at_elevation(theta, params))
}

/// LoS probability for an elevation angle in degrees.
pub fn los_probability_at_elevation(theta_deg: f64, params: &ChannelParams) -> f64 {
    1.0 / (1.0 + params.a * (-params.b * (theta_deg - params.a)).exp())
}

/// Draw LoS state and Rayleigh fading for one transmission.
pub fn sample_channel(
    bs: Position,
    uav: Position,
    params: &ChannelParams,
    rng: &mut SimRng,
) -> Result<ChannelDraw, ChannelError> {
    let (d, theta) = elevation(bs, uav)?;
    let p_los = los_probability_at_elevation(theta, params);
    let is_los = rng.random::<f64>() < p_los;
    let fading_power: f64 = rng.sample(Exp1);
    Ok(ChannelDraw::realize(d, is_los, fading_power, params))
}

/// Source of per-transmission channel outcomes.
pub trait Downlink {
    fn transmit(&mut self, uav: Position, rng: &mut SimRng) -> Result<ChannelDraw, ChannelError>;
}

/// The stochastic air-to-ground channel from a fixed base station.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RadioLink {
    pub bs: Position,
    pub params: ChannelParams,
}

impl Downlink for RadioLink {
    fn transmit(&mut self, uav: Position, rng: &mut SimRng) -> Result<ChannelDraw, ChannelError> {
        sample_channel(self.bs, uav, &self.params, rng)
    }
}

/// Every transmission decodes after a fixed delay.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct IdealLink {
    pub tx_time_s: f64,
}

impl Downlink for IdealLink {
    fn transmit(&mut self, _uav: Position, _rng: &mut SimRng) -> Result<ChannelDraw, ChannelError> {
        Ok(ChannelDraw::delivered(self.tx_time_s))
    }
}

/// Nothing ever decodes.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct DeadLink;

impl Downlink for DeadLink {
    fn transmit(&mut self, _uav: Position, _rng: &mut SimRng) -> Result<ChannelDraw, ChannelError> {
        Ok(ChannelDraw::lost())
    }
}

/// Replays a fixed list of outcomes, then reports losses.
#[derive(Debug, Clone, Default)]
pub struct ScriptedLink {
    outcomes: std::collections::VecDeque<ChannelDraw>,
}

impl ScriptedLink {
    pub fn new(outcomes: impl IntoIterator<Item = ChannelDraw>) -> Self {
        Self {
            outcomes: outcomes.into_iter().collect(),
        }
    }

    pub fn remaining(&self) -> usize {
        self.outcomes.len()
    }
}

impl Downlink for ScriptedLink {
    fn transmit(&mut self, _uav: Position, _rng: &mut SimRng) -> Result<ChannelDraw, ChannelError> {
        Ok(self.outcomes.pop_front().unwrap_or_else(ChannelDraw::lost))
    }
}

impl<L: Downlink + ?Sized> Downlink for &mut L {
    fn transmit(&mut self, uav: Position, rng: &mut SimRng) -> Result<ChannelDraw, ChannelError> {
        (**self).transmit(uav, rng)
    }
}
