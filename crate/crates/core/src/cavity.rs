//! First-order resonator models.
//!
//! Rates and frequencies are in MHz throughout: with `c` in m/s and the
//! round-trip length in metres, `c·Σt²/(4πL)` is in Hz and is scaled by
//! 1e-6. The Laplace variable is `s = iδ` with `δ` the detuning from the
//! plant resonance in the same unit.

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Speed of light in vacuum, m/s.
pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;

const HZ_PER_MHZ: f64 = 1e6;

/// Relative distance from a pole below which evaluation is refused.
const POLE_TOLERANCE: f64 = 1e-12;

/// Mirror and loss description of a four-mirror ring resonator.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawGeometry")]
pub struct RingCavityGeometry {
    t_sq: [f64; 4],
    l_sq: f64,
    length_m: f64,
}

#[derive(Deserialize)]
struct RawGeometry {
    t_sq: [f64; 4],
    #[serde(default)]
    l_sq: f64,
    length_m: f64,
}

impl TryFrom<RawGeometry> for RingCavityGeometry {
    type Error = Error;

    fn try_from(raw: RawGeometry) -> Result<Self> {
        RingCavityGeometry::new(raw.t_sq, raw.l_sq, raw.length_m)
    }
}

impl RingCavityGeometry {
    /// `t_sq` are the mirror power transmissions, `l_sq` the lumped
    /// intracavity loss, `length_m` the round-trip length.
    pub fn new(t_sq: [f64; 4], l_sq: f64, length_m: f64) -> Result<Self> {
        for (i, t) in t_sq.iter().enumerate() {
            if !(0.0..=1.0).contains(t) {
                return Err(Error::validation(
                    format!("t_sq[{i}]"),
                    format!("power transmission {t} outside [0, 1]"),
                ));
            }
        }
        if !(l_sq >= 0.0 && l_sq.is_finite()) {
            return Err(Error::validation("l_sq", format!("loss {l_sq} must be >= 0")));
        }
        if !(length_m > 0.0 && length_m.is_finite()) {
            return Err(Error::validation(
                "length_m",
                format!("round-trip length {length_m} must be > 0"),
            ));
        }
        if t_sq.iter().sum::<f64>() + l_sq <= 0.0 {
            return Err(Error::validation(
                "t_sq",
                "total loss is zero; the cavity would not decay",
            ));
        }
        Ok(RingCavityGeometry {
            t_sq,
            l_sq,
            length_m,
        })
    }

    pub fn t_sq(&self) -> [f64; 4] {
        self.t_sq
    }

    pub fn l_sq(&self) -> f64 {
        self.l_sq
    }

    pub fn length_m(&self) -> f64 {
        self.length_m
    }

    /// Rate contributed by a power loss `fraction` per round trip.
    fn rate_for(&self, fraction: f64) -> f64 {
        rate_from_loss(fraction, self.length_m)
    }

    /// Rate attributable to the intracavity loss term alone.
    pub fn loss_rate(&self) -> f64 {
        self.rate_for(self.l_sq)
    }
}

/// `c·fraction/(4π·length)` in MHz.
pub fn rate_from_loss(fraction: f64, length_m: f64) -> f64 {
    SPEED_OF_LIGHT * fraction / (4.0 * PI * length_m) / HZ_PER_MHZ
}

/// Total round-trip power loss that produces `rate` (MHz) in a cavity of
/// round-trip length `length_m`. Inverse of [`rate_from_loss`].
pub fn loss_budget_for_rate(rate: f64, length_m: f64) -> f64 {
    rate * HZ_PER_MHZ * 4.0 * PI * length_m / SPEED_OF_LIGHT
}

/// Total amplitude decay rate of the cavity, MHz.
pub fn decay_rate_from_geometry(geom: &RingCavityGeometry) -> f64 {
    geom.rate_for(geom.t_sq.iter().sum::<f64>() + geom.l_sq)
}

/// Partial rate of mirror `mirror_index` (0-based), MHz.
pub fn coupler_rate_from_geometry(geom: &RingCavityGeometry, mirror_index: usize) -> Result<f64> {
    let t = geom.t_sq.get(mirror_index).ok_or_else(|| {
        Error::validation(
            "mirror_index",
            format!("{mirror_index} out of range 0..=3"),
        )
    })?;
    Ok(geom.rate_for(*t))
}

/// Rate-level plant: total decay `gamma_p` with input (`k1`) and output
/// (`k4`) coupler partial rates.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawPlant")]
pub struct PlantModel {
    gamma_p: f64,
    k1: f64,
    k4: f64,
}

#[derive(Deserialize)]
struct RawPlant {
    gamma_p: f64,
    k1: f64,
    k4: f64,
}

impl TryFrom<RawPlant> for PlantModel {
    type Error = Error;

    fn try_from(raw: RawPlant) -> Result<Self> {
        PlantModel::new(raw.gamma_p, raw.k1, raw.k4)
    }
}

/// Plant transfer-function channels, named output-input.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Channel {
    /// Noise input to monitored output.
    ZW,
    /// Feedback input to monitored output.
    ZU,
    /// Noise input to error beam (reflection off the input coupler).
    YW,
    /// Feedback input to error beam.
    YU,
}

impl PlantModel {
    /// Fails with [`Error::InfeasibleIdeal`] when `2(k1 + k4) >= gamma_p`,
    /// since no resonator can then realise the ideal compensator.
    pub fn new(gamma_p: f64, k1: f64, k4: f64) -> Result<Self> {
        if !(gamma_p > 0.0 && gamma_p.is_finite()) {
            return Err(Error::validation("gamma_p", format!("{gamma_p} must be > 0")));
        }
        for (name, k) in [("k1", k1), ("k4", k4)] {
            if !(k >= 0.0 && k.is_finite()) {
                return Err(Error::validation(name, format!("{k} must be >= 0")));
            }
        }
        let coupling = 2.0 * (k1 + k4);
        if coupling >= gamma_p {
            return Err(Error::InfeasibleIdeal { coupling, gamma_p });
        }
        Ok(PlantModel { gamma_p, k1, k4 })
    }

    /// Mirror 0 is the input coupler and mirror 3 the output coupler.
    pub fn from_geometry(geom: &RingCavityGeometry) -> Result<Self> {
        PlantModel::new(
            decay_rate_from_geometry(geom),
            coupler_rate_from_geometry(geom, 0)?,
            coupler_rate_from_geometry(geom, 3)?,
        )
    }

    pub fn gamma_p(&self) -> f64 {
        self.gamma_p
    }

    pub fn k1(&self) -> f64 {
        self.k1
    }

    pub fn k4(&self) -> f64 {
        self.k4
    }

    /// Decay rate the ideal compensator must have: `gamma_p - 2(k1 + k4)`.
    pub fn ideal_controller_rate(&self) -> f64 {
        self.gamma_p - 2.0 * (self.k1 + self.k4)
    }

    pub fn tf(&self, channel: Channel, s: Complex64) -> Result<Complex64> {
        let denom = check_pole("plant transfer function", s, self.gamma_p)?;
        Ok(match channel {
            Channel::ZW | Channel::YU => -2.0 * (self.k1 * self.k4).sqrt() / denom,
            Channel::ZU => 1.0 - 2.0 * self.k4 / denom,
            Channel::YW => 1.0 - 2.0 * self.k1 / denom,
        })
    }
}

/// Free-function form of [`PlantModel::tf`].
pub fn plant_tf(plant: &PlantModel, channel: Channel, s: Complex64) -> Result<Complex64> {
    plant.tf(channel, s)
}

/// Returns `s + pole`, or an error when `s` sits on `-pole`.
fn check_pole(what: &'static str, s: Complex64, pole: f64) -> Result<Complex64> {
    let denom = s + pole;
    if denom.norm() <= POLE_TOLERANCE * pole.abs().max(1.0) {
        return Err(Error::Pole { what, s, pole: -pole });
    }
    Ok(denom)
}

/// Gain and decay-rate mismatch of a resonator compensator, as stored in
/// config files. Combine with a plant via [`CompensatorModel::new`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CompensatorParams {
    #[serde(rename = "eta_K")]
    pub eta_k: f64,
    pub eta_gamma: f64,
}

/// Resonator compensator
/// `K_uy(s) = 2√η_K √(k1k4) / (s + γ_p − 2(k1+k4) + η_γ)` referenced to a
/// plant.
///
/// A non-positive pole is accepted; check [`CompensatorModel::is_stable`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CompensatorModel {
    #[serde(rename = "eta_K")]
    eta_k: f64,
    eta_gamma: f64,
    plant: PlantModel,
}

impl CompensatorModel {
    pub fn new(plant: PlantModel, eta_k: f64, eta_gamma: f64) -> Result<Self> {
        if !(eta_k >= 0.0 && eta_k.is_finite()) {
            return Err(Error::validation("eta_K", format!("{eta_k} must be >= 0")));
        }
        if !eta_gamma.is_finite() {
            return Err(Error::validation("eta_gamma", "must be finite"));
        }
        Ok(CompensatorModel {
            eta_k,
            eta_gamma,
            plant,
        })
    }

    pub fn from_params(plant: PlantModel, params: CompensatorParams) -> Result<Self> {
        CompensatorModel::new(plant, params.eta_k, params.eta_gamma)
    }

    pub fn params(&self) -> CompensatorParams {
        CompensatorParams {
            eta_k: self.eta_k,
            eta_gamma: self.eta_gamma,
        }
    }

    pub fn eta_k(&self) -> f64 {
        self.eta_k
    }

    pub fn eta_gamma(&self) -> f64 {
        self.eta_gamma
    }

    pub fn plant(&self) -> &PlantModel {
        &self.plant
    }

    pub fn with_eta_k(&self, eta_k: f64) -> Result<Self> {
        CompensatorModel::new(self.plant, eta_k, self.eta_gamma)
    }

    /// Absolute controller decay rate `γ_c = γ_p − 2(k1+k4) + η_γ`.
    pub fn controller_rate(&self) -> f64 {
        self.plant.ideal_controller_rate() + self.eta_gamma
    }

    pub fn is_stable(&self) -> bool {
        self.controller_rate() > 0.0
    }

    pub fn tf(&self, s: Complex64) -> Result<Complex64> {
        let denom = check_pole("compensator transfer function", s, self.controller_rate())?;
        let p = &self.plant;
        Ok(2.0 * self.eta_k.sqrt() * (p.k1 * p.k4).sqrt() / denom)
    }

    /// `K_uy(s) / G_zw(s)` in closed form, `−√η_K (s+γ_p)/(s+γ_c)`.
    /// Finite even when `k1·k4 = 0`.
    pub(crate) fn gain_over_plant(&self, s: Complex64) -> Result<Complex64> {
        let plant_denom = check_pole("plant transfer function", s, self.plant.gamma_p)?;
        let comp_denom = check_pole("compensator transfer function", s, self.controller_rate())?;
        Ok(-self.eta_k.sqrt() * plant_denom / comp_denom)
    }
}

/// Free-function form of [`CompensatorModel::tf`].
pub fn compensator_tf(comp: &CompensatorModel, s: Complex64) -> Result<Complex64> {
    comp.tf(s)
}
