//! The shared JSON run configuration.
//!
//! ```json
//! {
//!   "plant": { "gamma_p": 9.3, "k1": 0.338, "k4": 0.338 },
//!   "compensator": { "eta_K": 0.66, "eta_gamma": -0.664 },
//!   "environment": { "mu": 0.84, "phi": 0.0 },
//!   "sweep": { "grid_min": -46.5, "grid_max": 46.5, "grid_points": 1001 },
//!   "synthesis": { "target": "at_zero", "band_edge": 9.3, "eta_K_max": 4.0 },
//!   "emulation": { "detector_noise_seed": 7, "ramp_periods": 2.0 }
//! }
//! ```
//!
//! `plant` may instead be a geometry `{ "t_sq": [..4], "l_sq": .., "length_m": .. }`.
//! Only `plant` is always required; each command asks for the sections it
//! uses. Missing or mistyped fields are reported by their dotted path.

use serde::de::DeserializeOwned;
use serde_json::{Map, Value};

use crate::cavity::{CompensatorModel, PlantModel, RingCavityGeometry};
use crate::emulator::EmulationConfig;
use crate::error::{Error, Result};
use crate::loop_algebra::LoopEnvironment;
use crate::synthesis::{SynthesisOptions, Target, DEFAULT_ETA_K_MAX};

/// Default detuning grid: `±5γ_p` with 1001 points.
const DEFAULT_GRID_POINTS: usize = 1001;
const DEFAULT_GRID_SPAN: f64 = 5.0;

#[derive(Debug, Clone)]
pub struct RunConfig {
    root: Map<String, Value>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridSpec {
    pub min: f64,
    pub max: f64,
    pub points: usize,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SynthesisSpec {
    pub target: Target,
    pub options: SynthesisOptions,
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<Self> {
        match serde_json::from_str::<Value>(text)? {
            Value::Object(root) => Ok(RunConfig { root }),
            _ => Err(Error::validation("config", "top level must be a JSON object")),
        }
    }

    pub fn as_value(&self) -> Value {
        Value::Object(self.root.clone())
    }

    fn section(&self, name: &str) -> Result<Option<&Map<String, Value>>> {
        match self.root.get(name) {
            None | Some(Value::Null) => Ok(None),
            Some(Value::Object(m)) => Ok(Some(m)),
            Some(_) => Err(Error::validation(name, "must be a JSON object")),
        }
    }

    fn required_section(&self, name: &str) -> Result<&Map<String, Value>> {
        self.section(name)?
            .ok_or_else(|| Error::validation(name, "section is missing"))
    }

    pub fn plant(&self) -> Result<PlantModel> {
        let p = self.required_section("plant")?;
        if p.contains_key("t_sq") {
            let t_sq: [f64; 4] = typed(p, "plant", "t_sq")?;
            let l_sq = optional_number(p, "plant", "l_sq")?.unwrap_or(0.0);
            let length_m = number(p, "plant", "length_m")?;
            let geom = RingCavityGeometry::new(t_sq, l_sq, length_m)?;
            return PlantModel::from_geometry(&geom);
        }
        PlantModel::new(
            number(p, "plant", "gamma_p")?,
            number(p, "plant", "k1")?,
            number(p, "plant", "k4")?,
        )
    }

    pub fn eta_gamma(&self) -> Result<f64> {
        self.plant()?;
        number(self.required_section("compensator")?, "compensator", "eta_gamma")
    }

    pub fn compensator(&self) -> Result<CompensatorModel> {
        let plant = self.plant()?;
        let c = self.required_section("compensator")?;
        CompensatorModel::new(
            plant,
            number(c, "compensator", "eta_K")?,
            number(c, "compensator", "eta_gamma")?,
        )
    }

    pub fn environment(&self) -> Result<LoopEnvironment> {
        let e = self.required_section("environment")?;
        let mu = number(e, "environment", "mu")?;
        let phi = optional_number(e, "environment", "phi")?.unwrap_or(0.0);
        LoopEnvironment::new(mu, phi)
    }

    /// Sweep grid from the `sweep` section, falling back to `±5γ_p`.
    pub fn grid(&self, gamma_p: f64) -> Result<GridSpec> {
        let edge = DEFAULT_GRID_SPAN * gamma_p;
        let mut g = GridSpec {
            min: -edge,
            max: edge,
            points: DEFAULT_GRID_POINTS,
        };
        if let Some(s) = self.section("sweep")? {
            g.min = optional_number(s, "sweep", "grid_min")?.unwrap_or(g.min);
            g.max = optional_number(s, "sweep", "grid_max")?.unwrap_or(g.max);
            if s.contains_key("grid_points") {
                g.points = typed(s, "sweep", "grid_points")?;
            }
        }
        Ok(g)
    }

    pub fn synthesis(&self) -> Result<SynthesisSpec> {
        let mut options = SynthesisOptions {
            eta_k_max: DEFAULT_ETA_K_MAX,
            report_band: None,
        };
        let mut target = Target::AtZero;
        if let Some(s) = self.section("synthesis")? {
            options.eta_k_max = optional_number(s, "synthesis", "eta_K_max")?.unwrap_or(DEFAULT_ETA_K_MAX);
            options.report_band = optional_number(s, "synthesis", "band_edge")?;
            let name: Option<String> = if s.contains_key("target") {
                Some(typed(s, "synthesis", "target")?)
            } else {
                None
            };
            match name.as_deref() {
                None | Some("at_zero") | Some("AT_ZERO") => {}
                Some("band") | Some("BAND") => {
                    let edge = options.report_band.ok_or_else(|| {
                        Error::validation("synthesis.band_edge", "required when target is band")
                    })?;
                    target = Target::Band(edge);
                }
                Some(other) => {
                    return Err(Error::validation(
                        "synthesis.target",
                        format!("unknown target {other:?}; expected at_zero or band"),
                    ))
                }
            }
        }
        Ok(SynthesisSpec { target, options })
    }

    /// Emulation settings; absent fields take the library defaults.
    pub fn emulation(&self) -> Result<EmulationConfig> {
        let Some(s) = self.section("emulation")? else {
            return Ok(EmulationConfig::default());
        };
        let mut inner = s.clone();
        inner.remove("ramp_periods");
        inner.remove("eta_K_points");
        let cfg: EmulationConfig = serde_json::from_value(Value::Object(inner))
            .map_err(|e| Error::validation("emulation", e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Number of feedback-phase periods covered by the phase-scan ramp.
    pub fn ramp_periods(&self) -> Result<f64> {
        let periods = match self.section("emulation")? {
            Some(s) => optional_number(s, "emulation", "ramp_periods")?.unwrap_or(2.0),
            None => 2.0,
        };
        if !(periods > 0.0 && periods.is_finite()) {
            return Err(Error::validation("emulation.ramp_periods", "must be > 0"));
        }
        Ok(periods)
    }

    /// Gains for the parametric scenario: `emulation.eta_K_points`, or
    /// twelve evenly spaced values over the reference range.
    pub fn parametric_gains(&self) -> Result<Vec<f64>> {
        if let Some(s) = self.section("emulation")? {
            if s.contains_key("eta_K_points") {
                let v: Vec<f64> = typed(s, "emulation", "eta_K_points")?;
                if v.is_empty() {
                    return Err(Error::validation("emulation.eta_K_points", "is empty"));
                }
                return Ok(v);
            }
        }
        let (lo, hi) = crate::apparatus::ETA_K_RANGE;
        crate::trace::linear_grid(lo, hi, 12)
    }
}

fn typed<T: DeserializeOwned>(m: &Map<String, Value>, section: &str, key: &str) -> Result<T> {
    let path = format!("{section}.{key}");
    let v = m
        .get(key)
        .ok_or_else(|| Error::validation(&path, "field is missing"))?;
    serde_json::from_value(v.clone()).map_err(|e| Error::validation(path, e.to_string()))
}

fn number(m: &Map<String, Value>, section: &str, key: &str) -> Result<f64> {
    typed(m, section, key)
}

fn optional_number(m: &Map<String, Value>, section: &str, key: &str) -> Result<Option<f64>> {
    match m.get(key) {
        None | Some(Value::Null) => Ok(None),
        Some(_) => typed(m, section, key).map(Some),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn missing_field_is_named() {
        let cfg = RunConfig::parse(r#"{"plant": {"k1": 0.3, "k4": 0.3}}"#).unwrap();
        let msg = cfg.plant().unwrap_err().to_string();
        assert!(msg.contains("plant.gamma_p"), "{msg}");
        let cfg = RunConfig::parse(r#"{"plant": {"gamma_p": "x", "k1": 0.3, "k4": 0.3}}"#).unwrap();
        assert!(cfg.plant().unwrap_err().to_string().contains("plant.gamma_p"));
    }

    #[test]
    fn geometry_and_rate_forms_agree() {
        let geo = RunConfig::parse(
            r#"{"plant": {"t_sq": [0.002, 0.02, 0.0307, 0.002], "length_m": 0.141}}"#,
        )
        .unwrap()
        .plant()
        .unwrap();
        let rates = RunConfig::parse(&format!(
            r#"{{"plant": {{"gamma_p": {}, "k1": {}, "k4": {}}}}}"#,
            geo.gamma_p(),
            geo.k1(),
            geo.k4()
        ))
        .unwrap()
        .plant()
        .unwrap();
        assert_eq!(geo, rates);
    }

    #[test]
    fn defaults_and_overrides() {
        let cfg = RunConfig::parse(
            r#"{"plant": {"gamma_p": 9.3, "k1": 0.3, "k4": 0.3},
                "sweep": {"grid_points": 11},
                "synthesis": {"target": "band", "band_edge": 9.3},
                "emulation": {"detector_noise_seed": 5, "ramp_periods": 3}}"#,
        )
        .unwrap();
        let g = cfg.grid(9.3).unwrap();
        assert_eq!((g.min, g.max, g.points), (-46.5, 46.5, 11));
        assert_eq!(cfg.synthesis().unwrap().target, Target::Band(9.3));
        assert_eq!(cfg.emulation().unwrap().detector_noise_seed, 5);
        assert_eq!(cfg.ramp_periods().unwrap(), 3.0);
        assert_eq!(cfg.parametric_gains().unwrap().len(), 12);
        assert!(cfg.environment().is_err());
    }
}
