//! Synthetic measurement traces: swept-sine spectra, feedback-phase ramps
//! and the phase-lock error signal.
//!
//! Powers are relative to the noise input power. The detector adds an
//! electronic floor (a fraction of the open-loop resonant power) and
//! multiplicative gaussian noise; sidebands used for frequency calibration
//! are additive replicas of the response shifted by `±sideband_offset`.

use std::io::Write;

use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::cavity::{Channel, CompensatorModel, PlantModel};
use crate::estimation::{predict_parametric_point, ParametricDataset, ParametricPoint};
use crate::error::{Error, Result};
use crate::loop_algebra::{power_ratio, power_ratio_at, LoopEnvironment};
use crate::optimize::{bisect, golden_section};
use crate::trace::{linear_grid, FrequencyTrace, TraceKind, TraceValues};

/// Phase step of the central difference behind the lock error signal.
pub const ERROR_SIGNAL_STEP: f64 = 1e-4;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EmulationConfig {
    /// Electronic floor as a fraction of the open-loop resonant power.
    pub noise_floor: f64,
    /// Calibration sideband detuning, MHz. A sideband stands out as its
    /// own maximum only when this is several linewidths and the depth is
    /// not small; otherwise it is a shoulder on the carrier's wing.
    pub sideband_offset: f64,
    /// Sideband power relative to the carrier, `[0, 1)`.
    pub sideband_depth: f64,
    /// Relative standard deviation of the multiplicative detector noise.
    pub detector_noise: f64,
    pub detector_noise_seed: u64,
    pub sample_count: usize,
    /// Half-width of the swept-sine detuning range, MHz.
    pub span: f64,
}

impl Default for EmulationConfig {
    fn default() -> Self {
        EmulationConfig {
            noise_floor: 0.005,
            sideband_offset: 30.0,
            sideband_depth: 0.3,
            detector_noise: 0.01,
            detector_noise_seed: 0,
            sample_count: 1201,
            span: 60.0,
        }
    }
}

impl EmulationConfig {
    /// No floor, no sidebands, no detector noise.
    pub fn noiseless() -> Self {
        EmulationConfig {
            noise_floor: 0.0,
            sideband_depth: 0.0,
            detector_noise: 0.0,
            ..Default::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let nonneg = |name: &str, v: f64| {
            if v >= 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(Error::validation(name, format!("{v} must be >= 0")))
            }
        };
        nonneg("noise_floor", self.noise_floor)?;
        nonneg("detector_noise", self.detector_noise)?;
        nonneg("sideband_offset", self.sideband_offset)?;
        if !(0.0..1.0).contains(&self.sideband_depth) {
            return Err(Error::validation(
                "sideband_depth",
                format!("{} outside [0, 1)", self.sideband_depth),
            ));
        }
        if self.sample_count < 2 {
            return Err(Error::validation(
                "sample_count",
                format!("{} must be > 1", self.sample_count),
            ));
        }
        if !(self.span > 0.0 && self.span.is_finite()) {
            return Err(Error::validation("span", format!("{} must be > 0", self.span)));
        }
        Ok(())
    }
}

struct Detector {
    rng: ChaCha8Rng,
    relative_noise: f64,
    floor: f64,
}

impl Detector {
    fn new(cfg: &EmulationConfig, resonant_power: f64) -> Self {
        Detector {
            rng: ChaCha8Rng::seed_from_u64(cfg.detector_noise_seed),
            relative_noise: cfg.detector_noise,
            floor: cfg.noise_floor * resonant_power,
        }
    }

    fn detect(&mut self, power: f64) -> f64 {
        let total = power + self.floor;
        if self.relative_noise == 0.0 {
            return total;
        }
        let n: f64 = StandardNormal.sample(&mut self.rng);
        total * (1.0 + self.relative_noise * n)
    }
}

fn open_power(comp: &CompensatorModel, detuning: f64) -> Result<f64> {
    Ok(comp
        .plant()
        .tf(Channel::ZW, Complex64::new(0.0, detuning))?
        .norm_sqr())
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweptSine {
    /// Detected `|G_zw|²` with sidebands.
    pub open: FrequencyTrace,
    /// Detected closed-loop output power with sidebands.
    pub closed: FrequencyTrace,
    /// Floor-subtracted closed/open ratio.
    pub ratio: FrequencyTrace,
}

impl SweptSine {
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["detuning_MHz", "open_loop_power", "closed_loop_power", "power_ratio"])?;
        let (open, closed, ratio) = (
            self.open.real().unwrap_or_default(),
            self.closed.real().unwrap_or_default(),
            self.ratio.real().unwrap_or_default(),
        );
        for (i, d) in self.open.grid().iter().enumerate() {
            w.write_record([d, &open[i], &closed[i], &ratio[i]].map(|v| v.to_string()))?;
        }
        w.flush().map_err(|e| Error::io("<csv>", e))?;
        Ok(())
    }
}

/// Swept-sine measurement over `[-span, span]` with `sample_count` points.
pub fn emulate_swept_sine(
    comp: &CompensatorModel,
    env: &LoopEnvironment,
    cfg: &EmulationConfig,
) -> Result<SweptSine> {
    cfg.validate()?;
    let grid = linear_grid(-cfg.span, cfg.span, cfg.sample_count)?;
    let resonant = open_power(comp, 0.0)?;

    let with_sidebands = |f: &dyn Fn(f64) -> Result<f64>, d: f64| -> Result<f64> {
        let mut p = f(d)?;
        if cfg.sideband_depth > 0.0 {
            p += cfg.sideband_depth * (f(d - cfg.sideband_offset)? + f(d + cfg.sideband_offset)?);
        }
        Ok(p)
    };
    let open_fn = |d: f64| open_power(comp, d);
    let closed_fn = |d: f64| Ok(power_ratio_at(comp, env, d)? * open_power(comp, d)?);

    let mut detector = Detector::new(cfg, resonant);
    let mut open = Vec::with_capacity(grid.len());
    let mut closed = Vec::with_capacity(grid.len());
    for &d in &grid {
        open.push(detector.detect(with_sidebands(&open_fn, d)?));
    }
    for &d in &grid {
        closed.push(detector.detect(with_sidebands(&closed_fn, d)?));
    }
    let ratio = open
        .iter()
        .zip(&closed)
        .map(|(o, c)| (c - detector.floor) / (o - detector.floor))
        .collect();

    Ok(SweptSine {
        open: FrequencyTrace::new(grid.clone(), TraceValues::Real(open), TraceKind::Power)?,
        closed: FrequencyTrace::new(grid.clone(), TraceValues::Real(closed), TraceKind::Power)?,
        ratio: FrequencyTrace::new(grid, TraceValues::Real(ratio), TraceKind::PowerRatio)?,
    })
}

/// Output power while the feedback phase is ramped, on resonance.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PhaseRampTrace {
    pub phi: Vec<f64>,
    pub power: Vec<f64>,
    /// Detected open-loop level (flat reference).
    pub open_level: f64,
    /// Electronic floor (flat reference).
    pub floor_level: f64,
}

impl PhaseRampTrace {
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["sample", "phi_rad", "output_power", "open_loop_power", "noise_floor"])?;
        for (i, (phi, p)) in self.phi.iter().zip(&self.power).enumerate() {
            w.write_record([
                i.to_string(),
                phi.to_string(),
                p.to_string(),
                self.open_level.to_string(),
                self.floor_level.to_string(),
            ])?;
        }
        w.flush().map_err(|e| Error::io("<csv>", e))?;
        Ok(())
    }
}

/// `n` evenly spaced phases over `[start, start + 2π·periods]`.
pub fn phase_ramp(start: f64, periods: f64, n: usize) -> Result<Vec<f64>> {
    linear_grid(start, start + std::f64::consts::TAU * periods, n)
}

fn check_ramp(ramp: &[f64]) -> Result<()> {
    if ramp.len() < 2 {
        return Err(Error::validation("ramp", "needs at least two samples"));
    }
    let up = ramp[1] > ramp[0];
    let monotone = ramp
        .windows(2)
        .all(|w| if up { w[1] > w[0] } else { w[1] < w[0] });
    if !monotone || ramp.iter().any(|p| !p.is_finite()) {
        return Err(Error::validation("ramp", "phase must vary strictly monotonically"));
    }
    Ok(())
}

pub fn emulate_phase_scan(
    comp: &CompensatorModel,
    mu: f64,
    cfg: &EmulationConfig,
    ramp: &[f64],
) -> Result<PhaseRampTrace> {
    cfg.validate()?;
    check_ramp(ramp)?;
    let resonant = open_power(comp, 0.0)?;
    let mut detector = Detector::new(cfg, resonant);
    let env = LoopEnvironment::new(mu, 0.0)?;
    let power = ramp
        .iter()
        .map(|&phi| {
            let r = power_ratio(comp, &env.with_phi(phi)?, Complex64::new(0.0, 0.0))?;
            Ok(detector.detect(r * resonant))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(PhaseRampTrace {
        phi: ramp.to_vec(),
        power,
        open_level: resonant + detector.floor,
        floor_level: detector.floor,
    })
}

/// Phase-lock error signal: derivative of the resonant power ratio with
/// respect to feedback phase, by central difference.
pub fn lock_error_signal(comp: &CompensatorModel, mu: f64, phi: f64) -> Result<f64> {
    let env = LoopEnvironment::new(mu, 0.0)?;
    let at = |p: f64| power_ratio(comp, &env.with_phi(p)?, Complex64::new(0.0, 0.0));
    Ok((at(phi + ERROR_SIGNAL_STEP)? - at(phi - ERROR_SIGNAL_STEP)?) / (2.0 * ERROR_SIGNAL_STEP))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LockTrace {
    pub phi: Vec<f64>,
    pub power_ratio: Vec<f64>,
    pub error: Vec<f64>,
}

impl LockTrace {
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["phi_rad", "power_ratio", "error_signal"])?;
        for i in 0..self.phi.len() {
            w.write_record([self.phi[i], self.power_ratio[i], self.error[i]].map(|v| v.to_string()))?;
        }
        w.flush().map_err(|e| Error::io("<csv>", e))?;
        Ok(())
    }

    /// Rows `i` where the error signal is zero or changes sign between
    /// `i` and `i + 1`; the row with the smaller power is reported.
    pub fn zero_crossing_rows(&self) -> Vec<usize> {
        let mut rows = Vec::new();
        let e = &self.error;
        for i in 0..e.len() {
            if e[i] == 0.0 {
                rows.push(i);
            } else if i + 1 < e.len() && e[i + 1] != 0.0 && e[i].signum() != e[i + 1].signum() {
                let pick = if self.power_ratio[i + 1] < self.power_ratio[i] { i + 1 } else { i };
                rows.push(pick);
            }
        }
        rows.dedup();
        rows
    }
}

/// Noiseless resonant power ratio and error signal along `ramp`.
pub fn emulate_lock(comp: &CompensatorModel, mu: f64, ramp: &[f64]) -> Result<LockTrace> {
    check_ramp(ramp)?;
    let env = LoopEnvironment::new(mu, 0.0)?;
    let mut power = Vec::with_capacity(ramp.len());
    let mut error = Vec::with_capacity(ramp.len());
    for &phi in ramp {
        power.push(power_ratio(comp, &env.with_phi(phi)?, Complex64::new(0.0, 0.0))?);
        error.push(lock_error_signal(comp, mu, phi)?);
    }
    Ok(LockTrace {
        phi: ramp.to_vec(),
        power_ratio: power,
        error,
    })
}

/// Phase of minimum resonant output: dense scan over one period, then
/// golden-section refinement around the best sample.
pub fn minimum_phase(comp: &CompensatorModel, mu: f64) -> Result<f64> {
    const SCAN: usize = 720;
    let env = LoopEnvironment::new(mu, 0.0)?;
    let at = |p: f64| power_ratio(comp, &env.with_phi(p)?, Complex64::new(0.0, 0.0));
    let step = std::f64::consts::TAU / SCAN as f64;
    let mut best = (0.0, at(0.0)?);
    for i in 1..SCAN {
        let p = step * i as f64;
        let v = at(p)?;
        if v < best.1 {
            best = (p, v);
        }
    }
    let refined = golden_section(at, best.0 - step, best.0 + step, 1e-10)?;
    Ok(refined.x)
}

/// Phase near `guess` where the error signal crosses zero, searched in
/// `guess ± half_width`. `None` if the signal does not change sign there.
pub fn lock_point(comp: &CompensatorModel, mu: f64, guess: f64, half_width: f64) -> Result<Option<f64>> {
    // evaluation errors surface before the bisection
    lock_error_signal(comp, mu, guess - half_width)?;
    lock_error_signal(comp, mu, guess + half_width)?;
    Ok(bisect(
        |p| lock_error_signal(comp, mu, p).unwrap_or(f64::NAN),
        guess - half_width,
        guess + half_width,
        1e-12,
    ))
}

/// Resonant `(max, min)` ratios for each gain in `eta_ks`, with the
/// detector's relative noise applied to each ratio. The floor and
/// sidebands play no part here.
pub fn emulate_parametric(
    plant: &PlantModel,
    eta_gamma: f64,
    mu: f64,
    eta_ks: &[f64],
    cfg: &EmulationConfig,
) -> Result<ParametricDataset> {
    cfg.validate()?;
    let mut detector = Detector::new(
        &EmulationConfig {
            noise_floor: 0.0,
            ..*cfg
        },
        0.0,
    );
    let mut points = Vec::with_capacity(eta_ks.len());
    for &eta_k in eta_ks {
        let (max, min) = predict_parametric_point(plant, eta_gamma, mu, eta_k)?;
        let ratio_max = detector.detect(max);
        let ratio_min = detector.detect(min);
        points.push(ParametricPoint {
            eta_k,
            ratio_max,
            ratio_min,
        });
    }
    ParametricDataset::new(points, plant.gamma_p())
}
