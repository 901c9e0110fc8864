//! Closed-loop composition with imperfect mode matching and a continuous
//! feedback phase.
//!
//! The compensator enters the loop as `e^{iφ}·K_uy`. Only the fraction
//! `√μ` of the fed-back field overlaps the plant mode, so the loop gain is
//! `L = e^{iφ}√μ·K_uy·G_yu`, and the monitored-output power relative to the
//! open-loop plant is
//!
//! ```text
//! |S_μ/G_zw|² = |1 + √μ·S_m|² + (1 − μ)·|S_u|²
//! S_m = G_zw⁻¹·G_zu·(1 − L)⁻¹·e^{iφ}K_uy·G_yw
//! S_u = G_zw⁻¹·e^{iφ}K_uy·G_yw
//! ```
//!
//! `φ = 0` is negative feedback (destructive interference at the output).

use std::f64::consts::{PI, TAU};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::cavity::{Channel, CompensatorModel};
use crate::error::{Error, Result};
use crate::trace::{validate_grid, FrequencyTrace, TraceKind, TraceValues};

/// `|1 − L|` below this is reported as an algebraic loop.
pub const LOOP_SINGULARITY_TOLERANCE: f64 = 1e-9;

/// Mode matching `mu ∈ [0, 1]` and feedback phase `phi ∈ [0, 2π)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawEnvironment")]
pub struct LoopEnvironment {
    mu: f64,
    phi: f64,
}

#[derive(Deserialize)]
struct RawEnvironment {
    mu: f64,
    #[serde(default)]
    phi: f64,
}

impl TryFrom<RawEnvironment> for LoopEnvironment {
    type Error = Error;

    fn try_from(raw: RawEnvironment) -> Result<Self> {
        LoopEnvironment::new(raw.mu, raw.phi)
    }
}

impl LoopEnvironment {
    /// `phi` is wrapped into `[0, 2π)`.
    pub fn new(mu: f64, phi: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&mu) {
            return Err(Error::validation("mu", format!("{mu} outside [0, 1]")));
        }
        if !phi.is_finite() {
            return Err(Error::validation("phi", "must be finite"));
        }
        let mut phi = phi.rem_euclid(TAU);
        if phi >= TAU {
            phi = 0.0;
        }
        Ok(LoopEnvironment { mu, phi })
    }

    pub fn mu(&self) -> f64 {
        self.mu
    }

    pub fn phi(&self) -> f64 {
        self.phi
    }

    pub fn with_phi(&self, phi: f64) -> Result<Self> {
        LoopEnvironment::new(self.mu, phi)
    }
}

/// Intermediate loop quantities at one frequency.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LoopTerms {
    /// Mode-matched loop gain `e^{iφ}√μ·K_uy·G_yu`.
    pub loop_gain: Complex64,
    pub s_m: Complex64,
    pub s_u: Complex64,
}

pub fn loop_terms(comp: &CompensatorModel, env: &LoopEnvironment, s: Complex64) -> Result<LoopTerms> {
    let plant = comp.plant();
    let rotation = Complex64::from_polar(1.0, env.phi);
    let g_zu = plant.tf(Channel::ZU, s)?;
    let g_yw = plant.tf(Channel::YW, s)?;
    let g_yu = plant.tf(Channel::YU, s)?;
    let k = rotation * comp.tf(s)?;
    let loop_gain = env.mu.sqrt() * k * g_yu;
    let return_difference = check_loop(s, loop_gain)?;
    let s_u = rotation * comp.gain_over_plant(s)? * g_yw;
    Ok(LoopTerms {
        loop_gain,
        s_m: g_zu * s_u / return_difference,
        s_u,
    })
}

fn check_loop(s: Complex64, loop_gain: Complex64) -> Result<Complex64> {
    let d = Complex64::new(1.0, 0.0) - loop_gain;
    if d.norm() < LOOP_SINGULARITY_TOLERANCE {
        return Err(Error::AlgebraicLoop {
            s,
            magnitude: d.norm(),
            tolerance: LOOP_SINGULARITY_TOLERANCE,
        });
    }
    Ok(d)
}

/// Closed-loop transfer function from noise input to monitored output,
/// `G_zw + G_zu(1 − e^{iφ}√μ K_uy G_yu)⁻¹ e^{iφ}K_uy G_yw`.
pub fn closed_loop_tf(comp: &CompensatorModel, env: &LoopEnvironment, s: Complex64) -> Result<Complex64> {
    let plant = comp.plant();
    let rotation = Complex64::from_polar(1.0, env.phi);
    let g_zw = plant.tf(Channel::ZW, s)?;
    let g_zu = plant.tf(Channel::ZU, s)?;
    let g_yw = plant.tf(Channel::YW, s)?;
    let g_yu = plant.tf(Channel::YU, s)?;
    let k = rotation * comp.tf(s)?;
    let return_difference = check_loop(s, env.mu.sqrt() * k * g_yu)?;
    Ok(g_zw + g_zu / return_difference * k * g_yw)
}

/// Closed-loop to open-loop output power ratio, mode-matching corrected.
pub fn power_ratio(comp: &CompensatorModel, env: &LoopEnvironment, s: Complex64) -> Result<f64> {
    let t = loop_terms(comp, env, s)?;
    let matched = Complex64::new(1.0, 0.0) + env.mu.sqrt() * t.s_m;
    Ok(matched.norm_sqr() + (1.0 - env.mu) * t.s_u.norm_sqr())
}

/// Power ratio at `s = iδ`.
pub fn power_ratio_at(comp: &CompensatorModel, env: &LoopEnvironment, detuning: f64) -> Result<f64> {
    power_ratio(comp, env, Complex64::new(0.0, detuning))
}

/// `10·log10(ratio)`.
pub fn to_db(ratio: f64) -> f64 {
    10.0 * ratio.log10()
}

fn sample<T>(grid: &[f64], mut f: impl FnMut(f64) -> Result<T>) -> Result<Vec<T>> {
    validate_grid(grid)?;
    grid.iter()
        .enumerate()
        .map(|(index, &d)| {
            f(d).map_err(|e| Error::AtGridPoint {
                index,
                detuning: d,
                source: Box::new(e),
            })
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct Sweep {
    pub ratio: FrequencyTrace,
    /// `|G_zw(iδ)|²`, when requested.
    pub open_loop: Option<FrequencyTrace>,
}

pub fn frequency_sweep(
    comp: &CompensatorModel,
    env: &LoopEnvironment,
    grid: &[f64],
    with_open_loop: bool,
) -> Result<Sweep> {
    let ratio = sample(grid, |d| power_ratio_at(comp, env, d))?;
    let ratio = FrequencyTrace::new(grid.to_vec(), TraceValues::Real(ratio), TraceKind::PowerRatio)?;
    let open_loop = if with_open_loop {
        Some(open_loop_power(comp, grid)?)
    } else {
        None
    };
    Ok(Sweep { ratio, open_loop })
}

/// `|G_zw(iδ)|²` over the grid.
pub fn open_loop_power(comp: &CompensatorModel, grid: &[f64]) -> Result<FrequencyTrace> {
    let plant = comp.plant();
    let p = sample(grid, |d| {
        Ok(plant.tf(Channel::ZW, Complex64::new(0.0, d))?.norm_sqr())
    })?;
    FrequencyTrace::new(grid.to_vec(), TraceValues::Real(p), TraceKind::Power)
}

/// Complex closed-loop response over the grid.
pub fn closed_loop_sweep(
    comp: &CompensatorModel,
    env: &LoopEnvironment,
    grid: &[f64],
) -> Result<FrequencyTrace> {
    let v = sample(grid, |d| closed_loop_tf(comp, env, Complex64::new(0.0, d)))?;
    FrequencyTrace::new(grid.to_vec(), TraceValues::Complex(v), TraceKind::ComplexTf)
}

/// Resonant (`s = 0`) power ratio against feedback phase.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PhaseScan {
    pub phi: Vec<f64>,
    pub ratio: Vec<f64>,
    /// Phase and ratio of the strongest suppression (negative feedback).
    pub argmin: f64,
    pub min: f64,
    /// Phase and ratio of the strongest enhancement (positive feedback).
    pub argmax: f64,
    pub max: f64,
}

pub fn phase_scan(comp: &CompensatorModel, mu: f64, phi_grid: &[f64]) -> Result<PhaseScan> {
    if phi_grid.is_empty() {
        return Err(Error::validation("phi_grid", "empty"));
    }
    if let Some(p) = phi_grid.iter().find(|p| !(-1e-12..=TAU + 1e-12).contains(*p)) {
        return Err(Error::validation("phi_grid", format!("{p} outside [0, 2π]")));
    }
    let env = LoopEnvironment::new(mu, 0.0)?;
    let ratio = phi_grid
        .iter()
        .map(|&phi| power_ratio(comp, &env.with_phi(phi)?, Complex64::new(0.0, 0.0)))
        .collect::<Result<Vec<_>>>()?;
    let (imin, imax) = extremes(&ratio);
    Ok(PhaseScan {
        phi: phi_grid.to_vec(),
        argmin: phi_grid[imin],
        min: ratio[imin],
        argmax: phi_grid[imax],
        max: ratio[imax],
        ratio,
    })
}

/// Indices of the first minimum and first maximum.
pub(crate) fn extremes(values: &[f64]) -> (usize, usize) {
    let mut imin = 0;
    let mut imax = 0;
    for (i, v) in values.iter().enumerate() {
        if *v < values[imin] {
            imin = i;
        }
        if *v > values[imax] {
            imax = i;
        }
    }
    (imin, imax)
}

/// Phase of the two resonant branches: negative (`0`) and positive (`π`)
/// feedback.
pub const NEGATIVE_FEEDBACK: f64 = 0.0;
pub const POSITIVE_FEEDBACK: f64 = PI;
