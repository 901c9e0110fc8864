//! Compensator design: the ideal resonator compensator, gain/phase
//! optimization for an imperfect one, and broadband rejection metrics.

use std::f64::consts::{PI, TAU};

use serde::{Serialize, Serializer};

use crate::cavity::{CompensatorModel, PlantModel};
use crate::error::{Error, Result};
use crate::loop_algebra::{power_ratio_at, to_db, LoopEnvironment};
use crate::optimize::golden_section;

/// Default upper end of the gain search.
pub const DEFAULT_ETA_K_MAX: f64 = 4.0;
/// Absolute tolerance on the optimal gain.
pub const ETA_K_TOLERANCE: f64 = 1e-6;
/// Ratios at or below this count as an exact null.
pub const NULL_RATIO: f64 = 1e-10;

const PHASE_TOLERANCE: f64 = 1e-6;
const PHASE_WINDOW: f64 = 0.5;
const MAX_REFINEMENT_ROUNDS: usize = 20;

const BAND_MIN_POINTS: usize = 513;
const BAND_MAX_POINTS: usize = 1 << 16;
const BAND_CONVERGENCE: f64 = 1e-6;

/// Compensator matched to `plant` with unit gain and no decay mismatch.
/// With perfect mode matching the closed loop vanishes at every frequency.
pub fn ideal_compensator(plant: &PlantModel) -> CompensatorModel {
    CompensatorModel::new(*plant, 1.0, 0.0).expect("unit gain is valid")
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Target {
    /// Minimize the resonant (`s = 0`) power ratio.
    AtZero,
    /// Minimize the worst-case ratio over `|δ| ≤ edge`.
    Band(f64),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SynthesisOptions {
    pub eta_k_max: f64,
    /// Band edge for the reported `band_metric`; defaults to the target
    /// band when optimizing a band.
    pub report_band: Option<f64>,
}

impl Default for SynthesisOptions {
    fn default() -> Self {
        SynthesisOptions {
            eta_k_max: DEFAULT_ETA_K_MAX,
            report_band: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SynthesisResult {
    #[serde(rename = "eta_K_opt")]
    pub eta_k_opt: f64,
    pub phi_opt: f64,
    pub ratio_at_zero: f64,
    /// `-10·log10(ratio_at_zero)`; infinite for an exact null.
    #[serde(serialize_with = "finite_or_inf")]
    pub rejection_db: f64,
    /// Worst-case ratio over the reported band.
    pub band_metric: Option<f64>,
    /// Mean ratio over the reported band.
    pub band_mean: Option<f64>,
    pub band_edge: Option<f64>,
}

fn finite_or_inf<S: Serializer>(v: &f64, s: S) -> std::result::Result<S::Ok, S::Error> {
    if v.is_infinite() && *v > 0.0 {
        s.serialize_str("inf")
    } else {
        s.serialize_f64(*v)
    }
}

pub fn rejection_db(ratio: f64) -> f64 {
    if ratio <= NULL_RATIO {
        f64::INFINITY
    } else {
        -to_db(ratio)
    }
}

/// Finds the gain `η_K ∈ [0, eta_k_max]` and feedback phase minimizing the
/// target, for a compensator with decay mismatch `eta_gamma` and mode
/// matching `mu`.
///
/// Golden-section search over `η_K` from each of the two resonant phases,
/// followed by alternating phase/gain refinement from the better start.
pub fn optimize_gain(
    plant: &PlantModel,
    eta_gamma: f64,
    mu: f64,
    target: Target,
    options: SynthesisOptions,
) -> Result<SynthesisResult> {
    if !(options.eta_k_max > 0.0 && options.eta_k_max.is_finite()) {
        return Err(Error::validation(
            "eta_K_max",
            format!("{} must be > 0", options.eta_k_max),
        ));
    }
    if let Target::Band(edge) = target {
        check_band(edge)?;
    }
    let base = CompensatorModel::new(*plant, 0.0, eta_gamma)?;
    LoopEnvironment::new(mu, 0.0)?;

    let objective = |eta_k: f64, phi: f64| -> Result<f64> {
        let comp = base.with_eta_k(eta_k)?;
        let env = LoopEnvironment::new(mu, phi)?;
        match target {
            Target::AtZero => power_ratio_at(&comp, &env, 0.0),
            Target::Band(edge) => broadband_metric(&comp, &env, edge),
        }
    };
    let best_gain = |phi: f64| {
        golden_section(|k| objective(k, phi), 0.0, options.eta_k_max, ETA_K_TOLERANCE)
    };

    let mut phi = 0.0;
    let mut best = best_gain(0.0)?;
    let flipped = best_gain(PI)?;
    if flipped.f < best.f {
        phi = PI;
        best = flipped;
    }
    let mut eta_k = best.x;
    let mut value = best.f;

    for _ in 0..MAX_REFINEMENT_ROUNDS {
        let ph = golden_section(
            |p| objective(eta_k, p),
            phi - PHASE_WINDOW,
            phi + PHASE_WINDOW,
            PHASE_TOLERANCE,
        )?;
        let new_phi = if ph.f < value { ph.x } else { phi };
        let g = best_gain(new_phi)?;
        let improved = g.f < value;
        let moved = (new_phi - phi).abs() > PHASE_TOLERANCE || (g.x - eta_k).abs() > ETA_K_TOLERANCE;
        if improved {
            phi = new_phi;
            eta_k = g.x;
            value = g.f;
        } else if ph.f < value {
            phi = new_phi;
            value = ph.f;
        }
        if !(improved && moved) {
            break;
        }
    }

    let phi = phi.rem_euclid(TAU);
    let comp = base.with_eta_k(eta_k)?;
    let env = LoopEnvironment::new(mu, phi)?;
    let ratio_at_zero = power_ratio_at(&comp, &env, 0.0)?;
    let band_edge = options.report_band.or(match target {
        Target::Band(edge) => Some(edge),
        Target::AtZero => None,
    });
    let (band_metric, band_mean) = match band_edge {
        Some(edge) => {
            let stats = band_statistics(&comp, &env, edge)?;
            (Some(stats.sup), Some(stats.mean))
        }
        None => (None, None),
    };
    Ok(SynthesisResult {
        eta_k_opt: eta_k,
        phi_opt: env.phi(),
        ratio_at_zero,
        rejection_db: rejection_db(ratio_at_zero),
        band_metric,
        band_mean,
        band_edge,
    })
}

fn check_band(edge: f64) -> Result<()> {
    if edge > 0.0 && edge.is_finite() {
        Ok(())
    } else {
        Err(Error::EmptyBand(edge))
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BandStatistics {
    /// Worst-case ratio over the band.
    pub sup: f64,
    pub mean: f64,
    /// Grid points used at convergence.
    pub points: usize,
}

/// Worst-case power ratio over `|δ| ≤ edge`.
pub fn broadband_metric(comp: &CompensatorModel, env: &LoopEnvironment, edge: f64) -> Result<f64> {
    band_statistics(comp, env, edge).map(|s| s.sup)
}

/// Samples the band on a uniform grid of at least 513 points, doubling
/// the density until successive maxima agree to 1e-6.
pub fn band_statistics(
    comp: &CompensatorModel,
    env: &LoopEnvironment,
    edge: f64,
) -> Result<BandStatistics> {
    check_band(edge)?;
    let evaluate = |points: usize| -> Result<(f64, f64)> {
        let step = 2.0 * edge / (points - 1) as f64;
        let mut sup = f64::NEG_INFINITY;
        let mut sum = 0.0;
        for i in 0..points {
            let r = power_ratio_at(comp, env, -edge + step * i as f64)?;
            sup = sup.max(r);
            sum += r;
        }
        Ok((sup, sum / points as f64))
    };
    let mut points = BAND_MIN_POINTS;
    let (mut sup, mut mean) = evaluate(points)?;
    while points < BAND_MAX_POINTS {
        let finer = 2 * points - 1;
        let (s, m) = evaluate(finer)?;
        let change = (s - sup).abs();
        points = finer;
        sup = s;
        mean = m;
        if change < BAND_CONVERGENCE {
            break;
        }
    }
    Ok(BandStatistics { sup, mean, points })
}
