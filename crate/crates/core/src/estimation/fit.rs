use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use super::dataset::ParametricDataset;
use super::levmar::{jacobian, minimize, LmOptions};
use crate::cavity::{CompensatorModel, PlantModel};
use crate::error::{Error, Result};
use crate::loop_algebra::{power_ratio_at, LoopEnvironment, NEGATIVE_FEEDBACK, POSITIVE_FEEDBACK};

/// Resonant power ratios `(max, min)` for gain `eta_k`: the positive
/// feedback branch (`φ = π`) and the negative one (`φ = 0`).
pub fn predict_parametric_point(
    plant: &PlantModel,
    eta_gamma: f64,
    mu: f64,
    eta_k: f64,
) -> Result<(f64, f64)> {
    let comp = CompensatorModel::new(*plant, eta_k, eta_gamma)?;
    let max = power_ratio_at(&comp, &LoopEnvironment::new(mu, POSITIVE_FEEDBACK)?, 0.0)?;
    let min = power_ratio_at(&comp, &LoopEnvironment::new(mu, NEGATIVE_FEEDBACK)?, 0.0)?;
    Ok((max, min))
}

/// The fitted quantities; `gamma_p` comes from the dataset.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FitParameters {
    pub eta_gamma: f64,
    pub mu: f64,
    pub k1: f64,
    pub k4: f64,
}

impl FitParameters {
    fn as_array(&self) -> [f64; 4] {
        [self.eta_gamma, self.mu, self.k1, self.k4]
    }

    fn from_array(a: [f64; 4]) -> Self {
        FitParameters {
            eta_gamma: a[0],
            mu: a[1],
            k1: a[2],
            k4: a[3],
        }
    }
}

const NAMES: [&str; 4] = ["eta_gamma", "mu", "k1", "k4"];

/// Closed search interval per parameter.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FitBounds {
    pub eta_gamma: [f64; 2],
    pub mu: [f64; 2],
    pub k1: [f64; 2],
    pub k4: [f64; 2],
}

impl FitBounds {
    /// Ranges around the reference apparatus for a plant of decay rate
    /// `gamma_p`: `|η_γ| ≤ γ_p/4`, `μ ∈ [0.5, 1]`, `k ∈ [0.005, 0.1]·γ_p`.
    pub fn around(gamma_p: f64) -> Self {
        FitBounds {
            eta_gamma: [-0.25 * gamma_p, 0.25 * gamma_p],
            mu: [0.5, 1.0],
            k1: [0.005 * gamma_p, 0.1 * gamma_p],
            k4: [0.005 * gamma_p, 0.1 * gamma_p],
        }
    }

    fn as_array(&self) -> [[f64; 2]; 4] {
        [self.eta_gamma, self.mu, self.k1, self.k4]
    }

    fn validate(&self) -> Result<()> {
        for (name, [lo, hi]) in NAMES.iter().zip(self.as_array()) {
            if !(lo.is_finite() && hi.is_finite() && lo < hi) {
                return Err(Error::validation(
                    format!("bounds.{name}"),
                    format!("interval [{lo}, {hi}] is empty"),
                ));
            }
        }
        if self.mu[0] < 0.0 || self.mu[1] > 1.0 {
            return Err(Error::validation("bounds.mu", "must lie within [0, 1]"));
        }
        if self.k1[0] < 0.0 || self.k4[0] < 0.0 {
            return Err(Error::validation("bounds.k", "coupler rates must be >= 0"));
        }
        Ok(())
    }

    pub fn contains(&self, p: &FitParameters) -> bool {
        self.as_array()
            .iter()
            .zip(p.as_array())
            .all(|([lo, hi], v)| (*lo..=*hi).contains(&v))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FitOptions {
    /// Fit a single coupler rate `k1 = k4`.
    pub symmetric_couplers: bool,
    pub max_iterations: usize,
}

impl Default for FitOptions {
    fn default() -> Self {
        FitOptions {
            symmetric_couplers: false,
            max_iterations: LmOptions::default().max_iterations,
        }
    }
}

/// Finite-difference standard-error estimates at the optimum. `None` where
/// the data do not constrain the parameter.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Sensitivities {
    pub eta_gamma: Option<f64>,
    pub mu: Option<f64>,
    pub k1: Option<f64>,
    pub k4: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitResult {
    pub eta_gamma: f64,
    pub mu: f64,
    pub k1: f64,
    pub k4: f64,
    pub gamma_p: f64,
    /// Root-mean-square over both coordinates of every point.
    pub residual: f64,
    pub covariance_proxy: Sensitivities,
    /// The Jacobian at the optimum has a (numerically) null direction.
    pub rank_deficient: bool,
    pub symmetric_couplers: bool,
    pub starts: usize,
    pub iterations: usize,
}

impl FitResult {
    pub fn parameters(&self) -> FitParameters {
        FitParameters {
            eta_gamma: self.eta_gamma,
            mu: self.mu,
            k1: self.k1,
            k4: self.k4,
        }
    }
}

/// Predicted-minus-observed values, `[max_0, min_0, max_1, min_1, …]`.
pub fn residuals(params: &FitParameters, data: &ParametricDataset) -> Result<Vec<f64>> {
    let plant = PlantModel::new(data.gamma_p(), params.k1, params.k4)?;
    let mut out = Vec::with_capacity(2 * data.points().len());
    for p in data.points() {
        let (max, min) = predict_parametric_point(&plant, params.eta_gamma, params.mu, p.eta_k)?;
        out.push(max - p.ratio_max);
        out.push(min - p.ratio_min);
    }
    Ok(out)
}

pub fn residual_rms(params: &FitParameters, data: &ParametricDataset) -> Result<f64> {
    let r = residuals(params, data)?;
    Ok((r.iter().map(|v| v * v).sum::<f64>() / r.len() as f64).sqrt())
}

/// Smallest-to-largest singular value ratio of the column-normalized
/// Jacobian below which the fit is reported as rank deficient.
const RANK_TOLERANCE: f64 = 1e-6;
const START_FRACTIONS: [f64; 3] = [1.0 / 6.0, 0.5, 5.0 / 6.0];
const MIN_POINTS: usize = 4;

/// Maps between physical parameters and the unit box the optimizer works in.
struct Scaling {
    bounds: [[f64; 2]; 4],
    symmetric: bool,
}

impl Scaling {
    fn new(bounds: &FitBounds, symmetric: bool) -> Result<Self> {
        let mut b = bounds.as_array();
        if symmetric {
            let k = [b[2][0].max(b[3][0]), b[2][1].min(b[3][1])];
            if k[0] >= k[1] {
                return Err(Error::validation("bounds.k", "k1 and k4 intervals do not overlap"));
            }
            b[2] = k;
            b[3] = k;
        }
        Ok(Scaling {
            bounds: b,
            symmetric,
        })
    }

    fn dim(&self) -> usize {
        if self.symmetric {
            3
        } else {
            4
        }
    }

    fn to_params(&self, u: &[f64]) -> FitParameters {
        let phys = |i: usize, v: f64| self.bounds[i][0] + v * (self.bounds[i][1] - self.bounds[i][0]);
        let k4 = if self.symmetric { phys(2, u[2]) } else { phys(3, u[3]) };
        FitParameters::from_array([phys(0, u[0]), phys(1, u[1]), phys(2, u[2]), k4])
    }

    fn to_unit(&self, p: &FitParameters) -> Vec<f64> {
        let a = p.as_array();
        (0..self.dim())
            .map(|i| (a[i] - self.bounds[i][0]) / (self.bounds[i][1] - self.bounds[i][0]))
            .collect()
    }

    fn width(&self, i: usize) -> f64 {
        self.bounds[i][1] - self.bounds[i][0]
    }

    /// 3 fractions per free parameter, in lexicographic order.
    fn start_grid(&self) -> Vec<Vec<f64>> {
        let n = self.dim();
        (0..3usize.pow(n as u32))
            .map(|mut code| {
                let mut u = vec![0.0; n];
                for slot in u.iter_mut().rev() {
                    *slot = START_FRACTIONS[code % 3];
                    code /= 3;
                }
                u
            })
            .collect()
    }
}

/// Least-squares fit of `(η_γ, μ, k1, k4)` to resonant max/min data.
///
/// Local Levenberg–Marquardt descents start from a 3-per-parameter grid
/// spanning `bounds` (and from `initial_guess`, if given); the lowest
/// residual wins, ties broken by lexicographic parameter order.
pub fn fit_parameters(
    data: &ParametricDataset,
    bounds: &FitBounds,
    initial_guess: Option<FitParameters>,
    options: &FitOptions,
) -> Result<FitResult> {
    let needed = if options.symmetric_couplers { 3 } else { MIN_POINTS };
    if data.points().len() < needed {
        return Err(Error::validation(
            "points",
            format!("{} points cannot determine {needed} parameters", data.points().len()),
        ));
    }
    bounds.validate()?;
    let scaling = Scaling::new(bounds, options.symmetric_couplers)?;
    let lower = vec![0.0; scaling.dim()];
    let upper = vec![1.0; scaling.dim()];
    let model = |u: &[f64]| residuals(&scaling.to_params(u), data).ok();
    let lm = LmOptions {
        max_iterations: options.max_iterations,
        ..Default::default()
    };

    let mut starts = Vec::new();
    if let Some(guess) = initial_guess {
        if !bounds.contains(&guess) {
            return Err(Error::validation("initial_guess", "outside the bounds"));
        }
        starts.push(scaling.to_unit(&guess));
    }
    starts.extend(scaling.start_grid());

    let mut best: Option<super::levmar::LmOutcome> = None;
    let mut iterations = 0;
    for start in &starts {
        let Some(out) = minimize(model, start, &lower, &upper, &lm) else {
            continue;
        };
        iterations += out.iterations;
        let better = match &best {
            None => true,
            Some(b) => {
                out.cost < b.cost
                    || (out.cost == b.cost
                        && scaling.to_params(&out.x).as_array() < scaling.to_params(&b.x).as_array())
            }
        };
        if better {
            best = Some(out);
        }
    }
    let best = best.ok_or_else(|| {
        Error::validation("bounds", "the model is undefined at every start point")
    })?;

    let params = scaling.to_params(&best.x);
    let (covariance_proxy, rank_deficient) = diagnostics(&model, &best.x, &best.residuals, &scaling, &lm);
    let result = FitResult {
        eta_gamma: params.eta_gamma,
        mu: params.mu,
        k1: params.k1,
        k4: params.k4,
        gamma_p: data.gamma_p(),
        residual: (best.cost / best.residuals.len() as f64).sqrt(),
        covariance_proxy,
        rank_deficient,
        symmetric_couplers: options.symmetric_couplers,
        starts: starts.len(),
        iterations,
    };
    if !best.converged {
        return Err(Error::NotConverged {
            iterations: best.iterations,
            best: Box::new(result),
        });
    }
    Ok(result)
}

/// Standard-error proxies from `σ²·(JᵀJ)⁺` and a rank check on the
/// column-normalized Jacobian.
fn diagnostics<F>(
    model: &F,
    u: &[f64],
    r: &[f64],
    scaling: &Scaling,
    lm: &LmOptions,
) -> (Sensitivities, bool)
where
    F: Fn(&[f64]) -> Option<Vec<f64>>,
{
    let n = u.len();
    let undetermined = Sensitivities {
        eta_gamma: None,
        mu: None,
        k1: None,
        k4: None,
    };
    let Some(jac) = jacobian(model, u, &vec![0.0; n], &vec![1.0; n], lm.fd_step) else {
        return (undetermined, true);
    };
    // physical units
    let jac = DMatrix::from_fn(jac.nrows(), n, |i, j| jac[(i, j)] / scaling.width(j));

    let norms: Vec<f64> = (0..n).map(|j| jac.column(j).norm()).collect();
    let rank_deficient = if norms.contains(&0.0) {
        true
    } else {
        let normalized = DMatrix::from_fn(jac.nrows(), n, |i, j| jac[(i, j)] / norms[j]);
        let sv = normalized.singular_values();
        sv.min() < RANK_TOLERANCE * sv.max()
    };

    let m = r.len();
    let dof = m.saturating_sub(n).max(1) as f64;
    let sigma2 = r.iter().map(|v| v * v).sum::<f64>() / dof;
    let jtj = jac.transpose() * &jac;
    let sens: Vec<Option<f64>> = match jtj.clone().pseudo_inverse(1e-14 * jtj.amax().max(f64::MIN_POSITIVE)) {
        Ok(inv) if !rank_deficient => (0..n).map(|j| Some((sigma2 * inv[(j, j)]).sqrt())).collect(),
        _ => vec![None; n],
    };
    let k4 = if scaling.symmetric { sens[2] } else { sens[3] };
    (
        Sensitivities {
            eta_gamma: sens[0],
            mu: sens[1],
            k1: sens[2],
            k4,
        },
        rank_deficient,
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::apparatus;
    use crate::estimation::ParametricPoint;

    fn generator() -> FitParameters {
        let k = apparatus::coupler_rate();
        FitParameters {
            eta_gamma: apparatus::eta_gamma(),
            mu: apparatus::MODE_MATCHING,
            k1: k,
            k4: k,
        }
    }

    fn synthetic(params: &FitParameters, eta_ks: &[f64]) -> ParametricDataset {
        let plant = PlantModel::new(apparatus::PLANT_DECAY_RATE, params.k1, params.k4).unwrap();
        let points = eta_ks
            .iter()
            .map(|&eta_k| {
                let (max, min) = predict_parametric_point(&plant, params.eta_gamma, params.mu, eta_k).unwrap();
                ParametricPoint { eta_k, ratio_max: max, ratio_min: min }
            })
            .collect();
        ParametricDataset::new(points, apparatus::PLANT_DECAY_RATE).unwrap()
    }

    fn log_grid(n: usize) -> Vec<f64> {
        let (lo, hi) = apparatus::ETA_K_RANGE;
        (0..n).map(|i| lo * (hi / lo).powf(i as f64 / (n - 1) as f64)).collect()
    }

    #[test]
    fn prediction_edge_cases() {
        let plant = apparatus::plant();
        assert_eq!(predict_parametric_point(&plant, 0.3, 0.84, 0.0).unwrap(), (1.0, 1.0));
        let (max, min) = predict_parametric_point(&plant, apparatus::eta_gamma(), 0.84, 0.6648).unwrap();
        assert!((min - 0.182_869_29).abs() < 1e-7);
        assert!(max > 1.0);
        for eta_k in log_grid(20) {
            let (max, min) = predict_parametric_point(&plant, apparatus::eta_gamma(), 0.84, eta_k).unwrap();
            assert!(min <= max);
        }
    }

    #[test]
    fn generator_residual_is_zero() {
        let data = synthetic(&generator(), &log_grid(12));
        assert!(residual_rms(&generator(), &data).unwrap() < 1e-10);
    }

    #[test]
    fn symmetric_noiseless_roundtrip() {
        let truth = generator();
        let data = synthetic(&truth, &log_grid(12));
        let opts = FitOptions {
            symmetric_couplers: true,
            ..Default::default()
        };
        let fit = fit_parameters(&data, &FitBounds::around(9.3), None, &opts).unwrap();
        for (got, want) in fit.parameters().as_array().iter().zip(truth.as_array()) {
            assert!(((got - want) / want).abs() < 1e-2, "{got} vs {want}");
        }
        assert!(!fit.rank_deficient);
        assert_eq!(fit.starts, 27);
        assert!(FitBounds::around(9.3).contains(&fit.parameters()));
        let again = residual_rms(&fit.parameters(), &data).unwrap();
        assert!((again - fit.residual).abs() < 1e-15);
    }

    #[test]
    fn unconstrained_fit_is_flagged_rank_deficient() {
        let data = synthetic(&generator(), &log_grid(12));
        let fit = fit_parameters(&data, &FitBounds::around(9.3), None, &FitOptions::default()).unwrap();
        assert_eq!(fit.starts, 81);
        assert!(fit.residual < 1e-8);
        assert!(fit.rank_deficient);
    }

    #[test]
    fn flat_data_is_rank_deficient() {
        let points = vec![ParametricPoint { eta_k: 0.0, ratio_max: 1.0, ratio_min: 1.0 }; 6];
        let data = ParametricDataset::new(points, 9.3).unwrap();
        let fit = fit_parameters(&data, &FitBounds::around(9.3), None, &FitOptions::default()).unwrap();
        assert!(fit.rank_deficient);
        assert_eq!(fit.residual, 0.0);
        assert!(fit.covariance_proxy.mu.is_none());
    }

    #[test]
    fn deterministic() {
        let data = synthetic(&generator(), &log_grid(8));
        let opts = FitOptions {
            symmetric_couplers: true,
            ..Default::default()
        };
        let a = fit_parameters(&data, &FitBounds::around(9.3), None, &opts).unwrap();
        let b = fit_parameters(&data, &FitBounds::around(9.3), None, &opts).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn input_errors() {
        let data = synthetic(&generator(), &log_grid(3));
        assert!(matches!(
            fit_parameters(&data, &FitBounds::around(9.3), None, &FitOptions::default()),
            Err(Error::Validation { .. })
        ));
        let data = synthetic(&generator(), &log_grid(6));
        let mut bounds = FitBounds::around(9.3);
        bounds.mu = [0.9, 0.8];
        let err = fit_parameters(&data, &bounds, None, &FitOptions::default()).unwrap_err();
        assert!(err.to_string().contains("bounds.mu"));
        let guess = FitParameters { mu: 2.0, ..generator() };
        assert!(fit_parameters(&data, &FitBounds::around(9.3), Some(guess), &FitOptions::default()).is_err());
    }

    #[test]
    fn iteration_cap_surfaces_best_so_far() {
        let data = synthetic(&generator(), &log_grid(12));
        let opts = FitOptions {
            symmetric_couplers: true,
            max_iterations: 1,
        };
        match fit_parameters(&data, &FitBounds::around(9.3), None, &opts) {
            Err(Error::NotConverged { best, .. }) => assert!(best.residual.is_finite()),
            other => panic!("expected non-convergence, got {other:?}"),
        }
    }
}
