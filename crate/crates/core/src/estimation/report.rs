use std::fmt;

use serde::{Deserialize, Serialize};

use super::fit::FitResult;
use crate::cavity::rate_from_loss;

/// Independent measurements a fit is checked against.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Measurements {
    pub gamma_p: f64,
    pub gamma_c: f64,
    /// Witness-sample power transmissions of the input and output couplers.
    pub witness_t_sq: [f64; 2],
    /// Plant round-trip length, m.
    pub length_m: f64,
    /// Upper bound on mode matching from the transverse-mode peak ratio.
    pub mu_bound: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ReportTolerances {
    /// Absolute, MHz.
    pub controller_rate: f64,
    /// Relative.
    pub coupler_rate: f64,
    /// Absolute.
    pub mode_matching: f64,
}

impl Default for ReportTolerances {
    fn default() -> Self {
        ReportTolerances {
            controller_rate: 0.1,
            coupler_rate: 0.15,
            mode_matching: 0.02,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConsistencyReport {
    pub checks: Vec<Check>,
}

impl ConsistencyReport {
    pub fn all_passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }
}

impl fmt::Display for ConsistencyReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for c in &self.checks {
            writeln!(f, "[{}] {}: {}", if c.passed { "PASS" } else { "FAIL" }, c.name, c.detail)?;
        }
        let passed = self.checks.iter().filter(|c| c.passed).count();
        writeln!(f, "{passed}/{} checks passed", self.checks.len())
    }
}

/// Compares a fit against the controller decay rate, the coupler witness
/// samples and the mode-matching bound.
pub fn consistency_report(
    fit: &FitResult,
    measured: &Measurements,
    tol: &ReportTolerances,
) -> ConsistencyReport {
    let mut checks = Vec::new();

    let predicted_gc = measured.gamma_p - 2.0 * (fit.k1 + fit.k4) + fit.eta_gamma;
    let diff = predicted_gc - measured.gamma_c;
    checks.push(Check {
        name: "controller decay rate".into(),
        passed: diff.abs() <= tol.controller_rate,
        detail: format!(
            "gamma_p - 2(k1+k4) + eta_gamma = {predicted_gc:.4} MHz vs measured {:.4} MHz (|diff| {:.4} <= {})",
            measured.gamma_c,
            diff.abs(),
            tol.controller_rate
        ),
    });

    for (label, fitted, t_sq) in [
        ("input coupler", fit.k1, measured.witness_t_sq[0]),
        ("output coupler", fit.k4, measured.witness_t_sq[1]),
    ] {
        let witness = rate_from_loss(t_sq, measured.length_m);
        let rel = (fitted - witness).abs() / witness;
        checks.push(Check {
            name: format!("{label} rate"),
            passed: rel <= tol.coupler_rate,
            detail: format!(
                "fitted {fitted:.4} MHz vs witness t^2 = {t_sq} -> {witness:.4} MHz (rel {:.3} <= {})",
                rel, tol.coupler_rate
            ),
        });
    }

    checks.push(Check {
        name: "mode matching".into(),
        passed: fit.mu <= measured.mu_bound + tol.mode_matching,
        detail: format!(
            "fitted mu = {:.4} vs bound {} + {}",
            fit.mu, measured.mu_bound, tol.mode_matching
        ),
    });

    ConsistencyReport { checks }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::apparatus;
    use crate::estimation::Sensitivities;

    fn reference_fit() -> FitResult {
        let k = apparatus::coupler_rate();
        FitResult {
            eta_gamma: apparatus::eta_gamma(),
            mu: apparatus::MODE_MATCHING,
            k1: k,
            k4: k,
            gamma_p: apparatus::PLANT_DECAY_RATE,
            residual: 0.0,
            covariance_proxy: Sensitivities { eta_gamma: None, mu: None, k1: None, k4: None },
            rank_deficient: false,
            symmetric_couplers: true,
            starts: 0,
            iterations: 0,
        }
    }

    fn measured() -> Measurements {
        Measurements {
            gamma_p: apparatus::PLANT_DECAY_RATE,
            gamma_c: apparatus::CONTROLLER_DECAY_RATE,
            witness_t_sq: [apparatus::COUPLER_T_SQ; 2],
            length_m: apparatus::PLANT_LENGTH_M,
            mu_bound: apparatus::MODE_MATCHING_BOUND,
        }
    }

    #[test]
    fn reference_values_pass() {
        let r = consistency_report(&reference_fit(), &measured(), &Default::default());
        assert_eq!(r.checks.len(), 4);
        assert!(r.all_passed(), "{r}");
    }

    #[test]
    fn injected_inconsistencies_fail() {
        let mut fit = reference_fit();
        fit.eta_gamma += 1.0;
        let r = consistency_report(&fit, &measured(), &Default::default());
        assert!(!r.checks[0].passed);
        assert!(r.checks[1..].iter().all(|c| c.passed));

        let mut fit = reference_fit();
        fit.mu = 0.95;
        let r = consistency_report(&fit, &measured(), &Default::default());
        assert!(!r.checks[3].passed);
        assert!(r.to_string().contains("[FAIL] mode matching"));

        let mut fit = reference_fit();
        fit.k4 *= 1.3;
        let r = consistency_report(&fit, &measured(), &Default::default());
        assert!(!r.checks[2].passed);
    }
}
