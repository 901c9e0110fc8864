//! Spread of fitted parameters under 1% multiplicative noise, over many
//! seeds. Usage: `fit_noise_study [seeds]` (default 100). Run with
//! `--release`; each fit takes a fraction of a second.

use coherent_feedback::apparatus;
use coherent_feedback::emulator::{emulate_parametric, EmulationConfig};
use coherent_feedback::estimation::{fit_parameters, FitBounds, FitOptions};
use coherent_feedback::trace::linear_grid;
use coherent_feedback::Error;

fn quantile(sorted: &[f64], q: f64) -> f64 {
    let pos = q * (sorted.len() - 1) as f64;
    let (i, f) = (pos.floor() as usize, pos.fract());
    if i + 1 < sorted.len() {
        sorted[i] * (1.0 - f) + sorted[i + 1] * f
    } else {
        sorted[i]
    }
}

fn main() -> coherent_feedback::Result<()> {
    let seeds: u64 = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(100);
    let plant = apparatus::plant();
    let truth = [apparatus::eta_gamma(), apparatus::MODE_MATCHING, plant.k1()];
    let gains = linear_grid(apparatus::ETA_K_RANGE.0, apparatus::ETA_K_RANGE.1, 12)?;
    let bounds = FitBounds::around(plant.gamma_p());
    let options = FitOptions {
        symmetric_couplers: true,
        ..Default::default()
    };

    let mut est = [Vec::new(), Vec::new(), Vec::new()];
    for seed in 0..seeds {
        let cfg = EmulationConfig {
            detector_noise: 0.01,
            detector_noise_seed: seed,
            ..EmulationConfig::noiseless()
        };
        let data = emulate_parametric(&plant, truth[0], truth[1], &gains, &cfg)?;
        let fit = match fit_parameters(&data, &bounds, None, &options) {
            Ok(f) => f,
            Err(Error::NotConverged { best, .. }) => *best,
            Err(e) => return Err(e),
        };
        est[0].push(fit.eta_gamma);
        est[1].push(fit.mu);
        est[2].push(fit.k1);
    }

    println!("{seeds} seeds, 1% noise; quantiles of the relative error");
    println!("{:>10} {:>8} {:>8} {:>8}", "", "q25", "median", "q75");
    for (name, (v, t)) in ["eta_gamma", "mu", "k"].iter().zip(est.iter().zip(truth)) {
        let mut errors: Vec<f64> = v.iter().map(|e| (e - t) / t.abs()).collect();
        errors.sort_by(f64::total_cmp);
        let rel = |q| quantile(&errors, q);
        println!("{name:>10} {:>8.3} {:>8.3} {:>8.3}", rel(0.25), rel(0.5), rel(0.75));
    }
    let at_bound = est[2].iter().filter(|k| **k <= bounds.k1[0] + 1e-12).count();
    println!("k fits at the lower bound: {at_bound}/{seeds}");
    Ok(())
}
