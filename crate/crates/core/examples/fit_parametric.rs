//! Fit loop parameters to resonant max/min data over a range of gains and
//! check them against independent measurements.

use coherent_feedback::apparatus;
use coherent_feedback::emulator::{emulate_parametric, EmulationConfig};
use coherent_feedback::estimation::{
    consistency_report, fit_parameters, FitBounds, FitOptions, Measurements,
};
use coherent_feedback::trace::linear_grid;

fn main() -> coherent_feedback::Result<()> {
    let plant = apparatus::plant();
    let (lo, hi) = apparatus::ETA_K_RANGE;
    let gains = linear_grid(lo, hi, 12)?;
    let data = emulate_parametric(
        &plant,
        apparatus::eta_gamma(),
        apparatus::MODE_MATCHING,
        &gains,
        &EmulationConfig::noiseless(),
    )?;
    let bounds = FitBounds::around(plant.gamma_p());

    let free = fit_parameters(&data, &bounds, None, &FitOptions::default())?;
    println!(
        "four free parameters: k1 {:.4} k4 {:.4} mu {:.4}  rank deficient: {}",
        free.k1, free.k4, free.mu, free.rank_deficient
    );

    let options = FitOptions {
        symmetric_couplers: true,
        ..Default::default()
    };
    let fit = fit_parameters(&data, &bounds, None, &options)?;
    println!(
        "k1 = k4:  eta_gamma {:.4}  mu {:.4}  k {:.4}  rms {:.1e}  ({} starts, {} iterations)",
        fit.eta_gamma, fit.mu, fit.k1, fit.residual, fit.starts, fit.iterations
    );
    println!("sensitivities: {:?}\n", fit.covariance_proxy);

    let measured = Measurements {
        gamma_p: apparatus::PLANT_DECAY_RATE,
        gamma_c: apparatus::CONTROLLER_DECAY_RATE,
        witness_t_sq: [apparatus::COUPLER_T_SQ; 2],
        length_m: apparatus::PLANT_LENGTH_M,
        mu_bound: apparatus::MODE_MATCHING_BOUND,
    };
    print!("{}", consistency_report(&fit, &measured, &Default::default()));
    Ok(())
}
