//! Dither-style error signal for the feedback phase and its zero crossing
//! at the suppression minimum.

use std::f64::consts::PI;

use coherent_feedback::apparatus;
use coherent_feedback::emulator::{emulate_lock, lock_point, minimum_phase};
use coherent_feedback::trace::linear_grid;

fn main() -> coherent_feedback::Result<()> {
    let mu = apparatus::MODE_MATCHING;
    let comp = apparatus::compensator(0.6648);

    let trace = emulate_lock(&comp, mu, &linear_grid(-PI, PI, 73)?)?;
    println!("{:>7} {:>8} {:>9}", "phi", "ratio", "error");
    for i in 0..trace.phi.len() {
        println!("{:>7.3} {:>8.4} {:>9.4}", trace.phi[i], trace.power_ratio[i], trace.error[i]);
    }

    let phi_min = minimum_phase(&comp, mu)?;
    let lock = lock_point(&comp, mu, phi_min, 0.2)?.expect("error signal changes sign");
    println!("\nsuppression minimum at phi = {phi_min:.3e}, error zero crossing at {lock:.3e}");
    println!("rows with a sign change: {:?}", trace.zero_crossing_rows());
    Ok(())
}
