//! With unit gain, matched decay rate and perfect mode matching the
//! compensator cancels the plant's response at every detuning.

use coherent_feedback::loop_algebra::{frequency_sweep, LoopEnvironment};
use coherent_feedback::trace::symmetric_grid;
use coherent_feedback::{apparatus, ideal_compensator};

fn main() -> coherent_feedback::Result<()> {
    let plant = apparatus::plant();
    let comp = ideal_compensator(&plant);
    let grid = symmetric_grid(5.0 * plant.gamma_p(), 1001)?;

    for mu in [1.0, 0.99, 0.9] {
        let sweep = frequency_sweep(&comp, &LoopEnvironment::new(mu, 0.0)?, &grid, false)?;
        let worst = sweep.ratio.real().unwrap().iter().cloned().fold(0.0, f64::max);
        println!("mu = {mu:<4}  worst ratio over |detuning| <= 5 gamma_p: {worst:.3e}");
    }
    Ok(())
}
