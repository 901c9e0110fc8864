//! Frequency response of the closed loop and how the decay-rate mismatch
//! erodes broadband suppression.
//!
//! Prints a coarse table; pass a path to also write the ratio trace as CSV.

use std::fs::File;

use coherent_feedback::loop_algebra::{frequency_sweep, to_db};
use coherent_feedback::synthesis::band_statistics;
use coherent_feedback::trace::linear_grid;
use coherent_feedback::{apparatus, CompensatorModel};

fn main() -> coherent_feedback::Result<()> {
    let plant = apparatus::plant();
    let g = plant.gamma_p();
    let env = apparatus::environment();
    let comp = apparatus::compensator(0.6648);

    let grid = linear_grid(-3.0 * g, 3.0 * g, 601)?;
    let sweep = frequency_sweep(&comp, &env, &grid, true)?;
    let ratio = sweep.ratio.real().unwrap();
    let open = sweep.open_loop.as_ref().unwrap().real().unwrap();
    println!("{:>10} {:>12} {:>10}", "detuning", "open |Gzw|^2", "ratio dB");
    for i in (0..grid.len()).step_by(50) {
        println!("{:>10.2} {:>12.5} {:>10.3}", grid[i], open[i], to_db(ratio[i]));
    }

    println!("\nworst-case ratio over |detuning| <= gamma_p, eta_K = 0.79:");
    for step in 0..=4 {
        let eta_gamma = step as f64 * g / 8.0;
        let c = CompensatorModel::new(plant, 0.79162, eta_gamma)?;
        let s = band_statistics(&c, &env, g)?;
        println!("  eta_gamma = {eta_gamma:.3} MHz: sup {:.4}, mean {:.4}", s.sup, s.mean);
    }

    if let Some(path) = std::env::args().nth(1) {
        let file = File::create(&path).map_err(|e| coherent_feedback::Error::Io { path: path.clone().into(), source: e })?;
        sweep.ratio.write_csv(file)?;
        println!("\nwrote {path}");
    }
    Ok(())
}
