use std::f64::consts::TAU;

use coherent_feedback::apparatus;
use coherent_feedback::loop_algebra::phase_scan;
use coherent_feedback::trace::linear_grid;

fn main() -> coherent_feedback::Result<()> {
    let mu = apparatus::MODE_MATCHING;
    let grid = linear_grid(0.0, TAU, 361)?;
    for eta_k in [0.06, 0.3, 0.6648, 1.5, 2.2] {
        let scan = phase_scan(&apparatus::compensator(eta_k), mu, &grid)?;
        println!(
            "eta_K {eta_k:<6} min {:.4} at phi {:.3}   max {:.4} at phi {:.3}",
            scan.min, scan.argmin, scan.max, scan.argmax
        );
    }

    let scan = phase_scan(&apparatus::compensator(0.6648), mu, &grid)?;
    println!();
    for (phi, r) in scan.phi.iter().zip(&scan.ratio).step_by(15) {
        let bar = "#".repeat((r * 12.0).round() as usize);
        println!("{phi:5.2} {r:7.4} {bar}");
    }
    Ok(())
}
