//! Optimal compensator gain for the reference apparatus, at resonance and
//! over a band, for both signs of the decay-rate mismatch.

use coherent_feedback::synthesis::SynthesisOptions;
use coherent_feedback::{apparatus, optimize_gain, Target};

fn main() -> coherent_feedback::Result<()> {
    let plant = apparatus::plant();
    let g = plant.gamma_p();
    let mu = apparatus::MODE_MATCHING;

    println!("{:>10} {:>10} {:>8} {:>12} {:>10}", "eta_gamma", "target", "eta_K", "ratio(0)", "dB");
    for eta_gamma in [apparatus::eta_gamma(), -apparatus::eta_gamma(), 0.0] {
        for (label, target) in [("at zero", Target::AtZero), ("band", Target::Band(g))] {
            let r = optimize_gain(&plant, eta_gamma, mu, target, SynthesisOptions::default())?;
            println!(
                "{eta_gamma:>10.4} {label:>10} {:>8.4} {:>12.6} {:>10.4}",
                r.eta_k_opt, r.ratio_at_zero, r.rejection_db
            );
        }
    }

    let ideal = optimize_gain(&plant, 0.0, 1.0, Target::AtZero, SynthesisOptions::default())?;
    println!("\nideal conditions: eta_K = {:.6}, rejection {} dB", ideal.eta_k_opt, ideal.rejection_db);
    Ok(())
}
