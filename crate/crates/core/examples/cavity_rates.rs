//! From mirror transmissions and round-trip length to the decay and
//! coupling rates of the reference plant and controller cavities.

use coherent_feedback::apparatus::{self, COUPLER_T_SQ, PLANT_LENGTH_M};
use coherent_feedback::cavity::{
    coupler_rate_from_geometry, decay_rate_from_geometry, loss_budget_for_rate, PlantModel,
    RingCavityGeometry,
};

fn main() -> coherent_feedback::Result<()> {
    let budget = loss_budget_for_rate(apparatus::PLANT_DECAY_RATE, PLANT_LENGTH_M);
    println!("round-trip loss for {} MHz at {} m: {budget:.5}", apparatus::PLANT_DECAY_RATE, PLANT_LENGTH_M);

    // two identical couplers, everything else lumped into l_sq
    let geom = RingCavityGeometry::new(
        [COUPLER_T_SQ, 0.0, 0.0, COUPLER_T_SQ],
        budget - 2.0 * COUPLER_T_SQ,
        PLANT_LENGTH_M,
    )?;
    println!("decay rate      {:.4} MHz", decay_rate_from_geometry(&geom));
    println!("coupler rate k1 {:.4} MHz", coupler_rate_from_geometry(&geom, 0)?);
    println!("coupler rate k4 {:.4} MHz", coupler_rate_from_geometry(&geom, 3)?);

    let plant = PlantModel::from_geometry(&geom)?;
    println!("ideal controller decay rate {:.4} MHz", plant.ideal_controller_rate());
    let comp = apparatus::compensator(1.0);
    println!(
        "controller with eta_gamma = {:.4}: {:.4} MHz (stable: {})",
        comp.eta_gamma(),
        comp.controller_rate(),
        comp.is_stable()
    );
    Ok(())
}
