//! Simulates a random plant with two compromised sensors and compares the
//! attacked outputs against their clean counterparts.

use secest::model::{make_random_stable_system, simulate_stationary, AttackSpec, AttackStrategy};

fn main() -> secest::Result<()> {
    let model = make_random_stable_system(4, 6, 0.9, 7)?;
    println!("n = {}, p = {}, spectral radius {:.3}", model.n(), model.p(), model.spectral_radius());

    let attack = AttackSpec::new(vec![2, 5], AttackStrategy::Constant { bias: vec![3.0, -1.5] });
    let traj = simulate_stationary(&model, &attack, 2_000, 42)?;

    for i in 1..=model.p() {
        let row = traj.outputs.row(i - 1) - traj.clean_outputs.row(i - 1);
        let mean = row.mean();
        println!("sensor {i}: mean injected signal {mean:+.3}");
    }
    let energy = (0..traj.horizon()).map(|t| traj.state(t).norm_squared()).sum::<f64>() / traj.horizon() as f64;
    println!("mean state energy {energy:.3} over {} steps", traj.horizon());
    Ok(())
}
