//! End to end: search for an attack-free subset, then compare the resulting
//! estimation error with the worst attack-free subset's steady covariance.

use secest::detect::{error_trace, Detector, DetectorConfig, Threshold};
use secest::kalman::{worst_subset, Mode};
use secest::model::{make_random_stable_system, simulate_stationary, AttackSpec, AttackStrategy};
use secest::search::{smt_search_with, Engine};

fn main() -> secest::Result<()> {
    let (n, p, k) = (4, 6, 2);
    let model = make_random_stable_system(n, p, 0.8, 17)?;
    let attack = AttackSpec::new(vec![3, 6], AttackStrategy::SeededRandom { amplitude: 3.0 });
    let cfg = DetectorConfig::new(0.25, Threshold::Fixed(1.0), 20_000, 10 * n, Mode::Prediction);
    let traj = simulate_stationary(&model, &attack, cfg.required_horizon(n), 3)?;
    let det = Detector::new(&model, &traj, cfg.clone())?;

    let out = smt_search_with(&mut Engine::new(&det), k)?;
    let (Some(s), Some(est)) = (&out.subset, &out.estimates) else {
        println!("no subset passed");
        return Ok(());
    };
    let achieved = error_trace(&traj, est, cfg.t1, det.window())?;
    let (worst, bound) = worst_subset(&model, k)?;
    println!("selected {s}: error trace {achieved:.4}");
    println!("worst subset {worst}: tr P* = {bound:.4} (+ ε = {:.4})", bound + cfg.epsilon);
    Ok(())
}
