//! Residue test on the full sensor set with and without an attack, in both
//! estimator modes.

use secest::detect::{Detector, DetectorConfig, Threshold};
use secest::kalman::Mode;
use secest::model::{make_random_stable_system, simulate_stationary, AttackSpec, AttackStrategy};
use secest::obsv::SensorSubset;

fn main() -> secest::Result<()> {
    let model = make_random_stable_system(4, 5, 0.8, 21)?;
    let full = SensorSubset::full(5);
    let attacks = [
        ("none", AttackSpec::none()),
        ("bias on 3", AttackSpec::new(vec![3], AttackStrategy::Constant { bias: vec![2.0] })),
        ("scaled noise on 1", AttackSpec::new(vec![1], AttackStrategy::NoiseLinear { gain: 3.0 })),
    ];
    for mode in [Mode::Prediction, Mode::Filtering] {
        let cfg = DetectorConfig::new(1.0, Threshold::Fixed(1.0), 20_000, 40, mode);
        for (name, attack) in &attacks {
            let traj = simulate_stationary(&model, attack, cfg.required_horizon(4), 5)?;
            let det = Detector::new(&model, &traj, cfg.clone())?;
            let d = det.attack_detect(&full)?;
            let mu: Vec<String> = d.report.per_sensor_mu.iter().map(|m| format!("{m:.2}")).collect();
            println!(
                "{mode:?} / {name:<18} flag={:<5} max dev {:>8.3}  μ = [{}]",
                d.flag,
                d.report.max_deviation,
                mu.join(", ")
            );
        }
    }
    Ok(())
}
