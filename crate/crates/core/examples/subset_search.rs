//! Exhaustive and certificate-guided search on the same detector, printing
//! the SMT trace.

use secest::detect::{Detector, DetectorConfig, Threshold};
use secest::kalman::Mode;
use secest::model::{make_random_stable_system, simulate_stationary, AttackSpec, AttackStrategy};
use secest::search::{exhaustive_search_with, smt_search_with, Engine};

fn main() -> secest::Result<()> {
    let (n, p, k) = (6, 9, 3);
    let model = make_random_stable_system(n, p, 0.8, 9)?;
    let attack = AttackSpec::new(vec![1, 4, 8], AttackStrategy::NoiseLinear { gain: 2.0 });
    let cfg = DetectorConfig::new(1.0, Threshold::Fixed(1.0), 4_000, 10 * n, Mode::Prediction);
    let traj = simulate_stationary(&model, &attack, cfg.required_horizon(n), 1)?;
    let det = Detector::new(&model, &traj, cfg)?;
    let mut engine = Engine::with_bank(&det);

    let ex = exhaustive_search_with(&mut engine, k)?;
    let smt = smt_search_with(&mut engine, k)?;
    for o in [&ex, &smt] {
        let subset = o.subset.as_ref().map(|s| s.to_string()).unwrap_or_else(|| "-".into());
        println!("{:?}: {subset} after {} checks, {:.4}s", o.method, o.theory_checks, o.wall_time);
    }
    for e in &smt.trace {
        let cert = e.certificate.as_ref().map(|c| c.to_string()).unwrap_or_default();
        println!("  {:?} {} {} {cert}", e.phase, e.subset, if e.flag { "rejected" } else { "accepted" });
    }
    Ok(())
}
