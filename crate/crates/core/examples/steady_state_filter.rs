use nalgebra::DMatrix;
use secest::kalman::{dare_residual, delta_matrix, solve_default, worst_subset, Mode};
use secest::model::{make_random_stable_system, SystemModel};
use secest::obsv::SensorSubset;

fn main() -> secest::Result<()> {
    // x(t+1) = x(t) + w, three identical unit-noise sensors, one used:
    // P solves P² = P + 1.
    let scalar = SystemModel::new(DMatrix::identity(1, 1), DMatrix::from_element(3, 1, 1.0), 1.0, 1.0)?;
    let one = SensorSubset::new(vec![1], 3)?;
    let f = solve_default(&scalar, &one, Mode::Prediction)?;
    println!("scalar P* = {:.10} after {} iterations", f.p_star[(0, 0)], f.iterations);

    let model = make_random_stable_system(5, 4, 0.85, 3)?;
    let s = SensorSubset::new(vec![1, 3, 4], 4)?;
    let pred = solve_default(&model, &s, Mode::Prediction)?;
    let filt = solve_default(&model, &s, Mode::Filtering)?;
    println!(
        "subset {s}: tr P* = {:.4}, tr F* = {:.4}, DARE residual {:.1e}",
        pred.p_star.trace(),
        filt.reference_covariance().trace(),
        dare_residual(&model, &s, &pred.p_star)
    );
    let delta = delta_matrix(&model, &s, &filt)?;
    println!("Δ is {}x{}, max |entry| {:.4}", delta.nrows(), delta.ncols(), delta.amax());

    let (worst, tr) = worst_subset(&model, 1)?;
    println!("least informative 3-subset: {worst} with tr P* = {tr:.4}");
    Ok(())
}
