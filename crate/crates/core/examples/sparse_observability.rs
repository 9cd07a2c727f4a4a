use nalgebra::DMatrix;
use secest::model::{make_random_stable_system, SystemModel};
use secest::obsv::{is_observable, lambda_min_s_minus_k, sparse_observability_index, SensorSubset};

fn main() -> secest::Result<()> {
    // A = 0.9 I: no single sensor sees both states, any two independent rows do.
    let a = DMatrix::from_diagonal_element(2, 2, 0.9);
    let c = DMatrix::from_row_slice(4, 2, &[1.0, 0.0, 0.0, 1.0, 1.0, 1.0, 1.0, -1.0]);
    let m = SystemModel::new(a, c, 1.0, 1.0)?;
    println!("scaled identity: θ = {}", sparse_observability_index(&m)?);
    println!("  {{1}} observable: {}", is_observable(&m, &SensorSubset::new(vec![1], 4)?)?);
    println!("  {{1,2}} observable: {}", is_observable(&m, &SensorSubset::new(vec![1, 2], 4)?)?);

    for (n, p) in [(2, 3), (4, 6), (8, 5)] {
        let m = make_random_stable_system(n, p, 0.8, 11)?;
        let full = SensorSubset::full(p);
        println!(
            "random n={n} p={p}: θ = {}, λ_min after removing one sensor = {:.4}",
            sparse_observability_index(&m)?,
            lambda_min_s_minus_k(&m, &full, 1)?
        );
    }
    Ok(())
}
