use nalgebra::DVector;
use secest::model::make_random_stable_system;
use secest::noiseless::{ambiguity_example, ambiguity_observation, decode, detect_corruption, encode, min_symbol_distance};

fn main() -> secest::Result<()> {
    let mut model = make_random_stable_system(3, 6, 0.9, 5)?;
    model.sigma_w2 = 0.0;
    model.sigma_v2 = 0.0;
    println!("minimum symbol distance {}", min_symbol_distance(&model)?);

    let x0 = DVector::from_column_slice(&[0.5, -1.0, 2.0]);
    let mut y = encode(&model, &x0)?;
    let fake = encode(&model, &DVector::from_column_slice(&[3.0, 3.0, 3.0]))?;
    for d in [2, 6] {
        y.replace(d, fake.symbols[d - 1].clone())?;
    }
    println!("corruption detected: {}", detect_corruption(&model, &y)?);
    let r = decode(&model, &y, 2)?;
    println!("decoded {:?}, corrupted {:?}, unique {}", r.state, r.corrupted, r.unique);

    // Too many corruptions for the distance: two states explain the symbols.
    let amb = ambiguity_example()?;
    let (y, _) = ambiguity_observation(&amb, &DVector::from_column_slice(&[0.3, 0.4]))?;
    let r = decode(&amb, &y, 2)?;
    println!("ambiguous case: unique {}", r.unique);
    for e in &r.explanations {
        println!("  sensors {} → x(0) = {:?}", e.subset, e.state);
    }
    Ok(())
}
