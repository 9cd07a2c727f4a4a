//! Residue test over all 3-subsets of five sensors, two of them attacked.

use secest::cli::{run_experiment1, Scenario};

fn main() -> secest::Result<()> {
    let mut scenario = Scenario::experiment1();
    scenario.repetitions = 3;
    let r = run_experiment1(&scenario)?;
    for seed in &r.seeds {
        println!("seed {} attacked {:?}", seed.seed, seed.attacked);
        for row in r.rows.iter().filter(|x| x.seed == seed.seed) {
            println!(
                "  {{{}}} max dev {:>7.3} {}",
                row.subset,
                row.max_deviation,
                if row.passed { "PASS" } else { "" }
            );
        }
    }
    println!("exact complement rate {:.2}", r.exact_complement_rate);
    Ok(())
}
