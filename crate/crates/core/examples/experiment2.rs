use secest::cli::{run_experiment2, Scenario, Sweep};

fn main() -> secest::Result<()> {
    let mut scenario = Scenario::experiment2();
    scenario.repetitions = 3;
    scenario.sweep = Some(Sweep { p_values: vec![6, 9, 12] });
    let r = run_experiment2(&scenario, false)?;
    println!("  p  k  checks(exh)  checks(smt)  time(exh)  time(smt)");
    for (row, t) in r.rows.iter().zip(&r.timing) {
        println!(
            "{:>3} {:>2} {:>12.1} {:>12.1} {:>10.4} {:>10.4}",
            row.p, row.k, row.mean_checks_exhaustive, row.mean_checks_smt, t.mean_time_exhaustive, t.mean_time_smt
        );
    }
    Ok(())
}
