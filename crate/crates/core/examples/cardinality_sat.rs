use secest::pbsat::{solve, PBConstraint, PBFormula, SolveResult};

fn show(label: &str, f: &PBFormula) -> secest::Result<()> {
    match solve(f)? {
        SolveResult::Sat(a) => {
            let ones: Vec<usize> = (0..f.num_vars).filter(|&i| a.values[i]).collect();
            println!("{label}: sat, true vars {ones:?}");
        }
        SolveResult::Unsat => println!("{label}: unsat"),
    }
    Ok(())
}

fn main() -> secest::Result<()> {
    // Five sensors, at most two attacked.
    let mut f = PBFormula::new(5);
    f.push(PBConstraint::at_most((0..5).collect(), 2)?)?;
    show("Σb ≤ 2", &f)?;

    // Each rejected hypothesis adds "at least one of these is attacked".
    for rejected in [vec![0, 1, 2, 3, 4], vec![2, 3, 4], vec![0, 1, 3], vec![1, 2, 4]] {
        f.push(PBConstraint::at_least(rejected.clone(), 1)?)?;
        show(&format!("+ ≥1 over {rejected:?}"), &f)?;
    }
    print!("{}", f.to_text());
    Ok(())
}
