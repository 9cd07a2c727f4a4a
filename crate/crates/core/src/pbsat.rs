//! Decision procedure for conjunctions of unit-coefficient cardinality
//! constraints `Σ_{i∈vars} b_i ≤ bound` / `≥ bound`.
//!
//! Among satisfying assignments the solver returns the one with the fewest
//! true variables; ties go to the lexicographically smallest set of true
//! indices. Search is iterative deepening on the number of true variables,
//! with depth-first branching (true first, ascending index) and pruning on the
//! achievable range of every constraint sum.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Sense {
    AtMost,
    AtLeast,
}

/// Variable indices are 0-based.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct PBConstraint {
    pub vars: Vec<usize>,
    pub sense: Sense,
    pub bound: usize,
}

impl PBConstraint {
    pub fn new(mut vars: Vec<usize>, sense: Sense, bound: usize) -> Result<Self> {
        vars.sort_unstable();
        vars.dedup();
        if vars.is_empty() {
            return Err(Error::Formula("constraint over no variables".into()));
        }
        Ok(Self { vars, sense, bound })
    }

    pub fn at_most(vars: Vec<usize>, bound: usize) -> Result<Self> {
        Self::new(vars, Sense::AtMost, bound)
    }

    pub fn at_least(vars: Vec<usize>, bound: usize) -> Result<Self> {
        Self::new(vars, Sense::AtLeast, bound)
    }

    pub fn is_satisfied(&self, values: &[bool]) -> bool {
        let sum = self.vars.iter().filter(|&&v| values[v]).count();
        match self.sense {
            Sense::AtMost => sum <= self.bound,
            Sense::AtLeast => sum >= self.bound,
        }
    }
}

impl fmt::Display for PBConstraint {
    /// Line-oriented dump: `≤ k : i1 i2 …` or `≥ k : i1 i2 …`.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let op = match self.sense {
            Sense::AtMost => '≤',
            Sense::AtLeast => '≥',
        };
        write!(f, "{op} {} :", self.bound)?;
        for v in &self.vars {
            write!(f, " {v}")?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct PBFormula {
    pub num_vars: usize,
    pub constraints: Vec<PBConstraint>,
}

impl PBFormula {
    pub fn new(num_vars: usize) -> Self {
        Self {
            num_vars,
            constraints: Vec::new(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        for c in &self.constraints {
            self.check(c)?;
        }
        Ok(())
    }

    fn check(&self, c: &PBConstraint) -> Result<()> {
        if c.vars.is_empty() {
            return Err(Error::Formula("constraint over no variables".into()));
        }
        if let Some(&v) = c.vars.iter().find(|&&v| v >= self.num_vars) {
            return Err(Error::Formula(format!("variable {v} out of range for {} variables", self.num_vars)));
        }
        Ok(())
    }

    /// Conjunction with `c`, as a new formula.
    pub fn add_constraint(&self, c: PBConstraint) -> Result<Self> {
        let mut next = self.clone();
        next.push(c)?;
        Ok(next)
    }

    pub fn push(&mut self, c: PBConstraint) -> Result<()> {
        self.check(&c)?;
        self.constraints.push(c);
        Ok(())
    }

    pub fn is_satisfied(&self, values: &[bool]) -> bool {
        values.len() == self.num_vars && self.constraints.iter().all(|c| c.is_satisfied(values))
    }

    /// One constraint per line, preceded by a `p <num_vars> <num_constraints>` header.
    pub fn to_text(&self) -> String {
        let mut out = format!("p {} {}\n", self.num_vars, self.constraints.len());
        for c in &self.constraints {
            out.push_str(&c.to_string());
            out.push('\n');
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Assignment {
    pub values: Vec<bool>,
}

impl Assignment {
    pub fn true_indices(&self) -> Vec<usize> {
        self.values.iter().enumerate().filter(|(_, &b)| b).map(|(i, _)| i).collect()
    }

    pub fn count_true(&self) -> usize {
        self.values.iter().filter(|&&b| b).count()
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum SolveResult {
    Sat(Assignment),
    Unsat,
}

impl SolveResult {
    pub fn assignment(&self) -> Option<&Assignment> {
        match self {
            SolveResult::Sat(a) => Some(a),
            SolveResult::Unsat => None,
        }
    }
}

struct Search<'f> {
    formula: &'f PBFormula,
    occurs: Vec<Vec<usize>>,
    trues: Vec<usize>,
    free: Vec<usize>,
    values: Vec<bool>,
    target: usize,
}

impl Search<'_> {
    fn feasible(&self, ci: usize) -> bool {
        let c = &self.formula.constraints[ci];
        match c.sense {
            Sense::AtMost => self.trues[ci] <= c.bound,
            Sense::AtLeast => self.trues[ci] + self.free[ci] >= c.bound,
        }
    }

    fn assign(&mut self, v: usize, value: bool) -> bool {
        self.values[v] = value;
        let mut ok = true;
        for &ci in &self.occurs[v] {
            self.free[ci] -= 1;
            if value {
                self.trues[ci] += 1;
            }
            ok &= self.feasible(ci);
        }
        ok
    }

    fn unassign(&mut self, v: usize) {
        for &ci in &self.occurs[v] {
            self.free[ci] += 1;
            if self.values[v] {
                self.trues[ci] -= 1;
            }
        }
        self.values[v] = false;
    }

    fn dfs(&mut self, v: usize, used: usize) -> bool {
        let n = self.formula.num_vars;
        if v == n {
            return used == self.target;
        }
        if used + (n - v) < self.target {
            return false;
        }
        if used < self.target {
            let ok = self.assign(v, true);
            if ok && self.dfs(v + 1, used + 1) {
                return true;
            }
            self.unassign(v);
        }
        let ok = self.assign(v, false);
        if ok && self.dfs(v + 1, used) {
            return true;
        }
        self.unassign(v);
        false
    }
}

pub fn solve(formula: &PBFormula) -> Result<SolveResult> {
    formula.validate()?;
    let n = formula.num_vars;
    let mut occurs = vec![Vec::new(); n];
    for (ci, c) in formula.constraints.iter().enumerate() {
        for &v in &c.vars {
            occurs[v].push(ci);
        }
    }
    let free: Vec<usize> = formula.constraints.iter().map(|c| c.vars.len()).collect();
    let mut search = Search {
        formula,
        occurs,
        trues: vec![0; formula.constraints.len()],
        free,
        values: vec![false; n],
        target: 0,
    };
    if (0..formula.constraints.len()).any(|ci| !search.feasible(ci)) {
        return Ok(SolveResult::Unsat);
    }
    for target in 0..=n {
        search.target = target;
        if search.dfs(0, 0) {
            let values = search.values.clone();
            debug_assert!(formula.is_satisfied(&values));
            return Ok(SolveResult::Sat(Assignment { values }));
        }
    }
    Ok(SolveResult::Unsat)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn brute_force(f: &PBFormula) -> SolveResult {
        let n = f.num_vars;
        let mut best: Option<Vec<bool>> = None;
        for mask in 0u32..(1 << n) {
            let values: Vec<bool> = (0..n).map(|i| mask >> i & 1 == 1).collect();
            if !f.is_satisfied(&values) {
                continue;
            }
            let key = |v: &[bool]| {
                let idx: Vec<usize> = (0..n).filter(|&i| v[i]).collect();
                (idx.len(), idx)
            };
            if best.as_ref().is_none_or(|b| key(&values) < key(b)) {
                best = Some(values);
            }
        }
        best.map_or(SolveResult::Unsat, |values| SolveResult::Sat(Assignment { values }))
    }

    fn count_satisfying(f: &PBFormula) -> usize {
        (0u32..(1 << f.num_vars))
            .filter(|mask| f.is_satisfied(&(0..f.num_vars).map(|i| mask >> i & 1 == 1).collect::<Vec<_>>()))
            .count()
    }

    fn formula(n: usize, cs: &[(&[usize], Sense, usize)]) -> PBFormula {
        let mut f = PBFormula::new(n);
        for (vars, sense, bound) in cs {
            f.push(PBConstraint::new(vars.to_vec(), *sense, *bound).unwrap()).unwrap();
        }
        f
    }

    #[test]
    fn examples() {
        let f = formula(3, &[(&[0, 1, 2], Sense::AtMost, 1)]);
        assert_eq!(solve(&f).unwrap().assignment().unwrap().values, vec![false; 3]);

        let f = formula(3, &[(&[0, 1, 2], Sense::AtMost, 1), (&[0, 1], Sense::AtLeast, 1)]);
        assert_eq!(solve(&f).unwrap().assignment().unwrap().values, vec![true, false, false]);

        let f = formula(2, &[(&[0, 1], Sense::AtMost, 0), (&[0, 1], Sense::AtLeast, 1)]);
        assert_eq!(solve(&f).unwrap(), SolveResult::Unsat);
    }

    #[test]
    fn certificate_pruning_counts() {
        let empty = PBFormula::new(3);
        assert_eq!(count_satisfying(&empty), 8);
        let single = empty.add_constraint(PBConstraint::at_least(vec![2], 1).unwrap()).unwrap();
        assert_eq!(count_satisfying(&single), 4);
        let full = empty.add_constraint(PBConstraint::at_least(vec![0, 1, 2], 1).unwrap()).unwrap();
        assert_eq!(count_satisfying(&full), 7);
        assert!(!full.is_satisfied(&[false, false, false]));
        let dup = full.add_constraint(PBConstraint::at_least(vec![0, 1, 2], 1).unwrap()).unwrap();
        assert_eq!(count_satisfying(&dup), 7);
        assert_eq!(empty.constraints.len(), 0);
    }

    #[test]
    fn malformed_constraints_rejected() {
        assert!(matches!(PBConstraint::at_most(vec![], 1), Err(Error::Formula(_))));
        let f = PBFormula::new(2);
        assert!(matches!(
            f.add_constraint(PBConstraint::at_most(vec![0, 2], 1).unwrap()),
            Err(Error::Formula(_))
        ));
        let bad = PBFormula {
            num_vars: 1,
            constraints: vec![PBConstraint::at_most(vec![3], 0).unwrap()],
        };
        assert!(solve(&bad).is_err());
    }

    #[test]
    fn text_dump() {
        let f = formula(4, &[(&[0, 1, 2, 3], Sense::AtMost, 1), (&[2, 0], Sense::AtLeast, 1)]);
        assert_eq!(f.to_text(), "p 4 2\n≤ 1 : 0 1 2 3\n≥ 1 : 0 2\n");
    }

    fn arb_formula() -> impl Strategy<Value = PBFormula> {
        (1usize..=12).prop_flat_map(|n| {
            let c = (
                proptest::collection::btree_set(0..n, 1..=n),
                any::<bool>(),
                0usize..=4,
            )
                .prop_map(|(vars, at_most, bound)| {
                    let sense = if at_most { Sense::AtMost } else { Sense::AtLeast };
                    PBConstraint::new(vars.into_iter().collect(), sense, bound).unwrap()
                });
            proptest::collection::vec(c, 0..8).prop_map(move |constraints| PBFormula {
                num_vars: n,
                constraints,
            })
        })
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(200))]

        #[test]
        fn agrees_with_enumeration(f in arb_formula()) {
            let got = solve(&f).unwrap();
            prop_assert_eq!(&got, &brute_force(&f));
            if let SolveResult::Sat(a) = &got {
                prop_assert!(f.is_satisfied(&a.values));
            }
        }

        #[test]
        fn adding_constraints_never_enlarges(f in arb_formula(), extra in proptest::collection::btree_set(0usize..12, 1..4), bound in 0usize..3) {
            let vars: Vec<usize> = extra.into_iter().filter(|&v| v < f.num_vars).collect();
            prop_assume!(!vars.is_empty());
            let g = f.add_constraint(PBConstraint::at_least(vars, bound).unwrap()).unwrap();
            prop_assert!(count_satisfying(&g) <= count_satisfying(&f));
        }
    }
}
