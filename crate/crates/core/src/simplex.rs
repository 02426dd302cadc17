//! Small exact-rational LP solver (two-phase primal simplex, Bland's rule).
//!
//! Desk-scale problems only: a handful of variables and rows. Used for
//! continuous dispatch subproblems and mixture-certificate feasibility.

use crate::rat::Rat;
use num_traits::{One, Signed, Zero};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Relation {
    Eq,
    Le,
}

#[derive(Debug, Clone)]
pub struct LpRow {
    pub coeffs: Vec<Rat>,
    pub relation: Relation,
    pub rhs: Rat,
}

/// maximize objective · x subject to rows and box bounds.
#[derive(Debug, Clone)]
pub struct Lp {
    pub objective: Vec<Rat>,
    pub rows: Vec<LpRow>,
    /// inclusive [lo, hi] per variable
    pub bounds: Vec<(Rat, Rat)>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum LpOutcome {
    Optimal { value: Rat, solution: Vec<Rat> },
    Infeasible,
    Unbounded,
}

pub fn solve_lp(lp: &Lp) -> LpOutcome {
    let n = lp.objective.len();
    debug_assert_eq!(lp.bounds.len(), n);
    for (lo, hi) in &lp.bounds {
        if lo > hi {
            return LpOutcome::Infeasible;
        }
    }

    // Shift variables to y = x - lo >= 0 and add explicit upper-bound rows.
    let mut rows: Vec<(Vec<Rat>, Rat)> = Vec::new(); // equality rows over extended vars
    let mut n_total = n;
    let mut le_rows: Vec<(Vec<Rat>, Rat)> = Vec::new();

    for row in &lp.rows {
        let mut rhs = row.rhs.clone();
        for (j, c) in row.coeffs.iter().enumerate() {
            rhs -= c * &lp.bounds[j].0;
        }
        match row.relation {
            Relation::Eq => rows.push((row.coeffs.clone(), rhs)),
            Relation::Le => le_rows.push((row.coeffs.clone(), rhs)),
        }
    }
    for (j, (lo, hi)) in lp.bounds.iter().enumerate() {
        let mut coeffs = vec![Rat::zero(); n];
        coeffs[j] = Rat::one();
        le_rows.push((coeffs, hi - lo));
    }
    // slacks for <= rows
    let num_slacks = le_rows.len();
    for (idx, (coeffs, rhs)) in le_rows.into_iter().enumerate() {
        let mut c = coeffs;
        c.resize(n + num_slacks, Rat::zero());
        c[n + idx] = Rat::one();
        rows.push((c, rhs));
    }
    n_total += num_slacks;
    for (c, _) in rows.iter_mut() {
        c.resize(n_total, Rat::zero());
    }

    let m = rows.len();
    // tableau with artificials: columns [vars | artificials | rhs]
    let mut tab: Vec<Vec<Rat>> = Vec::with_capacity(m + 1);
    for (i, (coeffs, rhs)) in rows.iter().enumerate() {
        let mut r: Vec<Rat> = coeffs.clone();
        let flip = rhs.is_negative();
        if flip {
            for c in r.iter_mut() {
                *c = -c.clone();
            }
        }
        r.resize(n_total + m, Rat::zero());
        r[n_total + i] = Rat::one();
        r.push(if flip { -rhs.clone() } else { rhs.clone() });
        tab.push(r);
    }
    let mut basis: Vec<usize> = (0..m).map(|i| n_total + i).collect();

    // Phase 1: minimize sum of artificials == maximize -(sum)
    let mut obj1 = vec![Rat::zero(); n_total + m + 1];
    for i in 0..m {
        // objective row = sum of constraint rows over artificial basis, negated
        for j in 0..=(n_total + m) {
            let v = tab[i][j].clone();
            obj1[j] += v;
        }
    }
    for a in obj1.iter_mut().take(n_total + m).skip(n_total) {
        *a = Rat::zero();
    }
    // reduced costs for phase 1: maximize -(sum art) => row = sum of rows with
    // artificial basics; entering when coefficient positive
    let feasible = simplex_loop(&mut tab, &mut basis, &mut obj1, n_total + m);
    if !feasible {
        return LpOutcome::Infeasible; // unbounded phase 1 cannot happen
    }
    if obj1[n_total + m].is_positive() {
        return LpOutcome::Infeasible;
    }
    // drive remaining artificials out of the basis when possible
    for i in 0..m {
        if basis[i] >= n_total {
            if let Some(j) = (0..n_total).find(|&j| !tab[i][j].is_zero()) {
                pivot(&mut tab, &mut basis, &mut obj1, i, j);
            }
        }
    }

    // Phase 2 objective over shifted vars
    let mut obj2 = vec![Rat::zero(); n_total + m + 1];
    for (j, c) in lp.objective.iter().enumerate() {
        obj2[j] = c.clone();
    }
    // express objective in terms of non-basic variables
    for i in 0..m {
        if basis[i] < n_total {
            let c = obj2[basis[i]].clone();
            if !c.is_zero() {
                for j in 0..=(n_total + m) {
                    let d = &c * &tab[i][j];
                    obj2[j] -= d;
                }
                obj2[basis[i]] = Rat::zero();
            }
        }
    }
    // forbid re-entering artificials
    let cols = n_total;
    loop {
        // Bland: smallest index with positive reduced cost
        let mut entering: Option<usize> = None;
        for (j, o) in obj2.iter().enumerate().take(cols) {
            if basis.contains(&j) {
                continue;
            }
            if o.is_positive() {
                entering = Some(j);
                break;
            }
        }
        let Some(e) = entering else { break };
        let mut leave: Option<(usize, Rat)> = None;
        for i in 0..m {
            if tab[i][e].is_positive() {
                let ratio = &tab[i][n_total + m] / &tab[i][e];
                match &leave {
                    Some((li, lr)) => {
                        if ratio < *lr || (ratio == *lr && basis[i] < basis[*li]) {
                            leave = Some((i, ratio));
                        }
                    }
                    None => leave = Some((i, ratio)),
                }
            }
        }
        let Some((li, _)) = leave else {
            return LpOutcome::Unbounded;
        };
        pivot(&mut tab, &mut basis, &mut obj2, li, e);
    }

    let mut y = vec![Rat::zero(); n_total];
    for i in 0..m {
        if basis[i] < n_total {
            y[basis[i]] = tab[i][n_total + m].clone();
        }
    }
    let mut solution = Vec::with_capacity(n);
    let mut value = Rat::zero();
    for j in 0..n {
        let x = &y[j] + &lp.bounds[j].0;
        value += &lp.objective[j] * &x;
        solution.push(x);
    }
    LpOutcome::Optimal { value, solution }
}

/// Phase-1 loop: same Bland pivoting against the phase-1 objective row.
fn simplex_loop(tab: &mut [Vec<Rat>], basis: &mut [usize], obj: &mut [Rat], cols: usize) -> bool {
    let m = tab.len();
    let rhs_col = tab[0].len() - 1;
    loop {
        let mut entering: Option<usize> = None;
        for (j, o) in obj.iter().enumerate().take(cols) {
            if basis.contains(&j) {
                continue;
            }
            if o.is_positive() {
                entering = Some(j);
                break;
            }
        }
        let Some(e) = entering else { return true };
        let mut leave: Option<(usize, Rat)> = None;
        for i in 0..m {
            if tab[i][e].is_positive() {
                let ratio = &tab[i][rhs_col] / &tab[i][e];
                match &leave {
                    Some((li, lr)) => {
                        if ratio < *lr || (ratio == *lr && basis[i] < basis[*li]) {
                            leave = Some((i, ratio));
                        }
                    }
                    None => leave = Some((i, ratio)),
                }
            }
        }
        let Some((li, _)) = leave else { return false };
        pivot(tab, basis, obj, li, e);
    }
}

fn pivot(tab: &mut [Vec<Rat>], basis: &mut [usize], obj: &mut [Rat], row: usize, col: usize) {
    let cols = tab[row].len();
    let p = tab[row][col].clone();
    for v in tab[row].iter_mut() {
        *v /= p.clone();
    }
    for i in 0..tab.len() {
        if i != row && !tab[i][col].is_zero() {
            let f = tab[i][col].clone();
            for j in 0..cols {
                let d = &f * &tab[row][j];
                tab[i][j] -= d;
            }
        }
    }
    if !obj[col].is_zero() {
        let f = obj[col].clone();
        for j in 0..cols {
            let d = &f * &tab[row][j];
            obj[j] -= d;
        }
    }
    basis[row] = col;
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rat::{rat, ratio};

    fn bounds(pairs: &[(i64, i64)]) -> Vec<(Rat, Rat)> {
        pairs.iter().map(|(a, b)| (rat(*a), rat(*b))).collect()
    }

    #[test]
    fn simple_dispatch_lp() {
        // min 20 g1 + 30 g2 s.t. g1 + g2 = 200, 80 <= g <= 160
        let lp = Lp {
            objective: vec![rat(-20), rat(-30)],
            rows: vec![LpRow {
                coeffs: vec![rat(1), rat(1)],
                relation: Relation::Eq,
                rhs: rat(200),
            }],
            bounds: bounds(&[(80, 160), (80, 160)]),
        };
        match solve_lp(&lp) {
            LpOutcome::Optimal { value, solution } => {
                assert_eq!(value, rat(-4800));
                assert_eq!(solution, vec![rat(120), rat(80)]);
            }
            other => panic!("unexpected outcome {other:?}"),
        }
    }

    #[test]
    fn infeasible_balance() {
        let lp = Lp {
            objective: vec![rat(0)],
            rows: vec![LpRow {
                coeffs: vec![rat(1)],
                relation: Relation::Eq,
                rhs: rat(500),
            }],
            bounds: bounds(&[(0, 100)]),
        };
        assert_eq!(solve_lp(&lp), LpOutcome::Infeasible);
    }

    #[test]
    fn le_rows_and_fractional_answers() {
        // max x + y s.t. 2x + y <= 3, x + 3y <= 4, 0 <= x,y <= 10
        let lp = Lp {
            objective: vec![rat(1), rat(1)],
            rows: vec![
                LpRow {
                    coeffs: vec![rat(2), rat(1)],
                    relation: Relation::Le,
                    rhs: rat(3),
                },
                LpRow {
                    coeffs: vec![rat(1), rat(3)],
                    relation: Relation::Le,
                    rhs: rat(4),
                },
            ],
            bounds: bounds(&[(0, 10), (0, 10)]),
        };
        match solve_lp(&lp) {
            LpOutcome::Optimal { value, solution } => {
                assert_eq!(solution, vec![rat(1), rat(1)]);
                assert_eq!(value, rat(2));
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn shifted_lower_bounds() {
        // max -x with x in [5, 9]: optimum at 5
        let lp = Lp {
            objective: vec![rat(-1)],
            rows: vec![],
            bounds: bounds(&[(5, 9)]),
        };
        match solve_lp(&lp) {
            LpOutcome::Optimal { value, solution } => {
                assert_eq!(solution[0], rat(5));
                assert_eq!(value, rat(-5));
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn mixture_feasibility_shape() {
        // lambda1*(100,50) + lambda2*(50,0) = (80,30), lambda in simplex
        let lp = Lp {
            objective: vec![rat(0), rat(0)],
            rows: vec![
                LpRow {
                    coeffs: vec![rat(100), rat(50)],
                    relation: Relation::Eq,
                    rhs: rat(80),
                },
                LpRow {
                    coeffs: vec![rat(50), rat(0)],
                    relation: Relation::Eq,
                    rhs: rat(30),
                },
                LpRow {
                    coeffs: vec![rat(1), rat(1)],
                    relation: Relation::Eq,
                    rhs: rat(1),
                },
            ],
            bounds: bounds(&[(0, 1), (0, 1)]),
        };
        match solve_lp(&lp) {
            LpOutcome::Optimal { solution, .. } => {
                assert_eq!(solution, vec![ratio(3, 5), ratio(2, 5)]);
            }
            other => panic!("unexpected {other:?}"),
        }
    }
}
