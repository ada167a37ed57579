//! Dense two-phase simplex with Bland's rule.
//!
//! A deliberately small, dependency-free LP routine. All solver LPs at desk
//! scale are dense and tiny, so a textbook tableau with anti-cycling pivots
//! is the right tool: deterministic, reentrant, and easy to audit.

use crate::error::{Result, SolverError};

/// Pivot tolerance shared by all LP decisions.
pub const LP_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Relation {
    Le,
    Ge,
    Eq,
}

/// minimize c.x subject to rows, each variable either free or nonnegative.
#[derive(Debug, Clone)]
pub struct LinearProgram {
    n_vars: usize,
    objective: Vec<f64>,
    free: Vec<bool>,
    rows: Vec<(Vec<f64>, Relation, f64)>,
}

#[derive(Debug, Clone)]
pub enum LpResult {
    Optimal { value: f64, x: Vec<f64> },
    Infeasible,
    Unbounded,
}

impl LpResult {
    /// Unwrap an optimum, mapping the degenerate outcomes to errors.
    pub fn optimal(self, context: &str) -> Result<(f64, Vec<f64>)> {
        match self {
            LpResult::Optimal { value, x } => Ok((value, x)),
            LpResult::Infeasible => Err(SolverError::numerical(format!(
                "{context}: LP infeasible"
            ))),
            LpResult::Unbounded => Err(SolverError::numerical(format!(
                "{context}: LP unbounded"
            ))),
        }
    }
}

impl LinearProgram {
    /// All variables nonnegative by default; call `set_free` to relax.
    pub fn minimize(objective: Vec<f64>) -> Self {
        let n = objective.len();
        LinearProgram {
            n_vars: n,
            objective,
            free: vec![false; n],
            rows: Vec::new(),
        }
    }

    pub fn set_free(&mut self, var: usize) {
        self.free[var] = true;
    }

    pub fn constrain(&mut self, coeffs: Vec<f64>, rel: Relation, rhs: f64) {
        debug_assert_eq!(coeffs.len(), self.n_vars);
        self.rows.push((coeffs, rel, rhs));
    }

    pub fn solve(&self) -> LpResult {
        Tableau::build(self).solve()
    }
}

/// Column roles in the standard-form tableau.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum ColKind {
    /// Structural column; payload maps back to (variable index, sign).
    Structural { var: usize, negated: bool },
    Slack,
    Artificial,
}

struct Tableau {
    m: usize,
    n: usize,
    /// m rows of n coefficients plus rhs at index n.
    rows: Vec<Vec<f64>>,
    kind: Vec<ColKind>,
    cost: Vec<f64>,
    basis: Vec<usize>,
    n_vars: usize,
}

impl Tableau {
    fn build(lp: &LinearProgram) -> Tableau {
        // column layout: for each variable one column (plus a negated twin if
        // free), then slack/surplus columns, then artificials.
        let mut kind: Vec<ColKind> = Vec::new();
        let mut var_col: Vec<usize> = Vec::with_capacity(lp.n_vars);
        for v in 0..lp.n_vars {
            var_col.push(kind.len());
            kind.push(ColKind::Structural {
                var: v,
                negated: false,
            });
            if lp.free[v] {
                kind.push(ColKind::Structural {
                    var: v,
                    negated: true,
                });
            }
        }
        let n_struct = kind.len();

        let m = lp.rows.len();
        let mut rows: Vec<Vec<f64>> = Vec::with_capacity(m);
        let mut row_needs: Vec<(bool, bool)> = Vec::with_capacity(m); // (slack, artificial)
        let mut slack_sign: Vec<f64> = Vec::with_capacity(m);
        for (coeffs, rel, rhs) in &lp.rows {
            // normalize to rhs >= 0, flipping the relation with the sign;
            // Ge rows with zero rhs flip to Le so they need no artificial
            let flip = *rhs < 0.0 || (*rhs == 0.0 && *rel == Relation::Ge);
            let sign = if flip { -1.0 } else { 1.0 };
            let rel = if flip {
                match rel {
                    Relation::Le => Relation::Ge,
                    Relation::Ge => Relation::Le,
                    Relation::Eq => Relation::Eq,
                }
            } else {
                *rel
            };
            let mut row = vec![0.0; n_struct + 1];
            for (v, &c) in coeffs.iter().enumerate() {
                let col = var_col[v];
                row[col] = sign * c;
                if lp.free[v] {
                    row[col + 1] = -sign * c;
                }
            }
            row[n_struct] = rhs.abs();
            match rel {
                Relation::Le => {
                    row_needs.push((true, false));
                    slack_sign.push(1.0);
                }
                Relation::Ge => {
                    row_needs.push((true, true));
                    slack_sign.push(-1.0);
                }
                Relation::Eq => {
                    row_needs.push((false, true));
                    slack_sign.push(0.0);
                }
            }
            rows.push(row);
        }
        let mut n_total = n_struct;
        let mut slack_col: Vec<Option<usize>> = vec![None; m];
        for r in 0..m {
            if slack_sign[r] != 0.0 {
                slack_col[r] = Some(n_total);
                kind.push(ColKind::Slack);
                n_total += 1;
            }
        }
        let mut art_col: Vec<Option<usize>> = vec![None; m];
        for r in 0..m {
            let (_, needs_art) = row_needs[r];
            if needs_art {
                art_col[r] = Some(n_total);
                kind.push(ColKind::Artificial);
                n_total += 1;
            }
        }

        // widen rows to the full column count, moving rhs to the end
        let mut full_rows: Vec<Vec<f64>> = Vec::with_capacity(m);
        let mut basis = vec![0usize; m];
        for r in 0..m {
            let mut row = vec![0.0; n_total + 1];
            row[..n_struct].copy_from_slice(&rows[r][..n_struct]);
            row[n_total] = rows[r][n_struct];
            if let Some(c) = slack_col[r] {
                row[c] = slack_sign[r];
            }
            if let Some(c) = art_col[r] {
                row[c] = 1.0;
                basis[r] = c;
            } else {
                basis[r] = slack_col[r].expect("row without slack needs artificial");
            }
            full_rows.push(row);
        }

        // expanded structural cost vector
        let mut cost = vec![0.0; n_total];
        for (col, k) in kind.iter().enumerate() {
            if let ColKind::Structural { var, negated } = k {
                cost[col] = if *negated {
                    -lp.objective[*var]
                } else {
                    lp.objective[*var]
                };
            }
        }

        Tableau {
            m,
            n: n_total,
            rows: full_rows,
            kind,
            cost,
            basis,
            n_vars: lp.n_vars,
        }
    }

    fn solve(mut self) -> LpResult {
        // phase 1: minimize the sum of artificials
        let has_artificial = self.kind.iter().any(|k| *k == ColKind::Artificial);
        if has_artificial {
            let phase1_cost: Vec<f64> = self
                .kind
                .iter()
                .map(|k| if *k == ColKind::Artificial { 1.0 } else { 0.0 })
                .collect();
            match self.run_simplex(&phase1_cost, true) {
                SimplexOutcome::Optimal(obj) => {
                    if obj > 1e-7 {
                        return LpResult::Infeasible;
                    }
                }
                SimplexOutcome::Unbounded => {
                    // phase 1 objective is bounded below by 0
                    return LpResult::Infeasible;
                }
            }
            self.evict_basic_artificials();
        }

        // phase 2: original objective, artificials barred from entering
        let cost = self.cost.clone();
        match self.run_simplex(&cost, false) {
            SimplexOutcome::Optimal(value) => {
                let x = self.extract_solution();
                LpResult::Optimal { value, x }
            }
            SimplexOutcome::Unbounded => LpResult::Unbounded,
        }
    }

    /// Pivot any artificial still basic (at value 0) out of the basis, or
    /// drop its row when the row is entirely zero over usable columns.
    fn evict_basic_artificials(&mut self) {
        for r in 0..self.m {
            if self.kind[self.basis[r]] != ColKind::Artificial {
                continue;
            }
            let pivot_col = (0..self.n)
                .find(|&c| self.kind[c] != ColKind::Artificial && self.rows[r][c].abs() > LP_TOL);
            if let Some(c) = pivot_col {
                self.pivot(r, c);
            }
            // if no usable pivot the row is redundant; the artificial stays
            // basic at value zero and never re-enters, which is harmless
        }
    }

    fn run_simplex(&mut self, cost: &[f64], allow_artificial: bool) -> SimplexOutcome {
        // reduced-cost row r_j = c_j - c_B B^-1 A_j, maintained incrementally
        let mut reduced = vec![0.0; self.n];
        for c in 0..self.n {
            let mut z = 0.0;
            for r in 0..self.m {
                z += cost[self.basis[r]] * self.rows[r][c];
            }
            reduced[c] = cost[c] - z;
        }
        for r in 0..self.m {
            reduced[self.basis[r]] = 0.0;
        }
        loop {
            // Bland: the smallest column index with a negative reduced cost
            let mut entering: Option<usize> = None;
            for c in 0..self.n {
                if !allow_artificial && self.kind[c] == ColKind::Artificial {
                    continue;
                }
                if reduced[c] < -LP_TOL {
                    entering = Some(c);
                    break;
                }
            }
            let Some(col) = entering else {
                let mut obj = 0.0;
                for r in 0..self.m {
                    obj += cost[self.basis[r]] * self.rows[r][self.n];
                }
                return SimplexOutcome::Optimal(obj);
            };

            // ratio test; Bland tie-break on the smallest basic column index
            let mut leave: Option<(usize, f64)> = None;
            for r in 0..self.m {
                let a = self.rows[r][col];
                if a > LP_TOL {
                    let ratio = self.rows[r][self.n].max(0.0) / a;
                    match leave {
                        None => leave = Some((r, ratio)),
                        Some((br, bratio)) => {
                            if ratio < bratio - LP_TOL
                                || (ratio < bratio + LP_TOL && self.basis[r] < self.basis[br])
                            {
                                leave = Some((r, ratio));
                            }
                        }
                    }
                }
            }
            let Some((row, _)) = leave else {
                return SimplexOutcome::Unbounded;
            };
            self.pivot(row, col);
            // same row operation on the reduced-cost row
            let factor = reduced[col];
            if factor != 0.0 {
                for c in 0..self.n {
                    reduced[c] -= factor * self.rows[row][c];
                }
            }
            reduced[col] = 0.0;
        }
    }

    fn pivot(&mut self, row: usize, col: usize) {
        let pivot = self.rows[row][col];
        let inv = 1.0 / pivot;
        for v in self.rows[row].iter_mut() {
            *v *= inv;
        }
        for r in 0..self.m {
            if r == row {
                continue;
            }
            let factor = self.rows[r][col];
            if factor == 0.0 {
                continue;
            }
            for c in 0..=self.n {
                self.rows[r][c] -= factor * self.rows[row][c];
            }
        }
        self.basis[row] = col;
    }

    fn extract_solution(&self) -> Vec<f64> {
        let mut x = vec![0.0; self.n_vars];
        for r in 0..self.m {
            let col = self.basis[r];
            if let ColKind::Structural { var, negated } = self.kind[col] {
                let v = self.rows[r][self.n];
                if negated {
                    x[var] -= v;
                } else {
                    x[var] += v;
                }
            }
        }
        x
    }
}

enum SimplexOutcome {
    Optimal(f64),
    Unbounded,
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn basic_bounded_lp() {
        // minimize -2x - 3y st x + y <= 4, x + 3y <= 6, x,y >= 0
        let mut lp = LinearProgram::minimize(vec![-2.0, -3.0]);
        lp.constrain(vec![1.0, 1.0], Relation::Le, 4.0);
        lp.constrain(vec![1.0, 3.0], Relation::Le, 6.0);
        let (value, x) = lp.solve().optimal("test").unwrap();
        assert!((value - (-9.0)).abs() < 1e-9, "value {value}");
        assert!((x[0] - 3.0).abs() < 1e-9 && (x[1] - 1.0).abs() < 1e-9);
    }

    #[test]
    fn equality_and_free_variables() {
        // minimize t st t >= 1 - x, t >= 1 + x, x free  ->  t = 1 at x = 0
        let mut lp = LinearProgram::minimize(vec![1.0, 0.0]);
        lp.set_free(0);
        lp.set_free(1);
        lp.constrain(vec![1.0, 1.0], Relation::Ge, 1.0);
        lp.constrain(vec![1.0, -1.0], Relation::Ge, 1.0);
        let (value, x) = lp.solve().optimal("test").unwrap();
        assert!((value - 1.0).abs() < 1e-9);
        assert!(x[1].abs() < 1e-9);
    }

    #[test]
    fn infeasible_detected() {
        let mut lp = LinearProgram::minimize(vec![1.0]);
        lp.constrain(vec![1.0], Relation::Le, 1.0);
        lp.constrain(vec![1.0], Relation::Ge, 2.0);
        assert!(matches!(lp.solve(), LpResult::Infeasible));
    }

    #[test]
    fn unbounded_detected() {
        let mut lp = LinearProgram::minimize(vec![-1.0]);
        lp.set_free(0);
        lp.constrain(vec![0.0], Relation::Le, 1.0);
        assert!(matches!(lp.solve(), LpResult::Unbounded));
    }

    #[test]
    fn equality_with_negative_rhs() {
        // minimize x + y st x - y = -2, x >= 0, y >= 0 -> x=0, y=2
        let mut lp = LinearProgram::minimize(vec![1.0, 1.0]);
        lp.constrain(vec![1.0, -1.0], Relation::Eq, -2.0);
        let (value, x) = lp.solve().optimal("test").unwrap();
        assert!((value - 2.0).abs() < 1e-9);
        assert!(x[0].abs() < 1e-9 && (x[1] - 2.0).abs() < 1e-9);
    }

    #[test]
    fn degenerate_cycling_guard() {
        // a classic degenerate instance; Bland's rule must terminate
        let mut lp = LinearProgram::minimize(vec![-0.75, 150.0, -0.02, 6.0]);
        lp.constrain(vec![0.25, -60.0, -0.04, 9.0], Relation::Le, 0.0);
        lp.constrain(vec![0.5, -90.0, -0.02, 3.0], Relation::Le, 0.0);
        lp.constrain(vec![0.0, 0.0, 1.0, 0.0], Relation::Le, 1.0);
        let (value, _) = lp.solve().optimal("test").unwrap();
        assert!((value - (-0.05)).abs() < 1e-9, "value {value}");
    }

    #[test]
    fn redundant_equalities_are_tolerated() {
        let mut lp = LinearProgram::minimize(vec![1.0, 1.0]);
        lp.constrain(vec![1.0, 1.0], Relation::Eq, 1.0);
        lp.constrain(vec![2.0, 2.0], Relation::Eq, 2.0);
        let (value, _) = lp.solve().optimal("test").unwrap();
        assert!((value - 1.0).abs() < 1e-9);
    }
}
