//! Small dense linear programs: two-phase tableau simplex with Bland's rule.
//!
//! Problems here have a handful of rows and a few dozen columns, so a dense
//! tableau recomputing reduced costs every pivot is plenty.

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Relation {
    Le,
    Eq,
    Ge,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, thiserror::Error)]
pub enum LpError {
    #[error("linear program is infeasible")]
    Infeasible,
    #[error("linear program is unbounded")]
    Unbounded,
    #[error("simplex iteration limit reached")]
    IterationLimit,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LpSolution {
    pub x: Vec<f64>,
    pub objective: f64,
}

/// `minimize cᵀx subject to rows, x ≥ 0`.
#[derive(Debug, Clone)]
pub struct LinearProgram {
    n: usize,
    objective: Vec<f64>,
    rows: Vec<(Vec<f64>, Relation, f64)>,
}

const EPS: f64 = 1e-10;

impl LinearProgram {
    pub fn new(n_vars: usize) -> Self {
        Self {
            n: n_vars,
            objective: vec![0.0; n_vars],
            rows: Vec::new(),
        }
    }

    pub fn num_vars(&self) -> usize {
        self.n
    }

    pub fn set_objective(&mut self, c: Vec<f64>) {
        assert_eq!(c.len(), self.n, "objective length");
        self.objective = c;
    }

    pub fn add_constraint(&mut self, coeffs: Vec<f64>, rel: Relation, rhs: f64) {
        assert_eq!(coeffs.len(), self.n, "constraint length");
        self.rows.push((coeffs, rel, rhs));
    }

    pub fn solve(&self) -> Result<LpSolution, LpError> {
        // Normalize to non-negative right-hand sides.
        let rows: Vec<(Vec<f64>, Relation, f64)> = self
            .rows
            .iter()
            .map(|(a, r, b)| {
                if *b < 0.0 {
                    let flipped = match r {
                        Relation::Le => Relation::Ge,
                        Relation::Ge => Relation::Le,
                        Relation::Eq => Relation::Eq,
                    };
                    (a.iter().map(|v| -v).collect(), flipped, -b)
                } else {
                    (a.clone(), *r, *b)
                }
            })
            .collect();
        let m = rows.len();
        let n_slack = rows.iter().filter(|(_, r, _)| *r != Relation::Eq).count();
        let n_art = rows.iter().filter(|(_, r, _)| *r != Relation::Le).count();
        let n_cols = self.n + n_slack + n_art;
        let art_start = self.n + n_slack;

        let mut tab = vec![vec![0.0; n_cols + 1]; m];
        let mut basis = vec![0usize; m];
        let (mut si, mut ai) = (self.n, art_start);
        for (i, (a, r, b)) in rows.iter().enumerate() {
            tab[i][..self.n].copy_from_slice(a);
            tab[i][n_cols] = *b;
            match r {
                Relation::Le => {
                    tab[i][si] = 1.0;
                    basis[i] = si;
                    si += 1;
                }
                Relation::Ge => {
                    tab[i][si] = -1.0;
                    si += 1;
                    tab[i][ai] = 1.0;
                    basis[i] = ai;
                    ai += 1;
                }
                Relation::Eq => {
                    tab[i][ai] = 1.0;
                    basis[i] = ai;
                    ai += 1;
                }
            }
        }

        if n_art > 0 {
            let mut phase1 = vec![0.0; n_cols];
            for c in phase1.iter_mut().skip(art_start) {
                *c = 1.0;
            }
            run_simplex(&mut tab, &mut basis, &phase1, n_cols)?;
            let infeas: f64 = basis
                .iter()
                .enumerate()
                .filter(|(_, &b)| b >= art_start)
                .map(|(i, _)| tab[i][n_cols])
                .sum();
            let scale = 1.0 + rows.iter().map(|(_, _, b)| b.abs()).fold(0.0, f64::max);
            if infeas > 1e-8 * scale {
                return Err(LpError::Infeasible);
            }
            // Drive zero-level artificials out of the basis, dropping redundant rows.
            let mut i = 0;
            while i < tab.len() {
                if basis[i] >= art_start {
                    match (0..art_start).find(|&j| tab[i][j].abs() > 1e-9) {
                        Some(j) => pivot(&mut tab, &mut basis, i, j),
                        None => {
                            tab.remove(i);
                            basis.remove(i);
                            continue;
                        }
                    }
                }
                i += 1;
            }
        }

        let mut cost = vec![0.0; n_cols];
        cost[..self.n].copy_from_slice(&self.objective);
        run_simplex(&mut tab, &mut basis, &cost, art_start)?;

        let mut x = vec![0.0; self.n];
        for (i, &b) in basis.iter().enumerate() {
            if b < self.n {
                x[b] = tab[i][n_cols].max(0.0);
            }
        }
        let objective = x.iter().zip(&self.objective).map(|(a, c)| a * c).sum();
        Ok(LpSolution { x, objective })
    }
}

fn pivot(tab: &mut [Vec<f64>], basis: &mut [usize], row: usize, col: usize) {
    let p = tab[row][col];
    for v in tab[row].iter_mut() {
        *v /= p;
    }
    let pivot_row = tab[row].clone();
    for (i, r) in tab.iter_mut().enumerate() {
        if i == row {
            continue;
        }
        let f = r[col];
        if f != 0.0 {
            for (v, pv) in r.iter_mut().zip(&pivot_row) {
                *v -= f * pv;
            }
        }
    }
    basis[row] = col;
}

/// Minimizes `cost` over the current basis; only columns `< allowed` may enter.
fn run_simplex(tab: &mut [Vec<f64>], basis: &mut [usize], cost: &[f64], allowed: usize) -> Result<(), LpError> {
    let m = tab.len();
    if m == 0 {
        return if cost[..allowed].iter().any(|&c| c < -EPS) {
            Err(LpError::Unbounded)
        } else {
            Ok(())
        };
    }
    let rhs = tab[0].len() - 1;
    let limit = 50 * (rhs + m) + 1000;
    for _ in 0..limit {
        // Bland: lowest-index column with a negative reduced cost.
        let entering = (0..allowed).find(|&j| {
            if basis.contains(&j) {
                return false;
            }
            let r = cost[j] - (0..m).map(|i| cost[basis[i]] * tab[i][j]).sum::<f64>();
            r < -EPS
        });
        let Some(col) = entering else {
            return Ok(());
        };
        let mut leave: Option<(f64, usize, usize)> = None;
        for i in 0..m {
            let a = tab[i][col];
            if a > EPS {
                let ratio = tab[i][rhs] / a;
                let better = match leave {
                    None => true,
                    Some((best, _, b)) => ratio < best - 1e-12 || (ratio <= best + 1e-12 && basis[i] < b),
                };
                if better {
                    leave = Some((ratio, i, basis[i]));
                }
            }
        }
        let Some((_, row, _)) = leave else {
            return Err(LpError::Unbounded);
        };
        pivot(tab, basis, row, col);
    }
    Err(LpError::IterationLimit)
}
