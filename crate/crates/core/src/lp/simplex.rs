//! Dense two-phase simplex over exact rationals with Bland's rule.
//!
//! Solves `max c.y  s.t.  A y <= b,  y >= 0` with entries of any sign. Row
//! `i` gets slack column `n + i`; rows with `b_i < 0` are negated and get an
//! artificial column for phase one.

use num_traits::{One, Signed, Zero};

use crate::error::{Error, Result};
use crate::numeric::Rational;

#[derive(Debug, Clone)]
pub struct StandardLp {
    pub c: Vec<Rational>,
    /// `m` rows of length `n`.
    pub a: Vec<Vec<Rational>>,
    pub b: Vec<Rational>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StandardSolution {
    pub y: Vec<Rational>,
    /// Row multipliers `u >= 0` with `A^T u >= c` and `b.u = c.y`.
    pub duals: Vec<Rational>,
    pub value: Rational,
    /// Basic column per row: `< n` structural, `n + i` slack of row `i`.
    pub basis: Vec<usize>,
    /// Reduced costs `c_j - u.A_j` of the structural columns (all `<= 0`).
    pub reduced_costs: Vec<Rational>,
}

impl StandardSolution {
    /// Rows whose slack is nonbasic; together with the nonbasic structural
    /// columns they pin down the optimal vertex.
    pub fn nonbasic_slack_rows(&self, n: usize, m: usize) -> Vec<usize> {
        (0..m).filter(|&i| !self.basis.contains(&(n + i))).collect()
    }

    pub fn basic_structurals(&self, n: usize) -> Vec<usize> {
        let mut cols: Vec<usize> = self.basis.iter().copied().filter(|&j| j < n).collect();
        cols.sort_unstable();
        cols
    }
}

struct Tableau {
    rows: Vec<Vec<Rational>>,
    rhs: Vec<Rational>,
    basis: Vec<usize>,
    /// Reduced cost per column for the current phase objective.
    reduced: Vec<Rational>,
    /// Columns that may enter the basis.
    allowed: Vec<bool>,
}

impl Tableau {
    fn pivot(&mut self, row: usize, col: usize) {
        let piv = self.rows[row][col].clone();
        if !piv.is_one() {
            for x in self.rows[row].iter_mut() {
                *x /= &piv;
            }
            self.rhs[row] /= &piv;
        }
        let pivot_row = self.rows[row].clone();
        let pivot_rhs = self.rhs[row].clone();
        for r in 0..self.rows.len() {
            if r == row {
                continue;
            }
            let factor = self.rows[r][col].clone();
            if factor.is_zero() {
                continue;
            }
            for (x, p) in self.rows[r].iter_mut().zip(&pivot_row) {
                if !p.is_zero() {
                    *x -= &factor * p;
                }
            }
            self.rhs[r] -= &factor * &pivot_rhs;
        }
        let factor = self.reduced[col].clone();
        if !factor.is_zero() {
            for (x, p) in self.reduced.iter_mut().zip(&pivot_row) {
                if !p.is_zero() {
                    *x -= &factor * p;
                }
            }
        }
        self.basis[row] = col;
    }

    /// Runs Bland's rule to optimality. `Err(Unbounded)` if a ray is found.
    fn optimize(&mut self) -> Result<()> {
        loop {
            let entering = (0..self.reduced.len()).find(|&j| self.allowed[j] && self.reduced[j].is_positive());
            let Some(col) = entering else { return Ok(()) };
            let mut best: Option<(usize, Rational)> = None;
            for r in 0..self.rows.len() {
                let coef = &self.rows[r][col];
                if !coef.is_positive() {
                    continue;
                }
                let ratio = &self.rhs[r] / coef;
                let better = match &best {
                    None => true,
                    Some((br, bratio)) => ratio < *bratio || (ratio == *bratio && self.basis[r] < self.basis[*br]),
                };
                if better {
                    best = Some((r, ratio));
                }
            }
            match best {
                Some((row, _)) => self.pivot(row, col),
                None => return Err(Error::Unbounded),
            }
        }
    }

    fn set_objective(&mut self, cost: &[Rational]) {
        let mut reduced = cost.to_vec();
        for (r, &bcol) in self.basis.iter().enumerate() {
            let cb = &cost[bcol];
            if cb.is_zero() {
                continue;
            }
            for (x, t) in reduced.iter_mut().zip(&self.rows[r]) {
                if !t.is_zero() {
                    *x -= cb * t;
                }
            }
        }
        self.reduced = reduced;
    }
}

pub fn solve_standard(lp: &StandardLp) -> Result<StandardSolution> {
    let m = lp.b.len();
    let n = lp.c.len();
    if lp.a.len() != m || lp.a.iter().any(|row| row.len() != n) {
        return Err(Error::input("constraint matrix shape does not match b and c"));
    }

    let negated: Vec<bool> = lp.b.iter().map(|b| b.is_negative()).collect();
    let art_rows: Vec<usize> = (0..m).filter(|&i| negated[i]).collect();
    let total = n + m + art_rows.len();

    let mut rows = Vec::with_capacity(m);
    let mut rhs = Vec::with_capacity(m);
    let mut basis = Vec::with_capacity(m);
    for i in 0..m {
        let sign = if negated[i] { -Rational::one() } else { Rational::one() };
        let mut row = vec![Rational::zero(); total];
        for j in 0..n {
            row[j] = &lp.a[i][j] * &sign;
        }
        row[n + i] = sign.clone();
        if negated[i] {
            let k = art_rows.iter().position(|&r| r == i).expect("artificial row");
            row[n + m + k] = Rational::one();
            basis.push(n + m + k);
        } else {
            basis.push(n + i);
        }
        rows.push(row);
        rhs.push(&lp.b[i] * &sign);
    }

    let mut t = Tableau {
        rows,
        rhs,
        basis,
        reduced: Vec::new(),
        allowed: vec![true; total],
    };

    if !art_rows.is_empty() {
        let mut phase_one = vec![Rational::zero(); total];
        for k in 0..art_rows.len() {
            phase_one[n + m + k] = -Rational::one();
        }
        t.set_objective(&phase_one);
        t.optimize().map_err(|_| Error::input("phase one cannot be unbounded"))?;
        let infeasibility: Rational = t
            .basis
            .iter()
            .zip(&t.rhs)
            .filter(|(&col, _)| col >= n + m)
            .map(|(_, v)| v.clone())
            .sum();
        if infeasibility.is_positive() {
            return Err(Error::Infeasible);
        }
        // drive zero-level artificials out; the slack block keeps rank full
        for r in 0..m {
            if t.basis[r] >= n + m {
                let col = (0..n + m)
                    .find(|&j| !t.rows[r][j].is_zero())
                    .expect("full row rank via slack columns");
                t.pivot(r, col);
            }
        }
        for j in n + m..total {
            t.allowed[j] = false;
        }
    }

    let mut cost = vec![Rational::zero(); total];
    cost[..n].clone_from_slice(&lp.c);
    t.set_objective(&cost);
    t.optimize()?;

    let mut y = vec![Rational::zero(); n];
    for (r, &col) in t.basis.iter().enumerate() {
        if col < n {
            y[col] = t.rhs[r].clone();
        }
    }
    let value: Rational = lp.c.iter().zip(&y).map(|(c, y)| c * y).sum();
    let duals: Vec<Rational> = (0..m).map(|i| -t.reduced[n + i].clone()).collect();
    Ok(StandardSolution {
        y,
        duals,
        value,
        basis: t.basis,
        reduced_costs: t.reduced[..n].to_vec(),
    })
}
