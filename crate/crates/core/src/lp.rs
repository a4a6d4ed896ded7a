//! Exact-rational linear programming.
//!
//! Dense two-phase simplex over [`Rational`] with Bland's rule, for problems
//! of the form `max c·x s.t. A x <= b` with free variables. Instances here
//! are tiny (tens of variables), so the tableau is stored densely and reduced
//! costs are recomputed every pivot.

use num_traits::{Signed, Zero};

use crate::rational::{self, dot, Rational};
use crate::{check_dim, Result};

/// Rows `a·x <= b` over a fixed dimension.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConstraintSystem {
    dimension: usize,
    rows: Vec<(Vec<Rational>, Rational)>,
}

impl ConstraintSystem {
    pub fn new(dimension: usize) -> Self {
        Self {
            dimension,
            rows: Vec::new(),
        }
    }

    pub fn from_rows(dimension: usize, rows: Vec<(Vec<Rational>, Rational)>) -> Result<Self> {
        let mut cs = Self::new(dimension);
        for (a, b) in rows {
            cs.push(a, b)?;
        }
        Ok(cs)
    }

    pub fn push(&mut self, a: Vec<Rational>, b: Rational) -> Result<()> {
        check_dim("constraint row", self.dimension, a.len())?;
        self.rows.push((a, b));
        Ok(())
    }

    pub fn dimension(&self) -> usize {
        self.dimension
    }

    pub fn rows(&self) -> &[(Vec<Rational>, Rational)] {
        &self.rows
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    /// Exact membership test.
    pub fn contains(&self, x: &[Rational]) -> bool {
        x.len() == self.dimension && self.rows.iter().all(|(a, b)| dot(a, x) <= *b)
    }

    /// True when `d` is a recession direction: `a·d <= 0` for every row.
    pub fn is_recession_direction(&self, d: &[Rational]) -> bool {
        d.len() == self.dimension && self.rows.iter().all(|(a, _)| !dot(a, d).is_positive())
    }

    /// Append all rows of `other`.
    pub fn extend(&mut self, other: &ConstraintSystem) -> Result<()> {
        check_dim("constraint system merge", self.dimension, other.dimension)?;
        self.rows.extend(other.rows.iter().cloned());
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum LpOutcome {
    Optimal {
        value: Rational,
        point: Vec<Rational>,
    },
    Unbounded {
        ray: Vec<Rational>,
        base_point: Vec<Rational>,
    },
    Infeasible,
}

impl LpOutcome {
    /// Re-check the outcome against the problem by exact substitution.
    ///
    /// Infeasibility carries no certificate and always passes.
    pub fn certify(&self, objective: &[Rational], cs: &ConstraintSystem) -> bool {
        match self {
            LpOutcome::Optimal { value, point } => cs.contains(point) && dot(objective, point) == *value,
            LpOutcome::Unbounded { ray, base_point } => {
                cs.contains(base_point)
                    && cs.is_recession_direction(ray)
                    && dot(objective, ray).is_positive()
            }
            LpOutcome::Infeasible => true,
        }
    }
}

/// Maximize `objective · x` over `cs`.
///
/// The returned outcome has already passed [`LpOutcome::certify`].
pub fn solve_max(objective: &[Rational], cs: &ConstraintSystem) -> Result<LpOutcome> {
    check_dim("LP objective", cs.dimension, objective.len())?;
    let outcome = if cs.dimension == 1 {
        solve_line(&objective[0], cs)
    } else {
        Tableau::build(cs).solve(objective)
    };
    assert!(
        outcome.certify(objective, cs),
        "simplex produced an outcome that fails exact re-check"
    );
    Ok(outcome)
}

/// Feasible interval of a one-variable system, `None` ends unbounded.
/// Returns `None` when the system is infeasible.
pub(crate) fn line_interval(cs: &ConstraintSystem) -> Option<(Option<Rational>, Option<Rational>)> {
    debug_assert_eq!(cs.dimension, 1);
    let mut lo: Option<Rational> = None;
    let mut hi: Option<Rational> = None;
    for (a, b) in &cs.rows {
        let a = &a[0];
        if a.is_zero() {
            if b.is_negative() {
                return None;
            }
        } else if a.is_positive() {
            let v = b / a;
            if hi.as_ref().is_none_or(|h| v < *h) {
                hi = Some(v);
            }
        } else {
            let v = b / a;
            if lo.as_ref().is_none_or(|l| v > *l) {
                lo = Some(v);
            }
        }
    }
    match (&lo, &hi) {
        (Some(l), Some(h)) if l > h => None,
        _ => Some((lo, hi)),
    }
}

/// Closed form for one variable: the optimum sits at an end of the interval.
fn solve_line(c: &Rational, cs: &ConstraintSystem) -> LpOutcome {
    let Some((lo, hi)) = line_interval(cs) else {
        return LpOutcome::Infeasible;
    };
    let any = || lo.clone().or_else(|| hi.clone()).unwrap_or_else(rational::zero);
    let (end, direction) = if c.is_positive() {
        (hi.clone(), rational::one())
    } else if c.is_negative() {
        (lo.clone(), -rational::one())
    } else {
        return LpOutcome::Optimal {
            value: rational::zero(),
            point: vec![any()],
        };
    };
    match end {
        Some(x) => LpOutcome::Optimal {
            value: c * &x,
            point: vec![x],
        },
        None => LpOutcome::Unbounded {
            ray: vec![direction],
            base_point: vec![any()],
        },
    }
}

/// Feasibility with a witness point.
pub fn feasible(cs: &ConstraintSystem) -> (bool, Option<Vec<Rational>>) {
    let zero = vec![rational::zero(); cs.dimension];
    match solve_max(&zero, cs).expect("objective matches dimension") {
        LpOutcome::Optimal { point, .. } => (true, Some(point)),
        LpOutcome::Unbounded { base_point, .. } => (true, Some(base_point)),
        LpOutcome::Infeasible => (false, None),
    }
}

/// Column layout: `x+` (n), `x-` (n), slacks (m), artificials (k).
struct Tableau {
    n: usize,
    num_cols: usize,
    first_artificial: usize,
    /// Each row holds `num_cols` coefficients followed by the right-hand side.
    rows: Vec<Vec<Rational>>,
    basis: Vec<usize>,
}

enum Phase {
    Optimal,
    Unbounded(usize),
}

impl Tableau {
    fn build(cs: &ConstraintSystem) -> Self {
        let n = cs.dimension;
        let m = cs.rows.len();
        let num_art = cs.rows.iter().filter(|(_, b)| b.is_negative()).count();
        let first_artificial = 2 * n + m;
        let num_cols = first_artificial + num_art;
        let mut rows = Vec::with_capacity(m);
        let mut basis = Vec::with_capacity(m);
        let mut next_art = first_artificial;
        for (i, (a, b)) in cs.rows.iter().enumerate() {
            let mut row = vec![rational::zero(); num_cols + 1];
            let flip = b.is_negative();
            let sign = |v: &Rational| if flip { -v.clone() } else { v.clone() };
            for j in 0..n {
                row[j] = sign(&a[j]);
                row[n + j] = -sign(&a[j]);
            }
            row[2 * n + i] = sign(&rational::one());
            row[num_cols] = sign(b);
            if flip {
                row[next_art] = rational::one();
                basis.push(next_art);
                next_art += 1;
            } else {
                basis.push(2 * n + i);
            }
            rows.push(row);
        }
        Self {
            n,
            num_cols,
            first_artificial,
            rows,
            basis,
        }
    }

    fn rhs(&self, i: usize) -> &Rational {
        &self.rows[i][self.num_cols]
    }

    fn pivot(&mut self, r: usize, c: usize) {
        let p = self.rows[r][c].clone();
        for v in self.rows[r].iter_mut() {
            *v /= &p;
        }
        let pivot_row = self.rows[r].clone();
        for (i, row) in self.rows.iter_mut().enumerate() {
            if i == r || row[c].is_zero() {
                continue;
            }
            let f = row[c].clone();
            for (v, pv) in row.iter_mut().zip(&pivot_row) {
                if !pv.is_zero() {
                    *v -= &f * pv;
                }
            }
        }
        self.basis[r] = c;
    }

    /// Simplex iterations for `max cost·z` with entering columns restricted to
    /// `0..col_limit`. Bland's rule: lowest eligible index enters, ties in the
    /// ratio test go to the lowest basic variable index.
    fn run(&mut self, cost: &[Rational], col_limit: usize) -> Phase {
        loop {
            let entering = (0..col_limit).find(|&j| {
                if self.basis.contains(&j) {
                    return false;
                }
                let reduced = self
                    .rows
                    .iter()
                    .zip(&self.basis)
                    .fold(cost[j].clone(), |acc, (row, &bv)| acc - &cost[bv] * &row[j]);
                reduced.is_positive()
            });
            let Some(c) = entering else {
                return Phase::Optimal;
            };
            let mut best: Option<(usize, Rational)> = None;
            for (i, row) in self.rows.iter().enumerate() {
                if !row[c].is_positive() {
                    continue;
                }
                let ratio = self.rhs(i) / &row[c];
                let better = match &best {
                    None => true,
                    Some((bi, br)) => ratio < *br || (ratio == *br && self.basis[i] < self.basis[*bi]),
                };
                if better {
                    best = Some((i, ratio));
                }
            }
            match best {
                Some((r, _)) => self.pivot(r, c),
                None => return Phase::Unbounded(c),
            }
        }
    }

    fn column_values(&self) -> Vec<Rational> {
        let mut z = vec![rational::zero(); self.num_cols];
        for (i, &bv) in self.basis.iter().enumerate() {
            z[bv] = self.rhs(i).clone();
        }
        z
    }

    fn point(&self) -> Vec<Rational> {
        let z = self.column_values();
        (0..self.n).map(|j| &z[j] - &z[self.n + j]).collect()
    }

    fn solve(mut self, objective: &[Rational]) -> LpOutcome {
        if self.num_cols > self.first_artificial {
            let mut cost = vec![rational::zero(); self.num_cols];
            for c in cost.iter_mut().skip(self.first_artificial) {
                *c = -rational::one();
            }
            // Phase one is bounded above by zero.
            let _ = self.run(&cost, self.num_cols);
            let infeasibility = self
                .basis
                .iter()
                .enumerate()
                .filter(|(_, &bv)| bv >= self.first_artificial)
                .fold(rational::zero(), |acc, (i, _)| acc + self.rhs(i));
            if infeasibility.is_positive() {
                return LpOutcome::Infeasible;
            }
            self.drive_out_artificials();
        }

        let mut cost = vec![rational::zero(); self.num_cols];
        for j in 0..self.n {
            cost[j] = objective[j].clone();
            cost[self.n + j] = -objective[j].clone();
        }
        match self.run(&cost, self.first_artificial) {
            Phase::Optimal => {
                let point = self.point();
                LpOutcome::Optimal {
                    value: dot(objective, &point),
                    point,
                }
            }
            Phase::Unbounded(c) => {
                let base_point = self.point();
                let mut dir = vec![rational::zero(); self.num_cols];
                dir[c] = rational::one();
                for (row, &bv) in self.rows.iter().zip(&self.basis) {
                    dir[bv] = -row[c].clone();
                }
                let ray = (0..self.n).map(|j| &dir[j] - &dir[self.n + j]).collect();
                LpOutcome::Unbounded { ray, base_point }
            }
        }
    }

    /// Pivot zero-valued artificials out of the basis; drop rows that turn out
    /// to be redundant.
    fn drive_out_artificials(&mut self) {
        let mut i = 0;
        while i < self.rows.len() {
            if self.basis[i] < self.first_artificial {
                i += 1;
                continue;
            }
            match (0..self.first_artificial).find(|&j| !self.rows[i][j].is_zero()) {
                Some(j) => {
                    self.pivot(i, j);
                    i += 1;
                }
                None => {
                    self.rows.remove(i);
                    self.basis.remove(i);
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rational::{int, ints, rat};

    fn system(dim: usize, rows: &[(&[i64], i64)]) -> ConstraintSystem {
        ConstraintSystem::from_rows(dim, rows.iter().map(|(a, b)| (ints(a), int(*b))).collect())
            .unwrap()
    }

    #[test]
    fn bounded_max() {
        let cs = system(1, &[(&[1], 1)]);
        assert_eq!(
            solve_max(&ints(&[1]), &cs).unwrap(),
            LpOutcome::Optimal {
                value: int(1),
                point: ints(&[1])
            }
        );
    }

    #[test]
    fn unbounded_max_has_ray() {
        let cs = system(1, &[(&[-1], 0)]);
        assert_eq!(
            solve_max(&ints(&[1]), &cs).unwrap(),
            LpOutcome::Unbounded {
                ray: ints(&[1]),
                base_point: ints(&[0])
            }
        );
    }

    #[test]
    fn infeasible_system() {
        let cs = system(1, &[(&[1], -1), (&[-1], 0)]);
        assert_eq!(solve_max(&ints(&[1]), &cs).unwrap(), LpOutcome::Infeasible);
        assert_eq!(feasible(&cs), (false, None));
    }

    #[test]
    fn feasibility_examples() {
        assert_eq!(feasible(&ConstraintSystem::new(1)), (true, Some(ints(&[0]))));
        assert!(!feasible(&system(1, &[(&[1], 0), (&[-1], -1)])).0);
        let (ok, w) = feasible(&system(1, &[(&[1], 5), (&[-1], -3)]));
        assert!(ok);
        let w = w.unwrap();
        assert!(w[0] >= int(3) && w[0] <= int(5));
    }

    #[test]
    fn two_dimensional_optimum() {
        // max x + y s.t. x <= 2, y <= 3, x + 2y <= 7
        let cs = system(2, &[(&[1, 0], 2), (&[0, 1], 3), (&[1, 2], 7)]);
        match solve_max(&ints(&[1, 1]), &cs).unwrap() {
            LpOutcome::Optimal { value, point } => {
                assert_eq!(value, rat(9, 2));
                assert_eq!(point, vec![int(2), rat(5, 2)]);
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn degenerate_equalities() {
        // x = 1 via two inequalities, y free but bounded by x + y <= 3.
        let cs = system(2, &[(&[1, 0], 1), (&[-1, 0], -1), (&[1, 1], 3), (&[1, 1], 3)]);
        match solve_max(&ints(&[0, 1]), &cs).unwrap() {
            LpOutcome::Optimal { value, point } => {
                assert_eq!(value, int(2));
                assert_eq!(point, ints(&[1, 2]));
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn dimension_mismatch() {
        let cs = ConstraintSystem::new(2);
        assert!(solve_max(&ints(&[1]), &cs).is_err());
        let mut cs = ConstraintSystem::new(2);
        assert!(cs.push(ints(&[1]), int(0)).is_err());
    }

    #[test]
    fn deterministic() {
        let cs = system(2, &[(&[1, 1], 4), (&[-1, 0], 0), (&[0, -1], 0), (&[1, -1], 1)]);
        let a = solve_max(&ints(&[1, 1]), &cs).unwrap();
        let b = solve_max(&ints(&[1, 1]), &cs).unwrap();
        assert_eq!(a, b);
    }
}
