//! Rectangular linear assignment with infeasible entries.
//!
//! The solver maximizes the number of feasible pairs first and minimizes the
//! summed cost among those matchings second. Both objectives are carried as a
//! single lexicographic cost through a shortest-augmenting-path Hungarian
//! method, so no "large constant" substitution is needed.

use std::cmp::Ordering;
use std::ops::{Add, Sub};

/// Marker for pairs that may never be matched.
pub const INFEASIBLE: f64 = f64::INFINITY;

#[derive(Debug, Clone, PartialEq)]
pub struct CostMatrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl CostMatrix {
    pub fn filled(rows: usize, cols: usize, value: f64) -> Self {
        Self {
            rows,
            cols,
            data: vec![value; rows * cols],
        }
    }

    /// Panics if the rows are ragged.
    pub fn from_rows(rows: &[Vec<f64>]) -> Self {
        let cols = rows.first().map_or(0, Vec::len);
        assert!(rows.iter().all(|r| r.len() == cols), "ragged cost matrix");
        Self {
            rows: rows.len(),
            cols,
            data: rows.iter().flatten().copied().collect(),
        }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.data[row * self.cols + col]
    }

    pub fn set(&mut self, row: usize, col: usize, value: f64) {
        self.data[row * self.cols + col] = value;
    }

    pub fn is_feasible(&self, row: usize, col: usize) -> bool {
        self.get(row, col).is_finite()
    }

    pub fn transposed(&self) -> Self {
        let mut t = Self::filled(self.cols, self.rows, 0.0);
        for r in 0..self.rows {
            for c in 0..self.cols {
                t.set(c, r, self.get(r, c));
            }
        }
        t
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Assignment {
    /// `(row, col)` pairs sorted by row.
    pub matches: Vec<(usize, usize)>,
    pub unmatched_rows: Vec<usize>,
    pub unmatched_cols: Vec<usize>,
}

impl Assignment {
    pub fn total_cost(&self, costs: &CostMatrix) -> f64 {
        self.matches.iter().map(|&(r, c)| costs.get(r, c)).sum()
    }
}

/// (infeasible pairs used, summed finite cost), ordered lexicographically.
#[derive(Debug, Clone, Copy, PartialEq)]
struct Lex {
    penalty: i64,
    cost: f64,
}

impl Lex {
    const ZERO: Lex = Lex { penalty: 0, cost: 0.0 };
    const INF: Lex = Lex {
        penalty: i64::MAX / 4,
        cost: 0.0,
    };

    fn of(value: f64) -> Lex {
        if value.is_finite() {
            Lex { penalty: 0, cost: value }
        } else {
            Lex { penalty: 1, cost: 0.0 }
        }
    }

    fn less(self, other: Lex) -> bool {
        match self.penalty.cmp(&other.penalty) {
            Ordering::Less => true,
            Ordering::Greater => false,
            Ordering::Equal => self.cost < other.cost,
        }
    }
}

impl Add for Lex {
    type Output = Lex;
    fn add(self, rhs: Lex) -> Lex {
        Lex {
            penalty: self.penalty + rhs.penalty,
            cost: self.cost + rhs.cost,
        }
    }
}

impl Sub for Lex {
    type Output = Lex;
    fn sub(self, rhs: Lex) -> Lex {
        Lex {
            penalty: self.penalty - rhs.penalty,
            cost: self.cost - rhs.cost,
        }
    }
}

/// Solves the assignment problem on `costs`, never selecting an infeasible entry.
///
/// Ties between equally good matchings resolve toward lower column indices as
/// rows are inserted in index order, so results are deterministic.
pub fn solve_assignment(costs: &CostMatrix) -> Assignment {
    if costs.rows() == 0 || costs.cols() == 0 {
        return Assignment {
            matches: Vec::new(),
            unmatched_rows: (0..costs.rows()).collect(),
            unmatched_cols: (0..costs.cols()).collect(),
        };
    }

    let transposed = costs.rows() > costs.cols();
    let work = if transposed { costs.transposed() } else { costs.clone() };
    let row_to_col = hungarian(&work);

    let mut matches: Vec<(usize, usize)> = row_to_col
        .iter()
        .enumerate()
        .filter_map(|(r, &c)| work.is_feasible(r, c).then_some(if transposed { (c, r) } else { (r, c) }))
        .collect();
    matches.sort_unstable();

    let mut row_used = vec![false; costs.rows()];
    let mut col_used = vec![false; costs.cols()];
    for &(r, c) in &matches {
        row_used[r] = true;
        col_used[c] = true;
    }
    Assignment {
        matches,
        unmatched_rows: (0..costs.rows()).filter(|&r| !row_used[r]).collect(),
        unmatched_cols: (0..costs.cols()).filter(|&c| !col_used[c]).collect(),
    }
}

/// Requires `rows <= cols`; returns the column assigned to every row.
fn hungarian(costs: &CostMatrix) -> Vec<usize> {
    let n = costs.rows();
    let m = costs.cols();
    debug_assert!(n <= m);
    let a = |i: usize, j: usize| Lex::of(costs.get(i - 1, j - 1));

    // 1-based potentials; index 0 is the virtual source column.
    let mut u = vec![Lex::ZERO; n + 1];
    let mut v = vec![Lex::ZERO; m + 1];
    let mut owner = vec![0usize; m + 1];
    let mut way = vec![0usize; m + 1];

    for i in 1..=n {
        owner[0] = i;
        let mut j0 = 0usize;
        let mut minv = vec![Lex::INF; m + 1];
        let mut used = vec![false; m + 1];
        loop {
            used[j0] = true;
            let i0 = owner[j0];
            let mut delta = Lex::INF;
            let mut j1 = 0usize;
            for j in 1..=m {
                if used[j] {
                    continue;
                }
                let cur = a(i0, j) - u[i0] - v[j];
                if cur.less(minv[j]) {
                    minv[j] = cur;
                    way[j] = j0;
                }
                if minv[j].less(delta) {
                    delta = minv[j];
                    j1 = j;
                }
            }
            for j in 0..=m {
                if used[j] {
                    u[owner[j]] = u[owner[j]] + delta;
                    v[j] = v[j] - delta;
                } else {
                    minv[j] = minv[j] - delta;
                }
            }
            j0 = j1;
            if owner[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            owner[j0] = owner[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }

    let mut row_to_col = vec![0usize; n];
    for j in 1..=m {
        if owner[j] != 0 {
            row_to_col[owner[j] - 1] = j - 1;
        }
    }
    row_to_col
}
