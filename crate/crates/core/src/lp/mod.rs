//! Dense linear-programming kernel.
//!
//! Problems are stated in bounded standard form
//!
//! ```text
//!     minimize    cᵀx
//!     subject to  A·x = b,   lo ≤ x ≤ hi
//! ```
//!
//! where bounds may be infinite. [`solve`] runs a two-phase bounded-variable
//! primal simplex (Dantzig pricing with a Bland fallback, Harris ratio test)
//! and reports optimal duals, Farkas certificates of infeasibility, or an
//! unbounded ray.

mod simplex;
mod vertices;

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

pub use simplex::solve;
pub use vertices::enumerate_vertices;

/// Solver tolerances.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LpTolerances {
    /// Primal feasibility of rows and bounds.
    pub feas: f64,
    /// Smallest admissible pivot magnitude.
    pub pivot: f64,
    /// Allowed duality gap on optimal solutions.
    pub gap: f64,
    /// Reduced-cost threshold for entering candidates.
    pub opt: f64,
}

impl Default for LpTolerances {
    fn default() -> Self {
        Self {
            feas: 1e-8,
            pivot: 1e-10,
            gap: 1e-7,
            opt: 1e-9,
        }
    }
}

/// A linear program `min cᵀx` subject to `A·x = b`, `lo ≤ x ≤ hi`.
///
/// `a` is stored row-major with `b.len()` rows and `c.len()` columns.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LpProblem {
    pub a: Vec<f64>,
    pub b: Vec<f64>,
    pub c: Vec<f64>,
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
    pub row_tags: Vec<String>,
    pub var_tags: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum LpError {
    #[error("malformed problem: {0}")]
    Malformed(String),
    #[error("simplex stalled after {0} iterations")]
    Stalled(usize),
    #[error("vertex enumeration limited to {max} variables, problem has {got}")]
    TooLarge { max: usize, got: usize },
}

/// Result of [`solve`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status")]
pub enum LpSolution {
    Optimal {
        x: Vec<f64>,
        objective: f64,
        /// One multiplier per row; `c - Aᵀy` are the reduced costs.
        duals: Vec<f64>,
        reduced_costs: Vec<f64>,
        iterations: usize,
    },
    Infeasible {
        /// Row multipliers `y` with `yᵀb > sup { yᵀA·x : lo ≤ x ≤ hi }`.
        farkas: Vec<f64>,
        iterations: usize,
    },
    Unbounded {
        /// A feasible point and a direction along which the objective decreases without bound.
        x: Vec<f64>,
        ray: Vec<f64>,
        iterations: usize,
    },
}

impl LpSolution {
    pub fn is_optimal(&self) -> bool {
        matches!(self, LpSolution::Optimal { .. })
    }

    pub fn iterations(&self) -> usize {
        match self {
            LpSolution::Optimal { iterations, .. }
            | LpSolution::Infeasible { iterations, .. }
            | LpSolution::Unbounded { iterations, .. } => *iterations,
        }
    }
}

impl LpProblem {
    /// Empty problem with `n` variables, all in `[0, +∞)`, zero objective.
    pub fn new(n: usize) -> Self {
        Self {
            a: Vec::new(),
            b: Vec::new(),
            c: vec![0.0; n],
            lo: vec![0.0; n],
            hi: vec![f64::INFINITY; n],
            row_tags: Vec::new(),
            var_tags: (0..n).map(|j| format!("x{j}")).collect(),
        }
    }

    pub fn num_rows(&self) -> usize {
        self.b.len()
    }

    pub fn num_vars(&self) -> usize {
        self.c.len()
    }

    /// Appends a variable and returns its column index.
    pub fn add_var(&mut self, lo: f64, hi: f64, cost: f64, tag: impl Into<String>) -> usize {
        let n = self.num_vars();
        let m = self.num_rows();
        if m > 0 {
            let mut a = Vec::with_capacity(m * (n + 1));
            for r in 0..m {
                a.extend_from_slice(&self.a[r * n..(r + 1) * n]);
                a.push(0.0);
            }
            self.a = a;
        }
        self.c.push(cost);
        self.lo.push(lo);
        self.hi.push(hi);
        self.var_tags.push(tag.into());
        n
    }

    /// Appends the row `Σ coef·x_j = rhs` given as sparse `(column, coefficient)` pairs.
    /// Repeated columns are summed.
    pub fn add_row(&mut self, coefs: &[(usize, f64)], rhs: f64, tag: impl Into<String>) -> usize {
        let n = self.num_vars();
        let start = self.a.len();
        self.a.resize(start + n, 0.0);
        for &(j, v) in coefs {
            self.a[start + j] += v;
        }
        self.b.push(rhs);
        self.row_tags.push(tag.into());
        self.b.len() - 1
    }

    pub fn coef(&self, row: usize, col: usize) -> f64 {
        self.a[row * self.num_vars() + col]
    }

    pub fn row(&self, row: usize) -> &[f64] {
        let n = self.num_vars();
        &self.a[row * n..(row + 1) * n]
    }

    pub(crate) fn check_shape(&self) -> Result<(), LpError> {
        let (m, n) = (self.num_rows(), self.num_vars());
        if self.a.len() != m * n {
            return Err(LpError::Malformed(format!(
                "matrix has {} entries, expected {m}×{n}",
                self.a.len()
            )));
        }
        if self.lo.len() != n || self.hi.len() != n {
            return Err(LpError::Malformed(
                "bound vectors do not match column count".into(),
            ));
        }
        for j in 0..n {
            if self.lo[j].is_nan() || self.hi[j].is_nan() || self.lo[j] > self.hi[j] {
                return Err(LpError::Malformed(format!(
                    "variable {} has bounds [{}, {}]",
                    self.var_tags.get(j).map(String::as_str).unwrap_or("?"),
                    self.lo[j],
                    self.hi[j]
                )));
            }
            if self.lo[j] == f64::INFINITY || self.hi[j] == f64::NEG_INFINITY {
                return Err(LpError::Malformed(format!(
                    "variable {j} has an empty range"
                )));
            }
        }
        if self
            .a
            .iter()
            .chain(&self.b)
            .chain(&self.c)
            .any(|v| !v.is_finite())
        {
            return Err(LpError::Malformed("non-finite coefficient".into()));
        }
        Ok(())
    }

    /// `Aᵀy`.
    pub fn transpose_mul(&self, y: &[f64]) -> Vec<f64> {
        let n = self.num_vars();
        let mut r = vec![0.0; n];
        for (i, &yi) in y.iter().enumerate() {
            if yi == 0.0 {
                continue;
            }
            for (rj, aij) in r.iter_mut().zip(self.row(i)) {
                *rj += yi * aij;
            }
        }
        r
    }

    /// Largest row residual `|A·x − b|` and largest bound violation.
    pub fn primal_residual(&self, x: &[f64]) -> (f64, f64) {
        let row_res = (0..self.num_rows())
            .map(|i| {
                let ax: f64 = self.row(i).iter().zip(x).map(|(a, v)| a * v).sum();
                (ax - self.b[i]).abs()
            })
            .fold(0.0, f64::max);
        let bound_res = x
            .iter()
            .zip(self.lo.iter().zip(&self.hi))
            .map(|(&v, (&l, &h))| (l - v).max(v - h).max(0.0))
            .fold(0.0, f64::max);
        (row_res, bound_res)
    }

    pub fn set_coef(&mut self, row: usize, col: usize, value: f64) {
        let n = self.num_vars();
        self.a[row * n + col] = value;
    }

    /// Copy of the problem with the given rows removed.
    pub fn without_rows(&self, drop: &[usize]) -> LpProblem {
        let n = self.num_vars();
        let mut out = LpProblem {
            a: Vec::new(),
            b: Vec::new(),
            c: self.c.clone(),
            lo: self.lo.clone(),
            hi: self.hi.clone(),
            row_tags: Vec::new(),
            var_tags: self.var_tags.clone(),
        };
        for i in 0..self.num_rows() {
            if drop.contains(&i) {
                continue;
            }
            out.a.extend_from_slice(&self.a[i * n..(i + 1) * n]);
            out.b.push(self.b[i]);
            out.row_tags.push(self.row_tags[i].clone());
        }
        out
    }

    /// Plain-text dump for cross-checking with external solvers.
    ///
    /// Layout: a header line `ROWS m COLS n`, then one line per row with the
    /// tag, the right-hand side and the non-zero `col:coef` pairs, then one
    /// line per column with tag, cost and bounds. Numbers use `{:.17e}`.
    pub fn dump(&self) -> String {
        let (m, n) = (self.num_rows(), self.num_vars());
        let mut out = String::new();
        let _ = writeln!(out, "ROWS {m} COLS {n}");
        for i in 0..m {
            let _ = write!(out, "R {} {:.17e}", self.row_tags[i], self.b[i]);
            for (j, &v) in self.row(i).iter().enumerate() {
                if v != 0.0 {
                    let _ = write!(out, " {j}:{v:.17e}");
                }
            }
            out.push('\n');
        }
        for j in 0..n {
            let _ = writeln!(
                out,
                "C {} {:.17e} {:.17e} {:.17e}",
                self.var_tags[j], self.c[j], self.lo[j], self.hi[j]
            );
        }
        out
    }
}

/// Incremental construction of an [`LpProblem`] from sparse rows.
///
/// Inequality rows get their own non-negative slack column.
#[derive(Debug, Clone, Default)]
pub struct LpBuilder {
    lo: Vec<f64>,
    hi: Vec<f64>,
    c: Vec<f64>,
    var_tags: Vec<String>,
    rows: Vec<(Vec<(usize, f64)>, f64)>,
    row_tags: Vec<String>,
}

impl LpBuilder {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn num_vars(&self) -> usize {
        self.c.len()
    }

    pub fn num_rows(&self) -> usize {
        self.rows.len()
    }

    pub fn add_var(&mut self, lo: f64, hi: f64, tag: impl Into<String>) -> usize {
        self.lo.push(lo);
        self.hi.push(hi);
        self.c.push(0.0);
        self.var_tags.push(tag.into());
        self.c.len() - 1
    }

    pub fn set_cost(&mut self, var: usize, cost: f64) {
        self.c[var] = cost;
    }

    pub fn add_cost(&mut self, var: usize, cost: f64) {
        self.c[var] += cost;
    }

    /// `Σ coef·x = rhs`; returns the row index.
    pub fn add_eq(&mut self, coefs: Vec<(usize, f64)>, rhs: f64, tag: impl Into<String>) -> usize {
        self.rows.push((coefs, rhs));
        self.row_tags.push(tag.into());
        self.rows.len() - 1
    }

    /// `Σ coef·x ≥ rhs`, stored as `Σ coef·x − s = rhs` with `s ≥ 0`.
    pub fn add_ge(
        &mut self,
        mut coefs: Vec<(usize, f64)>,
        rhs: f64,
        tag: impl Into<String>,
    ) -> usize {
        let tag = tag.into();
        let s = self.add_var(0.0, f64::INFINITY, format!("slack:{tag}"));
        coefs.push((s, -1.0));
        self.add_eq(coefs, rhs, tag)
    }

    /// `Σ coef·x ≤ rhs`, stored as `Σ coef·x + s = rhs` with `s ≥ 0`.
    pub fn add_le(
        &mut self,
        mut coefs: Vec<(usize, f64)>,
        rhs: f64,
        tag: impl Into<String>,
    ) -> usize {
        let tag = tag.into();
        let s = self.add_var(0.0, f64::INFINITY, format!("slack:{tag}"));
        coefs.push((s, 1.0));
        self.add_eq(coefs, rhs, tag)
    }

    pub fn finish(self) -> LpProblem {
        let n = self.c.len();
        let mut a = vec![0.0; self.rows.len() * n];
        let mut b = Vec::with_capacity(self.rows.len());
        for (i, (coefs, rhs)) in self.rows.into_iter().enumerate() {
            for (j, v) in coefs {
                a[i * n + j] += v;
            }
            b.push(rhs);
        }
        LpProblem {
            a,
            b,
            c: self.c,
            lo: self.lo,
            hi: self.hi,
            row_tags: self.row_tags,
            var_tags: self.var_tags,
        }
    }
}

/// `sup { rᵀx : lo ≤ x ≤ hi }` where coefficients with `|r_j| ≤ tol` are
/// treated as zero. Returns `+∞` when the supremum is unbounded.
pub(crate) fn box_support(r: &[f64], lo: &[f64], hi: &[f64], tol: f64) -> f64 {
    let mut s = 0.0;
    for j in 0..r.len() {
        let rj = r[j];
        if rj > tol {
            if hi[j].is_infinite() {
                return f64::INFINITY;
            }
            s += rj * hi[j];
        } else if rj < -tol {
            if lo[j].is_infinite() {
                return f64::INFINITY;
            }
            s += rj * lo[j];
        } else {
            // Tiny coefficients still count against finite bounds.
            let bound = if rj > 0.0 { hi[j] } else { lo[j] };
            if bound.is_finite() {
                s += rj * bound;
            }
        }
    }
    s
}

/// Margin `yᵀb − sup_{lo≤x≤hi} yᵀA·x` of a candidate Farkas vector.
/// Positive margin proves that `A·x = b, lo ≤ x ≤ hi` has no solution.
pub fn farkas_margin(p: &LpProblem, y: &[f64], tol: f64) -> f64 {
    if y.len() != p.num_rows() {
        return f64::NEG_INFINITY;
    }
    let r = p.transpose_mul(y);
    let yb: f64 = y.iter().zip(&p.b).map(|(a, b)| a * b).sum();
    yb - box_support(&r, &p.lo, &p.hi, tol)
}

/// Checks a Farkas certificate of infeasibility.
pub fn verify_certificate(p: &LpProblem, y: &[f64]) -> bool {
    verify_certificate_with(p, y, LpTolerances::default())
}

pub fn verify_certificate_with(p: &LpProblem, y: &[f64], tol: LpTolerances) -> bool {
    if y.len() != p.num_rows() || y.iter().any(|v| !v.is_finite()) {
        return false;
    }
    farkas_margin(p, y, tol.pivot) > tol.pivot
}
