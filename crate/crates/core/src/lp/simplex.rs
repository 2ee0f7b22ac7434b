use super::{LpError, LpProblem, LpSolution, LpTolerances};

/// Entries below this magnitude are flushed to zero after each pivot.
const DROP: f64 = 1e-14;

/// Bound relaxation of the Harris ratio test. Kept far below the
/// feasibility tolerance: second differences of the solution (atoms of the
/// implied laws) amplify bound violations by the inverse cell width.
const HARRIS_TOL: f64 = 1e-10;

/// Consecutive zero-length steps after which pricing falls back to Bland's rule.
const DEGENERATE_SWITCH: usize = 50;

#[derive(Debug, Clone, Copy, PartialEq)]
enum Status {
    Basic,
    Lower,
    Upper,
    /// Free non-basic variable resting at zero.
    Zero,
}

/// Dense tableau `B⁻¹[A | D]` over the original columns followed by one
/// artificial column per row. `D = diag(sign)` makes the starting artificial
/// basis feasible.
struct Tableau {
    rows: usize,
    n: usize,
    cols: usize,
    t: Vec<f64>,
    /// `[D·A | I]`, kept for re-inversion.
    orig: Vec<f64>,
    basis: Vec<usize>,
    status: Vec<Status>,
    x: Vec<f64>,
    lo: Vec<f64>,
    hi: Vec<f64>,
    cost: Vec<f64>,
    d: Vec<f64>,
    sign: Vec<f64>,
    iterations: usize,
    degenerate_streak: usize,
    cap: usize,
    tol: LpTolerances,
    nz: Vec<usize>,
}

enum PhaseEnd {
    Optimal,
    Unbounded { entering: usize, dir: f64 },
}

/// Solves `p` with a two-phase bounded-variable primal simplex.
///
/// The entering variable is chosen by Dantzig pricing with a fallback to
/// Bland's rule on degenerate stretches; the leaving row comes from a Harris
/// ratio test preferring large pivots. The pivot
/// sequence is a deterministic function of the input. At the end of each
/// phase the basic solution is recomputed from the original data and, if it
/// has drifted, the basis is re-inverted and the phase resumed.
pub fn solve(p: &LpProblem, tol: LpTolerances) -> Result<LpSolution, LpError> {
    p.check_shape()?;
    let mut tab = Tableau::new(p, tol);

    match tab.settle(p)? {
        PhaseEnd::Optimal => {}
        PhaseEnd::Unbounded { .. } => unreachable!("phase one objective is bounded below"),
    }
    let infeasibility: f64 = (tab.n..tab.cols).map(|j| tab.x[j]).sum();
    if infeasibility > tol.feas {
        let farkas = tab.row_multipliers();
        return Ok(LpSolution::Infeasible {
            farkas,
            iterations: tab.iterations,
        });
    }

    tab.start_phase_two(p);
    match tab.settle(p)? {
        PhaseEnd::Optimal => {
            let x: Vec<f64> = tab.x[..tab.n].to_vec();
            let objective = p.c.iter().zip(&x).map(|(c, v)| c * v).sum();
            let duals = tab.row_multipliers();
            let reduced_costs = tab.d[..tab.n].to_vec();
            Ok(LpSolution::Optimal {
                x,
                objective,
                duals,
                reduced_costs,
                iterations: tab.iterations,
            })
        }
        PhaseEnd::Unbounded { entering, dir } => {
            let mut ray = vec![0.0; tab.n];
            if entering < tab.n {
                ray[entering] = dir;
            }
            for r in 0..tab.rows {
                let bv = tab.basis[r];
                if bv < tab.n {
                    ray[bv] = -dir * tab.at(r, entering);
                }
            }
            Ok(LpSolution::Unbounded {
                x: tab.x[..tab.n].to_vec(),
                ray,
                iterations: tab.iterations,
            })
        }
    }
}

impl Tableau {
    fn new(p: &LpProblem, tol: LpTolerances) -> Self {
        let rows = p.num_rows();
        let n = p.num_vars();
        let cols = n + rows;

        let mut x = vec![0.0; cols];
        let mut status = vec![Status::Basic; cols];
        let mut lo = p.lo.clone();
        let mut hi = p.hi.clone();
        for j in 0..n {
            let (s, v) = if lo[j].is_finite() {
                (Status::Lower, lo[j])
            } else if hi[j].is_finite() {
                (Status::Upper, hi[j])
            } else {
                (Status::Zero, 0.0)
            };
            status[j] = s;
            x[j] = v;
        }

        let mut sign = vec![1.0; rows];
        let mut t = vec![0.0; rows * cols];
        for i in 0..rows {
            let row = p.row(i);
            let ax: f64 = row.iter().zip(&x[..n]).map(|(a, v)| a * v).sum();
            let resid = p.b[i] - ax;
            if resid < 0.0 {
                sign[i] = -1.0;
            }
            let base = i * cols;
            for j in 0..n {
                t[base + j] = sign[i] * row[j];
            }
            t[base + n + i] = 1.0;
            x[n + i] = resid.abs();
        }
        lo.resize(cols, 0.0);
        hi.resize(cols, f64::INFINITY);

        let mut cost = vec![0.0; cols];
        for c in &mut cost[n..] {
            *c = 1.0;
        }

        let orig = t.clone();
        let mut tab = Self {
            orig,
            rows,
            n,
            cols,
            t,
            basis: (n..cols).collect(),
            status,
            x,
            lo,
            hi,
            cost,
            d: vec![0.0; cols],
            sign,
            iterations: 0,
            degenerate_streak: 0,
            cap: 50 * (rows + cols),
            tol,
            nz: Vec::with_capacity(cols),
        };
        tab.recompute_reduced_costs();
        tab
    }

    #[inline]
    fn at(&self, r: usize, c: usize) -> f64 {
        self.t[r * self.cols + c]
    }

    fn recompute_reduced_costs(&mut self) {
        self.d.copy_from_slice(&self.cost);
        for r in 0..self.rows {
            let cb = self.cost[self.basis[r]];
            if cb == 0.0 {
                continue;
            }
            let row = &self.t[r * self.cols..(r + 1) * self.cols];
            for (dj, tj) in self.d.iter_mut().zip(row) {
                *dj -= cb * tj;
            }
        }
        for &bv in &self.basis {
            self.d[bv] = 0.0;
        }
    }

    /// `y = c_Bᵀ B⁻¹`, read off the artificial block of the tableau.
    fn row_multipliers(&self) -> Vec<f64> {
        let mut y = vec![0.0; self.rows];
        for r in 0..self.rows {
            let cb = self.cost[self.basis[r]];
            if cb == 0.0 {
                continue;
            }
            for (i, yi) in y.iter_mut().enumerate() {
                *yi += cb * self.at(r, self.n + i);
            }
        }
        for (yi, s) in y.iter_mut().zip(&self.sign) {
            *yi *= s;
        }
        y
    }

    /// Recomputes `x_B = B⁻¹(b − N·x_N)` from the original data.
    fn refresh_basic_values(&mut self, p: &LpProblem) {
        let mut rhs = p.b.clone();
        for (i, r) in rhs.iter_mut().enumerate() {
            let row = p.row(i);
            for (j, a) in row.iter().enumerate().take(self.n) {
                if self.status[j] != Status::Basic && self.x[j] != 0.0 {
                    *r -= a * self.x[j];
                }
            }
            let art = self.n + i;
            if self.status[art] != Status::Basic {
                *r -= self.sign[i] * self.x[art];
            }
        }
        for r in 0..self.rows {
            let mut v = 0.0;
            for (i, rhs_i) in rhs.iter().enumerate() {
                v += self.at(r, self.n + i) * self.sign[i] * rhs_i;
            }
            let bv = self.basis[r];
            self.x[bv] = v;
        }
    }

    /// Runs the current phase to completion, re-inverting the basis when the
    /// recomputed basic solution leaves its bounds.
    fn settle(&mut self, p: &LpProblem) -> Result<PhaseEnd, LpError> {
        for _ in 0..3 {
            let end = self.run()?;
            if matches!(end, PhaseEnd::Unbounded { .. }) {
                return Ok(end);
            }
            self.refresh_basic_values(p);
            if self.max_bound_violation() <= self.tol.feas || !self.reinvert() {
                return Ok(end);
            }
            self.refresh_basic_values(p);
            self.recompute_reduced_costs();
        }
        Ok(PhaseEnd::Optimal)
    }

    fn max_bound_violation(&self) -> f64 {
        self.basis
            .iter()
            .map(|&bv| {
                (self.lo[bv] - self.x[bv])
                    .max(self.x[bv] - self.hi[bv])
                    .max(0.0)
            })
            .fold(0.0, f64::max)
    }

    /// Rebuilds `B⁻¹[D·A | I]` from the original columns by Gaussian
    /// elimination with partial pivoting. Returns `false` (leaving the
    /// tableau untouched) if the basis matrix is numerically singular.
    fn reinvert(&mut self) -> bool {
        let (m, cols) = (self.rows, self.cols);
        let w = m + cols;
        let mut aug = vec![0.0; m * w];
        for i in 0..m {
            for (k, &bv) in self.basis.iter().enumerate() {
                aug[i * w + k] = self.orig[i * cols + bv];
            }
            aug[i * w + m..(i + 1) * w].copy_from_slice(&self.orig[i * cols..(i + 1) * cols]);
        }
        for k in 0..m {
            let piv_row = (k..m)
                .max_by(|&a, &b| aug[a * w + k].abs().total_cmp(&aug[b * w + k].abs()))
                .unwrap();
            if aug[piv_row * w + k].abs() < 1e-12 {
                return false;
            }
            if piv_row != k {
                for j in 0..w {
                    aug.swap(k * w + j, piv_row * w + j);
                }
            }
            let inv = 1.0 / aug[k * w + k];
            for j in k..w {
                aug[k * w + j] *= inv;
            }
            for i in 0..m {
                if i == k {
                    continue;
                }
                let f = aug[i * w + k];
                if f == 0.0 {
                    continue;
                }
                for j in k..w {
                    aug[i * w + j] -= f * aug[k * w + j];
                }
            }
        }
        for i in 0..m {
            for j in 0..cols {
                let v = aug[i * w + m + j];
                self.t[i * cols + j] = if v.abs() < DROP { 0.0 } else { v };
            }
        }
        true
    }

    fn start_phase_two(&mut self, p: &LpProblem) {
        for j in self.n..self.cols {
            self.hi[j] = 0.0;
            if self.status[j] != Status::Basic {
                self.status[j] = Status::Lower;
                self.x[j] = 0.0;
            }
        }
        for j in 0..self.cols {
            self.cost[j] = if j < self.n { p.c[j] } else { 0.0 };
        }
        self.recompute_reduced_costs();
    }

    /// Most-improving reduced cost (Dantzig); after a run of degenerate
    /// pivots, the smallest improving index (Bland) until progress resumes,
    /// guarding against cycling.
    fn choose_entering(&self) -> Option<(usize, f64)> {
        let tol = self.tol.opt;
        let bland = self.degenerate_streak >= DEGENERATE_SWITCH;
        let mut best: Option<(usize, f64)> = None;
        let mut best_gain = 0.0;
        for j in 0..self.cols {
            let dj = self.d[j];
            let dir = match self.status[j] {
                Status::Basic => continue,
                _ if self.lo[j] == self.hi[j] => continue,
                Status::Lower if dj < -tol => 1.0,
                Status::Upper if dj > tol => -1.0,
                Status::Zero if dj.abs() > tol => -dj.signum(),
                _ => continue,
            };
            if bland {
                return Some((j, dir));
            }
            if dj.abs() > best_gain {
                best_gain = dj.abs();
                best = Some((j, dir));
            }
        }
        best
    }

    fn run(&mut self) -> Result<PhaseEnd, LpError> {
        loop {
            let Some((q, dir)) = self.choose_entering() else {
                return Ok(PhaseEnd::Optimal);
            };
            self.iterations += 1;
            if self.iterations > self.cap {
                return Err(LpError::Stalled(self.iterations - 1));
            }

            // Harris two-pass ratio test. Pass one finds the largest step
            // keeping every basic variable within its bounds relaxed by the
            // small tolerance; pass two picks, among rows blocking within
            // that step, the one with the largest pivot magnitude.
            let ftol = HARRIS_TOL;
            let range = self.hi[q] - self.lo[q];
            let mut relaxed = f64::INFINITY;
            for r in 0..self.rows {
                if let Some((_, slack_limit, _)) = self.row_limit(r, q, dir, ftol) {
                    relaxed = relaxed.min(slack_limit);
                }
            }
            let mut leave: Option<(usize, bool)> = None;
            let mut step = range;
            if relaxed < range || range.is_infinite() {
                if relaxed.is_infinite() {
                    return Ok(PhaseEnd::Unbounded { entering: q, dir });
                }
                let mut best = 0.0;
                for r in 0..self.rows {
                    if let Some((limit, _, to_upper)) = self.row_limit(r, q, dir, ftol) {
                        let a = self.at(r, q).abs();
                        let better = a > best * (1.0 + 1e-9)
                            || (a >= best * (1.0 - 1e-9)
                                && leave.is_some_and(|(r0, _)| self.basis[r] < self.basis[r0]));
                        if limit <= relaxed && better {
                            best = a;
                            step = limit.max(0.0);
                            leave = Some((r, to_upper));
                        }
                    }
                }
            }

            if step > 0.0 {
                self.degenerate_streak = 0;
            } else {
                self.degenerate_streak += 1;
            }
            if step > 0.0 {
                self.x[q] += dir * step;
                for r in 0..self.rows {
                    let a = self.at(r, q);
                    if a != 0.0 {
                        let bv = self.basis[r];
                        self.x[bv] -= dir * a * step;
                    }
                }
            }

            match leave {
                None => {
                    // Bound flip.
                    let (s, v) = if dir > 0.0 {
                        (Status::Upper, self.hi[q])
                    } else {
                        (Status::Lower, self.lo[q])
                    };
                    self.status[q] = s;
                    self.x[q] = v;
                }
                Some((r, to_upper)) => {
                    let out = self.basis[r];
                    self.pivot(r, q);
                    if to_upper {
                        self.status[out] = Status::Upper;
                        self.x[out] = self.hi[out];
                    } else {
                        self.status[out] = Status::Lower;
                        self.x[out] = self.lo[out];
                    }
                    self.status[q] = Status::Basic;
                }
            }
        }
    }

    /// For row `r` blocking entering column `q` moving in direction `dir`:
    /// the exact step limit, the limit with bounds relaxed by `ftol`, and
    /// whether the basic variable leaves at its upper bound.
    fn row_limit(&self, r: usize, q: usize, dir: f64, ftol: f64) -> Option<(f64, f64, bool)> {
        let a = self.at(r, q);
        if a.abs() <= self.tol.pivot {
            return None;
        }
        let rate = -dir * a;
        let bv = self.basis[r];
        if rate < 0.0 {
            let lo = self.lo[bv];
            lo.is_finite().then(|| {
                (
                    (self.x[bv] - lo) / -rate,
                    (self.x[bv] - lo + ftol) / -rate,
                    false,
                )
            })
        } else {
            let hi = self.hi[bv];
            hi.is_finite().then(|| {
                (
                    (hi - self.x[bv]) / rate,
                    (hi - self.x[bv] + ftol) / rate,
                    true,
                )
            })
        }
    }

    fn pivot(&mut self, r: usize, q: usize) {
        let cols = self.cols;
        let piv = self.t[r * cols + q];
        let inv = 1.0 / piv;
        self.nz.clear();
        {
            let row = &mut self.t[r * cols..(r + 1) * cols];
            for (j, v) in row.iter_mut().enumerate() {
                if *v != 0.0 {
                    *v *= inv;
                    if v.abs() < DROP {
                        *v = 0.0;
                    } else {
                        self.nz.push(j);
                    }
                }
            }
            row[q] = 1.0;
        }
        let (before, rest) = self.t.split_at_mut(r * cols);
        let (pivot_row, after) = rest.split_at_mut(cols);
        for other in before
            .chunks_exact_mut(cols)
            .chain(after.chunks_exact_mut(cols))
        {
            let f = other[q];
            if f == 0.0 {
                continue;
            }
            for &j in &self.nz {
                let v = other[j] - f * pivot_row[j];
                other[j] = if v.abs() < DROP { 0.0 } else { v };
            }
            other[q] = 0.0;
        }
        let f = self.d[q];
        if f != 0.0 {
            for &j in &self.nz {
                self.d[j] -= f * pivot_row[j];
            }
        }
        self.d[q] = 0.0;
        self.basis[r] = q;
    }
}

#[cfg(test)]
mod tests {
    use super::super::{verify_certificate, LpProblem, LpSolution, LpTolerances};
    use super::solve;

    #[test]
    fn fixed_point_equality() {
        let mut p = LpProblem::new(1);
        p.hi[0] = 2.0;
        p.c[0] = 1.0;
        p.add_row(&[(0, 1.0)], 1.0, "x=1");
        match solve(&p, LpTolerances::default()).unwrap() {
            LpSolution::Optimal { x, objective, .. } => {
                assert!((x[0] - 1.0).abs() < 1e-12);
                assert!((objective - 1.0).abs() < 1e-12);
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn contradictory_equalities_are_infeasible() {
        let mut p = LpProblem::new(1);
        p.add_row(&[(0, 1.0)], 1.0, "x=1");
        p.add_row(&[(0, 1.0)], 2.0, "x=2");
        match solve(&p, LpTolerances::default()).unwrap() {
            LpSolution::Infeasible { farkas, .. } => {
                let yb = farkas[0] * 1.0 + farkas[1] * 2.0;
                let ya = farkas[0] + farkas[1];
                assert!(yb.abs() > 1e-9);
                assert!(ya.abs() < 1e-12);
                assert!(verify_certificate(&p, &farkas));
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn no_rows_unbounded_ray() {
        let mut p = LpProblem::new(1);
        p.c[0] = -1.0;
        match solve(&p, LpTolerances::default()).unwrap() {
            LpSolution::Unbounded { ray, .. } => assert_eq!(ray, vec![1.0]),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn free_variables_and_upper_bounds() {
        // min x + y, x free, y ≤ 3, x − y = −5  →  x = y − 5, minimize 2y − 5 with y ≤ 3, y free below.
        let mut p = LpProblem::new(2);
        p.lo = vec![f64::NEG_INFINITY, -1.0];
        p.hi = vec![f64::INFINITY, 3.0];
        p.c = vec![1.0, 1.0];
        p.add_row(&[(0, 1.0), (1, -1.0)], -5.0, "link");
        match solve(&p, LpTolerances::default()).unwrap() {
            LpSolution::Optimal {
                x,
                objective,
                duals,
                ..
            } => {
                assert!((x[1] + 1.0).abs() < 1e-12);
                assert!((x[0] + 6.0).abs() < 1e-12);
                assert!((objective + 7.0).abs() < 1e-12);
                // x free and basic: its reduced cost 1 − y vanishes.
                assert!((duals[0] - 1.0).abs() < 1e-12);
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn redundant_rows_do_not_break_phase_two() {
        let mut p = LpProblem::new(2);
        p.c = vec![1.0, 2.0];
        p.add_row(&[(0, 1.0), (1, 1.0)], 1.0, "a");
        p.add_row(&[(0, 2.0), (1, 2.0)], 2.0, "2a");
        match solve(&p, LpTolerances::default()).unwrap() {
            LpSolution::Optimal { x, objective, .. } => {
                assert!((x[0] - 1.0).abs() < 1e-12 && x[1].abs() < 1e-12);
                assert!((objective - 1.0).abs() < 1e-12);
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn stall_is_reported_not_misclassified() {
        let mut p = LpProblem::new(3);
        p.c = vec![-1.0, -1.0, -1.0];
        p.hi = vec![1.0, 1.0, 1.0];
        p.add_row(&[(0, 1.0), (1, 1.0), (2, 1.0)], 2.0, "sum");
        // Enough work that a zero iteration cap must trip.
        let mut tab = super::Tableau::new(&p, LpTolerances::default());
        tab.cap = 0;
        assert!(matches!(tab.run(), Err(super::LpError::Stalled(0))));
    }

    #[test]
    fn reinversion_reproduces_the_pivoted_tableau() {
        let mut p = LpProblem::new(4);
        p.c = vec![-2.0, -3.0, 1.0, -1.0];
        p.hi = vec![4.0, 3.0, 5.0, f64::INFINITY];
        p.add_row(&[(0, 1.0), (1, 2.0), (2, -1.0)], 4.0, "a");
        p.add_row(&[(0, 3.0), (1, 1.0), (3, 1.0)], 6.0, "b");
        p.add_row(&[(1, 1.0), (2, 1.0), (3, -2.0)], 1.0, "c");
        let mut tab = super::Tableau::new(&p, LpTolerances::default());
        tab.run().unwrap();
        tab.start_phase_two(&p);
        tab.run().unwrap();
        assert!(tab.iterations > 0);
        let pivoted = tab.t.clone();
        assert!(tab.reinvert());
        for (a, b) in pivoted.iter().zip(&tab.t) {
            assert!((a - b).abs() < 1e-12, "{a} vs {b}");
        }
    }
}
