use serde::{Deserialize, Serialize};

use crate::error::Error;
use crate::lp::{LpBuilder, LpProblem};
use crate::market_data::{Grid, MarketQuotes, GRID_TOL};

/// Which side of a linear functional a bound program optimizes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Side {
    Max,
    Min,
}

impl std::fmt::Display for Side {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Side::Max => "max",
            Side::Min => "min",
        })
    }
}

/// A model quantity that is linear in the calibration variables.
///
/// Maturities are 0-based; bands are 1-based (`1..=m+1`, band `j` meaning
/// `M ∈ [B_{j−1}, B_j)`), matching the level numbering `B_0 = S0`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Quantity {
    /// One-touch price `b_l(B)` at a level of the layout.
    Digital { maturity: usize, level: f64 },
    /// Call curve value `u_l(x_i)`.
    Call { maturity: usize, node: usize },
    /// Mass of `{S = x_i, M ∈ band}` under maturity `l`.
    BandAtom {
        maturity: usize,
        band: usize,
        node: usize,
    },
}

/// `Σ coef · quantity`.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Functional {
    pub terms: Vec<(Quantity, f64)>,
}

/// Objective of the calibration program.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub enum ObjectiveSpec {
    /// Zero objective; any feasible vertex.
    #[default]
    Feasibility,
    /// Minimize, summed over every (maturity, band), the largest nodal
    /// density `atom / cell width` of the joint law.
    Regularize,
    /// Optimize a linear functional of the model.
    Bound { side: Side, functional: Functional },
}

impl ObjectiveSpec {
    pub fn name(&self) -> &'static str {
        match self {
            ObjectiveSpec::Feasibility => "feasibility",
            ObjectiveSpec::Regularize => "regularize",
            ObjectiveSpec::Bound {
                side: Side::Max, ..
            } => "bound-max",
            ObjectiveSpec::Bound {
                side: Side::Min, ..
            } => "bound-min",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Instrument {
    Call,
    Digital,
}

/// A row fixing one quoted price.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuotePin {
    pub row: usize,
    pub var: usize,
    /// 0-based maturity index.
    pub maturity: usize,
    pub instrument: Instrument,
    pub strike_or_level: f64,
    pub price: f64,
}

/// The calibration program together with its variable index maps.
#[derive(Debug, Clone)]
pub struct CalibrationLp {
    pub problem: LpProblem,
    pub grid: Grid,
    pub spot: f64,
    /// Barrier levels `B_1 < … < B_m` (quoted and inserted).
    pub levels: Vec<f64>,
    /// Grid index of `B_1, …, B_m, B_{m+1} = N`.
    pub level_nodes: Vec<usize>,
    /// `u[l][i]`: call curve of maturity `l` at node `i`.
    pub u: Vec<Vec<usize>>,
    /// `v[l][j−1][i]` for `x_i ≤ B_j`: block `c_l^{B_j}` at node `i`.
    pub v: Vec<Vec<Vec<usize>>>,
    /// `beta[l][j−1]`: one-touch price `b_l(B_j)`, `j = 1..=m`.
    pub beta: Vec<Vec<usize>>,
    pub pins: Vec<QuotePin>,
    pub objective: ObjectiveSpec,
}

struct Layout<'a> {
    b: LpBuilder,
    grid: &'a Grid,
    spot: f64,
    levels: Vec<f64>,
    level_nodes: Vec<usize>,
}

/// Calibration program over the quoted levels.
pub fn build_lp(
    q: &MarketQuotes,
    g: &Grid,
    objective: ObjectiveSpec,
) -> Result<CalibrationLp, Error> {
    build_lp_with_levels(q, g, &[], objective)
}

/// Calibration program whose level set is the quoted levels plus `extra`;
/// one-touch prices at unquoted (level, maturity) pairs are free variables.
pub fn build_lp_with_levels(
    q: &MarketQuotes,
    g: &Grid,
    extra: &[f64],
    objective: ObjectiveSpec,
) -> Result<CalibrationLp, Error> {
    let s0 = q.spot;
    let gl = g.last();
    if g.index_of(0.0) != Some(0) || g.index_of(s0).is_none() {
        return Err(Error::Argument("grid must contain 0 and the spot".into()));
    }
    let mut levels: Vec<f64> = q
        .levels()
        .into_iter()
        .chain(extra.iter().copied())
        .collect();
    levels.sort_by(f64::total_cmp);
    levels.dedup_by(|a, b| (*a - *b).abs() <= GRID_TOL);
    let mut level_nodes = Vec::with_capacity(levels.len() + 1);
    for &lv in &levels {
        if !(lv > s0 + GRID_TOL && lv <= g.upper() + GRID_TOL) {
            return Err(Error::Argument(format!(
                "barrier level {lv} outside (spot, N]"
            )));
        }
        level_nodes.push(g.index_of(lv).ok_or(Error::OffGrid(lv))?);
    }
    level_nodes.push(gl);
    let m = levels.len();
    let k = q.num_maturities();

    let mut lay = Layout {
        b: LpBuilder::new(),
        grid: g,
        spot: s0,
        levels,
        level_nodes,
    };

    // Variables.
    let mut u = Vec::with_capacity(k);
    let mut v = Vec::with_capacity(k);
    let mut beta = Vec::with_capacity(k);
    for l in 0..k {
        let ul: Vec<usize> = (0..=gl)
            .map(|i| {
                let (lo, hi) = match i {
                    0 => (s0, s0),
                    i if i == gl => (0.0, 0.0),
                    _ => (0.0, s0),
                };
                lay.b.add_var(lo, hi, format!("u[{l}][{i}]"))
            })
            .collect();
        let bl: Vec<usize> = (1..=m)
            .map(|j| lay.b.add_var(0.0, 1.0, format!("b[{l}][{j}]")))
            .collect();
        let vl: Vec<Vec<usize>> = (1..=m + 1)
            .map(|j| {
                let ib = lay.level_nodes[j - 1];
                (0..=ib)
                    .map(|i| {
                        let (lo, hi) = if i == ib {
                            (0.0, 0.0)
                        } else if i == 0 && j == 1 {
                            (s0, s0)
                        } else {
                            (0.0, s0)
                        };
                        lay.b.add_var(lo, hi, format!("v[{l}][{j}][{i}]"))
                    })
                    .collect()
            })
            .collect();
        u.push(ul);
        beta.push(bl);
        v.push(vl);
    }

    for l in 0..k {
        lay.call_curve_rows(l, &u);
        for j in 1..=m + 1 {
            lay.block_rows(l, j, &u, &v, &beta);
        }
        lay.aggregation_rows(l, &u, &v, &beta);
    }

    // Quote pins last, so that pin rows form a contiguous tail.
    let mut pins = Vec::new();
    for (l, mat) in q.maturities.iter().enumerate() {
        for c in &mat.calls {
            let node = g.index_of(c.strike).ok_or(Error::OffGrid(c.strike))?;
            let qv = lay.b.add_var(0.0, s0, format!("qV[{l}][{}]", c.strike));
            lay.b.add_eq(
                vec![(u[l][node], 1.0), (qv, -1.0)],
                0.0,
                format!("link:call:{l}:{}", c.strike),
            );
            pins.push((qv, l, Instrument::Call, c.strike, c.price));
        }
        for bq in &mat.barriers {
            let j = lay
                .levels
                .iter()
                .position(|&lv| (lv - bq.level).abs() <= GRID_TOL)
                .ok_or(Error::OffGrid(bq.level))?;
            pins.push((beta[l][j], l, Instrument::Digital, bq.level, bq.price));
        }
    }
    let pins: Vec<QuotePin> = pins
        .into_iter()
        .map(|(var, maturity, instrument, at, price)| {
            let kind = match instrument {
                Instrument::Call => "call",
                Instrument::Digital => "digital",
            };
            let row = lay.b.add_eq(
                vec![(var, 1.0)],
                price,
                format!("pin:{kind}:{}:{at}", maturity + 1),
            );
            QuotePin {
                row,
                var,
                maturity,
                instrument,
                strike_or_level: at,
                price,
            }
        })
        .collect();

    let mut lp = CalibrationLp {
        problem: LpProblem::new(0),
        grid: g.clone(),
        spot: s0,
        levels: lay.levels.clone(),
        level_nodes: lay.level_nodes.clone(),
        u,
        v,
        beta,
        pins,
        objective: objective.clone(),
    };
    match &objective {
        ObjectiveSpec::Feasibility => {}
        ObjectiveSpec::Regularize => lp.add_regularizer(&mut lay.b),
        ObjectiveSpec::Bound { side, functional } => {
            let sign = match side {
                Side::Min => 1.0,
                Side::Max => -1.0,
            };
            for (var, coef) in lp.resolve(functional)? {
                lay.b.add_cost(var, sign * coef);
            }
        }
    }
    lp.problem = lay.b.finish();
    Ok(lp)
}

fn hinge(level: f64, x: f64) -> f64 {
    (level - x).max(0.0)
}

impl Layout<'_> {
    fn h(&self, i: usize) -> f64 {
        self.grid.width(i)
    }

    /// `B_j` for `j = 0..=m+1` with `B_0 = S0`, `B_{m+1} = N`.
    fn level(&self, j: usize) -> f64 {
        if j == 0 {
            self.spot
        } else if j <= self.levels.len() {
            self.levels[j - 1]
        } else {
            self.grid.upper()
        }
    }

    /// Discrete convexity at interior node `i` of a nodal vector.
    fn convexity(&self, vars: &[usize], i: usize) -> Vec<(usize, f64)> {
        let (hl, hr) = (self.h(i - 1), self.h(i));
        vec![
            (vars[i - 1], 1.0 / hl),
            (vars[i], -1.0 / hl - 1.0 / hr),
            (vars[i + 1], 1.0 / hr),
        ]
    }

    fn call_curve_rows(&mut self, l: usize, u: &[Vec<usize>]) {
        let gl = self.grid.last();
        for i in 1..gl {
            let row = self.convexity(&u[l], i);
            self.b.add_ge(row, 0.0, format!("u-convex:{l}:{i}"));
        }
        let h0 = self.h(0);
        self.b.add_eq(
            vec![(u[l][0], 1.0 / h0), (u[l][1], -1.0 / h0)],
            1.0,
            format!("u-slope0:{l}"),
        );
        if l > 0 {
            #[allow(clippy::needless_range_loop)]
            for i in 1..gl {
                self.b.add_ge(
                    vec![(u[l][i], 1.0), (u[l - 1][i], -1.0)],
                    0.0,
                    format!("u-calendar:{l}:{i}"),
                );
            }
        }
    }

    fn block_rows(
        &mut self,
        l: usize,
        j: usize,
        u: &[Vec<usize>],
        v: &[Vec<Vec<usize>>],
        beta: &[Vec<usize>],
    ) {
        let m = self.levels.len();
        let vj = &v[l][j - 1];
        let ib = self.level_nodes[j - 1];
        // (a) convexity; bounds carry 0 ≤ v ≤ S0.
        for i in 1..ib {
            let row = self.convexity(vj, i);
            self.b.add_ge(row, 0.0, format!("a:{l}:{j}:{i}"));
        }
        // (b) value and slope at zero.
        let h0 = self.h(0);
        let slope0 = vec![(vj[0], 1.0 / h0), (vj[1], -1.0 / h0)];
        if j == 1 {
            self.b.add_eq(slope0, 1.0, format!("b-slope:{l}:{j}"));
        } else {
            let prev = beta[l][j - 2];
            let bprev = self.level(j - 1);
            self.b.add_eq(
                vec![(vj[0], 1.0), (prev, -bprev)],
                0.0,
                format!("b-value:{l}:{j}"),
            );
            let mut row = slope0;
            row.push((prev, -1.0));
            self.b.add_eq(row, 0.0, format!("b-slope:{l}:{j}"));
        }
        // (c) atom of mass b_l(B_j) at B_j.
        let hb = self.h(ib - 1);
        let mut row = vec![(vj[ib - 1], 1.0 / hb), (vj[ib], -1.0 / hb)];
        if j <= m {
            row.push((beta[l][j - 1], -1.0));
        } else {
            let gl = self.grid.last();
            row.push((u[l][gl - 1], -1.0 / hb));
            row.push((u[l][gl], 1.0 / hb));
        }
        self.b.add_eq(row, 0.0, format!("c-slope:{l}:{j}"));
        // (d) calendar ordering of blocks.
        let bprev = self.level(j - 1);
        for i in 1..ib {
            let w = hinge(bprev, self.grid.x(i));
            let mut row = vec![(vj[i], 1.0)];
            let mut rhs = 0.0;
            if l > 0 {
                row.push((v[l - 1][j - 1][i], -1.0));
            }
            if w > 0.0 {
                if j == 1 {
                    // b_l(B_0) = 1 for every maturity.
                    if l == 0 {
                        rhs = w;
                    }
                } else {
                    row.push((beta[l][j - 2], -w));
                    if l > 0 {
                        row.push((beta[l - 1][j - 2], w));
                    }
                }
            }
            if l == 0 && row.len() == 1 && rhs == 0.0 {
                // Plain non-negativity, already a bound.
                continue;
            }
            self.b.add_ge(row, rhs, format!("d:{l}:{j}:{i}"));
        }
    }

    /// (e) the blocks recombine into the call curve.
    fn aggregation_rows(
        &mut self,
        l: usize,
        u: &[Vec<usize>],
        v: &[Vec<Vec<usize>>],
        beta: &[Vec<usize>],
    ) {
        let m = self.levels.len();
        for i in 1..self.grid.last() {
            let x = self.grid.x(i);
            let mut row = Vec::new();
            for j in 1..=m + 1 {
                if i <= self.level_nodes[j - 1] {
                    row.push((v[l][j - 1][i], 1.0));
                }
                if j <= m {
                    let w = hinge(self.levels[j - 1], x);
                    if w > 0.0 {
                        row.push((beta[l][j - 1], -w));
                    }
                }
            }
            row.push((u[l][i], -1.0));
            self.b.add_eq(row, 0.0, format!("e:{l}:{i}"));
        }
    }
}

impl CalibrationLp {
    pub fn num_maturities(&self) -> usize {
        self.u.len()
    }

    pub fn num_levels(&self) -> usize {
        self.levels.len()
    }

    /// `B_j` for `j = 0..=m+1` with `B_0 = S0`, `B_{m+1} = N`.
    pub fn level(&self, j: usize) -> f64 {
        if j == 0 {
            self.spot
        } else if j <= self.levels.len() {
            self.levels[j - 1]
        } else {
            self.grid.upper()
        }
    }

    /// Index `j ∈ 1..=m` of a layout level.
    pub fn level_index(&self, level: f64) -> Option<usize> {
        self.levels
            .iter()
            .position(|&b| (b - level).abs() <= GRID_TOL)
            .map(|p| p + 1)
    }

    pub fn pin_rows(&self) -> Vec<usize> {
        self.pins.iter().map(|p| p.row).collect()
    }

    /// `g_{l,j}(x_i) = c_l^{B_j}(x_i) − b_l(B_j)(B_j − x_i)⁺` as a linear
    /// expression (for `j = m+1` just the block).
    fn band_transform(&self, l: usize, j: usize, i: usize) -> Vec<(usize, f64)> {
        let mut e = Vec::new();
        if i <= self.level_nodes[j - 1] {
            e.push((self.v[l][j - 1][i], 1.0));
        }
        if j <= self.levels.len() {
            let w = hinge(self.levels[j - 1], self.grid.x(i));
            if w > 0.0 {
                e.push((self.beta[l][j - 1], -w));
            }
        }
        e
    }

    /// Atom of band `j` at node `i ≥ 1` as a linear expression: the slope
    /// change of `g_{l,j}` at `x_i` (zero slope beyond `N`).
    pub fn band_atom_expr(&self, l: usize, j: usize, i: usize) -> Vec<(usize, f64)> {
        let gl = self.grid.last();
        let mut e = Vec::new();
        let mut add = |expr: Vec<(usize, f64)>, s: f64| {
            for (var, c) in expr {
                e.push((var, c * s));
            }
        };
        let hl = self.grid.width(i - 1);
        add(self.band_transform(l, j, i - 1), 1.0 / hl);
        add(self.band_transform(l, j, i), -1.0 / hl);
        if i < gl {
            let hr = self.grid.width(i);
            add(self.band_transform(l, j, i), -1.0 / hr);
            add(self.band_transform(l, j, i + 1), 1.0 / hr);
        }
        e
    }

    /// Translate a functional into `(variable, coefficient)` pairs.
    pub fn resolve(&self, f: &Functional) -> Result<Vec<(usize, f64)>, Error> {
        let k = self.num_maturities();
        let m = self.num_levels();
        let gl = self.grid.last();
        let check_l = |l: usize| {
            if l < k {
                Ok(())
            } else {
                Err(Error::Index {
                    what: "maturity",
                    index: l,
                    len: k,
                })
            }
        };
        let mut out = Vec::new();
        for &(qty, coef) in &f.terms {
            match qty {
                Quantity::Digital { maturity, level } => {
                    check_l(maturity)?;
                    if (level - self.spot).abs() <= GRID_TOL {
                        return Err(Error::Argument("the spot level carries no variable".into()));
                    }
                    let j = self.level_index(level).ok_or_else(|| {
                        Error::Argument(format!("level {level} is not part of the program"))
                    })?;
                    out.push((self.beta[maturity][j - 1], coef));
                }
                Quantity::Call { maturity, node } => {
                    check_l(maturity)?;
                    if node > gl {
                        return Err(Error::Index {
                            what: "grid node",
                            index: node,
                            len: gl + 1,
                        });
                    }
                    out.push((self.u[maturity][node], coef));
                }
                Quantity::BandAtom {
                    maturity,
                    band,
                    node,
                } => {
                    check_l(maturity)?;
                    if band == 0 || band > m + 1 {
                        return Err(Error::Index {
                            what: "band",
                            index: band,
                            len: m + 1,
                        });
                    }
                    if node == 0 || node > gl {
                        // No mass is ever placed at zero.
                        continue;
                    }
                    for (var, c) in self.band_atom_expr(maturity, band, node) {
                        out.push((var, c * coef));
                    }
                }
            }
        }
        Ok(out)
    }

    /// Epigraph of the largest nodal density per (maturity, band).
    fn add_regularizer(&self, b: &mut LpBuilder) {
        let gl = self.grid.last();
        for l in 0..self.num_maturities() {
            for j in 1..=self.num_levels() + 1 {
                let t = b.add_var(0.0, f64::INFINITY, format!("t[{l}][{j}]"));
                b.set_cost(t, 1.0);
                let end = self.level_nodes[j - 1].min(gl);
                for i in 1..=end {
                    let w = if i < gl {
                        0.5 * (self.grid.width(i - 1) + self.grid.width(i))
                    } else {
                        0.5 * self.grid.width(i - 1)
                    };
                    let mut row = self.band_atom_expr(l, j, i);
                    row.push((t, -w));
                    b.add_le(row, 0.0, format!("reg:{l}:{j}:{i}"));
                }
            }
        }
    }
}
