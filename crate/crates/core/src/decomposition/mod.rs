//! Calibration program over families of convex block functions and the
//! certified objects assembled from its solution.
//!
//! For maturities `l` and levels `B_0 = S0 < B_1 < … < B_m < B_{m+1} = N`,
//! the block `c_l^{B_j}` is the call transform of the price stopped at `B_j`
//! on paths whose maximum reached `B_{j−1}` by `T_l`. Blocks are convex with
//! prescribed end values and slopes, increase across maturities, and
//! recombine into the call curve `u_l`. Maturities are 0-based in this API;
//! level and band indices are 1-based so that `j = 0` always means the spot.

mod check;
mod layout;

use serde::{Deserialize, Serialize};

use crate::arbitrage::{self, ArbitrageCertificate};
use crate::convex_fn::PLConvex;
use crate::error::Error;
use crate::lp::{solve, LpSolution, LpTolerances};
use crate::market_data::{build_grid, validate, Grid, MarketQuotes};

pub use check::{check_conditions, check_single_maturity};
pub use layout::{
    build_lp, build_lp_with_levels, CalibrationLp, Functional, Instrument, ObjectiveSpec, Quantity,
    QuotePin, Side,
};

/// Solver details recorded with a decomposition.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct SolveMeta {
    pub objective: String,
    pub objective_value: f64,
    pub iterations: usize,
    pub rows: usize,
    pub columns: usize,
}

/// A certified family of blocks for every maturity and level.
#[derive(Debug, Clone, PartialEq)]
pub struct Decomposition {
    pub grid: Grid,
    pub spot: f64,
    /// `B_1 < … < B_m`; may include levels inserted by a bound program.
    pub levels: Vec<f64>,
    /// Call curve `u_l = c_{μ_l}` per maturity.
    pub u: Vec<PLConvex>,
    /// `blocks[l][j−1] = c_l^{B_j}`, `j = 1..=m+1`, zero beyond `B_j`.
    pub blocks: Vec<Vec<PLConvex>>,
    /// `barrier[l][j] = b_l(B_j)`, `j = 0..=m+1` (`b_l(B_0) = 1`,
    /// `b_l(B_{m+1})` the mass of `u_l` at `N`).
    pub barrier: Vec<Vec<f64>>,
    pub quotes: MarketQuotes,
    pub meta: SolveMeta,
}

impl Decomposition {
    pub fn num_maturities(&self) -> usize {
        self.u.len()
    }

    /// `m`, the number of barrier levels.
    pub fn num_levels(&self) -> usize {
        self.levels.len()
    }

    /// `B_j` for `j = 0..=m+1`.
    pub fn level(&self, j: usize) -> f64 {
        if j == 0 {
            self.spot
        } else if j <= self.levels.len() {
            self.levels[j - 1]
        } else {
            self.grid.upper()
        }
    }

    /// `b_l(B_j)` for `j = 0..=m+1`.
    pub fn b(&self, l: usize, j: usize) -> f64 {
        self.barrier[l][j]
    }

    /// Block `c_l^{B_j}`, `j = 1..=m+1`.
    pub fn block(&self, l: usize, j: usize) -> Result<&PLConvex, Error> {
        self.check_index(l, j)?;
        Ok(&self.blocks[l][j - 1])
    }

    pub(crate) fn check_index(&self, l: usize, j: usize) -> Result<(), Error> {
        if l >= self.num_maturities() {
            return Err(Error::Index {
                what: "maturity",
                index: l,
                len: self.num_maturities(),
            });
        }
        if j == 0 || j > self.num_levels() + 1 {
            return Err(Error::Index {
                what: "level",
                index: j,
                len: self.num_levels() + 1,
            });
        }
        Ok(())
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&self.to_document()).expect("decomposition serializes")
    }

    pub fn from_json(s: &str) -> Result<Self, Error> {
        let doc: DecompositionDoc =
            serde_json::from_str(s).map_err(|e| Error::Parse(e.to_string()))?;
        Self::from_document(doc)
    }

    fn to_document(&self) -> DecompositionDoc {
        let mut blocks = Vec::new();
        for (l, row) in self.blocks.iter().enumerate() {
            for (j, f) in row.iter().enumerate() {
                blocks.push(BlockDoc {
                    maturity: l + 1,
                    level: j + 1,
                    values: f.values.clone(),
                });
            }
        }
        DecompositionDoc {
            grid: self.grid.points().to_vec(),
            spot: self.spot,
            levels: self.levels.clone(),
            u: self.u.iter().map(|f| f.values.clone()).collect(),
            blocks,
            barrier: self.barrier.clone(),
            quotes: self.quotes.clone(),
            meta: self.meta.clone(),
        }
    }

    fn from_document(doc: DecompositionDoc) -> Result<Self, Error> {
        let grid = Grid::from_points(doc.grid.iter().copied());
        if grid.len() != doc.grid.len() {
            return Err(Error::Parse(
                "grid points are not strictly increasing".into(),
            ));
        }
        let k = doc.u.len();
        let m = doc.levels.len();
        let u = doc
            .u
            .into_iter()
            .map(|v| PLConvex::new(grid.clone(), v))
            .collect::<Result<Vec<_>, _>>()?;
        let mut blocks = vec![vec![PLConvex::zeros(&grid); m + 1]; k];
        for b in doc.blocks {
            if b.maturity == 0 || b.maturity > k || b.level == 0 || b.level > m + 1 {
                return Err(Error::Parse(format!(
                    "block ({}, {}) outside {k} maturities × {} levels",
                    b.maturity,
                    b.level,
                    m + 1
                )));
            }
            blocks[b.maturity - 1][b.level - 1] = PLConvex::new(grid.clone(), b.values)?;
        }
        if doc.barrier.len() != k || doc.barrier.iter().any(|r| r.len() != m + 2) {
            return Err(Error::Parse("barrier table has the wrong shape".into()));
        }
        Ok(Self {
            grid,
            spot: doc.spot,
            levels: doc.levels,
            u,
            blocks,
            barrier: doc.barrier,
            quotes: doc.quotes,
            meta: doc.meta,
        })
    }
}

#[derive(Serialize, Deserialize)]
struct BlockDoc {
    maturity: usize,
    level: usize,
    values: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct DecompositionDoc {
    grid: Vec<f64>,
    spot: f64,
    levels: Vec<f64>,
    u: Vec<Vec<f64>>,
    blocks: Vec<BlockDoc>,
    barrier: Vec<Vec<f64>>,
    quotes: MarketQuotes,
    meta: SolveMeta,
}

impl Serialize for Decomposition {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        self.to_document().serialize(s)
    }
}

impl<'de> Deserialize<'de> for Decomposition {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let doc = DecompositionDoc::deserialize(d)?;
        Self::from_document(doc).map_err(serde::de::Error::custom)
    }
}

impl CalibrationLp {
    /// Reads the decomposition off a primal solution of this program.
    pub fn decomposition(
        &self,
        x: &[f64],
        quotes: &MarketQuotes,
        meta: SolveMeta,
    ) -> Decomposition {
        let g = &self.grid;
        let gl = g.last();
        let m = self.num_levels();
        let nodal = |vars: &[usize]| -> PLConvex {
            let mut values = vec![0.0; g.len()];
            for (i, &var) in vars.iter().enumerate() {
                values[i] = x[var];
            }
            PLConvex {
                grid: g.clone(),
                values,
            }
        };
        let u: Vec<PLConvex> = self.u.iter().map(|vars| nodal(vars)).collect();
        let blocks = self
            .v
            .iter()
            .map(|row| row.iter().map(|vars| nodal(vars)).collect())
            .collect();
        let barrier = (0..self.num_maturities())
            .map(|l| {
                let mut b = Vec::with_capacity(m + 2);
                b.push(1.0);
                b.extend(self.beta[l].iter().map(|&var| x[var]));
                b.push((u[l].values[gl - 1] - u[l].values[gl]) / g.width(gl - 1));
                b
            })
            .collect();
        Decomposition {
            grid: g.clone(),
            spot: self.spot,
            levels: self.levels.clone(),
            u,
            blocks,
            barrier,
            quotes: quotes.clone(),
            meta,
        }
    }
}

/// Settings for [`calibrate`].
#[derive(Debug, Clone, PartialEq)]
pub struct CalibrationConfig {
    /// Number of equally spaced nodes inserted into every base cell.
    pub refine: usize,
    pub tolerances: LpTolerances,
    pub objective: ObjectiveSpec,
}

impl Default for CalibrationConfig {
    fn default() -> Self {
        Self {
            refine: 2,
            tolerances: LpTolerances::default(),
            objective: ObjectiveSpec::Feasibility,
        }
    }
}

/// Outcome of a calibration: a model or a proof that none exists on the grid.
#[derive(Debug, Clone)]
pub enum Calibration {
    Model(Box<Decomposition>),
    Arbitrage(Box<ArbitrageCertificate>),
}

/// Decides whether a grid-supported model matches all quotes.
///
/// Statically invalid quotes are rejected with [`Error::Invalid`]; a solver
/// stall is reported as [`Error::Stalled`], never as arbitrage.
pub fn calibrate(q: &MarketQuotes, cfg: &CalibrationConfig) -> Result<Calibration, Error> {
    let report = validate(q);
    if report.has_fatal() {
        return Err(Error::Invalid(report));
    }
    let grid = build_grid(q, cfg.refine);
    let lp = build_lp(q, &grid, cfg.objective.clone())?;
    match solve(&lp.problem, cfg.tolerances)? {
        LpSolution::Optimal {
            x,
            objective,
            iterations,
            ..
        } => {
            let meta = SolveMeta {
                objective: cfg.objective.name().to_string(),
                objective_value: objective,
                iterations,
                rows: lp.problem.num_rows(),
                columns: lp.problem.num_vars(),
            };
            let d = lp.decomposition(&x, q, meta);
            certify_model(&d, cfg.tolerances)?;
            Ok(Calibration::Model(Box::new(d)))
        }
        LpSolution::Infeasible { .. } => {
            let cert = arbitrage::certify(q, &lp, cfg.tolerances)?;
            Ok(Calibration::Arbitrage(Box::new(cert)))
        }
        LpSolution::Unbounded { .. } => Err(Error::Consistency(
            "calibration program reported unbounded".into(),
        )),
    }
}

/// Re-checks a solver-produced decomposition with the independent checker.
pub(crate) fn certify_model(d: &Decomposition, tol: LpTolerances) -> Result<(), Error> {
    let report = check_conditions(d, 10.0 * tol.feas);
    if report.has_fatal() {
        let first = &report.violations[0];
        return Err(Error::Consistency(format!(
            "decomposition failed re-check: {} {}",
            first.rule, first.message
        )));
    }
    Ok(())
}

/// `𝔠_l^{B_j} = Σ_{i<j} (c_l^{B_i} − b_l(B_i)(B_i − x)⁺) + c_l^{B_j}` for
/// `j = 1..=m+1`.
pub fn assemble_frak_c(d: &Decomposition, l: usize, j: usize) -> Result<PLConvex, Error> {
    d.check_index(l, j)?;
    let mut out = d.blocks[l][j - 1].clone();
    for i in 1..j {
        out = out
            .add_scaled(1.0, &d.blocks[l][i - 1])
            .add_scaled(-d.barrier[l][i], &PLConvex::put_payoff(&d.grid, d.level(i)));
    }
    Ok(out)
}

/// Blocks of one maturity → `𝔠^{B_1}, …, 𝔠^{B_{m+1}}`.
///
/// `b` holds `b(B_1), …, b(B_m)`.
pub fn multi_to_single(
    blocks: &[PLConvex],
    b: &[f64],
    levels: &[f64],
) -> Result<Vec<PLConvex>, Error> {
    check_family_shape(blocks, b, levels)?;
    let grid = &blocks[0].grid;
    let mut out: Vec<PLConvex> = Vec::with_capacity(blocks.len());
    for j in 0..blocks.len() {
        let f = match out.last() {
            None => blocks[0].clone(),
            Some(prev) => prev
                .add_scaled(1.0, &blocks[j])
                .add_scaled(-b[j - 1], &PLConvex::put_payoff(grid, levels[j - 1])),
        };
        out.push(f);
    }
    Ok(out)
}

/// `𝔠^{B_1}, …, 𝔠^{B_{m+1}}` → blocks via
/// `c^{B_j} = 𝔠^{B_j} − 𝔠^{B_{j−1}} + b(B_{j−1})(B_{j−1} − x)⁺`, with
/// `𝔠^{B_0} = (S0 − x)⁺` and `b(B_0) = 1`, so the first block is `𝔠^{B_1}`.
pub fn single_to_multi(
    frak: &[PLConvex],
    b: &[f64],
    levels: &[f64],
) -> Result<Vec<PLConvex>, Error> {
    check_family_shape(frak, b, levels)?;
    let grid = &frak[0].grid;
    let mut out = Vec::with_capacity(frak.len());
    for j in 0..frak.len() {
        let f = if j == 0 {
            // 𝔠^{B_1} − (S0 − x)⁺ + 1·(S0 − x)⁺.
            frak[0].clone()
        } else {
            frak[j]
                .add_scaled(-1.0, &frak[j - 1])
                .add_scaled(b[j - 1], &PLConvex::put_payoff(grid, levels[j - 1]))
        };
        out.push(f);
    }
    Ok(out)
}

fn check_family_shape(fs: &[PLConvex], b: &[f64], levels: &[f64]) -> Result<(), Error> {
    if fs.is_empty() || fs.len() != b.len() + 1 || b.len() != levels.len() {
        return Err(Error::Dimension(format!(
            "{} functions, {} barrier prices and {} levels (need m+1, m, m)",
            fs.len(),
            b.len(),
            levels.len()
        )));
    }
    if fs.iter().any(|f| f.grid != fs[0].grid) {
        return Err(Error::Dimension("functions live on different grids".into()));
    }
    Ok(())
}
