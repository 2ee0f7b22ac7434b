//! Barrier exotic prices from a decomposition and robust bounds over all
//! grid-supported models consistent with the quotes.

use serde::{Deserialize, Serialize};

use crate::decomposition::{
    assemble_frak_c, build_lp_with_levels, certify_model, CalibrationConfig, CalibrationLp,
    Decomposition, Functional, Instrument, ObjectiveSpec, Quantity, Side, SolveMeta,
};
use crate::error::Error;
use crate::joint_law::band_pmf;
use crate::lp::{solve, LpSolution};
use crate::market_data::{build_grid_with, validate, MarketQuotes, GRID_TOL};

/// `𝔠_l^{B_j}(K)` (zero at and beyond `B_j` for a valid decomposition).
fn frak_c_at(d: &Decomposition, l: usize, j: usize, k: f64) -> Result<f64, Error> {
    if !(k >= 0.0) {
        return Err(Error::Argument(format!(
            "strike must be non-negative, got {k}"
        )));
    }
    // 𝔠 vanishes from B_j on; evaluating it there (rather than assuming
    // zero) keeps the boundary identity a check on the decomposition.
    if k > d.grid.upper() {
        return Ok(0.0);
    }
    assemble_frak_c(d, l, j)?.eval(k)
}

/// `E[(K − S_{T_l})⁺ 1{M_{T_l} < B_j}] = K − S0 + 𝔠_l^{B_j}(K) − (K − B_j)⁺ b_l(B_j)`.
pub fn up_and_out_put(d: &Decomposition, l: usize, j: usize, k: f64) -> Result<f64, Error> {
    d.check_index(l, j)?;
    let c = frak_c_at(d, l, j, k)?;
    Ok(k - d.spot + c - (k - d.level(j)).max(0.0) * d.b(l, j))
}

/// `E[(S_{T_l} − K)⁺ 1{M_{T_l} < B_j}] = 𝔠_l^{B_j}(K) − (B_j − K)⁺ b_l(B_j)`.
pub fn up_and_out_call(d: &Decomposition, l: usize, j: usize, k: f64) -> Result<f64, Error> {
    d.check_index(l, j)?;
    let c = frak_c_at(d, l, j, k)?;
    Ok(c - (d.level(j) - k).max(0.0) * d.b(l, j))
}

/// Which running-maximum band a payoff piece pays in.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "level", rename_all = "snake_case")]
pub enum BandSelector {
    Any,
    /// `M < B`.
    Below(f64),
    /// `M ≥ B`.
    AtOrAbove(f64),
}

impl BandSelector {
    fn level(&self) -> Option<f64> {
        match *self {
            BandSelector::Any => None,
            BandSelector::Below(b) | BandSelector::AtOrAbove(b) => Some(b),
        }
    }

    /// Whether band `[lo, hi)` lies inside the selected event.
    fn selects(&self, lo: f64, hi: f64) -> bool {
        match *self {
            BandSelector::Any => true,
            BandSelector::Below(b) => hi <= b + GRID_TOL && lo < b - GRID_TOL,
            BandSelector::AtOrAbove(b) => lo >= b - GRID_TOL,
        }
    }
}

/// `1{band} · φ(S)` with `φ` piecewise linear through `knots`, extended
/// linearly beyond the outer knots (a single knot means a constant).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PayoffPiece {
    pub selector: BandSelector,
    pub knots: Vec<(f64, f64)>,
}

impl PayoffPiece {
    pub fn eval(&self, x: f64) -> f64 {
        let k = &self.knots;
        match k.len() {
            0 => 0.0,
            1 => k[0].1,
            n => {
                let seg = if x <= k[0].0 {
                    0
                } else if x >= k[n - 1].0 {
                    n - 2
                } else {
                    k.partition_point(|p| p.0 <= x).saturating_sub(1).min(n - 2)
                };
                let ((x0, y0), (x1, y1)) = (k[seg], k[seg + 1]);
                y0 + (y1 - y0) * (x - x0) / (x1 - x0)
            }
        }
    }
}

/// A payoff at one maturity (0-based), linear in the joint law.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PayoffSpec {
    pub maturity: usize,
    pub pieces: Vec<PayoffPiece>,
}

impl PayoffSpec {
    /// `(S − K)⁺`.
    pub fn call(maturity: usize, strike: f64) -> Self {
        Self {
            maturity,
            pieces: vec![PayoffPiece {
                selector: BandSelector::Any,
                knots: vec![(strike, 0.0), (strike + 1.0, 1.0)]
                    .into_iter()
                    .chain(lower_flat(strike))
                    .collect(),
            }],
        }
        .normalized()
    }

    /// `1{M ≥ B}`.
    pub fn one_touch(maturity: usize, level: f64) -> Self {
        Self {
            maturity,
            pieces: vec![PayoffPiece {
                selector: BandSelector::AtOrAbove(level),
                knots: vec![(0.0, 1.0)],
            }],
        }
    }

    /// `(K − S)⁺ 1{M < B}`.
    pub fn up_and_out_put(maturity: usize, strike: f64, level: f64) -> Self {
        Self {
            maturity,
            pieces: vec![PayoffPiece {
                selector: BandSelector::Below(level),
                knots: vec![(0.0, strike), (strike, 0.0), (strike + 1.0, 0.0)],
            }],
        }
        .normalized()
    }

    fn normalized(mut self) -> Self {
        for p in &mut self.pieces {
            p.knots.sort_by(|a, b| a.0.total_cmp(&b.0));
            p.knots.dedup_by(|a, b| (a.0 - b.0).abs() <= GRID_TOL);
        }
        self
    }

    fn levels(&self) -> Vec<f64> {
        self.pieces
            .iter()
            .filter_map(|p| p.selector.level())
            .collect()
    }

    fn knots(&self) -> Vec<f64> {
        self.pieces
            .iter()
            .flat_map(|p| p.knots.iter().map(|k| k.0))
            .collect()
    }
}

fn lower_flat(strike: f64) -> Option<(f64, f64)> {
    (strike > 0.0).then_some((0.0, 0.0))
}

/// The value of `payoff` under the joint law of `d`. Every selector level
/// must be a level of `d` (or the spot).
pub fn evaluate_payoff(d: &Decomposition, payoff: &PayoffSpec) -> Result<f64, Error> {
    let p = band_pmf(d, payoff.maturity)?;
    for lv in payoff.levels() {
        let known = (0..=d.num_levels() + 1).any(|j| (d.level(j) - lv).abs() <= GRID_TOL);
        if !known {
            return Err(Error::Argument(format!(
                "selector level {lv} is not a level of the decomposition"
            )));
        }
    }
    let mut value = 0.0;
    for piece in &payoff.pieces {
        for j in 1..=p.num_bands() {
            let (lo, hi) = p.band_edges(j);
            if !piece.selector.selects(lo, hi) {
                continue;
            }
            for (i, &w) in p.mass[j - 1].iter().enumerate() {
                value += w * piece.eval(p.grid.x(i));
            }
        }
    }
    Ok(value)
}

/// A quoted instrument's sensitivity of the optimum.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DualPrice {
    #[serde(rename = "type")]
    pub instrument: Instrument,
    /// 1-based maturity index.
    pub maturity: usize,
    pub strike_or_level: f64,
    /// `∂ value / ∂ quote`.
    pub price: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundResult {
    pub side: Side,
    pub value: f64,
    pub dual_prices: Vec<DualPrice>,
    /// The optimum ranges over models supported on the grid of
    /// `achieved_by`, so it may be narrower than the bound over all models.
    pub grid_bound: bool,
    pub achieved_by: Decomposition,
}

impl BoundResult {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("bound serializes")
    }
}

/// Extremal one-touch price `b_l(B*)` at an unquoted level `S0 < B* ≤ N`.
///
/// `B*` is inserted as a level at every maturity with a free price; a
/// quoted `B*` simply returns its pinned quote.
pub fn robust_barrier_bounds(
    q: &MarketQuotes,
    l: usize,
    level: f64,
    side: Side,
    cfg: &CalibrationConfig,
) -> Result<BoundResult, Error> {
    let n = q.upper_bound;
    if !(level > q.spot + GRID_TOL && level <= n + GRID_TOL) {
        return Err(Error::Argument(format!(
            "barrier {level} outside (spot, N] = ({}, {n}]",
            q.spot
        )));
    }
    let functional = Functional {
        terms: vec![(Quantity::Digital { maturity: l, level }, 1.0)],
    };
    optimize(q, &[level], &[level], functional, side, cfg)
}

/// Extremal value of `payoff` over grid-supported models matching `q`.
pub fn price_bound(
    q: &MarketQuotes,
    payoff: &PayoffSpec,
    side: Side,
    cfg: &CalibrationConfig,
) -> Result<BoundResult, Error> {
    if payoff.maturity >= q.num_maturities() {
        return Err(Error::Index {
            what: "maturity",
            index: payoff.maturity,
            len: q.num_maturities(),
        });
    }
    let n = q.upper_bound;
    let mut levels = Vec::new();
    for lv in payoff.levels() {
        if lv <= q.spot + GRID_TOL || lv > n + GRID_TOL {
            // M ≥ S0 always and M ≤ N always: such selectors need no level.
            if lv < q.spot - GRID_TOL || lv > n + GRID_TOL {
                return Err(Error::Argument(format!(
                    "selector level {lv} outside [spot, N]"
                )));
            }
            continue;
        }
        levels.push(lv);
    }
    for p in &payoff.pieces {
        if p.knots.windows(2).any(|w| !(w[1].0 > w[0].0)) {
            return Err(Error::Argument(
                "payoff knots must be strictly increasing".into(),
            ));
        }
    }
    let nodes: Vec<f64> = payoff
        .knots()
        .into_iter()
        .filter(|&x| x > GRID_TOL && x < n - GRID_TOL)
        .chain(levels.iter().copied())
        .collect();
    // The functional needs the final level set, so it is resolved against a
    // preliminary layout of the same program.
    let grid = build_grid_with(q, cfg.refine, &nodes);
    let probe = build_lp_with_levels(q, &grid, &levels, ObjectiveSpec::Feasibility)?;
    let functional = payoff_functional(&probe, payoff);
    optimize(q, &levels, &nodes, functional, side, cfg)
}

fn payoff_functional(lp: &CalibrationLp, payoff: &PayoffSpec) -> Functional {
    let mut terms = Vec::new();
    let g = &lp.grid;
    for piece in &payoff.pieces {
        for j in 1..=lp.num_levels() + 1 {
            if !piece.selector.selects(lp.level(j - 1), lp.level(j)) {
                continue;
            }
            for i in 1..=g.last() {
                let phi = piece.eval(g.x(i));
                if phi != 0.0 {
                    terms.push((
                        Quantity::BandAtom {
                            maturity: payoff.maturity,
                            band: j,
                            node: i,
                        },
                        phi,
                    ));
                }
            }
        }
    }
    Functional { terms }
}

fn optimize(
    q: &MarketQuotes,
    levels: &[f64],
    nodes: &[f64],
    functional: Functional,
    side: Side,
    cfg: &CalibrationConfig,
) -> Result<BoundResult, Error> {
    let report = validate(q);
    if report.has_fatal() {
        return Err(Error::Invalid(report));
    }
    let grid = build_grid_with(q, cfg.refine, nodes);
    let objective = ObjectiveSpec::Bound { side, functional };
    let lp = build_lp_with_levels(q, &grid, levels, objective.clone())?;
    match solve(&lp.problem, cfg.tolerances)? {
        LpSolution::Optimal {
            x,
            objective: obj,
            duals,
            iterations,
            ..
        } => {
            let sign = match side {
                Side::Min => 1.0,
                Side::Max => -1.0,
            };
            let meta = SolveMeta {
                objective: objective.name().into(),
                objective_value: sign * obj,
                iterations,
                rows: lp.problem.num_rows(),
                columns: lp.problem.num_vars(),
            };
            let d = lp.decomposition(&x, q, meta);
            certify_model(&d, cfg.tolerances)?;
            let dual_prices = lp
                .pins
                .iter()
                .map(|p| DualPrice {
                    instrument: p.instrument,
                    maturity: p.maturity + 1,
                    strike_or_level: p.strike_or_level,
                    price: sign * duals[p.row],
                })
                .collect();
            Ok(BoundResult {
                side,
                value: sign * obj,
                dual_prices,
                grid_bound: true,
                achieved_by: d,
            })
        }
        LpSolution::Infeasible { .. } => {
            let base = build_lp_with_levels(q, &grid, levels, ObjectiveSpec::Feasibility)?;
            let cert = crate::arbitrage::certify(q, &base, cfg.tolerances)?;
            Err(Error::Arbitrage(Box::new(cert)))
        }
        LpSolution::Unbounded { .. } => {
            Err(Error::Consistency("bound program is unbounded".into()))
        }
    }
}
