//! Arbitrage certificates from infeasible calibration programs.
//!
//! A certificate is a static portfolio `λ` in the quoted instruments,
//! positive weights meaning short at the market price. Its market value
//! `Σ λ·quote` strictly exceeds the largest value `Σ λ·(model price)` any
//! grid-supported model can attain, so selling the portfolio and
//! superreplicating it locks in the gap.

use serde::{Deserialize, Serialize};

use crate::decomposition::{build_lp, CalibrationLp, Instrument};
use crate::error::Error;
use crate::lp::{farkas_margin, solve, LpProblem, LpSolution, LpTolerances};
use crate::market_data::{Grid, MarketQuotes, GRID_TOL};

/// Weight on one quoted instrument.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Lambda {
    #[serde(rename = "type")]
    pub instrument: Instrument,
    /// 1-based maturity index.
    pub maturity: usize,
    pub strike_or_level: f64,
    pub weight: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArbitrageCertificate {
    pub lambdas: Vec<Lambda>,
    /// `Σ λ·quote`.
    pub market_price: f64,
    /// Largest `Σ λ·(model price)` over grid-supported models.
    pub superrep_value: f64,
    pub gap: f64,
    /// The supremum ranges over models supported on `grid` only.
    pub grid_certificate: bool,
    /// Weights are scaled so that the largest `|λ|` equals one.
    pub normalization: String,
    pub grid: Vec<f64>,
}

impl ArbitrageCertificate {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("certificate serializes")
    }

    pub fn from_json(s: &str) -> Result<Self, Error> {
        serde_json::from_str(s).map_err(|e| Error::Parse(e.to_string()))
    }

    /// Copy with every weight (and hence every value) multiplied by `s`.
    pub fn scaled(&self, s: f64) -> Self {
        let mut out = self.clone();
        for l in &mut out.lambdas {
            l.weight *= s;
        }
        out.market_price *= s;
        out.superrep_value *= s;
        out.gap *= s;
        out.normalization = format!("scaled by {s}");
        out
    }
}

/// Outcome of [`verify_arbitrage`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Verification {
    pub market_price: f64,
    pub superrep_value: f64,
    pub confirmed: bool,
}

/// Builds a certificate for quotes whose calibration program is infeasible.
///
/// The certificate comes from the duals of the elastic program that
/// minimizes `Σ |pinned value − quote|`: its optimum is the L¹ distance of
/// the quotes from the grid-model polytope and its pin-row duals, bounded
/// by one in magnitude, are a Farkas vector of the original program.
pub fn certify(
    q: &MarketQuotes,
    lp: &CalibrationLp,
    tol: LpTolerances,
) -> Result<ArbitrageCertificate, Error> {
    let elastic = elastic_problem(&lp.problem, &lp.pin_rows());
    match solve(&elastic, tol)? {
        LpSolution::Optimal { duals, objective, .. } if objective > tol.feas => {
            let cert = extract_certificate(lp, &duals, tol)?;
            let check = verify_arbitrage(q, &cert, tol)?;
            if !check.confirmed {
                return Err(Error::Consistency("arbitrage certificate failed verification".into()));
            }
            Ok(cert)
        }
        LpSolution::Optimal { objective, .. } => Err(Error::Consistency(format!(
            "quotes lie within {objective:e} of the model set; infeasibility is numerically inconclusive"
        ))),
        _ => Err(Error::Consistency("elastic calibration program did not solve".into())),
    }
}

/// Adds `e⁺ − e⁻` with unit cost to each listed row and drops the original
/// objective.
fn elastic_problem(p: &LpProblem, rows: &[usize]) -> LpProblem {
    let (m, n) = (p.num_rows(), p.num_vars());
    let n2 = n + 2 * rows.len();
    let mut a = vec![0.0; m * n2];
    for i in 0..m {
        a[i * n2..i * n2 + n].copy_from_slice(p.row(i));
    }
    let mut out = LpProblem {
        a,
        b: p.b.clone(),
        c: vec![0.0; n],
        lo: p.lo.clone(),
        hi: p.hi.clone(),
        row_tags: p.row_tags.clone(),
        var_tags: p.var_tags.clone(),
    };
    for (k, &r) in rows.iter().enumerate() {
        for (s, sign) in [(0, 1.0), (1, -1.0)] {
            out.a[r * n2 + n + 2 * k + s] = sign;
            out.c.push(1.0);
            out.lo.push(0.0);
            out.hi.push(f64::INFINITY);
            out.var_tags.push(format!(
                "elastic{}:{}",
                if s == 0 { "+" } else { "-" },
                p.row_tags[r]
            ));
        }
    }
    out
}

/// Reads the portfolio off a Farkas vector of the calibration program: the
/// multipliers of the quote-pin rows, normalized to `max |λ| = 1`.
pub fn extract_certificate(
    lp: &CalibrationLp,
    farkas: &[f64],
    tol: LpTolerances,
) -> Result<ArbitrageCertificate, Error> {
    if farkas.len() != lp.problem.num_rows() {
        return Err(Error::Dimension(format!(
            "{} multipliers for {} rows",
            farkas.len(),
            lp.problem.num_rows()
        )));
    }
    let margin = farkas_margin(&lp.problem, farkas, tol.pivot);
    if !(margin > tol.pivot) {
        return Err(Error::Consistency(format!(
            "row multipliers do not certify infeasibility (margin {margin:e})"
        )));
    }
    let scale = lp
        .pins
        .iter()
        .map(|p| farkas[p.row].abs())
        .fold(0.0, f64::max);
    if !(scale > 0.0) {
        return Err(Error::Consistency(
            "certificate has no weight on quoted instruments".into(),
        ));
    }
    let lambdas: Vec<Lambda> = lp
        .pins
        .iter()
        .map(|p| Lambda {
            instrument: p.instrument,
            maturity: p.maturity + 1,
            strike_or_level: p.strike_or_level,
            weight: clean(farkas[p.row] / scale),
        })
        .collect();
    let market_price = lp
        .pins
        .iter()
        .zip(&lambdas)
        .map(|(p, l)| l.weight * p.price)
        .sum();
    let superrep_value = superreplication(lp, &lambdas, tol)?
        .ok_or_else(|| Error::Consistency("superreplication program is unbounded".into()))?;
    Ok(ArbitrageCertificate {
        lambdas,
        market_price,
        superrep_value,
        gap: market_price - superrep_value,
        grid_certificate: true,
        normalization: "max |weight| = 1".into(),
        grid: lp.grid.points().to_vec(),
    })
}

/// Suppresses round-off in weights that are zero in exact arithmetic.
fn clean(w: f64) -> f64 {
    if w.abs() < 1e-12 {
        0.0
    } else {
        w
    }
}

/// `max Σ λ·(pinned value)` over the program without its pin rows, or
/// `None` when unbounded.
fn superreplication(
    lp: &CalibrationLp,
    lambdas: &[Lambda],
    tol: LpTolerances,
) -> Result<Option<f64>, Error> {
    let mut p = lp.problem.without_rows(&lp.pin_rows());
    p.c.iter_mut().for_each(|c| *c = 0.0);
    for lam in lambdas {
        let pin = lp
            .pins
            .iter()
            .find(|p| {
                p.instrument == lam.instrument
                    && p.maturity + 1 == lam.maturity
                    && (p.strike_or_level - lam.strike_or_level).abs() <= GRID_TOL
            })
            .ok_or_else(|| {
                Error::Argument(format!(
                    "no quoted {:?} at {} for maturity {}",
                    lam.instrument, lam.strike_or_level, lam.maturity
                ))
            })?;
        p.c[pin.var] -= lam.weight;
    }
    match solve(&p, tol)? {
        LpSolution::Optimal { objective, .. } => Ok(Some(-objective)),
        LpSolution::Unbounded { .. } => Ok(None),
        LpSolution::Infeasible { .. } => Err(Error::Consistency(
            "structural program is infeasible".into(),
        )),
    }
}

/// Independently recomputes the superreplication value of `cert` on its
/// grid and confirms the strict price inequality.
pub fn verify_arbitrage(
    q: &MarketQuotes,
    cert: &ArbitrageCertificate,
    tol: LpTolerances,
) -> Result<Verification, Error> {
    let grid = Grid::from_points(cert.grid.iter().copied());
    let lp = build_lp(q, &grid, Default::default())?;
    let mut market_price = 0.0;
    for lam in &cert.lambdas {
        let quote = match lam.instrument {
            Instrument::Call => q.call_price(lam.maturity.wrapping_sub(1), lam.strike_or_level),
            Instrument::Digital => {
                q.barrier_price(lam.maturity.wrapping_sub(1), lam.strike_or_level)
            }
        }
        .ok_or_else(|| {
            Error::Argument(format!(
                "weight on an unquoted instrument at {}",
                lam.strike_or_level
            ))
        })?;
        market_price += lam.weight * quote;
    }
    let superrep = superreplication(&lp, &cert.lambdas, tol)?;
    let confirmed = match superrep {
        Some(v) => {
            let gap = market_price - v;
            gap > tol.gap && gap >= cert.gap - tol.gap
        }
        None => false,
    };
    Ok(Verification {
        market_price,
        superrep_value: superrep.unwrap_or(f64::INFINITY),
        confirmed,
    })
}
