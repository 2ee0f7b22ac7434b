//! Quote ingestion, static no-arbitrage screens and the shared spatial grid.

use serde::{Deserialize, Serialize};

use crate::error::Error;

/// Absolute tolerance used when merging grid points and matching quoted
/// strikes or levels against grid nodes.
pub const GRID_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CallQuote {
    #[serde(alias = "K")]
    pub strike: f64,
    #[serde(alias = "p")]
    pub price: f64,
}

/// Price of the one-touch paying 1 if the running maximum reaches `level`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BarrierQuote {
    #[serde(alias = "B")]
    pub level: f64,
    #[serde(alias = "p")]
    pub price: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MaturityQuotes {
    pub t: f64,
    #[serde(default)]
    pub calls: Vec<CallQuote>,
    #[serde(default)]
    pub barriers: Vec<BarrierQuote>,
}

/// Vanilla and one-touch quotes across maturities, normalized: every list is
/// sorted and duplicate barrier levels are merged.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MarketQuotes {
    pub spot: f64,
    /// Right endpoint `N` of the price support.
    pub upper_bound: f64,
    pub maturities: Vec<MaturityQuotes>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawQuotes {
    spot: f64,
    #[serde(default)]
    upper_bound: Option<f64>,
    maturities: Vec<MaturityQuotes>,
}

impl MarketQuotes {
    /// Builds normalized quotes; `upper_bound` defaults to twice the largest
    /// strike or barrier level.
    pub fn new(
        spot: f64,
        upper_bound: Option<f64>,
        mut maturities: Vec<MaturityQuotes>,
    ) -> Result<Self, Error> {
        maturities.sort_by(|a, b| a.t.total_cmp(&b.t));
        for (l, mat) in maturities.iter_mut().enumerate() {
            mat.calls.sort_by(|a, b| a.strike.total_cmp(&b.strike));
            mat.barriers.sort_by(|a, b| a.level.total_cmp(&b.level));
            mat.calls =
                dedup_quotes(&mat.calls, |c| (c.strike, c.price)).map_err(|(x, p0, p1)| {
                    Error::Parse(format!(
                    "maturities[{l}]: conflicting duplicate strike {x} with prices {p0} and {p1}"
                ))
                })?;
            mat.barriers =
                dedup_quotes(&mat.barriers, |b| (b.level, b.price)).map_err(|(x, p0, p1)| {
                    Error::Parse(format!(
                        "maturities[{l}]: conflicting duplicate barrier {x} with prices {p0} and {p1}"
                    ))
                })?;
        }
        let mut q = Self {
            spot,
            upper_bound: 0.0,
            maturities,
        };
        q.upper_bound = match upper_bound {
            Some(n) => n,
            None => {
                let top = q
                    .strikes()
                    .into_iter()
                    .chain(q.levels())
                    .fold(0.0, f64::max);
                if top > 0.0 {
                    2.0 * top
                } else {
                    2.0 * spot
                }
            }
        };
        Ok(q)
    }

    pub fn num_maturities(&self) -> usize {
        self.maturities.len()
    }

    /// Sorted union of quoted strikes over all maturities.
    pub fn strikes(&self) -> Vec<f64> {
        merge_sorted(
            self.maturities
                .iter()
                .flat_map(|m| m.calls.iter().map(|c| c.strike)),
        )
    }

    /// Sorted union of quoted barrier levels over all maturities.
    pub fn levels(&self) -> Vec<f64> {
        merge_sorted(
            self.maturities
                .iter()
                .flat_map(|m| m.barriers.iter().map(|b| b.level)),
        )
    }

    pub fn call_price(&self, l: usize, strike: f64) -> Option<f64> {
        self.maturities
            .get(l)?
            .calls
            .iter()
            .find(|c| (c.strike - strike).abs() <= GRID_TOL)
            .map(|c| c.price)
    }

    pub fn barrier_price(&self, l: usize, level: f64) -> Option<f64> {
        self.maturities
            .get(l)?
            .barriers
            .iter()
            .find(|b| (b.level - level).abs() <= GRID_TOL)
            .map(|b| b.price)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("quotes serialize")
    }
}

fn dedup_quotes<T: Copy>(
    sorted: &[T],
    key: impl Fn(&T) -> (f64, f64),
) -> Result<Vec<T>, (f64, f64, f64)> {
    let mut out: Vec<T> = Vec::with_capacity(sorted.len());
    for item in sorted {
        let (x, p) = key(item);
        if let Some(last) = out.last() {
            let (x0, p0) = key(last);
            if (x - x0).abs() <= GRID_TOL {
                if p != p0 {
                    return Err((x, p0, p));
                }
                continue;
            }
        }
        out.push(*item);
    }
    Ok(out)
}

fn merge_sorted(values: impl Iterator<Item = f64>) -> Vec<f64> {
    let mut v: Vec<f64> = values.collect();
    v.sort_by(f64::total_cmp);
    v.dedup_by(|a, b| (*a - *b).abs() <= GRID_TOL);
    v
}

/// Parses a quote document (see the README for the schema) and normalizes it.
pub fn parse_quotes(document: &str) -> Result<MarketQuotes, Error> {
    let de = &mut serde_json::Deserializer::from_str(document);
    let raw: RawQuotes = serde_path_to_error::deserialize(de)
        .map_err(|e| Error::Parse(format!("{}: {}", e.path(), e.inner())))?;
    MarketQuotes::new(raw.spot, raw.upper_bound, raw.maturities)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Severity {
    Warning,
    Fatal,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Violation {
    pub rule: String,
    pub severity: Severity,
    /// 1-based maturity index, when the rule is local to one maturity.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub maturity: Option<usize>,
    /// Strike, barrier level or grid point the rule refers to.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub location: Option<f64>,
    pub message: String,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn is_clean(&self) -> bool {
        self.violations.is_empty()
    }

    pub fn has_fatal(&self) -> bool {
        self.violations
            .iter()
            .any(|v| v.severity == Severity::Fatal)
    }

    pub fn contains(&self, rule: &str) -> bool {
        self.violations.iter().any(|v| v.rule == rule)
    }

    pub fn push(
        &mut self,
        rule: &str,
        severity: Severity,
        maturity: Option<usize>,
        location: Option<f64>,
        message: impl Into<String>,
    ) {
        self.violations.push(Violation {
            rule: rule.to_string(),
            severity,
            maturity,
            location,
            message: message.into(),
        });
    }

    pub fn fatal(
        &mut self,
        rule: &str,
        maturity: Option<usize>,
        location: Option<f64>,
        message: impl Into<String>,
    ) {
        self.push(rule, Severity::Fatal, maturity, location, message);
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }
}

/// Tolerance on slope comparisons in [`validate`].
const SLOPE_TOL: f64 = 1e-9;
/// Tolerance on price comparisons in [`validate`].
const PRICE_TOL: f64 = 1e-12;

/// Static screens on the quotes. Every violated rule becomes a report entry.
pub fn validate(q: &MarketQuotes) -> ValidationReport {
    let mut rep = ValidationReport::default();
    let s0 = q.spot;
    if !(s0.is_finite() && s0 > 0.0) {
        rep.fatal(
            "SPOT_POSITIVE",
            None,
            None,
            format!("spot must be positive, got {s0}"),
        );
    }
    if q.maturities.is_empty() {
        rep.fatal(
            "NO_MATURITIES",
            None,
            None,
            "at least one maturity is required",
        );
    }
    // A barrier may sit at N itself (one-touch of the support endpoint);
    // strikes must lie strictly below N since calls there are worthless.
    let top_strike = q.strikes().into_iter().fold(s0, f64::max);
    let top_level = q.levels().into_iter().fold(s0, f64::max);
    if !q.upper_bound.is_finite() || q.upper_bound <= top_strike || q.upper_bound < top_level {
        rep.fatal(
            "UPPER_BOUND",
            None,
            Some(q.upper_bound),
            format!(
                "upper bound {} must exceed spot and every strike ({}) and reach every barrier ({})",
                q.upper_bound, top_strike, top_level
            ),
        );
    }

    for (l, mat) in q.maturities.iter().enumerate() {
        let ml = Some(l + 1);
        if !(mat.t.is_finite() && mat.t > 0.0) {
            rep.fatal(
                "MATURITY_ORDER",
                ml,
                None,
                format!("maturity time must be positive, got {}", mat.t),
            );
        }
        if l > 0 && mat.t <= q.maturities[l - 1].t {
            rep.fatal(
                "MATURITY_ORDER",
                ml,
                None,
                "maturity times must be strictly increasing",
            );
        }
        if mat.calls.is_empty() && mat.barriers.is_empty() {
            rep.push(
                "EMPTY_MATURITY",
                Severity::Warning,
                ml,
                None,
                "maturity carries no quotes",
            );
        }

        for c in &mat.calls {
            let loc = Some(c.strike);
            if !(c.strike.is_finite() && c.strike > 0.0) {
                rep.fatal("STRIKE_POSITIVE", ml, loc, "strike must be positive");
            }
            if !(c.price.is_finite() && c.price > 0.0) {
                rep.fatal(
                    "CALL_NONPOSITIVE",
                    ml,
                    loc,
                    format!("call price {} must be positive", c.price),
                );
            }
            if c.price > s0 + PRICE_TOL {
                rep.fatal(
                    "CALL_ABOVE_SPOT",
                    ml,
                    loc,
                    format!("call above spot: {} > {s0}", c.price),
                );
            }
            let intrinsic = (s0 - c.strike).max(0.0);
            if c.price < intrinsic - PRICE_TOL {
                rep.fatal(
                    "CALL_INTRINSIC",
                    ml,
                    loc,
                    format!("call price {} below intrinsic value {intrinsic}", c.price),
                );
            }
        }
        for w in mat.calls.windows(2) {
            let (a, b) = (w[0], w[1]);
            let loc = Some(b.strike);
            if b.price >= a.price {
                rep.fatal(
                    "CALL_MONOTONE",
                    ml,
                    loc,
                    format!(
                        "call prices must strictly decrease in strike: c({})={} ≤ c({})={}",
                        a.strike, a.price, b.strike, b.price
                    ),
                );
            }
            let slope = (b.price - a.price) / (b.strike - a.strike);
            if !(-1.0 - SLOPE_TOL..=SLOPE_TOL).contains(&slope) {
                rep.fatal(
                    "CALL_SLOPE",
                    ml,
                    loc,
                    format!(
                        "call slope {slope} outside [-1, 0] on [{}, {}]",
                        a.strike, b.strike
                    ),
                );
            }
        }
        for w in mat.calls.windows(3) {
            let s1 = (w[1].price - w[0].price) / (w[1].strike - w[0].strike);
            let s2 = (w[2].price - w[1].price) / (w[2].strike - w[1].strike);
            if s2 < s1 - SLOPE_TOL {
                rep.fatal(
                    "CALL_CONVEX",
                    ml,
                    Some(w[1].strike),
                    format!("call prices not convex at strike {}", w[1].strike),
                );
            }
        }

        for b in &mat.barriers {
            let loc = Some(b.level);
            if !(b.price.is_finite() && (0.0..=1.0).contains(&b.price)) {
                rep.fatal(
                    "BARRIER_RANGE",
                    ml,
                    loc,
                    format!("barrier price {} outside [0, 1]", b.price),
                );
            }
            if (b.level - s0).abs() <= GRID_TOL {
                rep.fatal(
                    "BARRIER_AT_SPOT",
                    ml,
                    loc,
                    "barrier level equal to spot is not a quote",
                );
            } else if !(b.level > s0) {
                rep.fatal(
                    "BARRIER_LEVEL",
                    ml,
                    loc,
                    format!("barrier level {} must exceed spot {s0}", b.level),
                );
            }
        }
        for w in mat.barriers.windows(2) {
            if w[1].price > w[0].price + PRICE_TOL {
                rep.fatal(
                    "BARRIER_MONOTONE",
                    ml,
                    Some(w[1].level),
                    format!(
                        "barrier prices must not increase with level: b({})={} < b({})={}",
                        w[0].level, w[0].price, w[1].level, w[1].price
                    ),
                );
            }
        }

        if l > 0 {
            let prev = &q.maturities[l - 1];
            for c in &mat.calls {
                if let Some(p0) = prev
                    .calls
                    .iter()
                    .find(|p| (p.strike - c.strike).abs() <= GRID_TOL)
                {
                    if c.price < p0.price - PRICE_TOL {
                        rep.fatal(
                            "CALL_CALENDAR",
                            ml,
                            Some(c.strike),
                            format!("call price decreasing in maturity at strike {}", c.strike),
                        );
                    }
                }
            }
            for b in &mat.barriers {
                if let Some(p0) = prev
                    .barriers
                    .iter()
                    .find(|p| (p.level - b.level).abs() <= GRID_TOL)
                {
                    if b.price < p0.price - PRICE_TOL {
                        rep.fatal(
                            "BARRIER_CALENDAR",
                            ml,
                            Some(b.level),
                            format!("barrier price decreasing in maturity at level {}", b.level),
                        );
                    }
                }
            }
        }
    }
    rep
}

/// Strictly increasing grid `0 = x_0 < … < x_G = N`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Grid {
    points: Vec<f64>,
}

impl Grid {
    /// Sorts and merges `points` (within [`GRID_TOL`]).
    pub fn from_points(points: impl IntoIterator<Item = f64>) -> Self {
        Self {
            points: merge_sorted(points.into_iter()),
        }
    }

    pub fn points(&self) -> &[f64] {
        &self.points
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Index of the last node, `G`.
    pub fn last(&self) -> usize {
        self.points.len() - 1
    }

    pub fn x(&self, i: usize) -> f64 {
        self.points[i]
    }

    pub fn upper(&self) -> f64 {
        self.points[self.last()]
    }

    /// Width of cell `[x_i, x_{i+1}]`.
    pub fn width(&self, i: usize) -> f64 {
        self.points[i + 1] - self.points[i]
    }

    /// Index of the node equal to `x` within [`GRID_TOL`].
    pub fn index_of(&self, x: f64) -> Option<usize> {
        let i = self.points.partition_point(|&p| p < x - GRID_TOL);
        (i < self.points.len() && (self.points[i] - x).abs() <= GRID_TOL).then_some(i)
    }

    /// Index `i` of the cell `[x_i, x_{i+1})` containing `x`, for `0 ≤ x < N`.
    pub fn cell_of(&self, x: f64) -> Option<usize> {
        if !(x >= self.points[0] && x < self.upper()) {
            return None;
        }
        Some(self.points.partition_point(|&p| p <= x) - 1)
    }

    /// Returns `true` if every node of `self` is a node of `finer`.
    pub fn is_refined_by(&self, finer: &Grid) -> bool {
        self.points.iter().all(|&x| finer.index_of(x).is_some())
    }
}

/// Grid through `0`, spot, all strikes and levels, and `N`, with every cell
/// split into `refine + 1` equal parts.
pub fn build_grid(q: &MarketQuotes, refine: usize) -> Grid {
    build_grid_with(q, refine, &[])
}

/// As [`build_grid`], with additional mandatory nodes (inserted barrier
/// levels or payoff kinks).
pub fn build_grid_with(q: &MarketQuotes, refine: usize, extra: &[f64]) -> Grid {
    let base = Grid::from_points(
        [0.0, q.spot, q.upper_bound]
            .into_iter()
            .chain(q.strikes())
            .chain(q.levels())
            .chain(extra.iter().copied()),
    );
    if refine == 0 {
        return base;
    }
    let parts = refine + 1;
    let mut pts = Vec::with_capacity(base.last() * parts + 1);
    for i in 0..base.last() {
        let (a, b) = (base.x(i), base.x(i + 1));
        pts.push(a);
        for k in 1..parts {
            pts.push(a + (b - a) * k as f64 / parts as f64);
        }
    }
    pts.push(base.upper());
    Grid { points: pts }
}
