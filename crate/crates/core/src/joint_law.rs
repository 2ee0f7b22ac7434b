//! Joint law of terminal price and running maximum read off a decomposition.
//!
//! Band `j ∈ 1..=m+1` is the event `M ∈ [B_{j−1}, B_j)` (the last band
//! `[B_m, N]` is closed). Its sub-measure has the call transform
//! `g_{l,j}(x) = c_l^{B_j}(x) − b_l(B_j)(B_j − x)⁺` (just `c_l^{B_{m+1}}` for
//! the last band), so atoms are second differences of `g_{l,j}`.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::convex_fn::{DiscreteMeasure, PLConvex};
use crate::decomposition::{assemble_frak_c, Decomposition};
use crate::error::Error;
use crate::market_data::{Grid, GRID_TOL};
use crate::numfmt::g12;

/// Tolerance on the Rogers inequalities.
pub const ROGERS_TOL: f64 = 1e-8;
/// Atoms more negative than this reject a decomposition.
pub const ATOM_TOL: f64 = 1e-7;

/// `P(S_{T_l} > x, M_{T_l} < B_j)` for `0 ≤ x < B_j`, `j = 1..=m+1`.
pub fn joint_tail_below(d: &Decomposition, l: usize, j: usize, x: f64) -> Result<f64, Error> {
    d.check_index(l, j)?;
    let bj = d.level(j);
    if !(x >= 0.0 && x < bj - GRID_TOL) {
        return Err(Error::OutOfDomain(x, bj));
    }
    let f = assemble_frak_c(d, l, j)?;
    Ok(-f.right_derivative(x)? - d.b(l, j))
}

/// `P(S_{T_l} > x)`, zero at and beyond `N`.
pub fn terminal_tail(d: &Decomposition, l: usize, x: f64) -> Result<f64, Error> {
    if l >= d.num_maturities() {
        return Err(Error::Index {
            what: "maturity",
            index: l,
            len: d.num_maturities(),
        });
    }
    let n = d.grid.upper();
    if x < 0.0 || x > n + GRID_TOL {
        return Err(Error::OutOfDomain(x, n));
    }
    if x >= n - GRID_TOL {
        return Ok(0.0);
    }
    Ok(-d.u[l].right_derivative(x)?)
}

/// `P(S_{T_l} > x, M_{T_l} ≥ B_j)` at a level index `j = 0..=m`.
fn tail_above_at(d: &Decomposition, l: usize, j: usize, x: f64) -> Result<f64, Error> {
    let total = terminal_tail(d, l, x)?;
    if j == 0 || x >= d.level(j) - GRID_TOL {
        return Ok(total);
    }
    Ok(total - joint_tail_below(d, l, j, x)?)
}

/// `F̄(x, B) = P(S_{T_l} > x, M_{T_l} ≥ B)` for `S0 ≤ B ≤ B_m`, linearly
/// blended in `B` between neighbouring levels.
pub fn joint_tail_above(d: &Decomposition, l: usize, x: f64, level: f64) -> Result<f64, Error> {
    let m = d.num_levels();
    let top = d.level(m);
    if !(level >= d.spot - GRID_TOL && level <= top + GRID_TOL) {
        return Err(Error::Argument(format!(
            "level {level} outside the interpolation range [{}, {top}]",
            d.spot
        )));
    }
    match blend_position(d, level) {
        (j, None) => tail_above_at(d, l, j, x),
        (j, Some(a)) => {
            Ok(a * tail_above_at(d, l, j - 1, x)? + (1.0 - a) * tail_above_at(d, l, j, x)?)
        }
    }
}

/// Locates `level` among `B_0 < … < B_{m+1}`: `(j, None)` when it equals
/// `B_j`, otherwise `(j, Some(a))` with `level = a·B_{j−1} + (1−a)·B_j`.
fn blend_position(d: &Decomposition, level: f64) -> (usize, Option<f64>) {
    let m = d.num_levels();
    for j in 0..=m + 1 {
        if (d.level(j) - level).abs() <= GRID_TOL {
            return (j, None);
        }
        if j > 0 && level < d.level(j) {
            let (lo, hi) = (d.level(j - 1), d.level(j));
            return (j, Some((hi - level) / (hi - lo)));
        }
    }
    (m + 1, None)
}

/// Band sub-measures of one maturity.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JointPmf {
    pub grid: Grid,
    pub spot: f64,
    /// `B_1 < … < B_m`.
    pub levels: Vec<f64>,
    /// 0-based maturity index.
    pub maturity: usize,
    /// `mass[j−1][i] = P(S = x_i, M ∈ band j)`.
    pub mass: Vec<Vec<f64>>,
}

impl JointPmf {
    pub fn num_bands(&self) -> usize {
        self.mass.len()
    }

    /// `B_k` for `k = 0..=m+1`.
    pub fn level(&self, k: usize) -> f64 {
        if k == 0 {
            self.spot
        } else if k <= self.levels.len() {
            self.levels[k - 1]
        } else {
            self.grid.upper()
        }
    }

    /// Band edges `(B_{j−1}, B_j)` for `j = 1..=m+1`.
    pub fn band_edges(&self, j: usize) -> (f64, f64) {
        (self.level(j - 1), self.level(j))
    }

    pub fn band_total(&self, j: usize) -> f64 {
        self.mass[j - 1].iter().sum()
    }

    pub fn band_mean(&self, j: usize) -> f64 {
        self.mass[j - 1]
            .iter()
            .zip(self.grid.points())
            .map(|(w, x)| w * x)
            .sum()
    }

    pub fn total_mass(&self) -> f64 {
        (1..=self.num_bands()).map(|j| self.band_total(j)).sum()
    }

    /// Law of `S_{T_l}`: band masses summed per node.
    pub fn marginal(&self) -> DiscreteMeasure {
        let atoms = (0..self.grid.len())
            .filter_map(|i| {
                let w: f64 = self.mass.iter().map(|band| band[i]).sum();
                (w.abs() > 1e-12).then(|| (self.grid.x(i), w))
            })
            .collect();
        DiscreteMeasure::new(atoms)
    }

    /// `P(M ≥ B_j)` as the total of bands above `j`, for `j = 0..=m+1`.
    pub fn prob_at_or_above(&self, j: usize) -> f64 {
        (j + 1..=self.num_bands())
            .map(|k| self.band_total(k))
            .sum::<f64>()
            + if j == self.num_bands() {
                self.mass[j - 1][self.grid.last()]
            } else {
                0.0
            }
    }

    /// `E[S · 1{M ≥ B_j}]` for `j = 0..=m+1`.
    pub fn mean_at_or_above(&self, j: usize) -> f64 {
        (j + 1..=self.num_bands())
            .map(|k| self.band_mean(k))
            .sum::<f64>()
            + if j == self.num_bands() {
                self.mass[j - 1][self.grid.last()] * self.grid.upper()
            } else {
                0.0
            }
    }
}

/// Band sub-measures of maturity `l`.
///
/// Fails with [`Error::Consistency`] when an atom is more negative than
/// [`ATOM_TOL`].
pub fn band_pmf(d: &Decomposition, l: usize) -> Result<JointPmf, Error> {
    d.check_index(l, 1)?;
    let g = &d.grid;
    let gl = g.last();
    let m = d.num_levels();
    let mut mass = Vec::with_capacity(m + 1);
    for j in 1..=m + 1 {
        let mut f = d.blocks[l][j - 1].clone();
        if j <= m {
            f = f.add_scaled(-d.b(l, j), &PLConvex::put_payoff(g, d.level(j)));
        }
        let mut band = vec![0.0; g.len()];
        for (i, w) in band.iter_mut().enumerate().skip(1) {
            let right = if i < gl {
                f.right_slope(i).unwrap_or(0.0)
            } else {
                0.0
            };
            let left = f.left_slope(i).unwrap_or(0.0);
            *w = right - left;
            if *w < -ATOM_TOL {
                return Err(Error::Consistency(format!(
                    "negative mass {} in band {j} at {} (maturity {})",
                    *w,
                    g.x(i),
                    l + 1
                )));
            }
        }
        mass.push(band);
    }
    Ok(JointPmf {
        grid: g.clone(),
        spot: d.spot,
        levels: d.levels.clone(),
        maturity: l,
        mass,
    })
}

/// Band sub-measures of every maturity.
pub fn joint_pmfs(d: &Decomposition) -> Result<Vec<JointPmf>, Error> {
    (0..d.num_maturities()).map(|l| band_pmf(d, l)).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RogersPoint {
    pub level: f64,
    /// `false` at `S0` and quoted levels, `true` at blended levels.
    pub interpolated: bool,
    /// `P(M ≥ level)`.
    pub probability: f64,
    /// `d(level) = E[S | M ≥ level]`.
    pub conditional_mean: f64,
    /// `d(level) ≥ level`.
    pub rogers1: bool,
    /// `d` non-decreasing up to this level.
    pub rogers2: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RogersReport {
    pub maturity: usize,
    pub points: Vec<RogersPoint>,
    /// Levels with `P(M ≥ level) = 0`, where `d` is undefined.
    pub skipped: Vec<f64>,
}

impl RogersReport {
    pub fn passed(&self) -> bool {
        self.points.iter().all(|p| p.rogers1 && p.rogers2)
    }
}

/// Evaluates `d(m) ≥ m` and monotonicity of `d` at `S0`, the levels of the
/// pmf, and `extra_levels` in `(S0, N]`; between levels the tail is the
/// linear blend in the level.
pub fn rogers_check(p: &JointPmf, extra_levels: &[f64]) -> Result<RogersReport, Error> {
    let n = p.grid.upper();
    let m = p.levels.len();
    let edge = |k: usize| p.level(k);
    let mut pts: Vec<(f64, bool, f64, f64)> = (0..=m)
        .map(|j| (edge(j), false, p.prob_at_or_above(j), p.mean_at_or_above(j)))
        .collect();
    for &lv in extra_levels {
        if !(lv > p.spot + GRID_TOL && lv <= n + GRID_TOL) {
            return Err(Error::Argument(format!("level {lv} outside (S0, N]")));
        }
        if pts.iter().any(|q| (q.0 - lv).abs() <= GRID_TOL) {
            continue;
        }
        let j = (1..=m + 1)
            .find(|&k| lv <= edge(k) + GRID_TOL)
            .unwrap_or(m + 1);
        let (lo, hi) = (edge(j - 1), edge(j));
        if (hi - lv).abs() <= GRID_TOL {
            pts.push((lv, false, p.prob_at_or_above(j), p.mean_at_or_above(j)));
            continue;
        }
        let a = (hi - lv) / (hi - lo);
        let prob = a * p.prob_at_or_above(j - 1) + (1.0 - a) * p.prob_at_or_above(j);
        let mean = a * p.mean_at_or_above(j - 1) + (1.0 - a) * p.mean_at_or_above(j);
        pts.push((lv, true, prob, mean));
    }
    pts.sort_by(|a, b| a.0.total_cmp(&b.0));

    let mut report = RogersReport {
        maturity: p.maturity,
        points: Vec::new(),
        skipped: Vec::new(),
    };
    let mut last: Option<(f64, f64)> = None; // (E, P) of the previous point
    for (level, interpolated, prob, mean) in pts {
        if prob <= ROGERS_TOL {
            report.skipped.push(level);
            continue;
        }
        let rogers1 = mean - level * prob >= -ROGERS_TOL;
        // d non-decreasing: E/P ≥ E'/P' ⇔ E·P' ≥ E'·P.
        let rogers2 = match last {
            Some((e0, p0)) => mean * p0 - e0 * prob >= -ROGERS_TOL,
            None => true,
        };
        report.points.push(RogersPoint {
            level,
            interpolated,
            probability: prob,
            conditional_mean: mean / prob,
            rogers1,
            rogers2,
        });
        last = Some((mean, prob));
    }
    Ok(report)
}

/// `σ²(x_i, band j) = 2λ·[Σ_y (x_i − y)⁺ p(y, j)]·h_i / p(x_i, j)` with `h_i`
/// the midpoint cell width of node `i`; `None` where the band has no mass.
/// Indexed `[j−1][i]`.
pub fn state_vol(p: &JointPmf, lambda: f64) -> Result<Vec<Vec<Option<f64>>>, Error> {
    if !(lambda > 0.0 && lambda.is_finite()) {
        return Err(Error::Argument(format!(
            "lambda must be positive, got {lambda}"
        )));
    }
    let g = &p.grid;
    let gl = g.last();
    let width = |i: usize| {
        let left = if i > 0 { g.width(i - 1) } else { 0.0 };
        let right = if i < gl { g.width(i) } else { 0.0 };
        0.5 * (left + right)
    };
    Ok(p.mass
        .iter()
        .map(|band| {
            (0..=gl)
                .map(|i| {
                    let w = band[i];
                    if w <= 1e-12 {
                        return None;
                    }
                    let x = g.x(i);
                    let put: f64 = (0..i).map(|k| (x - g.x(k)) * band[k]).sum();
                    Some((2.0 * lambda * put * width(i) / w).max(0.0))
                })
                .collect()
        })
        .collect())
}

/// Atoms smaller than this are omitted from exported tables; decompositions
/// read back from 12-digit files carry round-off atoms of about `1e-11`.
pub const EXPORT_ATOM_TOL: f64 = 1e-9;

/// CSV `maturity,x,band_lo,band_hi,mass` (1-based maturity) of every atom
/// larger than [`EXPORT_ATOM_TOL`] in magnitude.
pub fn pmf_csv(pmfs: &[JointPmf]) -> String {
    let mut out = String::from("maturity,x,band_lo,band_hi,mass\n");
    for p in pmfs {
        for j in 1..=p.num_bands() {
            let (lo, hi) = p.band_edges(j);
            for (i, &w) in p.mass[j - 1].iter().enumerate() {
                if w.abs() > EXPORT_ATOM_TOL {
                    let _ = writeln!(
                        out,
                        "{},{},{},{},{}",
                        p.maturity + 1,
                        g12(p.grid.x(i)),
                        g12(lo),
                        g12(hi),
                        g12(w)
                    );
                }
            }
        }
    }
    out
}

/// CSV `maturity,x,level,tail_prob` of `F̄(x, B_j)` at every grid node below
/// `N` and every level `S0 = B_0, …, B_m`.
pub fn tails_csv(d: &Decomposition) -> Result<String, Error> {
    let mut out = String::from("maturity,x,level,tail_prob\n");
    let gl = d.grid.last();
    for l in 0..d.num_maturities() {
        for j in 0..=d.num_levels() {
            for i in 0..gl {
                let x = d.grid.x(i);
                let t = tail_above_at(d, l, j, x)?;
                let _ = writeln!(out, "{},{},{},{}", l + 1, g12(x), g12(d.level(j)), g12(t));
            }
        }
    }
    Ok(out)
}
