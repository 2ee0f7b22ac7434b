//! Nodal re-verification of decompositions, independent of the program that
//! produced them.

use crate::convex_fn::PLConvex;
use crate::market_data::ValidationReport;

use super::Decomposition;

fn hinge(level: f64, x: f64) -> f64 {
    (level - x).max(0.0)
}

fn slopes(f: &PLConvex) -> Vec<f64> {
    (0..f.grid.last())
        .map(|i| (f.values[i + 1] - f.values[i]) / f.grid.width(i))
        .collect()
}

fn slope_tol(f: &PLConvex, tol: f64) -> f64 {
    let hmin = (0..f.grid.last())
        .map(|i| f.grid.width(i))
        .fold(f64::INFINITY, f64::min);
    tol * (1.0 / hmin).max(1.0)
}

/// Checks every block family of `d` against the nodal forms of the block
/// conditions (a)–(e), the call-curve conditions and the quotes.
///
/// Rule ids: `COND_A` … `COND_E`, `CALL_CURVE`, `CALL_ORDER`, `QUOTE_CALL`,
/// `QUOTE_DIGITAL`. `tol` applies to values; slopes use `tol / min cell`.
pub fn check_conditions(d: &Decomposition, tol: f64) -> ValidationReport {
    let mut rep = ValidationReport::default();
    let g = &d.grid;
    let gl = g.last();
    let m = d.num_levels();
    let s0 = d.spot;
    for l in 0..d.num_maturities() {
        let mat = Some(l + 1);
        let u = &d.u[l];
        let stol = slope_tol(u, tol);
        let us = slopes(u);
        if (u.values[0] - s0).abs() > tol || u.values[gl].abs() > tol || (us[0] + 1.0).abs() > stol
        {
            rep.fatal(
                "CALL_CURVE",
                mat,
                None,
                "call curve must start at the spot with slope −1 and vanish at N",
            );
        }
        if us.windows(2).any(|w| w[1] < w[0] - stol) || u.values.iter().any(|&v| v < -tol) {
            rep.fatal(
                "CALL_CURVE",
                mat,
                None,
                "call curve is not a non-negative convex function",
            );
        }
        if l > 0 && (0..=gl).any(|i| d.u[l - 1].values[i] > u.values[i] + tol) {
            rep.fatal(
                "CALL_ORDER",
                mat,
                None,
                "call curve decreases across maturities",
            );
        }
        if let Some(mq) = d.quotes.maturities.get(l) {
            for c in &mq.calls {
                match u.eval(c.strike) {
                    Ok(v) if (v - c.price).abs() <= tol => {}
                    _ => rep.fatal(
                        "QUOTE_CALL",
                        mat,
                        Some(c.strike),
                        "call curve misses the quote",
                    ),
                }
            }
            for bq in &mq.barriers {
                let hit = (1..=m).find(|&j| (d.level(j) - bq.level).abs() <= 1e-12);
                match hit {
                    Some(j) if (d.b(l, j) - bq.price).abs() <= tol => {}
                    _ => rep.fatal(
                        "QUOTE_DIGITAL",
                        mat,
                        Some(bq.level),
                        "one-touch price misses the quote",
                    ),
                }
            }
        }
        let mass_at_n = us[gl - 1].abs();
        if (d.b(l, m + 1) - mass_at_n).abs() > stol || (d.b(l, 0) - 1.0).abs() > tol {
            rep.fatal(
                "COND_C",
                mat,
                Some(g.upper()),
                "implied barrier prices at B_0 or N are inconsistent",
            );
        }

        for j in 1..=m + 1 {
            let f = &d.blocks[l][j - 1];
            let (lo, hi) = (d.level(j - 1), d.level(j));
            let (bprev, bj) = (d.b(l, j - 1), d.b(l, j));
            let s = slopes(f);
            let at = Some(hi);
            // (a)
            if f.values.iter().any(|&v| v < -tol || v > s0 + tol)
                || s.windows(2).any(|w| w[1] < w[0] - stol)
            {
                rep.fatal(
                    "COND_A",
                    mat,
                    at,
                    format!("block {j} is not convex with values in [0, S0]"),
                );
            }
            // (b)
            if (f.values[0] - bprev * lo).abs() > tol || (s[0] + bprev).abs() > stol {
                rep.fatal(
                    "COND_B",
                    mat,
                    at,
                    format!("block {j} has wrong value or slope at zero"),
                );
            }
            // (c)
            let ib = g.index_of(hi);
            match ib {
                Some(ib) if ib > 0 => {
                    if (ib..=gl).any(|i| f.values[i].abs() > tol) || (s[ib - 1] + bj).abs() > stol {
                        rep.fatal(
                            "COND_C",
                            mat,
                            at,
                            format!("block {j} does not end at B_{j} with slope −b"),
                        );
                    }
                }
                _ => rep.fatal("COND_C", mat, at, format!("level B_{j} is not a grid node")),
            }
            // (d)
            let (prev, bprev_old) = if l == 0 {
                (None, 0.0)
            } else {
                (Some(&d.blocks[l - 1][j - 1]), d.b(l - 1, j - 1))
            };
            for i in 0..=gl {
                let x = g.x(i);
                let lhs = prev.map_or(0.0, |p| p.values[i]) + (bprev - bprev_old) * hinge(lo, x);
                if lhs > f.values[i] + tol {
                    rep.fatal(
                        "COND_D",
                        mat,
                        Some(x),
                        format!("block {j} below its predecessor in maturity"),
                    );
                    break;
                }
            }
        }
        // (e)
        for i in 0..=gl {
            let x = g.x(i);
            let mut sum = d.blocks[l][m].values[i];
            for j in 1..=m {
                sum += d.blocks[l][j - 1].values[i] - d.b(l, j) * hinge(d.level(j), x);
            }
            if (sum - u.values[i]).abs() > tol {
                rep.fatal(
                    "COND_E",
                    mat,
                    Some(x),
                    "blocks do not recombine into the call curve",
                );
                break;
            }
        }
    }
    rep
}

/// Checks a single-maturity family `𝔠^{B_1}, …, 𝔠^{B_{m+1}}` (the last one
/// being the call curve) against conditions (1)–(5) and the call-curve
/// requirements. `b` holds `b(B_1), …, b(B_m)`.
///
/// Rule ids: `COND_1` … `COND_5`, `CALL_CURVE`, `SHAPE`.
pub fn check_single_maturity(
    frak: &[PLConvex],
    b: &[f64],
    levels: &[f64],
    spot: f64,
    tol: f64,
) -> ValidationReport {
    let mut rep = ValidationReport::default();
    if frak.is_empty() || frak.len() != b.len() + 1 || levels.len() != b.len() {
        rep.fatal(
            "SHAPE",
            None,
            None,
            "need m+1 functions, m barrier prices and m levels",
        );
        return rep;
    }
    let m = b.len();
    let g = &frak[0].grid;
    let gl = g.last();
    let stol = slope_tol(&frak[0], tol);
    let convex = |f: &PLConvex| slopes(f).windows(2).all(|w| w[1] >= w[0] - stol);

    let u = &frak[m];
    let us = slopes(u);
    if !convex(u) || u.values.iter().any(|&v| v < -tol) || u.values[gl].abs() > tol {
        rep.fatal(
            "CALL_CURVE",
            Some(1),
            None,
            "call curve is not a non-negative convex function vanishing at N",
        );
    }
    if (us[0] + 1.0).abs() > stol || (u.values[0] - spot).abs() > tol {
        rep.fatal(
            "CALL_CURVE",
            Some(1),
            None,
            "call curve must start at the spot with slope −1",
        );
    }
    for j in 0..m {
        let f = &frak[j];
        let at = Some(levels[j]);
        if !convex(f) || f.values.iter().any(|&v| v < -tol || v > spot + tol) {
            rep.fatal(
                "COND_1",
                Some(1),
                at,
                format!("function {} is not convex into [0, S0]", j + 1),
            );
        }
        let lower = if j == 0 { None } else { Some(&frak[j - 1]) };
        let bad_order = (0..=gl).any(|i| {
            let lo = lower.map_or(0.0, |p| p.values[i]);
            lo > f.values[i] + tol || f.values[i] > frak[j + 1].values[i] + tol
        });
        if bad_order {
            rep.fatal(
                "COND_2",
                Some(1),
                at,
                format!("function {} breaks the ordering", j + 1),
            );
        }
        let s = slopes(f);
        let ib = g.index_of(levels[j]);
        let vanishes = ib.is_some_and(|ib| (ib..=gl).all(|i| f.values[i].abs() <= tol));
        if (s[0] + 1.0).abs() > stol || (f.values[0] - spot).abs() > tol || !vanishes {
            rep.fatal(
                "COND_3",
                Some(1),
                at,
                format!("function {} has wrong boundary behaviour", j + 1),
            );
        }
        if let Some(ib) = ib.filter(|&ib| ib > 0) {
            if (s[ib - 1] + b[j]).abs() > stol {
                rep.fatal(
                    "COND_4",
                    Some(1),
                    at,
                    format!("left slope at B_{} is not −b", j + 1),
                );
            }
        }
        let diff = frak[j + 1]
            .add_scaled(-1.0, f)
            .add_scaled(b[j], &PLConvex::put_payoff(g, levels[j]));
        if !convex(&diff) {
            rep.fatal(
                "COND_5",
                Some(1),
                at,
                format!("increment after B_{} is not convex", j + 1),
            );
        }
    }
    rep
}
