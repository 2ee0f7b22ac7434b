//! Acceptance suite. Prints one `PASS`/`FAIL` line per criterion and exits
//! non-zero if any criterion fails.

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::process::Command;
use std::sync::OnceLock;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use robustbar::lp::{enumerate_vertices, solve, verify_certificate};
use robustbar::synthetic::{random_instance, CorpusSpec, Instance};
use robustbar::{
    assemble_frak_c, band_pmf, build_grid, calibrate, check_conditions, check_single_maturity,
    joint_tail_above, multi_to_single, robust_barrier_bounds, rogers_check, single_to_multi,
    up_and_out_put, verify_arbitrage, BarrierQuote, Calibration, CalibrationConfig, CallQuote,
    Decomposition, Instrument, LpBuilder, LpProblem, LpSolution, LpTolerances, MarketQuotes,
    MaturityQuotes, PLConvex, Side,
};

const CORPUS_SIZE: usize = 200;
const CORPUS_SEED: u64 = 20_240_611;
const MAX_NODES: usize = 40;

struct Outcome {
    pass: bool,
    detail: String,
}

impl Outcome {
    fn new(pass: bool, detail: impl Into<String>) -> Self {
        Self {
            pass,
            detail: detail.into(),
        }
    }
}

type Criterion = (&'static str, fn() -> Outcome);

fn main() {
    let criteria: [Criterion; 9] = [
        (
            "Model A feasibility and forced touch probability",
            criterion_1,
        ),
        ("Model A unquoted-barrier bounds", criterion_2),
        ("up-and-out put boundary identity", criterion_3),
        ("joint-law consistency", criterion_4),
        ("single/multi condition equivalence", criterion_5),
        ("LP kernel against vertex enumeration", criterion_6),
        ("round-trip calibration", criterion_7),
        ("refinement monotonicity", criterion_8),
        ("CLI determinism", criterion_9),
    ];
    let mut failed = 0;
    for (i, (name, f)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let outcome = catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|e| {
            let msg = e
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default();
            Outcome::new(false, format!("panicked: {msg}"))
        });
        let secs = start.elapsed().as_secs_f64();
        let tag = if outcome.pass { "PASS" } else { "FAIL" };
        println!(
            "criterion {}: {tag} — {name} ({}) [{secs:.2}s]",
            i + 1,
            outcome.detail
        );
        if !outcome.pass {
            failed += 1;
        }
    }
    if failed > 0 {
        println!("{failed} of {} criteria failed", criteria.len());
        std::process::exit(1);
    }
    println!("all {} criteria passed", criteria.len());
}

// ---------------------------------------------------------------------------
// Fixtures and helpers

fn model_a(barrier: Option<f64>) -> MarketQuotes {
    let barriers = barrier
        .map(|p| {
            vec![BarrierQuote {
                level: 1.5,
                price: p,
            }]
        })
        .unwrap_or_default();
    MarketQuotes::new(
        1.0,
        Some(1.5),
        vec![MaturityQuotes {
            t: 1.0,
            calls: vec![
                CallQuote {
                    strike: 0.5,
                    price: 0.5,
                },
                CallQuote {
                    strike: 1.0,
                    price: 0.25,
                },
            ],
            barriers,
        }],
    )
    .unwrap()
}

fn cfg(refine: usize) -> CalibrationConfig {
    CalibrationConfig {
        refine,
        ..Default::default()
    }
}

fn bounds(q: &MarketQuotes, l: usize, level: f64, refine: usize) -> (f64, f64) {
    let lo = robust_barrier_bounds(q, l, level, Side::Min, &cfg(refine))
        .unwrap()
        .value;
    let hi = robust_barrier_bounds(q, l, level, Side::Max, &cfg(refine))
        .unwrap()
        .value;
    (lo, hi)
}

/// Extremal `P(M ≥ level)` over joint laws `p(x_i, y_k)` of terminal price
/// and running maximum on `grid`, written directly in probabilities:
/// `S ≤ M`, unit mass, the quoted call and one-touch prices, and the
/// optional-stopping identities `E[S; M ≥ y] = y·P(M ≥ y)` at every node
/// `y ≥ S0`.
fn oracle_touch(q: &MarketQuotes, grid: &[f64], level: f64, side: Side) -> f64 {
    let s0 = q.spot;
    let maxima: Vec<f64> = grid.iter().copied().filter(|&y| y >= s0 - 1e-12).collect();
    let mut lp = LpBuilder::new();
    let mut cells = Vec::new();
    for &x in grid {
        for &y in &maxima {
            if x <= y + 1e-12 {
                cells.push((x, y, lp.add_var(0.0, f64::INFINITY, format!("p({x},{y})"))));
            }
        }
    }
    lp.add_eq(cells.iter().map(|c| (c.2, 1.0)).collect(), 1.0, "mass");
    lp.add_eq(cells.iter().map(|c| (c.2, c.0)).collect(), s0, "mean");
    for (l, mq) in q.maturities.iter().enumerate() {
        assert_eq!(l, 0, "oracle handles one maturity");
        for c in &mq.calls {
            lp.add_eq(
                cells
                    .iter()
                    .map(|v| (v.2, (v.0 - c.strike).max(0.0)))
                    .collect(),
                c.price,
                "call",
            );
        }
        for b in &mq.barriers {
            lp.add_eq(
                cells
                    .iter()
                    .filter(|v| v.1 >= b.level - 1e-12)
                    .map(|v| (v.2, 1.0))
                    .collect(),
                b.price,
                "touch",
            );
        }
    }
    for &y in maxima.iter().filter(|&&y| y > s0 + 1e-12) {
        let coefs = cells
            .iter()
            .filter(|v| v.1 >= y - 1e-12)
            .map(|v| (v.2, v.0 - y))
            .collect();
        lp.add_eq(coefs, 0.0, "stopping");
    }
    let sign = if side == Side::Max { -1.0 } else { 1.0 };
    for v in cells.iter().filter(|v| v.1 >= level - 1e-12) {
        lp.set_cost(v.2, sign);
    }
    match solve(&lp.finish(), LpTolerances::default()).unwrap() {
        LpSolution::Optimal { objective, .. } => sign * objective,
        other => panic!("oracle program not optimal: {other:?}"),
    }
}

fn close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol
}

/// Refinement keeping the calibration grid within `MAX_NODES` nodes.
fn corpus_refine(q: &MarketQuotes) -> usize {
    (0..=2)
        .rev()
        .find(|&r| build_grid(q, r).len() <= MAX_NODES)
        .unwrap_or(0)
}

struct Calibrated {
    inst: Instance,
    model: Option<Decomposition>,
}

/// The randomized corpus, calibrated once and shared by criteria 3–5 and 8.
fn corpus() -> &'static [Calibrated] {
    static CORPUS: OnceLock<Vec<Calibrated>> = OnceLock::new();
    CORPUS.get_or_init(|| {
        let mut rng = ChaCha8Rng::seed_from_u64(CORPUS_SEED);
        (0..CORPUS_SIZE)
            .map(|_| {
                let inst = random_instance(&mut rng, &CorpusSpec::default());
                let refine = corpus_refine(&inst.quotes);
                let model = match calibrate(&inst.quotes, &cfg(refine)) {
                    Ok(Calibration::Model(d)) => Some(*d),
                    _ => None,
                };
                Calibrated { inst, model }
            })
            .collect()
    })
}

fn frak_family(d: &Decomposition, l: usize) -> Vec<PLConvex> {
    (1..=d.num_levels() + 1)
        .map(|j| assemble_frak_c(d, l, j).unwrap())
        .collect()
}

/// Levels strictly inside each band, five per band.
fn interpolated_levels(d: &Decomposition) -> Vec<f64> {
    let mut out = Vec::new();
    for j in 1..=d.num_levels() + 1 {
        let (lo, hi) = (d.level(j - 1), d.level(j));
        out.extend((1..=5).map(|k| lo + (hi - lo) * k as f64 / 6.0));
    }
    out
}

/// `d` restricted to its first maturity.
fn first_maturity(d: &Decomposition) -> Decomposition {
    let mut d1 = d.clone();
    d1.u.truncate(1);
    d1.blocks.truncate(1);
    d1.barrier.truncate(1);
    d1.quotes.maturities.truncate(1);
    d1
}

// ---------------------------------------------------------------------------
// Criteria

fn criterion_1() -> Outcome {
    let mut notes = Vec::new();
    let mut pass = true;
    let calls_only = model_a(None);
    for refine in [0, 2] {
        let (lo, hi) = bounds(&calls_only, 0, 1.5, refine);
        let ok = close(lo, 0.5, 1e-6) && close(hi, 0.5, 1e-6);
        pass &= ok;
        notes.push(format!("refine {refine}: [{lo:.9}, {hi:.9}]"));
    }
    let grid = [0.0, 0.5, 1.0, 1.5];
    let (olo, ohi) = (
        oracle_touch(&calls_only, &grid, 1.5, Side::Min),
        oracle_touch(&calls_only, &grid, 1.5, Side::Max),
    );
    pass &= close(olo, 0.5, 1e-6) && close(ohi, 0.5, 1e-6);
    notes.push(format!("oracle [{olo:.9}, {ohi:.9}]"));

    let feasible = matches!(
        calibrate(&model_a(Some(0.5)), &cfg(2)),
        Ok(Calibration::Model(_))
    );
    pass &= feasible;
    notes.push(format!("b=0.5 feasible: {feasible}"));

    match calibrate(&model_a(Some(0.6)), &cfg(2)) {
        Ok(Calibration::Arbitrage(cert)) => {
            let v = verify_arbitrage(&model_a(Some(0.6)), &cert, LpTolerances::default()).unwrap();
            let scale = cert
                .lambdas
                .iter()
                .filter(|l| l.instrument == Instrument::Digital)
                .map(|l| l.weight.abs())
                .fold(0.0, f64::max);
            let ok = v.confirmed && cert.gap >= 0.1 * scale - 1e-6;
            pass &= ok;
            notes.push(format!(
                "b=0.6 certificate gap {:.9} at scale {scale}, confirmed {}",
                cert.gap, v.confirmed
            ));
        }
        other => {
            pass = false;
            notes.push(format!("b=0.6 gave {other:?}"));
        }
    }
    Outcome::new(pass, notes.join("; "))
}

fn criterion_2() -> Outcome {
    let q = model_a(None);
    let mut notes = Vec::new();
    let mut pass = true;
    let grid = [0.0, 0.5, 1.0, 1.25, 1.5];
    let (olo, ohi) = (
        oracle_touch(&q, &grid, 1.25, Side::Min),
        oracle_touch(&q, &grid, 1.25, Side::Max),
    );
    notes.push(format!("oracle [{olo:.9}, {ohi:.9}]"));
    for refine in [0, 2] {
        let (lo, hi) = bounds(&q, 0, 1.25, refine);
        let matches_expected = close(lo, 0.5, 1e-6) && close(hi, 2.0 / 3.0, 1e-6);
        let matches_oracle = refine > 0 || (close(lo, olo, 1e-6) && close(hi, ohi, 1e-6));
        pass &= matches_expected && matches_oracle;
        notes.push(format!(
            "refine {refine}: [{lo:.9}, {hi:.9}] vs expected [0.5, 0.666666667]{}",
            if matches_oracle {
                ", agrees with oracle"
            } else {
                ", DISAGREES with oracle"
            }
        ));
    }
    Outcome::new(pass, notes.join("; "))
}

fn criterion_3() -> Outcome {
    let (mut checked, mut bad, mut worst) = (0, 0, 0.0f64);
    let mut infeasible = 0;
    for c in corpus() {
        let Some(d) = &c.model else {
            infeasible += 1;
            continue;
        };
        for l in 0..d.num_maturities() {
            for j in 1..=d.num_levels() {
                let err =
                    (up_and_out_put(d, l, j, d.level(j)).unwrap() - (d.level(j) - d.spot)).abs();
                worst = worst.max(err);
                checked += 1;
                if err > 1e-7 {
                    bad += 1;
                }
            }
        }
    }
    Outcome::new(
        bad == 0 && infeasible == 0,
        format!("{checked} (l, j) pairs over {CORPUS_SIZE} instances, {bad} off, worst {worst:.2e}, {infeasible} infeasible"),
    )
}

fn criterion_4() -> Outcome {
    let mut stats = [0usize; 6]; // calls, digitals, mass, mean, rogers quoted, rogers interpolated
    let mut worst = 0.0f64;
    let mut pairs = 0;
    let mut infeasible = 0;
    let (mut blend_fail, mut blend_gap) = (0, 0.0f64);
    for c in corpus() {
        let Some(d) = &c.model else {
            infeasible += 1;
            continue;
        };
        for (l, mq) in d.quotes.maturities.iter().enumerate() {
            pairs += 1;
            let p = band_pmf(d, l).unwrap();
            let marginal = p.marginal();
            for call in &mq.calls {
                let v = marginal.integrate(|x| (x - call.strike).max(0.0));
                worst = worst.max((v - call.price).abs());
                stats[0] += usize::from((v - call.price).abs() > 1e-7);
            }
            for b in &mq.barriers {
                let j = d
                    .levels
                    .iter()
                    .position(|&x| (x - b.level).abs() < 1e-12)
                    .unwrap()
                    + 1;
                let v = p.prob_at_or_above(j);
                worst = worst.max((v - b.price).abs());
                stats[1] += usize::from((v - b.price).abs() > 1e-7);
            }
            stats[2] += usize::from((p.total_mass() - 1.0).abs() > 1e-9);
            let mean: f64 = (1..=p.num_bands()).map(|j| p.band_mean(j)).sum();
            stats[3] += usize::from((mean - d.spot).abs() > 1e-9);
            let quoted = rogers_check(&p, &[]).unwrap();
            stats[4] += usize::from(!quoted.passed());
            let interp = rogers_check(&p, &interpolated_levels(d)).unwrap();
            stats[5] += usize::from(!interp.passed());
            // A linear blend at weight a between band edges B' < B has
            // E − m·P = a(1−a)(B − B')(P(B) − P(B')), negative whenever the
            // touch probability drops across the band.
            for pt in interp
                .points
                .iter()
                .filter(|pt| pt.interpolated && !pt.rogers1)
            {
                let j = (1..=p.num_bands())
                    .find(|&k| pt.level < p.level(k))
                    .unwrap();
                let (lo, hi) = (p.level(j - 1), p.level(j));
                let a = (hi - pt.level) / (hi - lo);
                let predicted =
                    a * (1.0 - a) * (hi - lo) * (p.prob_at_or_above(j) - p.prob_at_or_above(j - 1));
                let observed = pt.probability * (pt.conditional_mean - pt.level);
                blend_gap = blend_gap.max((observed - predicted).abs());
                blend_fail += 1;
            }
        }
    }
    Outcome::new(
        stats.iter().all(|&s| s == 0) && infeasible == 0,
        format!(
            "{pairs} (instance, maturity) pairs: call misses {}, digital misses {}, mass {}, mean {}, \
             Rogers failures at quoted levels {}, with interpolated levels {} ({blend_fail} blended points \
             below d(m) = m, all matching a(1-a)(B-B')(P(B)-P(B')) to {blend_gap:.1e}); worst price error {worst:.2e}",
            stats[0], stats[1], stats[2], stats[3], stats[4], stats[5]
        ),
    )
}

fn criterion_5() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let (mut roundtrips, mut worst) = (0, 0.0f64);
    let (mut compared, mut disagree, mut both_fail) = (0, 0, 0);
    let tol = 1e-9;
    for c in corpus() {
        let candidates: Vec<&Decomposition> = c
            .model
            .iter()
            .chain(std::iter::once(&c.inst.model))
            .collect();
        for d in candidates {
            let d = first_maturity(d);
            let m = d.num_levels();
            let b: Vec<f64> = (1..=m).map(|j| d.b(0, j)).collect();
            let frak = frak_family(&d, 0);
            let blocks = single_to_multi(&frak, &b, &d.levels).unwrap();
            let back = multi_to_single(&blocks, &b, &d.levels).unwrap();
            for (f, g) in frak.iter().zip(&back) {
                worst = worst.max(f.max_abs_diff(g));
            }
            for (f, g) in blocks.iter().zip(&d.blocks[0]) {
                worst = worst.max(f.max_abs_diff(g));
            }
            roundtrips += 1;

            // The instance itself and random perturbations that keep the
            // blocks summing to the call curve.
            let mut variants = vec![d.clone()];
            for _ in 0..4 {
                let mut e = d.clone();
                if m > 0 {
                    let j = rng.gen_range(1..=m);
                    let ib = e.grid.index_of(e.level(j)).unwrap();
                    let i = rng.gen_range(1..ib);
                    let delta = rng.gen_range(-0.05..0.05) * e.spot;
                    e.blocks[0][j - 1].values[i] += delta;
                    e.blocks[0][m].values[i] -= delta;
                }
                variants.push(e);
            }
            for e in &variants {
                let frak = frak_family(e, 0);
                let multi_ok = !check_conditions(e, tol).has_fatal();
                let single_ok =
                    !check_single_maturity(&frak, &b, &e.levels, e.spot, tol).has_fatal();
                compared += 1;
                disagree += usize::from(multi_ok != single_ok);
                both_fail += usize::from(!multi_ok && !single_ok);
            }
        }
    }
    Outcome::new(
        worst <= 1e-10 && disagree == 0,
        format!(
            "{roundtrips} round trips, worst {worst:.2e}; checkers compared on {compared} families \
             ({both_fail} rejected by both), {disagree} disagreements"
        ),
    )
}

fn random_lp(rng: &mut ChaCha8Rng) -> LpProblem {
    let n = rng.gen_range(1..=8);
    let m = rng.gen_range(1..=5);
    let mut p = LpProblem::new(n);
    for j in 0..n {
        p.lo[j] = if rng.gen_bool(0.2) {
            -f64::from(rng.gen_range(0..3))
        } else {
            0.0
        };
        p.hi[j] = if rng.gen_bool(0.7) {
            f64::from(rng.gen_range(1..6))
        } else {
            f64::INFINITY
        };
        p.c[j] = f64::from(rng.gen_range(-5..=5));
    }
    for r in 0..m {
        let mut coefs = Vec::new();
        for j in 0..n {
            if rng.gen_bool(0.6) {
                coefs.push((j, f64::from(rng.gen_range(-3..=3))));
            }
        }
        p.add_row(&coefs, f64::from(rng.gen_range(-4..=8)), format!("r{r}"));
    }
    p
}

fn criterion_6() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let (mut optimal, mut infeasible, mut unbounded, mut bad) = (0, 0, 0, Vec::new());
    let tol = LpTolerances::default();
    for case in 0..500 {
        let p = random_lp(&mut rng);
        let vertices = enumerate_vertices(&p).unwrap();
        let best = vertices
            .iter()
            .map(|v| v.iter().zip(&p.c).map(|(x, c)| x * c).sum::<f64>())
            .fold(f64::INFINITY, f64::min);
        match solve(&p, tol).unwrap() {
            LpSolution::Optimal { objective, x, .. } => {
                optimal += 1;
                let (eq, bnd) = p.primal_residual(&x);
                if vertices.is_empty()
                    || (objective - best).abs() > 1e-8 * (1.0 + best.abs())
                    || eq > 1e-8
                    || bnd > 1e-8
                {
                    bad.push(format!("#{case}: optimum {objective} vs vertices {best}"));
                }
            }
            LpSolution::Infeasible { farkas, .. } => {
                infeasible += 1;
                if !vertices.is_empty() || !verify_certificate(&p, &farkas) {
                    bad.push(format!(
                        "#{case}: infeasible with {} vertices",
                        vertices.len()
                    ));
                }
            }
            LpSolution::Unbounded { x, ray, .. } => {
                unbounded += 1;
                let dir_ok = (0..p.num_rows()).all(|r| {
                    p.row(r)
                        .iter()
                        .zip(&ray)
                        .map(|(a, d)| a * d)
                        .sum::<f64>()
                        .abs()
                        < 1e-8
                }) && ray.iter().zip(&p.c).map(|(d, c)| d * c).sum::<f64>() < -1e-9
                    && (0..p.num_vars()).all(|j| {
                        (ray[j] >= -1e-12 || p.lo[j] == f64::NEG_INFINITY)
                            && (ray[j] <= 1e-12 || p.hi[j] == f64::INFINITY)
                    });
                let (eq, bnd) = p.primal_residual(&x);
                if vertices.is_empty() || !dir_ok || eq > 1e-8 || bnd > 1e-8 {
                    bad.push(format!("#{case}: bad unbounded ray"));
                }
            }
        }
    }
    Outcome::new(
        bad.is_empty(),
        format!(
            "500 LPs: {optimal} optimal, {infeasible} infeasible, {unbounded} unbounded; {} mismatches{}",
            bad.len(),
            bad.first().map(|s| format!(" (first {s})")).unwrap_or_default()
        ),
    )
}

fn criterion_7() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let (mut instruments, mut misses, mut worst, mut invalid) = (0, 0, 0.0f64, 0);
    let spec = CorpusSpec::default();
    let cases = 60;
    for _ in 0..cases {
        let inst = random_instance(&mut rng, &spec);
        let d0 = &inst.model;
        if check_conditions(d0, 1e-10).has_fatal() {
            invalid += 1;
            continue;
        }
        // Quotes read off the generated decomposition.
        let maturities = inst
            .quotes
            .maturities
            .iter()
            .enumerate()
            .map(|(l, mq)| MaturityQuotes {
                t: mq.t,
                calls: mq
                    .calls
                    .iter()
                    .map(|c| CallQuote {
                        strike: c.strike,
                        price: d0.u[l].eval(c.strike).unwrap(),
                    })
                    .collect(),
                barriers: mq
                    .barriers
                    .iter()
                    .map(|b| {
                        let j = d0
                            .levels
                            .iter()
                            .position(|&x| (x - b.level).abs() < 1e-12)
                            .unwrap()
                            + 1;
                        BarrierQuote {
                            level: b.level,
                            price: d0.b(l, j),
                        }
                    })
                    .collect(),
            })
            .collect();
        let q = MarketQuotes::new(d0.spot, Some(d0.grid.upper()), maturities).unwrap();
        let d1 = match calibrate(&q, &cfg(1)) {
            Ok(Calibration::Model(d)) => d,
            _ => {
                misses += 1;
                continue;
            }
        };
        for (l, mq) in q.maturities.iter().enumerate() {
            let g = &d1.grid;
            for c in &mq.calls {
                // E(S − K)⁺ = ∫_K^N P(S > x) dx, the tail being constant per cell.
                let k0 = g.index_of(c.strike).unwrap();
                let v: f64 = (k0..g.last())
                    .map(|i| joint_tail_above(&d1, l, g.x(i), d1.spot).unwrap() * g.width(i))
                    .sum();
                worst = worst.max((v - c.price).abs());
                misses += usize::from((v - c.price).abs() > 1e-7);
                instruments += 1;
            }
            for b in &mq.barriers {
                let v = joint_tail_above(&d1, l, 0.0, b.level).unwrap();
                worst = worst.max((v - b.price).abs());
                misses += usize::from((v - b.price).abs() > 1e-7);
                instruments += 1;
            }
        }
    }
    Outcome::new(
        misses == 0 && invalid == 0,
        format!("{cases} generated decompositions ({invalid} invalid), {instruments} instruments, {misses} misses, worst {worst:.2e}"),
    )
}

fn criterion_8() -> Outcome {
    let (mut instances, mut lost, mut widened, mut worst) = (0, 0, 0, 0.0f64);
    for c in corpus().iter().take(25) {
        let q = &c.inst.quotes;
        if !matches!(calibrate(q, &cfg(0)), Ok(Calibration::Model(_))) {
            continue;
        }
        instances += 1;
        for r in 1..=3 {
            lost += usize::from(!matches!(calibrate(q, &cfg(r)), Ok(Calibration::Model(_))));
        }
        // One-touch at an unquoted level halfway to the first barrier.
        let first = q.levels().first().copied().unwrap_or(q.upper_bound);
        let level = 0.5 * (q.spot + first);
        let l = q.num_maturities() - 1;
        let mut prev: Option<(f64, f64)> = None;
        for r in 0..=3 {
            let (lo, hi) = bounds(q, l, level, r);
            if let Some((plo, phi)) = prev {
                let excess = (lo - plo).max(phi - hi);
                worst = worst.max(excess);
                widened += usize::from(excess > 1e-8);
            }
            prev = Some((lo, hi));
        }
    }
    Outcome::new(
        lost == 0 && widened == 0,
        format!(
            "{instances} instances feasible at refine 0: {lost} lost feasibility at refine 1–3, \
             {widened} refinement steps whose interval fails to contain the coarser one (worst {worst:.2e})"
        ),
    )
}

fn run_cli(args: &[&str]) -> (i32, Vec<u8>) {
    let out = Command::new(env!("CARGO_BIN_EXE_robustbar"))
        .args(args)
        .output()
        .expect("binary runs");
    (out.status.code().unwrap_or(-1), out.stdout)
}

fn fixture(name: &str) -> String {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("tests/fixtures")
        .join(name)
        .display()
        .to_string()
}

fn criterion_9() -> Outcome {
    let runs: Vec<(Vec<String>, i32, Vec<&str>)> = vec![
        (
            vec!["check".into(), "--input".into(), fixture("model_a.json")],
            0,
            vec![],
        ),
        (
            vec![
                "calibrate".into(),
                "--input".into(),
                fixture("model_a.json"),
                "--refine".into(),
                "2".into(),
                "--out".into(),
                "{dir}/d.json".into(),
            ],
            0,
            vec!["d.json"],
        ),
        (
            vec![
                "calibrate".into(),
                "--input".into(),
                fixture("two_maturities.json"),
                "--objective".into(),
                "regularize".into(),
                "--out".into(),
                "{dir}/r.json".into(),
            ],
            0,
            vec!["r.json"],
        ),
        (
            vec![
                "calibrate".into(),
                "--input".into(),
                fixture("model_a_arbitrage.json"),
                "--out".into(),
                "{dir}/c.json".into(),
            ],
            3,
            vec!["c.json"],
        ),
        (
            vec![
                "joint".into(),
                "--input".into(),
                fixture("two_maturities.json"),
                "--out".into(),
                "{dir}/j".into(),
            ],
            0,
            vec!["j.pmf.csv", "j.tails.csv"],
        ),
        (
            vec![
                "bounds".into(),
                "--input".into(),
                fixture("model_a_calls.json"),
                "--barrier".into(),
                "1.25".into(),
                "--maturity".into(),
                "1".into(),
                "--side".into(),
                "max".into(),
                "--out".into(),
                "{dir}/b.json".into(),
            ],
            0,
            vec!["b.json"],
        ),
        (
            vec![
                "vol".into(),
                "--input".into(),
                fixture("two_maturities.json"),
                "--maturity".into(),
                "2".into(),
                "--out".into(),
                "{dir}/v.csv".into(),
            ],
            0,
            vec!["v.csv"],
        ),
        (
            vec![
                "price".into(),
                "--input".into(),
                fixture("model_a.json"),
                "--maturity".into(),
                "1".into(),
                "--strike".into(),
                "1".into(),
                "--barrier".into(),
                "1.5".into(),
            ],
            0,
            vec![],
        ),
    ];
    let dirs = [tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap()];
    let mut outputs: [Vec<Vec<u8>>; 2] = [Vec::new(), Vec::new()];
    let mut problems = Vec::new();
    let mut bound_line = String::new();
    for (k, dir) in dirs.iter().enumerate() {
        for (args, code, files) in &runs {
            let args: Vec<String> = args
                .iter()
                .map(|a| a.replace("{dir}", &dir.path().display().to_string()))
                .collect();
            let argv: Vec<&str> = args.iter().map(String::as_str).collect();
            let (got, stdout) = run_cli(&argv);
            if got != *code {
                problems.push(format!("`{}` exited {got}, expected {code}", args[0]));
            }
            if args[0] == "bounds" {
                bound_line = String::from_utf8_lossy(&stdout).trim().to_string();
            }
            outputs[k].push(stdout);
            for f in files {
                outputs[k].push(std::fs::read(dir.path().join(f)).unwrap_or_default());
            }
        }
    }
    let differing = outputs[0]
        .iter()
        .zip(&outputs[1])
        .filter(|(a, b)| a != b)
        .count();
    let empty = outputs[0].iter().filter(|o| o.is_empty()).count();
    Outcome::new(
        differing == 0 && problems.is_empty(),
        format!(
            "{} runs twice, {} outputs compared, {differing} differ, {empty} empty; bounds printed {bound_line}{}",
            runs.len(),
            outputs[0].len(),
            if problems.is_empty() { String::new() } else { format!("; {}", problems.join(", ")) }
        ),
    )
}
