//! Random grid-supported market models with exactly known quotes.
//!
//! A model is a lazy nearest-neighbour martingale walk on the nodes of a
//! grid: from node `x_i` it stays with probability `lazy`, otherwise it
//! moves to `x_{i−1}` or `x_{i+1}` with the unique probabilities that keep
//! the mean. The lowest positive node and `N` absorb. Because every move is
//! to a neighbouring node, the walk is a continuous martingale observed at
//! its node-hitting times: it hits every barrier level exactly, so the joint
//! law of terminal price and running maximum computed by dynamic
//! programming is the law of a continuous model supported on the grid.

use rand::seq::SliceRandom;
use rand::Rng;

use crate::convex_fn::PLConvex;
use crate::decomposition::{Decomposition, SolveMeta};
use crate::error::Error;
use crate::market_data::{
    build_grid, validate, BarrierQuote, CallQuote, Grid, MarketQuotes, MaturityQuotes,
};

/// Size limits for [`random_instance`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CorpusSpec {
    pub max_maturities: usize,
    pub max_strikes: usize,
    pub max_levels: usize,
    /// Largest node count of the refine-0 grid.
    pub max_nodes: usize,
}

impl Default for CorpusSpec {
    fn default() -> Self {
        Self {
            max_maturities: 2,
            max_strikes: 4,
            max_levels: 3,
            max_nodes: 14,
        }
    }
}

/// Quotes read off a known model together with that model's decomposition.
#[derive(Debug, Clone)]
pub struct Instance {
    pub quotes: MarketQuotes,
    pub model: Decomposition,
}

/// Joint law of `(S, M)` on grid nodes: `mass[i][k] = P(S = x_i, M = x_k)`.
#[derive(Debug, Clone, PartialEq)]
pub struct NodeLaw {
    pub grid: Grid,
    pub mass: Vec<Vec<f64>>,
}

impl NodeLaw {
    fn start(grid: &Grid, spot: usize) -> Self {
        let n = grid.len();
        let mut mass = vec![vec![0.0; n]; n];
        mass[spot][spot] = 1.0;
        Self {
            grid: grid.clone(),
            mass,
        }
    }

    /// One step of the lazy walk.
    fn step(&self, lazy: f64) -> Self {
        let g = &self.grid;
        let n = g.len();
        let mut next = vec![vec![0.0; n]; n];
        for i in 0..n {
            for k in 0..n {
                let w = self.mass[i][k];
                if w == 0.0 {
                    continue;
                }
                if i <= 1 || i == n - 1 {
                    next[i][k] += w;
                    continue;
                }
                let up = (g.x(i) - g.x(i - 1)) / (g.x(i + 1) - g.x(i - 1));
                let moving = w * (1.0 - lazy);
                next[i][k] += w * lazy;
                next[i + 1][k.max(i + 1)] += moving * up;
                next[i - 1][k] += moving * (1.0 - up);
            }
        }
        Self {
            grid: g.clone(),
            mass: next,
        }
    }

    pub fn call(&self, strike: f64) -> f64 {
        self.weighted(|x, _| (x - strike).max(0.0))
    }

    /// `P(M ≥ level)`.
    pub fn touch(&self, level: f64) -> f64 {
        self.weighted(|_, m| if m >= level - 1e-12 { 1.0 } else { 0.0 })
    }

    fn weighted(&self, f: impl Fn(f64, f64) -> f64) -> f64 {
        let g = &self.grid;
        let mut s = 0.0;
        for (i, row) in self.mass.iter().enumerate() {
            for (k, &w) in row.iter().enumerate() {
                if w != 0.0 {
                    s += w * f(g.x(i), g.x(k));
                }
            }
        }
        s
    }
}

/// Laws of `(S_{T_l}, M_{T_l})` for a walk started at `spot` (a node of
/// `grid`) and run for `steps[l]` steps in total up to maturity `l`.
pub fn walk_laws(
    grid: &Grid,
    spot: f64,
    steps: &[usize],
    lazy: f64,
) -> Result<Vec<NodeLaw>, Error> {
    let s = grid.index_of(spot).ok_or(Error::OffGrid(spot))?;
    if s < 1 || s >= grid.last() {
        return Err(Error::Argument(
            "spot must be an interior positive node".into(),
        ));
    }
    let mut law = NodeLaw::start(grid, s);
    let mut done = 0;
    let mut out = Vec::with_capacity(steps.len());
    for &t in steps {
        if t < done {
            return Err(Error::Argument("step counts must be non-decreasing".into()));
        }
        for _ in done..t {
            law = law.step(lazy);
        }
        done = t;
        out.push(law.clone());
    }
    Ok(out)
}

/// Decomposition of the model with the given per-maturity laws, for the
/// barrier levels `levels` (grid nodes strictly between spot and `N`).
///
/// Block `j` is the call transform of `S` stopped at `B_j` on the event
/// `M ≥ B_{j−1}`: the band-`j` part of the terminal law plus an atom
/// `P(M ≥ B_j)` at `B_j`.
pub fn decomposition_of(
    laws: &[NodeLaw],
    spot: f64,
    levels: &[f64],
    quotes: &MarketQuotes,
) -> Result<Decomposition, Error> {
    let grid = laws
        .first()
        .ok_or_else(|| Error::Argument("no maturities".into()))?
        .grid
        .clone();
    let m = levels.len();
    let edge = |j: usize| -> f64 {
        if j == 0 {
            spot
        } else if j <= m {
            levels[j - 1]
        } else {
            grid.upper()
        }
    };
    let n = grid.len();
    let mut u = Vec::new();
    let mut blocks = Vec::new();
    let mut barrier = Vec::new();
    for law in laws {
        let values = grid.points().iter().map(|&x| law.call(x)).collect();
        u.push(PLConvex::new(grid.clone(), values)?);
        let mut b: Vec<f64> = (0..=m)
            .map(|j| if j == 0 { 1.0 } else { law.touch(edge(j)) })
            .collect();
        b.push((0..n).map(|k| law.mass[grid.last()][k]).sum());
        let mut row = Vec::with_capacity(m + 1);
        #[allow(clippy::needless_range_loop)]
        for j in 1..=m + 1 {
            let (lo, hi) = (edge(j - 1), edge(j));
            let last = j == m + 1;
            let mut atoms = vec![0.0; n];
            for (i, atom) in atoms.iter_mut().enumerate() {
                for k in 0..n {
                    let mk = grid.x(k);
                    if mk >= lo - 1e-12 && (last || mk < hi - 1e-12) {
                        *atom += law.mass[i][k];
                    }
                }
            }
            if !last {
                let ib = grid.index_of(hi).ok_or(Error::OffGrid(hi))?;
                atoms[ib] += b[j];
            }
            let values = grid
                .points()
                .iter()
                .map(|&x| {
                    atoms
                        .iter()
                        .zip(grid.points())
                        .map(|(w, y)| w * (y - x).max(0.0))
                        .sum()
                })
                .collect();
            row.push(PLConvex::new(grid.clone(), values)?);
        }
        blocks.push(row);
        barrier.push(b);
    }
    Ok(Decomposition {
        grid,
        spot,
        levels: levels.to_vec(),
        u,
        blocks,
        barrier,
        quotes: quotes.clone(),
        meta: SolveMeta {
            objective: "synthetic".into(),
            ..Default::default()
        },
    })
}

/// Quotes of the model `laws` at the given strikes and levels per maturity.
pub fn quotes_of(
    laws: &[NodeLaw],
    spot: f64,
    upper_bound: f64,
    strikes: &[Vec<f64>],
    levels: &[Vec<f64>],
) -> Result<MarketQuotes, Error> {
    let maturities = laws
        .iter()
        .enumerate()
        .map(|(l, law)| MaturityQuotes {
            t: (l + 1) as f64,
            calls: strikes[l]
                .iter()
                .map(|&k| CallQuote {
                    strike: k,
                    price: law.call(k),
                })
                .collect(),
            barriers: levels[l]
                .iter()
                .map(|&b| BarrierQuote {
                    level: b,
                    price: law.touch(b),
                })
                .collect(),
        })
        .collect();
    MarketQuotes::new(spot, Some(upper_bound), maturities)
}

/// Draws a random model and its quotes within the limits of `spec`.
///
/// Spot is 1, nodes lie on a 0.1 lattice, and the walk runs on the
/// refine-0 grid of the resulting quotes, so the quotes are feasible on
/// every refinement of that grid. Draws whose quotes fail the static
/// screens of [`validate`] are rejected.
pub fn random_instance<R: Rng + ?Sized>(rng: &mut R, spec: &CorpusSpec) -> Instance {
    loop {
        if let Some(inst) = try_instance(rng, spec) {
            return inst;
        }
    }
}

fn try_instance<R: Rng + ?Sized>(rng: &mut R, spec: &CorpusSpec) -> Option<Instance> {
    let spot = 1.0;
    let tenth = |k: u32| f64::from(k) / 10.0;
    let top = rng.gen_range(16..=25u32);
    let upper = tenth(top);
    let k = rng.gen_range(1..=spec.max_maturities.max(1));
    let m = rng.gen_range(0..=spec.max_levels);

    let mut above: Vec<u32> = (11..top).collect();
    above.shuffle(rng);
    let mut levels: Vec<f64> = above.iter().take(m).map(|&i| tenth(i)).collect();
    levels.sort_by(f64::total_cmp);

    let strike_pool: Vec<u32> = (3..top).filter(|&i| i != 10).collect();
    let strikes: Vec<Vec<f64>> = (0..k)
        .map(|_| {
            let n = rng.gen_range(1..=spec.max_strikes.max(1));
            let mut s: Vec<f64> = strike_pool
                .choose_multiple(rng, n)
                .map(|&i| tenth(i))
                .collect();
            s.sort_by(f64::total_cmp);
            s
        })
        .collect();
    let quoted_levels: Vec<Vec<f64>> = (0..k)
        .map(|_| {
            levels
                .iter()
                .copied()
                .filter(|_| rng.gen_bool(0.75))
                .collect()
        })
        .collect();

    // Every level must be quoted somewhere to be part of the grid.
    let mut quoted_levels = quoted_levels;
    for &b in &levels {
        if !quoted_levels.iter().any(|ls| ls.contains(&b)) {
            quoted_levels[rng.gen_range(0..k)].push(b);
        }
    }
    for ls in &mut quoted_levels {
        ls.sort_by(f64::total_cmp);
    }

    let skeleton = quotes_of(
        &vec![NodeLaw::start(&Grid::from_points([0.0, spot, upper]), 1); k],
        spot,
        upper,
        &strikes,
        &quoted_levels,
    )
    .ok()?;
    let grid = build_grid(&skeleton, 0);
    if grid.len() > spec.max_nodes || grid.index_of(spot)? < 2 {
        return None;
    }

    let lazy = rng.gen_range(0.0..0.5);
    let mut steps = Vec::with_capacity(k);
    let mut t = 0;
    for _ in 0..k {
        t += rng.gen_range(2..=16usize);
        steps.push(t);
    }
    let laws = walk_laws(&grid, spot, &steps, lazy).ok()?;
    let quotes = quotes_of(&laws, spot, upper, &strikes, &quoted_levels).ok()?;
    // Short walks leave far strikes worthless; such quotes fail the static
    // screens, so draw again.
    if validate(&quotes).has_fatal() {
        return None;
    }
    let model = decomposition_of(&laws, spot, &levels, &quotes).ok()?;
    Some(Instance { quotes, model })
}
