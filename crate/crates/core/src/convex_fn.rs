//! Piecewise-linear functions on a grid and their duality with discrete
//! measures through the call transform `c(x) = Σ_y (y − x)⁺ w_y`.

use serde::{Deserialize, Serialize};

use crate::error::Error;
use crate::market_data::{Grid, Severity, ValidationReport, GRID_TOL};

/// Default tolerance on slope comparisons.
pub const SLOPE_TOL: f64 = 1e-9;

/// Masses at or below this magnitude are dropped by [`PLConvex::to_measure`].
const ATOM_DROP: f64 = 1e-12;

/// Piecewise-linear function given by its values at the nodes of a grid.
///
/// Used for call-type functions, so most constructors expect convexity, but
/// intermediate arithmetic results need not be convex.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PLConvex {
    pub grid: Grid,
    pub values: Vec<f64>,
}

/// Finite measure on grid nodes.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct DiscreteMeasure {
    /// `(point, mass)` pairs sorted by point.
    pub atoms: Vec<(f64, f64)>,
}

impl DiscreteMeasure {
    pub fn new(mut atoms: Vec<(f64, f64)>) -> Self {
        atoms.sort_by(|a, b| a.0.total_cmp(&b.0));
        Self { atoms }
    }

    pub fn mass(&self) -> f64 {
        self.atoms.iter().map(|a| a.1).sum()
    }

    pub fn mean(&self) -> f64 {
        self.atoms.iter().map(|a| a.0 * a.1).sum()
    }

    /// `Σ f(x)·w` over the atoms.
    pub fn integrate(&self, f: impl Fn(f64) -> f64) -> f64 {
        self.atoms.iter().map(|&(x, w)| f(x) * w).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.atoms.is_empty()
    }
}

impl PLConvex {
    pub fn new(grid: Grid, values: Vec<f64>) -> Result<Self, Error> {
        if grid.len() != values.len() {
            return Err(Error::Dimension(format!(
                "{} values for a grid of {} nodes",
                values.len(),
                grid.len()
            )));
        }
        Ok(Self { grid, values })
    }

    pub fn zeros(grid: &Grid) -> Self {
        Self {
            values: vec![0.0; grid.len()],
            grid: grid.clone(),
        }
    }

    /// `x ↦ (level − x)⁺` sampled on the grid.
    pub fn put_payoff(grid: &Grid, level: f64) -> Self {
        Self {
            values: grid
                .points()
                .iter()
                .map(|&x| (level - x).max(0.0))
                .collect(),
            grid: grid.clone(),
        }
    }

    pub fn value(&self, i: usize) -> f64 {
        self.values[i]
    }

    /// Linear interpolation on the cell containing `x`.
    pub fn eval(&self, x: f64) -> Result<f64, Error> {
        let upper = self.grid.upper();
        if !(x >= -GRID_TOL && x <= upper + GRID_TOL) {
            return Err(Error::OutOfDomain(x, upper));
        }
        if let Some(i) = self.grid.index_of(x) {
            return Ok(self.values[i]);
        }
        let i = self.grid.cell_of(x).ok_or(Error::OutOfDomain(x, upper))?;
        let w = (x - self.grid.x(i)) / self.grid.width(i);
        Ok(self.values[i] * (1.0 - w) + self.values[i + 1] * w)
    }

    /// Slope of the segment `[x_i, x_{i+1}]`.
    pub fn right_slope(&self, i: usize) -> Result<f64, Error> {
        if i >= self.grid.last() {
            return Err(Error::Index {
                what: "right slope",
                index: i,
                len: self.grid.last(),
            });
        }
        Ok((self.values[i + 1] - self.values[i]) / self.grid.width(i))
    }

    /// Slope of the segment `[x_{i-1}, x_i]`.
    pub fn left_slope(&self, i: usize) -> Result<f64, Error> {
        if i == 0 || i > self.grid.last() {
            return Err(Error::Index {
                what: "left slope",
                index: i,
                len: self.grid.len(),
            });
        }
        self.right_slope(i - 1)
    }

    /// Right derivative at an arbitrary point `0 ≤ x < N`.
    pub fn right_derivative(&self, x: f64) -> Result<f64, Error> {
        let upper = self.grid.upper();
        let i = match self.grid.index_of(x) {
            Some(i) if i < self.grid.last() => i,
            Some(_) => return Err(Error::OutOfDomain(x, upper)),
            None => self.grid.cell_of(x).ok_or(Error::OutOfDomain(x, upper))?,
        };
        self.right_slope(i)
    }

    /// Slope change at node `i`; the slope to the right of `N` is taken as 0.
    fn kink(&self, i: usize) -> f64 {
        let right = if i < self.grid.last() {
            (self.values[i + 1] - self.values[i]) / self.grid.width(i)
        } else {
            0.0
        };
        let left = (self.values[i] - self.values[i - 1]) / self.grid.width(i - 1);
        right - left
    }

    /// Returns `true` if segment slopes are non-decreasing within `tol`.
    pub fn is_convex(&self, tol: f64) -> bool {
        (1..self.grid.last()).all(|i| self.kink(i) >= -tol)
    }

    /// Inverse call transform: atoms are the slope changes at the nodes
    /// `x_1, …, x_G` (the slope beyond `N` is zero). No mass is ever placed
    /// at `x_0 = 0`; `-right_slope(0)` is the mass strictly above zero.
    pub fn to_measure(&self) -> Result<DiscreteMeasure, Error> {
        self.to_measure_with(SLOPE_TOL)
    }

    pub fn to_measure_with(&self, tol: f64) -> Result<DiscreteMeasure, Error> {
        let g = self.grid.last();
        if self.values[g].abs() > tol {
            return Err(Error::NotConvex(format!(
                "call transform must vanish at the upper bound, got {}",
                self.values[g]
            )));
        }
        let mut atoms = Vec::new();
        for i in 1..=g {
            let w = self.kink(i);
            if w < -tol {
                return Err(Error::NotConvex(format!(
                    "negative slope change {w} at node {}",
                    self.grid.x(i)
                )));
            }
            if w.abs() > ATOM_DROP {
                atoms.push((self.grid.x(i), w));
            }
        }
        Ok(DiscreteMeasure { atoms })
    }

    /// Call transform `x ↦ Σ_y (y − x)⁺ w_y` of a measure with atoms on the grid.
    pub fn from_measure(grid: &Grid, m: &DiscreteMeasure) -> Result<Self, Error> {
        for &(y, _) in &m.atoms {
            if grid.index_of(y).is_none() {
                return Err(Error::OffGrid(y));
            }
        }
        let values = grid
            .points()
            .iter()
            .map(|&x| m.atoms.iter().map(|&(y, w)| (y - x).max(0.0) * w).sum())
            .collect();
        Ok(Self {
            grid: grid.clone(),
            values,
        })
    }

    /// `self + k·other` on the same grid.
    pub fn add_scaled(&self, k: f64, other: &PLConvex) -> Self {
        debug_assert_eq!(self.grid.len(), other.grid.len());
        Self {
            grid: self.grid.clone(),
            values: self
                .values
                .iter()
                .zip(&other.values)
                .map(|(a, b)| a + k * b)
                .collect(),
        }
    }

    pub fn max_abs_diff(&self, other: &PLConvex) -> f64 {
        self.values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }
}

/// Checks that `f` is a call price function on its grid: convex,
/// non-negative, vanishing at `N`, with `-f'(0+) ≤ 1`.
///
/// With `unit_slope_spot = Some(s0)` it additionally requires `-f'(0+) = 1`
/// and `f(0) = s0`, i.e. a probability law with mean `s0` and no mass at zero.
pub fn check_call_price_function(f: &PLConvex, unit_slope_spot: Option<f64>) -> ValidationReport {
    check_call_price_function_with(f, unit_slope_spot, SLOPE_TOL)
}

pub fn check_call_price_function_with(
    f: &PLConvex,
    unit_slope_spot: Option<f64>,
    tol: f64,
) -> ValidationReport {
    let mut rep = ValidationReport::default();
    let g = f.grid.last();
    for i in 1..g {
        if f.kink(i) < -tol {
            rep.push(
                "CONVEXITY",
                Severity::Fatal,
                None,
                Some(f.grid.x(i)),
                "segment slopes decrease",
            );
        }
    }
    for (i, &v) in f.values.iter().enumerate() {
        if v < -tol {
            rep.push(
                "NONNEGATIVE",
                Severity::Fatal,
                None,
                Some(f.grid.x(i)),
                format!("negative value {v}"),
            );
        }
    }
    if f.values[g].abs() > tol {
        rep.push(
            "VANISH_AT_UPPER",
            Severity::Fatal,
            None,
            Some(f.grid.upper()),
            "function does not vanish at the upper bound",
        );
    }
    if g > 0 {
        let s0 = -f.right_slope(0).unwrap_or(0.0);
        if s0 > 1.0 + tol {
            rep.push(
                "SLOPE_AT_ZERO",
                Severity::Fatal,
                None,
                Some(0.0),
                format!("-f'(0+) = {s0} exceeds 1"),
            );
        }
        if let Some(spot) = unit_slope_spot {
            if (s0 - 1.0).abs() > tol {
                rep.push(
                    "UNIT_SLOPE",
                    Severity::Fatal,
                    None,
                    Some(0.0),
                    format!("-f'(0+) = {s0}, expected 1"),
                );
            }
            if (f.values[0] - spot).abs() > tol {
                rep.push(
                    "VALUE_AT_ZERO",
                    Severity::Fatal,
                    None,
                    Some(0.0),
                    format!("f(0) = {}, expected {spot}", f.values[0]),
                );
            }
        }
    }
    rep
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn g3() -> Grid {
        Grid::from_points([0.0, 1.0, 2.0])
    }

    fn g4() -> Grid {
        Grid::from_points([0.0, 0.5, 1.0, 1.5])
    }

    fn two_point() -> DiscreteMeasure {
        DiscreteMeasure::new(vec![(0.5, 0.5), (1.5, 0.5)])
    }

    #[test]
    fn eval_and_domain() {
        let f = PLConvex::new(g3(), vec![1.0, 0.5, 0.0]).unwrap();
        assert_eq!(f.eval(0.5).unwrap(), 0.75);
        assert_eq!(f.eval(2.0).unwrap(), 0.0);
        assert!(matches!(f.eval(2.5), Err(Error::OutOfDomain(..))));
        assert!(f.eval(-0.1).is_err());
    }

    #[test]
    fn one_sided_slopes() {
        let f = PLConvex::new(g3(), vec![1.0, 0.5, 0.0]).unwrap();
        assert_eq!(f.right_slope(0).unwrap(), -0.5);
        assert_eq!(f.left_slope(2).unwrap(), -0.5);
        assert!(f.right_slope(2).is_err());
        assert!(f.left_slope(0).is_err());
        let f = PLConvex::new(g3(), vec![1.0, 0.5, 0.25]).unwrap();
        assert_eq!(f.right_slope(1).unwrap(), -0.25);
    }

    #[test]
    fn two_point_law_round_trip() {
        let f = PLConvex::from_measure(&g4(), &two_point()).unwrap();
        assert_eq!(f.values, vec![1.0, 0.5, 0.25, 0.0]);
        let m = f.to_measure().unwrap();
        assert_eq!(m.atoms, vec![(0.5, 0.5), (1.5, 0.5)]);
    }

    #[test]
    fn zero_function_has_empty_measure() {
        assert!(PLConvex::zeros(&g4()).to_measure().unwrap().is_empty());
        let f = PLConvex::from_measure(&g4(), &DiscreteMeasure::default()).unwrap();
        assert!(f.values.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn put_payoff_is_a_unit_atom() {
        let f = PLConvex::put_payoff(&g4(), 1.0);
        assert_eq!(f.to_measure().unwrap().atoms, vec![(1.0, 1.0)]);
    }

    #[test]
    fn dirac_at_spot() {
        let m = DiscreteMeasure::new(vec![(1.0, 1.0)]);
        let f = PLConvex::from_measure(&g3(), &m).unwrap();
        assert_eq!(f.values, vec![1.0, 0.0, 0.0]);
    }

    #[test]
    fn off_grid_and_non_convex_are_rejected() {
        let m = DiscreteMeasure::new(vec![(0.7, 1.0)]);
        assert!(matches!(
            PLConvex::from_measure(&g3(), &m),
            Err(Error::OffGrid(_))
        ));
        let f = PLConvex::new(g3(), vec![1.0, 0.8, 0.0]).unwrap();
        assert!(matches!(f.to_measure(), Err(Error::NotConvex(_))));
    }

    #[test]
    fn call_price_function_checks() {
        let f = PLConvex::from_measure(&g4(), &two_point()).unwrap();
        assert!(check_call_price_function(&f, Some(1.0)).is_clean());

        let put = PLConvex::put_payoff(&g4(), 1.5);
        let rep = check_call_price_function(&put, Some(1.0));
        assert!(rep.contains("VALUE_AT_ZERO"));
        let at_spot = PLConvex::put_payoff(&g4(), 1.0);
        assert!(check_call_price_function(&at_spot, Some(1.0)).is_clean());

        let bent = PLConvex::new(g3(), vec![1.0, 0.8, 0.0]).unwrap();
        assert!(check_call_price_function(&bent, None).contains("CONVEXITY"));
    }

    fn measure_strategy() -> impl Strategy<Value = (Grid, DiscreteMeasure)> {
        (
            2usize..12,
            proptest::collection::vec(0.01f64..1.0, 2..12),
            any::<u64>(),
        )
            .prop_map(|(n, widths, seed)| {
                let mut x = 0.0;
                let mut pts = vec![0.0];
                for w in widths.iter().take(n) {
                    x += w;
                    pts.push(x);
                }
                let grid = Grid::from_points(pts);
                let mut s = seed;
                let atoms = grid.points()[1..]
                    .iter()
                    .filter_map(|&p| {
                        s = s
                            .wrapping_mul(6364136223846793005)
                            .wrapping_add(1442695040888963407);
                        let w = (s >> 11) as f64 / (1u64 << 53) as f64;
                        (w > 0.3).then_some((p, w))
                    })
                    .collect();
                (grid, DiscreteMeasure::new(atoms))
            })
    }

    proptest! {
        #[test]
        fn measure_round_trip((grid, m) in measure_strategy()) {
            let f = PLConvex::from_measure(&grid, &m).unwrap();
            let back = f.to_measure().unwrap();
            prop_assert_eq!(back.atoms.len(), m.atoms.len());
            for (a, b) in back.atoms.iter().zip(&m.atoms) {
                prop_assert!((a.0 - b.0).abs() <= GRID_TOL);
                prop_assert!((a.1 - b.1).abs() <= 1e-12);
            }
        }

        #[test]
        fn call_transform_shape((grid, m) in measure_strategy()) {
            let f = PLConvex::from_measure(&grid, &m).unwrap();
            prop_assert!(f.is_convex(1e-12));
            prop_assert!((f.values[0] - m.mean()).abs() <= 1e-12);
            for i in 0..grid.last() {
                let above: f64 = m.atoms.iter().filter(|a| a.0 > grid.x(i) + GRID_TOL).map(|a| a.1).sum();
                prop_assert!((-f.right_slope(i).unwrap() - above).abs() <= 1e-9);
                prop_assert!(f.values[i + 1] <= f.values[i] + 1e-15);
            }
        }
    }
}
