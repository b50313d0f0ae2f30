//! Cartesian grids and discrete measures carried by their cell centers.
//!
//! Cell `C_J` is the half-open box `prod_i [(J_i - 1/2) dx_i, (J_i + 1/2) dx_i)`
//! with center `x_J = (J_i dx_i)_i`. Grids carry a finite index window; a
//! scheme step that would move mass across the window boundary is a hard
//! error, never a silent truncation.

use std::collections::BTreeMap;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::metrics::Staircase;

/// Relative slack accepted on unit total mass.
pub const MASS_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub struct CartesianGrid {
    dx: Vec<f64>,
    lo: Vec<i64>,
    hi: Vec<i64>,
}

impl CartesianGrid {
    pub fn new(dx: Vec<f64>, lo: Vec<i64>, hi: Vec<i64>) -> Result<Self> {
        if dx.is_empty() || dx.len() != lo.len() || dx.len() != hi.len() {
            return Err(Error::Config("grid axis lists must have equal nonzero length".into()));
        }
        if dx.iter().any(|&h| !(h > 0.0)) {
            return Err(Error::Config("cell sizes must be positive".into()));
        }
        if lo.iter().zip(&hi).any(|(l, h)| l > h) {
            return Err(Error::Config("grid index window is empty".into()));
        }
        Ok(CartesianGrid { dx, lo, hi })
    }

    /// Grid whose window holds every cell center inside `[min_i, max_i]`,
    /// with `dx_i = (max_i - min_i) / n_i`.
    pub fn from_domain(min: &[f64], max: &[f64], n_cells: &[usize]) -> Result<Self> {
        if min.len() != max.len() || min.len() != n_cells.len() {
            return Err(Error::Config("domain bounds and cell counts must match in length".into()));
        }
        let mut dx = Vec::new();
        let mut lo = Vec::new();
        let mut hi = Vec::new();
        for i in 0..min.len() {
            if !(max[i] > min[i]) || n_cells[i] == 0 {
                return Err(Error::Config(format!(
                    "axis {i}: need max > min and n_cells > 0, got [{}, {}] with {}",
                    min[i], max[i], n_cells[i]
                )));
            }
            let h = (max[i] - min[i]) / n_cells[i] as f64;
            dx.push(h);
            lo.push((min[i] / h - 1e-9).ceil() as i64);
            hi.push((max[i] / h + 1e-9).floor() as i64);
        }
        CartesianGrid::new(dx, lo, hi)
    }

    pub fn dim(&self) -> usize {
        self.dx.len()
    }

    pub fn dx(&self) -> &[f64] {
        &self.dx
    }

    /// `max_i dx_i`, the mesh size used in all error reports.
    pub fn dx_max(&self) -> f64 {
        self.dx.iter().cloned().fold(0.0, f64::max)
    }

    pub fn bounds(&self) -> (&[i64], &[i64]) {
        (&self.lo, &self.hi)
    }

    pub fn cell_center(&self, idx: &[i64]) -> Vec<f64> {
        idx.iter().zip(&self.dx).map(|(&j, &h)| j as f64 * h).collect()
    }

    pub fn center_coord(&self, axis: usize, j: i64) -> f64 {
        j as f64 * self.dx[axis]
    }

    /// Index of the cell owning `y` under the half-open (lower-closed)
    /// convention.
    pub fn owner(&self, y: &[f64]) -> Vec<i64> {
        y.iter()
            .zip(&self.dx)
            .map(|(&v, &h)| (v / h + 0.5).floor() as i64)
            .collect()
    }

    pub fn contains(&self, idx: &[i64]) -> bool {
        idx.iter()
            .zip(self.lo.iter().zip(&self.hi))
            .all(|(&j, (&l, &h))| l <= j && j <= h)
    }

    /// Iterate every index of the window in lexicographic order.
    pub fn indices(&self) -> impl Iterator<Item = Vec<i64>> + '_ {
        let d = self.dim();
        std::iter::successors(Some(self.lo.clone()), move |prev| {
            let mut next = prev.clone();
            for axis in (0..d).rev() {
                if next[axis] < self.hi[axis] {
                    next[axis] += 1;
                    return Some(next);
                }
                next[axis] = self.lo[axis];
            }
            None
        })
    }
}

/// A nonnegative unit-mass measure on the cell centers of a grid.
/// Only strictly positive weights are stored.
#[derive(Debug, Clone)]
pub struct DiscreteMeasure {
    grid: Arc<CartesianGrid>,
    weights: BTreeMap<Vec<i64>, f64>,
}

impl DiscreteMeasure {
    pub fn from_weights(grid: Arc<CartesianGrid>, weights: BTreeMap<Vec<i64>, f64>) -> Result<Self> {
        let mut total = 0.0;
        for (idx, &w) in &weights {
            if w < 0.0 {
                return Err(Error::Config(format!("negative weight {w} at cell {idx:?}")));
            }
            if !grid.contains(idx) {
                return Err(Error::Config(format!("cell {idx:?} outside the grid window")));
            }
            total += w;
        }
        if (total - 1.0).abs() > MASS_TOL {
            return Err(Error::NotAProbability { total });
        }
        let weights = weights.into_iter().filter(|&(_, w)| w > 0.0).collect();
        Ok(DiscreteMeasure { grid, weights })
    }

    pub(crate) fn from_weights_unchecked(
        grid: Arc<CartesianGrid>,
        weights: BTreeMap<Vec<i64>, f64>,
    ) -> Self {
        DiscreteMeasure { grid, weights }
    }

    pub fn grid(&self) -> &Arc<CartesianGrid> {
        &self.grid
    }

    pub fn weights(&self) -> &BTreeMap<Vec<i64>, f64> {
        &self.weights
    }

    pub fn support_len(&self) -> usize {
        self.weights.len()
    }

    pub fn mass(&self) -> f64 {
        self.weights.values().sum()
    }

    /// `sum_J x_J rho_J`.
    pub fn center_of_mass(&self) -> Vec<f64> {
        let d = self.grid.dim();
        let mut com = vec![0.0; d];
        for (idx, &w) in &self.weights {
            for (axis, &j) in idx.iter().enumerate() {
                com[axis] += w * self.grid.center_coord(axis, j);
            }
        }
        com
    }

    /// `sum_J |x_J|^2 rho_J`.
    pub fn second_moment(&self) -> f64 {
        let mut m2 = 0.0;
        for (idx, &w) in &self.weights {
            let mut r2 = 0.0;
            for (axis, &j) in idx.iter().enumerate() {
                let x = self.grid.center_coord(axis, j);
                r2 += x * x;
            }
            m2 += w * r2;
        }
        m2
    }

    /// Second moment about the center of mass.
    pub fn spread(&self) -> f64 {
        let com = self.center_of_mass();
        let mut m2 = 0.0;
        for (idx, &w) in &self.weights {
            let mut r2 = 0.0;
            for (axis, &j) in idx.iter().enumerate() {
                let x = self.grid.center_coord(axis, j) - com[axis];
                r2 += x * x;
            }
            m2 += w * r2;
        }
        m2
    }

    /// Support atoms `(x_J, rho_J)` in lexicographic index order.
    pub fn atoms(&self) -> Vec<(Vec<f64>, f64)> {
        self.weights
            .iter()
            .map(|(idx, &w)| (self.grid.cell_center(idx), w))
            .collect()
    }

    /// One-dimensional view `(x_j, rho_j)` sorted by position.
    pub fn atoms_1d(&self) -> Result<Vec<(f64, f64)>> {
        if self.grid.dim() != 1 {
            return Err(Error::DimensionMismatch { expected: 1, actual: self.grid.dim() });
        }
        Ok(self
            .weights
            .iter()
            .map(|(idx, &w)| (self.grid.center_coord(0, idx[0]), w))
            .collect())
    }

    /// The right-continuous non-decreasing quantile (monotone rearrangement)
    /// of a one-dimensional measure.
    pub fn quantile(&self) -> Result<Staircase> {
        Ok(Staircase::from_sorted_atoms(&self.atoms_1d()?))
    }
}

/// Initial data accepted by the discretizers.
#[derive(Clone)]
pub enum InitialDatum {
    /// Point masses; total mass is normalized to 1.
    Atoms(Vec<(Vec<f64>, f64)>),
    /// A closed-form nonnegative density, sampled by the midpoint rule and
    /// renormalized.
    Density(Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>),
    /// `height` on `outer \ inner`, discretized by exact cell-box
    /// intersection volumes.
    IndicatorBoxDifference {
        outer: (Vec<f64>, Vec<f64>),
        inner: (Vec<f64>, Vec<f64>),
        height: f64,
    },
}

impl std::fmt::Debug for InitialDatum {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            InitialDatum::Atoms(a) => write!(f, "Atoms({a:?})"),
            InitialDatum::Density(_) => write!(f, "Density(..)"),
            InitialDatum::IndicatorBoxDifference { outer, inner, height } => {
                write!(f, "IndicatorBoxDifference {{ outer: {outer:?}, inner: {inner:?}, height: {height} }}")
            }
        }
    }
}

fn box_cell_overlap(grid: &CartesianGrid, idx: &[i64], lo: &[f64], hi: &[f64]) -> f64 {
    let mut vol = 1.0;
    for axis in 0..grid.dim() {
        let h = grid.dx()[axis];
        let c_lo = (idx[axis] as f64 - 0.5) * h;
        let c_hi = (idx[axis] as f64 + 0.5) * h;
        let ov = (c_hi.min(hi[axis]) - c_lo.max(lo[axis])).max(0.0);
        if ov == 0.0 {
            return 0.0;
        }
        vol *= ov;
    }
    vol
}

/// Project an initial datum on a grid: each cell receives the datum's mass
/// over that cell (atoms exactly, densities by midpoint quadrature), and the
/// result is renormalized to unit mass.
pub fn discretize(datum: &InitialDatum, grid: &Arc<CartesianGrid>) -> Result<DiscreteMeasure> {
    let mut weights: BTreeMap<Vec<i64>, f64> = BTreeMap::new();
    match datum {
        InitialDatum::Atoms(atoms) => {
            for (pos, mass) in atoms {
                if pos.len() != grid.dim() {
                    return Err(Error::DimensionMismatch { expected: grid.dim(), actual: pos.len() });
                }
                if *mass < 0.0 {
                    return Err(Error::Config(format!("negative atom mass {mass}")));
                }
                let idx = grid.owner(pos);
                if !grid.contains(&idx) {
                    return Err(Error::Config(format!(
                        "atom at {pos:?} falls outside the grid window (cell {idx:?})"
                    )));
                }
                *weights.entry(idx).or_insert(0.0) += mass;
            }
        }
        InitialDatum::Density(f) => {
            let cell_vol: f64 = grid.dx().iter().product();
            for idx in grid.indices() {
                let x = grid.cell_center(&idx);
                let v = f(&x);
                if v < 0.0 {
                    return Err(Error::Config(format!("density is negative at {x:?}")));
                }
                if v > 0.0 {
                    weights.insert(idx, v * cell_vol);
                }
            }
        }
        InitialDatum::IndicatorBoxDifference { outer, inner, height } => {
            if *height <= 0.0 {
                return Err(Error::Config("indicator height must be positive".into()));
            }
            for idx in grid.indices() {
                let v_outer = box_cell_overlap(grid, &idx, &outer.0, &outer.1);
                let v_inner = box_cell_overlap(grid, &idx, &inner.0, &inner.1);
                let w = height * (v_outer - v_inner);
                if w > 0.0 {
                    weights.insert(idx, w);
                }
            }
        }
    }
    let total: f64 = weights.values().sum();
    if !(total > 0.0) {
        return Err(Error::Config("initial datum has no mass inside the grid window".into()));
    }
    for w in weights.values_mut() {
        *w /= total;
    }
    DiscreteMeasure::from_weights(Arc::clone(grid), weights)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn grid_1d(dx: f64, lo: i64, hi: i64) -> Arc<CartesianGrid> {
        Arc::new(CartesianGrid::new(vec![dx], vec![lo], vec![hi]).unwrap())
    }

    #[test]
    fn owner_half_open_convention() {
        let g = grid_1d(0.5, -10, 10);
        // Lower boundary belongs to the cell, upper boundary to the next.
        assert_eq!(g.owner(&[0.25]), vec![1]); // (1 - 1/2) * 0.5
        assert_eq!(g.owner(&[0.24]), vec![0]);
        assert_eq!(g.owner(&[-0.25]), vec![0]);
    }

    #[test]
    fn discretize_atoms_at_cell_centers() {
        let g = grid_1d(0.01, -100, 100);
        let datum = InitialDatum::Atoms(vec![(vec![0.25], 0.5), (vec![-0.25], 0.5)]);
        let m = discretize(&datum, &g).unwrap();
        assert_eq!(m.weights().get(&vec![25]), Some(&0.5));
        assert_eq!(m.weights().get(&vec![-25]), Some(&0.5));
        assert_eq!(m.support_len(), 2);
    }

    #[test]
    fn discretize_gaussian_pair_normalizes() {
        // 800 cells over [-1.25, 1.25].
        let g = Arc::new(CartesianGrid::from_domain(&[-1.25], &[1.25], &[800]).unwrap());
        let datum = InitialDatum::Density(Arc::new(|x: &[f64]| {
            (-20.0 * (x[0] - 0.5).powi(2)).exp() + (-20.0 * (x[0] + 0.5).powi(2)).exp()
        }));
        let m = discretize(&datum, &g).unwrap();
        assert_relative_eq!(m.mass(), 1.0, epsilon = 1e-12);
    }

    #[test]
    fn discretize_box_difference() {
        let g = Arc::new(CartesianGrid::from_domain(&[0.0, 0.0], &[1.0, 1.0], &[70, 70]).unwrap());
        let datum = InitialDatum::IndicatorBoxDifference {
            outer: (vec![0.2, 0.2], vec![0.8, 0.8]),
            inner: (vec![0.3, 0.3], vec![0.7, 0.7]),
            height: 5.0,
        };
        let m = discretize(&datum, &g).unwrap();
        assert_relative_eq!(m.mass(), 1.0, epsilon = 1e-12);
        // Cell centers strictly inside the inner box carry no mass.
        for (idx, &w) in m.weights() {
            let x = g.cell_center(idx);
            let strictly_inside =
                x.iter().all(|&v| v > 0.3 + g.dx_max() / 2.0 && v < 0.7 - g.dx_max() / 2.0);
            assert!(!strictly_inside || w == 0.0, "cell {x:?} inside the hole has weight {w}");
        }
    }

    #[test]
    fn center_of_mass_examples() {
        let g = grid_1d(0.01, -100, 100);
        let datum = InitialDatum::Atoms(vec![(vec![0.25], 0.5), (vec![-0.25], 0.5)]);
        let m = discretize(&datum, &g).unwrap();
        assert_eq!(m.center_of_mass(), vec![0.0]);
        assert_relative_eq!(m.second_moment(), 0.0625, epsilon = 1e-15);

        let g = grid_1d(1.0, -10, 10);
        let mut w = BTreeMap::new();
        w.insert(vec![0], 0.25);
        w.insert(vec![4], 0.75);
        let m = DiscreteMeasure::from_weights(g, w).unwrap();
        assert_relative_eq!(m.center_of_mass()[0], 3.0, epsilon = 1e-15);
    }

    #[test]
    fn parallel_axis_identity() {
        let g = grid_1d(0.5, -40, 40);
        let mut w = BTreeMap::new();
        w.insert(vec![-3], 0.25);
        w.insert(vec![1], 0.5);
        w.insert(vec![7], 0.25);
        let m = DiscreteMeasure::from_weights(Arc::clone(&g), w.clone()).unwrap();
        // Translate all mass by 4 cells.
        let shifted: BTreeMap<Vec<i64>, f64> = w.iter().map(|(k, &v)| (vec![k[0] + 4], v)).collect();
        let ms = DiscreteMeasure::from_weights(g, shifted).unwrap();
        assert_relative_eq!(m.spread(), ms.spread(), epsilon = 1e-12);
    }

    #[test]
    fn discretize_center_of_mass_close_to_datum_mean() {
        let g = Arc::new(CartesianGrid::from_domain(&[-1.0], &[1.0], &[37]).unwrap());
        let datum = InitialDatum::Atoms(vec![(vec![0.311], 0.25), (vec![-0.77], 0.75)]);
        let m = discretize(&datum, &g).unwrap();
        let mean = 0.311 * 0.25 - 0.77 * 0.75;
        assert!((m.center_of_mass()[0] - mean).abs() <= g.dx_max());
    }

    #[test]
    fn atom_outside_window_rejected() {
        let g = grid_1d(0.1, -5, 5);
        let datum = InitialDatum::Atoms(vec![(vec![3.0], 1.0)]);
        assert!(discretize(&datum, &g).is_err());
    }
}
