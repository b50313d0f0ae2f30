//! Comparison schemes: the interface-velocity upwind scheme, the
//! energy-non-increasing scheme with difference-quotient interface
//! velocities, and the scalar conservation-law scheme induced on the
//! primitive `u_i = 1/2 - sum_{k <= i} rho_k`.
//!
//! All three are one-dimensional. The first two share the flux structure
//! (and hence the mass and positivity invariants) of the core scheme but
//! differ in where the velocity is evaluated; the third is an exact
//! rewriting of the core scheme for `W = |x| / 2`.

use std::collections::BTreeMap;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::grid::{CartesianGrid, DiscreteMeasure};
use crate::potential::Potential;
use crate::upwind::cfl_margin;

fn require_1d(m: &DiscreteMeasure) -> Result<()> {
    if m.grid().dim() != 1 {
        return Err(Error::DimensionMismatch { expected: 1, actual: m.grid().dim() });
    }
    Ok(())
}

fn check_cfl(grid: &CartesianGrid, p: &Potential, dt: f64) -> Result<f64> {
    let w_inf = p.w_inf().ok_or(Error::UnboundedGradient)?;
    let margin = cfl_margin(grid, dt, w_inf);
    if margin <= 0.0 {
        return Err(Error::CflViolation { margin, w_inf, dt });
    }
    Ok(w_inf)
}

/// Flux-form update shared by both interface-velocity schemes:
/// `rho_i - (dt/dx) (a_{i+1/2}^+ rho_i - a_{i+1/2}^- rho_{i+1}
///                  - a_{i-1/2}^+ rho_{i-1} + a_{i-1/2}^- rho_i)`
/// with `a^+ = max(a, 0)` and `a^- = max(-a, 0)`.
fn interface_flux_update(
    m: &DiscreteMeasure,
    a_half: impl Fn(i64) -> f64,
    dt: f64,
) -> Result<DiscreteMeasure> {
    let grid = Arc::clone(m.grid());
    let dx = grid.dx()[0];
    let rho = |i: i64| m.weights().get(&vec![i]).copied().unwrap_or(0.0);
    let mut touched: std::collections::BTreeSet<i64> = std::collections::BTreeSet::new();
    for idx in m.weights().keys() {
        touched.insert(idx[0] - 1);
        touched.insert(idx[0]);
        touched.insert(idx[0] + 1);
    }
    let mut next = BTreeMap::new();
    for i in touched {
        let a_r = a_half(i); // right interface of cell i
        let a_l = a_half(i - 1);
        let v = rho(i)
            - dt / dx
                * (a_r.max(0.0) * rho(i) - (-a_r).max(0.0) * rho(i + 1)
                    - a_l.max(0.0) * rho(i - 1)
                    + (-a_l).max(0.0) * rho(i));
        if v < 0.0 {
            return Err(Error::NegativeWeight { cell: vec![i], weight: v, step: 0 });
        }
        if v > 0.0 {
            if !grid.contains(&[i]) {
                return Err(Error::SupportEscape { cell: vec![i], step: 0 });
            }
            next.insert(vec![i], v);
        }
    }
    Ok(DiscreteMeasure::from_weights_unchecked(grid, next))
}

/// The standard finite-volume upwind step with the velocity evaluated at
/// the cell interfaces, `a_{i+1/2} = -sum_k rho_k W'(x_{i+1/2} - x_k)`.
/// Atoms are stationary under it: the interface velocities on both sides of
/// a loaded cell see the atom's own mass, cancel, and the atom freezes.
pub fn interface_upwind_step(
    m: &DiscreteMeasure,
    p: &Potential,
    dt: f64,
) -> Result<DiscreteMeasure> {
    require_1d(m)?;
    check_cfl(m.grid(), p, dt)?;
    let dx = m.grid().dx()[0];
    let atoms: Vec<(f64, f64)> = m.atoms_1d()?;
    let mut grad = [0.0];
    let mut cache: BTreeMap<i64, f64> = BTreeMap::new();
    let mut needed: std::collections::BTreeSet<i64> = std::collections::BTreeSet::new();
    for idx in m.weights().keys() {
        for off in -2..=2 {
            needed.insert(idx[0] + off);
        }
    }
    for i in needed {
        let x_half = (i as f64 + 0.5) * dx;
        let mut a = 0.0;
        for &(xk, mk) in &atoms {
            p.grad_hat(&[x_half - xk], &mut grad[..]);
            a -= mk * grad[0];
        }
        cache.insert(i, a);
    }
    interface_flux_update(m, |i| cache.get(&i).copied().unwrap_or(0.0), dt)
}

/// One step of the energy-non-increasing scheme: interface velocities are
/// the difference quotients of the convolved potential,
/// `a_{I+1/2} = -(1/dx) sum_J (W(dx (I+1-J)) - W(dx (I-J))) rho_J`.
pub fn energy_scheme_step(m: &DiscreteMeasure, p: &Potential, dt: f64) -> Result<DiscreteMeasure> {
    require_1d(m)?;
    check_cfl(m.grid(), p, dt)?;
    let dx = m.grid().dx()[0];
    let mut cache: BTreeMap<i64, f64> = BTreeMap::new();
    let mut needed: std::collections::BTreeSet<i64> = std::collections::BTreeSet::new();
    for idx in m.weights().keys() {
        for off in -2..=2 {
            needed.insert(idx[0] + off);
        }
    }
    for i in needed {
        let mut a = 0.0;
        for (idx, &w) in m.weights() {
            let j = idx[0];
            a -= (p.value(&[dx * (i + 1 - j) as f64]) - p.value(&[dx * (i - j) as f64])) / dx * w;
        }
        cache.insert(i, a);
    }
    interface_flux_update(m, |i| cache.get(&i).copied().unwrap_or(0.0), dt)
}

/// The primitive variable of a 1D measure on the cells of a grid:
/// a non-increasing staircase in `[-1/2, 1/2]` with `u_i - u_{i-1} = -rho_i`.
#[derive(Debug, Clone, PartialEq)]
pub struct BurgersState {
    pub grid: Arc<CartesianGrid>,
    /// `u_i` for every index of the grid window.
    pub values: Vec<f64>,
    pub step: usize,
}

impl BurgersState {
    fn lo(&self) -> i64 {
        self.grid.bounds().0[0]
    }

    pub fn value(&self, i: i64) -> f64 {
        let lo = self.lo();
        let hi = self.grid.bounds().1[0];
        if i < lo {
            0.5
        } else if i > hi {
            *self.values.last().unwrap()
        } else {
            self.values[(i - lo) as usize]
        }
    }
}

/// `u_i = 1/2 - sum_{k <= i} rho_k` over the grid window.
pub fn u_from_rho(m: &DiscreteMeasure) -> Result<BurgersState> {
    require_1d(m)?;
    let grid = Arc::clone(m.grid());
    let (lo, hi) = (grid.bounds().0[0], grid.bounds().1[0]);
    let mut values = Vec::with_capacity((hi - lo + 1) as usize);
    let mut cum = 0.0;
    for i in lo..=hi {
        cum += m.weights().get(&vec![i]).copied().unwrap_or(0.0);
        values.push(0.5 - cum);
    }
    Ok(BurgersState { grid, values, step: 0 })
}

/// One step of the induced scalar scheme
/// `u_i - (dt/2dx) (((u_{i+1})^2 - (u_i)^2)^+ - ((u_i)^2 - (u_{i-1})^2)^-)`
/// with `x^+ = max(x, 0)`, `x^- = max(-x, 0)`. It is the exact rewriting of
/// the node-velocity upwind scheme for `W = |x| / 2` in the primitive
/// variable.
pub fn burgers_step(u: &BurgersState, dt: f64) -> Result<BurgersState> {
    let dx = u.grid.dx()[0];
    if !(dt < dx) {
        return Err(Error::CflViolation { margin: dx - dt, w_inf: 0.5, dt });
    }
    let lo = u.grid.bounds().0[0];
    let hi = u.grid.bounds().1[0];
    let mut values = Vec::with_capacity(u.values.len());
    for i in lo..=hi {
        let um = u.value(i - 1);
        let uc = u.value(i);
        let up = u.value(i + 1);
        let d_plus = up * up - uc * uc;
        let d_minus = uc * uc - um * um;
        values.push(uc - dt / (2.0 * dx) * (d_plus.max(0.0) - (-d_minus).max(0.0)));
    }
    Ok(BurgersState { grid: Arc::clone(&u.grid), values, step: u.step + 1 })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{discretize, InitialDatum};
    use crate::upwind::{step, SchemeState};
    use approx::assert_relative_eq;

    fn grid_1d(dx: f64, lo: i64, hi: i64) -> Arc<CartesianGrid> {
        Arc::new(CartesianGrid::new(vec![dx], vec![lo], vec![hi]).unwrap())
    }

    #[test]
    fn interface_scheme_freezes_two_atoms() {
        let g = grid_1d(0.1, -20, 20);
        let mut w = BTreeMap::new();
        w.insert(vec![-5], 0.5);
        w.insert(vec![5], 0.5);
        let m = DiscreteMeasure::from_weights(g, w).unwrap();
        let out = interface_upwind_step(&m, &Potential::AbsScaled(1.0), 0.01).unwrap();
        assert_eq!(out.weights(), m.weights());
    }

    #[test]
    fn interface_scheme_single_atom_unchanged() {
        let g = grid_1d(0.1, -20, 20);
        let m = discretize(&InitialDatum::Atoms(vec![(vec![0.3], 1.0)]), &g).unwrap();
        let out = interface_upwind_step(&m, &Potential::AbsScaled(1.0), 0.01).unwrap();
        assert_eq!(out.weights(), m.weights());
    }

    #[test]
    fn interface_scheme_preserves_mass_and_positivity() {
        let g = grid_1d(0.02, -80, 80);
        let datum = InitialDatum::Density(Arc::new(|x: &[f64]| {
            (-20.0 * (x[0] - 0.5).powi(2)).exp() + (-20.0 * (x[0] + 0.5).powi(2)).exp()
        }));
        let mut m = discretize(&datum, &g).unwrap();
        for _ in 0..50 {
            m = interface_upwind_step(&m, &Potential::AbsScaled(1.0), 0.005).unwrap();
        }
        assert_relative_eq!(m.mass(), 1.0, epsilon = 1e-12);
        assert!(m.weights().values().all(|&w| w > 0.0));
    }

    #[test]
    fn energy_scheme_single_atom_unchanged() {
        let g = grid_1d(0.1, -20, 20);
        let m = discretize(&InitialDatum::Atoms(vec![(vec![0.3], 1.0)]), &g).unwrap();
        let out = energy_scheme_step(&m, &Potential::HalfAbs, 0.01).unwrap();
        assert_eq!(out.weights(), m.weights());
    }

    #[test]
    fn energy_scheme_freezes_atoms_for_abs_potential() {
        // The difference quotient of c|x| over any cell interval is exactly
        // c sign at the interface, so the scheme coincides with the
        // interface upwind scheme and the atom pair is stationary.
        let g = grid_1d(0.1, -20, 20);
        let mut w = BTreeMap::new();
        w.insert(vec![-1], 0.5);
        w.insert(vec![1], 0.5);
        let m = DiscreteMeasure::from_weights(g, w).unwrap();
        let out = energy_scheme_step(&m, &Potential::HalfAbs, 0.01).unwrap();
        assert_eq!(out.weights(), m.weights());
    }

    #[test]
    fn energy_scheme_pulls_atoms_inward_quadratic_region() {
        // Atoms at +/- dx inside the quadratic region of quad_linear
        // (W = 2x^2): hand evaluation of the difference quotients gives
        // inner interface velocities -/+ 2 dx pointing inward.
        let dx = 0.1;
        let g = grid_1d(dx, -20, 20);
        let mut w = BTreeMap::new();
        w.insert(vec![-1], 0.5);
        w.insert(vec![1], 0.5);
        let m = DiscreteMeasure::from_weights(g, w).unwrap();
        let dt = 0.01;
        let out = energy_scheme_step(&m, &Potential::QuadLinear, dt).unwrap();
        let rho = |i: i64| out.weights().get(&vec![i]).copied().unwrap_or(0.0);
        let moved = 0.5 * (2.0 * dx) * dt / dx;
        assert_relative_eq!(rho(0), 2.0 * moved, epsilon = 1e-14);
        assert_relative_eq!(rho(-1), 0.5 - moved, epsilon = 1e-14);
        assert_relative_eq!(rho(1), 0.5 - moved, epsilon = 1e-14);
        assert_relative_eq!(out.center_of_mass()[0], 0.0, epsilon = 1e-15);
    }

    #[test]
    fn energy_increase_scales_quadratically_in_dt() {
        use crate::potential::energy;
        let g = grid_1d(0.05, -40, 40);
        let datum = InitialDatum::Density(Arc::new(|x: &[f64]| {
            (-10.0 * (x[0] - 0.4).powi(2)).exp() + (-10.0 * (x[0] + 0.4).powi(2)).exp()
        }));
        let m = discretize(&datum, &g).unwrap();
        let p = Potential::HalfAbs;
        let e0 = energy(&m.atoms(), &p);
        let increase = |dt: f64| {
            let out = energy_scheme_step(&m, &p, dt).unwrap();
            (energy(&out.atoms(), &p) - e0).max(0.0)
        };
        let i1 = increase(2e-3);
        let i2 = increase(1e-3);
        // Any increase halves at least quadratically with dt.
        assert!(i2 <= i1 / 4.0 + 1e-15, "increase {i1} -> {i2} not quadratic");
    }

    #[test]
    fn u_from_rho_examples() {
        let g = grid_1d(1.0, -3, 3);
        let mut w = BTreeMap::new();
        w.insert(vec![0], 1.0);
        let m = DiscreteMeasure::from_weights(Arc::clone(&g), w).unwrap();
        let u = u_from_rho(&m).unwrap();
        assert_eq!(u.value(-1), 0.5);
        assert_eq!(u.value(0), -0.5);
        assert_eq!(u.value(3), -0.5);
        assert_eq!(u.value(-4), 0.5);

        let mut w = BTreeMap::new();
        for i in -2..=2 {
            w.insert(vec![i], 0.2);
        }
        let m = DiscreteMeasure::from_weights(g, w).unwrap();
        let u = u_from_rho(&m).unwrap();
        for i in -2..=2 {
            assert_relative_eq!(u.value(i) - u.value(i - 1), -0.2, epsilon = 1e-15);
        }
    }

    #[test]
    fn burgers_constant_state_unchanged() {
        let g = grid_1d(0.1, -5, 5);
        let u = BurgersState { grid: g, values: vec![0.5; 11], step: 0 };
        let out = burgers_step(&u, 0.05).unwrap();
        assert_eq!(out.values, u.values);
    }

    #[test]
    fn burgers_matches_upwind_one_step() {
        let dx = 0.1;
        let g = grid_1d(dx, -20, 20);
        let mut w = BTreeMap::new();
        w.insert(vec![-5], 0.5);
        w.insert(vec![7], 0.5);
        let m = DiscreteMeasure::from_weights(g, w).unwrap();
        let p = Potential::HalfAbs;
        let dt = 0.02;
        let u0 = u_from_rho(&m).unwrap();
        let u1 = burgers_step(&u0, dt).unwrap();
        let s1 = step(&SchemeState::initial(m, &p, false), &p, dt).unwrap();
        let v1 = u_from_rho(&s1.measure).unwrap();
        for (a, b) in u1.values.iter().zip(&v1.values) {
            assert!((a - b).abs() < 1e-14, "{a} vs {b}");
        }
    }

    #[test]
    fn burgers_many_steps_match_upwind() {
        let dx = 0.05;
        let g = grid_1d(dx, -60, 60);
        let datum = InitialDatum::Density(Arc::new(|x: &[f64]| {
            (-20.0 * (x[0] - 0.5).powi(2)).exp() + (-20.0 * (x[0] + 0.5).powi(2)).exp()
        }));
        let m = discretize(&datum, &g).unwrap();
        let p = Potential::HalfAbs;
        let dt = 0.04; // CFL ratio 0.4 for w_inf = 1/2
        let mut u = u_from_rho(&m).unwrap();
        let mut s = SchemeState::initial(m, &p, false);
        for _ in 0..100 {
            u = burgers_step(&u, dt).unwrap();
            s = step(&s, &p, dt).unwrap();
        }
        let v = u_from_rho(&s.measure).unwrap();
        for (a, b) in u.values.iter().zip(&v.values) {
            assert!((a - b).abs() < 1e-12, "{a} vs {b}");
        }
    }

    #[test]
    fn burgers_keeps_monotone_range() {
        let dx = 0.05;
        let g = grid_1d(dx, -60, 60);
        let datum = InitialDatum::Density(Arc::new(|x: &[f64]| {
            if x[0].abs() < 0.8 { 1.0 } else { 0.0 }
        }));
        let m = discretize(&datum, &g).unwrap();
        let mut u = u_from_rho(&m).unwrap();
        for _ in 0..200 {
            u = burgers_step(&u, 0.04).unwrap();
            assert!(u.values.windows(2).all(|w| w[1] <= w[0] + 1e-15));
            assert!(u.values.iter().all(|&v| (-0.5 - 1e-12..=0.5 + 1e-12).contains(&v)));
        }
    }

    #[test]
    fn burgers_rejects_large_dt() {
        let g = grid_1d(0.1, -5, 5);
        let u = BurgersState { grid: g, values: vec![0.0; 11], step: 0 };
        assert!(burgers_step(&u, 0.1).is_err());
    }
}
