//! Node-collocated upwind scheme on Cartesian grids.
//!
//! The velocity is evaluated at the same nodes that carry the mass, which is
//! what lets the scheme transport Dirac deltas instead of freezing them. One
//! step moves the mass of each node by `dt * a` and redistributes it onto the
//! node and its axis neighbors by the piecewise-linear interpolation weights;
//! under the strict 1/2-CFL condition the displaced point stays inside its
//! home cell and all weights are nonnegative.

use std::collections::{BTreeMap, BTreeSet};
use std::sync::Arc;
use std::time::Instant;

use crate::error::{Error, Result};
use crate::grid::{CartesianGrid, DiscreteMeasure};
use crate::potential::{energy, Potential};
use crate::record::{DiagRow, RunRecord};

/// The macroscopic velocity `a_J = -sum_K rho_K grad_hat W(x_J - x_K)`,
/// evaluated on the support closure (support plus a one-cell halo per axis).
#[derive(Debug, Clone)]
pub struct VelocityField {
    entries: BTreeMap<Vec<i64>, Vec<f64>>,
}

impl VelocityField {
    pub fn get(&self, idx: &[i64]) -> Option<&[f64]> {
        self.entries.get(idx).map(|v| v.as_slice())
    }

    pub fn entries(&self) -> &BTreeMap<Vec<i64>, Vec<f64>> {
        &self.entries
    }
}

/// Evaluation cells for the velocity: the support plus one cell per axis
/// direction, exactly the cells that can receive mass in one step.
fn support_closure(m: &DiscreteMeasure) -> BTreeSet<Vec<i64>> {
    let d = m.grid().dim();
    let mut set: BTreeSet<Vec<i64>> = m.weights().keys().cloned().collect();
    for idx in m.weights().keys() {
        for axis in 0..d {
            for dir in [-1i64, 1] {
                let mut n = idx.clone();
                n[axis] += dir;
                set.insert(n);
            }
        }
    }
    set
}

/// Compute the velocity field of a measure by the double sum over the
/// support atoms, in sorted index order.
///
/// All evaluation points and atoms sit on the same lattice, so the gradient
/// kernel depends only on the integer offset `J - K`; it is tabulated once
/// per call, which makes the double sum a table-driven convolution.
pub fn velocity(m: &DiscreteMeasure, p: &Potential) -> VelocityField {
    let grid = m.grid();
    let d = grid.dim();
    let mut entries = BTreeMap::new();
    if m.support_len() == 0 {
        return VelocityField { entries };
    }
    let support: Vec<(&Vec<i64>, f64)> = m.weights().iter().map(|(k, &w)| (k, w)).collect();
    // Offset range per axis: closure indices span the support +- 1.
    let mut lo = vec![i64::MAX; d];
    let mut hi = vec![i64::MIN; d];
    for (k, _) in &support {
        for j in 0..d {
            lo[j] = lo[j].min(k[j]);
            hi[j] = hi[j].max(k[j]);
        }
    }
    let off_lo: Vec<i64> = (0..d).map(|j| lo[j] - 1 - hi[j]).collect();
    let dims: Vec<usize> = (0..d).map(|j| (2 * (hi[j] - lo[j]) + 3) as usize).collect();
    let total: usize = dims.iter().product();
    let mut table = vec![0.0f64; total * d];
    let mut x = vec![0.0; d];
    let mut g = vec![0.0; d];
    for flat in 0..total {
        let mut rem = flat;
        for j in (0..d).rev() {
            let off = off_lo[j] + (rem % dims[j]) as i64;
            rem /= dims[j];
            x[j] = off as f64 * grid.dx()[j];
        }
        p.grad_hat(&x, &mut g);
        table[flat * d..flat * d + d].copy_from_slice(&g);
    }
    // Row-major strides; the flat offset of (J, K) splits as jbase - kbase.
    let mut strides = vec![1i64; d];
    for j in (0..d.saturating_sub(1)).rev() {
        strides[j] = strides[j + 1] * dims[j + 1] as i64;
    }
    let kbases: Vec<i64> = support
        .iter()
        .map(|(k, _)| (0..d).map(|j| (k[j] + off_lo[j]) * strides[j]).sum())
        .collect();
    let masses: Vec<f64> = support.iter().map(|&(_, w)| w).collect();
    for idx in support_closure(m) {
        let jbase: i64 = (0..d).map(|j| idx[j] * strides[j]).sum();
        let mut a = vec![0.0; d];
        for (kb, w) in kbases.iter().zip(&masses) {
            let base = ((jbase - kb) as usize) * d;
            for (aj, tj) in a.iter_mut().zip(&table[base..base + d]) {
                *aj -= w * tj;
            }
        }
        entries.insert(idx, a);
    }
    VelocityField { entries }
}

/// The margin of the strict 1/2-CFL condition:
/// `1/2 - w_inf * sum_i dt / dx_i`. The scheme requires it to be positive.
pub fn cfl_margin(grid: &CartesianGrid, dt: f64, w_inf: f64) -> f64 {
    0.5 - w_inf * grid.dx().iter().map(|&h| dt / h).sum::<f64>()
}

/// The piecewise-linear interpolation weights `alpha_J(y)`: at most `2d + 1`
/// entries, always containing the owner cell of `y` (possibly with weight
/// zero) and the axis neighbors with nonzero weight.
pub fn weights(grid: &CartesianGrid, y: &[f64]) -> Vec<(Vec<i64>, f64)> {
    let d = grid.dim();
    let owner = grid.owner(y);
    let center = grid.cell_center(&owner);
    let mut out = Vec::with_capacity(2 * d + 1);
    let mut owner_weight = 1.0;
    for axis in 0..d {
        let u = (y[axis] - center[axis]) / grid.dx()[axis];
        owner_weight -= u.abs();
        if u != 0.0 {
            let mut n = owner.clone();
            n[axis] += if u > 0.0 { 1 } else { -1 };
            out.push((n, u.abs()));
        }
    }
    out.push((owner, owner_weight));
    out.sort_by(|a, b| a.0.cmp(&b.0));
    out
}

/// One scheme iterate with its diagnostics.
#[derive(Debug, Clone)]
pub struct SchemeState {
    pub n: usize,
    pub t: f64,
    pub measure: DiscreteMeasure,
    pub mass: f64,
    pub com: Vec<f64>,
    pub second_moment: f64,
    pub energy: Option<f64>,
}

impl SchemeState {
    /// Wrap an initial measure; `track_energy` selects whether the O(N^2)
    /// interaction energy is maintained along the run.
    pub fn initial(measure: DiscreteMeasure, p: &Potential, track_energy: bool) -> SchemeState {
        SchemeState::with_diagnostics(0, 0.0, measure, p, track_energy)
    }

    fn with_diagnostics(
        n: usize,
        t: f64,
        measure: DiscreteMeasure,
        p: &Potential,
        track_energy: bool,
    ) -> SchemeState {
        let mass = measure.mass();
        let com = measure.center_of_mass();
        let second_moment = measure.second_moment();
        let energy = track_energy.then(|| energy(&measure.atoms(), p));
        SchemeState { n, t, measure, mass, com, second_moment, energy }
    }

    pub fn diag_row(&self) -> DiagRow {
        DiagRow {
            n: self.n,
            t: self.t,
            mass: self.mass,
            com: self.com.clone(),
            second_moment: self.second_moment,
            energy: self.energy,
        }
    }
}

/// The gradient bound used in the CFL check. For a strictly convex potential
/// (`lambda > 0`, unbounded gradient) it is refreshed from the current
/// support: the supremum of `|grad W|` over `B_inf(0, 2R + 2 dx)` where the
/// support sits in `B_inf(com, R)`. Otherwise the global bound applies.
pub fn effective_w_inf(m: &DiscreteMeasure, p: &Potential) -> Result<f64> {
    if p.lambda() > 0.0 {
        let com = m.center_of_mass();
        let mut r: f64 = 0.0;
        for idx in m.weights().keys() {
            for (axis, &j) in idx.iter().enumerate() {
                r = r.max((m.grid().center_coord(axis, j) - com[axis]).abs());
            }
        }
        let radius = 2.0 * r + 2.0 * m.grid().dx_max();
        p.local_lipschitz(radius.max(m.grid().dx_max()), m.grid().dim())
    } else {
        p.w_inf().ok_or(Error::UnboundedGradient)
    }
}

/// Advance one time step in push (scatter) form: the mass of each source
/// node is split onto the node and its axis neighbors with the transition
/// weights `1 - sum_i |a_i| dt/dx_i` and `(a_i)^{+/-} dt/dx_i`.
pub fn step(state: &SchemeState, p: &Potential, dt: f64) -> Result<SchemeState> {
    let grid = Arc::clone(state.measure.grid());
    let w_inf = effective_w_inf(&state.measure, p)?;
    let margin = cfl_margin(&grid, dt, w_inf);
    if margin <= 0.0 {
        return Err(Error::CflViolation { margin, w_inf, dt });
    }
    let vel = velocity(&state.measure, p);
    let next = scatter(&state.measure, &vel, dt, state.n)?;
    Ok(SchemeState::with_diagnostics(
        state.n + 1,
        state.t + dt,
        next,
        p,
        state.energy.is_some(),
    ))
}

fn scatter(
    m: &DiscreteMeasure,
    vel: &VelocityField,
    dt: f64,
    step_idx: usize,
) -> Result<DiscreteMeasure> {
    let grid = Arc::clone(m.grid());
    let d = grid.dim();
    let mut next: BTreeMap<Vec<i64>, f64> = BTreeMap::new();
    let mut deposit = |cell: Vec<i64>, amount: f64| -> Result<()> {
        if amount == 0.0 {
            return Ok(());
        }
        if !grid.contains(&cell) {
            return Err(Error::SupportEscape { cell, step: step_idx });
        }
        *next.entry(cell).or_insert(0.0) += amount;
        Ok(())
    };
    for (idx, &rho) in m.weights() {
        let a = vel.get(idx).expect("velocity evaluated on the support");
        let mut stay = 1.0;
        for axis in 0..d {
            let frac = dt * a[axis] / grid.dx()[axis];
            stay -= frac.abs();
            if frac != 0.0 {
                let mut n = idx.clone();
                n[axis] += if frac > 0.0 { 1 } else { -1 };
                deposit(n, rho * frac.abs())?;
            }
        }
        if stay < 0.0 {
            return Err(Error::NegativeWeight { cell: idx.clone(), weight: stay, step: step_idx });
        }
        deposit(idx.clone(), rho * stay)?;
    }
    Ok(DiscreteMeasure::from_weights_unchecked(grid, next))
}

/// The flux-form update of the same scheme, kept as an independent reference
/// route: it must agree with [`step`] cell by cell.
pub fn step_flux_form(m: &DiscreteMeasure, p: &Potential, dt: f64) -> Result<DiscreteMeasure> {
    let grid = Arc::clone(m.grid());
    let d = grid.dim();
    let vel = velocity(m, p);
    let rho = |idx: &[i64]| m.weights().get(idx).copied().unwrap_or(0.0);
    let mut next: BTreeMap<Vec<i64>, f64> = BTreeMap::new();
    for idx in support_closure(m) {
        let mut v = rho(&idx);
        for axis in 0..d {
            let lam = dt / grid.dx()[axis];
            let mut plus = idx.clone();
            plus[axis] += 1;
            let mut minus = idx.clone();
            minus[axis] -= 1;
            let a_here = vel.get(&idx).map(|a| a[axis]).unwrap_or(0.0);
            let a_plus = vel.get(&plus).map(|a| a[axis]).unwrap_or(0.0);
            let a_minus = vel.get(&minus).map(|a| a[axis]).unwrap_or(0.0);
            v -= lam
                * (a_here.max(0.0) * rho(&idx) - (-a_plus).max(0.0) * rho(&plus)
                    - a_minus.max(0.0) * rho(&minus)
                    + (-a_here).max(0.0) * rho(&idx));
        }
        if v != 0.0 {
            next.insert(idx, v);
        }
    }
    Ok(DiscreteMeasure::from_weights_unchecked(grid, next))
}

/// Iterate [`step`] to `ceil(t_final / dt)` steps, invoking the observer on
/// every state (including the initial one) and returning the trajectory
/// record.
pub fn run<F>(
    initial: SchemeState,
    p: &Potential,
    dt: f64,
    t_final: f64,
    keep_snapshots_1d: bool,
    mut observer: F,
) -> Result<RunRecord>
where
    F: FnMut(&SchemeState),
{
    let n_steps = if t_final > 0.0 { (t_final / dt).ceil() as usize } else { 0 };
    let mut record = RunRecord::new("upwind");
    let one_d = initial.measure.grid().dim() == 1;
    if keep_snapshots_1d && one_d {
        record.snapshots_1d = Some(Vec::with_capacity(n_steps + 1));
    }
    let mut state = initial;
    observer(&state);
    record.rows.push(state.diag_row());
    if let Some(snaps) = record.snapshots_1d.as_mut() {
        snaps.push((state.t, state.measure.atoms_1d()?));
    }
    for _ in 0..n_steps {
        let start = Instant::now();
        state = step(&state, p, dt)?;
        record.wall_seconds_per_step.push(start.elapsed().as_secs_f64());
        observer(&state);
        record.rows.push(state.diag_row());
        if let Some(snaps) = record.snapshots_1d.as_mut() {
            snaps.push((state.t, state.measure.atoms_1d()?));
        }
    }
    Ok(record)
}
