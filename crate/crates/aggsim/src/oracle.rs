//! Reference solutions: closed-form two-atom flows and a sticky-particle
//! integrator for atomic initial data.
//!
//! For attractive pointy potentials the continuum solution of the
//! aggregation equation with atomic data is the sticky-particle dynamics:
//! particles follow `dx_k/dt = -sum_l m_l grad_hat W(x_k - x_l)` and merge
//! at their local center of mass when they meet.

use crate::error::{Error, Result};
use crate::potential::Potential;

/// A finite particle system with unit total mass and pairwise distinct
/// positions (coinciding particles are merged).
#[derive(Debug, Clone)]
pub struct ParticleSystem {
    pub particles: Vec<(Vec<f64>, f64)>,
    pub time: f64,
}

impl ParticleSystem {
    pub fn new(particles: Vec<(Vec<f64>, f64)>) -> Result<ParticleSystem> {
        if particles.is_empty() {
            return Err(Error::Config("particle system must be nonempty".into()));
        }
        let d = particles[0].0.len();
        let mut total = 0.0;
        for (x, m) in &particles {
            if x.len() != d {
                return Err(Error::DimensionMismatch { expected: d, actual: x.len() });
            }
            if !(*m > 0.0) {
                return Err(Error::Config(format!("particle mass {m} must be positive")));
            }
            total += m;
        }
        if (total - 1.0).abs() > 1e-12 {
            return Err(Error::NotAProbability { total });
        }
        Ok(ParticleSystem { particles, time: 0.0 })
    }

    pub fn dim(&self) -> usize {
        self.particles[0].0.len()
    }

    pub fn mass(&self) -> f64 {
        self.particles.iter().map(|(_, m)| m).sum()
    }

    pub fn center_of_mass(&self) -> Vec<f64> {
        let d = self.dim();
        let mut com = vec![0.0; d];
        for (x, m) in &self.particles {
            for k in 0..d {
                com[k] += m * x[k];
            }
        }
        com
    }

    /// One-dimensional atom list `(x, m)` sorted by position.
    pub fn atoms_1d(&self) -> Result<Vec<(f64, f64)>> {
        if self.dim() != 1 {
            return Err(Error::DimensionMismatch { expected: 1, actual: self.dim() });
        }
        let mut out: Vec<(f64, f64)> =
            self.particles.iter().map(|(x, m)| (x[0], *m)).collect();
        out.sort_by(|a, b| a.0.total_cmp(&b.0));
        Ok(out)
    }
}

/// Two half-mass atoms at `+/- 1/4` under the quadratic-linear potential:
/// positions `+/- (1/4) e^{-4t}`, approaching the origin without colliding
/// in finite time.
pub fn exact_two_dirac_quadlinear(t: f64) -> ParticleSystem {
    let x = 0.25 * (-4.0 * t).exp();
    ParticleSystem {
        particles: vec![(vec![-x], 0.5), (vec![x], 0.5)],
        time: t,
    }
}

/// Two half-mass atoms under `W = |x|`: they move toward each other at
/// speed 1/2 each and collapse to a single unit atom at the midpoint at
/// time `x2_0 - x1_0`.
pub fn exact_two_dirac_newtonian(t: f64, x1_0: f64, x2_0: f64) -> ParticleSystem {
    debug_assert!(x1_0 < x2_0);
    let collapse = x2_0 - x1_0;
    let particles = if t < collapse {
        vec![(vec![x1_0 + t / 2.0], 0.5), (vec![x2_0 - t / 2.0], 0.5)]
    } else {
        vec![(vec![(x1_0 + x2_0) / 2.0], 1.0)]
    };
    ParticleSystem { particles, time: t }
}

const MERGE_TOL: f64 = 1e-10;

fn merge_pass(particles: &mut Vec<(Vec<f64>, f64)>, prev_order_1d: Option<&[usize]>) {
    // Proximity merges, lowest index first.
    let mut i = 0;
    while i < particles.len() {
        let mut j = i + 1;
        while j < particles.len() {
            let dist2: f64 = particles[i]
                .0
                .iter()
                .zip(&particles[j].0)
                .map(|(a, b)| (a - b) * (a - b))
                .sum();
            if dist2.sqrt() < MERGE_TOL {
                merge_pair(particles, i, j);
            } else {
                j += 1;
            }
        }
        i += 1;
    }
    // 1D crossing merges: any pair whose order inverted relative to the
    // pre-step order has met in between.
    if let Some(order) = prev_order_1d {
        loop {
            let mut merged = false;
            'outer: for i in 0..particles.len() {
                for j in (i + 1)..particles.len() {
                    let before = order[i] < order[j];
                    let after = particles[i].0[0] < particles[j].0[0];
                    let tied = particles[i].0[0] == particles[j].0[0];
                    if tied || before != after {
                        merge_pair(particles, i.min(j), i.max(j));
                        merged = true;
                        break 'outer;
                    }
                }
            }
            if !merged {
                break;
            }
        }
    }
}

fn merge_pair(particles: &mut Vec<(Vec<f64>, f64)>, i: usize, j: usize) {
    debug_assert!(i < j);
    let (xj, mj) = particles.remove(j);
    let (xi, mi) = &mut particles[i];
    let m = *mi + mj;
    for k in 0..xi.len() {
        xi[k] = (*mi * xi[k] + mj * xj[k]) / m;
    }
    *mi = m;
}

/// Integrate the sticky-particle dynamics to `t_target` by explicit Euler
/// with step `dt_fine`, merging particles that cross or approach within
/// 1e-10. This is the brute-force reference for atomic data.
pub fn sticky_integrate(
    ps: &ParticleSystem,
    p: &Potential,
    t_target: f64,
    dt_fine: f64,
) -> Result<ParticleSystem> {
    if !(dt_fine > 0.0) {
        return Err(Error::Config(format!("dt_fine must be positive, got {dt_fine}")));
    }
    let d = ps.dim();
    let mut particles = ps.particles.clone();
    let mut t = ps.time;
    let mut diff = vec![0.0; d];
    let mut grad = vec![0.0; d];
    merge_pass(&mut particles, None);
    while t < t_target - 1e-15 {
        let dt = dt_fine.min(t_target - t);
        // Rank of each particle by position before the step (1D only).
        let prev_order: Option<Vec<usize>> = (d == 1).then(|| {
            let mut idx: Vec<usize> = (0..particles.len()).collect();
            idx.sort_by(|&a, &b| particles[a].0[0].total_cmp(&particles[b].0[0]));
            let mut rank = vec![0; particles.len()];
            for (r, &k) in idx.iter().enumerate() {
                rank[k] = r;
            }
            rank
        });
        let mut velocities = vec![vec![0.0; d]; particles.len()];
        for (k, (xk, _)) in particles.iter().enumerate() {
            for (xl, ml) in &particles {
                for a in 0..d {
                    diff[a] = xk[a] - xl[a];
                }
                p.grad_hat(&diff, &mut grad);
                for a in 0..d {
                    velocities[k][a] -= ml * grad[a];
                }
            }
        }
        for (k, (xk, _)) in particles.iter_mut().enumerate() {
            for a in 0..d {
                xk[a] += dt * velocities[k][a];
            }
        }
        merge_pass(&mut particles, prev_order.as_deref());
        t += dt;
    }
    Ok(ParticleSystem { particles, time: t_target })
}
