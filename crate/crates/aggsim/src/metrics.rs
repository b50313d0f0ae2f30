//! Exact one-dimensional Wasserstein distances via quantile staircases,
//! error curves against a reference trajectory, and convergence-rate fits.

use crate::error::{Error, Result};

/// Tolerance on the total mass of the inputs to the distance routines.
const INPUT_MASS_TOL: f64 = 1e-10;

/// A right-continuous non-decreasing step function on `[0, 1)`: the quantile
/// (monotone rearrangement) of an atomic probability measure on the line.
///
/// `values[k]` is taken on `[cum[k-1], cum[k])`, with `cum[-1] = 0` and
/// `cum.last() = 1`. Cumulative sums use compensated addition so that equal
/// measures produce bit-identical breakpoints.
#[derive(Debug, Clone, PartialEq)]
pub struct Staircase {
    values: Vec<f64>,
    cum: Vec<f64>,
}

impl Staircase {
    /// Build from atoms `(position, mass)`; atoms are sorted by position and
    /// coincident positions merged.
    pub fn from_atoms(atoms: &[(f64, f64)]) -> Staircase {
        let mut sorted = atoms.to_vec();
        sorted.sort_by(|a, b| a.0.total_cmp(&b.0));
        Staircase::from_sorted_atoms(&sorted)
    }

    /// Build from atoms already sorted by position.
    pub fn from_sorted_atoms(sorted: &[(f64, f64)]) -> Staircase {
        let mut values = Vec::with_capacity(sorted.len());
        let mut cum = Vec::with_capacity(sorted.len());
        let mut sum = 0.0;
        let mut comp = 0.0; // Kahan compensation
        for &(x, m) in sorted {
            if m == 0.0 {
                continue;
            }
            let y = m - comp;
            let t = sum + y;
            comp = (t - sum) - y;
            sum = t;
            if let Some(last) = values.last() {
                if *last == x {
                    *cum.last_mut().unwrap() = sum;
                    continue;
                }
            }
            values.push(x);
            cum.push(sum);
        }
        Staircase { values, cum }
    }

    pub fn total_mass(&self) -> f64 {
        self.cum.last().copied().unwrap_or(0.0)
    }

    /// Step values in increasing order.
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Cumulative masses; `values[k]` holds on `[cum[k-1], cum[k])`.
    pub fn cumulative(&self) -> &[f64] {
        &self.cum
    }

    /// Interior breakpoints of the staircase (cumulative masses below 1).
    pub fn breakpoints(&self) -> &[f64] {
        if self.cum.is_empty() {
            &[]
        } else {
            &self.cum[..self.cum.len() - 1]
        }
    }

    /// Evaluate `Q(z)` for `z` in `[0, 1)`.
    pub fn eval(&self, z: f64) -> f64 {
        let k = self.cum.partition_point(|&c| c <= z);
        self.values[k.min(self.values.len() - 1)]
    }
}

fn check_probability(s: &Staircase) -> Result<()> {
    let total = s.total_mass();
    if (total - 1.0).abs() > INPUT_MASS_TOL {
        return Err(Error::NotAProbability { total });
    }
    Ok(())
}

/// `int_0^1 |Q_mu - Q_nu|^p dz` by a merge sweep over the two staircases.
fn quantile_integral(mu: &Staircase, nu: &Staircase, p: u32) -> Result<f64> {
    check_probability(mu)?;
    check_probability(nu)?;
    let mut acc = 0.0;
    let mut level = 0.0;
    let (mut i, mut j) = (0usize, 0usize);
    while i < mu.values.len() && j < nu.values.len() {
        let next = mu.cum[i].min(nu.cum[j]);
        let len = next - level;
        if len > 0.0 {
            let diff = (mu.values[i] - nu.values[j]).abs();
            acc += len * if p == 1 { diff } else { diff * diff };
        }
        if mu.cum[i] <= next {
            i += 1;
        }
        if nu.cum[j] <= next {
            j += 1;
        }
        level = next;
    }
    Ok(acc)
}

/// Quadratic Wasserstein distance between two atomic probability measures on
/// the line: the L2 distance of their quantile functions.
pub fn wasserstein2_1d(mu: &Staircase, nu: &Staircase) -> Result<f64> {
    Ok(quantile_integral(mu, nu, 2)?.sqrt())
}

/// L1 quantile distance (the error integral used alongside the quadratic
/// distance in the reported curves).
pub fn wasserstein1_1d(mu: &Staircase, nu: &Staircase) -> Result<f64> {
    quantile_integral(mu, nu, 1)
}

/// Which distance an error curve reports.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Metric {
    W1,
    W2,
}

/// Per-step errors `e_n` against a reference, with `e = max_n e_n`.
#[derive(Debug, Clone)]
pub struct ErrorCurve {
    pub metric: Metric,
    /// `(n, t^n, e_n)`
    pub points: Vec<(usize, f64, f64)>,
}

impl ErrorCurve {
    pub fn e_max(&self) -> f64 {
        self.points.iter().map(|&(_, _, e)| e).fold(0.0, f64::max)
    }
}

/// Compute the error curve of a 1D trajectory against a reference.
///
/// `snapshots` holds `(t^n, atoms)` per step; `reference` maps a time to the
/// reference atoms.
pub fn error_vs_reference<F>(
    snapshots: &[(f64, Vec<(f64, f64)>)],
    reference: F,
    which: Metric,
) -> Result<ErrorCurve>
where
    F: Fn(f64) -> Vec<(f64, f64)>,
{
    let mut points = Vec::with_capacity(snapshots.len());
    for (n, (t, atoms)) in snapshots.iter().enumerate() {
        let mu = Staircase::from_atoms(atoms);
        let nu = Staircase::from_atoms(&reference(*t));
        let e = match which {
            Metric::W1 => wasserstein1_1d(&mu, &nu)?,
            Metric::W2 => wasserstein2_1d(&mu, &nu)?,
        };
        points.push((n, *t, e));
    }
    Ok(ErrorCurve { metric: which, points })
}

/// Log-log least-squares fit of `e = C dx^slope`.
#[derive(Debug, Clone)]
pub struct RateFit {
    /// `(ln dx, ln e)` pairs used for the fit.
    pub points: Vec<(f64, f64)>,
    pub slope: f64,
    pub intercept: f64,
    /// Root-mean-square residual of the fit in log space.
    pub residual: f64,
}

/// Fit the convergence rate from `(dx, e_max)` pairs at three or more
/// refinement levels.
pub fn fit_rate(pairs: &[(f64, f64)]) -> Result<RateFit> {
    if pairs.len() < 3 {
        return Err(Error::Config(format!(
            "rate fit needs at least 3 refinement levels, got {}",
            pairs.len()
        )));
    }
    if pairs.iter().any(|&(dx, e)| !(dx > 0.0) || !(e > 0.0)) {
        return Err(Error::Config("rate fit requires positive dx and error values".into()));
    }
    let points: Vec<(f64, f64)> = pairs.iter().map(|&(dx, e)| (dx.ln(), e.ln())).collect();
    let n = points.len() as f64;
    let sx: f64 = points.iter().map(|p| p.0).sum();
    let sy: f64 = points.iter().map(|p| p.1).sum();
    let sxx: f64 = points.iter().map(|p| p.0 * p.0).sum();
    let sxy: f64 = points.iter().map(|p| p.0 * p.1).sum();
    let slope = (n * sxy - sx * sy) / (n * sxx - sx * sx);
    let intercept = (sy - slope * sx) / n;
    let residual = (points
        .iter()
        .map(|&(x, y)| {
            let r = y - (slope * x + intercept);
            r * r
        })
        .sum::<f64>()
        / n)
        .sqrt();
    Ok(RateFit { points, slope, intercept, residual })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn dirac(a: f64) -> Staircase {
        Staircase::from_atoms(&[(a, 1.0)])
    }

    #[test]
    fn staircase_examples() {
        let s = dirac(3.0);
        assert_eq!(s.eval(0.0), 3.0);
        assert_eq!(s.eval(0.99), 3.0);

        let s = Staircase::from_atoms(&[(0.0, 0.5), (1.0, 0.5)]);
        assert_eq!(s.eval(0.25), 0.0);
        assert_eq!(s.eval(0.5), 1.0);

        let s = Staircase::from_atoms(&[(0.0, 0.2), (1.0, 0.3), (2.0, 0.5)]);
        assert_eq!(s.breakpoints(), &[0.2, 0.5]);
        assert_eq!(s.values(), &[0.0, 1.0, 2.0]);
    }

    #[test]
    fn distance_examples() {
        let mu = Staircase::from_atoms(&[(0.3, 0.5), (0.9, 0.5)]);
        assert_eq!(wasserstein2_1d(&mu, &mu).unwrap(), 0.0);
        assert_eq!(wasserstein1_1d(&mu, &mu).unwrap(), 0.0);

        assert_relative_eq!(wasserstein2_1d(&dirac(1.0), &dirac(4.0)).unwrap(), 3.0, epsilon = 1e-14);
        assert_relative_eq!(wasserstein1_1d(&dirac(1.0), &dirac(4.0)).unwrap(), 3.0, epsilon = 1e-14);

        let mu = Staircase::from_atoms(&[(0.0, 0.5), (1.0, 0.5)]);
        assert_relative_eq!(
            wasserstein2_1d(&mu, &dirac(0.0)).unwrap(),
            0.5f64.sqrt(),
            epsilon = 1e-14
        );
        assert_relative_eq!(wasserstein1_1d(&mu, &dirac(0.0)).unwrap(), 0.5, epsilon = 1e-14);
    }

    #[test]
    fn rejects_non_probability() {
        let bad = Staircase::from_atoms(&[(0.0, 0.4)]);
        assert!(wasserstein2_1d(&bad, &dirac(0.0)).is_err());
    }

    fn random_atoms(rng: &mut ChaCha8Rng, n: usize) -> Vec<(f64, f64)> {
        let mut masses: Vec<f64> = (0..n).map(|_| rng.gen_range(0.05..1.0)).collect();
        let total: f64 = masses.iter().sum();
        for m in &mut masses {
            *m /= total;
        }
        masses
            .into_iter()
            .map(|m| (rng.gen_range(-5.0..5.0), m))
            .collect()
    }

    #[test]
    fn triangle_inequality_and_symmetry() {
        let mut rng = ChaCha8Rng::seed_from_u64(29);
        for _ in 0..200 {
            let a = Staircase::from_atoms(&random_atoms(&mut rng, 4));
            let b = Staircase::from_atoms(&random_atoms(&mut rng, 3));
            let c = Staircase::from_atoms(&random_atoms(&mut rng, 5));
            let ab = wasserstein2_1d(&a, &b).unwrap();
            let ba = wasserstein2_1d(&b, &a).unwrap();
            let bc = wasserstein2_1d(&b, &c).unwrap();
            let ac = wasserstein2_1d(&a, &c).unwrap();
            assert_relative_eq!(ab, ba, epsilon = 1e-12);
            assert!(ac <= ab + bc + 1e-10);
            // W1 <= W2 (Cauchy-Schwarz on the unit interval).
            let w1 = wasserstein1_1d(&a, &b).unwrap();
            assert!(w1 <= ab + 1e-10);
        }
    }

    #[test]
    fn translation_equivariance() {
        let mut rng = ChaCha8Rng::seed_from_u64(31);
        for _ in 0..100 {
            let a = random_atoms(&mut rng, 4);
            let b = random_atoms(&mut rng, 4);
            let v = rng.gen_range(-2.0..2.0);
            let shift = |atoms: &[(f64, f64)]| -> Vec<(f64, f64)> {
                atoms.iter().map(|&(x, m)| (x + v, m)).collect()
            };
            let d0 = wasserstein2_1d(&Staircase::from_atoms(&a), &Staircase::from_atoms(&b)).unwrap();
            let d1 = wasserstein2_1d(
                &Staircase::from_atoms(&shift(&a)),
                &Staircase::from_atoms(&shift(&b)),
            )
            .unwrap();
            assert_relative_eq!(d0, d1, epsilon = 1e-12, max_relative = 1e-12);
        }
    }

    /// Independent oracle: evaluate the quantile integral by uniform sampling
    /// of `z` on a grid aligned with the rational masses, which makes the
    /// Riemann sum exact for staircases with rational breakpoints.
    fn w2_by_sampling(mu: &Staircase, nu: &Staircase, denom: usize) -> f64 {
        let n = denom * 64;
        let mut acc = 0.0;
        for k in 0..n {
            let z = (k as f64 + 0.5) / n as f64;
            let d = mu.eval(z) - nu.eval(z);
            acc += d * d / n as f64;
        }
        acc.sqrt()
    }

    #[test]
    fn matches_sampling_oracle_on_rational_grids() {
        let mut rng = ChaCha8Rng::seed_from_u64(37);
        let denom = 16;
        for _ in 0..50 {
            let make = |rng: &mut ChaCha8Rng| {
                let n = rng.gen_range(1..=5usize);
                let mut counts = vec![0usize; n];
                for _ in 0..denom {
                    counts[rng.gen_range(0..n)] += 1;
                }
                let atoms: Vec<(f64, f64)> = counts
                    .into_iter()
                    .filter(|&c| c > 0)
                    .map(|c| (rng.gen_range(-8i32..8) as f64 / 4.0, c as f64 / denom as f64))
                    .collect();
                Staircase::from_atoms(&atoms)
            };
            let mu = make(&mut rng);
            let nu = make(&mut rng);
            let fast = wasserstein2_1d(&mu, &nu).unwrap();
            let slow = w2_by_sampling(&mu, &nu, denom);
            assert_relative_eq!(fast, slow, epsilon = 1e-12, max_relative = 1e-12);
        }
    }

    #[test]
    fn fit_rate_exact_power_laws() {
        let pairs: Vec<(f64, f64)> =
            [0.1, 0.05, 0.025, 0.0125].iter().map(|&dx: &f64| (dx, 3.0 * dx.sqrt())).collect();
        let fit = fit_rate(&pairs).unwrap();
        assert_relative_eq!(fit.slope, 0.5, epsilon = 1e-12);
        assert!(fit.residual < 1e-12);

        let pairs: Vec<(f64, f64)> =
            [0.1, 0.05, 0.025].iter().map(|&dx: &f64| (dx, 0.7 * dx)).collect();
        let fit = fit_rate(&pairs).unwrap();
        assert_relative_eq!(fit.slope, 1.0, epsilon = 1e-12);
    }

    #[test]
    fn fit_rate_rejects_bad_input() {
        assert!(fit_rate(&[(0.1, 1.0), (0.05, 0.5)]).is_err());
        assert!(fit_rate(&[(0.1, 1.0), (0.05, 0.5), (0.025, 0.0)]).is_err());
    }

    #[test]
    fn error_curve_of_exact_match_is_zero() {
        let snapshots: Vec<(f64, Vec<(f64, f64)>)> =
            (0..10).map(|n| (n as f64 * 0.1, vec![(2.5, 1.0)])).collect();
        let curve = error_vs_reference(&snapshots, |_| vec![(2.5, 1.0)], Metric::W2).unwrap();
        assert_eq!(curve.e_max(), 0.0);
    }

    fn atom_list() -> impl proptest::strategy::Strategy<Value = Vec<(f64, f64)>> {
        use proptest::prelude::*;
        proptest::collection::vec((-10.0..10.0f64, 0.01..1.0f64), 1..20).prop_map(|mut atoms| {
            let total: f64 = atoms.iter().map(|&(_, w)| w).sum();
            for (_, w) in &mut atoms {
                *w /= total;
            }
            atoms
        })
    }

    proptest::proptest! {
        #[test]
        fn distances_are_symmetric_and_vanish_on_the_diagonal(
            a in atom_list(),
            b in atom_list(),
        ) {
            let (mu, nu) = (Staircase::from_atoms(&a), Staircase::from_atoms(&b));
            let fwd = wasserstein2_1d(&mu, &nu).unwrap();
            let bwd = wasserstein2_1d(&nu, &mu).unwrap();
            proptest::prop_assert!((fwd - bwd).abs() <= 1e-12 * (1.0 + fwd));
            proptest::prop_assert!(wasserstein2_1d(&mu, &mu).unwrap() <= 1e-12);
            let d1 = wasserstein1_1d(&mu, &nu).unwrap();
            proptest::prop_assert!((d1 - wasserstein1_1d(&nu, &mu).unwrap()).abs() <= 1e-12 * (1.0 + d1));
        }

        #[test]
        fn translation_leaves_distances_unchanged(a in atom_list(), b in atom_list(), c in -5.0..5.0f64) {
            let shift = |atoms: &[(f64, f64)]| -> Vec<(f64, f64)> {
                atoms.iter().map(|&(x, w)| (x + c, w)).collect()
            };
            let base = wasserstein2_1d(&Staircase::from_atoms(&a), &Staircase::from_atoms(&b)).unwrap();
            let moved =
                wasserstein2_1d(&Staircase::from_atoms(&shift(&a)), &Staircase::from_atoms(&shift(&b))).unwrap();
            proptest::prop_assert!((base - moved).abs() <= 1e-9 * (1.0 + base));
        }
    }
}
