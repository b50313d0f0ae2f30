//! Interaction potentials and their hat-convention gradients.
//!
//! Every built-in potential is even with `W(0) = 0`. The gradient is the
//! *hatted* gradient: the classical gradient away from the origin, extended
//! by the zero vector at the origin, so that the self-interaction of an atom
//! vanishes. The origin test is an exact component-wise comparison; the
//! schemes only ever evaluate the gradient at differences of node
//! coordinates, where coincident nodes produce exact zeros.

use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};

type ScalarField = Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>;
type VectorField = Arc<dyn Fn(&[f64], &mut [f64]) + Send + Sync>;

/// A user-supplied potential: `(W, grad W, lambda, w_inf, radial)`.
///
/// The contract (evenness, `W(0) = 0`, the stated convexity constant and
/// gradient bound) is trusted, not verified.
#[derive(Clone)]
pub struct CustomPotential {
    pub value: ScalarField,
    pub grad: VectorField,
    pub lambda: f64,
    pub w_inf: Option<f64>,
    pub radial: bool,
}

#[derive(Clone)]
pub enum Potential {
    /// `W(x) = c |x|`
    AbsScaled(f64),
    /// `W(x) = 1 - e^{-a |x|}`
    ExpPointy(f64),
    /// `W(x) = 2 x^2` for `|x| <= 1`, `4 |x| - 2` beyond. One-dimensional.
    QuadLinear,
    /// `W(x) = |x| / 2`
    HalfAbs,
    /// `W(x) = (mu / 2) |x|^2`
    QuadraticRadial(f64),
    Custom(CustomPotential),
}

impl fmt::Debug for Potential {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Potential::AbsScaled(c) => write!(f, "AbsScaled({c})"),
            Potential::ExpPointy(a) => write!(f, "ExpPointy({a})"),
            Potential::QuadLinear => write!(f, "QuadLinear"),
            Potential::HalfAbs => write!(f, "HalfAbs"),
            Potential::QuadraticRadial(mu) => write!(f, "QuadraticRadial({mu})"),
            Potential::Custom(_) => write!(f, "Custom"),
        }
    }
}

fn norm(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum::<f64>().sqrt()
}

impl Potential {
    /// Build a potential from a config-file kind name and parameter.
    pub fn from_kind(kind: &str, param: Option<f64>) -> Result<Potential> {
        let need = |p: Option<f64>, name: &str| {
            p.ok_or_else(|| Error::Config(format!("potential kind '{name}' requires a parameter")))
        };
        match kind {
            "abs_scaled" => Ok(Potential::AbsScaled(need(param, kind)?)),
            "exp_pointy" => Ok(Potential::ExpPointy(need(param, kind)?)),
            "quad_linear" => Ok(Potential::QuadLinear),
            "half_abs" => Ok(Potential::HalfAbs),
            "quadratic_radial" => Ok(Potential::QuadraticRadial(need(param, kind)?)),
            other => Err(Error::Config(format!("unknown potential kind '{other}'"))),
        }
    }

    /// The lambda-convexity constant: `W(x) - (lambda/2) |x|^2` is convex.
    pub fn lambda(&self) -> f64 {
        match self {
            Potential::AbsScaled(_) | Potential::QuadLinear | Potential::HalfAbs => 0.0,
            Potential::ExpPointy(a) => -a * a,
            Potential::QuadraticRadial(mu) => *mu,
            Potential::Custom(c) => c.lambda,
        }
    }

    /// The global gradient bound `w_inf`, or `None` when the gradient is
    /// unbounded (quadratic growth).
    pub fn w_inf(&self) -> Option<f64> {
        match self {
            Potential::AbsScaled(c) => Some(c.abs()),
            Potential::ExpPointy(a) => Some(a.abs()),
            Potential::QuadLinear => Some(4.0),
            Potential::HalfAbs => Some(0.5),
            Potential::QuadraticRadial(_) => None,
            Potential::Custom(c) => c.w_inf,
        }
    }

    pub fn radial(&self) -> bool {
        match self {
            Potential::Custom(c) => c.radial,
            Potential::QuadLinear => false,
            _ => true,
        }
    }

    /// `W(x)`.
    pub fn value(&self, x: &[f64]) -> f64 {
        match self {
            Potential::AbsScaled(c) => c * norm(x),
            Potential::ExpPointy(a) => 1.0 - (-a * norm(x)).exp(),
            Potential::QuadLinear => {
                debug_assert_eq!(x.len(), 1, "quad_linear is one-dimensional");
                let r = x[0].abs();
                if r <= 1.0 {
                    2.0 * r * r
                } else {
                    4.0 * r - 2.0
                }
            }
            Potential::HalfAbs => 0.5 * norm(x),
            Potential::QuadraticRadial(mu) => 0.5 * mu * x.iter().map(|v| v * v).sum::<f64>(),
            Potential::Custom(c) => (c.value)(x),
        }
    }

    /// The hatted gradient: `grad W(x)` for `x != 0`, the zero vector at the
    /// origin (exact component-wise zero test).
    pub fn grad_hat(&self, x: &[f64], out: &mut [f64]) {
        debug_assert_eq!(x.len(), out.len());
        if x.iter().all(|&v| v == 0.0) {
            out.fill(0.0);
            return;
        }
        match self {
            Potential::AbsScaled(c) => {
                let r = norm(x);
                for (o, &v) in out.iter_mut().zip(x) {
                    *o = c * v / r;
                }
            }
            Potential::ExpPointy(a) => {
                let r = norm(x);
                let m = a * (-a * r).exp() / r;
                for (o, &v) in out.iter_mut().zip(x) {
                    *o = m * v;
                }
            }
            Potential::QuadLinear => {
                debug_assert_eq!(x.len(), 1, "quad_linear is one-dimensional");
                let v = x[0];
                out[0] = if v.abs() <= 1.0 { 4.0 * v } else { 4.0 * v.signum() };
            }
            Potential::HalfAbs => {
                let r = norm(x);
                for (o, &v) in out.iter_mut().zip(x) {
                    *o = 0.5 * v / r;
                }
            }
            Potential::QuadraticRadial(mu) => {
                for (o, &v) in out.iter_mut().zip(x) {
                    *o = mu * v;
                }
            }
            Potential::Custom(c) => (c.grad)(x, out),
        }
    }

    /// Convenience allocating form of [`grad_hat`](Self::grad_hat).
    pub fn grad_hat_vec(&self, x: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; x.len()];
        self.grad_hat(x, &mut out);
        out
    }

    /// Supremum of `|grad W|` over the punctured ball `B_inf(0, radius)` in
    /// dimension `dim`, in closed form for the built-in kinds.
    pub fn local_lipschitz(&self, radius: f64, dim: usize) -> Result<f64> {
        assert!(radius > 0.0, "radius must be positive");
        match self {
            Potential::AbsScaled(c) => Ok(c.abs()),
            Potential::ExpPointy(a) => Ok(a.abs()),
            Potential::HalfAbs => Ok(0.5),
            Potential::QuadLinear => Ok(4.0 * radius.min(1.0)),
            // |grad W| = mu |x|; the sup over the inf-ball is attained at a corner.
            Potential::QuadraticRadial(mu) => Ok(mu.abs() * radius * (dim as f64).sqrt()),
            Potential::Custom(c) => c.w_inf.ok_or(Error::UnboundedGradient),
        }
    }
}

/// Interaction energy of an atomic measure: the double sum
/// `sum_i sum_j m_i m_j W(x_i - x_j)`, without the 1/2 prefactor.
pub fn energy(atoms: &[(Vec<f64>, f64)], p: &Potential) -> f64 {
    if atoms.is_empty() {
        return 0.0;
    }
    let d = atoms[0].0.len();
    let mut diff = vec![0.0; d];
    let mut total = 0.0;
    for (xi, mi) in atoms {
        for (xj, mj) in atoms {
            for k in 0..d {
                diff[k] = xi[k] - xj[k];
            }
            total += mi * mj * p.value(&diff);
        }
    }
    total
}
