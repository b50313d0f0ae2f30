//! With W(x) = |x|/2 the 1D scheme, rewritten in the primitive variable
//! u_i = 1/2 - sum_{k <= i} rho_k, is an upwind discretization of Burgers'
//! equation. Both updates are iterated side by side; the trajectories agree
//! to rounding error.

use aggsim::experiment::{burgers_check, ExperimentConfig};

const CONFIG: &str = "\
scheme = upwind
domain.min = -1.25
domain.max = 1.25
grid.n = 400
time.cfl_ratio = 0.45
time.t_final = 0.5
potential.kind = half_abs
initial.kind = gaussian_pair
";

fn main() -> aggsim::Result<()> {
    let cfg = ExperimentConfig::parse(CONFIG)?;
    let result = burgers_check(&cfg)?;
    println!(
        "{} steps, max |u_scalar - u_from_measure| = {:.3e}",
        result.steps, result.max_deviation
    );
    Ok(())
}
