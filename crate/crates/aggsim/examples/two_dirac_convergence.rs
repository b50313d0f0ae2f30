//! Convergence study on the two-Dirac problem with the piecewise
//! quadratic/linear potential, where the exact solution is the pair of
//! atoms at -+ 0.25 e^{-4t}. The fitted W2 rate should sit near 1/2.

use aggsim::experiment::{convergence_study, ExperimentConfig};

const CONFIG: &str = "\
scheme = upwind
domain.min = -0.5
domain.max = 0.5
grid.n = 100
time.cfl_ratio = 0.45
time.t_final = 0.5
potential.kind = quad_linear
initial.kind = atoms
initial.atoms = -0.25:0.5; 0.25:0.5
reference = two_dirac_quadlinear
";

fn main() -> aggsim::Result<()> {
    let base = ExperimentConfig::parse(CONFIG)?;
    let study = convergence_study(&base, &[50, 100, 200, 400])?;
    println!("{:>7} {:>12} {:>12} {:>12} {:>8}", "n", "dx", "dt", "e_max_w2", "slope");
    for row in &study.rows {
        println!(
            "{:>7} {:>12.5e} {:>12.5e} {:>12.5e} {:>8}",
            row.n_cells,
            row.dx,
            row.dt,
            row.e_max_w2,
            if row.slope_running.is_nan() {
                "-".to_string()
            } else {
                format!("{:.4}", row.slope_running)
            }
        );
    }
    println!(
        "fitted rate: slope = {:.6}, log-space residual = {:.2e}",
        study.fit.slope, study.fit.residual
    );
    Ok(())
}
