//! The node-based scheme on a structured triangulation of the unit square:
//! a smooth bump under W(x) = |x| contracts toward its center of mass. The
//! CFL step is a fraction of hbar / w_inf, where hbar is the smallest
//! triangle height of the mesh.

use std::sync::Arc;

use aggsim::potential::Potential;
use aggsim::simplicial::{tri_run, NodeMeasure, TriangularMesh};

fn main() -> aggsim::Result<()> {
    let mesh = Arc::new(TriangularMesh::structured(0.0, 0.0, 0.05, 20, 20)?);
    println!(
        "mesh: {} nodes, {} triangles, hbar = {:.5e}",
        mesh.nodes().len(),
        mesh.triangles().len(),
        mesh.hbar()
    );

    let density =
        |x: &[f64]| (-30.0 * ((x[0] - 0.45).powi(2) + (x[1] - 0.55).powi(2))).exp();
    let m0 = NodeMeasure::from_density(mesh.clone(), &density)?;

    let p = Potential::AbsScaled(1.0);
    let dt = 0.9 * mesh.hbar() / 1.0; // w_inf = 1
    let mut final_spread = 0.0;
    let record = tri_run(m0, &p, dt, 1.0, |n, t, m| {
        final_spread = m.spread();
        if n % 8 == 0 {
            println!(
                "n = {:>3}, t = {:.4}: com = ({:.6}, {:.6}), spread = {:.5e}",
                n,
                t,
                m.center_of_mass()[0],
                m.center_of_mass()[1],
                m.spread()
            );
        }
    })?;
    let last = record.rows.last().unwrap();
    println!("final: t = {:.4}, spread about the com = {:.3e}", last.t, final_spread);
    Ok(())
}
