//! One upwind step on the three-atom configuration (1-p at the origin, p/2
//! on each axis neighbor, W = |x|) increases the interaction energy. The
//! increase is c dt + O(dt^2) with c = (sqrt(2) - 1) p^2 (2p - 1), and
//! Richardson extrapolation over halved steps recovers c.

use aggsim::experiment::counterexample;
use aggsim::potential::{energy, Potential};

fn main() -> aggsim::Result<()> {
    let p = 0.75;
    let result = counterexample(p, &[1e-3, 5e-4, 2.5e-4])?;

    let m0 = aggsim::experiment::counterexample_measure(p)?;
    println!("initial energy: {:.12}", energy(&m0.atoms(), &Potential::AbsScaled(1.0)));
    println!("{:>12} {:>18}", "dt", "energy increase");
    for (dt, inc) in &result.increases {
        println!("{:>12.3e} {:>18.12e}", dt, inc);
    }
    println!("extrapolated dt-coefficient: {:.12}", result.coefficient);
    println!("closed-form target:          {:.12}", result.target);
    println!(
        "relative error: {:.2e}",
        (result.coefficient - result.target).abs() / result.target
    );
    Ok(())
}
