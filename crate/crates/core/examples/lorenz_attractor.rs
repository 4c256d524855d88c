//! Integrate the Lorenz and Rössler flows and print a few samples.
//!
//! ```not_rust
//! cargo run --release --example lorenz_attractor
//! ```

use isl::dynamics::{self, FlowSystem};

fn main() -> isl::error::Result<()> {
    for sys in [FlowSystem::lorenz_canonical(), FlowSystem::rossler_canonical()] {
        let x0 = dynamics::settle(&sys, &[1.0, 1.0, 1.0])?;
        let traj = dynamics::integrate(&sys, &x0, sys.default_dt(), 5000)?;
        println!("{} (dt = {})", sys.name(), traj.dt);
        for p in traj.points.iter().step_by(1000) {
            println!("  {:>9.4} {:>9.4} {:>9.4}", p[0], p[1], p[2]);
        }
        // phase-space contraction rate is constant for Lorenz
        println!("  divergence at start: {:.4}", dynamics::divergence(&sys, &x0));
    }
    Ok(())
}
