//! Define a flow from a closure and reuse the generic tooling on it.
//!
//! ```not_rust
//! cargo run --release --example custom_flow
//! ```

use isl::dynamics::{self, FlowSystem};
use isl::symbolic::{self, Partition};

fn main() -> isl::error::Result<()> {
    // Duffing oscillator with light damping, written as a first-order system
    let duffing = FlowSystem::new("duffing", 2, |x, dx| {
        dx[0] = x[1];
        dx[1] = x[0] - x[0].powi(3) - 0.05 * x[1];
    });
    let traj = dynamics::integrate(&duffing, &[0.1, 1.2], 0.01, 20_000)?;
    let spectrum = dynamics::lyapunov_spectrum(&duffing, &[0.1, 1.2], 0.01, 20_000, 0)?;
    println!("end state {:?}", traj.points.last().unwrap());
    println!("exponents {:?}", spectrum.exponents);
    let wells = Partition::coordinate(0, 0.0);
    println!("wells {}", symbolic::label_trajectory(&wells, &traj, 500)?);
    Ok(())
}
