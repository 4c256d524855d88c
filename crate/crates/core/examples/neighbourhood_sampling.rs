//! Outcome probabilities from shrinking balls around two Lorenz states.
//!
//! Near the lobe boundary both labels keep appearing at every radius. Deep in
//! a lobe the minority fraction collapses.
//!
//! ```not_rust
//! cargo run --release --example neighbourhood_sampling
//! ```

use isl::dynamics::FlowSystem;
use isl::symbolic::{self, Partition};

fn main() -> isl::error::Result<()> {
    let sys = FlowSystem::lorenz_canonical();
    let lobes = Partition::lorenz_lobes();
    let radii = [1e-1, 1e-2, 1e-3, 1e-4];
    for (name, p, horizon) in [("boundary", [0.0, 0.0, 20.0], 2.0), ("interior", [-8.0, -8.0, 27.0], 0.5)] {
        println!("{name} {p:?}, horizon {horizon}");
        for pt in symbolic::intertwining_profile(&sys, &lobes, &p, &radii, 1000, horizon, 0)? {
            println!("  r = {:.0e}  p_A = {:.3}  minority = {:.3}", pt.radius, pt.p_a, pt.minority_fraction);
        }
    }

    let x0 = isl::dynamics::settle(&sys, &[1.0, 1.0, 1.0])?;
    let traj = isl::dynamics::integrate(&sys, &x0, 0.005, 4000)?;
    let s = symbolic::label_trajectory(&lobes, &traj, 100)?;
    println!("itinerary {s}");
    println!("shifted   {}", symbolic::shift(&s)?);
    Ok(())
}
