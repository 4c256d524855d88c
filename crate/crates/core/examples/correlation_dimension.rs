//! Correlation dimension of the Lorenz attractor.
//!
//! ```not_rust
//! cargo run --release --example correlation_dimension
//! ```

use isl::dynamics::{self, FlowSystem};
use isl::geometry::{self, PointCloud};

fn main() -> isl::error::Result<()> {
    let sys = FlowSystem::lorenz_canonical();
    let x0 = dynamics::settle(&sys, &[1.0, 1.0, 1.0])?;
    let traj = dynamics::integrate(&sys, &x0, 0.01, 50_000)?;
    let cloud = PointCloud::from_points(&traj.points)?;
    let radii = geometry::relative_radii(&cloud, 1e-3, 0.05, 12);
    let c = geometry::correlation_integral(&cloud, &radii)?;
    for (r, c) in radii.iter().zip(&c) {
        println!("r = {r:>8.4}  C(r) = {c:.3e}");
    }
    let est = geometry::correlation_dimension(&cloud, &radii)?;
    println!("D2 = {:.3} (reliable: {})", est.value, est.reliable);
    Ok(())
}
