//! Reconstruct the Lorenz attractor from its x coordinate alone.
//!
//! The delay comes from the autocorrelation rule. Compare the correlation
//! dimension of the reconstruction with the full state-space cloud.
//!
//! ```not_rust
//! cargo run --release --example delay_embedding
//! ```

use isl::dynamics::{self, FlowSystem};
use isl::geometry::{self, PointCloud, TimeSeries};

fn main() -> isl::error::Result<()> {
    let sys = FlowSystem::lorenz_canonical();
    let x0 = dynamics::settle(&sys, &[1.0, 1.0, 1.0])?;
    let traj = dynamics::integrate(&sys, &x0, 0.01, 40_000)?;
    let full = PointCloud::from_points(&traj.points)?;
    let series = TimeSeries::new(traj.dt, traj.points.iter().map(|p| p[0]).collect())?;

    let sel = geometry::select_delay(&series)?;
    println!("tau = {} samples ({:.2} time units, fallback {})", sel.tau, sel.tau as f64 * series.dt, sel.fallback);
    for tau in [sel.tau, 10, 20] {
        let emb = geometry::delay_embed(&series, tau, 3)?;
        let d = geometry::correlation_dimension(&emb, &geometry::relative_radii(&emb, 1e-3, 0.05, 12))?;
        println!("  tau = {tau:>4}: embedded D2 = {:.3}", d.value);
    }
    let d = geometry::correlation_dimension(&full, &geometry::relative_radii(&full, 1e-3, 0.05, 12))?;
    println!("full-state D2 = {:.3}", d.value);
    Ok(())
}
