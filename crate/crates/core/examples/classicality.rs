//! Window averaging pulls a chaotic signal toward Gaussian moments.
//!
//! ```not_rust
//! cargo run --release --example classicality
//! ```

use isl::dynamics::{self, FlowSystem};
use isl::geometry::{self, TimeSeries};

fn main() -> isl::error::Result<()> {
    let sys = FlowSystem::lorenz_canonical();
    let x0 = dynamics::settle(&sys, &[1.0, 1.0, 1.0])?;
    let traj = dynamics::integrate(&sys, &x0, 0.01, 200_000)?;
    let series = TimeSeries::new(traj.dt, traj.points.iter().map(|p| p[0]).collect())?;
    let raw = geometry::moments(&series.values);
    println!("raw x:        skew {:+.3}  excess kurtosis {:+.3}", raw.skewness, raw.excess_kurtosis);
    for window in [10, 100, 1000] {
        let m = geometry::time_average_distribution(&series, window)?;
        println!(
            "window {window:>5}: skew {:+.3}  excess kurtosis {:+.3}  ({} windows)",
            m.skewness, m.excess_kurtosis, m.n_windows
        );
    }
    Ok(())
}
