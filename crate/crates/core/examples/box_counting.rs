//! Box-counting dimension of a few sets with known answers.
//!
//! ```not_rust
//! cargo run --release --example box_counting
//! ```

use isl::cantor;
use isl::geometry::{self, PointCloud};

fn main() -> isl::error::Result<()> {
    let n = 10_000;
    let segment = PointCloud::from_scalars(&(0..n).map(|i| i as f64 / (n - 1) as f64).collect::<Vec<_>>())?;
    let cases = [
        ("middle-thirds Cantor set", cantor::cantor_cloud(10), 2f64.powi(-12), 0.25, 11, 2f64.ln() / 3f64.ln()),
        ("Cantor dust", cantor::cantor_dust(7), 2f64.powi(-10), 0.25, 9, 4f64.ln() / 3f64.ln()),
        ("unit segment", segment, 1e-3, 1e-1, 8, 1.0),
    ];
    for (name, cloud, lo, hi, k, exact) in cases {
        let est = geometry::box_counting_dimension(&cloud, lo, hi, k)?;
        println!("{name:<26} D = {:.4}  (exact {exact:.4}, rms {:.3})", est.value, est.fit_residual);
    }
    Ok(())
}
