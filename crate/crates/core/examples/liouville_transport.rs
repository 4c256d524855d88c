//! Transport a density under a rotation and under the Lorenz flow.
//!
//! ```not_rust
//! cargo run --release --example liouville_transport
//! ```

use isl::dynamics::{self, FlowSystem};
use isl::geometry::BoundingBox;
use isl::liouville::{self, DensityField, Grid, CFL_MAX};

fn main() -> isl::error::Result<()> {
    let sys = FlowSystem::rigid_rotation();
    let grid = Grid::cube(2, 96, -4.0, 4.0)?;
    let rho = DensityField::gaussian(grid.clone(), &[1.5, 0.0], 0.3)?;
    let dt = CFL_MAX / liouville::courant_number(&sys, &grid, 1.0);
    let steps = (std::f64::consts::FRAC_PI_2 / dt).ceil() as usize;
    let out = liouville::evolve_density(&sys, &rho, std::f64::consts::FRAC_PI_2 / steps as f64, steps)?;
    println!("quarter turn in {steps} steps");
    println!("  centre of mass {:?} -> {:?}", rho.center_of_mass(), out.center_of_mass());
    println!("  mass {:.15} (leaked {:.2e})", liouville::total_mass(&out), out.leaked_mass());
    println!("  peak {:.3} -> {:.3}", rho.max_value(), out.max_value());

    // too large a step is refused with the admissible one
    if let Err(e) = liouville::evolve_density(&sys, &rho, 10.0 * dt, 1) {
        println!("  dt = {:.4}: {e}", 10.0 * dt);
    }

    let lorenz = FlowSystem::lorenz_canonical();
    let c = dynamics::settle(&lorenz, &[1.0, 1.0, 1.0])?;
    let h = 5e-4;
    let cube = BoundingBox::new(c.iter().map(|x| x - h).collect(), c.iter().map(|x| x + h).collect())?;
    for t in [0.1, 0.25, 0.5] {
        let v = liouville::comoving_volume(&lorenz, &cube, t, 1e-4)?;
        println!("Lorenz V(t)/V(0) at t = {t}: {v:.5} (exp(div t) = {:.5})", (-41.0 / 3.0 * t).exp());
    }
    Ok(())
}
