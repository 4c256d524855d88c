//! Lyapunov spectrum of the Lorenz flow by tangent propagation.
//!
//! The sum of the exponents should match the constant divergence
//! `-(sigma + 1 + beta)`.
//!
//! ```not_rust
//! cargo run --release --example lyapunov_spectrum -- 500000
//! ```

use isl::dynamics::{self, FlowSystem};

fn main() -> isl::error::Result<()> {
    let steps: usize = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(200_000);
    let sys = FlowSystem::lorenz_canonical();
    let spectrum = dynamics::lyapunov_spectrum(&sys, &[1.0, 1.0, 1.0], 0.01, steps, 10_000)?;
    for (k, l) in spectrum.exponents.iter().enumerate() {
        println!("lambda_{} = {:+.4}", k + 1, l);
    }
    println!("sum       = {:+.4}", spectrum.exponents.iter().sum::<f64>());
    println!("<div f>   = {:+.4}", spectrum.mean_divergence);
    Ok(())
}
