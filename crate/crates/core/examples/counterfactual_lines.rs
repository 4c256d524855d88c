//! Lines of normal gradient rarely meet the Cantor product set again.
//!
//! ```not_rust
//! cargo run --release --example counterfactual_lines
//! ```

use isl::cantor;

fn main() -> isl::error::Result<()> {
    for depth in [4, 6, 8, 10] {
        let r = cantor::line_intersection_experiment(depth, 500, 500, 42)?;
        println!(
            "depth {depth:>2}: intersection fraction {:.4}, gradients with no hit {:.3}",
            r.intersection_fraction, r.empty_set_rate
        );
    }
    let axis = cantor::axis_direction_counterexample(10, 500, 42)?;
    println!("axis direction: intersection fraction {}", axis.intersection_fraction);
    Ok(())
}
