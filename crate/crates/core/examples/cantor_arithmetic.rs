//! Finite-precision ternary arithmetic and the exceptional set.
//!
//! ```not_rust
//! cargo run --example cantor_arithmetic
//! ```

use isl::cantor::{self, TernaryFraction};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn main() -> isl::error::Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let x = cantor::random_exceptional(12, &mut rng)?;
    let y = cantor::random_normal(12, &mut rng)?;
    println!("x     = {x}  ({:.6})  exceptional: {}", x.value(), x.is_exceptional());
    println!("y     = {y}  ({:.6})  exceptional: {}", y.value(), y.is_exceptional());
    println!("x + y = {}", cantor::add_mod1(&x, &y)?);
    println!("x * y = {}", cantor::multiply_mod1(&x, &y)?);

    let third = TernaryFraction::new(vec![1, 0, 0, 0])?;
    println!("1/3   = {third} -> exceptional: {}", third.is_exceptional());

    // small perturbations almost always leave the set
    for depth in [1, 2, 4, 8] {
        let r = cantor::perturbation_experiment(depth, 20_000, 7)?;
        println!("perturbed at digit {depth}: {:.4} stay exceptional", r.exceptional_fraction);
    }
    Ok(())
}
