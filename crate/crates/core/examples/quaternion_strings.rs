//! Quaternion units acting on bit strings.
//!
//! ```not_rust
//! cargo run --example quaternion_strings -- ABBA
//! ```

use isl::qstrings::{self, BitString, PauliAxis, StringOperator};

fn main() -> isl::error::Result<()> {
    let s: BitString = std::env::args().nth(1).unwrap_or_else(|| "AABA".into()).parse()?;
    println!("s        = {s}");
    println!("-s       = {}", qstrings::negate(&s));
    println!("i s      = {}", qstrings::apply_i(&s));
    for k in 1..=3 {
        println!("e{k} s     = {}", qstrings::apply_e(k, &s)?);
    }
    println!("sigma_z s = {}", qstrings::pauli(PauliAxis::Z).apply(&s));
    let orbit: Vec<String> = qstrings::phase_cycle(&s, 4).iter().map(|t| t.to_string()).collect();
    println!("e1 orbit  = {}", orbit.join(" -> "));

    let report = qstrings::verify_q8()?;
    println!("group order {} with centre {:?}", report.order, report.center);
    let mut table = Vec::new();
    report.write_table_csv(&mut table)?;
    print!("{}", String::from_utf8_lossy(&table));

    let ij = StringOperator::e1().after(&StringOperator::e2())?;
    println!("e1 after e2 is e3: {}", ij.apply(&s) == StringOperator::e3().apply(&s));
    Ok(())
}
