//! Drive the experiment runner in-process and check the results.
//!
//! Equivalent to `isl qstrings --verify --out DIR` followed by
//! `isl report DIR/manifest.json`.
//!
//! ```not_rust
//! cargo run --example run_experiment -- /tmp/isl-demo
//! ```

fn main() {
    let dir = std::env::args().nth(1).unwrap_or_else(|| "isl-out/demo".into());
    let code = isl::cli::run(["isl", "qstrings", "--verify", "--seed", "1", "--out", &dir]);
    println!("run exited with {code}");
    let manifest = format!("{dir}/manifest.json");
    let code = isl::cli::run(["isl", "report", &manifest]);
    std::process::exit(code);
}
