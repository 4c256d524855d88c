//! Fixed-depth base-3 fractions and the Cantor-set sparseness experiments.
//!
//! A [`TernaryFraction`] of depth `D` stands for the integer numerator
//! `F = sum d_i 3^(D-i)` over `3^D`. Sums and products are carried out digit
//! by digit in exact integer arithmetic; truncation to `D` digits is the only
//! approximation.

use std::fmt;
use std::io::Write;

use rand::Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{invalid, Result};
use crate::geometry::PointCloud;
use crate::io::{write_echo, Echo};
use crate::seed::SeedStream;

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct TernaryFraction {
    digits: Vec<u8>,
}

impl TernaryFraction {
    /// Most significant digit first.
    pub fn new(digits: Vec<u8>) -> Result<Self> {
        if digits.is_empty() {
            return Err(invalid("ternary fraction needs depth >= 1"));
        }
        if let Some(d) = digits.iter().find(|d| **d > 2) {
            return Err(invalid(format!("digit {d} is not a base-3 digit")));
        }
        Ok(Self { digits })
    }

    pub fn zero(depth: usize) -> Self {
        Self { digits: vec![0; depth.max(1)] }
    }

    /// `1 - 3^-depth`: every digit 2.
    pub fn almost_one(depth: usize) -> Self {
        Self { digits: vec![2; depth.max(1)] }
    }

    /// Truncated base-3 expansion of `num / den` modulo 1.
    pub fn from_ratio(num: u64, den: u64, depth: usize) -> Result<Self> {
        if den == 0 || depth == 0 {
            return Err(invalid("from_ratio needs den > 0 and depth >= 1"));
        }
        let den = den as u128;
        let mut rem = num as u128 % den;
        let digits = (0..depth)
            .map(|_| {
                rem *= 3;
                let d = (rem / den) as u8;
                rem %= den;
                d
            })
            .collect();
        Ok(Self { digits })
    }

    pub fn digits(&self) -> &[u8] {
        &self.digits
    }

    pub fn depth(&self) -> usize {
        self.digits.len()
    }

    pub fn value(&self) -> f64 {
        let mut v = 0.0;
        for d in self.digits.iter().rev() {
            v = (v + *d as f64) / 3.0;
        }
        v
    }

    pub fn is_zero(&self) -> bool {
        self.digits.iter().all(|d| *d == 0)
    }

    pub fn is_exceptional(&self) -> bool {
        is_exceptional(self)
    }
}

impl fmt::Display for TernaryFraction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("0.")?;
        for d in &self.digits {
            write!(f, "{d}")?;
        }
        Ok(())
    }
}

/// True iff no digit equals 1 (a depth-limited Cantor-set point).
pub fn is_exceptional(f: &TernaryFraction) -> bool {
    !f.digits.contains(&1)
}

/// Digits iid uniform over {0, 2}.
pub fn random_exceptional<R: Rng + ?Sized>(depth: usize, rng: &mut R) -> Result<TernaryFraction> {
    if depth < 1 {
        return Err(invalid("depth must be >= 1"));
    }
    Ok(TernaryFraction {
        digits: (0..depth).map(|_| if rng.random::<bool>() { 2 } else { 0 }).collect(),
    })
}

/// Digits iid uniform over {0, 1, 2}.
pub fn random_normal<R: Rng + ?Sized>(depth: usize, rng: &mut R) -> Result<TernaryFraction> {
    if depth < 1 {
        return Err(invalid("depth must be >= 1"));
    }
    Ok(TernaryFraction {
        digits: (0..depth).map(|_| rng.random_range(0..3u8)).collect(),
    })
}

fn same_depth(f: &TernaryFraction, g: &TernaryFraction) -> Result<()> {
    if f.depth() != g.depth() {
        return Err(invalid(format!(
            "depth mismatch: {} vs {}",
            f.depth(),
            g.depth()
        )));
    }
    Ok(())
}

/// Exact sum modulo 1, carrying from the least significant digit.
pub fn add_mod1(f: &TernaryFraction, g: &TernaryFraction) -> Result<TernaryFraction> {
    same_depth(f, g)?;
    let mut digits = vec![0u8; f.depth()];
    let mut carry = 0u8;
    for i in (0..f.depth()).rev() {
        let s = f.digits[i] + g.digits[i] + carry;
        digits[i] = s % 3;
        carry = s / 3;
    }
    Ok(TernaryFraction { digits })
}

/// Exact product, truncated (not rounded) to the common depth.
pub fn multiply_mod1(f: &TernaryFraction, g: &TernaryFraction) -> Result<TernaryFraction> {
    same_depth(f, g)?;
    let depth = f.depth();
    // little-endian numerators
    let a: Vec<u32> = f.digits.iter().rev().map(|&d| d as u32).collect();
    let b: Vec<u32> = g.digits.iter().rev().map(|&d| d as u32).collect();
    let mut prod = vec![0u32; 2 * depth + 1];
    for (i, &x) in a.iter().enumerate() {
        if x == 0 {
            continue;
        }
        for (j, &y) in b.iter().enumerate() {
            prod[i + j] += x * y;
        }
    }
    let mut carry = 0u32;
    for p in prod.iter_mut() {
        let s = *p + carry;
        *p = s % 3;
        carry = s / 3;
    }
    debug_assert_eq!(carry, 0);
    // F G / 3^(2D) keeps its top D digits after truncation.
    let digits = (depth..2 * depth).rev().map(|k| prod[k] as u8).collect();
    Ok(TernaryFraction { digits })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PerturbationResult {
    pub depth: usize,
    pub n_trials: usize,
    pub exceptional_fraction: f64,
    pub seed: u64,
}

/// Fraction of trials in which exceptional + normal (mod 1) stays exceptional.
pub fn perturbation_experiment(depth: usize, n_trials: usize, seed: u64) -> Result<PerturbationResult> {
    if n_trials == 0 {
        return Err(invalid("n_trials must be >= 1"));
    }
    if depth < 1 {
        return Err(invalid("depth must be >= 1"));
    }
    let stream = SeedStream::new(seed, "cantor/perturbation").child(&depth.to_string());
    let hits = (0..n_trials as u64)
        .into_par_iter()
        .map(|t| -> Result<usize> {
            let mut rng = stream.trial(t);
            let c = random_exceptional(depth, &mut rng)?;
            let r = random_normal(depth, &mut rng)?;
            Ok(add_mod1(&c, &r)?.is_exceptional() as usize)
        })
        .sum::<Result<usize>>()?;
    Ok(PerturbationResult {
        depth,
        n_trials,
        exceptional_fraction: hits as f64 / n_trials as f64,
        seed,
    })
}

/// Hits recorded for one sampled gradient.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GradientDetail {
    pub gradient: usize,
    pub digits: String,
    pub hits: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CounterfactualResult {
    pub depth: usize,
    pub n_gradients: usize,
    pub n_points: usize,
    pub intersection_fraction: f64,
    pub empty_set_rate: f64,
    pub seed: u64,
    #[serde(skip)]
    pub details: Vec<GradientDetail>,
}

impl CounterfactualResult {
    fn from_details(depth: usize, n_points: usize, seed: u64, details: Vec<GradientDetail>) -> Self {
        let n_gradients = details.len();
        let hits: usize = details.iter().map(|d| d.hits).sum();
        let empty = details.iter().filter(|d| d.hits == 0).count();
        Self {
            depth,
            n_gradients,
            n_points,
            intersection_fraction: hits as f64 / (n_gradients * n_points) as f64,
            empty_set_rate: empty as f64 / n_gradients as f64,
            seed,
            details,
        }
    }

    /// Per-gradient CSV: `gradient,digits,hits,points`.
    pub fn write_details_csv<W: Write>(&self, w: &mut W, echo: Option<&Echo>) -> Result<()> {
        if let Some(echo) = echo {
            write_echo(w, echo)?;
        }
        writeln!(w, "gradient,digits,hits,points")?;
        for d in &self.details {
            writeln!(w, "{},{},{},{}", d.gradient, d.digits, d.hits, self.n_points)?;
        }
        Ok(())
    }
}

fn nonzero_exceptional<R: Rng + ?Sized>(depth: usize, rng: &mut R) -> Result<TernaryFraction> {
    loop {
        let x = random_exceptional(depth, rng)?;
        if !x.is_zero() {
            return Ok(x);
        }
    }
}

fn check_counts(depth: usize, n_gradients: usize, n_points: usize) -> Result<()> {
    if depth < 1 {
        return Err(invalid("depth must be >= 1"));
    }
    if n_gradients == 0 || n_points == 0 {
        return Err(invalid("n_gradients and n_points must be >= 1"));
    }
    Ok(())
}

/// For each normal gradient `k`, counts non-zero exceptional `x` whose image
/// `k x` is again exceptional, i.e. lines through the origin that re-enter
/// the depth-limited Cantor product set.
pub fn line_intersection_experiment(
    depth: usize,
    n_gradients: usize,
    n_points: usize,
    seed: u64,
) -> Result<CounterfactualResult> {
    check_counts(depth, n_gradients, n_points)?;
    let stream = SeedStream::new(seed, "cantor/line_intersection").child(&depth.to_string());
    let details = (0..n_gradients)
        .into_par_iter()
        .map(|g| -> Result<GradientDetail> {
            let mut rng = stream.trial(g as u64);
            let k = random_normal(depth, &mut rng)?;
            let mut hits = 0;
            for _ in 0..n_points {
                let x = nonzero_exceptional(depth, &mut rng)?;
                if multiply_mod1(&k, &x)?.is_exceptional() {
                    hits += 1;
                }
            }
            Ok(GradientDetail {
                gradient: g,
                digits: k.digits.iter().map(|d| char::from(b'0' + d)).collect(),
                hits,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(CounterfactualResult::from_details(depth, n_points, seed, details))
}

/// The line along the x-axis (`y = 0`) meets the set at every exceptional `x`.
pub fn axis_direction_counterexample(depth: usize, n_points: usize, seed: u64) -> Result<CounterfactualResult> {
    check_counts(depth, 1, n_points)?;
    let mut rng = SeedStream::new(seed, "cantor/axis").rng();
    let axis = TernaryFraction::zero(depth);
    let mut hits = 0;
    for _ in 0..n_points {
        let x = nonzero_exceptional(depth, &mut rng)?;
        if multiply_mod1(&axis, &x)?.is_exceptional() {
            hits += 1;
        }
    }
    let detail = GradientDetail {
        gradient: 0,
        digits: "0".repeat(depth),
        hits,
    };
    Ok(CounterfactualResult::from_details(depth, n_points, seed, vec![detail]))
}

/// Both endpoints of every level-`depth` interval of the middle-third set.
pub fn cantor_endpoints(depth: usize) -> Vec<f64> {
    let scale = 3f64.powi(depth as i32);
    let mut lefts: Vec<u64> = vec![0];
    for level in 0..depth {
        let step = 2 * 3u64.pow((depth - level - 1) as u32);
        lefts = lefts.iter().flat_map(|&l| [l, l + step]).collect();
    }
    let mut ends: Vec<u64> = lefts.iter().flat_map(|&l| [l, l + 1]).collect();
    ends.sort_unstable();
    ends.dedup();
    ends.into_iter().map(|e| e as f64 / scale).collect()
}

pub fn cantor_cloud(depth: usize) -> PointCloud {
    PointCloud::from_scalars(&cantor_endpoints(depth)).expect("finite endpoints")
}

/// Planar Cantor dust: the product of the level-`depth` endpoint set with itself.
pub fn cantor_dust(depth: usize) -> PointCloud {
    let e = cantor_endpoints(depth);
    let coords = e.iter().flat_map(|&x| e.iter().flat_map(move |&y| [x, y])).collect();
    PointCloud::new(2, coords).expect("finite endpoints")
}
