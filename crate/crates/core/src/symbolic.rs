//! Bivalent partitions, symbol strings and neighbourhood sample spaces.

use std::fmt;
use std::io::Write;
use std::str::FromStr;
use std::sync::Arc;

use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dynamics::{advance, integrate, local_stability, FlowSystem, Trajectory};
use crate::error::{invalid, Error, Result};
use crate::io::{write_echo, Echo};
use crate::seed::SeedStream;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Symbol {
    A,
    B,
}

impl Symbol {
    pub fn complement(self) -> Self {
        match self {
            Symbol::A => Symbol::B,
            Symbol::B => Symbol::A,
        }
    }

    pub fn as_char(self) -> char {
        match self {
            Symbol::A => 'A',
            Symbol::B => 'B',
        }
    }

    pub fn from_char(c: char) -> Option<Self> {
        match c {
            'A' | 'a' => Some(Symbol::A),
            'B' | 'b' => Some(Symbol::B),
            _ => None,
        }
    }
}

impl fmt::Display for Symbol {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.as_char())
    }
}

/// Two-set partition of state space given by the sign of a discriminant:
/// `g(x) < 0` is `A`, `g(x) >= 0` is `B` (ties go to `B`).
#[derive(Clone)]
pub struct Partition {
    discriminant: Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>,
    description: String,
}

impl fmt::Debug for Partition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Partition").field("description", &self.description).finish()
    }
}

impl Partition {
    pub fn new(
        description: impl Into<String>,
        discriminant: impl Fn(&[f64]) -> f64 + Send + Sync + 'static,
    ) -> Self {
        Self {
            discriminant: Arc::new(discriminant),
            description: description.into(),
        }
    }

    /// `A` where `x[index] < threshold`, `B` otherwise.
    pub fn coordinate(index: usize, threshold: f64) -> Self {
        Self::new(
            format!("x{index} < {threshold} -> A, else B"),
            move |x| x[index] - threshold,
        )
    }

    /// Lorenz lobes: sign of the first coordinate, `x0 = 0` assigned to `B`.
    pub fn lorenz_lobes() -> Self {
        Self::coordinate(0, 0.0)
    }

    pub fn description(&self) -> &str {
        &self.description
    }

    pub fn boundary_rule(&self) -> &'static str {
        "discriminant = 0 is labelled B"
    }

    fn classify(&self, x: &[f64]) -> Symbol {
        if (self.discriminant)(x) < 0.0 {
            Symbol::A
        } else {
            Symbol::B
        }
    }
}

pub fn label_state(partition: &Partition, x: &[f64]) -> Result<Symbol> {
    if !x.iter().all(|v| v.is_finite()) {
        return Err(invalid("cannot label a non-finite state"));
    }
    Ok(partition.classify(x))
}

/// Symbol sequence with a radix point before `symbols[radix_offset]`.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct SymbolString {
    symbols: Vec<Symbol>,
    radix_offset: usize,
}

impl SymbolString {
    pub fn new(symbols: Vec<Symbol>, radix_offset: usize) -> Result<Self> {
        if symbols.is_empty() {
            return Err(invalid("symbol string must be non-empty"));
        }
        if radix_offset > symbols.len() {
            return Err(invalid("radix offset beyond the string"));
        }
        Ok(Self { symbols, radix_offset })
    }

    pub fn symbols(&self) -> &[Symbol] {
        &self.symbols
    }

    pub fn radix_offset(&self) -> usize {
        self.radix_offset
    }

    pub fn len(&self) -> usize {
        self.symbols.len()
    }

    pub fn is_empty(&self) -> bool {
        self.symbols.is_empty()
    }
}

impl fmt::Display for SymbolString {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, s) in self.symbols.iter().enumerate() {
            if i == self.radix_offset {
                f.write_str(".")?;
            }
            write!(f, "{s}")?;
        }
        if self.radix_offset == self.symbols.len() {
            f.write_str(".")?;
        }
        Ok(())
    }
}

impl FromStr for SymbolString {
    type Err = Error;

    /// Parses strings such as `.AABABB`; without a `.` the radix sits at 0.
    fn from_str(s: &str) -> Result<Self> {
        let mut symbols = Vec::new();
        let mut radix = None;
        for c in s.chars() {
            if c == '.' {
                if radix.replace(symbols.len()).is_some() {
                    return Err(invalid("more than one radix point"));
                }
            } else {
                symbols.push(Symbol::from_char(c).ok_or_else(|| invalid(format!("bad symbol {c:?}")))?);
            }
        }
        Self::new(symbols, radix.unwrap_or(0))
    }
}

/// Labels points `0, stride, 2 stride, ...` of a trajectory.
pub fn label_trajectory(partition: &Partition, traj: &Trajectory, stride: usize) -> Result<SymbolString> {
    if stride == 0 {
        return Err(invalid("stride must be >= 1"));
    }
    if traj.is_empty() {
        return Err(invalid("cannot label an empty trajectory"));
    }
    let symbols = traj
        .points
        .iter()
        .step_by(stride)
        .map(|p| label_state(partition, p))
        .collect::<Result<Vec<_>>>()?;
    SymbolString::new(symbols, 0)
}

/// One step of symbolic time evolution: the leading symbol is dropped.
pub fn shift(s: &SymbolString) -> Result<SymbolString> {
    if s.len() < 2 {
        return Err(invalid("shift needs at least two symbols"));
    }
    SymbolString::new(s.symbols[1..].to_vec(), s.radix_offset.min(s.len() - 1))
}

/// How a neighbourhood trajectory is turned into an outcome label.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub enum LabelRule {
    /// Partition label of the state at the horizon.
    #[default]
    Endpoint,
    /// Endpoint label, kept only when the leading finite-time rate over the
    /// final `window` steps is negative; other trials count as unresolved.
    QuasiStationary { window: usize },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleOptions {
    /// Integration step; the system default when `None`.
    pub dt: Option<f64>,
    pub rule: LabelRule,
}

impl Default for SampleOptions {
    fn default() -> Self {
        Self { dt: None, rule: LabelRule::Endpoint }
    }
}

/// Labels of trajectory segments started uniformly in a ball around `base_point`.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleSpace {
    pub base_point: Vec<f64>,
    pub radius: f64,
    pub horizon: f64,
    pub n_traj: usize,
    pub seed: u64,
    pub labels: Vec<Symbol>,
    /// Trial index and initial state for every retained label.
    pub trials: Vec<(usize, Vec<f64>)>,
    /// Trials dropped for blow-up or (quasi-stationary rule) no stable outcome.
    pub n_excluded: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct SampleSpaceSummary {
    #[serde(rename = "p_A")]
    pub p_a: f64,
    #[serde(rename = "p_B")]
    pub p_b: f64,
    pub radius: f64,
    pub horizon: f64,
    pub n_traj: usize,
    pub n_excluded: usize,
    pub seed: u64,
}

impl SampleSpace {
    pub fn summary(&self) -> Result<SampleSpaceSummary> {
        let p = outcome_probabilities(self)?;
        Ok(SampleSpaceSummary {
            p_a: p.p_a,
            p_b: p.p_b,
            radius: self.radius,
            horizon: self.horizon,
            n_traj: self.n_traj,
            n_excluded: self.n_excluded,
            seed: self.seed,
        })
    }

    /// CSV `trial,label,x0,...` of the retained trials.
    pub fn write_csv<W: Write>(&self, w: &mut W, echo: Option<&Echo>) -> Result<()> {
        if let Some(echo) = echo {
            write_echo(w, echo)?;
        }
        let dim = self.base_point.len();
        let cols: Vec<String> = (0..dim).map(|i| format!("x{i}")).collect();
        writeln!(w, "trial,label,{}", cols.join(","))?;
        for ((trial, x), label) in self.trials.iter().zip(&self.labels) {
            write!(w, "{trial},{label}")?;
            for v in x {
                write!(w, ",{v}")?;
            }
            writeln!(w)?;
        }
        Ok(())
    }
}

/// Uniform point in the `radius` ball: Gaussian direction, radius `r u^(1/n)`.
pub fn sample_ball<R: Rng + ?Sized>(center: &[f64], radius: f64, rng: &mut R) -> Vec<f64> {
    if radius == 0.0 {
        return center.to_vec();
    }
    let n = center.len();
    let dir: Vec<f64> = loop {
        let g: Vec<f64> = (0..n).map(|_| rng.sample(StandardNormal)).collect();
        let norm = g.iter().map(|v| v * v).sum::<f64>().sqrt();
        if norm > 1e-12 {
            break g.into_iter().map(|v| v / norm).collect();
        }
    };
    let r = radius * rng.random::<f64>().powf(1.0 / n as f64);
    center.iter().zip(dir).map(|(c, d)| c + r * d).collect()
}

pub fn neighborhood_sample_space(
    system: &FlowSystem,
    partition: &Partition,
    p: &[f64],
    radius: f64,
    n_traj: usize,
    horizon: f64,
    seed: u64,
) -> Result<SampleSpace> {
    neighborhood_sample_space_with(system, partition, p, radius, n_traj, horizon, seed, &SampleOptions::default())
}

/// [`neighborhood_sample_space`] with an explicit step and labelling rule.
///
/// Trial `i` draws from its own sub-stream, so the space is identical for
/// any thread count.
#[allow(clippy::too_many_arguments)]
pub fn neighborhood_sample_space_with(
    system: &FlowSystem,
    partition: &Partition,
    p: &[f64],
    radius: f64,
    n_traj: usize,
    horizon: f64,
    seed: u64,
    options: &SampleOptions,
) -> Result<SampleSpace> {
    if !(radius >= 0.0 && radius.is_finite()) {
        return Err(invalid("radius must be finite and >= 0"));
    }
    if n_traj == 0 {
        return Err(invalid("n_traj must be >= 1"));
    }
    if !(horizon > 0.0 && horizon.is_finite()) {
        return Err(invalid("horizon must be positive"));
    }
    if p.len() != system.dim() || !p.iter().all(|v| v.is_finite()) {
        return Err(invalid("base point must be a finite state of the system"));
    }
    let dt = options.dt.unwrap_or(system.default_dt());
    let n_steps = ((horizon / dt).round() as usize).max(1);
    let stream = SeedStream::new(seed, "symbolic/neighborhood");
    let outcomes = (0..n_traj)
        .into_par_iter()
        .map(|i| -> Result<Option<(usize, Vec<f64>, Symbol)>> {
            let x0 = sample_ball(p, radius, &mut stream.trial(i as u64));
            let end = match options.rule {
                LabelRule::Endpoint => match advance(system, &x0, dt, n_steps) {
                    Ok(end) => end,
                    Err(Error::BlowUp { .. }) => return Ok(None),
                    Err(e) => return Err(e),
                },
                LabelRule::QuasiStationary { window } => {
                    let traj = match integrate(system, &x0, dt, n_steps) {
                        Ok(t) => t,
                        Err(Error::BlowUp { .. }) => return Ok(None),
                        Err(e) => return Err(e),
                    };
                    let window = window.min(n_steps);
                    let tail = traj.clone().skip(n_steps - window);
                    let rate = local_stability(system, &tail, window)?[0];
                    if rate >= 0.0 {
                        return Ok(None);
                    }
                    traj.last().expect("non-empty").to_vec()
                }
            };
            let label = label_state(partition, &end)?;
            Ok(Some((i, x0, label)))
        })
        .collect::<Result<Vec<_>>>()?;
    let n_excluded = outcomes.iter().filter(|o| o.is_none()).count();
    let (trials, labels) = outcomes
        .into_iter()
        .flatten()
        .map(|(i, x0, label)| ((i, x0), label))
        .unzip();
    Ok(SampleSpace {
        base_point: p.to_vec(),
        radius,
        horizon,
        n_traj,
        seed,
        labels,
        trials,
        n_excluded,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct OutcomeProbabilities {
    pub p_a: f64,
    pub p_b: f64,
}

impl OutcomeProbabilities {
    pub fn minority(&self) -> f64 {
        self.p_a.min(self.p_b)
    }

    pub fn majority(&self) -> f64 {
        self.p_a.max(self.p_b)
    }
}

/// Counting ratios of A and B labels; the pair sums to exactly one.
pub fn outcome_probabilities(space: &SampleSpace) -> Result<OutcomeProbabilities> {
    let n = space.labels.len();
    if n == 0 {
        return Err(invalid("empty sample space"));
    }
    let n_a = space.labels.iter().filter(|s| **s == Symbol::A).count();
    let n_b = n - n_a;
    // the minority is the rounded ratio, the majority its exact complement
    Ok(if n_a <= n_b {
        let p_a = n_a as f64 / n as f64;
        OutcomeProbabilities { p_a, p_b: 1.0 - p_a }
    } else {
        let p_b = n_b as f64 / n as f64;
        OutcomeProbabilities { p_a: 1.0 - p_b, p_b }
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct IntertwiningPoint {
    pub radius: f64,
    pub p_a: f64,
    pub minority_fraction: f64,
    pub n_labelled: usize,
}

/// Minority-label fraction of neighbourhood sample spaces at each radius.
#[allow(clippy::too_many_arguments)]
pub fn intertwining_profile(
    system: &FlowSystem,
    partition: &Partition,
    p: &[f64],
    radii: &[f64],
    n_traj: usize,
    horizon: f64,
    seed: u64,
) -> Result<Vec<IntertwiningPoint>> {
    intertwining_profile_with(system, partition, p, radii, n_traj, horizon, seed, &SampleOptions::default())
}

/// [`intertwining_profile`] with an explicit step and labelling rule.
#[allow(clippy::too_many_arguments)]
pub fn intertwining_profile_with(
    system: &FlowSystem,
    partition: &Partition,
    p: &[f64],
    radii: &[f64],
    n_traj: usize,
    horizon: f64,
    seed: u64,
    options: &SampleOptions,
) -> Result<Vec<IntertwiningPoint>> {
    if radii.is_empty() {
        return Err(invalid("radii must be non-empty"));
    }
    if radii.iter().any(|r| !(*r > 0.0)) || radii.windows(2).any(|w| w[0] <= w[1]) {
        return Err(invalid("radii must be positive and strictly descending"));
    }
    if n_traj < 1000 {
        return Err(invalid("intertwining profile needs n_traj >= 1000 per radius"));
    }
    radii
        .iter()
        .enumerate()
        .map(|(k, &radius)| {
            let space = neighborhood_sample_space_with(
                system,
                partition,
                p,
                radius,
                n_traj,
                horizon,
                seed.wrapping_add(k as u64),
                options,
            )?;
            let probs = outcome_probabilities(&space)?;
            Ok(IntertwiningPoint {
                radius,
                p_a: probs.p_a,
                minority_fraction: probs.minority(),
                n_labelled: space.labels.len(),
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::settle;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn space_of(labels: &str) -> SampleSpace {
        SampleSpace {
            base_point: vec![0.0],
            radius: 1.0,
            horizon: 1.0,
            n_traj: labels.len(),
            seed: 0,
            labels: labels.chars().map(|c| Symbol::from_char(c).unwrap()).collect(),
            trials: (0..labels.len()).map(|i| (i, vec![0.0])).collect(),
            n_excluded: 0,
        }
    }

    #[test]
    fn lorenz_lobe_labels() {
        let p = Partition::lorenz_lobes();
        assert_eq!(label_state(&p, &[-5.0, 0.0, 20.0]).unwrap(), Symbol::A);
        assert_eq!(label_state(&p, &[5.0, 0.0, 20.0]).unwrap(), Symbol::B);
        assert_eq!(label_state(&p, &[0.0, 0.0, 20.0]).unwrap(), Symbol::B);
        assert!(label_state(&p, &[f64::NAN, 0.0, 0.0]).is_err());
    }

    #[test]
    fn shift_examples() {
        let s: SymbolString = ".AABABB".parse().unwrap();
        assert_eq!(shift(&s).unwrap().to_string(), ".ABABB");
        let mut t = s.clone();
        for _ in 0..s.len() - 1 {
            t = shift(&t).unwrap();
        }
        assert_eq!(t.len(), 1);
        assert!(shift(&t).is_err());
        assert!("".parse::<SymbolString>().is_err());
        assert!("AXB".parse::<SymbolString>().is_err());
    }

    #[test]
    fn trajectory_labelling() {
        let p = Partition::lorenz_lobes();
        let still = integrate(&FlowSystem::zero_flow(3), &[-1.0, 2.0, 3.0], 0.1, 20).unwrap();
        let s = label_trajectory(&p, &still, 3).unwrap();
        assert!(s.symbols().iter().all(|x| *x == Symbol::A));
        assert_eq!(s.len(), 7);
        assert_eq!(label_trajectory(&p, &still, 100).unwrap().len(), 1);
        assert!(label_trajectory(&p, &still, 0).is_err());
    }

    #[test]
    fn shift_commutes_with_restart() {
        let sys = FlowSystem::lorenz_canonical();
        let part = Partition::lorenz_lobes();
        let x0 = settle(&sys, &[1.0, 1.0, 1.0]).unwrap();
        let stride = 200;
        let traj = integrate(&sys, &x0, 0.005, 40 * stride).unwrap();
        let full = label_trajectory(&part, &traj, stride).unwrap();
        for k in [1, 5, 17] {
            let restart = integrate(&sys, &traj.points[k * stride], 0.005, (40 - k) * stride).unwrap();
            let mut shifted = full.clone();
            for _ in 0..k {
                shifted = shift(&shifted).unwrap();
            }
            assert_eq!(label_trajectory(&part, &restart, stride).unwrap(), shifted);
        }
    }

    #[test]
    fn probabilities_by_counting() {
        let p = outcome_probabilities(&space_of("AAAA")).unwrap();
        assert_eq!((p.p_a, p.p_b), (1.0, 0.0));
        let p = outcome_probabilities(&space_of("ABAB")).unwrap();
        assert_eq!((p.p_a, p.p_b), (0.5, 0.5));
        assert!(outcome_probabilities(&space_of("")).is_err());
    }

    #[test]
    fn ball_samples_stay_inside() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..1000 {
            let x = sample_ball(&[1.0, 2.0, 3.0], 0.5, &mut rng);
            let d = ((x[0] - 1.0).powi(2) + (x[1] - 2.0).powi(2) + (x[2] - 3.0).powi(2)).sqrt();
            assert!(d <= 0.5);
        }
    }

    #[test]
    fn zero_radius_is_unanimous() {
        let sys = FlowSystem::lorenz_canonical();
        let space =
            neighborhood_sample_space(&sys, &Partition::lorenz_lobes(), &[0.0, 0.0, 20.0], 0.0, 50, 2.0, 3).unwrap();
        let first = space.labels[0];
        assert!(space.labels.iter().all(|l| *l == first));
        assert_eq!(space.labels.len(), 50);
    }

    #[test]
    fn sample_space_is_reproducible() {
        let sys = FlowSystem::lorenz_canonical();
        let part = Partition::lorenz_lobes();
        let a = neighborhood_sample_space(&sys, &part, &[0.0, 0.0, 20.0], 1e-3, 200, 2.0, 9).unwrap();
        let b = neighborhood_sample_space(&sys, &part, &[0.0, 0.0, 20.0], 1e-3, 200, 2.0, 9).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn blow_ups_are_excluded() {
        let sys = FlowSystem::new("explode", 1, |x, out| out[0] = x[0] * x[0]);
        let part = Partition::coordinate(0, 0.0);
        let space = neighborhood_sample_space(&sys, &part, &[1.0], 0.1, 20, 5.0, 1).unwrap();
        assert_eq!(space.n_excluded, 20);
        assert!(outcome_probabilities(&space).is_err());
    }

    #[test]
    fn quasi_stationary_rule_keeps_contracting_runs() {
        let sys = FlowSystem::lorenz(10.0, 0.5, 8.0 / 3.0);
        let opts = SampleOptions { dt: Some(0.01), rule: LabelRule::QuasiStationary { window: 50 } };
        let space = neighborhood_sample_space_with(
            &sys,
            &Partition::lorenz_lobes(),
            &[1.0, 1.0, 1.0],
            0.1,
            100,
            3.0,
            2,
            &opts,
        )
        .unwrap();
        assert_eq!(space.n_excluded, 0);
        assert!(space.labels.iter().all(|l| *l == Symbol::B));
    }

    #[test]
    fn profile_argument_checks() {
        let sys = FlowSystem::lorenz_canonical();
        let part = Partition::lorenz_lobes();
        let p = [0.0, 0.0, 20.0];
        assert!(intertwining_profile(&sys, &part, &p, &[], 1000, 1.0, 0).is_err());
        assert!(intertwining_profile(&sys, &part, &p, &[1e-3, 1e-2], 1000, 1.0, 0).is_err());
        assert!(intertwining_profile(&sys, &part, &p, &[1e-2], 10, 1.0, 0).is_err());
    }
}
