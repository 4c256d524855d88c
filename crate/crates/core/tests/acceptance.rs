//! Acceptance suite: one PASS/FAIL line per criterion, non-zero exit on any FAIL.
//!
//! Every check compares library output against an oracle computed here:
//! closed forms, exhaustive enumeration, or an independent integrator.

use std::collections::{BTreeSet, HashMap, VecDeque};
use std::path::Path;
use std::time::Instant;

use isl::cantor;
use isl::dynamics::{self, FlowSystem};
use isl::geometry::{self, BoundingBox, PointCloud, TimeSeries};
use isl::liouville::{self, DensityField, Grid};
use isl::qstrings::{self, BitString, PauliAxis, StringOperator};
use isl::symbolic::{self, Partition};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Check = Result<String, String>;

fn ensure(ok: bool, detail: String) -> Check {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

// ------------------------------------------------------------ bit-string oracle

/// All 16 length-4 strings as 4-bit masks; bit j set means symbol B at j.
fn strings4() -> Vec<BitString> {
    BitString::all_of_length(4).unwrap()
}

fn mask(s: &BitString) -> u8 {
    s.to_string()
        .chars()
        .filter(|c| *c == 'A' || *c == 'B')
        .enumerate()
        .fold(0, |m, (j, c)| if c == 'B' { m | 1 << j } else { m })
}

/// Operator as a permutation of the 16 masks.
fn action(op: &StringOperator) -> [u8; 16] {
    let mut out = [0u8; 16];
    for s in strings4() {
        out[mask(&s) as usize] = mask(&op.apply(&s));
    }
    out
}

/// `(f . g)(s) = f(g(s))`.
fn then(f: &[u8; 16], g: &[u8; 16]) -> [u8; 16] {
    let mut out = [0u8; 16];
    for s in 0..16 {
        out[s] = f[g[s] as usize];
    }
    out
}

fn ident() -> [u8; 16] {
    let mut out = [0u8; 16];
    for (s, v) in out.iter_mut().enumerate() {
        *v = s as u8;
    }
    out
}

fn complement() -> [u8; 16] {
    let mut out = [0u8; 16];
    for (s, v) in out.iter_mut().enumerate() {
        *v = !(s as u8) & 0xF;
    }
    out
}

fn crit1_quaternions() -> Check {
    let neg = complement();
    let [i, e1, e2, e3] = [StringOperator::i(), StringOperator::e1(), StringOperator::e2(), StringOperator::e3()].map(|o| action(&o));
    let relations = [
        ("i^2", then(&i, &i)),
        ("e1^2", then(&e1, &e1)),
        ("e2^2", then(&e2, &e2)),
        ("e3^2", then(&e3, &e3)),
        ("e1e2e3", then(&e1, &then(&e2, &e3))),
    ];
    for (name, got) in &relations {
        if *got != neg {
            return Err(format!("{name} is not negate"));
        }
    }
    // closure of <e1, e2, e3> by breadth-first search over permutations
    let mut seen = BTreeSet::from([ident()]);
    let mut queue = VecDeque::from([ident()]);
    while let Some(g) = queue.pop_front() {
        for h in [e1, e2, e3] {
            let p = then(&h, &g);
            if seen.insert(p) {
                queue.push_back(p);
            }
        }
    }
    let order_of = |g: &[u8; 16]| {
        let mut p = *g;
        let mut k = 1;
        while p != ident() {
            p = then(g, &p);
            k += 1;
        }
        k
    };
    let orders: HashMap<usize, usize> = seen.iter().fold(HashMap::new(), |mut m, g| {
        *m.entry(order_of(g)).or_default() += 1;
        m
    });
    // order 8, one involution, six elements of order 4: the quaternion group
    let is_q8 = seen.len() == 8 && orders.get(&2) == Some(&1) && orders.get(&4) == Some(&6);
    let report = qstrings::verify_q8().map_err(|e| e.to_string())?;
    ensure(
        is_q8 && report.order == 8 && report.failures.is_empty(),
        format!("closure order {} element orders {:?}; library report order {} failures {}", seen.len(), orders, report.order, report.failures.len()),
    )
}

fn crit2_pauli() -> Check {
    let neg = complement();
    let sig = [PauliAxis::X, PauliAxis::Y, PauliAxis::Z].map(|a| action(&qstrings::pauli(a)));
    let mut checked = 0;
    for (a, sa) in sig.iter().enumerate() {
        checked += 1;
        if then(sa, sa) != ident() {
            return Err(format!("sigma_{a}^2 != 1"));
        }
        for (b, sb) in sig.iter().enumerate().skip(a + 1) {
            checked += 1;
            if then(sa, sb) != then(&neg, &then(sb, sa)) {
                return Err(format!("sigma_{a} and sigma_{b} do not anticommute"));
            }
        }
    }
    // sigma_z = i e1 on the example string
    let s: BitString = "ABAA".parse().unwrap();
    let z = qstrings::pauli(PauliAxis::Z).apply(&s).to_string();
    ensure(z.contains("BAAA"), format!("{checked} identities on all 16 strings; sigma_z(ABAA) = {z}"))
}

fn crit3_phase() -> Check {
    let e1 = action(&StringOperator::e1());
    let corr = |a: u8, b: u8| 1.0 - 2.0 * (a ^ b).count_ones() as f64 / 4.0;
    let mut cs = BTreeSet::new();
    for s in 0..16u8 {
        let orbit: Vec<u8> = (0..=4).scan(s, |x, k| {
            let cur = *x;
            if k < 4 {
                *x = e1[*x as usize];
            }
            Some(cur)
        }).collect();
        if orbit[4] != s || orbit[1..4].contains(&s) {
            return Err(format!("orbit of {s:04b} does not have period 4"));
        }
        let r: Vec<f64> = orbit[..4].iter().map(|&t| corr(s, t)).collect();
        let c = r[1];
        if r != [1.0, c, -1.0, -c] {
            return Err(format!("correlations of {s:04b}: {r:?}"));
        }
        // library correlation agrees with the oracle
        let lib = strings4().into_iter().find(|b| mask(b) == s).unwrap();
        let lib_c = qstrings::correlation(&lib, &StringOperator::e1().apply(&lib)).unwrap();
        if lib_c != c {
            return Err(format!("library correlation {lib_c} vs oracle {c}"));
        }
        cs.insert(c.to_bits());
    }
    let cs: Vec<f64> = cs.into_iter().map(f64::from_bits).collect();
    ensure(true, format!("period 4 and (1, c, -1, -c) for all 16 strings; c values {cs:?}"))
}

fn crit4_box_counting() -> Check {
    let target = 2f64.ln() / 3f64.ln();
    let cantor = cantor::cantor_cloud(10);
    let dc = geometry::box_counting_dimension(&cantor, 2f64.powi(-12), 0.25, 11).map_err(|e| e.to_string())?.value;
    let n = 10_000;
    let seg = PointCloud::from_scalars(&(0..n).map(|i| i as f64 / (n - 1) as f64).collect::<Vec<_>>()).unwrap();
    let ds = geometry::box_counting_dimension(&seg, 1e-3, 1e-1, 8).map_err(|e| e.to_string())?.value;
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let sq = PointCloud::new(2, (0..200_000).map(|_| rng.random::<f64>()).collect()).unwrap();
    let dq = geometry::box_counting_dimension(&sq, 0.02, 0.2, 6).map_err(|e| e.to_string())?.value;
    ensure(
        (dc - target).abs() <= 0.03 && (ds - 1.0).abs() <= 0.05 && (dq - 2.0).abs() <= 0.1,
        format!("cantor {dc:.4} (ln2/ln3 = {target:.4}), segment {ds:.4}, square {dq:.4}"),
    )
}

fn crit5_perturbation() -> Check {
    let fr: Vec<f64> = (1..=8)
        .map(|d| cantor::perturbation_experiment(d, 100_000, 5).map(|r| r.exceptional_fraction))
        .collect::<Result<_, _>>()
        .map_err(|e| e.to_string())?;
    // exhaustive depth-1 oracle: digit pairs (c in {0,2}, r in {0,1,2}) whose sum mod 3 avoids 1
    let good = [0u8, 2].iter().flat_map(|c| (0..3u8).map(move |r| (c + r) % 3)).filter(|d| *d != 1).count();
    let exact = good as f64 / 6.0;
    let monotone = fr.windows(2).all(|w| w[1] < w[0]);
    ensure(
        (fr[0] - exact).abs() <= 0.01 && fr[7] < 0.05 && monotone,
        format!("depth 1 {:.5} (exact {exact:.5}), depth 8 {:.5}, strictly decreasing {monotone}", fr[0], fr[7]),
    )
}

/// Exact mean intersection rate at depth `d` over every gradient and every
/// non-zero exceptional point, in machine integers.
fn exact_intersection_rate(d: u32) -> f64 {
    let m = 3u64.pow(d);
    let mut exceptional = vec![0u64];
    for _ in 0..d {
        exceptional = exceptional.iter().flat_map(|e| [3 * e, 3 * e + 2]).collect();
    }
    let mut is_ex = vec![false; m as usize];
    for &e in &exceptional {
        is_ex[e as usize] = true;
    }
    let xs: Vec<u64> = exceptional.into_iter().filter(|&x| x != 0).collect();
    let mut hits = 0u64;
    for k in 0..m {
        for &x in &xs {
            hits += is_ex[((k * x / m) % m) as usize] as u64;
        }
    }
    hits as f64 / (m as f64 * xs.len() as f64)
}

fn crit6_counterfactual() -> Check {
    let r = cantor::line_intersection_experiment(10, 1000, 1000, 42).map_err(|e| e.to_string())?;
    let axis = cantor::axis_direction_counterexample(10, 1000, 42).map_err(|e| e.to_string())?;
    let exact = exact_intersection_rate(10);
    ensure(
        r.intersection_fraction < 0.03 && axis.intersection_fraction == 1.0,
        format!(
            "depth 10, 10^6 samples: {:.5} (exact mean {exact:.5}); axis direction {}",
            r.intersection_fraction, axis.intersection_fraction
        ),
    )
}

/// Two-trajectory leading-exponent estimate with its own RK4.
fn benettin_two_orbit(dt: f64, n_steps: usize) -> f64 {
    let f = |x: [f64; 3]| [10.0 * (x[1] - x[0]), x[0] * (28.0 - x[2]) - x[1], x[0] * x[1] - 8.0 / 3.0 * x[2]];
    let step = |x: [f64; 3]| {
        let add = |a: [f64; 3], b: [f64; 3], h: f64| [a[0] + h * b[0], a[1] + h * b[1], a[2] + h * b[2]];
        let k1 = f(x);
        let k2 = f(add(x, k1, dt / 2.0));
        let k3 = f(add(x, k2, dt / 2.0));
        let k4 = f(add(x, k3, dt));
        [0, 1, 2].map(|i| x[i] + dt / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]))
    };
    let mut x = [1.0, 1.0, 1.0];
    for _ in 0..20_000 {
        x = step(x);
    }
    let d0 = 1e-8;
    let mut y = [x[0] + d0, x[1], x[2]];
    let mut sum = 0.0;
    for _ in 0..n_steps {
        x = step(x);
        y = step(y);
        let d = ((y[0] - x[0]).powi(2) + (y[1] - x[1]).powi(2) + (y[2] - x[2]).powi(2)).sqrt();
        sum += (d / d0).ln();
        y = [0, 1, 2].map(|i| x[i] + (y[i] - x[i]) * d0 / d);
    }
    sum / (n_steps as f64 * dt)
}

fn crit7_lyapunov() -> Check {
    let sys = FlowSystem::lorenz_canonical();
    let x0 = dynamics::settle(&sys, &[1.0, 1.0, 1.0]).map_err(|e| e.to_string())?;
    let spectrum = dynamics::lyapunov_spectrum(&sys, &x0, 0.005, 2_000_000, 0).map_err(|e| e.to_string())?;
    let oracle = benettin_two_orbit(0.005, 1_000_000);
    let div = -(10.0 + 1.0 + 8.0 / 3.0);
    let l1 = spectrum.leading();
    ensure(
        (l1 - 0.906).abs() <= 0.05 && (oracle - 0.906).abs() <= 0.05 && (spectrum.sum() - (-13.67)).abs() <= 0.3 && (spectrum.sum() - div).abs() <= 0.3,
        format!("lambda1 {l1:.4} (two-orbit oracle {oracle:.4}), sum {:.4} (divergence {div:.4}), spectrum {:?}", spectrum.sum(), spectrum.exponents),
    )
}

fn crit8_liouville() -> Check {
    let rot = FlowSystem::rigid_rotation();
    let grid = Grid::cube(2, 128, -4.0, 4.0).unwrap();
    let rho = DensityField::gaussian(grid.clone(), &[1.5, 0.0], 0.3).map_err(|e| e.to_string())?;
    let per_unit = liouville::courant_number(&rot, &grid, 1.0);
    let n = (std::f64::consts::TAU * per_unit / 0.5).ceil() as usize;
    let after = liouville::evolve_density(&rot, &rho, std::f64::consts::TAU / n as f64, n).map_err(|e| e.to_string())?;
    let mass_err = (liouville::total_mass(&after) - liouville::total_mass(&rho)).abs() / liouville::total_mass(&rho);

    let shear = FlowSystem::cubic_shear();
    let lgrid = Grid::cube(2, 64, -1.0, 1.0).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let mut worst = 0.0f64;
    for _ in 0..5 {
        let mut blob = || {
            let c = [rng.random_range(-0.5..0.5), rng.random_range(-0.5..0.5)];
            let w = rng.random_range(0.1..0.3);
            (c, w)
        };
        let ((c1, w1), (c2, w2)) = (blob(), blob());
        let r1 = DensityField::gaussian(lgrid.clone(), &c1, w1).unwrap();
        let r2 = DensityField::gaussian(lgrid.clone(), &c2, w2).unwrap();
        let (a, b) = (rng.random_range(-2.0..2.0), rng.random_range(-2.0..2.0));
        let dt = 0.5 / liouville::courant_number(&shear, &lgrid, 1.0);
        let rep = liouville::linearity_check(&shear, &r1, &r2, a, b, dt, 60).map_err(|e| e.to_string())?;
        worst = worst.max(rep.relative_deviation);
    }

    let lorenz = FlowSystem::lorenz_canonical();
    let corner = dynamics::settle(&lorenz, &[1.0, 1.0, 1.0]).map_err(|e| e.to_string())?;
    let region = BoundingBox::new(corner.clone(), corner.iter().map(|x| x + 1e-3).collect()).unwrap();
    let t = 0.5;
    let ratio = liouville::comoving_volume(&lorenz, &region, t, 1e-4).map_err(|e| e.to_string())?;
    let expected = (-41.0 / 3.0 * t).exp();
    let vol_err = (ratio / expected - 1.0).abs();
    ensure(
        mass_err <= 1e-6 && worst < 1e-12 && vol_err <= 0.05,
        format!("rotation mass error {mass_err:.2e}; shear linearity {worst:.2e}; Lorenz volume ratio {ratio:.5e} vs {expected:.5e} ({:.2}%)", 100.0 * vol_err),
    )
}

fn crit9_neighbourhoods() -> Check {
    let sys = FlowSystem::lorenz_canonical();
    let part = Partition::lorenz_lobes();
    let p = [0.0, 0.0, 20.0];
    let zero = symbolic::neighborhood_sample_space(&sys, &part, &p, 0.0, 200, 2.0, 9).map_err(|e| e.to_string())?;
    let fiducial = symbolic::label_state(&part, &dynamics::advance(&sys, &p, sys.default_dt(), 400).unwrap()).unwrap();
    let unanimous = zero.labels.iter().all(|l| *l == fiducial);
    let radii = [1e-1, 1e-2, 1e-3, 1e-4];
    let prof = symbolic::intertwining_profile(&sys, &part, &p, &radii, 1000, 2.0, 9).map_err(|e| e.to_string())?;
    let fractions: Vec<f64> = prof.iter().map(|q| q.minority_fraction).collect();
    ensure(
        unanimous && fractions.iter().all(|f| *f >= 0.05) && prof.iter().all(|q| q.n_labelled == 1000),
        format!("radius 0 unanimous {unanimous}; minority fractions at p = (0, 0, 20) over radii 1e-1..1e-4: {fractions:?}"),
    )
}

fn crit10_takens() -> Check {
    let sys = FlowSystem::lorenz_canonical();
    let dt = sys.default_dt();
    let start = dynamics::settle(&sys, &[1.0, 1.0, 1.0]).map_err(|e| e.to_string())?;
    let traj = dynamics::integrate(&sys, &start, dt, 99_999).map_err(|e| e.to_string())?;
    let full = PointCloud::try_from(&traj).map_err(|e| e.to_string())?;
    let full_d = geometry::correlation_dimension(&full, &geometry::relative_radii(&full, 1e-3, 0.05, 12)).map_err(|e| e.to_string())?;
    let series = TimeSeries::from_component(&traj, 0).map_err(|e| e.to_string())?;
    let sel = geometry::select_delay(&series).map_err(|e| e.to_string())?;
    let cloud = geometry::delay_embed(&series, sel.tau, 3).map_err(|e| e.to_string())?;
    let emb_d = geometry::correlation_dimension(&cloud, &geometry::relative_radii(&cloud, 1e-3, 0.05, 12)).map_err(|e| e.to_string())?;
    let rel = (emb_d.value - full_d.value).abs() / full_d.value;
    ensure(
        rel <= 0.10,
        format!(
            "full state {:.3}, x-embedding (m = 3, tau = {} samples = {:.2} time units) {:.3}, relative difference {:.3}",
            full_d.value,
            sel.tau,
            sel.tau as f64 * dt,
            emb_d.value,
            rel
        ),
    )
}

fn crit11_classicality() -> Check {
    let sys = FlowSystem::lorenz_canonical();
    let start = dynamics::settle(&sys, &[1.0, 1.0, 1.0]).map_err(|e| e.to_string())?;
    let traj = dynamics::integrate(&sys, &start, sys.default_dt(), 199_999).map_err(|e| e.to_string())?;
    let x = TimeSeries::from_component(&traj, 0).map_err(|e| e.to_string())?;
    let raw = geometry::time_average_distribution(&x, 1).map_err(|e| e.to_string())?;
    let avg = geometry::time_average_distribution(&x, 1000).map_err(|e| e.to_string())?;
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let u = TimeSeries::new(1.0, (0..1_000_000).map(|_| rng.random::<f64>()).collect()).unwrap();
    let ctl = geometry::time_average_distribution(&u, 100).map_err(|e| e.to_string())?;
    // uniform(0,1) window means: mean 1/2, variance 1/(12 * 100)
    let var_ok = (ctl.variance - 1.0 / 1200.0).abs() < 0.05 / 1200.0;
    ensure(
        avg.excess_kurtosis.abs() < raw.excess_kurtosis.abs() && ctl.skewness.abs() < 0.1 && ctl.excess_kurtosis.abs() < 0.2 && var_ok,
        format!(
            "Lorenz x excess kurtosis {:.3} raw, {:.3} at window 1000 ({} windows); uniform control skew {:.4}, excess kurtosis {:.4}",
            raw.excess_kurtosis, avg.excess_kurtosis, avg.n_windows, ctl.skewness, ctl.excess_kurtosis
        ),
    )
}

fn run_cli(args: &[&str], out: &Path) -> i32 {
    let status = std::process::Command::new(env!("CARGO_BIN_EXE_isl"))
        .args(args)
        .arg("--out")
        .arg(out)
        .env_remove("ISL_SEED")
        .stdout(std::process::Stdio::null())
        .status()
        .expect("isl binary runs");
    status.code().unwrap_or(-1)
}

fn crit12_reproducibility() -> Check {
    let runs: &[&[&str]] = &[
        &["cantor", "--depth", "10", "--gradients", "1000", "--points", "1000", "--seed", "42"],
        &["attractor", "--steps", "2000", "--lyapunov-steps", "20000", "--seed", "3"],
        &["dimension", "--source", "dust", "--depth", "5", "--probes", "2000", "--seed", "3"],
        &["dimension", "--source", "square", "--points", "20000", "--seed", "3"],
        &["symbolic", "--radii", "0.1,0.001", "--n-traj", "1000", "--seed", "3"],
        &["qstrings", "--verify", "--seed", "3"],
        &["liouville", "--cells", "48", "--seed", "3"],
        &["embed", "--samples", "5000", "--stride", "4", "--seed", "3"],
        &["classicality", "--samples", "40000", "--uniform-samples", "100000", "--seed", "3"],
    ];
    let tmp = tempfile::tempdir().map_err(|e| e.to_string())?;
    let mut compared = 0;
    for (k, args) in runs.iter().enumerate() {
        let a = tmp.path().join(format!("{k}-a"));
        let b = tmp.path().join(format!("{k}-b"));
        for dir in [&a, &b] {
            let code = run_cli(args, dir);
            if code != 0 {
                return Err(format!("{} exited {code}", args[0]));
            }
        }
        let mut names: Vec<_> = std::fs::read_dir(&a).unwrap().map(|e| e.unwrap().file_name()).collect();
        names.sort();
        for name in names {
            if name == "manifest.json" {
                continue;
            }
            let (x, y) = (std::fs::read(a.join(&name)).unwrap(), std::fs::read(b.join(&name)).unwrap());
            if x != y {
                return Err(format!("{} output {name:?} differs between reruns", args[0]));
            }
            compared += 1;
        }
    }
    ensure(true, format!("{compared} output files byte-identical across reruns of {} configurations", runs.len()))
}

fn main() {
    let criteria: [(&str, fn() -> Check); 12] = [
        ("quaternion algebra", crit1_quaternions),
        ("Pauli identification", crit2_pauli),
        ("phase cycle", crit3_phase),
        ("Cantor box dimension", crit4_box_counting),
        ("perturbation sparseness", crit5_perturbation),
        ("counterfactual emptiness", crit6_counterfactual),
        ("Lorenz Lyapunov spectrum", crit7_lyapunov),
        ("Liouville transport", crit8_liouville),
        ("neighbourhood probabilities", crit9_neighbourhoods),
        ("Takens reconstruction", crit10_takens),
        ("classicality", crit11_classicality),
        ("reproducibility", crit12_reproducibility),
    ];
    let mut failed = 0;
    for (k, (name, check)) in criteria.iter().enumerate() {
        let t = Instant::now();
        let (status, detail) = match check() {
            Ok(d) => ("PASS", d),
            Err(d) => {
                failed += 1;
                ("FAIL", d)
            }
        };
        println!("[{status}] criterion {:>2} {name}: {detail} ({:.1}s)", k + 1, t.elapsed().as_secs_f64());
    }
    println!("acceptance: {} passed, {failed} failed", criteria.len() - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
