//! Reference flows, fixed-step RK4 integration and tangent-space diagnostics.
//!
//! States are plain `&[f64]` slices. A [`FlowSystem`] owns its vector field as a
//! closure writing into an output buffer so the inner loops stay allocation free.

use std::collections::BTreeMap;
use std::fmt;
use std::io::Write;
use std::sync::Arc;

use serde::Serialize;

use crate::error::{invalid, Error, Result};
use crate::io::{write_echo, Echo};

pub type VectorField = Arc<dyn Fn(&[f64], &mut [f64]) + Send + Sync>;
/// Writes the row-major `n x n` Jacobian at a state.
pub type JacobianField = Arc<dyn Fn(&[f64], &mut [f64]) + Send + Sync>;
pub type ScalarField = Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>;

/// Relative finite-difference step used for Jacobians and divergence.
pub const FD_REL_STEP: f64 = 1e-6;

/// Steps discarded before a trajectory counts as "on the attractor".
pub const DEFAULT_TRANSIENT: usize = 10_000;

/// Cadence of QR re-orthonormalisation in tangent propagation.
pub const QR_INTERVAL: usize = 10;

/// Names accepted by [`FlowSystem::builtin`].
pub const BUILTIN_NAMES: &[&str] = &[
    "lorenz",
    "rossler",
    "harmonic",
    "rotation",
    "uniform_divergence",
    "cubic_shear",
    "zero",
];

/// A named continuous-time vector field `dx/dt = f(x)`.
#[derive(Clone)]
pub struct FlowSystem {
    name: String,
    dim: usize,
    params: BTreeMap<String, f64>,
    default_dt: f64,
    rhs: VectorField,
    jacobian: Option<JacobianField>,
    analytic_divergence: Option<ScalarField>,
}

impl fmt::Debug for FlowSystem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("FlowSystem")
            .field("name", &self.name)
            .field("dim", &self.dim)
            .field("params", &self.params)
            .field("analytic_jacobian", &self.jacobian.is_some())
            .field("analytic_divergence", &self.analytic_divergence.is_some())
            .finish()
    }
}

impl FlowSystem {
    pub fn new(
        name: impl Into<String>,
        dim: usize,
        rhs: impl Fn(&[f64], &mut [f64]) + Send + Sync + 'static,
    ) -> Self {
        assert!(dim > 0, "flow dimension must be positive");
        Self {
            name: name.into(),
            dim,
            params: BTreeMap::new(),
            default_dt: 0.01,
            rhs: Arc::new(rhs),
            jacobian: None,
            analytic_divergence: None,
        }
    }

    pub fn with_param(mut self, key: &str, value: f64) -> Self {
        self.params.insert(key.to_string(), value);
        self
    }

    pub fn with_jacobian(
        mut self,
        jacobian: impl Fn(&[f64], &mut [f64]) + Send + Sync + 'static,
    ) -> Self {
        self.jacobian = Some(Arc::new(jacobian));
        self
    }

    pub fn with_divergence(mut self, div: impl Fn(&[f64]) -> f64 + Send + Sync + 'static) -> Self {
        self.analytic_divergence = Some(Arc::new(div));
        self
    }

    pub fn with_default_dt(mut self, dt: f64) -> Self {
        self.default_dt = dt;
        self
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn params(&self) -> &BTreeMap<String, f64> {
        &self.params
    }

    pub fn param(&self, key: &str) -> Option<f64> {
        self.params.get(key).copied()
    }

    pub fn default_dt(&self) -> f64 {
        self.default_dt
    }

    pub fn has_analytic_jacobian(&self) -> bool {
        self.jacobian.is_some()
    }

    pub fn has_analytic_divergence(&self) -> bool {
        self.analytic_divergence.is_some()
    }

    #[inline]
    pub fn eval_into(&self, x: &[f64], out: &mut [f64]) {
        (self.rhs)(x, out)
    }

    pub fn eval(&self, x: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.dim];
        self.eval_into(x, &mut out);
        out
    }

    /// Row-major Jacobian, analytic when available.
    pub fn jacobian_into(&self, x: &[f64], out: &mut [f64]) {
        match &self.jacobian {
            Some(jac) => jac(x, out),
            None => self.fd_jacobian_into(x, out),
        }
    }

    pub fn jacobian(&self, x: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.dim * self.dim];
        self.jacobian_into(x, &mut out);
        out
    }

    /// Central-difference Jacobian with step `1e-6 * (1 + |x_j|)` per column.
    pub fn fd_jacobian_into(&self, x: &[f64], out: &mut [f64]) {
        let n = self.dim;
        let mut xp = x.to_vec();
        let mut fp = vec![0.0; n];
        let mut fm = vec![0.0; n];
        for j in 0..n {
            let h = fd_step(x[j]);
            xp[j] = x[j] + h;
            self.eval_into(&xp, &mut fp);
            xp[j] = x[j] - h;
            self.eval_into(&xp, &mut fm);
            xp[j] = x[j];
            for i in 0..n {
                out[i * n + j] = (fp[i] - fm[i]) / (2.0 * h);
            }
        }
    }

    /// `div f(x)`: the analytic form when present, else central differences.
    pub fn divergence(&self, x: &[f64]) -> f64 {
        match &self.analytic_divergence {
            Some(div) => div(x),
            None => self.fd_divergence(x),
        }
    }

    pub fn fd_divergence(&self, x: &[f64]) -> f64 {
        let n = self.dim;
        let mut xp = x.to_vec();
        let mut fp = vec![0.0; n];
        let mut fm = vec![0.0; n];
        let mut sum = 0.0;
        for j in 0..n {
            let h = fd_step(x[j]);
            xp[j] = x[j] + h;
            self.eval_into(&xp, &mut fp);
            xp[j] = x[j] - h;
            self.eval_into(&xp, &mut fm);
            xp[j] = x[j];
            sum += (fp[j] - fm[j]) / (2.0 * h);
        }
        sum
    }

    /// Looks up a built-in system by name with canonical parameters.
    pub fn builtin(name: &str) -> Option<Self> {
        Some(match name {
            "lorenz" => Self::lorenz_canonical(),
            "rossler" => Self::rossler_canonical(),
            "harmonic" => Self::harmonic_oscillator(),
            "rotation" => Self::rigid_rotation(),
            "uniform_divergence" => Self::uniform_divergence(),
            "cubic_shear" => Self::cubic_shear(),
            "zero" => Self::zero_flow(2),
            _ => return None,
        })
    }

    pub fn lorenz(sigma: f64, rho: f64, beta: f64) -> Self {
        Self::new("lorenz", 3, move |x, out| {
            out[0] = sigma * (x[1] - x[0]);
            out[1] = x[0] * (rho - x[2]) - x[1];
            out[2] = x[0] * x[1] - beta * x[2];
        })
        .with_param("sigma", sigma)
        .with_param("rho", rho)
        .with_param("beta", beta)
        .with_default_dt(0.005)
        .with_jacobian(move |x, j| {
            j.copy_from_slice(&[
                -sigma,
                sigma,
                0.0,
                rho - x[2],
                -1.0,
                -x[0],
                x[1],
                x[0],
                -beta,
            ]);
        })
        .with_divergence(move |_| -(sigma + 1.0 + beta))
    }

    /// sigma = 10, rho = 28, beta = 8/3.
    pub fn lorenz_canonical() -> Self {
        Self::lorenz(10.0, 28.0, 8.0 / 3.0)
    }

    pub fn rossler(a: f64, b: f64, c: f64) -> Self {
        Self::new("rossler", 3, move |x, out| {
            out[0] = -x[1] - x[2];
            out[1] = x[0] + a * x[1];
            out[2] = b + x[2] * (x[0] - c);
        })
        .with_param("a", a)
        .with_param("b", b)
        .with_param("c", c)
        .with_default_dt(0.02)
        .with_jacobian(move |x, j| {
            j.copy_from_slice(&[0.0, -1.0, -1.0, 1.0, a, 0.0, x[2], 0.0, x[0] - c]);
        })
        .with_divergence(move |x| a + x[0] - c)
    }

    /// a = b = 0.2, c = 5.7.
    pub fn rossler_canonical() -> Self {
        Self::rossler(0.2, 0.2, 5.7)
    }

    /// `x' = v, v' = -x`.
    pub fn harmonic_oscillator() -> Self {
        Self::new("harmonic", 2, |x, out| {
            out[0] = x[1];
            out[1] = -x[0];
        })
        .with_default_dt(0.001)
        .with_jacobian(|_, j| j.copy_from_slice(&[0.0, 1.0, -1.0, 0.0]))
        .with_divergence(|_| 0.0)
    }

    /// Counter-clockwise rotation `x' = -y, y' = x`.
    pub fn rigid_rotation() -> Self {
        Self::new("rotation", 2, |x, out| {
            out[0] = -x[1];
            out[1] = x[0];
        })
        .with_jacobian(|_, j| j.copy_from_slice(&[0.0, -1.0, 1.0, 0.0]))
        .with_divergence(|_| 0.0)
    }

    /// `x' = x, y' = y`; divergence 2 everywhere.
    pub fn uniform_divergence() -> Self {
        Self::new("uniform_divergence", 2, |x, out| {
            out[0] = x[0];
            out[1] = x[1];
        })
        .with_jacobian(|_, j| j.copy_from_slice(&[1.0, 0.0, 0.0, 1.0]))
        .with_divergence(|_| 2.0)
    }

    /// `x' = x y, y' = -x^3`, a strongly nonlinear planar field.
    pub fn cubic_shear() -> Self {
        Self::new("cubic_shear", 2, |x, out| {
            out[0] = x[0] * x[1];
            out[1] = -x[0] * x[0] * x[0];
        })
        .with_jacobian(|x, j| j.copy_from_slice(&[x[1], x[0], -3.0 * x[0] * x[0], 0.0]))
        .with_divergence(|x| x[1])
    }

    pub fn zero_flow(dim: usize) -> Self {
        Self::new("zero", dim, |_, out| out.fill(0.0))
            .with_jacobian(|_, j| j.fill(0.0))
            .with_divergence(|_| 0.0)
    }
}

#[inline]
fn fd_step(x: f64) -> f64 {
    FD_REL_STEP * (1.0 + x.abs())
}

/// A sampled orbit with uniform time step.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub system_name: String,
    pub dt: f64,
    pub points: Vec<Vec<f64>>,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.points.first().map_or(0, Vec::len)
    }

    pub fn last(&self) -> Option<&[f64]> {
        self.points.last().map(Vec::as_slice)
    }

    /// Scalar record of one coordinate.
    pub fn component(&self, index: usize) -> Vec<f64> {
        self.points.iter().map(|p| p[index]).collect()
    }

    /// Drops the first `n` points, keeping `dt`.
    pub fn skip(mut self, n: usize) -> Self {
        self.points.drain(..n.min(self.points.len()));
        self
    }

    /// CSV with header `t,x0,x1,...`; `t = step * dt`.
    pub fn write_csv<W: Write>(&self, w: &mut W, echo: Option<&Echo>) -> Result<()> {
        if let Some(echo) = echo {
            write_echo(w, echo)?;
        }
        let header: Vec<String> = std::iter::once("t".to_string())
            .chain((0..self.dim()).map(|i| format!("x{i}")))
            .collect();
        writeln!(w, "{}", header.join(","))?;
        for (step, p) in self.points.iter().enumerate() {
            write!(w, "{}", step as f64 * self.dt)?;
            for v in p {
                write!(w, ",{v}")?;
            }
            writeln!(w)?;
        }
        Ok(())
    }
}

/// Reusable RK4 workspace for one system.
pub struct Rk4 {
    k1: Vec<f64>,
    k2: Vec<f64>,
    k3: Vec<f64>,
    k4: Vec<f64>,
    tmp: Vec<f64>,
}

impl Rk4 {
    pub fn new(dim: usize) -> Self {
        Self {
            k1: vec![0.0; dim],
            k2: vec![0.0; dim],
            k3: vec![0.0; dim],
            k4: vec![0.0; dim],
            tmp: vec![0.0; dim],
        }
    }

    /// Advances `x` in place by one classical Runge-Kutta step.
    pub fn step(&mut self, system: &FlowSystem, x: &mut [f64], dt: f64) {
        let n = x.len();
        system.eval_into(x, &mut self.k1);
        for i in 0..n {
            self.tmp[i] = x[i] + 0.5 * dt * self.k1[i];
        }
        system.eval_into(&self.tmp, &mut self.k2);
        for i in 0..n {
            self.tmp[i] = x[i] + 0.5 * dt * self.k2[i];
        }
        system.eval_into(&self.tmp, &mut self.k3);
        for i in 0..n {
            self.tmp[i] = x[i] + dt * self.k3[i];
        }
        system.eval_into(&self.tmp, &mut self.k4);
        for i in 0..n {
            x[i] += dt / 6.0 * (self.k1[i] + 2.0 * self.k2[i] + 2.0 * self.k3[i] + self.k4[i]);
        }
    }
}

fn check_initial(system: &FlowSystem, x0: &[f64], dt: f64) -> Result<()> {
    if x0.len() != system.dim() {
        return Err(invalid(format!(
            "initial state has dimension {}, system {} expects {}",
            x0.len(),
            system.name(),
            system.dim()
        )));
    }
    if !x0.iter().all(|v| v.is_finite()) {
        return Err(invalid("initial state must be finite"));
    }
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(invalid("dt must be positive and finite"));
    }
    Ok(())
}

/// Fixed-step RK4 integration returning all `n_steps + 1` points.
pub fn integrate(system: &FlowSystem, x0: &[f64], dt: f64, n_steps: usize) -> Result<Trajectory> {
    check_initial(system, x0, dt)?;
    let mut rk = Rk4::new(system.dim());
    let mut x = x0.to_vec();
    let mut points = Vec::with_capacity(n_steps + 1);
    points.push(x.clone());
    for step in 1..=n_steps {
        rk.step(system, &mut x, dt);
        if !x.iter().all(|v| v.is_finite()) {
            return Err(Error::BlowUp { step });
        }
        points.push(x.clone());
    }
    Ok(Trajectory {
        system_name: system.name().to_string(),
        dt,
        points,
    })
}

/// Integrates without recording intermediate points; returns the final state.
pub fn advance(system: &FlowSystem, x0: &[f64], dt: f64, n_steps: usize) -> Result<Vec<f64>> {
    check_initial(system, x0, dt)?;
    let mut rk = Rk4::new(system.dim());
    let mut x = x0.to_vec();
    for step in 1..=n_steps {
        rk.step(system, &mut x, dt);
        if !x.iter().all(|v| v.is_finite()) {
            return Err(Error::BlowUp { step });
        }
    }
    Ok(x)
}

/// A point on the attractor: `x0` advanced past [`DEFAULT_TRANSIENT`] steps.
pub fn settle(system: &FlowSystem, x0: &[f64]) -> Result<Vec<f64>> {
    advance(system, x0, system.default_dt(), DEFAULT_TRANSIENT)
}

pub fn divergence(system: &FlowSystem, x: &[f64]) -> f64 {
    system.divergence(x)
}

/// RK4 on the state together with `k` tangent vectors stored column-major.
pub(crate) struct TangentRk4 {
    n: usize,
    k: usize,
    jac: Vec<f64>,
    xs: Vec<f64>,
    vs: Vec<f64>,
    kx: [Vec<f64>; 4],
    kv: [Vec<f64>; 4],
}

impl TangentRk4 {
    pub(crate) fn new(n: usize, k: usize) -> Self {
        let vx = || vec![0.0; n];
        let vv = || vec![0.0; n * k];
        Self {
            n,
            k,
            jac: vec![0.0; n * n],
            xs: vx(),
            vs: vv(),
            kx: [vx(), vx(), vx(), vx()],
            kv: [vv(), vv(), vv(), vv()],
        }
    }

    fn deriv(&mut self, system: &FlowSystem, stage: usize) {
        let (n, k) = (self.n, self.k);
        system.eval_into(&self.xs, &mut self.kx[stage]);
        system.jacobian_into(&self.xs, &mut self.jac);
        let out = &mut self.kv[stage];
        for c in 0..k {
            let col = &self.vs[c * n..(c + 1) * n];
            for r in 0..n {
                let row = &self.jac[r * n..(r + 1) * n];
                out[c * n + r] = row.iter().zip(col).map(|(a, b)| a * b).sum();
            }
        }
    }

    pub(crate) fn step(&mut self, system: &FlowSystem, x: &mut [f64], v: &mut [f64], dt: f64) {
        const C: [f64; 3] = [0.5, 0.5, 1.0];
        self.xs.copy_from_slice(x);
        self.vs.copy_from_slice(v);
        self.deriv(system, 0);
        for stage in 1..4 {
            let c = C[stage - 1] * dt;
            for i in 0..self.n {
                self.xs[i] = x[i] + c * self.kx[stage - 1][i];
            }
            for i in 0..self.n * self.k {
                self.vs[i] = v[i] + c * self.kv[stage - 1][i];
            }
            self.deriv(system, stage);
        }
        for i in 0..self.n {
            x[i] += dt / 6.0
                * (self.kx[0][i] + 2.0 * self.kx[1][i] + 2.0 * self.kx[2][i] + self.kx[3][i]);
        }
        for i in 0..self.n * self.k {
            v[i] += dt / 6.0
                * (self.kv[0][i] + 2.0 * self.kv[1][i] + 2.0 * self.kv[2][i] + self.kv[3][i]);
        }
    }
}

/// Modified Gram-Schmidt on column-major `n x k` vectors. Adds `ln R_jj` to
/// `log_growth[j]` and leaves the columns orthonormal.
pub(crate) fn reorthonormalize(v: &mut [f64], n: usize, log_growth: &mut [f64]) -> Result<()> {
    let k = log_growth.len();
    for j in 0..k {
        let original: f64 = v[j * n..(j + 1) * n].iter().map(|a| a * a).sum::<f64>().sqrt();
        for i in 0..j {
            let (head, tail) = v.split_at_mut(j * n);
            let qi = &head[i * n..(i + 1) * n];
            let vj = &mut tail[..n];
            let r: f64 = qi.iter().zip(vj.iter()).map(|(a, b)| a * b).sum();
            for (b, a) in vj.iter_mut().zip(qi) {
                *b -= r * a;
            }
        }
        let vj = &mut v[j * n..(j + 1) * n];
        let norm: f64 = vj.iter().map(|a| a * a).sum::<f64>().sqrt();
        if !norm.is_finite() || norm <= f64::MIN_POSITIVE || norm < 1e-12 * original {
            return Err(Error::Degenerate(format!(
                "tangent basis lost rank at column {j} (norm {norm:e})"
            )));
        }
        for a in vj.iter_mut() {
            *a /= norm;
        }
        log_growth[j] += norm.ln();
    }
    Ok(())
}

/// Benettin estimate of the full Lyapunov spectrum.
#[derive(Debug, Clone, Serialize)]
pub struct LyapunovSpectrum {
    /// Exponents sorted in descending order.
    pub exponents: Vec<f64>,
    /// Divergence averaged over the same orbit segment.
    pub mean_divergence: f64,
    pub time: f64,
    pub dt: f64,
    pub n_steps: usize,
}

impl LyapunovSpectrum {
    pub fn sum(&self) -> f64 {
        self.exponents.iter().sum()
    }

    pub fn leading(&self) -> f64 {
        self.exponents[0]
    }
}

/// Full spectrum by tangent propagation with QR every [`QR_INTERVAL`] steps.
///
/// The first `n_transient` steps move the state only; exponents are averaged
/// over the following `n_steps`.
pub fn lyapunov_spectrum(
    system: &FlowSystem,
    x0: &[f64],
    dt: f64,
    n_steps: usize,
    n_transient: usize,
) -> Result<LyapunovSpectrum> {
    if n_steps == 0 {
        return Err(invalid("lyapunov_spectrum needs n_steps > 0"));
    }
    let n = system.dim();
    let mut x = advance(system, x0, dt, n_transient)?;
    let mut v = vec![0.0; n * n];
    for i in 0..n {
        v[i * n + i] = 1.0;
    }
    let mut sums = vec![0.0; n];
    let mut div_sum = 0.0;
    let mut stepper = TangentRk4::new(n, n);
    for step in 1..=n_steps {
        div_sum += system.divergence(&x);
        stepper.step(system, &mut x, &mut v, dt);
        if !x.iter().chain(v.iter()).all(|a| a.is_finite()) {
            return Err(Error::BlowUp { step: n_transient + step });
        }
        if step % QR_INTERVAL == 0 || step == n_steps {
            reorthonormalize(&mut v, n, &mut sums)?;
        }
    }
    let time = n_steps as f64 * dt;
    let mut exponents: Vec<f64> = sums.iter().map(|s| s / time).collect();
    exponents.sort_by(|a, b| b.total_cmp(a));
    Ok(LyapunovSpectrum {
        exponents,
        mean_divergence: div_sum / n_steps as f64,
        time,
        dt,
        n_steps,
    })
}

/// Finite-time leading expansion rate over consecutive non-overlapping
/// windows of `window` steps along `traj`.
///
/// One tangent vector is carried through the whole trajectory and
/// renormalised at each window start, so the window rates average to the
/// leading exponent of the orbit.
pub fn local_stability(system: &FlowSystem, traj: &Trajectory, window: usize) -> Result<Vec<f64>> {
    if window == 0 {
        return Err(invalid("window must be positive"));
    }
    let n_steps = traj.len().saturating_sub(1);
    if window > n_steps {
        return Err(invalid(format!(
            "window of {window} steps exceeds trajectory of {n_steps} steps"
        )));
    }
    let n = system.dim();
    if traj.dim() != n {
        return Err(invalid("trajectory dimension does not match the system"));
    }
    let mut v = vec![1.0 / (n as f64).sqrt(); n];
    let mut stepper = TangentRk4::new(n, 1);
    let mut x = vec![0.0; n];
    let mut rates = Vec::with_capacity(n_steps / window);
    for w in 0..n_steps / window {
        let mut growth = [0.0];
        for s in 0..window {
            let i = w * window + s;
            x.copy_from_slice(&traj.points[i]);
            stepper.step(system, &mut x, &mut v, traj.dt);
            if (s + 1) % QR_INTERVAL == 0 || s + 1 == window {
                reorthonormalize(&mut v, n, &mut growth)?;
            }
        }
        rates.push(growth[0] / (window as f64 * traj.dt));
    }
    Ok(rates)
}
