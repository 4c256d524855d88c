//! Probability transport `d rho/dt + div(rho f) = 0` on regular grids.
//!
//! First-order upwind finite volumes: face velocities are the flow sampled at
//! face centres, every face flux leaves one cell and enters its neighbour, and
//! flux through the domain boundary is booked into `leaked_mass`. The update is
//! unsplit, and the Courant number is taken as `dt * sum_axis max|f_axis| / dx_axis`,
//! which bounds each cell's total outflow by `2 * courant` of its content.

use std::io::Write;

use serde::Serialize;

use crate::dynamics::{advance, FlowSystem};
use crate::error::{invalid, Error, Result};
use crate::geometry::BoundingBox;
use crate::io::{write_echo, Echo};

pub const CFL_MAX: f64 = 0.5;

/// Regular rectangular lattice of cells, row-major with the last axis fastest.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Grid {
    pub shape: Vec<usize>,
    pub lower: Vec<f64>,
    pub spacing: Vec<f64>,
}

impl Grid {
    pub fn new(shape: Vec<usize>, lower: Vec<f64>, upper: Vec<f64>) -> Result<Self> {
        let d = shape.len();
        if !(1..=3).contains(&d) || lower.len() != d || upper.len() != d {
            return Err(invalid("grids are 1-, 2- or 3-dimensional with matching bounds"));
        }
        if shape.iter().any(|&n| n == 0) {
            return Err(invalid("grid axes need at least one cell"));
        }
        if lower.iter().zip(&upper).any(|(l, u)| !(u > l) || !l.is_finite() || !u.is_finite()) {
            return Err(invalid("grid bounds must satisfy lower < upper"));
        }
        let spacing = (0..d).map(|a| (upper[a] - lower[a]) / shape[a] as f64).collect();
        Ok(Self { shape, lower, spacing })
    }

    /// `n^d` cells covering `[lo, hi]^d`.
    pub fn cube(dim: usize, n: usize, lo: f64, hi: f64) -> Result<Self> {
        Self::new(vec![n; dim], vec![lo; dim], vec![hi; dim])
    }

    pub fn dim(&self) -> usize {
        self.shape.len()
    }

    pub fn n_cells(&self) -> usize {
        self.shape.iter().product()
    }

    pub fn cell_volume(&self) -> f64 {
        self.spacing.iter().product()
    }

    fn strides(&self) -> Vec<usize> {
        let mut strides = vec![1; self.dim()];
        for a in (0..self.dim().saturating_sub(1)).rev() {
            strides[a] = strides[a + 1] * self.shape[a + 1];
        }
        strides
    }

    fn multi_index(&self, mut flat: usize) -> Vec<usize> {
        let mut idx = vec![0; self.dim()];
        for a in (0..self.dim()).rev() {
            idx[a] = flat % self.shape[a];
            flat /= self.shape[a];
        }
        idx
    }

    pub fn cell_center(&self, flat: usize) -> Vec<f64> {
        self.multi_index(flat)
            .iter()
            .enumerate()
            .map(|(a, &i)| self.lower[a] + (i as f64 + 0.5) * self.spacing[a])
            .collect()
    }
}

/// Non-negative cell densities plus the mass that has left the domain.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityField {
    grid: Grid,
    values: Vec<f64>,
    leaked_mass: f64,
}

impl DensityField {
    pub fn new(grid: Grid, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.n_cells() {
            return Err(invalid("value count does not match the grid"));
        }
        if values.iter().any(|v| !(*v >= 0.0) || !v.is_finite()) {
            return Err(invalid("densities must be finite and non-negative"));
        }
        Ok(Self { grid, values, leaked_mass: 0.0 })
    }

    pub fn zeros(grid: Grid) -> Self {
        let n = grid.n_cells();
        Self { grid, values: vec![0.0; n], leaked_mass: 0.0 }
    }

    /// Samples `density` at cell centres.
    pub fn from_fn(grid: Grid, density: impl Fn(&[f64]) -> f64) -> Result<Self> {
        let values = (0..grid.n_cells()).map(|k| density(&grid.cell_center(k))).collect();
        Self::new(grid, values)
    }

    /// Isotropic Gaussian blob, normalised to unit mass on the grid.
    pub fn gaussian(grid: Grid, center: &[f64], width: f64) -> Result<Self> {
        if center.len() != grid.dim() || !(width > 0.0) {
            return Err(invalid("gaussian needs a centre on the grid and positive width"));
        }
        let c = center.to_vec();
        Self::from_fn(grid, move |x| {
            let r2: f64 = x.iter().zip(&c).map(|(a, b)| (a - b) * (a - b)).sum();
            (-0.5 * r2 / (width * width)).exp()
        })?
        .normalized()
    }

    /// Scales the field to unit total mass and clears the leak ledger.
    pub fn normalized(mut self) -> Result<Self> {
        let m = self.grid_mass();
        if !(m > 0.0) {
            return Err(invalid("cannot normalise a field without mass"));
        }
        let k = 1.0 / m;
        self.values.iter_mut().for_each(|v| *v *= k);
        self.leaked_mass = 0.0;
        Ok(self)
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn leaked_mass(&self) -> f64 {
        self.leaked_mass
    }

    pub fn cell_volume(&self) -> f64 {
        self.grid.cell_volume()
    }

    /// Mass still inside the domain.
    pub fn grid_mass(&self) -> f64 {
        self.values.iter().sum::<f64>() * self.grid.cell_volume()
    }

    pub fn max_value(&self) -> f64 {
        self.values.iter().copied().fold(0.0, f64::max)
    }

    /// Mass-weighted mean position of the in-domain density.
    pub fn center_of_mass(&self) -> Option<Vec<f64>> {
        let total: f64 = self.values.iter().sum();
        if !(total > 0.0) {
            return None;
        }
        let mut c = vec![0.0; self.grid.dim()];
        for (k, v) in self.values.iter().enumerate() {
            if *v > 0.0 {
                for (ca, xa) in c.iter_mut().zip(self.grid.cell_center(k)) {
                    *ca += v * xa;
                }
            }
        }
        c.iter_mut().for_each(|x| *x /= total);
        Some(c)
    }

    /// CSV of cell centres and values.
    pub fn write_csv<W: Write>(&self, w: &mut W, echo: Option<&Echo>) -> Result<()> {
        if let Some(echo) = echo {
            write_echo(w, echo)?;
        }
        let cols: Vec<String> = (0..self.grid.dim()).map(|a| format!("x{a}")).collect();
        writeln!(w, "{},value", cols.join(","))?;
        for (k, v) in self.values.iter().enumerate() {
            for x in self.grid.cell_center(k) {
                write!(w, "{x},")?;
            }
            writeln!(w, "{v}")?;
        }
        Ok(())
    }
}

pub fn total_mass(rho: &DensityField) -> f64 {
    rho.grid_mass() + rho.leaked_mass
}

/// Normal flow component at every face, per axis. Axis `a` stores
/// `shape[a] + 1` faces along `a` for every line of cells.
struct FaceVelocities {
    per_axis: Vec<Vec<f64>>,
}

impl FaceVelocities {
    fn new(system: &FlowSystem, grid: &Grid) -> Self {
        let d = grid.dim();
        let mut out = vec![0.0; d];
        let per_axis = (0..d)
            .map(|a| {
                let mut shape = grid.shape.clone();
                shape[a] += 1;
                let n: usize = shape.iter().product();
                let mut faces = Vec::with_capacity(n);
                let mut idx = vec![0usize; d];
                for _ in 0..n {
                    let x: Vec<f64> = (0..d)
                        .map(|b| {
                            let offset = if b == a { 0.0 } else { 0.5 };
                            grid.lower[b] + (idx[b] as f64 + offset) * grid.spacing[b]
                        })
                        .collect();
                    system.eval_into(&x, &mut out);
                    faces.push(out[a]);
                    for b in (0..d).rev() {
                        idx[b] += 1;
                        if idx[b] < shape[b] {
                            break;
                        }
                        idx[b] = 0;
                    }
                }
                faces
            })
            .collect();
        Self { per_axis }
    }

    fn courant(&self, grid: &Grid, dt: f64) -> f64 {
        dt * self
            .per_axis
            .iter()
            .zip(&grid.spacing)
            .map(|(faces, dx)| faces.iter().fold(0.0f64, |m, u| m.max(u.abs())) / dx)
            .sum::<f64>()
    }
}

/// Courant number of `system` on `grid` at step `dt`.
pub fn courant_number(system: &FlowSystem, grid: &Grid, dt: f64) -> f64 {
    FaceVelocities::new(system, grid).courant(grid, dt)
}

/// Raw transport of signed cell values; returns the boundary outflow in mass units.
/// The map is linear in `values`.
fn transport(
    grid: &Grid,
    faces: &FaceVelocities,
    values: &mut Vec<f64>,
    dt: f64,
    n_steps: usize,
) -> f64 {
    let d = grid.dim();
    let strides = grid.strides();
    let vol = grid.cell_volume();
    let mut next = values.clone();
    let mut leaked = 0.0;
    for _ in 0..n_steps {
        next.copy_from_slice(values);
        let mut step_leak = 0.0;
        for a in 0..d {
            let n_a = grid.shape[a];
            let stride = strides[a];
            let outer: usize = grid.shape[..a].iter().product();
            let c = dt / grid.spacing[a];
            let u = &faces.per_axis[a];
            for o in 0..outer {
                for q in 0..stride {
                    let cell = |i: usize| (o * n_a + i) * stride + q;
                    let face = |i: usize| (o * (n_a + 1) + i) * stride + q;
                    for i in 0..=n_a {
                        let v = u[face(i)];
                        // flux in density units, positive towards increasing index
                        let flux = if v > 0.0 {
                            if i == 0 { 0.0 } else { c * v * values[cell(i - 1)] }
                        } else if i == n_a {
                            0.0
                        } else {
                            c * v * values[cell(i)]
                        };
                        if flux == 0.0 {
                            continue;
                        }
                        if i > 0 {
                            next[cell(i - 1)] -= flux;
                        } else {
                            step_leak -= flux;
                        }
                        if i < n_a {
                            next[cell(i)] += flux;
                        } else {
                            step_leak += flux;
                        }
                    }
                }
            }
        }
        leaked += step_leak * vol;
        std::mem::swap(values, &mut next);
    }
    leaked
}

fn check_compatible(system: &FlowSystem, grid: &Grid, dt: f64) -> Result<FaceVelocities> {
    if system.dim() != grid.dim() {
        return Err(invalid(format!(
            "{}-dimensional flow on a {}-dimensional grid",
            system.dim(),
            grid.dim()
        )));
    }
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(invalid("dt must be positive"));
    }
    let faces = FaceVelocities::new(system, grid);
    let courant = faces.courant(grid, dt);
    if courant > CFL_MAX {
        return Err(Error::Cfl {
            courant,
            admissible_dt: dt * CFL_MAX / courant,
        });
    }
    Ok(faces)
}

/// Upwind evolution of `rho` under `system` for `n_steps` steps of `dt`.
pub fn evolve_density(system: &FlowSystem, rho: &DensityField, dt: f64, n_steps: usize) -> Result<DensityField> {
    let faces = check_compatible(system, &rho.grid, dt)?;
    let mut values = rho.values.clone();
    let leaked = transport(&rho.grid, &faces, &mut values, dt, n_steps);
    // round-off can leave -1e-30 where a cell empties completely
    values.iter_mut().for_each(|v| {
        if *v < 0.0 {
            debug_assert!(*v > -1e-12, "upwind produced {v}");
            *v = 0.0;
        }
    });
    Ok(DensityField {
        grid: rho.grid.clone(),
        values,
        leaked_mass: rho.leaked_mass + leaked,
    })
}

/// JSON summary of an evolution run.
#[derive(Debug, Clone, Serialize)]
pub struct EvolutionSummary {
    pub mass_initial: f64,
    pub mass_final: f64,
    pub leaked_mass: f64,
    pub cfl: f64,
    pub steps: usize,
}

impl EvolutionSummary {
    pub fn new(system: &FlowSystem, before: &DensityField, after: &DensityField, dt: f64, steps: usize) -> Self {
        Self {
            mass_initial: total_mass(before),
            mass_final: total_mass(after),
            leaked_mass: after.leaked_mass,
            cfl: courant_number(system, &before.grid, dt),
            steps,
        }
    }
}

/// Corners and edge midpoints of an axis-aligned box.
fn box_vertices(region: &BoundingBox) -> Vec<Vec<f64>> {
    let d = region.dim();
    // each axis takes lower (0), upper (2) or midpoint (1); edges have exactly one midpoint
    let mut out = Vec::new();
    for code in 0..3usize.pow(d as u32) {
        let mut c = code;
        let digits: Vec<usize> = (0..d)
            .map(|_| {
                let v = c % 3;
                c /= 3;
                v
            })
            .collect();
        if digits.iter().filter(|&&v| v == 1).count() > 1 {
            continue;
        }
        out.push(
            digits
                .iter()
                .enumerate()
                .map(|(a, &v)| region.lower[a] + 0.5 * v as f64 * (region.upper[a] - region.lower[a]))
                .collect(),
        );
    }
    out
}

/// Ratio `V(t) / V(0)` of the convex hull of the transported box vertices.
pub fn comoving_volume(system: &FlowSystem, region: &BoundingBox, t: f64, dt: f64) -> Result<f64> {
    let d = region.dim();
    if d != system.dim() {
        return Err(invalid("region dimension does not match the system"));
    }
    if !(2..=3).contains(&d) {
        return Err(invalid("co-moving volumes are measured in 2 or 3 dimensions"));
    }
    if region.lower.iter().zip(&region.upper).any(|(l, u)| !(u > l)) {
        return Err(invalid("region must have positive extent on every axis"));
    }
    if !(t >= 0.0) || !(dt > 0.0) {
        return Err(invalid("need t >= 0 and dt > 0"));
    }
    if t == 0.0 {
        return Ok(1.0);
    }
    let n_steps = ((t / dt).round() as usize).max(1);
    let start = box_vertices(region);
    let moved = start
        .iter()
        .map(|v| advance(system, v, dt, n_steps))
        .collect::<Result<Vec<_>>>()?;
    Ok(hull_volume(&moved)? / hull_volume(&start)?)
}

/// Convex-hull area (2-D) or volume (3-D) of a small point set.
pub fn hull_volume(points: &[Vec<f64>]) -> Result<f64> {
    match points.first().map(Vec::len) {
        Some(2) => Ok(polygon_area(&points.iter().map(|p| [p[0], p[1]]).collect::<Vec<_>>())),
        Some(3) => polyhedron_volume(points),
        _ => Err(invalid("hull volume needs 2-D or 3-D points")),
    }
}

fn cross2(o: [f64; 2], a: [f64; 2], b: [f64; 2]) -> f64 {
    (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0])
}

/// Area of the convex hull (monotone chain, then shoelace).
fn polygon_area(points: &[[f64; 2]]) -> f64 {
    let mut pts = points.to_vec();
    pts.sort_by(|a, b| a[0].total_cmp(&b[0]).then(a[1].total_cmp(&b[1])));
    pts.dedup();
    if pts.len() < 3 {
        return 0.0;
    }
    let mut hull: Vec<[f64; 2]> = Vec::with_capacity(2 * pts.len());
    for pass in 0..2 {
        let base = hull.len();
        let iter: Box<dyn Iterator<Item = &[f64; 2]>> =
            if pass == 0 { Box::new(pts.iter()) } else { Box::new(pts.iter().rev()) };
        for &p in iter {
            while hull.len() >= base + 2 && cross2(hull[hull.len() - 2], hull[hull.len() - 1], p) <= 0.0 {
                hull.pop();
            }
            hull.push(p);
        }
        hull.pop();
    }
    let n = hull.len();
    (0..n)
        .map(|i| {
            let (a, b) = (hull[i], hull[(i + 1) % n]);
            a[0] * b[1] - a[1] * b[0]
        })
        .sum::<f64>()
        .abs()
        / 2.0
}

fn sub3(a: &[f64], b: &[f64]) -> [f64; 3] {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}

fn cross3(a: [f64; 3], b: [f64; 3]) -> [f64; 3] {
    [a[1] * b[2] - a[2] * b[1], a[2] * b[0] - a[0] * b[2], a[0] * b[1] - a[1] * b[0]]
}

fn dot3(a: [f64; 3], b: [f64; 3]) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

/// Brute-force hull volume: every supporting plane through three points is a
/// facet; its polygon area times the distance from the centroid gives a pyramid.
fn polyhedron_volume(points: &[Vec<f64>]) -> Result<f64> {
    let n = points.len();
    if n > 64 {
        return Err(invalid("brute-force hull supports at most 64 points"));
    }
    if n < 4 {
        return Ok(0.0);
    }
    let centroid: Vec<f64> = (0..3).map(|k| points.iter().map(|p| p[k]).sum::<f64>() / n as f64).collect();
    let pts: Vec<[f64; 3]> = points.iter().map(|p| sub3(p, &centroid)).collect();
    let scale = pts.iter().map(|p| dot3(*p, *p).sqrt()).fold(0.0, f64::max);
    if scale == 0.0 {
        return Ok(0.0);
    }
    let tol = 1e-10 * scale;
    let mut seen: Vec<u64> = Vec::new();
    let mut volume = 0.0;
    for i in 0..n {
        for j in i + 1..n {
            for k in j + 1..n {
                let normal = cross3(sub3(&pts[j], &pts[i]), sub3(&pts[k], &pts[i]));
                let len = dot3(normal, normal).sqrt();
                if len <= 1e-14 * scale * scale {
                    continue;
                }
                let unit = [normal[0] / len, normal[1] / len, normal[2] / len];
                let offset = dot3(unit, pts[i]);
                let (mut above, mut below) = (false, false);
                let mut on_plane = 0u64;
                for (m, p) in pts.iter().enumerate() {
                    let s = dot3(unit, *p) - offset;
                    if s > tol {
                        above = true;
                    } else if s < -tol {
                        below = true;
                    } else {
                        on_plane |= 1 << m;
                    }
                }
                if above && below || seen.contains(&on_plane) {
                    continue;
                }
                seen.push(on_plane);
                // facet polygon in an orthonormal in-plane basis
                let u0 = sub3(&pts[j], &pts[i]);
                let ul = dot3(u0, u0).sqrt();
                let u = [u0[0] / ul, u0[1] / ul, u0[2] / ul];
                let v = cross3(unit, u);
                let facet: Vec<[f64; 2]> = (0..n)
                    .filter(|m| on_plane >> m & 1 == 1)
                    .map(|m| [dot3(pts[m], u), dot3(pts[m], v)])
                    .collect();
                volume += polygon_area(&facet) * offset.abs() / 3.0;
            }
        }
    }
    Ok(volume)
}

/// Deviation of the evolution map from linearity on one pair of fields.
#[derive(Debug, Clone, Serialize)]
pub struct LinearityReport {
    pub max_abs_deviation: f64,
    /// Largest magnitude of `alpha U rho1 + beta U rho2`.
    pub reference_scale: f64,
    pub relative_deviation: f64,
}

/// Compares `U(alpha rho1 + beta rho2)` with `alpha U rho1 + beta U rho2`.
#[allow(clippy::too_many_arguments)]
pub fn linearity_check(
    system: &FlowSystem,
    rho1: &DensityField,
    rho2: &DensityField,
    alpha: f64,
    beta: f64,
    dt: f64,
    n_steps: usize,
) -> Result<LinearityReport> {
    if rho1.grid != rho2.grid {
        return Err(invalid("linearity check needs fields on identical grids"));
    }
    let faces = check_compatible(system, &rho1.grid, dt)?;
    let run = |v: Vec<f64>| {
        let mut v = v;
        transport(&rho1.grid, &faces, &mut v, dt, n_steps);
        v
    };
    let mixed = run(rho1.values.iter().zip(&rho2.values).map(|(a, b)| alpha * a + beta * b).collect());
    let u1 = run(rho1.values.clone());
    let u2 = run(rho2.values.clone());
    let mut dev = 0.0f64;
    let mut scale = 0.0f64;
    for k in 0..mixed.len() {
        let reference = alpha * u1[k] + beta * u2[k];
        dev = dev.max((mixed[k] - reference).abs());
        scale = scale.max(reference.abs());
    }
    Ok(LinearityReport {
        max_abs_deviation: dev,
        reference_scale: scale,
        relative_deviation: if scale > 0.0 { dev / scale } else { dev },
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn square_grid(n: usize, half: f64) -> Grid {
        Grid::cube(2, n, -half, half).unwrap()
    }

    #[test]
    fn zero_flow_leaves_field_unchanged() {
        let rho = DensityField::gaussian(square_grid(32, 1.0), &[0.2, -0.1], 0.2).unwrap();
        let out = evolve_density(&FlowSystem::zero_flow(2), &rho, 0.1, 50).unwrap();
        assert_eq!(out, rho);
    }

    #[test]
    fn normalized_field_has_unit_mass() {
        let rho = DensityField::gaussian(square_grid(40, 2.0), &[0.0, 0.0], 0.3).unwrap();
        assert!((total_mass(&rho) - 1.0).abs() < 1e-14);
        assert_eq!(total_mass(&DensityField::zeros(square_grid(4, 1.0))), 0.0);
    }

    #[test]
    fn rotation_conserves_mass_and_returns() {
        let sys = FlowSystem::rigid_rotation();
        let grid = square_grid(128, 4.0);
        let rho = DensityField::gaussian(grid.clone(), &[1.5, 0.0], 0.3).unwrap();
        let dt_max = 0.5 / courant_number(&sys, &grid, 1.0);
        let n = (2.0 * PI / dt_max).ceil() as usize;
        let dt = 2.0 * PI / n as f64;
        let out = evolve_density(&sys, &rho, dt, n).unwrap();
        assert!((total_mass(&out) - 1.0).abs() < 1e-6);
        assert!(out.values().iter().all(|v| *v >= 0.0));
        let c0 = rho.center_of_mass().unwrap();
        let c1 = out.center_of_mass().unwrap();
        let dx = grid.spacing[0];
        let shift = ((c1[0] - c0[0]).powi(2) + (c1[1] - c0[1]).powi(2)).sqrt();
        assert!(shift < 2.0 * dx, "shift {shift} vs cell {dx}");
        assert!(out.max_value() <= rho.max_value());
    }

    #[test]
    fn uniform_divergence_decays_peak_at_rate_two() {
        let sys = FlowSystem::uniform_divergence();
        let grid = square_grid(200, 2.0);
        let rho = DensityField::gaussian(grid.clone(), &[0.0, 0.0], 0.1).unwrap();
        let t = 1.0;
        let dt_max = 0.5 / courant_number(&sys, &grid, 1.0);
        let n = (t / dt_max).ceil() as usize;
        let out = evolve_density(&sys, &rho, t / n as f64, n).unwrap();
        let rate = -(out.max_value() / rho.max_value()).ln() / t;
        assert!((rate - 2.0).abs() < 0.2, "rate {rate}");
        assert!((total_mass(&out) - 1.0).abs() < 1e-6);
    }

    #[test]
    fn cfl_violation_reports_admissible_dt() {
        let sys = FlowSystem::rigid_rotation();
        let rho = DensityField::gaussian(square_grid(64, 4.0), &[1.0, 0.0], 0.3).unwrap();
        match evolve_density(&sys, &rho, 1.0, 1) {
            Err(Error::Cfl { admissible_dt, .. }) => {
                assert!(evolve_density(&sys, &rho, admissible_dt, 1).is_ok());
            }
            other => panic!("expected CFL error, got {other:?}"),
        }
    }

    #[test]
    fn outflow_is_booked_as_leak() {
        let sys = FlowSystem::uniform_divergence();
        let grid = square_grid(40, 1.0);
        let rho = DensityField::gaussian(grid.clone(), &[0.3, 0.3], 0.2).unwrap();
        let dt = 0.5 / courant_number(&sys, &grid, 1.0);
        let out = evolve_density(&sys, &rho, dt, 200).unwrap();
        assert!(out.leaked_mass() > 0.5);
        assert!((total_mass(&out) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn three_dimensional_transport() {
        let sys = FlowSystem::lorenz_canonical();
        let grid = Grid::new(vec![24, 24, 24], vec![-20.0, -25.0, 0.0], vec![20.0, 25.0, 50.0]).unwrap();
        let rho = DensityField::gaussian(grid.clone(), &[-8.0, -8.0, 27.0], 4.0).unwrap();
        let dt = 0.5 / courant_number(&sys, &grid, 1.0);
        let out = evolve_density(&sys, &rho, dt, 40).unwrap();
        assert!((total_mass(&out) - 1.0).abs() < 1e-10);
    }

    #[test]
    fn linearity_identity_case_is_exact() {
        let sys = FlowSystem::cubic_shear();
        let grid = square_grid(48, 1.0);
        let a = DensityField::gaussian(grid.clone(), &[0.2, 0.1], 0.15).unwrap();
        let b = DensityField::gaussian(grid.clone(), &[-0.3, 0.2], 0.2).unwrap();
        let dt = 0.5 / courant_number(&sys, &grid, 1.0);
        let r = linearity_check(&sys, &a, &b, 1.0, 0.0, dt, 30).unwrap();
        assert_eq!(r.max_abs_deviation, 0.0);
        let r = linearity_check(&sys, &a, &b, -1.7, 0.6, dt, 30).unwrap();
        assert!(r.relative_deviation < 1e-12, "{r:?}");
        let other = DensityField::zeros(square_grid(16, 1.0));
        assert!(linearity_check(&sys, &a, &other, 1.0, 1.0, dt, 1).is_err());
    }

    #[test]
    fn hull_volumes() {
        let square = vec![vec![0.0, 0.0], vec![2.0, 0.0], vec![2.0, 1.0], vec![0.0, 1.0], vec![1.0, 0.0]];
        assert!((hull_volume(&square).unwrap() - 2.0).abs() < 1e-12);
        let b = BoundingBox::new(vec![0.0, 0.0, 0.0], vec![1.0, 2.0, 3.0]).unwrap();
        let verts = box_vertices(&b);
        assert_eq!(verts.len(), 8 + 12);
        assert!((hull_volume(&verts).unwrap() - 6.0).abs() < 1e-12);
        // sheared, thin parallelepiped
        let thin: Vec<Vec<f64>> = verts
            .iter()
            .map(|v| vec![v[0] + 3.0 * v[1], v[1] - v[2], 1e-4 * v[2] + 10.0])
            .collect();
        assert!((hull_volume(&thin).unwrap() - 6e-4).abs() < 1e-12);
    }

    #[test]
    fn comoving_volume_cases() {
        let osc = FlowSystem::harmonic_oscillator();
        let b = BoundingBox::new(vec![0.9, -0.05], vec![1.0, 0.05]).unwrap();
        assert_eq!(comoving_volume(&osc, &b, 0.0, 0.01).unwrap(), 1.0);
        let r = comoving_volume(&osc, &b, 5.0, 0.001).unwrap();
        assert!((r - 1.0).abs() < 0.01, "{r}");
    }
}
