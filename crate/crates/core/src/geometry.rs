//! State-space geometry: fractal dimensions, sparseness probes, delay
//! embedding and statistics of time-averaged observables.

use std::collections::HashMap;

use rand::Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::dynamics::Trajectory;
use crate::error::{invalid, Error, Result};
use crate::seed::SeedStream;

/// Residual threshold (RMS in natural-log units) for accepting a scaling region.
pub const SCALING_RESIDUAL_MAX: f64 = 0.05;

/// Unordered set of finite points, stored flat.
#[derive(Debug, Clone, PartialEq)]
pub struct PointCloud {
    dim: usize,
    coords: Vec<f64>,
}

impl PointCloud {
    pub fn new(dim: usize, coords: Vec<f64>) -> Result<Self> {
        if dim == 0 {
            return Err(invalid("point cloud dimension must be positive"));
        }
        if coords.len() % dim != 0 {
            return Err(invalid("coordinate count is not a multiple of the dimension"));
        }
        if !coords.iter().all(|c| c.is_finite()) {
            return Err(invalid("point cloud contains non-finite coordinates"));
        }
        Ok(Self { dim, coords })
    }

    pub fn from_points(points: &[Vec<f64>]) -> Result<Self> {
        let dim = points.first().map_or(1, Vec::len);
        if points.iter().any(|p| p.len() != dim) {
            return Err(invalid("inconsistent point dimensions"));
        }
        Self::new(dim, points.concat())
    }

    /// 1-D cloud from scalar values.
    pub fn from_scalars(values: &[f64]) -> Result<Self> {
        Self::new(1, values.to_vec())
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.coords.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.coords.is_empty()
    }

    pub fn point(&self, i: usize) -> &[f64] {
        &self.coords[i * self.dim..(i + 1) * self.dim]
    }

    pub fn points(&self) -> impl Iterator<Item = &[f64]> {
        self.coords.chunks_exact(self.dim)
    }

    pub fn bounding_box(&self) -> Option<BoundingBox> {
        if self.is_empty() {
            return None;
        }
        let mut lower = vec![f64::INFINITY; self.dim];
        let mut upper = vec![f64::NEG_INFINITY; self.dim];
        for p in self.points() {
            for k in 0..self.dim {
                lower[k] = lower[k].min(p[k]);
                upper[k] = upper[k].max(p[k]);
            }
        }
        Some(BoundingBox { lower, upper })
    }

    /// Euclidean diameter of the bounding box.
    pub fn extent(&self) -> f64 {
        self.bounding_box().map_or(0.0, |b| b.diagonal())
    }

    pub fn translated(&self, offset: &[f64]) -> Self {
        let coords = self
            .coords
            .chunks_exact(self.dim)
            .flat_map(|p| p.iter().zip(offset).map(|(a, b)| a + b))
            .collect();
        Self { dim: self.dim, coords }
    }
}

impl TryFrom<&Trajectory> for PointCloud {
    type Error = Error;

    fn try_from(traj: &Trajectory) -> Result<Self> {
        Self::from_points(&traj.points)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BoundingBox {
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
}

impl BoundingBox {
    pub fn new(lower: Vec<f64>, upper: Vec<f64>) -> Result<Self> {
        if lower.len() != upper.len() || lower.is_empty() {
            return Err(invalid("bounding box corners must share a positive dimension"));
        }
        if lower.iter().zip(&upper).any(|(l, u)| !(l <= u) || !l.is_finite() || !u.is_finite()) {
            return Err(invalid("bounding box must satisfy lower <= upper"));
        }
        Ok(Self { lower, upper })
    }

    pub fn unit(dim: usize) -> Self {
        Self { lower: vec![0.0; dim], upper: vec![1.0; dim] }
    }

    pub fn dim(&self) -> usize {
        self.lower.len()
    }

    pub fn diagonal(&self) -> f64 {
        self.lower
            .iter()
            .zip(&self.upper)
            .map(|(l, u)| (u - l) * (u - l))
            .sum::<f64>()
            .sqrt()
    }
}

/// Uniformly sampled scalar record.
#[derive(Debug, Clone, PartialEq)]
pub struct TimeSeries {
    pub dt: f64,
    pub values: Vec<f64>,
}

impl TimeSeries {
    pub fn new(dt: f64, values: Vec<f64>) -> Result<Self> {
        if !(dt > 0.0) {
            return Err(invalid("time series dt must be positive"));
        }
        if !values.iter().all(|v| v.is_finite()) {
            return Err(invalid("time series contains non-finite values"));
        }
        Ok(Self { dt, values })
    }

    /// One coordinate of a trajectory.
    pub fn from_component(traj: &Trajectory, index: usize) -> Result<Self> {
        Self::new(traj.dt, traj.component(index))
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DimensionEstimate {
    pub value: f64,
    pub scales: Vec<f64>,
    pub fit_residual: f64,
    /// False when no scaling region met [`SCALING_RESIDUAL_MAX`].
    pub reliable: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MomentsRecord {
    pub mean: f64,
    pub variance: f64,
    pub skewness: f64,
    pub excess_kurtosis: f64,
    pub window: usize,
    pub n_windows: usize,
}

/// Ordinary least squares `y = slope * x + intercept` with RMS residual.
#[derive(Debug, Clone, Copy)]
pub(crate) struct LineFit {
    pub slope: f64,
    pub rms: f64,
}

pub(crate) fn fit_line(xs: &[f64], ys: &[f64]) -> LineFit {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let slope = if sxx > 0.0 { sxy / sxx } else { 0.0 };
    let intercept = my - slope * mx;
    let ss: f64 = xs
        .iter()
        .zip(ys)
        .map(|(x, y)| {
            let r = y - (slope * x + intercept);
            r * r
        })
        .sum();
    LineFit { slope, rms: (ss / n).sqrt() }
}

/// `n` geometrically spaced values from `lo` to `hi` inclusive.
pub fn geometric_scales(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![lo];
    }
    let ratio = (hi / lo).ln() / (n - 1) as f64;
    (0..n).map(|k| lo * (ratio * k as f64).exp()).collect()
}

// Points sitting on a cell edge stay put when the cloud is shifted and
// the subtraction rounds slightly low.
const EDGE_SLACK: f64 = 1e-9;

fn cell_key(p: &[f64], origin: &[f64], size: f64) -> Vec<i64> {
    p.iter().zip(origin).map(|(x, o)| ((x - o) / size + EDGE_SLACK).floor() as i64).collect()
}

/// Box-counting dimension on grids anchored at the bounding-box corner.
///
/// Scales run geometrically from `scale_min` to `scale_max`; the estimate is
/// the least-squares slope of `ln N(eps)` against `ln(1/eps)` over all scales.
pub fn box_counting_dimension(
    cloud: &PointCloud,
    scale_min: f64,
    scale_max: f64,
    n_scales: usize,
) -> Result<DimensionEstimate> {
    if cloud.is_empty() {
        return Err(invalid("box counting needs a non-empty cloud"));
    }
    if !(scale_min > 0.0 && scale_min < scale_max && scale_max.is_finite()) {
        return Err(invalid("box counting needs 0 < scale_min < scale_max"));
    }
    if n_scales < 4 {
        return Err(invalid("box counting needs at least 4 scales"));
    }
    let origin = cloud.bounding_box().expect("non-empty").lower;
    let scales = geometric_scales(scale_min, scale_max, n_scales);
    let counts: Vec<usize> = scales
        .par_iter()
        .map(|&s| {
            let mut cells: Vec<Vec<i64>> = cloud.points().map(|p| cell_key(p, &origin, s)).collect();
            cells.sort_unstable();
            cells.dedup();
            cells.len()
        })
        .collect();
    let xs: Vec<f64> = scales.iter().map(|s| -s.ln()).collect();
    let ys: Vec<f64> = counts.iter().map(|&c| (c as f64).ln()).collect();
    let fit = fit_line(&xs, &ys);
    Ok(DimensionEstimate {
        value: fit.slope.max(0.0),
        scales,
        fit_residual: fit.rms,
        reliable: true,
    })
}

/// Uniform-grid spatial index with a fixed cell size.
struct GridIndex {
    origin: Vec<f64>,
    cell: f64,
    cells: HashMap<Vec<i64>, Vec<u32>>,
    offsets: Vec<Vec<i64>>,
}

impl GridIndex {
    fn new(cloud: &PointCloud, cell: f64) -> Self {
        let origin = cloud.bounding_box().map(|b| b.lower).unwrap_or_default();
        let mut cells: HashMap<Vec<i64>, Vec<u32>> = HashMap::new();
        for (i, p) in cloud.points().enumerate() {
            cells.entry(cell_key(p, &origin, cell)).or_default().push(i as u32);
        }
        let dim = cloud.dim();
        let offsets = (0..3usize.pow(dim as u32))
            .map(|mut code| {
                (0..dim)
                    .map(|_| {
                        let o = (code % 3) as i64 - 1;
                        code /= 3;
                        o
                    })
                    .collect()
            })
            .collect();
        Self { origin, cell, cells, offsets }
    }

    /// Calls `visit` with the index of every point in the 3^d cells around `p`.
    fn for_each_near(&self, p: &[f64], mut visit: impl FnMut(u32) -> bool) {
        let base = cell_key(p, &self.origin, self.cell);
        let mut key = base.clone();
        for off in &self.offsets {
            for k in 0..base.len() {
                key[k] = base[k] + off[k];
            }
            if let Some(ids) = self.cells.get(&key) {
                for &j in ids {
                    if !visit(j) {
                        return;
                    }
                }
            }
        }
    }
}

fn dist2(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Correlation integral `C(r)`: fraction of distinct pairs closer than `r`.
pub fn correlation_integral(cloud: &PointCloud, radii: &[f64]) -> Result<Vec<f64>> {
    if radii.is_empty() || radii.iter().any(|r| !(*r > 0.0)) {
        return Err(invalid("radii must be positive"));
    }
    if radii.windows(2).any(|w| w[0] >= w[1]) {
        return Err(invalid("radii must be strictly ascending"));
    }
    let n = cloud.len();
    if n < 2 {
        return Err(Error::InsufficientData { needed: 2, got: n });
    }
    let r_max = *radii.last().expect("non-empty");
    let r2: Vec<f64> = radii.iter().map(|r| r * r).collect();
    let index = GridIndex::new(cloud, r_max);
    let bins = (0..n)
        .into_par_iter()
        .fold(
            || vec![0u64; radii.len()],
            |mut acc, i| {
                let p = cloud.point(i);
                index.for_each_near(p, |j| {
                    if (j as usize) > i {
                        let d2 = dist2(p, cloud.point(j as usize));
                        let k = r2.partition_point(|&r| r <= d2);
                        if k < acc.len() {
                            acc[k] += 1;
                        }
                    }
                    true
                });
                acc
            },
        )
        .reduce(
            || vec![0u64; radii.len()],
            |mut a, b| {
                a.iter_mut().zip(b).for_each(|(x, y)| *x += y);
                a
            },
        );
    let total = n as f64 * (n as f64 - 1.0) / 2.0;
    let mut cum = 0u64;
    Ok(bins
        .into_iter()
        .map(|b| {
            cum += b;
            cum as f64 / total
        })
        .collect())
}

/// Grassberger-Procaccia style dimension.
///
/// The slope of `ln C(r)` against `ln r` is fitted over the widest contiguous
/// run of radii (at least four) whose fit residual stays below
/// [`SCALING_RESIDUAL_MAX`]; ties go to the smaller residual. Without such a
/// run the estimate over all radii with `C > 0` is returned and marked
/// unreliable.
pub fn correlation_dimension(cloud: &PointCloud, radii: &[f64]) -> Result<DimensionEstimate> {
    if cloud.len() < 1000 {
        return Err(Error::InsufficientData { needed: 1000, got: cloud.len() });
    }
    if radii.len() < 4 {
        return Err(invalid("correlation dimension needs at least 4 radii"));
    }
    let c = correlation_integral(cloud, radii)?;
    let usable: Vec<usize> = (0..radii.len()).filter(|&k| c[k] > 0.0).collect();
    let xs: Vec<f64> = usable.iter().map(|&k| radii[k].ln()).collect();
    let ys: Vec<f64> = usable.iter().map(|&k| c[k].ln()).collect();
    if xs.len() < 2 {
        return Ok(DimensionEstimate {
            value: 0.0,
            scales: usable.iter().map(|&k| radii[k]).collect(),
            fit_residual: f64::INFINITY,
            reliable: false,
        });
    }
    let mut best: Option<(usize, usize, LineFit)> = None;
    for a in 0..xs.len() {
        for b in a + 4..=xs.len() {
            let fit = fit_line(&xs[a..b], &ys[a..b]);
            if fit.rms >= SCALING_RESIDUAL_MAX {
                continue;
            }
            let better = match &best {
                None => true,
                Some((ba, bb, bf)) => {
                    let (w, bw) = (b - a, bb - ba);
                    w > bw || (w == bw && fit.rms < bf.rms)
                }
            };
            if better {
                best = Some((a, b, fit));
            }
        }
    }
    let (a, b, fit, reliable) = match best {
        Some((a, b, fit)) => (a, b, fit, true),
        None => (0, xs.len(), fit_line(&xs, &ys), false),
    };
    Ok(DimensionEstimate {
        value: fit.slope.max(0.0),
        scales: usable[a..b].iter().map(|&k| radii[k]).collect(),
        fit_residual: fit.rms,
        reliable,
    })
}

/// Radii spanning `[lo_frac, hi_frac]` of the cloud's bounding-box diagonal.
pub fn relative_radii(cloud: &PointCloud, lo_frac: f64, hi_frac: f64, n: usize) -> Vec<f64> {
    let d = cloud.extent();
    geometric_scales(lo_frac * d, hi_frac * d, n)
}

/// Fraction of uniform probes in `bounding_box` lying within each `eps` of the cloud.
///
/// Probes are drawn sequentially from the `sparseness_probe` stream of `seed`,
/// so the result does not depend on the thread count.
pub fn sparseness_probe(
    cloud: &PointCloud,
    n_probes: usize,
    epsilons: &[f64],
    bounding_box: &BoundingBox,
    seed: u64,
) -> Result<Vec<f64>> {
    if cloud.is_empty() {
        return Err(invalid("sparseness probe needs a non-empty cloud"));
    }
    if n_probes < 1000 {
        return Err(invalid("sparseness probe needs at least 1000 probes"));
    }
    if epsilons.is_empty() || epsilons.iter().any(|e| !(*e > 0.0)) {
        return Err(invalid("epsilons must be positive"));
    }
    if epsilons.windows(2).any(|w| w[0] <= w[1]) {
        return Err(invalid("epsilons must be strictly descending"));
    }
    if bounding_box.dim() != cloud.dim() {
        return Err(invalid("bounding box dimension does not match the cloud"));
    }
    let dim = cloud.dim();
    let mut rng = SeedStream::new(seed, "sparseness_probe").rng();
    let probes: Vec<f64> = (0..n_probes)
        .flat_map(|_| {
            (0..dim)
                .map(|k| {
                    let (l, u) = (bounding_box.lower[k], bounding_box.upper[k]);
                    l + (u - l) * rng.random::<f64>()
                })
                .collect::<Vec<_>>()
        })
        .collect();
    Ok(epsilons
        .iter()
        .map(|&eps| {
            let index = GridIndex::new(cloud, eps);
            let eps2 = eps * eps;
            let hits = probes
                .par_chunks_exact(dim)
                .filter(|p| {
                    let mut hit = false;
                    index.for_each_near(p, |j| {
                        hit = dist2(p, cloud.point(j as usize)) <= eps2;
                        !hit
                    });
                    hit
                })
                .count();
            hits as f64 / n_probes as f64
        })
        .collect())
}

/// Delay-coordinate cloud: point `j` is `(s_j, s_{j+tau}, ..., s_{j+(m-1)tau})`.
pub fn delay_embed(series: &TimeSeries, tau: usize, m: usize) -> Result<PointCloud> {
    if tau == 0 || m == 0 {
        return Err(invalid("delay embedding needs tau >= 1 and m >= 1"));
    }
    let span = (m - 1) * tau;
    if series.len() <= span {
        return Err(invalid(format!(
            "series of length {} too short for (m-1)*tau = {span}",
            series.len()
        )));
    }
    let count = series.len() - span;
    let mut coords = Vec::with_capacity(count * m);
    for j in 0..count {
        coords.extend((0..m).map(|k| series.values[j + k * tau]));
    }
    PointCloud::new(m, coords)
}

/// Delay chosen from the sample autocorrelation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct DelaySelection {
    pub tau: usize,
    /// Set when no crossing occurred within `length / 4` lags.
    pub fallback: bool,
}

/// First lag at which the sample autocorrelation reaches zero, to within the
/// white-noise band `2 / sqrt(n)`.
pub fn select_delay(series: &TimeSeries) -> Result<DelaySelection> {
    let n = series.len();
    if n < 8 {
        return Err(Error::InsufficientData { needed: 8, got: n });
    }
    let mean = series.values.iter().sum::<f64>() / n as f64;
    let dev: Vec<f64> = series.values.iter().map(|v| v - mean).collect();
    let c0: f64 = dev.iter().map(|d| d * d).sum();
    if !(c0 > 0.0) || c0 / (n as f64) <= f64::EPSILON * mean.abs().max(1.0) {
        return Err(invalid("delay selection needs a series with positive variance"));
    }
    let band = 2.0 / (n as f64).sqrt();
    let max_lag = (n / 4).max(1);
    for lag in 1..=max_lag {
        let c: f64 = dev[..n - lag].iter().zip(&dev[lag..]).map(|(a, b)| a * b).sum();
        if c / c0 <= band {
            return Ok(DelaySelection { tau: lag, fallback: false });
        }
    }
    Ok(DelaySelection { tau: max_lag, fallback: true })
}

/// Mean, variance and standardised moments of a sample.
pub fn moments(values: &[f64]) -> MomentsRecord {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let (mut m2, mut m3, mut m4) = (0.0, 0.0, 0.0);
    for v in values {
        let d = v - mean;
        let d2 = d * d;
        m2 += d2;
        m3 += d2 * d;
        m4 += d2 * d2;
    }
    m2 /= n;
    m3 /= n;
    m4 /= n;
    let (skewness, excess_kurtosis) = if m2 > 0.0 {
        (m3 / m2.powf(1.5), m4 / (m2 * m2) - 3.0)
    } else {
        (0.0, 0.0)
    };
    MomentsRecord {
        mean,
        variance: m2,
        skewness,
        excess_kurtosis,
        window: 1,
        n_windows: values.len(),
    }
}

/// Minimum number of windows accepted by [`time_average_distribution`].
pub const MIN_WINDOWS: usize = 30;

/// Moments of the means of consecutive non-overlapping windows.
pub fn time_average_distribution(series: &TimeSeries, window: usize) -> Result<MomentsRecord> {
    if window == 0 || window > series.len() {
        return Err(invalid("window must lie in 1..=series length"));
    }
    let n_windows = series.len() / window;
    if n_windows < MIN_WINDOWS {
        return Err(Error::InsufficientData { needed: MIN_WINDOWS, got: n_windows });
    }
    let means: Vec<f64> = series
        .values
        .chunks_exact(window)
        .map(|w| w.iter().sum::<f64>() / window as f64)
        .collect();
    Ok(MomentsRecord { window, n_windows, ..moments(&means) })
}
