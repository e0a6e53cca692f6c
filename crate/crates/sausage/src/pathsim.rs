//! Simulation of drifted planar Brownian motion and a Lipschitz
//! Ornstein-Uhlenbeck diffusion, plus the sampling operations (subsampling,
//! observation noise, polygonal densification) and pathwise regularity
//! statistics used by the stability experiments.
//!
//! The continuous path is represented by its finest simulated grid; all
//! "continuous" quantities (range cloud, modulus of continuity) are evaluated
//! on that reference grid.

use crate::geometry::{Point, PointCloud};
use crate::rng::CounterRng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// RNG substreams, so that path increments and observation noise drawn from
/// the same seed never collide.
const STREAM_INCREMENTS: u64 = 0;
const STREAM_NOISE: u64 = 1;

#[derive(Debug, Error)]
pub enum PathError {
    #[error("non-finite parameter: {0}")]
    NonFinite(&'static str),
    #[error("time step must satisfy 0 < dt <= T (dt={dt}, T={t})")]
    BadStep { dt: f64, t: f64 },
    #[error("theta must be nonnegative and finite")]
    BadTheta,
    #[error("drift vector must be nonzero")]
    ZeroDrift,
    #[error("partition index {0} out of range for a path of {1} samples")]
    IndexOutOfRange(usize, usize),
    #[error("partition must start at 0, end at the last index, and increase")]
    BadPartition,
}

/// Parameters of the drifted Brownian motion `X_t = x0 + mu*t + B_t`.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct DriftedBmParams {
    pub x0: [f64; 2],
    /// Drift vector (space units per time unit). May be zero here; the
    /// regeneration machinery rejects zero drift itself.
    pub mu: [f64; 2],
    /// Time horizon.
    pub t_max: f64,
    /// Step of the simulation grid.
    pub dt: f64,
    pub seed: u64,
    /// Scale applied to the Gaussian increments. 1 is the model; 0 gives the
    /// deterministic ramp used as a test fixture.
    #[serde(default = "default_noise_scale")]
    pub noise_scale: f64,
}

fn default_noise_scale() -> f64 {
    1.0
}

impl DriftedBmParams {
    pub fn new(x0: [f64; 2], mu: [f64; 2], t_max: f64, dt: f64, seed: u64) -> Self {
        DriftedBmParams {
            x0,
            mu,
            t_max,
            dt,
            seed,
            noise_scale: 1.0,
        }
    }

    pub fn with_noise_scale(mut self, scale: f64) -> Self {
        self.noise_scale = scale;
        self
    }

    fn validate(&self) -> Result<(), PathError> {
        if !(self.x0[0].is_finite() && self.x0[1].is_finite()) {
            return Err(PathError::NonFinite("x0"));
        }
        if !(self.mu[0].is_finite() && self.mu[1].is_finite()) {
            return Err(PathError::NonFinite("mu"));
        }
        if !self.t_max.is_finite() || !self.dt.is_finite() || !self.noise_scale.is_finite() {
            return Err(PathError::NonFinite("t_max/dt/noise_scale"));
        }
        if self.dt <= 0.0 || self.t_max < self.dt {
            return Err(PathError::BadStep {
                dt: self.dt,
                t: self.t_max,
            });
        }
        Ok(())
    }
}

/// A sampled path: a strictly increasing time grid starting at 0 and the
/// matching planar positions.
#[derive(Debug, Clone)]
pub struct PathSample {
    pub times: Vec<f64>,
    pub points: Vec<Point>,
    pub params: DriftedBmParams,
}

impl PathSample {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    /// The full-resolution range cloud.
    pub fn cloud(&self) -> PointCloud {
        PointCloud::new(self.points.clone())
    }

    /// Positions up to and including time index `last`.
    pub fn prefix_cloud(&self, last: usize) -> PointCloud {
        PointCloud::new(self.points[..=last].to_vec())
    }
}

/// Time grid shared by both processes: 0, dt, 2dt, ..., t_max (last step may
/// be shorter so the grid always ends exactly at t_max).
fn time_grid(t_max: f64, dt: f64) -> Vec<f64> {
    let n_full = (t_max / dt + 1e-9).floor() as usize;
    let mut times = Vec::with_capacity(n_full + 2);
    for i in 0..=n_full {
        times.push(i as f64 * dt);
    }
    let last = *times.last().unwrap();
    if t_max - last > 1e-12 * t_max.max(1.0) {
        times.push(t_max);
    } else {
        *times.last_mut().unwrap() = t_max;
    }
    times
}

/// Simulates `X_t = x0 + mu*t + B_t` with exact Gaussian increments per grid
/// step. Deterministic given the seed, regardless of scheduling.
pub fn simulate_bm(params: &DriftedBmParams) -> Result<PathSample, PathError> {
    params.validate()?;
    let times = time_grid(params.t_max, params.dt);
    let rng = CounterRng::new(params.seed, STREAM_INCREMENTS);
    let mut points = Vec::with_capacity(times.len());
    let mut cur = Point::new(params.x0[0], params.x0[1]);
    points.push(cur);
    for i in 1..times.len() {
        let step = times[i] - times[i - 1];
        let (g0, g1) = rng.normal_pair((i - 1) as u64);
        let s = step.sqrt() * params.noise_scale;
        cur = Point::new(
            cur.x + params.mu[0] * step + s * g0,
            cur.y + params.mu[1] * step + s * g1,
        );
        points.push(cur);
    }
    Ok(PathSample {
        times,
        points,
        params: *params,
    })
}

/// Euler-Maruyama for the Ornstein-Uhlenbeck diffusion `dX = -theta X dt + dW`,
/// the built-in globally Lipschitz example. With `theta = 0` and the same
/// seed this reproduces driftless [`simulate_bm`] exactly.
pub fn simulate_ou(theta: f64, params: &DriftedBmParams) -> Result<PathSample, PathError> {
    params.validate()?;
    if !(theta.is_finite() && theta >= 0.0) {
        return Err(PathError::BadTheta);
    }
    let times = time_grid(params.t_max, params.dt);
    let rng = CounterRng::new(params.seed, STREAM_INCREMENTS);
    let mut points = Vec::with_capacity(times.len());
    let mut cur = Point::new(params.x0[0], params.x0[1]);
    points.push(cur);
    for i in 1..times.len() {
        let step = times[i] - times[i - 1];
        let (g0, g1) = rng.normal_pair((i - 1) as u64);
        let s = step.sqrt() * params.noise_scale;
        cur = Point::new(
            cur.x - theta * cur.x * step + s * g0,
            cur.y - theta * cur.y * step + s * g1,
        );
        points.push(cur);
    }
    Ok(PathSample {
        times,
        points,
        params: *params,
    })
}

/// Pathwise modulus of continuity on the sample:
/// max over index pairs with `|t_i - t_j| <= delta` of the displacement.
/// Exact sliding-window scan, O(n * window).
pub fn modulus_of_continuity(path: &PathSample, delta: f64) -> f64 {
    if delta <= 0.0 {
        return 0.0;
    }
    let n = path.len();
    let mut worst2 = 0.0f64;
    let mut j_hi = 0usize;
    for i in 0..n {
        if j_hi < i + 1 {
            j_hi = i + 1;
        }
        while j_hi < n && path.times[j_hi] - path.times[i] <= delta {
            j_hi += 1;
        }
        for j in (i + 1)..j_hi {
            let d2 = path.points[i].dist2(path.points[j]);
            if d2 > worst2 {
                worst2 = d2;
            }
        }
    }
    worst2.sqrt()
}

/// A subsampling schedule: indices into a path's time grid.
#[derive(Debug, Clone)]
pub struct Partition {
    pub indices: Vec<usize>,
    /// Largest gap between consecutive selected times.
    pub mesh: f64,
}

impl Partition {
    pub fn from_indices(path: &PathSample, indices: Vec<usize>) -> Result<Self, PathError> {
        let n = path.len();
        if indices.first() != Some(&0) || indices.last() != Some(&(n - 1)) {
            return Err(PathError::BadPartition);
        }
        let mut mesh = 0.0f64;
        for w in indices.windows(2) {
            if w[1] <= w[0] {
                return Err(PathError::BadPartition);
            }
            if w[1] >= n {
                return Err(PathError::IndexOutOfRange(w[1], n));
            }
            mesh = mesh.max(path.times[w[1]] - path.times[w[0]]);
        }
        Ok(Partition { indices, mesh })
    }

    /// Every sample index.
    pub fn full(path: &PathSample) -> Self {
        let indices: Vec<usize> = (0..path.len()).collect();
        Partition::from_indices(path, indices).expect("full partition is valid")
    }

    /// Every `stride`-th index, always keeping the final one.
    pub fn stride(path: &PathSample, stride: usize) -> Result<Self, PathError> {
        let stride = stride.max(1);
        let n = path.len();
        let mut indices: Vec<usize> = (0..n).step_by(stride).collect();
        if *indices.last().unwrap() != n - 1 {
            indices.push(n - 1);
        }
        Partition::from_indices(path, indices)
    }
}

/// The sampled point cloud of a partition. Duplicate positions are retained;
/// deduplication happens in the filtration layer.
pub fn subsample(path: &PathSample, part: &Partition) -> Result<PointCloud, PathError> {
    let n = path.len();
    let mut points = Vec::with_capacity(part.indices.len());
    for &i in &part.indices {
        if i >= n {
            return Err(PathError::IndexOutOfRange(i, n));
        }
        points.push(path.points[i]);
    }
    Ok(PointCloud::new(points))
}

/// Perturbs each point by an independent uniform-in-disk displacement of
/// radius at most `eta`; returns the noisy cloud and the realized maximal
/// displacement (always `<= eta`, and finite, as the noise model requires).
pub fn add_noise(cloud: &PointCloud, eta: f64, seed: u64) -> (PointCloud, f64) {
    let rng = CounterRng::new(seed, STREAM_NOISE);
    let mut realized = 0.0f64;
    let points = cloud
        .points
        .iter()
        .enumerate()
        .map(|(i, p)| {
            let (dx, dy) = rng.in_disk(i as u64, eta);
            realized = realized.max(dx.hypot(dy));
            Point::new(p.x + dx, p.y + dy)
        })
        .collect();
    (PointCloud::new(points), realized)
}

/// Points along the polygonal interpolation of the selected samples, spaced
/// at most `h` apart along each segment, so the cloud is (h/2)-dense in the
/// interpolated curve.
pub fn polygonal_densify(
    path: &PathSample,
    part: &Partition,
    h: f64,
) -> Result<PointCloud, PathError> {
    if !(h.is_finite() && h > 0.0) {
        return Err(PathError::NonFinite("h"));
    }
    let cloud = subsample(path, part)?;
    let verts = &cloud.points;
    let mut out = Vec::with_capacity(verts.len());
    out.push(verts[0]);
    for w in verts.windows(2) {
        let (p, q) = (w[0], w[1]);
        let len = p.dist(q);
        let m = if len <= h {
            1
        } else {
            (len / h).ceil() as usize
        };
        for s in 1..=m {
            let t = s as f64 / m as f64;
            out.push(Point::new(p.x + (q.x - p.x) * t, p.y + (q.y - p.y) * t));
        }
    }
    Ok(PointCloud::new(out))
}

/// Longitudinal coordinates `U_i = <X_i, mu/|mu|>`.
pub fn project_longitudinal(path: &PathSample, mu: [f64; 2]) -> Result<Vec<f64>, PathError> {
    let norm = mu[0].hypot(mu[1]);
    if !(norm.is_finite() && norm > 0.0) {
        return Err(PathError::ZeroDrift);
    }
    let e = Point::new(mu[0] / norm, mu[1] / norm);
    Ok(path.points.iter().map(|p| p.dot(e)).collect())
}
