//! Planar point-cloud primitives: Hausdorff distance, offset membership, and
//! the interleaving check used by the sampling-stability experiments.
//!
//! Everything is closed-ball: a point at distance exactly `r` is inside the
//! `r`-offset.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum GeomError {
    #[error("operation requires a nonempty point cloud")]
    EmptyCloud,
}

/// A point in the plane.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    pub const fn new(x: f64, y: f64) -> Self {
        Point { x, y }
    }

    #[inline]
    pub fn dot(self, other: Point) -> f64 {
        self.x * other.x + self.y * other.y
    }

    #[inline]
    pub fn norm(self) -> f64 {
        self.x.hypot(self.y)
    }

    #[inline]
    pub fn dist2(self, other: Point) -> f64 {
        let dx = self.x - other.x;
        let dy = self.y - other.y;
        dx * dx + dy * dy
    }

    #[inline]
    pub fn dist(self, other: Point) -> f64 {
        self.dist2(other).sqrt()
    }

    pub fn is_finite(self) -> bool {
        self.x.is_finite() && self.y.is_finite()
    }
}

impl std::ops::Add for Point {
    type Output = Point;
    fn add(self, rhs: Point) -> Point {
        Point::new(self.x + rhs.x, self.y + rhs.y)
    }
}

impl std::ops::Sub for Point {
    type Output = Point;
    fn sub(self, rhs: Point) -> Point {
        Point::new(self.x - rhs.x, self.y - rhs.y)
    }
}

impl std::ops::Mul<f64> for Point {
    type Output = Point;
    fn mul(self, s: f64) -> Point {
        Point::new(self.x * s, self.y * s)
    }
}

/// A finite multiset of planar points. Duplicates are allowed; operations
/// that need distinct points (triangulation) deduplicate on their own.
#[derive(Debug, Clone, Default)]
pub struct PointCloud {
    pub points: Vec<Point>,
}

impl PointCloud {
    pub fn new(points: Vec<Point>) -> Self {
        PointCloud { points }
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Axis-aligned bounding box as (min, max); `None` when empty.
    pub fn bbox(&self) -> Option<(Point, Point)> {
        let first = *self.points.first()?;
        let mut lo = first;
        let mut hi = first;
        for p in &self.points {
            lo.x = lo.x.min(p.x);
            lo.y = lo.y.min(p.y);
            hi.x = hi.x.max(p.x);
            hi.y = hi.y.max(p.y);
        }
        Some((lo, hi))
    }

    pub fn diameter_upper_bound(&self) -> f64 {
        match self.bbox() {
            Some((lo, hi)) => (hi.x - lo.x).hypot(hi.y - lo.y),
            None => 0.0,
        }
    }

    /// Squared distance from `q` to the nearest cloud point.
    pub fn min_dist2(&self, q: Point) -> f64 {
        self.points
            .iter()
            .map(|p| p.dist2(q))
            .fold(f64::INFINITY, f64::min)
    }
}

/// Uniform bucket grid over a point set for nearest-point queries. Results
/// are exact: queries fall back to ring expansion until the candidate ring
/// cannot contain anything closer.
pub struct BucketGrid<'a> {
    points: &'a [Point],
    origin: Point,
    cell: f64,
    nx: usize,
    ny: usize,
    // CSR layout: bucket b holds order[start[b]..start[b+1]]
    start: Vec<u32>,
    order: Vec<u32>,
}

impl<'a> BucketGrid<'a> {
    pub fn build(points: &'a [Point]) -> Self {
        assert!(!points.is_empty(), "bucket grid over empty set");
        let mut lo = points[0];
        let mut hi = points[0];
        for p in points {
            lo.x = lo.x.min(p.x);
            lo.y = lo.y.min(p.y);
            hi.x = hi.x.max(p.x);
            hi.y = hi.y.max(p.y);
        }
        let extent = ((hi.x - lo.x).max(hi.y - lo.y)).max(1e-300);
        // Aim for O(1) points per bucket.
        let target = (points.len() as f64).sqrt().ceil().max(1.0);
        let cell = (extent / target).max(1e-300);
        let nx = (((hi.x - lo.x) / cell).floor() as usize + 1).max(1);
        let ny = (((hi.y - lo.y) / cell).floor() as usize + 1).max(1);
        let idx = |p: &Point| -> usize {
            let ix = (((p.x - lo.x) / cell) as usize).min(nx - 1);
            let iy = (((p.y - lo.y) / cell) as usize).min(ny - 1);
            iy * nx + ix
        };
        let mut counts = vec![0u32; nx * ny + 1];
        for p in points {
            counts[idx(p) + 1] += 1;
        }
        for b in 1..counts.len() {
            counts[b] += counts[b - 1];
        }
        let start = counts.clone();
        let mut cursor = counts;
        let mut order = vec![0u32; points.len()];
        for (i, p) in points.iter().enumerate() {
            let b = idx(p);
            order[cursor[b] as usize] = i as u32;
            cursor[b] += 1;
        }
        BucketGrid {
            points,
            origin: lo,
            cell,
            nx,
            ny,
            start,
            order,
        }
    }

    /// Cell coordinates of `q`, clamped to a safe integer range; queries far
    /// outside the grid stay well away from overflow.
    #[inline]
    fn cell_of(&self, q: Point) -> (isize, isize) {
        let ix = ((q.x - self.origin.x) / self.cell).floor().clamp(-1e15, 1e15) as isize;
        let iy = ((q.y - self.origin.y) / self.cell).floor().clamp(-1e15, 1e15) as isize;
        (ix, iy)
    }

    #[inline]
    fn scan_bucket(&self, ix: usize, iy: usize, q: Point, best: &mut f64) {
        let b = iy * self.nx + ix;
        let s = self.start[b] as usize;
        let e = self.start[b + 1] as usize;
        for &i in &self.order[s..e] {
            let d2 = self.points[i as usize].dist2(q);
            if d2 < *best {
                *best = d2;
            }
        }
    }

    /// Exact squared distance from `q` to the nearest stored point. Expands
    /// rings of cells around the query (clipped to the grid) until no closer
    /// point can exist.
    pub fn nearest_dist2(&self, q: Point) -> f64 {
        let (cx, cy) = self.cell_of(q);
        let (nx, ny) = (self.nx as isize, self.ny as isize);
        // Anchor inside the grid; `off` is how many cells away q's cell is.
        let ax = cx.clamp(0, nx - 1);
        let ay = cy.clamp(0, ny - 1);
        let off = (cx - ax).abs().max((cy - ay).abs());
        let span = nx.max(ny);
        let mut best = f64::INFINITY;
        for ring in 0..=span {
            // Any cell in ring `ring` around the anchor is at Chebyshev
            // cell-distance >= max(off, ring - off) from q's cell, hence at
            // geometric distance >= (that - 1) * cell.
            let lower_cells = off.max(ring - off) - 1;
            if lower_cells > 0 {
                let reach = lower_cells as f64 * self.cell;
                if reach * reach > best {
                    break;
                }
            }
            let x_lo = (ax - ring).max(0);
            let x_hi = (ax + ring).min(nx - 1);
            if ring == 0 {
                self.scan_bucket(ax as usize, ay as usize, q, &mut best);
                continue;
            }
            if ay - ring >= 0 {
                for ix in x_lo..=x_hi {
                    self.scan_bucket(ix as usize, (ay - ring) as usize, q, &mut best);
                }
            }
            if ay + ring < ny {
                for ix in x_lo..=x_hi {
                    self.scan_bucket(ix as usize, (ay + ring) as usize, q, &mut best);
                }
            }
            let y_lo_in = (ay - ring + 1).max(0);
            let y_hi_in = (ay + ring - 1).min(ny - 1);
            if ax - ring >= 0 {
                for iy in y_lo_in..=y_hi_in {
                    self.scan_bucket((ax - ring) as usize, iy as usize, q, &mut best);
                }
            }
            if ax + ring < nx {
                for iy in y_lo_in..=y_hi_in {
                    self.scan_bucket((ax + ring) as usize, iy as usize, q, &mut best);
                }
            }
        }
        debug_assert!(best.is_finite());
        best
    }

    /// True iff some stored point lies within (closed) distance `r` of `q`.
    /// Early-exits on the first witness; the negative answer is exact.
    pub fn within(&self, q: Point, r: f64) -> bool {
        let r2 = r * r;
        let x_lo = (((q.x - r - self.origin.x) / self.cell).floor().max(0.0)) as usize;
        let y_lo = (((q.y - r - self.origin.y) / self.cell).floor().max(0.0)) as usize;
        let x_hi_f = ((q.x + r - self.origin.x) / self.cell).floor();
        let y_hi_f = ((q.y + r - self.origin.y) / self.cell).floor();
        if x_hi_f < 0.0 || y_hi_f < 0.0 || x_lo >= self.nx || y_lo >= self.ny {
            return false;
        }
        let x_hi = (x_hi_f as usize).min(self.nx - 1);
        let y_hi = (y_hi_f as usize).min(self.ny - 1);
        for iy in y_lo..=y_hi {
            for ix in x_lo..=x_hi {
                // Cheap reject: closest corner of the cell farther than r.
                let lo_x = self.origin.x + ix as f64 * self.cell;
                let lo_y = self.origin.y + iy as f64 * self.cell;
                let ddx = (lo_x - q.x).max(q.x - (lo_x + self.cell)).max(0.0);
                let ddy = (lo_y - q.y).max(q.y - (lo_y + self.cell)).max(0.0);
                if ddx * ddx + ddy * ddy > r2 {
                    continue;
                }
                let b = iy * self.nx + ix;
                let s = self.start[b] as usize;
                let e = self.start[b + 1] as usize;
                for &i in &self.order[s..e] {
                    if self.points[i as usize].dist2(q) <= r2 {
                        return true;
                    }
                }
            }
        }
        false
    }
}

/// Directed Hausdorff distance sup_{a} dist(a, b), brute force.
fn directed_brute(a: &[Point], b: &[Point]) -> f64 {
    let mut worst = 0.0f64;
    for p in a {
        let mut best = f64::INFINITY;
        for q in b {
            let d2 = p.dist2(*q);
            if d2 < best {
                best = d2;
            }
        }
        if best > worst {
            worst = best;
        }
    }
    worst.sqrt()
}

/// Hausdorff distance by exhaustive pairwise scan. Reference implementation;
/// the grid-accelerated [`hausdorff`] must agree with it exactly.
pub fn hausdorff_brute(a: &PointCloud, b: &PointCloud) -> Result<f64, GeomError> {
    if a.is_empty() || b.is_empty() {
        return Err(GeomError::EmptyCloud);
    }
    Ok(directed_brute(&a.points, &b.points).max(directed_brute(&b.points, &a.points)))
}

fn directed_grid(a: &[Point], grid_b: &BucketGrid<'_>) -> f64 {
    let mut worst = 0.0f64;
    for p in a {
        let d2 = grid_b.nearest_dist2(*p);
        if d2 > worst {
            worst = d2;
        }
    }
    worst.sqrt()
}

/// Hausdorff distance with bucket-grid acceleration. Exact: the grid search
/// computes true nearest distances, so the result equals [`hausdorff_brute`].
pub fn hausdorff(a: &PointCloud, b: &PointCloud) -> Result<f64, GeomError> {
    if a.is_empty() || b.is_empty() {
        return Err(GeomError::EmptyCloud);
    }
    let ga = BucketGrid::build(&a.points);
    let gb = BucketGrid::build(&b.points);
    Ok(directed_grid(&a.points, &gb).max(directed_grid(&b.points, &ga)))
}

/// Is `x` in the closed `r`-offset of the cloud?
pub fn offset_contains(cloud: &PointCloud, r: f64, x: Point) -> bool {
    !cloud.is_empty() && cloud.min_dist2(x) <= r * r
}

/// Checks the offset interleaving `A^(r) ⊆ B^(r+eps)` on a probe set: every
/// probe inside `a`'s r-offset must lie inside `b`'s (r+eps)-offset.
pub fn interleaving_check(
    a: &PointCloud,
    b: &PointCloud,
    eps: f64,
    r: f64,
    probes: &PointCloud,
) -> bool {
    probes
        .points
        .iter()
        .all(|&p| !offset_contains(a, r, p) || offset_contains(b, r + eps, p))
}
