//! Alpha filtration of a planar point cloud.
//!
//! The alpha complex is the subcomplex of the Delaunay triangulation whose
//! persistence reproduces the union-of-balls (offset) filtration of the
//! cloud; the filtration parameter is the ball *radius*, never the diameter.
//!
//! The Delaunay triangulation is built by incremental Bowyer-Watson over a
//! virtual vertex at infinity. Predicates are evaluated in floating point
//! with Shewchuk-style error filters; results inside the uncertainty band
//! fall back to a deterministic hash-derived jitter of magnitude
//! `~1e-12 * diameter`, so degenerate (cocircular/collinear) inputs resolve
//! reproducibly without exact arithmetic.

use crate::geometry::{Point, PointCloud};
use crate::rng::CounterRng;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum FiltError {
    #[error("cannot triangulate an empty point cloud")]
    EmptyCloud,
    #[error("point cloud contains a non-finite coordinate")]
    NonFinite,
    #[error("triangulation failed structurally: {0}")]
    Structural(String),
}

/// Delaunay triangulation of a deduplicated cloud. For collinear inputs the
/// triangle list is empty and the edges form the path along the line.
#[derive(Debug, Clone)]
pub struct Triangulation {
    /// Deduplicated points (first occurrence kept, input order).
    pub points: Vec<Point>,
    /// Triangles, counterclockwise.
    pub triangles: Vec<[u32; 3]>,
    /// Undirected edges, endpoints sorted.
    pub edges: Vec<[u32; 2]>,
}

/// One simplex of a filtration; `verts` sorted ascending, unused slots are
/// `u32::MAX`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FiltSimplex {
    pub value: f64,
    pub dim: u8,
    pub verts: [u32; 3],
}

/// Simplices sorted by (value, dim, vertex order): a valid filtration order
/// in which every face precedes its cofaces.
#[derive(Debug, Clone)]
pub struct Filtration {
    pub vertex_count: usize,
    pub simplices: Vec<FiltSimplex>,
}

impl Filtration {
    /// Checks filtration validity: all faces present, earlier, with values
    /// not exceeding the coface's.
    pub fn validate(&self) -> Result<(), FiltError> {
        use std::collections::HashMap;
        let mut pos: HashMap<[u32; 3], usize> = HashMap::with_capacity(self.simplices.len());
        for (i, s) in self.simplices.iter().enumerate() {
            pos.insert(s.verts, i);
            for f in faces_of(s) {
                match pos.get(&f) {
                    Some(&j) if j < i => {
                        if self.simplices[j].value > s.value {
                            return Err(FiltError::Structural(format!(
                                "face value {} exceeds coface value {}",
                                self.simplices[j].value, s.value
                            )));
                        }
                    }
                    _ => {
                        return Err(FiltError::Structural(format!(
                            "face {:?} of {:?} missing or out of order",
                            f, s.verts
                        )))
                    }
                }
            }
        }
        Ok(())
    }
}

/// Vertex triples of the proper facets of a simplex.
pub fn faces_of(s: &FiltSimplex) -> Vec<[u32; 3]> {
    match s.dim {
        2 => {
            let [a, b, c] = s.verts;
            vec![
                [a, b, u32::MAX],
                [a, c, u32::MAX],
                [b, c, u32::MAX],
            ]
        }
        1 => {
            let [a, b, _] = s.verts;
            vec![
                [a, u32::MAX, u32::MAX],
                [b, u32::MAX, u32::MAX],
            ]
        }
        _ => vec![],
    }
}

// ---------------------------------------------------------------------------
// Predicates: floating-point filter + deterministic jitter on ties.
// ---------------------------------------------------------------------------

// Shewchuk's first-stage error bounds for f64.
const EPS: f64 = 1.110_223_024_625_156_5e-16;
const CCW_ERRBOUND_A: f64 = (3.0 + 16.0 * EPS) * EPS;
const ICC_ERRBOUND_A: f64 = (10.0 + 96.0 * EPS) * EPS;

struct Predicates {
    jitter: Vec<Point>,
    eps_j: f64,
}

impl Predicates {
    /// `salt` escalates on structural failure; each level multiplies the
    /// jitter magnitude by 1000 and reseeds the hash.
    fn new(n: usize, diameter: f64, salt: u64) -> Self {
        let eps_j = 1e-12 * diameter.max(1e-30) * 1000f64.powi(salt as i32);
        let rng = CounterRng::new(0x5ea5_0a6e_u64, salt);
        let jitter = (0..n)
            .map(|i| {
                Point::new(
                    eps_j * (2.0 * rng.uniform(2 * i as u64) - 1.0),
                    eps_j * (2.0 * rng.uniform(2 * i as u64 + 1) - 1.0),
                )
            })
            .collect();
        Predicates { jitter, eps_j }
    }

    #[inline]
    fn jittered(&self, p: Point, idx: u32) -> Point {
        let j = self.jitter[idx as usize];
        Point::new(p.x + j.x, p.y + j.y)
    }

    /// Sign of the orientation determinant of (a, b, c): positive when the
    /// triple is counterclockwise. Ties resolved on jittered coordinates.
    fn orient(&self, pts: &[Point], ia: u32, ib: u32, ic: u32) -> i32 {
        let (a, b, c) = (pts[ia as usize], pts[ib as usize], pts[ic as usize]);
        let detleft = (a.x - c.x) * (b.y - c.y);
        let detright = (a.y - c.y) * (b.x - c.x);
        let det = detleft - detright;
        let errbound = CCW_ERRBOUND_A * (detleft.abs() + detright.abs());
        // A result certified by the float filter may still be smaller than
        // what the jitter could shift, so the jitter band wins near ties;
        // decisions then consistently describe one perturbed copy of the
        // input.
        let scale = (a.x - c.x)
            .abs()
            .max((a.y - c.y).abs())
            .max((b.x - c.x).abs())
            .max((b.y - c.y).abs());
        let jitter_band = 8.0 * self.eps_j * (scale + self.eps_j);
        if det.abs() > errbound.max(jitter_band) {
            return if det > 0.0 { 1 } else { -1 };
        }
        let (a, b, c) = (
            self.jittered(a, ia),
            self.jittered(b, ib),
            self.jittered(c, ic),
        );
        let det = (a.x - c.x) * (b.y - c.y) - (a.y - c.y) * (b.x - c.x);
        if det > 0.0 {
            1
        } else if det < 0.0 {
            -1
        } else {
            0
        }
    }

    /// Sign of the incircle determinant: positive when `d` lies strictly
    /// inside the circumcircle of the counterclockwise triangle (a, b, c).
    fn incircle(&self, pts: &[Point], ia: u32, ib: u32, ic: u32, id: u32) -> i32 {
        let (a, b, c, d) = (
            pts[ia as usize],
            pts[ib as usize],
            pts[ic as usize],
            pts[id as usize],
        );
        let raw = |a: Point, b: Point, c: Point, d: Point| -> (f64, f64, f64) {
            let adx = a.x - d.x;
            let ady = a.y - d.y;
            let bdx = b.x - d.x;
            let bdy = b.y - d.y;
            let cdx = c.x - d.x;
            let cdy = c.y - d.y;
            let alift = adx * adx + ady * ady;
            let blift = bdx * bdx + bdy * bdy;
            let clift = cdx * cdx + cdy * cdy;
            let bcdet = bdx * cdy - cdx * bdy;
            let cadet = cdx * ady - adx * cdy;
            let abdet = adx * bdy - bdx * ady;
            let det = alift * bcdet + blift * cadet + clift * abdet;
            let permanent = (bdx.abs() * cdy.abs() + cdx.abs() * bdy.abs()) * alift
                + (cdx.abs() * ady.abs() + adx.abs() * cdy.abs()) * blift
                + (adx.abs() * bdy.abs() + bdx.abs() * ady.abs()) * clift;
            let scale = adx
                .abs()
                .max(ady.abs())
                .max(bdx.abs())
                .max(bdy.abs())
                .max(cdx.abs())
                .max(cdy.abs());
            (det, permanent, scale)
        };
        let (det, permanent, scale) = raw(a, b, c, d);
        let errbound = ICC_ERRBOUND_A * permanent;
        let s = scale + self.eps_j;
        let jitter_band = 64.0 * self.eps_j * s * s * s;
        if det.abs() > errbound.max(jitter_band) {
            return if det > 0.0 { 1 } else { -1 };
        }
        let (det, _, _) = raw(
            self.jittered(a, ia),
            self.jittered(b, ib),
            self.jittered(c, ic),
            self.jittered(d, id),
        );
        if det > 0.0 {
            1
        } else if det < 0.0 {
            -1
        } else {
            0
        }
    }
}

// ---------------------------------------------------------------------------
// Bowyer-Watson with a vertex at infinity.
// ---------------------------------------------------------------------------

const INF: u32 = u32::MAX;
const NO_TRI: u32 = u32::MAX;

#[derive(Debug, Clone, Copy)]
struct Tri {
    v: [u32; 3],
    /// nbr[i] lies across the edge opposite v[i].
    nbr: [u32; 3],
}

impl Tri {
    #[inline]
    fn edge(&self, i: usize) -> (u32, u32) {
        (self.v[(i + 1) % 3], self.v[(i + 2) % 3])
    }

    #[inline]
    fn is_infinite(&self) -> bool {
        self.v[2] == INF || self.v[1] == INF || self.v[0] == INF
    }

    /// For an infinite face, its real directed edge. Faces keep their region
    /// on the left, so the unbounded region lies left of this edge (the
    /// finite neighbor traverses it reversed).
    fn hull_edge(&self) -> (u32, u32) {
        let k = self.v.iter().position(|&v| v == INF).unwrap();
        (self.v[(k + 1) % 3], self.v[(k + 2) % 3])
    }

    fn slot_of(&self, t: u32) -> usize {
        self.nbr.iter().position(|&n| n == t).expect("adjacent")
    }
}

struct Mesh<'a> {
    pts: &'a [Point],
    pred: &'a Predicates,
    tris: Vec<Tri>,
    alive: Vec<bool>,
    free: Vec<u32>,
    hint: u32,
}

impl<'a> Mesh<'a> {
    fn alloc(&mut self, t: Tri) -> u32 {
        if let Some(i) = self.free.pop() {
            self.tris[i as usize] = t;
            self.alive[i as usize] = true;
            i
        } else {
            self.tris.push(t);
            self.alive.push(true);
            (self.tris.len() - 1) as u32
        }
    }

    fn kill(&mut self, i: u32) {
        self.alive[i as usize] = false;
        self.free.push(i);
    }

    /// Is `p` inside the (open, jitter-resolved) circumdisk of triangle `t`?
    /// For infinite faces this is strict containment in the unbounded region
    /// left of the face's real edge.
    fn in_circumdisk(&self, t: u32, p: u32) -> bool {
        let tri = self.tris[t as usize];
        if tri.is_infinite() {
            let (u, v) = tri.hull_edge();
            self.pred.orient(self.pts, u, v, p) > 0
        } else {
            self.pred.incircle(self.pts, tri.v[0], tri.v[1], tri.v[2], p) > 0
        }
    }

    /// Walks from the hint to a triangle whose circumdisk contains `p`.
    fn locate(&self, p: u32, step_budget: usize) -> Result<u32, FiltError> {
        let mut cur = self.hint;
        if !self.alive[cur as usize] {
            cur = (0..self.tris.len() as u32)
                .find(|&i| self.alive[i as usize])
                .ok_or_else(|| FiltError::Structural("no live triangle".into()))?;
        }
        let mut steps = 0usize;
        loop {
            steps += 1;
            if steps > step_budget {
                // Degenerate walk; fall back to exhaustive scan.
                return (0..self.tris.len() as u32)
                    .find(|&i| self.alive[i as usize] && self.in_circumdisk(i, p))
                    .ok_or_else(|| FiltError::Structural("walk found no container".into()));
            }
            let tri = self.tris[cur as usize];
            if tri.is_infinite() {
                let (u, v) = tri.hull_edge();
                if self.pred.orient(self.pts, u, v, p) > 0 {
                    return Ok(cur);
                }
                // Step to the finite side and keep walking.
                let k = tri.v.iter().position(|&x| x == INF).unwrap();
                cur = tri.nbr[k];
                continue;
            }
            let mut crossed = false;
            for i in 0..3 {
                let (u, v) = tri.edge(i);
                if self.pred.orient(self.pts, u, v, p) < 0 {
                    cur = tri.nbr[i];
                    crossed = true;
                    break;
                }
            }
            if !crossed {
                return Ok(cur);
            }
        }
    }

    /// Inserts point `p`, carving the cavity of triangles whose circumdisk
    /// contains it and re-fanning from `p`.
    fn insert(&mut self, p: u32) -> Result<(), FiltError> {
        let seed = self.locate(p, 4 * self.tris.len() + 64)?;
        if !self.in_circumdisk(seed, p) {
            return Err(FiltError::Structural(
                "located triangle does not contain point in its circumdisk".into(),
            ));
        }
        // BFS the cavity.
        let mut cavity: Vec<u32> = vec![seed];
        let mut in_cavity = std::collections::HashSet::new();
        in_cavity.insert(seed);
        let mut stack = vec![seed];
        while let Some(t) = stack.pop() {
            let tri = self.tris[t as usize];
            for i in 0..3 {
                let n = tri.nbr[i];
                if n != NO_TRI && !in_cavity.contains(&n) && self.in_circumdisk(n, p) {
                    in_cavity.insert(n);
                    cavity.push(n);
                    stack.push(n);
                }
            }
        }
        // Boundary cycle: directed edges (u, w) with the cavity on the left,
        // keyed by start vertex. A repeated key means the cavity is not a
        // topological disk; the caller retries with stronger jitter.
        use std::collections::HashMap;
        let mut boundary: HashMap<u32, (u32, u32, usize)> = HashMap::new();
        for &t in &cavity {
            let tri = self.tris[t as usize];
            for i in 0..3 {
                let n = tri.nbr[i];
                if n != NO_TRI && in_cavity.contains(&n) {
                    continue;
                }
                let (u, w) = tri.edge(i);
                let slot = self.tris[n as usize].slot_of(t);
                if boundary.insert(u, (w, n, slot)).is_some() {
                    return Err(FiltError::Structural("cavity boundary not a cycle".into()));
                }
            }
        }
        if boundary.is_empty() {
            return Err(FiltError::Structural("empty cavity boundary".into()));
        }
        for &t in &cavity {
            self.kill(t);
        }
        // Fan new triangles around p following the boundary cycle, starting
        // at the smallest vertex so construction order is deterministic.
        let start = *boundary.keys().min().unwrap();
        let mut ring: Vec<(u32, u32, u32, usize)> = Vec::with_capacity(boundary.len());
        let mut u = start;
        loop {
            let (w, outside, slot) = *boundary
                .get(&u)
                .ok_or_else(|| FiltError::Structural("broken boundary cycle".into()))?;
            ring.push((u, w, outside, slot));
            u = w;
            if u == start {
                break;
            }
            if ring.len() > boundary.len() {
                return Err(FiltError::Structural("boundary cycle does not close".into()));
            }
        }
        if ring.len() != boundary.len() {
            return Err(FiltError::Structural("boundary has multiple cycles".into()));
        }
        let m = ring.len();
        let mut new_ids = Vec::with_capacity(m);
        for &(u, w, _, _) in &ring {
            // Cyclic rotation keeps orientation; put INF last when present.
            let v = if u == INF {
                [w, p, INF]
            } else if w == INF {
                [p, u, INF]
            } else {
                [u, w, p]
            };
            new_ids.push(self.alloc(Tri {
                v,
                nbr: [NO_TRI; 3],
            }));
        }
        for (k, &(u, w, outside, slot)) in ring.iter().enumerate() {
            let id = new_ids[k];
            let next = new_ids[(k + 1) % m];
            let prev = new_ids[(k + m - 1) % m];
            let tri = &mut self.tris[id as usize];
            // Slots: edge (u,w) -> outside, edge (w,p) -> next, edge (p,u) -> prev.
            for i in 0..3 {
                let e = tri.edge(i);
                tri.nbr[i] = if e == (u, w) || e == (w, u) {
                    outside
                } else if e.0 == w || e.1 == w {
                    next
                } else {
                    prev
                };
            }
            self.tris[outside as usize].nbr[slot] = id;
        }
        self.hint = new_ids[0];
        Ok(())
    }
}

fn dedup_points(cloud: &PointCloud) -> Result<Vec<Point>, FiltError> {
    use std::collections::HashSet;
    let mut seen = HashSet::with_capacity(cloud.len());
    let mut out = Vec::with_capacity(cloud.len());
    for p in &cloud.points {
        if !p.is_finite() {
            return Err(FiltError::NonFinite);
        }
        // Normalize -0.0 so bit-keyed dedup treats it as 0.0.
        let x = if p.x == 0.0 { 0.0 } else { p.x };
        let y = if p.y == 0.0 { 0.0 } else { p.y };
        if seen.insert((x.to_bits(), y.to_bits())) {
            out.push(Point::new(x, y));
        }
    }
    if out.is_empty() {
        return Err(FiltError::EmptyCloud);
    }
    Ok(out)
}

/// All orientation determinants exactly zero: the cloud lies on one line
/// (or is a single point).
fn exactly_collinear(pts: &[Point]) -> bool {
    if pts.len() < 3 {
        return true;
    }
    let (a, b) = (pts[0], pts[1]);
    pts[2..].iter().all(|&c| {
        (a.x - c.x) * (b.y - c.y) - (a.y - c.y) * (b.x - c.x) == 0.0
    })
}

/// Path triangulation of collinear points: edges join neighbors along the
/// line.
fn collinear_triangulation(pts: Vec<Point>) -> Triangulation {
    if pts.len() == 1 {
        return Triangulation {
            points: pts,
            triangles: vec![],
            edges: vec![],
        };
    }
    let dir = {
        let mut best = (0.0f64, Point::new(1.0, 0.0));
        for p in &pts[1..] {
            let d = *p - pts[0];
            let n = d.norm();
            if n > best.0 {
                best = (n, Point::new(d.x / n, d.y / n));
            }
        }
        best.1
    };
    let mut order: Vec<u32> = (0..pts.len() as u32).collect();
    order.sort_by(|&i, &j| {
        let ti = (pts[i as usize] - pts[0]).dot(dir);
        let tj = (pts[j as usize] - pts[0]).dot(dir);
        ti.partial_cmp(&tj).unwrap()
    });
    let edges = order
        .windows(2)
        .map(|w| {
            let (a, b) = (w[0].min(w[1]), w[0].max(w[1]));
            [a, b]
        })
        .collect();
    Triangulation {
        points: pts,
        triangles: vec![],
        edges,
    }
}

fn morton_order(pts: &[Point]) -> Vec<u32> {
    let mut lo = pts[0];
    let mut hi = pts[0];
    for p in pts {
        lo.x = lo.x.min(p.x);
        lo.y = lo.y.min(p.y);
        hi.x = hi.x.max(p.x);
        hi.y = hi.y.max(p.y);
    }
    let sx = if hi.x > lo.x { 65535.0 / (hi.x - lo.x) } else { 0.0 };
    let sy = if hi.y > lo.y { 65535.0 / (hi.y - lo.y) } else { 0.0 };
    let spread = |mut v: u32| -> u32 {
        v &= 0xffff;
        v = (v | (v << 8)) & 0x00ff_00ff;
        v = (v | (v << 4)) & 0x0f0f_0f0f;
        v = (v | (v << 2)) & 0x3333_3333;
        (v | (v << 1)) & 0x5555_5555
    };
    let mut order: Vec<u32> = (0..pts.len() as u32).collect();
    order.sort_by_key(|&i| {
        let p = pts[i as usize];
        let ix = ((p.x - lo.x) * sx) as u32;
        let iy = ((p.y - lo.y) * sy) as u32;
        spread(ix) | (spread(iy) << 1)
    });
    order
}

fn build_delaunay(pts: &[Point], salt: u64) -> Result<Triangulation, FiltError> {
    let diameter = {
        let mut lo = pts[0];
        let mut hi = pts[0];
        for p in pts {
            lo.x = lo.x.min(p.x);
            lo.y = lo.y.min(p.y);
            hi.x = hi.x.max(p.x);
            hi.y = hi.y.max(p.y);
        }
        (hi.x - lo.x).hypot(hi.y - lo.y)
    };
    let pred = Predicates::new(pts.len(), diameter, salt);

    // Seed with the first non-collinear triple in Morton order.
    let order = morton_order(pts);
    let (i0, i1) = (order[0], order[1]);
    let mut i2 = None;
    for &k in &order[2..] {
        if pred.orient(pts, i0, i1, k) != 0 {
            i2 = Some(k);
            break;
        }
    }
    let i2 = i2.ok_or_else(|| {
        FiltError::Structural("jitter failed to break exact collinearity".into())
    })?;
    let (a, b, c) = if pred.orient(pts, i0, i1, i2) > 0 {
        (i0, i1, i2)
    } else {
        (i1, i0, i2)
    };

    let mut mesh = Mesh {
        pts,
        pred: &pred,
        tris: Vec::with_capacity(2 * pts.len() + 16),
        alive: Vec::with_capacity(2 * pts.len() + 16),
        free: Vec::new(),
        hint: 0,
    };
    // Finite seed triangle plus the three infinite faces around it; each
    // infinite face traverses its real edge reversed so every directed edge
    // is used exactly once.
    let t0 = mesh.alloc(Tri {
        v: [a, b, c],
        nbr: [NO_TRI; 3],
    });
    let fab = mesh.alloc(Tri {
        v: [b, a, INF],
        nbr: [NO_TRI; 3],
    });
    let fbc = mesh.alloc(Tri {
        v: [c, b, INF],
        nbr: [NO_TRI; 3],
    });
    let fca = mesh.alloc(Tri {
        v: [a, c, INF],
        nbr: [NO_TRI; 3],
    });
    mesh.tris[t0 as usize].nbr = [fbc, fca, fab];
    mesh.tris[fab as usize].nbr = [fca, fbc, t0];
    mesh.tris[fbc as usize].nbr = [fab, fca, t0];
    mesh.tris[fca as usize].nbr = [fbc, fab, t0];
    mesh.hint = t0;

    for &k in &order {
        if k == a || k == b || k == c {
            continue;
        }
        mesh.insert(k)?;
    }

    // Extract finite triangles and all real edges, canonically ordered:
    // each triangle rotated so its smallest vertex leads (keeping CCW),
    // triangle and edge lists sorted.
    use std::collections::HashSet;
    let mut triangles = Vec::new();
    let mut edge_set: HashSet<(u32, u32)> = HashSet::new();
    for (i, tri) in mesh.tris.iter().enumerate() {
        if !mesh.alive[i] || tri.is_infinite() {
            continue;
        }
        let k = (0..3).min_by_key(|&k| tri.v[k]).unwrap();
        triangles.push([tri.v[k], tri.v[(k + 1) % 3], tri.v[(k + 2) % 3]]);
        for e in 0..3 {
            let (u, v) = tri.edge(e);
            edge_set.insert((u.min(v), u.max(v)));
        }
    }
    triangles.sort_unstable();
    let mut edges: Vec<[u32; 2]> = edge_set.into_iter().map(|(u, v)| [u, v]).collect();
    edges.sort_unstable();
    // Sphere Euler check: V - E + F = 2 counting the infinite vertex and the
    // infinite faces; for the finite part V - E + T = 1.
    let v = pts.len() as i64;
    let e = edges.len() as i64;
    let t = triangles.len() as i64;
    if v - e + t != 1 {
        return Err(FiltError::Structural(format!(
            "Euler check failed: V={v} E={e} T={t}"
        )));
    }
    Ok(Triangulation {
        points: pts.to_vec(),
        triangles,
        edges,
    })
}

/// Delaunay triangulation of the deduplicated cloud.
///
/// The empty-circumcircle property holds for every triangle against all
/// points up to the jitter perturbation (~1e-12 of the cloud diameter).
pub fn delaunay(cloud: &PointCloud) -> Result<Triangulation, FiltError> {
    let pts = dedup_points(cloud)?;
    if exactly_collinear(&pts) {
        return Ok(collinear_triangulation(pts));
    }
    let mut last_err = None;
    for salt in 0..3 {
        match build_delaunay(&pts, salt) {
            Ok(t) => return Ok(t),
            Err(e) => last_err = Some(e),
        }
    }
    Err(last_err.unwrap())
}

fn circumradius(a: Point, b: Point, c: Point) -> f64 {
    let bx = b.x - a.x;
    let by = b.y - a.y;
    let cx = c.x - a.x;
    let cy = c.y - a.y;
    let d = 2.0 * (bx * cy - by * cx);
    if d == 0.0 {
        return f64::INFINITY;
    }
    let b2 = bx * bx + by * by;
    let c2 = cx * cx + cy * cy;
    let ux = (cy * b2 - by * c2) / d;
    let uy = (bx * c2 - cx * b2) / d;
    ux.hypot(uy)
}

/// Builds the alpha filtration: vertices enter at 0, a triangle at its
/// circumradius, an edge at its half-length when its diametral disk is empty
/// of other points (Gabriel) and otherwise at the smallest circumradius of an
/// incident triangle. The complex at radius `r` is then homotopy equivalent
/// to the union of closed radius-`r` balls around the cloud.
pub fn alpha_filtration(cloud: &PointCloud) -> Result<Filtration, FiltError> {
    let tri = delaunay(cloud)?;
    alpha_from_triangulation(&tri)
}

pub fn alpha_from_triangulation(tri: &Triangulation) -> Result<Filtration, FiltError> {
    use std::collections::HashMap;
    let pts = &tri.points;
    let nv = pts.len();
    let mut simplices: Vec<FiltSimplex> =
        Vec::with_capacity(nv + tri.edges.len() + tri.triangles.len());
    for v in 0..nv as u32 {
        simplices.push(FiltSimplex {
            value: 0.0,
            dim: 0,
            verts: [v, u32::MAX, u32::MAX],
        });
    }
    // Per edge: opposite vertices and the smallest incident circumradius.
    let mut opposite: HashMap<(u32, u32), ([Option<u32>; 2], f64)> =
        HashMap::with_capacity(3 * tri.triangles.len() / 2 + 1);
    let mut tri_r = Vec::with_capacity(tri.triangles.len());
    for t in &tri.triangles {
        let r = circumradius(
            pts[t[0] as usize],
            pts[t[1] as usize],
            pts[t[2] as usize],
        );
        tri_r.push(r);
        for (e, opp) in [
            ((t[0], t[1]), t[2]),
            ((t[0], t[2]), t[1]),
            ((t[1], t[2]), t[0]),
        ] {
            let key = (e.0.min(e.1), e.0.max(e.1));
            let slot = opposite.entry(key).or_insert(([None, None], f64::INFINITY));
            if slot.0[0].is_none() {
                slot.0[0] = Some(opp);
            } else {
                slot.0[1] = Some(opp);
            }
            slot.1 = slot.1.min(r);
        }
    }
    // Edge values.
    let mut edge_value: HashMap<(u32, u32), f64> = HashMap::with_capacity(tri.edges.len());
    for e in &tri.edges {
        let (u, v) = (e[0], e[1]);
        let (p, q) = (pts[u as usize], pts[v as usize]);
        let half2 = p.dist2(q) / 4.0;
        let mid = Point::new((p.x + q.x) / 2.0, (p.y + q.y) / 2.0);
        let (opp, min_r) = opposite
            .get(&(u, v))
            .copied()
            .unwrap_or(([None, None], f64::INFINITY));
        // Gabriel test against the opposite vertices of incident triangles;
        // for a Delaunay edge these are the only candidates that can lie in
        // the diametral disk.
        let gabriel = opp
            .iter()
            .flatten()
            .all(|&w| pts[w as usize].dist2(mid) > half2);
        // The clamp to min_r is the downward monotonicity pass: no edge may
        // enter after an incident triangle.
        let value = if gabriel { half2.sqrt().min(min_r) } else { min_r };
        edge_value.insert((u, v), value);
    }
    for e in &tri.edges {
        simplices.push(FiltSimplex {
            value: edge_value[&(e[0], e[1])],
            dim: 1,
            verts: [e[0], e[1], u32::MAX],
        });
    }
    for (k, t) in tri.triangles.iter().enumerate() {
        let mut v = *t;
        v.sort_unstable();
        simplices.push(FiltSimplex {
            value: tri_r[k],
            dim: 2,
            verts: v,
        });
    }
    simplices.sort_by(|a, b| {
        a.value
            .partial_cmp(&b.value)
            .unwrap()
            .then(a.dim.cmp(&b.dim))
            .then(a.verts.cmp(&b.verts))
    });
    Ok(Filtration {
        vertex_count: nv,
        simplices,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::CounterRng;

    /// Sphere-mesh invariants: reciprocal adjacency and every edge shared by
    /// exactly two live triangles.
    fn check_mesh(mesh: &Mesh<'_>, ctx: &str) {
        use std::collections::HashMap;
        let mut edge_use: HashMap<(u32, u32), u32> = HashMap::new();
        for (i, tri) in mesh.tris.iter().enumerate() {
            if !mesh.alive[i] {
                continue;
            }
            for e in 0..3 {
                let (u, v) = tri.edge(e);
                *edge_use.entry((u.min(v), u.max(v))).or_insert(0) += 1;
                let n = tri.nbr[e];
                assert!(n != NO_TRI, "{ctx}: missing neighbor");
                assert!(mesh.alive[n as usize], "{ctx}: dead neighbor t{i} e{e}");
                let nt = mesh.tris[n as usize];
                let slot = nt.slot_of(i as u32);
                let (nu, nv) = nt.edge(slot);
                assert!(
                    (nu == u && nv == v) || (nu == v && nv == u),
                    "{ctx}: edge mismatch t{i} e{e}: ({u},{v}) vs ({nu},{nv})"
                );
            }
        }
        for (e, c) in edge_use {
            assert_eq!(c, 2, "{ctx}: edge {e:?} used {c} times");
        }
    }

    #[test]
    fn incremental_mesh_invariants() {
        let rng = CounterRng::new(0, 123);
        let pts: Vec<Point> = (0..40)
            .map(|i| Point::new(rng.uniform(2 * i as u64), rng.uniform(2 * i as u64 + 1)))
            .collect();
        let pred = Predicates::new(pts.len(), 2.0, 0);
        let order = morton_order(&pts);
        let (i0, i1) = (order[0], order[1]);
        let i2 = *order[2..]
            .iter()
            .find(|&&k| pred.orient(&pts, i0, i1, k) != 0)
            .unwrap();
        let (a, b, c) = if pred.orient(&pts, i0, i1, i2) > 0 {
            (i0, i1, i2)
        } else {
            (i1, i0, i2)
        };
        let mut mesh = Mesh {
            pts: &pts,
            pred: &pred,
            tris: vec![],
            alive: vec![],
            free: vec![],
            hint: 0,
        };
        let t0 = mesh.alloc(Tri { v: [a, b, c], nbr: [NO_TRI; 3] });
        let fab = mesh.alloc(Tri { v: [b, a, INF], nbr: [NO_TRI; 3] });
        let fbc = mesh.alloc(Tri { v: [c, b, INF], nbr: [NO_TRI; 3] });
        let fca = mesh.alloc(Tri { v: [a, c, INF], nbr: [NO_TRI; 3] });
        mesh.tris[t0 as usize].nbr = [fbc, fca, fab];
        mesh.tris[fab as usize].nbr = [fca, fbc, t0];
        mesh.tris[fbc as usize].nbr = [fab, fca, t0];
        mesh.tris[fca as usize].nbr = [fbc, fab, t0];
        mesh.hint = t0;
        check_mesh(&mesh, "initial");
        for (step, &k) in order.iter().enumerate() {
            if k == a || k == b || k == c {
                continue;
            }
            mesh.insert(k).unwrap();
            check_mesh(&mesh, &format!("after insert #{step} (point {k})"));
        }
    }

    fn cloud(v: &[(f64, f64)]) -> PointCloud {
        PointCloud::new(v.iter().map(|&(x, y)| Point::new(x, y)).collect())
    }

    fn random_cloud(seed: u64, n: usize, scale: f64) -> PointCloud {
        let rng = CounterRng::new(seed, 123);
        PointCloud::new(
            (0..n)
                .map(|i| {
                    Point::new(
                        scale * rng.uniform(2 * i as u64),
                        scale * rng.uniform(2 * i as u64 + 1),
                    )
                })
                .collect(),
        )
    }

    #[test]
    fn triangle_cloud() {
        let t = delaunay(&cloud(&[(0.0, 0.0), (1.0, 0.0), (0.5, 0.8)])).unwrap();
        assert_eq!(t.triangles.len(), 1);
        assert_eq!(t.edges.len(), 3);
    }

    #[test]
    fn unit_square_two_triangles() {
        let t = delaunay(&cloud(&[(0.0, 0.0), (1.0, 0.0), (1.0, 1.0), (0.0, 1.0)])).unwrap();
        assert_eq!(t.triangles.len(), 2);
        assert_eq!(t.edges.len(), 5); // 4 boundary + 1 diagonal, either one
    }

    #[test]
    fn duplicates_and_identical_points() {
        let t = delaunay(&cloud(&[(0.5, 0.5), (0.5, 0.5), (0.5, 0.5)])).unwrap();
        assert_eq!(t.points.len(), 1);
        assert!(t.triangles.is_empty());
        assert!(t.edges.is_empty());
        assert!(delaunay(&PointCloud::default()).is_err());
    }

    #[test]
    fn collinear_path() {
        let t = delaunay(&cloud(&[(0.0, 0.0), (3.0, 0.0), (1.0, 0.0), (2.0, 0.0)])).unwrap();
        assert!(t.triangles.is_empty());
        assert_eq!(t.edges.len(), 3);
        // Line order is 0, 2, 3, 1; edges join consecutive points.
        let mut es = t.edges.clone();
        es.sort_unstable();
        assert_eq!(es, vec![[0, 2], [1, 3], [2, 3]]);
    }

    #[test]
    fn two_points_single_edge() {
        let t = delaunay(&cloud(&[(0.0, 0.0), (2.0, 1.0)])).unwrap();
        assert_eq!(t.edges.len(), 1);
        assert!(t.triangles.is_empty());
    }

    /// Brute-force circumcircle audit on random clouds.
    #[test]
    fn empty_circumcircle_property() {
        for seed in 0..3 {
            let c = random_cloud(seed, 200, 1.0);
            let t = delaunay(&c).unwrap();
            for tv in &t.triangles {
                let (a, b, cc) = (
                    t.points[tv[0] as usize],
                    t.points[tv[1] as usize],
                    t.points[tv[2] as usize],
                );
                // circumcenter
                let bx = b.x - a.x;
                let by = b.y - a.y;
                let cx = cc.x - a.x;
                let cy = cc.y - a.y;
                let d = 2.0 * (bx * cy - by * cx);
                let b2 = bx * bx + by * by;
                let c2 = cx * cx + cy * cy;
                let ux = (cy * b2 - by * c2) / d;
                let uy = (bx * c2 - cx * b2) / d;
                let center = Point::new(a.x + ux, a.y + uy);
                let r = ux.hypot(uy);
                for (i, p) in t.points.iter().enumerate() {
                    if tv.contains(&(i as u32)) {
                        continue;
                    }
                    assert!(
                        p.dist(center) >= r - 1e-9,
                        "seed {seed}: point {i} inside circumcircle"
                    );
                }
            }
        }
    }

    #[test]
    fn cocircular_square_grid_is_stable() {
        // 4x4 integer grid: every quad is cocircular; jitter must resolve
        // deterministically and keep the structure valid.
        let mut v = Vec::new();
        for i in 0..4 {
            for j in 0..4 {
                v.push((i as f64, j as f64));
            }
        }
        let t1 = delaunay(&cloud(&v)).unwrap();
        let t2 = delaunay(&cloud(&v)).unwrap();
        assert_eq!(t1.triangles, t2.triangles);
        // 18 true half-squares, plus possibly a few degenerate slivers from
        // the tie-breaking jitter along collinear boundary rows; slivers get
        // equal birth and death values and never show up in diagrams.
        assert!(
            (18..=26).contains(&t1.triangles.len()),
            "got {}",
            t1.triangles.len()
        );
        let filt = alpha_filtration(&cloud(&v)).unwrap();
        filt.validate().unwrap();
    }

    #[test]
    fn alpha_two_points() {
        let f = alpha_filtration(&cloud(&[(0.0, 0.0), (3.0, 0.0)])).unwrap();
        assert_eq!(f.simplices.len(), 3);
        let edge = f.simplices.iter().find(|s| s.dim == 1).unwrap();
        assert!((edge.value - 1.5).abs() < 1e-12);
    }

    #[test]
    fn alpha_equilateral_triangle() {
        let s = 1.0f64;
        let f = alpha_filtration(&cloud(&[
            (0.0, 0.0),
            (s, 0.0),
            (s / 2.0, s * 3.0f64.sqrt() / 2.0),
        ]))
        .unwrap();
        f.validate().unwrap();
        for sx in f.simplices.iter().filter(|s| s.dim == 1) {
            assert!((sx.value - 0.5).abs() < 1e-12);
        }
        let t = f.simplices.iter().find(|s| s.dim == 2).unwrap();
        assert!((t.value - 1.0 / 3.0f64.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn filtration_order_valid_on_random_clouds() {
        for seed in 10..16 {
            let c = random_cloud(seed, 60, 2.0);
            let f = alpha_filtration(&c).unwrap();
            f.validate().unwrap();
        }
    }

    /// Gabriel test via opposite vertices must agree with the brute-force
    /// diametral-disk emptiness check on Delaunay edges.
    #[test]
    fn gabriel_matches_brute_force() {
        for seed in 0..5 {
            let c = random_cloud(seed + 40, 80, 1.0);
            let t = delaunay(&c).unwrap();
            let f = alpha_from_triangulation(&t).unwrap();
            for s in f.simplices.iter().filter(|s| s.dim == 1) {
                let (u, v) = (s.verts[0] as usize, s.verts[1] as usize);
                let (p, q) = (t.points[u], t.points[v]);
                let mid = Point::new((p.x + q.x) / 2.0, (p.y + q.y) / 2.0);
                let half2 = p.dist2(q) / 4.0;
                let empty = t
                    .points
                    .iter()
                    .enumerate()
                    .all(|(i, w)| i == u || i == v || w.dist2(mid) > half2);
                let is_half_length = (s.value * s.value - half2).abs() < 1e-12 * half2.max(1e-30);
                assert_eq!(empty, is_half_length, "seed {seed} edge {u}-{v}");
            }
        }
    }

    #[test]
    fn alpha_rigid_motion_invariant() {
        let c = random_cloud(99, 40, 1.0);
        let f0 = alpha_filtration(&c).unwrap();
        let phi = 0.37f64;
        let (cs, sn) = (phi.cos(), phi.sin());
        let moved = PointCloud::new(
            c.points
                .iter()
                .map(|p| Point::new(cs * p.x - sn * p.y + 5.0, sn * p.x + cs * p.y - 2.0))
                .collect(),
        );
        let f1 = alpha_filtration(&moved).unwrap();
        let mut v0: Vec<f64> = f0.simplices.iter().map(|s| s.value).collect();
        let mut v1: Vec<f64> = f1.simplices.iter().map(|s| s.value).collect();
        v0.sort_by(|a, b| a.partial_cmp(b).unwrap());
        v1.sort_by(|a, b| a.partial_cmp(b).unwrap());
        for (a, b) in v0.iter().zip(&v1) {
            assert!((a - b).abs() < 1e-9, "{a} vs {b}");
        }
    }
}
