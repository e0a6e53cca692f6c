//! Persistence of filtrations: boundary-matrix reduction over GF(2),
//! Betti curves, window restriction, and the smoothed functionals
//! `Phi_psi = sum over degree-1 bars of the integral of psi over [birth, death]`.
//!
//! Degree 0 is stored reduced: the single essential connected-component bar
//! is removed, so every stored bar is finite for the point clouds handled
//! here.

use crate::filtration::{FiltError, Filtration};
use std::collections::HashMap;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum PersistenceError {
    #[error("malformed filtration: {0}")]
    BadFiltration(#[from] FiltError),
    #[error("filtration references missing face")]
    MissingFace,
    #[error("invalid weight: {0}")]
    BadWeight(String),
}

/// A persistence diagram per homology degree; pairs are (birth, death) with
/// `birth < death`, sorted by (birth, death). Degree-0 pairs are reduced:
/// `essential_h0` records how many infinite component bars were dropped
/// (exactly one for a nonempty connected complex).
#[derive(Debug, Clone, Default)]
pub struct PersistenceDiagram {
    pub h0: Vec<(f64, f64)>,
    pub h1: Vec<(f64, f64)>,
    pub essential_h0: usize,
}

impl PersistenceDiagram {
    pub fn from_pairs(h0: Vec<(f64, f64)>, h1: Vec<(f64, f64)>) -> Self {
        let mut d = PersistenceDiagram {
            h0,
            h1,
            essential_h0: 1,
        };
        d.sort();
        d
    }

    fn sort(&mut self) {
        let key = |p: &(f64, f64)| (p.0, p.1);
        self.h0.sort_by(|a, b| key(a).partial_cmp(&key(b)).unwrap());
        self.h1.sort_by(|a, b| key(a).partial_cmp(&key(b)).unwrap());
    }

    pub fn pairs(&self, q: usize) -> &[(f64, f64)] {
        match q {
            0 => &self.h0,
            1 => &self.h1,
            _ => &[],
        }
    }

    /// Number of degree-q classes alive at radius r (`birth <= r < death`);
    /// degree 0 follows the reduced convention.
    pub fn betti_at(&self, q: usize, r: f64) -> usize {
        self.pairs(q)
            .iter()
            .filter(|&&(b, d)| b <= r && r < d)
            .count()
    }

    /// Unreduced number of connected components at radius r.
    pub fn components_at(&self, r: f64) -> usize {
        self.betti_at(0, r) + self.essential_h0
    }

    /// Restriction to the compact window: pairs with `r0 <= b < d <= r1`.
    pub fn window_restrict(&self, r0: f64, r1: f64) -> PersistenceDiagram {
        let keep = |pairs: &[(f64, f64)]| {
            pairs
                .iter()
                .copied()
                .filter(|&(b, d)| r0 <= b && d <= r1)
                .collect()
        };
        PersistenceDiagram {
            h0: keep(&self.h0),
            h1: keep(&self.h1),
            essential_h0: self.essential_h0,
        }
    }
}

/// Right-continuous integer step function r -> number of classes alive.
#[derive(Debug, Clone, Default)]
pub struct BettiCurve {
    /// Radii where the count changes.
    pub radii: Vec<f64>,
    /// Value on `[radii[i], radii[i+1])`; zero before the first radius.
    pub counts: Vec<u32>,
}

impl BettiCurve {
    pub fn eval(&self, r: f64) -> u32 {
        match self.radii.partition_point(|&x| x <= r) {
            0 => 0,
            k => self.counts[k - 1],
        }
    }
}

/// Exact Betti curve of the degree-q bars (reduced in degree 0).
pub fn betti_curve(diagram: &PersistenceDiagram, q: usize) -> BettiCurve {
    let pairs = diagram.pairs(q);
    let mut events: Vec<(f64, i32)> = Vec::with_capacity(2 * pairs.len());
    for &(b, d) in pairs {
        events.push((b, 1));
        if d.is_finite() {
            events.push((d, -1));
        }
    }
    events.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
    let mut radii = Vec::new();
    let mut counts = Vec::new();
    let mut cur = 0i32;
    let mut i = 0;
    while i < events.len() {
        let r = events[i].0;
        while i < events.len() && events[i].0 == r {
            cur += events[i].1;
            i += 1;
        }
        radii.push(r);
        counts.push(cur as u32);
    }
    BettiCurve { radii, counts }
}

// ---------------------------------------------------------------------------
// Reduction.
// ---------------------------------------------------------------------------

const UNPAIRED: u32 = u32::MAX;

/// Computes the persistence diagram of a filtration by the standard column
/// reduction over GF(2), processing dimensions top-down so that columns
/// paired as deaths clear their birth columns for free.
pub fn reduce(filt: &Filtration) -> Result<PersistenceDiagram, PersistenceError> {
    let m = filt.simplices.len();
    // Locate faces: vertices and edges by vertex tuple.
    let mut vertex_pos: Vec<u32> = vec![UNPAIRED; filt.vertex_count];
    let mut edge_pos: HashMap<(u32, u32), u32> = HashMap::new();
    for (i, s) in filt.simplices.iter().enumerate() {
        match s.dim {
            0 => {
                let v = s.verts[0] as usize;
                if v >= filt.vertex_count {
                    return Err(PersistenceError::MissingFace);
                }
                vertex_pos[v] = i as u32;
            }
            1 => {
                edge_pos.insert((s.verts[0], s.verts[1]), i as u32);
            }
            _ => {}
        }
    }

    let boundary = |i: usize| -> Result<Vec<u32>, PersistenceError> {
        let s = &filt.simplices[i];
        let mut col = match s.dim {
            0 => Vec::new(),
            1 => {
                let a = vertex_pos[s.verts[0] as usize];
                let b = vertex_pos[s.verts[1] as usize];
                if a == UNPAIRED || b == UNPAIRED {
                    return Err(PersistenceError::MissingFace);
                }
                vec![a, b]
            }
            2 => {
                let [a, b, c] = s.verts;
                let mut col = Vec::with_capacity(3);
                for e in [(a, b), (a, c), (b, c)] {
                    match edge_pos.get(&e) {
                        Some(&p) => col.push(p),
                        None => return Err(PersistenceError::MissingFace),
                    }
                }
                col
            }
            _ => unreachable!(),
        };
        col.sort_unstable();
        // A face appearing after its coface means the order is invalid.
        if col.iter().any(|&f| f as usize >= i) {
            return Err(PersistenceError::MissingFace);
        }
        Ok(col)
    };

    // pivot_owner[row] = column that claimed this row as its pivot.
    let mut pivot_owner: Vec<u32> = vec![UNPAIRED; m];
    let mut reduced_cols: Vec<Option<Box<[u32]>>> = vec![None; m];
    let mut cleared: Vec<bool> = vec![false; m];
    let mut scratch: Vec<u32> = Vec::new();

    let mut run_column = |i: usize,
                          col: Vec<u32>,
                          pivot_owner: &mut Vec<u32>,
                          reduced_cols: &mut Vec<Option<Box<[u32]>>>|
     -> Option<u32> {
        let mut col = col;
        loop {
            let low = match col.last() {
                Some(&low) => low,
                None => return None,
            };
            let owner = pivot_owner[low as usize];
            if owner == UNPAIRED {
                pivot_owner[low as usize] = i as u32;
                reduced_cols[i] = Some(col.into_boxed_slice());
                return Some(low);
            }
            // XOR-merge with the owning column.
            let other = reduced_cols[owner as usize].as_ref().unwrap();
            scratch.clear();
            let (mut a, mut b) = (0usize, 0usize);
            while a < col.len() && b < other.len() {
                match col[a].cmp(&other[b]) {
                    std::cmp::Ordering::Less => {
                        scratch.push(col[a]);
                        a += 1;
                    }
                    std::cmp::Ordering::Greater => {
                        scratch.push(other[b]);
                        b += 1;
                    }
                    std::cmp::Ordering::Equal => {
                        a += 1;
                        b += 1;
                    }
                }
            }
            scratch.extend_from_slice(&col[a..]);
            scratch.extend_from_slice(&other[b..]);
            std::mem::swap(&mut col, &mut scratch);
        }
    };

    let mut h0 = Vec::new();
    let mut h1 = Vec::new();
    // Dimension 2 first; pivots are edge rows and clear those edge columns.
    for i in 0..m {
        if filt.simplices[i].dim != 2 {
            continue;
        }
        let col = boundary(i)?;
        match run_column(i, col, &mut pivot_owner, &mut reduced_cols) {
            Some(low) => {
                cleared[low as usize] = true;
                let birth = filt.simplices[low as usize].value;
                let death = filt.simplices[i].value;
                if birth < death {
                    h1.push((birth, death));
                }
            }
            None => {
                // A 2-cycle cannot exist in a planar complex.
                return Err(PersistenceError::MissingFace);
            }
        }
    }
    // Dimension 1; vertex pivots give H0 deaths.
    let mut edge_essential = Vec::new();
    for i in 0..m {
        if filt.simplices[i].dim != 1 || cleared[i] {
            continue;
        }
        let col = boundary(i)?;
        match run_column(i, col, &mut pivot_owner, &mut reduced_cols) {
            Some(low) => {
                let birth = filt.simplices[low as usize].value;
                let death = filt.simplices[i].value;
                if birth < death {
                    h0.push((birth, death));
                }
            }
            None => {
                // Essential degree-1 class (never dies). Cannot occur for
                // alpha filtrations of point clouds, but general filtrations
                // may produce it.
                edge_essential.push((filt.simplices[i].value, f64::INFINITY));
            }
        }
    }
    h1.extend(edge_essential);
    // Vertices never claimed by an edge pivot are essential components; the
    // reduced convention drops them.
    let essential_h0 = (0..m)
        .filter(|&i| filt.simplices[i].dim == 0 && pivot_owner[i] == UNPAIRED)
        .count();

    let mut diagram = PersistenceDiagram {
        h0,
        h1,
        essential_h0,
    };
    diagram.sort();
    Ok(diagram)
}

// ---------------------------------------------------------------------------
// Weights and smoothed functionals.
// ---------------------------------------------------------------------------

/// A continuous piecewise-linear weight with compact support in (0, inf):
/// zero at and outside its endpoints.
#[derive(Debug, Clone)]
pub struct Weight {
    /// Breakpoints (radius, value), radii strictly increasing.
    pub breakpoints: Vec<(f64, f64)>,
    /// Prefix integrals at breakpoints.
    cumulative: Vec<f64>,
}

impl Weight {
    pub fn new(breakpoints: Vec<(f64, f64)>) -> Result<Self, PersistenceError> {
        if breakpoints.len() < 2 {
            return Err(PersistenceError::BadWeight(
                "need at least two breakpoints".into(),
            ));
        }
        for w in &breakpoints {
            if !(w.0.is_finite() && w.1.is_finite()) {
                return Err(PersistenceError::BadWeight("non-finite breakpoint".into()));
            }
        }
        if breakpoints[0].0 <= 0.0 {
            return Err(PersistenceError::BadWeight(
                "support must start at a positive radius".into(),
            ));
        }
        if breakpoints.windows(2).any(|w| w[1].0 <= w[0].0) {
            return Err(PersistenceError::BadWeight(
                "radii must be strictly increasing".into(),
            ));
        }
        if breakpoints[0].1 != 0.0 || breakpoints.last().unwrap().1 != 0.0 {
            return Err(PersistenceError::BadWeight(
                "weight must vanish at its support endpoints".into(),
            ));
        }
        let mut cumulative = Vec::with_capacity(breakpoints.len());
        let mut acc = 0.0;
        cumulative.push(0.0);
        for w in breakpoints.windows(2) {
            let ((r0, v0), (r1, v1)) = (w[0], w[1]);
            acc += 0.5 * (v0 + v1) * (r1 - r0);
            cumulative.push(acc);
        }
        Ok(Weight {
            breakpoints,
            cumulative,
        })
    }

    /// Unit hat: 0 at `r0` and `r1`, 1 at the midpoint.
    pub fn hat(r0: f64, r1: f64) -> Result<Self, PersistenceError> {
        Weight::new(vec![(r0, 0.0), (0.5 * (r0 + r1), 1.0), (r1, 0.0)])
    }

    /// Hat with an arbitrary apex.
    pub fn tent(r0: f64, apex: f64, r1: f64, height: f64) -> Result<Self, PersistenceError> {
        Weight::new(vec![(r0, 0.0), (apex, height), (r1, 0.0)])
    }

    pub fn support(&self) -> (f64, f64) {
        (self.breakpoints[0].0, self.breakpoints.last().unwrap().0)
    }

    pub fn sup_norm(&self) -> f64 {
        self.breakpoints
            .iter()
            .map(|&(_, v)| v.abs())
            .fold(0.0, f64::max)
    }

    pub fn eval(&self, r: f64) -> f64 {
        let (lo, hi) = self.support();
        if r <= lo || r >= hi {
            return 0.0;
        }
        let k = self.breakpoints.partition_point(|&(x, _)| x <= r) - 1;
        let (r0, v0) = self.breakpoints[k];
        let (r1, v1) = self.breakpoints[k + 1];
        v0 + (v1 - v0) * (r - r0) / (r1 - r0)
    }

    /// Closed-form integral of the weight from the start of its support to r.
    pub fn integral_to(&self, r: f64) -> f64 {
        let (lo, hi) = self.support();
        if r <= lo {
            return 0.0;
        }
        if r >= hi {
            return *self.cumulative.last().unwrap();
        }
        let k = self.breakpoints.partition_point(|&(x, _)| x <= r) - 1;
        let (r0, v0) = self.breakpoints[k];
        let (r1, v1) = self.breakpoints[k + 1];
        let t = r - r0;
        self.cumulative[k] + v0 * t + 0.5 * (v1 - v0) / (r1 - r0) * t * t
    }

    /// Exact integral of the weight over [b, d] (d may be infinite).
    pub fn integral(&self, b: f64, d: f64) -> f64 {
        let hi = if d.is_finite() {
            self.integral_to(d)
        } else {
            *self.cumulative.last().unwrap()
        };
        hi - self.integral_to(b)
    }
}

/// The smoothed persistence functional: sum over degree-1 bars of the exact
/// integral of the weight over [birth, death].
pub fn phi_psi(diagram: &PersistenceDiagram, psi: &Weight) -> f64 {
    diagram.h1.iter().map(|&(b, d)| psi.integral(b, d)).sum()
}

/// Same functional through the Betti-curve route: integrate
/// `beta_1(r) * psi(r)` exactly over the radius axis. Must agree with
/// [`phi_psi`] up to floating-point rounding; the two routes realize the
/// Fubini identity between bar-wise and alive-count integration.
pub fn phi_psi_betti(diagram: &PersistenceDiagram, psi: &Weight) -> f64 {
    let curve = betti_curve(diagram, 1);
    if curve.radii.is_empty() {
        return 0.0;
    }
    let mut total = 0.0;
    for k in 0..curve.radii.len() {
        let count = curve.counts[k];
        if count == 0 {
            continue;
        }
        let lo = curve.radii[k];
        let hi = if k + 1 < curve.radii.len() {
            curve.radii[k + 1]
        } else {
            f64::INFINITY
        };
        total += count as f64 * psi.integral(lo, hi);
    }
    total
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::filtration::{alpha_filtration, FiltSimplex, Filtration};
    use crate::geometry::{Point, PointCloud};
    use crate::rng::CounterRng;

    fn cloud(v: &[(f64, f64)]) -> PointCloud {
        PointCloud::new(v.iter().map(|&(x, y)| Point::new(x, y)).collect())
    }

    #[test]
    fn single_point_empty_diagram() {
        let f = alpha_filtration(&cloud(&[(0.3, 0.4)])).unwrap();
        let d = reduce(&f).unwrap();
        assert!(d.h0.is_empty());
        assert!(d.h1.is_empty());
        assert_eq!(d.essential_h0, 1);
    }

    #[test]
    fn equilateral_triangle_diagram() {
        let s = 1.0f64;
        let f = alpha_filtration(&cloud(&[
            (0.0, 0.0),
            (s, 0.0),
            (s / 2.0, s * 3.0f64.sqrt() / 2.0),
        ]))
        .unwrap();
        let d = reduce(&f).unwrap();
        assert_eq!(d.h0.len(), 2);
        for &(b, dd) in &d.h0 {
            assert_eq!(b, 0.0);
            assert!((dd - 0.5).abs() < 1e-12);
        }
        assert_eq!(d.h1.len(), 1);
        let (b, dd) = d.h1[0];
        assert!((b - 0.5).abs() < 1e-12);
        assert!((dd - 1.0 / 3.0f64.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn unit_square_h1() {
        let f = alpha_filtration(&cloud(&[(0.0, 0.0), (1.0, 0.0), (1.0, 1.0), (0.0, 1.0)]))
            .unwrap();
        let d = reduce(&f).unwrap();
        assert_eq!(d.h1.len(), 1);
        let (b, dd) = d.h1[0];
        assert!((b - 0.5).abs() < 1e-12);
        assert!((dd - 0.5 * 2.0f64.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn betti_curve_step_values() {
        let d = PersistenceDiagram::from_pairs(vec![], vec![(1.0, 3.0), (2.0, 4.0)]);
        let c = betti_curve(&d, 1);
        assert_eq!(c.eval(0.5), 0);
        assert_eq!(c.eval(1.5), 1);
        assert_eq!(c.eval(2.5), 2);
        // Right continuity: the class dying at 3 is already gone at r = 3.
        assert_eq!(c.eval(3.0), 1);
        assert_eq!(c.eval(3.5), 1);
        assert_eq!(c.eval(5.0), 0);
        assert_eq!(c.eval(1.0), 1);
        let empty = betti_curve(&PersistenceDiagram::default(), 1);
        assert_eq!(empty.eval(1.0), 0);
    }

    #[test]
    fn window_restrict_membership() {
        let d = PersistenceDiagram::from_pairs(vec![], vec![(0.1, 0.5), (0.3, 0.9)]);
        let w = d.window_restrict(0.2, 1.0);
        assert_eq!(w.h1, vec![(0.3, 0.9)]);
        let all = d.window_restrict(0.0, 2.0);
        assert_eq!(all.h1.len(), 2);
        let none = d.window_restrict(0.95, 1.0);
        assert!(none.h1.is_empty());
    }

    #[test]
    fn weight_validation() {
        assert!(Weight::new(vec![(0.0, 0.0), (1.0, 0.0)]).is_err()); // support at 0
        assert!(Weight::new(vec![(0.5, 0.1), (1.0, 0.0)]).is_err()); // nonzero end
        assert!(Weight::new(vec![(0.5, 0.0), (0.5, 0.0)]).is_err()); // not increasing
        assert!(Weight::new(vec![(0.5, 0.0)]).is_err());
        assert!(Weight::hat(0.4, 0.8).is_ok());
    }

    #[test]
    fn phi_psi_plateau_interval() {
        // Near-indicator of [0.4, 0.8] with negligible ramps.
        let eps = 1e-9;
        let psi = Weight::new(vec![
            (0.4 - eps, 0.0),
            (0.4, 1.0),
            (0.8, 1.0),
            (0.8 + eps, 0.0),
        ])
        .unwrap();
        let d = PersistenceDiagram::from_pairs(vec![], vec![(0.5, 0.7)]);
        assert!((phi_psi(&d, &psi) - 0.2).abs() < 1e-8);
        let disjoint = PersistenceDiagram::from_pairs(vec![], vec![(1.5, 2.0)]);
        assert_eq!(phi_psi(&disjoint, &psi), 0.0);
    }

    #[test]
    fn phi_routes_agree_on_random_inputs() {
        let rng = CounterRng::new(5150, 0);
        let mut ctr = 0u64;
        let mut next = || {
            ctr += 1;
            rng.uniform(ctr)
        };
        for _ in 0..60 {
            let n = 1 + (next() * 10.0) as usize;
            let mut h1 = Vec::new();
            for _ in 0..n {
                let b = 0.1 + next();
                let d = b + 0.01 + next();
                h1.push((b, d));
            }
            let d = PersistenceDiagram::from_pairs(vec![], h1);
            let r0 = 0.05 + 0.3 * next();
            let r1 = r0 + 0.2 + next();
            let apex = r0 + (r1 - r0) * (0.2 + 0.6 * next());
            let psi = Weight::tent(r0, apex, r1, 0.5 + next()).unwrap();
            let a = phi_psi(&d, &psi);
            let b = phi_psi_betti(&d, &psi);
            assert!((a - b).abs() <= 1e-10 * (1.0 + a.abs()), "{a} vs {b}");
        }
    }

    /// Two distinct diagram measures with the same alive-count profile give
    /// identical smoothed functionals: the test class is not
    /// measure-determining.
    #[test]
    fn swapped_deaths_indistinguishable() {
        let (b1, b2, d1, d2) = (0.3, 0.4, 0.6, 0.8);
        let m1 = PersistenceDiagram::from_pairs(vec![], vec![(b1, d1), (b2, d2)]);
        let m2 = PersistenceDiagram::from_pairs(vec![], vec![(b1, d2), (b2, d1)]);
        let rng = CounterRng::new(86, 3);
        for k in 0..50u64 {
            let r0 = 0.05 + 0.2 * rng.uniform(3 * k);
            let r1 = 0.85 + 0.3 * rng.uniform(3 * k + 1);
            let apex = r0 + (r1 - r0) * (0.1 + 0.8 * rng.uniform(3 * k + 2));
            let psi = Weight::tent(r0, apex, r1, 1.0).unwrap();
            let p1 = phi_psi(&m1, &psi);
            let p2 = phi_psi(&m2, &psi);
            assert!((p1 - p2).abs() <= 1e-10 * (1.0 + p1.abs()));
        }
    }

    /// GF(2) rank oracle: Betti numbers of the complex at scale r computed by
    /// Gaussian elimination on the boundary matrices.
    fn rank_gf2(mut rows: Vec<Vec<bool>>) -> usize {
        let mut rank = 0;
        let ncols = rows.first().map_or(0, |r| r.len());
        let mut used = vec![false; rows.len()];
        for c in 0..ncols {
            let Some(p) = (0..rows.len()).find(|&i| !used[i] && rows[i][c]) else {
                continue;
            };
            used[p] = true;
            rank += 1;
            let pivot_row = rows[p].clone();
            for (i, row) in rows.iter_mut().enumerate() {
                if i != p && row[c] {
                    for (a, b) in row.iter_mut().zip(&pivot_row) {
                        *a ^= *b;
                    }
                }
            }
        }
        rank
    }

    fn betti_by_rank(filt: &Filtration, r: f64) -> (usize, usize) {
        let simp: Vec<&FiltSimplex> = filt.simplices.iter().filter(|s| s.value <= r).collect();
        let verts: Vec<&&FiltSimplex> = simp.iter().filter(|s| s.dim == 0).collect();
        let edges: Vec<&&FiltSimplex> = simp.iter().filter(|s| s.dim == 1).collect();
        let tris: Vec<&&FiltSimplex> = simp.iter().filter(|s| s.dim == 2).collect();
        let vidx: HashMap<u32, usize> = verts
            .iter()
            .enumerate()
            .map(|(i, s)| (s.verts[0], i))
            .collect();
        let eidx: HashMap<(u32, u32), usize> = edges
            .iter()
            .enumerate()
            .map(|(i, s)| ((s.verts[0], s.verts[1]), i))
            .collect();
        // boundary_1: rows = edges, cols = vertices
        let d1: Vec<Vec<bool>> = edges
            .iter()
            .map(|s| {
                let mut row = vec![false; verts.len()];
                row[vidx[&s.verts[0]]] = true;
                row[vidx[&s.verts[1]]] = true;
                row
            })
            .collect();
        let d2: Vec<Vec<bool>> = tris
            .iter()
            .map(|s| {
                let [a, b, c] = s.verts;
                let mut row = vec![false; edges.len()];
                for e in [(a, b), (a, c), (b, c)] {
                    row[eidx[&e]] = true;
                }
                row
            })
            .collect();
        let r1 = rank_gf2(d1);
        let r2 = rank_gf2(d2);
        let b0 = verts.len() - r1;
        let b1 = edges.len() - r1 - r2;
        (b0, b1)
    }

    #[test]
    fn reduction_matches_rank_oracle() {
        let rng = CounterRng::new(31337, 0);
        for seed in 0..8u64 {
            let n = 6 + (seed as usize % 7);
            let pts: Vec<Point> = (0..n)
                .map(|i| {
                    Point::new(
                        rng.uniform((100 * seed + 2 * i as u64) * 2),
                        rng.uniform((100 * seed + 2 * i as u64) * 2 + 1),
                    )
                })
                .collect();
            let f = alpha_filtration(&PointCloud::new(pts)).unwrap();
            let d = reduce(&f).unwrap();
            let max_v = f
                .simplices
                .iter()
                .map(|s| s.value)
                .fold(0.0f64, f64::max);
            for k in 1..8 {
                let r = max_v * k as f64 / 7.5 + 1e-6;
                let (b0, b1) = betti_by_rank(&f, r);
                assert_eq!(d.components_at(r), b0, "seed {seed} r {r}");
                assert_eq!(d.betti_at(1, r), b1, "seed {seed} r {r}");
            }
        }
    }

    #[test]
    fn essential_h1_supported_for_general_filtrations() {
        // A bare 4-cycle: the loop never dies.
        let verts: Vec<FiltSimplex> = (0..4)
            .map(|v| FiltSimplex {
                value: 0.0,
                dim: 0,
                verts: [v, u32::MAX, u32::MAX],
            })
            .collect();
        let mut simplices = verts;
        for (a, b, val) in [(0u32, 1u32, 1.0), (1, 2, 1.0), (2, 3, 1.0), (0, 3, 2.0)] {
            simplices.push(FiltSimplex {
                value: val,
                dim: 1,
                verts: [a, b, u32::MAX],
            });
        }
        let f = Filtration {
            vertex_count: 4,
            simplices,
        };
        let d = reduce(&f).unwrap();
        assert_eq!(d.essential_h0, 1);
        assert_eq!(d.h1.len(), 1);
        assert_eq!(d.h1[0].0, 2.0);
        assert!(d.h1[0].1.is_infinite());
        // Betti curve and phi handle the infinite bar.
        let c = betti_curve(&d, 1);
        assert_eq!(c.eval(5.0), 1);
        let psi = Weight::hat(1.0, 3.0).unwrap();
        assert!((phi_psi(&d, &psi) - psi.integral(2.0, f64::INFINITY)).abs() < 1e-12);
    }

    /// Diagrams on compact windows are finite multisets: window restriction
    /// of random alpha diagrams always yields finitely many strictly ordered
    /// pairs with 0 <= b < d.
    #[test]
    fn diagram_pairs_well_formed() {
        let rng = CounterRng::new(777, 1);
        for seed in 0..6u64 {
            let pts: Vec<Point> = (0..30)
                .map(|i| {
                    Point::new(
                        rng.uniform(1000 * seed + 2 * i),
                        rng.uniform(1000 * seed + 2 * i + 1),
                    )
                })
                .collect();
            let f = alpha_filtration(&PointCloud::new(pts)).unwrap();
            let d = reduce(&f).unwrap();
            for &(b, dd) in d.h0.iter().chain(&d.h1) {
                assert!(b >= 0.0 && b < dd);
                assert!(dd.is_finite());
            }
        }
    }
}
