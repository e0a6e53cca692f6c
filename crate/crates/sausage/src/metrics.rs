//! Bottleneck distance between persistence diagrams.
//!
//! `d_B(D, E) = inf over partial matchings of the max sup-norm displacement`,
//! unmatched points paired to the diagonal at cost (death - birth) / 2. The
//! optimum is always attained at a candidate value (a pairwise sup-norm cost
//! or a diagonal cost), so a bisection over reals narrows the window and an
//! exact binary search over the candidates inside it returns the true
//! optimum, never a geometric approximation. Ties break toward the smaller
//! candidate (infimum convention).

use crate::persistence::PersistenceDiagram;
use std::collections::HashMap;

/// A witness matching: index pairs into the two diagrams plus diagonal
/// assignments. Its cost (max assignment cost) equals the reported distance
/// exactly.
#[derive(Debug, Clone, Default)]
pub struct Matching {
    pub pairs: Vec<(usize, usize)>,
    pub diagonal_left: Vec<usize>,
    pub diagonal_right: Vec<usize>,
    pub cost: f64,
}

impl Matching {
    /// Recomputes the max assignment cost from the stored assignments.
    pub fn cost_of(&self, left: &[(f64, f64)], right: &[(f64, f64)]) -> f64 {
        let mut c = 0.0f64;
        for &(i, j) in &self.pairs {
            c = c.max(pair_cost(left[i], right[j]));
        }
        for &i in &self.diagonal_left {
            c = c.max(diag_cost(left[i]));
        }
        for &j in &self.diagonal_right {
            c = c.max(diag_cost(right[j]));
        }
        c
    }
}

#[inline]
fn pair_cost(a: (f64, f64), b: (f64, f64)) -> f64 {
    let db = (a.0 - b.0).abs();
    let dd = if a.1.is_infinite() && b.1.is_infinite() {
        0.0
    } else {
        (a.1 - b.1).abs()
    };
    db.max(dd)
}

#[inline]
fn diag_cost(a: (f64, f64)) -> f64 {
    (a.1 - a.0) / 2.0
}

/// Bucket grid over diagram points for sup-norm range queries.
struct DiagramGrid {
    cell: f64,
    buckets: HashMap<(i64, i64), Vec<u32>>,
}

impl DiagramGrid {
    fn build(points: &[(f64, f64)], cell: f64) -> Self {
        let cell = if cell.is_finite() && cell > 0.0 { cell } else { 1.0 };
        let mut buckets: HashMap<(i64, i64), Vec<u32>> = HashMap::new();
        for (i, p) in points.iter().enumerate() {
            buckets
                .entry((key(p.0, cell), key(p.1, cell)))
                .or_default()
                .push(i as u32);
        }
        DiagramGrid { cell, buckets }
    }

    fn neighbors<'s>(&'s self, p: (f64, f64), out: &mut Vec<u32>) {
        out.clear();
        let (kx, ky) = (key(p.0, self.cell), key(p.1, self.cell));
        for dy in -1..=1 {
            for dx in -1..=1 {
                if let Some(v) = self.buckets.get(&(kx + dx, ky + dy)) {
                    out.extend_from_slice(v);
                }
            }
        }
    }
}

#[inline]
fn key(x: f64, cell: f64) -> i64 {
    (x / cell).floor().clamp(-1e15, 1e15) as i64
}

/// One feasibility check plus witness: is there a matching of cost <= delta?
/// Augmenting-path matching where any point with diagonal cost <= delta may
/// stay unmatched.
struct Feasibility<'a> {
    left: &'a [(f64, f64)],
    right: &'a [(f64, f64)],
    delta: f64,
    grid_left: DiagramGrid,
    grid_right: DiagramGrid,
    match_left: Vec<Option<u32>>,
    match_right: Vec<Option<u32>>,
    visit_left: Vec<u32>,
    visit_right: Vec<u32>,
    stamp: u32,
}

impl<'a> Feasibility<'a> {
    fn new(left: &'a [(f64, f64)], right: &'a [(f64, f64)], delta: f64) -> Self {
        Feasibility {
            left,
            right,
            delta,
            grid_left: DiagramGrid::build(left, delta),
            grid_right: DiagramGrid::build(right, delta),
            match_left: vec![None; left.len()],
            match_right: vec![None; right.len()],
            visit_left: vec![0; left.len()],
            visit_right: vec![0; right.len()],
            stamp: 0,
        }
    }

    /// Augment from an unmatched left point; may end at a free right point
    /// or dislodge a matched left point whose diagonal cost fits.
    fn augment_left(&mut self, i: usize, scratch: &mut Vec<u32>) -> bool {
        self.visit_left[i] = self.stamp;
        self.grid_right.neighbors(self.left[i], scratch);
        let candidates = scratch.clone();
        for &j in &candidates {
            let j = j as usize;
            if self.visit_right[j] == self.stamp
                || pair_cost(self.left[i], self.right[j]) > self.delta
            {
                continue;
            }
            self.visit_right[j] = self.stamp;
            let takeover = match self.match_right[j] {
                None => true,
                Some(x) => {
                    let x = x as usize;
                    (diag_cost(self.left[x]) <= self.delta && self.visit_left[x] != self.stamp)
                        || (self.visit_left[x] != self.stamp && {
                            let mut s = Vec::new();
                            self.augment_left(x, &mut s)
                        })
                }
            };
            if takeover {
                if let Some(x) = self.match_right[j] {
                    if self.match_left[x as usize] == Some(j as u32) {
                        self.match_left[x as usize] = None;
                    }
                }
                self.match_right[j] = Some(i as u32);
                self.match_left[i] = Some(j as u32);
                return true;
            }
        }
        false
    }

    fn augment_right(&mut self, j: usize, scratch: &mut Vec<u32>) -> bool {
        self.visit_right[j] = self.stamp;
        self.grid_left.neighbors(self.right[j], scratch);
        let candidates = scratch.clone();
        for &i in &candidates {
            let i = i as usize;
            if self.visit_left[i] == self.stamp
                || pair_cost(self.left[i], self.right[j]) > self.delta
            {
                continue;
            }
            self.visit_left[i] = self.stamp;
            let takeover = match self.match_left[i] {
                None => true,
                Some(y) => {
                    let y = y as usize;
                    (diag_cost(self.right[y]) <= self.delta && self.visit_right[y] != self.stamp)
                        || (self.visit_right[y] != self.stamp && {
                            let mut s = Vec::new();
                            self.augment_right(y, &mut s)
                        })
                }
            };
            if takeover {
                if let Some(y) = self.match_left[i] {
                    if self.match_right[y as usize] == Some(i as u32) {
                        self.match_right[y as usize] = None;
                    }
                }
                self.match_left[i] = Some(j as u32);
                self.match_right[j] = Some(i as u32);
                return true;
            }
        }
        false
    }

    /// Every point whose diagonal cost exceeds delta must be matched across.
    fn run(&mut self) -> bool {
        let mut scratch = Vec::new();
        for i in 0..self.left.len() {
            if diag_cost(self.left[i]) > self.delta && self.match_left[i].is_none() {
                self.stamp += 1;
                if !self.augment_left(i, &mut scratch) {
                    return false;
                }
            }
        }
        for j in 0..self.right.len() {
            if diag_cost(self.right[j]) > self.delta && self.match_right[j].is_none() {
                self.stamp += 1;
                if !self.augment_right(j, &mut scratch) {
                    return false;
                }
            }
        }
        true
    }

    fn into_matching(self) -> Matching {
        let mut m = Matching::default();
        for (i, mj) in self.match_left.iter().enumerate() {
            match mj {
                Some(j) => m.pairs.push((i, *j as usize)),
                None => m.diagonal_left.push(i),
            }
        }
        for (j, mi) in self.match_right.iter().enumerate() {
            if mi.is_none() {
                m.diagonal_right.push(j);
            }
        }
        m
    }
}

fn feasible<'a>(
    left: &'a [(f64, f64)],
    right: &'a [(f64, f64)],
    delta: f64,
) -> Option<Feasibility<'a>> {
    let mut f = Feasibility::new(left, right, delta);
    if f.run() {
        Some(f)
    } else {
        None
    }
}

/// Candidate values inside (lo, hi]: all diagonal costs and all pairwise
/// costs in range. Returns None if the enumeration would exceed the budget.
fn candidates_in(
    left: &[(f64, f64)],
    right: &[(f64, f64)],
    lo: f64,
    hi: f64,
) -> Option<Vec<f64>> {
    const BUDGET: usize = 2_000_000;
    let mut out = Vec::new();
    for &p in left.iter().chain(right.iter()) {
        let c = diag_cost(p);
        if c > lo && c <= hi {
            out.push(c);
        }
    }
    let grid = DiagramGrid::build(right, hi.max(1e-300));
    let mut scratch = Vec::new();
    for &p in left {
        grid.neighbors(p, &mut scratch);
        for &j in &scratch {
            let c = pair_cost(p, right[j as usize]);
            if c > lo && c <= hi {
                out.push(c);
                if out.len() > BUDGET {
                    return None;
                }
            }
        }
    }
    out.sort_by(|a, b| a.partial_cmp(b).unwrap());
    out.dedup();
    Some(out)
}

/// Exact bottleneck distance between the degree-q parts of two diagrams,
/// with an optimal matching as witness. Empty degrees give distance 0.
pub fn bottleneck(d1: &PersistenceDiagram, d2: &PersistenceDiagram, q: usize) -> (f64, Matching) {
    bottleneck_pairs(d1.pairs(q), d2.pairs(q))
}

pub fn bottleneck_pairs(left: &[(f64, f64)], right: &[(f64, f64)]) -> (f64, Matching) {
    // Split off essential (infinite-death) points: they can only match each
    // other, optimally in sorted birth order.
    let fin_l: Vec<usize> = (0..left.len()).filter(|&i| left[i].1.is_finite()).collect();
    let fin_r: Vec<usize> = (0..right.len())
        .filter(|&j| right[j].1.is_finite())
        .collect();
    let inf_l: Vec<usize> = (0..left.len())
        .filter(|&i| !left[i].1.is_finite())
        .collect();
    let inf_r: Vec<usize> = (0..right.len())
        .filter(|&j| !right[j].1.is_finite())
        .collect();
    let mut inf_cost = 0.0f64;
    let mut inf_pairs = Vec::new();
    if inf_l.len() != inf_r.len() {
        inf_cost = f64::INFINITY;
    } else if !inf_l.is_empty() {
        let mut sl = inf_l.clone();
        let mut sr = inf_r.clone();
        sl.sort_by(|&a, &b| left[a].0.partial_cmp(&left[b].0).unwrap());
        sr.sort_by(|&a, &b| right[a].0.partial_cmp(&right[b].0).unwrap());
        for (&i, &j) in sl.iter().zip(&sr) {
            inf_cost = inf_cost.max((left[i].0 - right[j].0).abs());
            inf_pairs.push((i, j));
        }
    }

    let l: Vec<(f64, f64)> = fin_l.iter().map(|&i| left[i]).collect();
    let r: Vec<(f64, f64)> = fin_r.iter().map(|&j| right[j]).collect();

    let (fin_cost, fin_matching) = bottleneck_finite(&l, &r);

    // Reindex the finite matching back into the caller's arrays.
    let mut m = Matching {
        pairs: inf_pairs,
        ..Default::default()
    };
    for &(i, j) in &fin_matching.pairs {
        m.pairs.push((fin_l[i], fin_r[j]));
    }
    for &i in &fin_matching.diagonal_left {
        m.diagonal_left.push(fin_l[i]);
    }
    for &j in &fin_matching.diagonal_right {
        m.diagonal_right.push(fin_r[j]);
    }
    let cost = fin_cost.max(inf_cost);
    m.cost = cost;
    (cost, m)
}

fn bottleneck_finite(left: &[(f64, f64)], right: &[(f64, f64)]) -> (f64, Matching) {
    if left.is_empty() && right.is_empty() {
        return (0.0, Matching::default());
    }
    // All-diagonal matching bounds the optimum from above.
    let delta_up = left
        .iter()
        .chain(right.iter())
        .map(|&p| diag_cost(p))
        .fold(0.0f64, f64::max);
    if let Some(f) = feasible(left, right, 0.0) {
        let mut m = f.into_matching();
        m.cost = 0.0;
        return (0.0, m);
    }
    // Invariant: lo infeasible, hi feasible.
    let mut lo = 0.0f64;
    let mut hi = delta_up;
    for iter in 0..200 {
        if hi - lo <= f64::EPSILON * hi.max(1.0) {
            break;
        }
        // Once the window is narrow, switch to exact candidate search.
        if iter >= 40 && iter % 8 == 0 {
            if let Some(cands) = candidates_in(left, right, lo, hi) {
                if cands.len() <= 4096 {
                    break;
                }
            }
        }
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if feasible(left, right, mid).is_some() {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    let cands = candidates_in(left, right, lo, hi).unwrap_or_else(|| vec![hi]);
    let cands = if cands.is_empty() { vec![hi] } else { cands };
    // Binary search the candidate list: smallest feasible value.
    let mut a = 0usize;
    let mut b = cands.len() - 1; // cands[b] >= true optimum, feasible
    while a < b {
        let mid = (a + b) / 2;
        if feasible(left, right, cands[mid]).is_some() {
            b = mid;
        } else {
            a = mid + 1;
        }
    }
    let delta = cands[a];
    let f = feasible(left, right, delta).expect("optimum must be feasible");
    let mut m = f.into_matching();
    m.cost = m.cost_of(left, right);
    debug_assert!(m.cost <= delta + f64::EPSILON);
    (delta, m)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::filtration::alpha_filtration;
    use crate::geometry::{hausdorff, Point, PointCloud};
    use crate::persistence::reduce;
    use crate::rng::CounterRng;

    fn diagram(h1: Vec<(f64, f64)>) -> PersistenceDiagram {
        PersistenceDiagram::from_pairs(vec![], h1)
    }

    /// Exhaustive optimum over all partial matchings, n <= 8 per side.
    fn brute(left: &[(f64, f64)], right: &[(f64, f64)]) -> f64 {
        fn go(i: usize, left: &[(f64, f64)], right: &[(f64, f64)], used: &mut [bool]) -> f64 {
            if i == left.len() {
                let mut c = 0.0f64;
                for (j, &u) in used.iter().enumerate() {
                    if !u {
                        c = c.max(diag_cost(right[j]));
                    }
                }
                return c;
            }
            // Diagonal option for left[i].
            let mut best = diag_cost(left[i]).max(go(i + 1, left, right, used));
            for j in 0..right.len() {
                if used[j] {
                    continue;
                }
                used[j] = true;
                let c = pair_cost(left[i], right[j]).max(go(i + 1, left, right, used));
                used[j] = false;
                best = best.min(c);
            }
            best
        }
        let mut used = vec![false; right.len()];
        go(0, left, right, &mut used)
    }

    #[test]
    fn identical_diagrams_zero() {
        let d = diagram(vec![(0.1, 0.5), (0.2, 0.9), (0.4, 1.4)]);
        let (dist, m) = bottleneck(&d, &d, 1);
        assert_eq!(dist, 0.0);
        assert_eq!(m.pairs.len(), 3);
    }

    #[test]
    fn single_point_to_diagonal() {
        let d = diagram(vec![(0.0, 2.0)]);
        let e = diagram(vec![]);
        let (dist, m) = bottleneck(&d, &e, 1);
        assert_eq!(dist, 1.0);
        assert_eq!(m.diagonal_left, vec![0]);
    }

    #[test]
    fn two_point_example() {
        let d = diagram(vec![(0.0, 2.0)]);
        let e = diagram(vec![(0.5, 2.2)]);
        let (dist, _) = bottleneck(&d, &e, 1);
        assert_eq!(dist, 0.5);
        assert_eq!(brute(&d.h1, &e.h1), 0.5);
    }

    #[test]
    fn empty_degree_zero_distance() {
        let d = diagram(vec![]);
        let (dist, m) = bottleneck(&d, &d, 1);
        assert_eq!(dist, 0.0);
        assert!(m.pairs.is_empty());
        // Degree with no data at all.
        let (dist0, _) = bottleneck(&d, &d, 0);
        assert_eq!(dist0, 0.0);
    }

    fn random_diagram(seed: u64, n: usize, scale: f64) -> Vec<(f64, f64)> {
        let rng = CounterRng::new(seed, 9);
        (0..n)
            .map(|i| {
                let b = scale * rng.uniform(2 * i as u64);
                let d = b + 1e-3 + scale * rng.uniform(2 * i as u64 + 1);
                (b, d)
            })
            .collect()
    }

    #[test]
    fn matches_brute_force_on_small_diagrams() {
        let rng = CounterRng::new(1, 2);
        for case in 0..200u64 {
            let n1 = (rng.uniform(2 * case) * 9.0) as usize;
            let n2 = (rng.uniform(2 * case + 1) * 9.0) as usize;
            let l = random_diagram(1000 + case, n1, 1.0);
            let r = random_diagram(5000 + case, n2, 1.0);
            let (dist, m) = bottleneck_pairs(&l, &r);
            let exact = brute(&l, &r);
            assert_eq!(
                dist.to_bits(),
                exact.to_bits(),
                "case {case}: {dist} vs {exact}"
            );
            assert_eq!(m.cost_of(&l, &r).to_bits(), dist.to_bits(), "witness cost");
        }
    }

    #[test]
    fn metric_axioms() {
        for seed in 0..8u64 {
            let a = diagram(random_diagram(3 * seed, 12, 1.0));
            let b = diagram(random_diagram(3 * seed + 1, 15, 1.0));
            let c = diagram(random_diagram(3 * seed + 2, 10, 1.0));
            let (dab, _) = bottleneck(&a, &b, 1);
            let (dba, _) = bottleneck(&b, &a, 1);
            let (dac, _) = bottleneck(&a, &c, 1);
            let (dcb, _) = bottleneck(&c, &b, 1);
            assert_eq!(dab.to_bits(), dba.to_bits(), "symmetry");
            assert!(dab <= dac + dcb + 1e-12, "triangle");
            let (daa, _) = bottleneck(&a, &a, 1);
            assert_eq!(daa, 0.0);
        }
    }

    /// Stability audit: bottleneck distance between alpha diagrams of two
    /// clouds never exceeds their Hausdorff distance.
    #[test]
    fn stability_bounded_by_hausdorff() {
        let rng = CounterRng::new(404, 0);
        for seed in 0..6u64 {
            let base: Vec<Point> = (0..40)
                .map(|i| {
                    Point::new(
                        rng.uniform(1000 * seed + 2 * i),
                        rng.uniform(1000 * seed + 2 * i + 1),
                    )
                })
                .collect();
            let moved: Vec<Point> = base
                .iter()
                .enumerate()
                .map(|(i, p)| {
                    let (dx, dy) = rng.in_disk(5000 * seed + i as u64, 0.05);
                    Point::new(p.x + dx, p.y + dy)
                })
                .collect();
            let a = PointCloud::new(base);
            let b = PointCloud::new(moved);
            let dh = hausdorff(&a, &b).unwrap();
            let da = reduce(&alpha_filtration(&a).unwrap()).unwrap();
            let db = reduce(&alpha_filtration(&b).unwrap()).unwrap();
            for q in 0..2 {
                let (dist, _) = bottleneck(&da, &db, q);
                assert!(
                    dist <= dh + 1e-9,
                    "seed {seed} q {q}: d_B {dist} > d_H {dh}"
                );
            }
        }
    }

    #[test]
    fn essential_points_matched_by_birth() {
        let d = PersistenceDiagram::from_pairs(vec![], vec![(0.2, f64::INFINITY), (0.1, 0.4)]);
        let e = PersistenceDiagram::from_pairs(vec![], vec![(0.35, f64::INFINITY), (0.1, 0.4)]);
        let (dist, _) = bottleneck(&d, &e, 1);
        assert!((dist - 0.15).abs() < 1e-15);
        let lone = PersistenceDiagram::from_pairs(vec![], vec![(0.2, f64::INFINITY)]);
        let none = diagram(vec![]);
        let (dist, _) = bottleneck(&lone, &none, 1);
        assert!(dist.is_infinite());
    }
}
