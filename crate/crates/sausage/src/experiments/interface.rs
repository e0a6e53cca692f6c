use super::{with_threads, ExpError, ExperimentConfig};
use crate::geometry::{Point, PointCloud};
use crate::gridoracle::{betti_numbers, grid_frame, rasterize_on, GridMask};
use crate::pathsim::{project_longitudinal, simulate_bm, DriftedBmParams};
use crate::persistence::Weight;
use crate::regen::{detect_regenerations, RegenParams};
use rayon::prelude::*;
use std::fmt::Write as _;

/// One audited (cut, radius) row. Betti terms are grid-oracle values; rows
/// whose terms move under a 5h radius perturbation are skipped.
#[derive(Debug, Clone)]
pub struct InterfaceRow {
    pub seed: u64,
    pub cut: usize,
    pub r: f64,
    pub skipped: bool,
    pub b1_a: usize,
    pub b1_b: usize,
    pub b1_union: usize,
    pub i0: usize,
    pub i1: usize,
    /// Overlap mask contained in the slab |<x,e> - U_k| <= a.
    pub in_slab: bool,
    /// Overlap of the block sausages equals the overlap of the window-
    /// segment sausages, pixelwise.
    pub window_equal: bool,
    /// Mayer-Vietoris sandwich in degree one.
    pub mv_ok: bool,
    /// Intersection-complexity bound
    /// `i1 + i0 <= b1_a + b1_b + b1_union + 1`.
    pub bound_ok: bool,
}

#[derive(Debug, Clone)]
pub struct SeedInterface {
    pub seed: u64,
    pub rows: Vec<InterfaceRow>,
    /// Telescoped almost-additivity: |Phi(tau_n) - sum Y_k| and sum I_k,
    /// grid-evaluated with a shared radius ladder.
    pub prop54_lhs: f64,
    pub prop54_rhs: f64,
    pub prop54_ok: bool,
    /// Pathwise complexity bound: integral of beta_1 over [r0, r1] against
    /// area(r1-sausage) / (2 pi r0).
    pub prop55_lhs: f64,
    pub prop55_rhs: f64,
    pub prop55_ok: bool,
    /// Grid-evaluated interface corrections I_k of the audited cuts.
    pub i_values: Vec<f64>,
    /// Non-adjacent block sausages never intersect.
    pub nonadjacent_ok: bool,
    pub warnings: Vec<String>,
}

#[derive(Debug, Clone)]
pub struct InterfaceReport {
    pub per_seed: Vec<SeedInterface>,
    pub i_mean: f64,
    pub i_se: f64,
    pub skipped_rows: usize,
    pub warnings: Vec<String>,
}

fn trapezoid(rungs: &[f64], values: &[f64]) -> f64 {
    let mut total = 0.0;
    for w in rungs.windows(2).zip(values.windows(2)) {
        total += 0.5 * (w.1[0] + w.1[1]) * (w.0[1] - w.0[0]);
    }
    total
}

struct CutAudit {
    rows: Vec<InterfaceRow>,
    y_k: f64,
    i_k: Option<f64>,
}

#[allow(clippy::too_many_arguments)]
fn audit_cut(
    cfg: &ExperimentConfig,
    seed: u64,
    k: usize,
    s_a: &PointCloud,
    s_b: &PointCloud,
    win_a: &PointCloud,
    win_b: &PointCloud,
    u_cut: f64,
    e: Point,
    psi: &Weight,
    rungs: &[f64],
    audit_interface: bool,
) -> Result<CutAudit, ExpError> {
    let h = cfg.grid_h;
    let mut pooled = s_a.clone();
    pooled.points.extend_from_slice(&s_b.points);
    let (origin, nx, ny) = grid_frame(&pooled, cfg.r1 + 5.0 * h, h)?;
    let mut rows = Vec::new();
    let mut y_vals = Vec::with_capacity(rungs.len());
    let mut i_vals = Vec::with_capacity(rungs.len());
    let mut all_stable = true;
    for &r in rungs {
        let terms = |radius: f64| -> Result<(usize, usize, usize, usize, usize), ExpError> {
            let ma = rasterize_on(s_a, radius, h, origin, nx, ny)?;
            let mb = rasterize_on(s_b, radius, h, origin, nx, ny)?;
            let union = betti_numbers(&ma.or(&mb)?).1;
            let inter = betti_numbers(&ma.and(&mb)?);
            Ok((
                betti_numbers(&ma).1,
                betti_numbers(&mb).1,
                union,
                inter.0,
                inter.1,
            ))
        };
        let mid = terms(r)?;
        if !audit_interface {
            // Only the per-block Y integrand is needed.
            y_vals.push(mid.0 as f64 * psi.eval(r));
            i_vals.push(0.0);
            continue;
        }
        let stable = terms(r - 5.0 * h)? == mid && terms(r + 5.0 * h)? == mid;
        let (b1_a, b1_b, b1_union, i0, i1) = mid;
        let ma = rasterize_on(s_a, r, h, origin, nx, ny)?;
        let mb = rasterize_on(s_b, r, h, origin, nx, ny)?;
        let overlap = ma.and(&mb)?;
        let in_slab = overlap_in_slab(&overlap, u_cut, e, cfg.slab_half_width);
        let wa = rasterize_on(win_a, r, h, origin, nx, ny)?;
        let wb = rasterize_on(win_b, r, h, origin, nx, ny)?;
        let window_equal = overlap.same_bits(&wa.and(&wb)?)?;
        let mv = b1_union as i64 - b1_a as i64 - b1_b as i64;
        let mv_ok = -(i1 as i64) <= mv && mv <= i0 as i64;
        let bound_ok = i1 + i0 <= b1_a + b1_b + b1_union + 1;
        if stable {
            y_vals.push(b1_a as f64 * psi.eval(r));
            i_vals.push((i0 + i1) as f64 * psi.eval(r).abs());
        } else {
            all_stable = false;
        }
        rows.push(InterfaceRow {
            seed,
            cut: k,
            r,
            skipped: !stable,
            b1_a,
            b1_b,
            b1_union,
            i0,
            i1,
            in_slab,
            window_equal,
            mv_ok,
            bound_ok,
        });
    }
    // Quadratures need every rung; partial ladders void the cut's integrals.
    let (y_k, i_k) = if y_vals.len() == rungs.len() {
        (
            trapezoid(rungs, &y_vals),
            if audit_interface {
                Some(trapezoid(rungs, &i_vals))
            } else {
                None
            },
        )
    } else {
        (f64::NAN, None)
    };
    let _ = all_stable;
    Ok(CutAudit { rows, y_k, i_k })
}

fn overlap_in_slab(mask: &GridMask, u_cut: f64, e: Point, a: f64) -> bool {
    for iy in 0..mask.ny {
        for ix in 0..mask.nx {
            if mask.get(ix, iy) {
                let c = mask.center(ix, iy);
                if (c.dot(e) - u_cut).abs() > a {
                    return false;
                }
            }
        }
    }
    true
}

/// Interface audit: per cut, rasterizes adjacent block sausages on a radius
/// ladder and checks slab containment, window-overlap equality, the
/// Mayer-Vietoris sandwich, and the intersection-complexity bound; per seed,
/// checks the telescoped almost-additivity bound and the pathwise
/// `integral beta_1 <= area / (2 pi r0)` bound, and reports the empirical
/// interface corrections I_k.
pub fn run_interface_audit(cfg: &ExperimentConfig) -> Result<InterfaceReport, ExpError> {
    let mut warnings = cfg.validate_topology()?;
    let psi = cfg.weight()?;
    let rungs: Vec<f64> = (0..cfg.radius_rungs)
        .map(|j| cfg.r0 + (j as f64 + 0.5) * (cfg.r1 - cfg.r0) / cfg.radius_rungs as f64)
        .collect();
    let params = RegenParams {
        level_spacing: cfg.level_spacing,
        buffer: cfg.buffer,
        slab_half_width: cfg.slab_half_width,
        eps_cut: cfg.eps_cut,
        nu: cfg.nu(),
    };

    let per_seed = |seed: u64| -> Result<SeedInterface, ExpError> {
        let margin = (params.d_star() + cfg.slab_half_width) / cfg.nu() + 10.0;
        let bm = DriftedBmParams::new([0.0, 0.0], cfg.mu, cfg.t_max + margin, cfg.dt, seed)
            .with_noise_scale(cfg.noise_scale);
        let path = simulate_bm(&bm)?;
        let u = project_longitudinal(&path, cfg.mu)?;
        let trace = detect_regenerations(&u, &path.times, &params)?;
        let e = Point::new(cfg.mu[0] / cfg.nu(), cfg.mu[1] / cfg.nu());
        let n_cuts = trace.n_at(cfg.t_max);
        let n_audit = n_cuts.saturating_sub(1).min(cfg.max_cuts_audited);
        let cut_idx: Vec<usize> = trace.cuts.iter().map(|c| c.index).collect();
        let block = |k: usize| -> PointCloud {
            let lo = if k == 1 { 0 } else { cut_idx[k - 2] };
            PointCloud::new(path.points[lo..=cut_idx[k - 1]].to_vec())
        };

        let mut rows = Vec::new();
        let mut y_values = Vec::new();
        let mut i_values = Vec::new();
        let mut seed_warnings = Vec::new();
        for k in 1..=n_audit {
            let cut = &trace.cuts[k - 1];
            let s_a = block(k);
            let s_b = block(k + 1);
            let j_minus = u[..=cut.index]
                .iter()
                .rposition(|&v| v <= cut.u_value - cfg.slab_half_width);
            let j_plus = u[cut.index..]
                .iter()
                .position(|&v| v >= cut.u_value + cfg.slab_half_width)
                .map(|off| cut.index + off);
            let (Some(jm), Some(jp)) = (j_minus, j_plus) else {
                seed_warnings.push(format!("seed {seed}: cut {k} lacks window data"));
                continue;
            };
            let win_a = PointCloud::new(path.points[jm..=cut.index].to_vec());
            let win_b = PointCloud::new(path.points[cut.index..=jp].to_vec());
            let audit = audit_cut(
                cfg, seed, k, &s_a, &s_b, &win_a, &win_b, cut.u_value, e, &psi, &rungs, true,
            )?;
            rows.extend(audit.rows);
            y_values.push(audit.y_k);
            if k < n_audit {
                if let Some(i_k) = audit.i_k {
                    i_values.push(i_k);
                }
            }
        }
        // Prop 5.4: Phi(tau_n) via the prefix sausage against the block sum.
        let (prop54_lhs, prop54_rhs, prop54_ok) = if n_audit >= 2
            && y_values.iter().all(|y| y.is_finite())
        {
            let prefix = PointCloud::new(path.points[..=cut_idx[n_audit - 1]].to_vec());
            let (origin, nx, ny) = grid_frame(&prefix, cfg.r1 + 5.0 * cfg.grid_h, cfg.grid_h)?;
            let mut phi_vals = Vec::with_capacity(rungs.len());
            for &r in &rungs {
                let mask = rasterize_on(&prefix, r, cfg.grid_h, origin, nx, ny)?;
                phi_vals.push(betti_numbers(&mask).1 as f64 * psi.eval(r));
            }
            let phi_tau_n = trapezoid(&rungs, &phi_vals);
            let lhs = (phi_tau_n - y_values.iter().sum::<f64>()).abs();
            let rhs: f64 = i_values.iter().sum();
            (lhs, rhs, lhs <= rhs + 1e-9 * (1.0 + rhs))
        } else {
            (f64::NAN, f64::NAN, true)
        };
        // Prop 5.5 on the whole horizon.
        let full = PointCloud::new(path.points[..=index_at_time(&path.times, cfg.t_max)].to_vec());
        let (origin, nx, ny) = grid_frame(&full, cfg.r1 + 5.0 * cfg.grid_h, cfg.grid_h)?;
        let mut beta_vals = Vec::with_capacity(rungs.len());
        for &r in &rungs {
            let mask = rasterize_on(&full, r, cfg.grid_h, origin, nx, ny)?;
            beta_vals.push(betti_numbers(&mask).1 as f64);
        }
        let prop55_lhs = trapezoid(&rungs, &beta_vals);
        let area_r1 = rasterize_on(&full, cfg.r1, cfg.grid_h, origin, nx, ny)?.area();
        let prop55_rhs = area_r1 / (2.0 * std::f64::consts::PI * cfg.r0);
        // Non-adjacent blocks never meet at the top radius.
        let mut nonadjacent_ok = true;
        for k in 1..=n_audit.saturating_sub(2) {
            let (b0, b1) =
                crate::gridoracle::intersect_betti(&block(k), &block(k + 2), cfg.r1, cfg.grid_h)?;
            if (b0, b1) != (0, 0) {
                nonadjacent_ok = false;
            }
        }
        Ok(SeedInterface {
            seed,
            rows,
            prop54_lhs,
            prop54_rhs,
            prop54_ok,
            prop55_lhs,
            prop55_rhs,
            prop55_ok: prop55_lhs <= prop55_rhs + 1e-9 * (1.0 + prop55_rhs),
            i_values,
            nonadjacent_ok,
            warnings: seed_warnings,
        })
    };

    let results: Vec<Result<SeedInterface, ExpError>> = with_threads(cfg.threads, || {
        cfg.seeds.par_iter().map(|&s| per_seed(s)).collect()
    });
    let per_seed: Result<Vec<SeedInterface>, ExpError> = results.into_iter().collect();
    let per_seed = per_seed?;
    for s in &per_seed {
        warnings.extend(s.warnings.iter().cloned());
    }
    let all_i: Vec<f64> = per_seed.iter().flat_map(|s| s.i_values.clone()).collect();
    let (i_mean, i_se) = if all_i.len() >= 2 {
        let n = all_i.len() as f64;
        let m = all_i.iter().sum::<f64>() / n;
        let var = all_i.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (n - 1.0);
        (m, (var / n).sqrt())
    } else {
        (f64::NAN, f64::NAN)
    };
    let skipped_rows = per_seed
        .iter()
        .flat_map(|s| &s.rows)
        .filter(|r| r.skipped)
        .count();
    Ok(InterfaceReport {
        per_seed,
        i_mean,
        i_se,
        skipped_rows,
        warnings,
    })
}

fn index_at_time(times: &[f64], t: f64) -> usize {
    times.partition_point(|&x| x <= t).saturating_sub(1)
}

impl InterfaceReport {
    pub fn rows_csv(&self) -> String {
        let mut out = String::from(
            "seed,cut,r,skipped,b1_a,b1_b,b1_union,i0,i1,in_slab,window_equal,mv_ok,bound_ok\n",
        );
        for s in &self.per_seed {
            for r in &s.rows {
                let _ = writeln!(
                    out,
                    "{},{},{:.6},{},{},{},{},{},{},{},{},{},{}",
                    r.seed,
                    r.cut,
                    r.r,
                    r.skipped as u8,
                    r.b1_a,
                    r.b1_b,
                    r.b1_union,
                    r.i0,
                    r.i1,
                    r.in_slab as u8,
                    r.window_equal as u8,
                    r.mv_ok as u8,
                    r.bound_ok as u8
                );
            }
        }
        out
    }

    pub fn summary_csv(&self) -> String {
        let mut out = String::from(
            "seed,prop54_lhs,prop54_rhs,prop54_ok,prop55_lhs,prop55_rhs,prop55_ok,nonadjacent_ok\n",
        );
        for s in &self.per_seed {
            let _ = writeln!(
                out,
                "{},{:.10e},{:.10e},{},{:.10e},{:.10e},{},{}",
                s.seed,
                s.prop54_lhs,
                s.prop54_rhs,
                s.prop54_ok as u8,
                s.prop55_lhs,
                s.prop55_rhs,
                s.prop55_ok as u8,
                s.nonadjacent_ok as u8
            );
        }
        let _ = writeln!(out, "i_mean,{:.10e},{:.3e},,,,,", self.i_mean, self.i_se);
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn small_audit_runs_clean() {
        let cfg = ExperimentConfig::from_json(
            r#"{
            "mu": [1.0, 0.0], "t_max": 45.0, "dt": 0.004,
            "r0": 0.35, "r1": 0.8,
            "level_spacing": 4.5, "buffer": 0.35, "slab_half_width": 2.1,
            "grid_h": 0.02, "seeds": [3, 4],
            "radius_rungs": 5, "max_cuts_audited": 4
        }"#,
        )
        .unwrap();
        let report = run_interface_audit(&cfg).unwrap();
        assert!(!report.per_seed.is_empty());
        for s in &report.per_seed {
            assert!(s.nonadjacent_ok, "seed {}", s.seed);
            assert!(s.prop55_ok, "seed {}: {} vs {}", s.seed, s.prop55_lhs, s.prop55_rhs);
            assert!(s.prop54_ok, "seed {}: {} vs {}", s.seed, s.prop54_lhs, s.prop54_rhs);
            for row in &s.rows {
                if row.skipped {
                    continue;
                }
                assert!(row.in_slab, "{row:?}");
                assert!(row.mv_ok, "{row:?}");
                assert!(row.bound_ok, "{row:?}");
            }
        }
        let csv = report.rows_csv();
        assert!(csv.starts_with("seed,cut,r"));
    }
}
