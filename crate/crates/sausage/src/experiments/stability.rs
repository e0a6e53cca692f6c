use super::{with_threads, ExpError, ExperimentConfig};
use crate::filtration::alpha_filtration;
use crate::geometry::hausdorff;
use crate::metrics::bottleneck;
use crate::pathsim::{
    add_noise, modulus_of_continuity, polygonal_densify, simulate_bm, subsample, DriftedBmParams,
    Partition,
};
use crate::persistence::{reduce, PersistenceDiagram};
use rayon::prelude::*;
use std::fmt::Write as _;

/// One inequality row of the sampling-stability experiment. Raw operands are
/// always carried so a failed flag is reproducible from the CSV alone.
#[derive(Debug, Clone)]
pub struct StabilityRow {
    pub seed: u64,
    /// plain | noise | polygonal
    pub variant: &'static str,
    pub mesh: f64,
    pub omega: f64,
    /// Hausdorff distance between the reference cloud and the variant cloud.
    pub d_h: f64,
    pub d_b0: f64,
    pub d_b1: f64,
    /// Realized noise radius (noise variant) or densification slack h/2
    /// (polygonal variant); 0 for plain rows.
    pub extra: f64,
    /// d_B <= d_H + extra + tol, both degrees.
    pub chain_db_ok: bool,
    /// d_H <= omega + extra + tol.
    pub chain_dh_ok: bool,
}

#[derive(Debug, Clone)]
pub struct SlopeFit {
    pub seed: u64,
    pub slope_q0: f64,
    pub slope_q1: f64,
}

#[derive(Debug, Clone)]
pub struct StabilityReport {
    pub rows: Vec<StabilityRow>,
    pub fits: Vec<SlopeFit>,
    pub median_slope_q0: f64,
    pub median_slope_q1: f64,
}

const TOL: f64 = 1e-9;

/// Least-squares slope of ln(y) against ln(x), ignoring nonpositive y.
fn loglog_slope(points: &[(f64, f64)]) -> f64 {
    let data: Vec<(f64, f64)> = points
        .iter()
        .filter(|(x, y)| *x > 0.0 && *y > 0.0)
        .map(|(x, y)| (x.ln(), y.ln()))
        .collect();
    let n = data.len() as f64;
    if data.len() < 2 {
        return f64::NAN;
    }
    let mx = data.iter().map(|p| p.0).sum::<f64>() / n;
    let my = data.iter().map(|p| p.1).sum::<f64>() / n;
    let num: f64 = data.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let den: f64 = data.iter().map(|p| (p.0 - mx) * (p.0 - mx)).sum();
    num / den
}

fn median(mut v: Vec<f64>) -> f64 {
    v.retain(|x| x.is_finite());
    if v.is_empty() {
        return f64::NAN;
    }
    v.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

/// Sampling-stability experiment: for each seed and each mesh of the ladder,
/// compares the subsampled (and noisy, and polygonal) clouds against the
/// full-resolution reference via the chain
/// `d_B <= d_H <= omega(mesh)` (plus the variant's additive slack).
/// Also fits the log-log rate of d_B against the mesh.
pub fn run_stability(cfg: &ExperimentConfig) -> Result<StabilityReport, ExpError> {
    cfg.validate_base()?;
    if cfg.meshes.is_empty() {
        return Err(ExpError::BadConfig("stability needs a mesh ladder".into()));
    }
    let finest = cfg.meshes.iter().cloned().fold(f64::INFINITY, f64::min);
    if finest / cfg.dt < 8.0 - 1e-9 {
        return Err(ExpError::BadConfig(format!(
            "reference mesh dt = {} must be at least 8x finer than the finest ladder mesh {finest}",
            cfg.dt
        )));
    }
    let per_seed = |seed: u64| -> Result<(Vec<StabilityRow>, SlopeFit), ExpError> {
        let params = DriftedBmParams::new([0.0, 0.0], cfg.mu, cfg.t_max, cfg.dt, seed);
        let path = simulate_bm(&params)?;
        let reference = path.cloud();
        let ref_diagram = reduce(&alpha_filtration(&reference)?)?;
        let mut rows = Vec::new();
        let mut db_by_mesh = Vec::new();
        for &mesh in &cfg.meshes {
            let stride = (mesh / cfg.dt).round() as usize;
            let part = Partition::stride(&path, stride.max(1))?;
            let omega = modulus_of_continuity(&path, part.mesh);
            let cloud = subsample(&path, &part)?;

            let push = |variant: &'static str,
                            cloud: &crate::geometry::PointCloud,
                            extra: f64,
                            rows: &mut Vec<StabilityRow>|
             -> Result<(f64, f64), ExpError> {
                let d_h = hausdorff(&reference, cloud)?;
                let diagram: PersistenceDiagram = reduce(&alpha_filtration(cloud)?)?;
                let (d_b0, _) = bottleneck(&ref_diagram, &diagram, 0);
                let (d_b1, _) = bottleneck(&ref_diagram, &diagram, 1);
                rows.push(StabilityRow {
                    seed,
                    variant,
                    mesh: part.mesh,
                    omega,
                    d_h,
                    d_b0,
                    d_b1,
                    extra,
                    chain_db_ok: d_b0 <= d_h + extra + TOL && d_b1 <= d_h + extra + TOL,
                    chain_dh_ok: d_h <= omega + extra + TOL,
                });
                Ok((d_b0, d_b1))
            };

            let (d_b0, d_b1) = push("plain", &cloud, 0.0, &mut rows)?;
            db_by_mesh.push((part.mesh, d_b0, d_b1));

            if cfg.noise_eta > 0.0 {
                let (noisy, realized) = add_noise(&cloud, cfg.noise_eta, seed ^ 0x6e6f6973);
                // Prop-style additive bound: d_H(ref, noisy) <= omega + realized.
                push("noise", &noisy, realized, &mut rows)?;
            }
            if cfg.densify_h > 0.0 {
                let dense = polygonal_densify(&path, &part, cfg.densify_h)?;
                push("polygonal", &dense, cfg.densify_h / 2.0, &mut rows)?;
            }
        }
        let fit = SlopeFit {
            seed,
            slope_q0: loglog_slope(
                &db_by_mesh.iter().map(|r| (r.0, r.1)).collect::<Vec<_>>(),
            ),
            slope_q1: loglog_slope(
                &db_by_mesh.iter().map(|r| (r.0, r.2)).collect::<Vec<_>>(),
            ),
        };
        Ok((rows, fit))
    };

    let results: Vec<Result<(Vec<StabilityRow>, SlopeFit), ExpError>> = with_threads(
        cfg.threads,
        || cfg.seeds.par_iter().map(|&seed| per_seed(seed)).collect(),
    );
    let mut rows = Vec::new();
    let mut fits = Vec::new();
    for r in results {
        let (mut seed_rows, fit) = r?;
        rows.append(&mut seed_rows);
        fits.push(fit);
    }
    let median_slope_q0 = median(fits.iter().map(|f| f.slope_q0).collect());
    let median_slope_q1 = median(fits.iter().map(|f| f.slope_q1).collect());
    Ok(StabilityReport {
        rows,
        fits,
        median_slope_q0,
        median_slope_q1,
    })
}

impl StabilityReport {
    pub fn rows_csv(&self) -> String {
        let mut out =
            String::from("seed,variant,mesh,omega,d_h,d_b0,d_b1,extra,chain_db_ok,chain_dh_ok\n");
        for r in &self.rows {
            let _ = writeln!(
                out,
                "{},{},{:.17e},{:.17e},{:.17e},{:.17e},{:.17e},{:.17e},{},{}",
                r.seed,
                r.variant,
                r.mesh,
                r.omega,
                r.d_h,
                r.d_b0,
                r.d_b1,
                r.extra,
                r.chain_db_ok as u8,
                r.chain_dh_ok as u8
            );
        }
        out
    }

    pub fn fits_csv(&self) -> String {
        let mut out = String::from("seed,slope_q0,slope_q1\n");
        for f in &self.fits {
            let _ = writeln!(out, "{},{:.6},{:.6}", f.seed, f.slope_q0, f.slope_q1);
        }
        let _ = writeln!(
            out,
            "median,{:.6},{:.6}",
            self.median_slope_q0, self.median_slope_q1
        );
        out
    }
}
