use super::{with_threads, ExpError};
use crate::regen::{
    detect_regenerations, mean_tau1, p_good, ruin_prob, simulate_longitudinal, CutStatus,
    RegenParams,
};
use rayon::prelude::*;
use std::fmt::Write as _;

/// Parameters of one grid point of the closed-form-versus-Monte-Carlo table.
#[derive(Debug, Clone, Copy)]
pub struct RegenStatsConfig {
    pub nu: f64,
    pub level_spacing: f64,
    pub buffer: f64,
    /// Level used for the ruin probability and the hitting-time rows.
    pub slab_half_width: f64,
    pub eps_cut: f64,
    pub dt: f64,
    /// Paths for the per-path quantities (hitting time, ruin, cycles).
    pub n_paths: usize,
    /// Horizon per path; a few mean cycle lengths plus the verification
    /// margin is enough.
    pub t_max: f64,
    /// Seeds and horizon of the dedicated renewal-rate rows.
    pub rate_seeds: u64,
    pub rate_t: f64,
    pub seed_base: u64,
}

/// One row of the report: closed form against Monte Carlo.
#[derive(Debug, Clone)]
pub struct QuantityRow {
    pub name: String,
    pub closed_form: f64,
    pub estimate: f64,
    pub se: f64,
    pub z: f64,
    pub n: usize,
}

impl QuantityRow {
    fn new(name: &str, closed_form: f64, estimate: f64, se: f64, n: usize) -> Self {
        QuantityRow {
            name: name.to_string(),
            closed_form,
            estimate,
            se,
            z: (estimate - closed_form) / se,
            n,
        }
    }
}

fn mean_se(v: &[f64]) -> (f64, f64, usize) {
    let n = v.len();
    let nf = n as f64;
    let m = v.iter().sum::<f64>() / nf;
    let var = v.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (nf - 1.0);
    (m, (var / nf).sqrt(), n)
}

/// Closed-form oracle battery at one parameter point. Quantities measured on
/// fresh paths (hitting time, ruin) are exact laws; the cycle-length mean is
/// taken over cycles after the first, whose time averages converge to
/// `L/(nu p_R)`; the forward-window row at cuts is reported with its z-score
/// even though conditioning on the good-cut event pushes it below `a/nu`.
pub fn run_regen_stats(cfg: &RegenStatsConfig) -> Result<Vec<QuantityRow>, ExpError> {
    let params = RegenParams {
        level_spacing: cfg.level_spacing,
        buffer: cfg.buffer,
        slab_half_width: cfg.slab_half_width,
        eps_cut: cfg.eps_cut,
        nu: cfg.nu,
    };
    params.validate()?;
    let a = cfg.slab_half_width;
    let ruin_horizon = a + (1.0 / cfg.eps_cut).ln() / (2.0 * cfg.nu);

    struct PerPath {
        sigma_a: Option<f64>,
        ruined: Option<bool>,
        cycles_tail: Vec<f64>,
        theta_plus: Vec<f64>,
        good: usize,
        resolved: usize,
    }

    let per_path = |seed: u64| -> PerPath {
        let (times, u) = simulate_longitudinal(cfg.nu, cfg.t_max, cfg.dt, seed);
        // First hit of +a.
        let sigma_a = u
            .iter()
            .position(|&v| v >= a)
            .map(|i| times[i]);
        // Ruin: dip below -a before climbing past the truncation horizon.
        let mut ruined = None;
        for &v in &u {
            if v <= -a {
                ruined = Some(true);
                break;
            }
            if v >= ruin_horizon {
                ruined = Some(false);
                break;
            }
        }
        let trace = detect_regenerations(&u, &times, &params).expect("validated params");
        let cycles_tail: Vec<f64> = trace.cycle_lengths().into_iter().skip(1).collect();
        let theta_plus = trace.cuts.iter().filter_map(|c| c.theta_plus).collect();
        let good = trace
            .candidates
            .iter()
            .filter(|c| c.status == CutStatus::Good)
            .count();
        let resolved = trace
            .candidates
            .iter()
            .filter(|c| c.status != CutStatus::Unresolved)
            .count();
        PerPath {
            sigma_a,
            ruined,
            cycles_tail,
            theta_plus,
            good,
            resolved,
        }
    };

    let paths: Vec<PerPath> = (0..cfg.n_paths as u64)
        .into_par_iter()
        .map(|i| per_path(cfg.seed_base + i))
        .collect();

    let sigma: Vec<f64> = paths.iter().filter_map(|p| p.sigma_a).collect();
    let cycles: Vec<f64> = paths.iter().flat_map(|p| p.cycles_tail.clone()).collect();
    let thetas: Vec<f64> = paths.iter().flat_map(|p| p.theta_plus.clone()).collect();
    let good: usize = paths.iter().map(|p| p.good).sum();
    let resolved: usize = paths.iter().map(|p| p.resolved).sum();
    let ruin_results: Vec<bool> = paths.iter().filter_map(|p| p.ruined).collect();

    let mut rows = Vec::new();

    let p_hat = good as f64 / resolved as f64;
    let pr = p_good(cfg.nu, cfg.buffer);
    let se_p = (p_hat * (1.0 - p_hat) / resolved as f64).sqrt().max(1e-300);
    rows.push(QuantityRow::new("p_good", pr, p_hat, se_p, resolved));

    let ruin_hat = ruin_results.iter().filter(|&&r| r).count() as f64 / ruin_results.len() as f64;
    let se_ruin = (ruin_hat * (1.0 - ruin_hat) / ruin_results.len() as f64)
        .sqrt()
        .max(1e-300);
    rows.push(QuantityRow::new(
        "ruin_prob",
        ruin_prob(cfg.nu, a),
        ruin_hat,
        se_ruin,
        ruin_results.len(),
    ));

    let (m_sigma, se_sigma, n_sigma) = mean_se(&sigma);
    rows.push(QuantityRow::new(
        "mean_sigma_a_plus",
        a / cfg.nu,
        m_sigma,
        se_sigma,
        n_sigma,
    ));

    let (m_cycle, se_cycle, n_cycle) = mean_se(&cycles);
    rows.push(QuantityRow::new(
        "mean_delta_tau",
        mean_tau1(cfg.nu, cfg.level_spacing, cfg.buffer),
        m_cycle,
        se_cycle,
        n_cycle,
    ));

    let (m_theta, se_theta, n_theta) = mean_se(&thetas);
    rows.push(QuantityRow::new(
        "mean_theta_plus_at_cuts",
        a / cfg.nu,
        m_theta,
        se_theta,
        n_theta,
    ));

    // Renewal rate N(T)/T over dedicated long paths.
    let margin = params.d_star() / cfg.nu + 10.0;
    let rates: Vec<f64> = (0..cfg.rate_seeds)
        .into_par_iter()
        .map(|i| {
            let (times, u) =
                simulate_longitudinal(cfg.nu, cfg.rate_t + margin, cfg.dt, cfg.seed_base ^ (0xabc0 + i));
            let trace = detect_regenerations(&u, &times, &params).expect("validated params");
            trace.n_at(cfg.rate_t) as f64 / cfg.rate_t
        })
        .collect();
    let (m_rate, se_rate, n_rate) = mean_se(&rates);
    rows.push(QuantityRow::new(
        "renewal_rate",
        cfg.nu * pr / cfg.level_spacing,
        m_rate,
        se_rate,
        n_rate,
    ));

    Ok(rows)
}

/// Runs the battery at several parameter points, in the configured pool.
pub fn run_regen_stats_grid(
    grid: &[RegenStatsConfig],
    threads: usize,
) -> Result<Vec<(usize, Vec<QuantityRow>)>, ExpError> {
    with_threads(threads, || {
        grid.iter()
            .enumerate()
            .map(|(i, cfg)| run_regen_stats(cfg).map(|rows| (i, rows)))
            .collect()
    })
}

pub fn regen_rows_csv(tagged: &[(usize, Vec<QuantityRow>)], grid: &[RegenStatsConfig]) -> String {
    let mut out = String::from(
        "grid_point,nu,level_spacing,buffer,slab_half_width,quantity,closed_form,estimate,se,z,n\n",
    );
    for (i, rows) in tagged {
        let g = &grid[*i];
        for r in rows {
            let _ = writeln!(
                out,
                "{},{},{},{},{},{},{:.10e},{:.10e},{:.3e},{:.3},{}",
                i,
                g.nu,
                g.level_spacing,
                g.buffer,
                g.slab_half_width,
                r.name,
                r.closed_form,
                r.estimate,
                r.se,
                r.z,
                r.n
            );
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn small_battery_agrees() {
        let cfg = RegenStatsConfig {
            nu: 1.0,
            level_spacing: 1.0,
            buffer: 1.0,
            slab_half_width: 1.0,
            eps_cut: 1e-10,
            dt: 1e-3,
            n_paths: 800,
            t_max: 25.0,
            rate_seeds: 4,
            rate_t: 150.0,
            seed_base: 991,
        };
        let rows = run_regen_stats(&cfg).unwrap();
        for r in &rows {
            // The conditioned window row is expected to sit far below its
            // reference value; everything else must agree within 3 SE plus
            // a small grid-bias allowance.
            if r.name == "mean_theta_plus_at_cuts" {
                assert!(r.estimate <= r.closed_form + 3.0 * r.se, "{r:?}");
            } else {
                let tol = 3.0 * r.se + 0.035 * r.closed_form.abs().max(0.02);
                assert!(
                    (r.estimate - r.closed_form).abs() < tol,
                    "row {} off: {r:?}",
                    r.name
                );
            }
        }
    }
}
