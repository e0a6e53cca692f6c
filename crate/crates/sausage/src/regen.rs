//! Regeneration structure of drifted Brownian motion.
//!
//! The longitudinal coordinate of a planar Brownian motion with drift is a
//! 1-D Brownian motion with positive drift `nu`. It hits the ladder levels
//! `U_0 + nL` one after another; a hit is a *good cut* when the process never
//! backtracks more than `R` below the hit level afterwards. Good cuts
//! decompose the path into i.i.d. blocks and power every renewal-reward
//! estimate downstream.
//!
//! Closed forms for the relevant hitting-time laws sit next to the detector
//! so Monte Carlo runs can be checked against them: stopping a verification
//! scan once the process has advanced `D* = R + ln(1/eps)/(2 nu)` above the
//! cut level leaves an undetected-failure probability of at most
//! `exp(-2 nu (D* + R)) <= eps` per cut, by the ruin formula.

use crate::geometry::Point;
use crate::pathsim::PathSample;
use crate::rng::CounterRng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum RegenError {
    #[error("without drift the longitudinal walk is recurrent and the renewal structure collapses")]
    ZeroDrift,
    #[error("parameter out of domain: {0}")]
    Domain(String),
    #[error("series length mismatch or empty input")]
    BadSeries,
}

/// Parameters of the cut detector.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct RegenParams {
    /// Ladder spacing L between candidate levels.
    pub level_spacing: f64,
    /// Backtrack buffer R.
    pub buffer: f64,
    /// Slab half-width a; windows around each cut are reported at this rho.
    pub slab_half_width: f64,
    /// Truncation budget: per-cut undetected-failure probability bound.
    pub eps_cut: f64,
    /// Drift magnitude nu = |mu|.
    pub nu: f64,
}

impl RegenParams {
    pub fn validate(&self) -> Result<(), RegenError> {
        let ok = self.level_spacing > 0.0
            && self.buffer > 0.0
            && self.slab_half_width > 0.0
            && self.eps_cut > 0.0
            && self.eps_cut < 1.0
            && [
                self.level_spacing,
                self.buffer,
                self.slab_half_width,
                self.eps_cut,
                self.nu,
            ]
            .iter()
            .all(|v| v.is_finite());
        if !ok {
            return Err(RegenError::Domain(
                "regeneration parameters must be positive and finite".into(),
            ));
        }
        if self.nu <= 0.0 {
            return Err(RegenError::ZeroDrift);
        }
        Ok(())
    }

    /// Verification horizon: advance past the cut level at which a scan stops.
    pub fn d_star(&self) -> f64 {
        self.buffer + (1.0 / self.eps_cut).ln() / (2.0 * self.nu)
    }
}

// ---------------------------------------------------------------------------
// Closed forms.
// ---------------------------------------------------------------------------

/// Probability that drifted Brownian motion never backtracks more than `r_buf`:
/// `p_R = 1 - exp(-2 nu R)`.
pub fn p_good(nu: f64, r_buf: f64) -> f64 {
    1.0 - (-2.0 * nu * r_buf).exp()
}

/// Laplace transform of the upward hitting time `sigma_a^+`:
/// `E[exp(-lambda sigma_a^+)] = exp(-a (sqrt(nu^2 + 2 lambda) - nu))`.
pub fn hitting_laplace(nu: f64, a: f64, lambda: f64) -> Result<f64, RegenError> {
    if lambda < 0.0 {
        return Err(RegenError::Domain("lambda must be nonnegative".into()));
    }
    Ok((-a * ((nu * nu + 2.0 * lambda).sqrt() - nu)).exp())
}

/// Ruin probability `P(sigma_a^- < infinity) = exp(-2 nu a)`.
pub fn ruin_prob(nu: f64, a: f64) -> f64 {
    (-2.0 * nu * a).exp()
}

/// Mean regeneration length `E[tau_1] = L / (nu (1 - exp(-2 nu R)))`.
pub fn mean_tau1(nu: f64, level_spacing: f64, r_buf: f64) -> f64 {
    level_spacing / (nu * p_good(nu, r_buf))
}

/// Moment generating function of the symmetric slab exit time:
/// `E[exp(theta eta_R)] = cosh(nu R) / cosh(sqrt(nu^2 - 2 theta) R)`,
/// finite for `theta < nu^2/2 + pi^2/(8 R^2)`. Past `nu^2/2` the square root
/// turns imaginary and cosh continues as cos.
pub fn slab_mgf(nu: f64, r_buf: f64, theta: f64) -> Result<f64, RegenError> {
    let bound = nu * nu / 2.0 + std::f64::consts::PI.powi(2) / (8.0 * r_buf * r_buf);
    if theta >= bound {
        return Err(RegenError::Domain(format!(
            "theta must be below nu^2/2 + pi^2/(8R^2) = {bound}"
        )));
    }
    let disc = nu * nu - 2.0 * theta;
    let denom = if disc >= 0.0 {
        (disc.sqrt() * r_buf).cosh()
    } else {
        ((-disc).sqrt() * r_buf).cos()
    };
    Ok((nu * r_buf).cosh() / denom)
}

/// Mean slab exit time `E[eta_R] = (R / nu) tanh(nu R)`.
pub fn mean_slab_exit(nu: f64, r_buf: f64) -> f64 {
    r_buf / nu * (nu * r_buf).tanh()
}

/// Exponential moment of the upward hitting time of level L:
/// `E[exp(theta sigma_L^+)] = exp(L (nu - sqrt(nu^2 - 2 theta)))`,
/// for `theta < nu^2 / 2`.
pub fn sigma_mgf(nu: f64, level: f64, theta: f64) -> Result<f64, RegenError> {
    if theta >= nu * nu / 2.0 {
        return Err(RegenError::Domain("theta must be below nu^2/2".into()));
    }
    Ok((level * (nu - (nu * nu - 2.0 * theta).sqrt())).exp())
}

/// Geometric-sum identity for the regeneration length:
/// `E[exp(theta tau_1)] = p_R M / (1 - (1 - p_R) M)` with `M = sigma_mgf`,
/// valid while `(1 - p_R) M < 1`.
pub fn tau1_mgf(nu: f64, level_spacing: f64, r_buf: f64, theta: f64) -> Result<f64, RegenError> {
    let m = sigma_mgf(nu, level_spacing, theta)?;
    let p = p_good(nu, r_buf);
    if (1.0 - p) * m >= 1.0 {
        return Err(RegenError::Domain(
            "geometric sum diverges: (1 - p_R) M >= 1".into(),
        ));
    }
    Ok(p * m / (1.0 - (1.0 - p) * m))
}

// ---------------------------------------------------------------------------
// Detection.
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CutStatus {
    Good,
    Bad,
    /// The trajectory ended before the verification horizon was reached.
    Unresolved,
}

/// One candidate ladder hit.
#[derive(Debug, Clone, Copy)]
pub struct Candidate {
    pub index: usize,
    /// Sample value of U at the hit (the grid overshoots the exact level).
    pub level: f64,
    /// 1-based cycle this candidate belongs to.
    pub cycle: usize,
    pub status: CutStatus,
}

/// One verified regeneration cut.
#[derive(Debug, Clone, Copy)]
pub struct CutRecord {
    /// 1-based cut number k.
    pub k: usize,
    pub index: usize,
    pub time: f64,
    pub u_value: f64,
    /// Number of candidate levels tried in this cycle (geometric under the
    /// Bernoulli good-cut picture).
    pub n_candidates: usize,
    /// Backward window at rho = slab half-width: time since the last visit
    /// at or below `u_value - rho`.
    pub theta_minus: Option<f64>,
    /// Forward window at rho = slab half-width: time until U first reaches
    /// `u_value + rho`.
    pub theta_plus: Option<f64>,
}

/// Full output of the detector.
#[derive(Debug, Clone)]
pub struct RegenTrace {
    pub params: RegenParams,
    pub cuts: Vec<CutRecord>,
    pub candidates: Vec<Candidate>,
    /// Candidates that could not be resolved before the data ended.
    pub unresolved: usize,
    /// Verification advance used by the scan.
    pub d_star: f64,
    /// Largest one-step increment of U (grid crossing-bias scale).
    pub max_increment: f64,
    /// Final time of the scanned series.
    pub horizon_time: f64,
}

impl RegenTrace {
    /// Renewal count N(t): cuts with time <= t.
    pub fn n_at(&self, t: f64) -> usize {
        self.cuts.iter().take_while(|c| c.time <= t).count()
    }

    /// Cycle lengths Delta tau_k, with tau_0 = 0.
    pub fn cycle_lengths(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.cuts.len());
        let mut prev = 0.0;
        for c in &self.cuts {
            out.push(c.time - prev);
            prev = c.time;
        }
        out
    }

    /// Sample-index ranges of the blocks: block k spans [tau_{k-1}, tau_k].
    pub fn block_ranges(&self) -> Vec<(usize, usize)> {
        let mut out = Vec::with_capacity(self.cuts.len());
        let mut prev = 0usize;
        for c in &self.cuts {
            out.push((prev, c.index));
            prev = c.index;
        }
        out
    }

    /// Fraction of good cuts among resolved candidates.
    pub fn good_fraction(&self) -> Option<f64> {
        let resolved = self
            .candidates
            .iter()
            .filter(|c| c.status != CutStatus::Unresolved)
            .count();
        if resolved == 0 {
            return None;
        }
        let good = self
            .candidates
            .iter()
            .filter(|c| c.status == CutStatus::Good)
            .count();
        Some(good as f64 / resolved as f64)
    }
}

/// Detects ladder hits, good cuts, regeneration times, and windows on a
/// sampled longitudinal series. Candidate levels restart from the sample
/// value at each cut; crossings use the first-index-at-or-above convention
/// (bias O(sqrt(dt)), reported via `max_increment`, not corrected).
pub fn detect_regenerations(
    u: &[f64],
    times: &[f64],
    params: &RegenParams,
) -> Result<RegenTrace, RegenError> {
    params.validate()?;
    if u.is_empty() || u.len() != times.len() {
        return Err(RegenError::BadSeries);
    }
    let n = u.len();
    let d_star = params.d_star();
    let spacing = params.level_spacing;
    let mut max_increment = 0.0f64;
    for w in u.windows(2) {
        max_increment = max_increment.max((w[1] - w[0]).abs());
    }

    let mut cuts: Vec<CutRecord> = Vec::new();
    let mut candidates: Vec<Candidate> = Vec::new();
    let mut unresolved = 0usize;
    let mut base_u = u[0];
    let mut cycle = 1usize;
    let mut n_in_cycle = 0usize;
    let mut ladder_step = 1usize;
    let mut search_from = 1usize;

    loop {
        // Next candidate: first index with u >= base + ladder_step * L.
        let target = base_u + ladder_step as f64 * spacing;
        let mut hit = None;
        for (off, &val) in u[search_from..].iter().enumerate() {
            if val >= target {
                hit = Some(search_from + off);
                break;
            }
        }
        let Some(i) = hit else {
            break;
        };
        n_in_cycle += 1;
        let level = u[i];
        // Verify the good-cut event over the truncated horizon.
        let mut status = CutStatus::Unresolved;
        for &val in &u[i..] {
            if val - level < -params.buffer {
                status = CutStatus::Bad;
                break;
            }
            if val - level >= d_star {
                status = CutStatus::Good;
                break;
            }
        }
        candidates.push(Candidate {
            index: i,
            level,
            cycle,
            status,
        });
        match status {
            CutStatus::Good => {
                let theta_plus = forward_window(u, times, i, params.slab_half_width);
                let theta_minus = backward_window(u, times, i, params.slab_half_width);
                cuts.push(CutRecord {
                    k: cuts.len() + 1,
                    index: i,
                    time: times[i],
                    u_value: level,
                    n_candidates: n_in_cycle,
                    theta_minus,
                    theta_plus,
                });
                base_u = level;
                cycle += 1;
                n_in_cycle = 0;
                ladder_step = 1;
                search_from = i + 1;
            }
            CutStatus::Bad => {
                ladder_step += 1;
                search_from = i; // the next level may be hit at the same index
            }
            CutStatus::Unresolved => {
                unresolved += 1;
                ladder_step += 1;
                search_from = i;
            }
        }
        if search_from >= n {
            break;
        }
    }

    Ok(RegenTrace {
        params: *params,
        cuts,
        candidates,
        unresolved,
        d_star,
        max_increment,
        horizon_time: *times.last().unwrap(),
    })
}

fn forward_window(u: &[f64], times: &[f64], idx: usize, rho: f64) -> Option<f64> {
    let level = u[idx];
    u[idx..]
        .iter()
        .position(|&v| v - level >= rho)
        .map(|off| times[idx + off] - times[idx])
}

fn backward_window(u: &[f64], times: &[f64], idx: usize, rho: f64) -> Option<f64> {
    let level = u[idx];
    u[..=idx]
        .iter()
        .rposition(|&v| v <= level - rho)
        .map(|j| times[idx] - times[j])
}

/// Forward and backward windows `(Theta^-, Theta^+)` at an arbitrary rho for
/// every cut in the trace.
pub fn window_stats(
    u: &[f64],
    times: &[f64],
    trace: &RegenTrace,
    rho: f64,
) -> Vec<(Option<f64>, Option<f64>)> {
    trace
        .cuts
        .iter()
        .map(|c| {
            (
                backward_window(u, times, c.index, rho),
                forward_window(u, times, c.index, rho),
            )
        })
        .collect()
}

/// A recentered regeneration block: the path over `[tau_{k-1}, tau_k]` with
/// `X_{tau_{k-1}}` subtracted and time restarted at 0.
#[derive(Debug, Clone)]
pub struct Block {
    pub times: Vec<f64>,
    pub points: Vec<Point>,
}

/// Splits a planar path at the trace's cut indices.
pub fn extract_blocks(path: &PathSample, trace: &RegenTrace) -> Vec<Block> {
    trace
        .block_ranges()
        .iter()
        .map(|&(lo, hi)| {
            let t0 = path.times[lo];
            let p0 = path.points[lo];
            Block {
                times: path.times[lo..=hi].iter().map(|t| t - t0).collect(),
                points: path.points[lo..=hi].iter().map(|&p| p - p0).collect(),
            }
        })
        .collect()
}

/// Simulates the longitudinal walk `U_t = nu t + B_t` directly (1-D), the
/// fast path for the closed-form Monte Carlo checks.
pub fn simulate_longitudinal(nu: f64, t_max: f64, dt: f64, seed: u64) -> (Vec<f64>, Vec<f64>) {
    let rng = CounterRng::new(seed, 2);
    let n = (t_max / dt).ceil() as usize;
    let mut times = Vec::with_capacity(n + 1);
    let mut u = Vec::with_capacity(n + 1);
    times.push(0.0);
    u.push(0.0);
    let sqrt_dt = dt.sqrt();
    let mut cur = 0.0;
    for i in 0..n {
        let (g, _) = rng.normal_pair(i as u64);
        cur += nu * dt + sqrt_dt * g;
        times.push((i + 1) as f64 * dt);
        u.push(cur);
    }
    (times, u)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn params(l: f64, r: f64) -> RegenParams {
        RegenParams {
            level_spacing: l,
            buffer: r,
            slab_half_width: 0.8 * l.min(4.0),
            eps_cut: 1e-10,
            nu: 1.0,
        }
    }

    #[test]
    fn closed_form_values() {
        assert_eq!(p_good(1.0, 0.0), 0.0);
        assert!((p_good(0.5, 1.0) - 0.6321206).abs() < 1e-7);
        assert!((p_good(1.0, 100.0) - 1.0).abs() < 1e-15);
        assert_eq!(hitting_laplace(0.7, 2.0, 0.0).unwrap(), 1.0);
        assert!((ruin_prob(0.5, 1.0) - 0.3678794).abs() < 1e-7);
        assert!((mean_tau1(1.0, 1.0, 1.0) - 1.1565176).abs() < 1e-7);
        assert_eq!(slab_mgf(1.0, 1.0, 0.0).unwrap(), 1.0);
        assert_eq!(sigma_mgf(1.0, 1.0, 0.0).unwrap(), 1.0);
    }

    #[test]
    fn slab_mgf_derivative_matches_mean() {
        for (nu, r) in [(1.0, 1.0), (0.5, 2.0), (2.0, 0.7)] {
            let h = 1e-6;
            let deriv =
                (slab_mgf(nu, r, h).unwrap() - slab_mgf(nu, r, -h).unwrap()) / (2.0 * h);
            assert!(
                (deriv - mean_slab_exit(nu, r)).abs() < 1e-6,
                "nu={nu} r={r}: {deriv} vs {}",
                mean_slab_exit(nu, r)
            );
        }
    }

    #[test]
    fn mgf_domains() {
        assert!(sigma_mgf(1.0, 1.0, 0.5).is_err());
        assert!(sigma_mgf(1.0, 1.0, 0.499).is_ok());
        let bound = 0.5 + std::f64::consts::PI.powi(2) / 8.0;
        assert!(slab_mgf(1.0, 1.0, bound).is_err());
        assert!(slab_mgf(1.0, 1.0, bound - 1e-3).is_ok());
        // Continuity across the cosh/cos branch switch at nu^2/2.
        let below = slab_mgf(1.0, 1.0, 0.5 - 1e-9).unwrap();
        let above = slab_mgf(1.0, 1.0, 0.5 + 1e-9).unwrap();
        assert!((below - above).abs() < 1e-6);
        assert!(hitting_laplace(1.0, 1.0, -0.1).is_err());
    }

    #[test]
    fn detector_rejects_zero_drift() {
        let mut p = params(1.0, 1.0);
        p.nu = 0.0;
        assert!(matches!(
            detect_regenerations(&[0.0, 1.0], &[0.0, 1.0], &p),
            Err(RegenError::ZeroDrift)
        ));
    }

    /// Deterministic ramp U_t = t: hits at integer times, every cut good,
    /// tau_k = k while the verification horizon fits.
    #[test]
    fn ramp_detection() {
        let p = params(1.0, 0.5);
        let dt = 1e-3;
        let n = 30_000usize;
        let times: Vec<f64> = (0..=n).map(|i| i as f64 * dt).collect();
        let u = times.clone();
        let trace = detect_regenerations(&u, &times, &p).unwrap();
        assert!(trace.candidates.iter().all(|c| c.status != CutStatus::Bad));
        let d_star = p.d_star();
        let expect_cuts = ((30.0 - d_star).floor()) as usize;
        assert!(trace.cuts.len() >= expect_cuts);
        for (k, c) in trace.cuts.iter().enumerate() {
            assert!((c.time - (k + 1) as f64).abs() < 2.0 * dt, "cut {k} at {}", c.time);
            assert_eq!(c.n_candidates, 1);
            // Ramp windows: Theta^{+-}(rho) = rho / nu exactly.
            let rho = p.slab_half_width;
            if let Some(tp) = c.theta_plus {
                assert!((tp - rho).abs() < 2.0 * dt);
            }
            if let Some(tm) = c.theta_minus {
                assert!((tm - rho).abs() < 2.0 * dt);
            }
        }
        assert_eq!(trace.n_at(10.0), trace.cuts.iter().filter(|c| c.time <= 10.0).count());
    }

    /// Monte Carlo agreement with the closed forms: renewal rate, mean cycle
    /// length, and good-cut fraction, each within 3 standard errors.
    #[test]
    fn detector_matches_closed_forms() {
        let p = params(1.0, 1.0);
        let t_max = 400.0;
        let dt = 1e-3;
        let margin = p.d_star() / p.nu + 5.0;
        let seeds = 8u64;
        let mut rates = Vec::new();
        let mut cycles_all = Vec::new();
        let mut good = 0usize;
        let mut resolved = 0usize;
        for seed in 0..seeds {
            let (times, u) = simulate_longitudinal(p.nu, t_max + margin, dt, 9000 + seed);
            let trace = detect_regenerations(&u, &times, &p).unwrap();
            rates.push(trace.n_at(t_max) as f64 / t_max);
            let lens = trace.cycle_lengths();
            cycles_all.extend(lens);
            good += trace
                .candidates
                .iter()
                .filter(|c| c.status == CutStatus::Good)
                .count();
            resolved += trace
                .candidates
                .iter()
                .filter(|c| c.status != CutStatus::Unresolved)
                .count();
        }
        let target_rate = p.nu * p_good(p.nu, p.buffer) / p.level_spacing;
        let mean_rate: f64 = rates.iter().sum::<f64>() / rates.len() as f64;
        let sd_rate: f64 = (rates
            .iter()
            .map(|r| (r - mean_rate) * (r - mean_rate))
            .sum::<f64>()
            / (rates.len() as f64 - 1.0))
            .sqrt();
        let se_rate = sd_rate / (rates.len() as f64).sqrt();
        assert!(
            (mean_rate - target_rate).abs() < 3.0 * se_rate + 0.01,
            "rate {mean_rate} vs {target_rate} (se {se_rate})"
        );

        let mean_cycle: f64 = cycles_all.iter().sum::<f64>() / cycles_all.len() as f64;
        let sd_cycle: f64 = (cycles_all
            .iter()
            .map(|c| (c - mean_cycle) * (c - mean_cycle))
            .sum::<f64>()
            / (cycles_all.len() as f64 - 1.0))
            .sqrt();
        let se_cycle = sd_cycle / (cycles_all.len() as f64).sqrt();
        let target_cycle = mean_tau1(p.nu, p.level_spacing, p.buffer);
        assert!(
            (mean_cycle - target_cycle).abs() < 3.0 * se_cycle + 0.02,
            "cycle {mean_cycle} vs {target_cycle} (se {se_cycle})"
        );

        let p_hat = good as f64 / resolved as f64;
        let target_p = p_good(p.nu, p.buffer);
        let se_p = (target_p * (1.0 - target_p) / resolved as f64).sqrt();
        assert!(
            (p_hat - target_p).abs() < 3.0 * se_p + 0.01,
            "p_hat {p_hat} vs {target_p} (se {se_p})"
        );
    }

    /// Per-candidate goodness is marginally Bernoulli(p_R) (each ladder hit
    /// is a stopping time, so the unconditional success probability is
    /// exact), and the mean number of candidates per cycle is 1/p_R (ratio
    /// of the exact ladder-hit and cut rates). The full per-cycle count is
    /// NOT geometric: failures share future dips, so they cluster; only the
    /// marginal and the mean are clean.
    #[test]
    fn candidate_statistics() {
        let p = params(1.0, 1.0);
        let dt = 1e-3;
        let mut good = 0usize;
        let mut resolved = 0usize;
        let mut n_per_cycle = Vec::new();
        for seed in 0..6u64 {
            let (times, u) = simulate_longitudinal(p.nu, 300.0, dt, 500 + seed);
            let trace = detect_regenerations(&u, &times, &p).unwrap();
            good += trace
                .candidates
                .iter()
                .filter(|c| c.status == CutStatus::Good)
                .count();
            resolved += trace
                .candidates
                .iter()
                .filter(|c| c.status != CutStatus::Unresolved)
                .count();
            // Skip the first cycle: it starts from a deterministic time.
            n_per_cycle.extend(trace.cuts.iter().skip(1).map(|c| c.n_candidates as f64));
        }
        let pr = p_good(p.nu, p.buffer);
        let p_hat = good as f64 / resolved as f64;
        let se_p = (pr * (1.0 - pr) / resolved as f64).sqrt();
        assert!(
            (p_hat - pr).abs() < 3.0 * se_p + 0.01,
            "p_hat {p_hat} vs {pr}"
        );
        let n = n_per_cycle.len() as f64;
        let mean_n: f64 = n_per_cycle.iter().sum::<f64>() / n;
        let var_n: f64 = n_per_cycle
            .iter()
            .map(|v| (v - mean_n) * (v - mean_n))
            .sum::<f64>()
            / (n - 1.0);
        let se_n = (var_n / n).sqrt();
        assert!(
            (mean_n - 1.0 / pr).abs() < 3.0 * se_n + 0.01,
            "mean candidates {mean_n} vs {}",
            1.0 / pr
        );
    }

    /// Two-sample Kolmogorov-Smirnov between even- and odd-indexed cycle
    /// lengths: must not reject i.i.d. at the 1% level.
    #[test]
    fn cycle_lengths_iid_sanity() {
        let p = params(1.0, 1.0);
        let (times, u) = simulate_longitudinal(p.nu, 1500.0, 1e-3, 83);
        let trace = detect_regenerations(&u, &times, &p).unwrap();
        let lens = trace.cycle_lengths();
        // Skip the first cycle, whose law differs from the stationary ones.
        let even: Vec<f64> = lens.iter().skip(1).step_by(2).copied().collect();
        let odd: Vec<f64> = lens.iter().skip(2).step_by(2).copied().collect();
        let d = ks_statistic(&even, &odd);
        let ne = (even.len() * odd.len()) as f64 / (even.len() + odd.len()) as f64;
        let lambda = (ne.sqrt() + 0.12 + 0.11 / ne.sqrt()) * d;
        let p_value = ks_survival(lambda);
        assert!(p_value > 0.01, "KS D={d} p={p_value}");
    }

    fn ks_statistic(a: &[f64], b: &[f64]) -> f64 {
        let mut a = a.to_vec();
        let mut b = b.to_vec();
        a.sort_by(|x, y| x.partial_cmp(y).unwrap());
        b.sort_by(|x, y| x.partial_cmp(y).unwrap());
        let (mut i, mut j) = (0usize, 0usize);
        let mut d = 0.0f64;
        while i < a.len() && j < b.len() {
            if a[i] <= b[j] {
                i += 1;
            } else {
                j += 1;
            }
            let fa = i as f64 / a.len() as f64;
            let fb = j as f64 / b.len() as f64;
            d = d.max((fa - fb).abs());
        }
        d
    }

    fn ks_survival(lambda: f64) -> f64 {
        let mut s = 0.0;
        for k in 1..100 {
            let term = (-2.0 * (k as f64) * (k as f64) * lambda * lambda).exp();
            s += if k % 2 == 1 { term } else { -term };
        }
        (2.0 * s).clamp(0.0, 1.0)
    }

    /// Window means at cuts are dominated by the plain upward hitting time:
    /// conditioning on the good-cut event can only speed up the climb, so
    /// mean Theta^{+-}(rho) <= rho/nu. The unconditioned hitting time itself
    /// has mean exactly rho/nu, checked on fresh paths.
    #[test]
    fn window_means() {
        let p = params(4.0, 1.0);
        let rho = 2.0;
        let target = rho / p.nu;
        let mut plus = Vec::new();
        let mut minus = Vec::new();
        for seed in 0..6u64 {
            let (times, u) = simulate_longitudinal(p.nu, 400.0, 1e-3, 7100 + seed);
            let trace = detect_regenerations(&u, &times, &p).unwrap();
            for (tm, tp) in window_stats(&u, &times, &trace, rho) {
                if let Some(v) = tp {
                    plus.push(v);
                }
                if let Some(v) = tm {
                    minus.push(v);
                }
            }
        }
        let stats = |v: &[f64]| {
            let n = v.len() as f64;
            let m: f64 = v.iter().sum::<f64>() / n;
            let var: f64 = v.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (n - 1.0);
            (m, (var / n).sqrt())
        };
        let (mean_plus, se_plus) = stats(&plus);
        assert!(
            mean_plus <= target + 3.0 * se_plus,
            "theta+ mean {mean_plus} should be <= {target}"
        );
        let (mean_minus, se_minus) = stats(&minus);
        assert!(
            mean_minus <= target + 3.0 * se_minus,
            "theta- mean {mean_minus} should be <= {target}"
        );
        // Fresh-path hitting times: mean sigma_rho^+ = rho/nu within 3 SE.
        let mut sigma = Vec::new();
        for seed in 0..4000u64 {
            let (times, u) = simulate_longitudinal(p.nu, 20.0, 1e-3, 60_000 + seed);
            if let Some(i) = u.iter().position(|&v| v >= rho) {
                sigma.push(times[i]);
            }
        }
        let (mean_sigma, se_sigma) = stats(&sigma);
        assert!(
            (mean_sigma - target).abs() < 3.0 * se_sigma + 0.02,
            "sigma mean {mean_sigma} vs {target} (se {se_sigma})"
        );
    }

    /// The upward-hitting-time MGF is exact on fresh paths; the tau_1 MGF is
    /// its geometric-sum composition and must satisfy the algebraic identity
    /// and the divergence condition.
    #[test]
    fn sigma_mgf_monte_carlo_and_tau1_identity() {
        let nu = 1.0;
        let level = 1.0;
        let theta = 0.3;
        let closed = sigma_mgf(nu, level, theta).unwrap();
        let mut samples = Vec::new();
        for seed in 0..4000u64 {
            let (times, u) = simulate_longitudinal(nu, 30.0, 1e-3, 31_000 + seed);
            if let Some(i) = u.iter().position(|&v| v >= level) {
                samples.push((theta * times[i]).exp());
            }
        }
        let n = samples.len() as f64;
        let mean: f64 = samples.iter().sum::<f64>() / n;
        let var: f64 = samples.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0);
        let se = (var / n).sqrt();
        assert!(
            (mean - closed).abs() < 3.0 * se + 0.02,
            "sigma MGF {mean} vs {closed} (se {se})"
        );
        // Geometric-sum identity and its domain.
        let m = sigma_mgf(nu, level, theta).unwrap();
        let pr = p_good(nu, 1.0);
        let direct = tau1_mgf(nu, level, 1.0, theta).unwrap();
        assert!((direct - pr * m / (1.0 - (1.0 - pr) * m)).abs() < 1e-12);
        // Small buffer makes (1 - p_R) M >= 1: the sum diverges.
        assert!(tau1_mgf(nu, level, 0.05, 0.45).is_err());
    }

    /// Blocks start at the origin and advance the drift coordinate by an
    /// integer multiple of L up to the grid increment.
    #[test]
    fn block_structure() {
        use crate::pathsim::{project_longitudinal, simulate_bm, DriftedBmParams};
        let bm = DriftedBmParams::new([0.0, 0.0], [1.0, 0.0], 120.0, 1e-3, 4242);
        let path = simulate_bm(&bm).unwrap();
        let u = project_longitudinal(&path, bm.mu).unwrap();
        let p = params(1.0, 1.0);
        let trace = detect_regenerations(&u, &path.times, &p).unwrap();
        assert!(trace.cuts.len() > 10);
        let blocks = extract_blocks(&path, &trace);
        for (b, range) in blocks.iter().zip(trace.block_ranges()) {
            assert_eq!(b.points[0], Point::new(0.0, 0.0));
            assert_eq!(b.times[0], 0.0);
            assert_eq!(b.points.len(), range.1 - range.0 + 1);
            let disp = b.points.last().unwrap().x;
            let multiple = (disp / p.level_spacing).round() * p.level_spacing;
            assert!(
                (disp - multiple).abs() <= 2.0 * trace.max_increment + 1e-9,
                "displacement {disp} not near a multiple of L"
            );
            assert!(disp >= p.level_spacing - 2.0 * trace.max_increment);
        }
        // Post-cut guarantee over the verified horizon.
        for c in &trace.cuts {
            let horizon_end = u[c.index..]
                .iter()
                .position(|&v| v - c.u_value >= trace.d_star)
                .map(|off| c.index + off)
                .unwrap_or(u.len() - 1);
            let min_after = u[c.index..=horizon_end]
                .iter()
                .fold(f64::INFINITY, |m, &v| m.min(v));
            assert!(min_after - c.u_value >= -p.buffer - 2.0 * trace.max_increment);
        }
    }
}
