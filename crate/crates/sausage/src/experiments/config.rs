use super::ExpError;
use crate::persistence::Weight;
use serde::{Deserialize, Serialize};

fn default_eps_cut() -> f64 {
    1e-10
}

fn default_noise_eta() -> f64 {
    0.05
}

fn default_densify_h() -> f64 {
    0.05
}

fn default_radius_rungs() -> usize {
    8
}

fn default_max_cuts() -> usize {
    8
}

/// Configuration shared by the experiment subcommands; read from JSON.
/// Fields irrelevant to a given experiment may be left at their defaults.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ExperimentConfig {
    /// Drift vector.
    pub mu: [f64; 2],
    /// Largest time horizon.
    pub t_max: f64,
    /// Intermediate horizons for the LLN ladder; defaults to `[t_max]`.
    #[serde(default)]
    pub t_ladder: Vec<f64>,
    /// Simulation grid step.
    pub dt: f64,
    /// Radius window 0 < r0 < r1.
    pub r0: f64,
    pub r1: f64,
    /// Weight breakpoints (r, value); empty means the unit hat on [r0, r1].
    #[serde(default)]
    pub psi: Vec<(f64, f64)>,
    /// Ladder spacing L.
    pub level_spacing: f64,
    /// Backtrack buffer R.
    pub buffer: f64,
    /// Slab half-width a.
    pub slab_half_width: f64,
    /// Oracle pixel size.
    pub grid_h: f64,
    #[serde(default = "default_eps_cut")]
    pub eps_cut: f64,
    pub seeds: Vec<u64>,
    /// Thread budget; 0 uses the rayon default.
    #[serde(default)]
    pub threads: usize,
    /// Output directory (the CLI flag overrides it).
    #[serde(default)]
    pub out_dir: Option<String>,
    /// Subsampling meshes for the stability experiment.
    #[serde(default)]
    pub meshes: Vec<f64>,
    /// Observation-noise radius for the stability noise variant.
    #[serde(default = "default_noise_eta")]
    pub noise_eta: f64,
    /// Spacing of the polygonal densification variant.
    #[serde(default = "default_densify_h")]
    pub densify_h: f64,
    /// Checkpoints per cycle for the coarse oscillation statistic M_k;
    /// 0 disables it.
    #[serde(default)]
    pub oscillation_checkpoints: usize,
    /// Rungs of the radius ladder used by the interface audit.
    #[serde(default = "default_radius_rungs")]
    pub radius_rungs: usize,
    /// Cuts audited per seed by the interface audit.
    #[serde(default = "default_max_cuts")]
    pub max_cuts_audited: usize,
    /// Gaussian increment scale; 0 gives deterministic ramp fixtures.
    #[serde(default = "default_noise_scale")]
    pub noise_scale: f64,
}

fn default_noise_scale() -> f64 {
    1.0
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self, ExpError> {
        let cfg: ExperimentConfig =
            serde_json::from_str(text).map_err(|e| ExpError::BadConfig(e.to_string()))?;
        cfg.validate_base()?;
        Ok(cfg)
    }

    pub fn nu(&self) -> f64 {
        self.mu[0].hypot(self.mu[1])
    }

    /// The weight: configured breakpoints, or the unit hat on [r0, r1].
    pub fn weight(&self) -> Result<Weight, ExpError> {
        if self.psi.is_empty() {
            Ok(Weight::hat(self.r0, self.r1)?)
        } else {
            Ok(Weight::new(self.psi.clone())?)
        }
    }

    /// Horizons, deduplicated and sorted, capped by t_max.
    pub fn ladder(&self) -> Vec<f64> {
        let mut ts: Vec<f64> = if self.t_ladder.is_empty() {
            vec![self.t_max]
        } else {
            self.t_ladder.clone()
        };
        ts.retain(|t| *t > 0.0 && *t <= self.t_max + 1e-12);
        ts.sort_by(|a, b| a.partial_cmp(b).unwrap());
        ts.dedup();
        ts
    }

    pub fn validate_base(&self) -> Result<(), ExpError> {
        if !(self.r0 > 0.0 && self.r0 < self.r1 && self.r1.is_finite()) {
            return Err(ExpError::BadConfig("need 0 < r0 < r1".into()));
        }
        if !(self.dt > 0.0 && self.t_max >= self.dt) {
            return Err(ExpError::BadConfig("need 0 < dt <= t_max".into()));
        }
        if self.seeds.is_empty() {
            return Err(ExpError::BadConfig("seed list is empty".into()));
        }
        if !(self.grid_h > 0.0) {
            return Err(ExpError::BadConfig("grid_h must be positive".into()));
        }
        Ok(())
    }

    /// Extra requirements of the topology experiments. `a > R + 2 r1` and
    /// `a < L` are hard (they carry the slab localization and window
    /// measurability); `L > 2a` only separates consecutive slabs and is
    /// demoted to a warning so that tight configurations remain runnable.
    /// The advisory `dt <= r0^2 / 100` keeps sampling error negligible
    /// against the radius window.
    pub fn validate_topology(&self) -> Result<Vec<String>, ExpError> {
        self.validate_base()?;
        validate_topology_params(
            self.nu(),
            self.level_spacing,
            self.buffer,
            self.slab_half_width,
            self.r1,
        )?;
        let mut warnings = Vec::new();
        if self.level_spacing <= 2.0 * self.slab_half_width {
            warnings.push(format!(
                "L = {} <= 2a = {}: consecutive interface slabs may touch",
                self.level_spacing,
                2.0 * self.slab_half_width
            ));
        }
        if self.dt > self.r0 * self.r0 / 100.0 {
            warnings.push(format!(
                "dt = {} exceeds the advisory bound r0^2/100 = {}",
                self.dt,
                self.r0 * self.r0 / 100.0
            ));
        }
        Ok(warnings)
    }
}

pub fn validate_topology_params(
    nu: f64,
    level_spacing: f64,
    buffer: f64,
    slab_half_width: f64,
    r1: f64,
) -> Result<(), ExpError> {
    if nu <= 0.0 {
        return Err(ExpError::BadConfig(
            "topology experiments need nonzero drift".into(),
        ));
    }
    if slab_half_width <= buffer + 2.0 * r1 {
        return Err(ExpError::BadConfig(format!(
            "need a > R + 2 r1 (a = {slab_half_width}, R + 2 r1 = {})",
            buffer + 2.0 * r1
        )));
    }
    if slab_half_width >= level_spacing {
        return Err(ExpError::BadConfig(format!(
            "need a < L (a = {slab_half_width}, L = {level_spacing})"
        )));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn base() -> ExperimentConfig {
        ExperimentConfig {
            mu: [1.0, 0.0],
            t_max: 100.0,
            t_ladder: vec![],
            dt: 0.0025,
            r0: 0.5,
            r1: 1.5,
            psi: vec![],
            level_spacing: 8.0,
            buffer: 1.0,
            slab_half_width: 4.1,
            grid_h: 0.05,
            eps_cut: 1e-10,
            seeds: vec![1, 2],
            threads: 0,
            out_dir: None,
            meshes: vec![],
            noise_eta: 0.05,
            densify_h: 0.05,
            oscillation_checkpoints: 0,
            radius_rungs: 8,
            max_cuts_audited: 8,
            noise_scale: 1.0,
        }
    }

    #[test]
    fn topology_validation() {
        let cfg = base();
        // a = 4.1 > R + 2 r1 = 4, a < L = 8; L <= 2a only warns.
        let warnings = cfg.validate_topology().unwrap();
        assert!(warnings.iter().any(|w| w.contains("slabs")));
        let mut bad = base();
        bad.slab_half_width = 3.9;
        assert!(bad.validate_topology().is_err());
        let mut bad = base();
        bad.slab_half_width = 9.0;
        assert!(bad.validate_topology().is_err());
        let mut bad = base();
        bad.r0 = 0.0;
        assert!(bad.validate_base().is_err());
    }

    #[test]
    fn json_roundtrip_with_defaults() {
        let text = r#"{
            "mu": [1.0, 0.0], "t_max": 10.0, "dt": 0.01,
            "r0": 0.5, "r1": 1.5,
            "level_spacing": 8.0, "buffer": 1.0, "slab_half_width": 4.1,
            "grid_h": 0.05, "seeds": [7]
        }"#;
        let cfg = ExperimentConfig::from_json(text).unwrap();
        assert_eq!(cfg.eps_cut, 1e-10);
        assert_eq!(cfg.ladder(), vec![10.0]);
        let w = cfg.weight().unwrap();
        assert_eq!(w.support(), (0.5, 1.5));
    }
}
