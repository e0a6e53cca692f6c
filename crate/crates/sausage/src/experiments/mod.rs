//! Monte Carlo experiment orchestration: configuration, seed management,
//! parallel scheduling over seeds, and CSV/JSON emission for the headline
//! experiments behind the CLI subcommands.
//!
//! Determinism contract: outputs depend only on the configuration and seed
//! list, never on the thread budget; per-seed work is independent and
//! results are aggregated in seed order.

mod config;
mod interface;
mod phi_lln;
mod regen_stats;
mod stability;

pub use config::{validate_topology_params, ExperimentConfig};
pub use interface::{run_interface_audit, InterfaceReport, InterfaceRow};
pub use phi_lln::{
    estimate_intensity, run_phi_lln, CycleRecord, IntensityReport, LlnReport, SeedLln,
};
pub use regen_stats::{
    regen_rows_csv, run_regen_stats, run_regen_stats_grid, QuantityRow, RegenStatsConfig,
};
pub use stability::{run_stability, SlopeFit, StabilityReport, StabilityRow};

use sha2::{Digest, Sha256};
use std::path::Path;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ExpError {
    #[error("invalid configuration: {0}")]
    BadConfig(String),
    #[error(transparent)]
    Path(#[from] crate::pathsim::PathError),
    #[error(transparent)]
    Filtration(#[from] crate::filtration::FiltError),
    #[error(transparent)]
    Persistence(#[from] crate::persistence::PersistenceError),
    #[error(transparent)]
    Geometry(#[from] crate::geometry::GeomError),
    #[error(transparent)]
    Grid(#[from] crate::gridoracle::GridError),
    #[error(transparent)]
    Regen(#[from] crate::regen::RegenError),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

/// Runs `f` on a rayon pool with the requested width (0 = library default).
pub fn with_threads<T: Send>(threads: usize, f: impl FnOnce() -> T + Send) -> T {
    if threads == 0 {
        return f();
    }
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .expect("thread pool")
        .install(f)
}

/// Writes `manifest.json` next to an experiment's tables: configuration
/// echo, config hash, crate version, wall time, and thread budget.
pub fn write_manifest(
    out_dir: &Path,
    experiment: &str,
    config_json: &serde_json::Value,
    wall_seconds: f64,
    threads: usize,
) -> std::io::Result<()> {
    let mut hasher = Sha256::new();
    hasher.update(config_json.to_string().as_bytes());
    let hash = hasher
        .finalize()
        .iter()
        .map(|b| format!("{b:02x}"))
        .collect::<String>();
    let manifest = serde_json::json!({
        "experiment": experiment,
        "config": config_json,
        "config_sha256": hash,
        "crate_version": env!("CARGO_PKG_VERSION"),
        "wall_seconds": wall_seconds,
        "threads": threads,
    });
    std::fs::create_dir_all(out_dir)?;
    std::fs::write(
        out_dir.join("manifest.json"),
        serde_json::to_string_pretty(&manifest).expect("manifest serializes"),
    )
}
