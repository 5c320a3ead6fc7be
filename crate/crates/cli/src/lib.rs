//! Run orchestration for `resonances`: configuration and hashing, per-subcommand
//! reports, and deterministic JSON/CSV/SVG artifacts.

pub mod commands;
pub mod config;
pub mod report;
pub mod svg;

pub use commands::run;
pub use config::{Engine, RunConfig, Subcommand};
pub use report::RunReport;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{context}: {source}")]
    Core {
        context: String,
        #[source]
        source: resonance_core::Error,
    },
}

impl CliError {
    pub fn is_config(&self) -> bool {
        matches!(self, CliError::Core { source: resonance_core::Error::ConfigInvalid { .. }, .. })
    }
}

pub(crate) fn ctx<T>(r: resonance_core::Result<T>, context: impl Into<String>) -> Result<T, CliError> {
    r.map_err(|source| CliError::Core { context: context.into(), source })
}

/// Run and persist; returns the report and the directory it was written to.
pub fn execute(cfg: &RunConfig) -> Result<(RunReport, std::path::PathBuf), CliError> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.threads)
        .build()
        .map_err(|e| CliError::Core { context: "thread pool".into(), source: resonance_core::Error::ConfigInvalid { path: "threads".into(), reason: e.to_string() } })?;
    let mut report = pool.install(|| run(cfg))?;
    let dir = cfg.run_dir();
    report.persist(&dir)?;
    Ok((report, dir))
}
