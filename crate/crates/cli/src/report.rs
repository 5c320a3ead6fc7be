use std::collections::BTreeMap;
use std::path::Path;

use resonance_core::{BandPrediction, ResonanceSet};
use serde::{Deserialize, Serialize};

use crate::config::RunConfig;
use crate::CliError;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Verdict {
    pub name: String,
    pub pass: bool,
    pub detail: String,
}

impl Verdict {
    pub fn new(name: impl Into<String>, pass: bool, detail: impl Into<String>) -> Self {
        Verdict { name: name.into(), pass, detail: detail.into() }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpectrumEntry {
    #[serde(rename = "N")]
    pub n: usize,
    pub engine: String,
    pub predictions: Vec<BandPrediction>,
    pub resonances: ResonanceSet,
}

/// A CSV table carried inside the report so artifacts can be re-rendered.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Table {
    pub columns: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new(columns: &[&str]) -> Self {
        Table { columns: columns.iter().map(|c| c.to_string()).collect(), rows: Vec::new() }
    }

    pub fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.columns.len());
        self.rows.push(row);
    }

    pub fn to_csv(&self) -> String {
        let mut s = self.columns.join(",");
        s.push('\n');
        for r in &self.rows {
            s.push_str(&r.join(","));
            s.push('\n');
        }
        s
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub config_hash: String,
    pub config: RunConfig,
    pub spectra: Vec<SpectrumEntry>,
    /// Named tables, written as `<name>.csv`.
    pub tables: BTreeMap<String, Table>,
    /// Free-form per-subcommand data (determinant coefficients, fitted rates, ...).
    pub data: BTreeMap<String, serde_json::Value>,
    pub verdicts: Vec<Verdict>,
    pub artifacts: Vec<String>,
}

impl RunReport {
    pub fn new(config: &RunConfig) -> Self {
        RunReport {
            config_hash: config.hash(),
            config: config.clone(),
            spectra: Vec::new(),
            tables: BTreeMap::new(),
            data: BTreeMap::new(),
            verdicts: Vec::new(),
            artifacts: Vec::new(),
        }
    }

    pub fn passed(&self) -> bool {
        self.verdicts.iter().all(|v| v.pass)
    }

    pub fn from_json(s: &str) -> Result<Self, CliError> {
        serde_json::from_str(s).map_err(|e| CliError::Core { context: "report".into(), source: e.into() })
    }

    fn stamp_csv(&self, body: &str) -> String {
        format!("# config_hash={}\n{body}", self.config_hash)
    }

    /// Every file the report renders to, by relative path. Pure function of the report.
    pub fn render(&self) -> Vec<(String, String)> {
        let mut files = Vec::new();
        for e in &self.spectra {
            let stem = format!("resonances_{}_N{}", e.engine, e.n);
            files.push((format!("{stem}.csv"), self.stamp_csv(&e.resonances.to_csv())));
        }
        let mut ns: Vec<usize> = self.spectra.iter().map(|e| e.n).collect();
        ns.dedup();
        for n in ns {
            files.push((format!("spectrum_N{n}.svg"), crate::svg::plot_spectrum(self, n)));
        }
        for (name, t) in &self.tables {
            files.push((format!("{name}.csv"), self.stamp_csv(&t.to_csv())));
        }
        files
    }

    /// Render artifacts and write them with `report.json` into `dir`.
    pub fn persist(&mut self, dir: &Path) -> Result<(), CliError> {
        let io = |e: std::io::Error| CliError::Core { context: format!("writing {}", dir.display()), source: e.into() };
        std::fs::create_dir_all(dir).map_err(io)?;
        let files = self.render();
        self.artifacts = files.iter().map(|(p, _)| p.clone()).collect();
        self.artifacts.push("report.json".into());
        for (p, body) in &files {
            std::fs::write(dir.join(p), body).map_err(io)?;
        }
        let json = serde_json::to_string_pretty(self).map_err(|e| CliError::Core { context: "report".into(), source: e.into() })?;
        std::fs::write(dir.join("report.json"), json + "\n").map_err(io)?;
        Ok(())
    }
}

pub fn fmt(x: f64) -> String {
    format!("{x:.12e}")
}
