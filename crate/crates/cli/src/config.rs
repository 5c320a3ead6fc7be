use resonance_core::dynamics::ShearOrder;
use resonance_core::{PotentialSpec, SymplecticTorusMap};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::CliError;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Subcommand {
    Resonances,
    Bands,
    Gutzwiller,
    Egorov,
    Landau,
    LinearModel,
    Stats,
}

impl Subcommand {
    pub fn name(self) -> &'static str {
        match self {
            Subcommand::Resonances => "resonances",
            Subcommand::Bands => "bands",
            Subcommand::Gutzwiller => "gutzwiller",
            Subcommand::Egorov => "egorov",
            Subcommand::Landau => "landau",
            Subcommand::LinearModel => "linear-model",
            Subcommand::Stats => "stats",
        }
    }

    fn needs_n(self) -> bool {
        !matches!(self, Subcommand::Landau | Subcommand::LinearModel | Subcommand::Bands)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Engine {
    Matrix,
    Determinant,
    Both,
}

impl Engine {
    pub fn matrix(self) -> bool {
        matches!(self, Engine::Matrix | Engine::Both)
    }

    pub fn determinant(self) -> bool {
        matches!(self, Engine::Determinant | Engine::Both)
    }
}

/// Everything that determines a run's results. `out` and `threads` are
/// excluded from the hash: they change where and how fast, not what.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub subcommand: Subcommand,
    pub map: SymplecticTorusMap,
    pub potential: PotentialSpec,
    #[serde(rename = "N")]
    pub n_list: Vec<usize>,
    pub engine: Engine,
    pub bands: usize,
    pub n_max: usize,
    pub seed: u64,
    #[serde(skip)]
    pub out: std::path::PathBuf,
    #[serde(skip)]
    pub threads: usize,
}

fn invalid(path: &str, reason: impl Into<String>) -> CliError {
    CliError::Core { context: "config".into(), source: resonance_core::Error::ConfigInvalid { path: path.into(), reason: reason.into() } }
}

/// `cat` or four comma-separated integers `a,b,c,d` for `[[a,b],[c,d]]`.
pub fn parse_matrix(s: &str) -> Result<[[i64; 2]; 2], CliError> {
    if s.trim() == "cat" {
        return Ok([[2, 1], [1, 1]]);
    }
    let v: Vec<i64> = s
        .split(',')
        .map(|t| t.trim().parse::<i64>())
        .collect::<Result<_, _>>()
        .map_err(|e| invalid("map", format!("{s:?}: {e}")))?;
    if v.len() != 4 {
        return Err(invalid("map", format!("expected 4 entries, got {}", v.len())));
    }
    Ok([[v[0], v[1]], [v[2], v[3]]])
}

pub fn parse_n_list(s: &str) -> Result<Vec<usize>, CliError> {
    let list: Vec<usize> = s
        .split(',')
        .map(str::trim)
        .filter(|t| !t.is_empty())
        .map(|t| t.parse::<usize>().map_err(|e| invalid("N", format!("{t:?}: {e}"))))
        .collect::<Result<_, _>>()?;
    Ok(list)
}

pub struct RawConfig<'a> {
    pub subcommand: Subcommand,
    pub map: &'a str,
    pub eps1: f64,
    pub eps2: f64,
    pub potential: &'a str,
    pub n_list: &'a str,
    pub engine: Engine,
    pub bands: usize,
    pub n_max: usize,
    pub seed: u64,
    pub out: std::path::PathBuf,
    pub threads: Option<usize>,
}

impl RunConfig {
    pub fn from_raw(raw: RawConfig<'_>) -> Result<Self, CliError> {
        let linear = parse_matrix(raw.map)?;
        let map = SymplecticTorusMap::new(linear, raw.eps1, raw.eps2, ShearOrder::default()).map_err(|e| invalid("map", e.to_string()))?;
        let potential = PotentialSpec::parse(raw.potential).map_err(|e| invalid("potential", e))?;
        let mut n_list = parse_n_list(raw.n_list)?;
        n_list.sort_unstable();
        n_list.dedup();
        let cfg = RunConfig {
            subcommand: raw.subcommand,
            map,
            potential,
            n_list,
            engine: raw.engine,
            bands: raw.bands,
            n_max: raw.n_max,
            seed: raw.seed,
            out: raw.out,
            threads: raw.threads.unwrap_or_else(rayon::current_num_threads),
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), CliError> {
        if self.subcommand.needs_n() && self.n_list.is_empty() {
            return Err(invalid("N", "empty list"));
        }
        if let Some(n) = self.n_list.iter().find(|&&n| n < 2) {
            return Err(invalid("N", format!("N = {n} is below 2")));
        }
        let tr = self.map.trace().abs();
        if tr <= 2 {
            return Err(invalid("map", format!("|tr M| = {tr} is not hyperbolic")));
        }
        if self.bands < 2 {
            return Err(invalid("K", "at least 2 bands are needed"));
        }
        if !(2..=14).contains(&self.n_max) {
            return Err(invalid("nmax", format!("{} outside 2..=14", self.n_max)));
        }
        if self.threads == 0 {
            return Err(invalid("threads", "must be positive"));
        }
        Ok(())
    }

    /// First 16 hex digits of SHA-256 over the canonical JSON of the config.
    pub fn hash(&self) -> String {
        let json = serde_json::to_string(self).expect("config serializes");
        hex::encode(Sha256::digest(json.as_bytes()))[..16].to_string()
    }

    pub fn run_dir(&self) -> std::path::PathBuf {
        self.out.join(format!("{}-{}", self.subcommand.name(), self.hash()))
    }

    pub fn cache_dir(&self) -> std::path::PathBuf {
        self.out.join("orbit-cache")
    }
}
