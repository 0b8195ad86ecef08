//! Run configuration files (JSON).
//!
//! Precedence, highest first: command-line flags, the `PCDNSE_OUTPUT_DIR`
//! environment variable (output directory only), keys in the config file,
//! built-in defaults. The resolved configuration is echoed next to every
//! run's outputs with all defaults spelled out.

use std::fs;
use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use pcdnse::params::effective_params;
use pcdnse::{Boundary, ChainParams, EffectiveParams, ReservoirParams, SolitonCoords, SolverConfig};

use crate::CliError;

/// Reads a JSON file, reporting the offending key path and line on failure.
pub fn load_json<T: DeserializeOwned>(path: &Path) -> Result<T, CliError> {
    let text = fs::read_to_string(path).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
    parse_json(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
}

pub fn parse_json<T: DeserializeOwned>(text: &str) -> Result<T, String> {
    let de = &mut serde_json::Deserializer::from_str(text);
    serde_path_to_error::deserialize(de).map_err(|e| {
        let path = e.path().to_string();
        let inner = e.into_inner();
        format!("key `{path}`: {inner}")
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Model {
    /// Chain plus driven cavities.
    Langevin,
    /// Effective lattice equation.
    Lattice,
    /// Continuum field equation.
    Pcdnse,
    /// Six collective coordinates.
    Collective,
    /// Reduced dynamics on the stable-soliton manifold.
    Stable,
}

impl Model {
    pub fn default_preset(self) -> &'static str {
        match self {
            Model::Langevin => "langevin",
            Model::Lattice | Model::Pcdnse => "pcdnse",
            Model::Collective | Model::Stable => "collective",
        }
    }
}

/// Exactly one way of specifying the dynamics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase", deny_unknown_fields)]
pub enum ParamsConfig {
    Effective(EffectiveParams),
    Microscopic { reservoir: ReservoirParams, chain: ChainParams },
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DomainConfig {
    /// Lattice sites (lattice model with effective parameters).
    #[serde(default)]
    pub sites: Option<usize>,
    /// Continuum domain length in lattice units.
    #[serde(default)]
    pub length: Option<f64>,
    /// Continuum grid points.
    #[serde(default)]
    pub points: Option<usize>,
    #[serde(default)]
    pub boundary: Option<Boundary>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase", deny_unknown_fields)]
pub enum InitialConfig {
    Soliton(SolitonCoords),
    Solitons(Vec<SolitonCoords>),
    /// CSV with columns `coordinate, re, im` and a header row.
    File(PathBuf),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunSection {
    pub t1: f64,
    /// Number of equally spaced snapshots including both ends.
    #[serde(default)]
    pub snapshots: Option<usize>,
    #[serde(default)]
    pub preset: Option<String>,
    #[serde(default)]
    pub rtol: Option<f64>,
    #[serde(default)]
    pub atol: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Csv,
    Json,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSection {
    #[serde(default)]
    pub directory: Option<PathBuf>,
    #[serde(default)]
    pub formats: Option<Vec<Format>>,
}

/// A `simulate` config file as written by the user.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub model: Model,
    pub params: ParamsConfig,
    #[serde(default)]
    pub domain: DomainConfig,
    pub initial: InitialConfig,
    pub run: RunSection,
    #[serde(default)]
    pub outputs: OutputSection,
}

/// Command-line values that take precedence over the file.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub out: Option<PathBuf>,
    pub preset: Option<String>,
    pub rtol: Option<f64>,
    pub atol: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ResolvedDomain {
    pub sites: Option<usize>,
    pub length: Option<f64>,
    pub points: Option<usize>,
    pub boundary: Boundary,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ResolvedRun {
    pub t1: f64,
    pub snapshots: usize,
    pub preset: String,
    pub solver: SolverConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ResolvedOutputs {
    pub directory: PathBuf,
    pub formats: Vec<Format>,
}

/// Configuration with every default filled in; this is what gets echoed.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ResolvedConfig {
    pub model: Model,
    pub params: ParamsConfig,
    /// Constants of the effective dynamics (derived when microscopic).
    pub effective: EffectiveParams,
    pub domain: ResolvedDomain,
    pub initial: InitialConfig,
    pub run: ResolvedRun,
    pub outputs: ResolvedOutputs,
}

pub const DEFAULT_SNAPSHOTS: usize = 11;
pub const DEFAULT_OUTPUT_DIR: &str = "pcdnse-out";

impl ExperimentConfig {
    /// `base` is the directory relative paths in the file refer to.
    pub fn resolve(self, base: &Path, over: &Overrides) -> Result<ResolvedConfig, CliError> {
        let bad = |msg: String| Err(CliError::Config(msg));
        let (effective, chain) = match &self.params {
            ParamsConfig::Effective(e) => (*e, None),
            ParamsConfig::Microscopic { reservoir, chain } => {
                reservoir.validate()?;
                chain.validate()?;
                (effective_params(reservoir, chain)?, Some(*chain))
            }
        };
        if !(effective.hopping > 0.0) {
            return bad(format!("params: hopping must be > 0, got {}", effective.hopping));
        }

        let boundary = self.domain.boundary.or(chain.map(|c| c.boundary)).unwrap_or_default();
        let domain = match self.model {
            Model::Langevin => {
                let Some(chain) = chain else {
                    return bad("model `langevin` needs `params.microscopic`".into());
                };
                if self.domain.sites.is_some_and(|s| s != chain.sites) {
                    return bad("domain.sites disagrees with params.microscopic.chain.sites".into());
                }
                ResolvedDomain { sites: Some(chain.sites), length: None, points: None, boundary }
            }
            Model::Lattice => {
                let Some(sites) = self.domain.sites.or(chain.map(|c| c.sites)) else {
                    return bad("model `lattice` needs `domain.sites`".into());
                };
                ResolvedDomain { sites: Some(sites), length: None, points: None, boundary }
            }
            Model::Pcdnse => {
                let (Some(length), Some(points)) = (self.domain.length, self.domain.points) else {
                    return bad("model `pcdnse` needs `domain.length` and `domain.points`".into());
                };
                ResolvedDomain { sites: None, length: Some(length), points: Some(points), boundary }
            }
            Model::Collective | Model::Stable => ResolvedDomain { sites: None, length: None, points: None, boundary },
        };

        let initial = match self.initial {
            InitialConfig::File(p) => {
                let p = if p.is_absolute() { p } else { base.join(p) };
                if !p.is_file() {
                    return bad(format!("initial state file {} does not exist", p.display()));
                }
                if matches!(self.model, Model::Collective | Model::Stable) {
                    return bad("collective and stable models need `initial.soliton`".into());
                }
                InitialConfig::File(p)
            }
            InitialConfig::Solitons(v) if v.is_empty() => return bad("initial.solitons is empty".into()),
            InitialConfig::Solitons(v) if matches!(self.model, Model::Collective | Model::Stable) && v.len() != 1 => {
                return bad("collective and stable models take a single soliton".into())
            }
            other => other,
        };

        if !(self.run.t1 > 0.0 && self.run.t1.is_finite()) {
            return bad(format!("run.t1 must be a positive number, got {}", self.run.t1));
        }
        let snapshots = self.run.snapshots.unwrap_or(DEFAULT_SNAPSHOTS);
        if snapshots < 2 {
            return bad(format!("run.snapshots must be >= 2, got {snapshots}"));
        }
        let preset = over
            .preset
            .clone()
            .or(self.run.preset)
            .unwrap_or_else(|| self.model.default_preset().to_string());
        let Some(mut solver) = SolverConfig::preset(&preset) else {
            return bad(format!("unknown solver preset {preset:?}"));
        };
        solver.rtol = over.rtol.or(self.run.rtol).unwrap_or(solver.rtol);
        solver.atol = over.atol.or(self.run.atol).unwrap_or(solver.atol);
        if !(solver.rtol > 0.0 && solver.atol > 0.0) {
            return bad(format!("tolerances must be positive (rtol = {}, atol = {})", solver.rtol, solver.atol));
        }

        let directory = over
            .out
            .clone()
            .or(self.outputs.directory.map(|d| if d.is_absolute() { d } else { base.join(d) }))
            .unwrap_or_else(|| PathBuf::from(DEFAULT_OUTPUT_DIR));
        let formats = self.outputs.formats.unwrap_or_else(|| vec![Format::Csv, Format::Json]);

        Ok(ResolvedConfig {
            model: self.model,
            params: self.params,
            effective,
            domain,
            initial,
            run: ResolvedRun { t1: self.run.t1, snapshots, preset, solver },
            outputs: ResolvedOutputs { directory, formats },
        })
    }
}

/// Optional `params` config: a detuning sweep, a single point to evaluate,
/// and an inversion target.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ParamsCommandConfig {
    #[serde(default)]
    pub sweep: SweepConfig,
    #[serde(default)]
    pub point: Option<PointConfig>,
    #[serde(default)]
    pub target: Option<TargetConfig>,
}

impl Default for ParamsCommandConfig {
    fn default() -> Self {
        Self { sweep: SweepConfig::default(), point: None, target: None }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SweepConfig {
    pub chi: f64,
    pub eta: f64,
    pub kappa: f64,
    pub delta_min: f64,
    pub delta_max: f64,
    pub points: usize,
}

impl Default for SweepConfig {
    fn default() -> Self {
        Self { chi: 1.0, eta: 1.0, kappa: 1.0, delta_min: -3.0, delta_max: 3.0, points: 601 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PointConfig {
    pub reservoir: ReservoirParams,
    pub chain: ChainParams,
    /// Largest site amplitude for the weak-coupling ratios.
    #[serde(default = "unit")]
    pub b_max: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TargetConfig {
    pub g: f64,
    pub gamma: f64,
    pub eta: f64,
    pub kappa: f64,
    pub delta: f64,
    #[serde(default = "unit")]
    pub hopping: f64,
}

fn unit() -> f64 {
    1.0
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pcdnse_config() -> &'static str {
        r#"{
            "model": "pcdnse",
            "params": {"effective": {"g": -0.1, "gamma": 0.05}},
            "domain": {"length": 400, "points": 4000},
            "initial": {"soliton": {"psi": 1, "x0": 100, "v": 0.48, "w": 4.47213595499958, "d": 0, "phi": 0}},
            "run": {"t1": 1}
        }"#
    }

    #[test]
    fn defaults_are_filled_in() {
        let cfg: ExperimentConfig = parse_json(pcdnse_config()).unwrap();
        let r = cfg.resolve(Path::new("."), &Overrides::default()).unwrap();
        assert_eq!(r.run.preset, "pcdnse");
        assert_eq!(r.run.snapshots, DEFAULT_SNAPSHOTS);
        assert_eq!(r.domain.boundary, Boundary::Periodic);
        assert_eq!(r.effective.hopping, 1.0);
        assert_eq!(r.outputs.formats, vec![Format::Csv, Format::Json]);
    }

    #[test]
    fn flags_override_file() {
        let cfg: ExperimentConfig = parse_json(pcdnse_config()).unwrap();
        let over = Overrides { preset: Some("tight".into()), atol: Some(1e-9), ..Overrides::default() };
        let r = cfg.resolve(Path::new("."), &over).unwrap();
        assert_eq!((r.run.solver.rtol, r.run.solver.atol), (1e-13, 1e-9));
    }

    #[test]
    fn error_names_the_key() {
        let text = pcdnse_config().replace("\"t1\": 1", "\"t1\": \"soon\"");
        let err = parse_json::<ExperimentConfig>(&text).unwrap_err();
        assert!(err.contains("run.t1"), "{err}");
        assert!(err.contains("line"), "{err}");
    }

    #[test]
    fn exactly_one_parameterization() {
        let text = pcdnse_config().replace(
            r#"{"effective": {"g": -0.1, "gamma": 0.05}}"#,
            r#"{"effective": {"g": -0.1, "gamma": 0.05}, "microscopic": {}}"#,
        );
        assert!(parse_json::<ExperimentConfig>(&text).is_err());
    }

    #[test]
    fn langevin_requires_microscopic() {
        let text = pcdnse_config().replace("\"pcdnse\"", "\"langevin\"");
        let cfg: ExperimentConfig = parse_json(&text).unwrap();
        assert!(matches!(cfg.resolve(Path::new("."), &Overrides::default()), Err(CliError::Config(_))));
    }

    #[test]
    fn missing_file_is_a_config_error() {
        let text = pcdnse_config().replace(
            r#"{"soliton": {"psi": 1, "x0": 100, "v": 0.48, "w": 4.47213595499958, "d": 0, "phi": 0}}"#,
            r#"{"file": "does-not-exist.csv"}"#,
        );
        let cfg: ExperimentConfig = parse_json(&text).unwrap();
        let err = cfg.resolve(Path::new("/nonexistent"), &Overrides::default()).unwrap_err();
        assert!(err.to_string().contains("does not exist"));
    }
}
