use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use spectral_bench::eval::{HyperparamGrid, ParamValue};
use spectral_bench::{Algorithm, SgFilterSpec};

use crate::error::{CliError, CliResult};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Preprocessing {
    None,
    Sg {
        window: usize,
        degree: usize,
        deriv: usize,
    },
}

impl Default for Preprocessing {
    fn default() -> Self {
        let d = SgFilterSpec::default();
        Preprocessing::Sg {
            window: d.window,
            degree: d.degree,
            deriv: d.deriv_order,
        }
    }
}

impl Preprocessing {
    pub fn spec(&self) -> CliResult<Option<SgFilterSpec>> {
        match *self {
            Preprocessing::None => Ok(None),
            Preprocessing::Sg {
                window,
                degree,
                deriv,
            } => SgFilterSpec::new(window, degree, deriv)
                .map(Some)
                .map_err(|e| CliError::Config(e.to_string())),
        }
    }

    pub fn label(&self) -> String {
        match self {
            Preprocessing::None => "none".into(),
            Preprocessing::Sg {
                window,
                degree,
                deriv,
            } => format!("sg({window},{degree},{deriv})"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Mode {
    Cv,
    NestedCv,
}

/// Everything that defines one experiment. Read from a TOML file, then
/// overridden by command-line flags.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub dataset: PathBuf,
    #[serde(default)]
    pub preprocessing: Preprocessing,
    #[serde(default = "default_algorithm")]
    pub algorithm: Algorithm,
    #[serde(default)]
    pub grid: Option<HyperparamGrid>,
    /// Evaluate only this many grid points, drawn with the experiment seed.
    #[serde(default)]
    pub search_samples: Option<usize>,
    #[serde(default = "default_k")]
    pub k: usize,
    #[serde(default = "default_seed")]
    pub seed: u64,
    #[serde(default)]
    pub stratified: bool,
    /// Name of the positive class for binary datasets.
    #[serde(default)]
    pub positive: Option<String>,
    /// Also write a t-SNE embedding of the (preprocessed) dataset.
    #[serde(default)]
    pub embed: bool,
    pub out: PathBuf,
}

fn default_algorithm() -> Algorithm {
    Algorithm::Cnn(Default::default())
}

fn default_k() -> usize {
    5
}

fn default_seed() -> u64 {
    42
}

/// Partially specified config as found in a file.
#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigFile {
    pub dataset: Option<PathBuf>,
    pub preprocessing: Option<Preprocessing>,
    pub algorithm: Option<Algorithm>,
    pub grid: Option<HyperparamGrid>,
    pub search_samples: Option<usize>,
    pub k: Option<usize>,
    pub seed: Option<u64>,
    pub stratified: Option<bool>,
    pub positive: Option<String>,
    pub embed: Option<bool>,
    pub out: Option<PathBuf>,
}

impl ConfigFile {
    pub fn load(path: &Path) -> CliResult<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        toml::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
    }
}

/// Command-line values; `None` leaves the file or default value in place.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub dataset: Option<PathBuf>,
    pub no_sg: bool,
    pub window: Option<usize>,
    pub degree: Option<usize>,
    pub deriv: Option<usize>,
    pub algo: Option<String>,
    pub params: Vec<(String, ParamValue)>,
    pub grid: Option<HyperparamGrid>,
    pub search_samples: Option<usize>,
    pub k: Option<usize>,
    pub seed: Option<u64>,
    pub stratified: bool,
    pub positive: Option<String>,
    pub embed: bool,
    pub out: Option<PathBuf>,
}

/// Parse `name=value`; integers, then floats, otherwise text.
pub fn parse_param(s: &str) -> Result<(String, ParamValue), String> {
    let (k, v) = s
        .split_once('=')
        .ok_or_else(|| format!("expected name=value, got {s:?}"))?;
    Ok((k.trim().to_string(), parse_value(v.trim())))
}

pub fn parse_value(v: &str) -> ParamValue {
    if let Ok(i) = v.parse::<i64>() {
        ParamValue::Int(i)
    } else if let Ok(f) = v.parse::<f64>() {
        ParamValue::Float(f)
    } else {
        ParamValue::Text(v.to_string())
    }
}

/// Grid from a JSON or TOML file with an `axes` list.
pub fn load_grid(path: &Path) -> CliResult<HyperparamGrid> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    let bad = |e: String| CliError::Config(format!("grid {}: {e}", path.display()));
    let grid: HyperparamGrid = if path.extension().is_some_and(|e| e == "json") {
        serde_json::from_str(&text).map_err(|e| bad(e.to_string()))?
    } else {
        toml::from_str(&text).map_err(|e| bad(e.to_string()))?
    };
    grid.validate().map_err(|e| bad(e.to_string()))?;
    Ok(grid)
}

impl ExperimentConfig {
    /// Merge flag > file > default.
    pub fn resolve(file: ConfigFile, flags: Overrides) -> CliResult<Self> {
        let dataset = flags
            .dataset
            .or(file.dataset)
            .ok_or_else(|| CliError::Config("no dataset given".into()))?;
        let out = flags
            .out
            .or(file.out)
            .ok_or_else(|| CliError::Config("no output directory given".into()))?;

        let mut preprocessing = file.preprocessing.unwrap_or_default();
        if flags.no_sg {
            preprocessing = Preprocessing::None;
        } else if flags.window.is_some() || flags.degree.is_some() || flags.deriv.is_some() {
            let (w, d, r) = match preprocessing {
                Preprocessing::Sg {
                    window,
                    degree,
                    deriv,
                } => (window, degree, deriv),
                Preprocessing::None => match Preprocessing::default() {
                    Preprocessing::Sg {
                        window,
                        degree,
                        deriv,
                    } => (window, degree, deriv),
                    Preprocessing::None => unreachable!(),
                },
            };
            preprocessing = Preprocessing::Sg {
                window: flags.window.unwrap_or(w),
                degree: flags.degree.unwrap_or(d),
                deriv: flags.deriv.unwrap_or(r),
            };
        }

        let mut algorithm = file.algorithm.unwrap_or_else(default_algorithm);
        if let Some(name) = &flags.algo {
            let requested = Algorithm::from_name(name).map_err(|e| CliError::Config(e.to_string()))?;
            if requested.name() != algorithm.name() {
                algorithm = requested;
            }
        }
        for (key, value) in &flags.params {
            algorithm
                .set(key, value)
                .map_err(|e| CliError::Config(e.to_string()))?;
        }

        let config = ExperimentConfig {
            dataset,
            preprocessing,
            algorithm,
            grid: flags.grid.or(file.grid),
            search_samples: flags.search_samples.or(file.search_samples),
            k: flags.k.or(file.k).unwrap_or_else(default_k),
            seed: flags.seed.or(file.seed).unwrap_or_else(default_seed),
            stratified: flags.stratified || file.stratified.unwrap_or(false),
            positive: flags.positive.or(file.positive),
            embed: flags.embed || file.embed.unwrap_or(false),
            out,
        };
        Ok(config)
    }

    pub fn validate(&self, mode: Mode) -> CliResult<()> {
        let bad = |m: String| Err(CliError::Config(m));
        if self.k < 2 {
            return bad(format!("k must be at least 2, got {}", self.k));
        }
        if mode == Mode::NestedCv {
            if self.k < 3 {
                return bad(format!("nested cross-validation needs k ≥ 3, got {}", self.k));
            }
            if self.grid.is_none() {
                return bad("nested cross-validation needs a grid".into());
            }
        }
        if self.search_samples == Some(0) {
            return bad("search_samples must be at least 1".into());
        }
        if let Some(grid) = &self.grid {
            grid.validate().map_err(|e| CliError::Config(e.to_string()))?;
            // Every grid point must be a valid parameter set for the algorithm.
            for p in grid.combinations() {
                self.algorithm
                    .with_params(&p)
                    .and_then(|a| a.validate())
                    .map_err(|e| CliError::Config(format!("grid point {p}: {e}")))?;
            }
        }
        self.algorithm
            .validate()
            .map_err(|e| CliError::Config(e.to_string()))?;
        self.preprocessing.spec()?;
        if !self.dataset.exists() {
            return Err(CliError::Dataset {
                path: self.dataset.clone(),
                source: spectral_bench::Error::Validation("file does not exist".into()),
            });
        }
        Ok(())
    }
}
