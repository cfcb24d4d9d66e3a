use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::de::DeserializeOwned;
use serde::Deserialize;
use wzfsm::config::{Model, ModelDocument, SequenceSpec};
use wzfsm::model::{DistortionMatrix, Sequence};

use crate::CliError;

const MODEL_KEYS: [&str; 6] = [
    "alphabet_x",
    "alphabet_y",
    "alphabet_xhat",
    "channel",
    "distortion",
    "sequence",
];
const TOP_KEYS: [&str; 3] = ["experiment", "seed", "out_dir"];
const SECTIONS: [&str; 7] = ["drf", "fsm_opt", "codec", "growth", "sr", "gen", "check"];

/// A table of rows given inline on the command line as JSON, or as an
/// array of arrays in the config file.
#[derive(Clone, Debug, Default, PartialEq, Deserialize)]
#[serde(transparent)]
pub struct Matrix(pub Vec<Vec<f64>>);

impl FromStr for Matrix {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        serde_json::from_str(s)
            .map(Matrix)
            .map_err(|e| format!("expected a JSON array of rows: {e}"))
    }
}

/// The parsed `--config` file: model fields at top level, one table per
/// subcommand (`[drf]`, `[growth.sweep]`, ...).
#[derive(Clone, Debug, Default)]
pub struct ConfigFile {
    table: toml::Table,
    pub experiment: Option<String>,
    pub seed: Option<u64>,
    pub out_dir: Option<PathBuf>,
}

impl ConfigFile {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|source| CliError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::parse(&text)
    }

    pub fn parse(text: &str) -> Result<Self, CliError> {
        let table: toml::Table = text
            .parse()
            .map_err(|e: toml::de::Error| CliError::Config(e.to_string()))?;
        for key in table.keys() {
            let k = key.as_str();
            if !MODEL_KEYS.contains(&k) && !TOP_KEYS.contains(&k) && !SECTIONS.contains(&k) {
                return Err(CliError::Config(format!("unknown key `{key}`")));
            }
        }
        let experiment = match table.get("experiment") {
            None => None,
            Some(v) => Some(
                v.as_str()
                    .ok_or_else(|| CliError::Config("`experiment` must be a string".into()))?
                    .to_string(),
            ),
        };
        let seed = match table.get("seed") {
            None => None,
            Some(v) => Some(
                v.as_integer()
                    .and_then(|i| u64::try_from(i).ok())
                    .ok_or_else(|| {
                        CliError::Config("`seed` must be a nonnegative integer".into())
                    })?,
            ),
        };
        let out_dir = match table.get("out_dir") {
            None => None,
            Some(v) => {
                Some(PathBuf::from(v.as_str().ok_or_else(|| {
                    CliError::Config("`out_dir` must be a string".into())
                })?))
            }
        };
        Ok(ConfigFile {
            table,
            experiment,
            seed,
            out_dir,
        })
    }

    fn model_document(&self) -> Result<ModelDocument, CliError> {
        let mut t = toml::Table::new();
        for k in MODEL_KEYS {
            if let Some(v) = self.table.get(k) {
                t.insert(k.to_string(), v.clone());
            }
        }
        toml::Value::Table(t)
            .try_into()
            .map_err(|e: toml::de::Error| CliError::Config(e.to_string()))
    }

    /// Source, channel and distortion; the channel is required.
    pub fn model(&self) -> Result<Model, CliError> {
        self.model_document()?.into_model().map_err(CliError::from)
    }

    pub fn has_channel(&self) -> bool {
        self.table.contains_key("channel")
    }

    /// The sequence over an alphabet fixed elsewhere, without a channel.
    pub fn sequence(&self, alpha: usize) -> Result<Option<Sequence>, CliError> {
        let doc = self.model_document()?;
        if let Some(a) = doc.alphabet_x {
            if a != alpha {
                return Err(CliError::Config(format!(
                    "alphabet_x = {a} but the experiment needs {alpha}"
                )));
            }
        }
        let seq = match doc.sequence {
            None => return Ok(None),
            Some(SequenceSpec::Digits(s)) => Sequence::from_digits(alpha, &s),
            Some(SequenceSpec::Symbols(v)) => Sequence::new(alpha, v),
        };
        seq.map(Some)
            .map_err(|e| CliError::Config(format!("sequence: {e}")))
    }

    /// The configured distortion, or Hamming over `alpha` symbols.
    pub fn distortion(&self, alpha: usize) -> Result<DistortionMatrix, CliError> {
        match self.model_document()?.distortion {
            None => Ok(DistortionMatrix::hamming(alpha)),
            Some(rows) => DistortionMatrix::new(&rows)
                .map_err(|e| CliError::Config(format!("distortion: {e}"))),
        }
    }

    /// The table at `path`, or defaults when absent.
    pub fn section<T: DeserializeOwned + Default>(&self, path: &[&str]) -> Result<T, CliError> {
        let mut cur = &self.table;
        for (i, key) in path.iter().enumerate() {
            match cur.get(*key) {
                None => return Ok(T::default()),
                Some(toml::Value::Table(t)) if i + 1 < path.len() => cur = t,
                Some(v @ toml::Value::Table(_)) => {
                    return v.clone().try_into().map_err(|e: toml::de::Error| {
                        CliError::Config(format!("[{}]: {e}", path.join(".")))
                    })
                }
                Some(_) => {
                    return Err(CliError::Config(format!(
                        "`{}` must be a table",
                        path[..=i].join(".")
                    )))
                }
            }
        }
        Ok(T::default())
    }
}

/// Fills every unset field of `$a` from `$b`.
macro_rules! overlay {
    ($a:expr, $b:expr; $($f:ident),+ $(,)?) => {
        $( if $a.$f.is_none() { $a.$f = $b.$f.clone(); } )+
    };
}
pub(crate) use overlay;
