//! Flat TOML run configuration.
//!
//! Every key is optional and mirrors a command-line flag with `-` replaced
//! by `_`. A flag given on the command line always wins over the file;
//! the file wins over built-in defaults. Keys that no command understands
//! are rejected.

use std::fs;
use std::path::{Path, PathBuf};

use serde::Deserialize;

use crate::CliError;

#[derive(Debug, Default, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    // embedding trainer
    pub corpus: Option<PathBuf>,
    pub dim: Option<usize>,
    pub window: Option<usize>,
    pub lr: Option<f64>,
    pub decay: Option<f64>,
    pub batch: Option<usize>,
    pub epochs: Option<usize>,
    pub min_count: Option<usize>,
    pub seed: Option<u64>,
    pub threads: Option<usize>,
    pub deterministic: Option<bool>,
    pub out: Option<PathBuf>,
    pub loss_log: Option<PathBuf>,
    pub vocab_out: Option<PathBuf>,
    pub codes_out: Option<PathBuf>,

    // classifier
    pub embeddings: Option<PathBuf>,
    pub dataset: Option<PathBuf>,
    pub checkpoint: Option<PathBuf>,
    pub accuracy_log: Option<PathBuf>,
    pub seq_len: Option<usize>,
    pub kernel: Option<usize>,
    pub channels: Option<usize>,
    pub dropout: Option<f64>,
    pub pool: Option<usize>,
    pub classes: Option<usize>,
    pub freeze_embeddings: Option<bool>,

    // captions
    pub captions: Option<PathBuf>,
    pub report: Option<PathBuf>,
    pub smooth_bleu: Option<bool>,

    // nearest
    pub word: Option<String>,
    pub k: Option<usize>,
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        toml::from_str(&text).map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))
    }
}

/// Flag value, then config value, then `default`.
pub fn pick<T>(flag: Option<T>, file: Option<T>, default: T) -> T {
    flag.or(file).unwrap_or(default)
}

/// Flag value, then config value; missing in both is a usage error.
pub fn require<T>(flag: Option<T>, file: Option<T>, name: &str) -> Result<T, CliError> {
    flag.or(file)
        .ok_or_else(|| CliError::Usage(format!("missing required setting --{name}")))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_known_keys() {
        let cfg: RunConfig = toml::from_str("dim = 8\nlr = 0.05\ndeterministic = true\ncorpus = \"c.txt\"\n").unwrap();
        assert_eq!(cfg.dim, Some(8));
        assert_eq!(cfg.lr, Some(0.05));
        assert_eq!(cfg.deterministic, Some(true));
        assert_eq!(cfg.corpus.as_deref(), Some(Path::new("c.txt")));
    }

    #[test]
    fn rejects_unknown_keys() {
        assert!(toml::from_str::<RunConfig>("dimension = 8\n").is_err());
        assert!(toml::from_str::<RunConfig>("[section]\ndim = 8\n").is_err());
    }

    #[test]
    fn precedence() {
        assert_eq!(pick(Some(1), Some(2), 3), 1);
        assert_eq!(pick(None, Some(2), 3), 2);
        assert_eq!(pick(None, None, 3), 3);
        assert!(require::<u8>(None, None, "out").is_err());
    }
}
