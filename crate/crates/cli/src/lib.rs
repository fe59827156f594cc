//! Front-end pieces behind the `shadowtale` binary.

pub mod repl;
pub mod runner;

use std::fmt;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use shadowtale::{Dictionary, Engine, EngineConfig};

/// Exit status for scenario errors.
pub const EXIT_SCENARIO: u8 = 1;
/// Exit status for unreadable or malformed inputs and outputs.
pub const EXIT_IO: u8 = 2;

/// A file that could not be read, parsed or written.
#[derive(Debug, Clone, PartialEq)]
pub struct InputError {
    pub path: PathBuf,
    pub message: String,
}

impl fmt::Display for InputError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.path.display(), self.message)
    }
}

impl std::error::Error for InputError {}

pub fn read_file(path: &Path) -> Result<String, InputError> {
    std::fs::read_to_string(path).map_err(|e| InputError {
        path: path.to_path_buf(),
        message: e.to_string(),
    })
}

/// Builds an engine from a dictionary file, the optional oracle preset and
/// an optional `key = value` config file applied on top.
pub fn load_engine(dict: &Path, config: Option<&Path>, oracle: bool) -> Result<Engine, InputError> {
    let dictionary = Dictionary::load(&read_file(dict)?).map_err(|e| InputError {
        path: dict.to_path_buf(),
        message: e.to_string(),
    })?;
    let mut cfg = if oracle {
        EngineConfig::oracle()
    } else {
        EngineConfig::default()
    };
    if let Some(path) = config {
        cfg = cfg.apply_str(&read_file(path)?).map_err(|e| InputError {
            path: path.to_path_buf(),
            message: e.to_string(),
        })?;
    }
    Ok(Engine::new(Arc::new(dictionary), cfg))
}
