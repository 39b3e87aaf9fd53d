//! Input and output file formats.
//!
//! Chain files are `{"p": [[...], ...]}` with row-major one-step
//! probabilities; policy files are `{"dist": [[...], ...]}` with
//! `dist[j][tau - 1] = P(tau | j)`.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use markov_sampler::{MarkovChain, MarkovPolicy};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::error::CliError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChainFile {
    pub p: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolicyFile {
    pub dist: Vec<Vec<f64>>,
}

fn read_to_string(path: &Path) -> Result<String, CliError> {
    fs::read_to_string(path).map_err(|source| CliError::Io {
        path: path.to_path_buf(),
        source,
    })
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T, CliError> {
    let text = read_to_string(path)?;
    serde_json::from_str(&text).map_err(|err| CliError::Parse {
        path: path.to_path_buf(),
        message: err.to_string(),
    })
}

pub fn read_chain(path: &Path) -> Result<MarkovChain, CliError> {
    let file: ChainFile = read_json(path)?;
    MarkovChain::from_rows(&file.p).map_err(|err| CliError::Parse {
        path: path.to_path_buf(),
        message: format!("field `p`: {err}"),
    })
}

pub fn policy_from_rows(path: &Path, dist: Vec<Vec<f64>>) -> Result<MarkovPolicy, CliError> {
    MarkovPolicy::from_rows(dist).map_err(|err| CliError::Parse {
        path: path.to_path_buf(),
        message: format!("field `dist`: {err}"),
    })
}

pub fn read_policy(path: &Path) -> Result<MarkovPolicy, CliError> {
    let file: PolicyFile = read_json(path)?;
    policy_from_rows(path, file.dist)
}

/// Writes `contents` to `path`, or to stdout when no path is given.
pub fn write_output(path: Option<&PathBuf>, contents: &[u8]) -> Result<(), CliError> {
    match path {
        Some(path) => fs::write(path, contents).map_err(|source| CliError::Io {
            path: path.clone(),
            source,
        }),
        None => std::io::stdout()
            .write_all(contents)
            .map_err(|source| CliError::Io {
                path: PathBuf::from("<stdout>"),
                source,
            }),
    }
}

pub fn to_pretty_json<T: Serialize>(value: &T) -> Vec<u8> {
    let mut bytes = serde_json::to_vec_pretty(value).expect("reports serialize");
    bytes.push(b'\n');
    bytes
}
