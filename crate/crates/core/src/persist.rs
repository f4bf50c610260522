//! On-disk artifacts: representation bundles, JSON documents and dense
//! matrices as CSV.
//!
//! A bundle is a directory `rep_<hash>/` where `<hash>` is a prefix of the
//! SHA-256 of the serialized representation. It holds `header.json`
//! (dimensions, training config, full hash), `representation.json` (all
//! factors) and `b_hat_level_<h>.csv` for external tools.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::representation::{LearnedRepresentation, TrainConfig};

const HASH_PREFIX: usize = 16;

pub fn sha256_hex(bytes: &[u8]) -> String {
    let digest = Sha256::digest(bytes);
    let mut out = String::with_capacity(64);
    for b in digest {
        write!(out, "{b:02x}").expect("writing to a string");
    }
    out
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let text = serde_json::to_string_pretty(value)
        .map_err(|e| Error::Config(format!("cannot serialize {}: {e}", path.display())))?;
    fs::write(path, text + "\n").map_err(|e| Error::io(path, e))
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| Error::Parse {
        line: e.line(),
        message: format!("{}: {e}", path.display()),
    })
}

pub fn write_matrix_csv(path: &Path, m: &Matrix) -> Result<()> {
    let mut out = String::new();
    for i in 0..m.rows() {
        let row: Vec<String> = m.row(i).iter().map(|x| x.to_string()).collect();
        out.push_str(&row.join(","));
        out.push('\n');
    }
    fs::write(path, out).map_err(|e| Error::io(path, e))
}

pub fn read_matrix_csv(path: &Path) -> Result<Matrix> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut rows = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let row = line
            .split(',')
            .map(|f| f.trim().parse::<f64>())
            .collect::<std::result::Result<Vec<_>, _>>()
            .map_err(|e| Error::Parse {
                line: i + 1,
                message: format!("{}: {e}", path.display()),
            })?;
        rows.push(row);
    }
    Matrix::from_rows(&rows)
}

/// Summary written next to a bundle's factors.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BundleHeader {
    pub hash: String,
    pub horizon: usize,
    pub num_states: usize,
    pub obs_dim: usize,
    pub ambient_dim: usize,
    pub num_tasks: usize,
    pub ranks: Vec<usize>,
    pub config: TrainConfig,
    pub version: String,
}

/// Writes `rep` under `parent/rep_<hash>/` and returns the bundle path.
pub fn save_representation(rep: &LearnedRepresentation, parent: &Path) -> Result<PathBuf> {
    let body = serde_json::to_string(rep)
        .map_err(|e| Error::Config(format!("cannot serialize representation: {e}")))?;
    let hash = sha256_hex(body.as_bytes());
    let dir = parent.join(format!("rep_{}", &hash[..HASH_PREFIX]));
    fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
    let header = BundleHeader {
        hash,
        horizon: rep.horizon,
        num_states: rep.num_states,
        obs_dim: rep.obs_dim,
        ambient_dim: rep.ambient_dim(),
        num_tasks: rep.num_tasks,
        ranks: rep.levels.iter().map(|l| l.rank()).collect(),
        config: rep.config.clone(),
        version: env!("CARGO_PKG_VERSION").to_string(),
    };
    write_json(&dir.join("header.json"), &header)?;
    let path = dir.join("representation.json");
    fs::write(&path, body).map_err(|e| Error::io(&path, e))?;
    for lvl in &rep.levels {
        write_matrix_csv(&dir.join(format!("b_hat_level_{}.csv", lvl.level)), &lvl.b_hat)?;
    }
    Ok(dir)
}

/// Loads a bundle directory and checks it against its header hash.
pub fn load_representation(dir: &Path) -> Result<LearnedRepresentation> {
    let header: BundleHeader = read_json(&dir.join("header.json"))?;
    let path = dir.join("representation.json");
    let body = fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
    if sha256_hex(body.as_bytes()) != header.hash {
        return Err(Error::Config(format!(
            "{} does not match the hash recorded in its header",
            path.display()
        )));
    }
    serde_json::from_str(&body).map_err(|e| Error::Parse {
        line: e.line(),
        message: format!("{}: {e}", path.display()),
    })
}
