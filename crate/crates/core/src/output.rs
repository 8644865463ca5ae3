//! Output artifacts: CSV tables and JSON records stamped with the hash of the
//! producing configuration.
//!
//! Artifacts are built in memory and written together, so a failed run
//! leaves nothing behind.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;
use serde_json::Value;
use sha2::{Digest, Sha256};

use crate::Result;

/// Floats with 17 significant digits.
pub fn fmt_f64(x: f64) -> String {
    format!("{x:.16e}")
}

/// SHA-256 of the canonical `command` + sorted `key=value` lines.
pub fn config_hash(command: &str, params: &BTreeMap<String, String>) -> String {
    let mut h = Sha256::new();
    h.update(command.as_bytes());
    h.update(b"\n");
    for (k, v) in params {
        h.update(k.as_bytes());
        h.update(b"=");
        h.update(v.as_bytes());
        h.update(b"\n");
    }
    hex::encode(h.finalize())
}

#[derive(Debug, Clone, PartialEq)]
pub struct Artifact {
    pub name: String,
    pub bytes: Vec<u8>,
}

/// CSV with a leading `# config_hash=` comment.
pub fn csv_artifact(name: &str, hash: &str, header: &[&str], rows: &[Vec<f64>]) -> Result<Artifact> {
    let mut bytes = format!("# config_hash={hash}\n").into_bytes();
    {
        let mut w = csv::Writer::from_writer(&mut bytes);
        w.write_record(header).map_err(csv_err)?;
        for r in rows {
            w.write_record(r.iter().map(|x| fmt_f64(*x))).map_err(csv_err)?;
        }
        w.flush()?;
    }
    Ok(Artifact { name: name.to_string(), bytes })
}

fn csv_err(e: csv::Error) -> crate::Error {
    crate::Error::Io(std::io::Error::other(e))
}

/// Pretty JSON; objects get a `config_hash` field, other values are wrapped.
pub fn json_artifact<T: Serialize>(name: &str, hash: &str, value: &T) -> Result<Artifact> {
    let mut v = serde_json::to_value(value)?;
    match &mut v {
        Value::Object(map) => {
            map.insert("config_hash".into(), Value::String(hash.into()));
        }
        other => {
            let inner = other.take();
            v = serde_json::json!({ "config_hash": hash, "data": inner });
        }
    }
    let mut bytes = serde_json::to_vec_pretty(&v)?;
    bytes.push(b'\n');
    Ok(Artifact { name: name.to_string(), bytes })
}

#[derive(Debug, Clone, Serialize)]
pub struct Manifest {
    pub command: String,
    pub config: BTreeMap<String, String>,
    pub config_hash: String,
    pub version: String,
    pub outputs: Vec<String>,
    pub wall_time_s: f64,
}

/// Writes every artifact into `dir` (created if needed) and returns the paths.
pub fn write_all(dir: &Path, artifacts: &[Artifact]) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(dir)?;
    artifacts
        .iter()
        .map(|a| {
            let p = dir.join(&a.name);
            if let Some(parent) = p.parent() {
                fs::create_dir_all(parent)?;
            }
            fs::write(&p, &a.bytes)?;
            Ok(p)
        })
        .collect()
}
