//! Run manifests.
//!
//! Every command drops a `manifest.json` beside its artifacts: schema
//! version, command name, the fully resolved settings, a content digest
//! per input file, and the artifact list. A changed digest on a rerun
//! flags silent dataset drift; the settings key list is versioned by
//! the schema number.

use std::fmt::Write as _;
use std::fs::File;
use std::io::{BufWriter, Read, Write};
use std::path::Path;

use anyhow::Context;
use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::settings::Settings;

pub const SCHEMA: u32 = 1;

#[derive(Debug, Serialize)]
pub struct Input {
    pub role: &'static str,
    pub path: String,
    pub sha256: String,
}

#[derive(Debug, Serialize)]
pub struct Manifest {
    pub schema: u32,
    pub command: &'static str,
    pub settings: Settings,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub ks: Option<Vec<usize>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub rank_aggregation: Option<&'static str>,
    pub inputs: Vec<Input>,
    pub artifacts: Vec<String>,
}

impl Manifest {
    pub fn new(command: &'static str, settings: Settings) -> Self {
        Manifest {
            schema: SCHEMA,
            command,
            settings,
            ks: None,
            rank_aggregation: None,
            inputs: Vec::new(),
            artifacts: Vec::new(),
        }
    }

    /// Digests the file now, so the manifest records the bytes the run
    /// actually read.
    pub fn input(&mut self, role: &'static str, path: &Path) -> anyhow::Result<()> {
        self.inputs.push(Input {
            role,
            path: path.display().to_string(),
            sha256: sha256_hex(path)?,
        });
        Ok(())
    }

    pub fn write(&self, path: &Path) -> anyhow::Result<()> {
        let file = File::create(path)
            .with_context(|| format!("cannot create {}", path.display()))?;
        let mut out = BufWriter::new(file);
        serde_json::to_writer_pretty(&mut out, self)?;
        out.write_all(b"\n")?;
        out.flush()?;
        Ok(())
    }
}

fn sha256_hex(path: &Path) -> anyhow::Result<String> {
    let mut file =
        File::open(path).with_context(|| format!("cannot read {}", path.display()))?;
    let mut hasher = Sha256::new();
    let mut buf = [0u8; 64 * 1024];
    loop {
        let n = file.read(&mut buf)?;
        if n == 0 {
            break;
        }
        hasher.update(&buf[..n]);
    }
    let mut hex = String::with_capacity(64);
    for byte in hasher.finalize() {
        let _ = write!(hex, "{byte:02x}");
    }
    Ok(hex)
}
