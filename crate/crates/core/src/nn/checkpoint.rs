//! JSON checkpoints: `{version, kind, rng_seed, config, params}` where each
//! parameter carries its name, shape and row-major data.

use std::fs;
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::autodiff::FlatParam;
use crate::error::{GistError, Result};

pub const CHECKPOINT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint<C> {
    pub version: u32,
    pub kind: String,
    pub rng_seed: u64,
    pub config: C,
    pub params: Vec<FlatParam>,
}

impl<C: Serialize + DeserializeOwned> Checkpoint<C> {
    pub fn new(kind: &str, rng_seed: u64, config: C, params: Vec<FlatParam>) -> Self {
        Self {
            version: CHECKPOINT_VERSION,
            kind: kind.to_string(),
            rng_seed,
            config,
            params,
        }
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    /// Parses and checks version, kind and that every data array matches its
    /// declared shape.
    pub fn from_json(text: &str, kind: &str) -> Result<Self> {
        let ck: Self = serde_json::from_str(text)?;
        if ck.version != CHECKPOINT_VERSION {
            return Err(GistError::Checkpoint(format!(
                "unsupported version {} (expected {CHECKPOINT_VERSION})",
                ck.version
            )));
        }
        if ck.kind != kind {
            return Err(GistError::Checkpoint(format!(
                "checkpoint holds a `{}` model, expected `{kind}`",
                ck.kind
            )));
        }
        for p in &ck.params {
            if p.data.len() != p.shape[0] * p.shape[1] {
                return Err(GistError::Checkpoint(format!(
                    "{}: {} values for shape {:?}",
                    p.name,
                    p.data.len(),
                    p.shape
                )));
            }
        }
        Ok(ck)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut text = self.to_json()?;
        text.push('\n');
        fs::write(path, text)?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>, kind: &str) -> Result<Self> {
        Self::from_json(&fs::read_to_string(path)?, kind)
    }
}
