//! Versioned JSON checkpoints: a kind tag, free-form metadata and named
//! parameter arrays. Floats round-trip exactly.

use crate::autodiff::{ParamStore, Tensor};
use crate::baselines::{MlpArch, MlpModel};
use crate::error::{Error, Result};
use crate::gnn::{GnnArch, GnnModel};
use crate::sac::{SacArch, SacModel};
use serde::{Deserialize, Serialize};
use std::fmt;
use std::path::Path;

pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelKind {
    Gnn,
    Mlp,
    Sac,
}

impl fmt::Display for ModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ModelKind::Gnn => "gnn",
            ModelKind::Mlp => "mlp",
            ModelKind::Sac => "sac",
        })
    }
}

/// Provenance stored next to the weights.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Metadata {
    pub config_hash: String,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct NamedArray {
    name: String,
    shape: Vec<usize>,
    data: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Document {
    format_version: u32,
    kind: ModelKind,
    arch: serde_json::Value,
    metadata: Metadata,
    params: Vec<NamedArray>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Model {
    Gnn(GnnModel),
    Mlp(MlpModel),
    Sac(SacModel),
}

impl Model {
    pub fn kind(&self) -> ModelKind {
        match self {
            Model::Gnn(_) => ModelKind::Gnn,
            Model::Mlp(_) => ModelKind::Mlp,
            Model::Sac(_) => ModelKind::Sac,
        }
    }
}

fn to_arrays(store: &ParamStore) -> Vec<NamedArray> {
    store
        .iter()
        .map(|(name, t)| NamedArray { name: name.to_string(), shape: t.shape().to_vec(), data: t.data().to_vec() })
        .collect()
}

fn from_arrays(arrays: Vec<NamedArray>) -> Result<ParamStore> {
    let mut store = ParamStore::new();
    for a in arrays {
        let t = Tensor::new(a.shape, a.data).map_err(|e| Error::Checkpoint(format!("parameter {}: {e}", a.name)))?;
        store.add(a.name, t);
    }
    Ok(store)
}

fn arch_json<T: Serialize>(arch: &T) -> Result<serde_json::Value> {
    serde_json::to_value(arch).map_err(|e| Error::Checkpoint(e.to_string()))
}

fn arch_from<T: for<'de> Deserialize<'de>>(v: serde_json::Value) -> Result<T> {
    serde_json::from_value(v).map_err(|e| Error::Checkpoint(format!("architecture: {e}")))
}

pub fn to_json(model: &Model, meta: &Metadata) -> Result<String> {
    let (arch, params) = match model {
        Model::Gnn(m) => (arch_json(&m.arch)?, to_arrays(&m.params)),
        Model::Mlp(m) => (arch_json(&m.arch)?, to_arrays(&m.params)),
        Model::Sac(m) => (arch_json(&m.arch)?, to_arrays(&m.export())),
    };
    let doc = Document { format_version: FORMAT_VERSION, kind: model.kind(), arch, metadata: meta.clone(), params };
    serde_json::to_string_pretty(&doc).map_err(|e| Error::Checkpoint(e.to_string()))
}

pub fn from_json(text: &str) -> Result<(Model, Metadata)> {
    let raw: serde_json::Value = serde_json::from_str(text).map_err(|e| Error::Checkpoint(format!("corrupt checkpoint: {e}")))?;
    match raw.get("format_version").and_then(|v| v.as_u64()) {
        Some(v) if v == FORMAT_VERSION as u64 => {}
        Some(v) => {
            return Err(Error::Checkpoint(format!("format version {v} is not supported (expected {FORMAT_VERSION})")))
        }
        None => return Err(Error::Checkpoint("missing format_version".into())),
    }
    let doc: Document = serde_json::from_value(raw).map_err(|e| Error::Checkpoint(format!("corrupt checkpoint: {e}")))?;
    let params = from_arrays(doc.params)?;
    let layout = |e: Error| Error::Checkpoint(format!("parameters do not match the architecture: {e}"));
    let model = match doc.kind {
        ModelKind::Gnn => Model::Gnn(GnnModel::with_params(arch_from::<GnnArch>(doc.arch)?, params).map_err(layout)?),
        ModelKind::Mlp => Model::Mlp(MlpModel::with_params(arch_from::<MlpArch>(doc.arch)?, params).map_err(layout)?),
        ModelKind::Sac => Model::Sac(SacModel::import(arch_from::<SacArch>(doc.arch)?, &params)?),
    };
    Ok((model, doc.metadata))
}

pub fn save_model(path: impl AsRef<Path>, model: &Model, meta: &Metadata) -> Result<()> {
    std::fs::write(path, to_json(model, meta)?)?;
    Ok(())
}

pub fn load_model(path: impl AsRef<Path>) -> Result<(Model, Metadata)> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::Checkpoint(format!("cannot read checkpoint {}: {e}", path.display())))?;
    from_json(&text)
}

fn wrong_kind(expected: ModelKind, found: ModelKind) -> Error {
    Error::Checkpoint(format!("expected a {expected} checkpoint, found {found}"))
}

pub fn load_gnn(path: impl AsRef<Path>) -> Result<(GnnModel, Metadata)> {
    match load_model(path)? {
        (Model::Gnn(m), meta) => Ok((m, meta)),
        (other, _) => Err(wrong_kind(ModelKind::Gnn, other.kind())),
    }
}

pub fn load_mlp(path: impl AsRef<Path>) -> Result<(MlpModel, Metadata)> {
    match load_model(path)? {
        (Model::Mlp(m), meta) => Ok((m, meta)),
        (other, _) => Err(wrong_kind(ModelKind::Mlp, other.kind())),
    }
}

pub fn load_sac(path: impl AsRef<Path>) -> Result<(SacModel, Metadata)> {
    match load_model(path)? {
        (Model::Sac(m), meta) => Ok((m, meta)),
        (other, _) => Err(wrong_kind(ModelKind::Sac, other.kind())),
    }
}
