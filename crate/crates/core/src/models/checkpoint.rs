//! Trained-model directories: `manifest.json`, a flat `params.bin` of little-endian f64
//! values in parameter order, and a copy of the item vocabulary.

use std::fs;
use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{Model, ModelConfig, ModelKind};
use crate::artifact::{read_to_string, sha256_hex, write_dir_atomically, write_file};
use crate::data::io::{read_vocabulary, vocabulary_digest, vocabulary_text};
use crate::data::ItemVocabulary;
use crate::error::{Error, Result};

pub const MANIFEST_FILE: &str = "manifest.json";
pub const PARAMS_FILE: &str = "params.bin";
pub const VOCAB_FILE: &str = "vocab.tsv";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TensorEntry {
    pub name: String,
    pub shape: Vec<usize>,
    /// Offset into `params.bin`, in f64 values.
    pub offset: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CheckpointManifest {
    pub kind: ModelKind,
    pub config: ModelConfig,
    pub num_items: usize,
    pub epoch: usize,
    pub validation_ndcg100: Option<f64>,
    pub vocabulary_digest: String,
    pub params_digest: String,
    /// Training users with their own embedding row (pairwise model only).
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub train_users: Vec<usize>,
    pub tensors: Vec<TensorEntry>,
    /// Free-form run settings recorded by the caller.
    #[serde(default)]
    pub run: serde_json::Value,
}

fn params_blob(model: &Model) -> (Vec<u8>, Vec<TensorEntry>) {
    let store = model.store();
    let mut bytes = Vec::with_capacity(store.num_scalars() * 8);
    let mut entries = Vec::with_capacity(store.len());
    let mut offset = 0;
    for id in store.ids() {
        let t = store.get(id);
        entries.push(TensorEntry {
            name: store.name(id).to_string(),
            shape: t.shape().to_vec(),
            offset,
        });
        for v in t.data() {
            bytes.extend_from_slice(&v.to_le_bytes());
        }
        offset += t.len();
    }
    (bytes, entries)
}

pub fn save(
    out: &Path,
    model: &Model,
    vocabulary: &ItemVocabulary,
    epoch: usize,
    validation_ndcg100: Option<f64>,
    run: serde_json::Value,
) -> Result<CheckpointManifest> {
    save_with(out, model, vocabulary, epoch, validation_ndcg100, run, &[])
}

/// Like [`save`], also writing each `(file name, contents)` of `extra` into the same
/// directory before it appears.
#[allow(clippy::too_many_arguments)]
pub fn save_with(
    out: &Path,
    model: &Model,
    vocabulary: &ItemVocabulary,
    epoch: usize,
    validation_ndcg100: Option<f64>,
    run: serde_json::Value,
    extra: &[(&str, &[u8])],
) -> Result<CheckpointManifest> {
    if let Some((name, _)) = extra
        .iter()
        .find(|(n, _)| [MANIFEST_FILE, PARAMS_FILE, VOCAB_FILE].contains(n))
    {
        return Err(Error::contract(format!(
            "{name} is reserved in a checkpoint"
        )));
    }
    if vocabulary.len() != model.num_items() {
        return Err(Error::contract(format!(
            "vocabulary has {} items, model has {}",
            vocabulary.len(),
            model.num_items()
        )));
    }
    let (bytes, tensors) = params_blob(model);
    let manifest = CheckpointManifest {
        kind: model.kind(),
        config: model.config().clone(),
        num_items: model.num_items(),
        epoch,
        validation_ndcg100,
        vocabulary_digest: vocabulary_digest(vocabulary),
        params_digest: sha256_hex(&bytes),
        train_users: model.train_users().to_vec(),
        tensors,
        run,
    };
    write_dir_atomically(out, |dir| {
        write_file(&dir.join(PARAMS_FILE), &bytes)?;
        write_file(&dir.join(VOCAB_FILE), vocabulary_text(vocabulary))?;
        for (name, contents) in extra {
            write_file(&dir.join(name), contents)?;
        }
        let json = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
        write_file(&dir.join(MANIFEST_FILE), json + "\n")
    })?;
    Ok(manifest)
}

pub fn read_manifest(dir: &Path) -> Result<CheckpointManifest> {
    let path = dir.join(MANIFEST_FILE);
    serde_json::from_str(&read_to_string(&path)?).map_err(|e| Error::Format {
        path,
        message: e.to_string(),
    })
}

pub struct Checkpoint {
    pub model: Model,
    pub manifest: CheckpointManifest,
    pub vocabulary: ItemVocabulary,
}

pub fn load(dir: &Path) -> Result<Checkpoint> {
    let manifest = read_manifest(dir)?;
    let params_path = dir.join(PARAMS_FILE);
    let bad = |path: &Path, message: String| Error::Format {
        path: path.to_path_buf(),
        message,
    };
    let vocabulary = read_vocabulary(&dir.join(VOCAB_FILE))?;
    if vocabulary_digest(&vocabulary) != manifest.vocabulary_digest {
        return Err(bad(
            &dir.join(VOCAB_FILE),
            "vocabulary digest does not match manifest".into(),
        ));
    }
    let bytes = fs::read(&params_path).map_err(|e| Error::io(&params_path, e))?;
    if sha256_hex(&bytes) != manifest.params_digest {
        return Err(bad(
            &params_path,
            "parameter digest does not match manifest".into(),
        ));
    }
    if bytes.len() % 8 != 0 {
        return Err(bad(
            &params_path,
            format!("{} bytes is not a whole number of f64", bytes.len()),
        ));
    }
    let values: Vec<f64> = bytes
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("8-byte chunk")))
        .collect();

    // Build the architecture, then overwrite every tensor from the blob.
    let mut model = Model::build(
        manifest.kind,
        &manifest.config,
        manifest.num_items,
        manifest.train_users.clone(),
        &mut ChaCha8Rng::seed_from_u64(0),
    )?;
    let store = model.store_mut();
    if store.len() != manifest.tensors.len() {
        return Err(bad(
            &dir.join(MANIFEST_FILE),
            format!(
                "{} tensors listed, architecture has {}",
                manifest.tensors.len(),
                store.len()
            ),
        ));
    }
    for entry in &manifest.tensors {
        let id = store.id(&entry.name).ok_or_else(|| {
            bad(
                &dir.join(MANIFEST_FILE),
                format!("unknown tensor {:?}", entry.name),
            )
        })?;
        let tensor = store.get_mut(id);
        if tensor.shape() != entry.shape.as_slice() {
            return Err(bad(
                &dir.join(MANIFEST_FILE),
                format!(
                    "tensor {:?} has shape {:?}, expected {:?}",
                    entry.name,
                    entry.shape,
                    tensor.shape()
                ),
            ));
        }
        let end = entry.offset + tensor.len();
        let src = values.get(entry.offset..end).ok_or_else(|| {
            bad(
                &params_path,
                format!("tensor {:?} runs past the end", entry.name),
            )
        })?;
        tensor.data_mut().copy_from_slice(src);
    }
    Ok(Checkpoint {
        model,
        manifest,
        vocabulary,
    })
}
