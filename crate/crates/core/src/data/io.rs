//! On-disk split directory.
//!
//! ```text
//! train.tsv        user_index<TAB>i1,i2,...,iN
//! validation.tsv   same layout; full time-ordered history, re-folded on load
//! test.tsv
//! vocab.tsv        raw_id<TAB>dense_index
//! manifest.json    SplitManifest
//! ```

use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{DatasetSplit, HeldOutUser, ItemVocabulary, UserSequence};
use crate::artifact::{read_to_string, sha256_hex, write_dir_atomically, write_file};
use crate::error::{Error, Result};

pub const TRAIN_FILE: &str = "train.tsv";
pub const VALIDATION_FILE: &str = "validation.tsv";
pub const TEST_FILE: &str = "test.tsv";
pub const VOCAB_FILE: &str = "vocab.tsv";
pub const MANIFEST_FILE: &str = "manifest.json";

/// Summary counts of a prepared dataset.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SplitStats {
    pub users: usize,
    pub items: usize,
    pub interactions: usize,
    pub avg_length: f64,
    pub train_users: usize,
    pub validation_users: usize,
    pub test_users: usize,
}

impl SplitStats {
    pub fn of(split: &DatasetSplit) -> Self {
        let held = split.validation.iter().chain(&split.test);
        let interactions: usize = split.train.iter().map(UserSequence::len).sum::<usize>()
            + held
                .map(|h| h.fold_in.len() + h.fold_out.len())
                .sum::<usize>();
        let users = split.train.len() + split.validation.len() + split.test.len();
        SplitStats {
            users,
            items: split.num_items(),
            interactions,
            avg_length: if users == 0 {
                0.0
            } else {
                interactions as f64 / users as f64
            },
            train_users: split.train.len(),
            validation_users: split.validation.len(),
            test_users: split.test.len(),
        }
    }
}

impl std::fmt::Display for SplitStats {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        writeln!(f, "users          {}", self.users)?;
        writeln!(f, "items          {}", self.items)?;
        writeln!(f, "interactions   {}", self.interactions)?;
        writeln!(f, "avg length     {:.2}", self.avg_length)?;
        writeln!(f, "train users    {}", self.train_users)?;
        writeln!(
            f,
            "heldout users  {} validation / {} test",
            self.validation_users, self.test_users
        )
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SplitManifest {
    pub fold_ratio: f64,
    pub seed: u64,
    pub stats: SplitStats,
    pub vocabulary_digest: String,
    pub input_digest: Option<String>,
    /// Caller-supplied configuration, stored verbatim.
    pub config: serde_json::Value,
}

fn sequence_lines<'a>(rows: impl Iterator<Item = (usize, &'a [usize], &'a [usize])>) -> String {
    let mut out = String::new();
    for (u, head, tail) in rows {
        let _ = write!(out, "{u}\t");
        for (k, i) in head.iter().chain(tail).enumerate() {
            if k > 0 {
                out.push(',');
            }
            let _ = write!(out, "{i}");
        }
        out.push('\n');
    }
    out
}

pub fn vocabulary_text(vocab: &ItemVocabulary) -> String {
    let mut out = String::new();
    for (i, raw) in vocab.iter() {
        let _ = writeln!(out, "{raw}\t{i}");
    }
    out
}

pub fn vocabulary_digest(vocab: &ItemVocabulary) -> String {
    sha256_hex(vocabulary_text(vocab).as_bytes())
}

/// Writes the split directory; `out` appears only once every file is complete.
pub fn write_split(
    out: &Path,
    split: &DatasetSplit,
    fold_ratio: f64,
    seed: u64,
    input_digest: Option<String>,
    config: serde_json::Value,
) -> Result<SplitManifest> {
    let manifest = SplitManifest {
        fold_ratio,
        seed,
        stats: SplitStats::of(split),
        vocabulary_digest: vocabulary_digest(&split.vocabulary),
        input_digest,
        config,
    };
    let held = |users: &[HeldOutUser]| {
        sequence_lines(
            users
                .iter()
                .map(|h| (h.user_index, h.fold_in.as_slice(), h.fold_out.as_slice())),
        )
    };
    write_dir_atomically(out, |dir| {
        write_file(
            &dir.join(TRAIN_FILE),
            sequence_lines(
                split
                    .train
                    .iter()
                    .map(|s| (s.user_index, s.items.as_slice(), &[][..])),
            ),
        )?;
        write_file(&dir.join(VALIDATION_FILE), held(&split.validation))?;
        write_file(&dir.join(TEST_FILE), held(&split.test))?;
        write_file(&dir.join(VOCAB_FILE), vocabulary_text(&split.vocabulary))?;
        let json = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
        write_file(&dir.join(MANIFEST_FILE), json + "\n")
    })?;
    Ok(manifest)
}

fn parse_sequences(path: &Path) -> Result<Vec<UserSequence>> {
    let text = read_to_string(path)?;
    let bad = |line: usize, message: &str| Error::Format {
        path: path.to_path_buf(),
        message: format!("line {line}: {message}"),
    };
    let mut out = Vec::new();
    for (n, line) in text.lines().enumerate() {
        if line.is_empty() {
            continue;
        }
        let (u, items) = line
            .split_once('\t')
            .ok_or_else(|| bad(n + 1, "missing tab"))?;
        let user_index = u.parse().map_err(|_| bad(n + 1, "bad user index"))?;
        let items = if items.is_empty() {
            Vec::new()
        } else {
            items
                .split(',')
                .map(|i| i.parse().map_err(|_| bad(n + 1, "bad item index")))
                .collect::<Result<Vec<usize>>>()?
        };
        out.push(UserSequence::new(user_index, items));
    }
    Ok(out)
}

pub fn read_vocabulary(path: &Path) -> Result<ItemVocabulary> {
    let text = read_to_string(path)?;
    let mut ids = Vec::new();
    for (n, line) in text.lines().enumerate() {
        let bad = || Error::Format {
            path: path.to_path_buf(),
            message: format!("line {}: expected raw_id<TAB>{}", n + 1, ids.len()),
        };
        let (raw, idx) = line.rsplit_once('\t').ok_or_else(bad)?;
        if idx.parse::<usize>().ok() != Some(ids.len()) {
            return Err(bad());
        }
        ids.push(raw.to_string());
    }
    ItemVocabulary::from_raw_ids(ids)
}

pub fn read_manifest(dir: &Path) -> Result<SplitManifest> {
    let path = dir.join(MANIFEST_FILE);
    let text = read_to_string(&path)?;
    serde_json::from_str(&text).map_err(|e| Error::Format {
        path,
        message: e.to_string(),
    })
}

pub fn read_split(dir: &Path) -> Result<(DatasetSplit, SplitManifest)> {
    let manifest = read_manifest(dir)?;
    let vocabulary = read_vocabulary(&dir.join(VOCAB_FILE))?;
    if vocabulary_digest(&vocabulary) != manifest.vocabulary_digest {
        return Err(Error::Format {
            path: dir.join(VOCAB_FILE),
            message: "vocabulary digest does not match manifest".into(),
        });
    }
    let fold = |name: &str| -> Result<Vec<HeldOutUser>> {
        parse_sequences(&dir.join(name))?
            .iter()
            .map(|s| HeldOutUser::from_sequence(s, manifest.fold_ratio))
            .collect()
    };
    let split = DatasetSplit {
        train: parse_sequences(&dir.join(TRAIN_FILE))?,
        validation: fold(VALIDATION_FILE)?,
        test: fold(TEST_FILE)?,
        vocabulary,
    };
    split.validate()?;
    Ok((split, manifest))
}
