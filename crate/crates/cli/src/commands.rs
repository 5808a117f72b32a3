use std::collections::HashSet;
use std::fmt::Write as _;
use std::io::Write;
use std::path::Path;

use serde_json::json;

use seqvae::artifact::{file_digest, sha256_hex, write_file_atomically};
use seqvae::data::io::{read_split, write_split, SplitStats, MANIFEST_FILE};
use seqvae::data::{ingest, prepare, SplitKind};
use seqvae::eval::{
    buckets_csv, by_history_length, evaluate, rank_by_scores, EvalReport, Metric, PopBaseline,
};
use seqvae::models::checkpoint::{self, save_with};
use seqvae::models::{train, EpochStats, ModelKind};
use seqvae::{Error, Result};

use crate::config::RunConfig;

pub const CURVE_FILE: &str = "curve.csv";

fn emit(out: &mut dyn Write, text: &str) -> Result<()> {
    out.write_all(text.as_bytes()).map_err(|source| Error::Io {
        path: "<stdout>".into(),
        source,
    })
}

fn path_string(p: &Path) -> String {
    p.display().to_string()
}

pub fn cmd_prepare(
    input: &Path,
    out_dir: &Path,
    config: &RunConfig,
    out: &mut dyn Write,
) -> Result<SplitStats> {
    let records = ingest(input, &config.format())?;
    let split = prepare(&records, &config.pipeline())?;
    let run = json!({
        "command": "prepare",
        "input": path_string(input),
        "config": config.to_json(),
    });
    let manifest = write_split(
        out_dir,
        &split,
        config.fold_ratio,
        config.seed(),
        Some(file_digest(input)?),
        run,
    )?;
    emit(out, &manifest.stats.to_string())?;
    Ok(manifest.stats)
}

/// `epoch,train_loss,val_ndcg100,seconds`; an empty validation score means the split
/// has no validation users.
pub fn curve_csv(curve: &[EpochStats]) -> String {
    let mut text = String::from("epoch,train_loss,val_ndcg100,seconds\n");
    for s in curve {
        let val = s.val_ndcg100.map(|v| v.to_string()).unwrap_or_default();
        let _ = writeln!(text, "{},{},{},{}", s.epoch, s.train_loss, val, s.seconds);
    }
    text
}

pub fn cmd_train(
    split_dir: &Path,
    out_dir: &Path,
    kind: ModelKind,
    config: &RunConfig,
    out: &mut dyn Write,
) -> Result<()> {
    let (split, split_manifest) = read_split(split_dir)?;
    let mut progress = Ok(());
    let outcome = train(kind, &split, &config.hyper, |s| {
        let val = s
            .val_ndcg100
            .map(|v| format!("{v:.4}"))
            .unwrap_or_else(|| "-".into());
        let line = format!(
            "epoch {:>3}  loss {:.4}  val NDCG@100 {val}  ({:.1}s)\n",
            s.epoch, s.train_loss, s.seconds
        );
        if progress.is_ok() {
            progress = emit(out, &line);
        }
    })?;
    progress?;

    let run = json!({
        "command": "train",
        "model": kind,
        "split": path_string(split_dir),
        "split_manifest_digest": file_digest(&split_dir.join(MANIFEST_FILE))?,
        "input_digest": split_manifest.input_digest,
        "config": config.to_json(),
    });
    let curve = curve_csv(&outcome.curve);
    save_with(
        out_dir,
        &outcome.model,
        &split.vocabulary,
        outcome.best_epoch,
        outcome.best_val_ndcg100,
        run,
        &[(CURVE_FILE, curve.as_bytes())],
    )?;
    emit(
        out,
        &format!(
            "kept epoch {} -> {}\n",
            outcome.best_epoch,
            out_dir.display()
        ),
    )
}

/// Where the ranked lists come from.
pub enum Source<'a> {
    Checkpoint(&'a Path),
    Pop,
}

pub struct EvalRequest<'a> {
    pub split_dir: &'a Path,
    pub source: Source<'a>,
    pub which: SplitKind,
    pub by_history_length: Option<&'a Path>,
    pub report_path: Option<&'a Path>,
}

pub fn cmd_eval(req: &EvalRequest, config: &RunConfig, out: &mut dyn Write) -> Result<EvalReport> {
    let (split, split_manifest) = read_split(req.split_dir)?;
    let users = split.held_out(req.which);
    let bucket_key = Metric::Ndcg.key(100);
    if req.by_history_length.is_some() && !config.cutoffs.contains(&100) {
        return Err(Error::Config(
            "--by-history-length needs 100 among the cutoffs".into(),
        ));
    }
    let opts = config.eval_options(req.by_history_length.is_some());

    let mut report = match req.source {
        Source::Checkpoint(dir) => {
            let ck = checkpoint::load(dir)?;
            if ck.manifest.vocabulary_digest != split_manifest.vocabulary_digest {
                return Err(Error::Config(format!(
                    "checkpoint catalog ({} items) does not match the split catalog ({} items)",
                    ck.manifest.num_items,
                    split.num_items()
                )));
            }
            let mut r = evaluate(&ck.model, users, &opts)?;
            r.config_digest = file_digest(&dir.join(checkpoint::MANIFEST_FILE))?;
            r
        }
        Source::Pop => {
            let pop = PopBaseline::fit(&split.train, split.num_items());
            let mut r = evaluate(&pop, users, &opts)?;
            let identity = json!({ "model": "pop", "split_manifest": file_digest(&req.split_dir.join(MANIFEST_FILE))? });
            r.config_digest = sha256_hex(identity.to_string().as_bytes());
            r
        }
    };

    if let Some(path) = req.by_history_length {
        let rows = by_history_length(&report, &bucket_key)?;
        write_file_atomically(path, buckets_csv(&rows, &bucket_key))?;
    }
    report.per_user = None;
    let text = report.to_json();
    if let Some(path) = req.report_path {
        write_file_atomically(path, &text)?;
    }
    emit(out, &text)?;
    Ok(report)
}

/// Top `top_n` raw item ids with scores, best first, never repeating the history.
pub fn cmd_recommend(
    checkpoint_dir: &Path,
    history: &[String],
    top_n: usize,
    out: &mut dyn Write,
) -> Result<Vec<(String, f64)>> {
    let ck = checkpoint::load(checkpoint_dir)?;
    let indices = history
        .iter()
        .map(|id| {
            ck.vocabulary
                .index_of(id)
                .ok_or_else(|| Error::UnknownItem(id.clone()))
        })
        .collect::<Result<Vec<usize>>>()?;
    let exclude: HashSet<usize> = indices.iter().copied().collect();
    let scores = ck.model.scores(&indices)?;
    let picks: Vec<(String, f64)> = rank_by_scores(&scores, &exclude)
        .into_iter()
        .take(top_n)
        .map(|i| {
            (
                ck.vocabulary
                    .raw_id(i)
                    .expect("index in catalog")
                    .to_string(),
                scores[i],
            )
        })
        .collect();
    let mut text = String::new();
    for (id, score) in &picks {
        let _ = writeln!(text, "{id}\t{score}");
    }
    emit(out, &text)?;
    Ok(picks)
}
