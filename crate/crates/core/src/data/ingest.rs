use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// One explicit rating event.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InteractionRecord {
    pub user: String,
    pub item: String,
    pub rating: f64,
    pub timestamp: u64,
}

/// A rating event reduced to a consumption signal.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Interaction {
    pub user: String,
    pub item: String,
    pub timestamp: u64,
}

/// Layout of a delimiter-separated `user, item, rating, timestamp` file.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RatingsFormat {
    pub delimiter: String,
    pub min_rating: f64,
    pub max_rating: f64,
    pub has_header: bool,
}

impl Default for RatingsFormat {
    fn default() -> Self {
        RatingsFormat {
            delimiter: ",".into(),
            min_rating: 1.0,
            max_rating: 5.0,
            has_header: false,
        }
    }
}

impl RatingsFormat {
    /// MovieLens `ratings.dat` layout (`::`-separated).
    pub fn movielens() -> Self {
        RatingsFormat {
            delimiter: "::".into(),
            ..Self::default()
        }
    }
}

pub fn ingest(path: &Path, format: &RatingsFormat) -> Result<Vec<InteractionRecord>> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_ratings(&text, format)
}

pub fn parse_ratings(text: &str, format: &RatingsFormat) -> Result<Vec<InteractionRecord>> {
    if format.delimiter.is_empty() {
        return Err(Error::Config("empty delimiter".into()));
    }
    let mut out = Vec::new();
    let skip = usize::from(format.has_header);
    for (n, raw) in text.lines().enumerate().skip(skip) {
        let line_no = n + 1;
        let line = raw.trim();
        if line.is_empty() {
            continue;
        }
        let parse_err = |message: String| Error::Parse {
            line: line_no,
            message,
        };
        let fields: Vec<&str> = line
            .split(format.delimiter.as_str())
            .map(str::trim)
            .collect();
        if fields.len() != 4 {
            return Err(parse_err(format!(
                "expected 4 fields, found {}",
                fields.len()
            )));
        }
        if fields[0].is_empty() || fields[1].is_empty() {
            return Err(parse_err("empty user or item id".into()));
        }
        let rating: f64 = fields[2]
            .parse()
            .map_err(|_| parse_err(format!("invalid rating {:?}", fields[2])))?;
        if !(format.min_rating..=format.max_rating).contains(&rating) {
            return Err(parse_err(format!(
                "rating {rating} outside [{}, {}]",
                format.min_rating, format.max_rating
            )));
        }
        let timestamp: u64 = fields[3]
            .parse()
            .map_err(|_| parse_err(format!("invalid timestamp {:?}", fields[3])))?;
        out.push(InteractionRecord {
            user: fields[0].to_string(),
            item: fields[1].to_string(),
            rating,
            timestamp,
        });
    }
    Ok(out)
}

/// Keeps records rated strictly above `threshold`.
pub fn binarize(records: &[InteractionRecord], threshold: f64) -> Vec<Interaction> {
    records
        .iter()
        .filter(|r| r.rating > threshold)
        .map(|r| Interaction {
            user: r.user.clone(),
            item: r.item.clone(),
            timestamp: r.timestamp,
        })
        .collect()
}
