//! Dataset ingestion and the two embedded example data sets.
//!
//! Two strict CSV layouts are accepted, distinguished by their header row:
//!
//! - frequency data: `x,frequency` with unique nonnegative integer values;
//! - censored data: `x,events,censored` with strictly increasing values.
//!
//! The embedded keys `computer-breaks` (128 weekly breakdown counts of a
//! DEC-20 machine) and `pain-relief` (100 physiotherapy patients, sessions
//! until relief, right-censored) load the bundled tables; anything else is
//! treated as a file path.

use crate::error::{Error, Result};
use crate::estimation::{CensoredRow, CensoredSample, Dataset, UncensoredSample};

use sha2::{Digest, Sha256};

pub const COMPUTER_BREAKS_KEY: &str = "computer-breaks";
pub const PAIN_RELIEF_KEY: &str = "pain-relief";

const COMPUTER_BREAKS_CSV: &str = include_str!("../data/computer_breaks.csv");
const PAIN_RELIEF_CSV: &str = include_str!("../data/pain_relief.csv");

/// Recognized file layouts.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DatasetFormat {
    FrequencyCsv,
    CensoredCsv,
}

/// The weekly breakdown counts of a DEC-20 computer over 128 weeks.
pub fn computer_breaks() -> UncensoredSample {
    match parse_dataset(COMPUTER_BREAKS_CSV).expect("embedded data parses") {
        Dataset::Uncensored(s) => s,
        Dataset::Censored(_) => unreachable!("embedded frequency data"),
    }
}

/// Physiotherapy sessions until chronic back-pain relief for 100 patients,
/// shifted so the first session is 0, with two right-censored subjects.
pub fn pain_relief() -> CensoredSample {
    match parse_dataset(PAIN_RELIEF_CSV).expect("embedded data parses") {
        Dataset::Censored(s) => s,
        Dataset::Uncensored(_) => unreachable!("embedded censored data"),
    }
}

/// Raw bytes of an embedded dataset, if the key names one.
pub fn embedded_csv(key: &str) -> Option<&'static str> {
    match key {
        COMPUTER_BREAKS_KEY => Some(COMPUTER_BREAKS_CSV),
        PAIN_RELIEF_KEY => Some(PAIN_RELIEF_CSV),
        _ => None,
    }
}

/// SHA-256 hex digest of the dataset content behind a key or path.
pub fn content_digest(text: &str) -> String {
    let mut hasher = Sha256::new();
    hasher.update(text.as_bytes());
    format!("{:x}", hasher.finalize())
}

/// Load a dataset from an embedded key or a file path.
pub fn ingest(path_or_key: &str) -> Result<Dataset> {
    if let Some(text) = embedded_csv(path_or_key) {
        return parse_dataset(text);
    }
    let text = std::fs::read_to_string(path_or_key)?;
    parse_dataset(&text)
}

/// Parse CSV text in either accepted layout, sniffed from the header row.
pub fn parse_dataset(text: &str) -> Result<Dataset> {
    let mut lines = text.lines().enumerate();
    let (_, header) = lines.next().ok_or_else(|| Error::Parse {
        line: 1,
        message: "file is empty".to_string(),
    })?;
    let format = match header.trim() {
        "x,frequency" => DatasetFormat::FrequencyCsv,
        "x,events,censored" => DatasetFormat::CensoredCsv,
        other => {
            return Err(Error::Parse {
                line: 1,
                message: format!(
                    "unrecognized header {other:?}; expected \"x,frequency\" or \
                     \"x,events,censored\""
                ),
            })
        }
    };

    match format {
        DatasetFormat::FrequencyCsv => {
            let mut pairs = Vec::new();
            for (idx, line) in lines {
                if line.trim().is_empty() {
                    continue;
                }
                let [x, freq] = split_fields::<2>(idx + 1, line)?;
                pairs.push((x, freq));
            }
            if pairs.is_empty() {
                return Err(Error::Parse { line: 1, message: "no data rows".to_string() });
            }
            Ok(Dataset::Uncensored(UncensoredSample::from_counts(pairs)?))
        }
        DatasetFormat::CensoredCsv => {
            let mut rows = Vec::new();
            for (idx, line) in lines {
                if line.trim().is_empty() {
                    continue;
                }
                let [value, events, censored] = split_fields::<3>(idx + 1, line)?;
                rows.push(CensoredRow { value, events, censored });
            }
            Ok(Dataset::Censored(CensoredSample::new(rows)?))
        }
    }
}

fn split_fields<const N: usize>(line_no: usize, line: &str) -> Result<[u64; N]> {
    let mut out = [0u64; N];
    let fields: Vec<&str> = line.split(',').collect();
    if fields.len() != N {
        return Err(Error::Parse {
            line: line_no,
            message: format!("expected {N} comma-separated fields, got {}", fields.len()),
        });
    }
    for (slot, field) in out.iter_mut().zip(fields) {
        *slot = field.trim().parse().map_err(|e| Error::Parse {
            line: line_no,
            message: format!("bad integer {field:?}: {e}"),
        })?;
    }
    Ok(out)
}
