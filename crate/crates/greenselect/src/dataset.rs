//! Strict loader for the digits CSV: one instance per line, 64 pixel
//! intensities in `0..=16` followed by the class label in `0..=9`.

use std::fs;
use std::path::{Path, PathBuf};

use greenselect_core::Dataset;

pub const DIGITS_FEATURES: usize = 64;
pub const DIGITS_CLASSES: usize = 10;
const MAX_PIXEL: u32 = 16;

/// Bundled export of the 1797-instance digits collection.
pub const BUNDLED_DIGITS: &str = concat!(env!("CARGO_MANIFEST_DIR"), "/data/digits.csv");

#[derive(Debug, thiserror::Error)]
pub enum DatasetError {
    #[error("cannot read {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },

    #[error("line {line}: expected {expected} comma-separated values, found {found}")]
    Columns { line: usize, expected: usize, found: usize },

    #[error("line {line}, column {column}: {value:?} is not a non-negative integer")]
    Parse { line: usize, column: usize, value: String },

    #[error("line {line}, column {column}: value {value} outside 0..={max}")]
    Range { line: usize, column: usize, value: u32, max: u32 },

    #[error("no data lines")]
    Empty,

    #[error(transparent)]
    Invalid(#[from] greenselect_core::Error),
}

pub fn load_digits_csv(path: impl AsRef<Path>) -> Result<Dataset, DatasetError> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|source| DatasetError::Io { path: path.to_path_buf(), source })?;
    parse_digits_csv(&text)
}

/// Parses CSV text. Blank lines are skipped; line numbers in errors are
/// 1-based positions in `text`.
pub fn parse_digits_csv(text: &str) -> Result<Dataset, DatasetError> {
    let mut features = Vec::new();
    let mut labels = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let raw = raw.trim();
        if raw.is_empty() {
            continue;
        }
        let fields: Vec<&str> = raw.split(',').collect();
        if fields.len() != DIGITS_FEATURES + 1 {
            return Err(DatasetError::Columns { line, expected: DIGITS_FEATURES + 1, found: fields.len() });
        }
        for (col, field) in fields.iter().enumerate() {
            let column = col + 1;
            let field = field.trim();
            let value: u32 = field
                .parse()
                .map_err(|_| DatasetError::Parse { line, column, value: field.to_string() })?;
            let max = if col < DIGITS_FEATURES { MAX_PIXEL } else { DIGITS_CLASSES as u32 - 1 };
            if value > max {
                return Err(DatasetError::Range { line, column, value, max });
            }
            if col < DIGITS_FEATURES {
                features.push(value as f64);
            } else {
                labels.push(value as usize);
            }
        }
    }
    if labels.is_empty() {
        return Err(DatasetError::Empty);
    }
    Ok(Dataset::from_flat(features, labels, DIGITS_FEATURES, DIGITS_CLASSES)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn line(pixel: u32, label: u32) -> String {
        let mut fields = vec![pixel.to_string(); DIGITS_FEATURES];
        fields.push(label.to_string());
        fields.join(",")
    }

    #[test]
    fn single_line() {
        let d = parse_digits_csv(&line(3, 7)).unwrap();
        assert_eq!((d.len(), d.feature_dim(), d.num_classes()), (1, 64, 10));
        assert_eq!(d.label(0), 7);
    }

    #[test]
    fn short_line_names_its_number() {
        let mut fields = vec!["0"; 64];
        fields[0] = "1";
        let text = format!("{}\n{}\n", line(0, 0), fields.join(","));
        match parse_digits_csv(&text) {
            Err(DatasetError::Columns { line: 2, found: 64, .. }) => {}
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn out_of_range_values() {
        assert!(matches!(parse_digits_csv(&line(17, 0)), Err(DatasetError::Range { line: 1, column: 1, .. })));
        assert!(matches!(parse_digits_csv(&line(0, 10)), Err(DatasetError::Range { column: 65, .. })));
        assert!(matches!(parse_digits_csv(&line(0, 0).replacen('0', "x", 1)), Err(DatasetError::Parse { .. })));
        assert!(matches!(parse_digits_csv("\n\n"), Err(DatasetError::Empty)));
    }

    #[test]
    fn missing_file() {
        assert!(matches!(load_digits_csv("/nonexistent/digits.csv"), Err(DatasetError::Io { .. })));
    }

    #[test]
    fn bundled_export_is_complete() {
        let d = load_digits_csv(BUNDLED_DIGITS).unwrap();
        assert_eq!(d.len(), 1797);
        assert!(d.class_counts().iter().all(|&c| c > 170));
    }
}
