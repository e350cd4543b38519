use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::TaskError;

/// Reads a line-delimited JSON dataset. Blank lines are skipped; every other
/// line must be a JSON object. Returned line numbers are 1-based.
pub fn load_records(path: &Path) -> Result<Vec<(usize, serde_json::Value)>, TaskError> {
    let text = std::fs::read_to_string(path).map_err(|e| TaskError::Io {
        path: path.to_path_buf(),
        message: e.to_string(),
    })?;
    let mut records = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line_no = i + 1;
        if line.trim().is_empty() {
            continue;
        }
        let value: serde_json::Value =
            serde_json::from_str(line).map_err(|e| TaskError::Malformed {
                path: path.to_path_buf(),
                line: line_no,
                message: e.to_string(),
            })?;
        if !value.is_object() {
            return Err(TaskError::Malformed {
                path: path.to_path_buf(),
                line: line_no,
                message: "record must be a JSON object".to_string(),
            });
        }
        records.push((line_no, value));
    }
    if records.is_empty() {
        return Err(TaskError::Empty(path.to_path_buf()));
    }
    Ok(records)
}

/// Seeded shuffle of `0..len`, truncated to `samples` entries.
pub fn select_indices(len: usize, samples: usize, seed: u64) -> Vec<usize> {
    let mut indices: Vec<usize> = (0..len).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    indices.shuffle(&mut rng);
    indices.truncate(samples.min(len));
    indices
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    #[test]
    fn selection_is_seeded() {
        assert_eq!(select_indices(1000, 64, 7), select_indices(1000, 64, 7));
        assert_ne!(select_indices(1000, 64, 7), select_indices(1000, 64, 8));
        let picked = select_indices(1000, 64, 7);
        let mut uniq = picked.clone();
        uniq.sort();
        uniq.dedup();
        assert_eq!(uniq.len(), 64);
    }

    #[test]
    fn fewer_records_than_samples() {
        assert_eq!(select_indices(3, 10, 1).len(), 3);
    }

    #[test]
    fn malformed_line_is_reported() {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        writeln!(f, "{{\"a\": 1}}").unwrap();
        writeln!(f).unwrap();
        writeln!(f, "{{broken").unwrap();
        match load_records(f.path()) {
            Err(TaskError::Malformed { line, .. }) => assert_eq!(line, 3),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn empty_and_missing() {
        let f = tempfile::NamedTempFile::new().unwrap();
        assert!(matches!(load_records(f.path()), Err(TaskError::Empty(_))));
        assert!(matches!(
            load_records(Path::new("/nonexistent/file.jsonl")),
            Err(TaskError::Io { .. })
        ));
    }
}
