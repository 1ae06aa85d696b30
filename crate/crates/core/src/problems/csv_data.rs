use std::path::Path;

use crate::error::{Error, Result};

/// Labelled examples with `±1` labels; features stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub features: Vec<f64>,
    pub labels: Vec<f64>,
    pub dim: usize,
}

impl Dataset {
    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }
}

/// Reads `label,f1,f2,…` rows (label position given by `label_column`).
/// Labels `1` map to `+1`; `0` and `-1` map to `−1`. Rows are numbered from 1,
/// counting the header line when present.
pub fn load_csv(path: &Path, label_column: usize, header: bool) -> Result<Dataset> {
    let shown = path.display().to_string();
    let err = |row: usize, msg: String| Error::Data {
        path: shown.clone(),
        row,
        msg,
    };
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(header)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| err(0, e.to_string()))?;
    let offset = if header { 2 } else { 1 };
    let mut features = Vec::new();
    let mut labels = Vec::new();
    let mut width: Option<usize> = None;
    for (n, record) in reader.records().enumerate() {
        let row = n + offset;
        let record = record.map_err(|e| err(row, e.to_string()))?;
        if record.len() <= label_column {
            return Err(err(row, format!("no column {label_column}")));
        }
        match width {
            None => width = Some(record.len()),
            Some(w) if w != record.len() => {
                return Err(err(
                    row,
                    format!("expected {w} fields, found {}", record.len()),
                ))
            }
            _ => {}
        }
        for (j, cell) in record.iter().enumerate() {
            let v: f64 = cell
                .parse()
                .map_err(|_| err(row, format!("column {j}: `{cell}` is not a number")))?;
            if !v.is_finite() {
                return Err(err(row, format!("column {j}: non-finite value")));
            }
            if j == label_column {
                labels.push(match v {
                    1.0 => 1.0,
                    0.0 | -1.0 => -1.0,
                    _ => return Err(err(row, format!("label {v} is not one of 0, 1, -1"))),
                });
            } else {
                features.push(v);
            }
        }
    }
    let Some(width) = width else {
        return Err(err(offset, "no data rows".into()));
    };
    if width < 2 {
        return Err(err(offset, "need at least one feature column".into()));
    }
    Ok(Dataset {
        features,
        labels,
        dim: width - 1,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    fn fixture(text: &str) -> tempfile::NamedTempFile {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        f.write_all(text.as_bytes()).unwrap();
        f
    }

    #[test]
    fn three_rows() {
        let f = fixture("1,0.5,2\n0,1.5,-1\n-1,0,0\n");
        let d = load_csv(f.path(), 0, false).unwrap();
        assert_eq!(d.len(), 3);
        assert_eq!(d.dim, 2);
        assert_eq!(d.labels, vec![1.0, -1.0, -1.0]);
        assert_eq!(d.features, vec![0.5, 2.0, 1.5, -1.0, 0.0, 0.0]);
    }

    #[test]
    fn label_in_last_column_with_header() {
        let f = fixture("a,b,y\n0.5,2,1\n1.5,-1,0\n");
        let d = load_csv(f.path(), 2, true).unwrap();
        assert_eq!(d.labels, vec![1.0, -1.0]);
        assert_eq!(d.features, vec![0.5, 2.0, 1.5, -1.0]);
    }

    #[test]
    fn bad_cell_reports_row() {
        let f = fixture("1,0.5\n0,abc\n");
        match load_csv(f.path(), 0, false) {
            Err(Error::Data { row, .. }) => assert_eq!(row, 2),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn empty_file_is_an_error() {
        let f = fixture("");
        assert!(matches!(
            load_csv(f.path(), 0, false),
            Err(Error::Data { .. })
        ));
    }
}
