//! CSV ingestion.

use std::path::Path;

use kernorm_core::Sample;

use crate::error::{HarnessError, Result};

#[derive(Debug, Clone, Default, PartialEq)]
pub struct CsvOptions {
    /// Header name of the label column, or its 0-based index when the file has no header.
    pub label_column: Option<String>,
    /// Rows whose label is not listed are dropped. Needs `label_column`.
    pub keep_labels: Option<Vec<String>>,
    /// Multiplies every feature.
    pub scale: Option<f64>,
}

pub fn load_csv(path: &Path, options: &CsvOptions) -> Result<Sample> {
    let text = std::fs::read_to_string(path).map_err(|source| HarnessError::Read {
        path: path.to_path_buf(),
        source,
    })?;
    parse_csv(&text, path, options)
}

fn same_label(a: &str, b: &str) -> bool {
    a == b || matches!((a.parse::<f64>(), b.parse::<f64>()), (Ok(x), Ok(y)) if x == y)
}

/// Parses CSV text; `path` only labels error messages. Rows and columns in
/// errors are 1-based positions in the file.
pub fn parse_csv(text: &str, path: &Path, options: &CsvOptions) -> Result<Sample> {
    let ingest = |row: usize, column: usize, message: String| HarnessError::Ingest {
        path: path.to_path_buf(),
        row,
        column,
        message,
    };
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let mut records = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| {
            let row = e.position().map_or(0, |p| p.line() as usize);
            ingest(row, 1, e.to_string())
        })?;
        let line = record.position().map_or(0, |p| p.line() as usize);
        if record.iter().all(str::is_empty) {
            continue;
        }
        records.push((line, record));
    }
    let mut records = records.into_iter().peekable();

    let header: Option<Vec<String>> = match records.peek() {
        Some((_, first)) if first.iter().any(|c| c.parse::<f64>().is_err()) => {
            let h = first.iter().map(String::from).collect();
            records.next();
            Some(h)
        }
        _ => None,
    };

    let label_index = match &options.label_column {
        None => None,
        Some(name) => {
            let by_name = header.as_ref().and_then(|h| h.iter().position(|c| c == name));
            match by_name.or_else(|| name.parse::<usize>().ok()) {
                Some(i) => Some(i),
                None => return Err(HarnessError::Config(format!("label column '{name}' not found"))),
            }
        }
    };
    if options.keep_labels.is_some() && label_index.is_none() {
        return Err(HarnessError::Config("keep_labels requires label_column".into()));
    }
    let scale = options.scale.unwrap_or(1.0);
    if !scale.is_finite() {
        return Err(HarnessError::Config(format!("scale must be finite, got {scale}")));
    }

    let mut width = header.as_ref().map(Vec::len);
    let mut data = Vec::new();
    let mut rows = 0usize;
    for (line_no, cells) in records {
        match width {
            Some(w) if w != cells.len() => {
                return Err(ingest(
                    line_no,
                    cells.len().min(w) + 1,
                    format!("expected {w} columns, found {}", cells.len()),
                ))
            }
            None => width = Some(cells.len()),
            _ => {}
        }
        if let Some(li) = label_index {
            if li >= cells.len() {
                return Err(HarnessError::Config(format!(
                    "label column {li} is out of range for {} columns",
                    cells.len()
                )));
            }
            if let Some(keep) = &options.keep_labels {
                if !keep.iter().any(|k| same_label(k, &cells[li])) {
                    continue;
                }
            }
        }
        for (c, cell) in cells.iter().enumerate() {
            if Some(c) == label_index {
                continue;
            }
            let v: f64 = cell
                .parse()
                .map_err(|_| ingest(line_no, c + 1, format!("'{cell}' is not a number")))?;
            if !v.is_finite() {
                return Err(ingest(line_no, c + 1, format!("'{cell}' is not finite")));
            }
            data.push(v * scale);
        }
        rows += 1;
    }
    let d = width.unwrap_or(0) - usize::from(label_index.is_some());
    if rows == 0 || d == 0 {
        return Err(ingest(1, 1, "no data rows".into()));
    }
    Ok(Sample::new(rows, d, data)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(text: &str, options: &CsvOptions) -> Result<Sample> {
        parse_csv(text, Path::new("mem.csv"), options)
    }

    #[test]
    fn plain_matrix() {
        let s = parse("1,0\n0,1\n1,1\n", &CsvOptions::default()).unwrap();
        assert_eq!((s.n(), s.dim()), (3, 2));
        assert_eq!(s.row(2), &[1.0, 1.0]);
    }

    #[test]
    fn header_label_filter_and_scale() {
        let text = "digit,a,b\n2,1,2\n5,3,4\n6,5,6\n3,7,8\n";
        let options = CsvOptions {
            label_column: Some("digit".into()),
            keep_labels: Some(vec!["2".into(), "3".into(), "6".into()]),
            scale: Some(0.5),
        };
        let s = parse(text, &options).unwrap();
        assert_eq!((s.n(), s.dim()), (3, 2));
        assert_eq!(s.row(0), &[0.5, 1.0]);
        assert_eq!(s.row(2), &[3.5, 4.0]);
    }

    #[test]
    fn positions_in_errors() {
        match parse("1,2\n3,x\n", &CsvOptions::default()).unwrap_err() {
            HarnessError::Ingest { row, column, .. } => assert_eq!((row, column), (2, 2)),
            e => panic!("{e}"),
        }
        match parse("a,b\n1,2\n3\n", &CsvOptions::default()).unwrap_err() {
            HarnessError::Ingest { row, .. } => assert_eq!(row, 3),
            e => panic!("{e}"),
        }
        assert_eq!(parse("", &CsvOptions::default()).unwrap_err().exit_code(), 3);
    }

    #[test]
    fn quoted_fields_and_blank_lines() {
        let text = "\"a\",\"b, c\",label\n\n1, 2,\"x\"\r\n3,4,y\n";
        let options = CsvOptions {
            label_column: Some("label".into()),
            keep_labels: Some(vec!["x".into()]),
            ..CsvOptions::default()
        };
        let s = parse(text, &options).unwrap();
        assert_eq!((s.n(), s.dim()), (1, 2));
        assert_eq!(s.row(0), &[1.0, 2.0]);
    }

    #[test]
    fn unknown_label_column() {
        let options = CsvOptions {
            label_column: Some("y".into()),
            ..CsvOptions::default()
        };
        assert_eq!(parse("a,b\n1,2\n", &options).unwrap_err().exit_code(), 2);
    }
}
