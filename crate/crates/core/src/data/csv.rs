use std::path::Path;

use super::{Dataset, Role, Standardizer};
use crate::error::{Error, Result};
use crate::model::Sample;

/// Which column holds the class label.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum LabelColumn {
    Index(usize),
    /// Requires a header row.
    Name(String),
}

impl std::str::FromStr for LabelColumn {
    type Err = std::convert::Infallible;

    /// Digits select a column index, anything else a header name.
    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        Ok(match s.parse::<usize>() {
            Ok(i) => LabelColumn::Index(i),
            Err(_) => LabelColumn::Name(s.to_string()),
        })
    }
}

fn parse_err(line: u64, message: impl Into<String>) -> Error {
    Error::Parse {
        line: line as usize,
        message: message.into(),
    }
}

/// Reads a comma-separated numeric table. A first line containing any
/// non-numeric cell is taken as the header. With `normalize`, features are
/// standardized with the file's own per-column mean and standard deviation.
pub fn load_csv(path: impl AsRef<Path>, label: &LabelColumn, normalize: bool) -> Result<Dataset> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut data = parse_csv(&text, label)?;
    if normalize {
        Standardizer::fit(&data).apply(&mut data)?;
    }
    Ok(data)
}

pub(crate) fn parse_csv(text: &str, label: &LabelColumn) -> Result<Dataset> {
    let mut reader = ::csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(::csv::Trim::All)
        .from_reader(text.as_bytes());

    let mut header: Option<Vec<String>> = None;
    let mut width: Option<usize> = None;
    let mut label_idx: Option<usize> = None;
    let mut samples = Vec::new();

    for (row, record) in reader.records().enumerate() {
        let record = record.map_err(|e| {
            let line = e.position().map(|p| p.line()).unwrap_or(0);
            parse_err(line, e.to_string())
        })?;
        let line = record.position().map(|p| p.line()).unwrap_or(row as u64 + 1);
        if record.iter().all(str::is_empty) {
            continue;
        }
        if row == 0 && record.iter().any(|c| c.parse::<f64>().is_err()) {
            header = Some(record.iter().map(str::to_string).collect());
            width = Some(record.len());
            continue;
        }
        let w = *width.get_or_insert(record.len());
        if record.len() != w {
            return Err(parse_err(line, format!("expected {w} columns, found {}", record.len())));
        }
        let li = match label_idx {
            Some(i) => i,
            None => {
                let i = resolve_label(label, header.as_deref(), w).map_err(|m| parse_err(line, m))?;
                label_idx = Some(i);
                i
            }
        };
        let mut x = Vec::with_capacity(w - 1);
        let mut class = 0;
        for (j, cell) in record.iter().enumerate() {
            let v: f64 = cell
                .parse()
                .map_err(|_| parse_err(line, format!("column {j}: `{cell}` is not a number")))?;
            if !v.is_finite() {
                return Err(parse_err(line, format!("column {j}: non-finite value")));
            }
            if j == li {
                if v < 0.0 || v.fract() != 0.0 {
                    return Err(parse_err(line, format!("label `{cell}` is not a class index")));
                }
                class = v as usize;
            } else {
                x.push(v);
            }
        }
        samples.push(Sample::labeled(x, class));
    }

    if samples.is_empty() {
        return Err(parse_err(1, "no data rows"));
    }
    Dataset::new(samples, Role::Train)
}

fn resolve_label(label: &LabelColumn, header: Option<&[String]>, width: usize) -> std::result::Result<usize, String> {
    let idx = match label {
        LabelColumn::Index(i) => *i,
        LabelColumn::Name(name) => header
            .ok_or_else(|| format!("label column `{name}` given by name but the file has no header"))?
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| format!("missing label column `{name}`"))?,
    };
    if idx >= width {
        return Err(format!("label column {idx} out of range for {width} columns"));
    }
    Ok(idx)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::Target;

    #[test]
    fn toy_file_with_header() {
        let d = parse_csv("a,b,label\n1,2,0\n3,4,1\n5,6,2\n", &"label".parse().unwrap()).unwrap();
        assert_eq!(d.len(), 3);
        assert_eq!(d.get(1).x, vec![3.0, 4.0]);
        let labels: Vec<_> = d.samples().iter().map(|s| s.y).collect();
        assert_eq!(labels, vec![Target::Class(0), Target::Class(1), Target::Class(2)]);
    }

    #[test]
    fn headerless_label_first() {
        let d = parse_csv("1, 0.5, 0.25\n0, 1.5, -2\n", &LabelColumn::Index(0)).unwrap();
        assert_eq!(d.get(0).x, vec![0.5, 0.25]);
        assert_eq!(d.get(1).y, Target::Class(0));
    }

    fn line_of(err: Error) -> usize {
        match err {
            Error::Parse { line, .. } => line,
            other => panic!("expected parse error, got {other}"),
        }
    }

    #[test]
    fn errors_name_the_line() {
        let idx = LabelColumn::Index(2);
        assert_eq!(line_of(parse_csv("1,2,0\n3,4\n", &idx).unwrap_err()), 2);
        assert_eq!(line_of(parse_csv("x,y,z\n1,2,0\n3,oops,1\n", &idx).unwrap_err()), 3);
        assert_eq!(line_of(parse_csv("1,2,0.5\n", &idx).unwrap_err()), 1);
        assert_eq!(line_of(parse_csv("", &idx).unwrap_err()), 1);
        assert!(parse_csv("a,b\n1,2\n", &"label".parse().unwrap()).is_err());
        assert!(parse_csv("1,2\n", &"label".parse().unwrap()).is_err());
        assert!(parse_csv("1,2\n", &LabelColumn::Index(5)).is_err());
    }

    #[test]
    fn normalized_columns_are_standard() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("t.csv");
        std::fs::write(&path, "f1,f2,y\n1,10,0\n2,20,1\n4,15,0\n9,-5,1\n").unwrap();
        let d = load_csv(&path, &"y".parse().unwrap(), true).unwrap();
        for j in 0..2 {
            let col: Vec<f64> = d.samples().iter().map(|s| s.x[j]).collect();
            let n = col.len() as f64;
            let mean = col.iter().sum::<f64>() / n;
            let sd = (col.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n).sqrt();
            assert!(mean.abs() < 1e-12);
            assert!((sd - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn missing_file_is_io_error() {
        let err = load_csv("/nonexistent/file.csv", &LabelColumn::Index(0), false).unwrap_err();
        assert!(matches!(err, Error::Io { .. }));
    }
}
