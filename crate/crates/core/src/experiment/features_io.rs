use std::fs;
use std::io::Write;
use std::path::Path;

use csv::{ReaderBuilder, StringRecord, Trim};
use nalgebra::DMatrix;

use crate::error::{IlsError, Result};
use crate::objective::Domain;
use crate::pipeline::{ClassId, FeatureSet};

/// Label value marking an unlabeled row.
pub const UNLABELED: i64 = -1;

fn detect_delimiter(text: &str) -> u8 {
    let first = text.lines().find(|l| !l.trim().is_empty()).unwrap_or("");
    (*b",\t;")
        .into_iter()
        .find(|&d| first.as_bytes().contains(&d))
        .unwrap_or(b' ')
}

/// Reads a delimiter-separated feature file.
///
/// One sample per row: an integer class label (`-1` for unlabeled) followed
/// by the real-valued features. The delimiter is the first of `,`, tab, `;`
/// found on the first non-empty line, otherwise a single space. A first row
/// whose leading cell is not numeric is taken as a header and skipped.
/// Errors report 1-based line and column numbers.
pub fn load_features(path: &Path, domain: Domain) -> Result<FeatureSet> {
    let text = fs::read_to_string(path).map_err(|e| IlsError::io(path, e))?;
    parse_features(&text, path, domain)
}

pub fn parse_features(text: &str, path: &Path, domain: Domain) -> Result<FeatureSet> {
    let parse_error = |line: usize, column: usize, message: String| IlsError::Parse {
        path: path.to_path_buf(),
        line,
        column,
        message,
    };
    let mut reader = ReaderBuilder::new()
        .delimiter(detect_delimiter(text))
        .has_headers(false)
        .flexible(true)
        .trim(Trim::All)
        .comment(Some(b'#'))
        .from_reader(text.as_bytes());

    let mut labels = Vec::new();
    let mut values = Vec::new();
    let mut width: Option<usize> = None;
    let mut record = StringRecord::new();
    let mut first = true;
    loop {
        let more = reader.read_record(&mut record).map_err(|e| {
            let line = e.position().map_or(0, |p| p.line() as usize);
            parse_error(line, 0, e.to_string())
        })?;
        if !more {
            break;
        }
        let line = record.position().map_or(0, |p| p.line() as usize);
        if record.iter().all(|c| c.is_empty()) {
            continue;
        }
        if first {
            first = false;
            if record.get(0).is_some_and(|c| c.parse::<f64>().is_err()) {
                continue;
            }
        }
        if record.len() < 2 {
            return Err(parse_error(line, 1, "expected a label and at least one feature".into()));
        }
        match width {
            None => width = Some(record.len()),
            Some(w) if w != record.len() => {
                return Err(parse_error(
                    line,
                    record.len().min(w) + 1,
                    format!("row has {} cells, previous rows have {w}", record.len()),
                ));
            }
            Some(_) => {}
        }
        let label_cell = &record[0];
        let label: i64 = label_cell
            .parse()
            .map_err(|_| parse_error(line, 1, format!("label {label_cell:?} is not an integer")))?;
        labels.push(match label {
            UNLABELED => None,
            l if l >= 0 && l <= u32::MAX as i64 => Some(ClassId(l as u32)),
            l => return Err(parse_error(line, 1, format!("label {l} must be -1 or a non-negative integer"))),
        });
        for (col, cell) in record.iter().enumerate().skip(1) {
            let v: f64 = cell
                .parse()
                .map_err(|_| parse_error(line, col + 1, format!("{cell:?} is not a number")))?;
            if !v.is_finite() {
                return Err(parse_error(line, col + 1, format!("{cell:?} is not finite")));
            }
            values.push(v);
        }
    }
    let Some(width) = width else {
        return Err(parse_error(1, 1, "no data rows".into()));
    };
    let x = DMatrix::from_row_slice(labels.len(), width - 1, &values);
    FeatureSet::new(x, labels, domain)
}

/// Writes a feature set in the format read by [`load_features`], with a
/// header row and full-precision values.
pub fn write_features(path: &Path, features: &FeatureSet) -> Result<()> {
    let mut out = String::new();
    out.push_str("label");
    for j in 0..features.dim() {
        out.push_str(&format!(",f{j}"));
    }
    out.push('\n');
    let x = features.raw_matrix();
    for (i, label) in features.labels().iter().enumerate() {
        match label {
            Some(c) => out.push_str(&c.to_string()),
            None => out.push_str(&UNLABELED.to_string()),
        }
        for v in x.row(i).iter() {
            out.push_str(&format!(",{v:?}"));
        }
        out.push('\n');
    }
    let mut file = fs::File::create(path).map_err(|e| IlsError::io(path, e))?;
    file.write_all(out.as_bytes()).map_err(|e| IlsError::io(path, e))
}
