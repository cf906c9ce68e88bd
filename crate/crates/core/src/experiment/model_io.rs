//! Plain-text model container.
//!
//! ```text
//! ils-model 1
//! beta <value>
//! config <TrainConfig as one JSON line>
//! W_s <rows> <cols>
//! <rows lines of space-separated values>
//! W_t <rows> <cols>
//! ...
//! M <p> <p>
//! ...
//! source_mean <len>
//! <one line>
//! target_mean <len>
//! <one line>
//! v <len>
//! <one line>
//! ```
//!
//! Values are written with 17 significant digits (`{:.16e}`), which is
//! enough for every `f64` to parse back to the identical bit pattern.

use std::fs;
use std::path::Path;

use nalgebra::{DMatrix, DVector};

use crate::error::{IlsError, Result};
use crate::manifold::{ProductPoint, SpdPoint, StiefelPoint};
use crate::pipeline::{FittedModel, TrainConfig};

const MAGIC: &str = "ils-model 1";

fn push_values<'a>(out: &mut String, values: impl Iterator<Item = &'a f64>) {
    let cells: Vec<String> = values.map(|v| format!("{v:.16e}")).collect();
    out.push_str(&cells.join(" "));
    out.push('\n');
}

fn push_matrix(out: &mut String, name: &str, m: &DMatrix<f64>) {
    out.push_str(&format!("{name} {} {}\n", m.nrows(), m.ncols()));
    for row in m.row_iter() {
        push_values(out, row.iter());
    }
}

fn push_vector(out: &mut String, name: &str, v: &DVector<f64>) {
    out.push_str(&format!("{name} {}\n", v.len()));
    push_values(out, v.iter());
}

pub fn model_to_text(model: &FittedModel) -> Result<String> {
    let mut out = format!("{MAGIC}\n");
    out.push_str(&format!("beta {:.16e}\n", model.beta));
    out.push_str(&format!("config {}\n", serde_json::to_string(&model.config)?));
    push_matrix(&mut out, "W_s", model.params.ws.matrix());
    push_matrix(&mut out, "W_t", model.params.wt.matrix());
    push_matrix(&mut out, "M", model.params.m.matrix());
    push_vector(&mut out, "source_mean", &model.source_mean);
    push_vector(&mut out, "target_mean", &model.target_mean);
    push_vector(&mut out, "v", &model.params.v);
    Ok(out)
}

pub fn export_model(model: &FittedModel, path: &Path) -> Result<()> {
    fs::write(path, model_to_text(model)?).map_err(|e| IlsError::io(path, e))
}

pub fn import_model(path: &Path) -> Result<FittedModel> {
    let text = fs::read_to_string(path).map_err(|e| IlsError::io(path, e))?;
    model_from_text(&text, path)
}

struct Lines<'a> {
    path: &'a Path,
    inner: std::iter::Enumerate<std::str::Lines<'a>>,
    line: usize,
}

impl<'a> Lines<'a> {
    fn error(&self, message: impl Into<String>) -> IlsError {
        IlsError::ModelFormat {
            path: self.path.to_path_buf(),
            line: self.line,
            message: message.into(),
        }
    }

    fn next_line(&mut self) -> Result<&'a str> {
        match self.inner.next() {
            Some((i, l)) => {
                self.line = i + 1;
                Ok(l)
            }
            None => {
                self.line += 1;
                Err(self.error("unexpected end of file"))
            }
        }
    }

    /// `<key> <rest>`, failing unless the key matches.
    fn keyed(&mut self, key: &str) -> Result<&'a str> {
        let line = self.next_line()?;
        match line.split_once(' ') {
            Some((k, rest)) if k == key => Ok(rest),
            _ => Err(self.error(format!("expected `{key} ...`, found {line:?}"))),
        }
    }

    fn dims(&mut self, key: &str, count: usize) -> Result<Vec<usize>> {
        let rest = self.keyed(key)?;
        let dims: Vec<usize> = rest
            .split_whitespace()
            .map(str::parse)
            .collect::<std::result::Result<_, _>>()
            .map_err(|_| self.error(format!("bad dimensions {rest:?}")))?;
        if dims.len() != count {
            return Err(self.error(format!("expected {count} dimensions after `{key}`")));
        }
        Ok(dims)
    }

    fn values(&mut self, expected: usize) -> Result<Vec<f64>> {
        let line = self.next_line()?;
        let values: Vec<f64> = line
            .split_whitespace()
            .map(str::parse)
            .collect::<std::result::Result<_, _>>()
            .map_err(|_| self.error("non-numeric value"))?;
        if values.len() != expected {
            return Err(self.error(format!("expected {expected} values, found {}", values.len())));
        }
        Ok(values)
    }

    fn matrix(&mut self, key: &str) -> Result<DMatrix<f64>> {
        let dims = self.dims(key, 2)?;
        let (rows, cols) = (dims[0], dims[1]);
        let mut data = Vec::with_capacity(rows * cols);
        for _ in 0..rows {
            data.extend(self.values(cols)?);
        }
        Ok(DMatrix::from_row_slice(rows, cols, &data))
    }

    fn vector(&mut self, key: &str) -> Result<DVector<f64>> {
        let len = self.dims(key, 1)?[0];
        if len == 0 {
            // an empty vector is written as an empty line
            self.next_line()?;
            return Ok(DVector::zeros(0));
        }
        Ok(DVector::from_vec(self.values(len)?))
    }
}

pub fn model_from_text(text: &str, path: &Path) -> Result<FittedModel> {
    let mut lines = Lines {
        path,
        inner: text.lines().enumerate(),
        line: 0,
    };
    if lines.next_line()? != MAGIC {
        return Err(lines.error(format!("missing `{MAGIC}` header")));
    }
    let beta_text = lines.keyed("beta")?;
    let beta: f64 = beta_text.trim().parse().map_err(|_| lines.error("bad beta"))?;
    let config: TrainConfig = serde_json::from_str(lines.keyed("config")?).map_err(|e| lines.error(e.to_string()))?;

    let ws = lines.matrix("W_s")?;
    let ws_line = lines.line;
    let wt = lines.matrix("W_t")?;
    let wt_line = lines.line;
    let m = lines.matrix("M")?;
    let m_line = lines.line;
    let source_mean = lines.vector("source_mean")?;
    let target_mean = lines.vector("target_mean")?;
    let v = lines.vector("v")?;

    let at = |line: usize, e: IlsError| IlsError::ModelFormat {
        path: path.to_path_buf(),
        line,
        message: e.to_string(),
    };
    let ws = StiefelPoint::new(ws).map_err(|e| at(ws_line, e))?;
    let wt = StiefelPoint::new(wt).map_err(|e| at(wt_line, e))?;
    let m = SpdPoint::new(m).map_err(|e| at(m_line, e))?;
    let params = ProductPoint::new(ws, wt, m, v).map_err(|e| at(m_line, e))?;
    FittedModel::from_parts(params, source_mean, target_mean, beta, config).map_err(|e| at(lines.line, e))
}
