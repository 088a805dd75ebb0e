//! CSV input and output.

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use gmus_core::Dataset;
use ndarray::{Array1, Array2};

/// Reads a headed CSV; `response` names the response column and every other
/// column, in header order, becomes a covariate.
pub fn load_dataset(path: &Path, response: &str) -> Result<Dataset> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .from_path(path)
        .with_context(|| format!("cannot open {}", path.display()))?;
    let headers = reader.headers().with_context(|| format!("cannot read header of {}", path.display()))?.clone();
    let Some(target) = headers.iter().position(|h| h == response) else {
        bail!("{}: response column `{response}` not found (columns: {})", path.display(), headers.iter().collect::<Vec<_>>().join(", "));
    };
    let names: Vec<String> =
        headers.iter().enumerate().filter(|&(j, _)| j != target).map(|(_, h)| h.to_string()).collect();

    let mut cells = Vec::new();
    let mut y = Vec::new();
    for (i, record) in reader.records().enumerate() {
        let record = record.map_err(|e| match e.kind() {
            csv::ErrorKind::UnequalLengths { pos, expected_len, len } => anyhow::anyhow!(
                "{}: ragged row at line {}: expected {expected_len} fields, found {len}",
                path.display(),
                pos.as_ref().map_or(i + 2, |p| p.line() as usize)
            ),
            _ => anyhow::anyhow!("{}: {e}", path.display()),
        })?;
        let line = record.position().map_or(i + 2, |p| p.line() as usize);
        for (j, cell) in record.iter().enumerate() {
            let value: f64 = cell.parse().map_err(|_| {
                anyhow::anyhow!(
                    "{}: non-numeric cell `{cell}` at line {line}, column {} (`{}`)",
                    path.display(),
                    j + 1,
                    &headers[j]
                )
            })?;
            if j == target {
                y.push(value);
            } else {
                cells.push(value);
            }
        }
    }
    if y.is_empty() {
        bail!("{}: no data rows", path.display());
    }
    let w = Array2::from_shape_vec((y.len(), names.len()), cells)?;
    let mut data = Dataset::new(w, Array1::from(y))?;
    data.column_names = names;
    Ok(data)
}

/// Writes `w` and `y` as a headed CSV with 17 significant digits.
pub fn write_dataset(path: &Path, data: &Dataset, response: &str) -> Result<()> {
    let mut out = csv::Writer::from_path(path).with_context(|| format!("cannot create {}", path.display()))?;
    let mut header = vec![response.to_string()];
    header.extend(data.column_names.iter().cloned());
    out.write_record(&header)?;
    for (i, row) in data.w.rows().into_iter().enumerate() {
        let mut rec = vec![float(data.y[i])];
        rec.extend(row.iter().map(|&v| float(v)));
        out.write_record(&rec)?;
    }
    out.flush()?;
    Ok(())
}

/// 17 significant digits, enough to round-trip any `f64`.
pub fn float(v: f64) -> String {
    format!("{v:.16e}")
}

/// A CSV file whose first lines echo the effective configuration.
pub struct Output {
    pub path: PathBuf,
    pub writer: csv::Writer<BufWriter<File>>,
}

impl Output {
    pub fn create(dir: &Path, name: &str, echo: &str) -> Result<Self> {
        fs::create_dir_all(dir).with_context(|| format!("cannot create {}", dir.display()))?;
        let path = dir.join(name);
        let mut file = BufWriter::new(File::create(&path).with_context(|| format!("cannot create {}", path.display()))?);
        file.write_all(echo.as_bytes())?;
        Ok(Self { path, writer: csv::Writer::from_writer(file) })
    }

    pub fn row<I, S>(&mut self, fields: I) -> Result<()>
    where
        I: IntoIterator<Item = S>,
        S: AsRef<[u8]>,
    {
        self.writer.write_record(fields)?;
        Ok(())
    }

    pub fn finish(mut self) -> Result<PathBuf> {
        self.writer.flush()?;
        Ok(self.path)
    }
}
