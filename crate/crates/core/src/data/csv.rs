//! Plain CSV datasets: header `label,x0,x1,...`, one sample per line.
//! Samples load as vectors (dims `[d]`); reshape afterwards.

use std::path::Path;

use crate::data::LabeledDataset;
use crate::error::{Error, Result};
use crate::tensor::Matrix;

pub fn load_csv(path: impl AsRef<Path>) -> Result<LabeledDataset> {
    let path = path.as_ref();
    let mut reader = ::csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .from_path(path)
        .map_err(|e| Error::Parse(format!("{}: {e}", path.display())))?;
    let headers = reader
        .headers()
        .map_err(|e| Error::Parse(format!("{}: {e}", path.display())))?
        .clone();
    if headers.len() < 2 || headers.get(0).map(str::trim) != Some("label") {
        return Err(Error::Parse(format!(
            "{}: header must start with `label` followed by feature columns",
            path.display()
        )));
    }
    let d = headers.len() - 1;
    let mut values = Vec::new();
    let mut raw_labels = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| Error::Parse(format!("{}: {e}", path.display())))?;
        let line = record.position().map_or(0, |p| p.line());
        if record.len() != d + 1 {
            return Err(Error::Parse(format!(
                "{} line {line}: expected {} fields, found {}",
                path.display(),
                d + 1,
                record.len()
            )));
        }
        let label = record[0].trim().parse::<i64>().map_err(|_| {
            Error::Parse(format!(
                "{} line {line}: label {:?} is not an integer",
                path.display(),
                &record[0]
            ))
        })?;
        raw_labels.push(label);
        for (j, cell) in record.iter().skip(1).enumerate() {
            let v = cell.trim().parse::<f64>().map_err(|_| {
                Error::Parse(format!(
                    "{} line {line}, column {}: {cell:?} is not a number",
                    path.display(),
                    j + 1
                ))
            })?;
            values.push(v);
        }
    }
    if raw_labels.is_empty() {
        return Err(Error::EmptyData(format!("{} has no samples", path.display())));
    }
    let data = Matrix::from_column_slice(d, raw_labels.len(), &values);
    LabeledDataset::from_raw_labels(data, &raw_labels, vec![d])
}

pub fn save_csv(ds: &LabeledDataset, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let wrap = |e: ::csv::Error| Error::Parse(format!("{}: {e}", path.display()));
    let mut w = ::csv::Writer::from_path(path).map_err(wrap)?;
    let mut header = vec!["label".to_string()];
    header.extend((0..ds.dim()).map(|j| format!("x{j}")));
    w.write_record(&header).map_err(wrap)?;
    for i in 0..ds.n_samples() {
        let mut row = vec![ds.raw_label(i).to_string()];
        // `{:?}` on f64 prints the shortest string that parses back exactly
        row.extend(ds.sample_slice(i).iter().map(|v| format!("{v:?}")));
        w.write_record(&row).map_err(wrap)?;
    }
    w.flush()
        .map_err(|e| Error::io(format!("writing {}", path.display()), e))
}
