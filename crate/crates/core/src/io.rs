//! CSV import/export of datasets and index sets.
//!
//! Dataset files carry a header `y,x1,...,xp`; the first column is the
//! response.

use std::io::{Read, Write};
use std::path::Path;

use nalgebra::{DMatrix, DVector};

use crate::datamodel::Dataset;
use crate::{Error, Result};

pub fn read_dataset<R: Read>(reader: R) -> Result<Dataset> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).trim(csv::Trim::All).from_reader(reader);
    let width = rdr.headers()?.len();
    if width < 2 {
        return Err(Error::InvalidInput("dataset needs a response and at least one covariate column".into()));
    }
    let mut values = Vec::new();
    let mut rows = 0;
    for (line, record) in rdr.records().enumerate() {
        let record = record?;
        if record.len() != width {
            return Err(Error::InvalidInput(format!(
                "data row {} has {} fields, header has {width}",
                line + 1,
                record.len()
            )));
        }
        for field in record.iter() {
            let v: f64 = field.parse().map_err(|_| {
                Error::InvalidInput(format!("data row {}: cannot parse {field:?} as a number", line + 1))
            })?;
            values.push(v);
        }
        rows += 1;
    }
    let all = DMatrix::from_row_slice(rows, width, &values);
    let y = DVector::from_iterator(rows, all.column(0).iter().copied());
    let x = all.columns(1, width - 1).into_owned();
    Dataset::new(y, x)
}

pub fn read_dataset_path(path: &Path) -> Result<Dataset> {
    read_dataset(std::fs::File::open(path)?)
}

pub fn write_dataset<W: Write>(data: &Dataset, writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    let mut header = vec!["y".to_string()];
    header.extend((1..=data.p()).map(|j| format!("x{j}")));
    w.write_record(&header)?;
    for i in 0..data.n() {
        let mut row = vec![format_f64(data.y[i])];
        row.extend(data.x.row(i).iter().map(|&v| format_f64(v)));
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_dataset_path(data: &Dataset, path: &Path) -> Result<()> {
    write_dataset(data, std::fs::File::create(path)?)
}

/// Shortest representation that parses back to the same `f64`.
pub fn format_f64(v: f64) -> String {
    format!("{v:?}")
}

/// `index,score` rows with 1-based indices.
pub fn write_index_scores<W: Write>(indices: &[usize], scores: &[f64], writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["index", "score"])?;
    for &j in indices {
        w.write_record([(j + 1).to_string(), format_f64(scores[j])])?;
    }
    w.flush()?;
    Ok(())
}
