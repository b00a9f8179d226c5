//! Plain CSV tables: header row, comma separated, floats with 17 significant
//! digits, non-finite values as `inf` / `-inf` / `nan`.

use std::path::Path;

use crate::error::{Error, Result};

pub fn fmt_value(v: f64) -> String {
    if v.is_nan() {
        "nan".into()
    } else if v.is_infinite() {
        if v > 0.0 { "inf" } else { "-inf" }.into()
    } else {
        format!("{v:.16e}")
    }
}

pub fn write_csv(path: &Path, header: &[&str], rows: &[Vec<String>]) -> Result<()> {
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir)?;
    }
    let to_err = |e: csv::Error| Error::Io(e.into());
    let mut out = csv::Writer::from_path(path).map_err(to_err)?;
    out.write_record(header).map_err(to_err)?;
    for row in rows {
        out.write_record(row).map_err(to_err)?;
    }
    out.flush()?;
    Ok(())
}
