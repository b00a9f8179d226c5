//! Binary matrix files.
//!
//! A matrix block is the magic `OIMX`, a `u16` format version, `u64` rows,
//! `u64` cols, then `rows · cols` little-endian `f64` values in column-major
//! order. Snapshot files hold a state block, a derivative block and a trailer
//! (`u64` byte length followed by UTF-8 `key=value` lines).

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::opinf::{Method, ReducedModel};
use crate::pde::SnapshotSet;
use crate::pod::PodBasis;

pub const MAGIC: &[u8; 4] = b"OIMX";
pub const VERSION: u16 = 1;

pub fn write_matrix<W: Write>(w: &mut W, m: &DMatrix<f64>) -> Result<()> {
    w.write_all(MAGIC)?;
    w.write_all(&VERSION.to_le_bytes())?;
    w.write_all(&(m.nrows() as u64).to_le_bytes())?;
    w.write_all(&(m.ncols() as u64).to_le_bytes())?;
    for v in m.as_slice() {
        w.write_all(&v.to_le_bytes())?;
    }
    Ok(())
}

fn read_array<const N: usize, R: Read>(r: &mut R) -> Result<[u8; N]> {
    let mut buf = [0u8; N];
    r.read_exact(&mut buf).map_err(|e| match e.kind() {
        std::io::ErrorKind::UnexpectedEof => Error::Format("file ends inside a matrix block".into()),
        _ => Error::Io(e),
    })?;
    Ok(buf)
}

pub fn read_matrix<R: Read>(r: &mut R) -> Result<DMatrix<f64>> {
    if &read_array::<4, _>(r)? != MAGIC {
        return Err(Error::Format("missing OIMX magic".into()));
    }
    let version = u16::from_le_bytes(read_array(r)?);
    if version != VERSION {
        return Err(Error::Format(format!("unsupported format version {version}")));
    }
    let rows = u64::from_le_bytes(read_array(r)?) as usize;
    let cols = u64::from_le_bytes(read_array(r)?) as usize;
    let len = rows
        .checked_mul(cols)
        .filter(|&l| l <= (1 << 34))
        .ok_or_else(|| Error::Format(format!("implausible shape {rows}×{cols}")))?;
    let mut bytes = vec![0u8; len * 8];
    r.read_exact(&mut bytes)
        .map_err(|_| Error::Format(format!("truncated {rows}×{cols} block")))?;
    let data = bytes.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes"))).collect();
    Ok(DMatrix::from_vec(rows, cols, data))
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir)?;
    }
    Ok(BufWriter::new(File::create(path)?))
}

fn open(path: &Path) -> Result<BufReader<File>> {
    File::open(path).map(BufReader::new).map_err(|e| match e.kind() {
        std::io::ErrorKind::NotFound => Error::MissingInput(path.to_path_buf()),
        _ => Error::Io(e),
    })
}

fn expect_end<R: Read>(r: &mut R, path: &Path) -> Result<()> {
    let mut rest = [0u8; 1];
    if r.read(&mut rest)? != 0 {
        return Err(Error::Format(format!("{}: trailing bytes", path.display())));
    }
    Ok(())
}

pub fn save_matrix(path: &Path, m: &DMatrix<f64>) -> Result<()> {
    let mut w = create(path)?;
    write_matrix(&mut w, m)?;
    w.flush()?;
    Ok(())
}

pub fn load_matrix(path: &Path) -> Result<DMatrix<f64>> {
    let mut r = open(path)?;
    let m = read_matrix(&mut r)?;
    expect_end(&mut r, path)?;
    Ok(m)
}

fn trailer_text(s: &SnapshotSet) -> String {
    // `{:?}` prints the shortest representation that round-trips exactly.
    let mut text = format!("dt={:?}\nstride={}\n", s.dt, s.stride);
    for (k, v) in &s.ic_params {
        text.push_str(&format!("{k}={v:?}\n"));
    }
    text
}

pub fn save_snapshots(path: &Path, s: &SnapshotSet) -> Result<()> {
    let mut w = create(path)?;
    write_matrix(&mut w, &s.states)?;
    write_matrix(&mut w, &s.derivatives)?;
    let text = trailer_text(s);
    w.write_all(&(text.len() as u64).to_le_bytes())?;
    w.write_all(text.as_bytes())?;
    w.flush()?;
    Ok(())
}

pub fn load_snapshots(path: &Path) -> Result<SnapshotSet> {
    let mut r = open(path)?;
    let states = read_matrix(&mut r)?;
    let derivatives = read_matrix(&mut r)?;
    let len = u64::from_le_bytes(read_array(&mut r)?) as usize;
    if len > 1 << 20 {
        return Err(Error::Format("implausible trailer length".into()));
    }
    let mut bytes = vec![0u8; len];
    r.read_exact(&mut bytes).map_err(|_| Error::Format("truncated trailer".into()))?;
    expect_end(&mut r, path)?;
    let text = String::from_utf8(bytes).map_err(|_| Error::Format("trailer is not UTF-8".into()))?;

    let mut meta = BTreeMap::new();
    for line in text.lines().filter(|l| !l.is_empty()) {
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| Error::Format(format!("bad trailer line `{line}`")))?;
        let v: f64 = v.parse().map_err(|_| Error::Format(format!("bad trailer value `{line}`")))?;
        meta.insert(k.to_string(), v);
    }
    let dt = meta.remove("dt").ok_or_else(|| Error::Format("trailer lacks dt".into()))?;
    let stride = meta.remove("stride").ok_or_else(|| Error::Format("trailer lacks stride".into()))?;
    if !(stride >= 1.0 && stride.fract() == 0.0) {
        return Err(Error::Format(format!("bad stride {stride}")));
    }
    let stride = stride as usize;
    let times = (0..states.ncols()).map(|c| (c * stride) as f64 * dt).collect();
    SnapshotSet::new(states, derivatives, times, dt, stride, meta)
        .map_err(|e| Error::Format(format!("{}: {e}", path.display())))
}

/// Basis file: `V` block then the singular values as an `m × 1` block.
pub fn save_basis(path: &Path, b: &PodBasis) -> Result<()> {
    let mut w = create(path)?;
    write_matrix(&mut w, &b.basis)?;
    write_matrix(&mut w, &DMatrix::from_column_slice(b.singular_values.len(), 1, b.singular_values.as_slice()))?;
    w.flush()?;
    Ok(())
}

pub fn load_basis(path: &Path) -> Result<PodBasis> {
    let mut r = open(path)?;
    let basis = read_matrix(&mut r)?;
    let sigma = read_matrix(&mut r)?;
    expect_end(&mut r, path)?;
    if sigma.ncols() != 1 {
        return Err(Error::Format("singular values must be a column".into()));
    }
    Ok(PodBasis { basis, singular_values: DVector::from_column_slice(sigma.as_slice()) })
}

/// Operator file: the single block `Õ = [Â, F̂]`.
pub fn save_operators(path: &Path, m: &ReducedModel) -> Result<()> {
    save_matrix(path, &m.operator_matrix())
}

pub fn load_operators(path: &Path, method: Method) -> Result<ReducedModel> {
    ReducedModel::from_operator_matrix(&load_matrix(path)?, method)
}
