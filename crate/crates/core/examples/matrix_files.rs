//! The OIMX binary matrix format, snapshot files with their metadata trailer,
//! and a checksummed run manifest.

use std::collections::BTreeMap;

use ep_opinf::harness::manifest::sha256_file;
use ep_opinf::harness::matrix_io::{load_matrix, load_snapshots, save_matrix, save_snapshots};
use ep_opinf::harness::RunManifest;
use ep_opinf::{burgers_ic, assemble_burgers, simulate, Grid1D, Scheme};
use nalgebra::DMatrix;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let dir = std::env::temp_dir().join("ep-opinf-matrix-files");
    std::fs::create_dir_all(&dir)?;

    let m = DMatrix::from_fn(3, 2, |i, j| (i + 10 * j) as f64);
    let path = dir.join("small.oimx");
    save_matrix(&path, &m)?;
    let bytes = std::fs::read(&path)?;
    println!("{}: {} bytes, header {:?}", path.display(), bytes.len(), &bytes[..6]);
    assert_eq!(load_matrix(&path)?, m);

    let grid = Grid1D::new(64, 1.0)?;
    let model = assemble_burgers(&grid, 0.1)?;
    let mut snaps = simulate(&model, &burgers_ic(&grid, 1.0, 1, 0.0)?, 1e-3, 0.5, 10, Scheme::SemiImplicitEuler)?;
    snaps.ic_params = BTreeMap::from([("amplitude".into(), 1.0), ("frequency".into(), 1.0), ("phase".into(), 0.0)]);
    let snap_path = dir.join("snapshots.oimx");
    save_snapshots(&snap_path, &snaps)?;
    let back = load_snapshots(&snap_path)?;
    println!("snapshots: {}×{}, dt {}, stride {}, params {:?}", back.n(), back.len(), back.dt, back.stride, back.ic_params);

    let mut manifest = RunManifest::new(sha256_file(&path)?);
    manifest.save(&dir)?;
    for (file, sum) in &manifest.files {
        println!("{file}  {}", &sum[..16]);
    }
    Ok(())
}
