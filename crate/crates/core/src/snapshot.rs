//! Artifact I/O: raw binary snapshots for fields and DN matrices, each with
//! a JSON sidecar describing the payload.
//!
//! Field snapshots store one complex value per grid node in node-major order
//! (x slowest, z fastest) as little-endian `(f32, f32)` pairs — the compact
//! interchange precision — next to a sidecar
//! `{dims, spacing, box: {n, margin, offsets}, kind}`. DN matrices keep full
//! `f64` precision (their entries feed operator-norm differences that sit
//! many digits below the f32 mantissa) with a header
//! `{m_max, rows, cols, grid}`. Both readers validate the sidecar against
//! the payload length before touching the data.

use crate::error::{Error, Result};
use crate::field::ScalarField;
use crate::forward::DnMap;
use crate::grid::GridSpec;
use crate::potentials::PotentialPair;
use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::fs;
use std::path::{Path, PathBuf};

/// `<base>.bin` / `<base>.json` by appending, so dotted stems like
/// `pair0.w_x` keep their full name.
fn sibling(base: &Path, suffix: &str) -> PathBuf {
    let mut name = base.as_os_str().to_owned();
    name.push(suffix);
    PathBuf::from(name)
}

/// Grid geometry as stored in sidecars; round-trips through `GridSpec::new`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GridSidecar {
    pub n: usize,
    pub margin: f64,
    pub offsets: [f64; 3],
}

impl GridSidecar {
    pub fn of(grid: GridSpec) -> GridSidecar {
        GridSidecar {
            n: grid.n,
            margin: grid.margin,
            offsets: grid.fourier_offset,
        }
    }

    pub fn to_grid(&self) -> Result<GridSpec> {
        GridSpec::new(self.n, self.margin, self.offsets)
    }
}

/// Sidecar of a field snapshot.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FieldSidecar {
    /// Nodes per axis, all equal for the cube.
    pub dims: [usize; 3],
    /// Grid spacing.
    pub spacing: f64,
    #[serde(rename = "box")]
    pub box_spec: GridSidecar,
    /// Free-form payload tag (`"amplitude"`, `"q"`, `"w_x"`, ...).
    pub kind: String,
}

fn write_complex_f32(path: &Path, data: &[Complex64]) -> Result<()> {
    let mut bytes = Vec::with_capacity(data.len() * 8);
    for v in data {
        bytes.extend_from_slice(&(v.re as f32).to_le_bytes());
        bytes.extend_from_slice(&(v.im as f32).to_le_bytes());
    }
    fs::write(path, bytes)?;
    Ok(())
}

fn read_complex_f32(path: &Path, expect: usize) -> Result<Vec<Complex64>> {
    let bytes = fs::read(path)?;
    if bytes.len() != expect * 8 {
        return Err(Error::InvalidParam(format!(
            "snapshot {} holds {} bytes, sidecar promises {}",
            path.display(),
            bytes.len(),
            expect * 8
        )));
    }
    let mut data = Vec::with_capacity(expect);
    for chunk in bytes.chunks_exact(8) {
        let re = f32::from_le_bytes([chunk[0], chunk[1], chunk[2], chunk[3]]);
        let im = f32::from_le_bytes([chunk[4], chunk[5], chunk[6], chunk[7]]);
        data.push(Complex64::new(re as f64, im as f64));
    }
    Ok(data)
}

/// Write `field` as `<base>.bin` plus `<base>.json`.
pub fn write_scalar_field(base: &Path, field: &ScalarField, kind: &str) -> Result<()> {
    let m = field.grid.nodes_per_axis();
    let sidecar = FieldSidecar {
        dims: [m, m, m],
        spacing: field.grid.h(),
        box_spec: GridSidecar::of(field.grid),
        kind: kind.to_string(),
    };
    fs::write(
        sibling(base, ".json"),
        serde_json::to_string_pretty(&sidecar)?,
    )?;
    write_complex_f32(&sibling(base, ".bin"), &field.data)
}

/// Read a field snapshot written by [`write_scalar_field`].
pub fn read_scalar_field(base: &Path) -> Result<(ScalarField, FieldSidecar)> {
    let sidecar: FieldSidecar =
        serde_json::from_str(&fs::read_to_string(sibling(base, ".json"))?)?;
    let grid = sidecar.box_spec.to_grid()?;
    let m = grid.nodes_per_axis();
    if sidecar.dims != [m, m, m] {
        return Err(Error::InvalidParam(format!(
            "sidecar dims {:?} disagree with grid n = {}",
            sidecar.dims, grid.n
        )));
    }
    let data = read_complex_f32(&sibling(base, ".bin"), grid.node_count())?;
    Ok((ScalarField { grid, data }, sidecar))
}

/// Header of a DN-matrix snapshot.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DnSidecar {
    pub m_max: usize,
    pub rows: usize,
    pub cols: usize,
    pub grid: GridSidecar,
    /// Total CG iterations spent assembling the map.
    pub iterations: usize,
    pub lambda_min: f64,
}

/// Write the Galerkin matrix of a DN map as `<base>.bin` (f64 little-endian
/// re/im pairs, row-major) plus `<base>.json`.
pub fn write_dn_map(base: &Path, dn: &DnMap) -> Result<()> {
    let sidecar = DnSidecar {
        m_max: dn.m_max,
        rows: dn.green.nrows(),
        cols: dn.green.ncols(),
        grid: GridSidecar::of(dn.grid),
        iterations: dn.iterations.iter().sum(),
        lambda_min: dn.lambda_min,
    };
    fs::write(
        sibling(base, ".json"),
        serde_json::to_string_pretty(&sidecar)?,
    )?;
    let mut bytes = Vec::with_capacity(dn.green.len() * 16);
    for r in 0..dn.green.nrows() {
        for c in 0..dn.green.ncols() {
            bytes.extend_from_slice(&dn.green[(r, c)].re.to_le_bytes());
            bytes.extend_from_slice(&dn.green[(r, c)].im.to_le_bytes());
        }
    }
    fs::write(sibling(base, ".bin"), bytes)?;
    Ok(())
}

/// Read back a DN matrix snapshot: the Galerkin matrix plus its header.
pub fn read_dn_matrix(base: &Path) -> Result<(DMatrix<Complex64>, DnSidecar)> {
    let sidecar: DnSidecar =
        serde_json::from_str(&fs::read_to_string(sibling(base, ".json"))?)?;
    let bytes = fs::read(sibling(base, ".bin"))?;
    let expect = sidecar.rows * sidecar.cols * 16;
    if bytes.len() != expect {
        return Err(Error::InvalidParam(format!(
            "DN snapshot holds {} bytes, header promises {expect}",
            bytes.len()
        )));
    }
    let mut it = bytes.chunks_exact(16);
    let mut matrix = DMatrix::from_element(
        sidecar.rows,
        sidecar.cols,
        Complex64::new(0.0, 0.0),
    );
    for r in 0..sidecar.rows {
        for c in 0..sidecar.cols {
            let chunk = it.next().expect("length checked above");
            let re = f64::from_le_bytes(chunk[0..8].try_into().expect("8 bytes"));
            let im = f64::from_le_bytes(chunk[8..16].try_into().expect("8 bytes"));
            matrix[(r, c)] = Complex64::new(re, im);
        }
    }
    Ok((matrix, sidecar))
}

/// Generation manifest stored next to sampled potential-pair fields.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PairManifest {
    /// Bump count bound of the admissible class.
    pub m: usize,
    /// Support radius bound.
    pub r: f64,
    pub seed: u64,
    pub eps_p: f64,
}

/// Write a potential pair as analytic JSON plus sampled field snapshots
/// (`w_x`, `w_y`, `w_z`, `q`) and the generation manifest, under `dir` with
/// the given file stem.
pub fn write_pair_fields(
    dir: &Path,
    stem: &str,
    pair: &PotentialPair,
    grid: GridSpec,
    manifest: &PairManifest,
) -> Result<()> {
    fs::create_dir_all(dir)?;
    fs::write(
        dir.join(format!("{stem}.pair.json")),
        serde_json::to_string_pretty(pair)?,
    )?;
    fs::write(
        dir.join(format!("{stem}.manifest.json")),
        serde_json::to_string_pretty(manifest)?,
    )?;
    let w = pair.w_field(grid);
    for (axis, tag) in ["w_x", "w_y", "w_z"].iter().enumerate() {
        let comp = ScalarField {
            grid,
            data: w.comps[axis].clone(),
        };
        write_scalar_field(&dir.join(format!("{stem}.{tag}")), &comp, tag)?;
    }
    write_scalar_field(&dir.join(format!("{stem}.q")), &pair.q_field(grid), "q")?;
    Ok(())
}
