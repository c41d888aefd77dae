//! Binary container for instances, sketches and factor estimates.
//!
//! Layout (all integers and floats little-endian):
//!
//! ```text
//! magic   8 bytes  "LRCSBIN\x01"
//! kind    u32      1 = ground truth, 2 = sketch set, 3 = factor estimate
//! body    kind-specific, built from
//!         matrix := rows u64, cols u64, rows*cols f64 in column-major order
//!
//! ground truth:    n u64, q u64, r u64, seed u64, kappa f64, mu f64,
//!                  U⋆ (n x r), σ⋆ (r x 1), B⋆ (r x q), X⋆ (n x q)
//! sketch set:      m u64, n u64, q u64, iterations u64 (0 = shared),
//!                  phase count u64, then per phase:
//!                    label kind u32, label index u32,
//!                    per column: A (m x n), y (m x 1)
//! factor estimate: U (n x r), B (r x q)
//! ```

use std::io::{Read, Write};

use super::{ColumnSketch, GroundTruth, ModelError, Phase, PhaseLabel, SketchSet, SplitMode};
use crate::linalg::{Matrix, OrthonormalBasis, Vector};

pub const MAGIC: [u8; 8] = *b"LRCSBIN\x01";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ContainerKind {
    GroundTruth = 1,
    SketchSet = 2,
    FactorEstimate = 3,
}

// guards against allocating from a corrupted header
const MAX_ELEMENTS: u64 = 1 << 34;

fn put_u32(w: &mut impl Write, v: u32) -> std::io::Result<()> {
    w.write_all(&v.to_le_bytes())
}

fn put_u64(w: &mut impl Write, v: u64) -> std::io::Result<()> {
    w.write_all(&v.to_le_bytes())
}

fn put_f64(w: &mut impl Write, v: f64) -> std::io::Result<()> {
    w.write_all(&v.to_le_bytes())
}

fn put_matrix(w: &mut impl Write, m: &Matrix) -> std::io::Result<()> {
    put_u64(w, m.nrows() as u64)?;
    put_u64(w, m.ncols() as u64)?;
    for v in m.iter() {
        put_f64(w, *v)?;
    }
    Ok(())
}

fn get_u32(r: &mut impl Read) -> Result<u32, ModelError> {
    let mut b = [0u8; 4];
    r.read_exact(&mut b)?;
    Ok(u32::from_le_bytes(b))
}

fn get_u64(r: &mut impl Read) -> Result<u64, ModelError> {
    let mut b = [0u8; 8];
    r.read_exact(&mut b)?;
    Ok(u64::from_le_bytes(b))
}

fn get_usize(r: &mut impl Read) -> Result<usize, ModelError> {
    let v = get_u64(r)?;
    usize::try_from(v).map_err(|_| ModelError::Format(format!("count {v} does not fit in memory")))
}

fn get_f64(r: &mut impl Read) -> Result<f64, ModelError> {
    let mut b = [0u8; 8];
    r.read_exact(&mut b)?;
    Ok(f64::from_le_bytes(b))
}

fn get_matrix(r: &mut impl Read) -> Result<Matrix, ModelError> {
    let rows = get_u64(r)?;
    let cols = get_u64(r)?;
    let len = rows
        .checked_mul(cols)
        .filter(|&l| l <= MAX_ELEMENTS)
        .ok_or_else(|| ModelError::Format(format!("implausible matrix shape {rows}x{cols}")))?;
    let mut data = Vec::with_capacity(len as usize);
    for _ in 0..len {
        data.push(get_f64(r)?);
    }
    Ok(Matrix::from_vec(rows as usize, cols as usize, data))
}

fn get_shaped(r: &mut impl Read, rows: usize, cols: usize, what: &str) -> Result<Matrix, ModelError> {
    let m = get_matrix(r)?;
    if m.shape() != (rows, cols) {
        return Err(ModelError::Format(format!(
            "{what} has shape {:?}, expected {rows}x{cols}",
            m.shape()
        )));
    }
    Ok(m)
}

fn put_header(w: &mut impl Write, kind: ContainerKind) -> std::io::Result<()> {
    w.write_all(&MAGIC)?;
    put_u32(w, kind as u32)
}

fn expect_header(r: &mut impl Read, kind: ContainerKind) -> Result<(), ModelError> {
    let mut magic = [0u8; 8];
    r.read_exact(&mut magic)?;
    if magic != MAGIC {
        return Err(ModelError::Format("bad magic bytes".into()));
    }
    let found = get_u32(r)?;
    if found != kind as u32 {
        return Err(ModelError::Format(format!(
            "container holds kind {found}, expected {}",
            kind as u32
        )));
    }
    Ok(())
}

pub fn write_ground_truth(w: &mut impl Write, gt: &GroundTruth) -> Result<(), ModelError> {
    put_header(w, ContainerKind::GroundTruth)?;
    put_u64(w, gt.n as u64)?;
    put_u64(w, gt.q as u64)?;
    put_u64(w, gt.r as u64)?;
    put_u64(w, gt.seed)?;
    put_f64(w, gt.kappa)?;
    put_f64(w, gt.mu)?;
    put_matrix(w, gt.u_star.matrix())?;
    put_matrix(w, &Matrix::from_column_slice(gt.r, 1, &gt.sigma_star))?;
    put_matrix(w, &gt.b_star)?;
    put_matrix(w, &gt.x_star)?;
    Ok(())
}

pub fn read_ground_truth(r: &mut impl Read) -> Result<GroundTruth, ModelError> {
    expect_header(r, ContainerKind::GroundTruth)?;
    let n = get_usize(r)?;
    let q = get_usize(r)?;
    let rank = get_usize(r)?;
    let seed = get_u64(r)?;
    let kappa = get_f64(r)?;
    let mu = get_f64(r)?;
    let u = get_shaped(r, n, rank, "U⋆")?;
    let sigma = get_shaped(r, rank, 1, "σ⋆")?;
    let b_star = get_shaped(r, rank, q, "B⋆")?;
    let x_star = get_shaped(r, n, q, "X⋆")?;
    Ok(GroundTruth {
        n,
        q,
        r: rank,
        u_star: OrthonormalBasis::new(u)?,
        sigma_star: sigma.iter().copied().collect(),
        b_star,
        x_star,
        kappa,
        mu,
        seed,
    })
}

pub fn write_sketch_set(w: &mut impl Write, s: &SketchSet) -> Result<(), ModelError> {
    put_header(w, ContainerKind::SketchSet)?;
    put_u64(w, s.m as u64)?;
    put_u64(w, s.n as u64)?;
    put_u64(w, s.q as u64)?;
    let iterations = match s.mode {
        SplitMode::Shared => 0,
        SplitMode::Split { iterations } => iterations as u64,
    };
    put_u64(w, iterations)?;
    put_u64(w, s.phases.len() as u64)?;
    for phase in &s.phases {
        let (kind, index) = phase.label.code();
        put_u32(w, kind)?;
        put_u32(w, index)?;
        for c in &phase.columns {
            put_matrix(w, &c.a)?;
            put_matrix(w, &Matrix::from_column_slice(c.y.len(), 1, c.y.as_slice()))?;
        }
    }
    Ok(())
}

pub fn read_sketch_set(r: &mut impl Read) -> Result<SketchSet, ModelError> {
    expect_header(r, ContainerKind::SketchSet)?;
    let m = get_usize(r)?;
    let n = get_usize(r)?;
    let q = get_usize(r)?;
    let iterations = get_usize(r)?;
    let count = get_usize(r)?;
    let mode = if iterations == 0 {
        SplitMode::Shared
    } else {
        SplitMode::Split { iterations }
    };
    let expected = match mode {
        SplitMode::Shared => 1,
        SplitMode::Split { iterations } => 2 * iterations + 2,
    };
    if count != expected {
        return Err(ModelError::Format(format!("{count} phases, expected {expected}")));
    }
    let mut phases = Vec::with_capacity(count);
    for _ in 0..count {
        let kind = get_u32(r)?;
        let index = get_u32(r)?;
        let label = PhaseLabel::from_code(kind, index)
            .ok_or_else(|| ModelError::Format(format!("unknown phase label {kind}/{index}")))?;
        let mut columns = Vec::with_capacity(q);
        for _ in 0..q {
            let a = get_shaped(r, m, n, "A_k")?;
            let y = get_shaped(r, m, 1, "y_k")?;
            columns.push(ColumnSketch {
                a,
                y: Vector::from_column_slice(y.as_slice()),
            });
        }
        phases.push(Phase { label, columns });
    }
    Ok(SketchSet { m, n, q, mode, phases })
}

/// Writes a factor pair `(U, B)`.
pub fn write_factors(w: &mut impl Write, u: &OrthonormalBasis, b: &Matrix) -> Result<(), ModelError> {
    if b.nrows() != u.rank() {
        return Err(ModelError::DimensionMismatch(format!(
            "U has rank {} but B has {} rows",
            u.rank(),
            b.nrows()
        )));
    }
    put_header(w, ContainerKind::FactorEstimate)?;
    put_matrix(w, u.matrix())?;
    put_matrix(w, b)?;
    Ok(())
}

pub fn read_factors(r: &mut impl Read) -> Result<(OrthonormalBasis, Matrix), ModelError> {
    expect_header(r, ContainerKind::FactorEstimate)?;
    let u = OrthonormalBasis::new(get_matrix(r)?)?;
    let b = get_matrix(r)?;
    if b.nrows() != u.rank() {
        return Err(ModelError::Format(format!(
            "B has {} rows, expected {}",
            b.nrows(),
            u.rank()
        )));
    }
    Ok((u, b))
}
