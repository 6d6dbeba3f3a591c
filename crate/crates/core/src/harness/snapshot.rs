//! Binary state snapshots.
//!
//! Little-endian layout: magic `HFEM`, version `u32`, interior nodes per
//! side `m` as `u32`, spacing `h` as `f64`, time `t` as `f64`, then `m²`
//! complex coefficients as interleaved `(re, im)` `f64` pairs in node
//! index order.

use num_complex::Complex64;
use std::io::{self, Read, Write};
use std::path::Path;

pub const MAGIC: &[u8; 4] = b"HFEM";
pub const VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq)]
pub struct SnapshotFile {
    pub interior_per_side: u32,
    pub spacing: f64,
    pub time: f64,
    pub state: Vec<Complex64>,
}

pub fn write_snapshot<W: Write>(
    mut w: W,
    interior_per_side: u32,
    spacing: f64,
    time: f64,
    state: &[Complex64],
) -> io::Result<()> {
    let m = interior_per_side as usize;
    if state.len() != m * m {
        return Err(io::Error::new(
            io::ErrorKind::InvalidInput,
            format!("state has {} values, expected {}", state.len(), m * m),
        ));
    }
    let mut buf = Vec::with_capacity(28 + 16 * state.len());
    buf.extend_from_slice(MAGIC);
    buf.extend_from_slice(&VERSION.to_le_bytes());
    buf.extend_from_slice(&interior_per_side.to_le_bytes());
    buf.extend_from_slice(&spacing.to_le_bytes());
    buf.extend_from_slice(&time.to_le_bytes());
    for z in state {
        buf.extend_from_slice(&z.re.to_le_bytes());
        buf.extend_from_slice(&z.im.to_le_bytes());
    }
    w.write_all(&buf)
}

fn bad(msg: impl Into<String>) -> io::Error {
    io::Error::new(io::ErrorKind::InvalidData, msg.into())
}

pub fn read_snapshot<R: Read>(mut r: R) -> io::Result<SnapshotFile> {
    let mut head = [0u8; 28];
    r.read_exact(&mut head)?;
    if &head[0..4] != MAGIC {
        return Err(bad("not a snapshot file (bad magic)"));
    }
    let version = u32::from_le_bytes(head[4..8].try_into().unwrap());
    if version != VERSION {
        return Err(bad(format!("unsupported snapshot version {version}")));
    }
    let m = u32::from_le_bytes(head[8..12].try_into().unwrap());
    let spacing = f64::from_le_bytes(head[12..20].try_into().unwrap());
    let time = f64::from_le_bytes(head[20..28].try_into().unwrap());
    let len = (m as usize) * (m as usize);
    let mut body = vec![0u8; 16 * len];
    r.read_exact(&mut body)?;
    let state = body
        .chunks_exact(16)
        .map(|c| {
            Complex64::new(
                f64::from_le_bytes(c[0..8].try_into().unwrap()),
                f64::from_le_bytes(c[8..16].try_into().unwrap()),
            )
        })
        .collect();
    let mut rest = [0u8; 1];
    if r.read(&mut rest)? != 0 {
        return Err(bad("trailing bytes after snapshot payload"));
    }
    Ok(SnapshotFile {
        interior_per_side: m,
        spacing,
        time,
        state,
    })
}

pub fn save(
    path: &Path,
    interior_per_side: u32,
    spacing: f64,
    time: f64,
    state: &[Complex64],
) -> io::Result<()> {
    let file = std::fs::File::create(path)?;
    write_snapshot(io::BufWriter::new(file), interior_per_side, spacing, time, state)
}

pub fn load(path: &Path) -> io::Result<SnapshotFile> {
    read_snapshot(io::BufReader::new(std::fs::File::open(path)?))
}
