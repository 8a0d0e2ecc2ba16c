//! Loss matrix files.
//!
//! Two formats, chosen by file extension:
//!
//! * `.csv`: header `t,i,loss`, one row per entry, `t` the 1-based round and
//!   `i` the 1-based expert. Every `(t, i)` pair must appear exactly once.
//! * anything else: binary. A 16-byte header holds `N` then `T` as
//!   little-endian `u64`, followed by the `N×T` loss matrix (experts by rounds)
//!   in row-major order as little-endian `f64`, so entry `(i, t)` sits at byte
//!   offset `16 + 8·(i·T + t)` with zero-based indices.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use lowrank_core::adversaries::LossMatrix;
use lowrank_core::linalg::{Matrix, Vector};

use crate::error::{io_err, HarnessError, Result};

fn is_csv(path: &Path) -> bool {
    path.extension().is_some_and(|e| e.eq_ignore_ascii_case("csv"))
}

pub fn write_losses(path: &Path, losses: &LossMatrix) -> Result<()> {
    if is_csv(path) {
        write_csv(path, losses)
    } else {
        write_binary(path, losses)
    }
}

pub fn read_losses(path: &Path) -> Result<LossMatrix> {
    if is_csv(path) {
        read_csv(path)
    } else {
        read_binary(path)
    }
}

fn bad(path: &Path, msg: impl std::fmt::Display) -> HarnessError {
    HarnessError::Config(format!("{}: {msg}", path.display()))
}

fn write_csv(path: &Path, losses: &LossMatrix) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| io_err(path, e))?;
    w.write_record(["t", "i", "loss"]).map_err(|e| io_err(path, e))?;
    for (t, col) in losses.columns().iter().enumerate() {
        for (i, v) in col.iter().enumerate() {
            w.write_record([(t + 1).to_string(), (i + 1).to_string(), v.to_string()])
                .map_err(|e| io_err(path, e))?;
        }
    }
    w.flush().map_err(|e| io_err(path, e))
}

fn read_csv(path: &Path) -> Result<LossMatrix> {
    let mut r = csv::Reader::from_path(path).map_err(|e| bad(path, e))?;
    let headers = r.headers().map_err(|e| bad(path, e))?.clone();
    if headers.iter().collect::<Vec<_>>() != ["t", "i", "loss"] {
        return Err(bad(path, "expected header t,i,loss"));
    }
    let mut entries = Vec::new();
    let (mut n, mut t) = (0usize, 0usize);
    for (line, rec) in r.records().enumerate() {
        let rec = rec.map_err(|e| bad(path, e))?;
        let row = line + 2;
        let field = |k: usize| rec.get(k).unwrap_or("");
        let ti: usize = field(0).parse().map_err(|_| bad(path, format!("line {row}: bad t {:?}", field(0))))?;
        let ii: usize = field(1).parse().map_err(|_| bad(path, format!("line {row}: bad i {:?}", field(1))))?;
        let v: f64 = field(2).parse().map_err(|_| bad(path, format!("line {row}: bad loss {:?}", field(2))))?;
        if ti == 0 || ii == 0 {
            return Err(bad(path, format!("line {row}: t and i are 1-based")));
        }
        n = n.max(ii);
        t = t.max(ti);
        entries.push((ti - 1, ii - 1, v));
    }
    if entries.len() != n * t {
        return Err(bad(path, format!("{} entries for a {n}x{t} matrix", entries.len())));
    }
    let mut m = Matrix::from_element(n, t, f64::NAN);
    for (ti, ii, v) in entries {
        if !m[(ii, ti)].is_nan() {
            return Err(bad(path, format!("duplicate entry t={} i={}", ti + 1, ii + 1)));
        }
        m[(ii, ti)] = v;
    }
    to_loss_matrix(path, &m)
}

fn write_binary(path: &Path, losses: &LossMatrix) -> Result<()> {
    let file = File::create(path).map_err(|e| io_err(path, e))?;
    let mut w = BufWriter::new(file);
    let (n, t) = (losses.experts(), losses.rounds());
    let mut put = |bytes: &[u8]| w.write_all(bytes).map_err(|e| io_err(path, e));
    put(&(n as u64).to_le_bytes())?;
    put(&(t as u64).to_le_bytes())?;
    for i in 0..n {
        for col in losses.columns() {
            put(&col[i].to_le_bytes())?;
        }
    }
    w.flush().map_err(|e| io_err(path, e))
}

fn read_binary(path: &Path) -> Result<LossMatrix> {
    let file = File::open(path).map_err(|e| bad(path, e))?;
    let mut bytes = Vec::new();
    BufReader::new(file).read_to_end(&mut bytes).map_err(|e| bad(path, e))?;
    if bytes.len() < 16 {
        return Err(bad(path, "shorter than the 16-byte header"));
    }
    let word = |k: usize| u64::from_le_bytes(bytes[8 * k..8 * k + 8].try_into().expect("8 bytes"));
    let (n, t) = (word(0) as usize, word(1) as usize);
    let expected = n.checked_mul(t).and_then(|c| c.checked_mul(8)).and_then(|c| c.checked_add(16));
    if expected != Some(bytes.len()) {
        return Err(bad(path, format!("{} bytes do not match an {n}x{t} matrix", bytes.len())));
    }
    let m = Matrix::from_fn(n, t, |i, s| {
        let off = 16 + 8 * (i * t + s);
        f64::from_le_bytes(bytes[off..off + 8].try_into().expect("8 bytes"))
    });
    to_loss_matrix(path, &m)
}

fn to_loss_matrix(path: &Path, m: &Matrix) -> Result<LossMatrix> {
    if m.nrows() == 0 {
        return Err(bad(path, "no experts"));
    }
    let cols: Vec<Vector> = m.column_iter().map(|c| c.into_owned()).collect();
    LossMatrix::from_columns(m.nrows(), cols).map_err(|e| bad(path, e))
}
