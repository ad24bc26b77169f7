//! Plain-text export of assembled systems.
//!
//! Matrices go to a coordinate file, one `row col value` triple per line,
//! 0-based, sorted row-major, values with 17 significant digits. Loads and
//! constraints go to a small versioned JSON file next to it.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::StiffnessSystem;
use crate::linalg::CsrMatrix;
use crate::{Error, Result};

pub const SYSTEM_FORMAT_VERSION: u32 = 1;

pub fn write_coo(matrix: &CsrMatrix, path: &Path) -> Result<()> {
    let f = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(f);
    let io = |e| Error::io(path, e);
    writeln!(w, "% {} {} {}", matrix.nrows(), matrix.ncols(), matrix.nnz()).map_err(io)?;
    for (r, c, v) in matrix.iter() {
        writeln!(w, "{r} {c} {v:.16e}").map_err(io)?;
    }
    w.flush().map_err(io)
}

pub fn read_coo(path: &Path) -> Result<CsrMatrix> {
    let f = File::open(path).map_err(|e| Error::io(path, e))?;
    let bad = |line: usize| Error::Format(format!("{}:{}: malformed coordinate line", path.display(), line + 1));
    let mut dims = None;
    let mut triplets = Vec::new();
    for (k, line) in BufReader::new(f).lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        let fields: Vec<&str> = line.trim_start_matches('%').split_whitespace().collect();
        if line.starts_with('%') {
            let parse = |s: &str| s.parse::<usize>().map_err(|_| bad(k));
            if fields.len() != 3 {
                return Err(bad(k));
            }
            dims = Some((parse(fields[0])?, parse(fields[1])?));
            continue;
        }
        if fields.len() != 3 {
            return Err(bad(k));
        }
        let r = fields[0].parse::<usize>().map_err(|_| bad(k))?;
        let c = fields[1].parse::<usize>().map_err(|_| bad(k))?;
        let v = fields[2].parse::<f64>().map_err(|_| bad(k))?;
        triplets.push((r, c, v));
    }
    let (nr, nc) = dims.ok_or_else(|| Error::Format(format!("{}: missing size header", path.display())))?;
    if triplets.iter().any(|&(r, c, _)| r >= nr || c >= nc) {
        return Err(Error::Format(format!("{}: entry out of bounds", path.display())));
    }
    Ok(CsrMatrix::from_triplets(nr, nc, &triplets))
}

#[derive(Serialize, Deserialize)]
struct SystemFile {
    format_version: u32,
    dofs: usize,
    matrix: String,
    load: Vec<f64>,
    constrained: Vec<(usize, f64)>,
}

/// Writes `K` to `<stem>.coo` and load plus constraints to `<stem>.json`
/// inside `dir`.
pub fn write_system(system: &StiffnessSystem, dir: &Path, stem: &str) -> Result<()> {
    let coo = format!("{stem}.coo");
    write_coo(&system.k, &dir.join(&coo))?;
    let file = SystemFile {
        format_version: SYSTEM_FORMAT_VERSION,
        dofs: system.dof_count(),
        matrix: coo,
        load: system.load.clone(),
        constrained: system.constrained.clone(),
    };
    let path = dir.join(format!("{stem}.json"));
    let json = serde_json::to_string(&file).map_err(|e| Error::Format(e.to_string()))?;
    std::fs::write(&path, json + "\n").map_err(|e| Error::io(&path, e))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn coo_round_trip_sorted() {
        let m = CsrMatrix::from_triplets(3, 3, &[(2, 0, 1.0 / 3.0), (0, 1, -2.5e-7), (0, 0, 4.0), (2, 2, 1e300)]);
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("k.coo");
        write_coo(&m, &p).unwrap();
        let text = std::fs::read_to_string(&p).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "% 3 3 4");
        assert_eq!(lines[1], "0 0 4.0000000000000000e0");
        assert!(lines[2].starts_with("0 1 "));
        assert!(lines[3].starts_with("2 0 3.3333333333333331e-1"));
        assert_eq!(read_coo(&p).unwrap(), m);
    }
}
