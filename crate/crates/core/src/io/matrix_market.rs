//! Matrix Market reader. Inputs are densified; sparse storage is not kept.

use std::fs::File;
use std::io::{BufRead, BufReader};
use std::path::Path;

use crate::error::{Error, Result};
use crate::linalg::DenseMatrix;

/// Densification refuses anything larger than this many entries.
pub const MAX_DENSE_ENTRIES: usize = 1 << 26;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Format {
    Coordinate,
    Array,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Symmetry {
    General,
    Symmetric,
    SkewSymmetric,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Header {
    pub format: Format,
    pub symmetry: Symmetry,
}

pub fn read_matrix_market(path: impl AsRef<Path>) -> Result<DenseMatrix> {
    let f = File::open(path.as_ref())?;
    parse_matrix_market(BufReader::new(f))
}

pub fn parse_matrix_market(reader: impl BufRead) -> Result<DenseMatrix> {
    let mut lines = reader.lines().enumerate().map(|(i, l)| (i + 1, l));
    let (_, banner) = lines.next().ok_or_else(|| parse_err(1, "empty input"))?;
    let header = parse_banner(&banner?)?;

    // Skip comments and blank lines up to the size line.
    let (size_line, size) = loop {
        let (no, line) = lines.next().ok_or_else(|| parse_err(1, "missing size line"))?;
        let line = line?;
        let t = line.trim();
        if !t.is_empty() && !t.starts_with('%') {
            break (no, t.to_string());
        }
    };
    let dims: Vec<usize> = size
        .split_whitespace()
        .map(|t| t.parse::<usize>().map_err(|_| parse_err(size_line, format!("bad size field {t:?}"))))
        .collect::<Result<_>>()?;
    let want = match header.format {
        Format::Coordinate => 3,
        Format::Array => 2,
    };
    if dims.len() != want {
        return Err(parse_err(size_line, format!("expected {want} size fields, got {}", dims.len())));
    }
    let (m, n) = (dims[0], dims[1]);
    if m.checked_mul(n).is_none_or(|e| e > MAX_DENSE_ENTRIES) {
        return Err(parse_err(size_line, format!("{m}x{n} is too large to densify")));
    }
    if header.symmetry != Symmetry::General && m != n {
        return Err(parse_err(size_line, format!("symmetric storage requires a square matrix, got {m}x{n}")));
    }

    let mut a = DenseMatrix::zeros(m, n);
    let mut data = lines.filter_map(|(no, line)| match line {
        Ok(l) if l.trim().is_empty() || l.trim_start().starts_with('%') => None,
        Ok(l) => Some(Ok((no, l))),
        Err(e) => Some(Err(Error::from(e))),
    });
    let mut last_line = size_line;
    match header.format {
        Format::Coordinate => {
            let nnz = dims[2];
            for _ in 0..nnz {
                let (no, line) = data
                    .next()
                    .ok_or_else(|| parse_err(last_line, format!("expected {nnz} entries")))??;
                last_line = no;
                let f: Vec<&str> = line.split_whitespace().collect();
                if f.len() != 3 {
                    return Err(parse_err(no, format!("expected `row col value`, got {} fields", f.len())));
                }
                let i = parse_index(f[0], m, no)?;
                let j = parse_index(f[1], n, no)?;
                let v = parse_value(f[2], no)?;
                place(&mut a, header.symmetry, i, j, v, no)?;
            }
        }
        Format::Array => {
            // Column-major; symmetric variants store only the lower triangle.
            for j in 0..n {
                let i0 = match header.symmetry {
                    Symmetry::General => 0,
                    Symmetry::Symmetric => j,
                    Symmetry::SkewSymmetric => j + 1,
                };
                for i in i0..m {
                    let (no, line) = data
                        .next()
                        .ok_or_else(|| parse_err(last_line, "too few array entries"))??;
                    last_line = no;
                    let v = parse_value(line.trim(), no)?;
                    place(&mut a, header.symmetry, i, j, v, no)?;
                }
            }
        }
    }
    if let Some(extra) = data.next() {
        let (no, _) = extra?;
        return Err(parse_err(no, "unexpected data after the last entry"));
    }
    Ok(a)
}

pub fn parse_banner(line: &str) -> Result<Header> {
    let t: Vec<String> = line.split_whitespace().map(str::to_ascii_lowercase).collect();
    if t.len() != 5 || t[0] != "%%matrixmarket" || t[1] != "matrix" {
        return Err(parse_err(1, format!("malformed banner {line:?}")));
    }
    let format = match t[2].as_str() {
        "coordinate" => Format::Coordinate,
        "array" => Format::Array,
        f => return Err(parse_err(1, format!("unknown format {f:?}"))),
    };
    match t[3].as_str() {
        "real" | "integer" | "double" => {}
        f => return Err(parse_err(1, format!("unsupported field {f:?} (only real data is read)"))),
    }
    let symmetry = match t[4].as_str() {
        "general" => Symmetry::General,
        "symmetric" => Symmetry::Symmetric,
        "skew-symmetric" => Symmetry::SkewSymmetric,
        s => return Err(parse_err(1, format!("unsupported symmetry {s:?}"))),
    };
    Ok(Header { format, symmetry })
}

fn place(a: &mut DenseMatrix, sym: Symmetry, i: usize, j: usize, v: f64, line: usize) -> Result<()> {
    // Duplicates are summed.
    a[(i, j)] += v;
    match sym {
        Symmetry::General => {}
        Symmetry::Symmetric if i != j => a[(j, i)] += v,
        Symmetry::Symmetric => {}
        Symmetry::SkewSymmetric if i == j => {
            return Err(parse_err(line, "skew-symmetric matrix stores a diagonal entry"));
        }
        Symmetry::SkewSymmetric => a[(j, i)] -= v,
    }
    Ok(())
}

fn parse_index(tok: &str, dim: usize, line: usize) -> Result<usize> {
    match tok.parse::<usize>() {
        Ok(k) if (1..=dim).contains(&k) => Ok(k - 1),
        Ok(k) => Err(parse_err(line, format!("index {k} out of range 1..={dim}"))),
        Err(_) => Err(parse_err(line, format!("bad index {tok:?}"))),
    }
}

fn parse_value(tok: &str, line: usize) -> Result<f64> {
    match tok.parse::<f64>() {
        Ok(v) if v.is_finite() => Ok(v),
        _ => Err(parse_err(line, format!("bad value {tok:?}"))),
    }
}

fn parse_err(line: usize, msg: impl Into<String>) -> Error {
    Error::Parse {
        line,
        msg: msg.into(),
    }
}
