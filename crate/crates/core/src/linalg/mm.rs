//! Matrix Market reader and writer.
//!
//! Supported: `coordinate real|integer general|symmetric` into [`SparseMatrix`],
//! and `array real|integer general` into [`DenseMatrix`]. Values are written
//! with 17 significant digits so a write/read cycle is exact.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use super::{DenseMatrix, LinalgError, SparseMatrix};

/// A matrix read from a Matrix Market file.
#[derive(Clone, Debug, PartialEq)]
pub enum MatrixMarket {
    Sparse(SparseMatrix),
    Dense(DenseMatrix),
}

impl MatrixMarket {
    pub fn shape(&self) -> (usize, usize) {
        match self {
            MatrixMarket::Sparse(s) => (s.nrows(), s.ncols()),
            MatrixMarket::Dense(d) => d.shape(),
        }
    }

    pub fn into_dense(self) -> DenseMatrix {
        match self {
            MatrixMarket::Sparse(s) => s.to_dense(),
            MatrixMarket::Dense(d) => d,
        }
    }

    pub fn into_sparse(self) -> SparseMatrix {
        match self {
            MatrixMarket::Sparse(s) => s,
            MatrixMarket::Dense(d) => SparseMatrix::from_dense(&d, 0.0),
        }
    }
}

impl From<SparseMatrix> for MatrixMarket {
    fn from(m: SparseMatrix) -> Self {
        MatrixMarket::Sparse(m)
    }
}

impl From<DenseMatrix> for MatrixMarket {
    fn from(m: DenseMatrix) -> Self {
        MatrixMarket::Dense(m)
    }
}

#[derive(Clone, Copy, PartialEq)]
enum Layout {
    Coordinate,
    Array,
}

fn malformed(line: usize, msg: impl Into<String>) -> LinalgError {
    LinalgError::MatrixMarket {
        line,
        msg: msg.into(),
    }
}

pub fn read_matrix_market(path: impl AsRef<Path>) -> Result<MatrixMarket, LinalgError> {
    let file = File::open(path.as_ref())?;
    parse_matrix_market(BufReader::new(file))
}

pub fn read_sparse(path: impl AsRef<Path>) -> Result<SparseMatrix, LinalgError> {
    read_matrix_market(path).map(MatrixMarket::into_sparse)
}

pub fn read_dense(path: impl AsRef<Path>) -> Result<DenseMatrix, LinalgError> {
    read_matrix_market(path).map(MatrixMarket::into_dense)
}

pub fn parse_matrix_market(reader: impl BufRead) -> Result<MatrixMarket, LinalgError> {
    let mut lines = reader.lines().enumerate();
    let (_, header) = lines.next().ok_or_else(|| malformed(1, "empty file"))?;
    let header = header?;
    let tokens: Vec<String> = header
        .split_whitespace()
        .map(str::to_ascii_lowercase)
        .collect();
    if tokens.len() != 5 || tokens[0] != "%%matrixmarket" || tokens[1] != "matrix" {
        return Err(malformed(
            1,
            "expected '%%MatrixMarket matrix <format> <field> <symmetry>'",
        ));
    }
    let layout = match tokens[2].as_str() {
        "coordinate" => Layout::Coordinate,
        "array" => Layout::Array,
        other => return Err(malformed(1, format!("unknown format '{other}'"))),
    };
    match tokens[3].as_str() {
        "real" | "double" | "integer" => {}
        other => {
            return Err(malformed(
                1,
                format!("unsupported field '{other}', only real is accepted"),
            ))
        }
    }
    let symmetric = match tokens[4].as_str() {
        "general" => false,
        "symmetric" if layout == Layout::Coordinate => true,
        other => return Err(malformed(1, format!("unsupported symmetry '{other}'"))),
    };

    let mut data_lines = lines.filter_map(|(i, l)| match l {
        Ok(l) => {
            let t = l.trim();
            if t.is_empty() || t.starts_with('%') {
                None
            } else {
                Some(Ok((i + 1, t.to_string())))
            }
        }
        Err(e) => Some(Err(e)),
    });

    let (size_line, size) = data_lines
        .next()
        .ok_or_else(|| malformed(1, "missing size line"))??;
    let dims: Vec<usize> = size
        .split_whitespace()
        .map(|t| {
            t.parse::<usize>()
                .map_err(|_| malformed(size_line, format!("bad size '{t}'")))
        })
        .collect::<Result<_, _>>()?;

    match layout {
        Layout::Coordinate => {
            let [rows, cols, nnz] = dims[..] else {
                return Err(malformed(
                    size_line,
                    "coordinate size line needs rows cols nnz",
                ));
            };
            if symmetric && rows != cols {
                return Err(malformed(size_line, "symmetric matrix must be square"));
            }
            let mut triplets = Vec::with_capacity(if symmetric { 2 * nnz } else { nnz });
            for _ in 0..nnz {
                let (ln, text) = data_lines
                    .next()
                    .ok_or_else(|| malformed(size_line, "fewer entries than declared"))??;
                let mut it = text.split_whitespace();
                let mut index = |what: &str, bound: usize| -> Result<usize, LinalgError> {
                    let t = it
                        .next()
                        .ok_or_else(|| malformed(ln, format!("missing {what} index")))?;
                    let v: usize = t
                        .parse()
                        .map_err(|_| malformed(ln, format!("bad {what} index '{t}'")))?;
                    if v == 0 || v > bound {
                        return Err(malformed(
                            ln,
                            format!("{what} index {v} out of bounds 1..={bound}"),
                        ));
                    }
                    Ok(v - 1)
                };
                let i = index("row", rows)?;
                let j = index("column", cols)?;
                let t = it.next().ok_or_else(|| malformed(ln, "missing value"))?;
                let v: f64 = t
                    .parse()
                    .map_err(|_| malformed(ln, format!("bad value '{t}'")))?;
                if it.next().is_some() {
                    return Err(malformed(
                        ln,
                        "trailing tokens (complex entries are not supported)",
                    ));
                }
                triplets.push((i, j, v));
                if symmetric && i != j {
                    triplets.push((j, i, v));
                }
            }
            Ok(MatrixMarket::Sparse(SparseMatrix::from_triplets(
                rows, cols, &triplets,
            )?))
        }
        Layout::Array => {
            let [rows, cols] = dims[..] else {
                return Err(malformed(size_line, "array size line needs rows cols"));
            };
            let mut values = Vec::with_capacity(rows * cols);
            while values.len() < rows * cols {
                let (ln, text) = data_lines
                    .next()
                    .ok_or_else(|| malformed(size_line, "fewer entries than declared"))??;
                for t in text.split_whitespace() {
                    values.push(
                        t.parse::<f64>()
                            .map_err(|_| malformed(ln, format!("bad value '{t}'")))?,
                    );
                }
            }
            if values.len() != rows * cols {
                return Err(malformed(size_line, "more entries than declared"));
            }
            Ok(MatrixMarket::Dense(DenseMatrix::from_col_major(
                rows, cols, values,
            )?))
        }
    }
}

pub fn write_matrix_market(m: &MatrixMarket, path: impl AsRef<Path>) -> Result<(), LinalgError> {
    let mut w = BufWriter::new(File::create(path.as_ref())?);
    match m {
        MatrixMarket::Sparse(s) => {
            writeln!(w, "%%MatrixMarket matrix coordinate real general")?;
            writeln!(w, "{} {} {}", s.nrows(), s.ncols(), s.nnz())?;
            for (i, j, v) in s.triplets() {
                writeln!(w, "{} {} {:.16e}", i + 1, j + 1, v)?;
            }
        }
        MatrixMarket::Dense(d) => {
            writeln!(w, "%%MatrixMarket matrix array real general")?;
            writeln!(w, "{} {}", d.nrows(), d.ncols())?;
            for v in d.as_slice() {
                writeln!(w, "{v:.16e}")?;
            }
        }
    }
    w.flush()?;
    Ok(())
}

pub fn write_sparse(m: &SparseMatrix, path: impl AsRef<Path>) -> Result<(), LinalgError> {
    write_matrix_market(&MatrixMarket::Sparse(m.clone()), path)
}

pub fn write_dense(m: &DenseMatrix, path: impl AsRef<Path>) -> Result<(), LinalgError> {
    write_matrix_market(&MatrixMarket::Dense(m.clone()), path)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Cursor;

    fn parse(text: &str) -> Result<MatrixMarket, LinalgError> {
        parse_matrix_market(Cursor::new(text))
    }

    #[test]
    fn identity_coordinate() {
        let m = parse(
            "%%MatrixMarket matrix coordinate real general\n% comment\n2 2 2\n1 1 1.0\n2 2 1.0\n",
        )
        .unwrap();
        assert_eq!(m, MatrixMarket::Sparse(SparseMatrix::identity(2)));
    }

    #[test]
    fn array_column() {
        let m = parse("%%MatrixMarket matrix array real general\n3 1\n1.5\n-2\n3e0\n").unwrap();
        let MatrixMarket::Dense(d) = m else {
            panic!("expected dense")
        };
        assert_eq!(d.as_slice(), &[1.5, -2.0, 3.0]);
    }

    #[test]
    fn symmetric_storage_is_expanded() {
        let m = parse("%%MatrixMarket matrix coordinate real symmetric\n2 2 2\n1 1 4\n2 1 -1\n")
            .unwrap();
        let s = m.into_sparse();
        assert_eq!(s.get(0, 1), -1.0);
        assert_eq!(s.get(1, 0), -1.0);
        assert_eq!(s.nnz(), 3);
    }

    #[test]
    fn error_paths() {
        assert!(parse("").is_err());
        assert!(parse("%%MatrixMarket tensor coordinate real general\n1 1 0\n").is_err());
        assert!(
            parse("%%MatrixMarket matrix coordinate complex general\n1 1 1\n1 1 1 0\n").is_err()
        );
        assert!(parse("%%MatrixMarket matrix coordinate pattern general\n1 1 1\n1 1\n").is_err());
        assert!(parse("%%MatrixMarket matrix coordinate real general\n2 2 1\n3 1 1.0\n").is_err());
        assert!(parse("%%MatrixMarket matrix coordinate real general\n2 2 2\n1 1 1.0\n").is_err());
        assert!(parse("%%MatrixMarket matrix array real general\n2 1\n1.0\n").is_err());
        assert!(parse("%%MatrixMarket matrix array real general\n1 1\nabc\n").is_err());
    }

    #[test]
    fn writes_empty_sparse_and_scalar_dense() {
        let dir = tempfile::tempdir().unwrap();
        let empty = SparseMatrix::from_triplets(3, 2, &[]).unwrap();
        let p = dir.path().join("empty.mtx");
        write_sparse(&empty, &p).unwrap();
        assert_eq!(read_sparse(&p).unwrap(), empty);
        let one = DenseMatrix::from_col_major(1, 1, vec![std::f64::consts::PI]).unwrap();
        let p = dir.path().join("one.mtx");
        write_dense(&one, &p).unwrap();
        assert_eq!(read_dense(&p).unwrap(), one);
    }
}
