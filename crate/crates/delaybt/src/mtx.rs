//! Dense Matrix Market ("array real general") files, column-major.
//! Values are written with 17 significant digits so doubles round-trip.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use delaybt_core::DMatrix;

use crate::error::FileError;

pub const HEADER: &str = "%%MatrixMarket matrix array real general";

pub fn format_mtx(m: &DMatrix<f64>) -> String {
    let mut out = String::with_capacity(32 + 25 * m.len());
    out.push_str(HEADER);
    out.push('\n');
    let _ = writeln!(out, "{} {}", m.nrows(), m.ncols());
    // DMatrix storage is column-major already
    for v in m.iter() {
        let _ = writeln!(out, "{:.16e}", v);
    }
    out
}

pub fn parse_mtx(text: &str, path: &Path) -> Result<DMatrix<f64>, FileError> {
    let bad = |msg: String| FileError::Matrix {
        path: path.to_path_buf(),
        msg,
    };
    let mut lines = text.lines();
    let header = lines.next().ok_or_else(|| bad("empty file".into()))?;
    let words: Vec<String> = header.split_whitespace().map(|w| w.to_ascii_lowercase()).collect();
    if words != ["%%matrixmarket", "matrix", "array", "real", "general"] {
        return Err(bad(format!("unsupported header {:?}", header)));
    }
    let mut tokens = lines
        .filter(|l| !l.trim_start().starts_with('%'))
        .flat_map(|l| l.split_whitespace());
    let mut dim = |what: &str| -> Result<usize, FileError> {
        tokens
            .next()
            .ok_or_else(|| bad(format!("missing {}", what)))?
            .parse()
            .map_err(|e| bad(format!("bad {}: {}", what, e)))
    };
    let rows = dim("row count")?;
    let cols = dim("column count")?;
    let values = tokens
        .map(|t| t.parse::<f64>().map_err(|e| bad(format!("bad value {:?}: {}", t, e))))
        .collect::<Result<Vec<_>, _>>()?;
    if values.len() != rows * cols {
        return Err(bad(format!("expected {} values, found {}", rows * cols, values.len())));
    }
    Ok(DMatrix::from_vec(rows, cols, values))
}

pub fn write_mtx(path: &Path, m: &DMatrix<f64>) -> Result<(), FileError> {
    fs::write(path, format_mtx(m)).map_err(FileError::io(path))
}

pub fn read_mtx(path: &Path) -> Result<DMatrix<f64>, FileError> {
    let text = fs::read_to_string(path).map_err(FileError::io(path))?;
    parse_mtx(&text, path)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn text_round_trip_is_exact() {
        let m = DMatrix::from_row_slice(2, 3, &[1.0 / 3.0, -0.0, 1e-310, f64::MAX, -2.5e-17, 12345.678901234567]);
        let back = parse_mtx(&format_mtx(&m), Path::new("m.mtx")).unwrap();
        assert_eq!(m.shape(), back.shape());
        for (a, b) in m.iter().zip(back.iter()) {
            assert_eq!(a.to_bits(), b.to_bits());
        }
    }

    #[test]
    fn column_major_layout() {
        let m = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 3.0, 4.0]);
        let text = format_mtx(&m);
        let vals: Vec<f64> = text.lines().skip(2).map(|l| l.parse().unwrap()).collect();
        assert_eq!(vals, vec![1.0, 3.0, 2.0, 4.0]);
    }

    #[test]
    fn comments_and_errors() {
        let p = Path::new("x.mtx");
        let ok = parse_mtx("%%MatrixMarket matrix array real general\n% note\n1 2\n5\n6\n", p).unwrap();
        assert_eq!(ok, DMatrix::from_row_slice(1, 2, &[5.0, 6.0]));
        assert!(parse_mtx("%%MatrixMarket matrix coordinate real general\n1 1\n1\n", p).is_err());
        assert!(parse_mtx("%%MatrixMarket matrix array real general\n2 2\n1\n", p).is_err());
        assert!(parse_mtx("%%MatrixMarket matrix array real general\n1 1\nabc\n", p).is_err());
    }
}
