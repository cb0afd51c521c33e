//! Two-column `(grid, value)` CSV tables. Values may be `+inf`.

use std::path::Path;

use dcu_core::conjugate::TabulatedConvexFunction;
use dcu_core::ExtendedReal;

use crate::error::RunError;

pub fn load_table(path: &Path, radial: bool) -> Result<TabulatedConvexFunction, RunError> {
    let bad = |line: usize, message: String| RunError::Config {
        path: path.to_path_buf(),
        line,
        message,
    };
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .trim(csv::Trim::All)
        .comment(Some(b'#'))
        .from_path(path)
        .map_err(|e| match e.into_kind() {
            csv::ErrorKind::Io(io) => RunError::io(path, io),
            other => bad(1, format!("{other:?}")),
        })?;
    let (mut axis, mut values) = (Vec::new(), Vec::new());
    for (i, rec) in reader.records().enumerate() {
        let rec = rec.map_err(|e| bad(i + 1, e.to_string()))?;
        let line = rec.position().map_or(i + 1, |p| p.line() as usize);
        if rec.len() != 2 {
            return Err(bad(line, format!("expected 2 columns, found {}", rec.len())));
        }
        let grid: Result<f64, _> = rec[0].parse();
        let Ok(grid) = grid else {
            // A header row is allowed in first position only.
            if axis.is_empty() && i == 0 {
                continue;
            }
            return Err(bad(line, format!("bad grid value `{}`", &rec[0])));
        };
        let value: ExtendedReal = rec[1]
            .parse()
            .map_err(|_| bad(line, format!("bad value `{}`", &rec[1])))?;
        axis.push(grid);
        values.push(value);
    }
    TabulatedConvexFunction::new(axis, values, radial).map_err(|e| bad(1, e.to_string()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    #[test]
    fn reads_infinite_sentinels_and_header() {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        writeln!(f, "q,f\n-2,+inf\n-1,0.5\n0,0\n1,0.5\n2,+inf").unwrap();
        let t = load_table(f.path(), false).unwrap();
        assert_eq!(t.axis().len(), 5);
        assert_eq!(t.values()[0], ExtendedReal::PosInfinity);
        assert_eq!(t.values()[1], ExtendedReal::Finite(0.5));
    }

    #[test]
    fn bad_row_is_line_anchored() {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        writeln!(f, "0,0\n1,1\n2,oops").unwrap();
        match load_table(f.path(), false) {
            Err(RunError::Config { line, .. }) => assert_eq!(line, 3),
            other => panic!("{other:?}"),
        }
    }
}
