//! Snapshot persistence: a self-describing CSV format and a raw binary
//! format.
//!
//! CSV: first line `# rows=<N> cols=<p>` (optionally `kind=<tag>` for
//! auxiliary matrices such as bases or priors), then one record per column
//! holding `rows` comma-separated values. Values are written with Rust's
//! shortest round-trip formatting, so CSV round-trips are exact; lines end
//! with LF and readers accept CRLF.
//!
//! Binary: magic `SNAP1`, then `rows` and `cols` as little-endian u64, then
//! rows·cols IEEE-754 doubles, little-endian, column-major. Binary
//! round-trips are bitwise.

use nalgebra::DMatrix;
use std::fs;
use std::io::{BufWriter, Write};
use std::path::Path;
use std::str::FromStr;

use super::{DatasetError, SnapshotMatrix};
use crate::numerics::validate_finite;

/// Magic bytes opening every binary snapshot file.
pub const BINARY_MAGIC: &[u8; 5] = b"SNAP1";

/// On-disk format selector.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SnapshotFormat {
    /// Self-describing text format (see module docs).
    Csv,
    /// Raw little-endian binary format (see module docs).
    Binary,
}

impl FromStr for SnapshotFormat {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "csv" => Ok(Self::Csv),
            "binary" | "bin" => Ok(Self::Binary),
            other => Err(format!("unknown snapshot format '{other}' (expected csv or binary)")),
        }
    }
}

fn io_err(path: &Path, source: std::io::Error) -> DatasetError {
    DatasetError::Io {
        path: path.display().to_string(),
        source,
    }
}

fn format_err(path: &Path, reason: impl Into<String>) -> DatasetError {
    DatasetError::Format {
        path: path.display().to_string(),
        reason: reason.into(),
    }
}

/// Saves a bare matrix; `kind` goes into the CSV header tag (ignored by the
/// binary format, which is dimensions-plus-payload only).
pub fn save_matrix(
    m: &DMatrix<f64>,
    path: impl AsRef<Path>,
    format: SnapshotFormat,
    kind: Option<&str>,
) -> Result<(), DatasetError> {
    let path = path.as_ref();
    validate_finite(m)?;
    let file = fs::File::create(path).map_err(|e| io_err(path, e))?;
    let mut w = BufWriter::new(file);
    match format {
        SnapshotFormat::Csv => {
            write!(w, "# rows={} cols={}", m.nrows(), m.ncols()).map_err(|e| io_err(path, e))?;
            if let Some(kind) = kind {
                write!(w, " kind={kind}").map_err(|e| io_err(path, e))?;
            }
            writeln!(w).map_err(|e| io_err(path, e))?;
            for c in 0..m.ncols() {
                for r in 0..m.nrows() {
                    if r > 0 {
                        w.write_all(b",").map_err(|e| io_err(path, e))?;
                    }
                    write!(w, "{}", m[(r, c)]).map_err(|e| io_err(path, e))?;
                }
                writeln!(w).map_err(|e| io_err(path, e))?;
            }
        }
        SnapshotFormat::Binary => {
            w.write_all(BINARY_MAGIC).map_err(|e| io_err(path, e))?;
            w.write_all(&(m.nrows() as u64).to_le_bytes())
                .map_err(|e| io_err(path, e))?;
            w.write_all(&(m.ncols() as u64).to_le_bytes())
                .map_err(|e| io_err(path, e))?;
            for c in 0..m.ncols() {
                for r in 0..m.nrows() {
                    w.write_all(&m[(r, c)].to_le_bytes())
                        .map_err(|e| io_err(path, e))?;
                }
            }
        }
    }
    w.flush().map_err(|e| io_err(path, e))
}

/// Loads a bare matrix and, for CSV, the header's `kind` tag if present.
pub fn load_matrix(
    path: impl AsRef<Path>,
    format: SnapshotFormat,
) -> Result<(DMatrix<f64>, Option<String>), DatasetError> {
    let path = path.as_ref();
    match format {
        SnapshotFormat::Csv => load_csv(path),
        SnapshotFormat::Binary => Ok((load_binary(path)?, None)),
    }
}

/// Persists the data matrix of a snapshot set. The stored column mean, if
/// any, is *not* written — persist it separately (it is an N×1 matrix) if it
/// must survive; loading always yields an uncentered snapshot matrix.
pub fn save_snapshots(
    x: &SnapshotMatrix,
    path: impl AsRef<Path>,
    format: SnapshotFormat,
) -> Result<(), DatasetError> {
    save_matrix(&x.data, path, format, None)
}

/// Loads a snapshot matrix saved by [`save_snapshots`] (or any matrix file);
/// the result is uncentered.
pub fn load_snapshots(
    path: impl AsRef<Path>,
    format: SnapshotFormat,
) -> Result<SnapshotMatrix, DatasetError> {
    let (data, _kind) = load_matrix(path, format)?;
    SnapshotMatrix::new(data)
}

fn load_csv(path: &Path) -> Result<(DMatrix<f64>, Option<String>), DatasetError> {
    let text = fs::read_to_string(path).map_err(|e| io_err(path, e))?;
    let mut lines = text.lines().map(|l| l.strip_suffix('\r').unwrap_or(l));

    let header = lines
        .next()
        .ok_or_else(|| format_err(path, "file is empty; expected `# rows=<N> cols=<p>` header"))?;
    let body = header
        .strip_prefix('#')
        .ok_or_else(|| format_err(path, "first line must be a `# rows=<N> cols=<p>` header"))?;
    let mut rows: Option<usize> = None;
    let mut cols: Option<usize> = None;
    let mut kind: Option<String> = None;
    for token in body.split_whitespace() {
        let (key, value) = token
            .split_once('=')
            .ok_or_else(|| format_err(path, format!("malformed header token '{token}'")))?;
        match key {
            "rows" => {
                rows = Some(value.parse().map_err(|_| {
                    format_err(path, format!("header rows value '{value}' is not a count"))
                })?)
            }
            "cols" => {
                cols = Some(value.parse().map_err(|_| {
                    format_err(path, format!("header cols value '{value}' is not a count"))
                })?)
            }
            "kind" => kind = Some(value.to_string()),
            other => {
                return Err(format_err(path, format!("unknown header key '{other}'")));
            }
        }
    }
    let rows = rows.ok_or_else(|| format_err(path, "header is missing rows=<N>"))?;
    let cols = cols.ok_or_else(|| format_err(path, "header is missing cols=<p>"))?;
    if rows == 0 || cols == 0 {
        return Err(format_err(path, format!("degenerate dimensions {rows}x{cols}")));
    }

    let mut data = DMatrix::<f64>::zeros(rows, cols);
    let mut col = 0usize;
    for line in lines {
        if line.is_empty() {
            continue; // tolerate a trailing newline
        }
        if col >= cols {
            return Err(format_err(
                path,
                format!("too many data records: header promised {cols} columns"),
            ));
        }
        let mut row = 0usize;
        for field in line.split(',') {
            if row >= rows {
                return Err(format_err(
                    path,
                    format!("column {col}: expected {rows} fields, found more"),
                ));
            }
            let value: f64 = field.trim().parse().map_err(|_| {
                format_err(
                    path,
                    format!("cell (row {row}, col {col}): cannot parse '{field}' as a real number"),
                )
            })?;
            if !value.is_finite() {
                return Err(format_err(
                    path,
                    format!("cell (row {row}, col {col}) is not finite: {field}"),
                ));
            }
            data[(row, col)] = value;
            row += 1;
        }
        if row != rows {
            return Err(format_err(
                path,
                format!("column {col}: expected {rows} fields, found {row}"),
            ));
        }
        col += 1;
    }
    if col != cols {
        return Err(format_err(
            path,
            format!("expected {cols} data records, found {col}"),
        ));
    }
    Ok((data, kind))
}

fn load_binary(path: &Path) -> Result<DMatrix<f64>, DatasetError> {
    let bytes = fs::read(path).map_err(|e| io_err(path, e))?;
    if bytes.len() < BINARY_MAGIC.len() + 16 {
        return Err(format_err(path, "file too short for magic and dimensions"));
    }
    if &bytes[..BINARY_MAGIC.len()] != BINARY_MAGIC {
        return Err(format_err(path, "bad magic: not a binary snapshot file"));
    }
    let dim_at = |offset: usize| -> u64 {
        let mut buf = [0u8; 8];
        buf.copy_from_slice(&bytes[offset..offset + 8]);
        u64::from_le_bytes(buf)
    };
    let rows = dim_at(BINARY_MAGIC.len()) as usize;
    let cols = dim_at(BINARY_MAGIC.len() + 8) as usize;
    if rows == 0 || cols == 0 {
        return Err(format_err(path, format!("degenerate dimensions {rows}x{cols}")));
    }
    let expected = rows
        .checked_mul(cols)
        .and_then(|n| n.checked_mul(8))
        .ok_or_else(|| format_err(path, format!("dimensions {rows}x{cols} overflow")))?;
    let payload = &bytes[BINARY_MAGIC.len() + 16..];
    if payload.len() != expected {
        return Err(format_err(
            path,
            format!(
                "payload holds {} bytes but {rows}x{cols} doubles need {expected}",
                payload.len()
            ),
        ));
    }
    let mut data = DMatrix::<f64>::zeros(rows, cols);
    let mut offset = 0usize;
    for c in 0..cols {
        for r in 0..rows {
            let mut buf = [0u8; 8];
            buf.copy_from_slice(&payload[offset..offset + 8]);
            let value = f64::from_le_bytes(buf);
            if !value.is_finite() {
                return Err(format_err(
                    path,
                    format!("entry (row {r}, col {c}) is not finite"),
                ));
            }
            data[(r, c)] = value;
            offset += 8;
        }
    }
    Ok(data)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn temp_path(name: &str) -> std::path::PathBuf {
        let dir = std::env::temp_dir().join(format!("modalsense-io-{}", std::process::id()));
        fs::create_dir_all(&dir).unwrap();
        dir.join(name)
    }

    fn sample() -> SnapshotMatrix {
        SnapshotMatrix::new(DMatrix::from_row_slice(
            3,
            2,
            &[1.5, -2.0, 0.1 + 0.2, 4e-17, -0.0, 12345.6789],
        ))
        .unwrap()
    }

    #[test]
    fn binary_round_trip_is_bitwise() {
        let x = sample();
        let path = temp_path("roundtrip.snap");
        save_snapshots(&x, &path, SnapshotFormat::Binary).unwrap();
        let y = load_snapshots(&path, SnapshotFormat::Binary).unwrap();
        for (a, b) in x.data.iter().zip(y.data.iter()) {
            assert_eq!(a.to_bits(), b.to_bits());
        }
    }

    #[test]
    fn csv_round_trip_is_exact() {
        let x = sample();
        let path = temp_path("roundtrip.csv");
        save_snapshots(&x, &path, SnapshotFormat::Csv).unwrap();
        let y = load_snapshots(&path, SnapshotFormat::Csv).unwrap();
        assert_eq!(x.data, y.data);
    }

    #[test]
    fn csv_nan_cell_is_named() {
        let path = temp_path("nan.csv");
        fs::write(&path, "# rows=2 cols=2\n1,2\n3,NaN\n").unwrap();
        match load_snapshots(&path, SnapshotFormat::Csv) {
            Err(DatasetError::Format { reason, .. }) => {
                assert!(
                    reason.contains("row 1") && reason.contains("col 1"),
                    "reason should name the cell: {reason}"
                );
            }
            other => panic!("expected a format error, got {other:?}"),
        }
    }

    #[test]
    fn csv_header_and_shape_errors() {
        let path = temp_path("badheader.csv");
        fs::write(&path, "rows=2 cols=2\n1,2\n3,4\n").unwrap();
        assert!(matches!(
            load_snapshots(&path, SnapshotFormat::Csv),
            Err(DatasetError::Format { .. })
        ));

        let path = temp_path("shortline.csv");
        fs::write(&path, "# rows=3 cols=1\n1,2\n").unwrap();
        match load_snapshots(&path, SnapshotFormat::Csv) {
            Err(DatasetError::Format { reason, .. }) => {
                assert!(reason.contains("expected 3 fields"), "{reason}");
            }
            other => panic!("expected a format error, got {other:?}"),
        }

        let path = temp_path("fewlines.csv");
        fs::write(&path, "# rows=1 cols=3\n1\n2\n").unwrap();
        assert!(load_snapshots(&path, SnapshotFormat::Csv).is_err());
    }

    #[test]
    fn kind_tag_round_trips_in_csv() {
        let m = DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, 1.0]);
        let path = temp_path("kind.csv");
        save_matrix(&m, &path, SnapshotFormat::Csv, Some("basis")).unwrap();
        let (loaded, kind) = load_matrix(&path, SnapshotFormat::Csv).unwrap();
        assert_eq!(loaded, m);
        assert_eq!(kind.as_deref(), Some("basis"));
    }

    #[test]
    fn binary_rejects_bad_magic_and_truncation() {
        let path = temp_path("badmagic.snap");
        fs::write(&path, b"NOPE!aaaaaaaaaaaaaaaa").unwrap();
        assert!(matches!(
            load_snapshots(&path, SnapshotFormat::Binary),
            Err(DatasetError::Format { .. })
        ));

        let x = sample();
        let good = temp_path("good.snap");
        save_snapshots(&x, &good, SnapshotFormat::Binary).unwrap();
        let mut bytes = fs::read(&good).unwrap();
        bytes.truncate(bytes.len() - 3);
        let truncated = temp_path("truncated.snap");
        fs::write(&truncated, &bytes).unwrap();
        match load_snapshots(&truncated, SnapshotFormat::Binary) {
            Err(DatasetError::Format { reason, .. }) => {
                assert!(reason.contains("payload"), "{reason}");
            }
            other => panic!("expected a format error, got {other:?}"),
        }
    }
}
