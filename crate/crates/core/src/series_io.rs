//! Series file formats.
//!
//! * CSV: a header line `x` followed by one value per line.
//! * Binary: the 8-byte magic `LPSKSER1`, the value count as a
//!   little-endian `u64`, then that many little-endian `f64`s.

use std::fs::File;
use std::io::{self, BufReader, BufWriter, Read, Write};
use std::path::Path;
use std::str::FromStr;

use thiserror::Error;

pub const BINARY_MAGIC: &[u8; 8] = b"LPSKSER1";

#[derive(Debug, Error)]
pub enum SeriesIoError {
    #[error(transparent)]
    Io(#[from] io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error("expected a single CSV column with header `x`, found {0:?}")]
    BadHeader(Vec<String>),
    #[error("line {line}: {value:?} is not a finite number")]
    BadValue { line: u64, value: String },
    #[error("binary series: {0}")]
    BadBinary(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SeriesFormat {
    Csv,
    Binary,
}

impl FromStr for SeriesFormat {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "csv" => Ok(Self::Csv),
            "bin" | "binary" => Ok(Self::Binary),
            other => Err(format!("unknown series format {other:?} (expected csv or bin)")),
        }
    }
}

pub fn write_csv<W: Write>(mut w: W, x: &[f64]) -> io::Result<()> {
    writeln!(w, "x")?;
    for v in x {
        // Debug prints the shortest round-tripping form, switching to
        // exponent notation for very large or small magnitudes.
        writeln!(w, "{v:?}")?;
    }
    w.flush()
}

pub fn read_csv<R: Read>(r: R) -> Result<Vec<f64>, SeriesIoError> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(r);
    let headers = reader.headers()?.clone();
    if headers.len() != 1 || &headers[0] != "x" {
        return Err(SeriesIoError::BadHeader(headers.iter().map(str::to_owned).collect()));
    }
    let mut out = Vec::new();
    for record in reader.records() {
        let record = record?;
        let line = record.position().map_or(0, |p| p.line());
        let field = record.get(0).unwrap_or("");
        match field.parse::<f64>() {
            Ok(v) if v.is_finite() => out.push(v),
            _ => {
                return Err(SeriesIoError::BadValue {
                    line,
                    value: field.to_owned(),
                })
            }
        }
    }
    Ok(out)
}

pub fn write_binary<W: Write>(mut w: W, x: &[f64]) -> io::Result<()> {
    w.write_all(BINARY_MAGIC)?;
    w.write_all(&(x.len() as u64).to_le_bytes())?;
    for v in x {
        w.write_all(&v.to_le_bytes())?;
    }
    w.flush()
}

pub fn read_binary<R: Read>(mut r: R) -> Result<Vec<f64>, SeriesIoError> {
    let mut magic = [0u8; 8];
    r.read_exact(&mut magic)
        .map_err(|_| SeriesIoError::BadBinary("truncated header".into()))?;
    if &magic != BINARY_MAGIC {
        return Err(SeriesIoError::BadBinary("bad magic".into()));
    }
    let mut word = [0u8; 8];
    r.read_exact(&mut word)
        .map_err(|_| SeriesIoError::BadBinary("truncated header".into()))?;
    let count = u64::from_le_bytes(word);
    let mut out = Vec::with_capacity(count.min(1 << 24) as usize);
    for i in 0..count {
        r.read_exact(&mut word)
            .map_err(|_| SeriesIoError::BadBinary(format!("expected {count} values, found {i}")))?;
        let v = f64::from_le_bytes(word);
        if !v.is_finite() {
            return Err(SeriesIoError::BadBinary(format!("value {i} is not finite")));
        }
        out.push(v);
    }
    if r.read(&mut [0u8; 1])? != 0 {
        return Err(SeriesIoError::BadBinary("trailing bytes after last value".into()));
    }
    Ok(out)
}

/// Reads CSV or binary, recognizing binary by its magic.
pub fn read_series_bytes(bytes: &[u8]) -> Result<Vec<f64>, SeriesIoError> {
    if bytes.starts_with(BINARY_MAGIC) {
        read_binary(bytes)
    } else {
        read_csv(bytes)
    }
}

pub fn read_series(path: &Path) -> Result<Vec<f64>, SeriesIoError> {
    let mut bytes = Vec::new();
    BufReader::new(File::open(path)?).read_to_end(&mut bytes)?;
    read_series_bytes(&bytes)
}

pub fn write_series<W: Write>(w: W, x: &[f64], format: SeriesFormat) -> io::Result<()> {
    match format {
        SeriesFormat::Csv => write_csv(w, x),
        SeriesFormat::Binary => write_binary(w, x),
    }
}

pub fn write_series_file(path: &Path, x: &[f64], format: SeriesFormat) -> io::Result<()> {
    write_series(BufWriter::new(File::create(path)?), x, format)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn csv_layout() {
        let mut buf = Vec::new();
        write_csv(&mut buf, &[1.0, -0.25, 1e-300]).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), "x\n1.0\n-0.25\n1e-300\n");
    }

    #[test]
    fn binary_layout() {
        let mut buf = Vec::new();
        write_binary(&mut buf, &[1.5]).unwrap();
        assert_eq!(&buf[..8], BINARY_MAGIC);
        assert_eq!(&buf[8..16], &1u64.to_le_bytes());
        assert_eq!(&buf[16..], &1.5f64.to_le_bytes());
    }

    #[test]
    fn rejects_malformed_input() {
        assert!(matches!(
            read_csv("y\n1\n".as_bytes()),
            Err(SeriesIoError::BadHeader(_))
        ));
        assert!(matches!(
            read_csv("x\n1\nabc\n".as_bytes()),
            Err(SeriesIoError::BadValue { line: 3, .. })
        ));
        assert!(matches!(
            read_csv("x\nNaN\n".as_bytes()),
            Err(SeriesIoError::BadValue { .. })
        ));
        let mut buf = Vec::new();
        write_binary(&mut buf, &[1.0, 2.0]).unwrap();
        assert!(read_binary(&buf[..buf.len() - 1]).is_err());
        buf.push(0);
        assert!(read_binary(&buf[..]).is_err());
    }

    proptest! {
        #[test]
        fn both_formats_round_trip(x in proptest::collection::vec(-1e12f64..1e12, 0..64)) {
            for format in [SeriesFormat::Csv, SeriesFormat::Binary] {
                let mut buf = Vec::new();
                write_series(&mut buf, &x, format).unwrap();
                prop_assert_eq!(read_series_bytes(&buf).unwrap(), x.clone());
            }
        }
    }
}
