//! CSV observation streams.
//!
//! Two formats, header mandatory, UTF-8, LF line endings:
//!
//! ```text
//!     x1,...,xd,y            CMF streams
//!     x1,...,xd,a,y,pi1      CATE streams (a in {0,1}, pi1 in (0,1))
//! ```
//!
//! Floats are written with 17 significant digits, so a dumped stream parses
//! back to bit-identical observations.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use seqtest::engine::StreamKind;
use seqtest::types::{ObservationCate, ObservationCmf};
use seqtest::Observation;

use crate::{fmt_f64, HarnessError};

fn parse_err(line: usize, reason: impl Into<String>) -> HarnessError {
    HarnessError::Parse { line, reason: reason.into() }
}

/// A parsed stream file: kind, context dimension, and observations.
#[derive(Debug)]
pub struct StreamFile {
    pub kind: StreamKind,
    pub dim: usize,
    pub observations: Vec<Observation>,
}

/// Reads and validates a stream file; errors carry the offending line.
pub fn read_stream(path: &Path) -> Result<StreamFile, HarnessError> {
    let reader = BufReader::new(File::open(path)?);
    let mut lines = reader.lines().enumerate();
    let (_, header) = lines
        .next()
        .ok_or_else(|| parse_err(1, "empty file: a header line is required"))?;
    let header = header?;
    let columns: Vec<&str> = header.trim_end().split(',').collect();
    let (kind, dim) = classify_header(&columns).ok_or_else(|| {
        parse_err(1, format!("unrecognized header {header:?}; expected x1,...,xd,y or x1,...,xd,a,y,pi1"))
    })?;

    let mut observations = Vec::new();
    for (idx, line) in lines {
        let line_no = idx + 1;
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.trim_end().split(',').collect();
        let expected = columns.len();
        if fields.len() != expected {
            return Err(parse_err(
                line_no,
                format!("expected {expected} fields, found {}", fields.len()),
            ));
        }
        let float = |s: &str, what: &str| -> Result<f64, HarnessError> {
            s.parse::<f64>().map_err(|_| parse_err(line_no, format!("bad {what} value {s:?}")))
        };
        let x: Vec<f64> = fields[..dim]
            .iter()
            .map(|s| float(s, "context"))
            .collect::<Result<_, _>>()?;
        let obs = match kind {
            StreamKind::Cmf => {
                let y = float(fields[dim], "outcome")?;
                Observation::Cmf(
                    ObservationCmf::new(x, y).map_err(|e| parse_err(line_no, e.to_string()))?,
                )
            }
            StreamKind::Cate => {
                let a = match fields[dim] {
                    "0" => false,
                    "1" => true,
                    other => {
                        return Err(parse_err(line_no, format!("treatment must be 0 or 1, got {other:?}")))
                    }
                };
                let y = float(fields[dim + 1], "outcome")?;
                let pi1 = float(fields[dim + 2], "pi1")?;
                Observation::Cate(
                    ObservationCate::new(x, a, y, pi1)
                        .map_err(|e| parse_err(line_no, e.to_string()))?,
                )
            }
        };
        observations.push(obs);
    }
    Ok(StreamFile { kind, dim, observations })
}

fn classify_header(columns: &[&str]) -> Option<(StreamKind, usize)> {
    let n = columns.len();
    if n >= 2 && columns[n - 1] == "y" {
        return Some((StreamKind::Cmf, n - 1));
    }
    if n >= 4 && columns[n - 3] == "a" && columns[n - 2] == "y" && columns[n - 1] == "pi1" {
        return Some((StreamKind::Cate, n - 3));
    }
    None
}

/// Writes observations in the stream format (round-trip exact).
pub fn write_stream(path: &Path, observations: &[Observation]) -> Result<(), HarnessError> {
    let mut out = BufWriter::new(File::create(path)?);
    let Some(first) = observations.first() else {
        return Err(HarnessError::Config("cannot dump an empty stream".into()));
    };
    let dim = first.x().len();
    let xs: Vec<String> = (1..=dim).map(|i| format!("x{i}")).collect();
    match first {
        Observation::Cmf(_) => writeln!(out, "{},y", xs.join(","))?,
        Observation::Cate(_) => writeln!(out, "{},a,y,pi1", xs.join(","))?,
    }
    for obs in observations {
        let coords: Vec<String> = obs.x().iter().map(|&v| fmt_f64(v)).collect();
        match obs {
            Observation::Cmf(o) => writeln!(out, "{},{}", coords.join(","), fmt_f64(o.y))?,
            Observation::Cate(o) => writeln!(
                out,
                "{},{},{},{}",
                coords.join(","),
                u8::from(o.a),
                fmt_f64(o.y),
                fmt_f64(o.pi1)
            )?,
        }
    }
    out.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn write_tmp(content: &str) -> tempfile::NamedTempFile {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        f.write_all(content.as_bytes()).unwrap();
        f
    }

    #[test]
    fn reads_a_small_cmf_file() {
        let f = write_tmp("x1,x2,y\n0.1,0.2,0.7\n0.3,0.4,0.5\n");
        let stream = read_stream(f.path()).unwrap();
        assert_eq!(stream.kind, StreamKind::Cmf);
        assert_eq!(stream.dim, 2);
        assert_eq!(stream.observations.len(), 2);
    }

    #[test]
    fn reads_a_cate_file() {
        let f = write_tmp("x1,a,y,pi1\n0.1,1,1,0.0923\n0.9,0,0,0.0923\n");
        let stream = read_stream(f.path()).unwrap();
        assert_eq!(stream.kind, StreamKind::Cate);
        assert_eq!(stream.dim, 1);
        match &stream.observations[0] {
            Observation::Cate(o) => {
                assert!(o.a);
                assert_eq!(o.pi1, 0.0923);
            }
            other => panic!("expected CATE observation, got {other:?}"),
        }
    }

    #[test]
    fn propensity_out_of_range_names_the_line() {
        let f = write_tmp("x1,a,y,pi1\n0.1,1,1,0.5\n0.2,0,1,1.2\n");
        match read_stream(f.path()) {
            Err(HarnessError::Parse { line, reason }) => {
                assert_eq!(line, 3);
                assert!(reason.contains("pi1"), "reason: {reason}");
            }
            other => panic!("expected a parse error, got {other:?}"),
        }
    }

    #[test]
    fn bad_header_is_line_one() {
        let f = write_tmp("a,b,c\n1,2,3\n");
        match read_stream(f.path()) {
            Err(HarnessError::Parse { line, .. }) => assert_eq!(line, 1),
            other => panic!("expected a parse error, got {other:?}"),
        }
    }

    #[test]
    fn wrong_field_count_is_reported() {
        let f = write_tmp("x1,y\n0.1,0.2\n0.1\n");
        match read_stream(f.path()) {
            Err(HarnessError::Parse { line, reason }) => {
                assert_eq!(line, 3);
                assert!(reason.contains("fields"));
            }
            other => panic!("expected a parse error, got {other:?}"),
        }
    }

    #[test]
    fn round_trip_is_bit_exact() {
        let observations: Vec<Observation> = vec![
            Observation::Cmf(ObservationCmf::new(vec![0.1, 1.0 / 3.0], 0.123456789).unwrap()),
            Observation::Cmf(ObservationCmf::new(vec![1e-17, 0.9999999999999999], 1.0).unwrap()),
        ];
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("s.csv");
        write_stream(&path, &observations).unwrap();
        let back = read_stream(&path).unwrap();
        assert_eq!(back.observations, observations);
    }
}
