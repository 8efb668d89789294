//! Single-stream analysis: feed a stream file through one test, emitting
//! step records at a checkpoint stride plus a JSON summary with the
//! effective config echoed for provenance. The binned baseline emits
//! per-bin diagnostics instead of step records.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use serde::Serialize;

use seqtest::baseline::Binning;
use seqtest::dgp::mix_seed;
use seqtest::BinnedTest;
use seqtest::engine::{Decision, StreamKind, TestBundle};
use seqtest::pseudo::{phi_cate, phi_cmf};
use seqtest::types::Observation;
use seqtest::{NullSpec, StepRecord};

use crate::config::Settings;
use crate::simulate::BIN_WARMUP;
use crate::stream::StreamFile;
use crate::{fmt_f64, HarnessError};

/// Result of one `run` invocation.
#[derive(Debug, Clone, Serialize)]
pub struct RunSummary {
    pub n_f: Option<u64>,
    pub t_consumed: u64,
    pub null_const: f64,
    pub config: Settings,
}

/// Runs the test over a parsed stream, writing `records.csv` and
/// `summary.json` into `out_dir`.
pub fn run_stream(
    stream: StreamFile,
    settings: &Settings,
    null_const: Option<f64>,
    horizon: Option<u64>,
    stride: u64,
    out_dir: &Path,
) -> Result<RunSummary, HarnessError> {
    let family = settings.regressor.family().ok_or_else(|| {
        HarnessError::Config("the oracle regressor needs a synthetic generator; use simulate".into())
    })?;
    let null_const = null_const.unwrap_or(match stream.kind {
        StreamKind::Cmf => 0.5,
        StreamKind::Cate => 0.0,
    });
    let mut bundle = TestBundle::from_kind(
        stream.kind,
        stream.dim,
        NullSpec::constant(null_const),
        settings.cfg.clone(),
        &family,
    )?;
    let horizon = horizon.unwrap_or(stream.observations.len() as u64);
    let (records, n_f) = bundle.run_to_horizon(stream.observations, horizon)?;

    std::fs::create_dir_all(out_dir)?;
    write_records(&out_dir.join("records.csv"), &records, stride)?;
    let summary = RunSummary {
        n_f,
        t_consumed: records.len() as u64,
        null_const,
        config: settings.clone(),
    };
    let mut out = BufWriter::new(File::create(out_dir.join("summary.json"))?);
    serde_json::to_writer_pretty(&mut out, &summary)?;
    writeln!(out)?;
    out.flush()?;
    Ok(summary)
}

/// Runs the binned baseline over a parsed stream, writing per-bin
/// diagnostics (`bins.csv`, one row per bin per checkpoint) and
/// `summary.json`. CMF pseudo-outcomes are the outcomes themselves; CATE
/// streams use the run's predictable arm-mean estimates.
pub fn run_stream_binned(
    stream: StreamFile,
    settings: &Settings,
    null_const: Option<f64>,
    horizon: Option<u64>,
    stride: u64,
    bins: usize,
    out_dir: &Path,
) -> Result<RunSummary, HarnessError> {
    let null_const = null_const.unwrap_or(match stream.kind {
        StreamKind::Cmf => 0.5,
        StreamKind::Cate => 0.0,
    });
    let cfg = &settings.cfg;
    let mut test = BinnedTest::with_constant_null(
        Binning::NormQuantile { bins, warmup: BIN_WARMUP },
        null_const,
        cfg.alpha,
        cfg.rho,
        cfg.t0,
    )?;
    let mut arms = match stream.kind {
        StreamKind::Cmf => None,
        StreamKind::Cate => {
            let family = settings.regressor.family().ok_or_else(|| {
                HarnessError::Config(
                    "the oracle regressor needs a synthetic generator; use simulate".into(),
                )
            })?;
            let g1 = family.build(stream.dim, (0.0, 1.0), 0.5, mix_seed(cfg.seed, 3))?;
            let g0 = family.build(stream.dim, (0.0, 1.0), 0.5, mix_seed(cfg.seed, 4))?;
            Some((g1, g0))
        }
    };

    let horizon = horizon.unwrap_or(stream.observations.len() as u64);
    let stride = stride.max(1);
    std::fs::create_dir_all(out_dir)?;
    let mut out = BufWriter::new(File::create(out_dir.join("bins.csv"))?);
    writeln!(out, "t,bin,n,mean,half_width,rejected")?;
    let mut consumed = 0u64;
    let mut last_emitted = 0u64;
    for obs in stream.observations.into_iter().take(horizon as usize) {
        let phi = match &obs {
            Observation::Cmf(o) => phi_cmf(o),
            Observation::Cate(o) => {
                let (g1, g0) = arms.as_mut().expect("CATE streams carry arm estimators");
                let p1 = g1.predict(&o.x);
                let p0 = g0.predict(&o.x);
                let phi = phi_cate(o, p1, p0)?;
                if o.a {
                    g1.update(&o.x, o.y);
                } else {
                    g0.update(&o.x, o.y);
                }
                phi
            }
        };
        test.step(obs.x(), phi)?;
        consumed += 1;
        if consumed.is_multiple_of(stride) || consumed == horizon {
            emit_bin_rows(&mut out, &test)?;
            last_emitted = consumed;
        }
    }
    if last_emitted != consumed && consumed > 0 {
        emit_bin_rows(&mut out, &test)?;
    }
    out.flush()?;

    let n_f = match test.decision() {
        Decision::Rejected { at } => Some(at),
        Decision::Continue => None,
    };
    let summary =
        RunSummary { n_f, t_consumed: consumed, null_const, config: settings.clone() };
    let mut json = BufWriter::new(File::create(out_dir.join("summary.json"))?);
    serde_json::to_writer_pretty(&mut json, &summary)?;
    writeln!(json)?;
    json.flush()?;
    Ok(summary)
}

fn emit_bin_rows(
    out: &mut BufWriter<File>,
    test: &BinnedTest,
) -> Result<(), HarnessError> {
    for rec in test.records() {
        writeln!(
            out,
            "{},{},{},{},{},{}",
            rec.t,
            rec.bin,
            rec.n,
            fmt_f64(rec.mean),
            fmt_f64(rec.half_width),
            rec.rejected
        )?;
    }
    Ok(())
}

/// Writes records whose step index lands on the stride, always including
/// the final consumed step.
pub fn write_records(
    path: &Path,
    records: &[StepRecord],
    stride: u64,
) -> Result<(), HarnessError> {
    let stride = stride.max(1);
    let mut out = BufWriter::new(File::create(path)?);
    writeln!(out, "{}", StepRecord::CSV_HEADER)?;
    let last_t = records.last().map(|r| r.t);
    for rec in records {
        if rec.t.is_multiple_of(stride) || Some(rec.t) == last_t {
            writeln!(out, "{}", rec.to_csv_row())?;
        }
    }
    out.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::{resolve, CliOverrides, FileConfig};
    use crate::stream::read_stream;

    #[test]
    fn three_row_file_produces_three_records_and_no_rejection() {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        writeln!(f, "x1,x2,y").unwrap();
        writeln!(f, "0.1,0.2,0.7").unwrap();
        writeln!(f, "0.5,0.5,0.4").unwrap();
        writeln!(f, "0.9,0.1,0.6").unwrap();
        let stream = read_stream(f.path()).unwrap();
        let settings = resolve(&FileConfig::default(), &CliOverrides::default()).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let summary = run_stream(stream, &settings, None, None, 1, dir.path()).unwrap();
        assert_eq!(summary.t_consumed, 3);
        assert_eq!(summary.n_f, None);
        let records = std::fs::read_to_string(dir.path().join("records.csv")).unwrap();
        assert_eq!(records.lines().count(), 4, "header plus one row per step");
        let json = std::fs::read_to_string(dir.path().join("summary.json")).unwrap();
        assert!(json.contains("\"alpha\": 0.1"));
        assert!(json.contains("\"regressor\": \"knn\""));
    }

    #[test]
    fn stride_keeps_the_final_row() {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        writeln!(f, "x1,y").unwrap();
        for i in 0..7 {
            writeln!(f, "0.{i},0.5").unwrap();
        }
        let stream = read_stream(f.path()).unwrap();
        let settings = resolve(&FileConfig::default(), &CliOverrides::default()).unwrap();
        let dir = tempfile::tempdir().unwrap();
        run_stream(stream, &settings, None, None, 5, dir.path()).unwrap();
        let records = std::fs::read_to_string(dir.path().join("records.csv")).unwrap();
        let ts: Vec<&str> =
            records.lines().skip(1).map(|l| l.split(',').next().unwrap()).collect();
        assert_eq!(ts, vec!["5", "7"]);
    }
}
