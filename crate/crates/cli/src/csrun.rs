//! Grid confidence sequence over one stream, emitting per-checkpoint rows
//! `t,hull_lo,hull_hi,n_survivors`. Empty hull fields mean every candidate
//! has been rejected.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use seqtest::confseq::GridCs;
use seqtest::dgp::{mix_seed, Dgp1Stream};
use seqtest::engine::StreamKind;
use seqtest::Observation;
use seqtest::{ShapeSpec, TestConfig};

use crate::config::Settings;
use crate::stream::StreamFile;
use crate::{fmt_f64, HarnessError};

/// Candidate grid description.
#[derive(Debug, Clone, Copy)]
pub struct GridSpec {
    pub lo: f64,
    pub hi: f64,
    pub points: usize,
}

/// One checkpoint of the surviving set.
#[derive(Debug, Clone, Copy)]
pub struct CsCheckpoint {
    pub t: u64,
    pub hull: Option<(f64, f64)>,
    pub n_survivors: usize,
}

/// Observation source for the cs run.
pub enum CsSource {
    File(StreamFile),
    Dgp(ShapeSpec),
}

/// Runs the grid over the stream and writes `cs.csv` into `out_dir`.
pub fn run_cs(
    source: CsSource,
    settings: &Settings,
    grid_spec: GridSpec,
    horizon: u64,
    stride: u64,
    out_dir: &Path,
) -> Result<Vec<CsCheckpoint>, HarnessError> {
    let family = settings.regressor.family().ok_or_else(|| {
        HarnessError::Config("the oracle regressor needs a synthetic generator; use simulate".into())
    })?;
    let grid = GridCs::uniform_grid(grid_spec.lo, grid_spec.hi, grid_spec.points)?;

    let (kind, dim, observations): (StreamKind, usize, Box<dyn Iterator<Item = Observation>>) =
        match source {
            CsSource::File(stream) => {
                (stream.kind, stream.dim, Box::new(stream.observations.into_iter()))
            }
            CsSource::Dgp(shape) => {
                let cfg: &TestConfig = &settings.cfg;
                let stream = Dgp1Stream::new(shape, mix_seed(cfg.seed, 101));
                (StreamKind::Cmf, shape.dim, Box::new(stream))
            }
        };

    let mut cs = GridCs::from_kind(grid, kind, dim, settings.cfg.clone(), &family)?;
    let stride = stride.max(1);
    let mut checkpoints = Vec::new();
    let mut consumed = 0u64;
    for obs in observations.take(horizon as usize) {
        cs.cs_step(&obs)?;
        consumed += 1;
        if consumed.is_multiple_of(stride) || consumed == horizon {
            let (_, hull) = cs.cs_survivors();
            checkpoints.push(CsCheckpoint { t: consumed, hull, n_survivors: cs.survivor_count() });
        }
    }
    if checkpoints.last().map(|c| c.t) != Some(consumed) && consumed > 0 {
        let (_, hull) = cs.cs_survivors();
        checkpoints.push(CsCheckpoint { t: consumed, hull, n_survivors: cs.survivor_count() });
    }

    std::fs::create_dir_all(out_dir)?;
    let mut out = BufWriter::new(File::create(out_dir.join("cs.csv"))?);
    writeln!(out, "t,hull_lo,hull_hi,n_survivors")?;
    for cp in &checkpoints {
        match cp.hull {
            Some((lo, hi)) => {
                writeln!(out, "{},{},{},{}", cp.t, fmt_f64(lo), fmt_f64(hi), cp.n_survivors)?
            }
            None => writeln!(out, "{},,,0", cp.t)?,
        }
    }
    out.flush()?;
    Ok(checkpoints)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::{resolve, CliOverrides, FileConfig};
    use seqtest::TestConfig;

    #[test]
    fn null_stream_keeps_the_true_constant() {
        let settings = resolve(&FileConfig::default(), &CliOverrides::default()).unwrap();
        let settings = Settings {
            cfg: TestConfig { t0: 100, seed: 4, ..TestConfig::default() },
            ..settings
        };
        let dir = tempfile::tempdir().unwrap();
        let checkpoints = run_cs(
            CsSource::Dgp(ShapeSpec::null()),
            &settings,
            GridSpec { lo: 0.2, hi: 0.8, points: 7 },
            600,
            200,
            dir.path(),
        )
        .unwrap();
        assert_eq!(checkpoints.len(), 3);
        let last = checkpoints.last().unwrap();
        let (lo, hi) = last.hull.expect("the true constant 0.5 should survive");
        assert!(lo <= 0.5 && 0.5 <= hi);
        // distant candidates such as 0.2 and 0.8 should already be gone
        assert!(last.n_survivors < 7);
        let text = std::fs::read_to_string(dir.path().join("cs.csv")).unwrap();
        assert!(text.starts_with("t,hull_lo,hull_hi,n_survivors\n"));
        assert_eq!(text.lines().count(), 4);
    }
}
