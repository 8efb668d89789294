//! Monte Carlo simulation: independent replicates of one test against a
//! synthetic generator, rejection-time collection, and the empirical CDF
//! with pointwise 95% Wilson intervals.
//!
//! Replicates are seeded by index (`mix_seed(base, r)`), so parallel and
//! serial execution produce identical per-replicate results and output
//! assembly is deterministic regardless of completion order.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::sync::Arc;

use rayon::prelude::*;
use serde::Serialize;

use seqtest::baseline::{BinnedTest, Binning};
use seqtest::dgp::{mix_seed, Dgp1Stream};
use seqtest::engine::{Decision, StreamKind};
use seqtest::TestBundle;
use seqtest::regress::OracleRegressor;
use seqtest::Observation;
use seqtest::{NullSpec, ShapeSpec, TestConfig};

use crate::config::{RegressorSel, Settings};
use crate::{fmt_f64, HarnessError};

const WILSON_Z: f64 = 1.96;
/// Norm-quantile bin edges freeze after this many observations.
pub const BIN_WARMUP: usize = 200;

/// Test procedure under simulation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Gaavi,
    Binned,
}

/// One Monte Carlo run description.
#[derive(Debug, Clone)]
pub struct SimulateSpec {
    pub method: Method,
    pub shape: ShapeSpec,
    pub horizon: u64,
    pub replicates: u64,
    pub settings: Settings,
    pub bins: usize,
    pub null_const: f64,
    pub grid_stride: u64,
    /// 1 = serial; 0 = library default pool; n = fixed-size pool.
    pub threads: usize,
    /// When set, each replicate's generated stream is dumped here.
    pub dump_streams: Option<PathBuf>,
}

/// Rejection times (None = never rejected) plus the CDF table.
#[derive(Debug, Clone)]
pub struct SimOutcome {
    pub times: Vec<Option<u64>>,
    pub cdf: CdfTable,
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct CdfRow {
    pub t: u64,
    pub fraction_rejected: f64,
    pub wilson_lo: f64,
    pub wilson_hi: f64,
}

/// Empirical rejection-time CDF on a time grid. Construction asserts the
/// fraction is nondecreasing and bracketed by its interval.
#[derive(Debug, Clone, Serialize)]
pub struct CdfTable {
    pub rows: Vec<CdfRow>,
}

impl CdfTable {
    pub fn fraction_at_end(&self) -> f64 {
        self.rows.last().map(|r| r.fraction_rejected).unwrap_or(0.0)
    }
}

/// 95% Wilson score interval for `k` successes out of `n`.
pub fn wilson_interval(k: u64, n: u64) -> (f64, f64) {
    assert!(n > 0, "Wilson interval needs n >= 1");
    let z = WILSON_Z;
    let n_f = n as f64;
    let p = k as f64 / n_f;
    let z2 = z * z;
    let denom = 1.0 + z2 / n_f;
    let center = p + z2 / (2.0 * n_f);
    let radius = z * (p * (1.0 - p) / n_f + z2 / (4.0 * n_f * n_f)).sqrt();
    // the interval always contains p-hat; pin the algebraically exact
    // corners against rounding
    let lo = if k == 0 { 0.0 } else { ((center - radius) / denom).clamp(0.0, 1.0).min(p) };
    let hi = if k == n { 1.0 } else { ((center + radius) / denom).clamp(0.0, 1.0).max(p) };
    (lo, hi)
}

/// Fraction of rejection times at or below each grid point, with Wilson
/// bounds.
pub fn ecdf(times: &[Option<u64>], grid: &[u64]) -> CdfTable {
    assert!(grid.windows(2).all(|w| w[0] < w[1]), "grid must be sorted ascending");
    let n = times.len() as u64;
    assert!(n > 0, "ecdf needs at least one replicate");
    let mut rows = Vec::with_capacity(grid.len());
    let mut previous = 0.0;
    for &t in grid {
        let k = times.iter().filter(|nf| nf.is_some_and(|v| v <= t)).count() as u64;
        let fraction = k as f64 / n as f64;
        let (wilson_lo, wilson_hi) = wilson_interval(k, n);
        assert!(fraction >= previous, "CDF must be nondecreasing");
        assert!(wilson_lo <= fraction && fraction <= wilson_hi, "interval must bracket");
        previous = fraction;
        rows.push(CdfRow { t, fraction_rejected: fraction, wilson_lo, wilson_hi });
    }
    CdfTable { rows }
}

/// Checkpoint grid: every `stride` steps, always ending at the horizon.
pub fn time_grid(horizon: u64, stride: u64) -> Vec<u64> {
    let stride = stride.max(1);
    let mut grid: Vec<u64> = (1..=horizon).filter(|t| t.is_multiple_of(stride)).collect();
    if grid.last() != Some(&horizon) {
        grid.push(horizon);
    }
    grid
}

fn replicate_rejection(spec: &SimulateSpec, r: u64) -> Result<Option<u64>, HarnessError> {
    let rep_seed = mix_seed(spec.settings.cfg.seed, r);
    let stream_seed = mix_seed(rep_seed, 101);
    if let Some(dir) = &spec.dump_streams {
        let observations: Vec<Observation> =
            Dgp1Stream::new(spec.shape, stream_seed).take(spec.horizon as usize).collect();
        crate::stream::write_stream(&dir.join(format!("stream_{r:04}.csv")), &observations)?;
    }
    match spec.method {
        Method::Gaavi => {
            let cfg = TestConfig { seed: rep_seed, ..spec.settings.cfg.clone() };
            let null = NullSpec::constant(spec.null_const);
            let mut bundle = match &spec.settings.regressor {
                RegressorSel::Oracle => oracle_bundle(&spec.shape, null, cfg)?,
                sel => {
                    let family = sel.family().expect("non-oracle families are buildable");
                    TestBundle::from_kind(StreamKind::Cmf, spec.shape.dim, null, cfg, &family)?
                }
            }
            .with_early_stop(true);
            let stream = Dgp1Stream::new(spec.shape, stream_seed);
            let (_, n_f) = bundle.run_to_horizon(stream, spec.horizon)?;
            Ok(n_f)
        }
        Method::Binned => {
            let binning = Binning::NormQuantile { bins: spec.bins, warmup: BIN_WARMUP };
            let mut test = BinnedTest::with_constant_null(
                binning,
                spec.null_const,
                spec.settings.cfg.alpha,
                spec.settings.cfg.rho,
                spec.settings.cfg.t0,
            )?;
            let stream = Dgp1Stream::new(spec.shape, stream_seed);
            for obs in stream.take(spec.horizon as usize) {
                let Observation::Cmf(o) = obs else { unreachable!("DGP1 yields CMF") };
                // the baseline's pseudo-outcome for CMF streams is y itself
                test.step(&o.x, o.y)?;
                if let Decision::Rejected { at } = test.decision() {
                    return Ok(Some(at));
                }
            }
            Ok(None)
        }
    }
}

/// Oracle nuisances for a synthetic generator: the true conditional mean
/// and the true Beta conditional variance `m(1-m)/(c+1)`.
fn oracle_bundle(
    shape: &ShapeSpec,
    null: NullSpec,
    cfg: TestConfig,
) -> Result<TestBundle, HarnessError> {
    let mean_spec = *shape;
    let var_spec = *shape;
    let tau = Arc::new(move |x: &[f64]| mean_spec.conditional_mean(x).expect("dim checked"));
    let var = Arc::new(move |x: &[f64]| {
        let m = var_spec.conditional_mean(x).expect("dim checked");
        m * (1.0 - m) / (var_spec.concentration + 1.0)
    });
    Ok(TestBundle::new(
        StreamKind::Cmf,
        shape.dim,
        null,
        cfg,
        Box::new(OracleRegressor::new(tau)),
        Box::new(OracleRegressor::new(var)),
        None,
    )?)
}

/// Runs all replicates (serial for `threads == 1`, a rayon pool otherwise)
/// and assembles the CDF. Results are identical across thread counts.
pub fn simulate(spec: &SimulateSpec) -> Result<SimOutcome, HarnessError> {
    if spec.replicates == 0 {
        return Err(HarnessError::Config("at least one replicate is required".into()));
    }
    if spec.horizon < spec.settings.cfg.t0 {
        return Err(HarnessError::Config(format!(
            "horizon {} is below the burn-in t0 {}",
            spec.horizon, spec.settings.cfg.t0
        )));
    }
    if spec.method == Method::Binned && spec.bins == 0 {
        return Err(HarnessError::Config("binned method needs at least one bin".into()));
    }
    if let Some(dir) = &spec.dump_streams {
        std::fs::create_dir_all(dir)?;
    }

    let indices: Vec<u64> = (0..spec.replicates).collect();
    let times: Vec<Option<u64>> = if spec.threads == 1 {
        let mut times = Vec::with_capacity(indices.len());
        for &r in &indices {
            times.push(replicate_rejection(spec, r)?);
        }
        times
    } else {
        let run_all = || -> Result<Vec<Option<u64>>, HarnessError> {
            indices.par_iter().map(|&r| replicate_rejection(spec, r)).collect()
        };
        if spec.threads == 0 {
            run_all()?
        } else {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(spec.threads)
                .build()
                .map_err(|e| HarnessError::Config(format!("thread pool: {e}")))?;
            pool.install(run_all)?
        }
    };

    let grid = time_grid(spec.horizon, spec.grid_stride);
    let cdf = ecdf(&times, &grid);
    Ok(SimOutcome { times, cdf })
}

/// Writes `times.csv` (empty field = never rejected) and `cdf.csv`.
pub fn write_outputs(outcome: &SimOutcome, out_dir: &Path) -> Result<(), HarnessError> {
    std::fs::create_dir_all(out_dir)?;
    let mut times = BufWriter::new(File::create(out_dir.join("times.csv"))?);
    writeln!(times, "replicate,n_f")?;
    for (r, n_f) in outcome.times.iter().enumerate() {
        match n_f {
            Some(t) => writeln!(times, "{r},{t}")?,
            None => writeln!(times, "{r},")?,
        }
    }
    times.flush()?;

    let mut cdf = BufWriter::new(File::create(out_dir.join("cdf.csv"))?);
    writeln!(cdf, "t,fraction_rejected,wilson_lo,wilson_hi")?;
    for row in &outcome.cdf.rows {
        writeln!(
            cdf,
            "{},{},{},{}",
            row.t,
            fmt_f64(row.fraction_rejected),
            fmt_f64(row.wilson_lo),
            fmt_f64(row.wilson_hi)
        )?;
    }
    cdf.flush()?;
    Ok(())
}

#[cfg(test)]
#[allow(clippy::excessive_precision)]
mod tests {
    use super::*;
    use crate::config::{resolve, CliOverrides, FileConfig};

    fn small_spec(method: Method, replicates: u64) -> SimulateSpec {
        let settings = resolve(&FileConfig::default(), &CliOverrides::default()).unwrap();
        SimulateSpec {
            method,
            shape: ShapeSpec::null(),
            horizon: 300,
            replicates,
            settings: Settings {
                cfg: TestConfig { t0: 50, seed: 9, ..TestConfig::default() },
                ..settings
            },
            bins: 4,
            null_const: 0.5,
            grid_stride: 50,
            threads: 1,
            dump_streams: None,
        }
    }

    #[test]
    fn wilson_interval_matches_the_reference_values() {
        let (lo, hi) = wilson_interval(10, 100);
        assert!((lo - 0.055_228_541_613_136_123).abs() < 1e-12);
        assert!((hi - 0.174_367_304_367_665_41).abs() < 1e-12);
    }

    #[test]
    fn wilson_interval_degenerate_corners() {
        let (lo, hi) = wilson_interval(0, 50);
        assert_eq!(lo, 0.0);
        assert!(hi > 0.0);
        let (lo, hi) = wilson_interval(50, 50);
        assert!(lo < 1.0);
        assert_eq!(hi, 1.0);
    }

    #[test]
    fn ecdf_counts_and_brackets() {
        let times = vec![Some(100), Some(200), None];
        let table = ecdf(&times, &[150]);
        assert!((table.rows[0].fraction_rejected - 1.0 / 3.0).abs() < 1e-15);
        let empty = ecdf(&[None; 5], &[10, 20]);
        for row in &empty.rows {
            assert_eq!(row.fraction_rejected, 0.0);
            assert_eq!(row.wilson_lo, 0.0);
        }
    }

    #[test]
    fn single_replicate_cdf_is_a_step_function() {
        let times = vec![Some(120)];
        let table = ecdf(&times, &time_grid(300, 50));
        for row in &table.rows {
            let expected = if row.t >= 120 { 1.0 } else { 0.0 };
            assert_eq!(row.fraction_rejected, expected);
        }
    }

    #[test]
    fn parallel_and_serial_replicates_agree() {
        let mut spec = small_spec(Method::Gaavi, 6);
        spec.settings.regressor = RegressorSel::Knn { k: 10 };
        let serial = simulate(&spec).unwrap();
        spec.threads = 3;
        let parallel = simulate(&spec).unwrap();
        assert_eq!(serial.times, parallel.times);
    }

    #[test]
    fn binned_replicates_run_and_mostly_survive_the_null() {
        let outcome = simulate(&small_spec(Method::Binned, 8)).unwrap();
        assert_eq!(outcome.times.len(), 8);
        let rejected = outcome.times.iter().flatten().count();
        assert!(rejected <= 2, "null data should rarely reject, got {rejected}/8");
    }

    #[test]
    fn grid_always_ends_at_the_horizon()  {
        assert_eq!(time_grid(120, 50), vec![50, 100, 120]);
        assert_eq!(time_grid(100, 50), vec![50, 100]);
        assert_eq!(time_grid(30, 50), vec![30]);
    }

    #[test]
    fn horizon_below_burn_in_is_a_config_error() {
        let mut spec = small_spec(Method::Gaavi, 1);
        spec.horizon = 10;
        assert_eq!(simulate(&spec).unwrap_err().exit_code(), 2);
    }
}
