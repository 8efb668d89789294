//! `seqtest`: sequential anytime-valid tests for conditional means on
//! streaming data, with stream-file analysis, Monte Carlo simulation,
//! grid confidence sequences, and boundary calibration.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use seqtest::boundary::rho_for_target_time;
use seqtest::dgp::Shape;
use seqtest::ShapeSpec;
use seqtest_cli::config::{resolve, CliOverrides, FileConfig};
use seqtest_cli::csrun::{run_cs, CsSource, GridSpec};
use seqtest_cli::run::{run_stream, run_stream_binned};
use seqtest_cli::simulate::{simulate, write_outputs, Method, SimulateSpec};
use seqtest_cli::stream::read_stream;
use seqtest_cli::HarnessError;

#[derive(Parser)]
#[command(name = "seqtest", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct ConfigFlags {
    /// Error tolerance in (0,1).
    #[arg(long)]
    alpha: Option<f64>,
    /// Boundary tightening parameter.
    #[arg(long)]
    rho: Option<f64>,
    /// Burn-in time before the test may reject.
    #[arg(long)]
    t0: Option<u64>,
    /// Weight-floor decay exponent.
    #[arg(long)]
    gamma: Option<f64>,
    /// Weight-floor scale c0 in eps_t = c0 * t^-gamma.
    #[arg(long)]
    eps_scale: Option<f64>,
    /// Lower clip for estimated conditional variances.
    #[arg(long)]
    var_floor: Option<f64>,
    /// Base RNG seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Regressor family: knn|ridge|mlp|oracle|constant.
    #[arg(long)]
    regressor: Option<String>,
    /// JSON config file; flags override its values.
    #[arg(long)]
    config: Option<PathBuf>,
}

impl ConfigFlags {
    fn settings(&self) -> Result<seqtest_cli::config::Settings, HarnessError> {
        let file = match &self.config {
            Some(path) => FileConfig::load(path)?,
            None => FileConfig::default(),
        };
        let overrides = CliOverrides {
            alpha: self.alpha,
            rho: self.rho,
            t0: self.t0,
            eps_scale: self.eps_scale,
            gamma: self.gamma,
            var_floor: self.var_floor,
            seed: self.seed,
            regressor: self.regressor.clone(),
        };
        resolve(&file, &overrides)
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum DgpName {
    Null,
    Step,
    Bump,
    Sine,
}

#[derive(Args, Clone)]
struct DgpFlags {
    /// Synthetic generator shape.
    #[arg(long, value_enum)]
    dgp: DgpName,
    /// Effect size; defaults to the shape's standard setting.
    #[arg(long)]
    delta: Option<f64>,
    /// Beta concentration; defaults to the shape's standard setting.
    #[arg(long)]
    conc: Option<f64>,
    /// Context dimension.
    #[arg(long, default_value_t = 10)]
    dim: usize,
}

impl DgpFlags {
    fn shape(&self) -> Result<ShapeSpec, HarnessError> {
        let base = match self.dgp {
            DgpName::Null => ShapeSpec::null(),
            DgpName::Step => ShapeSpec::step(),
            DgpName::Bump => ShapeSpec::bump(),
            DgpName::Sine => ShapeSpec::sine(),
        };
        let shape = match self.dgp {
            DgpName::Null => Shape::Null,
            DgpName::Step => Shape::Step,
            DgpName::Bump => Shape::Bump,
            DgpName::Sine => Shape::Sine,
        };
        ShapeSpec::new(
            shape,
            self.delta.unwrap_or(base.delta),
            self.conc.unwrap_or(base.concentration),
            self.dim,
        )
        .map_err(|e| HarnessError::Config(e.to_string()))
    }
}

#[derive(Subcommand)]
enum Command {
    /// Analyze a stream file: per-step records plus a JSON summary.
    Run {
        /// Input stream CSV (header `x1,...,xd,y` or `x1,...,xd,a,y,pi1`).
        #[arg(long)]
        input: PathBuf,
        /// Test procedure.
        #[arg(long, value_enum, default_value_t = MethodName::Gaavi)]
        method: MethodName,
        /// Bins for the binned method.
        #[arg(long, default_value_t = 8)]
        bins: usize,
        /// Constant null value (default 0.5 for CMF streams, 0 for CATE).
        #[arg(long)]
        null: Option<f64>,
        /// Stop after this many observations (default: whole file).
        #[arg(long)]
        horizon: Option<u64>,
        /// Emit one record every this many steps.
        #[arg(long, default_value_t = 1)]
        stride: u64,
        #[arg(long, default_value = "out")]
        out: PathBuf,
        #[command(flatten)]
        config: ConfigFlags,
    },
    /// Monte Carlo replicates against a synthetic generator; rejection
    /// times and their CDF.
    Simulate {
        #[arg(long, value_enum, default_value_t = MethodName::Gaavi)]
        method: MethodName,
        #[command(flatten)]
        dgp: DgpFlags,
        /// Constant null value under test.
        #[arg(long, default_value_t = 0.5)]
        null: f64,
        #[arg(long, default_value_t = 5000)]
        horizon: u64,
        #[arg(long, default_value_t = 100)]
        replicates: u64,
        /// Bins for the binned method.
        #[arg(long, default_value_t = 8)]
        bins: usize,
        /// CDF grid stride.
        #[arg(long, default_value_t = 50)]
        grid_stride: u64,
        /// Worker threads: 1 = serial, 0 = library default pool.
        #[arg(long, default_value_t = 0)]
        threads: usize,
        /// Also dump each replicate's generated stream into the output dir.
        #[arg(long)]
        dump_streams: bool,
        #[arg(long, default_value = "out")]
        out: PathBuf,
        #[command(flatten)]
        config: ConfigFlags,
    },
    /// Grid confidence sequence for constant nulls over one stream.
    Cs {
        /// Input stream CSV; omit to simulate a generator instead.
        #[arg(long, conflicts_with = "dgp")]
        input: Option<PathBuf>,
        #[arg(long, value_enum)]
        dgp: Option<DgpName>,
        #[arg(long)]
        delta: Option<f64>,
        #[arg(long)]
        conc: Option<f64>,
        #[arg(long, default_value_t = 10)]
        dim: usize,
        /// Candidate grid range and resolution.
        #[arg(long, default_value_t = 0.0)]
        cs_min: f64,
        #[arg(long, default_value_t = 1.0)]
        cs_max: f64,
        #[arg(long, default_value_t = 101)]
        cs_points: usize,
        #[arg(long, default_value_t = 5000)]
        horizon: u64,
        /// Emit one checkpoint every this many steps.
        #[arg(long, default_value_t = 50)]
        stride: u64,
        #[arg(long, default_value = "out")]
        out: PathBuf,
        #[command(flatten)]
        config: ConfigFlags,
    },
    /// Print the rho that makes the boundary tightest near a target time.
    CalibrateRho {
        #[arg(long)]
        t_star: u64,
        #[arg(long)]
        alpha: f64,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum MethodName {
    Gaavi,
    Binned,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

fn dispatch(cli: Cli) -> Result<(), HarnessError> {
    match cli.command {
        Command::Run { input, method, bins, null, horizon, stride, out, config } => {
            let settings = config.settings()?;
            let stream = read_stream(&input)?;
            let summary = match method {
                MethodName::Gaavi => run_stream(stream, &settings, null, horizon, stride, &out)?,
                MethodName::Binned => {
                    run_stream_binned(stream, &settings, null, horizon, stride, bins, &out)?
                }
            };
            match summary.n_f {
                Some(t) => println!("rejected at t = {t} (records in {})", out.display()),
                None => println!(
                    "no rejection in {} observations (records in {})",
                    summary.t_consumed,
                    out.display()
                ),
            }
            Ok(())
        }
        Command::Simulate {
            method,
            dgp,
            null,
            horizon,
            replicates,
            bins,
            grid_stride,
            threads,
            dump_streams,
            out,
            config,
        } => {
            let settings = config.settings()?;
            let spec = SimulateSpec {
                method: match method {
                    MethodName::Gaavi => Method::Gaavi,
                    MethodName::Binned => Method::Binned,
                },
                shape: dgp.shape()?,
                horizon,
                replicates,
                settings,
                bins,
                null_const: null,
                grid_stride,
                threads,
                dump_streams: dump_streams.then(|| out.clone()),
            };
            let outcome = simulate(&spec)?;
            write_outputs(&outcome, &out)?;
            let rejected = outcome.times.iter().flatten().count();
            println!(
                "{rejected}/{replicates} replicates rejected by t = {horizon}; fraction {:.4} (outputs in {})",
                outcome.cdf.fraction_at_end(),
                out.display()
            );
            Ok(())
        }
        Command::Cs {
            input,
            dgp,
            delta,
            conc,
            dim,
            cs_min,
            cs_max,
            cs_points,
            horizon,
            stride,
            out,
            config,
        } => {
            let settings = config.settings()?;
            let source = match (input, dgp) {
                (Some(path), None) => CsSource::File(read_stream(&path)?),
                (None, Some(name)) => {
                    let flags = DgpFlags { dgp: name, delta, conc, dim };
                    CsSource::Dgp(flags.shape()?)
                }
                _ => {
                    return Err(HarnessError::Config(
                        "provide exactly one of --input or --dgp".into(),
                    ))
                }
            };
            let checkpoints = run_cs(
                source,
                &settings,
                GridSpec { lo: cs_min, hi: cs_max, points: cs_points },
                horizon,
                stride,
                &out,
            )?;
            if let Some(last) = checkpoints.last() {
                match last.hull {
                    Some((lo, hi)) => println!(
                        "t = {}: {} survivors, hull [{lo:.6}, {hi:.6}] (table in {})",
                        last.t,
                        last.n_survivors,
                        out.display()
                    ),
                    None => println!("t = {}: every candidate rejected", last.t),
                }
            }
            Ok(())
        }
        Command::CalibrateRho { t_star, alpha } => {
            let rho = rho_for_target_time(t_star, alpha)?;
            println!("{rho}");
            Ok(())
        }
    }
}
