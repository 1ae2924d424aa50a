//! `mcaoi` command-line frontend.
//!
//! Exit codes: `0` success, `1` runtime failure, `2` usage error, `3`
//! divergent AoI (unless `--allow-divergent`).

pub mod format;
mod selftest;
pub mod sweep;

use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use mcaoi::optimize::{integer_split, optimize_ms_fixed, OptimizeWarning};
use mcaoi::simulate::analytic_aoi;
use mcaoi::{
    aoi_scheme, compare_schemes, optimal_shifts, optimize_blocklength, optimize_ms, simulate, simulate_mp_moments,
    BlocklengthRange, ChannelSet, OptimumReport, Schedule, SchemeConfig, SchemeKind, SchemeSpec, ShiftMode,
    ShiftSearch, SimConfig,
};
use serde::Serialize;

use crate::format::sig9;
use crate::sweep::{OutputFormat, ShiftArg, SweepConfigFile, SweepKind, SweepSpec};

pub const EXIT_OK: i32 = 0;
pub const EXIT_FAILURE: i32 = 1;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_DIVERGENT: i32 = 3;

/// Environment variable naming the default output directory for sweeps.
pub const OUT_DIR_ENV: &str = "MCAOI_OUT_DIR";

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error(transparent)]
    Model(#[from] mcaoi::Error),
    #[error(transparent)]
    Io(#[from] io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => EXIT_USAGE,
            _ => EXIT_FAILURE,
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "mcaoi", version, about = "Average Age of Information of multi-connectivity schemes")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Evaluate one scheme at fixed parameters.
    Eval(EvalArgs),
    /// Optimise the blocklength (and split or shifts) of a scheme.
    Optimize(OptimizeArgs),
    /// Run a parameter sweep and write CSV or JSON.
    Sweep(SweepArgs),
    /// Monte Carlo run compared against the analytic value.
    Simulate(SimulateArgs),
    /// Quick invariant checks.
    Selftest,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SchemeArg {
    Sc,
    Pd,
    Mp,
    Cs,
    Ms,
}

impl From<SchemeArg> for SchemeKind {
    fn from(value: SchemeArg) -> Self {
        match value {
            SchemeArg::Sc => SchemeKind::Sc,
            SchemeArg::Pd => SchemeKind::Pd,
            SchemeArg::Mp => SchemeKind::Mp,
            SchemeArg::Cs => SchemeKind::Cs,
            SchemeArg::Ms => SchemeKind::Ms,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum OptimizeScheme {
    Sc,
    Pd,
    Mp,
    Cs,
    Ms,
    /// Every scheme side by side.
    All,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SearchArg {
    Auto,
    Exhaustive,
    Descent,
}

impl From<SearchArg> for ShiftSearch {
    fn from(value: SearchArg) -> Self {
        match value {
            SearchArg::Auto => ShiftSearch::Auto,
            SearchArg::Exhaustive => ShiftSearch::Exhaustive,
            SearchArg::Descent => ShiftSearch::CoordinateDescent,
        }
    }
}

#[derive(Debug, Args)]
#[group(required = true, multiple = false)]
pub struct ChannelArgs {
    /// Linear SNR per channel, comma separated.
    #[arg(long, value_delimiter = ',', num_args = 1..)]
    pub snr: Option<Vec<f64>>,
    /// SNR per channel in dB, comma separated.
    #[arg(long = "snr-db", value_delimiter = ',', num_args = 1.., allow_negative_numbers = true)]
    pub snr_db: Option<Vec<f64>>,
}

impl ChannelArgs {
    pub fn channels(&self) -> Result<ChannelSet<f64>, CliError> {
        let set = match (&self.snr, &self.snr_db) {
            (Some(linear), _) => ChannelSet::new(linear.clone()),
            (None, Some(db)) => ChannelSet::from_db(db),
            (None, None) => return Err(CliError::Usage("one of --snr or --snr-db is required".into())),
        };
        set.map_err(|e| CliError::Usage(e.to_string()))
    }
}

/// Parameters shared by `eval` and `simulate`.
#[derive(Debug, Args)]
pub struct PointArgs {
    #[arg(long, value_enum)]
    pub scheme: SchemeArg,
    /// Blocklength in symbols (per channel for CS).
    #[arg(long)]
    pub n: u64,
    /// Message bits. Optional for MS when --splits is given.
    #[arg(long)]
    pub k: Option<u64>,
    #[command(flatten)]
    pub channels: ChannelArgs,
    /// MS bits per channel; defaults to the optimised integer split.
    #[arg(long, value_delimiter = ',')]
    pub splits: Option<Vec<u64>>,
    /// MP shifts in symbols; defaults to the evenly spread integer schedule.
    #[arg(long, value_delimiter = ',')]
    pub shifts: Option<Vec<u64>>,
    /// SC channel index; defaults to the strongest channel.
    #[arg(long)]
    pub channel: Option<usize>,
}

impl PointArgs {
    fn require_k(&self) -> Result<u64, CliError> {
        self.k
            .ok_or_else(|| CliError::Usage(format!("--k is required for scheme {:?}", self.scheme)))
    }

    pub fn config(&self, channels: &ChannelSet<f64>) -> Result<SchemeConfig<f64>, CliError> {
        if self.n == 0 {
            return Err(CliError::Usage("--n must be at least 1".into()));
        }
        let n = self.n as f64;
        if self.splits.is_some() && self.scheme != SchemeArg::Ms {
            return Err(CliError::Usage("--splits only applies to --scheme ms".into()));
        }
        if self.shifts.is_some() && self.scheme != SchemeArg::Mp {
            return Err(CliError::Usage("--shifts only applies to --scheme mp".into()));
        }
        if self.channel.is_some() && self.scheme != SchemeArg::Sc {
            return Err(CliError::Usage("--channel only applies to --scheme sc".into()));
        }
        Ok(match self.scheme {
            SchemeArg::Sc => SchemeConfig::Sc {
                n,
                k: self.require_k()? as f64,
                channel: self.channel.unwrap_or_else(|| channels.strongest()),
            },
            SchemeArg::Pd => SchemeConfig::Pd {
                n,
                k: self.require_k()? as f64,
            },
            SchemeArg::Cs => SchemeConfig::Cs {
                n,
                k: self.require_k()? as f64,
            },
            SchemeArg::Ms => {
                let splits = match &self.splits {
                    Some(s) => {
                        if let Some(k) = self.k {
                            if s.iter().sum::<u64>() != k {
                                return Err(CliError::Usage(format!("--splits must add up to --k = {k}")));
                            }
                        }
                        s.clone()
                    }
                    None => integer_split(n, self.require_k()?, channels)?,
                };
                SchemeConfig::Ms {
                    n,
                    splits: splits.into_iter().map(|s| s as f64).collect(),
                }
            }
            SchemeArg::Mp => {
                let schedule = match &self.shifts {
                    Some(s) => Schedule::new(n, s.iter().map(|&v| v as f64).collect())
                        .map_err(|e| CliError::Usage(e.to_string()))?,
                    None => optimal_shifts(n, channels.len(), ShiftMode::Integer)?,
                };
                SchemeConfig::Mp {
                    k: self.require_k()? as f64,
                    schedule,
                }
            }
        })
    }
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    #[command(flatten)]
    pub point: PointArgs,
    /// Exit with 0 even when the AoI is infinite.
    #[arg(long)]
    pub allow_divergent: bool,
    /// Print the full result as JSON.
    #[arg(long)]
    pub json: bool,
}

#[derive(Debug, Args)]
pub struct OptimizeArgs {
    #[arg(long, value_enum)]
    pub scheme: OptimizeScheme,
    #[arg(long)]
    pub k: u64,
    #[command(flatten)]
    pub channels: ChannelArgs,
    /// Smallest blocklength searched; defaults to ceil(k / sum capacity).
    #[arg(long)]
    pub n_min: Option<u64>,
    /// Largest blocklength searched; defaults to 50 k.
    #[arg(long)]
    pub n_max: Option<u64>,
    /// MP shifts for equal SNRs.
    #[arg(long, value_enum, default_value = "integer")]
    pub shift_mode: ShiftArg,
    /// MP schedule search for distinct SNRs.
    #[arg(long, value_enum, default_value = "auto")]
    pub shift_search: SearchArg,
    /// SC channel index; defaults to the strongest channel.
    #[arg(long)]
    pub channel: Option<usize>,
    /// Keep the MS split fixed instead of optimising it.
    #[arg(long, value_delimiter = ',')]
    pub splits: Option<Vec<u64>>,
    /// Leave the per-blocklength trace out of the report.
    #[arg(long)]
    pub no_trace: bool,
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    #[arg(long, value_enum)]
    pub kind: Option<SweepKind>,
    /// JSON sweep description; flags given on the command line take precedence.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long, value_delimiter = ',')]
    pub k: Option<Vec<u64>>,
    /// Channel counts for the equal-snr sweep.
    #[arg(long, value_delimiter = ',')]
    pub channels: Option<Vec<usize>>,
    /// SNR grid for the equal-snr sweep.
    #[arg(long, value_delimiter = ',')]
    pub snr: Option<Vec<f64>>,
    /// SNR sum of channels 0 and 1.
    #[arg(long)]
    pub sum_snr: Option<f64>,
    #[arg(long)]
    pub gamma0_start: Option<f64>,
    #[arg(long)]
    pub gamma0_stop: Option<f64>,
    #[arg(long)]
    pub gamma0_step: Option<f64>,
    /// SNR of the third channel in the three-channel sweep.
    #[arg(long)]
    pub fixed_snr: Option<f64>,
    #[arg(long)]
    pub n_min: Option<u64>,
    #[arg(long)]
    pub n_max: Option<u64>,
    #[arg(long, value_enum)]
    pub shifts: Option<ShiftArg>,
    #[arg(long, value_enum)]
    pub format: Option<OutputFormat>,
    /// Output file; overrides --out-dir.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Directory for `<kind>.<format>`; stdout when neither this nor the
    /// environment variable is set.
    #[arg(long, env = OUT_DIR_ENV)]
    pub out_dir: Option<PathBuf>,
}

impl SweepArgs {
    pub fn spec(&self) -> Result<SweepSpec, CliError> {
        let file = match &self.config {
            Some(path) => {
                let text = std::fs::read_to_string(path)?;
                serde_json::from_str::<SweepConfigFile>(&text)
                    .map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))?
            }
            None => SweepConfigFile {
                version: sweep::SCHEMA_VERSION,
                ..Default::default()
            },
        };
        let mut spec = SweepSpec::from_file(&file, self.kind)?;
        spec.overlay(&SweepConfigFile {
            version: sweep::SCHEMA_VERSION,
            kind: None,
            k: self.k.clone(),
            channels: self.channels.clone(),
            snr: self.snr.clone(),
            sum_snr: self.sum_snr,
            gamma0_start: self.gamma0_start,
            gamma0_stop: self.gamma0_stop,
            gamma0_step: self.gamma0_step,
            fixed_snr: self.fixed_snr,
            n_min: self.n_min,
            n_max: self.n_max,
            shifts: self.shifts,
            format: self.format,
        });
        spec.validate()?;
        Ok(spec)
    }
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    #[command(flatten)]
    pub point: PointArgs,
    /// Simulated symbols.
    #[arg(long, default_value_t = 10_000_000)]
    pub horizon: u64,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    /// Symbols discarded before measuring; defaults to ten periods.
    #[arg(long)]
    pub warmup: Option<u64>,
    /// Override the modelled error probabilities (one value for SC/CS, one per channel otherwise).
    #[arg(long, value_delimiter = ',')]
    pub eps: Option<Vec<f64>>,
    /// Also report per-channel inter-reception moments (MP only).
    #[arg(long)]
    pub moments: bool,
}

/// Parses `args` and runs the command, writing to `out`. Returns the exit code.
pub fn run_with<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = e.exit_code();
            if code == 0 {
                let _ = write!(out, "{}", e.render());
                return EXIT_OK;
            }
            let _ = write!(err, "{}", e.render());
            return EXIT_USAGE;
        }
    };
    match dispatch(cli.command, out, err) {
        Ok(code) => code,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            e.exit_code()
        }
    }
}

fn dispatch(command: Command, out: &mut dyn Write, err: &mut dyn Write) -> Result<i32, CliError> {
    match command {
        Command::Eval(a) => cmd_eval(&a, out),
        Command::Optimize(a) => cmd_optimize(&a, out, err),
        Command::Sweep(a) => cmd_sweep(&a, out, err),
        Command::Simulate(a) => cmd_simulate(&a, out),
        Command::Selftest => Ok(selftest::run(out)?),
    }
}

#[derive(Serialize)]
struct EvalOutput<'a> {
    config: &'a SchemeConfig<f64>,
    snrs: &'a [f64],
    result: &'a mcaoi::AoiResult<f64>,
}

fn cmd_eval(a: &EvalArgs, out: &mut dyn Write) -> Result<i32, CliError> {
    let channels = a.point.channels.channels()?;
    let config = a.point.config(&channels)?;
    let result = aoi_scheme(&config, &channels)?;
    if a.json {
        serde_json::to_writer_pretty(
            &mut *out,
            &EvalOutput {
                config: &config,
                snrs: channels.snrs(),
                result: &result,
            },
        )?;
        writeln!(out)?;
    } else {
        writeln!(out, "{}", sig9(result.avg_aoi))?;
        if !result.quality_flags.is_empty() {
            let flags: Vec<String> = result
                .quality_flags
                .iter()
                .map(|f| serde_json::to_value(f).map(|v| v.as_str().unwrap_or_default().to_string()))
                .collect::<Result<_, _>>()?;
            writeln!(out, "flags: {}", flags.join(","))?;
        }
    }
    Ok(if result.is_divergent() && !a.allow_divergent {
        EXIT_DIVERGENT
    } else {
        EXIT_OK
    })
}

fn warn_boundary(report: &OptimumReport<f64>, err: &mut dyn Write) -> io::Result<()> {
    for w in &report.warnings {
        let side = match w {
            OptimizeWarning::MinimumAtLowerBound => "lower",
            OptimizeWarning::MinimumAtUpperBound => "upper",
        };
        writeln!(
            err,
            "warning: {} optimum n = {} sits at the {side} end of [{}, {}]",
            report.scheme, report.n, report.range.min, report.range.max
        )?;
    }
    Ok(())
}

fn cmd_optimize(a: &OptimizeArgs, out: &mut dyn Write, err: &mut dyn Write) -> Result<i32, CliError> {
    let channels = a.channels.channels()?;
    let default = BlocklengthRange::default_for(a.k, &channels);
    let range = BlocklengthRange::new(a.n_min.unwrap_or(default.min), a.n_max.unwrap_or(default.max))
        .map_err(|e| CliError::Usage(e.to_string()))?;
    if a.splits.is_some() && a.scheme != OptimizeScheme::Ms {
        return Err(CliError::Usage("--splits only applies to --scheme ms".into()));
    }
    let mp = SchemeSpec::Mp {
        shifts: a.shift_mode.into(),
        search: a.shift_search.into(),
    };
    let mut reports = match a.scheme {
        OptimizeScheme::All => compare_schemes(a.k, &channels, range, a.shift_mode.into())?.entries,
        OptimizeScheme::Ms => vec![match &a.splits {
            Some(s) => {
                if s.iter().sum::<u64>() != a.k {
                    return Err(CliError::Usage(format!("--splits must add up to --k = {}", a.k)));
                }
                optimize_ms_fixed(s, &channels, range)?
            }
            None => optimize_ms(a.k, &channels, range)?,
        }],
        other => {
            let spec = match other {
                OptimizeScheme::Sc => SchemeSpec::Sc {
                    channel: a.channel.unwrap_or_else(|| channels.strongest()),
                },
                OptimizeScheme::Pd => SchemeSpec::Pd,
                OptimizeScheme::Cs => SchemeSpec::Cs,
                _ => mp,
            };
            vec![optimize_blocklength(spec, a.k, &channels, range)?]
        }
    };
    for r in &mut reports {
        warn_boundary(r, err)?;
        if a.no_trace {
            r.trace.clear();
        }
    }
    if a.scheme == OptimizeScheme::All {
        serde_json::to_writer_pretty(&mut *out, &reports)?;
    } else {
        serde_json::to_writer_pretty(&mut *out, &reports[0])?;
    }
    writeln!(out)?;
    Ok(EXIT_OK)
}

fn cmd_sweep(a: &SweepArgs, out: &mut dyn Write, err: &mut dyn Write) -> Result<i32, CliError> {
    let spec = a.spec()?;
    let rows = sweep::run_sweep(&spec)?;
    let target = match (&a.out, &a.out_dir) {
        (Some(path), _) => Some(path.clone()),
        (None, Some(dir)) => {
            std::fs::create_dir_all(dir)?;
            Some(dir.join(format!("{}.{}", spec.kind.file_stem(), spec.format.extension())))
        }
        (None, None) => None,
    };
    let write = |w: &mut dyn Write| -> Result<(), CliError> {
        match spec.format {
            OutputFormat::Csv => sweep::write_csv(&rows, w),
            OutputFormat::Json => sweep::write_json(&spec, &rows, w),
        }
    };
    match target {
        Some(path) => {
            let mut file = BufWriter::new(File::create(&path)?);
            write(&mut file)?;
            file.flush()?;
            writeln!(err, "wrote {} rows to {}", rows.len(), path.display())?;
        }
        None => write(out)?,
    }
    Ok(EXIT_OK)
}

#[derive(Serialize)]
struct SimulateOutput<'a> {
    config: &'a SchemeConfig<f64>,
    snrs: &'a [f64],
    horizon: u64,
    seed: u64,
    empirical: &'a mcaoi::SimResult,
    analytic: f64,
    difference: f64,
    tolerance: f64,
    agrees: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    moments: Option<MomentsOutput>,
}

#[derive(Serialize)]
struct MomentsOutput {
    empirical: mcaoi::MpMomentEstimate,
    analytic: mcaoi::MpMoments<f64>,
}

/// Relative floor of the agreement tolerance.
pub const AGREEMENT_REL: f64 = 0.005;

fn cmd_simulate(a: &SimulateArgs, out: &mut dyn Write) -> Result<i32, CliError> {
    let channels = a.point.channels.channels()?;
    let config = a.point.config(&channels)?;
    let mut sim = SimConfig::new(config.clone(), channels.clone(), a.horizon, a.seed);
    sim.warmup = a.warmup;
    sim.error_override = a.eps.clone();
    let analytic = analytic_aoi(&sim)?.avg_aoi;
    let empirical = simulate(&sim)?;
    let moments = if a.moments {
        let SchemeConfig::Mp { schedule, .. } = &config else {
            return Err(CliError::Usage("--moments needs --scheme mp".into()));
        };
        let eps: Vec<_> = match &a.eps {
            Some(e) => e.iter().map(|&v| mcaoi::ErrorProbability::new(v)).collect::<Result<_, _>>()?,
            None => config.epsilons(&channels)?,
        };
        Some(MomentsOutput {
            empirical: simulate_mp_moments(&sim)?,
            analytic: mcaoi::aoi_mp_general(schedule, &eps)?.1,
        })
    } else {
        None
    };
    let tolerance = (3.0 * empirical.ci_halfwidth).max(AGREEMENT_REL * analytic);
    let difference = empirical.avg_aoi - analytic;
    serde_json::to_writer_pretty(
        &mut *out,
        &SimulateOutput {
            config: &config,
            snrs: channels.snrs(),
            horizon: a.horizon,
            seed: a.seed,
            empirical: &empirical,
            analytic,
            difference,
            tolerance,
            agrees: difference.abs() <= tolerance,
            moments,
        },
    )?;
    writeln!(out)?;
    Ok(EXIT_OK)
}

/// Entry point used by the binary.
pub fn run() -> i32 {
    let stdout = io::stdout();
    let stderr = io::stderr();
    let mut out = stdout.lock();
    let mut err = stderr.lock();
    let code = run_with(std::env::args_os(), &mut out, &mut err);
    let _ = out.flush();
    code
}
