//! Monte Carlo reference for the analytic AoI.
//!
//! Transmissions complete on a fixed integer time grid, each one decoded
//! with probability `1 - eps`. Between receptions the age grows with unit
//! slope and every reception drops it to the update's delay `n`, so the
//! area of one inter-reception interval of length `Y` that starts at age
//! `D` is `Y D + Y^2 / 2`. Areas are accumulated exactly as `2 * area` in
//! 128-bit integers.
//!
//! Randomness comes from ChaCha8 seeded with `seed`. Channel `i` draws from
//! stream `i`; the joint CS decoder draws from stream `N`. Reruns are
//! therefore bit-identical on every platform.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::aoi::{aoi_mp_general, aoi_renewal, AoiResult, SchemeConfig};
use crate::channel::{either_fails, epsilon_cs, epsilon_single, ChannelSet, ErrorProbability};
use crate::error::{Error, Result};

pub const BATCHES: usize = 100;
/// Default warmup, in transmission periods.
pub const WARMUP_PERIODS: u64 = 10;
const Z_95: f64 = 1.959_963_984_540_054;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SimConfig {
    pub scheme: SchemeConfig<f64>,
    pub channels: ChannelSet<f64>,
    /// Simulated symbols; only transmissions completing by then count.
    pub horizon: u64,
    pub seed: u64,
    /// Symbols discarded before measuring. Defaults to ten periods.
    pub warmup: Option<u64>,
    /// Replaces the modelled error probabilities: one value for SC and CS,
    /// one per channel for PD, MS and MP.
    pub error_override: Option<Vec<f64>>,
}

impl SimConfig {
    pub fn new(scheme: SchemeConfig<f64>, channels: ChannelSet<f64>, horizon: u64, seed: u64) -> Self {
        Self {
            scheme,
            channels,
            horizon,
            seed,
            warmup: None,
            error_override: None,
        }
    }

    pub fn with_errors(mut self, eps: Vec<f64>) -> Self {
        self.error_override = Some(eps);
        self
    }

    pub fn with_warmup(mut self, warmup: u64) -> Self {
        self.warmup = Some(warmup);
        self
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SimResult {
    pub avg_aoi: f64,
    /// Complete inter-reception intervals inside the measurement window.
    pub intervals: u64,
    /// 95% half-width from batch means; zero when every batch agrees exactly.
    pub ci_halfwidth: f64,
    pub measured_time: u64,
    pub batches: usize,
    /// Transmissions per channel (CS counts the joint codeword on every channel).
    pub channel_attempts: Vec<u64>,
    pub channel_successes: Vec<u64>,
}

impl SimResult {
    pub fn to_aoi_result(&self, epsilon_used: f64) -> AoiResult<f64> {
        AoiResult {
            avg_aoi: self.avg_aoi,
            epsilon_used,
            method: crate::aoi::Method::Simulated,
            ci_halfwidth: self.ci_halfwidth,
            quality_flags: Vec::new(),
        }
    }

    /// `|empirical - analytic| <= max(3 CI, rel * analytic)`.
    pub fn agrees_with(&self, analytic: f64, rel: f64) -> bool {
        (self.avg_aoi - analytic).abs() <= (3.0 * self.ci_halfwidth).max(rel * analytic)
    }
}

/// Empirical inter-reception moments, grouped by the channel that starts the interval.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MpMomentEstimate {
    pub first: Vec<f64>,
    pub second: Vec<f64>,
    pub first_stderr: Vec<f64>,
    pub second_stderr: Vec<f64>,
    pub counts: Vec<u64>,
}

enum Layout {
    /// One decoder drawing from `stream`; its outcome is booked on `channels`.
    Single { stream: usize, eps: f64, channels: Vec<usize> },
    /// Per-channel draws; the update survives if all (`need_all`) or any succeed.
    Parallel { eps: Vec<f64>, need_all: bool },
    Multiplex { eps: Vec<f64>, shifts: Vec<u64> },
}

fn whole(value: f64, name: &'static str) -> Result<u64> {
    if value.is_finite() && value >= 0.0 && value.fract() == 0.0 && value <= u64::MAX as f64 {
        Ok(value as u64)
    } else {
        Err(Error::invalid(name, format!("the simulator needs whole symbols, got {value}")))
    }
}

fn checked_override(config: &SimConfig, units: usize) -> Result<Option<Vec<f64>>> {
    let Some(eps) = &config.error_override else {
        return Ok(None);
    };
    if eps.len() != units {
        return Err(Error::LengthMismatch {
            name: "error probabilities",
            expected: units,
            got: eps.len(),
        });
    }
    for &e in eps {
        ErrorProbability::new(e)?;
    }
    Ok(Some(eps.clone()))
}

fn layout(config: &SimConfig) -> Result<(u64, Layout)> {
    let channels = &config.channels;
    let count = channels.len();
    config.scheme.check_channels(channels)?;
    let n = whole(config.scheme.period(), "period")?;
    if n == 0 {
        return Err(Error::invalid("period", "must be at least one symbol"));
    }
    let per_channel = |k_of: &dyn Fn(usize) -> f64| -> Result<Vec<f64>> {
        match checked_override(config, count)? {
            Some(e) => Ok(e),
            None => (0..count)
                .map(|i| {
                    let k = k_of(i);
                    if k == 0.0 && !matches!(config.scheme, SchemeConfig::Pd { .. } | SchemeConfig::Mp { .. }) {
                        Ok(0.0)
                    } else {
                        Ok(epsilon_single(n as f64, k, channels.snr(i))?.value())
                    }
                })
                .collect(),
        }
    };
    let layout = match &config.scheme {
        SchemeConfig::Sc { k, channel, .. } => {
            let eps = match checked_override(config, 1)? {
                Some(e) => e[0],
                None => epsilon_single(n as f64, *k, channels.snr(*channel))?.value(),
            };
            Layout::Single {
                stream: *channel,
                eps,
                channels: vec![*channel],
            }
        }
        SchemeConfig::Cs { k, .. } => {
            let eps = match checked_override(config, 1)? {
                Some(e) => e[0],
                None => epsilon_cs(n as f64, *k, channels)?.value(),
            };
            Layout::Single {
                stream: count,
                eps,
                channels: (0..count).collect(),
            }
        }
        SchemeConfig::Pd { k, .. } => Layout::Parallel {
            eps: per_channel(&|_| *k)?,
            need_all: false,
        },
        SchemeConfig::Ms { splits, .. } => {
            let mut eps = per_channel(&|i| splits[i])?;
            // Idle channels carry nothing and cannot fail.
            for (e, &k) in eps.iter_mut().zip(splits) {
                if k == 0.0 {
                    *e = 0.0;
                }
            }
            Layout::Parallel { eps, need_all: true }
        }
        SchemeConfig::Mp { k, schedule } => Layout::Multiplex {
            eps: per_channel(&|_| *k)?,
            shifts: schedule
                .shifts()
                .iter()
                .map(|&s| whole(s, "shift"))
                .collect::<Result<_>>()?,
        },
    };
    Ok((n, layout))
}

/// Analytic AoI of exactly what [`simulate`] runs, including any error override.
pub fn analytic_aoi(config: &SimConfig) -> Result<AoiResult<f64>> {
    let (n, layout) = layout(config)?;
    let nf = n as f64;
    match layout {
        Layout::Single { eps, .. } => aoi_renewal(nf, ErrorProbability::new(eps)?),
        Layout::Parallel { eps, need_all } => {
            let combined = if need_all {
                eps.iter().fold(0.0, |acc, &e| either_fails(acc, e))
            } else {
                eps.iter().product()
            };
            aoi_renewal(nf, ErrorProbability::new(combined.min(1.0))?)
        }
        Layout::Multiplex { eps, .. } => {
            let SchemeConfig::Mp { schedule, .. } = &config.scheme else {
                unreachable!("multiplex layout comes from an MP config")
            };
            let eps: Vec<_> = eps.iter().map(|&e| ErrorProbability::new(e)).collect::<Result<_>>()?;
            Ok(aoi_mp_general(schedule, &eps)?.0)
        }
    }
}

#[derive(Default, Clone, Copy)]
struct Batch {
    area2: u128,
    length: u64,
}

struct TagStats {
    count: u64,
    sum: f64,
    sum2: f64,
    sum3: f64,
    sum4: f64,
}

struct Recorder {
    warmup: u64,
    horizon: u64,
    last: Option<(u64, u64, usize)>,
    area2: u128,
    length: u64,
    intervals: u64,
    batches: Vec<Batch>,
    tags: Vec<TagStats>,
}

impl Recorder {
    fn new(warmup: u64, horizon: u64, tags: usize) -> Self {
        Self {
            warmup,
            horizon,
            last: None,
            area2: 0,
            length: 0,
            intervals: 0,
            batches: vec![Batch::default(); BATCHES],
            tags: (0..tags)
                .map(|_| TagStats {
                    count: 0,
                    sum: 0.0,
                    sum2: 0.0,
                    sum3: 0.0,
                    sum4: 0.0,
                })
                .collect(),
        }
    }

    /// Reception at `time` of an update generated at `generated`.
    fn receive(&mut self, time: u64, generated: u64, tag: usize) {
        if let Some((start, start_gen, start_tag)) = self.last {
            if generated < start_gen {
                return;
            }
            if start >= self.warmup {
                let y = time - start;
                let age = (start - start_gen) as u128;
                let area2 = 2 * y as u128 * age + (y as u128) * (y as u128);
                self.area2 += area2;
                self.length += y;
                self.intervals += 1;
                let span = (self.horizon - self.warmup) as u128;
                let b = (((start - self.warmup) as u128 * BATCHES as u128) / span) as usize;
                let batch = &mut self.batches[b.min(BATCHES - 1)];
                batch.area2 += area2;
                batch.length += y;
                let yf = y as f64;
                let s = &mut self.tags[start_tag];
                s.count += 1;
                s.sum += yf;
                s.sum2 += yf * yf;
                s.sum3 += yf * yf * yf;
                s.sum4 += yf * yf * yf * yf;
            }
        }
        self.last = Some((time, generated, tag));
    }
}

fn run(config: &SimConfig) -> Result<(Recorder, Vec<u64>, Vec<u64>)> {
    let (n, layout) = layout(config)?;
    let count = config.channels.len();
    let warmup = config.warmup.unwrap_or(WARMUP_PERIODS.saturating_mul(n));
    let horizon = config.horizon;
    if horizon <= warmup {
        return Err(Error::invalid(
            "horizon",
            format!("must exceed the warmup of {warmup} symbols, got {horizon}"),
        ));
    }
    let stream = |s: usize| {
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        rng.set_stream(s as u64);
        rng
    };
    let decode = |rng: &mut ChaCha8Rng, eps: f64| rng.random::<f64>() >= eps;

    let mut attempts = vec![0u64; count];
    let mut successes = vec![0u64; count];
    let mut rec = Recorder::new(warmup, horizon, count);
    match layout {
        Layout::Single {
            stream: s,
            eps,
            channels,
        } => {
            let mut rng = stream(s);
            let mut m = 0u64;
            while (m + 1) * n <= horizon {
                let ok = decode(&mut rng, eps);
                for &c in &channels {
                    attempts[c] += 1;
                    successes[c] += ok as u64;
                }
                if ok {
                    rec.receive((m + 1) * n, m * n, 0);
                }
                m += 1;
            }
        }
        Layout::Parallel { eps, need_all } => {
            let mut rngs: Vec<_> = (0..count).map(stream).collect();
            let active: Vec<bool> = match &config.scheme {
                SchemeConfig::Ms { splits, .. } => splits.iter().map(|&k| k > 0.0).collect(),
                _ => vec![true; count],
            };
            let mut m = 0u64;
            while (m + 1) * n <= horizon {
                let mut all = true;
                let mut any = false;
                for i in 0..count {
                    if !active[i] {
                        continue;
                    }
                    let ok = decode(&mut rngs[i], eps[i]);
                    attempts[i] += 1;
                    successes[i] += ok as u64;
                    all &= ok;
                    any |= ok;
                }
                if (need_all && all) || (!need_all && any) {
                    rec.receive((m + 1) * n, m * n, 0);
                }
                m += 1;
            }
        }
        Layout::Multiplex { eps, shifts } => {
            let mut rngs: Vec<_> = (0..count).map(stream).collect();
            let mut m = 0u64;
            'cycles: loop {
                for i in 0..count {
                    let done = shifts[i] + (m + 1) * n;
                    if done > horizon {
                        break 'cycles;
                    }
                    let ok = decode(&mut rngs[i], eps[i]);
                    attempts[i] += 1;
                    successes[i] += ok as u64;
                    if ok {
                        rec.receive(done, shifts[i] + m * n, i);
                    }
                }
                m += 1;
            }
        }
    }
    Ok((rec, attempts, successes))
}

/// Runs one simulation. The same configuration always gives the same result.
pub fn simulate(config: &SimConfig) -> Result<SimResult> {
    let (rec, attempts, successes) = run(config)?;
    if rec.length == 0 {
        return Err(Error::NoData(format!(
            "no complete inter-reception interval between symbol {} and {}",
            rec.warmup, rec.horizon
        )));
    }
    let avg = rec.area2 as f64 / (2.0 * rec.length as f64);
    let means: Vec<f64> = rec
        .batches
        .iter()
        .filter(|b| b.length > 0)
        .map(|b| b.area2 as f64 / (2.0 * b.length as f64))
        .collect();
    let ci = if means.len() < 2 {
        f64::INFINITY
    } else {
        let count = means.len() as f64;
        let mean = means.iter().sum::<f64>() / count;
        if means.iter().all(|&m| m == means[0]) {
            0.0
        } else {
            let var = means.iter().map(|m| (m - mean) * (m - mean)).sum::<f64>() / (count - 1.0);
            Z_95 * (var / count).sqrt()
        }
    };
    Ok(SimResult {
        avg_aoi: avg,
        intervals: rec.intervals,
        ci_halfwidth: ci,
        measured_time: rec.length,
        batches: means.len(),
        channel_attempts: attempts,
        channel_successes: successes,
    })
}

/// Per-channel moments of the inter-reception time for an MP configuration.
pub fn simulate_mp_moments(config: &SimConfig) -> Result<MpMomentEstimate> {
    if !matches!(config.scheme, SchemeConfig::Mp { .. }) {
        return Err(Error::invalid("scheme", "inter-reception moments need a multiplexing configuration"));
    }
    let (rec, _, _) = run(config)?;
    if rec.intervals == 0 {
        return Err(Error::NoData("no complete inter-reception interval".into()));
    }
    let mut est = MpMomentEstimate {
        first: Vec::new(),
        second: Vec::new(),
        first_stderr: Vec::new(),
        second_stderr: Vec::new(),
        counts: Vec::new(),
    };
    for s in &rec.tags {
        let c = s.count as f64;
        let (m1, m2) = (s.sum / c, s.sum2 / c);
        let m4 = s.sum4 / c;
        let var1 = (m2 - m1 * m1).max(0.0);
        let var2 = (m4 - m2 * m2).max(0.0);
        est.first.push(m1);
        est.second.push(m2);
        est.first_stderr.push((var1 / c).sqrt());
        est.second_stderr.push((var2 / c).sqrt());
        est.counts.push(s.count);
    }
    Ok(est)
}
