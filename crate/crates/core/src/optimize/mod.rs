//! Parameter optimisation for every scheme.
//!
//! The blocklength is always searched exhaustively over an integer range;
//! per-`n` evaluations run in parallel and are merged in `n` order, so the
//! result never depends on scheduling. Ties go to the smallest `n`.

mod shifts;
mod split;

use rayon::prelude::*;
use serde::Serialize;

pub use shifts::{
    optimal_shifts, optimize_shifts_heterogeneous, schedule_count, ScheduleOrigin, ShiftMode, ShiftOptimum,
    ShiftSearch, EXHAUSTIVE_BUDGET, EXHAUSTIVE_MAX_CHANNELS,
};
pub use split::{
    capacity_proportional_split, integer_split, optimize_split, refine_split, round_largest_remainder,
    split_log_success, split_objective, KktSplit, SplitAllocation,
};

use crate::aoi::{aoi_mp_equal_snr, aoi_mp_general, aoi_renewal, Schedule, SchemeConfig, SchemeKind};
use crate::channel::{epsilon_cs, epsilon_ms, epsilon_pd, epsilon_single, ChannelSet, ErrorProbability};
use crate::error::{Error, Result};
use crate::scalar::Real;

/// Inclusive integer blocklength range.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct BlocklengthRange {
    pub min: u64,
    pub max: u64,
}

impl BlocklengthRange {
    pub fn new(min: u64, max: u64) -> Result<Self> {
        if min == 0 || min > max {
            return Err(Error::EmptyRange { min, max });
        }
        Ok(Self { min, max })
    }

    /// `[ceil(k / sum C_i), 50 k]`. Below the lower end even the joint code
    /// runs above capacity, so every scheme has `eps >= 1/2` there.
    pub fn default_for<T: Real>(k: u64, channels: &ChannelSet<T>) -> Self {
        let rate = channels.sum_capacity().as_f64();
        let min = ((k as f64 / rate).ceil() as u64).max(1);
        Self {
            min,
            max: min.max(50 * k),
        }
    }

    pub fn len(&self) -> u64 {
        self.max - self.min + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn iter(&self) -> std::ops::RangeInclusive<u64> {
        self.min..=self.max
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum OptimizeWarning {
    /// The best blocklength is the smallest one searched.
    MinimumAtLowerBound,
    /// The best blocklength is the largest one searched; a wider range may do better.
    MinimumAtUpperBound,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TracePoint<T> {
    pub n: u64,
    pub avg_aoi: T,
}

/// Scheme whose blocklength is to be optimised.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(tag = "scheme", rename_all = "lowercase")]
pub enum SchemeSpec {
    Sc { channel: usize },
    Pd,
    Cs,
    /// With equal SNRs the evenly spread schedule is used, real-valued or
    /// rounded per `shifts`. Distinct SNRs always search integer shifts.
    Mp { shifts: ShiftMode, search: ShiftSearch },
}

impl SchemeSpec {
    pub fn kind(&self) -> SchemeKind {
        match self {
            SchemeSpec::Sc { .. } => SchemeKind::Sc,
            SchemeSpec::Pd => SchemeKind::Pd,
            SchemeSpec::Cs => SchemeKind::Cs,
            SchemeSpec::Mp { .. } => SchemeKind::Mp,
        }
    }
}

/// Best parameters found for one scheme.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OptimumReport<T> {
    pub scheme: SchemeKind,
    pub k: u64,
    pub n: u64,
    pub avg_aoi: T,
    pub epsilon: T,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub channel: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub splits: Option<Vec<u64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub shifts: Option<Vec<T>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub schedule_origin: Option<ScheduleOrigin>,
    pub range: BlocklengthRange,
    pub warnings: Vec<OptimizeWarning>,
    pub trace: Vec<TracePoint<T>>,
}

impl<T: Real> OptimumReport<T> {
    /// The reported parameters as a configuration that `aoi_scheme` re-evaluates.
    pub fn config(&self) -> Result<SchemeConfig<T>> {
        let n = T::of_u64(self.n);
        let k = T::of_u64(self.k);
        Ok(match self.scheme {
            SchemeKind::Sc => SchemeConfig::Sc {
                n,
                k,
                channel: self.channel.unwrap_or(0),
            },
            SchemeKind::Pd => SchemeConfig::Pd { n, k },
            SchemeKind::Cs => SchemeConfig::Cs { n, k },
            SchemeKind::Ms => SchemeConfig::Ms {
                n,
                splits: self.splits.iter().flatten().map(|&s| T::of_u64(s)).collect(),
            },
            SchemeKind::Mp => SchemeConfig::Mp {
                k,
                schedule: Schedule::new(n, self.shifts.clone().unwrap_or_else(|| vec![T::zero()]))?,
            },
        })
    }
}

struct Candidate<T> {
    avg_aoi: T,
    epsilon: T,
    splits: Option<Vec<u64>>,
    shifts: Option<Vec<T>>,
    origin: Option<ScheduleOrigin>,
}

impl<T: Real> Candidate<T> {
    fn plain(avg_aoi: T, epsilon: T) -> Self {
        Self {
            avg_aoi,
            epsilon,
            splits: None,
            shifts: None,
            origin: None,
        }
    }
}

fn scan<T, F>(scheme: SchemeKind, k: u64, range: BlocklengthRange, eval: F) -> Result<OptimumReport<T>>
where
    T: Real,
    F: Fn(u64) -> Result<Candidate<T>> + Sync,
{
    let range = BlocklengthRange::new(range.min, range.max)?;
    let candidates: Vec<Candidate<T>> = range.iter().into_par_iter().map(&eval).collect::<Result<_>>()?;
    let mut best: Option<usize> = None;
    for (i, c) in candidates.iter().enumerate() {
        if c.avg_aoi.is_finite() && best.is_none_or(|b| c.avg_aoi < candidates[b].avg_aoi) {
            best = Some(i);
        }
    }
    let best = best.ok_or(Error::AllDivergent {
        min: range.min,
        max: range.max,
    })?;
    let n = range.min + best as u64;
    let mut warnings = Vec::new();
    if n == range.min && range.min < range.max {
        warnings.push(OptimizeWarning::MinimumAtLowerBound);
    }
    if n == range.max && range.min < range.max {
        warnings.push(OptimizeWarning::MinimumAtUpperBound);
    }
    let trace = candidates
        .iter()
        .enumerate()
        .map(|(i, c)| TracePoint {
            n: range.min + i as u64,
            avg_aoi: c.avg_aoi,
        })
        .collect();
    let chosen = candidates.into_iter().nth(best).expect("index within candidates");
    Ok(OptimumReport {
        scheme,
        k,
        n,
        avg_aoi: chosen.avg_aoi,
        epsilon: chosen.epsilon,
        channel: None,
        splits: chosen.splits,
        shifts: chosen.shifts,
        schedule_origin: chosen.origin,
        range,
        warnings,
        trace,
    })
}

fn renewal_candidate<T: Real>(n: u64, eps: ErrorProbability<T>) -> Result<Candidate<T>> {
    let r = aoi_renewal(T::of_u64(n), eps)?;
    Ok(Candidate::plain(r.avg_aoi, r.epsilon_used))
}

fn mp_candidate<T: Real>(
    n: u64,
    k: u64,
    channels: &ChannelSet<T>,
    mode: ShiftMode,
    search: ShiftSearch,
) -> Result<Candidate<T>> {
    let nt = T::of_u64(n);
    let kt = T::of_u64(k);
    let count = channels.len();
    if channels.is_homogeneous() {
        let eps = epsilon_single(nt, kt, channels.snr(0))?;
        let schedule = optimal_shifts(nt, count, mode)?;
        let result = match mode {
            ShiftMode::Continuous => aoi_mp_equal_snr(nt, count, eps)?,
            ShiftMode::Integer => aoi_mp_general(&schedule, &vec![eps; count])?.0,
        };
        return Ok(Candidate {
            avg_aoi: result.avg_aoi,
            epsilon: result.epsilon_used,
            splits: None,
            shifts: Some(schedule.shifts().to_vec()),
            origin: Some(ScheduleOrigin::Uniform),
        });
    }
    let eps: Vec<_> = channels
        .snrs()
        .iter()
        .map(|&g| epsilon_single(nt, kt, g))
        .collect::<Result<_>>()?;
    let found = optimize_shifts_heterogeneous(n, &eps, search)?;
    let result = aoi_mp_general(&found.schedule, &eps)?.0;
    Ok(Candidate {
        avg_aoi: result.avg_aoi,
        epsilon: result.epsilon_used,
        splits: None,
        shifts: Some(found.schedule.shifts().to_vec()),
        origin: Some(found.origin),
    })
}

/// Exhaustive blocklength search for SC, PD, CS or MP with `k` message bits.
///
/// For CS, `n` is the per-channel fragment length.
pub fn optimize_blocklength<T: Real>(
    spec: SchemeSpec,
    k: u64,
    channels: &ChannelSet<T>,
    range: BlocklengthRange,
) -> Result<OptimumReport<T>> {
    let kt = T::of_u64(k);
    let mut report = match spec {
        SchemeSpec::Sc { channel } => {
            if channel >= channels.len() {
                return Err(Error::invalid(
                    "channel",
                    format!("index {channel} out of range for {} channels", channels.len()),
                ));
            }
            let snr = channels.snr(channel);
            scan(SchemeKind::Sc, k, range, |n| {
                renewal_candidate(n, epsilon_single(T::of_u64(n), kt, snr)?)
            })?
        }
        SchemeSpec::Pd => scan(SchemeKind::Pd, k, range, |n| {
            renewal_candidate(n, epsilon_pd(T::of_u64(n), kt, channels)?)
        })?,
        SchemeSpec::Cs => scan(SchemeKind::Cs, k, range, |n| {
            renewal_candidate(n, epsilon_cs(T::of_u64(n), kt, channels)?)
        })?,
        SchemeSpec::Mp { shifts, search } => scan(SchemeKind::Mp, k, range, |n| {
            mp_candidate(n, k, channels, shifts, search)
        })?,
    };
    if let SchemeSpec::Sc { channel } = spec {
        report.channel = Some(channel);
    }
    Ok(report)
}

/// Joint optimisation of blocklength and integer message split.
///
/// At every `n` the continuous KKT split is rounded by largest remainder and
/// polished with [`refine_split`].
pub fn optimize_ms<T: Real>(k: u64, channels: &ChannelSet<T>, range: BlocklengthRange) -> Result<OptimumReport<T>> {
    scan(SchemeKind::Ms, k, range, |n| {
        let nt = T::of_u64(n);
        let splits = integer_split(nt, k, channels)?;
        let real: Vec<T> = splits.iter().map(|&s| T::of_u64(s)).collect();
        let mut c = renewal_candidate(n, epsilon_ms(nt, &real, channels)?)?;
        c.splits = Some(splits);
        Ok(c)
    })
}

/// MS with a split that is fixed for every blocklength.
pub fn optimize_ms_fixed<T: Real>(
    splits: &[u64],
    channels: &ChannelSet<T>,
    range: BlocklengthRange,
) -> Result<OptimumReport<T>> {
    if splits.len() != channels.len() {
        return Err(Error::LengthMismatch {
            name: "splits",
            expected: channels.len(),
            got: splits.len(),
        });
    }
    let k = splits.iter().sum();
    let real: Vec<T> = splits.iter().map(|&s| T::of_u64(s)).collect();
    scan(SchemeKind::Ms, k, range, |n| {
        let mut c = renewal_candidate(n, epsilon_ms(T::of_u64(n), &real, channels)?)?;
        c.splits = Some(splits.to_vec());
        Ok(c)
    })
}

/// Optimised AoI of all five schemes side by side.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SchemeComparison<T> {
    /// SC (strongest channel), PD, MP, CS, MS.
    pub entries: Vec<OptimumReport<T>>,
    /// Whether `CS <= MP <= PD` was checked (equal SNRs only).
    pub ordering_checked: bool,
    pub ordering_defects: Vec<String>,
}

impl<T: Real> SchemeComparison<T> {
    pub fn get(&self, scheme: SchemeKind) -> &OptimumReport<T> {
        self.entries
            .iter()
            .find(|e| e.scheme == scheme)
            .expect("every scheme is present")
    }
}

/// Checks `CS <= MP <= PD` on optimised values; returns the violations.
pub fn ordering_defects<T: Real>(cs: T, mp: T, pd: T) -> Vec<String> {
    let mut defects = Vec::new();
    if !(cs <= mp) {
        defects.push(format!("CS optimum {cs} exceeds MP optimum {mp}"));
    }
    if !(mp <= pd) {
        defects.push(format!("MP optimum {mp} exceeds PD optimum {pd}"));
    }
    defects
}

pub fn compare_schemes<T: Real>(
    k: u64,
    channels: &ChannelSet<T>,
    range: BlocklengthRange,
    shift_mode: ShiftMode,
) -> Result<SchemeComparison<T>> {
    let specs = [
        SchemeSpec::Sc {
            channel: channels.strongest(),
        },
        SchemeSpec::Pd,
        SchemeSpec::Mp {
            shifts: shift_mode,
            search: ShiftSearch::Auto,
        },
        SchemeSpec::Cs,
    ];
    let mut entries = specs
        .iter()
        .map(|&spec| optimize_blocklength(spec, k, channels, range))
        .collect::<Result<Vec<_>>>()?;
    entries.push(optimize_ms(k, channels, range)?);
    let ordering_checked = channels.is_homogeneous();
    let ordering_defects = if ordering_checked {
        ordering_defects(entries[3].avg_aoi, entries[2].avg_aoi, entries[1].avg_aoi)
    } else {
        Vec::new()
    };
    Ok(SchemeComparison {
        entries,
        ordering_checked,
        ordering_defects,
    })
}
