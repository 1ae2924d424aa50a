//! Closed-form average Age of Information for the periodic transmission
//! schemes.
//!
//! SC, PD, CS and MS are renewal processes: each successful decoding starts
//! a new epoch whose AoI area is a rectangle (height `n`, the update delay)
//! plus a triangle, giving
//!
//! ```text
//! avg = n (1 + eps) / (2 (1 - eps)) + n.
//! ```
//!
//! Multiplexing is handled through the inter-reception times `Y_i` that
//! start at a successful reception on channel `i`. They satisfy the cyclic
//! recursion `Y_i = T_i + X * Y_{i+1}`, with `X` the failure indicator of
//! the next channel's transmission, so both moments follow from `N x N`
//! linear systems. The average AoI weights each `Y_i` by how often an
//! epoch starts on channel `i` and by its mean length.

use std::fmt;
use std::str::FromStr;

use serde::Serialize;

use crate::channel::{epsilon_cs, epsilon_ms, epsilon_pd, epsilon_single, ChannelSet, ErrorProbability};
use crate::error::{Error, Result};
use crate::linalg::DenseMatrix;
use crate::scalar::Real;

/// Error probabilities above this are treated as certain loss.
const EPSILON_CEILING: f64 = 1.0 - 1e-16;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Analytic,
    Simulated,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum QualityFlag {
    /// The error probability was indistinguishable from one and was pinned to it.
    EpsilonClamped,
    /// The average AoI is infinite.
    Divergent,
}

/// Average AoI in symbol durations, together with how it was obtained.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AoiResult<T> {
    pub avg_aoi: T,
    pub epsilon_used: T,
    pub method: Method,
    pub ci_halfwidth: T,
    pub quality_flags: Vec<QualityFlag>,
}

impl<T: Real> AoiResult<T> {
    fn analytic(avg_aoi: T, epsilon_used: T, quality_flags: Vec<QualityFlag>) -> Self {
        Self {
            avg_aoi,
            epsilon_used,
            method: Method::Analytic,
            ci_halfwidth: T::zero(),
            quality_flags,
        }
    }

    fn divergent(epsilon_used: T) -> Self {
        Self::analytic(
            T::infinity(),
            epsilon_used,
            vec![QualityFlag::EpsilonClamped, QualityFlag::Divergent],
        )
    }

    pub fn is_divergent(&self) -> bool {
        self.quality_flags.contains(&QualityFlag::Divergent)
    }
}

/// Transmission scheme tag.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum SchemeKind {
    Sc,
    Pd,
    Mp,
    Cs,
    Ms,
}

impl SchemeKind {
    pub const ALL: [SchemeKind; 5] = [
        SchemeKind::Sc,
        SchemeKind::Pd,
        SchemeKind::Mp,
        SchemeKind::Cs,
        SchemeKind::Ms,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            SchemeKind::Sc => "sc",
            SchemeKind::Pd => "pd",
            SchemeKind::Mp => "mp",
            SchemeKind::Cs => "cs",
            SchemeKind::Ms => "ms",
        }
    }
}

impl fmt::Display for SchemeKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for SchemeKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "sc" => Ok(SchemeKind::Sc),
            "pd" => Ok(SchemeKind::Pd),
            "mp" => Ok(SchemeKind::Mp),
            "cs" => Ok(SchemeKind::Cs),
            "ms" => Ok(SchemeKind::Ms),
            other => Err(Error::invalid("scheme", format!("unknown scheme {other:?}"))),
        }
    }
}

/// Periodic multiplexing schedule: every channel transmits once per period
/// `n`, channel `i` offset by `shifts[i]` from channel 0.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Schedule<T> {
    n: T,
    shifts: Vec<T>,
}

impl<T: Real> Schedule<T> {
    /// Requires `0 = shifts[0] <= shifts[1] <= ... < n`.
    pub fn new(n: T, shifts: Vec<T>) -> Result<Self> {
        if !(n.is_finite() && n > T::zero()) {
            return Err(Error::invalid("period", format!("must be positive, got {n}")));
        }
        match shifts.first() {
            None => return Err(Error::invalid("shifts", "at least one channel is required")),
            Some(&s) if s != T::zero() => {
                return Err(Error::invalid("shifts", "the first shift must be zero"))
            }
            _ => {}
        }
        if shifts.windows(2).any(|w| !(w[1] >= w[0])) {
            return Err(Error::invalid("shifts", "shifts must be nondecreasing"));
        }
        if let Some(&last) = shifts.last() {
            if !(last < n) {
                return Err(Error::invalid("shifts", format!("shift {last} is not below the period {n}")));
            }
        }
        Ok(Self { n, shifts })
    }

    /// Evenly spread shifts `i * n / N`.
    pub fn uniform(n: T, channels: usize) -> Result<Self> {
        let step = n / T::of_usize(channels.max(1));
        Self::new(n, (0..channels).map(|i| T::of_usize(i) * step).collect())
    }

    /// All channels transmit at the same instant.
    pub fn aligned(n: T, channels: usize) -> Result<Self> {
        Self::new(n, vec![T::zero(); channels])
    }

    /// Rebuilds shifts from waiting times `T_0 .. T_{N-1}`, whose sum is the period.
    pub fn from_waiting_times(waits: &[T]) -> Result<Self> {
        if waits.iter().any(|&t| !(t >= T::zero())) {
            return Err(Error::invalid("waiting times", "must be nonnegative"));
        }
        let n: T = waits.iter().copied().sum();
        let mut shifts = Vec::with_capacity(waits.len());
        let mut acc = T::zero();
        for &t in waits {
            shifts.push(acc);
            acc += t;
        }
        Self::new(n, shifts)
    }

    pub fn n(&self) -> T {
        self.n
    }

    pub fn shifts(&self) -> &[T] {
        &self.shifts
    }

    pub fn len(&self) -> usize {
        self.shifts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.shifts.is_empty()
    }

    /// `T_i = shifts[i+1] - shifts[i]`, with the last one wrapping to the next period.
    pub fn waiting_times(&self) -> Vec<T> {
        let count = self.shifts.len();
        (0..count)
            .map(|i| {
                if i + 1 < count {
                    self.shifts[i + 1] - self.shifts[i]
                } else {
                    self.n - self.shifts[i]
                }
            })
            .collect()
    }
}

/// Moments of the multiplexing inter-reception times.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MpMoments<T> {
    /// `E[Y_i]`, symbols.
    pub first: Vec<T>,
    /// `E[Y_i^2]`, symbols squared.
    pub second: Vec<T>,
    /// Long-run fraction of successful receptions that happen on channel `i`.
    pub reception_share: Vec<T>,
    /// Fraction of time spent in epochs that start on channel `i`.
    pub stationary_weights: Vec<T>,
}

/// Scheme together with all its free parameters.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "scheme", rename_all = "lowercase")]
pub enum SchemeConfig<T> {
    /// One channel, chosen by index.
    Sc { n: T, k: T, channel: usize },
    Pd { n: T, k: T },
    /// `n` is the per-channel fragment length; the codeword spans `N * n` symbols.
    Cs { n: T, k: T },
    Ms { n: T, splits: Vec<T> },
    Mp { k: T, schedule: Schedule<T> },
}

impl<T: Real> SchemeConfig<T> {
    pub fn kind(&self) -> SchemeKind {
        match self {
            SchemeConfig::Sc { .. } => SchemeKind::Sc,
            SchemeConfig::Pd { .. } => SchemeKind::Pd,
            SchemeConfig::Cs { .. } => SchemeKind::Cs,
            SchemeConfig::Ms { .. } => SchemeKind::Ms,
            SchemeConfig::Mp { .. } => SchemeKind::Mp,
        }
    }

    /// Transmission period in symbols.
    pub fn period(&self) -> T {
        match self {
            SchemeConfig::Sc { n, .. }
            | SchemeConfig::Pd { n, .. }
            | SchemeConfig::Cs { n, .. }
            | SchemeConfig::Ms { n, .. } => *n,
            SchemeConfig::Mp { schedule, .. } => schedule.n(),
        }
    }

    pub fn check_channels(&self, channels: &ChannelSet<T>) -> Result<()> {
        match self {
            SchemeConfig::Sc { channel, .. } if *channel >= channels.len() => Err(Error::invalid(
                "channel",
                format!("index {channel} out of range for {} channels", channels.len()),
            )),
            SchemeConfig::Ms { splits, .. } if splits.len() != channels.len() => Err(Error::LengthMismatch {
                name: "splits",
                expected: channels.len(),
                got: splits.len(),
            }),
            SchemeConfig::Mp { schedule, .. } if schedule.len() != channels.len() => Err(Error::LengthMismatch {
                name: "shifts",
                expected: channels.len(),
                got: schedule.len(),
            }),
            _ => Ok(()),
        }
    }

    /// Per-channel error probabilities used by the multiplexing scheme, or the
    /// single combined probability for the renewal schemes.
    pub fn epsilons(&self, channels: &ChannelSet<T>) -> Result<Vec<ErrorProbability<T>>> {
        self.check_channels(channels)?;
        Ok(match self {
            SchemeConfig::Sc { n, k, channel } => vec![epsilon_single(*n, *k, channels.snr(*channel))?],
            SchemeConfig::Pd { n, k } => vec![epsilon_pd(*n, *k, channels)?],
            SchemeConfig::Cs { n, k } => vec![epsilon_cs(*n, *k, channels)?],
            SchemeConfig::Ms { n, splits } => vec![epsilon_ms(*n, splits, channels)?],
            SchemeConfig::Mp { k, schedule } => channels
                .snrs()
                .iter()
                .map(|&g| epsilon_single(schedule.n(), *k, g))
                .collect::<Result<_>>()?,
        })
    }
}

fn is_saturated<T: Real>(eps: T) -> bool {
    eps >= T::one() || eps > T::of(EPSILON_CEILING)
}

/// Renewal-scheme AoI `n (1 + eps) / (2 (1 - eps)) + n`.
pub fn aoi_renewal<T: Real>(n: T, eps: ErrorProbability<T>) -> Result<AoiResult<T>> {
    if !(n.is_finite() && n > T::zero()) {
        return Err(Error::invalid("period", format!("must be positive, got {n}")));
    }
    let e = eps.value();
    if is_saturated(e) {
        return Ok(AoiResult::divergent(e));
    }
    let two = T::of(2.0);
    let avg = n * (T::one() + e) / (two * (T::one() - e)) + n;
    Ok(AoiResult::analytic(avg, e, Vec::new()))
}

/// Average AoI of any scheme configuration over the given channels.
pub fn aoi_scheme<T: Real>(config: &SchemeConfig<T>, channels: &ChannelSet<T>) -> Result<AoiResult<T>> {
    let eps = config.epsilons(channels)?;
    match config {
        SchemeConfig::Mp { schedule, .. } => aoi_mp_general(schedule, &eps).map(|(r, _)| r),
        _ => aoi_renewal(config.period(), eps[0]),
    }
}

/// Multiplexing over `channels` equal channels with the evenly spread schedule,
/// which minimises the AoI over all shifts: `n (1 + eps) / (2 N (1 - eps)) + n`.
pub fn aoi_mp_equal_snr<T: Real>(n: T, channels: usize, eps: ErrorProbability<T>) -> Result<AoiResult<T>> {
    if channels == 0 {
        return Err(Error::invalid("channels", "at least one channel is required"));
    }
    if !(n.is_finite() && n > T::zero()) {
        return Err(Error::invalid("period", format!("must be positive, got {n}")));
    }
    let e = eps.value();
    if is_saturated(e) {
        return Ok(AoiResult::divergent(e));
    }
    let avg = n * (T::one() + e) / (T::of(2.0) * T::of_usize(channels) * (T::one() - e)) + n;
    Ok(AoiResult::analytic(avg, e, Vec::new()))
}

/// `1 - eps^N` as `(1 - eps)(1 + eps + ... + eps^{N-1})`.
fn one_minus_power<T: Real>(eps: T, count: usize) -> T {
    let mut geometric = T::zero();
    let mut p = T::one();
    for _ in 0..count {
        geometric += p;
        p *= eps;
    }
    (T::one() - eps) * geometric
}

/// Moments for a common error probability, by unrolling the recursion once
/// around the cycle.
pub(crate) fn moments_unrolled<T: Real>(waits: &[T], eps: T) -> (Vec<T>, Vec<T>) {
    let count = waits.len();
    let denom = one_minus_power(eps, count);
    let first: Vec<T> = (0..count)
        .map(|i| {
            let mut acc = T::zero();
            let mut p = T::one();
            for j in 0..count {
                acc += p * waits[(i + j) % count];
                p *= eps;
            }
            acc / denom
        })
        .collect();
    let two = T::of(2.0);
    let second = (0..count)
        .map(|i| {
            let mut acc = T::zero();
            let mut p = T::one();
            for j in 0..count {
                let t = waits[(i + j) % count];
                acc += p * t * t + two * p * eps * t * first[(i + j + 1) % count];
                p *= eps;
            }
            acc / denom
        })
        .collect();
    (first, second)
}

/// Moments for per-channel error probabilities, from the linear systems
/// `E[Y_i] - eps_{i+1} E[Y_{i+1}] = T_i` and
/// `E[Y_i^2] - eps_{i+1} E[Y_{i+1}^2] = T_i^2 + 2 eps_{i+1} T_i E[Y_{i+1}]`.
pub(crate) fn moments_linear<T: Real>(waits: &[T], eps: &[T]) -> Result<(Vec<T>, Vec<T>)> {
    let count = waits.len();
    let mut system = DenseMatrix::identity(count);
    for i in 0..count {
        let next = (i + 1) % count;
        system[(i, next)] -= eps[next];
    }
    let first = system.solve(waits)?;
    let two = T::of(2.0);
    let rhs: Vec<T> = (0..count)
        .map(|i| {
            let next = (i + 1) % count;
            waits[i] * waits[i] + two * eps[next] * waits[i] * first[next]
        })
        .collect();
    let second = system.solve(&rhs)?;
    Ok((first, second))
}

/// Stationary distribution of the channel carrying the latest successful
/// reception. From channel `i` the next success lands on `i + m` after
/// `m - 1` intermediate failures; full cycles of failures wrap around.
pub(crate) fn reception_share<T: Real>(eps: &[T]) -> Result<Vec<T>> {
    let count = eps.len();
    if count == 1 {
        return Ok(vec![T::one()]);
    }
    let cycle_failure: T = eps.iter().fold(T::one(), |acc, &e| acc * e);
    let norm = T::one() - cycle_failure;
    let mut transition = DenseMatrix::<T>::zeros(count);
    for i in 0..count {
        let mut run = T::one();
        for m in 1..=count {
            let j = (i + m) % count;
            transition[(i, j)] += run * (T::one() - eps[j]) / norm;
            run *= eps[j];
        }
    }
    // pi (P - I) = 0 with the last equation replaced by sum(pi) = 1.
    let mut system = DenseMatrix::from_fn(count, |r, c| {
        transition[(c, r)] - if r == c { T::one() } else { T::zero() }
    });
    for c in 0..count {
        system[(count - 1, c)] = T::one();
    }
    let mut rhs = vec![T::zero(); count];
    rhs[count - 1] = T::one();
    let share = system.solve(&rhs)?;
    Ok(share.into_iter().map(|p| p.max(T::zero())).collect())
}

/// Average AoI of the multiplexing scheme for an arbitrary schedule and
/// per-channel error probabilities.
///
/// A common error probability uses the unrolled closed form; distinct ones
/// go through dense linear solves. A schedule whose every transmission is
/// certain to fail is reported as divergent.
pub fn aoi_mp_general<T: Real>(
    schedule: &Schedule<T>,
    eps: &[ErrorProbability<T>],
) -> Result<(AoiResult<T>, MpMoments<T>)> {
    let count = schedule.len();
    if eps.len() != count {
        return Err(Error::LengthMismatch {
            name: "error probabilities",
            expected: count,
            got: eps.len(),
        });
    }
    let values: Vec<T> = eps.iter().map(|e| e.value()).collect();
    let mean_eps = values.iter().copied().sum::<T>() / T::of_usize(count);
    let mut flags = Vec::new();
    let clamped: Vec<T> = values
        .iter()
        .map(|&e| {
            if is_saturated(e) {
                if !flags.contains(&QualityFlag::EpsilonClamped) {
                    flags.push(QualityFlag::EpsilonClamped);
                }
                T::one()
            } else {
                e
            }
        })
        .collect();
    if clamped.iter().all(|&e| e == T::one()) {
        let empty = MpMoments {
            first: vec![T::infinity(); count],
            second: vec![T::infinity(); count],
            reception_share: vec![T::nan(); count],
            stationary_weights: vec![T::nan(); count],
        };
        return Ok((AoiResult::divergent(mean_eps), empty));
    }

    let waits = schedule.waiting_times();
    let homogeneous = clamped.iter().all(|&e| e == clamped[0]);
    let (first, second, share) = if homogeneous {
        let (f, s) = moments_unrolled(&waits, clamped[0]);
        (f, s, vec![T::one() / T::of_usize(count); count])
    } else {
        let (f, s) = moments_linear(&waits, &clamped)?;
        (f, s, reception_share(&clamped)?)
    };

    let mean_epoch: T = share.iter().zip(&first).map(|(&p, &y)| p * y).sum();
    let mean_square: T = share.iter().zip(&second).map(|(&p, &y)| p * y).sum();
    let avg = mean_square / (T::of(2.0) * mean_epoch) + schedule.n();
    let weights = share.iter().zip(&first).map(|(&p, &y)| p * y / mean_epoch).collect();

    let moments = MpMoments {
        first,
        second,
        reception_share: share,
        stationary_weights: weights,
    };
    Ok((AoiResult::analytic(avg, mean_eps, flags), moments))
}

fn check_open_unit<T: Real>(eps: ErrorProbability<T>) -> Result<T> {
    let e = eps.value();
    if e > T::zero() && e < T::one() {
        Ok(e)
    } else {
        Err(Error::invalid("error probability", format!("must lie in (0, 1), got {e}")))
    }
}

/// Circulant matrix `M` with first row `(eps^j + eps^{N-j}) / (1 - eps)` such
/// that the equal-error multiplexing AoI is
/// `(1 - eps) / (2 n (1 - eps^N)) * T^T M T + n` in the waiting times `T`.
pub fn mp_quadratic_form<T: Real>(channels: usize, eps: ErrorProbability<T>) -> Result<DenseMatrix<T>> {
    if channels == 0 {
        return Err(Error::invalid("channels", "at least one channel is required"));
    }
    let e = check_open_unit(eps)?;
    let scale = (T::one() - e).recip();
    let first_row: Vec<T> = (0..channels)
        .map(|j| (e.powi(j as i32) + e.powi((channels - j) as i32)) * scale)
        .collect();
    Ok(DenseMatrix::circulant(&first_row))
}

/// Equal-error multiplexing AoI evaluated through the quadratic form.
pub fn mp_aoi_quadratic<T: Real>(schedule: &Schedule<T>, eps: ErrorProbability<T>) -> Result<T> {
    let m = mp_quadratic_form(schedule.len(), eps)?;
    let e = eps.value();
    let n = schedule.n();
    let waits = schedule.waiting_times();
    let coeff = (T::one() - e) / (T::of(2.0) * n * one_minus_power(e, schedule.len()));
    Ok(coeff * m.quadratic_form(&waits) + n)
}

/// Eigenvalues of the quadratic-form matrix,
/// `lambda_k = (1 - eps^N)/(1 - eps) * (1 - eps^2)/(1 - 2 eps cos(2 pi k / N) + eps^2)`.
pub fn mp_eigenvalues<T: Real>(channels: usize, eps: ErrorProbability<T>) -> Result<Vec<T>> {
    if channels == 0 {
        return Err(Error::invalid("channels", "at least one channel is required"));
    }
    let e = check_open_unit(eps)?;
    let lead = one_minus_power(e, channels) / (T::one() - e);
    let numer = T::one() - e * e;
    let two = T::of(2.0);
    Ok((0..channels)
        .map(|k| {
            let angle = two * T::PI() * T::of_usize(k) / T::of_usize(channels);
            lead * numer / (T::one() - two * e * angle.cos() + e * e)
        })
        .collect())
}

/// AoI advantage of codeword splitting over multiplexing at equal total
/// codeword length `n'`: `(N - 1) n' / N`.
pub fn mp_cs_gap<T: Real>(n_prime: T, channels: usize) -> T {
    let count = T::of_usize(channels.max(1));
    (count - T::one()) * n_prime / count
}
