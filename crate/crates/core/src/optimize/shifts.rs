//! Multiplexing schedules.
//!
//! With a common error probability the AoI is a strictly convex, cyclically
//! symmetric quadratic in the waiting times, so evenly spread shifts are
//! optimal. Distinct error probabilities have no such guarantee and are
//! searched numerically over integer shifts.

use serde::Serialize;

use crate::aoi::{aoi_mp_general, Schedule};
use crate::channel::ErrorProbability;
use crate::error::{Error, Result};
use crate::scalar::Real;

/// Largest number of candidate schedules `ShiftSearch::Auto` will enumerate.
pub const EXHAUSTIVE_BUDGET: u64 = 20_000;
/// Exhaustive enumeration is only offered up to this many channels.
pub const EXHAUSTIVE_MAX_CHANNELS: usize = 4;
const MAX_DESCENT_SWEEPS: usize = 100;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum ShiftMode {
    /// Real-valued shifts `i * n / N`.
    Continuous,
    /// Shifts rounded to whole symbols.
    Integer,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ShiftSearch {
    /// Exhaustive when the grid is small enough, coordinate descent otherwise.
    Auto,
    Exhaustive,
    CoordinateDescent,
}

/// How a returned schedule was obtained.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum ScheduleOrigin {
    /// Evenly spread shifts, optimal for equal error probabilities.
    Uniform,
    /// True optimum over the integer shift grid.
    Exhaustive,
    /// Local optimum from coordinate descent.
    Heuristic,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ShiftOptimum<T> {
    pub schedule: Schedule<T>,
    pub origin: ScheduleOrigin,
    pub avg_aoi: T,
}

/// Evenly spread schedule. In integer mode `n` must be a whole number and
/// the shifts are `round(i * n / N)`, capped at `n - 1`.
pub fn optimal_shifts<T: Real>(n: T, channels: usize, mode: ShiftMode) -> Result<Schedule<T>> {
    if channels == 0 {
        return Err(Error::invalid("channels", "at least one channel is required"));
    }
    match mode {
        ShiftMode::Continuous => Schedule::uniform(n, channels),
        ShiftMode::Integer => {
            if n.fract() != T::zero() {
                return Err(Error::invalid("period", format!("integer schedules need a whole period, got {n}")));
            }
            let count = T::of_usize(channels);
            let last = (n - T::one()).max(T::zero());
            let shifts = (0..channels)
                .map(|i| (T::of_usize(i) * n / count).round().min(last))
                .collect();
            Schedule::new(n, shifts)
        }
    }
}

/// Number of nondecreasing integer shift vectors `0 = d_0 <= ... <= d_{N-1} < n`,
/// i.e. `C(n + N - 2, N - 1)`, saturating at `u64::MAX`.
pub fn schedule_count(n: u64, channels: usize) -> u64 {
    if channels <= 1 {
        return 1;
    }
    let r = (channels - 1) as u64;
    let mut acc: u128 = 1;
    for i in 0..r {
        acc = acc * (n - 1 + r - i) as u128 / (i + 1) as u128;
        if acc > u64::MAX as u128 {
            return u64::MAX;
        }
    }
    acc as u64
}

fn evaluate<T: Real>(n: u64, shifts: &[u64], eps: &[ErrorProbability<T>]) -> Result<T> {
    let schedule = Schedule::new(T::of_u64(n), shifts.iter().map(|&s| T::of_u64(s)).collect())?;
    Ok(aoi_mp_general(&schedule, eps)?.0.avg_aoi)
}

fn to_optimum<T: Real>(n: u64, shifts: &[u64], origin: ScheduleOrigin, avg_aoi: T) -> Result<ShiftOptimum<T>> {
    Ok(ShiftOptimum {
        schedule: Schedule::new(T::of_u64(n), shifts.iter().map(|&s| T::of_u64(s)).collect())?,
        origin,
        avg_aoi,
    })
}

fn exhaustive<T: Real>(n: u64, eps: &[ErrorProbability<T>]) -> Result<(Vec<u64>, T)> {
    let count = eps.len();
    let mut shifts = vec![0u64; count];
    let mut best: Option<(Vec<u64>, T)> = None;
    // Odometer over nondecreasing sequences, lexicographic order.
    loop {
        let value = evaluate(n, &shifts, eps)?;
        if best.as_ref().is_none_or(|(_, b)| value < *b) {
            best = Some((shifts.clone(), value));
        }
        let mut pos = count;
        loop {
            if pos <= 1 {
                return Ok(best.expect("at least one schedule evaluated"));
            }
            pos -= 1;
            if shifts[pos] + 1 < n {
                shifts[pos] += 1;
                let v = shifts[pos];
                for s in shifts.iter_mut().skip(pos + 1) {
                    *s = v;
                }
                break;
            }
        }
    }
}

fn coordinate_descent<T: Real>(n: u64, eps: &[ErrorProbability<T>]) -> Result<(Vec<u64>, T)> {
    let count = eps.len();
    let mut shifts: Vec<u64> = (0..count as u64).map(|i| (i * n + count as u64 / 2) / count as u64).collect();
    for i in 1..count {
        shifts[i] = shifts[i].max(shifts[i - 1]).min(n - 1);
    }
    let mut best = evaluate(n, &shifts, eps)?;
    for _ in 0..MAX_DESCENT_SWEEPS {
        let mut improved = false;
        for i in 1..count {
            let lo = shifts[i - 1];
            let hi = if i + 1 < count { shifts[i + 1] } else { n - 1 };
            let original = shifts[i];
            let mut best_here = original;
            for candidate in lo..=hi {
                if candidate == original {
                    continue;
                }
                shifts[i] = candidate;
                let value = evaluate(n, &shifts, eps)?;
                if value < best {
                    best = value;
                    best_here = candidate;
                    improved = true;
                }
            }
            shifts[i] = best_here;
        }
        if !improved {
            break;
        }
    }
    Ok((shifts, best))
}

/// Best integer schedule for per-channel error probabilities `eps` at period `n`.
///
/// Equal error probabilities short-circuit to the evenly spread schedule.
pub fn optimize_shifts_heterogeneous<T: Real>(
    n: u64,
    eps: &[ErrorProbability<T>],
    search: ShiftSearch,
) -> Result<ShiftOptimum<T>> {
    if n == 0 {
        return Err(Error::invalid("period", "must be at least one symbol"));
    }
    let count = eps.len();
    if count == 0 {
        return Err(Error::invalid("channels", "at least one channel is required"));
    }
    if count == 1 {
        let value = evaluate(n, &[0], eps)?;
        return to_optimum(n, &[0], ScheduleOrigin::Exhaustive, value);
    }
    if eps.iter().all(|e| *e == eps[0]) {
        let schedule = optimal_shifts(T::of_u64(n), count, ShiftMode::Integer)?;
        let value = aoi_mp_general(&schedule, eps)?.0.avg_aoi;
        return Ok(ShiftOptimum {
            schedule,
            origin: ScheduleOrigin::Uniform,
            avg_aoi: value,
        });
    }
    let use_exhaustive = match search {
        ShiftSearch::Exhaustive => {
            if count > EXHAUSTIVE_MAX_CHANNELS {
                return Err(Error::invalid(
                    "shift search",
                    format!("exhaustive search supports at most {EXHAUSTIVE_MAX_CHANNELS} channels, got {count}"),
                ));
            }
            true
        }
        ShiftSearch::CoordinateDescent => false,
        ShiftSearch::Auto => count <= EXHAUSTIVE_MAX_CHANNELS && schedule_count(n, count) <= EXHAUSTIVE_BUDGET,
    };
    if use_exhaustive {
        let (shifts, value) = exhaustive(n, eps)?;
        to_optimum(n, &shifts, ScheduleOrigin::Exhaustive, value)
    } else {
        let (shifts, value) = coordinate_descent(n, eps)?;
        to_optimum(n, &shifts, ScheduleOrigin::Heuristic, value)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn eps(values: &[f64]) -> Vec<ErrorProbability<f64>> {
        values.iter().map(|&v| ErrorProbability::new(v).unwrap()).collect()
    }

    #[test]
    fn uniform_examples() {
        let s = optimal_shifts(100.0, 2, ShiftMode::Integer).unwrap();
        assert_eq!(s.shifts(), &[0.0, 50.0]);
        let s = optimal_shifts(100.0_f64, 3, ShiftMode::Continuous).unwrap();
        assert!((s.shifts()[2] - 200.0_f64 / 3.0).abs() < 1e-12);
        let s = optimal_shifts(7.0, 1, ShiftMode::Integer).unwrap();
        assert_eq!(s.shifts(), &[0.0]);
        assert!(optimal_shifts(7.5, 2, ShiftMode::Integer).is_err());
    }

    #[test]
    fn short_periods_stay_inside_the_frame() {
        let s = optimal_shifts(1.0_f64, 2, ShiftMode::Integer).unwrap();
        assert_eq!(s.shifts(), &[0.0, 0.0]);
        let s = optimal_shifts(2.0_f64, 5, ShiftMode::Integer).unwrap();
        assert_eq!(s.shifts(), &[0.0, 0.0, 1.0, 1.0, 1.0]);
    }

    #[test]
    fn odd_period_roundings_are_equivalent() {
        let e = eps(&[0.4, 0.4]);
        let s = optimal_shifts(99.0, 2, ShiftMode::Integer).unwrap();
        let chosen = aoi_mp_general(&s, &e).unwrap().0.avg_aoi;
        let a = aoi_mp_general(&Schedule::new(99.0, vec![0.0, 49.0]).unwrap(), &e).unwrap().0.avg_aoi;
        let b = aoi_mp_general(&Schedule::new(99.0, vec![0.0, 50.0]).unwrap(), &e).unwrap().0.avg_aoi;
        assert!((a - b).abs() < 1e-12);
        assert!(chosen <= a.min(b) + 1e-12);
    }

    #[test]
    fn schedule_counting() {
        assert_eq!(schedule_count(60, 1), 1);
        assert_eq!(schedule_count(60, 2), 60);
        assert_eq!(schedule_count(10, 3), 55);
        assert_eq!(schedule_count(5, 4), 35);
    }

    #[test]
    fn exhaustive_enumerates_every_schedule() {
        let mut seen = 0;
        let n = 6;
        let e = eps(&[0.1, 0.5, 0.3]);
        // Count via a brute-force triple loop and compare against the odometer result.
        let mut best = f64::INFINITY;
        for d1 in 0..n {
            for d2 in d1..n {
                seen += 1;
                best = best.min(evaluate(n, &[0, d1, d2], &e).unwrap());
            }
        }
        assert_eq!(seen, schedule_count(n, 3));
        let (_, value) = exhaustive(n, &e).unwrap();
        assert_eq!(value, best);
    }

    #[test]
    fn two_channel_heterogeneous_matches_scan() {
        let e = eps(&[0.1, 0.9]);
        let got = optimize_shifts_heterogeneous(60, &e, ShiftSearch::Exhaustive).unwrap();
        let mut best = (0, f64::INFINITY);
        for d in 0..60 {
            let v = evaluate(60, &[0, d], &e).unwrap();
            if v < best.1 {
                best = (d, v);
            }
        }
        assert_eq!(got.origin, ScheduleOrigin::Exhaustive);
        assert_eq!(got.schedule.shifts()[1], best.0 as f64);
        assert_eq!(got.avg_aoi, best.1);
    }

    #[test]
    fn equal_errors_give_uniform() {
        let got = optimize_shifts_heterogeneous(90, &eps(&[0.2; 3]), ShiftSearch::Auto).unwrap();
        assert_eq!(got.origin, ScheduleOrigin::Uniform);
        assert_eq!(got.schedule.shifts(), &[0.0, 30.0, 60.0]);
    }

    #[test]
    fn single_channel_is_trivial() {
        let got = optimize_shifts_heterogeneous(40, &eps(&[0.3]), ShiftSearch::Auto).unwrap();
        assert_eq!(got.schedule.shifts(), &[0.0]);
    }

    #[test]
    fn descent_never_worse_than_uniform_start() {
        let e = eps(&[0.05, 0.5, 0.2, 0.7, 0.35]);
        let got = optimize_shifts_heterogeneous(50, &e, ShiftSearch::Auto).unwrap();
        assert_eq!(got.origin, ScheduleOrigin::Heuristic);
        let start = optimal_shifts(50.0, 5, ShiftMode::Integer).unwrap();
        let base = aoi_mp_general(&start, &e).unwrap().0.avg_aoi;
        assert!(got.avg_aoi <= base);
        assert!(optimize_shifts_heterogeneous(50, &e, ShiftSearch::Exhaustive).is_err());
    }

    #[test]
    fn descent_agrees_with_exhaustive_on_small_grid() {
        let e = eps(&[0.1, 0.6, 0.3]);
        let ex = optimize_shifts_heterogeneous(30, &e, ShiftSearch::Exhaustive).unwrap();
        let cd = optimize_shifts_heterogeneous(30, &e, ShiftSearch::CoordinateDescent).unwrap();
        assert!(cd.avg_aoi >= ex.avg_aoi);
        assert!(cd.avg_aoi <= ex.avg_aoi * (1.0 + 1e-3));
    }
}
