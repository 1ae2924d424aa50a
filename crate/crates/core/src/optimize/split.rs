//! Message-split allocation for the MS scheme.
//!
//! At a fixed blocklength the MS success probability is
//! `prod_i Phi(A_i (B_i - k_i / n))`, so maximising its logarithm is a
//! separable concave problem under `sum k_i = k`. The KKT point equalises the
//! marginal derivatives
//!
//! ```text
//! d_i(k_i) = -(A_i / n) * phi(x_i) / Phi(x_i),   x_i = A_i (B_i - k_i / n),
//! ```
//!
//! over the active channels. `d_i` underflows long before the allocation
//! stops mattering, so the solver works with `L_i = ln(-d_i)`, which is
//! increasing in `k_i`, and bisects on its common level.

use serde::Serialize;

use crate::channel::{capacity, dispersion, ChannelSet};
use crate::error::{Error, Result};
use crate::gaussian::{log_phi_f64, pdf_over_cdf_f64};
use crate::scalar::Real;

const LN_SQRT_2PI: f64 = 0.918_938_533_204_672_8;
const MAX_BISECTIONS: usize = 200;
const MAX_REFINE_ROUNDS: usize = 100_000;

/// Bits per channel.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SplitAllocation<T> {
    pub splits: Vec<T>,
    /// `true` for a real-valued (pre-rounding) allocation.
    pub continuous: bool,
}

impl<T: Real> SplitAllocation<T> {
    pub fn total(&self) -> T {
        self.splits.iter().copied().sum()
    }
}

/// Continuous optimum together with its optimality certificate.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct KktSplit<T> {
    pub allocation: SplitAllocation<T>,
    /// Common marginal derivative `nu` of the active channels.
    pub multiplier: T,
    /// `|sum k_i - k|`.
    pub feasibility_residual: T,
    /// Largest violation of `d_i = nu` (active) or `d_i(0) <= nu` (idle).
    pub stationarity_residual: T,
    /// `sum_i log Phi(A_i (B_i - k_i / n))`.
    pub objective: T,
}

#[derive(Debug, Clone, Copy)]
struct Fragment {
    a: f64,
    b: f64,
}

impl Fragment {
    fn new(n: f64, snr: f64) -> Self {
        let v = dispersion(snr);
        Self {
            a: 1.0 / (std::f64::consts::LOG2_E * (v / (2.0 * n)).sqrt()),
            b: capacity(snr),
        }
    }

    fn x(self, n: f64, bits: f64) -> f64 {
        self.a * (self.b - bits / n)
    }

    fn log_success(self, n: f64, bits: f64) -> f64 {
        log_phi_f64(self.x(n, bits))
    }

    fn derivative(self, n: f64, bits: f64) -> f64 {
        -(self.a / n) * pdf_over_cdf_f64(self.x(n, bits))
    }

    /// `ln(-d_i)` at `bits`.
    fn log_slope(self, n: f64, bits: f64) -> f64 {
        (self.a / n).ln() + log_hazard(self.x(n, bits))
    }

    /// Bits at which `ln(-d_i)` equals `level`, clamped to `[0, total]`;
    /// `ends` holds the slopes at `0` and `total`.
    fn bits_at(self, n: f64, total: f64, ends: (f64, f64), level: f64) -> f64 {
        if level <= ends.0 {
            return 0.0;
        }
        if level >= ends.1 {
            return total;
        }
        let x = solve_log_hazard(level - (self.a / n).ln());
        (n * (self.b - x / self.a)).clamp(0.0, total)
    }
}

/// `ln(phi(x) / Phi(x))`, strictly decreasing.
fn log_hazard(x: f64) -> f64 {
    -0.5 * x * x - LN_SQRT_2PI - log_phi_f64(x)
}

/// Solves `log_hazard(x) = target` by Newton's method safeguarded with bisection.
fn solve_log_hazard(target: f64) -> f64 {
    // phi/Phi > -x for x < 0, so the root lies above -e^target - 1.
    let mut lo = -target.exp() - 1.0;
    let mut step = 1.0;
    let mut hi = lo + step;
    while log_hazard(hi) > target {
        lo = hi;
        step *= 2.0;
        hi += step;
    }
    let mut x = 0.5 * (lo + hi);
    for _ in 0..200 {
        let g = log_hazard(x) - target;
        if g == 0.0 {
            return x;
        }
        if g > 0.0 {
            lo = x;
        } else {
            hi = x;
        }
        // d/dx log_hazard = -(x + phi/Phi)
        let slope = -(x + pdf_over_cdf_f64(x));
        let newton = x - g / slope;
        let next = if newton > lo && newton < hi && slope < 0.0 {
            newton
        } else {
            0.5 * (lo + hi)
        };
        if (next - x).abs() <= 1e-15 * x.abs().max(1.0) || hi - lo <= 1e-15 * x.abs().max(1.0) {
            return next;
        }
        x = next;
    }
    x
}

fn fragments<T: Real>(n: f64, channels: &ChannelSet<T>) -> Vec<Fragment> {
    channels.snrs().iter().map(|s| Fragment::new(n, s.as_f64())).collect()
}

fn check_inputs<T: Real>(n: T, k: T) -> Result<(f64, f64)> {
    let (nf, kf) = (n.as_f64(), k.as_f64());
    if !(nf.is_finite() && nf > 0.0) {
        return Err(Error::invalid("blocklength", format!("must be positive, got {n}")));
    }
    if !(kf.is_finite() && kf >= 0.0) {
        return Err(Error::invalid("message bits", format!("must be nonnegative, got {k}")));
    }
    Ok((nf, kf))
}

/// The concave objective `sum_i log Phi(A_i (B_i - k_i / n))`.
///
/// Every channel contributes, including those carrying no bits.
pub fn split_objective<T: Real>(n: T, splits: &[T], channels: &ChannelSet<T>) -> Result<T> {
    if splits.len() != channels.len() {
        return Err(Error::LengthMismatch {
            name: "splits",
            expected: channels.len(),
            got: splits.len(),
        });
    }
    let (nf, _) = check_inputs(n, T::zero())?;
    let total = fragments(nf, channels)
        .iter()
        .zip(splits)
        .map(|(f, k)| f.log_success(nf, k.as_f64()))
        .sum::<f64>();
    Ok(T::of(total))
}

/// `ln(1 - eps_MS)` for an integer split; idle channels contribute nothing.
pub fn split_log_success<T: Real>(n: T, splits: &[u64], channels: &ChannelSet<T>) -> Result<T> {
    if splits.len() != channels.len() {
        return Err(Error::LengthMismatch {
            name: "splits",
            expected: channels.len(),
            got: splits.len(),
        });
    }
    let (nf, _) = check_inputs(n, T::zero())?;
    Ok(T::of(log_success_u64(nf, splits, &fragments(nf, channels))))
}

fn log_success_u64(n: f64, splits: &[u64], frags: &[Fragment]) -> f64 {
    splits
        .iter()
        .zip(frags)
        .filter(|(&k, _)| k > 0)
        .map(|(&k, f)| f.log_success(n, k as f64))
        .sum()
}

/// Continuous KKT allocation of `k` bits over `channels` at blocklength `n`.
pub fn optimize_split<T: Real>(n: T, k: T, channels: &ChannelSet<T>) -> Result<KktSplit<T>> {
    let (nf, kf) = check_inputs(n, k)?;
    let frags = fragments(nf, channels);
    let count = frags.len();

    let (splits, level) = if kf == 0.0 {
        (vec![0.0; count], frags.iter().map(|f| f.log_slope(nf, 0.0)).fold(f64::INFINITY, f64::min))
    } else if count == 1 {
        (vec![kf], frags[0].log_slope(nf, kf))
    } else {
        let ends: Vec<(f64, f64)> = frags.iter().map(|f| (f.log_slope(nf, 0.0), f.log_slope(nf, kf))).collect();
        let mut lo = ends.iter().map(|e| e.0).fold(f64::INFINITY, f64::min);
        let mut hi = ends.iter().map(|e| e.1).fold(f64::NEG_INFINITY, f64::max);
        let allocate = |level: f64| {
            frags
                .iter()
                .zip(&ends)
                .map(|(f, &e)| f.bits_at(nf, kf, e, level))
                .collect::<Vec<_>>()
        };
        for _ in 0..MAX_BISECTIONS {
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi {
                break;
            }
            let sum: f64 = allocate(mid).iter().sum();
            if sum < kf {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        let level = 0.5 * (lo + hi);
        let mut splits = allocate(level);
        // Put the last rounding error on the largest fragment.
        let gap = kf - splits.iter().sum::<f64>();
        let largest = (0..count)
            .max_by(|&i, &j| splits[i].total_cmp(&splits[j]).then(j.cmp(&i)))
            .expect("at least one channel");
        splits[largest] = (splits[largest] + gap).clamp(0.0, kf);
        (splits, level)
    };

    let nu = -level.exp();
    let mut stationarity: f64 = 0.0;
    for (f, &bits) in frags.iter().zip(&splits) {
        let violation = if bits > 0.0 {
            (f.derivative(nf, bits) - nu).abs()
        } else {
            (f.derivative(nf, 0.0) - nu).max(0.0)
        };
        stationarity = stationarity.max(violation);
    }
    let objective: f64 = frags.iter().zip(&splits).map(|(f, &b)| f.log_success(nf, b)).sum();
    let feasibility = (splits.iter().sum::<f64>() - kf).abs();
    Ok(KktSplit {
        allocation: SplitAllocation {
            splits: splits.into_iter().map(T::of).collect(),
            continuous: true,
        },
        multiplier: T::of(nu),
        feasibility_residual: T::of(feasibility),
        stationarity_residual: T::of(stationarity),
        objective: T::of(objective),
    })
}

/// Rounds `values` to nonnegative integers summing to `total`, giving the
/// leftover units to the largest fractional parts (lowest index on ties).
pub fn round_largest_remainder<T: Real>(values: &[T], total: u64) -> Vec<u64> {
    let clean: Vec<f64> = values.iter().map(|v| v.as_f64().max(0.0)).collect();
    let mut out: Vec<u64> = clean.iter().map(|v| v.floor() as u64).collect();
    let assigned: u64 = out.iter().sum();
    let mut order: Vec<usize> = (0..clean.len()).collect();
    if assigned <= total {
        order.sort_by(|&i, &j| {
            let (fi, fj) = (clean[i] - clean[i].floor(), clean[j] - clean[j].floor());
            fj.total_cmp(&fi).then(i.cmp(&j))
        });
        for idx in order.iter().cycle().take((total - assigned) as usize) {
            out[*idx] += 1;
        }
    } else {
        // Only reachable when the inputs overshoot the total.
        order.sort_by(|&i, &j| {
            let (fi, fj) = (clean[i] - clean[i].floor(), clean[j] - clean[j].floor());
            fi.total_cmp(&fj).then(i.cmp(&j))
        });
        let mut excess = assigned - total;
        while excess > 0 {
            for &idx in &order {
                if excess > 0 && out[idx] > 0 {
                    out[idx] -= 1;
                    excess -= 1;
                }
            }
        }
    }
    out
}

/// Local search over integer splits maximising `ln(1 - eps_MS)`.
///
/// Moves are single-bit transfers between any two channels and handing a
/// whole fragment to another channel; the latter reaches the "channel left
/// idle" corner that single-bit moves cannot cross.
pub fn refine_split<T: Real>(n: T, splits: &[u64], channels: &ChannelSet<T>) -> Result<Vec<u64>> {
    if splits.len() != channels.len() {
        return Err(Error::LengthMismatch {
            name: "splits",
            expected: channels.len(),
            got: splits.len(),
        });
    }
    let (nf, _) = check_inputs(n, T::zero())?;
    let frags = fragments(nf, channels);
    let mut current = splits.to_vec();
    let mut best = log_success_u64(nf, &current, &frags);
    let count = current.len();
    for _ in 0..MAX_REFINE_ROUNDS {
        let mut best_move: Option<(usize, usize, u64, f64)> = None;
        for from in 0..count {
            if current[from] == 0 {
                continue;
            }
            for to in 0..count {
                if to == from {
                    continue;
                }
                let amounts: &[u64] = if current[from] > 1 { &[1, current[from]] } else { &[1] };
                for &amount in amounts {
                    current[from] -= amount;
                    current[to] += amount;
                    let value = log_success_u64(nf, &current, &frags);
                    current[from] += amount;
                    current[to] -= amount;
                    if value > best_move.map_or(best, |m| m.3) {
                        best_move = Some((from, to, amount, value));
                    }
                }
            }
        }
        match best_move {
            Some((from, to, amount, value)) => {
                current[from] -= amount;
                current[to] += amount;
                best = value;
            }
            None => break,
        }
    }
    Ok(current)
}

/// Integer split at blocklength `n`: KKT solution, largest-remainder rounding,
/// then [`refine_split`].
pub fn integer_split<T: Real>(n: T, k: u64, channels: &ChannelSet<T>) -> Result<Vec<u64>> {
    let kkt = optimize_split(n, T::of_u64(k), channels)?;
    let rounded = round_largest_remainder(&kkt.allocation.splits, k);
    refine_split(n, &rounded, channels)
}

/// Baseline split proportional to the channel capacities, rounded by largest remainder.
pub fn capacity_proportional_split<T: Real>(k: u64, channels: &ChannelSet<T>) -> SplitAllocation<T> {
    let total = channels.sum_capacity();
    let shares: Vec<T> = (0..channels.len())
        .map(|i| T::of_u64(k) * channels.capacity(i) / total)
        .collect();
    SplitAllocation {
        splits: round_largest_remainder(&shares, k).into_iter().map(T::of_u64).collect(),
        continuous: false,
    }
}
