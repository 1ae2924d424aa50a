//! Short-packet error probabilities over single and parallel AWGN channels.
//!
//! All models use the second-order normal approximation
//!
//! ```text
//! eps(n, k, C, V) = Q( (C - k/n) / (log2(e) * sqrt(V / (2 n))) )
//! ```
//!
//! where `C` is the capacity in bits per channel use and `V` the dispersion
//! factor `1 - 1/(1+snr)^2`. Parallel joint coding sums both over channels.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::gaussian::q_function;
use crate::scalar::Real;

/// Per-channel linear SNRs of the parallel AWGN links.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ChannelSet<T> {
    snrs: Vec<T>,
}

impl<T: Real> ChannelSet<T> {
    pub fn new(snrs: Vec<T>) -> Result<Self> {
        if snrs.is_empty() {
            return Err(Error::invalid("channels", "at least one channel is required"));
        }
        if let Some(bad) = snrs.iter().find(|s| !(s.is_finite() && **s > T::zero())) {
            return Err(Error::invalid(
                "snr",
                format!("every linear SNR must be finite and positive, got {bad}"),
            ));
        }
        Ok(Self { snrs })
    }

    /// `count` channels sharing the same SNR.
    pub fn homogeneous(count: usize, snr: T) -> Result<Self> {
        Self::new(vec![snr; count])
    }

    /// Builds a channel set from SNRs given in dB.
    pub fn from_db(snrs_db: &[T]) -> Result<Self> {
        let ten = T::of(10.0);
        Self::new(snrs_db.iter().map(|db| ten.powf(*db / ten)).collect())
    }

    pub fn len(&self) -> usize {
        self.snrs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.snrs.is_empty()
    }

    pub fn snrs(&self) -> &[T] {
        &self.snrs
    }

    pub fn snr(&self, index: usize) -> T {
        self.snrs[index]
    }

    /// Shannon capacity `0.5 * log2(1 + snr)` of one channel, in bits per symbol.
    pub fn capacity(&self, index: usize) -> T {
        capacity(self.snrs[index])
    }

    pub fn sum_capacity(&self) -> T {
        self.snrs.iter().map(|&g| capacity(g)).sum()
    }

    /// True when every channel has exactly the same SNR.
    pub fn is_homogeneous(&self) -> bool {
        self.snrs.iter().all(|&g| g == self.snrs[0])
    }

    /// Index of the strongest channel; ties resolve to the lowest index.
    pub fn strongest(&self) -> usize {
        let mut best = 0;
        for (i, &g) in self.snrs.iter().enumerate() {
            if g > self.snrs[best] {
                best = i;
            }
        }
        best
    }

    /// The single channel at `index` as its own set.
    pub fn single(&self, index: usize) -> Self {
        Self {
            snrs: vec![self.snrs[index]],
        }
    }
}

/// A probability in `[0, 1]`.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize)]
#[serde(transparent)]
pub struct ErrorProbability<T>(T);

impl<T: Real> ErrorProbability<T> {
    pub fn new(value: T) -> Result<Self> {
        if value >= T::zero() && value <= T::one() {
            Ok(Self(value))
        } else {
            Err(Error::invalid(
                "error probability",
                format!("{value} is outside [0, 1]"),
            ))
        }
    }

    pub fn zero() -> Self {
        Self(T::zero())
    }

    pub fn value(self) -> T {
        self.0
    }

    /// Probability that the event does not happen.
    pub fn complement(self) -> T {
        T::one() - self.0
    }
}

pub(crate) fn capacity<T: Real>(snr: T) -> T {
    T::of(0.5) * (T::one() + snr).log2()
}

pub(crate) fn dispersion<T: Real>(snr: T) -> T {
    let inv = (T::one() + snr).recip();
    T::one() - inv * inv
}

fn check_blocklength<T: Real>(n: T) -> Result<()> {
    if n.is_finite() && n > T::zero() {
        Ok(())
    } else {
        Err(Error::invalid("blocklength", format!("must be positive, got {n}")))
    }
}

fn check_bits<T: Real>(k: T) -> Result<()> {
    if k.is_finite() && k >= T::zero() {
        Ok(())
    } else {
        Err(Error::invalid("message bits", format!("must be nonnegative, got {k}")))
    }
}

fn check_snr<T: Real>(snr: T) -> Result<()> {
    if snr.is_finite() && snr > T::zero() {
        Ok(())
    } else {
        Err(Error::invalid("snr", format!("must be positive, got {snr}")))
    }
}

/// Normal approximation from aggregated capacity and dispersion. The single
/// channel and the joint parallel code both go through here so their
/// one-channel results are bit-identical.
fn normal_approximation<T: Real>(n: T, k: T, capacity: T, dispersion: T) -> T {
    let spread = T::LOG2_E() * (dispersion / (T::of(2.0) * n)).sqrt();
    q_function((capacity - k / n) / spread)
}

/// Error probability of `k` bits sent with blocklength `n` over one channel.
pub fn epsilon_single<T: Real>(n: T, k: T, snr: T) -> Result<ErrorProbability<T>> {
    check_blocklength(n)?;
    check_bits(k)?;
    check_snr(snr)?;
    let cap = T::zero() + capacity(snr);
    let disp = T::zero() + dispersion(snr);
    Ok(ErrorProbability(normal_approximation(n, k, cap, disp)))
}

/// Packet duplication: the update is lost only if every copy is lost.
pub fn epsilon_pd<T: Real>(n: T, k: T, channels: &ChannelSet<T>) -> Result<ErrorProbability<T>> {
    let mut product = T::one();
    for &snr in channels.snrs() {
        product *= epsilon_single(n, k, snr)?.value();
    }
    Ok(ErrorProbability(product))
}

/// `1 - (1 - a)(1 - b)`, kept accurate for small inputs and never below
/// either input after rounding.
pub(crate) fn either_fails<T: Real>(a: T, b: T) -> T {
    (a + b - a * b).max(a).max(b)
}

/// Message splitting: every non-empty fragment has to be decoded.
///
/// A zero-bit fragment means the channel is idle and never causes a loss.
pub fn epsilon_ms<T: Real>(
    n: T,
    splits: &[T],
    channels: &ChannelSet<T>,
) -> Result<ErrorProbability<T>> {
    if splits.len() != channels.len() {
        return Err(Error::LengthMismatch {
            name: "splits",
            expected: channels.len(),
            got: splits.len(),
        });
    }
    check_blocklength(n)?;
    let mut combined = T::zero();
    for (&k, &snr) in splits.iter().zip(channels.snrs()) {
        check_bits(k)?;
        if k == T::zero() {
            continue;
        }
        combined = either_fails(combined, epsilon_single(n, k, snr)?.value());
    }
    Ok(ErrorProbability(combined.min(T::one())))
}

/// Codeword splitting: one codeword of `N * n` symbols spread over all
/// channels, `n` symbols on each, decoded jointly.
pub fn epsilon_cs<T: Real>(n: T, k: T, channels: &ChannelSet<T>) -> Result<ErrorProbability<T>> {
    check_blocklength(n)?;
    check_bits(k)?;
    let mut cap = T::zero();
    let mut disp = T::zero();
    for &snr in channels.snrs() {
        check_snr(snr)?;
        cap += capacity(snr);
        disp += dispersion(snr);
    }
    Ok(ErrorProbability(normal_approximation(n, k, cap, disp)))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn chans(snrs: &[f64]) -> ChannelSet<f64> {
        ChannelSet::new(snrs.to_vec()).unwrap()
    }

    #[test]
    fn channel_set_rejects_bad_input() {
        assert!(ChannelSet::<f64>::new(vec![]).is_err());
        assert!(ChannelSet::new(vec![1.0, 0.0]).is_err());
        assert!(ChannelSet::new(vec![-1.0]).is_err());
        assert!(ChannelSet::new(vec![f64::NAN]).is_err());
    }

    #[test]
    fn db_conversion() {
        let c = ChannelSet::<f64>::from_db(&[0.0, 10.0]).unwrap();
        assert!((c.snr(0) - 1.0).abs() < 1e-15);
        assert!((c.snr(1) - 10.0).abs() < 1e-12);
    }

    #[test]
    fn strongest_prefers_lowest_index_on_ties() {
        assert_eq!(chans(&[2.0, 3.0, 3.0]).strongest(), 1);
        assert_eq!(chans(&[2.0, 2.0]).strongest(), 0);
    }

    #[test]
    fn error_probability_range() {
        assert!(ErrorProbability::new(1.5_f64).is_err());
        assert!(ErrorProbability::new(-0.1_f64).is_err());
        assert!(ErrorProbability::new(f64::NAN).is_err());
        assert_eq!(ErrorProbability::new(0.25_f64).unwrap().complement(), 0.75);
    }

    #[test]
    fn rate_at_capacity_gives_one_half() {
        // snr = 3 has capacity exactly one bit per symbol.
        assert_eq!(epsilon_single(64.0, 64.0, 3.0).unwrap().value(), 0.5);
        let c = chans(&[3.0, 3.0]);
        assert_eq!(epsilon_cs(64.0, 128.0, &c).unwrap().value(), 0.5);
    }

    #[test]
    fn zero_bits_is_below_one_half() {
        let e = epsilon_single(10.0, 0.0, 0.3).unwrap().value();
        assert!(e < 0.5 && e > 0.0);
    }

    #[test]
    fn rejects_invalid_inputs() {
        assert!(epsilon_single(0.0, 1.0, 1.0).is_err());
        assert!(epsilon_single(-5.0, 1.0, 1.0).is_err());
        assert!(epsilon_single(5.0, 1.0, 0.0).is_err());
        assert!(epsilon_single(5.0, -1.0, 1.0).is_err());
        assert!(epsilon_cs(0.0, 1.0, &chans(&[1.0])).is_err());
    }

    #[test]
    fn single_channel_value_against_direct_evaluation() {
        // Frozen from a 40-digit arbitrary-precision evaluation of the formula.
        let expected = 2.415_730_483_119_249_4e-11;
        let got: f64 = epsilon_single(100.0, 16.0, 2.0).unwrap().value();
        assert!(((got - expected) / expected).abs() < 1e-9, "{got}");
    }

    #[test]
    fn pd_composes_independent_factors() {
        let c = chans(&[2.0, 4.0]);
        let a = epsilon_single(100.0, 16.0, 2.0).unwrap().value();
        let b = epsilon_single(100.0, 16.0, 4.0).unwrap().value();
        assert_eq!(epsilon_pd(100.0, 16.0, &c).unwrap().value(), a * b);

        let e = epsilon_single(40.0, 20.0, 1.5).unwrap().value();
        let p = epsilon_pd(40.0, 20.0, &chans(&[1.5, 1.5, 1.5])).unwrap().value();
        assert!((p - e * e * e).abs() <= 1e-15 * p);
    }

    #[test]
    fn ms_composes_independent_factors() {
        let e: f64 = epsilon_single(20.0, 8.0, 2.0).unwrap().value();
        assert!((e - 0.034_004_394_578_149_15).abs() < 1e-13);
        let got = epsilon_ms(20.0, &[8.0, 8.0], &chans(&[2.0, 2.0])).unwrap().value();
        let expected = 1.0 - (1.0 - e) * (1.0 - e);
        assert!((got - expected).abs() < 1e-15);
    }

    #[test]
    fn ms_never_below_a_fragment() {
        for &a in &[0.0, 1e-300, 0.3, 0.7, 0.999_999_9, 1.0] {
            for &b in &[0.0, 1e-17, 0.25, 0.5, 1.0 - 1e-16, 1.0] {
                let c: f64 = either_fails(a, b);
                assert!(c >= a && c >= b && c <= 1.0, "{a} {b} -> {c}");
            }
        }
        let c = chans(&[9.5, 0.1, 15.0]);
        let splits = [40.0, 40.0, 40.0];
        let ms = epsilon_ms(11.7, &splits, &c).unwrap().value();
        for (&k, &g) in splits.iter().zip(c.snrs()) {
            assert!(ms >= epsilon_single(11.7, k, g).unwrap().value());
        }
    }

    #[test]
    fn ms_zero_fragments() {
        let c = chans(&[2.0, 0.5]);
        assert_eq!(epsilon_ms(50.0, &[0.0, 0.0], &c).unwrap().value(), 0.0);
        let sc = epsilon_single(50.0, 16.0, 2.0).unwrap();
        assert_eq!(epsilon_ms(50.0, &[16.0, 0.0], &c).unwrap(), sc);
        assert!(matches!(
            epsilon_ms(50.0, &[16.0], &c),
            Err(Error::LengthMismatch { .. })
        ));
    }

    #[test]
    fn cs_direct_evaluation() {
        // Two channels at snr 2, n = 50, k = 16:
        // x = (log2(3) - 0.32) / (log2(e) * sqrt(2 * (8/9) / 100)).
        let x = (3.0_f64.log2() - 0.32) / (std::f64::consts::LOG2_E * (2.0 * (8.0 / 9.0) / 100.0_f64).sqrt());
        let expected = crate::gaussian::q_f64(x);
        let got = epsilon_cs(50.0, 16.0, &chans(&[2.0, 2.0])).unwrap().value();
        assert!(((got - expected) / expected).abs() < 1e-12);
    }

    #[test]
    fn one_channel_reductions_are_bit_exact() {
        for &(n, k, g) in &[(100.0, 16.0, 2.0), (17.0, 30.0, 0.4), (250.0, 3.0, 9.0)] {
            let c = chans(&[g]);
            let sc = epsilon_single(n, k, g).unwrap();
            assert_eq!(epsilon_pd(n, k, &c).unwrap(), sc);
            assert_eq!(epsilon_cs(n, k, &c).unwrap(), sc);
            assert_eq!(epsilon_ms(n, &[k], &c).unwrap(), sc);
        }
    }

    #[test]
    fn works_in_f32() {
        let e: f32 = epsilon_single(100.0_f32, 50.0, 2.0).unwrap().value();
        let d = epsilon_single(100.0_f64, 50.0, 2.0).unwrap().value();
        assert!((e as f64 - d).abs() < 1e-5);
    }
}
