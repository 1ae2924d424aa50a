//! Average Age of Information (AoI) of short-packet status updates sent over
//! `N` parallel AWGN channels.
//!
//! Five transmission schemes are covered: single channel (SC), packet
//! duplication (PD), multiplexing with shifted schedules (MP), codeword
//! splitting with joint decoding (CS) and message splitting (MS). Errors
//! follow the second-order normal approximation at finite blocklength.
//!
//! * [`channel`] and [`gaussian`]: error probability models.
//! * [`aoi`]: closed-form average AoI per scheme.
//! * [`optimize`]: blocklength, message-split and schedule optimisation.
//! * [`simulate`]: Monte Carlo reference for every analytic result.
//!
//! The analytic code is generic over [`Real`] (`f32` or `f64`); the `*64`
//! aliases below fix the common `f64` instantiation.

pub mod aoi;
pub mod channel;
pub mod error;
pub mod gaussian;
pub mod linalg;
pub mod optimize;
mod scalar;
pub mod simulate;

pub use aoi::{
    aoi_mp_equal_snr, aoi_mp_general, aoi_renewal, aoi_scheme, mp_aoi_quadratic, mp_cs_gap,
    mp_eigenvalues, mp_quadratic_form, AoiResult, Method, MpMoments, QualityFlag, Schedule,
    SchemeConfig, SchemeKind,
};
pub use channel::{epsilon_cs, epsilon_ms, epsilon_pd, epsilon_single, ChannelSet, ErrorProbability};
pub use error::{Error, Result};
pub use gaussian::{log_phi, normal_pdf, q_function};
pub use linalg::DenseMatrix;
pub use optimize::{
    capacity_proportional_split, compare_schemes, optimal_shifts, optimize_blocklength, optimize_ms,
    optimize_shifts_heterogeneous, optimize_split, BlocklengthRange, OptimumReport, SchemeComparison,
    SchemeSpec, ShiftMode, ShiftSearch, SplitAllocation,
};
pub use simulate::{simulate, simulate_mp_moments, MpMomentEstimate, SimConfig, SimResult};
pub use scalar::Real;

pub type ChannelSet64 = ChannelSet<f64>;
pub type ChannelSet32 = ChannelSet<f32>;
pub type ErrorProbability64 = ErrorProbability<f64>;
pub type Schedule64 = Schedule<f64>;
pub type SchemeConfig64 = SchemeConfig<f64>;
pub type AoiResult64 = AoiResult<f64>;
pub type MpMoments64 = MpMoments<f64>;
pub type OptimumReport64 = OptimumReport<f64>;
pub type SplitAllocation64 = SplitAllocation<f64>;
