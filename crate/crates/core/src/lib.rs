//! Certification of nonclassical spin states by direct sampling of a
//! regularized quadrature quasiprobability.
//!
//! The pipeline: calibrate raw two-pulse records ([`calibration`]),
//! normalize them into quadrature samples, build an autocorrelation filter
//! ([`filters`]) and its pattern-function table ([`pattern`]), estimate the
//! quasiprobability with pointwise standard errors ([`estimator`]), and scan
//! the filter width for the most significant negativity. [`states`] provides
//! analytic references and synthetic data generators for validation.
//!
//! All numerics are generic over the scalar type via [`num::Real`]
//! (implemented for `f32` and `f64`); the `*64` aliases below cover the
//! common case.

// `!(x > 0)` deliberately rejects NaN together with out-of-range values;
// small fixed-size matrix code reads best with index loops; numeric
// constants are written to full precision on purpose.
#![allow(clippy::neg_cmp_op_on_partial_ord)]
#![allow(clippy::needless_range_loop)]
#![allow(clippy::excessive_precision)]

pub mod calibration;
pub mod error;
pub mod estimator;
pub mod filters;
pub mod io;
pub mod num;
pub mod oracle;
pub mod pattern;
pub mod quad;
pub mod states;
pub mod sums;

pub use error::{AqqpError, Result};

pub type Filter64 = filters::FilterSpec<f64>;
pub type PatternTable64 = pattern::PatternTable<f64>;
pub type Dataset64 = estimator::QuadratureDataset<f64>;
pub type Estimate64 = estimator::AqqpEstimate<f64>;
pub type Scan64 = estimator::SignificanceScan<f64>;
pub type RawRecord64 = calibration::RawRecord<f64>;
pub type Calibration64 = calibration::CalibrationModel<f64>;
pub type State64 = states::StateModel<f64>;
pub type Model64 = states::MeasurementModel<f64>;

pub type Filter32 = filters::FilterSpec<f32>;
pub type PatternTable32 = pattern::PatternTable<f32>;
pub type Dataset32 = estimator::QuadratureDataset<f32>;

pub const VERSION: &str = env!("CARGO_PKG_VERSION");
