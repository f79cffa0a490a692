//! Element-level differential privacy.
//!
//! Privacy here is measured against a partition of the data space into
//! clusters ("elements"): two users are neighbors when their data differ
//! inside at most one cluster, no matter how many records that cluster holds.
//! The crate provides
//!
//! * [`partition`]: element partitions, user data and the user/sample
//!   element distances,
//! * [`accountant`]: Gaussian calibration, Renyi and `(epsilon, delta)`
//!   composition, subsampling amplification and the subsampled-Gaussian
//!   moments accountant,
//! * [`mechanisms`]: noise addition with element sensitivity, heavy hitters
//!   and the cluster-projected histogram,
//! * [`optim`]: the element-level projected gradient update, private SGD and
//!   the asymptotic covariance predictor,
//! * [`simdata`]: synthetic generators and metrics used by the experiments.
//!
//! Post-processing never increases an accounted budget: any function applied
//! to a released value keeps the `(epsilon, delta)` reported for it.

pub mod accountant;
pub mod binomial;
pub mod error;
pub mod matching;
pub mod mechanisms;
pub mod optim;
pub mod partition;
pub mod quadrature;
pub mod rng;
pub mod simdata;

pub use error::{Error, Result};
