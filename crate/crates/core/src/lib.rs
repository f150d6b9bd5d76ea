//! Gaussian process regression for prognostic health monitoring.
//!
//! Four model families are provided and compared by the benchmark harness:
//!
//! * predefined GPMs trained on the currently observed trajectory only,
//! * predefined GPMs trained on previous trajectories (summed log marginal
//!   likelihood),
//! * GPMs inferred from the sample statistics of per-trajectory basis
//!   regression coefficients (IGPM), with polynomial bases,
//! * IGPMs with physics-informed bases derived from Paris' crack growth law.
//!
//! All public entry points take raw data coordinates; models standardize
//! internally and map results back.

pub mod basis;
pub mod bench;
mod clock;
pub mod dataset;
mod error;
mod exec;
pub mod gp;
pub mod igpm;
pub mod linalg;
pub mod optim;
pub mod plot;
pub mod quadrature;
pub mod standardize;
pub mod train;

pub use basis::{BasisDescriptor, BasisSet, ParisLawConfig};
pub use bench::{CalibrationResult, Method, MethodSpec, MetricsRow, PredictionSeries};
pub use dataset::{Dataset, DatasetManifest, GeneratorSpec, Trajectory};
pub use error::{Error, Result};
pub use gp::{Covariance, GpModel, Hyperparameters, MeanFunction, NoiseModel, PosteriorPrediction};
pub use igpm::{CoefficientStats, ErrorEstimator, IgpmModel};
pub use standardize::Standardizer;
pub use train::{ModelFamily, OptimizationReport};
