//! Persistence and multifractal scaling estimation for uniformly sampled
//! time series, built around two independent pipelines:
//!
//! - [`mfdfa`]: multifractal detrended fluctuation analysis, with
//!   fit-window families over scale bands for dispersion statistics;
//! - [`km`]: Kramers–Moyal coefficients of the increment statistics in
//!   scale, estimated by Nadaraya–Watson kernel regression, with the Hurst
//!   exponent read off the drift and the multifractality constant off the
//!   diffusion.
//!
//! [`synth`] provides seeded generators with analytically known persistence
//! (the verification oracles), and [`ingest`] loads market CSV data onto a
//! strict uniform UTC grid.

pub mod error;
pub mod ingest;
pub mod km;
pub mod mfdfa;
pub mod series;
pub mod synth;

pub use error::{Error, Result};
pub use series::{IncrementSeries, TimeSeries};
