//! Hybrid scattering transform: a wavelet layer that reduces piecewise
//! polynomials to Dirac trains, followed by Gabor-modulus measurements from
//! which the train is recovered up to translation, reflection and sign.

pub mod amplitude;
pub mod error;
pub mod expoly;
pub mod gabor;
pub mod generate;
pub mod signal;
pub mod support;
pub mod synthesis;
pub mod wavelet;

pub use error::{Error, Result};
pub use gabor::{Convention, GaborSpec, MeasurementRecord, MeasurementSet, Window};
pub use signal::{DifferenceMultiset, PiecewisePolynomial, SampledSignal, SparseSignal};
pub use wavelet::{MotherWavelet, SparsifyStages};
