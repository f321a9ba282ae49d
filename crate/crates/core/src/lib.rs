//! Simulation of quantum line-pattern recognition on binary cell arrays.
//!
//! A cell array is flattened to `z = x + N*y`, loaded into a uniform
//! superposition through a membership oracle, post-selected (or phase
//! encoded), Fourier transformed and measured. Peaks in the outcome `k`
//! reveal the spacing and angle of embedded line patterns.

pub mod error;
pub mod experiment;
pub mod grid;
pub mod qsim;
pub mod recognize;
pub mod spectral;

pub use error::{Error, Result};
pub use grid::{generate_grid, BackgroundSpec, CellGrid, Dims, LinePatternSpec, Region};
pub use qsim::{Encoding, MeasurementSample, PureState};
pub use recognize::{AnalysisMode, DetectionPolicy, PatternEstimate, PeakReport};
pub use spectral::Spectrum;
