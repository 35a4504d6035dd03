//! Multicomponent signal separation with the chirplet transform.
//!
//! A signal is mapped to a (time, frequency, chirp rate) cube, ridges of the
//! individual modes are located on a filter-matched version of that cube and
//! linked over time, and each mode is read back by solving a small linear
//! system per frame that accounts for interference between modes.

pub mod error;
pub mod matchedfilter;
pub mod model;
pub mod pipeline;
pub mod refine;
pub mod io;
pub mod ridges;
pub mod separation;
pub mod signals;
pub mod stream;
pub mod transforms;

pub use error::{Error, Result};
pub use model::{
    make_grids, AnalysisConfig, ChirpRateGrid, ComponentCount, ComponentEstimate, FrequencyGrid, RidgePoint, RidgeSet,
    RidgeTrack, SampledSignal, TFCCube, ThresholdPolicy,
};
