pub mod boost;
pub mod custnet;
pub mod error;
pub mod evalkit;
pub mod gradcam;
pub mod ingest;
pub mod label;
pub mod matrix;
pub mod pipeline;
pub mod spectral;
pub mod synth;

pub use error::{Error, Result};
pub use label::Label;
