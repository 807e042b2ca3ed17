//! Simulation and analysis of a two-detector spatio-temporal quantum random
//! number generator.

pub mod arrival;
pub mod bits;
pub mod config;
pub mod detector;
pub mod error;
pub mod predict;
pub mod extract;
pub mod harness;
pub mod rng;
pub mod stats;
pub mod sts;
pub mod time;

pub use arrival::{ArrivalEvent, ArrivalKind, SourceParams};
pub use bits::{BitStream, StreamLabel};
pub use detector::{Channel, DetectionEvent, DetectorParams, Origin};
pub use error::{Error, Result};
pub use extract::{BlankMode, BlankParams, ClockMode, ClockParams, Pairing, PipelineOutput};
pub use time::TimeStamp;
