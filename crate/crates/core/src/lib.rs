//! Simulation engines for processes whose interesting behavior comes from
//! widely separated time scales, plus the shared numerics they run on.
//!
//! Layers:
//! - numerics: [`rng`], [`series`], [`linalg`], [`integrate`], [`rootfind`],
//!   [`parallel`]
//! - engines: [`tipping`] (noisy bistable climate variable under a drifting
//!   control), [`glassmd`] (2D binary inverse-power-law liquid), [`exocytosis`]
//!   (insulin vesicle pool kinetics), [`cycles`] (second-order accelerator
//!   dynamics), [`ghg`] (greenhouse compartment models with feedback)

pub mod error;
pub mod integrate;
pub mod linalg;
pub mod parallel;
pub mod rng;
pub mod rootfind;
pub mod series;

pub mod cycles;
pub mod exocytosis;
pub mod ghg;
pub mod glassmd;
pub mod tipping;

pub use error::Error;
pub use series::TimeSeries;

pub type Result<T> = std::result::Result<T, Error>;
