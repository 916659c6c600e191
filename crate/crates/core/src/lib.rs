//! Surrogate-based offline optimization with gradient-matching training.
//!
//! The crate covers the full pipeline: an MLP surrogate with exact input and
//! mixed input/parameter derivatives ([`autodiff`], [`surrogate`]), offline
//! datasets and monotone trajectory sampling ([`data`]), gradient-matching
//! training ([`training`]), gradient-ascent design search ([`search`]) and the
//! benchmark oracles, gap measurements, bound checks and rank scoring used to
//! evaluate it ([`bench`]).

pub mod autodiff;
pub mod bench;
pub mod data;
pub mod error;
pub mod objective;
pub mod optim;
pub mod search;
pub mod seed;
pub mod surrogate;
pub mod training;

pub use autodiff::{Activation, ParamLayout, ParamVector, Tangent};
pub use data::{Dataset, Trajectory, TrajectorySampler, TrajectorySet};
pub use error::{Error, Result};
pub use objective::Objective;
pub use optim::OptimizerKind;
pub use search::{SearchConfig, SearchTrace};
pub use surrogate::{ArchitectureSpec, SurrogateModel};
pub use training::{TrainConfig, TrainError, TrainMode, TrainReport};
