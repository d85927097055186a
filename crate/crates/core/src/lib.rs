//! Asynchronous multi-fidelity hyper-parameter tuning.
//!
//! The engine combines three pieces: a resource allocator that learns which
//! starting resource level (bracket) to use, a delayed asynchronous
//! successive-halving scheduler, and a multi-fidelity ensemble surrogate that
//! proposes new configurations while other evaluations are still running.
//! Experiments run either on a deterministic simulated clock or against real
//! subprocess objectives.

pub mod allocator;
pub mod bench;
pub mod error;
pub mod exec;
pub mod scheduler;
pub mod space;
pub mod store;
pub mod surrogate;
pub mod tuner;

pub use error::{Error, Result};
pub use space::{Configuration, ParamKind, ParamSpec, ParamValue, SearchSpace};
pub use store::{ConfigId, Measurement, MeasurementStore};
pub use tuner::TunerParams;
