//! Photon statistics of heralded single-photon sources based on continuously
//! pumped spontaneous parametric down-conversion.
//!
//! * [`model`]: closed-form `g2_si`, `P_ssi`, conditioned coherence and limit
//!   identities.
//! * [`smearing`]: detector jitter and software coincidence windows as a
//!   moving-window convolution, with plateau predictions.
//! * [`sim`]: coherence-cell point-process source and detector chain producing
//!   timestamp streams.
//! * [`correlator`]: streaming pair/triple coincidence histograms and the
//!   efficiency-independent estimators.
//! * [`lab`]: scenario configuration, `.evt` files, CSV reports.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod correlator;
pub mod curve;
pub mod error;
pub mod grid;
pub mod lab;
pub mod model;
pub mod sim;
pub mod smearing;
pub mod stream;

pub use curve::{CorrelationCurve, CorrelationSurface, Unit};
pub use error::{Error, Result};
pub use grid::{UniformGrid, TICKS_PER_SECOND};
pub use model::{CorrelationPair, Shape, SourceParams};
pub use stream::{Channel, EventStream};
