//! Simulation stack for an optical coherent dot-product chip (OCDC).
//!
//! The crate is organised bottom-up:
//!
//! * [`optics`]: field-level model of the chip (splitter, push-pull
//!   modulators, cascaded directional-coupler combiner, reference-biased
//!   detection) and the analog dot product built from them.
//! * [`calibration`]: transmission-curve fitting, bias-null search, tail
//!   phase alignment and in-situ backpropagation control (BPC).
//! * [`lowering`]: compiles matrix-vector products, convolutions and
//!   transposed convolutions into width-M dot-product schedules.
//! * [`network`]: a small AUTOMAP-style regression network with exact and
//!   chip-simulated backends.
//! * [`datagen`]: phantoms and the three MRI-style encodings.
//! * [`experiments`]: seeded experiment runners writing CSV/JSON/SVG/PGM.
//!
//! Data-parallel loops go through [`exec::Exec`]; with the `parallel`
//! feature disabled every loop runs sequentially and produces the same bits.

pub mod calibration;
pub mod datagen;
pub mod error;
pub mod exec;
pub mod experiments;
pub mod io;
pub mod lowering;
pub mod network;
pub mod optics;
pub mod rng;
pub mod stats;
pub mod tensor;

pub use error::{Error, Result};
pub use exec::Exec;
