//! Simulation and analysis of a single-pass Faraday-rotation interface
//! between a linearly polarized probe and a dipole-trapped ⁸⁷Rb ensemble.
//!
//! The crate covers the dispersive spin–light coupling at the level of
//! Gaussian moments ([`spin_optics`]), shot-noise-limited balanced detection
//! ([`detector`]), synthetic pulse trains and detuning scans ([`experiment`]),
//! the parameter fits used to characterize the interface ([`analysis`]) and
//! the trapped-cloud forward models ([`dynamics`]). [`cli`] wires these into
//! the `coldspin` command-line tool.

// `!(x > 0.0)` is used on purpose so that NaN fails validation.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod analysis;
pub mod atomic;
pub mod cli;
pub mod detector;
pub mod dynamics;
pub mod error;
pub mod experiment;
pub mod spin_optics;

pub use atomic::{AtomSpec, ExcitedLevel, TrapSpec};
pub use error::{Error, Result};
pub use spin_optics::{CollectiveSpinState, CouplingOptions, CouplingParams, StokesState};

/// Scientific notation with 12 significant digits, used for every CSV value.
pub fn format_sci(value: f64) -> String {
    format!("{value:.11e}")
}
