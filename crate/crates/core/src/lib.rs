//! Phasor and time-domain models of a two-coil series-parallel resonant
//! inductive link, with load-shift-keying uplink analysis.
//!
//! - [`link_model`]: circuit types, quality factors, efficiency and reflected
//!   impedance formulas.
//! - [`lsk`]: light/heavy load contrast, coupling sweeps, flip threshold and
//!   primary detune solver.
//! - [`transient`]: trapezoidal simulation of the switched circuit, envelope
//!   extraction and bit decoding.
//! - [`scenario_file`], [`table`], [`svg`]: file formats used by the CLI.

pub mod error;
pub mod link_model;
pub mod lsk;
pub mod par;
pub mod presets;
pub mod scenario_file;
pub mod svg;
pub mod table;
pub mod transient;

pub use error::{LinkError, Result};
pub use link_model::{ComplexValue, LinkScenario, LoadState};
pub use presets::Preset;
