//! Coherent-feedback disturbance rejection with optical ring resonators.
//!
//! A plant resonator is driven by a noise beam `w`; the beam reflected
//! off its input coupler (`y`) is processed by a second resonator, the
//! compensator, and fed back into the plant's output coupler (`u`) so that
//! it interferes destructively with the transmitted noise at `z`. Every
//! element is a first-order complex transfer function of `s = iδ`, with
//! `δ` the detuning from the plant resonance in MHz.
//!
//! - [`cavity`]: geometry-to-rate conversion, plant and compensator
//!   transfer functions.
//! - [`loop_algebra`]: closed-loop response and the mode-matching
//!   corrected output power ratio, frequency sweeps and phase scans.
//! - [`synthesis`]: ideal compensator, gain/phase optimization, broadband
//!   metrics.
//! - [`estimation`]: least-squares fits to max/min phase-extreme data and
//!   consistency checks against independent measurements.
//! - [`emulator`]: synthetic swept-sine, phase-scan and lock traces.
//! - [`cli`]: the command-line front end.

pub mod apparatus;
pub mod cavity;
pub mod cli;
pub mod emulator;
pub mod error;
pub mod estimation;
pub mod loop_algebra;
pub mod optimize;
pub mod synthesis;
pub mod trace;

pub use cavity::{
    compensator_tf, coupler_rate_from_geometry, decay_rate_from_geometry, plant_tf, Channel,
    CompensatorModel, CompensatorParams, PlantModel, RingCavityGeometry,
};
pub use error::{Error, Result};
pub use loop_algebra::{
    closed_loop_tf, frequency_sweep, phase_scan, power_ratio, to_db, LoopEnvironment, PhaseScan,
};
pub use synthesis::{ideal_compensator, optimize_gain, SynthesisResult, Target};
pub use trace::{FrequencyTrace, TraceKind, TraceValues};
