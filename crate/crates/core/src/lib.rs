//! Simulation core for an online-trained reservoir-computing channel equaliser.
//!
//! The crate models the whole digital signal path in discrete time:
//!
//! * [`prng`] — Galois LFSR bit sources for channel symbols and noise, plus a
//!   counter-based generator for input masks.
//! * [`channel`] — a nonlinear wireless channel: a length-10 FIR stage, a
//!   memoryless polynomial distortion, additive uniform noise, and schedules
//!   that drift or switch the channel coefficients over time.
//! * [`reservoir`] — a ring-topology reservoir with a sine nonlinearity and a
//!   one-step desynchronisation delay on neuron 0.
//! * [`trainer`] — a linear readout trained online by stochastic gradient
//!   descent with a geometric learning-rate schedule and a reset watchdog.
//! * [`fixedpoint`] — bit-accurate emulation of the 18/25-bit fixed-point
//!   formats and the 25x18 multiplier the training loop is restricted to on
//!   real hardware.
//! * [`evaluator`] — symbol decision and symbol-error-rate bookkeeping.
//! * [`sim`] — the composed equaliser pipeline (washout, training, test) used
//!   by the experiment harness.
//!
//! Everything here is deterministic: a run is a pure function of its
//! configuration and seeds. The crate is `no_std`-compatible (with `alloc`);
//! enable the `libm` feature instead of `std` on bare-metal targets.

#![cfg_attr(not(feature = "std"), no_std)]

#[cfg(all(not(feature = "std"), not(feature = "libm")))]
compile_error!("rceq-core requires either the `std` or the `libm` feature");

extern crate alloc;

pub mod channel;
pub mod evaluator;
pub mod fixedpoint;
pub mod prng;
pub mod reservoir;
pub mod sim;
pub mod trainer;

pub(crate) mod math;

pub use channel::{ChannelParams, ChannelSchedule, NonlinearChannel, Variation, VariedParam};
pub use evaluator::{decide, Symbol, WindowedSer};
pub use prng::{Glfsr, MaskRng, NoiseSource, SymbolSource};
pub use reservoir::{map_attenuation_db, Reservoir, ReservoirConfig};
pub use sim::{PipelineKind, SimConfig, SimOutcome, SimSeeds};
pub use trainer::{readout, Trainer, TrainerConfig, TrainingMode};
