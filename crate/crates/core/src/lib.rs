//! Desk-scale simulator for the pump-controlled release of multiphoton
//! cavity states into a traveling mode.
//!
//! The crate models a storage cavity `a` coupled to a lossy output resonator
//! `b` by a pump-activated exchange interaction g(t)(a b^dag + h.c.). It
//! covers the full chain from device parameters to detected heterodyne
//! records:
//!
//! - [`hilbert`]: truncated-Fock-space states and operators,
//! - [`phase_space`]: Husimi Q and Wigner functions,
//! - [`model`]: device parameters, pump calibration, effective Hamiltonian,
//! - [`dynamics`]: Lindblad integration plus closed-form two-mode solutions,
//! - [`release`]: beam-splitter release, emitted waveforms, photon budget,
//! - [`detection`]: efficiency loss, heterodyne sampling, Q histograms,
//! - [`conditioning`]: cavity measurement models and entanglement witnesses,
//! - [`shaping`]: pump envelopes that emit a prescribed wavepacket,
//! - [`fit`]: the small least-squares toolbox used by the analysis paths.
//!
//! Frequencies are angular (rad/s) and times are seconds everywhere inside
//! the crate; [`units`] holds the kHz/MHz/us conversions used at the edges.
//! Randomized paths take explicit 64-bit seeds and use the ChaCha12 generator,
//! so identical seeds and configurations reproduce identical outputs.

pub mod conditioning;
pub mod detection;
pub mod dynamics;
pub mod error;
pub mod fit;
pub mod hilbert;
pub mod linalg;
pub mod model;
pub mod phase_space;
pub mod release;
pub mod shaping;
pub mod units;

pub use error::{Error, Result};
pub use hilbert::{
    fidelity, make_state, mode_operator, partial_trace, tensor, CatParity, FockSpace, LinearOp,
    ModeLabel, OperatorKind, QuantumState, Space, StateSpec,
};
pub use model::SystemParams;
pub use phase_space::{husimi_q, wigner, PhaseField, PhaseGrid};
