pub mod entangle;
pub mod qfunctions;
pub mod qswitch;
pub mod shaping;
pub mod stark;

use anyhow::{bail, Result};
use qlaunch::hilbert::{make_state, CatParity, ModeLabel, QuantumState, Space, StateSpec};
use qlaunch::linalg::cr;

/// Named cavity states understood by `--state`.
pub fn parse_state(name: &str, cutoff: usize) -> Result<QuantumState> {
    let space = Space::single(ModeLabel::Storage, cutoff)?;
    let spec = match name {
        "vacuum" => StateSpec::Fock(0),
        "fock1" => StateSpec::Fock(1),
        "fock2" => StateSpec::Fock(2),
        "coh1" => StateSpec::Coherent(cr(1.0)),
        "0+1" => StateSpec::FockSuperposition(1),
        "0+2" => StateSpec::FockSuperposition(2),
        "0+3" => StateSpec::FockSuperposition(3),
        "0+4" => StateSpec::FockSuperposition(4),
        "cat2+" => StateSpec::Cat(cr(2f64.sqrt()), CatParity::Even),
        "cat2-" => StateSpec::Cat(cr(2f64.sqrt()), CatParity::Odd),
        other => bail!(
            "unknown state '{other}' (use vacuum, fock1, fock2, coh1, 0+1..0+4, cat2+, cat2-)"
        ),
    };
    Ok(make_state(&spec, &space)?)
}
