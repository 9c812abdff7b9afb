//! Unit conversions.
//!
//! All frequencies inside the crate are angular (rad/s) and all times are
//! seconds. Interfaces quote frequencies as nu = omega/2pi in kHz or MHz and
//! times in microseconds; the helpers here are the single place where the
//! 2pi and scale factors live.

use std::f64::consts::TAU;

/// nu in kHz -> omega in rad/s.
pub fn khz(nu: f64) -> f64 {
    TAU * nu * 1e3
}

/// nu in MHz -> omega in rad/s.
pub fn mhz(nu: f64) -> f64 {
    TAU * nu * 1e6
}

/// omega in rad/s -> nu in kHz.
pub fn to_khz(omega: f64) -> f64 {
    omega / TAU / 1e3
}

/// omega in rad/s -> nu in MHz.
pub fn to_mhz(omega: f64) -> f64 {
    omega / TAU / 1e6
}

/// t in microseconds -> seconds.
pub fn us(t: f64) -> f64 {
    t * 1e-6
}

/// t in seconds -> microseconds.
pub fn to_us(t: f64) -> f64 {
    t * 1e6
}
