//! Pump calibration from the transmon Stark shift.

use std::path::Path;

use anyhow::Result;
use serde_json::json;

use qlaunch::model::simulate_stark_calibration;
use qlaunch::units::{mhz, to_khz};

use crate::config::RunConfig;
use crate::svg::{self, Series};
use crate::write_text;

pub fn run(cfg: &RunConfig, p: &qlaunch::SystemParams, out: &Path) -> Result<serde_json::Value> {
    let amps: Vec<f64> = (0..cfg.sweep_points.max(8))
        .map(|i| i as f64 / (cfg.sweep_points.max(8) - 1) as f64)
        .collect();
    let delta = mhz(-40.0);
    let eps_per_unit = mhz(25.0);
    // 1% of the maximum shift as measurement noise
    let max_shift = p.chi.ac.abs() * (eps_per_unit / delta).powi(2);
    let cal = simulate_stark_calibration(p, &amps, eps_per_unit, delta, 0.01 * max_shift, cfg.seed)?;

    let mut csv = String::from("amplitude,shift_khz,fit_khz\n");
    for &(u, s) in &cal.points {
        csv.push_str(&format!(
            "{:.6e},{:.6e},{:.6e}\n",
            u,
            to_khz(s),
            to_khz(cal.slope * u * u)
        ));
    }
    write_text(&out.join("stark_sweep.csv"), &csv)?;
    write_text(
        &out.join("stark_sweep.svg"),
        &svg::line_plot(
            "transmon Stark shift vs pump amplitude",
            "drive amplitude (arb)",
            "shift (kHz)",
            &[
                Series::scatter(
                    cal.points.iter().map(|p| p.0).collect(),
                    cal.points.iter().map(|p| to_khz(p.1)).collect(),
                    "synthetic data",
                    svg::PALETTE[0],
                ),
                Series::line(
                    cal.points.iter().map(|p| p.0).collect(),
                    cal.points.iter().map(|p| to_khz(cal.slope * p.0 * p.0)).collect(),
                    "quadratic fit",
                    svg::PALETTE[1],
                ),
            ],
            false,
        )?,
    )?;
    Ok(json!({
        "slope_khz_per_unit2": to_khz(cal.slope),
        "slope_stderr_khz": to_khz(cal.slope_stderr),
        "xi_per_unit": cal.xi_per_unit,
        "xi_per_unit_stderr": cal.xi_per_unit_stderr,
        "expected_xi_per_unit": (eps_per_unit / delta).abs(),
    }))
}
