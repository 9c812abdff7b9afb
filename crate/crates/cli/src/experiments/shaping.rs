//! Wavepacket shaping: invert, compensate, verify.

use std::path::Path;

use anyhow::{Context, Result};
use serde_json::json;

use qlaunch::shaping::{compensate_stark, forward_verify, invert_for_coupling, TargetWaveform};
use qlaunch::units::{khz, to_khz, to_us, us};

use crate::config::RunConfig;
use crate::svg::{self, Series};
use crate::write_text;

pub fn run(cfg: &RunConfig, p: &qlaunch::SystemParams, out: &Path) -> Result<serde_json::Value> {
    let duration = if cfg.duration_us > 0.0 { cfg.duration_us } else { 6.0 };
    let n = ((duration * 1e-6) * 40.0 * p.kappa_out).ceil() as usize;
    let target = match cfg.target.as_str() {
        "gaussian" => TargetWaveform::gaussian(
            us(duration),
            us(duration / 2.0),
            us(cfg.sigma_us),
            cfg.photons,
            n,
        )?,
        "flat-top" => TargetWaveform::flat_top(us(duration), us(0.4), cfg.photons, n)?,
        "exponential" => TargetWaveform::natural_release(
            khz(cfg.g_khz),
            p.kappa_out,
            cfg.photons.sqrt(),
            us(duration),
            n,
        )?,
        path => TargetWaveform::from_csv(path)
            .with_context(|| format!("loading target waveform from {path}"))?,
    };
    target.write_csv(out.join("target.csv"))?;

    let sol = invert_for_coupling(&target, p.kappa_out, 1.0, Some(khz(cfg.g_cap_khz)))?;
    let pumps = compensate_stark(&sol, p)?;
    let ideal = forward_verify(&sol, &target, p, None)?;
    let with_stark = forward_verify(&sol, &target, p, Some(&pumps))?;

    let mut csv = String::from("time_us,g_khz,g_phase_rad,xi_mag,xi2_phase_rad,target_abs,simulated_abs,stark_abs\n");
    for (i, &t) in sol.times.iter().enumerate() {
        csv.push_str(&format!(
            "{:.6e},{:.6e},{:.6e},{:.6e},{:.6e},{:.6e},{:.6e},{:.6e}\n",
            to_us(t),
            to_khz(sol.g[i].norm()),
            sol.g[i].arg(),
            pumps.xi1[i].norm(),
            pumps.xi2[i].arg(),
            target.values[i].norm(),
            ideal.b_out[i].norm(),
            with_stark.b_out[i].norm(),
        ));
    }
    write_text(&out.join("solution.csv"), &csv)?;

    let t_us: Vec<f64> = sol.times.iter().map(|&t| to_us(t)).collect();
    write_text(
        &out.join("waveform.svg"),
        &svg::line_plot(
            "shaped emitted wavepacket",
            "time (us)",
            "|b_out| (sqrt(photons/us))",
            &[
                Series::line(
                    t_us.clone(),
                    target.values.iter().map(|v| v.norm() / 1e3).collect(),
                    "target",
                    svg::PALETTE[0],
                ),
                Series::line(
                    t_us.clone(),
                    ideal.b_out.iter().map(|v| v.norm() / 1e3).collect(),
                    "simulated",
                    svg::PALETTE[1],
                ),
                Series::line(
                    t_us.clone(),
                    with_stark.b_out.iter().map(|v| v.norm() / 1e3).collect(),
                    "with Stark shifts",
                    svg::PALETTE[2],
                ),
            ],
            false,
        )?,
    )?;
    write_text(
        &out.join("coupling.svg"),
        &svg::line_plot(
            "solved coupling envelope",
            "time (us)",
            "|g|/2pi (kHz)",
            &[Series::line(
                t_us,
                sol.g.iter().map(|v| to_khz(v.norm())).collect(),
                "",
                svg::PALETTE[0],
            )],
            false,
        )?,
    )?;

    Ok(json!({
        "target": cfg.target,
        "photons": target.total_photons(),
        "peak_g_khz": to_khz(sol.peak_g),
        "l2_error": ideal.l2_error,
        "l2_error_with_stark": with_stark.l2_error,
        "photon_deficit": ideal.photon_deficit,
        "residual_cavity_energy": ideal.residual_cavity_energy,
        "conservation_error": sol.conservation_error,
    }))
}
