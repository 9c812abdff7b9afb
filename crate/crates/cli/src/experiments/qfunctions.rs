//! Traveling-state Q functions: release, detect, histogram, marginals.

use std::path::Path;

use anyhow::Result;
use serde_json::json;

use qlaunch::detection::{
    analytic_axis_marginal, analytic_harmonic, angular_harmonic, axis_marginal, histogram_q,
    radial_marginal, sample_heterodyne, DetectorModel, MarginalAxis,
};
use qlaunch::hilbert::{partial_trace, ModeLabel};
use qlaunch::phase_space::PhaseGrid;
use qlaunch::release::{apply_release, conversion_efficiency};
use qlaunch::units::khz;

use crate::config::RunConfig;
use crate::experiments::parse_state;
use crate::svg::{self, Series};
use crate::write_text;

/// Full release of the configured state through the lossy chain and the
/// heterodyne detector.
pub fn run(cfg: &RunConfig, p: &qlaunch::SystemParams, out: &Path) -> Result<serde_json::Value> {
    let det = DetectorModel::with_eta(cfg.eta_det)?;
    let eta_conv = conversion_efficiency(p, khz(cfg.g_khz))?;
    let grid = PhaseGrid::default_detection();

    let released = |name: &str| -> Result<qlaunch::QuantumState> {
        let cavity = parse_state(name, cfg.cutoff)?;
        let joint = apply_release(&cavity, std::f64::consts::PI)?;
        let itin = partial_trace(&joint, &[ModeLabel::Itinerant])?;
        let lossy_conv = qlaunch::detection::loss_channel(&itin, eta_conv)?;
        Ok(det.observe(&lossy_conv)?)
    };

    let observed = released(&cfg.state)?;
    let shots = sample_heterodyne(&observed, &det, cfg.shots, cfg.seed)?;
    shots.write_csv(out.join("shots.csv"))?;
    let hist = histogram_q(&shots, &grid)?;
    hist.write_csv(out.join("q_histogram.csv"))?;
    let re = grid.re_points();
    let im = grid.im_points();
    write_text(
        &out.join("q_histogram.svg"),
        &svg::heatmap(
            &format!("traveling Q function, state {}", cfg.state),
            re.as_slice().unwrap(),
            im.as_slice().unwrap(),
            &|i, j| hist.density[(i, j)],
            false,
        )?,
    )?;

    // marginals with the analytic (loss-transformed) reference curves
    let marg = axis_marginal(&hist, MarginalAxis::Q)?;
    let pred = analytic_axis_marginal(&observed, MarginalAxis::Q, &marg.centers)?;
    let mut csv = String::from("q,density,ideal\n");
    for (i, &c) in marg.centers.iter().enumerate() {
        csv.push_str(&format!("{:.6e},{:.6e},{:.6e}\n", c, marg.density[i], pred[i]));
    }
    write_text(&out.join("marginal_q.csv"), &csv)?;
    write_text(
        &out.join("marginal_q.svg"),
        &svg::line_plot(
            "marginal Pr(Q)",
            "Q",
            "density",
            &[
                Series::scatter(marg.centers.clone(), marg.density.clone(), "sampled", svg::PALETTE[0]),
                Series::line(marg.centers.clone(), pred.clone(), "ideal (with eta_det)", svg::PALETTE[1]),
            ],
            false,
        )?,
    )?;

    // angular density and its leading harmonic
    let ang = radial_marginal(&hist, 60)?;
    let mut ang_csv = String::from("phi,density\n");
    for (i, &phi) in ang.phi.iter().enumerate() {
        ang_csv.push_str(&format!("{:.6e},{:.6e}\n", phi, ang.density[i]));
    }
    write_text(&out.join("angular_density.csv"), &ang_csv)?;
    write_text(
        &out.join("angular_density.svg"),
        &svg::line_plot(
            "radially integrated Q",
            "phi (rad)",
            "Pr(phi)",
            &[Series::line(ang.phi.clone(), ang.density.clone(), "", svg::PALETTE[0])],
            false,
        )?,
    )?;

    let mut derived = json!({
        "eta_conv": eta_conv,
        "eta_det": cfg.eta_det,
        "shots": cfg.shots,
    });
    if let Some(n) = match cfg.state.as_str() {
        "0+1" => Some(1usize),
        "0+2" => Some(2),
        "0+3" => Some(3),
        "0+4" => Some(4),
        _ => None,
    } {
        let (est, err) = angular_harmonic(&shots, n as i32)?;
        let pred = analytic_harmonic(&observed, n)?;
        derived["harmonic"] = json!({
            "n": n,
            "sampled_re": est.re,
            "sampled_im": est.im,
            "stderr": err,
            "analytic": pred.re,
        });
    }

    // cat states: also release the opposite parity and write the
    // even-minus-odd marginal difference
    if cfg.state == "cat2+" || cfg.state == "cat2-" {
        let other_name = if cfg.state == "cat2+" { "cat2-" } else { "cat2+" };
        let other_obs = released(other_name)?;
        let other_shots = sample_heterodyne(&other_obs, &det, cfg.shots, cfg.seed + 1)?;
        let other_hist = histogram_q(&other_shots, &grid)?;
        let other_marg = axis_marginal(&other_hist, MarginalAxis::Q)?;
        let other_pred = analytic_axis_marginal(&other_obs, MarginalAxis::Q, &marg.centers)?;
        let (even_m, odd_m, even_p, odd_p) = if cfg.state == "cat2+" {
            (&marg.density, &other_marg.density, &pred, &other_pred)
        } else {
            (&other_marg.density, &marg.density, &other_pred, &pred)
        };
        let mut diff_csv = String::from("q,difference,ideal\n");
        let mut got = Vec::new();
        let mut ideal = Vec::new();
        for (i, &c) in marg.centers.iter().enumerate() {
            let d = even_m[i] - odd_m[i];
            let di = even_p[i] - odd_p[i];
            got.push(d);
            ideal.push(di);
            diff_csv.push_str(&format!("{:.6e},{:.6e},{:.6e}\n", c, d, di));
        }
        write_text(&out.join("cat_marginal_difference.csv"), &diff_csv)?;
        write_text(
            &out.join("cat_marginal_difference.svg"),
            &svg::line_plot(
                "even minus odd cat marginals",
                "Q",
                "difference",
                &[
                    Series::scatter(marg.centers.clone(), got, "sampled", svg::PALETTE[0]),
                    Series::line(marg.centers.clone(), ideal, "ideal", svg::PALETTE[1]),
                ],
                false,
            )?,
        )?;
    }
    Ok(derived)
}
