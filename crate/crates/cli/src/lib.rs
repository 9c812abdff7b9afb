//! Experiment runner: turns named release-chain experiments into CSV data,
//! SVG plots, and a JSON manifest, deterministically from a seed.

pub mod config;
pub mod experiments;
pub mod svg;

use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use sha2::{Digest, Sha256};

pub use config::RunConfig;

/// A registered experiment and the measurement it reproduces.
pub struct ExperimentDef {
    pub name: &'static str,
    pub panel: &'static str,
    pub about: &'static str,
}

pub const EXPERIMENTS: &[ExperimentDef] = &[
    ExperimentDef {
        name: "qswitch-decay",
        panel: "single-photon decay vs pump strength",
        about: "Decay of |1> for several conversion rates; fits the induced rate and the on/off ratio.",
    },
    ExperimentDef {
        name: "fock-ladder",
        panel: "number-state decay rates",
        about: "kappa_n for |n>, n = 1..5, with the Kerr ladder detuning, plus binomial population curves.",
    },
    ExperimentDef {
        name: "detuning-sweep",
        panel: "induced rate vs relative pump detuning",
        about: "kappa(delta) Lorentzian of width kappa_out from fitted decays.",
    },
    ExperimentDef {
        name: "release-qfunctions",
        panel: "traveling-state Q functions",
        about: "Full release of a chosen state, heterodyne sampling, Q histogram, marginals, angular density.",
    },
    ExperimentDef {
        name: "half-release",
        panel: "conditional fields after half release of |1>",
        about: "Cavity readout in the number and superposition bases; conditional Q data and the Bell-fidelity lower bound.",
    },
    ExperimentDef {
        name: "fock2-half-release",
        panel: "conditional fields after half release of |2>",
        about: "Number-basis conditioning of the half-released two-photon state.",
    },
    ExperimentDef {
        name: "kerr-smearing",
        panel: "cavity state after a Kerr dwell",
        about: "Self-Kerr evolution of a cat during the readout dwell; Wigner functions and the overlap loss.",
    },
    ExperimentDef {
        name: "shaping",
        panel: "shaped emitted wavepacket",
        about: "Inverts the equations of motion for a target envelope, Stark-compensates the pumps, and verifies forward.",
    },
    ExperimentDef {
        name: "stark-calibration",
        panel: "pump calibration from the transmon Stark shift",
        about: "Synthetic Stark-shift sweep and the linear fit giving the xi-per-drive-unit calibration.",
    },
];

pub fn find_experiment(name: &str) -> Option<&'static ExperimentDef> {
    EXPERIMENTS.iter().find(|e| e.name == name)
}

/// Run one experiment; returns the manifest path.
pub fn run_experiment(cfg: &RunConfig) -> Result<PathBuf> {
    let def = find_experiment(&cfg.experiment)
        .with_context(|| format!("unknown experiment '{}'; see `list`", cfg.experiment))?;
    let params = cfg.load_params()?;
    let out = cfg.resolve_out_dir();
    std::fs::create_dir_all(&out)
        .with_context(|| format!("creating output directory {}", out.display()))?;

    let derived = match def.name {
        "qswitch-decay" => experiments::qswitch::decay(cfg, &params, &out)?,
        "fock-ladder" => experiments::qswitch::fock_ladder(cfg, &params, &out)?,
        "detuning-sweep" => experiments::qswitch::detuning_sweep(cfg, &params, &out)?,
        "release-qfunctions" => experiments::qfunctions::run(cfg, &params, &out)?,
        "half-release" => experiments::entangle::half_release(cfg, &params, &out)?,
        "fock2-half-release" => experiments::entangle::fock2_half_release(cfg, &params, &out)?,
        "kerr-smearing" => experiments::entangle::kerr_smearing(cfg, &params, &out)?,
        "shaping" => experiments::shaping::run(cfg, &params, &out)?,
        "stark-calibration" => experiments::stark::run(cfg, &params, &out)?,
        other => bail!("experiment '{other}' registered but not wired"),
    };

    let manifest_path = out.join("manifest.json");
    let mut outputs: Vec<String> = std::fs::read_dir(&out)?
        .filter_map(|e| e.ok())
        .map(|e| e.file_name().to_string_lossy().into_owned())
        .filter(|n| n != "manifest.json")
        .collect();
    outputs.sort();
    let manifest = serde_json::json!({
        "experiment": def.name,
        "panel": def.panel,
        "version": env!("CARGO_PKG_VERSION"),
        "seed": cfg.seed,
        "config": cfg,
        "config_hash": config_hash(cfg)?,
        "derived": derived,
        "outputs": outputs,
    });
    std::fs::write(&manifest_path, serde_json::to_string_pretty(&manifest)? + "\n")?;
    Ok(manifest_path)
}

pub fn config_hash(cfg: &RunConfig) -> Result<String> {
    let bytes = serde_json::to_vec(cfg)?;
    let digest = Sha256::digest(&bytes);
    Ok(digest.iter().map(|b| format!("{b:02x}")).collect())
}

pub(crate) fn write_text(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}
