//! Run configuration: defaults, optional config file, and flag overrides
//! (flags win over the file; both win over defaults).
//!
//! Units at this boundary: frequencies in kHz (as nu = omega/2pi), times in
//! microseconds. The core crate works in rad/s and seconds.

use std::path::PathBuf;

use anyhow::{Context, Result};
use serde::{Deserialize, Serialize};

use qlaunch::SystemParams;

pub const OUTPUT_ROOT_ENV: &str = "QLAUNCH_OUTPUT_ROOT";

#[derive(Debug, Clone, Serialize)]
pub struct RunConfig {
    pub experiment: String,
    pub seed: u64,
    pub shots: usize,
    /// Conversion rate |g|/2pi in kHz.
    pub g_khz: f64,
    /// Pump window in microseconds; 0 means "derived from g".
    pub duration_us: f64,
    pub eta_det: f64,
    pub state: String,
    pub basis: String,
    pub dwell_us: f64,
    pub cutoff: usize,
    pub delta_span_khz: f64,
    pub sweep_points: usize,
    pub target: String,
    pub sigma_us: f64,
    pub photons: f64,
    pub g_cap_khz: f64,
    pub params_file: Option<String>,
    pub out_dir: Option<String>,
}

impl RunConfig {
    pub fn defaults(experiment: &str) -> Self {
        RunConfig {
            experiment: experiment.to_string(),
            seed: 1,
            shots: 100_000,
            g_khz: match experiment {
                "qswitch-decay" => 54.0,
                "fock-ladder" | "detuning-sweep" => 54.0,
                _ => 164.0,
            },
            duration_us: 0.0,
            eta_det: 0.43,
            state: match experiment {
                "release-qfunctions" => "coh1".into(),
                "kerr-smearing" => "cat2+".into(),
                _ => "fock1".into(),
            },
            basis: "number".into(),
            dwell_us: 3.0,
            cutoff: 15,
            delta_span_khz: 900.0,
            sweep_points: 25,
            target: "gaussian".into(),
            sigma_us: 0.5,
            photons: 0.9,
            g_cap_khz: 400.0,
            params_file: None,
            out_dir: None,
        }
    }

    /// Apply the optional config file, then the flag overrides on top.
    pub fn layered(experiment: &str, file: Option<&str>, flags: &Overrides) -> Result<Self> {
        let mut cfg = Self::defaults(experiment);
        if let Some(path) = file {
            let text = std::fs::read_to_string(path)
                .with_context(|| format!("reading config file {path}"))?;
            let file_over: Overrides =
                toml::from_str(&text).with_context(|| format!("parsing config file {path}"))?;
            file_over.apply(&mut cfg);
        }
        flags.apply(&mut cfg);
        Ok(cfg)
    }

    pub fn load_params(&self) -> Result<SystemParams> {
        match &self.params_file {
            Some(path) => {
                SystemParams::from_toml_file(path).with_context(|| format!("loading {path}"))
            }
            None => Ok(SystemParams::bundled()),
        }
    }

    pub fn resolve_out_dir(&self) -> PathBuf {
        if let Some(dir) = &self.out_dir {
            return PathBuf::from(dir);
        }
        let root = std::env::var(OUTPUT_ROOT_ENV).unwrap_or_else(|_| "runs".to_string());
        PathBuf::from(root).join(&self.experiment)
    }
}

/// Optional overrides from the config file or the command line.
#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub shots: Option<String>,
    pub g_khz: Option<f64>,
    pub duration_us: Option<f64>,
    pub eta_det: Option<f64>,
    pub state: Option<String>,
    pub basis: Option<String>,
    pub dwell_us: Option<f64>,
    pub cutoff: Option<usize>,
    pub delta_span_khz: Option<f64>,
    pub sweep_points: Option<usize>,
    pub target: Option<String>,
    pub sigma_us: Option<f64>,
    pub photons: Option<f64>,
    pub g_cap_khz: Option<f64>,
    pub params_file: Option<String>,
    pub out_dir: Option<String>,
}

impl Overrides {
    pub fn apply(&self, cfg: &mut RunConfig) {
        if let Some(v) = self.seed {
            cfg.seed = v;
        }
        if let Some(v) = &self.shots {
            if let Ok(n) = parse_shots(v) {
                cfg.shots = n;
            }
        }
        if let Some(v) = self.g_khz {
            cfg.g_khz = v;
        }
        if let Some(v) = self.duration_us {
            cfg.duration_us = v;
        }
        if let Some(v) = self.eta_det {
            cfg.eta_det = v;
        }
        if let Some(v) = &self.state {
            cfg.state = v.clone();
        }
        if let Some(v) = &self.basis {
            cfg.basis = v.clone();
        }
        if let Some(v) = self.dwell_us {
            cfg.dwell_us = v;
        }
        if let Some(v) = self.cutoff {
            cfg.cutoff = v;
        }
        if let Some(v) = self.delta_span_khz {
            cfg.delta_span_khz = v;
        }
        if let Some(v) = self.sweep_points {
            cfg.sweep_points = v;
        }
        if let Some(v) = &self.target {
            cfg.target = v.clone();
        }
        if let Some(v) = self.sigma_us {
            cfg.sigma_us = v;
        }
        if let Some(v) = self.photons {
            cfg.photons = v;
        }
        if let Some(v) = self.g_cap_khz {
            cfg.g_cap_khz = v;
        }
        if let Some(v) = &self.params_file {
            cfg.params_file = Some(v.clone());
        }
        if let Some(v) = &self.out_dir {
            cfg.out_dir = Some(v.clone());
        }
    }
}

/// Shot counts accept scientific notation ("1e6").
pub fn parse_shots(s: &str) -> Result<usize> {
    let v: f64 = s.parse().with_context(|| format!("bad shot count '{s}'"))?;
    if !v.is_finite() || !(1.0..=1e9).contains(&v) {
        anyhow::bail!("shot count {s} outside [1, 1e9]");
    }
    Ok(v.round() as usize)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn shots_accept_scientific_notation() {
        assert_eq!(parse_shots("1e6").unwrap(), 1_000_000);
        assert_eq!(parse_shots("250000").unwrap(), 250_000);
        assert!(parse_shots("0").is_err());
        assert!(parse_shots("nope").is_err());
    }

    #[test]
    fn flags_win_over_file() {
        let dir = tempfile::tempdir().unwrap();
        let file = dir.path().join("run.toml");
        std::fs::write(&file, "seed = 5\ng_khz = 25.0\n").unwrap();
        let flags = Overrides {
            g_khz: Some(54.0),
            ..Default::default()
        };
        let cfg =
            RunConfig::layered("qswitch-decay", Some(file.to_str().unwrap()), &flags).unwrap();
        assert_eq!(cfg.seed, 5); // from the file
        assert_eq!(cfg.g_khz, 54.0); // flag wins
    }
}
