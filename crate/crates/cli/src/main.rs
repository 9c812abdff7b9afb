use clap::{Parser, Subcommand};
use qlaunch_cli::config::{Overrides, RunConfig};
use qlaunch_cli::{find_experiment, run_experiment, EXPERIMENTS};

/// Simulates the pump-controlled release of multiphoton cavity states and
/// reproduces the measurement chain as CSV data and SVG plots.
#[derive(Parser)]
#[command(name = "qlaunch", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a named experiment.
    Run {
        /// Experiment name; see `list`.
        experiment: String,
        /// Optional TOML file with the same override keys (flags win).
        #[arg(long)]
        config: Option<String>,
        /// RNG seed; identical seeds reproduce identical outputs.
        #[arg(long)]
        seed: Option<u64>,
        /// Heterodyne shot budget, scientific notation accepted ("1e6").
        #[arg(long)]
        shots: Option<String>,
        /// Conversion rate |g|/2pi in kHz.
        #[arg(long)]
        g_khz: Option<f64>,
        /// Pump window in microseconds (0 = derived).
        #[arg(long)]
        duration_us: Option<f64>,
        /// Detection efficiency.
        #[arg(long)]
        eta_det: Option<f64>,
        /// Cavity state (vacuum, fock1, fock2, coh1, 0+1..0+4, cat2+, cat2-).
        #[arg(long)]
        state: Option<String>,
        /// Cavity measurement basis where applicable.
        #[arg(long)]
        basis: Option<String>,
        /// Kerr dwell before readout, microseconds.
        #[arg(long)]
        dwell_us: Option<f64>,
        /// Fock cutoff of the storage/itinerant modes.
        #[arg(long)]
        cutoff: Option<usize>,
        /// Half-span of the detuning sweep in kHz.
        #[arg(long)]
        delta_span_khz: Option<f64>,
        /// Number of sweep points.
        #[arg(long)]
        sweep_points: Option<usize>,
        /// Shaping target: gaussian, flat-top, exponential, or a CSV path.
        #[arg(long)]
        target: Option<String>,
        /// Gaussian target width, microseconds.
        #[arg(long)]
        sigma_us: Option<f64>,
        /// Target photon content.
        #[arg(long)]
        photons: Option<f64>,
        /// Coupling cap |g|/2pi in kHz for the inversion.
        #[arg(long)]
        g_cap_khz: Option<f64>,
        /// Device parameter TOML (defaults to the bundled measured set).
        #[arg(long)]
        params_file: Option<String>,
        /// Output directory (default: $QLAUNCH_OUTPUT_ROOT/<experiment>).
        #[arg(long)]
        out_dir: Option<String>,
    },
    /// List the available experiments.
    List,
    /// Show what an experiment reproduces and its knobs.
    Describe { experiment: String },
}

fn main() {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::List => {
            for e in EXPERIMENTS {
                println!("{:<22} {}", e.name, e.panel);
            }
            Ok(())
        }
        Command::Describe { experiment } => match find_experiment(&experiment) {
            Some(e) => {
                println!("{}\n  reproduces: {}\n  {}", e.name, e.panel, e.about);
                Ok(())
            }
            None => Err(anyhow::anyhow!("unknown experiment '{experiment}'")),
        },
        Command::Run {
            experiment,
            config,
            seed,
            shots,
            g_khz,
            duration_us,
            eta_det,
            state,
            basis,
            dwell_us,
            cutoff,
            delta_span_khz,
            sweep_points,
            target,
            sigma_us,
            photons,
            g_cap_khz,
            params_file,
            out_dir,
        } => {
            let flags = Overrides {
                seed,
                shots,
                g_khz,
                duration_us,
                eta_det,
                state,
                basis,
                dwell_us,
                cutoff,
                delta_span_khz,
                sweep_points,
                target,
                sigma_us,
                photons,
                g_cap_khz,
                params_file,
                out_dir,
            };
            RunConfig::layered(&experiment, config.as_deref(), &flags)
                .and_then(|cfg| run_experiment(&cfg))
                .map(|manifest| {
                    println!("wrote {}", manifest.display());
                })
        }
    };
    if let Err(err) = result {
        // machine-readable error record on stderr, nonzero exit
        let record = serde_json::json!({ "error": format!("{err:#}") });
        eprintln!("{record}");
        std::process::exit(1);
    }
}
