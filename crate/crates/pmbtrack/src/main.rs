//! Command line front end: track detection files, generate synthetic
//! scenarios, evaluate track files, and write starter configurations.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use pmbtrack::config::RunConfig;
use pmbtrack::io::{group_detections, load_tracks, run_tracker, write_detections, write_tracks};
use pmbtrack::metrics::{amota, clear_metrics};
use pmbtrack::sim::{desk_scenario, simulate, ScenarioConfig};
use pmbtrack::Result;

#[derive(Parser)]
#[command(
    name = "pmbtrack",
    version,
    about = "Multi-object tracking over detection files"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum ConfigPreset {
    /// Multi-class setup tuned for dense urban detection streams.
    Tuned,
    /// Single-class car setup for sparser, faster-moving scenes.
    Kitti,
}

#[derive(Subcommand)]
enum Command {
    /// Run the tracker over a detection file and write a track file.
    Track {
        /// Tracker configuration in TOML; omit for the tuned default.
        #[arg(long)]
        config: Option<PathBuf>,
        /// Input detection file.
        #[arg(long)]
        input: PathBuf,
        /// Output track file.
        #[arg(long)]
        output: PathBuf,
    },
    /// Generate ground-truth and detection files for a scenario.
    Simulate {
        /// Scenario description in TOML; omit for the built-in desk scenario.
        #[arg(long)]
        scenario: Option<PathBuf>,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        /// Output ground-truth track file.
        #[arg(long)]
        out_truth: PathBuf,
        /// Output detection file.
        #[arg(long)]
        out_detections: PathBuf,
    },
    /// Score a track file against ground truth.
    Evaluate {
        /// Ground-truth track file.
        #[arg(long)]
        truth: PathBuf,
        /// Track file to score.
        #[arg(long)]
        tracks: PathBuf,
        /// Center-distance match cutoff in meters.
        #[arg(long, default_value_t = 2.0)]
        d0: f64,
        /// Recall grid resolution for the averaged accuracy.
        #[arg(long, default_value_t = 40)]
        recall_steps: u32,
    },
    /// Write a starter tracker configuration.
    InitConfig {
        #[arg(long)]
        output: PathBuf,
        #[arg(long, value_enum, default_value_t = ConfigPreset::Tuned)]
        preset: ConfigPreset,
    },
    /// Write the built-in desk scenario for editing.
    InitScenario {
        #[arg(long)]
        output: PathBuf,
    },
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Track {
            config,
            input,
            output,
        } => {
            let config = match config {
                Some(path) => RunConfig::load(&path)?,
                None => RunConfig::default_tuned(),
            };
            let summary = run_tracker(&config, &input, &output)?;
            println!("frames {}", summary.frames);
            println!("tracks_emitted {}", summary.tracks_emitted);
            println!("unique_track_ids {}", summary.unique_track_ids);
            println!("wall_ms {}", summary.wall.as_millis());
        }
        Command::Simulate {
            scenario,
            seed,
            out_truth,
            out_detections,
        } => {
            let scenario = match scenario {
                Some(path) => {
                    let text = std::fs::read_to_string(&path)
                        .map_err(|e| pmbtrack::Error::io(&path, e))?;
                    ScenarioConfig::from_toml_str(&text)?
                }
                None => desk_scenario(),
            };
            let (truth, stream) = simulate(&scenario, seed)?;
            write_tracks(&out_truth, &truth)?;
            write_detections(&out_detections, &group_detections(&stream))?;
            println!("truth_records {}", truth.len());
            println!("detections {}", stream.len());
        }
        Command::Evaluate {
            truth,
            tracks,
            d0,
            recall_steps,
        } => {
            let truth = load_tracks(&truth)?;
            let tracks = load_tracks(&tracks)?;
            let m = clear_metrics(&truth, &tracks, d0);
            println!("gt_count {}", m.gt_count);
            println!("tp {}", m.tp);
            println!("fp {}", m.fp);
            println!("misses {}", m.misses);
            println!("id_switches {}", m.id_switches);
            println!("mota {}", m.mota);
            println!("motp {}", m.motp);
            println!("amota {}", amota(&truth, &tracks, d0, recall_steps));
        }
        Command::InitConfig { output, preset } => {
            let config = match preset {
                ConfigPreset::Tuned => RunConfig::default_tuned(),
                ConfigPreset::Kitti => RunConfig::kitti_car(),
            };
            std::fs::write(&output, config.to_toml_string())
                .map_err(|e| pmbtrack::Error::io(&output, e))?;
            println!("wrote {}", output.display());
        }
        Command::InitScenario { output } => {
            std::fs::write(&output, desk_scenario().to_toml_string()?)
                .map_err(|e| pmbtrack::Error::io(&output, e))?;
            println!("wrote {}", output.display());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
