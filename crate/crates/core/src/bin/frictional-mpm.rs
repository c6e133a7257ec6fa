use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use frictional_mpm::driver;
use frictional_mpm::presets::Preset;
use frictional_mpm::scene::{load_scene, write_scene, SceneConfig};

/// Implicit MPM with frictional contact.
#[derive(Parser)]
#[command(version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a scene file (or built-in preset name) and write snapshots plus diagnostics.csv.
    Simulate {
        scene: String,
        #[arg(long)]
        frames: usize,
        #[arg(long)]
        out: PathBuf,
        /// Disable parallelism across bodies and contact pairs.
        #[arg(long)]
        serial: bool,
    },
    /// Mean downhill speed of a block on an incline for several friction coefficients.
    SweepMu {
        scene: String,
        #[arg(long, value_delimiter = ',', required = true)]
        mu: Vec<f64>,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 200)]
        steps: usize,
        #[arg(long)]
        serial: bool,
    },
    /// Built-in scenes.
    Presets {
        #[command(subcommand)]
        action: PresetAction,
    },
}

#[derive(Subcommand)]
enum PresetAction {
    /// Print the available presets.
    List,
    /// Write a preset as scene.toml plus mesh files into a directory.
    Export { name: String, dir: PathBuf },
}

fn resolve_scene(arg: &str) -> Result<SceneConfig, String> {
    let path = Path::new(arg);
    if !path.exists() {
        if let Some(p) = Preset::from_name(arg) {
            return Ok(p.build());
        }
        return Err(format!("{arg}: no such scene file or preset"));
    }
    load_scene(path).map_err(|e| format!("{arg}: {e}"))
}

fn preset(name: &str) -> Result<Preset, String> {
    Preset::from_name(name).ok_or_else(|| format!("unknown preset {name}"))
}

fn execute(cli: Cli) -> Result<(), String> {
    match cli.command {
        Command::Simulate { scene, frames, out, serial } => {
            let scene = resolve_scene(&scene)?;
            let summary = driver::run(scene, frames, &out, !serial).map_err(|e| e.to_string())?;
            match summary.diagnostics_path {
                Some(path) => println!("wrote {} snapshots and {}", summary.snapshots.len(), path.display()),
                None => println!("wrote the initial snapshot"),
            }
        }
        Command::SweepMu { scene, mu, out, steps, serial } => {
            let scene = resolve_scene(&scene)?;
            let points = driver::sweep_mu(&scene, &mu, steps, !serial).map_err(|e| e.to_string())?;
            std::fs::write(&out, driver::sweep_csv(&points)).map_err(|e| format!("{}: {e}", out.display()))?;
            for p in &points {
                println!("mu = {:<5} mean speed = {:+.5} m/s", p.mu, p.mean_speed);
            }
        }
        Command::Presets { action: PresetAction::List } => {
            for p in Preset::ALL {
                println!("{:<16} {:>4} steps  {}", p.name(), p.default_steps(), p.description());
            }
        }
        Command::Presets { action: PresetAction::Export { name, dir } } => {
            let path = write_scene(&preset(&name)?.build(), &dir).map_err(|e| e.to_string())?;
            println!("wrote {}", path.display());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match execute(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
