//! Argument parsing and config layering: defaults ← preset ← --config file
//! ← per-command flags ← --override.

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Parser, Subcommand};
use spin_dce::config::Config;
use spin_dce::{Error, Result};

use crate::commands::{self, Command, RunContext};
use crate::presets;

pub const WORKERS_ENV: &str = "SPIN_DCE_WORKERS";

#[derive(Debug, Parser)]
#[command(name = "spin-dce", version, about = "Pair creation in driven spinor condensates")]
pub struct Cli {
    /// TOML config file
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Output directory
    #[arg(long, global = true, default_value = "out")]
    pub out: PathBuf,
    /// RNG seed for the homodyne Monte Carlo
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Worker threads (default: run.workers, then $SPIN_DCE_WORKERS, then all cores)
    #[arg(long, global = true)]
    pub workers: Option<usize>,
    /// Built-in parameter set: fig2b, fig3a, fig3c, fig4, quench-homogeneous
    #[arg(long, global = true)]
    pub preset: Option<String>,
    /// section.key=value, applied last (repeatable)
    #[arg(long = "override", global = true, value_name = "KEY=VALUE")]
    pub overrides: Vec<String>,
    #[command(subcommand)]
    pub cmd: Cmd,
}

#[derive(Debug, Subcommand)]
pub enum Cmd {
    /// Condensate ground state and density cuts
    GroundState,
    /// Effective-potential eigenmodes, overlaps and validity report
    Modes {
        #[arg(long)]
        count: Option<usize>,
    },
    /// Homogeneous quench or modulation trajectory with oracle comparison
    Quench,
    /// Modulation-frequency or static-q scan with peak detection
    Scan {
        #[arg(long)]
        f_min: Option<f64>,
        #[arg(long)]
        f_max: Option<f64>,
        #[arg(long)]
        steps: Option<usize>,
        /// Comma-separated atom numbers
        #[arg(long, value_delimiter = ',')]
        atom_counts: Option<Vec<u64>>,
    },
    /// Quadrature variances and the inseparability witness
    Entangle {
        /// Use a two-mode squeezed vacuum with this r instead of the dynamics
        #[arg(long)]
        tmsv_r: Option<f64>,
        #[arg(long)]
        shots: Option<usize>,
        #[arg(long)]
        theta_steps: Option<usize>,
    },
}

impl Cli {
    fn command(&self) -> Command {
        match self.cmd {
            Cmd::GroundState => Command::GroundState,
            Cmd::Modes { .. } => Command::Modes,
            Cmd::Quench => Command::Quench,
            Cmd::Scan { .. } => Command::Scan,
            Cmd::Entangle { .. } => Command::Entangle,
        }
    }

    fn flag_overrides(&self) -> Vec<String> {
        let mut o = Vec::new();
        let mut push = |k: &str, v: Option<String>| {
            if let Some(v) = v {
                o.push(format!("{k}={v}"));
            }
        };
        match &self.cmd {
            Cmd::Modes { count } => push("modes.count", count.map(|v| v.to_string())),
            Cmd::Scan {
                f_min,
                f_max,
                steps,
                atom_counts,
            } => {
                push("scan.f_min", f_min.map(|v| format!("{v:?}")));
                push("scan.f_max", f_max.map(|v| format!("{v:?}")));
                push("scan.steps", steps.map(|v| v.to_string()));
                push(
                    "scan.atom_counts",
                    atom_counts.as_ref().map(|v| {
                        let s: Vec<String> = v.iter().map(|n| n.to_string()).collect();
                        format!("[{}]", s.join(", "))
                    }),
                );
            }
            Cmd::Entangle {
                tmsv_r,
                shots,
                theta_steps,
            } => {
                push("entangle.tmsv_r", tmsv_r.map(|v| format!("{v:?}")));
                push("entangle.shots", shots.map(|v| v.to_string()));
                push("entangle.theta_steps", theta_steps.map(|v| v.to_string()));
            }
            _ => {}
        }
        push("run.seed", self.seed.map(|v| v.to_string()));
        push("run.workers", self.workers.map(|v| v.to_string()));
        o
    }

    /// Resolves the layered configuration. `env_workers` is the value of
    /// `SPIN_DCE_WORKERS`, used when neither the flag nor the config set it.
    pub fn resolve(&self, env_workers: Option<&str>) -> Result<Config> {
        let mut layers = Vec::new();
        if let Some(p) = &self.preset {
            layers.push(presets::preset_table(p)?);
        }
        if let Some(path) = &self.config {
            let text = std::fs::read_to_string(path)
                .map_err(|e| Error::config("config", format!("cannot read {}: {e}", path.display())))?;
            layers.push(
                text.parse::<toml::Table>()
                    .map_err(|e| Error::config("config", format!("{}: {e}", path.display())))?,
            );
        }
        let mut overrides = self.flag_overrides();
        overrides.extend(self.overrides.iter().cloned());
        let mut cfg = Config::load_layers(layers, &overrides)?;
        if cfg.run.workers.is_none() {
            if let Some(w) = env_workers.filter(|s| !s.trim().is_empty()) {
                let w: usize = w
                    .trim()
                    .parse()
                    .map_err(|_| Error::config("cli", format!("{WORKERS_ENV}='{w}' is not a worker count")))?;
                cfg.run.workers = Some(w);
            }
        }
        if cfg.run.workers == Some(0) {
            return Err(Error::validation("cli", "worker count must be >= 1"));
        }
        Ok(cfg)
    }
}

/// Exit status for an error: 1 for bad input, 2 for numerical failures.
pub fn exit_code(e: &Error) -> i32 {
    if e.is_input_error() {
        1
    } else {
        2
    }
}

/// Parses `args`, runs the command and returns the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 1 } else { 0 };
        }
    };
    let env_workers = std::env::var(WORKERS_ENV).ok();
    let result = cli.resolve(env_workers.as_deref()).and_then(|cfg| {
        let ctx = RunContext {
            out: cli.out.clone(),
            preset: cli.preset.clone(),
        };
        commands::execute(cli.command(), &cfg, &ctx)
    });
    match result {
        Ok(m) => {
            eprintln!(
                "{}: wrote {} files to {} in {:.1} s",
                m.command,
                m.outputs.len() + 1,
                cli.out.display(),
                m.wall_clock_s
            );
            0
        }
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}
