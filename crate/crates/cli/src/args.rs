use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

/// Photon budgets, repeater cost optimization, Bayesian optimization,
/// surrogate uncertainty studies and resonance fits.
#[derive(Debug, Parser)]
#[command(name = "repeater", version)]
pub struct Cli {
    #[command(flatten)]
    pub global: Global,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct Global {
    /// Seed for every random draw.
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,
    /// Worker threads; all cores when absent.
    #[arg(long, global = true, env = "REPEATER_BUDGET_THREADS")]
    pub threads: Option<usize>,
    /// Output file; stdout when absent.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Scenario JSON; built-in defaults when absent.
    #[arg(long, global = true)]
    pub scenario: Option<PathBuf>,
    /// JSON array of emitters replacing or extending the built-in presets by name.
    #[arg(long, global = true)]
    pub presets: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Efficiency chain of the scenario plus a preset table.
    Budget,
    /// Optimal repeater configuration over a grid of emitter efficiencies (CSV).
    Sweep(SweepArgs),
    /// Optimal repeater configuration at one emitter efficiency (JSON).
    Optimize(OptimizeArgs),
    /// Bayesian optimization.
    #[command(subcommand)]
    Bo(BoCommand),
    /// Surrogate Monte Carlo uncertainty analysis.
    #[command(subcommand)]
    Uq(UqCommand),
    /// Lorentzian fit of a transmission spectrum, or Q of a complex eigenfrequency.
    Resfit(ResfitArgs),
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    #[arg(long)]
    pub from: Option<f64>,
    #[arg(long)]
    pub to: Option<f64>,
    #[arg(long)]
    pub steps: Option<usize>,
    /// Report rates with the scenario's `tau_ph_s` instead of the Purcell-enhanced lifetime.
    #[arg(long)]
    pub fixed_emission: bool,
    /// Evaluate every station count instead of skipping bounded-out blocks.
    #[arg(long)]
    pub no_prune: bool,
}

#[derive(Debug, Args)]
pub struct OptimizeArgs {
    /// Emitter efficiency; taken from the scenario's chain when absent.
    #[arg(long)]
    pub eta: Option<f64>,
    #[arg(long)]
    pub no_prune: bool,
}

#[derive(Debug, Subcommand)]
pub enum BoCommand {
    /// Minimize a built-in objective and write the trace (CSV).
    Run(BoArgs),
}

#[derive(Debug, Args)]
pub struct BoArgs {
    /// `builtin:quadratic` or `builtin:abs`.
    #[arg(long, default_value = "builtin:quadratic")]
    pub objective: String,
    #[arg(long, default_value_t = 2)]
    pub dim: usize,
    /// Total number of objective evaluations.
    #[arg(long, default_value_t = 60)]
    pub budget: usize,
    /// Size of the space-filling initial design.
    #[arg(long)]
    pub init_count: Option<usize>,
}

#[derive(Debug, Subcommand)]
pub enum UqCommand {
    /// Percentiles of a surrogate prediction under device scatter (JSON).
    Study(UqArgs),
}

#[derive(Debug, Args)]
pub struct UqArgs {
    /// GP model JSON, or `builtin:resonance` to train a surrogate of the synthetic response.
    #[arg(long, default_value = "builtin:resonance")]
    pub model: String,
    /// Device distribution JSON `{"mean": [..], "std": [..]}`.
    #[arg(long)]
    pub device: Option<PathBuf>,
    /// Monte Carlo settings JSON `{"delta_n", "n_min", "sigma_lb"}`.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Training points of the built-in study.
    #[arg(long, default_value_t = 349)]
    pub w_train: usize,
    /// Training spread as a multiple of the device spread, for every dimension.
    #[arg(long)]
    pub kappa: Option<f64>,
    /// Keep only predictions above this value.
    #[arg(long)]
    pub validity_above: Option<f64>,
    /// Skip the training-set outlier filter.
    #[arg(long)]
    pub no_filter: bool,
}

#[derive(Debug, Args)]
pub struct ResfitArgs {
    /// CSV with columns `frequency_hz,transmission`.
    #[arg(long)]
    pub input: Option<PathBuf>,
    /// Hold the baseline at this transmission.
    #[arg(long)]
    pub fixed_offset: Option<f64>,
    /// Real part of a complex eigenfrequency [Hz].
    #[arg(long, requires = "im", allow_hyphen_values = true)]
    pub re: Option<f64>,
    /// Imaginary part of a complex eigenfrequency [Hz].
    #[arg(long, requires = "re", allow_hyphen_values = true)]
    pub im: Option<f64>,
}
