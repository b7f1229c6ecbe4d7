use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use cqmap_core::dynamics::FlipRule;

#[derive(Debug, Parser)]
#[command(
    name = "cqmap",
    version,
    about = "Classical master equations and stoquastic quantum Hamiltonians of Ising models"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Model description files and Walsh coefficients.
    #[command(subcommand)]
    Model(ModelCommand),
    /// Spin-flip generators and master-equation evolution.
    #[command(subcommand)]
    Dynamics(DynamicsCommand),
    /// Classical/quantum mappings.
    #[command(subcommand)]
    Map(MapCommand),
    /// Eigenvalues, gap sweeps and scaling fits.
    #[command(subcommand)]
    Spectrum(SpectrumCommand),
    /// Simulated and quantum annealing runs.
    #[command(subcommand)]
    Anneal(AnnealCommand),
    /// Same as `spectrum fit`.
    #[command(hide = true)]
    Fit(FitArgs),
}

#[derive(Debug, Args)]
pub struct ModelIn {
    /// Model description (JSON).
    #[arg(long)]
    pub model: PathBuf,
}

#[derive(Debug, Args)]
pub struct Out {
    /// Output file; stdout when omitted.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct Thermal {
    /// Inverse temperature.
    #[arg(long)]
    pub beta: f64,
    /// Flip rule: heat-bath (alias glauber) or metropolis.
    #[arg(long, default_value = "heat-bath")]
    pub rule: FlipRule,
}

#[derive(Debug, Subcommand)]
pub enum ModelCommand {
    /// Check a model file and print its size and ground energy.
    Validate {
        #[command(flatten)]
        model: ModelIn,
    },
    /// Dump Walsh coefficients as CSV (mask,order,coefficient).
    Coeffs {
        #[command(flatten)]
        model: ModelIn,
        #[command(flatten)]
        out: Out,
    },
}

#[derive(Debug, Subcommand)]
pub enum DynamicsCommand {
    /// Write the generator W in sparse coordinate format.
    Generator {
        #[command(flatten)]
        model: ModelIn,
        #[command(flatten)]
        thermal: Thermal,
        #[command(flatten)]
        out: Out,
    },
    /// Integrate the master equation at fixed β and write a trajectory CSV.
    Evolve {
        #[command(flatten)]
        model: ModelIn,
        #[command(flatten)]
        thermal: Thermal,
        /// Final time.
        #[arg(long)]
        t_max: f64,
        /// Number of output intervals.
        #[arg(long, default_value_t = 100)]
        steps: usize,
        /// Initial state: `uniform` or a configuration index.
        #[arg(long, default_value = "uniform")]
        init: String,
        #[command(flatten)]
        out: Out,
    },
    /// Check a generator file against the Gibbs distribution of a model.
    Verify {
        #[command(flatten)]
        model: ModelIn,
        /// Generator in sparse coordinate format.
        #[arg(long)]
        generator: PathBuf,
        /// Inverse temperature of the target Gibbs distribution.
        #[arg(long)]
        beta: f64,
        #[arg(long, default_value_t = 1e-12)]
        tol: f64,
        #[command(flatten)]
        out: Out,
    },
}

#[derive(Debug, Subcommand)]
pub enum MapCommand {
    /// Classical generator to stoquastic Hamiltonian.
    C2q {
        #[command(flatten)]
        model: ModelIn,
        #[command(flatten)]
        thermal: Thermal,
        #[command(flatten)]
        out: Out,
    },
    /// Stoquastic Hamiltonian to classical energy and generator.
    Q2c {
        /// Hamiltonian in sparse coordinate format.
        #[arg(long)]
        hamiltonian: PathBuf,
        /// Stoquasticity tolerance on positive off-diagonals.
        #[arg(long, default_value_t = 1e-12)]
        tol: f64,
        /// Also write the recovered coefficients (CSV).
        #[arg(long)]
        coeffs_out: Option<PathBuf>,
        /// Also write the recovered generator (sparse coordinate).
        #[arg(long)]
        generator_out: Option<PathBuf>,
        #[command(flatten)]
        out: Out,
    },
    /// Map a model to the quantum side and back, reporting residuals.
    Roundtrip {
        #[command(flatten)]
        model: ModelIn,
        #[command(flatten)]
        thermal: Thermal,
        /// Residual above which the command fails.
        #[arg(long, default_value_t = 1e-8)]
        tol: f64,
        #[command(flatten)]
        out: Out,
    },
    /// Compare the mapped heat-bath ring with its closed form.
    ChainOracle {
        /// Ring length (at least 3).
        #[arg(long)]
        n: usize,
        #[arg(long)]
        beta: f64,
        #[arg(long, default_value_t = 1e-12)]
        tol: f64,
        #[command(flatten)]
        out: Out,
    },
}

#[derive(Debug, Args)]
pub struct SpectrumInput {
    /// Hamiltonian in sparse coordinate format.
    #[arg(long, conflicts_with = "model")]
    pub hamiltonian: Option<PathBuf>,
    /// Model to map at `--beta` with `--rule`.
    #[arg(long, requires = "beta")]
    pub model: Option<PathBuf>,
    #[arg(long)]
    pub beta: Option<f64>,
    #[arg(long, default_value = "heat-bath")]
    pub rule: FlipRule,
}

#[derive(Debug, Args)]
pub struct FitArgs {
    /// CSV with `size` and `tau` columns, as written by `spectrum sweep`.
    #[arg(long)]
    pub table: PathBuf,
    #[command(flatten)]
    pub out: Out,
}

#[derive(Debug, Subcommand)]
pub enum SpectrumCommand {
    /// Full dense diagonalization.
    Dense {
        #[command(flatten)]
        input: SpectrumInput,
        /// Keep only the lowest k eigenvalues.
        #[arg(long)]
        k: Option<usize>,
        #[command(flatten)]
        out: Out,
    },
    /// Lanczos for the lowest k eigenpairs.
    Iterative {
        #[command(flatten)]
        input: SpectrumInput,
        #[arg(long, default_value_t = 2)]
        k: usize,
        #[arg(long, default_value_t = 20_000)]
        max_iter: usize,
        #[arg(long, default_value_t = 1e-8)]
        tol: f64,
        #[command(flatten)]
        out: Out,
    },
    /// Gap and relaxation time across system sizes.
    Sweep {
        /// Lattice family: chain or grid (size L means L×L).
        #[arg(long, default_value = "chain")]
        family: String,
        /// Comma-separated sizes.
        #[arg(long, value_delimiter = ',', required = true)]
        sizes: Vec<usize>,
        #[command(flatten)]
        thermal: Thermal,
        /// Coupling J.
        #[arg(long, default_value_t = 1.0)]
        coupling: f64,
        /// Field h.
        #[arg(long, default_value_t = 0.0)]
        field: f64,
        /// Open instead of periodic boundaries.
        #[arg(long)]
        open: bool,
        #[command(flatten)]
        out: Out,
    },
    /// Polynomial and exponential fits of τ against size.
    Fit(FitArgs),
}

#[derive(Debug, Args)]
pub struct ScheduleArgs {
    /// linear, power or logarithmic.
    #[arg(long, default_value = "linear")]
    pub schedule: String,
    /// Comma-separated schedule parameters.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pub params: Vec<f64>,
    /// Total annealing time T.
    #[arg(long)]
    pub horizon: f64,
    /// Number of output intervals.
    #[arg(long, default_value_t = 100)]
    pub steps: usize,
}

#[derive(Debug, Subcommand)]
pub enum AnnealCommand {
    /// Master equation with β following the schedule.
    Sa {
        #[command(flatten)]
        model: ModelIn,
        #[command(flatten)]
        schedule: ScheduleArgs,
        #[arg(long, default_value = "heat-bath")]
        rule: FlipRule,
        #[command(flatten)]
        out: Out,
    },
    /// Schrödinger evolution with Γ following the schedule.
    Qa {
        #[command(flatten)]
        model: ModelIn,
        #[command(flatten)]
        schedule: ScheduleArgs,
        #[command(flatten)]
        out: Out,
    },
    /// Run both on one model and report the difference.
    Compare {
        #[command(flatten)]
        model: ModelIn,
        #[arg(long)]
        horizon: f64,
        #[arg(long, default_value_t = 100)]
        steps: usize,
        #[arg(long, default_value = "linear")]
        sa_schedule: String,
        #[arg(long, value_delimiter = ',', default_value = "0.1,3")]
        sa_params: Vec<f64>,
        #[arg(long, default_value = "linear")]
        qa_schedule: String,
        #[arg(long, value_delimiter = ',', default_value = "5,0")]
        qa_params: Vec<f64>,
        #[arg(long, default_value = "heat-bath")]
        rule: FlipRule,
        #[command(flatten)]
        out: Out,
    },
}
