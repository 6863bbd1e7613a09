use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Debug, Parser)]
#[command(name = "pwaq", version, about = "Quantized feedback control of piecewise-affine systems")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// One-step successor map as JSON.
    Reach(ReachArgs),
    /// Lyapunov certificate, stability constants and zoom rate.
    Certify(CertifyArgs),
    /// Design gains and a piecewise-quadratic certificate.
    Synth(SynthArgs),
    /// Closed-loop simulation with CSV and SVG output.
    Simulate(SimulateArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum MethodArg {
    Sbar,
    Stilde,
    Tfree,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ChannelArg {
    #[value(name = "D")]
    D,
    #[value(name = "B")]
    B,
    #[value(name = "BK")]
    Bk,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum QuantModeArg {
    Input,
    State,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SimModeArg {
    Input,
    State,
    Disturbed,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum VariantArg {
    Asym,
    Iss,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SourceArg {
    Uniform,
    Corner,
}

#[derive(Debug, Args)]
pub struct ReachArgs {
    pub file: PathBuf,
    #[arg(long, value_enum, default_value = "sbar")]
    pub method: MethodArg,
    /// Disturbance bound; defaults to the quantizer's Δ.
    #[arg(long)]
    pub delta: Option<f64>,
    #[arg(long, value_enum, default_value = "BK")]
    pub channel: ChannelArg,
}

#[derive(Debug, Args, Clone)]
pub struct CertifyArgs {
    pub file: PathBuf,
    #[arg(long, default_value_t = 0.01)]
    pub eps: f64,
    #[arg(long = "delta-param", default_value_t = 0.49)]
    pub delta_param: f64,
    #[arg(long, value_enum, default_value = "state")]
    pub mode: QuantModeArg,
    /// Controller and Lyapunov pieces from a previous `synth` run.
    #[arg(long)]
    pub artifact: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    pub file: PathBuf,
    #[arg(long, value_enum, default_value = "asym")]
    pub variant: VariantArg,
    /// `I:TARGET` with `I` a 1-based cell or `all`, and `TARGET` one of `X`,
    /// `cellJ` or a JSON polytope file.
    #[arg(long = "confine")]
    pub confine: Vec<String>,
    #[arg(long = "max-iter", default_value_t = 50)]
    pub max_iter: usize,
    #[arg(long, value_enum, default_value = "BK")]
    pub channel: ChannelArg,
    #[arg(long)]
    pub delta: Option<f64>,
    #[arg(long, default_value_t = 2.0)]
    pub nu1: f64,
    #[arg(long, default_value_t = 2.0)]
    pub nu2: f64,
    /// Where to write the controller artifact.
    #[arg(long, short)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    pub file: PathBuf,
    #[arg(long, value_enum, default_value = "state")]
    pub mode: SimModeArg,
    /// Comma-separated initial state.
    #[arg(long, allow_hyphen_values = true)]
    pub x0: String,
    #[arg(long, default_value_t = 10_000)]
    pub steps: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, value_enum, default_value = "uniform")]
    pub source: SourceArg,
    #[arg(long)]
    pub delta: Option<f64>,
    #[arg(long, default_value_t = 1.0)]
    pub mu0: f64,
    #[arg(long)]
    pub requantize: bool,
    #[arg(long, default_value_t = 0.01)]
    pub eps: f64,
    #[arg(long = "delta-param", default_value_t = 0.49)]
    pub delta_param: f64,
    #[arg(long)]
    pub artifact: Option<PathBuf>,
    #[arg(long)]
    pub csv: Option<PathBuf>,
    #[arg(long)]
    pub svg: Option<PathBuf>,
    /// Run even when the stability conditions fail and report the flags
    /// instead of exiting with the protocol code.
    #[arg(long)]
    pub force: bool,
}
