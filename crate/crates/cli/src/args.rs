//! Command-line flags. Every subcommand's arguments double as its recorded
//! run configuration, so the serde and clap views stay in lockstep.

use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use diffwalker::learning::{BackwardMode, LossConfig};
use diffwalker::{SeedMode, SolverConfig, SolverMethod};
use serde::{Deserialize, Serialize};

pub const THREADS_ENV: &str = "DIFFWALKER_THREADS";

#[derive(Debug, Parser)]
#[command(
    name = "diffwalker",
    version,
    about = "Seeded random walker segmentation with learned edge weights"
)]
pub struct Cli {
    /// Worker threads for parallel solves. DIFFWALKER_THREADS takes
    /// precedence when set; the default is one per hardware thread.
    #[arg(long, global = true)]
    pub threads: Option<usize>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Segment an image from seeds with fixed edge weights.
    Solve(SolveArgs),
    /// Fit one weight per edge to a ground-truth labeling.
    Train(TrainArgs),
    /// Score a segmentation against ground truth (VOI and ARAND).
    Eval(EvalArgs),
    /// Place oracle seeds inside every ground-truth segment.
    Seed(SeedArgs),
    /// Seeded watershed on a boundary map.
    Watershed(WatershedArgs),
    /// Mark pixels whose matched segment disagrees with ground truth.
    ErrorMap(ErrorMapArgs),
    /// Re-run a command from a saved run.json.
    Replay(ReplayArgs),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SolverChoice {
    /// Direct solve up to --cg-threshold unknowns, conjugate gradients above.
    Auto,
    Cholesky,
    Cg,
}

#[derive(Clone, Debug, PartialEq, Args, Serialize, Deserialize)]
pub struct SolverArgs {
    #[arg(long = "solver", value_enum, default_value_t = SolverChoice::Auto)]
    pub method: SolverChoice,
    /// Relative residual target for conjugate gradients.
    #[arg(long, default_value_t = 1e-10)]
    pub cg_tolerance: f64,
    /// Conjugate-gradient iteration cap, as a multiple of the unknown count.
    #[arg(long, default_value_t = 10)]
    pub cg_max_iter_factor: usize,
    /// Unknown count above which --solver auto switches to conjugate gradients.
    #[arg(long, default_value_t = 65_536)]
    pub cg_threshold: usize,
}

impl SolverArgs {
    pub fn config(&self) -> SolverConfig {
        SolverConfig {
            method: match self.method {
                SolverChoice::Auto => SolverMethod::Auto,
                SolverChoice::Cholesky => SolverMethod::Cholesky,
                SolverChoice::Cg => SolverMethod::ConjugateGradient,
            },
            cg_tolerance: self.cg_tolerance,
            cg_max_iter_factor: self.cg_max_iter_factor,
            cg_threshold: self.cg_threshold,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Args, Serialize, Deserialize)]
#[command(group = clap::ArgGroup::new("input").required(true).args(["weights", "image"]))]
pub struct SolveArgs {
    /// Edge weights file written by `train`.
    #[arg(long, conflicts_with_all = ["image", "beta"])]
    pub weights: Option<PathBuf>,
    /// Intensity image (PGM or CSV grid); weights are exp(-beta * diff²).
    #[arg(long, requires = "beta")]
    pub image: Option<PathBuf>,
    #[arg(long, requires = "image")]
    pub beta: Option<f64>,
    /// Seeds CSV with header row,col,label.
    #[arg(long)]
    pub seeds: PathBuf,
    #[command(flatten)]
    pub solver: SolverArgs,
    #[arg(long)]
    #[serde(skip)]
    pub out_dir: PathBuf,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SeedModeArg {
    /// One seed pixel per segment.
    Sparse,
    /// Every pixel deep inside a segment.
    Extended,
}

impl From<SeedModeArg> for SeedMode {
    fn from(mode: SeedModeArg) -> Self {
        match mode {
            SeedModeArg::Sparse => SeedMode::Sparse,
            SeedModeArg::Extended => SeedMode::Extended,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TrainMode {
    /// Full gradient through the adjoint solves.
    Exact,
    /// Tangent solves on --n random edges per step.
    Sampled,
    /// As sampled, keeping only the dominant label per edge.
    Pruned,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum LossChoice {
    /// Cross-entropy plus a cross-entropy term on boundary edge weights.
    SideCe,
    /// Cross-entropy plus a log-barrier on the weights.
    LogBarrier,
}

#[derive(Clone, Debug, PartialEq, Args, Serialize, Deserialize)]
pub struct TrainArgs {
    /// Intensity image; only its shape is checked, since every edge has its
    /// own free parameter.
    #[arg(long)]
    pub image: Option<PathBuf>,
    /// Ground-truth label image (PGM or CSV grid).
    #[arg(long)]
    pub gt: PathBuf,
    /// Seeds CSV; oracle seeds from the ground truth when omitted.
    #[arg(long, conflicts_with = "seed_mode")]
    pub seeds: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub seed_mode: Option<SeedModeArg>,
    /// Drives oracle seed placement and edge sampling.
    #[arg(long, default_value_t = 0)]
    pub rng_seed: u64,
    #[arg(long, value_enum, default_value_t = TrainMode::Exact)]
    pub mode: TrainMode,
    /// Edges sampled per step in sampled and pruned modes.
    #[arg(long, default_value_t = diffwalker::gradient::DEFAULT_SAMPLES)]
    pub n: usize,
    /// Scale sampled gradients by |E|/n.
    #[arg(long)]
    pub rescale: bool,
    #[arg(long, default_value_t = 500)]
    pub epochs: usize,
    #[arg(long, value_enum, default_value_t = LossChoice::SideCe)]
    pub loss: LossChoice,
    /// Weight of the side term; the loss's default when omitted.
    #[arg(long)]
    pub alpha: Option<f64>,
    /// Weight of the parameter penalty; the loss's default when omitted.
    #[arg(long)]
    pub reg: Option<f64>,
    #[arg(long, default_value_t = 1e-2)]
    pub lr: f64,
    /// Stop once the loss moves less than this fraction over --window steps.
    #[arg(long, default_value_t = 1e-6)]
    pub rel_tol: f64,
    #[arg(long, default_value_t = 10)]
    pub window: usize,
    /// Always run the full --epochs.
    #[arg(long)]
    pub no_early_stop: bool,
    #[arg(long, default_value_t = 0.5)]
    pub initial_weight: f64,
    /// Boundary tolerance in pixels for the final evaluation.
    #[arg(long, default_value_t = diffwalker::metrics::DEFAULT_TOLERANCE)]
    pub tolerance: usize,
    #[command(flatten)]
    pub solver: SolverArgs,
    #[arg(long)]
    #[serde(skip)]
    pub out_dir: PathBuf,
}

impl TrainArgs {
    pub fn backward(&self) -> BackwardMode {
        match self.mode {
            TrainMode::Exact => BackwardMode::Adjoint,
            TrainMode::Sampled => BackwardMode::Sampled { n: self.n },
            TrainMode::Pruned => BackwardMode::SampledPruned { n: self.n },
        }
    }

    pub fn loss_config(&self) -> LossConfig {
        match self.loss {
            LossChoice::SideCe => {
                let LossConfig::SideCe { alpha, gamma } = LossConfig::side_ce() else {
                    unreachable!()
                };
                LossConfig::SideCe {
                    alpha: self.alpha.unwrap_or(alpha),
                    gamma: self.reg.unwrap_or(gamma),
                }
            }
            LossChoice::LogBarrier => {
                let LossConfig::LogBarrier { alpha, beta } = LossConfig::log_barrier() else {
                    unreachable!()
                };
                LossConfig::LogBarrier {
                    alpha: self.alpha.unwrap_or(alpha),
                    beta: self.reg.unwrap_or(beta),
                }
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq, Args, Serialize, Deserialize)]
pub struct EvalArgs {
    /// Predicted label image.
    #[arg(long)]
    pub pred: PathBuf,
    #[arg(long)]
    pub gt: PathBuf,
    /// Pixels within this Chebyshev distance minus one of a ground-truth
    /// boundary are ignored; 0 scores every pixel.
    #[arg(long, default_value_t = diffwalker::metrics::DEFAULT_TOLERANCE)]
    pub tolerance: usize,
    #[arg(long)]
    #[serde(skip)]
    pub out_dir: PathBuf,
}

#[derive(Clone, Debug, PartialEq, Args, Serialize, Deserialize)]
pub struct SeedArgs {
    #[arg(long)]
    pub gt: PathBuf,
    #[arg(long, value_enum, default_value_t = SeedModeArg::Sparse)]
    pub mode: SeedModeArg,
    #[arg(long, default_value_t = 0)]
    pub rng_seed: u64,
    #[arg(long)]
    #[serde(skip)]
    pub out_dir: PathBuf,
}

#[derive(Clone, Debug, PartialEq, Args, Serialize, Deserialize)]
pub struct WatershedArgs {
    /// Boundary strength map; floods proceed from low to high values.
    #[arg(long)]
    pub boundary: PathBuf,
    #[arg(long)]
    pub seeds: PathBuf,
    #[arg(long)]
    #[serde(skip)]
    pub out_dir: PathBuf,
}

#[derive(Clone, Debug, PartialEq, Args, Serialize, Deserialize)]
pub struct ErrorMapArgs {
    #[arg(long)]
    pub pred: PathBuf,
    #[arg(long)]
    pub gt: PathBuf,
    #[arg(long)]
    #[serde(skip)]
    pub out_dir: PathBuf,
}

#[derive(Clone, Debug, PartialEq, Args)]
pub struct ReplayArgs {
    /// A run.json written by an earlier command.
    pub run: PathBuf,
    /// Where to write outputs; defaults to the directory holding run.json.
    #[arg(long)]
    pub out_dir: Option<PathBuf>,
}

/// A single command with every input that affects its outputs. Output
/// directories and thread counts are left out: neither changes a byte of
/// what gets written.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "command", rename_all = "kebab-case")]
pub enum Job {
    Solve(SolveArgs),
    Train(TrainArgs),
    Eval(EvalArgs),
    Seed(SeedArgs),
    Watershed(WatershedArgs),
    ErrorMap(ErrorMapArgs),
}

impl Job {
    pub fn out_dir(&self) -> &Path {
        match self {
            Self::Solve(a) => &a.out_dir,
            Self::Train(a) => &a.out_dir,
            Self::Eval(a) => &a.out_dir,
            Self::Seed(a) => &a.out_dir,
            Self::Watershed(a) => &a.out_dir,
            Self::ErrorMap(a) => &a.out_dir,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub format_version: u32,
    pub job: Job,
}

pub const RUN_FORMAT_VERSION: u32 = 1;

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(line: &str) -> Command {
        Cli::try_parse_from(std::iter::once("diffwalker").chain(line.split_whitespace()))
            .unwrap()
            .command
    }

    fn train(line: &str) -> TrainArgs {
        match parse(&format!("train --gt gt.csv --out-dir o {line}")) {
            Command::Train(a) => a,
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn train_defaults_follow_the_library() {
        let args = train("");
        assert_eq!(args.backward(), BackwardMode::Adjoint);
        assert_eq!(args.loss_config(), LossConfig::side_ce());
        assert_eq!(args.solver.config(), SolverConfig::default());
        assert_eq!(args.epochs, 500);
        assert!(!args.rescale);
    }

    #[test]
    fn sampled_modes_default_to_the_library_count() {
        assert_eq!(
            train("--mode sampled").backward(),
            BackwardMode::Sampled {
                n: diffwalker::gradient::DEFAULT_SAMPLES
            }
        );
        assert_eq!(
            train("--mode pruned --n 7").backward(),
            BackwardMode::SampledPruned { n: 7 }
        );
    }

    #[test]
    fn loss_coefficients_override_one_at_a_time() {
        let barrier = train("--loss log-barrier --reg 0.5").loss_config();
        let LossConfig::LogBarrier { alpha, .. } = LossConfig::log_barrier() else {
            unreachable!()
        };
        assert_eq!(barrier, LossConfig::LogBarrier { alpha, beta: 0.5 });
    }

    #[test]
    fn run_config_round_trips_without_the_output_directory() {
        let Command::Solve(args) = parse("solve --image a.pgm --beta 2 --seeds s.csv --solver cg --out-dir o") else {
            panic!()
        };
        let config = RunConfig {
            format_version: RUN_FORMAT_VERSION,
            job: Job::Solve(args.clone()),
        };
        let text = serde_json::to_string(&config).unwrap();
        assert!(text.contains("\"command\":\"solve\""));
        assert!(!text.contains("out_dir"));
        let back: RunConfig = serde_json::from_str(&text).unwrap();
        assert_eq!(
            back.job,
            Job::Solve(SolveArgs {
                out_dir: PathBuf::new(),
                ..args
            })
        );
    }

    #[test]
    fn solve_takes_exactly_one_weight_source() {
        let bad = [
            "solve --seeds s.csv --out-dir o",
            "solve --weights w.bin --image a.pgm --beta 1 --seeds s.csv --out-dir o",
            "solve --image a.pgm --seeds s.csv --out-dir o",
        ];
        for line in bad {
            assert!(Cli::try_parse_from(std::iter::once("diffwalker").chain(line.split_whitespace())).is_err());
        }
    }
}
