use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use diffwalker::io::{
    read_image, read_json, read_label_image, read_seeds, read_weights, write_assignments, write_float_grid, write_json,
    write_label_image, write_seeds, write_weights,
};
use diffwalker::learning::{grady_weights, Convergence, GroundTruth, TraceRow, TrainConfig};
use diffwalker::{
    assemble_blocks, entropy_map, error_map, evaluate, label, oracle_seeds, seeded_watershed, solve_rw, Error,
    LabelImage, LatticeGraph, SeedSet,
};
use log::info;

use crate::args::{
    Command, ErrorMapArgs, EvalArgs, Job, ReplayArgs, RunConfig, SeedArgs, SolveArgs, TrainArgs, WatershedArgs,
    RUN_FORMAT_VERSION,
};
use crate::error::{CliError, CliResult};

pub const RUN_FILE: &str = "run.json";
pub const ASSIGNMENTS_FILE: &str = "assignments.csv";
pub const LABELS_FILE: &str = "labels.pgm";
pub const ENTROPY_FILE: &str = "entropy.csv";
pub const SOLVE_REPORT_FILE: &str = "solve.json";
pub const WEIGHTS_FILE: &str = "weights.bin";
pub const TRACE_FILE: &str = "trace.csv";
pub const EVAL_FILE: &str = "eval.json";
pub const TRAIN_SUMMARY_FILE: &str = "train.json";
pub const SEEDS_FILE: &str = "seeds.csv";
pub const ERRORS_FILE: &str = "errors.pgm";

pub fn execute(command: Command) -> CliResult<()> {
    let job = match command {
        Command::Solve(a) => Job::Solve(a),
        Command::Train(a) => Job::Train(a),
        Command::Eval(a) => Job::Eval(a),
        Command::Seed(a) => Job::Seed(a),
        Command::Watershed(a) => Job::Watershed(a),
        Command::ErrorMap(a) => Job::ErrorMap(a),
        Command::Replay(a) => return replay(&a),
    };
    let out_dir = job.out_dir().to_path_buf();
    let config = RunConfig {
        format_version: RUN_FORMAT_VERSION,
        job: absolutize(job)?,
    };
    run_job(config, &out_dir)
}

fn replay(args: &ReplayArgs) -> CliResult<()> {
    let config: RunConfig = read_json(&args.run)?;
    if config.format_version != RUN_FORMAT_VERSION {
        return Err(CliError::Usage(format!(
            "{} has run format {}, expected {RUN_FORMAT_VERSION}",
            args.run.display(),
            config.format_version
        )));
    }
    let out_dir = match &args.out_dir {
        Some(dir) => dir.clone(),
        None => args.run.parent().map(Path::to_path_buf).unwrap_or_default(),
    };
    run_job(config, &out_dir)
}

/// Records the configuration, then runs it with outputs under `out_dir`.
pub fn run_job(config: RunConfig, out_dir: &Path) -> CliResult<()> {
    fs::create_dir_all(out_dir).map_err(Error::from)?;
    write_json(&out_dir.join(RUN_FILE), &config)?;
    let out = |name: &str| out_dir.join(name);
    match config.job {
        Job::Solve(a) => solve(&a, &out),
        Job::Train(a) => train(&a, &out),
        Job::Eval(a) => eval(&a, &out),
        Job::Seed(a) => seed(&a, &out),
        Job::Watershed(a) => watershed(&a, &out),
        Job::ErrorMap(a) => errors(&a, &out),
    }
}

/// Input paths become absolute so a saved run replays from any directory.
fn absolutize(mut job: Job) -> CliResult<Job> {
    fn abs(p: &mut PathBuf) -> CliResult<()> {
        *p = std::path::absolute(&*p).map_err(Error::from)?;
        Ok(())
    }
    fn abs_opt(p: &mut Option<PathBuf>) -> CliResult<()> {
        p.as_mut().map_or(Ok(()), abs)
    }
    match &mut job {
        Job::Solve(a) => {
            abs_opt(&mut a.weights)?;
            abs_opt(&mut a.image)?;
            abs(&mut a.seeds)?;
        }
        Job::Train(a) => {
            abs_opt(&mut a.image)?;
            abs(&mut a.gt)?;
            abs_opt(&mut a.seeds)?;
        }
        Job::Eval(a) => {
            abs(&mut a.pred)?;
            abs(&mut a.gt)?;
        }
        Job::Seed(a) => abs(&mut a.gt)?,
        Job::Watershed(a) => {
            abs(&mut a.boundary)?;
            abs(&mut a.seeds)?;
        }
        Job::ErrorMap(a) => {
            abs(&mut a.pred)?;
            abs(&mut a.gt)?;
        }
    }
    Ok(job)
}

fn solve(args: &SolveArgs, out: &dyn Fn(&str) -> PathBuf) -> CliResult<()> {
    let (graph, weights) = match (&args.weights, &args.image, args.beta) {
        (Some(path), None, None) => read_weights(path)?,
        (None, Some(path), Some(beta)) => {
            let image = read_image(path)?;
            let graph = LatticeGraph::new(image.height, image.width)?;
            let weights = grady_weights(&graph, &image, beta)?;
            (graph, weights)
        }
        _ => {
            return Err(CliError::Usage(
                "give exactly one of --weights or --image with --beta".into(),
            ))
        }
    };
    let seeds = read_seeds(&args.seeds, graph.height(), graph.width())?;
    let blocks = assemble_blocks(&graph, &weights, &seeds)?;
    let (z, report) = solve_rw(&blocks, &args.solver.config())?;
    info!(
        "solved {} unknowns with {:?} in {:?}",
        report.unknowns, report.method, report.wall_time
    );
    write_assignments(&out(ASSIGNMENTS_FILE), &z)?;
    write_label_image(&out(LABELS_FILE), &label(&z))?;
    write_float_grid(&out(ENTROPY_FILE), &entropy_map(&z))?;
    write_json(&out(SOLVE_REPORT_FILE), &report)?;
    Ok(())
}

#[derive(serde::Serialize)]
struct TrainSummary {
    steps: usize,
    converged: bool,
    final_loss: Option<f64>,
}

fn train(args: &TrainArgs, out: &dyn Fn(&str) -> PathBuf) -> CliResult<()> {
    let gt_image = read_label_image(&args.gt)?;
    if let Some(path) = &args.image {
        let image = read_image(path)?;
        if (image.height, image.width) != (gt_image.height, gt_image.width) {
            return Err(Error::ShapeMismatch {
                what: "image pixels",
                expected: gt_image.len(),
                found: image.data.len(),
            }
            .into());
        }
    }
    let graph = LatticeGraph::new(gt_image.height, gt_image.width)?;
    let gt = GroundTruth::from_label_image(&gt_image);
    let seeds = match &args.seeds {
        Some(path) => read_seeds(path, graph.height(), graph.width())?,
        None => oracle_seeds(
            &gt_image,
            args.seed_mode.unwrap_or(crate::args::SeedModeArg::Sparse).into(),
            args.rng_seed,
        )?,
    };
    write_seeds(&out(SEEDS_FILE), &seeds, graph.width())?;

    let mut config = TrainConfig {
        loss: args.loss_config(),
        epochs: args.epochs,
        backward: args.backward(),
        rescale: args.rescale,
        rng_seed: args.rng_seed,
        solver: args.solver.config(),
        convergence: (!args.no_early_stop).then_some(Convergence {
            rel_tol: args.rel_tol,
            window: args.window,
        }),
        initial_weight: args.initial_weight,
        ..TrainConfig::default()
    };
    config.adam.learning_rate = args.lr;

    let outcome = match diffwalker::learning::train_per_edge(&graph, &gt, &seeds, &config) {
        Ok(outcome) => outcome,
        Err(failure) => {
            // Keep what was reached for post-mortem inspection.
            write_trace(&out(TRACE_FILE), &failure.trace)?;
            if let Ok(weights) = failure.params.weights() {
                write_weights(&out(WEIGHTS_FILE), &graph, &weights)?;
            }
            return Err(failure.into());
        }
    };
    info!(
        "trained {} steps, converged: {}",
        outcome.trace.len(),
        outcome.converged
    );
    write_weights(&out(WEIGHTS_FILE), &graph, &outcome.params.weights()?)?;
    write_trace(&out(TRACE_FILE), &outcome.trace)?;
    write_label_image(&out(LABELS_FILE), &outcome.segmentation)?;
    write_json(
        &out(TRAIN_SUMMARY_FILE),
        &TrainSummary {
            steps: outcome.trace.len(),
            converged: outcome.converged,
            final_loss: outcome.trace.last().map(|r| r.loss),
        },
    )?;
    let report = evaluate(&outcome.segmentation, &gt_image, args.tolerance)?;
    write_json(&out(EVAL_FILE), &report)?;
    println!("{}", serde_json::to_string(&report).expect("reports serialize"));
    Ok(())
}

fn write_trace(path: &Path, trace: &[TraceRow]) -> CliResult<()> {
    let mut w = BufWriter::new(File::create(path).map_err(Error::from)?);
    let rows = std::iter::once("step,loss,ce,side,reg".to_string()).chain(
        trace
            .iter()
            .map(|r| format!("{},{},{},{},{}", r.step, r.loss, r.ce, r.side, r.reg)),
    );
    for row in rows {
        writeln!(w, "{row}").map_err(Error::from)?;
    }
    w.flush().map_err(Error::from)?;
    Ok(())
}

fn eval(args: &EvalArgs, out: &dyn Fn(&str) -> PathBuf) -> CliResult<()> {
    let pred = read_label_image(&args.pred)?;
    let gt = read_label_image(&args.gt)?;
    let report = evaluate(&pred, &gt, args.tolerance)?;
    write_json(&out(EVAL_FILE), &report)?;
    println!("{}", serde_json::to_string(&report).expect("reports serialize"));
    Ok(())
}

fn seed(args: &SeedArgs, out: &dyn Fn(&str) -> PathBuf) -> CliResult<()> {
    let gt = read_label_image(&args.gt)?;
    let seeds = oracle_seeds(&gt, args.mode.into(), args.rng_seed)?;
    info!("placed {} seeds over {} segments", seeds.len(), seeds.label_count());
    write_seeds(&out(SEEDS_FILE), &seeds, gt.width)?;
    Ok(())
}

fn watershed(args: &WatershedArgs, out: &dyn Fn(&str) -> PathBuf) -> CliResult<()> {
    let boundary = read_image(&args.boundary)?;
    let seeds: SeedSet = read_seeds(&args.seeds, boundary.height, boundary.width)?;
    let labels = seeded_watershed(&boundary, &seeds)?;
    write_label_image(&out(LABELS_FILE), &labels)?;
    Ok(())
}

fn errors(args: &ErrorMapArgs, out: &dyn Fn(&str) -> PathBuf) -> CliResult<()> {
    let pred = read_label_image(&args.pred)?;
    let gt = read_label_image(&args.gt)?;
    let wrong = error_map(&pred, &gt)?;
    let count = wrong.iter().filter(|&&w| w).count();
    let mask = LabelImage::new(gt.height, gt.width, wrong.into_iter().map(u32::from).collect())?;
    write_label_image(&out(ERRORS_FILE), &mask)?;
    println!("{count} of {} pixels disagree", mask.len());
    Ok(())
}
