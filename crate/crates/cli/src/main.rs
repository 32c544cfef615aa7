//! Scenario runner: load a scenario file, simulate, write trajectories and
//! metrics, print a timing summary.
//!
//! Outputs under `--out`:
//!   trajectory.csv  one row per agent per emitted step (see --stride)
//!   metrics.json    run summary (timings, arrivals, peak penetration)
//!   steps.csv       per-step metrics table
//!
//! For a fixed scenario, seed, and flag set, trajectory bytes are identical
//! across runs and thread counts; timings in the metrics files are the only
//! machine-dependent outputs.

use std::fs;
use std::io::{BufWriter, Write};
use std::path::PathBuf;
use std::time::Instant;

use anyhow::{Context, Result};
use clap::Parser;

use throng::metrics::{self, StepMetrics};
use throng::trajectory::TrajectoryWriter;
use throng::{parse_scenario, AvoidanceMode, Scenario};

#[derive(Parser, Debug)]
#[command(
    name = "throng",
    about = "Position-based crowd simulation runner",
    version
)]
struct Args {
    /// Scenario file (JSON).
    #[arg(long)]
    scenario: PathBuf,
    /// Output directory (created if missing).
    #[arg(long)]
    out: PathBuf,
    /// Number of solver steps; defaults to the scenario's duration.
    #[arg(long)]
    steps: Option<u64>,
    /// Seed for all deterministic noise streams.
    #[arg(long)]
    seed: Option<u64>,
    /// Override the scenario's anticipatory constraint mode.
    #[arg(long)]
    mode: Option<AvoidanceMode>,
    /// Worker threads; defaults to all cores.
    #[arg(long)]
    threads: Option<usize>,
    /// Emit every k-th step to the trajectory file.
    #[arg(long, default_value_t = 1)]
    stride: u64,
}

fn main() {
    let args = Args::parse();
    if let Err(e) = run(args) {
        eprintln!("error: {e:#}");
        std::process::exit(1);
    }
}

fn run(args: Args) -> Result<()> {
    anyhow::ensure!(args.stride >= 1, "--stride must be at least 1");
    if let Some(steps) = args.steps {
        anyhow::ensure!(steps >= 1, "--steps must be at least 1");
    }
    let doc = fs::read_to_string(&args.scenario)
        .with_context(|| format!("reading scenario file {}", args.scenario.display()))?;
    let scenario = parse_scenario(&doc)
        .with_context(|| format!("parsing scenario {}", args.scenario.display()))?;

    match args.threads {
        Some(n) => {
            anyhow::ensure!(n >= 1, "--threads must be at least 1");
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(n)
                .build()
                .context("building thread pool")?;
            pool.install(|| simulate(&args, &scenario))
        }
        None => simulate(&args, &scenario),
    }
}

fn simulate(args: &Args, scenario: &Scenario) -> Result<()> {
    let seed = args.seed.unwrap_or(scenario.effective_params().rng_seed);
    let mut state = scenario
        .to_state(seed)
        .context("instantiating scenario")?;
    if let Some(mode) = args.mode {
        state.params.avoidance_mode = mode;
    }
    let steps = args.steps.unwrap_or(scenario.duration).max(1);

    fs::create_dir_all(&args.out)
        .with_context(|| format!("creating output directory {}", args.out.display()))?;
    let traj_path = args.out.join("trajectory.csv");
    let traj_file = fs::File::create(&traj_path)
        .with_context(|| format!("creating {}", traj_path.display()))?;
    let mut traj = TrajectoryWriter::new(BufWriter::new(traj_file))?;

    let mut series: Vec<StepMetrics> = Vec::with_capacity(steps as usize);
    for s in 0..steps {
        if s % args.stride == 0 {
            traj.write_step(s, &state.agents)?;
        }
        let t0 = Instant::now();
        state.step();
        let ms = t0.elapsed().as_secs_f64() * 1e3;
        series.push(metrics::measure_step(&state, ms));
    }
    traj.into_inner().flush()?;

    let report = metrics::run_report(state.agents.len(), &series)
        .expect("non-empty series by construction");
    let report_path = args.out.join("metrics.json");
    fs::write(&report_path, serde_json::to_string_pretty(&report)?)
        .with_context(|| format!("writing {}", report_path.display()))?;

    let steps_path = args.out.join("steps.csv");
    let mut steps_csv = BufWriter::new(
        fs::File::create(&steps_path)
            .with_context(|| format!("creating {}", steps_path.display()))?,
    );
    writeln!(
        steps_csv,
        "step,max_penetration,mean_speed,arrived_fraction,wall_clock_ms"
    )?;
    for m in &series {
        writeln!(
            steps_csv,
            "{},{:.6},{:.6},{:.6},{:.3}",
            m.step, m.max_penetration, m.mean_speed, m.arrived_fraction, m.wall_clock_ms
        )?;
    }
    steps_csv.flush()?;

    println!(
        "{}: {} agents, {} steps (mode {}, seed {seed})",
        scenario.name,
        state.agents.len(),
        steps,
        state.params.avoidance_mode,
    );
    println!(
        "timing: {:.2} ms/step mean, {:.2} ms/step p95, {:.2} ms/frame (2 steps per 24 fps frame)",
        report.mean_step_ms, report.p95_step_ms, report.mean_frame_ms
    );
    println!(
        "outcome: arrived {:.1}%, peak penetration {:.4} m, final mean goalward speed {:.3} m/s",
        100.0 * report.final_arrived_fraction,
        report.peak_max_penetration,
        report.final_mean_speed
    );
    Ok(())
}
