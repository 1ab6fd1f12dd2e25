//! Command-line front end for the event-camera stereo pipeline.
//!
//! Four subcommands cover the whole workflow: `synth` renders a synthetic
//! stereo scene with ground truth, `run` turns event streams into disparity
//! maps, `ablate` sweeps matching variants over one batch and tabulates the
//! accuracy of each, and `bench` reports per-stage timings and throughput.

use std::path::PathBuf;
use std::time::Duration;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};

use evstereo_core::eval::{ablation_runner, AblationInputs};
use evstereo_core::io;
use evstereo_core::nalgebra::Vector3;
use evstereo_core::pipeline::{
    batch_events, nearest_velocity, process_batch_timed, CostKind, PipelineConfig, RunConfig,
    StageTimings,
};
use evstereo_core::synth::{generate_stereo_events, tiled_scene};
use evstereo_core::{CameraRig, DisparityConfig, Velocity};

#[derive(Debug, Parser)]
#[command(
    name = "evstereo",
    version,
    about = "Event-camera stereo disparity from time-synchronized event volumes"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Process stereo event streams into disparity maps.
    Run(RunArgs),
    /// Generate a synthetic stereo scene with ground truth.
    Synth(SynthArgs),
    /// Sweep matching variants over the first batch and tabulate metrics.
    Ablate(AblateArgs),
    /// Time the pipeline stages over batches and report throughput.
    Bench(BenchArgs),
}

/// Input files shared by every processing subcommand.
#[derive(Debug, Args)]
struct InputArgs {
    /// Left-camera event stream, text lines `t x y p`.
    #[arg(long, value_name = "PATH")]
    events_left: PathBuf,
    /// Right-camera event stream, same format.
    #[arg(long, value_name = "PATH")]
    events_right: PathBuf,
    /// Camera intrinsics and stereo baseline.
    #[arg(long, value_name = "PATH")]
    calib: PathBuf,
    /// Timestamped rig velocities, text lines `t vx vy vz wx wy wz`.
    #[arg(long, value_name = "PATH")]
    velocity: PathBuf,
}

/// Matching parameters; the defaults are the reference operating point.
#[derive(Debug, Args)]
struct MatchArgs {
    /// Largest disparity hypothesis, inclusive.
    #[arg(long, default_value_t = 31)]
    max_disparity: u32,
    /// Smallest disparity hypothesis.
    #[arg(long, default_value_t = 0)]
    min_disparity: u32,
    /// Side of the square matching window, in pixels.
    #[arg(long, default_value_t = 24)]
    window: u32,
    /// Minimum accepted match ratio at the winning disparity.
    #[arg(long, default_value_t = 0.1)]
    eps_c: f64,
    /// Minimum union support as a fraction of the in-bounds window area.
    #[arg(long, default_value_t = 0.1)]
    eps_n: f64,
    /// Events per batch.
    #[arg(long, default_value_t = 15_000)]
    num_events: usize,
    /// Matching cost: iou, intersection, or time.
    #[arg(long, default_value = "iou", value_parser = parse_cost)]
    cost: CostKind,
    /// Skip motion compensation (events keep their recorded pixels).
    #[arg(long)]
    no_sync: bool,
    /// Velocity perturbation strength; 0 uses the records as given.
    #[arg(long, default_value_t = 0.0)]
    noise_pct: f64,
    /// Seed for the velocity perturbation.
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

impl MatchArgs {
    fn disparity_config(&self) -> DisparityConfig {
        DisparityConfig {
            d_min: self.min_disparity,
            d_max: self.max_disparity,
            window: self.window,
            eps_c: self.eps_c,
            eps_n: self.eps_n,
            num_events: self.num_events,
        }
    }

    fn pipeline_config(&self) -> PipelineConfig {
        PipelineConfig {
            disparity: self.disparity_config(),
            cost: self.cost,
            sync: !self.no_sync,
            noise_pct: self.noise_pct,
            seed: self.seed,
            ..PipelineConfig::default()
        }
    }
}

#[derive(Debug, Args)]
struct RunArgs {
    #[command(flatten)]
    inputs: InputArgs,
    /// Ground-truth disparity PGM; enables the metrics CSV.
    #[arg(long, value_name = "PATH")]
    gt: Option<PathBuf>,
    /// Output directory, created if missing.
    #[arg(long, value_name = "DIR")]
    out: PathBuf,
    #[command(flatten)]
    matching: MatchArgs,
    /// Also write the raw event volumes per batch.
    #[arg(long)]
    dump_volumes: bool,
    /// Also write the extraction cost slices per batch.
    #[arg(long)]
    dump_costs: bool,
}

#[derive(Debug, Args)]
struct SynthArgs {
    /// Output directory, created if missing.
    #[arg(long, value_name = "DIR")]
    out: PathBuf,
    /// Plane disparities in pixels, one horizontal band per plane.
    #[arg(long, value_delimiter = ',', default_value = "6,14,25")]
    disparities: Vec<f64>,
    /// Texture points per plane.
    #[arg(long, default_value_t = 3_000)]
    points: usize,
    /// Empty rows between neighbouring bands.
    #[arg(long, default_value_t = 26.0)]
    gap: f64,
    /// Observation window in seconds.
    #[arg(long, default_value_t = 0.05)]
    duration: f64,
    /// Events per texture point per second, per camera.
    #[arg(long, default_value_t = 60.0)]
    event_rate: f64,
    /// Spurious uniformly random events per camera.
    #[arg(long, default_value_t = 500)]
    noise_events: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Rig linear velocity, m/s.
    #[arg(long, default_value_t = 4.0)]
    vx: f64,
    #[arg(long, default_value_t = 0.0)]
    vy: f64,
    #[arg(long, default_value_t = 0.5)]
    vz: f64,
    /// Rig angular velocity, rad/s.
    #[arg(long, default_value_t = 0.0)]
    wx: f64,
    #[arg(long, default_value_t = 0.02)]
    wy: f64,
    #[arg(long, default_value_t = 0.0)]
    wz: f64,
    /// Focal length in pixels.
    #[arg(long, default_value_t = 300.0)]
    focal: f64,
    /// Principal point; defaults to the image centre.
    #[arg(long)]
    cx: Option<f64>,
    #[arg(long)]
    cy: Option<f64>,
    /// Stereo baseline in metres.
    #[arg(long, default_value_t = 0.3)]
    baseline: f64,
    /// Sensor size in pixels.
    #[arg(long, default_value_t = 346)]
    width: u32,
    #[arg(long, default_value_t = 260)]
    height: u32,
}

#[derive(Debug, Args)]
struct AblateArgs {
    #[command(flatten)]
    inputs: InputArgs,
    /// Ground-truth disparity PGM (required: every row reports accuracy).
    #[arg(long, value_name = "PATH")]
    gt: PathBuf,
    /// Metrics CSV to write.
    #[arg(long, value_name = "PATH")]
    out: PathBuf,
    #[command(flatten)]
    matching: MatchArgs,
    /// Cost/sync variants to sweep, e.g. `iou-sync,time-nosync`.
    #[arg(
        long,
        value_delimiter = ',',
        default_value = "iou-sync,iou-nosync,intersection-sync,time-sync"
    )]
    variants: Vec<String>,
    /// Velocity-noise strengths to sweep.
    #[arg(long, value_delimiter = ',', default_value = "0.0")]
    noise_pcts: Vec<f64>,
    /// Window sides to sweep; defaults to the base --window.
    #[arg(long, value_delimiter = ',')]
    windows: Option<Vec<u32>>,
}

#[derive(Debug, Args)]
struct BenchArgs {
    #[command(flatten)]
    inputs: InputArgs,
    #[command(flatten)]
    matching: MatchArgs,
    /// Stop after this many batches.
    #[arg(long)]
    batches: Option<usize>,
}

fn parse_cost(s: &str) -> std::result::Result<CostKind, evstereo_core::Error> {
    s.parse()
}

/// Split a `cost-sync` label such as `iou-nosync` into its parts.
fn parse_variant(label: &str) -> Result<(CostKind, bool)> {
    let (cost, sync) = label
        .rsplit_once('-')
        .with_context(|| format!("variant `{label}` is not of the form `cost-sync`"))?;
    let sync = match sync {
        "sync" => true,
        "nosync" => false,
        other => bail!("variant `{label}` ends in `{other}`; expected `sync` or `nosync`"),
    };
    Ok((cost.parse::<CostKind>()?, sync))
}

fn main() -> Result<()> {
    match Cli::parse().command {
        Command::Run(args) => run(args),
        Command::Synth(args) => synth(args),
        Command::Ablate(args) => ablate(args),
        Command::Bench(args) => bench(args),
    }
}

fn run(args: RunArgs) -> Result<()> {
    let cfg = RunConfig {
        events_left: args.inputs.events_left,
        events_right: args.inputs.events_right,
        calib: args.inputs.calib,
        velocity: args.inputs.velocity,
        gt: args.gt,
        out_dir: args.out.clone(),
        pipeline: args.matching.pipeline_config(),
        dump_volumes: args.dump_volumes,
        dump_costs: args.dump_costs,
    };
    let summary = evstereo_core::pipeline::run(&cfg)?;
    println!(
        "processed {} batch(es) at {:.0} events/s into {}",
        summary.batches,
        summary.events_per_second,
        args.out.display()
    );
    for (i, m) in summary.metrics.iter().enumerate() {
        println!(
            "batch {i:04}: mean err {:.3} px, within-1 {:.1}%, compared {}, rejected {}",
            m.mean_disp_err, m.pct_within_1, m.n_compared, m.n_rejected
        );
    }
    if summary.batches == 0 {
        println!("warning: fewer events than one batch; nothing was processed");
    }
    Ok(())
}

fn synth(args: SynthArgs) -> Result<()> {
    let cx = args.cx.unwrap_or(f64::from(args.width - 1) / 2.0);
    let cy = args.cy.unwrap_or(f64::from(args.height - 1) / 2.0);
    let rig = CameraRig::new(args.focal, cx, cy, args.baseline, args.width, args.height)?;
    let vel = Velocity::new(
        Vector3::new(args.vx, args.vy, args.vz),
        Vector3::new(args.wx, args.wy, args.wz),
    )?;
    let spec = tiled_scene(
        &args.disparities,
        args.points,
        args.gap,
        vel.clone(),
        args.duration,
        args.event_rate,
        args.noise_events,
        args.seed,
        &rig,
    )?;
    let scene = generate_stereo_events(&spec, &rig)?;

    std::fs::create_dir_all(&args.out)
        .with_context(|| format!("creating {}", args.out.display()))?;
    io::write_events(args.out.join("events_left.txt"), &scene.left)?;
    io::write_events(args.out.join("events_right.txt"), &scene.right)?;
    io::write_calibration(args.out.join("calib.txt"), &rig)?;
    io::write_velocity_records(args.out.join("velocity.txt"), &[(0.0, vel)])?;
    io::write_gt_pgm(args.out.join("gt.pgm"), &scene.gt_disparity)?;
    println!(
        "wrote {} left / {} right events over {} plane(s) to {}",
        scene.left.len(),
        scene.right.len(),
        args.disparities.len(),
        args.out.display()
    );
    Ok(())
}

fn ablate(args: AblateArgs) -> Result<()> {
    let rig = io::read_calibration(&args.inputs.calib)?;
    let left = io::read_events(&args.inputs.events_left, &rig)?;
    let right = io::read_events(&args.inputs.events_right, &rig)?;
    let records = io::read_velocity_records(&args.inputs.velocity)?;
    if records.is_empty() {
        bail!("{} holds no velocity records", args.inputs.velocity.display());
    }
    let gt = io::read_gt_pgm(&args.gt)?;

    let base = args.matching.disparity_config();
    let take = |events: &[evstereo_core::Event]| -> Vec<evstereo_core::Event> {
        match batch_events(events, base.num_events).next() {
            Some(batch) => batch.to_vec(),
            None => events.to_vec(),
        }
    };
    let left = take(&left);
    let right = take(&right);
    if left.is_empty() || right.is_empty() {
        bail!("both event streams must hold at least one event");
    }
    let t_ref = left.last().or(right.last()).map_or(0.0, |e| e.t);
    let vel = nearest_velocity(&records, t_ref);

    let variants = args
        .variants
        .iter()
        .map(|v| parse_variant(v))
        .collect::<Result<Vec<_>>>()?;
    let windows = args.windows.unwrap_or_else(|| vec![args.matching.window]);
    let inputs = AblationInputs {
        left: &left,
        right: &right,
        gt: &gt,
        vel,
        rig: &rig,
        base: &base,
        seed: args.matching.seed,
    };
    let rows = ablation_runner(&inputs, &variants, &args.noise_pcts, &windows)?;

    let labels: Vec<String> = rows.iter().map(|r| r.variant()).collect();
    let records: Vec<io::MetricsRecord<'_>> = rows
        .iter()
        .zip(&labels)
        .map(|(r, label)| io::MetricsRecord {
            variant: label,
            cost: r.cost,
            sync: r.sync,
            noise_pct: r.noise_pct,
            window: r.window,
            metrics: r.metrics,
        })
        .collect();
    io::write_metrics_csv(&args.out, &records)?;

    for (r, label) in rows.iter().zip(&labels) {
        println!(
            "{label} noise={} window={}: mean err {:.3} px, within-1 {:.1}%",
            r.noise_pct, r.window, r.metrics.mean_disp_err, r.metrics.pct_within_1
        );
    }
    println!("wrote {} row(s) to {}", rows.len(), args.out.display());
    Ok(())
}

fn bench(args: BenchArgs) -> Result<()> {
    let rig = io::read_calibration(&args.inputs.calib)?;
    let left = io::read_events(&args.inputs.events_left, &rig)?;
    let right = io::read_events(&args.inputs.events_right, &rig)?;
    let records = io::read_velocity_records(&args.inputs.velocity)?;
    if records.is_empty() {
        bail!("{} holds no velocity records", args.inputs.velocity.display());
    }

    let cfg = args.matching.pipeline_config();
    let n = cfg.disparity.num_events;
    let limit = args.batches.unwrap_or(usize::MAX);
    let mut totals = StageTimings::default();
    let mut batches = 0usize;
    let mut events = 0usize;
    for (lb, rb) in batch_events(&left, n).zip(batch_events(&right, n)).take(limit) {
        let t_ref = lb.last().or(rb.last()).map_or(0.0, |e| e.t);
        let vel = nearest_velocity(&records, t_ref);
        let (_, timings) = process_batch_timed(lb, rb, vel, &rig, &cfg)?;
        totals.volumes += timings.volumes;
        totals.cost += timings.cost;
        totals.extract += timings.extract;
        totals.total += timings.total;
        batches += 1;
        events += lb.len() + rb.len();
    }
    if batches == 0 {
        bail!("fewer events than one batch of {n}; nothing to time");
    }

    let per = |d: Duration| d.as_secs_f64() * 1e3 / batches as f64;
    let pct = |d: Duration| 100.0 * d.as_secs_f64() / totals.total.as_secs_f64();
    println!("batches          {batches}");
    println!("events per batch {n} per camera");
    println!("volumes          {:8.3} ms/batch ({:4.1}%)", per(totals.volumes), pct(totals.volumes));
    println!("cost             {:8.3} ms/batch ({:4.1}%)", per(totals.cost), pct(totals.cost));
    println!("extraction       {:8.3} ms/batch ({:4.1}%)", per(totals.extract), pct(totals.extract));
    println!("total            {:8.3} ms/batch", per(totals.total));
    println!(
        "throughput       {:.0} events/s",
        events as f64 / totals.total.as_secs_f64()
    );
    Ok(())
}
