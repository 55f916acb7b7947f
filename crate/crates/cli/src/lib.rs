//! The `occplan` command line: simulate scenarios, fit occupancy from
//! sweeps, render grids, train residual costs, plan and evaluate.
//!
//! Exit status is 0 on success, 1 on a usage error and 2 on a data error.

use std::ffi::OsString;
use std::fmt::Write as _;
use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use occplan::config::RunConfig;
use occplan::eval::{plan_metrics, sweep_metrics_with, EgoFootprint, PositiveClass};
use occplan::geom::Vec2;
use occplan::grid::{rasterize_ground_truth, Cell, GridGeometry, OccupancyGrid};
use occplan::io::bank_file::{load_bank, save_bank};
use occplan::io::grid_file::{load_costmap, load_occupancy, save_costmap, save_occupancy};
use occplan::io::pgm::{slice_pixels, write_pgm};
use occplan::io::scenario_file::{load_scenario, save_scenario};
use occplan::io::sweep_csv::{load_sweep_dir, save_sweep};
use occplan::io::trajectory_csv::{read_past, read_trajectory, write_past, write_trajectory};
use occplan::learn::fit_occupancy;
use occplan::plan::{
    candidate_margins, compose_costmap, plan, sample_model_driven, train_residual, CostMap,
    FreespaceMask, Horizon, PastTrack, PenaltyContext, PenaltySpec, ResidualProblem, SamplerConfig,
    Trajectory, TrajectoryBank,
};
use occplan::raycast::{project_freespace, traverse, Ray, Sweep};
use occplan::sim::{
    expert_trajectory, generate_scenario_suite_at, simulate_future_sweeps, Scenario, SweepRate,
};

#[derive(Debug, Parser)]
#[command(
    name = "occplan",
    version,
    about = "Occupancy from LiDAR sweeps and max-margin planning"
)]
pub struct Cli {
    /// Worker threads; 0 uses every core. Outputs do not depend on it.
    #[arg(long, global = true)]
    threads: Option<usize>,

    /// Run configuration JSON; flags given on the command line win.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Generate a scenario suite with sweeps, ground truth and a trajectory bank.
    Sim(SimArgs),
    /// Fit occupancy logits to posed sweeps.
    FitOccupancy(FitArgs),
    /// Write PGM images of occupancy, freespace and composed cost.
    Render(RenderArgs),
    /// Choose the cheapest sampled trajectory.
    Plan(PlanArgs),
    /// Score a predicted grid and optionally a planned trajectory.
    Eval(EvalArgs),
    /// Learn a residual costmap with the max-margin loss.
    TrainResidual(TrainArgs),
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum Rate {
    #[value(name = "2hz")]
    Hz2,
    #[value(name = "20hz")]
    Hz20,
}

impl From<Rate> for SweepRate {
    fn from(r: Rate) -> Self {
        match r {
            Rate::Hz2 => SweepRate::Hz2,
            Rate::Hz20 => SweepRate::Hz20,
        }
    }
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum Positive {
    Free,
    Occupied,
}

#[derive(Debug, Args)]
struct SimArgs {
    /// Scenario kind.
    #[arg(long)]
    kind: String,
    /// Number of scenarios.
    #[arg(long, default_value_t = 1)]
    count: usize,
    /// Suite seed; defaults to the config seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Sweep rate.
    #[arg(long, value_enum, default_value = "2hz")]
    rate: Rate,
    /// Output directory; defaults to the config output directory.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct FitArgs {
    /// Scenario JSON providing the grid geometry.
    #[arg(long)]
    scenario: Option<PathBuf>,
    /// Directory of sweep CSV files.
    #[arg(long)]
    sweeps: PathBuf,
    /// Output grid file.
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    iters: Option<usize>,
    #[arg(long)]
    lr: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    init_logit: Option<f64>,
    /// Seed for the initial jitter.
    #[arg(long)]
    seed: Option<u64>,
    /// Loss trace CSV; defaults to the output path with a `.loss.csv` extension.
    #[arg(long)]
    trace: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct RenderArgs {
    /// Occupancy grid file.
    #[arg(long)]
    occ: PathBuf,
    /// Output directory for the images.
    #[arg(long)]
    out: PathBuf,
    /// Sensor position `x,y` for freespace images.
    #[arg(long, value_parser = parse_point, allow_hyphen_values = true)]
    pose: Option<Vec2>,
    /// Residual costmap added to the occupancy cost; zero when absent.
    #[arg(long)]
    residual: Option<PathBuf>,
    #[arg(long, allow_hyphen_values = true)]
    alpha: Option<f64>,
}

#[derive(Debug, Args)]
struct PlanArgs {
    /// Occupancy grid file.
    #[arg(long)]
    occ: PathBuf,
    /// Residual costmap; zero when absent.
    #[arg(long)]
    residual: Option<PathBuf>,
    #[arg(long, allow_hyphen_values = true)]
    alpha: Option<f64>,
    /// Past track CSV ending at frame 0.
    #[arg(long)]
    past: PathBuf,
    /// Sampler configuration JSON.
    #[arg(long)]
    sampler: Option<PathBuf>,
    /// Trajectory bank adding data-driven candidates.
    #[arg(long)]
    bank: Option<PathBuf>,
    /// Output trajectory CSV.
    #[arg(long)]
    out: PathBuf,
    /// Seed for bank draws.
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Debug, Args)]
struct EvalArgs {
    /// Predicted occupancy grid.
    #[arg(long)]
    pred: PathBuf,
    /// Scenario whose future sweeps and boxes are the ground truth.
    #[arg(long)]
    scenario: PathBuf,
    /// Planned trajectory CSV.
    #[arg(long)]
    plan: Option<PathBuf>,
    /// Output metrics CSV.
    #[arg(long)]
    out: PathBuf,
    /// Positive class for F1 and AP.
    #[arg(long, value_enum, default_value = "free")]
    positive: Positive,
}

#[derive(Debug, Args)]
struct TrainArgs {
    #[arg(long)]
    scenario: PathBuf,
    /// Occupancy grid the costs are composed with.
    #[arg(long)]
    occ: PathBuf,
    /// Sweeps defining freespace for guided margins; simulated from the
    /// scenario when absent.
    #[arg(long)]
    sweeps: Option<PathBuf>,
    /// Margin penalty name.
    #[arg(long)]
    penalty: Option<String>,
    #[arg(long)]
    gamma: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    alpha: Option<f64>,
    #[arg(long)]
    iters: Option<usize>,
    #[arg(long)]
    lr: Option<f64>,
    #[arg(long)]
    sampler: Option<PathBuf>,
    #[arg(long)]
    bank: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    /// Output residual costmap; the loss trace goes next to it.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug)]
enum Failure {
    Usage(String),
    Data(occplan::Error),
}

impl From<occplan::Error> for Failure {
    fn from(e: occplan::Error) -> Self {
        match e {
            // Strategy names come from flags, so a bad one is a usage error.
            occplan::Error::UnknownStrategy { .. } => Failure::Usage(e.to_string()),
            e => Failure::Data(e),
        }
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::Data(e.into())
    }
}

type Outcome<T = ()> = Result<T, Failure>;

fn parse_point(s: &str) -> Result<Vec2, String> {
    let (x, y) = s
        .split_once(',')
        .ok_or_else(|| format!("expected `x,y`, got `{s}`"))?;
    let x: f64 = x.trim().parse().map_err(|e| format!("bad x: {e}"))?;
    let y: f64 = y.trim().parse().map_err(|e| format!("bad y: {e}"))?;
    if !(x.is_finite() && y.is_finite()) {
        return Err("coordinates must be finite".into());
    }
    Ok(Vec2::new(x, y))
}

/// Parses `args` (program name first), runs the command and returns the
/// exit status.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 1 } else { 0 };
        }
    };
    match execute(cli) {
        Ok(()) => 0,
        Err(Failure::Usage(m)) => {
            eprintln!("error: {m}");
            1
        }
        Err(Failure::Data(e)) => {
            eprintln!("error: {e}");
            2
        }
    }
}

fn execute(cli: Cli) -> Outcome {
    let cfg = match &cli.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    let threads = cli.threads.unwrap_or(cfg.threads);
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| Failure::Usage(format!("thread pool: {e}")))?;
    pool.install(|| match cli.command {
        Command::Sim(a) => sim(a, &cfg),
        Command::FitOccupancy(a) => fit(a, &cfg),
        Command::Render(a) => render(a, &cfg),
        Command::Plan(a) => plan_cmd(a, &cfg),
        Command::Eval(a) => eval(a),
        Command::TrainResidual(a) => train(a, &cfg),
    })
}

fn create(path: &Path) -> Outcome<BufWriter<File>> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir)?;
    }
    Ok(BufWriter::new(File::create(path)?))
}

fn write_text(path: &Path, text: &str) -> Outcome {
    let mut w = create(path)?;
    w.write_all(text.as_bytes())?;
    w.flush()?;
    Ok(())
}

fn loss_trace_path(out: &Path) -> PathBuf {
    out.with_extension("loss.csv")
}

fn write_loss_trace(path: &Path, losses: &[f64]) -> Outcome {
    let mut text = String::from("iter,loss\n");
    for (k, l) in losses.iter().enumerate() {
        writeln!(text, "{k},{l}").expect("writing to a string");
    }
    write_text(path, &text)
}

fn sim(args: SimArgs, cfg: &RunConfig) -> Outcome {
    let seed = args.seed.unwrap_or(cfg.seed);
    let rate = SweepRate::from(args.rate);
    let out = args.out.unwrap_or_else(|| cfg.output_dir.clone());
    let suite = generate_scenario_suite_at(&args.kind, args.count, seed, rate)?;
    fs::create_dir_all(&out)?;
    let mut experts = Vec::with_capacity(suite.len());
    for (n, s) in suite.iter().enumerate() {
        let dir = out.join(format!("scenario_{n:03}"));
        fs::create_dir_all(&dir)?;
        save_scenario(&dir.join("scenario.json"), s)?;
        save_occupancy(&dir.join("gt.rswg"), &rasterize_ground_truth(s, &s.grid))?;
        let past = s.past_track();
        let expert = expert_trajectory(s);
        let mut w = create(&dir.join("past.csv"))?;
        write_past(&mut w, &past)?;
        w.flush()?;
        let mut w = create(&dir.join("expert.csv"))?;
        write_trajectory(&mut w, &expert)?;
        w.flush()?;
        let sweep_dir = dir.join("sweeps");
        fs::create_dir_all(&sweep_dir)?;
        for sweep in simulate_future_sweeps(s) {
            save_sweep(&sweep_dir, &sweep)?;
        }
        experts.push((past, expert));
    }
    let bank = TrajectoryBank::build(&experts, &cfg.sampler.bank, rate.frame_interval())?;
    save_bank(&out.join("bank.bin"), &bank)?;
    println!(
        "wrote {} {} scenarios to {}",
        suite.len(),
        args.kind,
        out.display()
    );
    Ok(())
}

fn fit(args: FitArgs, cfg: &RunConfig) -> Outcome {
    let geom = match (&cfg.geometry, &args.scenario) {
        (Some(g), _) => *g,
        (None, Some(path)) => load_scenario(path)?.grid,
        (None, None) => {
            return Err(Failure::Usage(
                "grid geometry needs --scenario or a config geometry".into(),
            ))
        }
    };
    let mut fit_cfg = cfg.fit.clone();
    if let Some(n) = args.iters {
        fit_cfg.iterations = n;
    }
    if let Some(lr) = args.lr {
        fit_cfg.learning_rate = lr;
    }
    if let Some(l) = args.init_logit {
        fit_cfg.init_logit = l;
    }
    if let Some(s) = args.seed {
        fit_cfg.seed = s;
    }
    let sweeps = load_sweep_dir(&args.sweeps)?;
    let fit = fit_occupancy(&sweeps, &geom, &fit_cfg)?;
    save_occupancy(&args.out, &fit.grid)?;
    let trace = args.trace.unwrap_or_else(|| loss_trace_path(&args.out));
    write_loss_trace(&trace, &fit.trace)?;
    println!(
        "fitted {} sweeps in {} steps, loss {} -> {}; {} rays rejected, {} outside the grid",
        sweeps.len(),
        fit.trace.len(),
        fit.trace.first().copied().unwrap_or(f64::NAN),
        fit.trace.last().copied().unwrap_or(f64::NAN),
        fit.rejected,
        fit.uncovered
    );
    Ok(())
}

/// Freespace seen from `origin`, one ray to the center of every border
/// cell; each voxel keeps the largest value any ray gives it and unvisited
/// voxels stay at zero.
fn freespace_fan(occ: &OccupancyGrid, origin: Vec2) -> Vec<f64> {
    let geom = occ.geometry();
    let (w, h) = (geom.width, geom.height);
    let mut border: Vec<(usize, usize)> = (0..w).flat_map(|i| [(i, 0), (i, h - 1)]).collect();
    border.extend((1..h.saturating_sub(1)).flat_map(|j| [(0, j), (w - 1, j)]));
    border.dedup();
    let rays: Vec<(usize, Vec2)> = (0..geom.num_timestamps)
        .flat_map(|s| border.iter().map(move |&(i, j)| (s, i, j)))
        .filter_map(|(s, i, j)| {
            let target = geom.cell_to_world_center(Cell::new(i, j));
            let d = target - origin;
            (d.norm() > 0.0).then(|| (s, d * (1.0 / d.norm())))
        })
        .collect();
    let cast: Vec<Vec<(usize, f64)>> = rays
        .par_iter()
        .map(|&(slice, dir)| {
            let t = traverse(&Ray::new(origin, dir, slice, f64::INFINITY), geom);
            match project_freespace(&t, occ) {
                Some(f) => t.voxels(geom).zip(f.freespace).collect(),
                None => Vec::new(),
            }
        })
        .collect();
    let mut out = vec![0.0; geom.voxel_count()];
    for (v, f) in cast.into_iter().flatten() {
        out[v] = f64::max(out[v], f);
    }
    out
}

fn write_slices(
    dir: &Path,
    stem: &str,
    geom: &GridGeometry,
    values: &[f64],
    scale: f64,
) -> Outcome {
    for s in 0..geom.num_timestamps {
        let pixels = slice_pixels(geom, values, s, scale)?;
        let mut w = create(&dir.join(format!("{stem}_t{:02}.pgm", s + 1)))?;
        write_pgm(&mut w, geom.width, geom.height, &pixels)?;
        w.flush()?;
    }
    Ok(())
}

fn render(args: RenderArgs, cfg: &RunConfig) -> Outcome {
    let occ = load_occupancy(&args.occ)?;
    let geom = *occ.geometry();
    fs::create_dir_all(&args.out)?;
    write_slices(&args.out, "occupancy", &geom, &occ.probabilities(), 1.0)?;
    if let Some(pose) = args.pose {
        write_slices(
            &args.out,
            "freespace",
            &geom,
            &freespace_fan(&occ, pose),
            1.0,
        )?;
    }
    let residual = match &args.residual {
        Some(path) => load_costmap(path)?,
        None => CostMap::zeros(geom),
    };
    let cost = compose_costmap(&residual, &occ, args.alpha.unwrap_or(cfg.alpha))?;
    // Shifted so the cheapest voxel is black and the dearest white.
    let lo = cost.values().iter().copied().fold(f64::INFINITY, f64::min);
    let shifted: Vec<f64> = cost.values().iter().map(|v| v - lo).collect();
    let hi = shifted.iter().copied().fold(0.0, f64::max);
    write_slices(&args.out, "cost", &geom, &shifted, hi)?;
    println!(
        "rendered {} slices to {}",
        geom.num_timestamps,
        args.out.display()
    );
    Ok(())
}

fn load_sampler(path: Option<&PathBuf>, cfg: &RunConfig) -> Outcome<SamplerConfig> {
    match path {
        Some(p) => {
            let s: SamplerConfig =
                serde_json::from_str(&fs::read_to_string(p)?).map_err(occplan::Error::from)?;
            s.validate()?;
            Ok(s)
        }
        None => Ok(cfg.sampler.clone()),
    }
}

/// Model-driven candidates followed by seeded draws from the bank.
fn candidates(
    past: &PastTrack,
    sampler: &SamplerConfig,
    geom: &GridGeometry,
    bank: Option<&PathBuf>,
    seed: u64,
) -> Outcome<Vec<Trajectory>> {
    let horizon = Horizon {
        frames: geom.num_timestamps,
        frame_interval: geom.frame_interval,
    };
    let mut out = sample_model_driven(past, sampler, &horizon)?;
    if let Some(path) = bank {
        let bank = load_bank(path)?;
        if bank.frames != horizon.frames {
            return Err(Failure::Data(occplan::Error::FrameMismatch(format!(
                "bank holds {} frames, grid has {}",
                bank.frames, horizon.frames
            ))));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        out.extend(bank.query(
            past,
            sampler.bank.samples_per_query,
            sampler.default_heading,
            &mut rng,
        )?);
    }
    Ok(out)
}

fn plan_cmd(args: PlanArgs, cfg: &RunConfig) -> Outcome {
    let occ = load_occupancy(&args.occ)?;
    let geom = *occ.geometry();
    let residual = match &args.residual {
        Some(path) => load_costmap(path)?,
        None => CostMap::zeros(geom),
    };
    let past = read_past(File::open(&args.past)?)?;
    let sampler = load_sampler(args.sampler.as_ref(), cfg)?;
    let seed = args.seed.unwrap_or(cfg.seed);
    let cands = candidates(&past, &sampler, &geom, args.bank.as_ref(), seed)?;
    let alpha = args.alpha.unwrap_or(cfg.alpha);
    let choice = plan(&occ, &residual, alpha, &cands, cfg.train.out_of_bounds)?;
    let mut w = create(&args.out)?;
    write_trajectory(&mut w, &choice.trajectory)?;
    w.flush()?;
    println!(
        "chose candidate {} of {} at cost {}",
        choice.index,
        cands.len(),
        choice.cost
    );
    Ok(())
}

fn field(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

fn eval(args: EvalArgs) -> Outcome {
    let pred = load_occupancy(&args.pred)?;
    let scenario = load_scenario(&args.scenario)?;
    let gt: Vec<Sweep> = simulate_future_sweeps(&scenario)
        .into_iter()
        .filter(|s| pred.geometry().slice_of_frame(s.frame).is_some())
        .collect();
    let positive = match args.positive {
        Positive::Free => PositiveClass::Free,
        Positive::Occupied => PositiveClass::Occupied,
    };
    let m = sweep_metrics_with(&pred, &gt, positive)?;
    let mut text = String::from("kind,key,abs_rel,bce,f1,ap,l2,point_collision,box_collision\n");
    for f in &m.frames {
        writeln!(
            text,
            "frame,{},{},{},{},{},,,",
            f.frame,
            field(f.abs_rel),
            field(f.bce),
            field(f.f1),
            field(f.ap)
        )
        .expect("writing to a string");
    }
    writeln!(
        text,
        "mean,all,{},{},{},{},,,",
        field(m.abs_rel),
        field(m.bce),
        field(m.f1),
        field(m.ap)
    )
    .expect("writing to a string");
    if let Some(path) = &args.plan {
        let planned = read_trajectory(File::open(path)?)?;
        let pm = plan_horizons(&scenario, &planned)?;
        for h in pm {
            writeln!(
                text,
                "horizon,{},,,,,{},{},{}",
                h.seconds, h.l2, h.point_collision as u8, h.box_collision as u8
            )
            .expect("writing to a string");
        }
    }
    write_text(&args.out, &text)?;
    println!(
        "wrote metrics for {} frames to {}",
        m.frames.len(),
        args.out.display()
    );
    Ok(())
}

fn plan_horizons(
    scenario: &Scenario,
    planned: &Trajectory,
) -> Outcome<Vec<occplan::eval::HorizonMetrics>> {
    let ego = EgoFootprint {
        initial_heading: scenario.ego_pose(0).heading,
        ..EgoFootprint::default()
    };
    let m = plan_metrics(
        planned,
        &expert_trajectory(scenario),
        &scenario.future_boxes(),
        &ego,
        scenario.frame_interval(),
    )?;
    Ok(m.horizons)
}

fn train(args: TrainArgs, cfg: &RunConfig) -> Outcome {
    let scenario = load_scenario(&args.scenario)?;
    let occ = load_occupancy(&args.occ)?;
    let geom = *occ.geometry();
    let sweeps = match &args.sweeps {
        Some(dir) => load_sweep_dir(dir)?,
        None => simulate_future_sweeps(&scenario),
    };
    let mask = FreespaceMask::from_sweeps(&sweeps, &geom)?;
    let boxes = scenario.future_boxes();
    let ctx = PenaltyContext {
        freespace: Some(&mask),
        boxes: Some(&boxes),
    };
    let spec = PenaltySpec::named(
        args.penalty.as_deref().unwrap_or(&cfg.penalty),
        args.gamma.unwrap_or(cfg.gamma),
    )?;
    let sampler = load_sampler(args.sampler.as_ref(), cfg)?;
    let past = scenario.past_track();
    let seed = args.seed.unwrap_or(cfg.seed);
    let cands = candidates(&past, &sampler, &geom, args.bank.as_ref(), seed)?;
    let expert = expert_trajectory(&scenario);
    let margins = candidate_margins(&cands, &expert, &spec, &ctx)?;
    let mut train_cfg = cfg.train;
    if let Some(n) = args.iters {
        train_cfg.iterations = n;
    }
    if let Some(lr) = args.lr {
        train_cfg.learning_rate = lr;
    }
    let problem = ResidualProblem {
        occupancy: &occ,
        candidates: &cands,
        expert: &expert,
        margins,
    };
    let alpha = args.alpha.unwrap_or(cfg.alpha);
    let fit = train_residual(&[problem], alpha, &train_cfg)?.remove(0);
    save_costmap(&args.out, &fit.residual)?;
    write_loss_trace(&loss_trace_path(&args.out), &fit.losses)?;
    println!(
        "trained on {} candidates in {} steps, final loss {}",
        cands.len(),
        fit.losses.len(),
        fit.losses.last().copied().unwrap_or(f64::NAN)
    );
    Ok(())
}
