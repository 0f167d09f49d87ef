use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use hopper_core::config::{ConfigError, RunConfig};
use hopper_core::emulator::{
    calibrate_points, fit_oscillator, synthetic_trace, OscillatorParams, PdGains,
};
use hopper_core::model::GroundProfile;
use hopper_core::output::{self, PortraitOrbit, SimulationSummary};
use hopper_core::sim::{run_episode, EpisodeOutcome, EpisodeStatus};
use hopper_core::sweep::{run_sweep, select_stiffness, SweepError};

const EXIT_OK: u8 = 0;
const EXIT_TOOLING: u8 = 1;
const EXIT_CONFIG: u8 = 2;
const EXIT_NUMERICAL: u8 = 3;
const EXIT_LIFTOFF: u8 = 4;
const EXIT_FIT: u8 = 5;
const EXIT_NO_CONVERGENCE: u8 = 6;

#[derive(Parser)]
#[command(name = "hopper", version, about = "Vertical hopper simulation and ground-emulator tools")]
struct Cli {
    #[command(flatten)]
    common: Common,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// TOML run configuration; defaults apply when omitted.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory (overrides the config).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Worker threads for sweeps (overrides the config).
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Seed for synthetic data (overrides the config).
    #[arg(long, global = true)]
    seed: Option<u64>,
}

#[derive(Subcommand)]
enum Command {
    /// Run one episode; writes trajectory.csv and summary.json.
    Simulate,
    /// Run the stiffness grid search; writes sweep tables and heatmaps.
    Sweep,
    /// Overlay body orbits from several drop heights.
    Portrait,
    /// Fit the damped oscillator to a released trace.
    Fit(FitArgs),
    /// Look up the best leg stiffness for a ground profile in a winner map.
    Select(SelectArgs),
    /// Fit affine gain maps to a calibration table.
    Calibrate(CalibrateArgs),
    /// Write a synthetic oscillation trace.
    SynthTrace(SynthArgs),
}

#[derive(Args)]
struct FitArgs {
    /// Trace CSV (`mass_kg=<value>` line, then `t_s,r_m`).
    #[arg(long)]
    trace: PathBuf,
    /// Weight mass in kg; overrides the trace header.
    #[arg(long)]
    mass: Option<f64>,
    /// Proportional gain used for the trial; with --kd, appends to calibration.csv.
    #[arg(long, requires = "kd")]
    kp: Option<f64>,
    #[arg(long, requires = "kp")]
    kd: Option<f64>,
    /// Drop samples before the release trough.
    #[arg(long)]
    trim: bool,
}

#[derive(Args)]
struct SelectArgs {
    /// Winner-map CSV written by `sweep`.
    #[arg(long)]
    map: PathBuf,
    /// Ground stiffness (N/m); defaults to the config ground.
    #[arg(long)]
    kg: Option<f64>,
    /// Ground damping (Ns/m); defaults to the config ground.
    #[arg(long)]
    dg: Option<f64>,
}

#[derive(Args)]
struct CalibrateArgs {
    /// Calibration table with columns Kp,Kd,kg_N_m,dg_Ns_m,r2.
    #[arg(long)]
    table: PathBuf,
}

#[derive(Args)]
struct SynthArgs {
    #[arg(long)]
    kg: f64,
    #[arg(long)]
    dg: f64,
    #[arg(long, default_value_t = 2.0)]
    mass: f64,
    /// Initial amplitude in m.
    #[arg(long, default_value_t = 0.02)]
    amplitude: f64,
    /// Gaussian position noise in m.
    #[arg(long, default_value_t = 0.0)]
    noise: f64,
    #[arg(long, default_value_t = 240.0)]
    rate_hz: f64,
    #[arg(long, default_value_t = 2.0)]
    duration_s: f64,
}

struct Failure {
    code: u8,
    message: String,
}

impl Failure {
    fn new(code: u8, message: impl ToString) -> Self {
        Self {
            code,
            message: message.to_string(),
        }
    }
}

impl From<output::OutputError> for Failure {
    fn from(e: output::OutputError) -> Self {
        Self::new(EXIT_TOOLING, e)
    }
}

impl From<ConfigError> for Failure {
    fn from(e: ConfigError) -> Self {
        Self::new(EXIT_CONFIG, e)
    }
}

fn load_config(common: &Common) -> Result<RunConfig, Failure> {
    let mut cfg = match &common.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    if let Some(out) = &common.out {
        cfg.output_dir = out.clone();
    }
    if let Some(t) = common.threads {
        cfg.threads = t;
    }
    if let Some(s) = common.seed {
        cfg.seed = s;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn ensure_dir(dir: &Path) -> Result<(), Failure> {
    fs::create_dir_all(dir)
        .map_err(|e| Failure::new(EXIT_TOOLING, format!("cannot create {}: {e}", dir.display())))
}

fn create_file(path: &Path) -> Result<fs::File, Failure> {
    fs::File::create(path)
        .map_err(|e| Failure::new(EXIT_TOOLING, format!("cannot create {}: {e}", path.display())))
}

fn status_code(status: EpisodeStatus) -> u8 {
    match status {
        EpisodeStatus::SteadyHopping => EXIT_OK,
        EpisodeStatus::NumericalFailure => EXIT_NUMERICAL,
        EpisodeStatus::FailedLiftoff => EXIT_LIFTOFF,
        EpisodeStatus::NoConvergence => EXIT_NO_CONVERGENCE,
    }
}

fn episode(cfg: &RunConfig, drop_height: Option<f64>) -> Result<EpisodeOutcome<f64>, Failure> {
    let mut ecfg = cfg.episode_config();
    ecfg.record_trajectory = true;
    if let Some(h) = drop_height {
        ecfg.drop_height = h;
    }
    run_episode(
        &cfg.hopper()?,
        &cfg.ground()?,
        &cfg.energy_budget()?,
        &ecfg,
        &cfg.integrator_config(),
    )
    .map_err(|e| Failure::new(EXIT_CONFIG, e))
}

fn simulate(cfg: &RunConfig) -> Result<u8, Failure> {
    let outcome = episode(cfg, None)?;
    let dir = &cfg.output_dir;
    ensure_dir(dir)?;
    let states = outcome.trajectory.as_deref().unwrap_or_default();
    output::write_trajectory_csv(create_file(&dir.join("trajectory.csv"))?, states)?;
    let summary = SimulationSummary::from_outcome(&outcome);
    output::write_json(&dir.join("summary.json"), &summary)?;
    match summary.steady_apex_mean_mm {
        Some(mean) => println!(
            "{}: steady apex {mean:.4} mm after {} hops",
            outcome.status.as_str(),
            summary.hop_count
        ),
        None => println!("{} after {} hops", outcome.status.as_str(), summary.hop_count),
    }
    Ok(status_code(outcome.status))
}

fn sweep(cfg: &RunConfig) -> Result<u8, Failure> {
    let spec = cfg.sweep_spec()?;
    let result = run_sweep(&spec).map_err(|e| match e {
        SweepError::InvalidSpec(_) => Failure::new(EXIT_CONFIG, e),
        _ => Failure::new(EXIT_TOOLING, e),
    })?;
    let written = output::write_sweep_outputs(&result, spec.tie_threshold, &cfg.output_dir)?;
    let ok = result.runs.iter().filter(|r| r.status.is_success()).count();
    println!(
        "{} runs over {} ground cells, {ok} steady; {} files in {}",
        result.runs.len(),
        spec.ground_cells(),
        written.len(),
        cfg.output_dir.display()
    );
    Ok(EXIT_OK)
}

#[derive(serde::Serialize)]
struct PortraitEntry {
    drop_height_m: f64,
    status: EpisodeStatus,
    final_apex_mm: Option<f64>,
    steady_apex_mean_mm: Option<f64>,
}

fn portrait(cfg: &RunConfig) -> Result<u8, Failure> {
    let heights = cfg.portrait_drop_heights()?.to_vec();
    let mut orbits = Vec::new();
    let mut entries = Vec::new();
    let mut code = EXIT_OK;
    for h in heights {
        let outcome = episode(cfg, Some(h))?;
        code = code.max(status_code(outcome.status));
        entries.push(PortraitEntry {
            drop_height_m: h,
            status: outcome.status,
            final_apex_mm: outcome.hops.last().map(|r| r.apex_height * 1000.0),
            steady_apex_mean_mm: outcome.steady_mean().map(|v| v * 1000.0),
        });
        orbits.push(PortraitOrbit {
            drop_height: h,
            states: outcome.trajectory.unwrap_or_default(),
        });
    }
    let dir = &cfg.output_dir;
    ensure_dir(dir)?;
    output::write_portrait_csv(create_file(&dir.join("portrait.csv"))?, &orbits)?;
    let title = format!(
        "body phase portrait, k_l = {} N/m, k_g = {} N/m",
        cfg.hopper.leg_stiffness, cfg.ground.stiffness
    );
    let svg_path = dir.join("portrait.svg");
    fs::write(&svg_path, output::portrait_svg(&title, &orbits))
        .map_err(|e| Failure::new(EXIT_TOOLING, format!("{}: {e}", svg_path.display())))?;
    output::write_json(&dir.join("portrait.json"), &entries)?;
    for e in &entries {
        match e.final_apex_mm {
            Some(a) => println!(
                "drop {:.1} mm: {} final apex {a:.4} mm",
                e.drop_height_m * 1000.0,
                e.status.as_str()
            ),
            None => println!("drop {:.1} mm: {}", e.drop_height_m * 1000.0, e.status.as_str()),
        }
    }
    Ok(code)
}

fn fit(cfg: &RunConfig, args: &FitArgs) -> Result<u8, Failure> {
    let file = fs::File::open(&args.trace).map_err(|e| {
        Failure::new(EXIT_CONFIG, format!("cannot read {}: {e}", args.trace.display()))
    })?;
    let mut trace = output::read_trace_csv(file).map_err(|e| {
        Failure::new(EXIT_CONFIG, format!("{}: {e}", args.trace.display()))
    })?;
    if let Some(m) = args.mass {
        trace = hopper_core::emulator::OscillationTrace::new(
            trace.times().to_vec(),
            trace.positions().to_vec(),
            m,
        )
        .map_err(|e| Failure::new(EXIT_CONFIG, e))?;
    }
    if args.trim {
        trace = trace
            .trim_to_release()
            .map_err(|e| Failure::new(EXIT_FIT, e))?;
    }
    let result = fit_oscillator(&trace, None, &cfg.fit_options())
        .map_err(|e| Failure::new(EXIT_FIT, format!("fit failed: {e}")))?;
    let dir = &cfg.output_dir;
    ensure_dir(dir)?;
    output::write_json(&dir.join("fit.json"), &result)?;
    if let (Some(kp), Some(kd)) = (args.kp, args.kd) {
        let gains = PdGains::new(kp, kd).map_err(|e| Failure::new(EXIT_CONFIG, e))?;
        output::append_calibration_row(&dir.join("calibration.csv"), &gains, &result)?;
    }
    println!(
        "k_g = {:.3} N/m, d_g = {:.4} Ns/m, R^2 = {:.5}{}",
        result.ground_stiffness,
        result.ground_damping,
        result.r_squared,
        if result.accepted { "" } else { " (below acceptance bar)" }
    );
    Ok(EXIT_OK)
}

fn select(cfg: &RunConfig, args: &SelectArgs) -> Result<u8, Failure> {
    let file = fs::File::open(&args.map)
        .map_err(|e| Failure::new(EXIT_CONFIG, format!("cannot read {}: {e}", args.map.display())))?;
    let map = output::read_winner_map_csv(file).map_err(|e| Failure::new(EXIT_CONFIG, e))?;
    let query = GroundProfile::new(
        args.kg.unwrap_or(cfg.ground.stiffness),
        args.dg.unwrap_or(cfg.ground.damping),
    )
    .map_err(|e| Failure::new(EXIT_CONFIG, e))?;
    match select_stiffness(&map, &query) {
        Ok(k) => {
            println!("{k}");
            Ok(EXIT_OK)
        }
        Err(e @ SweepError::UnreachableCell { .. }) => Err(Failure::new(EXIT_LIFTOFF, e)),
        Err(e) => Err(Failure::new(EXIT_CONFIG, e)),
    }
}

fn calibrate(cfg: &RunConfig, args: &CalibrateArgs) -> Result<u8, Failure> {
    let file = fs::File::open(&args.table).map_err(|e| {
        Failure::new(EXIT_CONFIG, format!("cannot read {}: {e}", args.table.display()))
    })?;
    let rows = output::read_calibration_csv(file).map_err(|e| Failure::new(EXIT_CONFIG, e))?;
    let min_r2 = cfg.emulator.min_r_squared;
    let points: Vec<_> = rows
        .iter()
        .filter(|r| r.3 >= min_r2)
        .map(|r| (r.0, r.1, r.2))
        .collect();
    let cal = calibrate_points(&points).map_err(|e| Failure::new(EXIT_FIT, e))?;
    ensure_dir(&cfg.output_dir)?;
    output::write_json(&cfg.output_dir.join("calibration.json"), &cal)?;
    println!(
        "k_g = {:.4} Kp + {:.4} (R^2 {:.4}); d_g = {:.4} Kd + {:.4} (R^2 {:.4}); {} of {} trials used",
        cal.stiffness.slope,
        cal.stiffness.intercept,
        cal.stiffness.r_squared,
        cal.damping.slope,
        cal.damping.intercept,
        cal.damping.r_squared,
        points.len(),
        rows.len()
    );
    Ok(EXIT_OK)
}

fn synth_trace(cfg: &RunConfig, args: &SynthArgs) -> Result<u8, Failure> {
    let alpha = args.kg / args.mass;
    let beta = args.dg / (2.0 * args.mass);
    if !(args.mass > 0.0 && alpha > beta * beta && args.rate_hz > 0.0 && args.duration_s > 0.0) {
        return Err(Failure::new(
            EXIT_CONFIG,
            "need positive mass, rate and duration and an underdamped ground",
        ));
    }
    let params = OscillatorParams {
        amplitude: args.amplitude,
        alpha,
        beta,
        phase: std::f64::consts::PI,
        offset: None,
    };
    let n = (args.duration_s * args.rate_hz).round() as usize;
    let times: Vec<f64> = (0..n).map(|i| i as f64 / args.rate_hz).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let trace = synthetic_trace(&params, args.mass, &times, args.noise, cfg.hopper.gravity, &mut rng)
        .map_err(|e| Failure::new(EXIT_CONFIG, e))?;
    ensure_dir(&cfg.output_dir)?;
    let path = cfg.output_dir.join("trace.csv");
    output::write_trace_csv(create_file(&path)?, &trace)?;
    println!("{}", path.display());
    Ok(EXIT_OK)
}

fn run(cli: &Cli) -> Result<u8, Failure> {
    let cfg = load_config(&cli.common)?;
    match &cli.command {
        Command::Simulate => simulate(&cfg),
        Command::Sweep => sweep(&cfg),
        Command::Portrait => portrait(&cfg),
        Command::Fit(a) => fit(&cfg, a),
        Command::Select(a) => select(&cfg, a),
        Command::Calibrate(a) => calibrate(&cfg, a),
        Command::SynthTrace(a) => synth_trace(&cfg, a),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(code) => ExitCode::from(code),
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}
