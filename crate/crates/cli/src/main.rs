mod config;

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use plugsense::baselines::{default_grid, model_metric, optimize_threshold, ThresholdKind, ThresholdModel};
use plugsense::eval::{curve_csv, detection_rates, iteration_curve, MetricsReport};
use plugsense::features::{build_views, parse_views, View, DEFAULT_VIEWS};
use plugsense::io;
use plugsense::selftrain::{run_self_training, PriorSchedule, SelfTrainConfig};
use plugsense::sensors::{
    accel_windows, ultrasonic_windows, wifi_windows, window_grid, AccelConfig, UltrasonicConfig, WifiConfig,
};
use plugsense::sim::{preset, simulate_sensors, simulate_user, SensorNoise, PRESETS};
use plugsense::{ErrorKind, Presence, PresenceSeries, WindowSpec};

use config::FileConfig;

#[derive(Debug, thiserror::Error)]
pub enum Failure {
    #[error("{0}")]
    Usage(String),
    #[error(transparent)]
    Core(#[from] plugsense::Error),
}

impl Failure {
    fn exit_code(&self) -> u8 {
        match self {
            Failure::Usage(_) => 1,
            Failure::Core(e) => match e.kind() {
                ErrorKind::Config => 1,
                ErrorKind::Data => 2,
                ErrorKind::Algorithm => 3,
            },
        }
    }
}

type Result<T> = std::result::Result<T, Failure>;

#[derive(Parser)]
#[command(name = "plugsense", version, about = "Desk presence from plug-load power")]
struct Cli {
    /// TOML file with run parameters; flags override it.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate one user's power trace, ground truth and auxiliary sensors.
    Simulate(SimulateArgs),
    /// Write the per-window feature matrix of a power trace.
    Extract(ExtractArgs),
    /// Infer presence from a power trace without labels.
    Train(TrainArgs),
    /// Fit or apply a threshold model.
    Baseline(BaselineArgs),
    /// Apply the ultrasonic, chair and WiFi rules.
    Sensors(SensorsArgs),
    /// Score a presence series against ground truth.
    Eval(EvalArgs),
}

#[derive(Args)]
struct SimulateArgs {
    #[arg(long, default_value = "user17")]
    preset: String,
    #[arg(long)]
    days: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, value_enum, default_value_t = NoiseLevel::Default)]
    sensor_noise: NoiseLevel,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Clone, Copy, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
enum NoiseLevel {
    Default,
    None,
}

#[derive(Args)]
struct WindowArgs {
    #[arg(long)]
    window_seconds: Option<i64>,
}

#[derive(Args)]
struct ExtractArgs {
    #[arg(long)]
    power: PathBuf,
    #[command(flatten)]
    window: WindowArgs,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct TrainArgs {
    #[arg(long)]
    power: PathBuf,
    #[arg(long)]
    out: PathBuf,
    /// Optional ground truth; adds a per-iteration misclassification curve.
    #[arg(long)]
    truth: Option<PathBuf>,
    #[command(flatten)]
    window: WindowArgs,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    alpha1: Option<f64>,
    #[arg(long)]
    alpha2: Option<f64>,
    #[arg(long)]
    max_iter: Option<usize>,
    #[arg(long)]
    epsilon_grid_step: Option<f64>,
    #[arg(long)]
    schedule: Option<String>,
    #[arg(long)]
    views: Option<String>,
    #[arg(long)]
    utc_offset: Option<i64>,
    #[arg(long)]
    rate_search: Option<bool>,
    #[arg(long)]
    stop_on_negative_phi: Option<bool>,
    #[arg(long)]
    sample_unlabeled: Option<bool>,
}

#[derive(Args)]
struct BaselineArgs {
    #[arg(long)]
    power: PathBuf,
    /// Ground truth to optimize the threshold on.
    #[arg(long, required_unless_present = "threshold")]
    truth: Option<PathBuf>,
    #[arg(long, default_value = "absolute")]
    model: String,
    /// Apply this threshold instead of searching.
    #[arg(long)]
    threshold: Option<f64>,
    /// Comma-separated candidate thresholds.
    #[arg(long)]
    grid: Option<String>,
    #[arg(long, default_value = "absent")]
    initial_state: String,
    #[command(flatten)]
    window: WindowArgs,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct SensorsArgs {
    #[arg(long)]
    ultrasonic: Option<PathBuf>,
    #[arg(long)]
    accel: Option<PathBuf>,
    #[arg(long)]
    wifi: Option<PathBuf>,
    /// Presence CSV whose window starts define the output grid.
    #[arg(long)]
    grid: Option<PathBuf>,
    #[arg(long)]
    theta: Option<f64>,
    #[arg(long)]
    delta: Option<i64>,
    #[command(flatten)]
    window: WindowArgs,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct EvalArgs {
    #[arg(long)]
    pred: PathBuf,
    #[arg(long)]
    truth: PathBuf,
    #[arg(long, default_value = "unknown")]
    user: String,
    #[arg(long, default_value = "presence")]
    model: String,
    #[command(flatten)]
    window: WindowArgs,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Serialize)]
struct Manifest<'a, P: Serialize> {
    tool: &'static str,
    version: &'static str,
    command: &'static str,
    inputs: BTreeMap<&'a str, String>,
    params: P,
    outputs: Vec<&'a str>,
}

fn write_manifest<P: Serialize>(
    dir: &Path,
    command: &'static str,
    inputs: BTreeMap<&str, String>,
    params: P,
    outputs: Vec<&str>,
) -> Result<()> {
    let m = Manifest {
        tool: "plugsense",
        version: env!("CARGO_PKG_VERSION"),
        command,
        inputs,
        params,
        outputs,
    };
    let text = serde_json::to_string_pretty(&m).expect("manifest serializes") + "\n";
    write(&dir.join("manifest.json"), &text)
}

fn write(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|e| Failure::Usage(format!("{}: {e}", path.display())))
}

fn out_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Failure::Usage(format!("{}: {e}", dir.display())))
}

fn require(paths: &[&Path]) -> Result<()> {
    for p in paths {
        if !p.exists() {
            return Err(Failure::Usage(format!("{}: no such file", p.display())));
        }
    }
    Ok(())
}

fn user_of(path: &Path) -> String {
    path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default()
}

fn window_spec(args: &WindowArgs, cfg: &FileConfig) -> WindowSpec {
    WindowSpec::non_overlapping(args.window_seconds.or(cfg.window_seconds).unwrap_or(60))
}

/// Truth restricted to the given windows. Windows without truth are an error.
fn align(truth: &PresenceSeries, starts: &[i64], width: i64, path: &Path) -> Result<PresenceSeries> {
    let mut states = Vec::with_capacity(starts.len());
    for &t in starts {
        match truth.state_at(t, width) {
            Some(s) => states.push(s),
            None => {
                return Err(plugsense::Error::IndexMismatch(format!(
                    "{}: no ground truth for window starting at {t}",
                    path.display()
                ))
                .into())
            }
        }
    }
    Ok(PresenceSeries::new(starts.to_vec(), states)?)
}

fn parse_presence(s: &str) -> Result<Presence> {
    match s {
        "present" | "1" => Ok(Presence::Present),
        "absent" | "0" => Ok(Presence::Absent),
        _ => Err(Failure::Usage(format!("initial state {s:?}: expected present or absent"))),
    }
}

fn simulate(a: SimulateArgs, cfg: &FileConfig) -> Result<()> {
    let mut profile = preset(&a.preset)?;
    if let Some(d) = a.days {
        profile = profile.with_days(d);
    }
    let seed = a.seed.or(cfg.seed).unwrap_or(0);
    let noise = match a.sensor_noise {
        NoiseLevel::Default => SensorNoise::default(),
        NoiseLevel::None => SensorNoise::none(),
    };
    let sim = simulate_user(&profile, seed)?;
    // separate stream so sensor noise settings never change the power trace
    let sensors = simulate_sensors(&sim.truth, &noise, seed ^ 0x9e37_79b9_7f4a_7c15)?;

    out_dir(&a.out)?;
    io::write_power_csv(&a.out.join("power.csv"), &sim.trace)?;
    io::write_presence_csv(&a.out.join("truth.csv"), &sim.truth)?;
    io::write_ultrasonic_csv(&a.out.join("ultrasonic.csv"), &sensors.ultrasonic)?;
    io::write_accel_csv(&a.out.join("accel.csv"), &sensors.accel)?;
    io::write_wifi_csv(&a.out.join("wifi.csv"), &sensors.wifi)?;

    #[derive(Serialize)]
    struct Params<'a> {
        preset: &'a str,
        seed: u64,
        sensor_noise: NoiseLevel,
        noise: SensorNoise,
        profile: &'a plugsense::sim::UserProfile,
    }
    write_manifest(
        &a.out,
        "simulate",
        BTreeMap::new(),
        Params {
            preset: &a.preset,
            seed,
            sensor_noise: a.sensor_noise,
            noise,
            profile: &profile,
        },
        vec!["power.csv", "truth.csv", "ultrasonic.csv", "accel.csv", "wifi.csv"],
    )
}

fn extract(a: ExtractArgs, cfg: &FileConfig) -> Result<()> {
    require(&[&a.power])?;
    let trace = io::read_power_csv(&a.power, &user_of(&a.power))?;
    let views = match &cfg.views {
        Some(v) => parse_views(v)?,
        None => DEFAULT_VIEWS.to_vec(),
    };
    let fm = build_views(&trace, &window_spec(&a.window, cfg), &views)?;
    io::write_features_csv(&a.out, &fm)?;
    Ok(())
}

#[derive(Serialize)]
struct TrainParams {
    window_seconds: i64,
    schedule: String,
    utc_offset: i64,
    views: Vec<&'static str>,
    #[serde(flatten)]
    selftrain: SelfTrainConfig,
}

fn train(a: TrainArgs, cfg: &FileConfig) -> Result<()> {
    let mut inputs = vec![a.power.as_path()];
    inputs.extend(a.truth.as_deref());
    require(&inputs)?;

    let d = SelfTrainConfig::default();
    let st = SelfTrainConfig {
        alpha1: a.alpha1.or(cfg.alpha1).unwrap_or(d.alpha1),
        alpha2: a.alpha2.or(cfg.alpha2).unwrap_or(d.alpha2),
        max_iter: a.max_iter.or(cfg.max_iter).unwrap_or(d.max_iter),
        epsilon_grid_step: a.epsilon_grid_step.or(cfg.epsilon_grid_step).unwrap_or(d.epsilon_grid_step),
        seed: a.seed.or(cfg.seed).unwrap_or(d.seed),
        rate_search: a.rate_search.or(cfg.rate_search).unwrap_or(d.rate_search),
        stop_on_negative_phi: a.stop_on_negative_phi.or(cfg.stop_on_negative_phi).unwrap_or(d.stop_on_negative_phi),
        sample_unlabeled: a.sample_unlabeled.or(cfg.sample_unlabeled).unwrap_or(d.sample_unlabeled),
        retain_labelings: a.truth.is_some(),
        ..d
    };
    let utc_offset = a.utc_offset.or(cfg.utc_offset).unwrap_or(0);
    let schedule = match a.schedule.as_deref().or(cfg.schedule.as_deref()) {
        Some(s) => s.parse::<PriorSchedule>()?,
        None => PriorSchedule::office(),
    }
    .with_utc_offset(utc_offset);
    let views: Vec<View> = match a.views.as_deref().or(cfg.views.as_deref()) {
        Some(v) => parse_views(v)?,
        None => DEFAULT_VIEWS.to_vec(),
    };
    let spec = window_spec(&a.window, cfg);

    let trace = io::read_power_csv(&a.power, &user_of(&a.power))?;
    let fm = build_views(&trace, &spec, &views)?;
    let out = run_self_training(&fm, &schedule, &st)?;

    out_dir(&a.out)?;
    io::write_presence_csv(&a.out.join("presence.csv"), &out.presence)?;
    write(&a.out.join("diagnostics.csv"), &out.diagnostics.to_csv())?;
    let mut outputs = vec!["presence.csv", "diagnostics.csv"];
    let mut manifest_inputs = BTreeMap::from([("power", a.power.display().to_string())]);
    if let Some(tp) = &a.truth {
        let truth = align(&io::read_presence_csv(tp)?, fm.window_starts(), spec.width, tp)?;
        let curve = iteration_curve(&out.diagnostics, &truth)?;
        write(&a.out.join("curve.csv"), &curve_csv(&curve))?;
        outputs.push("curve.csv");
        manifest_inputs.insert("truth", tp.display().to_string());
    }
    let params = TrainParams {
        window_seconds: spec.width,
        schedule: schedule.to_string(),
        utc_offset,
        views: views.iter().map(|v| v.as_str()).collect(),
        selftrain: st,
    };
    write_manifest(&a.out, "train", manifest_inputs, params, outputs)
}

fn baseline(a: BaselineArgs, cfg: &FileConfig) -> Result<()> {
    let mut inputs = vec![a.power.as_path()];
    inputs.extend(a.truth.as_deref());
    require(&inputs)?;
    let kind: ThresholdKind = a.model.parse()?;
    let initial = parse_presence(&a.initial_state)?;
    let spec = window_spec(&a.window, cfg);
    let trace = io::read_power_csv(&a.power, &user_of(&a.power))?;
    let fm = build_views(&trace, &spec, &DEFAULT_VIEWS)?;

    #[derive(Serialize)]
    struct ThresholdReport {
        model: ThresholdKind,
        threshold: f64,
        initial_state: Presence,
        window_seconds: i64,
        /// Overall accuracy on the truth the threshold was chosen with.
        training_accuracy: Option<f64>,
    }
    let (model, acc) = match (a.threshold, &a.truth) {
        (Some(t), _) => (ThresholdModel::new(kind, t, initial)?, None),
        (None, Some(tp)) => {
            let truth = align(&io::read_presence_csv(tp)?, fm.window_starts(), spec.width, tp)?;
            let grid = match &a.grid {
                Some(g) => g
                    .split(',')
                    .map(|x| x.trim().parse::<f64>().map_err(|_| Failure::Usage(format!("grid value {x:?} is not a number"))))
                    .collect::<Result<Vec<_>>>()?,
                None => default_grid(kind, &model_metric(kind, &fm)),
            };
            let (m, acc) = optimize_threshold(kind, &fm, &truth, &grid, initial)?;
            (m, Some(acc))
        }
        (None, None) => unreachable!("clap requires truth or threshold"),
    };
    let pred = model.infer(&fm)?;
    out_dir(&a.out)?;
    io::write_presence_csv(&a.out.join("presence.csv"), &pred)?;
    let report = ThresholdReport {
        model: model.kind,
        threshold: model.threshold,
        initial_state: model.initial_state,
        window_seconds: spec.width,
        training_accuracy: acc,
    };
    write(
        &a.out.join("threshold.json"),
        &(serde_json::to_string_pretty(&report).expect("report serializes") + "\n"),
    )
}

fn sensors(a: SensorsArgs, cfg: &FileConfig) -> Result<()> {
    let given: Vec<&Path> = [&a.ultrasonic, &a.accel, &a.wifi, &a.grid].into_iter().flatten().map(PathBuf::as_path).collect();
    require(&given)?;
    if a.ultrasonic.is_none() && a.accel.is_none() && a.wifi.is_none() {
        return Err(Failure::Usage("give at least one of --ultrasonic, --accel, --wifi".into()));
    }
    let width = window_spec(&a.window, cfg).width;
    if width <= 0 {
        return Err(Failure::Usage(format!("window_seconds must be positive, got {width}")));
    }
    let ultrasonic = a.ultrasonic.as_deref().map(io::read_ultrasonic_csv).transpose()?;
    let accel = a.accel.as_deref().map(io::read_accel_csv).transpose()?;
    let wifi = a.wifi.as_deref().map(io::read_wifi_csv).transpose()?;

    let starts = match &a.grid {
        Some(g) => io::read_presence_csv(g)?.window_starts().to_vec(),
        None => {
            let times = ultrasonic
                .iter()
                .flatten()
                .map(|r| r.timestamp)
                .chain(accel.iter().flatten().map(|s| s.timestamp))
                .chain(wifi.iter().flatten().copied());
            let (lo, hi) = times.fold((i64::MAX, i64::MIN), |(lo, hi), t| (lo.min(t), hi.max(t)));
            if lo > hi {
                return Err(plugsense::Error::EmptyInput.into());
            }
            window_grid(lo, hi + 1, width)
        }
    };

    out_dir(&a.out)?;
    let mut outputs = Vec::new();
    if let Some(r) = &ultrasonic {
        let s = ultrasonic_windows(r, &starts, width, &UltrasonicConfig::default())?;
        io::write_presence_csv(&a.out.join("ultrasonic_presence.csv"), &s)?;
        outputs.push("ultrasonic_presence.csv");
    }
    let accel_cfg = AccelConfig {
        theta: a.theta.unwrap_or(AccelConfig::default().theta),
    };
    if let Some(x) = &accel {
        let s = accel_windows(x, &starts, width, &accel_cfg)?;
        io::write_presence_csv(&a.out.join("accel_presence.csv"), &s)?;
        outputs.push("accel_presence.csv");
    }
    let wifi_cfg = WifiConfig {
        delta: a.delta.unwrap_or(WifiConfig::default().delta),
    };
    if wifi_cfg.delta < 0 {
        return Err(Failure::Usage(format!("delta must be nonnegative, got {}", wifi_cfg.delta)));
    }
    if let Some(w) = &wifi {
        let s = wifi_windows(w, &starts, width, &wifi_cfg)?;
        io::write_presence_csv(&a.out.join("wifi_presence.csv"), &s)?;
        outputs.push("wifi_presence.csv");
    }

    #[derive(Serialize)]
    struct Params {
        window_seconds: i64,
        ultrasonic: UltrasonicConfig,
        accel: AccelConfig,
        wifi: WifiConfig,
    }
    let mut inputs = BTreeMap::new();
    for (k, p) in [("ultrasonic", &a.ultrasonic), ("accel", &a.accel), ("wifi", &a.wifi), ("grid", &a.grid)] {
        if let Some(p) = p {
            inputs.insert(k, p.display().to_string());
        }
    }
    let params = Params {
        window_seconds: width,
        ultrasonic: UltrasonicConfig::default(),
        accel: accel_cfg,
        wifi: wifi_cfg,
    };
    write_manifest(&a.out, "sensors", inputs, params, outputs)
}

fn eval(a: EvalArgs, cfg: &FileConfig) -> Result<()> {
    require(&[&a.pred, &a.truth])?;
    let pred = io::read_presence_csv(&a.pred)?;
    let truth = io::read_presence_csv(&a.truth)?;
    let width = window_spec(&a.window, cfg).width;
    let truth = align(&truth, pred.window_starts(), width, &a.truth)?;
    let rates = detection_rates(&pred, &truth)?;
    let report = MetricsReport::new(a.user, a.model, &rates);
    write(&a.out, &(serde_json::to_string_pretty(&report).expect("report serializes") + "\n"))
}

fn run(cli: Cli) -> Result<()> {
    let cfg = match &cli.config {
        Some(p) => FileConfig::load(p)?,
        None => FileConfig::default(),
    };
    match cli.command {
        Command::Simulate(a) => {
            if !PRESETS.contains(&a.preset.as_str()) {
                return Err(Failure::Usage(format!("unknown preset {:?}; expected one of {PRESETS:?}", a.preset)));
            }
            simulate(a, &cfg)
        }
        Command::Extract(a) => extract(a, &cfg),
        Command::Train(a) => train(a, &cfg),
        Command::Baseline(a) => baseline(a, &cfg),
        Command::Sensors(a) => sensors(a, &cfg),
        Command::Eval(a) => eval(a, &cfg),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
