use std::ffi::OsString;
use std::fs::{self, File};
use std::io::{self, BufWriter, Write};
use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::time::Duration;

use clap::{Args, Parser, Subcommand, ValueEnum};
use thermoloop_core::plant::Rate;
use thermoloop_core::{run_scenario, scenario, DeciCelsius, LoopConfig, RunMetrics, SafetyConfig, Scenario};

use crate::live::{self, LiveOptions};
use crate::scenario_file::{format_scenario, parse_scenario};
use crate::telemetry::{write_csv, write_jsonl};

/// Exit status for configuration errors (bad scenario, bad override).
pub const EXIT_CONFIG: i32 = 2;
/// Exit status for I/O failures.
pub const EXIT_IO: i32 = 3;

#[derive(Debug, Parser)]
#[command(
    name = "thermoloop",
    version,
    about = "Closed-loop greenhouse fan controller simulator"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run a scenario in simulated time and write its telemetry log and metrics.
    Run(RunArgs),
    /// Run a live session paced at wall-clock speed behind a local HTTP API.
    Serve(ServeArgs),
    /// Print a built-in scenario in scenario-file form.
    Scenario { name: String },
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Format {
    Csv,
    Jsonl,
}

#[derive(Debug, Args)]
struct Overrides {
    /// Proportional gain, PWM counts per deci-degree.
    #[arg(long)]
    kp: Option<u32>,
    #[arg(long)]
    ki: Option<u32>,
    #[arg(long)]
    kd: Option<u32>,
    /// Ambient temperature in deci-degrees.
    #[arg(long, allow_negative_numbers = true)]
    t_amb: Option<i32>,
    /// Heat-source temperature in deci-degrees.
    #[arg(long, allow_negative_numbers = true)]
    t_src: Option<i32>,
    /// Passive coupling rate, per second.
    #[arg(long)]
    k_passive: Option<f64>,
    /// Fan coupling rate at full duty, per second.
    #[arg(long)]
    k_fan: Option<f64>,
    /// Heat-source coupling rate, per second.
    #[arg(long)]
    k_src: Option<f64>,
    /// Alarm threshold in deci-degrees.
    #[arg(long)]
    threshold: Option<i32>,
    /// Run length in milliseconds (defaults to the scenario's).
    #[arg(long)]
    duration: Option<u64>,
    /// Light-channel noise seed.
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Debug, Args)]
struct RunArgs {
    /// Built-in scenario name or path to a scenario file.
    #[arg(long)]
    scenario: String,
    /// Telemetry log path (defaults to `<scenario name>.<format>` in the working directory).
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = Format::Csv)]
    format: Format,
    /// Metrics JSON path (defaults to the log path with a `.metrics.json` extension).
    #[arg(long)]
    metrics: Option<PathBuf>,
    #[command(flatten)]
    overrides: Overrides,
}

#[derive(Debug, Args)]
struct ServeArgs {
    #[arg(long, default_value_t = 7878)]
    port: u16,
    #[arg(long, default_value = "127.0.0.1")]
    bind: std::net::IpAddr,
    /// Built-in scenario name or scenario file; defaults to an idle room with no events.
    #[arg(long)]
    scenario: Option<String>,
    /// Wall-clock milliseconds between frames.
    #[arg(long, default_value_t = 100)]
    pace_ms: u64,
    #[command(flatten)]
    overrides: Overrides,
}

#[derive(Debug)]
struct Failure {
    code: i32,
    message: String,
}

fn config_error(message: impl Into<String>) -> Failure {
    Failure {
        code: EXIT_CONFIG,
        message: message.into(),
    }
}

fn io_error(path: &Path, e: io::Error) -> Failure {
    Failure {
        code: EXIT_IO,
        message: format!("{}: {e}", path.display()),
    }
}

fn load_scenario(arg: &str) -> Result<Scenario, Failure> {
    if let Some(s) = scenario::builtin(arg) {
        return Ok(s);
    }
    let path = Path::new(arg);
    if !path.exists() {
        return Err(config_error(format!(
            "unknown scenario `{arg}` (built-ins: {})",
            scenario::BUILTIN_NAMES.join(", ")
        )));
    }
    let text = fs::read_to_string(path).map_err(|e| io_error(path, e))?;
    parse_scenario(&text).map_err(|e| config_error(format!("{}: {e}", path.display())))
}

fn manual_scenario() -> Scenario {
    Scenario {
        name: "manual".into(),
        duration_ms: 0,
        initial_temp: DeciCelsius(250),
        initial_setpoint: DeciCelsius(250),
        events: Vec::new(),
    }
}

fn rate(name: &str, v: f64) -> Result<Rate, Failure> {
    Rate::from_per_sec(v).ok_or_else(|| config_error(format!("--{name} must be a nonnegative rate, got {v}")))
}

fn build_config(scenario: &Scenario, o: &Overrides) -> Result<LoopConfig, Failure> {
    let mut cfg = LoopConfig::for_scenario(scenario);
    if let Some(v) = o.kp {
        cfg.gains.kp = v;
    }
    if let Some(v) = o.ki {
        cfg.gains.ki = v;
    }
    if let Some(v) = o.kd {
        cfg.gains.kd = v;
    }
    if let Some(v) = o.t_amb {
        cfg.plant.t_amb = DeciCelsius(v);
    }
    if let Some(v) = o.t_src {
        cfg.plant.t_src = DeciCelsius(v);
    }
    if let Some(v) = o.k_passive {
        cfg.plant.k_passive = rate("k-passive", v)?;
    }
    if let Some(v) = o.k_fan {
        cfg.plant.k_fan = rate("k-fan", v)?;
    }
    if let Some(v) = o.k_src {
        cfg.plant.k_src = rate("k-src", v)?;
    }
    if let Some(v) = o.threshold {
        cfg.safety = SafetyConfig::new(DeciCelsius(v))
            .ok_or_else(|| config_error(format!("--threshold must be positive, got {v}")))?;
    }
    if let Some(ms) = o.duration {
        cfg.duration = Duration::from_millis(ms);
    }
    if let Some(seed) = o.seed {
        cfg.seed = seed;
    }
    cfg.validate().map_err(|e| config_error(e.to_string()))?;
    Ok(cfg)
}

fn default_metrics_path(out: &Path) -> PathBuf {
    out.with_extension("metrics.json")
}

fn print_metrics(w: &mut dyn Write, name: &str, cycles: usize, m: &RunMetrics) -> io::Result<()> {
    let opt = |v: Option<u64>| v.map_or_else(|| "-".to_owned(), |v| v.to_string());
    let rows: [(&str, String); 8] = [
        ("scenario", name.to_owned()),
        ("cycles", cycles.to_string()),
        ("response_latency_cycles", opt(m.response_latency_cycles.map(u64::from))),
        ("time_to_full_duty_ms", m.time_to_full_duty_ms.to_string()),
        ("undershoot_deci", m.undershoot_deci.to_string()),
        ("alarm_first_ms", opt(m.alarm_first_ms)),
        ("idle_duty_violations", m.idle_duty_violations.to_string()),
        ("saturation_held", m.saturation_held.to_string()),
    ];
    for (k, v) in rows {
        writeln!(w, "{k:<24} {v}")?;
    }
    Ok(())
}

fn cmd_run(args: RunArgs, out: &mut dyn Write) -> Result<(), Failure> {
    let scenario = load_scenario(&args.scenario)?;
    let cfg = build_config(&scenario, &args.overrides)?;
    let run = run_scenario(&cfg, &scenario).map_err(|e| config_error(e.to_string()))?;

    let out_path = args.out.unwrap_or_else(|| {
        let ext = match args.format {
            Format::Csv => "csv",
            Format::Jsonl => "jsonl",
        };
        PathBuf::from(format!("{}.{ext}", scenario.name))
    });
    let file = File::create(&out_path).map_err(|e| io_error(&out_path, e))?;
    let w = BufWriter::new(file);
    match args.format {
        Format::Csv => write_csv(w, &run.records),
        Format::Jsonl => write_jsonl(w, &run.records),
    }
    .map_err(|e| io_error(&out_path, e))?;

    let metrics_path = args.metrics.unwrap_or_else(|| default_metrics_path(&out_path));
    let mut json = serde_json::to_string_pretty(&run.metrics).expect("metrics serialize");
    json.push('\n');
    fs::write(&metrics_path, json).map_err(|e| io_error(&metrics_path, e))?;

    print_metrics(out, &scenario.name, run.records.len(), &run.metrics).map_err(|e| io_error(Path::new("<stdout>"), e))
}

fn cmd_serve(args: ServeArgs, err: &mut dyn Write) -> Result<(), Failure> {
    let scenario = match &args.scenario {
        Some(s) => load_scenario(s)?,
        None => manual_scenario(),
    };
    let cfg = build_config(&scenario, &args.overrides)?;
    if args.pace_ms == 0 {
        return Err(config_error("--pace-ms must be positive"));
    }
    let opts = LiveOptions {
        cfg,
        scenario,
        pace: Duration::from_millis(args.pace_ms),
    };
    let addr = SocketAddr::new(args.bind, args.port);

    let runtime = tokio::runtime::Runtime::new().map_err(|e| io_error(Path::new("<runtime>"), e))?;
    runtime.block_on(async {
        let listener = tokio::net::TcpListener::bind(addr)
            .await
            .map_err(|e| io_error(Path::new(&addr.to_string()), e))?;
        let _ = writeln!(
            err,
            "thermoloop: live session on http://{addr} (stream, command, snapshot)"
        );
        live::serve(listener, opts).await.map_err(|e| match e {
            live::ServeError::Engine(e) => config_error(e.to_string()),
            live::ServeError::Io(e) => io_error(Path::new(&addr.to_string()), e),
        })
    })
}

/// Runs the command line and returns the process exit status.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let text = e.render().to_string();
            let _ = if e.use_stderr() {
                write!(err, "{text}")
            } else {
                write!(out, "{text}")
            };
            return e.exit_code();
        }
    };
    let result = match cli.command {
        Command::Run(args) => cmd_run(args, out),
        Command::Serve(args) => cmd_serve(args, err),
        Command::Scenario { name } => match scenario::builtin(&name) {
            Some(s) => write!(out, "{}", format_scenario(&s)).map_err(|e| io_error(Path::new("<stdout>"), e)),
            None => Err(config_error(format!("unknown scenario `{name}`"))),
        },
    };
    match result {
        Ok(()) => 0,
        Err(f) => {
            let _ = writeln!(err, "thermoloop: {}", f.message);
            f.code
        }
    }
}
