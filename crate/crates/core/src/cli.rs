//! Command-line front end.
//!
//! `run` resolves a configuration (preset < config file < flags), executes
//! the engine and writes `params.json`, `timeseries.csv`, `hist.csv` and
//! `snapshot_<t>.csv` into the output directory. `presets` lists the
//! built-in experiments.

use std::fs::{self, File};
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::Value;
use thiserror::Error;

use crate::engine::{
    self, EngineError, KnowledgeGroup, Observer, PersonaShare, SimulationConfig, Topology, TransmissionRecord,
    DEFAULT_BINS,
};
use crate::game::{ReceiverAction, SenderAction};
use crate::metrics::{self, fmt_g9, Recorder};
use crate::model::{GlobalParams, Personality, Violations};

pub const EXIT_OK: i32 = 0;
pub const EXIT_RUNTIME: i32 = 1;
pub const EXIT_CONFIG: i32 = 2;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Preset {
    Troll,
    Expert,
    Mixed,
}

impl Preset {
    pub const ALL: [Preset; 3] = [Preset::Troll, Preset::Expert, Preset::Mixed];

    pub fn name(self) -> &'static str {
        match self {
            Preset::Troll => "troll",
            Preset::Expert => "expert",
            Preset::Mixed => "mixed",
        }
    }

    pub fn config(self) -> SimulationConfig {
        let troll = |fraction| PersonaShare {
            fraction,
            name: "troll".into(),
            personality: Personality::TROLL,
        };
        let expert = |fraction| PersonaShare {
            fraction,
            name: "expert".into(),
            personality: Personality::EXPERT,
        };
        let (personas, snapshot_times) = match self {
            Preset::Troll => (vec![troll(1.0)], vec![]),
            Preset::Expert => (vec![expert(1.0)], vec![800.0]),
            Preset::Mixed => (vec![expert(0.5), troll(0.5)], vec![]),
        };
        SimulationConfig {
            actor_count: 1000,
            params: GlobalParams::default(),
            personas,
            initial_k_groups: [0.1, 0.5, 0.9]
                .into_iter()
                .map(|k| KnowledgeGroup {
                    fraction: 1.0 / 3.0,
                    k,
                })
                .collect(),
            steps_per_actor: 10_000.0,
            sample_interval: 1.0,
            snapshot_times,
            seed: 1,
            topology: Topology::Complete,
            histogram_bins: DEFAULT_BINS,
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "dissemination", version, about = "Sender/receiver information dissemination game simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run a simulation and write its metrics.
    Run(RunArgs),
    /// List the built-in presets.
    Presets,
}

/// Flag overrides, applied on top of preset and config file.
#[derive(Debug, Clone, Default, Args)]
pub struct Overrides {
    /// RNG seed.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Population size.
    #[arg(long = "actors")]
    pub actors: Option<usize>,
    /// Number of assertions N in the piece of information.
    #[arg(long = "assertions")]
    pub assertions: Option<u32>,
    /// Fraction of assertions that are true.
    #[arg(long, allow_negative_numbers = true)]
    pub phi: Option<f64>,
    /// Popularity decay per transmission.
    #[arg(long, allow_negative_numbers = true)]
    pub delta: Option<f64>,
    /// Weight of undecided assertions in knowledge.
    #[arg(long, allow_negative_numbers = true)]
    pub lambda: Option<f64>,
    /// Horizon in simulated time units.
    #[arg(long = "steps-per-actor")]
    pub steps_per_actor: Option<f64>,
    /// Time between timeseries/histogram samples.
    #[arg(long = "sample-every")]
    pub sample_every: Option<f64>,
    /// Comma-separated snapshot times.
    #[arg(long = "snapshot-at", value_delimiter = ',')]
    pub snapshot_at: Option<Vec<f64>>,
    /// Histogram bin count.
    #[arg(long)]
    pub bins: Option<usize>,
}

impl Overrides {
    pub fn apply(&self, cfg: &mut SimulationConfig) {
        if let Some(v) = self.seed {
            cfg.seed = v;
        }
        if let Some(v) = self.actors {
            cfg.actor_count = v;
        }
        if let Some(v) = self.assertions {
            cfg.params.big_n = v;
        }
        if let Some(v) = self.phi {
            cfg.params.phi = v;
        }
        if let Some(v) = self.delta {
            cfg.params.delta = v;
        }
        if let Some(v) = self.lambda {
            cfg.params.lambda = v;
        }
        if let Some(v) = self.steps_per_actor {
            cfg.steps_per_actor = v;
        }
        if let Some(v) = self.sample_every {
            cfg.sample_interval = v;
        }
        if let Some(v) = &self.snapshot_at {
            cfg.snapshot_times = v.clone();
        }
        if let Some(v) = self.bins {
            cfg.histogram_bins = v;
        }
    }
}

#[derive(Debug, Args)]
struct RunArgs {
    #[arg(long, value_enum)]
    preset: Option<Preset>,
    /// JSON file with (a subset of) the configuration fields.
    #[arg(long)]
    config: Option<PathBuf>,
    #[command(flatten)]
    overrides: Overrides,
    #[arg(long, default_value = "out")]
    out: PathBuf,
    /// Also write events.csv with one row per transmission.
    #[arg(long = "log-events")]
    log_events: bool,
}

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Read {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
    #[error("{path}: line {line}, column {column}: {message}")]
    Parse {
        path: PathBuf,
        line: usize,
        column: usize,
        message: String,
    },
    #[error("{path}: field `{field}`: {message}")]
    Field {
        path: PathBuf,
        field: String,
        message: String,
    },
    #[error("invalid configuration: {0}")]
    Invalid(#[from] Violations),
}

fn merge(base: &mut Value, overlay: Value) {
    match (base, overlay) {
        (Value::Object(b), Value::Object(o)) => {
            for (k, v) in o {
                match b.get_mut(&k) {
                    Some(slot) => merge(slot, v),
                    None => {
                        b.insert(k, v);
                    }
                }
            }
        }
        (slot, v) => *slot = v,
    }
}

/// Resolves preset, optional config file and flag overrides into a validated
/// configuration.
pub fn load_config(
    preset: Option<Preset>,
    path: Option<&Path>,
    overrides: &Overrides,
) -> Result<SimulationConfig, ConfigError> {
    let base = preset.unwrap_or(Preset::Troll).config();
    let mut cfg = match path {
        None => base,
        Some(path) => {
            let text = fs::read_to_string(path).map_err(|source| ConfigError::Read {
                path: path.to_path_buf(),
                source,
            })?;
            let overlay: Value = serde_json::from_str(&text).map_err(|e| ConfigError::Parse {
                path: path.to_path_buf(),
                line: e.line(),
                column: e.column(),
                message: e.to_string(),
            })?;
            let mut merged = serde_json::to_value(&base).expect("config serializes");
            merge(&mut merged, overlay);
            serde_path_to_error::deserialize(merged).map_err(|e| ConfigError::Field {
                path: path.to_path_buf(),
                field: e.path().to_string(),
                message: e.inner().to_string(),
            })?
        }
    };
    overrides.apply(&mut cfg);
    cfg.validate()?;
    Ok(cfg)
}

struct EventLog<W: Write> {
    out: W,
}

impl<W: Write> EventLog<W> {
    const HEADER: &'static str =
        "step,sim_time,sender,receiver,sender_action,receiver_action,tiebreak,u_s_forward_feedback,u_r_forward_feedback,u_s_forward_nofeedback,u_r_forward_nofeedback,u_s_hold,u_r_hold";

    fn new(mut out: W) -> io::Result<Self> {
        writeln!(out, "{}", Self::HEADER)?;
        Ok(EventLog { out })
    }
}

impl<W: Write> Observer for EventLog<W> {
    fn on_transmission(&mut self, rec: &TransmissionRecord) -> io::Result<()> {
        let s = match rec.profile.sender_action {
            SenderAction::Forward => "forward",
            SenderAction::Hold => "hold",
        };
        let r = match rec.profile.receiver_action {
            ReceiverAction::Feedback => "feedback",
            ReceiverAction::NoFeedback => "nofeedback",
        };
        write!(
            self.out,
            "{},{},{},{},{s},{r},{}",
            rec.step,
            fmt_g9(rec.sim_time),
            rec.sender_id,
            rec.receiver_id,
            u8::from(rec.profile.selected_by_tiebreak)
        )?;
        match &rec.matrix {
            Some(m) => {
                for v in [
                    m.u_s_forward_feedback,
                    m.u_r_forward_feedback,
                    m.u_s_forward_nofeedback,
                    m.u_r_forward_nofeedback,
                    m.u_s_hold,
                    m.u_r_hold,
                ] {
                    write!(self.out, ",{}", fmt_g9(v))?;
                }
                writeln!(self.out)
            }
            None => writeln!(self.out, ",,,,,,"),
        }
    }
}

#[derive(Debug, Error)]
enum RunError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Engine(#[from] EngineError),
    #[error("{context}: {source}")]
    Io {
        context: String,
        #[source]
        source: io::Error,
    },
}

impl RunError {
    fn exit_code(&self) -> i32 {
        match self {
            RunError::Config(_) => EXIT_CONFIG,
            RunError::Engine(EngineError::Config(_) | EngineError::Topology { .. }) => EXIT_CONFIG,
            _ => EXIT_RUNTIME,
        }
    }
}

fn io_ctx(context: impl Into<String>) -> impl FnOnce(io::Error) -> RunError {
    let context = context.into();
    move |source| RunError::Io { context, source }
}

fn create(path: &Path) -> Result<BufWriter<File>, RunError> {
    File::create(path)
        .map(BufWriter::new)
        .map_err(io_ctx(format!("creating {}", path.display())))
}

fn run_command(args: &RunArgs, stdout: &mut dyn Write) -> Result<(), RunError> {
    let cfg = load_config(args.preset, args.config.as_deref(), &args.overrides)?;
    let out = &args.out;
    fs::create_dir_all(out).map_err(io_ctx(format!("creating {}", out.display())))?;

    let params_path = out.join("params.json");
    let mut json = serde_json::to_string_pretty(&cfg).expect("config serializes");
    json.push('\n');
    fs::write(&params_path, json).map_err(io_ctx(format!("writing {}", params_path.display())))?;

    // the final state is always dumped alongside the requested snapshots
    let mut run_cfg = cfg.clone();
    let horizon = cfg.total_steps() as f64 / cfg.actor_count as f64;
    if !run_cfg.snapshot_times.iter().any(|&t| (t * cfg.actor_count as f64).round() as u64 == cfg.total_steps()) {
        run_cfg.snapshot_times.push(horizon);
    }

    let mut recorder = Recorder::new(cfg.histogram_bins);
    let summary = if args.log_events {
        let path = out.join("events.csv");
        let mut log = EventLog::new(create(&path)?).map_err(io_ctx(format!("writing {}", path.display())))?;
        let s = engine::run(&run_cfg, &mut [&mut recorder, &mut log])?;
        log.out.flush().map_err(io_ctx(format!("writing {}", path.display())))?;
        s
    } else {
        engine::run(&run_cfg, &mut [&mut recorder])?
    };

    let path = out.join("timeseries.csv");
    metrics::write_timeseries(&recorder.timeseries, create(&path)?).map_err(io_ctx(format!("writing {}", path.display())))?;
    let path = out.join("hist.csv");
    metrics::write_histograms(&recorder.histograms, create(&path)?).map_err(io_ctx(format!("writing {}", path.display())))?;
    for (t, records) in &recorder.snapshots {
        let path = out.join(format!("snapshot_{}.csv", fmt_g9(*t)));
        metrics::write_snapshot(records, create(&path)?).map_err(io_ctx(format!("writing {}", path.display())))?;
    }

    let last = &summary.last;
    writeln!(
        stdout,
        "t={} mean_k={} initial_mean_k={} mean_f_plus={} mean_f_minus={} clamp_events={} clamped=[{}]",
        fmt_g9(last.sim_time),
        fmt_g9(last.mean_k),
        fmt_g9(summary.initial.mean_k),
        fmt_g9(last.mean_f_plus),
        fmt_g9(last.mean_f_minus),
        summary.clamp.count,
        summary.clamp.clamped_fields.join(",")
    )
    .map_err(io_ctx("writing summary"))?;
    Ok(())
}

fn list_presets(stdout: &mut dyn Write) -> io::Result<()> {
    for p in Preset::ALL {
        let c = p.config();
        let personas: Vec<String> = c
            .personas
            .iter()
            .map(|s| {
                format!(
                    "{}% {} (kappa={}, sigma={}, pi={})",
                    fmt_g9(s.fraction * 100.0),
                    s.name,
                    s.personality.kappa,
                    s.personality.sigma,
                    s.personality.pi
                )
            })
            .collect();
        let ks: Vec<String> = c.initial_k_groups.iter().map(|g| fmt_g9(g.k)).collect();
        writeln!(
            stdout,
            "{:<7} actors={} N={} phi={} delta={} lambda={} steps/actor={} initial k=[{}] snapshots={:?} personas: {}",
            p.name(),
            c.actor_count,
            c.params.big_n,
            c.params.phi,
            c.params.delta,
            c.params.lambda,
            c.steps_per_actor,
            ks.join(", "),
            c.snapshot_times,
            personas.join(", ")
        )?;
    }
    Ok(())
}

/// Runs the command line and returns the process exit code.
pub fn run_cli<I, T>(args: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_CONFIG } else { EXIT_OK };
            let sink: &mut dyn Write = if e.use_stderr() { stderr } else { stdout };
            let _ = write!(sink, "{}", e.render());
            return code;
        }
    };
    match cli.command {
        Command::Presets => match list_presets(stdout) {
            Ok(()) => EXIT_OK,
            Err(e) => {
                let _ = writeln!(stderr, "error: {e}");
                EXIT_RUNTIME
            }
        },
        Command::Run(args) => match run_command(&args, stdout) {
            Ok(()) => EXIT_OK,
            Err(e) => {
                let _ = writeln!(stderr, "error: {e}");
                e.exit_code()
            }
        },
    }
}
