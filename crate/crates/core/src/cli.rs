//! Command-line entry points.

use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand, ValueEnum};

use crate::detector::{DetectionKind, Detector, Phase};
use crate::error::{Error, Result};
use crate::fsm::TaskMotion;
use crate::image::SensorId;
use crate::io::archive::{ArchiveSource, FrameArchive, PixelFormat, Recorder};
use crate::io::config::{RunConfig, CONFIG_ENV};
use crate::io::report::{format_table, summarize};
use crate::run::{run_to_completion, LogActuator, Rig, RunReport};
use crate::sim::{Scenario, SimWorld};

#[derive(Debug, Parser)]
#[command(
    name = "tactile-slip",
    version,
    about = "Tactile touch/slip detection and grasp modulation"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Print the calibrated noise threshold of every sensor in an archive.
    Calibrate {
        archive: PathBuf,
        #[arg(long, help = config_help())]
        config: Option<PathBuf>,
    },
    /// Stream detection events from an archive as JSON lines.
    Detect {
        archive: PathBuf,
        #[arg(long, help = config_help())]
        config: Option<PathBuf>,
    },
    /// Run the closed loop against the simulator and emit run reports.
    Simulate {
        /// Preset name or scenario file.
        #[arg(long)]
        scenario: Option<String>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long, help = config_help())]
        config: Option<PathBuf>,
        /// Number of runs with consecutive seeds.
        #[arg(long, default_value_t = 1)]
        repeat: u32,
        /// Report file for a single run.
        #[arg(long, conflicts_with = "out_dir")]
        out: Option<PathBuf>,
        /// Directory receiving one `<scenario>-seed<seed>.json` per run.
        #[arg(long)]
        out_dir: Option<PathBuf>,
        /// Write detection events as JSON lines.
        #[arg(long)]
        events: Option<PathBuf>,
        /// Record the frames of a single run as a TGF1 archive.
        #[arg(long)]
        dump_frames: Option<PathBuf>,
        #[arg(long, value_enum, default_value_t = Format::F32)]
        format: Format,
    },
    /// Drive the state machine from recorded frames with a logging actuator.
    Replay {
        archive: PathBuf,
        #[arg(long, help = config_help())]
        config: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Write the actuation log here.
        #[arg(long)]
        log: Option<PathBuf>,
        /// Gripper opening at the start, metres.
        #[arg(long, default_value_t = 0.05)]
        initial_width: f64,
    },
    /// Aggregate run reports into a mean ± std table.
    Report {
        #[arg(required = true)]
        reports: Vec<PathBuf>,
        /// Print the summary as JSON instead of a table.
        #[arg(long)]
        json: bool,
    },
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Format {
    U8,
    F32,
}

fn config_help() -> String {
    format!("Run configuration file (defaults to ${CONFIG_ENV})")
}

/// Parses `args` and runs the command; returns the process exit code.
pub fn main_with_args<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = e.exit_code();
            let text = e.render().to_string();
            let _ = if code == 0 {
                write!(out, "{text}")
            } else {
                write!(err, "{text}")
            };
            return code;
        }
    };
    match execute(cli.command, out, err) {
        Ok(()) => 0,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            1
        }
    }
}

fn execute(command: Command, out: &mut dyn Write, err: &mut dyn Write) -> Result<()> {
    match command {
        Command::Calibrate { archive, config } => calibrate(&archive, config.as_deref(), out),
        Command::Detect { archive, config } => detect(&archive, config.as_deref(), out, err),
        Command::Simulate {
            scenario,
            seed,
            config,
            repeat,
            out: out_path,
            out_dir,
            events,
            dump_frames,
            format,
        } => {
            let mut cfg = RunConfig::resolve(config.as_deref())?;
            if let Some(seed) = seed {
                cfg.seed = seed;
            }
            let name = scenario.or_else(|| cfg.scenario.clone()).ok_or_else(|| {
                Error::Config("no scenario given (--scenario or `scenario =`)".into())
            })?;
            let scenario = Scenario::resolve(&name)?;
            let opts = SimulateOutput {
                out: out_path,
                out_dir,
                events,
                dump_frames,
                format: match format {
                    Format::U8 => PixelFormat::U8Rgb,
                    Format::F32 => PixelFormat::F32Rgb,
                },
            };
            simulate(&cfg, &scenario, repeat, &opts, out)
        }
        Command::Replay {
            archive,
            config,
            out: out_path,
            log,
            initial_width,
        } => replay(
            &archive,
            config.as_deref(),
            out_path.as_deref(),
            log.as_deref(),
            initial_width,
            out,
        ),
        Command::Report { reports, json } => report(&reports, json, out),
    }
}

fn load_archive(path: &Path) -> Result<FrameArchive> {
    FrameArchive::read(path).map_err(|e| match e {
        Error::Io(io) => Error::Config(format!("{}: {io}", path.display())),
        other => other,
    })
}

fn calibrate(path: &Path, config: Option<&Path>, out: &mut dyn Write) -> Result<()> {
    let cfg = RunConfig::resolve(config)?;
    let archive = load_archive(path)?;
    let sensors = usize::from(archive.header().sensor_count).min(2);
    for s in 0..sensors {
        let sensor = SensorId::from_index(s).expect("index below 2");
        let mut det = Detector::new(sensor, cfg.detection())?;
        let mut result = None;
        for t in 0..archive.frame_count() {
            result = det.calibrate_step(&archive.frame(t, s)?)?;
            if result.is_some() {
                break;
            }
        }
        let cal = result.ok_or_else(|| {
            Error::FrameSource(format!(
                "sensor {sensor}: calibration needs {} frames, archive has {}",
                cfg.calibration_frames + 1,
                archive.frame_count()
            ))
        })?;
        writeln!(
            out,
            "{sensor} tau_n={:.9} samples={}",
            cal.tau_n, cal.sample_count
        )?;
    }
    Ok(())
}

fn detect(
    path: &Path,
    config: Option<&Path>,
    out: &mut dyn Write,
    err: &mut dyn Write,
) -> Result<()> {
    let cfg = RunConfig::resolve(config)?;
    let archive = load_archive(path)?;
    let sensors = usize::from(archive.header().sensor_count).min(2);
    let mut detectors = (0..sensors)
        .map(|s| {
            Detector::new(
                SensorId::from_index(s).expect("index below 2"),
                cfg.detection(),
            )
        })
        .collect::<Result<Vec<_>>>()?;
    for t in 0..archive.frame_count() {
        for (s, det) in detectors.iter_mut().enumerate() {
            if let Some(event) = det.advance(&archive.frame(t, s)?, cfg.tau_d_ini)? {
                writeln!(out, "{}", serde_json::to_string(&event)?)?;
                if event.kind == DetectionKind::Touch {
                    det.rearm_as_slip()?;
                }
            }
        }
    }
    for det in &detectors {
        if det.phase() != Phase::Armed {
            writeln!(
                err,
                "warning: sensor {} never armed; archive too short",
                det.sensor()
            )?;
        }
    }
    Ok(())
}

struct SimulateOutput {
    out: Option<PathBuf>,
    out_dir: Option<PathBuf>,
    events: Option<PathBuf>,
    dump_frames: Option<PathBuf>,
    format: PixelFormat,
}

fn simulate_one(
    cfg: &RunConfig,
    scenario: &Scenario,
    dump: Option<(&Path, PixelFormat)>,
) -> Result<RunReport> {
    let world = SimWorld::new(scenario, cfg.seed, cfg.dt_s)?;
    match dump {
        None => {
            let mut world = world;
            run_to_completion(cfg, scenario.task, &scenario.name, &mut world)
        }
        Some((path, format)) => {
            let mut rec = Recorder::new(world, scenario.params.dims, format)?;
            let report = run_to_completion(cfg, scenario.task, &scenario.name, &mut rec)?;
            rec.finish().1.write(path)?;
            Ok(report)
        }
    }
}

fn simulate(
    cfg: &RunConfig,
    scenario: &Scenario,
    repeat: u32,
    opts: &SimulateOutput,
    out: &mut dyn Write,
) -> Result<()> {
    if repeat == 0 {
        return Err(Error::Config("--repeat must be >= 1".into()));
    }
    if repeat > 1 && (opts.out.is_some() || opts.dump_frames.is_some()) {
        return Err(Error::Config(
            "--out and --dump-frames need a single run; use --out-dir".into(),
        ));
    }
    let configs: Vec<RunConfig> = (0..u64::from(repeat))
        .map(|i| RunConfig {
            seed: cfg.seed.wrapping_add(i),
            ..cfg.clone()
        })
        .collect();
    let dump = opts.dump_frames.as_deref().map(|p| (p, opts.format));
    let reports: Vec<Result<RunReport>> = if configs.len() == 1 {
        vec![simulate_one(&configs[0], scenario, dump)]
    } else {
        std::thread::scope(|scope| {
            let handles: Vec<_> = configs
                .iter()
                .map(|c| scope.spawn(move || simulate_one(c, scenario, None)))
                .collect();
            handles
                .into_iter()
                .map(|h| h.join().expect("simulation thread panicked"))
                .collect()
        })
    };
    let reports = reports.into_iter().collect::<Result<Vec<_>>>()?;

    if let Some(dir) = &opts.out_dir {
        std::fs::create_dir_all(dir)?;
    }
    let mut event_lines = String::new();
    for report in &reports {
        for event in &report.events {
            event_lines.push_str(&serde_json::to_string(event)?);
            event_lines.push('\n');
        }
        let json = report.to_json();
        if let Some(dir) = &opts.out_dir {
            std::fs::write(
                dir.join(format!("{}-seed{}.json", report.source, report.seed)),
                &json,
            )?;
        } else if let Some(path) = &opts.out {
            std::fs::write(path, &json)?;
        } else {
            writeln!(out, "{json}")?;
            continue;
        }
        writeln!(
            out,
            "{} seed={} outcome={:?} steps={} slips={} compression={:.2}%",
            report.source,
            report.seed,
            report.outcome,
            report.duration_steps,
            report.slip_count,
            report.compression_pct
        )?;
    }
    if let Some(path) = &opts.events {
        std::fs::write(path, event_lines)?;
    }
    Ok(())
}

fn replay(
    path: &Path,
    config: Option<&Path>,
    out_path: Option<&Path>,
    log: Option<&Path>,
    initial_width: f64,
    out: &mut dyn Write,
) -> Result<()> {
    let cfg = RunConfig::resolve(config)?;
    let archive = load_archive(path)?;
    let mut rig = Rig {
        source: ArchiveSource::new(archive)?,
        actuator: LogActuator::new(initial_width, cfg.dt_s),
    };
    let name = path
        .file_name()
        .map(|n| n.to_string_lossy().into_owned())
        .unwrap_or_default();
    let report = run_to_completion(&cfg, TaskMotion::lift(), &name, &mut rig)?;
    if let Some(log) = log {
        let mut text = rig.actuator.log().join("\n");
        text.push('\n');
        std::fs::write(log, text)?;
    }
    match out_path {
        Some(p) => std::fs::write(p, report.to_json())?,
        None => writeln!(out, "{}", report.to_json())?,
    }
    Ok(())
}

fn report(paths: &[PathBuf], json: bool, out: &mut dyn Write) -> Result<()> {
    let reports = paths
        .iter()
        .map(|p| {
            let text = std::fs::read_to_string(p)
                .map_err(|e| Error::Report(format!("{}: {e}", p.display())))?;
            RunReport::from_json(&text).map_err(|e| Error::Report(format!("{}: {e}", p.display())))
        })
        .collect::<Result<Vec<_>>>()?;
    let rows = summarize(&reports)?;
    if json {
        writeln!(out, "{}", serde_json::to_string_pretty(&rows)?)?;
    } else {
        write!(out, "{}", format_table(&rows))?;
    }
    Ok(())
}
