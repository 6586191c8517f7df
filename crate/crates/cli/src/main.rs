//! `mlai`: run scenarios, benchmark request latency, compare re-identification
//! methods, extract descriptors and inspect artefacts.
//!
//! Exit codes: 0 success, 1 usage, 2 invalid or missing scenario, 3 simulation
//! failure (deadlock or protocol violation), 4 I/O or transport failure.
//! Reports go to stdout, diagnostics to stderr. Verbosity comes from `MLAI_LOG`.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use log::{debug, info};

use mlai_core::features::{extract_feature, FeatureConfig, FeatureVector};
use mlai_core::imaging::{decode_frame, decode_pnm, Frame, MLF1_MAGIC};
use mlai_core::protocol::{FrameReader, DEFAULT_APDEX_THRESHOLD_S};
use mlai_core::rng::mix;
use mlai_core::service::{run_bench, BenchConfig, DelaySpec, RequestKind, ServiceError};
use mlai_core::sim::{compare_reid, demo_scenario, load_suite, run_scenario, Scenario, SimError};

#[derive(Debug, Parser)]
#[command(
    name = "mlai",
    version,
    about = "Multi-sensor target re-identification and handover toolkit"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Csv,
    Jsonl,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Simulate a scenario and write its event log and metrics summary.
    Run {
        /// Scenario file (TOML).
        #[arg(long)]
        scenario: PathBuf,
        /// Replaces the scenario's seed.
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long, default_value = "out")]
        out: PathBuf,
        /// Event log format.
        #[arg(long, value_enum, default_value_t = Format::Jsonl)]
        format: Format,
    },
    /// Time detect/track requests against a TCP vision back-end and print Apdex.
    Bench {
        /// Scenario providing the frames; the built-in demo when absent.
        #[arg(long)]
        scenario: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
        /// Requests per kind.
        #[arg(long, default_value_t = 100)]
        samples: u32,
        /// Satisfied threshold T in seconds.
        #[arg(long = "threshold-s", default_value_t = DEFAULT_APDEX_THRESHOLD_S)]
        threshold_s: f64,
        /// Injected server delay `kind:count:seconds`, repeatable.
        #[arg(long = "delay")]
        delays: Vec<String>,
        /// Only these request kinds (detect, track).
        #[arg(long = "kind")]
        kinds: Vec<String>,
        /// Sleep through injected delays instead of accounting for them.
        #[arg(long)]
        real_time: bool,
        /// Also write per-request timings here.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Compare one-way and two-way re-identification over a scenario suite.
    CompareReid {
        /// Directory of scenario files.
        #[arg(long)]
        suite: PathBuf,
        /// Re-seeds every scenario from this value.
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long, default_value = "out")]
        out: PathBuf,
        #[arg(long, value_enum, default_value_t = Format::Csv)]
        format: Format,
    },
    /// Compute the appearance descriptor of a whole image (MLF1, PPM or PGM).
    Extract {
        image: PathBuf,
        #[arg(long, default_value = "out")]
        out: PathBuf,
    },
    /// Describe a scenario, image, feature or framed message file.
    Inspect { path: PathBuf },
}

#[derive(Debug)]
struct Failure {
    code: u8,
    message: String,
}

impl Failure {
    fn usage(message: impl Into<String>) -> Self {
        Failure {
            code: 1,
            message: message.into(),
        }
    }

    fn io(path: &Path, e: impl std::fmt::Display) -> Self {
        Failure {
            code: 4,
            message: format!("{}: {e}", path.display()),
        }
    }
}

impl From<SimError> for Failure {
    fn from(e: SimError) -> Self {
        let code = match e {
            SimError::ScenarioInvalid(_) | SimError::ScenarioMissing(_) | SimError::UnknownSensor(_) => 2,
            _ => 3,
        };
        Failure {
            code,
            message: e.to_string(),
        }
    }
}

impl From<ServiceError> for Failure {
    fn from(e: ServiceError) -> Self {
        match e {
            ServiceError::InvalidConfig(m) => Failure::usage(m),
            ServiceError::Sim(s) => s.into(),
            other => Failure {
                code: 4,
                message: other.to_string(),
            },
        }
    }
}

type CmdResult = Result<(), Failure>;

fn write(path: &Path, bytes: impl AsRef<[u8]>) -> CmdResult {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| Failure::io(dir, e))?;
    }
    fs::write(path, bytes).map_err(|e| Failure::io(path, e))?;
    info!("wrote {}", path.display());
    Ok(())
}

fn load_scenario(path: &Path, seed: Option<u64>) -> Result<Scenario, Failure> {
    let mut scn = Scenario::load(path)?;
    if let Some(s) = seed {
        scn.seed = s;
    }
    Ok(scn)
}

fn cmd_run(scenario: &Path, seed: Option<u64>, out: &Path, format: Format) -> CmdResult {
    let scn = load_scenario(scenario, seed)?;
    debug!("running {} with seed {}", scn.name, scn.seed);
    let outcome = run_scenario(&scn)?;
    match format {
        Format::Jsonl => write(&out.join("events.jsonl"), outcome.log.to_jsonl())?,
        Format::Csv => write(&out.join("events.csv"), outcome.log.to_csv())?,
    }
    write(&out.join("metrics.csv"), outcome.log.to_csv())?;
    let summary = serde_json::json!({
        "scenario": scn.name,
        "seed": scn.seed,
        "frames_run": outcome.frames_run,
        "episodes": outcome.episodes,
        "events": outcome.log.len(),
        "handover": outcome.handover,
        "final_phases": outcome.final_phases.iter().map(|(k, v)| (k.to_string(), *v)).collect::<std::collections::BTreeMap<_, _>>(),
    });
    let text = serde_json::to_string_pretty(&summary).expect("summary serialises");
    write(&out.join("summary.json"), format!("{text}\n"))?;
    println!("{text}");
    Ok(())
}

#[allow(clippy::too_many_arguments)]
fn cmd_bench(
    scenario: Option<&Path>,
    seed: Option<u64>,
    samples: u32,
    threshold_s: f64,
    delays: &[String],
    kinds: &[String],
    real_time: bool,
    out: Option<&Path>,
) -> CmdResult {
    let mut scn = match scenario {
        Some(p) => load_scenario(p, None)?,
        None => demo_scenario(),
    };
    if let Some(s) = seed {
        scn.seed = s;
    }
    let delays = delays
        .iter()
        .map(|d| d.parse::<DelaySpec>())
        .collect::<Result<Vec<_>, _>>()?;
    let mut cfg = BenchConfig {
        samples,
        threshold_s,
        delays,
        virtual_time: !real_time,
        ..BenchConfig::default()
    };
    if !kinds.is_empty() {
        cfg.kinds = kinds
            .iter()
            .map(|k| k.parse::<RequestKind>())
            .collect::<Result<Vec<_>, _>>()?;
    }
    let report = run_bench(&scn, &cfg)?;
    print!("{}", report.table.render());
    if let Some(dir) = out {
        let lines: String = report
            .timers
            .iter()
            .map(|t| serde_json::to_string(t).expect("timer serialises") + "\n")
            .collect();
        write(&dir.join("bench.jsonl"), lines)?;
    }
    Ok(())
}

fn cmd_compare(suite_dir: &Path, seed: Option<u64>, out: &Path, format: Format) -> CmdResult {
    let mut suite = load_suite(suite_dir)?;
    if suite.is_empty() {
        return Err(Failure {
            code: 2,
            message: format!("{}: no scenario files", suite_dir.display()),
        });
    }
    if let Some(s) = seed {
        for (i, scn) in suite.iter_mut().enumerate() {
            scn.seed = mix(s, &[i as u64]);
        }
    }
    let report = compare_reid(&suite)?;
    print!("{}", report.render());
    match format {
        Format::Csv => write(&out.join("comparison.csv"), report.to_csv())?,
        Format::Jsonl => {
            let lines: String = report
                .results
                .iter()
                .map(|r| {
                    serde_json::json!({
                        "scenario": r.name,
                        "expected": r.expected,
                        "two_way": r.two_way,
                        "one_way": r.one_way,
                    })
                    .to_string()
                        + "\n"
                })
                .collect();
            write(&out.join("comparison.jsonl"), lines)?;
        }
    }
    Ok(())
}

fn read_image(path: &Path) -> Result<Frame, Failure> {
    let bytes = fs::read(path).map_err(|e| Failure::io(path, e))?;
    let frame = if bytes.starts_with(MLF1_MAGIC) {
        decode_frame(&bytes)
    } else {
        decode_pnm(&bytes)
    };
    frame.map_err(|e| Failure::io(path, e))
}

fn cmd_extract(image: &Path, out: &Path) -> CmdResult {
    let frame = read_image(image)?;
    let feature = extract_feature(&frame, &FeatureConfig::default()).map_err(|e| Failure::io(image, e))?;
    let stem = image
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "image".into());
    let dest = out.join(format!("{stem}.feat"));
    write(&dest, feature.to_bytes())?;
    println!("dimension {}", feature.dim());
    println!("written {}", dest.display());
    Ok(())
}

fn cmd_inspect(path: &Path) -> CmdResult {
    let bytes = fs::read(path).map_err(|e| Failure::io(path, e))?;
    if path.extension().is_some_and(|e| e == "toml") {
        let scn = Scenario::load(path)?;
        scn.validate()?;
        println!(
            "scenario {} seed {} duration {} @ {} Hz",
            scn.name, scn.seed, scn.duration, scn.frame_rate
        );
        for s in &scn.sensors {
            println!("  sensor {} {:?} fov {:?}", s.id, s.role, s.fov);
        }
        println!("  targets {} tracked {}", scn.targets.len(), scn.tracked_target);
        if let Some(a) = scn.expected_assistant {
            println!("  expected assistant {a}");
        }
        return Ok(());
    }
    if bytes.starts_with(MLF1_MAGIC) || bytes.starts_with(b"P5") || bytes.starts_with(b"P6") {
        let f = read_image(path)?;
        println!("image {}x{} channels {}", f.width(), f.height(), f.channels());
        return Ok(());
    }
    if path.extension().is_some_and(|e| e == "feat") {
        let f = FeatureVector::from_bytes(&bytes).map_err(|e| Failure::io(path, e))?;
        println!(
            "feature config {} dimension {} norm {:.12}",
            f.config_id(),
            f.dim(),
            f.norm()
        );
        return Ok(());
    }
    let mut reader = FrameReader::new();
    reader.push(&bytes);
    let mut count = 0;
    while let Some(m) = reader.next_message().map_err(|e| Failure::io(path, e))? {
        println!(
            "message seq {} from {} {} ({} payload bytes)",
            m.sequence,
            m.sender,
            m.kind(),
            m.payload.encoded_len()
        );
        count += 1;
    }
    if reader.buffered() > 0 || count == 0 {
        return Err(Failure::io(
            path,
            "not a scenario, image, feature or complete message stream",
        ));
    }
    Ok(())
}

fn dispatch(cli: Cli) -> CmdResult {
    match cli.command {
        Command::Run {
            scenario,
            seed,
            out,
            format,
        } => cmd_run(&scenario, seed, &out, format),
        Command::Bench {
            scenario,
            seed,
            samples,
            threshold_s,
            delays,
            kinds,
            real_time,
            out,
        } => cmd_bench(
            scenario.as_deref(),
            seed,
            samples,
            threshold_s,
            &delays,
            &kinds,
            real_time,
            out.as_deref(),
        ),
        Command::CompareReid {
            suite,
            seed,
            out,
            format,
        } => cmd_compare(&suite, seed, &out, format),
        Command::Extract { image, out } => cmd_extract(&image, &out),
        Command::Inspect { path } => cmd_inspect(&path),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter("MLAI_LOG")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match dispatch(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("mlai: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}
