use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use ocsched::harness::{compare, run_sweep, ExperimentPlan, RecordMeta, Scheme};
use ocsched::metrics::{write_records, OutputFormat};
use ocsched::model::{Instance, NetworkConfig, SwitchMode};
use ocsched::sim::{check_feasibility, read_schedule_log, write_schedule_log};
use ocsched::trace::{
    fb_like_trace, ingest_fb_trace, parse_canonical, sample_instance, synth_generate, write_canonical, write_fb_trace,
    Perturbation, ReleasePolicy, RemapPolicy, SamplingParams, SynthParams, SynthRelease, WeightPolicy,
};

#[derive(Parser)]
#[command(name = "ocsched", version, about = "Multi-coflow scheduling on multi-core optical circuit switches")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum Mode {
    Ocs,
    Eps,
}

impl From<Mode> for SwitchMode {
    fn from(m: Mode) -> Self {
        match m {
            Mode::Ocs => SwitchMode::Ocs,
            Mode::Eps => SwitchMode::Eps,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Csv,
    Jsonl,
}

impl From<Format> for OutputFormat {
    fn from(f: Format) -> Self {
        match f {
            Format::Csv => OutputFormat::Csv,
            Format::Jsonl => OutputFormat::Jsonl,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum Remap {
    Redistribute,
    Drop,
}

#[derive(Args)]
struct NetArgs {
    /// Core rates, comma separated.
    #[arg(long, value_delimiter = ',', default_value = "10,20,30")]
    rates: Vec<f64>,
    /// Reconfiguration delay.
    #[arg(long, default_value_t = 8.0)]
    delay: f64,
    #[arg(long, value_enum, default_value = "ocs")]
    mode: Mode,
}

impl NetArgs {
    fn config(&self, num_ports: usize) -> NetworkConfig {
        match self.mode {
            Mode::Ocs => NetworkConfig::ocs(num_ports, self.rates.clone(), self.delay),
            Mode::Eps => NetworkConfig::eps(num_ports, self.rates.clone()),
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Run schemes on one canonical instance file.
    Run {
        instance: PathBuf,
        /// Schemes, comma separated (default: all).
        #[arg(long, value_delimiter = ',')]
        schemes: Vec<Scheme>,
        /// Override the file's switch mode (EPS forces delay 0).
        #[arg(long, value_enum)]
        mode: Option<Mode>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, value_enum, default_value = "csv")]
        format: Format,
        /// Write each scheme's schedule log into this directory.
        #[arg(long)]
        log_dir: Option<PathBuf>,
        #[arg(long)]
        runtime: bool,
    },
    /// Run an experiment plan (JSON).
    Sweep {
        plan: PathBuf,
        /// Override the plan's base seed.
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long, value_enum)]
        mode: Option<Mode>,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, value_enum, default_value = "csv")]
        format: Format,
    },
    /// Sample a canonical instance from a Facebook-benchmark trace.
    Ingest {
        trace: PathBuf,
        #[arg(long, default_value_t = 10)]
        ports: usize,
        #[arg(long, default_value_t = 100)]
        coflows: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[command(flatten)]
        net: NetArgs,
        /// Largest integer weight; unit weights when absent.
        #[arg(long)]
        max_weight: Option<u32>,
        /// Use trace arrivals as releases, in this many ms per time unit.
        #[arg(long)]
        release_ms_per_unit: Option<f64>,
        #[arg(long, value_enum, default_value = "redistribute")]
        remap: Remap,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Generate a synthetic canonical instance or a stand-in trace.
    Gen {
        #[arg(long, default_value_t = 10)]
        ports: usize,
        #[arg(long, default_value_t = 100)]
        coflows: usize,
        #[arg(long, default_value_t = 0.3)]
        density: f64,
        #[arg(long, default_value_t = 1.0)]
        volume_min: f64,
        #[arg(long, default_value_t = 100.0)]
        volume_max: f64,
        /// Releases uniform on [0, max].
        #[arg(long)]
        release_max: Option<f64>,
        #[arg(long)]
        max_weight: Option<u32>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[command(flatten)]
        net: NetArgs,
        /// Emit the generated stand-in trace in benchmark layout instead.
        #[arg(long)]
        fb_trace: bool,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Audit a schedule log against its instance.
    Check {
        instance: PathBuf,
        schedule: PathBuf,
    },
}

type Res<T> = Result<T, Box<dyn std::error::Error>>;

fn read(path: &Path) -> Res<String> {
    fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()).into())
}

fn emit(out: &Option<PathBuf>, bytes: &[u8]) -> Res<()> {
    match out {
        Some(p) => fs::write(p, bytes).map_err(|e| format!("{}: {e}", p.display()).into()),
        None => Ok(io::stdout().write_all(bytes)?),
    }
}

fn weights(max: Option<u32>) -> WeightPolicy {
    max.map_or(WeightPolicy::Unit, |max| WeightPolicy::UniformInteger { max })
}

fn run(cmd: Command) -> Res<bool> {
    match cmd {
        Command::Run { instance, schemes, mode, seed, out, format, log_dir, runtime } => {
            let mut inst: Instance = parse_canonical(&read(&instance)?)?;
            if let Some(m) = mode {
                inst.config.mode = m.into();
                if inst.config.mode == SwitchMode::Eps {
                    inst.config.reconfig_delay = 0.0;
                }
            }
            let schemes = if schemes.is_empty() { Scheme::ALL.to_vec() } else { schemes };
            let meta = RecordMeta::for_instance(&inst, seed, "file");
            let records = compare(&inst, &schemes, &meta, runtime);
            if let Some(dir) = log_dir {
                fs::create_dir_all(&dir)?;
                let lp = ocsched::lp::solve_instance(&inst).ok();
                for &s in &schemes {
                    if let Ok(r) = ocsched::harness::run_scheme_with(&inst, s, lp.as_ref()) {
                        let f = fs::File::create(dir.join(format!("{}.json", s.name().to_ascii_lowercase())))?;
                        write_schedule_log(&r.result, io::BufWriter::new(f))?;
                    }
                }
            }
            let mut buf = Vec::new();
            write_records(&records, format.into(), &mut buf)?;
            emit(&out, &buf)?;
            let mut ok = true;
            for r in records.iter().filter(|r| r.error.is_some()) {
                eprintln!("{}: {}", r.scheme, r.error.as_deref().unwrap_or_default());
                ok = false;
            }
            Ok(ok)
        }
        Command::Sweep { plan, seed, mode, out, format } => {
            let mut p: ExperimentPlan = serde_json::from_str(&read(&plan)?)?;
            if let Some(s) = seed {
                p.base_seed = s;
            }
            if let Some(m) = mode {
                p.network.mode = m.into();
            }
            let records = run_sweep(&p)?;
            let failed = records.iter().filter(|r| r.error.is_some()).count();
            if failed > 0 {
                eprintln!("{failed} records carry errors");
            }
            let mut buf = Vec::new();
            write_records(&records, format.into(), &mut buf)?;
            emit(&out.or(p.out), &buf)?;
            Ok(true)
        }
        Command::Ingest { trace, ports, coflows, seed, net, max_weight, release_ms_per_unit, remap, out } => {
            let t = ingest_fb_trace(&read(&trace)?)?;
            eprintln!("{} records over {} machines", t.records.len(), t.num_machines);
            let params = SamplingParams {
                num_ports: ports,
                num_coflows: coflows,
                seed,
                weights: weights(max_weight),
                releases: release_ms_per_unit.map_or(ReleasePolicy::Zero, |ms| ReleasePolicy::Trace { ms_per_unit: ms }),
                remap: match remap {
                    Remap::Redistribute => RemapPolicy::Redistribute,
                    Remap::Drop => RemapPolicy::Drop,
                },
                perturbation: Perturbation::default(),
            };
            let inst = sample_instance(&t, &params, net.config(ports))?;
            emit(&out, write_canonical(&inst)?.as_bytes())?;
            Ok(true)
        }
        Command::Gen {
            ports,
            coflows,
            density,
            volume_min,
            volume_max,
            release_max,
            max_weight,
            seed,
            net,
            fb_trace,
            out,
        } => {
            if fb_trace {
                emit(&out, write_fb_trace(&fb_like_trace(seed)).as_bytes())?;
                return Ok(true);
            }
            let params = SynthParams {
                num_coflows: coflows,
                density,
                volume_min,
                volume_max,
                seed,
                weights: weights(max_weight),
                releases: release_max.map_or(SynthRelease::Zero, |max| SynthRelease::Uniform { max }),
            };
            let inst = synth_generate(&params, net.config(ports))?;
            emit(&out, write_canonical(&inst)?.as_bytes())?;
            Ok(true)
        }
        Command::Check { instance, schedule } => {
            let inst = parse_canonical(&read(&instance)?)?;
            let log = read_schedule_log(fs::File::open(&schedule)?)?;
            let report = check_feasibility(&log, &inst, None);
            if report.is_empty() {
                println!("feasible: {} events, objective {}", log.events.len(), log.objective);
                Ok(true)
            } else {
                println!("{report}");
                Ok(false)
            }
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::FAILURE,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
