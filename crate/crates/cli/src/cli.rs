use std::ffi::OsString;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use velod_core::corpus::statue_standin;
use velod_core::experiment::ObserverPopulation;
use velod_core::kinematics::Condition;
use velod_core::obj::write_obj;
use velod_core::scheduler::{ScheduleMode, SchedulerConfig};

use crate::config::PipelineConfig;
use crate::error::{CliError, CliResult, StageContext};
use crate::formats::*;
use crate::pipeline::run_pipeline;
use crate::stages;

#[derive(Debug, Parser)]
#[command(name = "velod", version, about = "Velocity-thresholded LOD: simplification, head traces, schedules, simulated 2-IFC studies")]
pub struct Cli {
    /// Seed for every stochastic step; recorded in all outputs.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Pipeline configuration (JSON). Other subcommands take their defaults from it.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    #[arg(long, global = true)]
    pub outdir: Option<PathBuf>,
    #[arg(long, short, global = true)]
    pub verbose: bool,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Level-of-detail chains.
    #[command(subcommand)]
    Lod(LodCommand),
    /// Traces, schedules and simulated experiments.
    #[command(subcommand)]
    Sim(SimCommand),
    /// Fit psychometric functions to a trial log.
    Fit(FitArgs),
    /// Cohort thresholds and the paired t-test.
    Analyze(AnalyzeArgs),
    /// Plot fitted psychometric functions as SVG.
    Report(ReportArgs),
    /// Run every stage end to end.
    Pipeline,
}

#[derive(Debug, Subcommand)]
pub enum LodCommand {
    /// Simplify a reference OBJ into lod_0.obj … lod_N.obj plus chain.json.
    Gen(GenArgs),
    /// Write the built-in 12,074-triangle statue stand-in.
    Standin {
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Debug, Args)]
pub struct GenArgs {
    #[arg(long)]
    pub input: PathBuf,
    /// Comma-separated fractions of triangles removed, strictly increasing.
    #[arg(long, value_delimiter = ',')]
    pub levels: Option<Vec<f64>>,
    /// Surface samples per level for the deviation metric.
    #[arg(long)]
    pub samples: Option<usize>,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum TraceModel {
    /// Fixation target only.
    Ideal,
    /// Target passed through the lagged, jittered head model.
    Head,
}

#[derive(Debug, Subcommand)]
pub enum SimCommand {
    /// Head-rotation trace for one condition.
    Trace {
        #[arg(long)]
        condition: Condition,
        /// Override the condition's peak speed (deg/s).
        #[arg(long)]
        peak: Option<f64>,
        #[arg(long, value_enum, default_value = "head")]
        model: TraceModel,
        #[arg(long)]
        out: PathBuf,
    },
    /// LOD level per sample of a trace.
    Schedule {
        #[arg(long)]
        trace: PathBuf,
        #[arg(long, default_value = "binary")]
        mode: ScheduleMode,
        #[arg(long, default_value_t = 0.5)]
        threshold: f64,
        /// Reference peak speed (deg/s).
        #[arg(long)]
        peak: f64,
        /// Degraded level index (binary mode).
        #[arg(long, default_value_t = 7)]
        level: usize,
        /// Chain length including the reference (graded mode).
        #[arg(long, default_value_t = 8)]
        levels: usize,
        #[arg(long, default_value_t = 0.0)]
        hysteresis: f64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Simulate a cohort of observers under an experiment design.
    Run {
        #[arg(long)]
        design: Option<PathBuf>,
        #[arg(long)]
        cohort: Option<u32>,
        /// Observer population (JSON); the configured default otherwise.
        #[arg(long)]
        population: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
        /// Also write per-trial stimulus statistics here.
        #[arg(long)]
        stimulus_out: Option<PathBuf>,
    },
}

#[derive(Debug, Args)]
pub struct FitArgs {
    #[arg(long)]
    pub trials: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub performance: Option<f64>,
}

#[derive(Debug, Args)]
pub struct AnalyzeArgs {
    #[arg(long)]
    pub fits: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct ReportArgs {
    #[arg(long)]
    pub fits: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
}

fn under(outdir: &Option<PathBuf>, path: &Path) -> PathBuf {
    match outdir {
        Some(dir) if path.is_relative() => dir.join(path),
        _ => path.to_path_buf(),
    }
}

fn inherited(stage: &str, explicit: Option<u64>, from_input: Option<u64>, path: &Path) -> CliResult<u64> {
    explicit
        .or(from_input)
        .ok_or_else(|| CliError::validation(stage, format!("{} carries no seed; pass --seed", path.display())))
}

pub fn execute(cli: &Cli) -> CliResult<Vec<PathBuf>> {
    let config = match &cli.config {
        Some(p) => PipelineConfig::load(p)?,
        None => PipelineConfig::default(),
    };
    let seed = cli.seed.unwrap_or(config.seed);
    let verbose = cli.verbose;
    let log = move |msg: &str| {
        if verbose {
            eprintln!("velod: {msg}");
        }
    };

    match &cli.command {
        Command::Pipeline => {
            let config = PipelineConfig { seed, ..config };
            let outdir = cli.outdir.clone().or_else(|| config.outdir.clone()).unwrap_or_else(|| PathBuf::from("out"));
            let manifest = run_pipeline(&config, &outdir, &log)?;
            let mut files: Vec<PathBuf> = manifest.files.iter().map(|f| outdir.join(&f.path)).collect();
            files.push(outdir.join("manifest.json"));
            Ok(files)
        }
        Command::Lod(LodCommand::Gen(args)) => {
            let outdir = cli.outdir.clone().unwrap_or_else(|| PathBuf::from("."));
            let ladder = args.levels.clone().unwrap_or(config.ladder.clone());
            let (mesh, source) = stages::load_mesh("gen", Some(&args.input))?;
            log(&format!("gen: {} triangles from {source}", mesh.triangle_count()));
            let samples = args.samples.unwrap_or(config.deviation_samples);
            stages::gen_chain(&mesh, &source, &ladder, samples, &Meta::new(seed, "lod gen"), &outdir)
        }
        Command::Lod(LodCommand::Standin { out }) => {
            let out = under(&cli.outdir, out);
            let text = write_obj(&statue_standin(), &[Meta::new(seed, "lod standin").line()]).stage("gen")?;
            write_bytes("gen", &out, text.as_bytes())?;
            Ok(vec![out])
        }
        Command::Sim(SimCommand::Trace { condition, peak, model, out }) => {
            let mut profile = config.profile(*condition).clone();
            if let Some(p) = peak {
                profile.peak_speed = *p;
            }
            let head = match model {
                TraceModel::Ideal => None,
                TraceModel::Head => Some(&config.head),
            };
            let trace = stages::make_trace(&profile, head, seed)?;
            let out = under(&cli.outdir, out);
            stages::write_trace(&trace, &Meta::new(seed, "sim trace"), &out)?;
            Ok(vec![out])
        }
        Command::Sim(SimCommand::Schedule { trace, mode, threshold, peak, level, levels, hysteresis, out }) => {
            let (rows, trace_seed) = stages::read_trace("schedule", trace)?;
            let config = SchedulerConfig {
                mode: *mode,
                threshold_fraction: *threshold,
                reference_peak_speed: *peak,
                degraded_level_index: *level,
                chain_level_count: *levels,
                hysteresis: *hysteresis,
            };
            let seed = cli.seed.or(trace_seed).unwrap_or(seed);
            let out = under(&cli.outdir, out);
            stages::schedule_trace(&rows, &config, &Meta::new(seed, "sim schedule"), &out)?;
            Ok(vec![out])
        }
        Command::Sim(SimCommand::Run { design, cohort, population, out, stimulus_out }) => {
            let design = match design {
                Some(p) => stages::read_design("sim", p)?,
                None => config.design.clone(),
            };
            let population: ObserverPopulation = match population {
                Some(p) => from_json("sim", p, &read_text("sim", p)?)?,
                None => config.population.clone(),
            };
            let out = under(&cli.outdir, out);
            let stimulus_out = stimulus_out.as_ref().map(|p| under(&cli.outdir, p));
            stages::sim_run(
                &design,
                cohort.unwrap_or(config.participants),
                &population,
                &config.stimulus(),
                &Meta::new(seed, "sim run"),
                &out,
                stimulus_out.as_deref(),
            )
        }
        Command::Fit(args) => {
            let (rows, input_seed) = stages::read_trials("fit", &args.trials)?;
            let seed = inherited("fit", cli.seed, input_seed, &args.trials)?;
            let performance = args.performance.unwrap_or(config.performance);
            let fits = stages::fit_trials(&rows, performance, &Meta::new(seed, "fit"))?;
            let out = under(&cli.outdir, &args.out);
            write_bytes("fit", &out, &to_json("fit", &fits)?)?;
            Ok(vec![out])
        }
        Command::Analyze(args) => {
            let fits = stages::read_fits("analyze", &args.fits)?;
            let seed = cli.seed.unwrap_or(fits.meta.seed);
            let stats = stages::analyze(&fits, &Meta::new(seed, "analyze"))?;
            log(&format!(
                "analyze: t = {:.3}, df = {}, p = {:.4}",
                stats.stats.t_statistic, stats.stats.degrees_of_freedom, stats.stats.p_value
            ));
            let out = under(&cli.outdir, &args.out);
            write_bytes("analyze", &out, &to_json("analyze", &stats)?)?;
            Ok(vec![out])
        }
        Command::Report(args) => {
            let fits = stages::read_fits("report", &args.fits)?;
            let seed = cli.seed.unwrap_or(fits.meta.seed);
            let svg = stages::report(&fits, &Meta::new(seed, "report"))?;
            let out = under(&cli.outdir, &args.out);
            write_bytes("report", &out, svg.as_bytes())?;
            Ok(vec![out])
        }
    }
}

/// Parses arguments, runs the command and returns the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return e.exit_code();
        }
    };
    match execute(&cli) {
        Ok(files) => {
            if cli.verbose {
                for f in files {
                    eprintln!("velod: wrote {}", f.display());
                }
            }
            0
        }
        Err(e) => {
            eprintln!("velod: error: {e}");
            e.exit_code()
        }
    }
}
