use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use homog::config::{parse_config_file, PipelineConfig};
use homog::lab::{self, atf_power_study, build_extension, build_field, cell_options, u_eps_study, EpsSequence, StudyReport, TestFunction};
use homog::solve::{error_norms, sine_source, Coefficient, DirichletProblem, Mesh, Solution};
use homog::upscale::{averaged_field, tensor_at};
use homog::{Exec, HomogError, Point, Result, TwoScaleCoefficient};

#[derive(Parser, Debug)]
#[command(name = "homog", version, about = "Upscaling of elliptic problems with non-periodic coefficients")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug)]
struct Common {
    /// Configuration file (`key = value` lines).
    config: PathBuf,
    /// Override a configuration key, e.g. `--set eps_bar=0.2`.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
    /// Output directory (overrides `output.dir`).
    #[arg(long, short)]
    out: Option<PathBuf>,
    /// Run batches on the calling thread only.
    #[arg(long)]
    sequential: bool,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Check `a(x, x/ε̄) = a_M(x)` at random points.
    ExtendCheck {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value_t = 10_000)]
        points: usize,
    },
    /// Averaged tensor at one point.
    Cell {
        #[command(flatten)]
        common: Common,
        /// Comma-separated coordinates.
        #[arg(long, value_delimiter = ',', required = true)]
        at: Vec<f64>,
    },
    /// Averaged coefficient field on the solve mesh.
    Average {
        #[command(flatten)]
        common: Common,
    },
    /// Upscaled solution `u₀`.
    Solve {
        #[command(flatten)]
        common: Common,
    },
    /// Oscillatory-integral limit study.
    AtfStudy {
        #[command(flatten)]
        common: Common,
    },
    /// Convergence of `u_ε` to `u₀` along the ε-sequence.
    UepsStudy {
        #[command(flatten)]
        common: Common,
    },
    /// Full run: field, averaging, solves, corrector, report.
    Pipeline {
        #[command(flatten)]
        common: Common,
    },
}

impl Command {
    fn common(&self) -> &Common {
        match self {
            Command::ExtendCheck { common, .. }
            | Command::Cell { common, .. }
            | Command::Average { common }
            | Command::Solve { common }
            | Command::AtfStudy { common }
            | Command::UepsStudy { common }
            | Command::Pipeline { common } => common,
        }
    }
}

fn load(common: &Common) -> Result<PipelineConfig> {
    if !common.config.is_file() {
        return Err(HomogError::config("config", format!("no such file {}", common.config.display())));
    }
    let mut config = parse_config_file(&common.config, &common.overrides)?;
    if let Some(out) = &common.out {
        config.output_dir = out.clone();
    }
    Ok(config)
}

fn extension(config: &PipelineConfig) -> Result<TwoScaleCoefficient> {
    let field = build_field(config).map_err(|e| e.in_stage("field"))?;
    build_extension(config, field).map_err(|e| e.in_stage("extension"))
}

fn print_report(report: &StudyReport) {
    for (k, v) in &report.meta {
        println!("# {k} = {v}");
    }
    print!("{}", report.to_csv());
}

fn output_file(config: &PipelineConfig, name: &str) -> Result<PathBuf> {
    fs::create_dir_all(&config.output_dir)?;
    Ok(config.output_dir.join(name))
}

fn dispatch(command: &Command, config: &PipelineConfig, exec: Exec) -> Result<()> {
    let opts = cell_options(config, exec);
    match command {
        Command::ExtendCheck { points, .. } => {
            let ext = extension(config)?;
            let dev = ext.verify_identity(*points, config.seed);
            println!("extension {} eps_bar {}", ext.kind().name(), ext.eps_bar());
            println!("max |a(x, x/eps_bar) - a_M(x)| over {points} points = {dev:e}");
            if dev != 0.0 {
                return Err(HomogError::Validation(format!("identity deviates by {dev:e}")));
            }
        }
        Command::Cell { at, .. } => {
            let ext = extension(config)?;
            if at.len() != config.dim() {
                return Err(HomogError::config("--at", format!("expected {} coordinates, got {}", config.dim(), at.len())));
            }
            let x = Point::new(at);
            let t = tensor_at(&ext, &x, &opts).map_err(|e| e.in_stage("cell"))?;
            println!("method {}", t.method.name());
            let d = config.dim();
            for i in 0..d {
                for j in 0..d {
                    println!("A{}{} = {:.10}", i + 1, j + 1, t.a.get(i, j));
                }
            }
            if d == 1 {
                println!("A = {:.10}", t.a.get(0, 0));
            }
            println!("harmonic bound {:?}", t.harmonic);
            println!("arithmetic bound {:?}", t.arithmetic);
        }
        Command::Average { .. } => {
            let ext = extension(config)?;
            let a = averaged_field(&ext, Some(config.sample_spacing), &opts).map_err(|e| e.in_stage("averaging"))?;
            let mesh = Mesh::new(config.omega, config.mesh_n)?;
            let path = output_file(config, "averaged.csv")?;
            a.write_csv(&path, &mesh.nodes())?;
            println!("mode {} with {} tensors", a.mode().name(), a.samples().len());
            for w in &a.warnings {
                println!("warning: {w}");
            }
            println!("wrote {}", path.display());
        }
        Command::Solve { .. } => {
            let ext = extension(config)?;
            let a = averaged_field(&ext, Some(config.sample_spacing), &opts).map_err(|e| e.in_stage("averaging"))?;
            let mesh = Mesh::new(config.omega, config.mesh_n)?;
            let f = sine_source(config.source_amplitude, config.source_frequency);
            let u0 = lab::solve_problem(&DirichletProblem::new(Coefficient::Averaged(a), f), &mesh)
                .map_err(|e| e.in_stage("upscaled solve"))?;
            let path = output_file(config, "u0.csv")?;
            u0.write_csv(&path)?;
            let norms = error_norms(&u0, &Solution::zeros(mesh))?;
            println!("residual {:e}", u0.residual);
            println!("||u0||_L2 = {:.10e}", norms.l2);
            println!("|u0|_H1 = {:.10e}", norms.h1_semi);
            println!("wrote {}", path.display());
        }
        Command::AtfStudy { .. } => {
            let ext = extension(config)?;
            let seq = EpsSequence::new(config.eps_bar, config.seq_ratio, config.seq_count)?;
            let phi = TestFunction::named(&config.study_phi, config.dim())?;
            let report = atf_power_study(&ext, &phi, config.study_p, &seq, config.study_quad_n, exec)
                .map_err(|e| e.in_stage("atf study"))?;
            report.write_csv(output_file(config, "atf.csv")?)?;
            print_report(&report);
        }
        Command::UepsStudy { .. } => {
            let ext = extension(config)?;
            let a = averaged_field(&ext, Some(config.sample_spacing), &opts).map_err(|e| e.in_stage("averaging"))?;
            let seq = EpsSequence::new(config.eps_bar, config.seq_ratio, config.seq_count)?;
            let f = sine_source(config.source_amplitude, config.source_frequency);
            let report = u_eps_study(&ext, &a, f, &seq, config.cells_per_eps, exec).map_err(|e| e.in_stage("ueps study"))?;
            report.write_csv(output_file(config, "ueps.csv")?)?;
            print_report(&report);
        }
        Command::Pipeline { .. } => {
            let out = lab::run_pipeline(config, exec)?;
            print_report(&out.report);
            println!("wrote {}", out.dir.display());
        }
    }
    Ok(())
}

fn exit_code(e: &HomogError) -> u8 {
    if e.is_numerical() {
        1
    } else {
        2
    }
}

fn configure_pool() -> std::result::Result<(), String> {
    let Ok(jobs) = std::env::var("HOMOG_JOBS") else {
        return Ok(());
    };
    let n: usize = jobs
        .trim()
        .parse()
        .map_err(|_| format!("HOMOG_JOBS must be a positive integer, got `{jobs}`"))?;
    if n == 0 {
        return Err("HOMOG_JOBS must be a positive integer, got `0`".into());
    }
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| e.to_string())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    if let Err(msg) = configure_pool() {
        eprintln!("error: {msg}");
        return ExitCode::from(2);
    }
    let common = cli.command.common();
    let exec = if common.sequential { Exec::Sequential } else { Exec::default() };
    let result = load(common).and_then(|config| dispatch(&cli.command, &config, exec));
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
