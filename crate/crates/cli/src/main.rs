//! `funcctl`: analyse, design and simulate functional controllers and observers from JSON system files.

use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use funcctl::io::{analysis_report, design_report, parse_poles, parse_vector, to_json, ErrorReport, SystemFile};
use funcctl::numlin::{TolerancePolicy, Vector};
use funcctl::reproduce::{reproduce, ExampleId};
use funcctl::sim::{simulate_observer_closed_loop, SimConfig, Trace};
use funcctl::synthesis::{design_pipeline, AugmentMode, DesignOptions, PipelineDesign};
use funcctl::Error;

const EXIT_INPUT: u8 = 2;
const EXIT_INFEASIBLE: u8 = 3;

#[derive(Parser)]
#[command(name = "funcctl", version, about = "Functional controllability and observability toolkit")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Nine property verdicts with rank evidence.
    Analyze {
        system: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Functional controller, functional observer and the combined closed loop.
    Design {
        system: PathBuf,
        #[command(flatten)]
        design: DesignArgs,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Closed-loop trace as CSV.
    Simulate {
        system: PathBuf,
        #[command(flatten)]
        design: DesignArgs,
        /// Initial plant state, comma separated (default: all ones).
        #[arg(long, allow_hyphen_values = true)]
        x0: Option<String>,
        /// Initial observer state, comma separated (default: zero).
        #[arg(long, allow_hyphen_values = true)]
        w0: Option<String>,
        #[arg(long, default_value_t = 10.0)]
        t_final: f64,
        #[arg(long, default_value_t = 1e-3, allow_hyphen_values = true)]
        dt: f64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Regenerate a bundled worked example and compare with its published values.
    Reproduce {
        #[arg(value_enum)]
        example: ExampleArg,
        /// Also write the JSON report here.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Args)]
struct DesignArgs {
    /// Comma separated, complex entries as a+bi.
    #[arg(long, allow_hyphen_values = true)]
    controller_poles: Option<String>,
    #[arg(long, allow_hyphen_values = true)]
    observer_poles: Option<String>,
    /// `file` takes R1 (and optionally R) from the system file.
    #[arg(long, value_enum, default_value_t = Augment::Auto)]
    augment: Augment,
}

#[derive(Clone, Copy, ValueEnum)]
enum Augment {
    None,
    Auto,
    File,
}

#[derive(Clone, Copy, ValueEnum)]
enum ExampleArg {
    Example1,
    Example2,
    Example3,
}

impl From<ExampleArg> for ExampleId {
    fn from(e: ExampleArg) -> Self {
        match e {
            ExampleArg::Example1 => ExampleId::Example1,
            ExampleArg::Example2 => ExampleId::Example2,
            ExampleArg::Example3 => ExampleId::Example3,
        }
    }
}

/// Failure with its exit code.
struct Failure {
    code: u8,
    report: ErrorReport,
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let code = match e {
            Error::NoAugmentationFound(_)
            | Error::ConditionsViolated(_)
            | Error::NotFunctionalObservable
            | Error::Uncontrollable { .. }
            | Error::PlacementInaccurate { .. }
            | Error::IncompatibleDesigns(_)
            | Error::InconsistentVerdicts(_)
            | Error::ConvergenceFailure(_) => EXIT_INFEASIBLE,
            _ => EXIT_INPUT,
        };
        Self { code, report: ErrorReport::from(&e) }
    }
}

fn input_error(message: String) -> Failure {
    Error::Parse(message).into()
}

fn base_tolerance() -> Result<TolerancePolicy, Failure> {
    let mut tol = TolerancePolicy::default();
    if let Ok(text) = std::env::var("FUNCCTL_TOL") {
        let value = text.trim().parse::<f64>().map_err(|_| input_error(format!("FUNCCTL_TOL: not a number: {text:?}")))?;
        tol.relative_rank_tol = Some(value);
        tol.validate()?;
    }
    Ok(tol)
}

fn load(path: &Path) -> Result<(SystemFile, TolerancePolicy), Failure> {
    let text = fs::read_to_string(path).map_err(|e| input_error(format!("{}: {e}", path.display())))?;
    let file = SystemFile::parse(&text).map_err(|e| match e {
        Error::Parse(m) => Error::Parse(format!("{}: {m}", path.display())),
        Error::DimensionMismatch(m) => Error::DimensionMismatch(format!("{}: {m}", path.display())),
        other => other,
    })?;
    let mut tol = file.tolerance(TolerancePolicy::default())?;
    // the environment wins over the file for the rank tolerance
    if std::env::var_os("FUNCCTL_TOL").is_some() {
        tol.relative_rank_tol = base_tolerance()?.relative_rank_tol;
    }
    Ok((file, tol))
}

fn design(file: &SystemFile, args: &DesignArgs, tol: &TolerancePolicy) -> Result<PipelineDesign, Failure> {
    let sys = file.system(tol)?;
    let f = file.functional(tol)?;
    let augment = match args.augment {
        Augment::None => AugmentMode::None,
        Augment::Auto => AugmentMode::Auto,
        Augment::File => {
            let r1 = file.r1.clone().ok_or_else(|| input_error("--augment file needs \"R1\" in the system file".into()))?;
            AugmentMode::Given { r1, r: file.r.clone() }
        }
    };
    let cp = args.controller_poles.as_deref().map(|t| parse_poles(t, "--controller-poles")).transpose()?;
    let op = args.observer_poles.as_deref().map(|t| parse_poles(t, "--observer-poles")).transpose()?;
    Ok(design_pipeline(&sys, &f, &augment, cp.as_ref(), op.as_ref(), DesignOptions::default(), tol)?)
}

fn emit(text: &str, out: Option<&Path>) -> Result<(), Failure> {
    match out {
        Some(path) => fs::write(path, text).map_err(|e| input_error(format!("{}: {e}", path.display()))),
        None => {
            println!("{text}");
            Ok(())
        }
    }
}

fn trace_csv(trace: &Trace) -> Result<Vec<u8>, Failure> {
    let columns = [("x", None), ("w", Some("w")), ("z", Some("z")), ("zhat", Some("zhat")), ("e", Some("err")), ("u", Some("u"))];
    let width = |channel: Option<&str>| match channel {
        None => trace.states.first().map_or(0, |v| v.len()),
        Some(c) => trace.channel(c).and_then(|s| s.first()).map_or(0, |v| v.len()),
    };
    let mut header = vec!["t".to_string()];
    for &(label, channel) in &columns {
        header.extend((1..=width(channel)).map(|i| format!("{label}{i}")));
    }
    let mut w = csv::Writer::from_writer(Vec::new());
    let io_err = |e: csv::Error| input_error(format!("csv: {e}"));
    w.write_record(&header).map_err(io_err)?;
    for (k, t) in trace.times.iter().enumerate() {
        let mut row = vec![t.to_string()];
        for &(_, channel) in &columns {
            let v = match channel {
                None => &trace.states[k],
                Some(c) => &trace.channel(c).expect("channel recorded")[k],
            };
            row.extend(v.iter().map(|x| format!("{x:e}")));
        }
        w.write_record(&row).map_err(io_err)?;
    }
    w.into_inner().map_err(|e| input_error(format!("csv: {e}")))
}

fn run(cli: Cli) -> Result<u8, Failure> {
    match cli.command {
        Command::Analyze { system, out } => {
            let (file, tol) = load(&system)?;
            let report = analysis_report(&file.system(&tol)?, &file.functional(&tol)?, &tol)?;
            emit(&to_json(&report), out.as_deref())?;
        }
        Command::Design { system, design: args, out } => {
            let (file, tol) = load(&system)?;
            let d = design(&file, &args, &tol)?;
            let report = design_report(&file.system(&tol)?, &d, &tol)?;
            emit(&to_json(&report), out.as_deref())?;
        }
        Command::Simulate { system, design: args, x0, w0, t_final, dt, out } => {
            let (file, tol) = load(&system)?;
            let cfg = SimConfig { dt, t_final };
            cfg.steps()?;
            let d = design(&file, &args, &tol)?;
            let sys = file.system(&tol)?;
            let x0 = match x0 {
                Some(t) => parse_vector(&t, sys.states(), "--x0")?,
                None => Vector::from_element(sys.states(), 1.0),
            };
            let w0 = w0.map(|t| parse_vector(&t, d.observer.order(), "--w0")).transpose()?;
            let trace = simulate_observer_closed_loop(&sys, &d.controller, &d.observer, &x0, w0.as_ref(), &cfg)?;
            let bytes = trace_csv(&trace)?;
            match out {
                Some(path) => fs::write(&path, bytes).map_err(|e| input_error(format!("{}: {e}", path.display())))?,
                None => std::io::stdout().write_all(&bytes).map_err(|e| input_error(format!("stdout: {e}")))?,
            }
        }
        Command::Reproduce { example, out } => {
            let tol = base_tolerance()?;
            let report = reproduce(example.into(), &tol);
            print!("{}", report.table());
            if let Some(path) = out {
                fs::write(&path, to_json(&report)).map_err(|e| input_error(format!("{}: {e}", path.display())))?;
            }
            return Ok(if report.all_pass() { 0 } else { 1 });
        }
    }
    Ok(0)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => ExitCode::from(code),
        Err(f) => {
            eprintln!("funcctl: {}", f.report.message);
            println!("{}", to_json(&f.report));
            ExitCode::from(f.code)
        }
    }
}
