//! `kernel-fields`: distances, field traces, representation checks and
//! experiments, all written as CSV with `#` comment headers.

use std::ffi::OsString;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use kernel_fields::estimators::{
    biased_kernel_distance, cvm_distance, field_mc_distance, fourier_distance_1d,
    unbiased_kernel_distance_with, v_statistic_distance, QuadratureConfig,
};
use kernel_fields::experiments::{parse_grid, run_experiment, SweepConfig};
use kernel_fields::fields::{FbmGridSampler, FieldSampler, DEFAULT_GFF_MODES};
use kernel_fields::verify::{run_verify, VerifyCase, VerifyOptions};
use kernel_fields::{
    Convention, CrossTerm, DistanceEstimate, EmpiricalMeasure, Error, FieldRealization, FieldSpec,
    KernelSpec, SamplingMethod, SeedSpec,
};

const VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Parser, Debug)]
#[command(
    name = "kernel-fields",
    version,
    about = "Kernel distances through random fields"
)]
struct Cli {
    /// Write CSV here instead of stdout.
    #[arg(long, global = true)]
    out: Option<PathBuf>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Distance between two samples read from headerless CSV files.
    Distance {
        #[arg(long)]
        x: PathBuf,
        #[arg(long)]
        y: PathBuf,
        /// e.g. `fractional:H=0.5`, `green:d=3`, `riesz:alpha=5,d=16`, `additive`, `discrete:K=8`
        #[arg(long)]
        kernel: String,
        #[arg(long, value_enum)]
        estimator: EstimatorArg,
        #[arg(long, value_enum, default_value_t = ConventionArg::Corrected)]
        convention: ConventionArg,
        /// Cross term of the unbiased estimator.
        #[arg(long, value_enum, default_value_t = CrossArg::Paired)]
        cross: CrossArg,
        /// Field draws for `field-mc`.
        #[arg(long, default_value_t = 10_000)]
        replications: usize,
        #[arg(long, default_value_t = 7)]
        seed: u64,
    },
    /// One field realization on a 1-D grid or at the points of a CSV file.
    SampleField {
        #[arg(long, value_enum)]
        spec: FieldArg,
        #[arg(long, default_value_t = 0.5)]
        hurst: f64,
        /// `a:b:n`, n evenly spaced points.
        #[arg(long, conflicts_with = "points")]
        grid: Option<String>,
        /// Headerless CSV of locations, one per row.
        #[arg(long)]
        points: Option<PathBuf>,
        #[arg(long, default_value_t = DEFAULT_GFF_MODES)]
        modes: usize,
        #[arg(long, default_value_t = 7)]
        seed: u64,
    },
    /// Cross-check the kernel, field and Fourier routes on random samples.
    Verify {
        #[arg(long, value_enum)]
        case: CaseArg,
        #[arg(long, default_value_t = 7)]
        seed: u64,
        #[arg(long)]
        sets: Option<usize>,
        #[arg(long)]
        replications: Option<usize>,
    },
    /// Run a sweep from a key=value config file.
    Experiment {
        #[arg(long)]
        config: Option<PathBuf>,
        /// Overrides the config file's `experiment` key.
        #[arg(long)]
        experiment: Option<String>,
        /// Overrides the config file's `seed` key.
        #[arg(long)]
        seed: Option<u64>,
        /// Any other config key; repeatable, later wins.
        #[arg(long = "set", value_name = "KEY=VALUE")]
        overrides: Vec<String>,
    },
}

#[derive(ValueEnum, Clone, Copy, Debug)]
enum EstimatorArg {
    Unbiased,
    Biased,
    Vstat,
    FieldMc,
    Fourier,
    Cvm,
}

#[derive(ValueEnum, Clone, Copy, Debug)]
enum ConventionArg {
    Paper,
    Corrected,
}

impl From<ConventionArg> for Convention {
    fn from(c: ConventionArg) -> Self {
        match c {
            ConventionArg::Paper => Convention::Paper,
            ConventionArg::Corrected => Convention::Corrected,
        }
    }
}

#[derive(ValueEnum, Clone, Copy, Debug)]
enum CrossArg {
    Paired,
    Full,
}

#[derive(ValueEnum, Clone, Copy, Debug)]
enum FieldArg {
    Fbm,
    Gff,
    Additive,
}

#[derive(ValueEnum, Clone, Copy, Debug)]
enum CaseArg {
    Equivalence,
    Cvm,
    Gff,
}

/// Why a run stopped short of exit code 0.
enum Failure {
    /// Bad input: exit 1.
    Input(String),
    /// Numerical breakdown, or a verification row that did not pass: exit 2.
    Numerical(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        if e.is_numerical() {
            Failure::Numerical(e.to_string())
        } else {
            Failure::Input(e.to_string())
        }
    }
}

fn main() -> ExitCode {
    ExitCode::from(run(std::env::args_os()))
}

fn run<I: IntoIterator<Item = OsString>>(argv: I) -> u8 {
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    let mut buf = Vec::new();
    let status = execute(&cli.command, &mut buf);
    // a failed verification still writes its table
    if let Ok(()) | Err(Failure::Numerical(_)) = &status {
        if let Err(e) = emit(cli.out.as_deref(), &buf) {
            eprintln!("error: {e}");
            return 1;
        }
    }
    match status {
        Ok(()) => 0,
        Err(Failure::Input(msg)) => {
            eprintln!("error: {msg}");
            1
        }
        Err(Failure::Numerical(msg)) => {
            eprintln!("error: {msg}");
            2
        }
    }
}

fn emit(out: Option<&Path>, bytes: &[u8]) -> std::io::Result<()> {
    match out {
        Some(path) => fs::write(path, bytes),
        None => {
            let mut stdout = std::io::stdout().lock();
            stdout.write_all(bytes)?;
            stdout.flush()
        }
    }
}

fn execute(command: &Command, out: &mut Vec<u8>) -> Result<(), Failure> {
    match command {
        Command::Distance {
            x,
            y,
            kernel,
            estimator,
            convention,
            cross,
            replications,
            seed,
        } => {
            let x = read_measure(x)?;
            let y = read_measure(y)?;
            let k = KernelSpec::parse(kernel, x.dim())?;
            let convention = Convention::from(*convention);
            let est = distance(
                &x,
                &y,
                &k,
                *estimator,
                convention,
                *cross,
                *replications,
                *seed,
            )?;
            write_distance(out, &k, &est, convention, *seed).map_err(Failure::from)
        }
        Command::SampleField {
            spec,
            hurst,
            grid,
            points,
            modes,
            seed,
        } => {
            let locations: Vec<Vec<f64>> = match (grid, points) {
                (Some(g), None) => parse_grid(g)?.into_iter().map(|t| vec![t]).collect(),
                (None, Some(path)) => read_measure(path)?.points().map(<[f64]>::to_vec).collect(),
                _ => return Err(Failure::Input("give one of --grid or --points".into())),
            };
            let field = sample_field(
                *spec,
                *hurst,
                *modes,
                &locations,
                SeedSpec::from_seed(*seed),
            )?;
            write_field(out, &field, *seed).map_err(Failure::from)
        }
        Command::Verify {
            case,
            seed,
            sets,
            replications,
        } => {
            let case = match case {
                CaseArg::Equivalence => VerifyCase::Equivalence,
                CaseArg::Cvm => VerifyCase::Cvm,
                CaseArg::Gff => VerifyCase::Gff,
            };
            let mut options = VerifyOptions::for_case(case, *seed);
            if let Some(s) = sets {
                options.sets = *s;
            }
            if let Some(r) = replications {
                options.replications = *r;
            }
            let report = run_verify(case, &options)?;
            report.write_csv(&mut *out)?;
            if report.all_pass() {
                Ok(())
            } else {
                let failed = report.passes.iter().filter(|p| !**p).count();
                Err(Failure::Numerical(format!(
                    "{failed} of {} verification rows failed",
                    report.passes.len()
                )))
            }
        }
        Command::Experiment {
            config,
            experiment,
            seed,
            overrides,
        } => {
            let mut text = match config {
                Some(path) => fs::read_to_string(path)
                    .map_err(|e| Failure::Input(format!("{}: {e}", path.display())))?,
                None => String::new(),
            };
            // appended lines win over the file's
            text.push('\n');
            if let Some(e) = experiment {
                text.push_str(&format!("experiment={e}\n"));
            }
            if let Some(s) = seed {
                text.push_str(&format!("seed={s}\n"));
            }
            for o in overrides {
                if !o.contains('=') || o.contains(['\n', '#']) {
                    return Err(Failure::Input(format!("--set `{o}` is not key=value")));
                }
                text.push_str(o);
                text.push('\n');
            }
            let config = SweepConfig::parse(&text)?;
            run_experiment(&config)?.write_csv(&mut *out)?;
            Ok(())
        }
    }
}

fn read_measure(path: &Path) -> Result<EmpiricalMeasure, Failure> {
    let file =
        fs::File::open(path).map_err(|e| Failure::Input(format!("{}: {e}", path.display())))?;
    EmpiricalMeasure::read_csv(file).map_err(|e| Failure::Input(format!("{}: {e}", path.display())))
}

#[allow(clippy::too_many_arguments)]
fn distance(
    x: &EmpiricalMeasure,
    y: &EmpiricalMeasure,
    k: &KernelSpec,
    estimator: EstimatorArg,
    convention: Convention,
    cross: CrossArg,
    replications: usize,
    seed: u64,
) -> Result<DistanceEstimate, Error> {
    match estimator {
        EstimatorArg::Unbiased => {
            let cross = match cross {
                CrossArg::Paired => CrossTerm::Paired,
                CrossArg::Full => CrossTerm::Full,
            };
            unbiased_kernel_distance_with(x, y, k, convention, cross)
        }
        EstimatorArg::Biased => biased_kernel_distance(x, y, k),
        EstimatorArg::Vstat => v_statistic_distance(x, y, k),
        EstimatorArg::FieldMc => field_mc_distance(
            x,
            y,
            FieldSpec::for_kernel(k)?,
            replications,
            SeedSpec::from_seed(seed),
        ),
        EstimatorArg::Fourier => match *k {
            KernelSpec::Fractional { hurst, dim: 1 } => {
                fourier_distance_1d(x, y, hurst, &QuadratureConfig::default())
            }
            _ => Err(Error::UnsupportedKernel(format!(
                "the Fourier route needs a 1-D fractional kernel, got {k}"
            ))),
        },
        EstimatorArg::Cvm => cvm_distance(x, y),
    }
}

fn write_distance(
    out: &mut Vec<u8>,
    k: &KernelSpec,
    est: &DistanceEstimate,
    convention: Convention,
    seed: u64,
) -> kernel_fields::Result<()> {
    writeln!(out, "# version={VERSION}")?;
    writeln!(out, "# seed={seed}")?;
    writeln!(out, "# convention={}", convention.as_str())?;
    let mut w = csv::Writer::from_writer(out);
    w.write_record([
        "estimator",
        "kernel",
        "value",
        "std_error",
        "n_x",
        "n_y",
        "metadata",
    ])?;
    w.write_record([
        est.estimator.as_str().to_string(),
        k.to_string(),
        format!("{}", est.value),
        est.std_error.map(|s| format!("{s}")).unwrap_or_default(),
        est.n_x.to_string(),
        est.n_y.to_string(),
        est.metadata_string(),
    ])?;
    w.flush()?;
    Ok(())
}

fn sample_field(
    kind: FieldArg,
    hurst: f64,
    modes: usize,
    locations: &[Vec<f64>],
    seed: SeedSpec,
) -> Result<FieldRealization, Error> {
    let dim = locations.first().map_or(1, Vec::len);
    let spec = match kind {
        FieldArg::Fbm => FieldSpec::Fbm { hurst, dim },
        FieldArg::Gff => FieldSpec::GffNeumann1D { modes },
        FieldArg::Additive => FieldSpec::AdditiveBm { dim },
    };
    spec.validate()?;
    if let (FieldArg::Fbm, Some(step)) = (kind, grid_from_origin(locations)) {
        return Ok(FbmGridSampler::new(hurst, step, locations.len())?.realize(seed));
    }
    Ok(FieldSampler::new(spec, locations)?.realize(seed))
}

/// Step of a 1-D grid `0, h, 2h, ..`, if `locations` is one.
fn grid_from_origin(locations: &[Vec<f64>]) -> Option<f64> {
    if locations.len() < 2 || locations.iter().any(|p| p.len() != 1) || locations[0][0] != 0.0 {
        return None;
    }
    let step = locations[1][0];
    let uniform = locations
        .iter()
        .enumerate()
        .all(|(i, p)| (p[0] - i as f64 * step).abs() <= 1e-12 * step * i as f64);
    (step > 0.0 && uniform).then_some(step)
}

fn write_field(out: &mut Vec<u8>, f: &FieldRealization, seed: u64) -> kernel_fields::Result<()> {
    let method = match f.method {
        SamplingMethod::Cholesky { jitter } => format!("cholesky(jitter={jitter:e})"),
        SamplingMethod::CirculantEmbedding => "circulant".into(),
        SamplingMethod::CirculantFallback => "circulant-fallback".into(),
        SamplingMethod::Series => "series".into(),
    };
    writeln!(out, "# version={VERSION}")?;
    writeln!(out, "# seed={seed}")?;
    writeln!(out, "# field={}", f.spec)?;
    writeln!(out, "# method={method}")?;
    let dim = f.locations.first().map_or(1, Vec::len);
    let mut w = csv::Writer::from_writer(out);
    let mut header: Vec<String> = if dim == 1 {
        vec!["t".into()]
    } else {
        (1..=dim).map(|i| format!("x{i}")).collect()
    };
    header.push("value".into());
    w.write_record(&header)?;
    for (p, v) in f.locations.iter().zip(&f.values) {
        let mut row: Vec<String> = p.iter().map(|c| format!("{c}")).collect();
        row.push(format!("{v}"));
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}
