use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use hmrf_mesh::em::{self, ResultDocument, RunConfig};
use hmrf_mesh::hmrf::LabelField;
use hmrf_mesh::mesh::{
    build_adjacency, default_palette, face_features, parse_obj, parse_ply, write_ply_colored,
    FeatureConfig, FeatureKind, FeatureMatrix, TriangleMesh,
};
use hmrf_mesh::model::{CovarianceUpdate, DensityMode, InitMode, ModelConfig};
use hmrf_mesh::synthbench::{evaluate, synth, SynthKind, SynthSpec};
use hmrf_mesh::{Error, Result};

/// Segment triangle meshes with a hidden Markov random field and EM.
#[derive(Debug, Parser)]
#[command(name = "hmrf-mesh", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Generate a synthetic mesh with planted labels.
    Synth(SynthArgs),
    /// Segment a mesh into labeled regions.
    Segment(SegmentArgs),
    /// Score predicted labels against ground truth.
    Eval(EvalArgs),
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum KindArg {
    #[value(name = "grid_sheet")]
    GridSheet,
    #[value(name = "sphere")]
    Sphere,
    #[value(name = "two_lobes")]
    TwoLobes,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum InitArg {
    Kmeans,
    Paper,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum DensityArg {
    Corrected,
    Paper,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum CovArg {
    Full,
    Identity,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum FeaturesArg {
    Centroid,
    CentroidNormal,
}

#[derive(Debug, Args)]
struct SynthArgs {
    /// Surface to generate.
    #[arg(long, value_enum)]
    kind: KindArg,
    /// Mesh resolution (at least 2).
    #[arg(long)]
    resolution: usize,
    /// Number of planted classes.
    #[arg(long)]
    classes: usize,
    /// Standard deviation of the Gaussian noise added to the features.
    #[arg(long, default_value_t = 0.0)]
    noise: f64,
    /// Noise seed.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Directory receiving mesh.ply, features.csv and truth.csv.
    #[arg(long, default_value = ".")]
    out_dir: PathBuf,
}

#[derive(Debug, Args)]
struct SegmentArgs {
    /// Input mesh (.obj or .ply).
    #[arg(long)]
    input: PathBuf,
    /// Result JSON path.
    #[arg(long)]
    output: PathBuf,
    /// Also write the mesh colored by label to this PLY path.
    #[arg(long)]
    ply: Option<PathBuf>,
    /// Number of classes.
    #[arg(long)]
    classes: usize,
    /// Potts coupling strength; 0 disables the label field.
    #[arg(long, default_value_t = 0.0)]
    beta: f64,
    /// Maximum EM iterations.
    #[arg(long, default_value_t = 100)]
    max_iter: usize,
    /// Relative lower-bound change that counts as converged.
    #[arg(long, default_value_t = 1e-6)]
    tol: f64,
    /// Initialization seed.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Parameter initialization.
    #[arg(long, value_enum, default_value = "kmeans")]
    init: InitArg,
    /// Gaussian normalizing constant.
    #[arg(long, value_enum, default_value = "corrected")]
    density: DensityArg,
    /// Covariance update rule.
    #[arg(long, value_enum, default_value = "full")]
    cov: CovArg,
    /// Per-face features computed from the mesh.
    #[arg(long, value_enum, default_value = "centroid")]
    features: FeaturesArg,
    /// Read features from a CSV file (one row per face) instead of computing them.
    #[arg(long)]
    feature_file: Option<PathBuf>,
    /// ICM sweeps per EM iteration.
    #[arg(long, default_value_t = 10)]
    icm_sweeps: usize,
}

#[derive(Debug, Args)]
struct EvalArgs {
    /// Predicted labels: a result JSON from `segment` or a CSV with one label per line.
    #[arg(long)]
    predicted: PathBuf,
    /// True labels, CSV with one label per line.
    #[arg(long)]
    truth: PathBuf,
    /// Mesh providing the face adjacency for boundary smoothness.
    #[arg(long)]
    mesh: PathBuf,
    /// Metrics JSON path; printed to stdout when omitted.
    #[arg(long)]
    output: Option<PathBuf>,
}

fn read(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })
}

fn write(path: &Path, contents: &str) -> Result<()> {
    fs::write(path, contents).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })
}

fn load_mesh(path: &Path) -> Result<TriangleMesh> {
    let text = read(path)?;
    let is_ply = match path.extension().and_then(|e| e.to_str()) {
        Some(ext) if ext.eq_ignore_ascii_case("ply") => true,
        Some(ext) if ext.eq_ignore_ascii_case("obj") => false,
        _ => text.trim_start().starts_with("ply"),
    };
    if is_ply {
        parse_ply(&text)
    } else {
        parse_obj(&text)
    }
}

fn parse_labels(text: &str) -> Result<Vec<usize>> {
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(n, l)| {
            l.trim().parse().map_err(|_| Error::Parse {
                line: n + 1,
                message: format!("bad label `{}`", l.trim()),
            })
        })
        .collect()
}

fn labels_csv(labels: &[usize]) -> String {
    labels.iter().map(|l| format!("{l}\n")).collect()
}

fn cmd_synth(args: SynthArgs) -> Result<()> {
    let spec = SynthSpec {
        kind: match args.kind {
            KindArg::GridSheet => SynthKind::GridSheet,
            KindArg::Sphere => SynthKind::Sphere,
            KindArg::TwoLobes => SynthKind::TwoLobes,
        },
        resolution: args.resolution,
        n_classes: args.classes,
        noise_sigma: args.noise,
        seed: args.seed,
    };
    let case = synth(&spec)?;
    fs::create_dir_all(&args.out_dir).map_err(|source| Error::Io {
        path: args.out_dir.clone(),
        source,
    })?;
    let ply = write_ply_colored(
        &case.mesh,
        case.truth.labels(),
        &default_palette(spec.n_classes),
    )?;
    write(&args.out_dir.join("mesh.ply"), &ply)?;
    write(&args.out_dir.join("features.csv"), &case.features.to_csv())?;
    write(
        &args.out_dir.join("truth.csv"),
        &labels_csv(case.truth.labels()),
    )?;
    println!(
        "faces={} classes={} out_dir={}",
        case.mesh.face_count(),
        spec.n_classes,
        args.out_dir.display()
    );
    Ok(())
}

fn cmd_segment(args: SegmentArgs) -> Result<()> {
    let mesh = load_mesh(&args.input)?;
    let graph = build_adjacency(&mesh)?;
    let features = match &args.feature_file {
        Some(path) => {
            let f = FeatureMatrix::from_csv(&read(path)?)?;
            if f.n_rows() != mesh.face_count() {
                return Err(Error::Shape(format!(
                    "{} has {} rows, mesh has {} faces",
                    path.display(),
                    f.n_rows(),
                    mesh.face_count()
                )));
            }
            f
        }
        None => face_features(
            &mesh,
            FeatureConfig {
                kind: match args.features {
                    FeaturesArg::Centroid => FeatureKind::Centroid,
                    FeaturesArg::CentroidNormal => FeatureKind::CentroidNormal,
                },
            },
        )?,
    };
    let config = RunConfig {
        beta: args.beta,
        max_iterations: args.max_iter,
        tolerance: args.tol,
        icm_sweeps_per_iteration: args.icm_sweeps,
        seed: args.seed,
        model: ModelConfig {
            n_classes: args.classes,
            density_mode: match args.density {
                DensityArg::Corrected => DensityMode::Corrected,
                DensityArg::Paper => DensityMode::Paper,
            },
            init_mode: match args.init {
                InitArg::Kmeans => InitMode::Kmeans,
                InitArg::Paper => InitMode::Paper,
            },
            covariance_update: match args.cov {
                CovArg::Full => CovarianceUpdate::Full,
                CovArg::Identity => CovarianceUpdate::FixedIdentity,
            },
            ..ModelConfig::default()
        },
    };

    let result = em::run(&features, &graph, &config)?;
    write(&args.output, &result.to_json())?;
    if let Some(path) = &args.ply {
        let ply = write_ply_colored(
            &mesh,
            result.labels.labels(),
            &default_palette(args.classes),
        )?;
        write(path, &ply)?;
    }
    println!("{}", result.summary_line());
    Ok(())
}

fn cmd_eval(args: EvalArgs) -> Result<()> {
    let text = read(&args.predicted)?;
    let predicted = if args.predicted.extension().is_some_and(|e| e == "json") {
        let doc: ResultDocument = serde_json::from_str(&text).map_err(|e| Error::Parse {
            line: e.line(),
            message: e.to_string(),
        })?;
        doc.labels
    } else {
        parse_labels(&text)?
    };
    let truth = parse_labels(&read(&args.truth)?)?;
    if predicted.len() != truth.len() {
        return Err(Error::Shape(format!(
            "{} predicted labels, {} true labels",
            predicted.len(),
            truth.len()
        )));
    }
    let mesh = load_mesh(&args.mesh)?;
    let graph = build_adjacency(&mesh)?;
    let k = predicted.iter().chain(&truth).max().map_or(1, |m| m + 1);
    let report = evaluate(
        &LabelField::new(predicted, k)?,
        &LabelField::new(truth, k)?,
        &graph,
    )?;

    let json = serde_json::to_string_pretty(&report).expect("metrics serialize");
    match &args.output {
        Some(path) => write(path, &json)?,
        None => println!("{json}"),
    }
    println!(
        "accuracy={} boundary_smoothness={}",
        report.accuracy, report.boundary_smoothness
    );
    Ok(())
}

fn exit_code(err: &Error) -> u8 {
    if err.is_parse() {
        3
    } else if err.is_numerical() {
        4
    } else {
        2
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = match cli.command {
        Command::Synth(args) => cmd_synth(args),
        Command::Segment(args) => cmd_segment(args),
        Command::Eval(args) => cmd_eval(args),
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::from(exit_code(&err))
        }
    }
}
