//! Command-line pipeline: synthesize test data, build shape models, fit
//! landmark tracks, compute anthropometric indices, classify cohorts and
//! run the full mapping evaluation.
//!
//! All outputs are written atomically (temp file + rename) and carry `#`
//! header comments with the tool version and the resolved configuration.
//! Logging is key=value on stderr and quiet by default.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, bail, Context, Result};
use clap::{Args, Parser, Subcommand};

use morphfit::eval::{
    run_experiment, ExperimentSource, ExperimentSpec, ExperimentTarget, NormState,
};
use morphfit::fit::{fit_track, FitConfig};
use morphfit::mesh::{load_mesh, save_mesh, validate_correspondence, Mesh};
use morphfit::metrics::{
    classify_cohort, load_schema, profile_from_landmarks, save_schema, ClassifyConfig,
    DistanceSchema, FacialIndexProfile, INDEX_COUNT,
};
use morphfit::model::{load_model, save_model, MorphableModel};
use morphfit::scalar::fmt17;
use morphfit::synth::{
    generate_corpus, generate_track, landmark_mapping, SubjectSpec, TEMPLATE_VERSION,
};
use morphfit::track::{load_landmark_track, load_mapping, save_landmark_track, save_mapping};

const VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Parser)]
#[command(name = "morphfit", version, about = "2D-track-to-3D-shape-model lip animation pipeline")]
struct Cli {
    /// Suppress the timestamp header field (byte-identical reruns).
    #[arg(long, global = true)]
    no_timestamp: bool,
    /// Log level: repeat for more detail (-v info, -vv debug).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic subject: pose corpus, sentence tracks, mapping
    /// and distance schema.
    Synth(SynthArgs),
    /// Build a PCA shape model from an OBJ corpus directory.
    BuildModel(BuildModelArgs),
    /// Fit shape coefficients to every frame of a landmark track.
    Fit(FitArgs),
    /// Compute anthropometric indices from landmark files.
    Metrics(MetricsArgs),
    /// Classify a cohort of index profiles into low/middle/high classes.
    Classify(ClassifyArgs),
    /// Run the corresponding-vs-non-corresponding evaluation protocol.
    Evaluate(EvaluateArgs),
}

#[derive(Args)]
struct SynthArgs {
    /// Subject spec JSON (subject_id, mouth/lip scales, noise_seed).
    #[arg(long)]
    spec: PathBuf,
    /// Number of corpus poses.
    #[arg(long, default_value_t = 16)]
    poses: usize,
    /// Frames per sentence track.
    #[arg(long, default_value_t = 60)]
    frames: usize,
    /// Comma-separated sentence ids.
    #[arg(long, default_value = "s1,s2,s3,s4", value_delimiter = ',')]
    sentences: Vec<String>,
    /// Output directory.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct BuildModelArgs {
    /// Directory of OBJ meshes with vertex correspondence.
    #[arg(long)]
    meshes: PathBuf,
    /// Output model file.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct FitArgs {
    /// Model file from build-model.
    #[arg(long)]
    model: PathBuf,
    /// Landmark-to-vertex mapping JSON.
    #[arg(long)]
    mapping: PathBuf,
    /// Landmark track CSV.
    #[arg(long)]
    track: PathBuf,
    /// Observation variance in pixels squared.
    #[arg(long, default_value_t = 9.0)]
    sigma2d: f64,
    /// Number of components to fit (default: all retained).
    #[arg(long = "K")]
    components: Option<usize>,
    /// Camera/shape refinement rounds.
    #[arg(long, default_value_t = 3)]
    alternations: usize,
    /// Output fitted CSV; per-frame cameras go to `<out>.cameras.csv`.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct MetricsArgs {
    /// Landmark CSV file, or a directory of them (one subject per file).
    #[arg(long)]
    landmarks: PathBuf,
    /// Distance schema JSON (default: built-in schema).
    #[arg(long)]
    schema: Option<PathBuf>,
    /// Frame index to measure (default: first frame of each track).
    #[arg(long)]
    frame: Option<u64>,
    /// Subject id override (single-file mode only; default: file stem).
    #[arg(long)]
    subject: Option<String>,
    /// Output indices CSV.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct ClassifyArgs {
    /// Indices CSV produced by `metrics`.
    #[arg(long)]
    indices: PathBuf,
    /// Confidence level of the boundary bands.
    #[arg(long, default_value_t = 0.8)]
    confidence: f64,
    /// Bootstrap resample count.
    #[arg(long, default_value_t = 1000)]
    bootstrap: usize,
    /// Bootstrap seed.
    #[arg(long, default_value_t = 42)]
    seed: u64,
    /// Output classes CSV; boundaries go to `<out>.boundaries.csv`.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct EvaluateArgs {
    /// Experiment config JSON.
    #[arg(long)]
    config: PathBuf,
    /// Output directory (overrides `output_dir` in the config).
    #[arg(long)]
    out_dir: Option<PathBuf>,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            // Usage/parse problems exit 1 with clap's rendered message.
            eprint!("{e}");
            return ExitCode::FAILURE;
        }
    };
    init_logging(cli.verbose);
    init_threads();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}

fn init_logging(verbose: u8) {
    let level = match verbose {
        0 => "error",
        1 => "info",
        _ => "debug",
    };
    let _ = env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level))
        .format(|buf, record| writeln!(buf, "level={} {}", record.level(), record.args()))
        .try_init();
}

/// `MORPHFIT_THREADS` caps data parallelism; 0 or unset means automatic.
fn init_threads() {
    if let Ok(value) = std::env::var("MORPHFIT_THREADS") {
        match value.trim().parse::<usize>() {
            Ok(0) => {}
            Ok(n) => {
                let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
            }
            Err(_) => log::warn!("ignored_invalid_env=MORPHFIT_THREADS value={value:?}"),
        }
    }
}

fn run(cli: &Cli) -> Result<()> {
    match &cli.command {
        Command::Synth(args) => cmd_synth(cli, args),
        Command::BuildModel(args) => cmd_build_model(cli, args),
        Command::Fit(args) => cmd_fit(cli, args),
        Command::Metrics(args) => cmd_metrics(cli, args),
        Command::Classify(args) => cmd_classify(cli, args),
        Command::Evaluate(args) => cmd_evaluate(cli, args),
    }
}

/// Header comment lines embedded at the top of every output file.
fn header_lines(cli: &Cli, config: &serde_json::Value) -> Vec<String> {
    let mut lines = vec![
        format!("morphfit {VERSION}"),
        format!("config: {config}"),
    ];
    if !cli.no_timestamp {
        let now = std::time::SystemTime::now()
            .duration_since(std::time::UNIX_EPOCH)
            .map(|d| d.as_secs())
            .unwrap_or(0);
        lines.push(format!("timestamp: {now}"));
    }
    lines
}

/// Writes a text file atomically: temp file in the same directory, then rename.
fn write_atomic(path: &Path, contents: &str) -> Result<()> {
    let dir = path
        .parent()
        .filter(|p| !p.as_os_str().is_empty())
        .unwrap_or_else(|| Path::new("."));
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    let tmp = dir.join(format!(
        ".{}.tmp-{}",
        path.file_name().map(|n| n.to_string_lossy()).unwrap_or_default(),
        std::process::id()
    ));
    fs::write(&tmp, contents).with_context(|| format!("writing {}", tmp.display()))?;
    fs::rename(&tmp, path).with_context(|| format!("renaming into {}", path.display()))?;
    Ok(())
}

fn csv_with_header(header: &[String], body: &str) -> String {
    let mut out = String::new();
    for line in header {
        out.push_str("# ");
        out.push_str(line);
        out.push('\n');
    }
    out.push_str(body);
    out
}

fn cmd_synth(cli: &Cli, args: &SynthArgs) -> Result<()> {
    let text = fs::read_to_string(&args.spec)
        .with_context(|| format!("reading {}", args.spec.display()))?;
    let spec: SubjectSpec =
        serde_json::from_str(&text).with_context(|| format!("parsing {}", args.spec.display()))?;
    let config = serde_json::json!({
        "command": "synth",
        "subject": spec,
        "poses": args.poses,
        "frames": args.frames,
        "sentences": args.sentences,
        "template_version": TEMPLATE_VERSION,
    });
    let header = header_lines(cli, &config);

    let corpus: Vec<Mesh<f64>> = generate_corpus(&spec, args.poses)?;
    let mesh_dir = args.out.join("meshes");
    fs::create_dir_all(&mesh_dir)?;
    for (i, mesh) in corpus.iter().enumerate() {
        save_mesh(mesh_dir.join(format!("pose_{i:03}.obj")), mesh, &header)?;
    }

    let track_dir = args.out.join("tracks");
    fs::create_dir_all(&track_dir)?;
    for sentence in &args.sentences {
        let track = generate_track::<f64>(&spec, sentence, args.frames)?;
        save_landmark_track(
            track_dir.join(format!("{}_{}.csv", spec.subject_id, sentence)),
            &track,
            &header,
        )?;
    }

    save_mapping(args.out.join("mapping.json"), &landmark_mapping())?;
    save_schema(args.out.join("schema.json"), &DistanceSchema::default())?;
    println!(
        "synth subject={} poses={} sentences={} out={}",
        spec.subject_id,
        args.poses,
        args.sentences.len(),
        args.out.display()
    );
    Ok(())
}

fn cmd_build_model(cli: &Cli, args: &BuildModelArgs) -> Result<()> {
    let mut paths: Vec<PathBuf> = fs::read_dir(&args.meshes)
        .with_context(|| format!("reading {}", args.meshes.display()))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|e| e.eq_ignore_ascii_case("obj")))
        .collect();
    paths.sort();
    if paths.len() < 2 {
        bail!("need at least 2 OBJ meshes in {}", args.meshes.display());
    }
    let meshes: Vec<Mesh<f64>> = paths
        .iter()
        .map(load_mesh)
        .collect::<Result<_, _>>()?;
    validate_correspondence(&meshes)?;
    let model = MorphableModel::build(&meshes)?;
    let config = serde_json::json!({
        "command": "build-model",
        "meshes": args.meshes.display().to_string(),
        "mesh_count": meshes.len(),
        "vertex_count": model.vertex_count(),
        "components": model.component_count(),
    });
    save_model(&args.out, &model, &header_lines(cli, &config))?;
    println!(
        "build-model meshes={} vertices={} components={} out={}",
        meshes.len(),
        model.vertex_count(),
        model.component_count(),
        args.out.display()
    );
    Ok(())
}

fn cmd_fit(cli: &Cli, args: &FitArgs) -> Result<()> {
    let model: MorphableModel<f64> = load_model(&args.model)?;
    let mapping = load_mapping(&args.mapping)?;
    let track = load_landmark_track::<f64>(&args.track)?;
    let config = FitConfig {
        sigma2d: args.sigma2d,
        components: args.components,
        alternations: args.alternations,
    };
    let fits = fit_track(&model, &mapping, &track, &config);
    let k = args.components.unwrap_or(model.component_count());

    let json = serde_json::json!({
        "command": "fit",
        "model": args.model.display().to_string(),
        "mapping": args.mapping.display().to_string(),
        "track": args.track.display().to_string(),
        "sigma2d": args.sigma2d,
        "components": k,
        "alternations": args.alternations,
    });
    let header = header_lines(cli, &json);

    let mut body = String::from("frame,residual");
    for i in 1..=k {
        body.push_str(&format!(",alpha_{i}"));
    }
    body.push('\n');
    let mut cameras = String::from("frame,m11,m12,m13,m14,m21,m22,m23,m24\n");
    let mut failed = 0usize;
    for frame in &fits {
        match &frame.result {
            Ok(f) => {
                body.push_str(&format!("{},{}", f.frame_index, fmt17(f.residual)));
                for i in 0..k {
                    body.push_str(&format!(",{}", fmt17(f.coeffs.alpha[i])));
                }
                body.push('\n');
                let m = f.camera.matrix();
                cameras.push_str(&format!(
                    "{},{},{},{},{},{},{},{},{}\n",
                    f.frame_index,
                    fmt17(m[(0, 0)]),
                    fmt17(m[(0, 1)]),
                    fmt17(m[(0, 2)]),
                    fmt17(m[(0, 3)]),
                    fmt17(m[(1, 0)]),
                    fmt17(m[(1, 1)]),
                    fmt17(m[(1, 2)]),
                    fmt17(m[(1, 3)])
                ));
            }
            Err(e) => {
                failed += 1;
                log::warn!("fit_frame_failed=true frame={} error={e}", frame.frame_index);
                eprintln!("warning: frame {} failed: {e}", frame.frame_index);
            }
        }
    }
    write_atomic(&args.out, &csv_with_header(&header, &body))?;
    let camera_path = sidecar_path(&args.out, "cameras.csv");
    write_atomic(&camera_path, &csv_with_header(&header, &cameras))?;
    println!(
        "fit frames={} failed={failed} out={} cameras={}",
        fits.len(),
        args.out.display(),
        camera_path.display()
    );
    Ok(())
}

/// `out.csv` -> `out.cameras.csv` style sibling path.
fn sidecar_path(path: &Path, suffix: &str) -> PathBuf {
    let stem = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "out".into());
    path.with_file_name(format!("{stem}.{suffix}"))
}

fn load_profiles_from_landmarks(
    args: &MetricsArgs,
    schema: &DistanceSchema,
) -> Result<Vec<FacialIndexProfile<f64>>> {
    let mut files: Vec<PathBuf> = if args.landmarks.is_dir() {
        if args.subject.is_some() {
            bail!("--subject applies only to single-file mode");
        }
        let mut v: Vec<PathBuf> = fs::read_dir(&args.landmarks)?
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| p.extension().is_some_and(|e| e.eq_ignore_ascii_case("csv")))
            .collect();
        v.sort();
        v
    } else {
        vec![args.landmarks.clone()]
    };
    if files.is_empty() {
        bail!("no CSV landmark files found in {}", args.landmarks.display());
    }
    files.sort();
    let mut profiles = Vec::new();
    for file in &files {
        let track = load_landmark_track::<f64>(file)?;
        let frame = match args.frame {
            Some(ix) => track
                .frames
                .iter()
                .find(|f| f.index == ix)
                .ok_or_else(|| anyhow!("frame {ix} not present in {}", file.display()))?,
            None => &track.frames[0],
        };
        let subject = args
            .subject
            .clone()
            .filter(|_| files.len() == 1)
            .unwrap_or_else(|| track.video_id.clone());
        profiles.push(profile_from_landmarks(subject, &frame.points, schema)?);
    }
    Ok(profiles)
}

fn cmd_metrics(cli: &Cli, args: &MetricsArgs) -> Result<()> {
    let schema = match &args.schema {
        Some(path) => load_schema(path)?,
        None => DistanceSchema::default(),
    };
    let profiles = load_profiles_from_landmarks(args, &schema)?;
    let config = serde_json::json!({
        "command": "metrics",
        "landmarks": args.landmarks.display().to_string(),
        "schema": args.schema.as_ref().map(|p| p.display().to_string()),
        "frame": args.frame,
        "subjects": profiles.len(),
    });
    let header = header_lines(cli, &config);
    let mut body = String::from("subject");
    for i in 0..INDEX_COUNT {
        body.push_str(&format!(",I{}", i + 1));
    }
    body.push('\n');
    for p in &profiles {
        body.push_str(&p.subject_id);
        for v in p.values() {
            body.push_str(&format!(",{}", fmt17(*v)));
        }
        body.push('\n');
    }
    write_atomic(&args.out, &csv_with_header(&header, &body))?;
    println!("metrics subjects={} out={}", profiles.len(), args.out.display());
    Ok(())
}

fn parse_indices_csv(path: &Path) -> Result<Vec<FacialIndexProfile<f64>>> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let mut profiles = Vec::new();
    let mut header_seen = false;
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.trim_end_matches('\r');
        if line.trim().is_empty() || line.trim_start().starts_with('#') {
            continue;
        }
        if !header_seen {
            let expected: String = std::iter::once("subject".to_string())
                .chain((1..=INDEX_COUNT).map(|i| format!("I{i}")))
                .collect::<Vec<_>>()
                .join(",");
            if line.split(',').map(str::trim).collect::<Vec<_>>().join(",") != expected {
                bail!("{}: expected header `{expected}`", path.display());
            }
            header_seen = true;
            continue;
        }
        let cols: Vec<&str> = line.split(',').map(str::trim).collect();
        if cols.len() != INDEX_COUNT + 1 {
            bail!("{}:{}: expected {} columns", path.display(), lineno + 1, INDEX_COUNT + 1);
        }
        let mut values = [0.0f64; INDEX_COUNT];
        for (i, v) in values.iter_mut().enumerate() {
            *v = cols[i + 1]
                .parse()
                .map_err(|_| anyhow!("{}:{}: bad number {:?}", path.display(), lineno + 1, cols[i + 1]))?;
        }
        profiles.push(FacialIndexProfile::new(cols[0].to_string(), values)?);
    }
    if !header_seen {
        bail!("{}: missing header", path.display());
    }
    Ok(profiles)
}

fn cmd_classify(cli: &Cli, args: &ClassifyArgs) -> Result<()> {
    let profiles = parse_indices_csv(&args.indices)?;
    let config = ClassifyConfig {
        confidence: args.confidence,
        bootstrap_samples: args.bootstrap,
        seed: args.seed,
    };
    let result = classify_cohort(&profiles, &config)?;
    let json = serde_json::json!({
        "command": "classify",
        "indices": args.indices.display().to_string(),
        "confidence": args.confidence,
        "bootstrap": args.bootstrap,
        "seed": args.seed,
        "subjects": profiles.len(),
    });
    let header = header_lines(cli, &json);

    let mut body = String::from("subject,index,core,band,outlier\n");
    for s in &result.subjects {
        for (i, label) in s.labels.iter().enumerate() {
            body.push_str(&format!(
                "{},I{},{},{},{}\n",
                s.subject_id,
                i + 1,
                label.core.as_str(),
                label.band.map(|b| b.as_str()).unwrap_or(""),
                label.outlier
            ));
        }
    }
    write_atomic(&args.out, &csv_with_header(&header, &body))?;

    let mut bounds =
        String::from("index,q1,q3,iqr,lower_fence,upper_fence,q1_lo,q1_hi,q3_lo,q3_hi\n");
    for (i, b) in result.boundaries.iter().enumerate() {
        bounds.push_str(&format!(
            "I{},{},{},{},{},{},{},{},{},{}\n",
            i + 1,
            fmt17(b.q1),
            fmt17(b.q3),
            fmt17(b.iqr),
            fmt17(b.lower_fence),
            fmt17(b.upper_fence),
            fmt17(b.q1_interval.0),
            fmt17(b.q1_interval.1),
            fmt17(b.q3_interval.0),
            fmt17(b.q3_interval.1)
        ));
    }
    let bounds_path = sidecar_path(&args.out, "boundaries.csv");
    write_atomic(&bounds_path, &csv_with_header(&header, &bounds))?;
    println!(
        "classify subjects={} out={} boundaries={}",
        profiles.len(),
        args.out.display(),
        bounds_path.display()
    );
    Ok(())
}

/// On-disk experiment config; all paths are relative to the config file.
#[derive(serde::Deserialize, serde::Serialize, Clone)]
struct EvaluateConfig {
    sources: Vec<SourceConfig>,
    targets: Vec<TargetConfig>,
    mapping: PathBuf,
    #[serde(default)]
    fit: FitParams,
    #[serde(default)]
    output_dir: Option<PathBuf>,
}

#[derive(serde::Deserialize, serde::Serialize, Clone)]
struct SourceConfig {
    subject_id: String,
    class_label: String,
    tracks: Vec<PathBuf>,
}

#[derive(serde::Deserialize, serde::Serialize, Clone)]
struct TargetConfig {
    subject_id: String,
    class_label: String,
    model: PathBuf,
}

#[derive(serde::Deserialize, serde::Serialize, Clone)]
struct FitParams {
    #[serde(default = "default_sigma2d")]
    sigma2d: f64,
    #[serde(default)]
    components: Option<usize>,
    #[serde(default = "default_alternations")]
    alternations: usize,
}

fn default_sigma2d() -> f64 {
    9.0
}

fn default_alternations() -> usize {
    3
}

impl Default for FitParams {
    fn default() -> Self {
        Self {
            sigma2d: default_sigma2d(),
            components: None,
            alternations: default_alternations(),
        }
    }
}

fn cmd_evaluate(cli: &Cli, args: &EvaluateArgs) -> Result<()> {
    let text = fs::read_to_string(&args.config)
        .with_context(|| format!("reading {}", args.config.display()))?;
    let config: EvaluateConfig =
        serde_json::from_str(&text).with_context(|| format!("parsing {}", args.config.display()))?;
    let base = args.config.parent().unwrap_or_else(|| Path::new("."));
    let out_dir = args
        .out_dir
        .clone()
        .or_else(|| config.output_dir.as_ref().map(|d| base.join(d)))
        .ok_or_else(|| anyhow!("no output directory: pass --out-dir or set output_dir"))?;

    let mapping = load_mapping(base.join(&config.mapping))?;
    let mut sources = Vec::new();
    for s in &config.sources {
        let tracks = s
            .tracks
            .iter()
            .map(|t| load_landmark_track::<f64>(base.join(t)))
            .collect::<Result<Vec<_>, _>>()?;
        sources.push(ExperimentSource {
            subject_id: s.subject_id.clone(),
            class_label: s.class_label.clone(),
            tracks,
        });
    }
    let mut targets = Vec::new();
    for t in &config.targets {
        targets.push(ExperimentTarget {
            subject_id: t.subject_id.clone(),
            class_label: t.class_label.clone(),
            model: load_model::<f64>(base.join(&t.model))?,
        });
    }
    let spec = ExperimentSpec {
        sources,
        targets,
        mapping,
        fit: FitConfig {
            sigma2d: config.fit.sigma2d,
            components: config.fit.components,
            alternations: config.fit.alternations,
        },
    };
    let report = run_experiment(&spec)?;

    let json = serde_json::json!({
        "command": "evaluate",
        "config": args.config.display().to_string(),
        "resolved": serde_json::to_value(&config)?,
    });
    let header = header_lines(cli, &json);

    // report.csv: per-sentence rows plus sentence="mean" averages.
    let mut body = String::from("source,target,sentence,channel,rmse\n");
    let mut invalid = String::from("source,target,sentence,error\n");
    let mut invalid_count = 0usize;
    for cell in &report.cells {
        match &cell.rmse {
            Ok((w, h)) => {
                body.push_str(&format!(
                    "{},{},{},width,{}\n",
                    cell.source_id,
                    cell.target_id,
                    cell.sentence_id,
                    fmt17(*w)
                ));
                body.push_str(&format!(
                    "{},{},{},height,{}\n",
                    cell.source_id,
                    cell.target_id,
                    cell.sentence_id,
                    fmt17(*h)
                ));
            }
            Err(e) => {
                invalid_count += 1;
                invalid.push_str(&format!(
                    "{},{},{},{:?}\n",
                    cell.source_id, cell.target_id, cell.sentence_id, e
                ));
            }
        }
    }
    for avg in &report.averages {
        if let Some((w, h)) = avg.rmse {
            body.push_str(&format!(
                "{},{},mean,width,{}\n",
                avg.source_id,
                avg.target_id,
                fmt17(w)
            ));
            body.push_str(&format!(
                "{},{},mean,height,{}\n",
                avg.source_id,
                avg.target_id,
                fmt17(h)
            ));
        }
    }
    write_atomic(&out_dir.join("report.csv"), &csv_with_header(&header, &body))?;
    if invalid_count > 0 {
        write_atomic(
            &out_dir.join("invalid_cells.csv"),
            &csv_with_header(&header, &invalid),
        )?;
    }

    let mut pvals = String::from("source,comparison,channel,p_pooled,p_paired\n");
    for c in &report.comparisons {
        let fmt_opt = |v: Option<f64>| v.map(fmt17).unwrap_or_default();
        pvals.push_str(&format!(
            "{},{},width,{},{}\n",
            c.source_id,
            c.target_class,
            fmt_opt(c.pooled.map(|p| p.0)),
            fmt_opt(c.paired.map(|p| p.0))
        ));
        pvals.push_str(&format!(
            "{},{},height,{},{}\n",
            c.source_id,
            c.target_class,
            fmt_opt(c.pooled.map(|p| p.1)),
            fmt_opt(c.paired.map(|p| p.1))
        ));
    }
    write_atomic(&out_dir.join("pvalues.csv"), &csv_with_header(&header, &pvals))?;

    // Per-cell normalized trajectory curves.
    let traj_dir = out_dir.join("trajectories");
    for cell in &report.cells {
        let (Some(src), Some(fit)) = (&cell.source_trajectory, &cell.fitted_trajectory) else {
            continue;
        };
        debug_assert_eq!(src.state, NormState::MinMaxNormalized);
        let mut t = String::from("frame,source_width,source_height,fitted_width,fitted_height\n");
        for i in 0..src.width.len() {
            t.push_str(&format!(
                "{},{},{},{},{}\n",
                i,
                fmt17(src.width[i]),
                fmt17(src.height[i]),
                fmt17(fit.width[i]),
                fmt17(fit.height[i])
            ));
        }
        let name = format!(
            "{}__{}__{}.csv",
            cell.source_id, cell.target_id, cell.sentence_id
        );
        write_atomic(&traj_dir.join(name), &csv_with_header(&header, &t))?;
    }

    println!(
        "evaluate cells={} invalid={} comparisons={} out={}",
        report.cells.len(),
        invalid_count,
        report.comparisons.len(),
        out_dir.display()
    );
    Ok(())
}
