use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use tutorship::clustering::{best_by_silhouette, k_medoids, silhouette, sweep_k};
use tutorship::distance::{cached_distance_matrix, pairwise_distance_matrix, DistanceMatrix, DtwOptions};
use tutorship::encoding::{encode_sequence, EncodedSequence};
use tutorship::io::{self as tio, RunManifest};
use tutorship::metrics::distributedness;
use tutorship::model::{ingest, AnalysisConfig, Interval, LearnerRecord};
use tutorship::pipeline::{analyze, emit_report, AnalysisReport, PipelineOptions};
use tutorship::synth::{generate, ScoreModel, SynthSpec};
use tutorship::{Error, Result};

/// Tutorship-sequence analytics.
#[derive(Parser)]
#[command(name = "tutorship", version, about)]
struct Cli {
    /// Worker threads (default: available cores).
    #[arg(long, global = true, env = "TUTORSHIP_THREADS")]
    threads: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic sessions CSV with planted archetypes.
    Synth(SynthArgs),
    /// Offset-encode every learner's tutorship sequence.
    Encode(InputArgs),
    /// Per-learner session/tutor counts and distributedness.
    Metrics(MetricsArgs),
    /// Pairwise DTW distances between encoded sequences.
    Distances(DistancesArgs),
    /// k-medoids clustering with optional k sweep.
    Cluster(ClusterArgs),
    /// Full bucketed analysis report.
    Analyze(AnalyzeArgs),
    /// Rewrite the CSV tables of an existing report JSON.
    Report(ReportArgs),
}

#[derive(Args)]
struct InputArgs {
    /// Sessions CSV.
    #[arg(long)]
    input: PathBuf,
    /// Order sessions by this column when session_index is absent.
    #[arg(long)]
    timestamp_column: Option<String>,
    /// Output file (default: stdout).
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct SynthArgs {
    #[arg(long, default_value_t = 100)]
    n_per_archetype: usize,
    #[arg(long, default_value_t = 2)]
    min_len: u32,
    #[arg(long, default_value_t = 20)]
    max_len: u32,
    #[arg(long, default_value_t = SynthSpec::default().mixed_revert_prob)]
    revert_prob: f64,
    #[arg(long, default_value_t = SynthSpec::default().mixed_pool)]
    mixed_pool: usize,
    #[arg(long, default_value_t = ScoreModel::default().base)]
    base: f64,
    #[arg(long, default_value_t = ScoreModel::default().slope_intercept, allow_hyphen_values = true)]
    slope_intercept: f64,
    #[arg(long, default_value_t = ScoreModel::default().slope_coeff, allow_hyphen_values = true)]
    slope_coeff: f64,
    #[arg(long, default_value_t = ScoreModel::default().noise_sd)]
    noise_sd: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Output file (default: stdout).
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct MetricsArgs {
    #[command(flatten)]
    input: InputArgs,
    #[arg(long, default_value_t = 2.0)]
    log_base: f64,
}

#[derive(Args)]
struct DistancesArgs {
    #[command(flatten)]
    input: InputArgs,
    #[arg(long)]
    config: Option<PathBuf>,
    /// Only learners whose session count lies in `lo,hi`.
    #[arg(long, value_parser = parse_interval)]
    bucket: Option<Interval>,
    /// Directory for cached matrices.
    #[arg(long)]
    cache_dir: Option<PathBuf>,
}

#[derive(Args)]
struct ClusterArgs {
    #[arg(long)]
    input: PathBuf,
    #[arg(long)]
    timestamp_column: Option<String>,
    #[arg(long)]
    config: Option<PathBuf>,
    /// Cluster at exactly this k.
    #[arg(long, conflicts_with = "k_sweep")]
    k: Option<usize>,
    /// Sweep k over `lo,hi` and pick the best mean silhouette.
    #[arg(long, value_parser = parse_interval)]
    k_sweep: Option<Interval>,
    #[arg(long)]
    seed: Option<u64>,
    /// Only learners whose session count lies in `lo,hi` (default: 2 or more sessions).
    #[arg(long, value_parser = parse_interval)]
    bucket: Option<Interval>,
    #[arg(long)]
    cache_dir: Option<PathBuf>,
    /// Output directory for assignments.csv and sweep.json.
    #[arg(long, env = "TUTORSHIP_OUT_DIR")]
    out: PathBuf,
}

#[derive(Args)]
struct AnalyzeArgs {
    #[arg(long)]
    input: PathBuf,
    #[arg(long)]
    timestamp_column: Option<String>,
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, env = "TUTORSHIP_OUT_DIR")]
    out: PathBuf,
    /// Overrides `rng_seed` from the config.
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    cache_dir: Option<PathBuf>,
}

#[derive(Args)]
struct ReportArgs {
    /// A report.json written by `analyze`.
    #[arg(long)]
    report: PathBuf,
    #[arg(long, env = "TUTORSHIP_OUT_DIR")]
    out: PathBuf,
}

fn parse_interval(s: &str) -> std::result::Result<Interval, String> {
    let (lo, hi) = s
        .split_once([',', '-', ':'])
        .ok_or_else(|| format!("expected `lo,hi`, got `{s}`"))?;
    let lo: u32 = lo.trim().parse().map_err(|_| format!("bad lower bound in `{s}`"))?;
    let hi: u32 = hi.trim().parse().map_err(|_| format!("bad upper bound in `{s}`"))?;
    Interval::try_from([lo, hi])
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(n) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("error: {e}");
            return ExitCode::from(1);
        }
    }
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}

fn run(command: Command) -> Result<()> {
    match command {
        Command::Synth(a) => synth(a),
        Command::Encode(a) => encode(a),
        Command::Metrics(a) => metrics(a),
        Command::Distances(a) => distances(a),
        Command::Cluster(a) => cluster(a),
        Command::Analyze(a) => run_analyze(a),
        Command::Report(a) => report(a),
    }
}

fn load_records(input: &Path, timestamp_column: Option<&str>) -> Result<Vec<LearnerRecord>> {
    ingest(tio::read_sessions_file(input, timestamp_column)?)
}

fn load_config(path: Option<&Path>) -> Result<AnalysisConfig> {
    match path {
        Some(p) => tio::load_config(p),
        None => Ok(AnalysisConfig::default()),
    }
}

/// Writes to `out` or stdout.
fn emit(out: Option<&Path>, f: impl FnOnce(&mut dyn Write) -> Result<()>) -> Result<()> {
    match out {
        Some(path) => {
            if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
                fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
            }
            let file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
            let mut w = io::BufWriter::new(file);
            f(&mut w)?;
            w.flush().map_err(|e| Error::io(path, e))
        }
        None => {
            let stdout = io::stdout();
            let mut lock = stdout.lock();
            f(&mut lock)
        }
    }
}

/// Manifests go next to the output file, else to `$TUTORSHIP_OUT_DIR`, else
/// to the working directory.
fn manifest_dir(out: Option<&Path>) -> PathBuf {
    if let Some(parent) = out.and_then(Path::parent) {
        return if parent.as_os_str().is_empty() { PathBuf::from(".") } else { parent.to_path_buf() };
    }
    std::env::var_os("TUTORSHIP_OUT_DIR").map_or_else(|| PathBuf::from("."), PathBuf::from)
}

fn write_manifest(name: &str, config: &AnalysisConfig, inputs: &[&Path], dir: &Path) -> Result<()> {
    RunManifest::new(name, config, inputs)?.write(dir)?;
    Ok(())
}

fn synth(a: SynthArgs) -> Result<()> {
    let spec = SynthSpec {
        n_per_archetype: a.n_per_archetype,
        length_range: Interval::try_from([a.min_len, a.max_len]).map_err(Error::Config)?,
        mixed_revert_prob: a.revert_prob,
        mixed_pool: a.mixed_pool,
        score_model: ScoreModel {
            base: a.base,
            slope_intercept: a.slope_intercept,
            slope_coeff: a.slope_coeff,
            noise_sd: a.noise_sd,
        },
        seed: a.seed,
    };
    let sessions = generate(&spec)?;
    emit(a.out.as_deref(), |w| tio::write_sessions(w, &sessions))?;
    let config = AnalysisConfig {
        rng_seed: a.seed,
        ..Default::default()
    };
    write_manifest("synth", &config, &[], &manifest_dir(a.out.as_deref()))
}

fn encode(a: InputArgs) -> Result<()> {
    let records = load_records(&a.input, a.timestamp_column.as_deref())?;
    let encs: Vec<EncodedSequence> = records.iter().map(|r| encode_sequence(&r.sequence)).collect();
    emit(a.out.as_deref(), |w| tio::write_encoded(w, &encs))?;
    write_manifest("encode", &AnalysisConfig::default(), &[&a.input], &manifest_dir(a.out.as_deref()))
}

fn metrics(a: MetricsArgs) -> Result<()> {
    let config = AnalysisConfig {
        entropy_log_base: a.log_base,
        ..Default::default()
    };
    config.validate()?;
    let records = load_records(&a.input.input, a.input.timestamp_column.as_deref())?;
    emit(a.input.out.as_deref(), |w| {
        let mut csv = csv::Writer::from_writer(w);
        csv.write_record(["learner_id", "n_sessions", "n_tutors", "session_tutor_ratio", "distributedness"])?;
        for r in &records {
            csv.write_record([
                r.learner_id().to_string(),
                r.n_sessions.to_string(),
                r.n_tutors.to_string(),
                r.session_tutor_ratio().to_string(),
                distributedness(&r.sequence, a.log_base).value.to_string(),
            ])?;
        }
        csv.flush().map_err(|e| Error::io("<output>", e))
    })?;
    write_manifest("metrics", &config, &[&a.input.input], &manifest_dir(a.input.out.as_deref()))
}

fn select(records: &[LearnerRecord], bucket: Option<Interval>) -> Vec<EncodedSequence> {
    records
        .iter()
        .filter(|r| match bucket {
            Some(b) => b.contains(r.n_sessions as u32),
            None => r.is_analyzable(),
        })
        .map(|r| encode_sequence(&r.sequence))
        .collect()
}

fn matrix(encs: &[EncodedSequence], config: &AnalysisConfig, cache: Option<&Path>) -> Result<DistanceMatrix> {
    let opts = DtwOptions {
        window: config.dtw_window,
        length_normalize: config.dtw_length_normalize,
    };
    match cache {
        Some(dir) => Ok(cached_distance_matrix(encs, opts, dir)?.0),
        None => pairwise_distance_matrix(encs, opts),
    }
}

fn distances(a: DistancesArgs) -> Result<()> {
    let config = load_config(a.config.as_deref())?;
    let records = load_records(&a.input.input, a.input.timestamp_column.as_deref())?;
    let encs = select(&records, a.bucket);
    let d = matrix(&encs, &config, a.cache_dir.as_deref())?;
    emit(a.input.out.as_deref(), |w| tio::write_distance_matrix(w, &d))?;
    let mut inputs: Vec<&Path> = vec![&a.input.input];
    if let Some(c) = &a.config {
        inputs.push(c);
    }
    write_manifest("distances", &config, &inputs, &manifest_dir(a.input.out.as_deref()))
}

#[derive(Serialize)]
struct SweepFile {
    bucket: Option<Interval>,
    n_learners: usize,
    chosen_k: usize,
    chosen_by: &'static str,
    mean_silhouette: Option<f64>,
    sweep: Vec<SweepRow>,
}

#[derive(Serialize)]
struct SweepRow {
    k: usize,
    mean_silhouette: f64,
    total_cost: f64,
    iterations: usize,
}

fn cluster(a: ClusterArgs) -> Result<()> {
    let mut config = load_config(a.config.as_deref())?;
    if let Some(seed) = a.seed {
        config.rng_seed = seed;
    }
    let records = load_records(&a.input, a.timestamp_column.as_deref())?;
    let encs = select(&records, a.bucket);
    let d = matrix(&encs, &config, a.cache_dir.as_deref())?;

    let (assignment, sweep, chosen_by) = match a.k {
        Some(k) => (k_medoids(&d, k, config.rng_seed, config.max_iter)?, Vec::new(), "configured"),
        None => {
            let range = a.k_sweep.unwrap_or(config.k_sweep);
            let entries = sweep_k(&d, range, config.rng_seed, config.max_iter)?;
            let best = best_by_silhouette(&entries).expect("non-empty sweep").assignment.clone();
            let rows = entries
                .iter()
                .map(|e| SweepRow {
                    k: e.k,
                    mean_silhouette: e.mean_silhouette,
                    total_cost: e.assignment.total_cost,
                    iterations: e.assignment.iterations,
                })
                .collect();
            (best, rows, "silhouette")
        }
    };
    let mean_silhouette = if assignment.k >= 2 {
        Some(silhouette(&d, &assignment)?.mean)
    } else {
        None
    };

    fs::create_dir_all(&a.out).map_err(|e| Error::io(&a.out, e))?;
    let path = a.out.join("assignments.csv");
    let mut w = csv::Writer::from_path(&path)?;
    w.write_record(["learner_id", "cluster", "medoid_learner_id"])?;
    let clusters = assignment.cluster_ids();
    for (i, id) in d.ids().iter().enumerate() {
        w.write_record([id.as_str(), &clusters[i].to_string(), &d.ids()[assignment.labels[i]]])?;
    }
    w.flush().map_err(|e| Error::io(&path, e))?;

    let file = SweepFile {
        bucket: a.bucket,
        n_learners: d.len(),
        chosen_k: assignment.k,
        chosen_by,
        mean_silhouette,
        sweep,
    };
    let path = a.out.join("sweep.json");
    let mut text = serde_json::to_string_pretty(&file)?;
    text.push('\n');
    fs::write(&path, text).map_err(|e| Error::io(&path, e))?;

    let mut inputs: Vec<&Path> = vec![&a.input];
    if let Some(c) = &a.config {
        inputs.push(c);
    }
    write_manifest("cluster", &config, &inputs, &a.out)
}

fn run_analyze(a: AnalyzeArgs) -> Result<()> {
    let mut config = load_config(a.config.as_deref())?;
    if let Some(seed) = a.seed {
        config.rng_seed = seed;
    }
    let records = load_records(&a.input, a.timestamp_column.as_deref())?;
    let report = analyze(
        &records,
        &config,
        &PipelineOptions {
            cache_dir: a.cache_dir.clone(),
        },
    )?;
    emit_report(&report, &a.out)?;
    let mut inputs: Vec<&Path> = vec![&a.input];
    if let Some(c) = &a.config {
        inputs.push(c);
    }
    write_manifest("analyze", &config, &inputs, &a.out)
}

fn report(a: ReportArgs) -> Result<()> {
    let text = fs::read_to_string(&a.report).map_err(|e| Error::io(&a.report, e))?;
    let report: AnalysisReport = serde_json::from_str(&text)?;
    emit_report(&report, &a.out)?;
    let p = &report.provenance;
    RunManifest::with_hash("report", p.config_hash.clone(), p.seed, &[&a.report])?.write(&a.out)?;
    Ok(())
}
