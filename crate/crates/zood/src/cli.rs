//! Command-line front end: rank a zoo from a manifest, select features from
//! the top-ranked ensemble, run the two simulation studies, and evaluate
//! rank correlations against the embedded benchmark tables.
//!
//! Exit codes are a stable contract: 0 success, 2 file and encoding
//! problems, 3 configuration or validation problems.

use crate::io::{
    self, FeatureBundle, IoError, ManifestEntry, ZooManifest,
};
use crate::metrics::{kendall_tau, tpr_fpr, weighted_kendall_tau, PairedSeries};
use crate::ranking::{rank_zoo, RankingError, ScoreNormalization, ZoodScore};
use crate::select::{
    apply_mask, concat_features, select_features_multi, SelectPriors, UpdateRule,
};
use crate::synth::{
    gen_multidomain, gen_regression, subset_cv_table, InvariantDomainSpec, RegressionSpec,
};
use crate::Matrix;
use clap::error::ErrorKind;
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use std::ffi::OsString;
use std::path::{Path, PathBuf};
use std::time::Instant;
use thiserror::Error;

pub const SCHEMA_VERSION: u32 = 1;

const EXIT_IO: i32 = 2;
const EXIT_VALIDATION: i32 = 3;

#[derive(Debug, Error)]
enum CliError {
    #[error("{0}")]
    Io(String),
    #[error("{0}")]
    Validation(String),
}

impl CliError {
    fn exit_code(&self) -> i32 {
        match self {
            CliError::Io(_) => EXIT_IO,
            CliError::Validation(_) => EXIT_VALIDATION,
        }
    }
}

// filesystem and encoding failures exit 2; semantic problems exit 3
fn classify_io(err: IoError) -> CliError {
    match err {
        IoError::UnknownDataset(_) | IoError::ManifestDuplicate(_) | IoError::InvalidBundle(_) => {
            CliError::Validation(err.to_string())
        }
        other => CliError::Io(other.to_string()),
    }
}

#[derive(Parser, Debug)]
#[command(
    name = "zood",
    version,
    about = "Rank feature extractors for out-of-distribution transfer and select features from the best ones"
)]
pub struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Score every model in a manifest by leave-one-domain-out evidence
    Rank(RankArgs),
    /// Rank, concatenate the top models, and select feature columns
    Select(SelectArgs),
    /// Seeded simulation studies
    #[command(subcommand)]
    Simulate(SimulateCommand),
    /// Rank correlations of a scoring method against benchmark accuracy
    Eval(EvalArgs),
}

#[derive(ValueEnum, Clone, Copy, Debug, Default)]
enum NormalizationArg {
    /// Average log-densities per held-out sample (size-consistent)
    #[default]
    PerSample,
    /// Sum log-densities over each held-out domain
    Total,
}

impl From<NormalizationArg> for ScoreNormalization {
    fn from(v: NormalizationArg) -> Self {
        match v {
            NormalizationArg::PerSample => ScoreNormalization::PerSample,
            NormalizationArg::Total => ScoreNormalization::Total,
        }
    }
}

impl NormalizationArg {
    fn name(self) -> &'static str {
        match self {
            NormalizationArg::PerSample => "per-sample",
            NormalizationArg::Total => "total",
        }
    }
}

#[derive(ValueEnum, Clone, Copy, Debug, Default)]
enum FormatArg {
    /// Machine-readable report
    #[default]
    Json,
    /// Human-readable summary
    Table,
}

#[derive(ValueEnum, Clone, Copy, Debug, Default)]
enum RuleArg {
    #[default]
    Conjugate,
    Reciprocal,
}

impl From<RuleArg> for UpdateRule {
    fn from(v: RuleArg) -> Self {
        match v {
            RuleArg::Conjugate => UpdateRule::Conjugate,
            RuleArg::Reciprocal => UpdateRule::Reciprocal,
        }
    }
}

#[derive(Args, Debug)]
struct RankArgs {
    /// Zoo manifest (JSON); bundle paths resolve relative to it
    #[arg(long)]
    manifest: PathBuf,
    /// Write the JSON report here instead of stdout
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t)]
    score_normalization: NormalizationArg,
    /// Worker threads for per-model scoring (env ZOOD_JOBS as fallback)
    #[arg(long)]
    jobs: Option<usize>,
    #[arg(long, value_enum, default_value_t)]
    format: FormatArg,
}

#[derive(Args, Debug)]
struct SelectArgs {
    #[arg(long)]
    manifest: PathBuf,
    /// How many top-ranked models feed the ensemble
    #[arg(long, default_value_t = 3)]
    top_k: usize,
    #[arg(long)]
    out: Option<PathBuf>,
    /// Write the masked ensemble bundle here (.csv for text, else binary)
    #[arg(long)]
    out_bundle: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t)]
    score_normalization: NormalizationArg,
    #[arg(long)]
    jobs: Option<usize>,
    /// Prior inclusion probability
    #[arg(long, default_value_t = 0.5)]
    pi0: f64,
    /// Gamma hyper-priors: noise shape, noise scale, slab shape, slab scale,
    /// spike shape, spike scale
    #[arg(long, num_args = 6, value_delimiter = ',', default_values_t = [1.0, 1.0, 1.0, 1.0, 5.0, 1.0])]
    nu: Vec<f64>,
    /// Mask threshold on inclusion probabilities
    #[arg(long, default_value_t = 0.5)]
    tau: f64,
    #[arg(long, default_value_t = 1000)]
    max_iter: usize,
    #[arg(long, default_value_t = 256)]
    batch_size: usize,
    /// Early-stop threshold on inclusion-probability drift (0 disables)
    #[arg(long, default_value_t = 0.5)]
    epsilon: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, value_enum, default_value_t)]
    rule: RuleArg,
    #[arg(long, value_enum, default_value_t)]
    format: FormatArg,
}

#[derive(Subcommand, Debug)]
enum SimulateCommand {
    /// Recovery of a planted sparse support: TPR/FPR over repetitions
    Tprfpr(TprfprArgs),
    /// Leave-one-domain-out loss across feature subsets of generated data
    Invariant(InvariantArgs),
}

#[derive(Args, Debug)]
struct TprfprArgs {
    #[arg(long, default_value_t = 100)]
    d: usize,
    /// Planted active features (the first k columns)
    #[arg(long, default_value_t = 50)]
    k: usize,
    #[arg(long, default_value_t = 400)]
    n: usize,
    /// Stochastic batch size
    #[arg(long, default_value_t = 128)]
    ns: usize,
    #[arg(long, default_value_t = 50)]
    reps: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t)]
    format: FormatArg,
}

#[derive(Args, Debug)]
struct InvariantArgs {
    #[arg(long, default_value_t = 6)]
    d: usize,
    /// Invariant block size (the first dstar columns)
    #[arg(long, default_value_t = 2)]
    dstar: usize,
    #[arg(long, default_value_t = 3)]
    mdom: usize,
    #[arg(long, default_value_t = 2000)]
    nper: usize,
    /// Noise variance on the domain-mixed coordinates. Small values make the
    /// spurious block nearly a linear image of the invariant block, the
    /// regime where held-out loss separates the two most sharply.
    #[arg(long, default_value_t = 0.02)]
    s2: f64,
    /// Target noise variance
    #[arg(long, default_value_t = 1.0)]
    sigma2: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Cap on d for the exhaustive subset enumeration
    #[arg(long, default_value_t = 12)]
    max_d: usize,
    /// Also write the generated data as a labeled bundle
    #[arg(long)]
    emit_bundle: Option<PathBuf>,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t)]
    format: FormatArg,
}

#[derive(ValueEnum, Clone, Copy, Debug)]
enum MethodArg {
    Hscore,
    Knn,
    Logme,
    Zood,
    Leep,
    Nce,
}

impl MethodArg {
    fn name(self) -> &'static str {
        match self {
            MethodArg::Hscore => "hscore",
            MethodArg::Knn => "knn",
            MethodArg::Logme => "logme",
            MethodArg::Zood => "zood",
            MethodArg::Leep => "leep",
            MethodArg::Nce => "nce",
        }
    }
}

#[derive(ValueEnum, Clone, Copy, Debug, Default)]
enum SubsetArg {
    /// Every model with the method's score present
    #[default]
    All,
    /// Only the models that carry classification heads
    Heads,
}

#[derive(Args, Debug)]
struct EvalArgs {
    /// One of: pacs, vlcs, office_home, terra_incognita, nico_animals,
    /// nico_vehicles, domainnet
    #[arg(long)]
    dataset: String,
    #[arg(long, value_enum)]
    method: MethodArg,
    #[arg(long, value_enum, default_value_t)]
    subset: SubsetArg,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t)]
    format: FormatArg,
}

/// Parse the given arguments, run the command, and return the exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => {
                    print!("{e}");
                    0
                }
                _ => {
                    eprint!("{e}");
                    EXIT_VALIDATION
                }
            };
        }
    };
    let result = match cli.command {
        Command::Rank(args) => cmd_rank(args),
        Command::Select(args) => cmd_select(args),
        Command::Simulate(SimulateCommand::Tprfpr(args)) => cmd_simulate_tprfpr(args),
        Command::Simulate(SimulateCommand::Invariant(args)) => cmd_simulate_invariant(args),
        Command::Eval(args) => cmd_eval(args),
    };
    match result {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

fn effective_jobs(flag: Option<usize>) -> Option<usize> {
    flag.or_else(|| {
        std::env::var("ZOOD_JOBS")
            .ok()
            .and_then(|v| v.parse::<usize>().ok())
    })
    .filter(|&j| j > 0)
}

fn with_pool<R: Send>(jobs: Option<usize>, f: impl FnOnce() -> R + Send) -> Result<R, CliError> {
    match jobs {
        Some(j) => rayon::ThreadPoolBuilder::new()
            .num_threads(j)
            .build()
            .map_err(|e| CliError::Validation(format!("thread pool: {e}")))
            .map(|pool| pool.install(f)),
        None => Ok(f()),
    }
}

fn load_zoo(manifest_path: &Path) -> Result<(ZooManifest, Vec<FeatureBundle>), CliError> {
    let manifest = io::read_manifest(manifest_path).map_err(classify_io)?;
    let base = manifest_path.parent().unwrap_or_else(|| Path::new("."));
    let mut bundles = Vec::with_capacity(manifest.models.len());
    for ManifestEntry { model_id, path } in &manifest.models {
        let resolved = if Path::new(path).is_absolute() {
            PathBuf::from(path)
        } else {
            base.join(path)
        };
        let mut bundle = io::read_bundle(&resolved).map_err(|e| {
            let wrapped = format!("model '{}' at {}: {}", model_id, resolved.display(), e);
            match classify_io(e) {
                CliError::Io(_) => CliError::Io(wrapped),
                CliError::Validation(_) => CliError::Validation(wrapped),
            }
        })?;
        bundle.model_id = model_id.clone();
        eprintln!(
            "loaded {} ({} samples x {} features)",
            model_id,
            bundle.features.nrows(),
            bundle.features.ncols()
        );
        bundles.push(bundle);
    }
    Ok((manifest, bundles))
}

fn classify_ranking(err: RankingError) -> CliError {
    CliError::Validation(err.to_string())
}

fn emit(report: &impl Serialize, table: String, format: FormatArg, out: &Option<PathBuf>) -> Result<(), CliError> {
    let text = match format {
        FormatArg::Json => serde_json::to_string_pretty(report)
            .map_err(|e| CliError::Io(e.to_string()))?,
        FormatArg::Table => table,
    };
    match out {
        Some(path) => std::fs::write(path, text.as_bytes())
            .map_err(|e| CliError::Io(format!("{}: {e}", path.display()))),
        None => {
            use std::io::Write;
            let mut stdout = std::io::stdout().lock();
            match writeln!(stdout, "{text}") {
                Err(e) if e.kind() == std::io::ErrorKind::BrokenPipe => Ok(()),
                other => other.map_err(|e| CliError::Io(e.to_string())),
            }
        }
    }
}

#[derive(Serialize)]
struct SplitReport {
    held_out_domain: usize,
    corr_total: f64,
    cov_total: f64,
    corr_per_sample_mean: f64,
    cov_per_sample_mean: f64,
    evidence_warning: bool,
}

#[derive(Serialize)]
struct RankedModel {
    model_id: String,
    score: f64,
    lambda: f64,
    dropped_columns: usize,
    splits: Vec<SplitReport>,
}

#[derive(Serialize)]
struct RankReport {
    schema_version: u32,
    dataset_name: String,
    score_normalization: String,
    jobs: usize,
    elapsed_seconds: f64,
    models: Vec<RankedModel>,
}

fn mean(v: &[f64]) -> f64 {
    if v.is_empty() {
        0.0
    } else {
        v.iter().sum::<f64>() / v.len() as f64
    }
}

fn ranked_model(score: &ZoodScore) -> RankedModel {
    RankedModel {
        model_id: score.model_id.clone(),
        score: score.score,
        lambda: score.lambda,
        dropped_columns: score.dropped_columns,
        splits: score
            .splits
            .iter()
            .map(|s| SplitReport {
                held_out_domain: s.held_out_domain,
                corr_total: s.corr_total,
                cov_total: s.cov_total,
                corr_per_sample_mean: mean(&s.corr_per_sample),
                cov_per_sample_mean: mean(&s.cov_per_sample),
                evidence_warning: s.evidence_warning,
            })
            .collect(),
    }
}

fn cmd_rank(args: RankArgs) -> Result<(), CliError> {
    let start = Instant::now();
    let (manifest, bundles) = load_zoo(&args.manifest)?;
    let jobs = effective_jobs(args.jobs);
    let scores = with_pool(jobs, || {
        rank_zoo(&bundles, args.score_normalization.into())
    })?
    .map_err(classify_ranking)?;
    let report = RankReport {
        schema_version: SCHEMA_VERSION,
        dataset_name: manifest.dataset_name.clone(),
        score_normalization: args.score_normalization.name().to_string(),
        jobs: jobs.unwrap_or_else(rayon::current_num_threads),
        elapsed_seconds: start.elapsed().as_secs_f64(),
        models: scores.iter().map(ranked_model).collect(),
    };
    let mut table = format!(
        "{:<24} {:>12} {:>10} {:>8}\n",
        "model", "score", "lambda", "dropped"
    );
    for m in &report.models {
        table.push_str(&format!(
            "{:<24} {:>12.6} {:>10.4} {:>8}\n",
            m.model_id, m.score, m.lambda, m.dropped_columns
        ));
    }
    emit(&report, table, args.format, &args.out)
}

#[derive(Serialize)]
struct SelectReport {
    schema_version: u32,
    dataset_name: String,
    top_k: usize,
    selected_models: Vec<String>,
    rule: String,
    tau: f64,
    total_columns: usize,
    selected_columns: usize,
    f_ratio: f64,
    iterations: usize,
    early_stopped: bool,
    inclusion_prob: Vec<f64>,
    mask: Vec<bool>,
    elapsed_seconds: f64,
}

fn one_hot(labels: &[usize]) -> Matrix {
    let classes = labels.iter().max().map_or(0, |m| m + 1);
    let mut onehot = Matrix::zeros(labels.len(), classes);
    for (r, &l) in labels.iter().enumerate() {
        onehot[(r, l)] = 1.0;
    }
    onehot
}

fn cmd_select(args: SelectArgs) -> Result<(), CliError> {
    let start = Instant::now();
    let (manifest, bundles) = load_zoo(&args.manifest)?;
    if args.top_k == 0 || args.top_k > bundles.len() {
        return Err(CliError::Validation(format!(
            "top_k {} must lie in 1..={} (the zoo size)",
            args.top_k,
            bundles.len()
        )));
    }
    let jobs = effective_jobs(args.jobs);
    let scores = with_pool(jobs, || {
        rank_zoo(&bundles, args.score_normalization.into())
    })?
    .map_err(classify_ranking)?;
    let chosen: Vec<FeatureBundle> = scores[..args.top_k]
        .iter()
        .map(|s| {
            bundles
                .iter()
                .find(|b| b.model_id == s.model_id)
                .expect("ranked id came from this zoo")
                .clone()
        })
        .collect();
    let ensemble = concat_features(&chosen)
        .map_err(|e| CliError::Validation(e.to_string()))?;
    let nu: [f64; 6] = args
        .nu
        .clone()
        .try_into()
        .map_err(|_| CliError::Validation("--nu needs exactly six values".into()))?;
    let priors = SelectPriors {
        pi0: args.pi0,
        nu,
        tau: args.tau,
        max_iter: args.max_iter,
        batch_size: args.batch_size,
        epsilon: args.epsilon,
        seed: args.seed,
        rule: args.rule.into(),
    };
    let targets = one_hot(&ensemble.labels);
    let result = select_features_multi(&ensemble.features, &targets, &priors)
        .map_err(|e| CliError::Validation(e.to_string()))?;
    let masked = apply_mask(&ensemble, &result.mask)
        .map_err(|e| CliError::Validation(e.to_string()))?;
    if let Some(path) = &args.out_bundle {
        io::write_bundle(&masked, path).map_err(classify_io)?;
    }
    let total_columns = ensemble.features.ncols();
    let selected_columns = result.mask.iter().filter(|&&m| m).count();
    let report = SelectReport {
        schema_version: SCHEMA_VERSION,
        dataset_name: manifest.dataset_name.clone(),
        top_k: args.top_k,
        selected_models: chosen.iter().map(|b| b.model_id.clone()).collect(),
        rule: format!("{:?}", priors.rule).to_lowercase(),
        tau: args.tau,
        total_columns,
        selected_columns,
        f_ratio: selected_columns as f64 / total_columns as f64,
        iterations: result.iterations,
        early_stopped: result.early_stopped,
        inclusion_prob: result.inclusion_prob.iter().copied().collect(),
        mask: result.mask.clone(),
        elapsed_seconds: start.elapsed().as_secs_f64(),
    };
    let table = format!(
        "models: {}\ncolumns: {} of {} (F-ratio {:.3})\niterations: {} (early stop: {})\n",
        report.selected_models.join(", "),
        selected_columns,
        total_columns,
        report.f_ratio,
        report.iterations,
        report.early_stopped
    );
    emit(&report, table, args.format, &args.out)
}

#[derive(Serialize)]
struct TprfprReport {
    schema_version: u32,
    d: usize,
    k: usize,
    n: usize,
    batch_size: usize,
    reps: usize,
    seed: u64,
    tpr_mean_percent: f64,
    tpr_std_percent: f64,
    fpr_mean_percent: f64,
    fpr_std_percent: f64,
    elapsed_seconds: f64,
}

fn sample_std(values: &[f64]) -> f64 {
    if values.len() < 2 {
        return 0.0;
    }
    let m = mean(values);
    (values.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / (values.len() - 1) as f64).sqrt()
}

fn cmd_simulate_tprfpr(args: TprfprArgs) -> Result<(), CliError> {
    let start = Instant::now();
    if args.reps == 0 {
        return Err(CliError::Validation("reps must be positive".into()));
    }
    let mut tprs = Vec::with_capacity(args.reps);
    let mut fprs = Vec::with_capacity(args.reps);
    for rep in 0..args.reps {
        let seed = args.seed.wrapping_add(rep as u64);
        let (data, truth) = gen_regression(&RegressionSpec {
            d: args.d,
            k: args.k,
            n: args.n,
            seed,
        })
        .map_err(|e| CliError::Validation(e.to_string()))?;
        let priors = SelectPriors {
            batch_size: args.ns,
            seed,
            ..SelectPriors::default()
        };
        let result = crate::select::select_features(&data, &priors)
            .map_err(|e| CliError::Validation(e.to_string()))?;
        let (tpr, fpr) =
            tpr_fpr(&result.mask, &truth).map_err(|e| CliError::Validation(e.to_string()))?;
        tprs.push(100.0 * tpr);
        fprs.push(100.0 * fpr);
    }
    let report = TprfprReport {
        schema_version: SCHEMA_VERSION,
        d: args.d,
        k: args.k,
        n: args.n,
        batch_size: args.ns,
        reps: args.reps,
        seed: args.seed,
        tpr_mean_percent: mean(&tprs),
        tpr_std_percent: sample_std(&tprs),
        fpr_mean_percent: mean(&fprs),
        fpr_std_percent: sample_std(&fprs),
        elapsed_seconds: start.elapsed().as_secs_f64(),
    };
    let table = format!(
        "d={} k={} n={} ns={}  TPR {:.2}% (±{:.2})  FPR {:.2}% (±{:.2})\n",
        args.d,
        args.k,
        args.n,
        args.ns,
        report.tpr_mean_percent,
        report.tpr_std_percent,
        report.fpr_mean_percent,
        report.fpr_std_percent
    );
    emit(&report, table, args.format, &args.out)
}

#[derive(Serialize)]
struct SubsetRow {
    subset: Vec<usize>,
    loss: f64,
}

#[derive(Serialize)]
struct InvariantReport {
    schema_version: u32,
    d: usize,
    d_star: usize,
    domain_count: usize,
    n_per: usize,
    s2: f64,
    sigma2: f64,
    seed: u64,
    argmin: Vec<usize>,
    argmin_loss: f64,
    subsets: Vec<SubsetRow>,
    elapsed_seconds: f64,
}

fn cmd_simulate_invariant(args: InvariantArgs) -> Result<(), CliError> {
    let start = Instant::now();
    let spec = InvariantDomainSpec {
        d_star: args.dstar,
        d: args.d,
        domain_count: args.mdom,
        n_per: args.nper,
        s2: args.s2,
        sigma2: args.sigma2,
        beta_iv: None,
        seed: args.seed,
    };
    let data = gen_multidomain(&spec).map_err(|e| CliError::Validation(e.to_string()))?;
    if let Some(path) = &args.emit_bundle {
        let classified = data.to_classification();
        let bundle = FeatureBundle {
            model_id: "generated".into(),
            features: classified.features,
            labels: classified.labels,
            domains: classified.domains,
            column_provenance: None,
        };
        io::write_bundle(&bundle, path).map_err(classify_io)?;
    }
    let table_rows =
        subset_cv_table(&data, args.max_d).map_err(|e| CliError::Validation(e.to_string()))?;
    let mut argmin: Option<(&Vec<usize>, f64)> = None;
    for (subset, loss) in &table_rows {
        let better = match argmin {
            None => true,
            Some((cur, cur_loss)) => {
                *loss < cur_loss
                    || (*loss == cur_loss
                        && (subset.len() < cur.len()
                            || (subset.len() == cur.len() && subset < cur)))
            }
        };
        if better {
            argmin = Some((subset, *loss));
        }
    }
    let (argmin, argmin_loss) = argmin.expect("nonempty table");
    let report = InvariantReport {
        schema_version: SCHEMA_VERSION,
        d: args.d,
        d_star: args.dstar,
        domain_count: args.mdom,
        n_per: args.nper,
        s2: args.s2,
        sigma2: args.sigma2,
        seed: args.seed,
        argmin: argmin.clone(),
        argmin_loss,
        subsets: table_rows
            .iter()
            .map(|(subset, loss)| SubsetRow {
                subset: subset.clone(),
                loss: *loss,
            })
            .collect(),
        elapsed_seconds: start.elapsed().as_secs_f64(),
    };
    let mut table = format!("argmin {:?} with loss {:.6}\n", report.argmin, argmin_loss);
    for row in &report.subsets {
        table.push_str(&format!("{:?} -> {:.6}\n", row.subset, row.loss));
    }
    emit(&report, table, args.format, &args.out)
}

#[derive(Serialize)]
struct EvalReport {
    schema_version: u32,
    dataset_name: String,
    method: String,
    subset: String,
    models_used: usize,
    tau: f64,
    tau_weighted: f64,
}

fn cmd_eval(args: EvalArgs) -> Result<(), CliError> {
    let fixture = io::load_fixture(&args.dataset).map_err(classify_io)?;
    let pick = |row: &io::FixtureRow| -> Option<f64> {
        match args.method {
            MethodArg::Hscore => row.h_score,
            MethodArg::Knn => row.knn,
            MethodArg::Logme => row.logme,
            MethodArg::Zood => row.zood,
            MethodArg::Leep => row.leep,
            MethodArg::Nce => row.nce,
        }
    };
    let mut scores = Vec::new();
    let mut accs = Vec::new();
    for row in &fixture.rows {
        if matches!(args.subset, SubsetArg::Heads) && row.leep.is_none() {
            continue;
        }
        if let Some(v) = pick(row) {
            scores.push(v);
            accs.push(row.accuracy);
        }
    }
    let models_used = scores.len();
    let series = PairedSeries::new(scores, accs)
        .map_err(|e| CliError::Validation(e.to_string()))?;
    let tau = kendall_tau(&series).map_err(|e| CliError::Validation(e.to_string()))?;
    let tau_weighted =
        weighted_kendall_tau(&series).map_err(|e| CliError::Validation(e.to_string()))?;
    let report = EvalReport {
        schema_version: SCHEMA_VERSION,
        dataset_name: fixture.dataset_name.clone(),
        method: args.method.name().to_string(),
        subset: match args.subset {
            SubsetArg::All => "all",
            SubsetArg::Heads => "heads",
        }
        .to_string(),
        models_used,
        tau,
        tau_weighted,
    };
    let table = format!(
        "{} / {}: tau {:.3}, weighted tau {:.3} over {} models\n",
        report.dataset_name, report.method, tau, tau_weighted, models_used
    );
    emit(&report, table, args.format, &args.out)
}
