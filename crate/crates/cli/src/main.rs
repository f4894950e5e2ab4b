//! Command-line front end for the reposum pipeline.
//!
//! Every command reads the optional `--config` TOML file first, then
//! layers any flags the user passed on top, so a flag always wins over
//! the file and the file always wins over the built-in defaults. Phase
//! commands (`analyze`, `summarize`, `cluster`, `docgen`, `pipeline`)
//! drive the resumable pipeline over one artifact directory; `eval`
//! scores its outputs against ground truth; `validate` audits the
//! artifacts without touching them.

use std::collections::{BTreeMap, BTreeSet};
use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Context};
use clap::{Args, Parser, Subcommand, ValueEnum};
use reposum_core::artifact::{self, EVAL_REPORT_SCHEMA};
use reposum_core::cluster::{BlendVariant, ClusterLevels};
use reposum_core::eval::{
    self, coverage_metrics, link_at_k, resolve_commits, trace_metrics, EvalReport, GroundTruth,
    Judge, RelevanceJudgment, StubJudge,
};
use reposum_core::eval::judges::{judge_relevance, retrieve_candidates, LlmJudge};
use reposum_core::eval::linkk::load_commits;
use reposum_core::eval::report::primary_judge_kappa;
use reposum_core::exec;
use reposum_core::feature_doc::{render_documentation, TraceLink};
use reposum_core::gateway::Gateway;
use reposum_core::pipeline::{
    run_pipeline, validate_artifacts, FeaturesArtifact, GraphArtifact, Phase, PhaseSelection,
    PhaseStatus, PipelineOutcome, CACHE_DIR, DOCS_DIR, FEATURES_FILE, GRAPH_FILE,
    TRACE_LINKS_FILE,
};
use reposum_core::PipelineConfig;

/// Where `eval` commands persist their report inside the artifact dir.
const EVAL_REPORT_FILE: &str = "eval_report.json";

#[derive(Parser)]
#[command(
    name = "reposum",
    version,
    about = "Feature-oriented repository summarization",
    propagate_version = true
)]
struct Cli {
    #[command(flatten)]
    global: GlobalArgs,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct GlobalArgs {
    /// Configuration file (TOML). Omitted sections keep their defaults.
    #[arg(long, global = true, value_name = "FILE")]
    config: Option<PathBuf>,
    /// Global seed, recorded in the run manifest.
    #[arg(long, global = true, value_name = "SEED")]
    seed: Option<u64>,
}

#[derive(Subcommand)]
enum Command {
    /// Parse a source tree into graph.json (model + adjacency matrices).
    Analyze {
        /// Repository root to analyze.
        root: PathBuf,
        /// Language profile.
        #[arg(long, value_name = "PROFILE")]
        lang: Option<String>,
        /// Artifact directory to create or update.
        #[arg(short, long, value_name = "DIR")]
        output: PathBuf,
    },
    /// Summarize methods and files; build both similarity matrices.
    Summarize {
        artifact_dir: PathBuf,
        /// Model provider: "stub" (offline) or "http".
        #[arg(long, value_name = "NAME")]
        provider: Option<String>,
        /// Worker threads for model-bound loops (0 = library default).
        #[arg(long, value_name = "N")]
        parallel: Option<usize>,
        /// Context-window budget in estimated tokens for file prompts.
        #[arg(long, value_name = "TOKENS")]
        window_budget: Option<usize>,
    },
    /// Cluster files and methods under the tuned CPM objective.
    Cluster {
        artifact_dir: PathBuf,
        /// Adjacency weight in the blend; similarity gets 1 - alpha.
        #[arg(long)]
        alpha: Option<f64>,
        /// Which matrices feed the blended graph.
        #[arg(long, value_enum)]
        variant: Option<VariantArg>,
        /// Which levels to cluster.
        #[arg(long, value_enum)]
        levels: Option<LevelsArg>,
        #[arg(long, value_name = "GAMMA")]
        gamma_min: Option<f64>,
        #[arg(long, value_name = "GAMMA")]
        gamma_max: Option<f64>,
        /// Points on the logarithmic gamma grid.
        #[arg(long, value_name = "N")]
        grid_points: Option<usize>,
        /// Seed restarts per gamma.
        #[arg(long, value_name = "N")]
        restarts: Option<usize>,
    },
    /// Generate feature and epic documents from the clustered model.
    Docgen {
        artifact_dir: PathBuf,
        /// Model provider: "stub" (offline) or "http".
        #[arg(long, value_name = "NAME")]
        provider: Option<String>,
        /// Extra directory to render the documents into (the artifact
        /// directory's docs/ is always written).
        #[arg(short, long, value_name = "DIR")]
        output: Option<PathBuf>,
    },
    /// Run analyze, summarize, cluster, and docgen in order, resuming
    /// phases whose inputs and config are unchanged.
    Pipeline {
        /// Repository root to analyze.
        root: PathBuf,
        /// Artifact directory to create or update.
        #[arg(short, long, value_name = "DIR")]
        output: PathBuf,
    },
    /// Score generated artifacts against ground truth.
    Eval {
        #[command(subcommand)]
        what: EvalCommand,
    },
    /// Check every artifact in the directory against its schema and
    /// structural invariants.
    Validate { artifact_dir: PathBuf },
}

#[derive(Subcommand)]
enum EvalCommand {
    /// Two-stage judged coverage: C, CB, and CC.
    Coverage(EvalArgs),
    /// Trace-link precision/recall from Stage-I relevance.
    Trace(EvalArgs),
    /// Commit-to-method linking precision/recall at each cutoff.
    Linkk(EvalArgs),
}

#[derive(Args)]
struct EvalArgs {
    artifact_dir: PathBuf,
    /// Ground-truth features file (JSON).
    #[arg(long, value_name = "FILE")]
    ground_truth: PathBuf,
    /// Commit history file (JSON); required for `linkk`.
    #[arg(long, value_name = "FILE")]
    commits: Option<PathBuf>,
    /// Primary judges: "stub" or two comma-separated model names.
    #[arg(long, default_value = "stub", value_name = "SPEC")]
    judges: String,
    /// Tie-breaking judge: "stub" or one model name.
    #[arg(long, default_value = "stub", value_name = "SPEC")]
    tiebreaker: String,
    /// Cutoffs for linkk, e.g. `-k 1,2,3`; defaults to eval.k_list.
    #[arg(short, long, value_delimiter = ',', value_name = "K")]
    k: Option<Vec<usize>>,
}

#[derive(Clone, Copy, ValueEnum)]
enum VariantArg {
    Blended,
    AdjOnly,
    SimOnly,
}

impl From<VariantArg> for BlendVariant {
    fn from(v: VariantArg) -> Self {
        match v {
            VariantArg::Blended => BlendVariant::Blended,
            VariantArg::AdjOnly => BlendVariant::AdjacencyOnly,
            VariantArg::SimOnly => BlendVariant::SimilarityOnly,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum LevelsArg {
    Hierarchical,
    FileOnly,
    MethodOnly,
}

impl From<LevelsArg> for ClusterLevels {
    fn from(l: LevelsArg) -> Self {
        match l {
            LevelsArg::Hierarchical => ClusterLevels::Hierarchical,
            LevelsArg::FileOnly => ClusterLevels::FileOnly,
            LevelsArg::MethodOnly => ClusterLevels::MethodOnly,
        }
    }
}

fn main() {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn"))
        .format_timestamp(None)
        .init();
    if let Err(e) = run(Cli::parse()) {
        eprintln!("error: {e:#}");
        std::process::exit(1);
    }
}

fn run(cli: Cli) -> anyhow::Result<()> {
    let mut config = load_config(&cli.global)?;

    match cli.command {
        Command::Analyze { root, lang, output } => {
            if let Some(lang) = lang {
                config.pipeline.lang = lang;
            }
            let outcome =
                run_pipeline(&config, &root, &output, PhaseSelection::Only(Phase::Analyze))?;
            report_outcome(&outcome);
        }
        Command::Summarize { artifact_dir, provider, parallel, window_budget } => {
            if let Some(provider) = provider {
                config.provider.name = provider;
            }
            if let Some(parallel) = parallel {
                config.provider.parallelism = parallel;
            }
            if let Some(window_budget) = window_budget {
                config.summarize.window_budget = window_budget;
            }
            if !exec::configure_parallelism(config.provider.parallelism) {
                log::warn!("worker pool already initialized; --parallel ignored");
            }
            let outcome = run_pipeline(
                &config,
                Path::new("."),
                &artifact_dir,
                PhaseSelection::Only(Phase::Summarize),
            )?;
            report_outcome(&outcome);
        }
        Command::Cluster {
            artifact_dir,
            alpha,
            variant,
            levels,
            gamma_min,
            gamma_max,
            grid_points,
            restarts,
        } => {
            let c = &mut config.cluster;
            if let Some(alpha) = alpha {
                c.alpha = alpha;
            }
            if let Some(variant) = variant {
                c.variant = variant.into();
            }
            if let Some(levels) = levels {
                c.levels = levels.into();
            }
            if let Some(gamma_min) = gamma_min {
                c.gamma_min = gamma_min;
            }
            if let Some(gamma_max) = gamma_max {
                c.gamma_max = gamma_max;
            }
            if let Some(grid_points) = grid_points {
                c.grid_points = grid_points;
            }
            if let Some(restarts) = restarts {
                c.restarts = restarts;
            }
            let outcome = run_pipeline(
                &config,
                Path::new("."),
                &artifact_dir,
                PhaseSelection::Only(Phase::Cluster),
            )?;
            report_outcome(&outcome);
        }
        Command::Docgen { artifact_dir, provider, output } => {
            if let Some(provider) = provider {
                config.provider.name = provider;
            }
            let outcome = run_pipeline(
                &config,
                Path::new("."),
                &artifact_dir,
                PhaseSelection::Only(Phase::Docgen),
            )?;
            report_outcome(&outcome);
            if let Some(out) = output {
                if out != artifact_dir.join(DOCS_DIR) {
                    let features: FeaturesArtifact = artifact::read_json(
                        &artifact_dir.join(FEATURES_FILE),
                        artifact::FEATURES_SCHEMA,
                    )?;
                    let written = render_documentation(&features.tree, &out)
                        .with_context(|| format!("rendering into {}", out.display()))?;
                    println!("rendered {} documents into {}", written.len(), out.display());
                }
            }
        }
        Command::Pipeline { root, output } => {
            let outcome = run_pipeline(&config, &root, &output, PhaseSelection::All)?;
            report_outcome(&outcome);
        }
        Command::Eval { what } => {
            config.validate()?;
            match what {
                EvalCommand::Coverage(args) => eval_coverage(&config, &args)?,
                EvalCommand::Trace(args) => eval_trace(&config, &args)?,
                EvalCommand::Linkk(args) => eval_linkk(&config, &args)?,
            }
        }
        Command::Validate { artifact_dir } => {
            let report = validate_artifacts(&artifact_dir)?;
            for name in &report.checked {
                println!("{name}: ok");
            }
            println!("{} artifacts valid", report.checked.len());
        }
    }
    Ok(())
}

fn load_config(global: &GlobalArgs) -> anyhow::Result<PipelineConfig> {
    let mut config = match &global.config {
        Some(path) => PipelineConfig::load(path)
            .with_context(|| format!("loading config {}", path.display()))?,
        None => PipelineConfig::default(),
    };
    if let Some(seed) = global.seed {
        config.pipeline.seed = seed;
    }
    Ok(config)
}

/// Prints one status line per phase and relays phase warnings.
fn report_outcome(outcome: &PipelineOutcome) {
    for (phase, status) in &outcome.statuses {
        let word = match status {
            PhaseStatus::Completed => "completed",
            PhaseStatus::Cached => "cached",
            PhaseStatus::Failed => "failed",
        };
        println!("{phase}: {word}");
        if *status == PhaseStatus::Completed {
            if let Some(record) = outcome.manifest.phases.get(phase) {
                for warning in &record.warnings {
                    eprintln!("warning({phase}): {warning}");
                }
            }
        }
    }
}

// ── eval plumbing ───────────────────────────────────────────────────

/// Everything the eval commands read from the artifact directory.
struct EvalInputs {
    graph: GraphArtifact,
    features: FeaturesArtifact,
    trace_links: Vec<TraceLink>,
    gateway: Gateway,
}

fn load_eval_inputs(config: &PipelineConfig, dir: &Path) -> anyhow::Result<EvalInputs> {
    let graph: GraphArtifact = artifact::read_json(&dir.join(GRAPH_FILE), artifact::GRAPH_SCHEMA)
        .context("eval needs the analyze artifacts")?;
    let features: FeaturesArtifact =
        artifact::read_json(&dir.join(FEATURES_FILE), artifact::FEATURES_SCHEMA)
            .context("eval needs the docgen artifacts")?;
    let trace_links: Vec<TraceLink> =
        artifact::read_json(&dir.join(TRACE_LINKS_FILE), artifact::TRACE_LINKS_SCHEMA)
            .context("eval needs the docgen artifacts")?;
    let gateway = config
        .build_gateway(config.provider.cache.then(|| dir.join(CACHE_DIR)).as_deref())?;
    Ok(EvalInputs { graph, features, trace_links, gateway })
}

/// Builds the two primary judges from a `--judges` spec.
fn build_primaries<'a>(
    spec: &str,
    gateway: &'a Gateway,
) -> anyhow::Result<(Box<dyn Judge + 'a>, Box<dyn Judge + 'a>)> {
    if spec == "stub" {
        return Ok((
            Box::new(StubJudge::named("stub-a")),
            Box::new(StubJudge::named("stub-b")),
        ));
    }
    match spec.split(',').map(str::trim).collect::<Vec<_>>().as_slice() {
        [a, b] if !a.is_empty() && !b.is_empty() => Ok((
            Box::new(LlmJudge::new(gateway, *a)),
            Box::new(LlmJudge::new(gateway, *b)),
        )),
        _ => bail!("--judges takes \"stub\" or two comma-separated model names, got {spec:?}"),
    }
}

/// Builds the tie-breaking judge from a `--tiebreaker` spec.
fn build_tiebreaker<'a>(spec: &str, gateway: &'a Gateway) -> anyhow::Result<Box<dyn Judge + 'a>> {
    if spec == "stub" {
        return Ok(Box::new(StubJudge::named("stub-tiebreak")));
    }
    if spec.contains(',') || spec.is_empty() {
        bail!("--tiebreaker takes \"stub\" or one model name, got {spec:?}");
    }
    Ok(Box::new(LlmJudge::new(gateway, spec)))
}

fn embed_all(gateway: &Gateway, texts: &[String]) -> anyhow::Result<Vec<Vec<f64>>> {
    texts
        .iter()
        .map(|t| gateway.embed(t).map_err(|e| anyhow!("embedding {t:?}: {e}")))
        .collect()
}

/// Loads ground truth and reports any links naming unknown files or
/// methods as warnings.
fn load_ground_truth(
    path: &Path,
    inputs: &EvalInputs,
    warnings: &mut Vec<String>,
) -> anyhow::Result<GroundTruth> {
    let gt = GroundTruth::load(path)
        .with_context(|| format!("loading ground truth {}", path.display()))?;
    warnings.extend(gt.unresolved_against(&inputs.graph.model));
    Ok(gt)
}

fn finish_report(dir: &Path, report: &EvalReport) -> anyhow::Result<()> {
    report.validate().map_err(|e| anyhow!("inconsistent evaluation report: {e}"))?;
    artifact::write_json(&dir.join(EVAL_REPORT_FILE), EVAL_REPORT_SCHEMA, report)?;
    print!("{}", report.render_markdown());
    Ok(())
}

fn eval_coverage(config: &PipelineConfig, args: &EvalArgs) -> anyhow::Result<()> {
    let inputs = load_eval_inputs(config, &args.artifact_dir)?;
    let mut warnings = Vec::new();
    let gt = load_ground_truth(&args.ground_truth, &inputs, &mut warnings)?;
    let (judge_a, judge_b) = build_primaries(&args.judges, &inputs.gateway)?;
    let tiebreaker = build_tiebreaker(&args.tiebreaker, &inputs.gateway)?;

    let texts: Vec<String> = gt.features.iter().map(|f| f.text.clone()).collect();
    let gt_embeddings = embed_all(&inputs.gateway, &texts)?;
    let outcome = eval::judges::run_judging(
        &gt,
        &gt_embeddings,
        &inputs.features.features,
        (&*judge_a, &*judge_b),
        &*tiebreaker,
        config.eval.retrieval_k,
    )?;
    warnings.extend(outcome.warnings);

    let coverage = coverage_metrics(
        &outcome.relevance,
        &outcome.coverage,
        gt.n_features(),
        inputs.features.features.len(),
    )?;
    let report = EvalReport {
        coverage: Some(coverage),
        kappa: primary_judge_kappa(&outcome.relevance)?,
        relevance_judgments: outcome.relevance,
        coverage_judgments: outcome.coverage,
        warnings,
        ..EvalReport::default()
    };
    finish_report(&args.artifact_dir, &report)
}

fn eval_trace(config: &PipelineConfig, args: &EvalArgs) -> anyhow::Result<()> {
    let inputs = load_eval_inputs(config, &args.artifact_dir)?;
    let mut warnings = Vec::new();
    let gt = load_ground_truth(&args.ground_truth, &inputs, &mut warnings)?;
    let (judge_a, judge_b) = build_primaries(&args.judges, &inputs.gateway)?;
    let tiebreaker = build_tiebreaker(&args.tiebreaker, &inputs.gateway)?;

    // Stage I only: trace correctness needs the relevance map, not the
    // coverage verdicts.
    let texts: Vec<String> = gt.features.iter().map(|f| f.text.clone()).collect();
    let gt_embeddings = embed_all(&inputs.gateway, &texts)?;
    let text_of: BTreeMap<usize, String> = inputs
        .features
        .features
        .iter()
        .map(|f| (f.feature_id, f.judged_text()))
        .collect();
    let mut relevance: Vec<RelevanceJudgment> = Vec::new();
    for (gt_feature, embedding) in gt.features.iter().zip(&gt_embeddings) {
        let candidates =
            retrieve_candidates(embedding, &inputs.features.features, config.eval.retrieval_k);
        for (fid, _) in candidates {
            relevance.push(judge_relevance(
                &gt_feature.gt_id,
                &gt_feature.text,
                fid,
                &text_of[&fid],
                (&*judge_a, &*judge_b),
                &*tiebreaker,
            ));
        }
    }
    for j in &relevance {
        if !j.available {
            warnings.push(format!(
                "relevance judgment unavailable for ground truth {} vs feature {}; \
                 excluded from denominators",
                j.gt_id, j.candidate_feature_id
            ));
        }
    }

    let relevant_pairs: BTreeSet<(usize, String)> = relevance
        .iter()
        .filter(|j| j.available && j.final_relevant)
        .map(|j| (j.candidate_feature_id, j.gt_id.clone()))
        .collect();
    let generated: Vec<(usize, String)> = inputs
        .trace_links
        .iter()
        .flat_map(|link| {
            link.file_ids
                .iter()
                .map(|&fid| (link.feature_id, inputs.graph.model.files[fid].path.clone()))
                .collect::<Vec<_>>()
        })
        .collect();
    let manual: Vec<(String, String)> = gt.trace_links.iter().cloned().collect();
    let trace = trace_metrics(&generated, &manual, &relevant_pairs, config.eval.strictness)?;

    let report = EvalReport {
        trace: Some(trace),
        kappa: primary_judge_kappa(&relevance)?,
        relevance_judgments: relevance,
        warnings,
        ..EvalReport::default()
    };
    finish_report(&args.artifact_dir, &report)
}

fn eval_linkk(config: &PipelineConfig, args: &EvalArgs) -> anyhow::Result<()> {
    let inputs = load_eval_inputs(config, &args.artifact_dir)?;
    let mut warnings = Vec::new();
    // The ground truth is loaded for its link resolution warnings even
    // though linkk scores only against commit history.
    load_ground_truth(&args.ground_truth, &inputs, &mut warnings)?;
    let commits_path = args
        .commits
        .as_ref()
        .ok_or_else(|| anyhow!("eval linkk requires --commits <file>"))?;
    let commits = load_commits(commits_path)
        .with_context(|| format!("loading commits {}", commits_path.display()))?;
    let (resolved, resolve_warnings) = resolve_commits(&commits, &inputs.graph.model);
    warnings.extend(resolve_warnings);

    let messages: Vec<String> = resolved.iter().map(|c| c.message.clone()).collect();
    let embeddings = embed_all(&inputs.gateway, &messages)?;
    let ks = args.k.clone().unwrap_or_else(|| config.eval.k_list.clone());
    let link_rows = ks
        .iter()
        .map(|&k| {
            link_at_k(&resolved, &embeddings, &inputs.features.features, &inputs.trace_links, k)
        })
        .collect::<Result<Vec<_>, _>>()?;

    let report = EvalReport { link_at_k: link_rows, warnings, ..EvalReport::default() };
    finish_report(&args.artifact_dir, &report)
}
