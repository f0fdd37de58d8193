//! `scenecheck` command-line front end.
//!
//! Exit codes: 0 on success, 1 when an input fails validation, 2 on usage
//! errors. Failures print one `<Kind>: <message>` line on standard error.

use std::collections::BTreeMap;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use scenecheck::context::{partition_corpus, score_attributes, SelectionCriteria, PLACEHOLDER};
use scenecheck::corpus::contradiction::generate_contradiction;
use scenecheck::corpus::persist::{load_registry, read_json_value, save_registry, save_stats, write_json};
use scenecheck::corpus::synth::{synth_corpus, SyntheticConfig};
use scenecheck::corpus::{load_class_map, Corpus, Split};
use scenecheck::experiment::{evaluate, RunReport};
use scenecheck::scene::analyze;
use scenecheck::verifier::{contradiction_key, train_registry};
use scenecheck::{
    derive_seed, Aggregation, AnalysisConfig, ClassMap, ContextSelectionReport, CooccurrenceModel, Error,
    Hyperparams, LabelGrid, SceneAnalysis, StatsBuilder, TrainingConfig, VerifierRegistry,
};

const MANIFEST_SCHEMA_VERSION: u64 = 1;

#[derive(Parser)]
#[command(name = "scenecheck", version, about = "Semantic consistency checks for label maps")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic corpus.
    Synth(SynthArgs),
    /// Build co-occurrence statistics from the train split.
    BuildStats(BuildStatsArgs),
    /// Rank image attributes as context candidates.
    SelectContexts(SelectArgs),
    /// Write one removal contradiction per image of a split.
    GenContradictions(GenArgs),
    /// Train a verifier registry on the train split.
    Train(TrainArgs),
    /// Verify one label grid and print the verdict as JSON.
    Verify(VerifyArgs),
    /// Evaluate a registry on the val split.
    Evaluate(EvaluateArgs),
}

#[derive(Args)]
struct SynthArgs {
    /// Generator config; the built-in world when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, required_unless_present = "dump_config")]
    out: Option<PathBuf>,
    #[arg(long, required_unless_present = "dump_config")]
    seed: Option<u64>,
    #[arg(long)]
    images_per_context: Option<usize>,
    /// Print the effective config as JSON and exit.
    #[arg(long)]
    dump_config: bool,
}

#[derive(Args)]
struct AnalysisArgs {
    #[arg(long, default_value_t = scenecheck::DEFAULT_MIN_AREA)]
    min_area: usize,
    #[arg(long, default_value_t = scenecheck::relations::DEFAULT_K_DIST)]
    k_dist: usize,
}

impl AnalysisArgs {
    fn config(&self) -> AnalysisConfig {
        AnalysisConfig {
            min_area: self.min_area,
            k_dist: self.k_dist,
            ..AnalysisConfig::default()
        }
    }
}

#[derive(Args)]
struct BuildStatsArgs {
    #[arg(long)]
    corpus: PathBuf,
    /// Attribute to partition by, or `none`.
    #[arg(long, default_value = "none")]
    context: String,
    #[arg(long, default_value_t = scenecheck::stats::DEFAULT_ALPHA)]
    alpha: f64,
    #[command(flatten)]
    analysis: AnalysisArgs,
    /// Output directory.
    #[arg(short = 'o', long)]
    out: PathBuf,
}

#[derive(Args)]
struct SelectArgs {
    #[arg(long)]
    corpus: PathBuf,
    #[arg(long, default_value_t = scenecheck::context::DEFAULT_MIN_COVERAGE)]
    min_coverage: f64,
    #[arg(long, default_value_t = scenecheck::context::DEFAULT_MIN_BALANCE)]
    min_balance: f64,
    #[command(flatten)]
    analysis: AnalysisArgs,
    #[arg(short = 'o', long)]
    out: PathBuf,
}

#[derive(Clone, Copy, ValueEnum)]
enum SplitArg {
    Train,
    Val,
}

impl From<SplitArg> for Split {
    fn from(s: SplitArg) -> Split {
        match s {
            SplitArg::Train => Split::Train,
            SplitArg::Val => Split::Val,
        }
    }
}

#[derive(Args)]
struct GenArgs {
    #[arg(long)]
    corpus: PathBuf,
    #[arg(long, value_enum, default_value = "val")]
    split: SplitArg,
    #[arg(long)]
    seed: u64,
    #[arg(long, default_value_t = scenecheck::DEFAULT_MIN_AREA)]
    min_area: usize,
    /// Output directory.
    #[arg(short = 'o', long)]
    out: PathBuf,
}

#[derive(Clone, Copy, ValueEnum)]
enum AggregationArg {
    Majority,
    MeanThreshold,
}

#[derive(Args)]
struct TrainArgs {
    #[arg(long)]
    corpus: PathBuf,
    /// Attribute to partition by, or `none`.
    #[arg(long, default_value = "none")]
    context: String,
    #[arg(long)]
    seed: u64,
    #[arg(long, default_value_t = 0.01)]
    lr: f64,
    #[arg(long, default_value_t = 50)]
    epochs: usize,
    #[arg(long, default_value_t = 1e-3)]
    lambda: f64,
    #[arg(long, default_value_t = scenecheck::stats::DEFAULT_ALPHA)]
    alpha: f64,
    #[arg(long, default_value_t = scenecheck::verifier::DEFAULT_N_MIN)]
    n_min: usize,
    #[arg(long, value_enum, default_value = "majority")]
    aggregation: AggregationArg,
    #[command(flatten)]
    analysis: AnalysisArgs,
    /// Registry file; statistics go to a sibling `<stem>.stats/` directory.
    #[arg(short = 'o', long)]
    out: PathBuf,
}

#[derive(Args)]
struct VerifyArgs {
    #[arg(long)]
    registry: PathBuf,
    #[arg(long)]
    image: PathBuf,
    /// JSON attribute record, either `{"attr": "value"}` or an annotation entry.
    #[arg(long)]
    attributes: Option<PathBuf>,
    /// Class map used to parse the image; class ids from the registry when omitted.
    #[arg(long)]
    classes: Option<PathBuf>,
    /// Defaults to the image file stem.
    #[arg(long)]
    image_id: Option<String>,
}

#[derive(Args)]
struct EvaluateArgs {
    #[arg(long)]
    registry: PathBuf,
    #[arg(long)]
    corpus: PathBuf,
    #[arg(long)]
    seed: u64,
    /// Attribute used to group examples; the registry's context attribute by default.
    #[arg(long)]
    group_by: Option<String>,
    #[arg(short = 'o', long)]
    out: PathBuf,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(2) } else { ExitCode::SUCCESS };
        }
    };
    let result = match cli.command {
        Command::Synth(a) => cmd_synth(a),
        Command::BuildStats(a) => cmd_build_stats(a),
        Command::SelectContexts(a) => cmd_select_contexts(a),
        Command::GenContradictions(a) => cmd_gen_contradictions(a),
        Command::Train(a) => cmd_train(a),
        Command::Verify(a) => cmd_verify(a),
        Command::Evaluate(a) => cmd_evaluate(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let msg = e.to_string().replace('\n', " ");
            eprintln!("{}: {msg}", e.kind());
            ExitCode::from(1)
        }
    }
}

fn context_arg(s: &str) -> Option<&str> {
    (s != "none").then_some(s)
}

fn cmd_synth(a: SynthArgs) -> Result<(), Error> {
    let mut config = match &a.config {
        Some(p) => serde_json::from_value(read_json_value(p)?)
            .map_err(|e| Error::Format(format!("{}: {e}", p.display())))?,
        None => SyntheticConfig::default(),
    };
    if let Some(n) = a.images_per_context {
        config.images_per_context = n;
    }
    if let Some(seed) = a.seed {
        config.seed = seed;
    }
    if a.dump_config {
        println!("{}", serde_json::to_string_pretty(&config)?);
        return Ok(());
    }
    let out = a.out.expect("required by clap");
    let (corpus, _) = synth_corpus(&config, &out)?;
    println!(
        "wrote {} train and {} val images to {}",
        corpus.splits().train.len(),
        corpus.splits().val.len(),
        out.display()
    );
    Ok(())
}

fn load_train_scenes(corpus: &Corpus, cfg: &AnalysisConfig) -> Result<Vec<SceneAnalysis>, Error> {
    corpus
        .load_split(Split::Train)?
        .iter()
        .map(|g| analyze(g, cfg))
        .collect()
}

fn build_stats(scenes: &[&SceneAnalysis], classes: &[u32], cfg: &AnalysisConfig, alpha: f64) -> Result<CooccurrenceModel, Error> {
    let mut b = StatsBuilder::new(classes.iter().copied(), cfg.k_dist);
    for s in scenes {
        b.accumulate(&s.objects, &s.relations)?;
    }
    b.finalize(alpha)
}

fn file_label(s: &str) -> String {
    s.chars()
        .map(|c| if c.is_ascii_alphanumeric() || c == '-' || c == '_' { c } else { '_' })
        .collect()
}

fn cmd_build_stats(a: BuildStatsArgs) -> Result<(), Error> {
    let corpus = Corpus::load(&a.corpus)?;
    let cfg = a.analysis.config();
    let scenes = load_train_scenes(&corpus, &cfg)?;
    if scenes.is_empty() {
        return Err(Error::EmptyCorpus("training split is empty".into()));
    }
    let classes = corpus.class_map().ids();
    let all: Vec<&SceneAnalysis> = scenes.iter().collect();
    let path = a.out.join("global.json");
    save_stats(&path, &build_stats(&all, &classes, &cfg, a.alpha)?)?;
    println!("{}\t{} images", path.display(), all.len());

    if let Some(attr) = context_arg(&a.context) {
        let ids: Vec<String> = scenes.iter().map(|s| s.image_id.clone()).collect();
        let by_id: BTreeMap<&str, &SceneAnalysis> = scenes.iter().map(|s| (s.image_id.as_str(), s)).collect();
        for (value, members) in partition_corpus(&ids, corpus.attributes(), attr)? {
            if value == PLACEHOLDER {
                continue;
            }
            let subset: Vec<&SceneAnalysis> = members.iter().map(|m| by_id[m.as_str()]).collect();
            let path = a.out.join(format!("context-{}.json", file_label(&value)));
            save_stats(&path, &build_stats(&subset, &classes, &cfg, a.alpha)?)?;
            println!("{}\t{} images", path.display(), subset.len());
        }
    }
    Ok(())
}

fn cmd_select_contexts(a: SelectArgs) -> Result<(), Error> {
    let corpus = Corpus::load(&a.corpus)?;
    let cfg = a.analysis.config();
    let labels: BTreeMap<String, Vec<u32>> = load_train_scenes(&corpus, &cfg)?
        .into_iter()
        .map(|s| {
            let classes = s.classes();
            (s.image_id, classes)
        })
        .collect();
    let criteria = SelectionCriteria {
        min_coverage: a.min_coverage,
        min_balance: a.min_balance,
    };
    let report: ContextSelectionReport = score_attributes(corpus.attributes(), &labels, criteria)?;
    write_json(&a.out, &report)?;
    println!("{:<16} {:>10} {:>9} {:>8} eligible", "attribute", "MI (nats)", "coverage", "balance");
    for name in &report.ranking {
        let s = report
            .attributes
            .iter()
            .find(|s| &s.attribute == name)
            .expect("ranking lists scored attributes");
        println!(
            "{:<16} {:>10.6} {:>9.3} {:>8.3} {}",
            s.attribute, s.mutual_information, s.coverage, s.balance, s.eligible
        );
    }
    Ok(())
}

#[derive(Serialize)]
struct ManifestEntry {
    image_id: String,
    valid: String,
    invalid: String,
    removed_class: u32,
}

#[derive(Serialize)]
struct Manifest {
    schema_version: u64,
    seed: u64,
    split: Split,
    examples: Vec<ManifestEntry>,
    /// Images with fewer than two objects.
    skipped: Vec<String>,
}

fn cmd_gen_contradictions(a: GenArgs) -> Result<(), Error> {
    let corpus = Corpus::load(&a.corpus)?;
    let split = Split::from(a.split);
    let mut manifest = Manifest {
        schema_version: MANIFEST_SCHEMA_VERSION,
        seed: a.seed,
        split,
        examples: Vec::new(),
        skipped: Vec::new(),
    };
    for grid in corpus.load_split(split)? {
        let id = grid.image_id().to_string();
        let s = derive_seed(a.seed, &contradiction_key(&id));
        match generate_contradiction(&grid, a.min_area, s) {
            Ok((out, removed)) => {
                let rel = format!("images/{}.contradiction.lgrid", file_label(&id));
                let path = a.out.join(&rel);
                if let Some(dir) = path.parent() {
                    fs::create_dir_all(dir).map_err(|e| io_error(dir, e))?;
                }
                fs::write(&path, out.to_lgrid_string()).map_err(|e| io_error(&path, e))?;
                manifest.examples.push(ManifestEntry {
                    valid: corpus.image_path(&id).display().to_string(),
                    image_id: id,
                    invalid: rel,
                    removed_class: removed,
                });
            }
            Err(Error::NotEnoughObjects(_)) => manifest.skipped.push(id),
            Err(e) => return Err(e),
        }
    }
    write_json(&a.out.join("manifest.json"), &manifest)?;
    println!(
        "{} contradictions, {} skipped",
        manifest.examples.len(),
        manifest.skipped.len()
    );
    Ok(())
}

fn io_error(path: &Path, source: std::io::Error) -> Error {
    Error::Io {
        path: path.to_path_buf(),
        source,
    }
}

fn cmd_train(a: TrainArgs) -> Result<(), Error> {
    let corpus = Corpus::load(&a.corpus)?;
    let config = TrainingConfig {
        hyperparams: Hyperparams {
            learning_rate: a.lr,
            epochs: a.epochs,
            l2_lambda: a.lambda,
        },
        alpha: a.alpha,
        n_min: a.n_min,
        aggregation: match a.aggregation {
            AggregationArg::Majority => Aggregation::Majority,
            AggregationArg::MeanThreshold => Aggregation::MeanThreshold,
        },
        analysis: a.analysis.config(),
    };
    let train = corpus.load_split(Split::Train)?;
    let registry: VerifierRegistry =
        train_registry(&train, corpus.attributes(), context_arg(&a.context), &config, a.seed)?;
    save_registry(&a.out, &registry)?;
    println!("global\t{} images", registry.global.images);
    for (label, v) in &registry.contexts {
        println!("{label}\t{} images", v.images);
    }
    Ok(())
}

fn read_attributes(path: &Path) -> Result<BTreeMap<String, String>, Error> {
    let v = read_json_value(path)?;
    let record = v.get("attributes").cloned().unwrap_or(v);
    serde_json::from_value(record).map_err(|e| Error::Format(format!("{}: {e}", path.display())))
}

fn cmd_verify(a: VerifyArgs) -> Result<(), Error> {
    let registry: VerifierRegistry = load_registry(&a.registry)?;
    let class_map: ClassMap = match &a.classes {
        Some(p) => load_class_map(p)?,
        None => registry
            .global
            .stats
            .classes()
            .iter()
            .map(|&id| (id, id.to_string()))
            .collect(),
    };
    let image_id = a.image_id.clone().unwrap_or_else(|| {
        let name = a.image.file_name().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
        name.strip_suffix(".lgrid").unwrap_or(&name).to_string()
    });
    let text = fs::read_to_string(&a.image).map_err(|e| io_error(&a.image, e))?;
    let grid = LabelGrid::parse(&image_id, &text, Arc::new(class_map))?;
    let attributes = a.attributes.as_deref().map(read_attributes).transpose()?;
    let verdict = registry.verify(&grid, attributes.as_ref())?;
    // A closed pipe downstream is not an error of ours.
    let _ = writeln!(std::io::stdout().lock(), "{}", serde_json::to_string_pretty(&verdict)?);
    Ok(())
}

fn print_report(r: &RunReport, elapsed: f64) {
    println!("{:<12} {:>6} {:>8} {:>6} {:>9}", "context", "valid", "invalid", "total", "accuracy");
    for (name, m) in &r.contexts {
        println!(
            "{:<12} {:>6} {:>8} {:>6} {:>8.2}%",
            name,
            m.valid,
            m.invalid,
            m.total,
            100.0 * m.accuracy
        );
    }
    println!("{:<12} {:>31.2}%", "average", 100.0 * r.per_context_average_accuracy);
    let g = &r.global;
    println!(
        "{:<12} {:>6} {:>8} {:>6} {:>8.2}%",
        "global",
        g.valid,
        g.invalid,
        g.total,
        100.0 * g.accuracy
    );
    println!("improvement  {:+.2} pp", r.improvement_pp);
    println!("wall time    {elapsed:.3} s");
}

fn cmd_evaluate(a: EvaluateArgs) -> Result<(), Error> {
    let start = Instant::now();
    let registry: VerifierRegistry = load_registry(&a.registry)?;
    let corpus = Corpus::load(&a.corpus)?;
    let val = corpus.load_split(Split::Val)?;
    if val.is_empty() {
        return Err(Error::EmptyCorpus("val split is empty".into()));
    }
    let report = evaluate(&registry, &val, corpus.attributes(), a.group_by.as_deref(), a.seed)?;
    write_json(&a.out, &report)?;
    print_report(&report, start.elapsed().as_secs_f64());
    Ok(())
}
