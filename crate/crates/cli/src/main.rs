//! Pipeline subcommands over the re-forge corpus toolkit.
//!
//! Stages compose through files: each subcommand reads the artifacts an
//! earlier stage wrote and writes its own. Exit code 0 means success, 1 a
//! validation failure (bad flags, malformed content, violated contracts),
//! and 2 an I/O failure. Every command is deterministic given its flags and
//! seed; commands that sample require an explicit seed.

use std::collections::BTreeSet;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Deserialize;

use re_forge::corpus::{
    segment_sentences, Corpus, CprGroup, Entity, EntityRole, FineRelation, Split,
};
use re_forge::detrand::{DetRng, Stream};
use re_forge::eval::{self, ScheduleParams};
use re_forge::formats::{self, FormatError};
use re_forge::gcn::{self, VgcnParams};
use re_forge::graph;
use re_forge::matrix;
use re_forge::merge::{self, ConflictPolicy};
use re_forge::prep::{self, MaskMode, MaskStrategy, PrepConfig};
use re_forge::synth;
use re_forge::text::{self, PunctuationPolicy, WordPieceVocab};

/// Process-level failure: a message plus the exit class it belongs to.
#[derive(Debug)]
struct CliError {
    code: i32,
    message: String,
}

impl CliError {
    fn validation(message: impl Into<String>) -> Self {
        CliError { code: 1, message: message.into() }
    }

    fn io(message: impl Into<String>) -> Self {
        CliError { code: 2, message: message.into() }
    }
}

type CliResult<T> = Result<T, CliError>;

impl From<FormatError> for CliError {
    fn from(err: FormatError) -> Self {
        match err {
            FormatError::Io { .. } => CliError::io(err.to_string()),
            other => CliError::validation(other.to_string()),
        }
    }
}

macro_rules! validation_error {
    ($($ty:ty),+ $(,)?) => {$(
        impl From<$ty> for CliError {
            fn from(err: $ty) -> Self {
                CliError::validation(err.to_string())
            }
        }
    )+};
}

validation_error!(
    re_forge::corpus::CorpusError,
    re_forge::eval::EvalError,
    re_forge::gcn::GcnError,
    re_forge::graph::GraphError,
    re_forge::matrix::MatrixError,
    re_forge::merge::MergeError,
    re_forge::prep::PrepError,
    re_forge::text::TextError,
    serde_json::Error,
);

fn read_text(path: &Path) -> CliResult<String> {
    std::fs::read_to_string(path).map_err(|e| CliError::io(format!("{}: {e}", path.display())))
}

fn write_text(path: &Path, content: &str) -> CliResult<()> {
    if let Some(parent) = path.parent() {
        if !parent.as_os_str().is_empty() {
            std::fs::create_dir_all(parent)
                .map_err(|e| CliError::io(format!("{}: {e}", parent.display())))?;
        }
    }
    std::fs::write(path, content).map_err(|e| CliError::io(format!("{}: {e}", path.display())))
}

/// Optional JSON config; any flag overrides the matching field. Unknown
/// keys are rejected, as are unknown keys in the nested sections.
#[derive(Debug, Default, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
struct PipelineConfig {
    /// Primary input corpus (`--input`, or `--a` for merge).
    input: Option<PathBuf>,
    /// Second input corpus (`--b` for merge).
    input_b: Option<PathBuf>,
    /// Primary output path (`--out`).
    output: Option<PathBuf>,
    /// WordPiece vocabulary file.
    vocab: Option<PathBuf>,
    /// Stopword list, one word per line.
    stopwords: Option<PathBuf>,
    /// Conflict resolution table for merge.
    resolutions: Option<PathBuf>,
    /// Instance generation parameters.
    prep: Option<PrepConfig>,
    /// Learning-rate schedule parameters.
    schedule: Option<ScheduleParams>,
    /// Co-occurrence window size.
    window_size: Option<usize>,
    /// Keep edge punctuation during preprocessing.
    keep_punctuation: Option<bool>,
    /// Output layout for convert.
    format: Option<FormatKind>,
}

impl PipelineConfig {
    fn load(path: Option<&Path>) -> CliResult<Self> {
        match path {
            Some(path) => {
                let content = read_text(path)?;
                serde_json::from_str(&content).map_err(|e| {
                    CliError::validation(format!("{}: bad config: {e}", path.display()))
                })
            }
            None => Ok(PipelineConfig::default()),
        }
    }

    fn prep_or_default(&self) -> PrepConfig {
        self.prep.clone().unwrap_or_default()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Deserialize)]
#[serde(rename_all = "kebab-case")]
enum FormatKind {
    /// Directory of `.txt`/`.ann` standoff pairs.
    Brat,
    /// Directory holding `abstracts.tsv`, `entities.tsv`, `relations.tsv`.
    Tsv,
    /// Single JSON corpus file.
    Json,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum SplitArg {
    Train,
    Validation,
}

impl From<SplitArg> for Split {
    fn from(arg: SplitArg) -> Split {
        match arg {
            SplitArg::Train => Split::Train,
            SplitArg::Validation => Split::Validation,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum PolicyArg {
    /// Refuse to merge when any pair is labeled differently.
    Fail,
    /// Keep the first corpus's labels for conflicted pairs.
    PreferA,
    /// Keep the second corpus's labels for conflicted pairs.
    PreferB,
    /// Remove conflicted pairs from the merged corpus.
    Drop,
    /// Look conflicts up in the table given by --resolutions.
    ResolutionFile,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum MaskModeArg {
    /// Replace the pair under classification with the type tokens.
    MaskTargets,
    /// Replace every other entity in the sentence instead.
    MaskNonTargets,
    /// Leave the sentence untouched.
    NoMask,
}

impl From<MaskModeArg> for MaskMode {
    fn from(arg: MaskModeArg) -> MaskMode {
        match arg {
            MaskModeArg::MaskTargets => MaskMode::MaskTargets,
            MaskModeArg::MaskNonTargets => MaskMode::MaskNonTargets,
            MaskModeArg::NoMask => MaskMode::NoMask,
        }
    }
}

fn parse_group(s: &str) -> Result<CprGroup, String> {
    s.parse()
}

#[derive(Parser)]
#[command(
    name = "re-forge",
    version,
    about = "Corpus engineering for chemical-gene relation extraction",
    propagate_version = true
)]
struct Cli {
    /// JSON pipeline config; explicit flags override config values
    #[arg(long, global = true, value_name = "FILE")]
    config: Option<PathBuf>,
    /// Worker threads for parallel stages, 0 = one per core
    /// [default: the RE_FORGE_THREADS environment variable, else 0]
    #[arg(long, global = true, value_name = "N")]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Convert a corpus between brat, tsv, and json layouts
    Convert(ConvertArgs),
    /// Merge two corpora of the same split under a conflict policy
    Merge(MergeArgs),
    /// Count documents, entities, and relations per group
    Stats(StatsArgs),
    /// Print the fine-label to group mapping
    MapCpr(MapCprArgs),
    /// Generate labeled chemical-gene sentence instances from a corpus
    Instances(InstancesArgs),
    /// Subsample negative instances at a fixed ratio
    Downsample(DownsampleArgs),
    /// Split an instance file into stratified train and validation sets
    Split(SplitArgs),
    /// Compute inverse-frequency class weights for an instance file
    Weights(WeightsArgs),
    /// Mask one chemical-gene pair inside its sentence
    Mask(MaskArgs),
    /// Build the token co-occurrence graph and serialize it
    Graph(GraphArgs),
    /// Run a seeded forward pass and gradient self-check on a graph
    GcnDemo(GcnDemoArgs),
    /// Score predictions against gold labels
    Eval(EvalArgs),
    /// Print the learning-rate schedule
    Schedule(ScheduleArgs),
}

#[derive(Args)]
struct ConvertArgs {
    /// Corpus to read: brat/tsv directory or json file [config: input]
    #[arg(long, value_name = "PATH")]
    input: Option<PathBuf>,
    /// Input layout [default: detected from --input]
    #[arg(long, value_enum)]
    from: Option<FormatKind>,
    /// Output layout [config: format] [default: json when --out ends in
    /// .json, else brat]
    #[arg(long, value_enum)]
    to: Option<FormatKind>,
    /// Output path: directory for brat/tsv, file for json [config: output]
    #[arg(long, value_name = "PATH")]
    out: Option<PathBuf>,
    /// Split recorded while reading brat/tsv (json files carry their own)
    #[arg(long, value_enum, default_value_t = SplitArg::Train)]
    split: SplitArg,
}

#[derive(Args)]
struct MergeArgs {
    /// First corpus [config: input]
    #[arg(long, value_name = "PATH")]
    a: Option<PathBuf>,
    /// Second corpus [config: input_b]
    #[arg(long, value_name = "PATH")]
    b: Option<PathBuf>,
    /// Merged corpus output: .json file or brat directory [config: output]
    #[arg(long, value_name = "PATH")]
    out: Option<PathBuf>,
    /// Split recorded while reading brat/tsv inputs
    #[arg(long, value_enum, default_value_t = SplitArg::Train)]
    split: SplitArg,
    /// How label disagreements between the sources are settled
    #[arg(long, value_enum, default_value_t = PolicyArg::Fail)]
    policy: PolicyArg,
    /// Resolution table settling conflicts by hand; implies
    /// --policy resolution-file [config: resolutions]
    #[arg(long, value_name = "FILE")]
    resolutions: Option<PathBuf>,
    /// Write the merge report here instead of stdout
    #[arg(long, value_name = "FILE")]
    report: Option<PathBuf>,
    /// On a failed merge, write a resolution-table starting point here
    #[arg(long, value_name = "FILE")]
    template: Option<PathBuf>,
}

#[derive(Args)]
struct StatsArgs {
    /// Corpus to count [config: input]
    #[arg(value_name = "PATH")]
    input: Option<PathBuf>,
    /// Split recorded while reading brat/tsv
    #[arg(long, value_enum, default_value_t = SplitArg::Train)]
    split: SplitArg,
    /// Emit JSON instead of the text table
    #[arg(long)]
    json: bool,
}

#[derive(Args)]
struct MapCprArgs {
    /// Fine relation labels to map; with none, the full table is printed
    #[arg(value_name = "LABEL")]
    labels: Vec<String>,
}

#[derive(Args)]
struct InstancesArgs {
    /// Corpus to read [config: input]
    #[arg(long, value_name = "PATH")]
    input: Option<PathBuf>,
    /// Instance TSV output [config: output]
    #[arg(long, value_name = "FILE")]
    out: Option<PathBuf>,
    /// Split recorded while reading brat/tsv
    #[arg(long, value_enum, default_value_t = SplitArg::Train)]
    split: SplitArg,
    /// How entity mentions are rewritten [config: prep.masking.mode]
    /// [default: mask-targets]
    #[arg(long, value_enum)]
    mask_mode: Option<MaskModeArg>,
    /// Replacement token for chemical mentions [default: @CHEMICAL$]
    #[arg(long, value_name = "TOKEN")]
    chem_token: Option<String>,
    /// Replacement token for gene mentions [default: @GENE$]
    #[arg(long, value_name = "TOKEN")]
    gene_token: Option<String>,
    /// Groups removed after generation, repeatable
    /// [config: prep.excluded_groups] [default: CPR:7 CPR:8]
    #[arg(long, value_name = "GROUP", value_parser = parse_group)]
    exclude: Vec<CprGroup>,
    /// Keep every group, clearing the default exclusions
    #[arg(long, conflicts_with = "exclude")]
    keep_all_groups: bool,
    /// Write the cross-sentence relation report here as JSON
    #[arg(long, value_name = "FILE")]
    report: Option<PathBuf>,
}

#[derive(Args)]
struct DownsampleArgs {
    /// Instance TSV to read [config: input]
    #[arg(long, value_name = "FILE")]
    input: Option<PathBuf>,
    /// Downsampled instance TSV output [config: output]
    #[arg(long, value_name = "FILE")]
    out: Option<PathBuf>,
    /// Fraction of negatives kept [config: prep.downsample_ratio]
    /// [default: 0.6]
    #[arg(long, value_name = "RATIO")]
    ratio: Option<f64>,
    /// Sampling seed; required here or as prep.seed in the config
    #[arg(long, value_name = "N")]
    seed: Option<u64>,
}

#[derive(Args)]
struct SplitArgs {
    /// Instance TSV to read [config: input]
    #[arg(long, value_name = "FILE")]
    input: Option<PathBuf>,
    /// Training-split instance TSV output
    #[arg(long, value_name = "FILE")]
    train_out: PathBuf,
    /// Validation-split instance TSV output
    #[arg(long, value_name = "FILE")]
    val_out: PathBuf,
    /// Fraction of each class sent to train [config: prep.split_ratio]
    /// [default: 0.8]
    #[arg(long, value_name = "RATIO")]
    ratio: Option<f64>,
    /// Sampling seed; required here or as prep.seed in the config
    #[arg(long, value_name = "N")]
    seed: Option<u64>,
}

#[derive(Args)]
struct WeightsArgs {
    /// Instance TSV to read [config: input]
    #[arg(long, value_name = "FILE")]
    input: Option<PathBuf>,
    /// Emit JSON instead of group TAB weight lines
    #[arg(long)]
    json: bool,
}

#[derive(Args)]
struct MaskArgs {
    /// Corpus to read [config: input]
    #[arg(long, value_name = "PATH")]
    input: Option<PathBuf>,
    /// Split recorded while reading brat/tsv
    #[arg(long, value_enum, default_value_t = SplitArg::Train)]
    split: SplitArg,
    /// Document id holding the pair
    #[arg(long, value_name = "ID")]
    doc: String,
    /// Chemical entity id, e.g. T1
    #[arg(long, value_name = "ID")]
    chem: String,
    /// Gene entity id, e.g. T2
    #[arg(long, value_name = "ID")]
    gene: String,
    /// How entity mentions are rewritten
    #[arg(long, value_enum, default_value_t = MaskModeArg::MaskTargets)]
    mode: MaskModeArg,
    /// Replacement token for chemical mentions
    #[arg(long, value_name = "TOKEN", default_value = "@CHEMICAL$")]
    chem_token: String,
    /// Replacement token for gene mentions
    #[arg(long, value_name = "TOKEN", default_value = "@GENE$")]
    gene_token: String,
}

#[derive(Args)]
struct GraphArgs {
    /// Corpus to tokenize [config: input]
    #[arg(long, value_name = "PATH", conflicts_with = "tokens")]
    input: Option<PathBuf>,
    /// Pre-tokenized file instead of a corpus: one document per line,
    /// whitespace-separated tokens taken verbatim
    #[arg(long, value_name = "FILE")]
    tokens: Option<PathBuf>,
    /// Split recorded while reading brat/tsv
    #[arg(long, value_enum, default_value_t = SplitArg::Train)]
    split: SplitArg,
    /// WordPiece vocabulary; without it preprocessed words are kept whole
    /// [config: vocab]
    #[arg(long, value_name = "FILE")]
    vocab: Option<PathBuf>,
    /// Stopword list, one word per line [config: stopwords] [default: none]
    #[arg(long, value_name = "FILE")]
    stopwords: Option<PathBuf>,
    /// Keep edge punctuation during preprocessing
    /// [config: keep_punctuation]
    #[arg(long)]
    keep_punctuation: bool,
    /// Co-occurrence window size in tokens [config: window_size]
    /// [default: 20]
    #[arg(long, value_name = "N")]
    window: Option<usize>,
    /// Graph output file [config: output]
    #[arg(long, value_name = "FILE")]
    out: Option<PathBuf>,
    /// Also write the node vocabulary here
    #[arg(long, value_name = "FILE")]
    vocab_out: Option<PathBuf>,
}

#[derive(Args)]
struct GcnDemoArgs {
    /// Serialized graph to run on
    #[arg(long, value_name = "FILE")]
    graph: PathBuf,
    /// Seed for the generated features, weights, and upstream gradient
    #[arg(long, value_name = "N")]
    seed: u64,
    /// Feature rows (sentences) to generate
    #[arg(long, value_name = "N", default_value_t = 3)]
    rows: usize,
    /// Hidden layer width
    #[arg(long, value_name = "N", default_value_t = 4)]
    hidden: usize,
    /// Output classes
    #[arg(long, value_name = "N", default_value_t = 2)]
    classes: usize,
    /// Write the forward-pass output matrix here
    #[arg(long, value_name = "FILE")]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct EvalArgs {
    /// Gold labels: instance_id TAB label
    #[arg(long, value_name = "FILE", requires = "pred", conflicts_with = "combined")]
    gold: Option<PathBuf>,
    /// Predictions: instance_id TAB label, same ids as --gold
    #[arg(long, value_name = "FILE", requires = "gold", conflicts_with = "combined")]
    pred: Option<PathBuf>,
    /// Joined file: instance_id TAB gold TAB pred
    #[arg(long, value_name = "FILE")]
    combined: Option<PathBuf>,
    /// Emit JSON to stdout instead of the text table
    #[arg(long)]
    json: bool,
    /// Also write the JSON report here
    #[arg(long, value_name = "FILE")]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct ScheduleArgs {
    /// Peak scale of the schedule [config: schedule.lr_factor]
    /// [default: 0.0005]
    #[arg(long, value_name = "X")]
    lr_factor: Option<f64>,
    /// Step count of the linear ramp [config: schedule.warm_up]
    /// [default: 1000]
    #[arg(long, value_name = "N")]
    warm_up: Option<u64>,
    /// Steps to print, comma separated
    #[arg(long, value_name = "STEPS", value_delimiter = ',', conflicts_with = "until")]
    steps: Option<Vec<u64>>,
    /// Print every step from 1 through N
    #[arg(long, value_name = "N")]
    until: Option<u64>,
}

fn main() {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(err) => {
            // --help/--version land here too; those exit 0 via stdout.
            let code = if err.use_stderr() { 1 } else { 0 };
            let _ = err.print();
            std::process::exit(code);
        }
    };
    match run(cli) {
        Ok(()) => {}
        Err(err) => {
            eprintln!("error: {}", err.message);
            std::process::exit(err.code);
        }
    }
}

fn run(cli: Cli) -> CliResult<()> {
    init_threads(cli.threads)?;
    let config = PipelineConfig::load(cli.config.as_deref())?;
    match &cli.command {
        Command::Convert(args) => cmd_convert(args, &config),
        Command::Merge(args) => cmd_merge(args, &config),
        Command::Stats(args) => cmd_stats(args, &config),
        Command::MapCpr(args) => cmd_map_cpr(args),
        Command::Instances(args) => cmd_instances(args, &config),
        Command::Downsample(args) => cmd_downsample(args, &config),
        Command::Split(args) => cmd_split(args, &config),
        Command::Weights(args) => cmd_weights(args, &config),
        Command::Mask(args) => cmd_mask(args, &config),
        Command::Graph(args) => cmd_graph(args, &config),
        Command::GcnDemo(args) => cmd_gcn_demo(args),
        Command::Eval(args) => cmd_eval(args),
        Command::Schedule(args) => cmd_schedule(args, &config),
    }
}

/// Configures the rayon pool from the flag, falling back to the
/// RE_FORGE_THREADS environment variable. 0 or unset means one per core.
fn init_threads(flag: Option<usize>) -> CliResult<()> {
    let threads = match flag {
        Some(n) => Some(n),
        None => match std::env::var("RE_FORGE_THREADS") {
            Ok(raw) => Some(raw.parse().map_err(|_| {
                CliError::validation(format!("RE_FORGE_THREADS must be an integer, got `{raw}`"))
            })?),
            Err(_) => None,
        },
    };
    if let Some(n) = threads {
        if n > 0 {
            rayon::ThreadPoolBuilder::new()
                .num_threads(n)
                .build_global()
                .map_err(|e| CliError::validation(format!("thread pool: {e}")))?;
        }
    }
    Ok(())
}

fn require(path: Option<PathBuf>, flag: &str) -> CliResult<PathBuf> {
    path.ok_or_else(|| CliError::validation(format!("missing {flag} (flag or config)")))
}

fn detect_format(path: &Path) -> CliResult<FormatKind> {
    if !path.exists() {
        return Err(CliError::io(format!("{}: no such path", path.display())));
    }
    if path.is_dir() {
        if path.join(formats::TSV_ABSTRACTS).is_file() {
            return Ok(FormatKind::Tsv);
        }
        let has_txt = std::fs::read_dir(path)
            .map_err(|e| CliError::io(format!("{}: {e}", path.display())))?
            .filter_map(Result::ok)
            .any(|entry| entry.path().extension().is_some_and(|ext| ext == "txt"));
        if has_txt {
            return Ok(FormatKind::Brat);
        }
        return Err(CliError::validation(format!(
            "{}: cannot detect the corpus layout (no {} and no .txt files); pass --from",
            path.display(),
            formats::TSV_ABSTRACTS
        )));
    }
    if path.extension().is_some_and(|ext| ext == "json") {
        return Ok(FormatKind::Json);
    }
    Err(CliError::validation(format!(
        "{}: cannot detect the corpus layout (not a directory or .json file); pass --from",
        path.display()
    )))
}

fn read_corpus(path: &Path, kind: FormatKind, split: Split) -> CliResult<Corpus> {
    let corpus = match kind {
        FormatKind::Brat => formats::read_brat_dir(path, split)?,
        FormatKind::Tsv => formats::read_tsv_dir(path, split)?,
        FormatKind::Json => formats::read_json_file(path)?,
    };
    Ok(corpus)
}

fn read_corpus_auto(path: &Path, split: Split) -> CliResult<Corpus> {
    read_corpus(path, detect_format(path)?, split)
}

/// Output layout when none was requested: a `.json` path is a JSON file,
/// anything else a brat directory.
fn infer_output_kind(path: &Path) -> FormatKind {
    if path.extension().is_some_and(|ext| ext == "json") {
        FormatKind::Json
    } else {
        FormatKind::Brat
    }
}

fn write_corpus(corpus: &Corpus, path: &Path, kind: FormatKind) -> CliResult<()> {
    match kind {
        FormatKind::Brat => formats::write_brat_dir(corpus, path)?,
        FormatKind::Tsv => formats::write_tsv_dir(corpus, path)?,
        FormatKind::Json => formats::write_json_file(corpus, path)?,
    }
    Ok(())
}

fn cmd_convert(args: &ConvertArgs, config: &PipelineConfig) -> CliResult<()> {
    let input = require(args.input.clone().or_else(|| config.input.clone()), "--input")?;
    let out = require(args.out.clone().or_else(|| config.output.clone()), "--out")?;
    let from = match args.from {
        Some(kind) => kind,
        None => detect_format(&input)?,
    };
    let to = args.to.or(config.format).unwrap_or_else(|| infer_output_kind(&out));
    let corpus = read_corpus(&input, from, args.split.into())?;
    write_corpus(&corpus, &out, to)?;
    println!("wrote {} document(s) to {}", corpus.docs.len(), out.display());
    Ok(())
}

fn cmd_merge(args: &MergeArgs, config: &PipelineConfig) -> CliResult<()> {
    let a_path = require(args.a.clone().or_else(|| config.input.clone()), "--a")?;
    let b_path = require(args.b.clone().or_else(|| config.input_b.clone()), "--b")?;
    let out = require(args.out.clone().or_else(|| config.output.clone()), "--out")?;
    let split: Split = args.split.into();
    let a = read_corpus_auto(&a_path, split)?;
    let b = read_corpus_auto(&b_path, split)?;

    let resolutions = args.resolutions.clone().or_else(|| config.resolutions.clone());
    let policy = match (args.policy, resolutions) {
        // Naming a resolution table is the whole decision; forcing a
        // second flag alongside it would leave the table silently unused
        // under the default policy.
        (PolicyArg::Fail | PolicyArg::ResolutionFile, Some(res)) => {
            ConflictPolicy::ResolutionFile(merge::parse_resolution_file(&read_text(&res)?)?)
        }
        (PolicyArg::ResolutionFile, None) => {
            require(None, "--resolutions")?;
            unreachable!("require rejects None")
        }
        (PolicyArg::Fail, None) => ConflictPolicy::Fail,
        (PolicyArg::PreferA, _) => ConflictPolicy::PreferA,
        (PolicyArg::PreferB, _) => ConflictPolicy::PreferB,
        (PolicyArg::Drop, _) => ConflictPolicy::Drop,
    };

    match merge::merge_corpora(&a, &b, &policy) {
        Ok((merged, report)) => {
            write_corpus(&merged, &out, infer_output_kind(&out))?;
            let json = format!("{}\n", serde_json::to_string_pretty(&report)?);
            match &args.report {
                Some(path) => write_text(path, &json)?,
                None => print!("{json}"),
            }
            Ok(())
        }
        Err(merge::MergeError::UnresolvedConflict { conflicts, first }) => {
            if let Some(path) = &args.template {
                write_text(path, &merge::emit_resolution_template(&conflicts))?;
                eprintln!("wrote resolution template to {}", path.display());
            }
            Err(CliError::validation(format!(
                "{} unresolved relation conflict(s); first: {first}",
                conflicts.len()
            )))
        }
        Err(other) => Err(other.into()),
    }
}

fn cmd_stats(args: &StatsArgs, config: &PipelineConfig) -> CliResult<()> {
    let input = require(args.input.clone().or_else(|| config.input.clone()), "an input path")?;
    let corpus = read_corpus_auto(&input, args.split.into())?;
    let stats = merge::corpus_stats(&corpus);
    if args.json {
        println!("{}", serde_json::to_string_pretty(&stats)?);
        return Ok(());
    }
    println!("documents {}", stats.documents);
    println!("entities  {}", stats.entities);
    println!("relations {}", stats.relations);
    for group in CprGroup::ALL {
        println!("{:<9} {}", group.as_str(), stats.per_group.get(group).copied().unwrap_or(0));
    }
    Ok(())
}

fn cmd_map_cpr(args: &MapCprArgs) -> CliResult<()> {
    if args.labels.is_empty() {
        for fine in FineRelation::ALL {
            println!("{fine}\t{}", prep::map_to_cpr(*fine));
        }
        return Ok(());
    }
    for raw in &args.labels {
        let fine: FineRelation = raw.parse().map_err(CliError::validation)?;
        println!("{fine}\t{}", prep::map_to_cpr(fine));
    }
    Ok(())
}

fn cmd_instances(args: &InstancesArgs, config: &PipelineConfig) -> CliResult<()> {
    let input = require(args.input.clone().or_else(|| config.input.clone()), "--input")?;
    let out = require(args.out.clone().or_else(|| config.output.clone()), "--out")?;
    let corpus = read_corpus_auto(&input, args.split.into())?;

    let mut cfg = config.prep_or_default();
    if let Some(mode) = args.mask_mode {
        cfg.masking.mode = mode.into();
    }
    if let Some(token) = &args.chem_token {
        cfg.masking.chemical_token = token.clone();
    }
    if let Some(token) = &args.gene_token {
        cfg.masking.gene_token = token.clone();
    }
    if args.keep_all_groups {
        cfg.excluded_groups.clear();
    } else if !args.exclude.is_empty() {
        cfg.excluded_groups = args.exclude.iter().copied().collect();
    }

    let (instances, cross) = prep::generate_instances(&corpus, &cfg)?;
    write_text(&out, &prep::emit_instances_tsv(&instances))?;
    if let Some(path) = &args.report {
        write_text(path, &format!("{}\n", serde_json::to_string_pretty(&cross)?))?;
    }
    let negatives = instances.iter().filter(|inst| inst.is_synthetic_negative).count();
    println!(
        "instances {} positives {} negatives {} cross_sentence {}",
        instances.len(),
        instances.len() - negatives,
        negatives,
        cross.entries.len()
    );
    Ok(())
}

/// A seed must be explicit: from the flag, or from a prep section the
/// config file actually contains.
fn resolve_seed(flag: Option<u64>, config: &PipelineConfig) -> CliResult<u64> {
    flag.or_else(|| config.prep.as_ref().map(|p| p.seed)).ok_or_else(|| {
        CliError::validation("a seed is required: pass --seed or set prep.seed in the config")
    })
}

fn cmd_downsample(args: &DownsampleArgs, config: &PipelineConfig) -> CliResult<()> {
    let input = require(args.input.clone().or_else(|| config.input.clone()), "--input")?;
    let out = require(args.out.clone().or_else(|| config.output.clone()), "--out")?;
    let seed = resolve_seed(args.seed, config)?;
    let ratio = args
        .ratio
        .or_else(|| config.prep.as_ref().map(|p| p.downsample_ratio))
        .unwrap_or_else(|| PrepConfig::default().downsample_ratio);
    let instances = prep::parse_instances_tsv(&read_text(&input)?)?;
    let kept = prep::downsample_negatives(&instances, ratio, seed)?;
    write_text(&out, &prep::emit_instances_tsv(&kept))?;
    println!("kept {} of {} instance(s)", kept.len(), instances.len());
    Ok(())
}

fn cmd_split(args: &SplitArgs, config: &PipelineConfig) -> CliResult<()> {
    let input = require(args.input.clone().or_else(|| config.input.clone()), "--input")?;
    let seed = resolve_seed(args.seed, config)?;
    let ratio = args
        .ratio
        .or_else(|| config.prep.as_ref().map(|p| p.split_ratio))
        .unwrap_or_else(|| PrepConfig::default().split_ratio);
    let instances = prep::parse_instances_tsv(&read_text(&input)?)?;
    let (train, val) = prep::stratified_split(&instances, ratio, seed)?;
    write_text(&args.train_out, &prep::emit_instances_tsv(&train))?;
    write_text(&args.val_out, &prep::emit_instances_tsv(&val))?;
    println!("train {} validation {}", train.len(), val.len());
    Ok(())
}

fn cmd_weights(args: &WeightsArgs, config: &PipelineConfig) -> CliResult<()> {
    let input = require(args.input.clone().or_else(|| config.input.clone()), "--input")?;
    let instances = prep::parse_instances_tsv(&read_text(&input)?)?;
    let weights = prep::class_weights(&instances)?;
    if args.json {
        println!("{}", serde_json::to_string_pretty(&weights)?);
        return Ok(());
    }
    for (group, weight) in &weights {
        println!("{group}\t{weight:.16e}");
    }
    Ok(())
}

fn cmd_mask(args: &MaskArgs, config: &PipelineConfig) -> CliResult<()> {
    let input = require(args.input.clone().or_else(|| config.input.clone()), "--input")?;
    let corpus = read_corpus_auto(&input, args.split.into())?;
    let doc = corpus
        .docs
        .get(&args.doc)
        .ok_or_else(|| CliError::validation(format!("no document `{}`", args.doc)))?;
    let find = |id: &str| -> CliResult<&Entity> {
        doc.entities
            .iter()
            .find(|e| e.id == id)
            .ok_or_else(|| CliError::validation(format!("{}: no entity `{id}`", args.doc)))
    };
    let chem = find(&args.chem)?;
    let gene = find(&args.gene)?;
    for (entity, role, flag) in
        [(chem, EntityRole::Chemical, "--chem"), (gene, EntityRole::Gene, "--gene")]
    {
        if entity.etype.role() != role {
            return Err(CliError::validation(format!(
                "{flag} {}: expected a {role:?} mention, found {}",
                entity.id, entity.etype
            )));
        }
    }
    let sentences = segment_sentences(doc);
    let sentence = sentences
        .iter()
        .find(|s| chem.span.within(&s.span) && gene.span.within(&s.span))
        .ok_or_else(|| {
            CliError::validation(format!(
                "{}: {} and {} do not share a sentence",
                args.doc, chem.id, gene.id
            ))
        })?;
    let others: Vec<&Entity> = doc
        .entities
        .iter()
        .filter(|e| e.id != chem.id && e.id != gene.id && e.span.within(&sentence.span))
        .collect();
    let strategy = MaskStrategy {
        mode: args.mode.into(),
        chemical_token: args.chem_token.clone(),
        gene_token: args.gene_token.clone(),
    };
    println!("{}", prep::mask_entities(sentence, chem, gene, &others, &strategy)?);
    Ok(())
}

fn cmd_graph(args: &GraphArgs, config: &PipelineConfig) -> CliResult<()> {
    let out = require(args.out.clone().or_else(|| config.output.clone()), "--out")?;
    let window = args.window.or(config.window_size).unwrap_or(20);

    let docs: Vec<Vec<String>> = if let Some(tokens_path) = &args.tokens {
        read_text(tokens_path)?
            .lines()
            .filter(|line| !line.trim().is_empty())
            .map(|line| line.split_whitespace().map(str::to_string).collect())
            .collect()
    } else {
        let input =
            require(args.input.clone().or_else(|| config.input.clone()), "--input or --tokens")?;
        let corpus = read_corpus_auto(&input, args.split.into())?;
        let stopwords = match args.stopwords.clone().or_else(|| config.stopwords.clone()) {
            Some(path) => text::parse_stopwords(&read_text(&path)?),
            None => BTreeSet::new(),
        };
        let policy = if args.keep_punctuation || config.keep_punctuation == Some(true) {
            PunctuationPolicy::KeepAll
        } else {
            PunctuationPolicy::StripEdges
        };
        let vocab = match args.vocab.clone().or_else(|| config.vocab.clone()) {
            Some(path) => Some(WordPieceVocab::parse(&read_text(&path)?)?),
            None => None,
        };
        corpus
            .docs
            .values()
            .map(|doc| {
                let full = doc.full_text();
                match &vocab {
                    Some(v) => text::tokenize_document(&full, &stopwords, policy, v),
                    None => text::preprocess(&full, &stopwords, policy),
                }
            })
            .collect()
    };

    let counts = graph::count_windows(&docs, window)?;
    let built = graph::build_graph(&counts);
    write_text(&out, &graph::emit_graph(&built))?;
    if let Some(path) = &args.vocab_out {
        write_text(path, &graph::emit_vocabulary(built.vocab()))?;
    }
    println!(
        "nodes {} edges {} windows {}",
        built.node_count(),
        built.edge_count(),
        counts.total_windows
    );
    Ok(())
}

fn cmd_gcn_demo(args: &GcnDemoArgs) -> CliResult<()> {
    if args.rows == 0 || args.hidden == 0 || args.classes == 0 {
        return Err(CliError::validation("--rows, --hidden, and --classes must be at least 1"));
    }
    let built = graph::parse_graph(&read_text(&args.graph)?)?;
    let v = built.node_count();
    if v == 0 {
        return Err(CliError::validation("the graph has no nodes"));
    }
    let a_norm = built.normalized();
    let mut rng = DetRng::new(args.seed, Stream::InitWeights);

    // Resample until every preactivation clears the ReLU kink, so the
    // finite-difference probes stay on one side of it.
    let mut picked = None;
    for _ in 0..32 {
        let x = synth::rand_dense(&mut rng, args.rows, v, 0.0, 3.0);
        let params = VgcnParams {
            w_vh: synth::rand_signed_dense(&mut rng, v, args.hidden),
            w_hc: synth::rand_signed_dense(&mut rng, args.hidden, args.classes),
        };
        let pre = x.matmul(a_norm)?.matmul(&params.w_vh)?;
        if pre.data().iter().all(|p| p.abs() > 1e-3) {
            picked = Some((x, params));
            break;
        }
    }
    let Some((x, params)) = picked else {
        return Err(CliError::validation(
            "could not find preactivations clear of the ReLU kink; try another seed",
        ));
    };

    let forward = gcn::vgcn_forward(&x, a_norm, &params)?;
    let upstream = synth::rand_signed_dense(&mut rng, args.rows, args.classes);
    let (grad_vh, grad_hc) = gcn::vgcn_gradients(&x, a_norm, &params, &upstream)?;

    let loss = |p: &VgcnParams| -> CliResult<f64> {
        let out = gcn::vgcn_forward(&x, a_norm, p)?;
        Ok(out.data().iter().zip(upstream.data()).map(|(a, b)| a * b).sum())
    };
    let mut max_rel = 0.0_f64;
    for (which, analytic) in [(0, &grad_vh), (1, &grad_hc)] {
        for r in 0..analytic.rows() {
            for c in 0..analytic.cols() {
                let probe = |delta: f64| -> CliResult<f64> {
                    let mut p = params.clone();
                    let w = if which == 0 { &mut p.w_vh } else { &mut p.w_hc };
                    w.set(r, c, w.get(r, c) + delta);
                    loss(&p)
                };
                let w = if which == 0 { &params.w_vh } else { &params.w_hc };
                let h = 1e-6 * w.get(r, c).abs().max(1.0);
                let fd = (probe(h)? - probe(-h)?) / (2.0 * h);
                let g = analytic.get(r, c);
                let rel = (fd - g).abs() / fd.abs().max(g.abs()).max(1e-12);
                max_rel = max_rel.max(rel);
            }
        }
    }

    if let Some(path) = &args.out {
        write_text(path, &matrix::emit_matrix(&forward))?;
    }
    println!("forward {}x{}", forward.rows(), forward.cols());
    println!("max relative gradient error {max_rel:.3e}");
    if max_rel < 1e-6 {
        println!("gradient check passed");
        Ok(())
    } else {
        Err(CliError::validation(format!(
            "gradient check failed: max relative error {max_rel:.3e} >= 1e-6"
        )))
    }
}

fn cmd_eval(args: &EvalArgs) -> CliResult<()> {
    let rows = match (&args.combined, &args.gold, &args.pred) {
        (Some(combined), None, None) => eval::parse_predictions_tsv(&read_text(combined)?)?,
        (None, Some(gold), Some(pred)) => eval::join_predictions(
            &eval::parse_label_tsv(&read_text(gold)?)?,
            &eval::parse_label_tsv(&read_text(pred)?)?,
        )?,
        _ => {
            return Err(CliError::validation(
                "pass either --combined, or both --gold and --pred",
            ))
        }
    };
    let gold: Vec<CprGroup> = rows.iter().map(|(_, g, _)| *g).collect();
    let pred: Vec<CprGroup> = rows.iter().map(|(_, _, p)| *p).collect();
    let report = eval::evaluate(&gold, &pred)?;
    if let Some(path) = &args.out {
        write_text(path, &format!("{}\n", serde_json::to_string_pretty(&report)?))?;
    }
    if args.json {
        println!("{}", serde_json::to_string_pretty(&report)?);
    } else {
        print!("{}", eval::emit_report_table(&report));
    }
    Ok(())
}

fn cmd_schedule(args: &ScheduleArgs, config: &PipelineConfig) -> CliResult<()> {
    let mut params = config.schedule.clone().unwrap_or_default();
    if let Some(factor) = args.lr_factor {
        params.lr_factor = factor;
    }
    if let Some(warm_up) = args.warm_up {
        params.warm_up = warm_up;
    }
    params.validate()?;
    let steps: Vec<u64> = match (&args.steps, args.until) {
        (Some(list), None) => list.clone(),
        (None, Some(n)) if n >= 1 => (1..=n).collect(),
        (None, Some(_)) => return Err(CliError::validation("--until must be at least 1")),
        (None, None) => return Err(CliError::validation("pass --steps or --until")),
        (Some(_), Some(_)) => unreachable!("clap rejects --steps with --until"),
    };
    for step in steps {
        println!("{step}\t{:.16e}", eval::lr_schedule(step, &params)?);
    }
    Ok(())
}
