use std::net::SocketAddr;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Debug, Parser)]
#[command(name = "pdd", version, about = "Political delegitimization discourse toolkit")]
pub struct Cli {
    /// TOML file with defaults for any command.
    #[arg(long, global = true, env = "PDD_CONFIG")]
    pub config: Option<PathBuf>,

    /// Worker threads for parallel stages (defaults to the number of cores).
    #[arg(long, global = true)]
    pub jobs: Option<usize>,

    /// Where to write the run manifest. Defaults to `<output>.manifest.json`,
    /// or standard error for commands without an output file.
    #[arg(long, global = true)]
    pub manifest: Option<PathBuf>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a synthetic corpus with gold labels and speaker metadata.
    Synth(SynthArgs),
    /// Build a sentence file from per-source record files.
    Ingest(IngestArgs),
    /// Split documents into sentence records.
    Segment(SegmentArgs),
    /// Partition a corpus into train/validation/test.
    Split(SplitArgs),
    /// Source, label and characteristic statistics.
    Stats(StatsArgs),
    /// Run the annotation HTTP service.
    ServeAnnotation(ServeAnnotationArgs),
    /// Inter-annotator agreement over an annotation file.
    Agreement(AgreementArgs),
    /// Write a fine-tuning text file for one task.
    ExportTrain(ExportTrainArgs),
    /// Train the linear baseline.
    TrainBaseline(TrainBaselineArgs),
    /// Run the two-stage pipeline over a corpus.
    Predict(PredictArgs),
    /// Score predictions against gold annotations.
    Evaluate(EvaluateArgs),
    /// Speaker-level analyses with CSV, plot data and SVG output.
    Analyze(AnalyzeArgs),
    /// Combine evaluation reports into a Markdown summary.
    Report(ReportArgs),
    /// Serve a scripted backend over the inference wire protocol.
    ServeMockBackend(ServeMockBackendArgs),
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    /// Output directory.
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub sentences: Option<usize>,
    #[arg(long)]
    pub speakers: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Debug, Args)]
pub struct IngestArgs {
    /// `SOURCE=PATH` pairs; JSON-lines or CSV (by extension).
    #[arg(long = "input", required = true, value_name = "SOURCE=PATH")]
    pub inputs: Vec<String>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct SegmentArgs {
    /// JSON-lines documents with id, text, date and optional speaker_id.
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    /// External segmenter: reads a document on stdin, prints one sentence per line.
    #[arg(long, value_name = "PROGRAM")]
    pub command: Option<String>,
    /// Extra abbreviations for the rule-based segmenter.
    #[arg(long, value_delimiter = ',')]
    pub abbreviations: Vec<String>,
}

#[derive(Debug, Args)]
pub struct SplitArgs {
    #[arg(long)]
    pub corpus: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    /// Train, validation and test ratios.
    #[arg(long, value_delimiter = ',', value_name = "TRAIN,VAL,TEST")]
    pub ratios: Option<Vec<f64>>,
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Debug, Args)]
pub struct StatsArgs {
    #[arg(long)]
    pub corpus: PathBuf,
    #[arg(long)]
    pub annotations: Option<PathBuf>,
    #[arg(long)]
    pub csv: Option<PathBuf>,
    #[arg(long)]
    pub json: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ServeAnnotationArgs {
    #[arg(long)]
    pub corpus: PathBuf,
    #[arg(long, value_delimiter = ',', required = true)]
    pub annotators: Vec<String>,
    /// Size of the reliability sample every annotator labels.
    #[arg(long, default_value_t = 0)]
    pub shared: usize,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Append-only event log; replayed on start.
    #[arg(long)]
    pub event_log: Option<PathBuf>,
    #[arg(long, default_value = "127.0.0.1:8080")]
    pub addr: SocketAddr,
}

#[derive(Debug, Args)]
pub struct AgreementArgs {
    #[arg(long)]
    pub annotations: PathBuf,
    #[arg(long)]
    pub json: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Task {
    Binary,
    Characteristics,
    Span,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Part {
    Train,
    Validation,
    Test,
    All,
}

#[derive(Debug, Args)]
pub struct SplitSelection {
    /// Split file; without it the whole corpus is used.
    #[arg(long)]
    pub split: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = Part::All)]
    pub part: Part,
}

#[derive(Debug, Args)]
pub struct ExportTrainArgs {
    #[arg(long)]
    pub corpus: PathBuf,
    #[arg(long)]
    pub gold: PathBuf,
    #[command(flatten)]
    pub selection: SplitSelection,
    #[arg(long, value_enum)]
    pub task: Task,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub label_map: Option<PathBuf>,
    /// Also write the hyperparameter grid for external trainers.
    #[arg(long)]
    pub experiment_manifest: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum LossKind {
    Default,
    ClassWeights,
    Focal,
}

#[derive(Debug, Args)]
pub struct TrainBaselineArgs {
    #[arg(long)]
    pub corpus: PathBuf,
    #[arg(long)]
    pub gold: PathBuf,
    #[command(flatten)]
    pub selection: SplitSelection,
    #[arg(long, value_enum, default_value_t = Task::Binary)]
    pub task: Task,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, value_enum)]
    pub loss: Option<LossKind>,
    #[arg(long)]
    pub gamma: Option<f64>,
    #[arg(long)]
    pub alpha: Option<f64>,
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long)]
    pub learning_rate: Option<f64>,
    #[arg(long)]
    pub l2: Option<f64>,
    #[arg(long)]
    pub batch_size: Option<usize>,
    /// Hashed feature dimension (power of two).
    #[arg(long)]
    pub dim: Option<u32>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub max_terms: Option<usize>,
}

#[derive(Debug, Args)]
pub struct PredictArgs {
    #[arg(long)]
    pub corpus: PathBuf,
    #[command(flatten)]
    pub selection: SplitSelection,
    /// Stage-1 backend: mock:all-false, mock:all-true, const:TEXT, echo,
    /// fixture:PATH, gold:PATH, baseline:PATH or wire:URL.
    #[arg(long)]
    pub stage1: String,
    /// Characteristics backend (same forms as --stage1).
    #[arg(long, default_value = "mock:all-false")]
    pub characteristics: String,
    /// Span backend (same forms as --stage1).
    #[arg(long, default_value = "echo")]
    pub spans: String,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub threshold: Option<f64>,
    #[arg(long)]
    pub batch_size: Option<usize>,
    #[arg(long)]
    pub label_map: Option<PathBuf>,
    #[arg(long)]
    pub model_id: Option<String>,
}

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    #[arg(long)]
    pub gold: PathBuf,
    #[arg(long)]
    pub pred: PathBuf,
    /// Needed for span metrics.
    #[arg(long)]
    pub corpus: Option<PathBuf>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub csv: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum AnalysisTarget {
    Temporal,
    Gender,
    Bloc,
    Platform,
    Logodds,
    BeforeAfter,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum BinArg {
    HalfYear,
    Week,
}

#[derive(Debug, Args)]
pub struct AnalyzeArgs {
    #[arg(value_enum)]
    pub target: AnalysisTarget,
    #[arg(long)]
    pub pred: PathBuf,
    #[arg(long)]
    pub corpus: PathBuf,
    /// Speaker metadata CSV (gender, bloc, logodds, before-after).
    #[arg(long)]
    pub speakers: Option<PathBuf>,
    /// Events JSON; drawn as markers and used by before-after.
    #[arg(long)]
    pub events: Option<PathBuf>,
    /// Event name for before-after; defaults to the first government event.
    #[arg(long)]
    pub event: Option<String>,
    #[arg(long)]
    pub out_dir: PathBuf,
    #[arg(long, value_enum)]
    pub bin: Option<BinArg>,
    #[arg(long)]
    pub source: Option<String>,
    #[arg(long)]
    pub from: Option<String>,
    #[arg(long)]
    pub to: Option<String>,
    #[arg(long)]
    pub alpha0: Option<f64>,
    #[arg(long)]
    pub top_k: Option<usize>,
    /// Skip SVG rendering.
    #[arg(long)]
    pub no_svg: bool,
}

#[derive(Debug, Args)]
pub struct ReportArgs {
    /// Evaluation report JSON files, one row each.
    #[arg(long = "eval", required = true)]
    pub evals: Vec<PathBuf>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct ServeMockBackendArgs {
    /// Backend to expose (same forms as predict's --stage1, except wire:).
    #[arg(long)]
    pub backend: String,
    #[arg(long, value_enum)]
    pub task: Task,
    /// Corpus for gold: backends.
    #[arg(long)]
    pub corpus: Option<PathBuf>,
    #[arg(long)]
    pub label_map: Option<PathBuf>,
    #[arg(long, default_value = "127.0.0.1:8090")]
    pub addr: SocketAddr,
}
