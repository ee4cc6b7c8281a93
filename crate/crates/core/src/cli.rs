//! The `mtp` command line.
//!
//! Every option can come from a `key = value` config file (`--config`) or
//! from a flag; flags win. Config keys are the flag names with `_` in place
//! of `-`. Known keys:
//!
//! | key | used by |
//! |-----|---------|
//! | `seed`, `out` | all |
//! | `triplets`, `score_type`, `instance_features`, `target_features`, `target_hierarchy`, `dyadic_features` | wizard, split, train, evaluate (predict reads the feature/hierarchy keys) |
//! | `q1` .. `q6` | wizard |
//! | `setting`, `test_fraction`, `val_fraction` | split, train |
//! | `split` | train, evaluate |
//! | `loss`, `lr`, `batch_size`, `max_epochs`, `patience`, `embedding_dim`, `branch_hidden`, `head_hidden`, `standardize` | train |
//! | `checkpoint` | evaluate, predict |
//! | `metrics`, `partition` | evaluate |
//! | `couples` | predict |
//!
//! Exit codes: 0 success, 1 I/O, 2 usage or configuration, 3 dataset,
//! 4 questionnaire, 5 split, 6 encoding, 7 network or checkpoint, 8 training,
//! 9 metrics.

use std::collections::BTreeMap;
use std::fmt::{Display, Write as _};
use std::fs;
use std::io::{self, BufRead, IsTerminal, Write as _};
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::sync::Arc;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};
use log::info;
use thiserror::Error;

use crate::dataset::{
    infer_characteristics, load_features, load_hierarchy, load_triplets, DatasetError, MtpDataset,
    ScoreType, SideInfo, TargetSide,
};
use crate::encoders::{CoupleEncoder, EncodeError, Encoder};
use crate::metrics::{format_report, target_means, Metric, MetricError, Prediction, PredictionSet};
use crate::network::{
    init_model, read_checkpoint, write_checkpoint, Architecture, CoupleInput, Model, NetworkError,
};
use crate::selector::{
    parse_yes_no, resolve_answers, select_setting, PartialAnswers, Question, QuestionnaireAnswers,
    ScoreAnswer, SelectorError,
};
use crate::splitter::{make_split, Partition, Split, SplitConfig, SplitError, ValidationSetting};
use crate::train::{evaluate_split, train_model_with, Loss, TrainConfig, TrainError};

pub const KNOWN_KEYS: &[&str] = &[
    "seed",
    "out",
    "triplets",
    "score_type",
    "instance_features",
    "target_features",
    "target_hierarchy",
    "dyadic_features",
    "q1",
    "q2",
    "q3",
    "q4",
    "q5",
    "q6",
    "setting",
    "test_fraction",
    "val_fraction",
    "split",
    "loss",
    "lr",
    "batch_size",
    "max_epochs",
    "patience",
    "embedding_dim",
    "branch_hidden",
    "head_hidden",
    "standardize",
    "checkpoint",
    "metrics",
    "partition",
    "couples",
];

/// Bad flags, config files or option values.
#[derive(Debug, Error)]
#[error("{0}")]
pub struct UsageError(pub String);

fn usage<T>(message: impl Into<String>) -> Result<T> {
    Err(UsageError(message.into()).into())
}

/// Process exit code for an error, chosen by the first typed error in its chain.
pub fn exit_code(err: &anyhow::Error) -> i32 {
    for cause in err.chain() {
        if cause.is::<UsageError>() {
            return 2;
        }
        if cause.is::<DatasetError>() {
            return 3;
        }
        if cause.is::<SelectorError>() {
            return 4;
        }
        if cause.is::<SplitError>() {
            return 5;
        }
        if cause.is::<EncodeError>() {
            return 6;
        }
        if cause.is::<NetworkError>() {
            return 7;
        }
        if cause.is::<TrainError>() {
            return 8;
        }
        if cause.is::<MetricError>() {
            return 9;
        }
    }
    1
}

#[derive(Debug, Parser)]
#[command(
    name = "mtp",
    version,
    about = "Multi-target prediction with two- and three-branch neural networks"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Answer the questionnaire and report the matching problem setting.
    Wizard(WizardArgs),
    /// Split a dataset into train/validation/test partitions.
    Split(SplitArgs),
    /// Train a model and write a checkpoint.
    Train(TrainArgs),
    /// Compute metrics for a checkpoint on one partition.
    Evaluate(EvaluateArgs),
    /// Score arbitrary couples with a checkpoint.
    Predict(PredictArgs),
}

#[derive(Debug, Args)]
struct Shared {
    /// `key = value` configuration file.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<String>,
    /// Output directory.
    #[arg(long)]
    out: Option<String>,
}

#[derive(Debug, Args)]
struct DataArgs {
    /// Triplet file: `i,j,score` lines.
    #[arg(long)]
    triplets: Option<String>,
    /// binary, nominal, ordinal or real; inferred when absent.
    #[arg(long)]
    score_type: Option<String>,
    #[arg(long)]
    instance_features: Option<String>,
    #[arg(long)]
    target_features: Option<String>,
    #[arg(long)]
    target_hierarchy: Option<String>,
    #[arg(long)]
    dyadic_features: Option<String>,
}

#[derive(Debug, Args)]
struct SplitFlags {
    /// A, B, C or D.
    #[arg(long)]
    setting: Option<String>,
    #[arg(long)]
    test_fraction: Option<String>,
    #[arg(long)]
    val_fraction: Option<String>,
}

#[derive(Debug, Args)]
struct WizardArgs {
    #[command(flatten)]
    shared: Shared,
    #[command(flatten)]
    data: DataArgs,
    /// Predict for novel instances? (yes/no)
    #[arg(long)]
    q1: Option<String>,
    /// Predict for novel targets? (yes/no)
    #[arg(long)]
    q2: Option<String>,
    /// Side information for instances? (yes/no)
    #[arg(long)]
    q3: Option<String>,
    /// Side information for targets? (no/yes/yes_hierarchy)
    #[arg(long)]
    q4: Option<String>,
    /// Is the score matrix fully observed? (yes/no)
    #[arg(long)]
    q5: Option<String>,
    /// Score type (binary/nominal/ordinal/real/any)
    #[arg(long)]
    q6: Option<String>,
}

#[derive(Debug, Args)]
struct SplitArgs {
    #[command(flatten)]
    shared: Shared,
    #[command(flatten)]
    data: DataArgs,
    #[command(flatten)]
    split: SplitFlags,
}

#[derive(Debug, Args)]
struct TrainArgs {
    #[command(flatten)]
    shared: Shared,
    #[command(flatten)]
    data: DataArgs,
    #[command(flatten)]
    split_flags: SplitFlags,
    /// Existing split file; otherwise a split is drawn from the split flags.
    #[arg(long)]
    split: Option<String>,
    /// bce or mse; chosen from the score type when absent.
    #[arg(long)]
    loss: Option<String>,
    #[arg(long)]
    lr: Option<String>,
    #[arg(long)]
    batch_size: Option<String>,
    #[arg(long)]
    max_epochs: Option<String>,
    #[arg(long)]
    patience: Option<String>,
    #[arg(long)]
    embedding_dim: Option<String>,
    /// Comma-separated hidden widths inside each branch.
    #[arg(long)]
    branch_hidden: Option<String>,
    /// Comma-separated hidden widths of the head.
    #[arg(long)]
    head_hidden: Option<String>,
    /// Standardize tabular features (yes/no).
    #[arg(long)]
    standardize: Option<String>,
}

#[derive(Debug, Args)]
struct EvaluateArgs {
    #[command(flatten)]
    shared: Shared,
    #[command(flatten)]
    data: DataArgs,
    #[arg(long)]
    checkpoint: Option<String>,
    #[arg(long)]
    split: Option<String>,
    /// Comma-separated metric names.
    #[arg(long)]
    metrics: Option<String>,
    /// Partition to score: test (default), val, train.
    #[arg(long)]
    partition: Option<String>,
}

#[derive(Debug, Args)]
struct PredictArgs {
    #[command(flatten)]
    shared: Shared,
    #[command(flatten)]
    data: DataArgs,
    #[arg(long)]
    checkpoint: Option<String>,
    /// File of `i,j` lines.
    #[arg(long)]
    couples: Option<String>,
}

type Overrides = Vec<(&'static str, Option<String>)>;

impl Shared {
    fn overrides(&self) -> Overrides {
        vec![("seed", self.seed.clone()), ("out", self.out.clone())]
    }
}

impl DataArgs {
    fn overrides(&self) -> Overrides {
        vec![
            ("triplets", self.triplets.clone()),
            ("score_type", self.score_type.clone()),
            ("instance_features", self.instance_features.clone()),
            ("target_features", self.target_features.clone()),
            ("target_hierarchy", self.target_hierarchy.clone()),
            ("dyadic_features", self.dyadic_features.clone()),
        ]
    }
}

impl SplitFlags {
    fn overrides(&self) -> Overrides {
        vec![
            ("setting", self.setting.clone()),
            ("test_fraction", self.test_fraction.clone()),
            ("val_fraction", self.val_fraction.clone()),
        ]
    }
}

/// Effective options: config file values overridden by flags.
#[derive(Debug, Default)]
pub struct Settings {
    values: BTreeMap<String, String>,
}

impl Settings {
    pub fn parse_config(text: &str) -> Result<Self> {
        let mut values = BTreeMap::new();
        for (idx, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let Some((key, value)) = line.split_once('=') else {
                return usage(format!("config line {}: expected 'key = value'", idx + 1));
            };
            let key = key.trim().replace('-', "_");
            if !KNOWN_KEYS.contains(&key.as_str()) {
                return usage(format!("config line {}: unknown key '{key}'", idx + 1));
            }
            if values
                .insert(key.clone(), value.trim().to_string())
                .is_some()
            {
                return usage(format!("config line {}: duplicate key '{key}'", idx + 1));
            }
        }
        Ok(Self { values })
    }

    fn load(config: Option<&Path>, overrides: Overrides) -> Result<Self> {
        let mut settings = match config {
            Some(path) => {
                let text = fs::read_to_string(path)
                    .with_context(|| format!("reading config file {}", path.display()))?;
                Self::parse_config(&text)?
            }
            None => Self::default(),
        };
        for (key, value) in overrides {
            if let Some(v) = value {
                settings.values.insert(key.to_string(), v);
            }
        }
        Ok(settings)
    }

    pub fn raw(&self, key: &str) -> Option<&str> {
        self.values.get(key).map(String::as_str)
    }

    pub fn get<T>(&self, key: &str) -> Result<Option<T>>
    where
        T: FromStr,
        T::Err: Display,
    {
        match self.raw(key) {
            None => Ok(None),
            Some(v) => match v.parse() {
                Ok(x) => Ok(Some(x)),
                Err(e) => usage(format!("invalid value '{v}' for {key}: {e}")),
            },
        }
    }

    pub fn get_or<T>(&self, key: &str, default: T) -> Result<T>
    where
        T: FromStr,
        T::Err: Display,
    {
        Ok(self.get(key)?.unwrap_or(default))
    }

    pub fn require<T>(&self, key: &str) -> Result<T>
    where
        T: FromStr,
        T::Err: Display,
    {
        match self.get(key)? {
            Some(v) => Ok(v),
            None => usage(format!(
                "missing required option '{key}' (flag --{})",
                key.replace('_', "-")
            )),
        }
    }

    fn yes_no(&self, key: &str) -> Result<Option<bool>> {
        match self.raw(key) {
            None => Ok(None),
            Some(v) => match parse_yes_no(v) {
                Ok(b) => Ok(Some(b)),
                Err(e) => usage(format!("invalid value for {key}: {e}")),
            },
        }
    }

    fn widths(&self, key: &str) -> Result<Option<Vec<usize>>> {
        let Some(v) = self.raw(key) else {
            return Ok(None);
        };
        v.split(',')
            .map(str::trim)
            .filter(|s| !s.is_empty())
            .map(|s| match s.parse::<usize>() {
                Ok(w) if w > 0 => Ok(w),
                _ => usage(format!("invalid width '{s}' in {key}")),
            })
            .collect::<Result<Vec<_>>>()
            .map(Some)
    }
}

/// Entry point of the `mtp` binary; returns the process exit code.
pub fn main() -> i32 {
    let _ = env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn"))
        .try_init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    match run(cli.command) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e:#}");
            exit_code(&e)
        }
    }
}

fn run(command: Command) -> Result<()> {
    match command {
        Command::Wizard(a) => {
            let mut o = a.shared.overrides();
            o.extend(a.data.overrides());
            o.extend([
                ("q1", a.q1),
                ("q2", a.q2),
                ("q3", a.q3),
                ("q4", a.q4),
                ("q5", a.q5),
                ("q6", a.q6),
            ]);
            cmd_wizard(&Settings::load(a.shared.config.as_deref(), o)?)
        }
        Command::Split(a) => {
            let mut o = a.shared.overrides();
            o.extend(a.data.overrides());
            o.extend(a.split.overrides());
            cmd_split(&Settings::load(a.shared.config.as_deref(), o)?)
        }
        Command::Train(a) => {
            let mut o = a.shared.overrides();
            o.extend(a.data.overrides());
            o.extend(a.split_flags.overrides());
            o.extend([
                ("split", a.split),
                ("loss", a.loss),
                ("lr", a.lr),
                ("batch_size", a.batch_size),
                ("max_epochs", a.max_epochs),
                ("patience", a.patience),
                ("embedding_dim", a.embedding_dim),
                ("branch_hidden", a.branch_hidden),
                ("head_hidden", a.head_hidden),
                ("standardize", a.standardize),
            ]);
            cmd_train(&Settings::load(a.shared.config.as_deref(), o)?)
        }
        Command::Evaluate(a) => {
            let mut o = a.shared.overrides();
            o.extend(a.data.overrides());
            o.extend([
                ("checkpoint", a.checkpoint),
                ("split", a.split),
                ("metrics", a.metrics),
                ("partition", a.partition),
            ]);
            cmd_evaluate(&Settings::load(a.shared.config.as_deref(), o)?)
        }
        Command::Predict(a) => {
            let mut o = a.shared.overrides();
            o.extend(a.data.overrides());
            o.extend([("checkpoint", a.checkpoint), ("couples", a.couples)]);
            cmd_predict(&Settings::load(a.shared.config.as_deref(), o)?)
        }
    }
}

fn write_file(path: &Path, contents: impl AsRef<[u8]>) -> Result<()> {
    fs::write(path, contents).with_context(|| format!("writing {}", path.display()))
}

fn out_dir(s: &Settings) -> Result<Option<PathBuf>> {
    match s.get::<PathBuf>("out")? {
        Some(dir) => {
            fs::create_dir_all(&dir).with_context(|| format!("creating {}", dir.display()))?;
            Ok(Some(dir))
        }
        None => Ok(None),
    }
}

fn required_out_dir(s: &Settings) -> Result<PathBuf> {
    match out_dir(s)? {
        Some(dir) => Ok(dir),
        None => usage("missing required option 'out' (flag --out)"),
    }
}

fn load_target_side(s: &Settings, m: usize) -> Result<SideInfo> {
    match (
        s.get::<PathBuf>("target_features")?,
        s.get::<PathBuf>("target_hierarchy")?,
    ) {
        (Some(_), Some(_)) => usage("give target_features or target_hierarchy, not both"),
        (Some(p), None) => Ok(SideInfo::Features(Arc::new(load_features(&p)?))),
        (None, Some(p)) => Ok(SideInfo::Hierarchy(Arc::new(load_hierarchy(&p, m)?))),
        (None, None) => Ok(SideInfo::None),
    }
}

fn load_instance_side(s: &Settings) -> Result<SideInfo> {
    Ok(match s.get::<PathBuf>("instance_features")? {
        Some(p) => SideInfo::Features(Arc::new(load_features(&p)?)),
        None => SideInfo::None,
    })
}

fn load_dataset(s: &Settings) -> Result<MtpDataset> {
    let path: PathBuf = s.require("triplets")?;
    let data = load_triplets(&path, s.get::<ScoreType>("score_type")?)?;
    let instance_side = load_instance_side(s)?;
    let target_side = load_target_side(s, data.m())?;
    let dyadic = match s.get::<PathBuf>("dyadic_features")? {
        Some(p) => Some(Arc::new(load_features(&p)?)),
        None => None,
    };
    Ok(MtpDataset::new(data, instance_side, target_side, dyadic)?)
}

fn prompt(question: Question, text: &str) -> Result<Option<String>> {
    let stdin = io::stdin();
    if !stdin.is_terminal() {
        return Ok(None);
    }
    print!("{question}: {text} ");
    io::stdout().flush()?;
    let mut line = String::new();
    stdin.lock().read_line(&mut line)?;
    Ok(Some(line.trim().to_string()))
}

fn answer<T>(
    s: &Settings,
    question: Question,
    text: &str,
    parse: impl Fn(&str) -> Result<T, String>,
) -> Result<Option<T>> {
    let key = format!("{question}").to_ascii_lowercase();
    let raw = match s.raw(&key) {
        Some(v) => Some(v.to_string()),
        None => prompt(question, text)?,
    };
    match raw {
        None => Ok(None),
        Some(v) => match parse(&v) {
            Ok(x) => Ok(Some(x)),
            Err(e) => usage(format!("invalid answer to {question}: {e}")),
        },
    }
}

fn implied_loss(score: ScoreAnswer) -> &'static str {
    match score {
        ScoreAnswer::Binary => "bce",
        ScoreAnswer::Ordinal | ScoreAnswer::Real => "mse",
        ScoreAnswer::Nominal => "none (nominal scores are not trainable)",
        ScoreAnswer::Any => "bce for binary scores, mse for ordinal or real scores",
    }
}

fn cmd_wizard(s: &Settings) -> Result<()> {
    let q1 = answer(
        s,
        Question::Q1,
        "Predict for instances unseen in training? [yes/no]",
        parse_yes_no,
    )?;
    let q2 = answer(
        s,
        Question::Q2,
        "Predict for targets unseen in training? [yes/no]",
        parse_yes_no,
    )?;

    let answers = if s.raw("triplets").is_some() {
        let ds = load_dataset(s)?;
        let user = PartialAnswers {
            q1,
            q2,
            q3: s.yes_no("q3")?,
            q4: s.get::<TargetSide>("q4")?,
            q5: s.yes_no("q5")?,
            q6: s.get::<ScoreAnswer>("q6")?,
        };
        resolve_answers(&infer_characteristics(&ds), &user)?
    } else {
        let q1 = q1.ok_or(SelectorError::MissingIntent(Question::Q1))?;
        let q2 = q2.ok_or(SelectorError::MissingIntent(Question::Q2))?;
        let missing =
            |q: Question| UsageError(format!("{q} must be answered when no dataset is given"));
        let q3 = answer(
            s,
            Question::Q3,
            "Is side information available for the instances? [yes/no]",
            parse_yes_no,
        )?
        .ok_or_else(|| missing(Question::Q3))?;
        let q4 = answer(
            s,
            Question::Q4,
            "Is side information available for the targets? [no/yes/yes_hierarchy]",
            |v| v.parse::<TargetSide>(),
        )?
        .ok_or_else(|| missing(Question::Q4))?;
        let q5 = answer(
            s,
            Question::Q5,
            "Is the score matrix fully observed? [yes/no]",
            parse_yes_no,
        )?
        .ok_or_else(|| missing(Question::Q5))?;
        let q6 = answer(
            s,
            Question::Q6,
            "Score type? [binary/nominal/ordinal/real/any]",
            |v| v.parse::<ScoreAnswer>(),
        )?
        .ok_or_else(|| missing(Question::Q6))?;
        QuestionnaireAnswers::new(q1, q2, q3, q4, q5, q6)
    };

    let setting = select_setting(&answers)?;
    println!("answers: {answers}");
    println!("setting: {}", setting.label);
    println!("validation setting: {}", setting.default_validation_setting);
    println!("loss: {}", implied_loss(answers.score_type));
    if setting.relaxed_fully_observed {
        println!("note: the fully observed matrix was matched as a partially observed one");
    }
    Ok(())
}

fn split_config(s: &Settings, seed: u64) -> Result<SplitConfig> {
    let setting: ValidationSetting = s.require("setting")?;
    let cfg = SplitConfig::new(
        setting,
        s.get_or("test_fraction", 0.25)?,
        s.get_or("val_fraction", 0.1)?,
        seed,
    );
    cfg.validate()?;
    Ok(cfg)
}

fn print_sizes(split: &Split) {
    println!("setting: {}", split.setting);
    for p in [
        Partition::Train,
        Partition::Validation,
        Partition::Test,
        Partition::Discarded,
    ] {
        println!("{}: {}", p, split.partition(p).len());
    }
}

fn cmd_split(s: &Settings) -> Result<()> {
    let path: PathBuf = s.require("triplets")?;
    let data = load_triplets(&path, s.get::<ScoreType>("score_type")?)?;
    let cfg = split_config(s, s.get_or("seed", 0)?)?;
    let split = make_split(&data, &cfg)?;
    let out = required_out_dir(s)?;
    split.save(out.join("split.csv"))?;
    print_sizes(&split);
    Ok(())
}

/// Encoder descriptors and dataset shape stored next to the network weights.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelMetadata {
    pub n: usize,
    pub m: usize,
    pub score_type: ScoreType,
    pub loss: Loss,
    pub instance: String,
    pub target: String,
    pub dyadic: Option<String>,
}

impl ModelMetadata {
    fn new(ds: &MtpDataset, loss: Loss, encoders: &CoupleEncoder) -> Self {
        Self {
            n: ds.interactions.n(),
            m: ds.interactions.m(),
            score_type: ds.interactions.score_type(),
            loss,
            instance: encoders.instance.descriptor(),
            target: encoders.target.descriptor(),
            dyadic: encoders.dyadic.as_ref().map(Encoder::descriptor),
        }
    }

    pub fn to_text(&self) -> String {
        format!(
            "n={}\nm={}\nscore_type={}\nloss={}\ninstance={}\ntarget={}\ndyadic={}\n",
            self.n,
            self.m,
            self.score_type,
            self.loss,
            self.instance,
            self.target,
            self.dyadic.as_deref().unwrap_or("none")
        )
    }

    pub fn parse(text: &str) -> Result<Self, NetworkError> {
        let map: BTreeMap<&str, &str> = text.lines().filter_map(|l| l.split_once('=')).collect();
        let bad = |what: &str| {
            NetworkError::BadDescriptor(format!("checkpoint metadata: bad or missing {what}"))
        };
        let field = |k: &str| map.get(k).copied().ok_or_else(|| bad(k));
        Ok(Self {
            n: field("n")?.parse().map_err(|_| bad("n"))?,
            m: field("m")?.parse().map_err(|_| bad("m"))?,
            score_type: field("score_type")?
                .parse()
                .map_err(|_| bad("score_type"))?,
            loss: field("loss")?.parse().map_err(|_| bad("loss"))?,
            instance: field("instance")?.to_string(),
            target: field("target")?.to_string(),
            dyadic: match field("dyadic")? {
                "none" => None,
                d => Some(d.to_string()),
            },
        })
    }
}

fn check_input_dims(
    model: &Model,
    instance: &Encoder,
    target: &Encoder,
    dyadic: Option<&Encoder>,
) -> Result<(), NetworkError> {
    let spec = model.spec();
    let mismatch = |what: &str, enc: usize, net: usize| {
        NetworkError::DimensionMismatch(format!(
            "{what} encoder gives {enc} values, network expects {net}"
        ))
    };
    if instance.output_dim() != spec.instance.input_dim {
        return Err(mismatch(
            "instance",
            instance.output_dim(),
            spec.instance.input_dim,
        ));
    }
    if target.output_dim() != spec.target.input_dim {
        return Err(mismatch(
            "target",
            target.output_dim(),
            spec.target.input_dim,
        ));
    }
    match (dyadic, &spec.dyadic) {
        (None, None) => Ok(()),
        (Some(d), Some(b)) if d.output_dim() == b.input_dim => Ok(()),
        (Some(d), Some(b)) => Err(mismatch("dyadic", d.output_dim(), b.input_dim)),
        _ => Err(NetworkError::DimensionMismatch(
            "dyadic branch presence differs".into(),
        )),
    }
}

fn cmd_train(s: &Settings) -> Result<()> {
    let ds = load_dataset(s)?;
    let seed: u64 = s.get_or("seed", 0)?;
    let split = match s.get::<PathBuf>("split")? {
        Some(path) => Split::load(&path, ds.interactions.len())?,
        None => make_split(&ds.interactions, &split_config(s, seed)?)?,
    };
    let score_type = ds.interactions.score_type();
    let natural = Loss::for_score_type(score_type);
    let loss = match s.get::<Loss>("loss")?.or(natural) {
        Some(l) if Some(l) == natural => l,
        other => {
            return Err(TrainError::IncompatibleLoss {
                loss: other.unwrap_or(Loss::Mse),
                score_type,
            }
            .into())
        }
    };

    let encoders =
        CoupleEncoder::for_dataset(&ds, &split.train, s.yes_no("standardize")?.unwrap_or(true))?;
    let mut arch = Architecture::new(
        encoders.instance.output_dim(),
        encoders.target.output_dim(),
        loss.output_transform(),
    );
    arch.dyadic_input = encoders.dyadic.as_ref().map(Encoder::output_dim);
    arch.embedding_dim = s.get_or("embedding_dim", arch.embedding_dim)?;
    if let Some(w) = s.widths("branch_hidden")? {
        arch.branch_hidden = w;
    }
    if let Some(w) = s.widths("head_hidden")? {
        arch.head_hidden = w;
    }
    let model = init_model(arch.spec(), seed)?;

    let defaults = TrainConfig::new(loss);
    let cfg = TrainConfig {
        learning_rate: s.get_or("lr", defaults.learning_rate)?,
        batch_size: s.get_or("batch_size", defaults.batch_size)?,
        max_epochs: s.get_or("max_epochs", defaults.max_epochs)?,
        patience: s.get_or("patience", defaults.patience)?,
        seed,
        ..defaults
    };
    let out = required_out_dir(s)?;

    let mut log = String::from("epoch,train_loss,val_loss\n");
    let (model, report) = train_model_with(model, &ds, &split, &encoders, &cfg, |r| {
        info!(
            "epoch {} train {:.6} val {:?}",
            r.epoch, r.train_loss, r.val_loss
        );
        log.push_str(&r.log_line());
        log.push('\n');
    })?;

    let meta = ModelMetadata::new(&ds, loss, &encoders);
    write_file(
        &out.join("model.mtpf"),
        write_checkpoint(&model, &meta.to_text()),
    )?;
    write_file(&out.join("train_log.csv"), log)?;
    split.save(out.join("split.csv"))?;

    println!("epochs: {}", report.epochs_run);
    println!("best epoch: {}", report.best_epoch);
    if let Some(best) = report.best() {
        println!("best monitored loss: {:.6}", best.monitored());
    }
    println!("stopped early: {}", report.stopped_early);
    Ok(())
}

fn load_model(s: &Settings) -> Result<(Model, ModelMetadata)> {
    let path: PathBuf = s.require("checkpoint")?;
    let bytes =
        fs::read(&path).with_context(|| format!("reading checkpoint {}", path.display()))?;
    let (model, text) = read_checkpoint(&bytes)
        .with_context(|| format!("loading checkpoint {}", path.display()))?;
    Ok((model, ModelMetadata::parse(&text)?))
}

fn cmd_evaluate(s: &Settings) -> Result<()> {
    let ds = load_dataset(s)?;
    let (model, meta) = load_model(s)?;
    if (meta.n, meta.m) != (ds.interactions.n(), ds.interactions.m()) {
        return Err(NetworkError::DimensionMismatch(format!(
            "checkpoint was trained on a {}x{} matrix, dataset is {}x{}",
            meta.n,
            meta.m,
            ds.interactions.n(),
            ds.interactions.m()
        ))
        .into());
    }
    let encoders = CoupleEncoder {
        instance: Encoder::from_descriptor(&meta.instance, &ds.instance_side)?,
        target: Encoder::from_descriptor(&meta.target, &ds.target_side)?,
        dyadic: match (&meta.dyadic, &ds.dyadic_side) {
            (Some(d), Some(f)) => {
                Some(Encoder::from_descriptor(d, &SideInfo::Features(f.clone()))?)
            }
            (Some(_), None) => {
                return usage("the checkpoint uses dyadic features; pass --dyadic-features")
            }
            (None, _) => None,
        },
    };
    check_input_dims(
        &model,
        &encoders.instance,
        &encoders.target,
        encoders.dyadic.as_ref(),
    )?;

    let split_path: PathBuf = s.require("split")?;
    let split = Split::load(&split_path, ds.interactions.len())?;
    let partition: Partition = s.get_or("partition", Partition::Test)?;
    let score_type = ds.interactions.score_type();
    let metrics = match s.raw("metrics") {
        Some(list) => Metric::parse_list(list)?,
        None => Metric::defaults_for(score_type),
    };
    if metrics.is_empty() {
        return usage("empty metric list");
    }
    for m in &metrics {
        m.check_score_type(score_type)?;
    }

    let indices = split.partition(partition);
    if indices.is_empty() {
        return Err(SplitError::EmptyPartition(partition).into());
    }
    let eval = evaluate_split(&model, &ds, indices, &encoders, meta.loss)?;
    let triplets = ds.interactions.triplets();
    let entries = eval
        .indices
        .iter()
        .zip(&eval.scores)
        .map(|(&k, &y)| {
            let t = triplets[k];
            Prediction::new(t.instance, t.target, t.score, y)
        })
        .collect();
    let predictions = PredictionSet::new(entries)?;
    let means = target_means(&ds.interactions, &split.train);
    let values = metrics
        .iter()
        .map(|&m| m.compute(&predictions, Some(&means)).map(|v| (m, v)))
        .collect::<Result<Vec<_>, _>>()?;
    let report = format_report(&values);
    print!("{report}");

    if let Some(out) = out_dir(s)? {
        write_file(&out.join("metrics.csv"), &report)?;
        let mut scores = String::new();
        for e in predictions.entries() {
            writeln!(scores, "{},{},{}", e.instance, e.target, e.y_pred)?;
        }
        write_file(&out.join("scores.csv"), scores)?;
    }
    Ok(())
}

fn parse_couple(line: &str, lineno: usize) -> Result<(usize, usize), DatasetError> {
    let bad = || DatasetError::Parse {
        line: lineno,
        message: format!("expected 'i,j', got '{line}'"),
    };
    let (i, j) = line.split_once(',').ok_or_else(bad)?;
    Ok((
        i.trim().parse().map_err(|_| bad())?,
        j.trim().parse().map_err(|_| bad())?,
    ))
}

fn cmd_predict(s: &Settings) -> Result<()> {
    let (model, meta) = load_model(s)?;
    if meta.dyadic.is_some() {
        return usage("models with a dyadic branch need per-couple features and cannot score arbitrary couples");
    }
    let instance = Encoder::from_descriptor(&meta.instance, &load_instance_side(s)?)?;
    let target = Encoder::from_descriptor(&meta.target, &load_target_side(s, meta.m)?)?;
    check_input_dims(&model, &instance, &target, None)?;

    let path: PathBuf = s.require("couples")?;
    let text = fs::read_to_string(&path)
        .with_context(|| format!("reading couples file {}", path.display()))?;
    let mut scores = String::new();
    for (idx, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (i, j) = parse_couple(line, idx + 1)?;
        let couple = CoupleInput {
            instance: instance
                .encode(i)
                .with_context(|| format!("couples line {}", idx + 1))?,
            target: target
                .encode(j)
                .with_context(|| format!("couples line {}", idx + 1))?,
            dyadic: None,
        };
        let (score, _) = model.forward(&couple)?;
        writeln!(scores, "{i},{j},{score}")?;
    }

    match out_dir(s)? {
        Some(out) => write_file(&out.join("predictions.csv"), scores)?,
        None => io::stdout().write_all(scores.as_bytes())?,
    }
    Ok(())
}
