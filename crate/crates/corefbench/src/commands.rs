//! Subcommands of the `corefbench` binary.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use corefbench_core::encoder::{build_vocab, pretrain_mlm, tokenize, Encoder, MlmConfig, Vocab};
use corefbench_core::init::seeded;
use corefbench_core::numerics::ParamStore;
use corefbench_core::objectives::Objective;
use corefbench_core::schema::{detect_candidate_mismatch, repair_candidate, SchemaInstance};
use corefbench_core::training::{
    evaluate, prepare_set, select_best, sweep_configs, GridSpace, RunConfig, DEFAULT_GRID_SEEDS,
};
use corefbench_core::{synthetic, Error as CoreError};
use serde::Serialize;

use crate::checkpoint::Checkpoint;
use crate::config::{CliConfig, EncoderSettings, Preset};
use crate::datasets::{
    mismatch_tsv, read_dataset, read_overrides, write_unified, DatasetFormat, MismatchRow,
};
use crate::records::{load_records, write_atomic};
use crate::report::{write_report, Style};
use crate::runner::{run_configs, summarize, Outcome, Workload};

/// Exit status when preprocessing left instances it could not repair.
pub const EXIT_FLAGGED: u8 = 2;

#[derive(Debug, Parser)]
#[command(
    name = "corefbench",
    version,
    about = "Train and compare pronoun-resolution objectives on a toy masked-LM encoder"
)]
pub struct Cli {
    /// More log output (-v info, -vv debug); RUST_LOG takes precedence.
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    pub verbose: u8,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Convert a dataset to the unified format, repairing candidates that do
    /// not occur verbatim in the text.
    Preprocess(PreprocessArgs),
    /// Write a synthetic train/dev split and a pretraining corpus.
    Synth(SynthArgs),
    /// Pretrain the encoder's masked-token predictor on a text corpus.
    Pretrain(PretrainArgs),
    /// Train one configuration.
    Train(TrainArgs),
    /// Train every grid point under each grid seed.
    Grid(GridArgs),
    /// Train one configuration under consecutive seeds.
    Sweep(SweepArgs),
    /// Score a head checkpoint on a labeled dataset.
    Eval(EvalArgs),
    /// Aggregate run records into report tables.
    Report(ReportArgs),
}

fn parse_objective(s: &str) -> std::result::Result<Objective, String> {
    s.parse().map_err(|e: CoreError| e.to_string())
}

fn parse_eval_set(s: &str) -> std::result::Result<(String, PathBuf), String> {
    match s.split_once('=') {
        Some((name, path)) if !name.is_empty() && !path.is_empty() => {
            Ok((name.into(), path.into()))
        }
        _ => Err(format!("expected NAME=PATH, got {s:?}")),
    }
}

#[derive(Debug, Clone, Default, Args)]
pub struct PathArgs {
    /// JSON configuration file; flags override its values.
    #[arg(long, value_name = "FILE")]
    pub config: Option<PathBuf>,
    /// Root for relative dataset paths [default: $COREFBENCH_DATA_DIR, else .]
    #[arg(long, value_name = "DIR")]
    pub data_dir: Option<PathBuf>,
    /// Where records, checkpoints and reports go [default: out]
    #[arg(long, value_name = "DIR")]
    pub output_dir: Option<PathBuf>,
}

impl PathArgs {
    fn into_config(self, flags: CliConfig) -> Result<CliConfig> {
        CliConfig::load(
            self.config.as_deref(),
            CliConfig {
                data_dir: self.data_dir,
                output_dir: self.output_dir,
                ..flags
            },
        )
    }
}

#[derive(Debug, Clone, Default, Args)]
pub struct EncoderArgs {
    #[arg(long, value_name = "N")]
    pub layers: Option<usize>,
    #[arg(long, value_name = "N")]
    pub heads: Option<usize>,
    #[arg(long, value_name = "N")]
    pub hidden: Option<usize>,
    #[arg(long, value_name = "N")]
    pub ffn: Option<usize>,
    #[arg(long, value_name = "N")]
    pub max_len: Option<usize>,
    #[arg(long, value_name = "P")]
    pub dropout: Option<f64>,
}

impl From<EncoderArgs> for EncoderSettings {
    fn from(a: EncoderArgs) -> Self {
        EncoderSettings {
            num_layers: a.layers,
            num_heads: a.heads,
            hidden: a.hidden,
            ffn: a.ffn,
            max_len: a.max_len,
            dropout: a.dropout,
        }
    }
}

#[derive(Debug, Clone, Default, Args)]
pub struct RunArgs {
    #[command(flatten)]
    pub paths: PathArgs,
    /// Objective head: wg-sr, bwp, css or mas
    #[arg(long, value_parser = parse_objective)]
    pub objective: Option<Objective>,
    /// Training set
    #[arg(long, value_name = "FILE")]
    pub train: Option<PathBuf>,
    /// Dev set used for per-epoch accuracy and convergence
    #[arg(long, value_name = "FILE")]
    pub dev: Option<PathBuf>,
    /// Format of every dataset [default: unified]
    #[arg(long, value_enum)]
    pub format: Option<DatasetFormat>,
    /// Extra evaluation set scored after training, repeatable
    #[arg(long = "eval", value_name = "NAME=FILE", value_parser = parse_eval_set)]
    pub eval_sets: Vec<(String, PathBuf)>,
    /// Report column name of the dev set [default: dev]
    #[arg(long)]
    pub dev_name: Option<String>,
    /// Encoder-only checkpoint to warm-start from
    #[arg(long, value_name = "FILE")]
    pub pretrained: Option<PathBuf>,
    /// Hyperparameter preset; explicit values still win
    #[arg(long, value_enum)]
    pub preset: Option<Preset>,
    /// Peak learning rate
    #[arg(long)]
    pub lr: Option<f64>,
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long)]
    pub batch_size: Option<usize>,
    /// Seed (the first seed of a sweep)
    #[arg(long)]
    pub seed: Option<u64>,
    /// Parallel runs
    #[arg(long, value_name = "N")]
    pub jobs: Option<usize>,
    /// Save a checkpoint per run under <output-dir>/checkpoints
    #[arg(long)]
    pub save_checkpoints: bool,
    #[command(flatten)]
    pub encoder: EncoderArgs,
}

impl RunArgs {
    fn into_config(self) -> Result<CliConfig> {
        let flags = CliConfig {
            objective: self.objective,
            train: self.train,
            dev: self.dev,
            format: self.format,
            dev_name: self.dev_name,
            eval_sets: self.eval_sets.into_iter().collect(),
            pretrained: self.pretrained,
            encoder: self.encoder.into(),
            preset: self.preset,
            learning_rate: self.lr,
            epochs: self.epochs,
            batch_size: self.batch_size,
            seed: self.seed,
            jobs: self.jobs,
            save_checkpoints: self.save_checkpoints.then_some(true),
            ..CliConfig::default()
        };
        self.paths.into_config(flags)
    }
}

#[derive(Debug, Clone, Args)]
pub struct TrainArgs {
    #[command(flatten)]
    pub run: RunArgs,
}

#[derive(Debug, Clone, Args)]
pub struct GridArgs {
    #[command(flatten)]
    pub run: RunArgs,
    /// Seeds of every grid point [default: 0,1,2]
    #[arg(long, value_delimiter = ',', value_name = "S,S,S")]
    pub grid_seeds: Option<Vec<u64>>,
}

#[derive(Debug, Clone, Args)]
pub struct SweepArgs {
    #[command(flatten)]
    pub run: RunArgs,
    /// Number of seeds [default: 20]
    #[arg(long, value_name = "N")]
    pub seeds: Option<usize>,
    /// Take hyperparameters from the best grid point among these records
    #[arg(long, value_name = "GLOB")]
    pub best_of: Option<String>,
}

#[derive(Debug, Clone, Args)]
pub struct PreprocessArgs {
    #[command(flatten)]
    pub paths: PathArgs,
    /// Dataset to convert
    #[arg(long, value_name = "FILE")]
    pub input: PathBuf,
    #[arg(long, value_enum, default_value_t = DatasetFormat::Unified)]
    pub format: DatasetFormat,
    /// Manual candidate replacements, one JSON object per line
    #[arg(long, value_name = "FILE")]
    pub override_file: Option<PathBuf>,
    /// Unified output [default: <output-dir>/<stem>.unified.jsonl]
    #[arg(long, value_name = "FILE")]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct SynthArgs {
    /// Output directory [default: out]
    #[arg(long, value_name = "DIR")]
    pub output_dir: Option<PathBuf>,
    #[arg(long, default_value_t = 500)]
    pub schemas: usize,
    #[arg(long, default_value_t = 400)]
    pub n_train: usize,
    #[arg(long, default_value_t = 7)]
    pub seed: u64,
    /// Sentences in the pretraining corpus
    #[arg(long, default_value_t = 4000)]
    pub corpus_size: usize,
    #[arg(long, default_value_t = 1000)]
    pub corpus_seed: u64,
}

#[derive(Debug, Clone, Args)]
pub struct PretrainArgs {
    #[command(flatten)]
    pub paths: PathArgs,
    /// Plain-text corpus, one sentence per line
    #[arg(long, value_name = "FILE")]
    pub corpus: PathBuf,
    /// Dataset whose words join the vocabulary
    #[arg(long, value_name = "FILE")]
    pub train: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub format: Option<DatasetFormat>,
    #[arg(long, default_value_t = 6000)]
    pub steps: usize,
    #[arg(long, default_value_t = 16)]
    pub batch_size: usize,
    #[arg(long, default_value_t = 1e-3)]
    pub lr: f64,
    /// Initialization and masking seed
    #[arg(long, default_value_t = 99)]
    pub seed: u64,
    /// Checkpoint to write [default: <output-dir>/pretrained.json]
    #[arg(long, value_name = "FILE")]
    pub output: Option<PathBuf>,
    #[command(flatten)]
    pub encoder: EncoderArgs,
}

#[derive(Debug, Clone, Args)]
pub struct EvalArgs {
    #[command(flatten)]
    pub paths: PathArgs,
    /// Head checkpoint
    #[arg(long, value_name = "FILE")]
    pub checkpoint: PathBuf,
    /// Labeled dataset
    #[arg(long, value_name = "FILE")]
    pub dataset: PathBuf,
    #[arg(long, value_enum)]
    pub format: Option<DatasetFormat>,
    /// JSON result [default: <output-dir>/eval_<stem>.json]
    #[arg(long, value_name = "FILE")]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct ReportArgs {
    #[command(flatten)]
    pub paths: PathArgs,
    /// Run records [default: <output-dir>/runs/*.json]
    #[arg(long, value_name = "GLOB")]
    pub records: Option<String>,
    #[arg(long, value_enum, default_value_t = Style::Table1)]
    pub style: Style,
    /// Report column name of the dev set [default: dev]
    #[arg(long)]
    pub dev_name: Option<String>,
}

pub fn run(cli: Cli) -> Result<ExitCode> {
    match cli.command {
        Command::Preprocess(a) => preprocess(a),
        Command::Synth(a) => synth(a).map(|_| ExitCode::SUCCESS),
        Command::Pretrain(a) => pretrain(a).map(|_| ExitCode::SUCCESS),
        Command::Train(a) => train(a.run.into_config()?),
        Command::Grid(a) => {
            let seeds = a.grid_seeds;
            let mut cfg = a.run.into_config()?;
            cfg.grid_seeds = seeds.or(cfg.grid_seeds);
            grid(cfg)
        }
        Command::Sweep(a) => {
            let mut cfg = a.run.into_config()?;
            cfg.seeds = a.seeds.or(cfg.seeds);
            sweep(cfg, a.best_of.as_deref())
        }
        Command::Eval(a) => eval(a).map(|_| ExitCode::SUCCESS),
        Command::Report(a) => report(a).map(|_| ExitCode::SUCCESS),
    }
}

fn stem(path: &Path) -> String {
    let name = path
        .file_name()
        .map_or_else(|| "data".into(), |s| s.to_string_lossy().into_owned());
    name.split('.').next().unwrap_or("data").to_string()
}

fn preprocess(a: PreprocessArgs) -> Result<ExitCode> {
    let flags = CliConfig {
        format: Some(a.format),
        override_file: a.override_file,
        ..CliConfig::default()
    };
    let cfg = a.paths.into_config(flags)?;
    let input = cfg.data_path(&a.input);
    let data = read_dataset(&input, cfg.format())?;
    let overrides = cfg
        .override_file
        .as_deref()
        .map(read_overrides)
        .transpose()?;
    let mut rows = Vec::new();
    let mut out = Vec::with_capacity(data.len());
    let mut unrepairable = 0;
    for inst in data {
        let report = detect_candidate_mismatch(&inst);
        if report.is_clean() {
            out.push(inst);
            continue;
        }
        let mut row = MismatchRow {
            id: inst.id.clone(),
            c1_found: report.c1_found,
            c2_found: report.c2_found,
            action: String::new(),
        };
        match repair_candidate(&inst, overrides.as_ref()) {
            Ok((fixed, action)) => {
                row.action = action.as_str().into();
                out.push(fixed);
            }
            Err(CoreError::Unrepairable { .. }) => {
                row.action = "unrepairable".into();
                unrepairable += 1;
                out.push(inst);
            }
            Err(e) => return Err(e.into()),
        }
        rows.push(row);
    }
    let dir = cfg.output_dir();
    std::fs::create_dir_all(&dir)?;
    let name = stem(&input);
    let output = a
        .output
        .unwrap_or_else(|| dir.join(format!("{name}.unified.jsonl")));
    let mut bytes = Vec::new();
    write_unified(&mut bytes, &out)?;
    write_atomic(&output, &bytes)?;
    let report_path = output.with_file_name(format!("{name}.mismatch.tsv"));
    write_atomic(&report_path, mismatch_tsv(&rows).as_bytes())?;
    cfg.echo("preprocess")?;
    println!(
        "{}: {} instances, {} mismatched, {} unrepairable -> {}",
        input.display(),
        out.len(),
        rows.len(),
        unrepairable,
        output.display()
    );
    if unrepairable > 0 {
        eprintln!(
            "warning: {unrepairable} instances could not be repaired; see {}",
            report_path.display()
        );
        return Ok(ExitCode::from(EXIT_FLAGGED));
    }
    Ok(ExitCode::SUCCESS)
}

fn synth(a: SynthArgs) -> Result<()> {
    let dir = a.output_dir.unwrap_or_else(|| PathBuf::from("out"));
    std::fs::create_dir_all(&dir)?;
    if a.n_train > a.schemas {
        bail!("--n-train {} exceeds --schemas {}", a.n_train, a.schemas);
    }
    let (train, dev) = synthetic::split(synthetic::generate_schemas(a.schemas, a.seed), a.n_train);
    for (name, set) in [("train", &train), ("dev", &dev)] {
        let mut bytes = Vec::new();
        write_unified(&mut bytes, set)?;
        write_atomic(&dir.join(format!("{name}.jsonl")), &bytes)?;
    }
    let corpus = synthetic::pretraining_corpus(a.corpus_size, a.corpus_seed);
    write_atomic(
        &dir.join("corpus.txt"),
        (corpus.join("\n") + "\n").as_bytes(),
    )?;
    println!(
        "wrote {} train, {} dev, {} corpus lines to {}",
        train.len(),
        dev.len(),
        corpus.len(),
        dir.display()
    );
    Ok(())
}

fn instance_strings(data: &[SchemaInstance]) -> impl Iterator<Item = String> + '_ {
    data.iter()
        .map(|i| format!("{} {} {}", i.text, i.candidate1, i.candidate2))
}

fn pretrain(a: PretrainArgs) -> Result<()> {
    let flags = CliConfig {
        train: a.train.clone(),
        format: a.format,
        encoder: a.encoder.into(),
        seed: Some(a.seed),
        ..CliConfig::default()
    };
    let cfg = a.paths.into_config(flags)?;
    let corpus_path = cfg.data_path(&a.corpus);
    let text = std::fs::read_to_string(&corpus_path)
        .with_context(|| format!("reading {}", corpus_path.display()))?;
    let lines: Vec<&str> = text.lines().filter(|l| !l.trim().is_empty()).collect();
    if lines.is_empty() {
        bail!("corpus {} is empty", corpus_path.display());
    }
    let mut vocab_text: Vec<String> = lines.iter().map(|s| s.to_string()).collect();
    if let Some(train) = &cfg.train {
        vocab_text.extend(instance_strings(&read_dataset(
            &cfg.data_path(train),
            cfg.format(),
        )?));
    }
    let vocab = build_vocab(&vocab_text, 1)?;
    let enc_cfg = cfg.encoder.apply(vocab.len());
    let mut store = ParamStore::new();
    let encoder = Encoder::new(enc_cfg, &mut store, &mut seeded(a.seed))?;
    let ids: Vec<Vec<u32>> = lines.iter().map(|s| tokenize(s, &vocab)).collect();
    let mlm = MlmConfig {
        steps: a.steps,
        batch_size: a.batch_size,
        learning_rate: a.lr,
        seed: a.seed,
        ..MlmConfig::default()
    };
    let report = pretrain_mlm(&encoder, &mut store, &ids, &mlm)?;
    let output = a
        .output
        .unwrap_or_else(|| cfg.output_dir().join("pretrained.json"));
    if let Some(parent) = output.parent() {
        std::fs::create_dir_all(parent)?;
    }
    Checkpoint::new(enc_cfg, &vocab, None, &store).save(&output)?;
    cfg.echo("pretrain")?;
    match report.head_tail_means(100.min(report.losses.len() / 2).max(1)) {
        Some((head, tail)) => println!(
            "masked-token loss {head:.4} -> {tail:.4}; wrote {}",
            output.display()
        ),
        None => println!("wrote {}", output.display()),
    }
    Ok(())
}

fn load_workload(cfg: &CliConfig) -> Result<(Workload, corefbench_core::encoder::EncoderConfig)> {
    let (Some(train), Some(dev)) = (&cfg.train, &cfg.dev) else {
        bail!("both --train and --dev are required");
    };
    let train = read_dataset(&cfg.data_path(train), cfg.format())?;
    let dev = read_dataset(&cfg.data_path(dev), cfg.format())?;
    let eval_sets = cfg
        .eval_sets
        .iter()
        .map(|(name, p)| Ok((name.clone(), read_dataset(&cfg.data_path(p), cfg.format())?)))
        .collect::<Result<Vec<_>>>()?;
    let (vocab, pretrained, encoder): (Vocab, _, _) = match &cfg.pretrained {
        Some(path) => {
            let ck = Checkpoint::load(path)?;
            if !cfg.encoder.is_empty() {
                log::warn!(
                    "encoder settings ignored; the pretrained checkpoint fixes the architecture"
                );
            }
            let (_, store) = ck.encoder_store()?;
            (ck.vocab, Some(store), ck.encoder)
        }
        None => {
            let text: Vec<String> = instance_strings(&train).collect();
            let vocab = build_vocab(&text, 1)?;
            let enc = cfg.encoder.apply(vocab.len());
            (vocab, None, enc)
        }
    };
    let checkpoint_dir = cfg
        .save_checkpoints
        .unwrap_or(false)
        .then(|| cfg.output_dir().join("checkpoints"));
    Ok((
        Workload {
            train,
            dev,
            vocab,
            pretrained,
            eval_sets,
            checkpoint_dir,
        },
        encoder,
    ))
}

fn execute(cfg: &CliConfig, work: &Workload, configs: &[RunConfig]) -> Result<ExitCode> {
    let outcomes = run_configs(configs, &cfg.runs_dir(), cfg.jobs(), |c| work.execute(c))?;
    for o in &outcomes {
        match o {
            Outcome::Resumed(r) | Outcome::Trained(r) => {
                let extra: Vec<String> = r
                    .evaluations
                    .iter()
                    .map(|(k, e)| format!(" {k} {:.4}", e.accuracy))
                    .collect();
                println!(
                    "{}\t{} {:.4}{}\t{}",
                    r.run_id(),
                    cfg.dev_name(),
                    r.result.final_dev_accuracy,
                    extra.concat(),
                    if r.result.converged {
                        "converged"
                    } else {
                        "not converged"
                    }
                );
            }
            Outcome::Failed { run_id, error } => println!("{run_id}\tfailed: {error}"),
        }
    }
    let s = summarize(&outcomes);
    println!(
        "{} trained, {} resumed, {} failed; records in {}",
        s.trained,
        s.resumed,
        s.failed,
        cfg.runs_dir().display()
    );
    if s.failed == outcomes.len() && !outcomes.is_empty() {
        bail!("every run failed");
    }
    Ok(ExitCode::SUCCESS)
}

fn train(cfg: CliConfig) -> Result<ExitCode> {
    let objective = cfg.objective()?;
    let (work, encoder) = load_workload(&cfg)?;
    let config = cfg.run_config(objective, encoder);
    config.validate()?;
    cfg.echo("train")?;
    execute(&cfg, &work, &[config])
}

fn grid(cfg: CliConfig) -> Result<ExitCode> {
    let objective = cfg.objective()?;
    let (work, encoder) = load_workload(&cfg)?;
    let base = cfg.run_config(objective, encoder);
    let seeds = cfg
        .grid_seeds
        .clone()
        .unwrap_or_else(|| DEFAULT_GRID_SEEDS.to_vec());
    let configs = GridSpace::default().configs(&base, &seeds);
    cfg.echo("grid")?;
    execute(&cfg, &work, &configs)
}

/// First sweep seed when none is given, clear of the grid seeds.
pub const DEFAULT_SWEEP_BASE_SEED: u64 = 100;

fn sweep(mut cfg: CliConfig, best_of: Option<&str>) -> Result<ExitCode> {
    let objective = cfg.objective()?;
    if let Some(pattern) = best_of {
        let results: Vec<_> = load_records(pattern)?
            .into_iter()
            .map(|r| r.result)
            .filter(|r| r.config.objective == objective)
            .collect();
        if results.is_empty() {
            bail!("no {objective} records match {pattern:?}");
        }
        let best = select_best(&results)?;
        log::info!(
            "best grid point: lr {:e}, {} epochs, batch {}",
            best.learning_rate,
            best.num_epochs,
            best.batch_size
        );
        cfg.learning_rate = Some(best.learning_rate);
        cfg.epochs = Some(best.num_epochs);
        cfg.batch_size = Some(best.batch_size);
    }
    let (work, encoder) = load_workload(&cfg)?;
    let base_seed = cfg.seed.unwrap_or(DEFAULT_SWEEP_BASE_SEED);
    let config = cfg.run_config(objective, encoder);
    let configs = sweep_configs(&config, cfg.seeds.unwrap_or(20), base_seed)?;
    cfg.echo("sweep")?;
    execute(&cfg, &work, &configs)
}

#[derive(Debug, Serialize)]
struct EvalOutput {
    checkpoint: String,
    dataset: String,
    objective: Objective,
    accuracy: f64,
    correct: usize,
    total: usize,
    ties: usize,
    excluded: usize,
}

fn eval(a: EvalArgs) -> Result<()> {
    let cfg = a.paths.into_config(CliConfig {
        format: a.format,
        ..CliConfig::default()
    })?;
    let ck = Checkpoint::load(&a.checkpoint)?;
    let (model, store) = ck.model()?;
    let objective = ck.objective.expect("model() checked the head");
    let path = cfg.data_path(&a.dataset);
    let data = read_dataset(&path, cfg.format())?;
    let ev = evaluate(&model, &store, &prepare_set(objective, &data, &ck.vocab)?)?;
    println!(
        "{objective} on {}: accuracy {:.4} ({}/{}), {} excluded, {} ties",
        path.display(),
        ev.accuracy,
        ev.correct,
        ev.total,
        ev.excluded,
        ev.ties
    );
    let out = EvalOutput {
        checkpoint: a.checkpoint.display().to_string(),
        dataset: path.display().to_string(),
        objective,
        accuracy: ev.accuracy,
        correct: ev.correct,
        total: ev.total,
        ties: ev.ties,
        excluded: ev.excluded,
    };
    let output = a
        .output
        .unwrap_or_else(|| cfg.output_dir().join(format!("eval_{}.json", stem(&path))));
    if let Some(parent) = output.parent() {
        std::fs::create_dir_all(parent)?;
    }
    let mut bytes = serde_json::to_vec_pretty(&out)?;
    bytes.push(b'\n');
    write_atomic(&output, &bytes)?;
    cfg.echo("eval")?;
    Ok(())
}

fn report(a: ReportArgs) -> Result<()> {
    let cfg = a.paths.into_config(CliConfig {
        dev_name: a.dev_name,
        ..CliConfig::default()
    })?;
    let pattern = a
        .records
        .unwrap_or_else(|| cfg.runs_dir().join("*.json").display().to_string());
    let records = load_records(&pattern)?;
    if records.is_empty() {
        bail!("no run records match {pattern:?}");
    }
    let files = write_report(&records, a.style, &cfg.dev_name(), &cfg.output_dir())?;
    cfg.echo("report")?;
    println!("{} records", records.len());
    for f in files {
        println!("wrote {}", f.display());
    }
    Ok(())
}
