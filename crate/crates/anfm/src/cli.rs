//! Command-line surface. Flags override the config file; every command
//! writes the resolved config into its output directory.

use std::fs;
use std::path::{Path, PathBuf};

use anfm_eval::bench_sampling;
use anfm_graph::datasets::{generate, load_gds, save_gds, save_jsonl, Family};
use anfm_graph::{build_filtration, derive_seed};
use anfm_model::{
    gan_checkpoint, gan_from_checkpoint, model_checkpoint, model_from_checkpoint, trainer_checkpoint,
    trainer_from_checkpoint, AnfmModel, Checkpoint, GanState, ModelError, SampleMode, Trainer,
};
use clap::{Args, Parser, Subcommand};
use serde_json::json;

use crate::pipeline::{empirical_sizes, evaluate, sample_graphs, training_sequences};
use crate::{AnfmError, RunConfig};

#[derive(Debug, Parser)]
#[command(name = "anfm", version, about = "Graph generation from noisy filtration sequences")]
pub struct Cli {
    #[command(flatten)]
    pub common: Common,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct Common {
    /// TOML run configuration.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Global seed; falls back to ANFM_SEED, then to the config file.
    #[arg(long, global = true, env = "ANFM_SEED")]
    pub seed: Option<u64>,
    /// Output directory.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Worker threads; 1 gives bit-stable outputs.
    #[arg(long, global = true)]
    pub threads: Option<usize>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Synthetic datasets.
    Dataset {
        #[command(subcommand)]
        command: DatasetCommand,
    },
    /// Print the filtration sequence of one graph as JSON.
    Filtrate(FiltrateArgs),
    /// Stage I: teacher-forced maximum likelihood on noisy sequences.
    Train(TrainArgs),
    /// Stage II: adversarial fine-tuning from a checkpoint.
    Finetune(FinetuneArgs),
    /// Draw graphs from a checkpoint.
    Sample(SampleArgs),
    /// Score generated graphs against a reference set.
    Eval(EvalArgs),
    /// Time sampling for several step counts.
    Bench(BenchArgs),
}

#[derive(Debug, Subcommand)]
pub enum DatasetCommand {
    /// Write train/val/test splits as GDS1 and JSON lines.
    Gen(GenArgs),
}

#[derive(Debug, Args)]
pub struct GenArgs {
    #[arg(long)]
    pub family: Option<Family>,
    #[arg(long)]
    pub train: Option<usize>,
    #[arg(long)]
    pub val: Option<usize>,
    #[arg(long)]
    pub test: Option<usize>,
}

#[derive(Debug, Args)]
pub struct FiltrateArgs {
    /// GDS1 file holding the graph.
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long, default_value_t = 0)]
    pub index: usize,
    #[arg(long)]
    pub steps: Option<usize>,
    /// Include the edge list of every step.
    #[arg(long)]
    pub edges: bool,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    /// GDS1 training graphs.
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long)]
    pub steps: Option<usize>,
    /// Continue from a stage1 checkpoint.
    #[arg(long)]
    pub resume: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct FinetuneArgs {
    /// GDS1 training graphs.
    #[arg(long)]
    pub data: PathBuf,
    /// Model or stage1 checkpoint to start from, or stage2 checkpoint to resume.
    #[arg(long)]
    pub checkpoint: PathBuf,
    #[arg(long)]
    pub iterations: Option<usize>,
}

#[derive(Debug, Args)]
pub struct SampleArgs {
    #[arg(long)]
    pub checkpoint: PathBuf,
    /// GDS1 training graphs whose sizes are resampled.
    #[arg(long)]
    pub data: Option<PathBuf>,
    #[arg(long)]
    pub count: Option<usize>,
    /// Fixed node count instead of training sizes.
    #[arg(long)]
    pub nodes: Option<usize>,
    #[arg(long)]
    pub mode: Option<String>,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    /// GDS1 generated graphs.
    #[arg(long)]
    pub samples: PathBuf,
    /// GDS1 reference (test) graphs.
    #[arg(long)]
    pub reference: PathBuf,
    /// GDS1 training graphs, for novelty and the baseline.
    #[arg(long)]
    pub train: Option<PathBuf>,
    #[arg(long)]
    pub family: Option<Family>,
}

#[derive(Debug, Args)]
pub struct BenchArgs {
    /// Checkpoint to time; a randomly initialized model from the config otherwise.
    #[arg(long)]
    pub checkpoint: Option<PathBuf>,
    #[arg(long, default_value_t = 16)]
    pub nodes: usize,
    #[arg(long, value_delimiter = ',', default_values_t = [4usize, 8, 16, 32, 64])]
    pub steps: Vec<usize>,
    #[arg(long, default_value_t = 4)]
    pub rollouts: usize,
    #[arg(long, default_value_t = 5)]
    pub reps: usize,
}

fn parse_mode(s: &str) -> Result<SampleMode, AnfmError> {
    match s {
        "stochastic" => Ok(SampleMode::Stochastic),
        "component_mode" | "mode" => Ok(SampleMode::ComponentMode),
        other => Err(AnfmError::Config(format!("--mode: unknown sampling mode '{other}'"))),
    }
}

fn load_graphs(path: &Path) -> Result<Vec<anfm_graph::Graph>, AnfmError> {
    load_gds(path).map_err(|e| AnfmError::Data(format!("{}: {e}", path.display())))
}

fn write_json(path: &Path, value: &impl serde::Serialize) -> Result<(), AnfmError> {
    let text = serde_json::to_string_pretty(value).map_err(|e| AnfmError::Data(e.to_string()))?;
    fs::write(path, text + "\n")?;
    Ok(())
}

fn append_line(path: &Path, value: serde_json::Value) -> Result<(), ModelError> {
    use std::io::Write;
    let mut f = fs::OpenOptions::new()
        .create(true)
        .append(true)
        .open(path)
        .map_err(|e| ModelError::InvalidInput(format!("{}: {e}", path.display())))?;
    writeln!(f, "{value}").map_err(|e| ModelError::InvalidInput(e.to_string()))
}

fn save_checkpoint(ck: &Checkpoint, path: &Path) -> Result<(), ModelError> {
    ck.save(path).map_err(|e| ModelError::InvalidInput(format!("{}: {e}", path.display())))
}

/// Applies the file and the global flags.
pub fn resolve_config(common: &Common) -> Result<RunConfig, AnfmError> {
    let mut config = match &common.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    if let Some(seed) = common.seed {
        config.seed = seed;
    }
    if let Some(out) = &common.out {
        config.output = out.clone();
    }
    Ok(config)
}

pub fn run(cli: Cli) -> Result<(), AnfmError> {
    if let Some(threads) = cli.common.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build_global()
            .map_err(|e| AnfmError::Config(format!("--threads: {e}")))?;
    }
    let mut config = resolve_config(&cli.common)?;
    match cli.command {
        Command::Dataset { command: DatasetCommand::Gen(args) } => {
            let d = &mut config.dataset;
            d.family = args.family.unwrap_or(d.family);
            d.train = args.train.unwrap_or(d.train);
            d.val = args.val.unwrap_or(d.val);
            d.test = args.test.unwrap_or(d.test);
            dataset_gen(&config.resolve()?)
        }
        Command::Filtrate(args) => {
            if let Some(steps) = args.steps {
                config.model.steps = steps;
            }
            filtrate(&config.resolve()?, &args)
        }
        Command::Train(args) => {
            if let Some(steps) = args.steps {
                config.train.steps = steps;
            }
            train(&config.resolve()?, &args)
        }
        Command::Finetune(args) => {
            if let Some(iterations) = args.iterations {
                config.finetune.iterations = iterations;
            }
            finetune(&config.resolve()?, &args)
        }
        Command::Sample(args) => {
            config.eval.samples = args.count.unwrap_or(config.eval.samples);
            config.eval.nodes = args.nodes.or(config.eval.nodes);
            if let Some(mode) = &args.mode {
                config.eval.mode = parse_mode(mode)?;
            }
            sample(&config.resolve()?, &args)
        }
        Command::Eval(args) => {
            config.dataset.family = args.family.unwrap_or(config.dataset.family);
            eval(&config.resolve()?, &args)
        }
        Command::Bench(args) => bench(&config.resolve()?, &args),
    }
}

fn dataset_gen(config: &RunConfig) -> Result<(), AnfmError> {
    let out = &config.output;
    config.write_beside(out)?;
    let data = generate(&config.dataset_spec())?;
    for (name, graphs) in [("train", data.train_graphs()), ("val", data.val_graphs()), ("test", data.test_graphs())] {
        save_gds(&out.join(format!("{name}.gds")), &graphs)?;
        save_jsonl(&out.join(format!("{name}.jsonl")), &graphs)?;
    }
    println!(
        "wrote {} train, {} val, {} test graphs to {}",
        data.train.len(),
        data.val.len(),
        data.test.len(),
        out.display()
    );
    Ok(())
}

fn filtrate(config: &RunConfig, args: &FiltrateArgs) -> Result<(), AnfmError> {
    let graphs = load_graphs(&args.data)?;
    let g = graphs
        .get(args.index)
        .ok_or_else(|| AnfmError::Data(format!("--index {} out of range ({} graphs)", args.index, graphs.len())))?;
    let seq = build_filtration(g, &config.filtration_config()).map_err(|e| AnfmError::Data(e.to_string()))?;
    let mut doc = json!({
        "n": seq.n,
        "steps": seq.steps(),
        "edge_counts": seq.edge_counts(),
        "thresholds": seq.thresholds,
        "ordering": seq.ordering.order(),
    });
    if args.edges {
        doc["edge_sets"] = json!(seq.edge_sets);
    }
    println!("{}", serde_json::to_string(&doc).expect("json"));
    Ok(())
}

fn train(config: &RunConfig, args: &TrainArgs) -> Result<(), AnfmError> {
    let out = config.output.clone();
    config.write_beside(&out)?;
    let graphs = load_graphs(&args.data)?;
    let sequences = training_sequences(config, &graphs)?;
    let mut trainer = match &args.resume {
        Some(path) => {
            let mut t = trainer_from_checkpoint(&Checkpoint::load(path)?)?;
            t.config.steps = config.train.steps;
            t
        }
        None => Trainer::new(AnfmModel::new(config.model.clone())?, config.train.clone())?,
    };
    let log = out.join("train_log.jsonl");
    let ck_path = out.join("stage1.anfm");
    trainer.train(&sequences, |t: &Trainer, r| {
        if r.step % t.config.eval_every == 0 || r.step == t.config.steps {
            append_line(&log, json!({ "step": r.step, "loss": r.loss, "grad_norm": r.grad_norm }))?;
            save_checkpoint(&trainer_checkpoint(t), &ck_path)?;
        }
        Ok(())
    })?;
    save_checkpoint(&trainer_checkpoint(&trainer), &ck_path)?;
    model_checkpoint(&trainer.model).save(&out.join("model.anfm"))?;
    println!("stage I finished at step {}; checkpoint {}", trainer.step, ck_path.display());
    Ok(())
}

fn finetune(config: &RunConfig, args: &FinetuneArgs) -> Result<(), AnfmError> {
    let out = config.output.clone();
    config.write_beside(&out)?;
    let graphs = load_graphs(&args.data)?;
    let ck = Checkpoint::load(&args.checkpoint)?;
    let mut state = if ck.kind()? == "stage2" {
        let mut s = gan_from_checkpoint(&ck)?;
        s.config.iterations = config.finetune.iterations;
        s
    } else {
        GanState::new(model_from_checkpoint(&ck)?, config.finetune.clone())?
    };
    let log = out.join("finetune_log.jsonl");
    let ck_path = out.join("stage2.anfm");
    let every = (config.finetune.iterations / 10).max(1);
    state.run(&graphs, |s: &GanState, r| {
        let last = r.epochs.last();
        append_line(
            &log,
            json!({
                "iteration": r.iteration,
                "mean_reward": r.mean_reward,
                "value_loss": r.value_loss,
                "ppo_loss": last.map(|e| e.loss),
                "clip_fraction": last.map(|e| e.clip_fraction),
                "disc_loss": r.disc.loss,
                "disc_accuracy": r.disc.accuracy,
            }),
        )?;
        if r.iteration % every == 0 {
            save_checkpoint(&gan_checkpoint(s), &ck_path)?;
        }
        Ok(())
    })?;
    save_checkpoint(&gan_checkpoint(&state), &ck_path)?;
    model_checkpoint(&state.generator).save(&out.join("model.anfm"))?;
    println!("stage II finished at iteration {}; checkpoint {}", state.iteration, ck_path.display());
    Ok(())
}

fn sample(config: &RunConfig, args: &SampleArgs) -> Result<(), AnfmError> {
    let out = &config.output;
    config.write_beside(out)?;
    let model = model_from_checkpoint(&Checkpoint::load(&args.checkpoint)?)?;
    let count = config.eval.samples;
    let sizes = match (config.eval.nodes, &args.data) {
        (Some(n), _) => vec![n; count],
        (None, Some(data)) => empirical_sizes(&load_graphs(data)?, count, derive_seed(config.seed, 7))?,
        (None, None) => return Err(AnfmError::Config("sample needs --data for graph sizes or --nodes".into())),
    };
    let (graphs, per_graph) = sample_graphs(&model, &sizes, config.sample_seed(), config.eval.mode)?;
    save_gds(&out.join("samples.gds"), &graphs)?;
    save_jsonl(&out.join("samples.jsonl"), &graphs)?;
    println!("wrote {} graphs to {} ({per_graph:.4} s/graph)", graphs.len(), out.display());
    Ok(())
}

fn eval(config: &RunConfig, args: &EvalArgs) -> Result<(), AnfmError> {
    let out = &config.output;
    config.write_beside(out)?;
    let samples = load_graphs(&args.samples)?;
    let reference = load_graphs(&args.reference)?;
    let train = match &args.train {
        Some(p) => load_graphs(p)?,
        None => Vec::new(),
    };
    let mut report = evaluate(&samples, &reference, &train, config.dataset.family, &config.eval.kinds)?;
    report.seed = Some(config.seed);
    report.settings = serde_json::to_value(config).map_err(|e| AnfmError::Data(e.to_string()))?;
    write_json(&out.join("eval.json"), &report)?;
    for m in &report.mmd {
        println!("{:<10} mmd {:.6e}", m.kind.name(), m.mmd.value);
    }
    if let Some(v) = &report.vun {
        println!(
            "vun {:.4} +- {:.4} (valid {:.4}, unique {:.4}, novel {:.4})",
            v.vun, v.std, v.valid, v.unique, v.novel
        );
    }
    Ok(())
}

fn bench(config: &RunConfig, args: &BenchArgs) -> Result<(), AnfmError> {
    let out = &config.output;
    config.write_beside(out)?;
    let model = match &args.checkpoint {
        Some(p) => model_from_checkpoint(&Checkpoint::load(p)?)?,
        None => AnfmModel::new(config.model.clone())?,
    };
    let rows = bench_sampling(&model, args.nodes, &args.steps, args.rollouts, args.reps, config.seed)?;
    write_json(&out.join("bench.json"), &rows)?;
    for r in &rows {
        println!("T={:<4} n={:<4} {:.6} s/graph (mad {:.2e})", r.steps, r.n, r.median, r.mad);
    }
    Ok(())
}
