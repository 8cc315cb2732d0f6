use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand, ValueEnum};
use serde_json::{json, Value};

use gig_core::data::{
    bench, gen_batch_median_task, gen_clip_direction_task, gen_sum_regression_task, inspect_gsg, load_checkpoint,
    load_dataset, load_split_only, model_dims, parse_sizes, save_checkpoint, save_dataset, split_samples, split_seed,
    train_on_dataset, Config, Split,
};
use gig_core::network::random_network_gradcheck;
use gig_core::training::evaluate;

#[derive(Parser)]
#[command(name = "gig", version, about = "Graph-in-Graph networks on the command line")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum Task {
    BatchMedian,
    ClipDirection,
    SumReg,
}

#[derive(Subcommand)]
enum Command {
    /// Write a synthetic dataset.
    Gen {
        #[arg(long, value_enum)]
        task: Task,
        #[arg(long)]
        out: PathBuf,
        /// Training records; validation and test get half as many each.
        #[arg(long)]
        n: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// batch-median only (default 9).
        #[arg(long)]
        graphs_per_sample: Option<usize>,
        /// clip-direction only (default 8).
        #[arg(long)]
        frames: Option<usize>,
    },
    /// Train on a dataset and save a checkpoint.
    Train {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Overrides the configuration's seed.
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Evaluate a checkpoint on one split.
    Eval {
        #[arg(long)]
        ckpt: PathBuf,
        #[arg(long)]
        data: PathBuf,
        #[arg(long, default_value = "test")]
        split: Split,
    },
    /// Finite-difference check of a small random network.
    Gradcheck {
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 1e-4)]
        tol: f64,
    },
    /// Report how GSG wires each split of a dataset.
    InspectGsg {
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        config: PathBuf,
    },
    /// Time GSG and the network at the given sizes.
    Bench {
        #[arg(long)]
        config: PathBuf,
        /// `I,N,d;I,N,d;...`
        #[arg(long)]
        sizes: String,
    },
}

fn print(v: &Value) -> Result<()> {
    let mut out = std::io::stdout().lock();
    serde_json::to_writer_pretty(&mut out, v)?;
    writeln!(out)?;
    Ok(())
}

fn gen(task: Task, out: &Path, n: usize, seed: u64, graphs_per_sample: Option<usize>, frames: Option<usize>) -> Result<()> {
    let (name, data) = match task {
        Task::BatchMedian => {
            if frames.is_some() {
                bail!("--frames applies to clip-direction only");
            }
            ("batch-median", gen_batch_median_task(n, graphs_per_sample.unwrap_or(9), seed)?)
        }
        Task::ClipDirection => {
            if graphs_per_sample.is_some() {
                bail!("--graphs-per-sample applies to batch-median only");
            }
            ("clip-direction", gen_clip_direction_task(n, frames.unwrap_or(8), seed)?)
        }
        Task::SumReg => {
            if graphs_per_sample.is_some() || frames.is_some() {
                bail!("sum-reg takes neither --graphs-per-sample nor --frames");
            }
            ("sum-reg", gen_sum_regression_task(n, seed)?)
        }
    };
    save_dataset(out, &data).with_context(|| format!("writing {}", out.display()))?;
    print(&json!({ "task": name, "out": out, "seed": seed, "meta": data.meta }))
}

fn train(config: &Path, data_dir: &Path, out: &Path, seed: Option<u64>) -> Result<()> {
    let mut cfg = Config::load(config)?;
    if let Some(s) = seed {
        cfg.seed = s;
    }
    let data = load_dataset(data_dir).with_context(|| format!("loading {}", data_dir.display()))?;
    let run = train_on_dataset(&cfg, &data)?;
    save_checkpoint(out, &run.params, &run.config, run.dims)?;
    let evals: serde_json::Map<String, Value> = run
        .evaluations
        .iter()
        .map(|(s, e)| Ok((s.to_string(), serde_json::to_value(e)?)))
        .collect::<Result<_>>()?;
    print(&json!({
        "checkpoint": out,
        "seed": run.config.seed,
        "readout": run.config.readout,
        "loss": run.loss,
        "parameters": run.params.num_scalars(),
        "gsg_seconds": run.gsg_seconds,
        "train_seconds": run.train_seconds,
        "history": run.history,
        "final": evals,
    }))
}

fn eval(ckpt: &Path, data_dir: &Path, split: Split) -> Result<()> {
    let ck = load_checkpoint(ckpt).with_context(|| format!("loading {}", ckpt.display()))?;
    let net = ck.network()?;
    let (meta, records) = load_split_only(data_dir, split).with_context(|| format!("loading {}", data_dir.display()))?;
    let readout = ck.config.resolve_readout(Some(meta.task_type))?;
    if model_dims(&meta) != ck.dims {
        bail!("dataset dimensions {:?} do not match the checkpoint's {:?}", model_dims(&meta), ck.dims);
    }
    let loss = ck.config.train(readout)?.loss_kind()?;
    let set = split_samples(&ck.config, &meta, &records, readout, split)?;
    let e = evaluate(&net, &ck.params, &set, loss)?;
    print(&json!({ "split": split, "readout": readout, "loss": loss, "evaluation": e }))
}

fn gradcheck(seed: u64, tol: f64) -> Result<bool> {
    let t = Instant::now();
    let report = random_network_gradcheck(seed, tol)?;
    let seconds = t.elapsed().as_secs_f64();
    let failing: Vec<&str> = report.failures().map(|c| c.name.as_str()).collect();
    print(&json!({
        "passed": report.passed(),
        "seed": seed,
        "seconds": seconds,
        "max_rel_error": report.max_rel_error(),
        "max_abs_error": report.max_abs_error(),
        "failing": failing,
        "report": report,
    }))?;
    Ok(report.passed())
}

fn inspect(data_dir: &Path, config: &Path) -> Result<()> {
    let cfg = Config::load(config)?;
    let data = load_dataset(data_dir).with_context(|| format!("loading {}", data_dir.display()))?;
    let gsg = cfg.gsg();
    gsg.validate()?;
    let mut out = serde_json::Map::new();
    for s in Split::ALL {
        let r = inspect_gsg(data.split(s), &data.meta, &gsg, cfg.samples_per_gig, split_seed(cfg.seed, s))?;
        out.insert(s.to_string(), serde_json::to_value(r)?);
    }
    print(&Value::Object(out))
}

fn run(cli: Cli) -> Result<bool> {
    match cli.command {
        Command::Gen {
            task,
            out,
            n,
            seed,
            graphs_per_sample,
            frames,
        } => gen(task, &out, n, seed, graphs_per_sample, frames)?,
        Command::Train { config, data, out, seed } => train(&config, &data, &out, seed)?,
        Command::Eval { ckpt, data, split } => eval(&ckpt, &data, split)?,
        Command::Gradcheck { seed, tol } => return gradcheck(seed, tol),
        Command::InspectGsg { data, config } => inspect(&data, &config)?,
        Command::Bench { config, sizes } => {
            let cfg = Config::load(&config)?;
            print(&serde_json::to_value(bench(&cfg, &parse_sizes(&sizes)?)?)?)?
        }
    }
    Ok(true)
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::FAILURE,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
