//! `dane`: generate synthetic dynamic graphs, train, evaluate and sweep.

mod config;
mod manifest;

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Parser, Subcommand, ValueEnum};
use dane::eval::{eval_link_prediction, eval_node_classification, LinkEvalSplit, MetricsReport};
use dane::graph::{generate_synthetic, load_dynamic_graph, save_dynamic_graph, DynamicGraph, LoadOptions, SyntheticParams};
use dane::training::{fine_tune, train_logged, Model, TrainConfig};
use dane::diffnum::Tensor;

use config::{resolve_config, ConfigFlags};
use manifest::RunManifest;

const LOG_ENV: &str = "DANE_LOG";

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error(transparent)]
    Runtime(#[from] dane::Error),
}

impl From<dane::graph::GraphError> for CliError {
    fn from(e: dane::graph::GraphError) -> Self {
        Self::Runtime(e.into())
    }
}

pub(crate) fn write_file(path: &Path, text: &str) -> Result<(), CliError> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        std::fs::create_dir_all(parent).map_err(|source| io_error(parent, source))?;
    }
    std::fs::write(path, text).map_err(|source| io_error(path, source))
}

fn io_error(path: &Path, source: std::io::Error) -> CliError {
    CliError::Runtime(dane::Error::Io {
        path: path.to_path_buf(),
        source,
    })
}

#[derive(Debug, Parser)]
#[command(name = "dane", version, about = "Dynamic attributed network embedding")]
struct Cli {
    /// Advisory thread count; results do not depend on it
    #[arg(long, global = true, default_value_t = 1)]
    workers: usize,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Format {
    Csv,
    Json,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Write a synthetic dynamic graph dataset
    Generate {
        #[arg(long, default_value_t = 200)]
        nodes: usize,
        #[arg(long, default_value_t = 4)]
        communities: usize,
        #[arg(long, default_value_t = 10)]
        snapshots: usize,
        #[arg(long, default_value_t = 16)]
        attr_dim: usize,
        #[arg(long, default_value_t = 0.1)]
        hub_fraction: f64,
        #[arg(long, default_value_t = 0.2)]
        noise_sigma: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Train a model and write its checkpoint and training log
    Train {
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        #[command(flatten)]
        flags: ConfigFlags,
    },
    /// Fine-tune on a seeded 20% of the final timestamp's new edges
    FineTune {
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        steps: Option<usize>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Dynamic link prediction on the final timestamp
    EvalLink {
        #[command(flatten)]
        eval: EvalArgs,
    },
    /// Classify nodes whose label changes at the final timestamp
    EvalNode {
        #[command(flatten)]
        eval: EvalArgs,
    },
    /// Train and evaluate once per value of one hyperparameter
    Sweep {
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// L, K, d or R
        #[arg(long)]
        param: String,
        #[arg(long, value_delimiter = ',', required = true)]
        values: Vec<usize>,
        #[arg(long, default_value = "roc_auc")]
        metric: String,
        #[arg(long, default_value_t = 10)]
        repeats: usize,
        #[arg(long)]
        seed: Option<u64>,
        #[command(flatten)]
        flags: ConfigFlags,
    },
    /// Write per-layer embeddings as CSV
    DumpEmbeddings {
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Only this timestamp (default: all); with --predicted, the window end (default n−1)
        #[arg(long)]
        timestamp: Option<usize>,
        /// Dump predictions for the next timestamp instead of snapshot embeddings
        #[arg(long)]
        predicted: bool,
    },
}

#[derive(Debug, clap::Args)]
struct EvalArgs {
    #[arg(long)]
    data: PathBuf,
    #[arg(long)]
    model: PathBuf,
    #[arg(long, default_value_t = 10)]
    repeats: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, value_enum, default_value_t = Format::Csv)]
    format: Format,
    /// Directory for the report and its manifest; the report is printed either way
    #[arg(long)]
    out: Option<PathBuf>,
}

fn load_graph(dir: &Path) -> Result<DynamicGraph, CliError> {
    if !dir.is_dir() {
        return Err(CliError::Usage(format!("dataset directory {} does not exist", dir.display())));
    }
    Ok(load_dynamic_graph(dir, LoadOptions::default())?)
}

/// A checkpoint file, or a directory holding `model.json`.
fn load_model(path: &Path) -> Result<Model, CliError> {
    let file = if path.is_dir() { path.join("model.json") } else { path.to_path_buf() };
    if !file.is_file() {
        return Err(CliError::Usage(format!("model checkpoint {} does not exist", file.display())));
    }
    Ok(Model::load(&file)?)
}

fn render(report: &MetricsReport, format: Format) -> String {
    match format {
        Format::Csv => report.to_csv(),
        Format::Json => report.to_json(),
    }
}

fn embeddings_csv(rows: &[(usize, usize, &Tensor)], predicted: bool) -> String {
    let dim = rows.first().map_or(0, |r| r.2.cols());
    let mut out = String::from("node,timestamp,layer");
    for k in 0..dim {
        write!(out, ",dim{k}").unwrap();
    }
    out.push_str(if predicted { ",predicted\n" } else { "\n" });
    for &(timestamp, layer, tensor) in rows {
        for v in 0..tensor.rows() {
            write!(out, "{v},{timestamp},{layer}").unwrap();
            for x in tensor.row(v) {
                write!(out, ",{x:?}").unwrap();
            }
            out.push_str(if predicted { ",1\n" } else { "\n" });
        }
    }
    out
}

fn run(cli: Cli) -> Result<(), CliError> {
    let start = Instant::now();
    let workers = cli.workers;
    if workers == 0 {
        return Err(CliError::Usage("--workers must be positive".into()));
    }
    match cli.command {
        Command::Generate {
            nodes,
            communities,
            snapshots,
            attr_dim,
            hub_fraction,
            noise_sigma,
            seed,
            out,
        } => {
            let params = SyntheticParams {
                num_nodes: nodes,
                num_communities: communities,
                num_snapshots: snapshots,
                attr_dim,
                hub_fraction,
                noise_sigma,
            };
            let g = generate_synthetic(&params, seed).map_err(|e| CliError::Usage(e.to_string()))?;
            save_dynamic_graph(&g, &out)?;
            let mut manifest = RunManifest::new("generate", &params, seed, workers);
            manifest.output("dataset", &out);
            finish(manifest, start, &out.join("manifest.json"))
        }
        Command::Train { data, out, seed, flags } => {
            let cfg = resolve_config(flags.config.as_deref(), &flags, seed)?;
            let g = load_graph(&data)?;
            let mut log = String::from("epoch,mean_loss,wall_ms\n");
            let model = train_logged(&g, &cfg, |e| {
                log::info!("epoch {} loss {:.6}", e.epoch, e.mean_loss);
                writeln!(log, "{},{:?},{}", e.epoch, e.mean_loss, e.wall_ms).unwrap();
            })?;
            let (ckpt, log_path) = (out.join("model.json"), out.join("training_log.csv"));
            write_file(&ckpt, &model.to_json())?;
            write_file(&log_path, &log)?;
            let mut manifest = RunManifest::new("train", &cfg, cfg.seed, workers).input("data", &data);
            manifest.output("checkpoint", &ckpt);
            manifest.output("training_log", &log_path);
            finish(manifest, start, &out.join("manifest.json"))
        }
        Command::FineTune {
            data,
            model,
            out,
            steps,
            seed,
        } => {
            let g = load_graph(&data)?;
            let base = load_model(&model)?;
            let split = LinkEvalSplit::draw(&g, seed)?;
            let steps = steps.unwrap_or(base.config.fine_tune_steps);
            let tuned = fine_tune(&base, &g, &split.fine_tune_edges, steps, seed)?;
            if tuned.skipped {
                log::warn!("no revealed edges; model unchanged");
            }
            let ckpt = out.join("model.json");
            write_file(&ckpt, &tuned.model.to_json())?;
            let config = serde_json::json!({ "steps": steps, "revealed_edges": split.fine_tune_edges.len() });
            let mut manifest = RunManifest::new("fine-tune", config, seed, workers)
                .input("data", &data)
                .input("model", &model);
            manifest.output("checkpoint", &ckpt);
            finish(manifest, start, &out.join("manifest.json"))
        }
        Command::EvalLink { eval } => evaluate("eval-link", eval, workers, start, eval_link_prediction),
        Command::EvalNode { eval } => evaluate("eval-node", eval, workers, start, eval_node_classification),
        Command::Sweep {
            data,
            out,
            param,
            values,
            metric,
            repeats,
            seed,
            flags,
        } => {
            let base = resolve_config(flags.config.as_deref(), &flags, seed)?;
            if !["roc_auc", "pr_auc", "f1", "weighted_f1"].contains(&metric.as_str()) {
                return Err(CliError::Usage(format!("unknown metric {metric:?}")));
            }
            let configs = values
                .iter()
                .map(|&v| {
                    let mut cfg = base.clone();
                    match param.as_str() {
                        "L" | "layers" => cfg.layers = v,
                        "K" | "lookback" => cfg.lookback = v,
                        "d" | "dim" => cfg.dim = v,
                        "R" | "negatives" => cfg.negatives = v,
                        other => return Err(CliError::Usage(format!("cannot sweep {other:?}; use L, K, d or R"))),
                    }
                    cfg.validate().map_err(|e| CliError::Usage(e.to_string()))?;
                    Ok(cfg)
                })
                .collect::<Result<Vec<TrainConfig>, CliError>>()?;
            let g = load_graph(&data)?;
            let mut csv = String::from("param,value,metric,mean,std,repeats\n");
            for (value, cfg) in values.iter().zip(&configs) {
                let model = train_logged(&g, cfg, |_| {})?;
                let report = if metric == "weighted_f1" {
                    eval_node_classification(&g, &model, repeats, cfg.seed)?
                } else {
                    eval_link_prediction(&g, &model, repeats, cfg.seed)?
                };
                let m = report.get(&metric).expect("metric present");
                log::info!("{param}={value}: {metric} {:.4}", m.mean);
                writeln!(csv, "{param},{value},{metric},{:?},{:?},{}", m.mean, m.std, m.values.len()).unwrap();
            }
            print!("{csv}");
            let path = out.join("sweep.csv");
            write_file(&path, &csv)?;
            let config = serde_json::json!({ "base": base, "param": param, "values": values, "metric": metric, "repeats": repeats });
            let mut manifest = RunManifest::new("sweep", config, base.seed, workers).input("data", &data);
            manifest.output("sweep", &path);
            finish(manifest, start, &out.join("manifest.json"))
        }
        Command::DumpEmbeddings {
            data,
            model,
            out,
            timestamp,
            predicted,
        } => {
            let g = load_graph(&data)?;
            let m = load_model(&model)?;
            let n = g.num_timestamps();
            let csv = if predicted {
                let t = timestamp.unwrap_or(n - 1);
                let pred = m.predict_detailed(&g, t)?;
                // merged prediction as layer 0, per-layer extrapolations as 1..=L
                let mut rows = vec![(t + 1, 0, &pred.merged)];
                rows.extend(pred.per_layer.iter().enumerate().map(|(l, x)| (t + 1, l + 1, x)));
                embeddings_csv(&rows, true)
            } else {
                let ts: Vec<usize> = timestamp.map_or_else(|| (1..=n).collect(), |t| vec![t]);
                let layers = ts.iter().map(|&t| m.embed(&g, t)).collect::<Result<Vec<_>, _>>()?;
                let rows: Vec<_> = layers
                    .iter()
                    .flat_map(|e| e.x.iter().enumerate().map(move |(l, x)| (e.timestamp, l, x)))
                    .collect();
                embeddings_csv(&rows, false)
            };
            write_file(&out, &csv)?;
            let config = serde_json::json!({ "timestamp": timestamp, "predicted": predicted });
            let mut manifest = RunManifest::new("dump-embeddings", config, m.config.seed, workers)
                .input("data", &data)
                .input("model", &model);
            manifest.output("embeddings", &out);
            finish(manifest, start, &sidecar(&out))
        }
    }
}

fn sidecar(out: &Path) -> PathBuf {
    let mut name = out.file_name().unwrap_or_default().to_os_string();
    name.push(".manifest.json");
    out.with_file_name(name)
}

fn evaluate(
    command: &str,
    args: EvalArgs,
    workers: usize,
    start: Instant,
    eval: fn(&DynamicGraph, &Model, usize, u64) -> Result<MetricsReport, dane::Error>,
) -> Result<(), CliError> {
    if args.repeats == 0 {
        return Err(CliError::Usage("--repeats must be positive".into()));
    }
    let g = load_graph(&args.data)?;
    let model = load_model(&args.model)?;
    let report = render(&eval(&g, &model, args.repeats, args.seed)?, args.format);
    print!("{report}");
    if let Some(dir) = args.out {
        let ext = match args.format {
            Format::Csv => "csv",
            Format::Json => "json",
        };
        let path = dir.join(format!("report.{ext}"));
        write_file(&path, &report)?;
        let config = serde_json::json!({ "repeats": args.repeats, "model_config": model.config });
        let mut manifest = RunManifest::new(command, config, args.seed, workers)
            .input("data", &args.data)
            .input("model", &args.model);
        manifest.output("report", &path);
        finish(manifest, start, &dir.join("manifest.json"))?;
    }
    Ok(())
}

fn finish(mut manifest: RunManifest, start: Instant, path: &Path) -> Result<(), CliError> {
    manifest.wall_ms = start.elapsed().as_millis();
    manifest.write(path)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or(LOG_ENV, "warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(match e {
                CliError::Usage(_) => 2,
                CliError::Runtime(_) => 1,
            })
        }
    }
}
