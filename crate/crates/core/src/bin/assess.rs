use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use log::warn;

use svassess::corpus::Site;
use svassess::eval::{Policy, Protocol};
use svassess::pipeline::{self, AssessModel, Granularity, Manifest, PipelineConfig};
use svassess::{Error, Result};

#[derive(Parser)]
#[command(name = "assess", version, about = "Software vulnerability assessment pipelines")]
struct Cli {
    #[command(flatten)]
    common: Common,
    #[command(subcommand)]
    command: Command,
}

/// Overrides for the JSON config; a flag always wins.
#[derive(Args)]
struct Common {
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[arg(long, global = true)]
    dataset: Option<PathBuf>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[arg(long, global = true)]
    workers: Option<usize>,
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[arg(long, global = true)]
    granularity: Option<String>,
    #[arg(long, global = true)]
    mode: Option<String>,
    #[arg(long, global = true)]
    protocol: Option<String>,
    #[arg(long, global = true)]
    policy: Option<String>,
}

#[derive(Subcommand)]
enum Command {
    /// Validate a dataset and write its normalized form
    Ingest,
    /// Fit the first feature extractor and write transformed rows
    Featurize,
    /// Grid search per task, test predictions and a deployable model
    Train,
    /// Score the test predictions of a training run in --out
    Evaluate,
    /// Predict the labels of one description or record
    Assess {
        #[arg(long)]
        model: PathBuf,
        #[arg(long, conflicts_with = "record")]
        text: Option<String>,
        /// File holding one JSON record
        #[arg(long)]
        record: Option<PathBuf>,
    },
    /// New terms per year and coverage of later years
    Drift {
        #[arg(long)]
        from_year: Option<i32>,
    },
    /// Write the function-level inputs of the configured mode
    Context,
    /// Security post mining
    Mine {
        #[command(subcommand)]
        stage: Mine,
    },
    /// Finite-difference check of the network gradients on a toy config
    Gradcheck {
        #[arg(long, default_value_t = 1e-4)]
        tolerance: f64,
    },
}

#[derive(Subcommand)]
enum Mine {
    /// Keyword-based content filter
    Filter {
        #[arg(long)]
        posts: PathBuf,
        /// SO or SSE
        #[arg(long)]
        site: String,
        #[arg(long, default_value_t = 1)]
        step: usize,
        #[arg(long)]
        keywords: Option<PathBuf>,
    },
    /// Positive-unlabeled learning over post embeddings
    Pu {
        #[arg(long)]
        posts: PathBuf,
        #[arg(long, default_value_t = 1.0)]
        alpha: f64,
        #[arg(long, default_value_t = 50)]
        dims: usize,
    },
    /// Topic shares from a document-topic matrix
    Topics {
        #[arg(long)]
        theta: PathBuf,
    },
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::Ingest => "ingest",
            Command::Featurize => "featurize",
            Command::Train => "train",
            Command::Evaluate => "evaluate",
            Command::Assess { .. } => "assess",
            Command::Drift { .. } => "drift",
            Command::Context => "context",
            Command::Mine { stage: Mine::Filter { .. } } => "mine filter",
            Command::Mine { stage: Mine::Pu { .. } } => "mine pu",
            Command::Mine { stage: Mine::Topics { .. } } => "mine topics",
            Command::Gradcheck { .. } => "gradcheck",
        }
    }
}

fn build_config(c: &Common) -> Result<PipelineConfig> {
    let mut config = match &c.config {
        Some(p) => PipelineConfig::load(p)?,
        None => PipelineConfig::default(),
    };
    if let Some(d) = &c.dataset {
        config.dataset = Some(d.clone());
    }
    if let Some(s) = c.seed {
        config.seed = s;
    }
    if let Some(w) = c.workers {
        config.workers = w;
    }
    if let Some(o) = &c.out {
        config.out = o.clone();
    }
    if let Some(g) = &c.granularity {
        config.granularity = Granularity::parse(g)?;
    }
    if let Some(m) = &c.mode {
        config.mode = m.clone();
    }
    if let Some(p) = &c.protocol {
        config.protocol = Protocol::parse(p)?;
    }
    if let Some(p) = &c.policy {
        config.policy = Policy::parse(p)?;
    }
    config.validate()?;
    Ok(config)
}

fn run(command: &Command, config: &PipelineConfig) -> Result<String> {
    Ok(match command {
        Command::Ingest => {
            let s = pipeline::ingest(config)?;
            format!("ingested {} records", s.records)
        }
        Command::Featurize => format!("{} features", pipeline::featurize(config)?),
        Command::Train => {
            let s = pipeline::train(config)?;
            let mut out = format!(
                "{} development / {} test records, {} splits\n",
                s.development, s.test, s.splits
            );
            for t in &s.tasks {
                out.push_str(&format!("{:<18} {}\n", t.task, t.selected));
            }
            out
        }
        Command::Evaluate => pipeline::render_report(&pipeline::evaluate(&config.out)?),
        Command::Assess { model, text, record } => {
            let model = AssessModel::load(model)?;
            let labels = match (text, record) {
                (Some(t), _) => pipeline::assess_text(&model, t)?,
                (None, Some(r)) => {
                    let json = std::fs::read_to_string(r).map_err(|e| Error::Io {
                        path: r.clone(),
                        source: e,
                    })?;
                    model.predict_record(&json)?
                }
                (None, None) => return Err(Error::Config("assess needs --text or --record".into())),
            };
            let json = serde_json::to_string_pretty(&labels)?;
            std::fs::create_dir_all(&config.out).map_err(|e| Error::Output {
                path: config.out.clone(),
                source: e,
            })?;
            let path = config.out.join("assessment.json");
            std::fs::write(&path, format!("{json}\n")).map_err(|e| Error::Output { path, source: e })?;
            json
        }
        Command::Drift { from_year } => pipeline::drift(config, *from_year)?.to_table(),
        Command::Context => format!("wrote inputs of {} functions", pipeline::context(config)?),
        Command::Mine { stage } => match stage {
            Mine::Filter {
                posts,
                site,
                step,
                keywords,
            } => {
                let site = Site::parse(site)
                    .ok_or_else(|| Error::Config(format!("unknown site `{site}` (SO or SSE)")))?;
                let kept = pipeline::mine_filter(posts, site, *step, keywords.as_deref(), &config.out)?;
                format!("kept {kept} posts")
            }
            Mine::Pu { posts, alpha, dims } => {
                let s = pipeline::mine_pu(posts, *alpha, *dims, config.seed, &config.out)?;
                format!(
                    "{} positives, {} unlabeled, {} reliable negatives, {} unlabeled predicted positive",
                    s.positives,
                    s.unlabeled,
                    s.reliable_negatives,
                    s.predicted_positive.len()
                )
            }
            Mine::Topics { theta } => {
                let shares = pipeline::mine_topics(theta, &config.out)?;
                shares
                    .iter()
                    .enumerate()
                    .map(|(k, s)| format!("topic {k}: {s:.4}"))
                    .collect::<Vec<_>>()
                    .join("\n")
            }
        },
        Command::Gradcheck { tolerance } => {
            let checks = pipeline::gradcheck_toy(config.seed, *tolerance, &config.out)?;
            checks
                .iter()
                .map(|c| format!("{:<20} {:>6} {:.3e}", c.name, c.entries, c.max_rel_error))
                .collect::<Vec<_>>()
                .join("\n")
        }
    })
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().filter_or("ASSESS_LOG", "warn")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    let config = match build_config(&cli.common) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(1);
        }
    };
    if config.workers > 0 {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(config.workers).build_global() {
            warn!("worker pool: {e}");
        }
    }
    let result = run(&cli.command, &config);
    let manifest = Manifest::new(cli.command.name(), &config, result.as_ref().map(|_| ()));
    if let Err(e) = manifest.write(&config.out) {
        eprintln!("error: {e}");
    }
    match result {
        Ok(text) => {
            println!("{}", text.trim_end());
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_validation() { 1 } else { 2 })
        }
    }
}
