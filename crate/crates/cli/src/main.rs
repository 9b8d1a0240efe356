//! `grasp`: generate datasets, train, evaluate, decode images and plot runs.

mod settings;

use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand};
use grasp_core::datagen::{read_dump, write_dump, Generator};
use grasp_core::graph::text::{read_graph, write_graph};
use grasp_core::{seed, RasterImage};
use grasp_neural::Checkpoint;
use grasp_train::decode::{greedy_decode, Decoded};
use grasp_train::eval::HeldOut;
use grasp_train::metrics::read_metrics;
use grasp_train::trainer::read_header;
use grasp_train::{evaluate, ExperimentConfig, ModelScorer, OracleScorer, Progress, Scorer, SplitMetrics, Trainer};

use settings::{env_overrides, resolve, Layers};

#[derive(Parser)]
#[command(name = "grasp", version, about = "Recognize colored graphs in images by greedy successor selection")]
struct Cli {
    /// TOML experiment file; missing keys take their defaults.
    #[arg(long, global = true, env = "GRASP_CONFIG")]
    config: Option<PathBuf>,
    #[arg(long, global = true, env = "GRASP_SEED")]
    seed: Option<u64>,
    /// Output directory, overriding `out_dir`.
    #[arg(long, global = true, env = "GRASP_OUT")]
    out: Option<PathBuf>,
    /// Extra `section.key=value` overrides, applied after the environment.
    #[arg(long = "set", global = true, value_name = "KEY=VALUE")]
    sets: Vec<String>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Print the resolved experiment configuration.
    Config,
    /// Write sample groups to disk and verify their labels on reload.
    Gen {
        #[arg(long, default_value_t = 1)]
        count: u64,
    },
    /// Train a model, writing metrics, evaluations and checkpoints.
    Train {
        /// Continue from `<out>/checkpoint.bin`.
        #[arg(long)]
        resume: bool,
        /// Print a progress line every this many steps (0 disables them).
        #[arg(long, default_value_t = 20)]
        log_every: u64,
    },
    /// Evaluate a checkpoint on fixed in-distribution and larger targets.
    Eval {
        checkpoint: PathBuf,
    },
    /// Recognize the graph in a PNG or PPM image.
    Decode {
        image: PathBuf,
        /// Model checkpoint; omit together with `--oracle`.
        #[arg(long)]
        checkpoint: Option<PathBuf>,
        /// Target graph file; the episode is judged against it.
        #[arg(long)]
        target: Option<PathBuf>,
        /// Score with the exact subgraph oracle instead of a model.
        #[arg(long, requires = "target")]
        oracle: bool,
    },
    /// Render learning curves from a metrics CSV to SVG.
    Plot {
        metrics: PathBuf,
        /// Defaults to the metrics path with an `.svg` extension.
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// Render one target graph image for the configured task.
    Render {
        /// Index of the target within the seed's sequence.
        #[arg(long, default_value_t = 0)]
        index: u64,
    },
}

fn main() -> Result<()> {
    let cli = Cli::parse();
    match &cli.command {
        Command::Config => {
            print!("{}", config(&cli, toml::Table::new())?.to_toml());
            Ok(())
        }
        Command::Gen { count } => gen(&config(&cli, toml::Table::new())?, *count),
        Command::Train { resume, log_every } => train(&cli, *resume, *log_every),
        Command::Eval { checkpoint } => eval(&cli, checkpoint),
        Command::Decode {
            image,
            checkpoint,
            target,
            oracle,
        } => decode(&cli, image, checkpoint.as_deref(), target.as_deref(), *oracle),
        Command::Plot { metrics, output } => plot(metrics, output.as_deref()),
        Command::Render { index } => render(&config(&cli, toml::Table::new())?, *index),
    }
}

fn config(cli: &Cli, base: toml::Table) -> Result<ExperimentConfig> {
    let layers = Layers {
        file: cli.config.as_deref(),
        env: env_overrides(std::env::vars()),
        sets: &cli.sets,
        seed: cli.seed,
        out: cli.out.as_deref(),
    };
    resolve(base, &layers)
}

/// Config of a training checkpoint as the base layer, or defaults for
/// checkpoints holding only a model.
fn checkpoint_config(cli: &Cli, ck: &Checkpoint) -> Result<ExperimentConfig> {
    let base = match read_header(&ck.header) {
        Ok((c, _)) => toml::from_str(&c.to_toml())?,
        Err(_) => {
            let mut t = toml::Table::new();
            t.insert("model".into(), toml::Value::try_from(ck.model_config()?)?);
            t
        }
    };
    config(cli, base)
}

fn generator(config: &ExperimentConfig) -> Result<Generator> {
    Ok(Generator::new(config.task.clone(), config.render.clone(), config.datagen.clone())?)
}

fn gen(config: &ExperimentConfig, count: u64) -> Result<()> {
    let generator = generator(config)?;
    let dir = config.out_dir.join("data");
    std::fs::create_dir_all(&dir).with_context(|| format!("creating {}", dir.display()))?;
    config.save(&dir.join("config.toml"))?;
    let master = seed::derive_tagged(config.seed, "gen");
    let (mut positives, mut negatives) = (0, 0);
    for i in 0..count {
        let group = generator.group_at(master, i)?;
        let gdir = write_dump(&dir, &group, config.task.colors())?;
        let back = read_dump(&gdir)?;
        let wrong = back.mislabeled();
        if !wrong.is_empty() {
            bail!("{}: triplets {wrong:?} fail the oracle check", gdir.display());
        }
        positives += group.positives.len();
        negatives += group.negatives.len();
    }
    println!(
        "wrote {count} groups ({positives} positive, {negatives} negative triplets) to {}; labels verified",
        dir.display()
    );
    Ok(())
}

fn train(cli: &Cli, resume: bool, log_every: u64) -> Result<()> {
    let mut trainer = if resume {
        let dir = match &cli.out {
            Some(d) => d.clone(),
            None => config(cli, toml::Table::new())?.out_dir,
        };
        let path = dir.join("checkpoint.bin");
        let ck = Checkpoint::load(&path).with_context(|| format!("loading {}", path.display()))?;
        let t = Trainer::resume_with(&ck, checkpoint_config(cli, &ck)?)?;
        eprintln!("resuming at {} samples", t.state().samples);
        t
    } else {
        Trainer::new(config(cli, toml::Table::new())?)?
    };
    let out = trainer.config().out_dir.clone();
    eprintln!(
        "model has {} parameters; writing to {}",
        trainer.model().param_count(),
        out.display()
    );
    let mut steps = 0u64;
    trainer.run(&out, |p| match p {
        Progress::Step(s) => {
            steps += 1;
            if log_every > 0 && steps % log_every == 0 {
                eprintln!(
                    "samples {:>9}  loss {:.4}  grad {:.3}  logits +{:.2} / {:.2}  lr {:.2e}",
                    s.samples, s.loss, s.grad_norm, s.pos_logit_mean, s.neg_logit_mean, s.lr
                );
            }
        }
        Progress::Eval(r) => {
            println!(
                "eval @ {:>9}  acc {:.3}  len {:.2}  topk {:.3}  ood {:.3}  transition {:.3}",
                r.samples,
                r.metrics.in_dist.accuracy,
                r.metrics.in_dist.mean_length,
                r.metrics.in_dist.topk,
                r.metrics.ood.accuracy,
                r.transition_accuracy
            );
        }
    })?;
    Ok(())
}

fn print_split(name: &str, size: String, m: &SplitMetrics) {
    println!("[{name}]");
    println!("sizes = {size}");
    println!("episodes = {}", m.episodes);
    println!("accuracy = {:.4}", m.accuracy);
    println!("mean_length = {:.4}", m.mean_length);
    println!("topk = {:.4}", m.topk);
    println!("decision_points = {}", m.decision_points);
}

fn eval(cli: &Cli, path: &Path) -> Result<()> {
    let ck = Checkpoint::load(path).with_context(|| format!("loading {}", path.display()))?;
    let config = checkpoint_config(cli, &ck)?;
    let model = grasp_neural::Model::new(config.model.clone())?;
    let params = ck.params(&model, "param")?;
    let scorer = ModelScorer::new(&model, &params);
    let m = evaluate(&scorer, &config)?;
    let held_out = HeldOut::generate(&config, config.eval.transition_samples)?;
    print_split(
        "in_distribution",
        format!("{}..={}", config.task.min_nodes, config.task.max_nodes),
        &m.in_dist,
    );
    print_split("out_of_distribution", config.ood_size().to_string(), &m.ood);
    println!("[transitions]");
    println!("samples = {}", held_out.items.len());
    println!("accuracy = {:.4}", held_out.accuracy(&model, &params, 256)?);
    Ok(())
}

fn decode(cli: &Cli, image: &Path, checkpoint: Option<&Path>, target: Option<&Path>, oracle: bool) -> Result<()> {
    let img = RasterImage::read(image).with_context(|| format!("reading {}", image.display()))?;
    let target = match target {
        Some(p) => Some(read_graph(&std::fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?)?.0),
        None => None,
    };
    let loaded = match checkpoint {
        Some(p) => Some(Checkpoint::load(p).with_context(|| format!("loading {}", p.display()))?),
        None if oracle => None,
        None => bail!("decode needs --checkpoint unless --oracle is given"),
    };
    let config = match &loaded {
        Some(ck) => checkpoint_config(cli, ck)?,
        None => config(cli, toml::Table::new())?,
    };
    let start_seed = seed::derive_tagged(config.seed, "decode");
    let decoded = if oracle {
        greedy_decode(&img, &OracleScorer, &config.task, target.as_ref(), start_seed)?
    } else {
        let ck = loaded.as_ref().expect("checked above");
        let model = grasp_neural::Model::new(config.model.clone())?;
        let params = ck.params(&model, "param")?;
        let scorer: &dyn Scorer = &ModelScorer::new(&model, &params);
        greedy_decode(&img, scorer, &config.task, target.as_ref(), start_seed)?
    };
    report(&decoded, &config);
    Ok(())
}

fn report(d: &Decoded, config: &ExperimentConfig) {
    for (i, step) in d.record.steps.iter().enumerate() {
        let judged = match step.chosen_valid {
            Some(true) => " valid",
            Some(false) => " invalid",
            None => "",
        };
        println!(
            "step {i}: {} candidates, chose #{} {:?}{judged}",
            step.candidates, step.chosen, step.modification
        );
        let scores: Vec<String> = step.scores.iter().map(|s| format!("{s:.4}")).collect();
        println!("  scores {}", scores.join(" "));
    }
    if let Some(o) = d.record.outcome {
        println!(
            "outcome: success={} aborted_invalid={} truncated={} length={}",
            o.success, o.aborted_invalid, o.truncated, o.length
        );
    }
    print!("{}", write_graph(&d.graph, config.task.colors()));
}

fn plot(metrics: &Path, output: Option<&Path>) -> Result<()> {
    let rows = read_metrics(metrics).with_context(|| format!("reading {}", metrics.display()))?;
    let out = output.map(Path::to_path_buf).unwrap_or_else(|| metrics.with_extension("svg"));
    std::fs::write(&out, grasp_train::plot::render_svg(&rows)).with_context(|| format!("writing {}", out.display()))?;
    println!("{} rows plotted to {}", rows.len(), out.display());
    Ok(())
}

fn render(config: &ExperimentConfig, index: u64) -> Result<()> {
    let generator = generator(config)?;
    let s = seed::derive(seed::derive_tagged(config.seed, "render"), index);
    let (target, image) = generator.target_and_image(s)?;
    std::fs::create_dir_all(&config.out_dir)?;
    let (g, p) = (
        config.out_dir.join(format!("target_{index}.g")),
        config.out_dir.join(format!("target_{index}.png")),
    );
    std::fs::write(&g, write_graph(&target, config.task.colors()))?;
    image.write_png(&p)?;
    println!("{}\n{}", g.display(), p.display());
    Ok(())
}
