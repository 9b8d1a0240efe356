//! The training loop: stream groups into the replay buffers, sample
//! balanced batches, step the optimizer, evaluate on a fixed cadence.

use std::path::Path;
use std::sync::Arc;

use grasp_core::buffers::{BatchItem, DualBuffer};
use grasp_core::datagen::{Generator, GroupStream};
use grasp_core::seed;
use grasp_neural::{clip_gradients, Checkpoint, Model, ParamSet, RAdam, Sample};
use serde::{Deserialize, Serialize};

use crate::config::ExperimentConfig;
use crate::decode::ModelScorer;
use crate::eval::{evaluate, EvalMetrics, HeldOut};
use crate::metrics::{CsvLog, EvalRow, MetricsRow};
use crate::TrainError;

/// Counters that, together with the config, determine the rest of a run.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TrainState {
    pub step: u64,
    pub samples: u64,
    /// Groups consumed from the stream so far.
    pub groups: u64,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct StepStats {
    pub samples: u64,
    pub loss: f64,
    /// Global gradient norm before clipping.
    pub grad_norm: f64,
    pub pos_logit_mean: f64,
    pub neg_logit_mean: f64,
    pub lr: f64,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EvalReport {
    pub samples: u64,
    pub metrics: EvalMetrics,
    /// Accuracy of single transitions on balanced held-out triplets.
    pub transition_accuracy: f64,
}

pub enum Progress<'a> {
    Step(&'a StepStats),
    Eval(&'a EvalReport),
}

pub struct Trainer {
    config: ExperimentConfig,
    generator: Arc<Generator>,
    model: Model,
    params: ParamSet<f32>,
    opt: RAdam<f32>,
    buffer: DualBuffer,
    stream: GroupStream,
    samples: u64,
    held_out: Option<HeldOut>,
}

fn stream_master(config: &ExperimentConfig) -> u64 {
    seed::derive_tagged(config.seed, "train")
}

impl Trainer {
    /// A fresh run with the buffers filled to the warmup fraction.
    pub fn new(config: ExperimentConfig) -> Result<Self, TrainError> {
        config.validate()?;
        let model = Model::new(config.model.clone())?;
        let params = model.init(&mut seed::rng(seed::derive_tagged(config.seed, "init")));
        let opt = RAdam::new(config.optimizer, &params);
        let mut t = Self::assemble(config, model, params, opt, 0, 0)?;
        while !t.buffer.is_warm(t.config.train.warmup_fraction) {
            let g = t.stream.next_group();
            t.buffer.push_group(&g)?;
        }
        Ok(t)
    }

    /// Continues the run stored in `ck`. The buffers are rebuilt from the
    /// stream, which is a pure function of the group index.
    pub fn resume(ck: &Checkpoint) -> Result<Self, TrainError> {
        let (config, _) = read_header(&ck.header)?;
        Self::resume_with(ck, config)
    }

    /// Like [`Trainer::resume`] with an edited config. Only settings that
    /// leave the past of the run intact may differ: sample budget,
    /// evaluation cadence and size, worker count and output directory.
    pub fn resume_with(ck: &Checkpoint, config: ExperimentConfig) -> Result<Self, TrainError> {
        let (stored, state) = read_header(&ck.header)?;
        config.validate()?;
        let comparable = |c: &ExperimentConfig| {
            let mut c = c.clone();
            c.out_dir = Default::default();
            c.eval = Default::default();
            c.train.total_samples = 0;
            c.train.eval_every = 1;
            c.train.workers = 1;
            c
        };
        if comparable(&stored) != comparable(&config) {
            return Err(TrainError::Config(
                "resuming may only change the sample budget, evaluation settings, workers and output directory".into(),
            ));
        }
        let model = Model::new(config.model.clone())?;
        let params = ck.params(&model, "param")?;
        let mut opt = RAdam::new(config.optimizer, &params);
        opt.m = ck.params(&model, "m")?.tensors().iter().map(|t| t.data.clone()).collect();
        opt.v = ck.params(&model, "v")?.tensors().iter().map(|t| t.data.clone()).collect();
        opt.step = state.step;
        let mut t = Self::assemble(config, model, params, opt, state.samples, state.groups)?;
        let cap = t.config.train.buffer_capacity as u64;
        let master = stream_master(&t.config);
        for index in state.groups.saturating_sub(cap)..state.groups {
            t.buffer.push_group(&t.generator.group_at(master, index)?)?;
        }
        Ok(t)
    }

    fn assemble(
        config: ExperimentConfig,
        model: Model,
        params: ParamSet<f32>,
        opt: RAdam<f32>,
        samples: u64,
        groups: u64,
    ) -> Result<Self, TrainError> {
        let generator = Arc::new(Generator::new(
            config.task.clone(),
            config.render.clone(),
            config.datagen.clone(),
        )?);
        let queue = (4 * config.train.groups_per_step).max(8);
        let stream = GroupStream::spawn(
            Arc::clone(&generator),
            stream_master(&config),
            groups,
            config.train.workers,
            queue,
        );
        let buffer = DualBuffer::new(config.train.buffer_capacity);
        Ok(Self {
            config,
            generator,
            model,
            params,
            opt,
            buffer,
            stream,
            samples,
            held_out: None,
        })
    }

    pub fn config(&self) -> &ExperimentConfig {
        &self.config
    }

    pub fn model(&self) -> &Model {
        &self.model
    }

    pub fn params(&self) -> &ParamSet<f32> {
        &self.params
    }

    pub fn buffer(&self) -> &DualBuffer {
        &self.buffer
    }

    pub fn state(&self) -> TrainState {
        TrainState {
            step: self.opt.step,
            samples: self.samples,
            groups: self.stream.position(),
        }
    }

    /// Draws the batch of the next step without training on it.
    pub fn peek_batch(&self) -> Result<Vec<BatchItem>, TrainError> {
        let mut rng = seed::rng(seed::derive(seed::derive_tagged(self.config.seed, "batch"), self.opt.step));
        Ok(self.buffer.sample_batch(self.config.train.batch_size, &mut rng)?)
    }

    /// One optimizer step on a fresh balanced batch.
    pub fn step(&mut self) -> Result<StepStats, TrainError> {
        for _ in 0..self.config.train.groups_per_step {
            let g = self.stream.next_group();
            self.buffer.push_group(&g)?;
        }
        let batch = self.peek_batch()?;
        let positives = batch.iter().filter(|b| b.triplet.label).count();
        if 2 * positives != batch.len() {
            return Err(TrainError::Internal(format!("unbalanced batch: {positives} of {}", batch.len())));
        }
        let total = batch.len();
        let mut grads = self.params.zeros_like();
        let mut loss = 0.0;
        let (mut pos_sum, mut neg_sum) = (0.0, 0.0);
        for chunk in batch.chunks(self.config.train.micro_batch) {
            let samples: Vec<Sample<'_>> = chunk
                .iter()
                .map(|b| Sample {
                    image: &b.image,
                    graph: &b.triplet.graph,
                    terminal: b.triplet.terminal,
                })
                .collect();
            let labels: Vec<bool> = chunk.iter().map(|b| b.triplet.label).collect();
            let out = self
                .model
                .loss_and_grad(&self.params, &samples, &labels, self.config.train.label_smoothing)
                .map_err(|e| TrainError::Diverged {
                    samples: self.samples,
                    source: e,
                })?;
            let w = chunk.len() as f32 / total as f32;
            for (acc, g) in grads.iter_mut().zip(&out.grads) {
                for (a, &v) in acc.iter_mut().zip(g) {
                    *a += v * w;
                }
            }
            loss += f64::from(out.loss) * chunk.len() as f64 / total as f64;
            for (&z, &y) in out.logits.iter().zip(&labels) {
                if y {
                    pos_sum += f64::from(z);
                } else {
                    neg_sum += f64::from(z);
                }
            }
        }
        let grad_norm = clip_gradients(&mut grads, self.config.train.max_grad_norm);
        let lr = self.config.schedule.lr_at(self.samples);
        self.opt.update(&mut self.params, &grads, lr)?;
        self.samples += total as u64;
        let half = (total / 2) as f64;
        Ok(StepStats {
            samples: self.samples,
            loss,
            grad_norm,
            pos_logit_mean: pos_sum / half,
            neg_logit_mean: neg_sum / half,
            lr,
        })
    }

    pub fn evaluate(&mut self) -> Result<EvalReport, TrainError> {
        let scorer = ModelScorer::new(&self.model, &self.params);
        let metrics = evaluate(&scorer, &self.config)?;
        if self.held_out.is_none() {
            self.held_out = Some(HeldOut::generate(&self.config, self.config.eval.transition_samples)?);
        }
        let held_out = self.held_out.as_ref().expect("generated above");
        let transition_accuracy = held_out.accuracy(&self.model, &self.params, 256)?;
        Ok(EvalReport {
            samples: self.samples,
            metrics,
            transition_accuracy,
        })
    }

    pub fn checkpoint(&self) -> Checkpoint {
        let mut ck = Checkpoint {
            header: write_header(&self.config, &self.state()),
            arrays: Vec::new(),
        };
        ck.push_params("param", &self.params);
        let moments = |m: &Vec<Vec<f32>>| {
            ParamSet::new(
                self.params.names().to_vec(),
                self.params
                    .tensors()
                    .iter()
                    .zip(m)
                    .map(|(t, d)| grasp_neural::tape::Tensor::new(t.shape.clone(), d.clone()))
                    .collect(),
            )
        };
        ck.push_params("m", &moments(&self.opt.m));
        ck.push_params("v", &moments(&self.opt.v));
        ck
    }

    /// Trains until `train.total_samples`, writing `metrics.csv`,
    /// `eval.csv` and `checkpoint.bin` into `out_dir`. A run resumed from a
    /// checkpoint keeps the log rows up to its sample count.
    pub fn run(&mut self, out_dir: &Path, mut progress: impl FnMut(Progress<'_>)) -> Result<(), TrainError> {
        std::fs::create_dir_all(out_dir)?;
        self.config.save(&out_dir.join("config.toml"))?;
        let (mut metrics, mut evals) = if self.samples == 0 {
            (
                CsvLog::<MetricsRow>::create(&out_dir.join("metrics.csv"))?,
                CsvLog::<EvalRow>::create(&out_dir.join("eval.csv"))?,
            )
        } else {
            (
                CsvLog::resume(&out_dir.join("metrics.csv"), self.samples)?,
                CsvLog::resume(&out_dir.join("eval.csv"), self.samples)?,
            )
        };
        let every = self.config.train.eval_every;
        let total = self.config.train.total_samples;
        while self.samples < total {
            let before = self.samples;
            let stats = self.step()?;
            progress(Progress::Step(&stats));
            let mut row = MetricsRow {
                samples: stats.samples,
                loss: stats.loss,
                grad_norm: stats.grad_norm,
                pos_logit_mean: stats.pos_logit_mean,
                neg_logit_mean: stats.neg_logit_mean,
                acc: None,
                len: None,
                topk: None,
                ood_acc: None,
            };
            if stats.samples / every > before / every || stats.samples >= total {
                let report = self.evaluate()?;
                progress(Progress::Eval(&report));
                let (i, o) = (report.metrics.in_dist, report.metrics.ood);
                row.acc = Some(i.accuracy);
                row.len = Some(i.mean_length);
                row.topk = Some(i.topk);
                row.ood_acc = Some(o.accuracy);
                evals.append(&EvalRow {
                    samples: stats.samples,
                    acc: i.accuracy,
                    len: i.mean_length,
                    topk: i.topk,
                    ood_acc: o.accuracy,
                    ood_len: o.mean_length,
                    ood_topk: o.topk,
                    transition_acc: report.transition_accuracy,
                })?;
                metrics.append(&row)?;
                self.checkpoint().save(&out_dir.join("checkpoint.bin"))?;
            } else {
                metrics.append(&row)?;
            }
        }
        Ok(())
    }
}

fn write_header(config: &ExperimentConfig, state: &TrainState) -> String {
    let mut table: toml::Table = toml::from_str(&config.to_toml()).expect("config round-trips");
    table.insert(
        "state".into(),
        toml::Value::try_from(state).expect("state serializes"),
    );
    toml::to_string(&table).expect("header serializes")
}

/// Splits a checkpoint header into the experiment config and the counters.
pub fn read_header(header: &str) -> Result<(ExperimentConfig, TrainState), TrainError> {
    let mut table: toml::Table = toml::from_str(header).map_err(|e| TrainError::Checkpoint(e.to_string()))?;
    let state = table
        .remove("state")
        .ok_or_else(|| TrainError::Checkpoint("header lacks training state".into()))?
        .try_into()
        .map_err(|e: toml::de::Error| TrainError::Checkpoint(e.to_string()))?;
    Ok((ExperimentConfig::from_table(table)?, state))
}
