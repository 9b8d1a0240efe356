//! Append-only CSV logs of training progress.

use std::fs::File;
use std::io::BufWriter;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::TrainError;

/// One row per optimizer step; evaluation columns are filled on steps
/// followed by an evaluation and left empty otherwise.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricsRow {
    pub samples: u64,
    pub loss: f64,
    pub grad_norm: f64,
    pub pos_logit_mean: f64,
    pub neg_logit_mean: f64,
    pub acc: Option<f64>,
    pub len: Option<f64>,
    pub topk: Option<f64>,
    pub ood_acc: Option<f64>,
}

pub const METRICS_HEADER: &str = "samples,loss,grad_norm,pos_logit_mean,neg_logit_mean,acc,len,topk,ood_acc";

/// Full evaluation results, one row per evaluation.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalRow {
    pub samples: u64,
    pub acc: f64,
    pub len: f64,
    pub topk: f64,
    pub ood_acc: f64,
    pub ood_len: f64,
    pub ood_topk: f64,
    pub transition_acc: f64,
}

/// A CSV file whose rows have strictly increasing `samples`.
pub struct CsvLog<R> {
    path: PathBuf,
    writer: csv::Writer<BufWriter<File>>,
    last: Option<u64>,
    _row: std::marker::PhantomData<R>,
}

pub trait Keyed {
    fn samples(&self) -> u64;
}

impl Keyed for MetricsRow {
    fn samples(&self) -> u64 {
        self.samples
    }
}

impl Keyed for EvalRow {
    fn samples(&self) -> u64 {
        self.samples
    }
}

impl<R: Serialize + for<'de> Deserialize<'de> + Keyed> CsvLog<R> {
    /// Starts a new log, replacing any file at `path`.
    pub fn create(path: &Path) -> Result<Self, TrainError> {
        let writer = csv::WriterBuilder::new()
            .has_headers(true)
            .from_writer(BufWriter::new(File::create(path)?));
        Ok(Self {
            path: path.to_path_buf(),
            writer,
            last: None,
            _row: std::marker::PhantomData,
        })
    }

    /// Continues an existing log after a restart at `samples`: rows beyond
    /// that point are dropped, the rest is kept.
    pub fn resume(path: &Path, samples: u64) -> Result<Self, TrainError> {
        let kept: Vec<R> = if path.exists() {
            read_rows::<R>(path)?.into_iter().filter(|r| r.samples() <= samples).collect()
        } else {
            Vec::new()
        };
        let mut log = Self::create(path)?;
        for r in &kept {
            log.append(r)?;
        }
        Ok(log)
    }

    pub fn append(&mut self, row: &R) -> Result<(), TrainError> {
        if let Some(last) = self.last {
            if row.samples() <= last {
                return Err(TrainError::Internal(format!(
                    "{}: row at {} samples after {last}",
                    self.path.display(),
                    row.samples()
                )));
            }
        }
        self.writer.serialize(row)?;
        self.writer.flush()?;
        self.last = Some(row.samples());
        Ok(())
    }
}

pub fn read_rows<R: for<'de> Deserialize<'de>>(path: &Path) -> Result<Vec<R>, TrainError> {
    let mut reader = csv::Reader::from_path(path)?;
    let rows = reader.deserialize().collect::<Result<Vec<R>, _>>()?;
    Ok(rows)
}

/// Reads a metrics file and checks its header.
pub fn read_metrics(path: &Path) -> Result<Vec<MetricsRow>, TrainError> {
    let mut reader = csv::Reader::from_path(path)?;
    let header = reader.headers()?.iter().collect::<Vec<_>>().join(",");
    if header != METRICS_HEADER {
        return Err(TrainError::Config(format!("{}: unexpected header {header}", path.display())));
    }
    let rows = reader.deserialize().collect::<Result<Vec<MetricsRow>, _>>()?;
    Ok(rows)
}
