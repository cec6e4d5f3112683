//! The training loop behind `ftnet train`.

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use crate::cli::config::{ExperimentConfig, Task};
use crate::cli::output::write_samples;
use crate::data::{batches, points_of, Dataset};
use crate::error::{Error, Result};
use crate::gan::{mode_coverage, rng_stream, Checkpoint, GanModel, MetricsRecord, Trainer};

/// Seed streams derived from the training seed.
pub mod streams {
    pub const INIT: u64 = 0;
    pub const DATA: u64 = 1;
    pub const BATCHES: u64 = 2;
    pub const NOISE: u64 = 3;
    pub const EVAL: u64 = 4;
    pub const SAMPLES: u64 = 5;
}

#[derive(Debug)]
pub struct TrainOutcome {
    pub model: GanModel,
    pub dataset: Dataset,
    pub metrics: Vec<MetricsRecord>,
    /// Files written, in order.
    pub artifacts: Vec<PathBuf>,
}

pub fn checkpoint_name(iteration: u64) -> String {
    format!("checkpoint_{iteration:06}.ftgn")
}

pub fn samples_name(iteration: u64, task: Task) -> String {
    let ext = match task {
        Task::Synthetic => "csv",
        Task::Mnist => "pgm",
    };
    format!("samples_{iteration:06}.{ext}")
}

/// Modes covered by `cfg.sample_count` fresh samples, for 2-D tasks.
pub fn covered_modes(cfg: &ExperimentConfig, model: &GanModel) -> Result<Option<usize>> {
    let Some(spec) = cfg.data.gmm_spec() else {
        return Ok(None);
    };
    let samples = model.generate(cfg.sample_count, &mut rng_stream(cfg.train.seed, streams::EVAL))?;
    let cov = mode_coverage(&points_of(&samples)?, &spec.means(), cfg.coverage_radius)?;
    Ok(Some(cov.covered))
}

struct Sink {
    dir: PathBuf,
    metrics: Option<BufWriter<File>>,
    artifacts: Vec<PathBuf>,
}

impl Sink {
    fn path(&mut self, name: &str) -> PathBuf {
        let p = self.dir.join(name);
        self.artifacts.push(p.clone());
        p
    }

    fn checkpoint(&mut self, iteration: u64, model: &GanModel) -> Result<()> {
        let path = self.path(&checkpoint_name(iteration));
        let ck = Checkpoint {
            iteration,
            model: model.clone(),
        };
        fs::write(&path, ck.to_bytes()).map_err(|e| Error::io(&path, e))
    }

    fn record(&mut self, record: &MetricsRecord) -> Result<()> {
        if self.metrics.is_none() {
            let path = self.path("metrics.ndjson");
            let f = File::create(&path).map_err(|e| Error::io(&path, e))?;
            self.metrics = Some(BufWriter::new(f));
        }
        let w = self.metrics.as_mut().expect("opened above");
        let line = serde_json::to_string(record).map_err(|e| Error::Format(e.to_string()))?;
        writeln!(w, "{line}").map_err(|e| Error::io(&self.dir, e))
    }

    fn finish(&mut self) -> Result<()> {
        if let Some(w) = self.metrics.as_mut() {
            w.flush().map_err(|e| Error::io(&self.dir, e))?;
        }
        Ok(())
    }
}

/// Trains the configured model. With `out_dir`, writes checkpoints, the
/// metrics log and scheduled sample dumps there. `progress` sees every
/// logged record.
pub fn train_experiment(
    cfg: &ExperimentConfig,
    out_dir: Option<&Path>,
    mut progress: impl FnMut(&MetricsRecord),
) -> Result<TrainOutcome> {
    cfg.validate()?;
    let seed = cfg.train.seed;
    let model = cfg.build_model(&mut rng_stream(seed, streams::INIT))?;
    let dataset = cfg.load_dataset(&mut rng_stream(seed, streams::DATA))?;
    let batch = cfg.train.batch_size;
    let mut real = batches(&dataset, batch, rng_stream(seed, streams::BATCHES), true)
        .map_err(|e| Error::Config(format!("train.batch_size: {e}")))?;

    let mut sink = match out_dir {
        Some(dir) => {
            fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
            Some(Sink {
                dir: dir.to_path_buf(),
                metrics: None,
                artifacts: Vec::new(),
            })
        }
        None => None,
    };
    if let Some(s) = sink.as_mut() {
        s.checkpoint(0, &model)?;
    }

    let total = cfg.train.iterations;
    let mut trainer = Trainer::new(model, cfg.train.clone(), rng_stream(seed, streams::NOISE))?;
    let mut metrics = Vec::new();
    trainer.run(&mut real, total, |t, m| {
        let iter = t.iteration();
        if iter % cfg.log_interval == 0 || iter == total {
            let record = MetricsRecord {
                iter,
                d_loss: m.d_loss,
                g_loss: m.g_loss,
                covered_modes: covered_modes(cfg, t.model())?,
            };
            progress(&record);
            if let Some(s) = sink.as_mut() {
                s.record(&record)?;
            }
            metrics.push(record);
        }
        if let Some(s) = sink.as_mut() {
            if cfg.sample_schedule.contains(&iter) {
                let samples = t
                    .model()
                    .generate(cfg.sample_count, &mut rng_stream(seed, streams::SAMPLES))?;
                let path = s.path(&samples_name(iter, cfg.task));
                write_samples(&path, &samples)?;
            }
            if iter % cfg.checkpoint_interval == 0 || iter == total {
                s.checkpoint(iter, t.model())?;
            }
        }
        Ok(())
    })?;

    let artifacts = match sink.as_mut() {
        Some(s) => {
            s.finish()?;
            std::mem::take(&mut s.artifacts)
        }
        None => Vec::new(),
    };
    Ok(TrainOutcome {
        model: trainer.into_model(),
        dataset,
        metrics,
        artifacts,
    })
}
