//! TOML experiment configs.

use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::activation::Activation;
use crate::data::{gmm_sample, load_mnist_idx, Dataset, GmmSpec};
use crate::error::{Error, Result};
use crate::gan::{GanModel, PriorSpec, TrainConfig, DEFAULT_COVERAGE_RADIUS};
use crate::layer::TensorLayer;
use crate::network::{DenseLayer, Layer, Network};
use crate::tensor::Shape;

pub const SEED_ENV: &str = "FTNET_SEED";

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Task {
    Synthetic,
    Mnist,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LayerKind {
    Tensor,
    Dense,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LayerSpec {
    pub kind: LayerKind,
    /// Output extents; a single extent for dense layers.
    pub extents: Vec<usize>,
    pub activation: Activation,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Architecture {
    pub input: Vec<usize>,
    pub layers: Vec<LayerSpec>,
}

fn numel(dims: &[usize]) -> usize {
    dims.iter().product()
}

impl Architecture {
    /// Checks that extents chain: tensor→tensor links keep the order and
    /// extents, dense layers take the flattened previous output.
    pub fn validate(&self) -> Result<()> {
        if self.layers.is_empty() {
            return Err(Error::Config("an architecture needs at least one layer".into()));
        }
        let mut current = Shape::new(self.input.clone())
            .map_err(|e| Error::Config(format!("input extents: {e}")))?
            .dims()
            .to_vec();
        for (i, l) in self.layers.iter().enumerate() {
            Shape::new(l.extents.clone()).map_err(|e| Error::Config(format!("layer {i}: {e}")))?;
            match l.kind {
                LayerKind::Tensor if l.extents.len() != current.len() => {
                    return Err(Error::Config(format!(
                        "layer {i}: tensor layer maps order {} input {current:?} to order {} extents {:?}",
                        current.len(),
                        l.extents.len(),
                        l.extents
                    )));
                }
                LayerKind::Dense if l.extents.len() != 1 => {
                    return Err(Error::Config(format!(
                        "layer {i}: dense layer needs a single output width, got {:?}",
                        l.extents
                    )));
                }
                _ => {}
            }
            current = l.extents.clone();
        }
        Ok(())
    }

    pub fn output(&self) -> &[usize] {
        &self.layers.last().expect("validated architecture").extents
    }

    /// Parameter total from the closed-form counts, without building weights.
    pub fn param_count(&self) -> Result<usize> {
        self.validate()?;
        let mut current = self.input.clone();
        let mut total = 0usize;
        for l in &self.layers {
            let count = match l.kind {
                LayerKind::Tensor => {
                    let w: usize = current.iter().zip(&l.extents).map(|(i, j)| i * j).sum();
                    w + numel(&l.extents)
                }
                LayerKind::Dense => numel(&current) * l.extents[0] + l.extents[0],
            };
            total = total
                .checked_add(count)
                .ok_or_else(|| Error::Capacity("parameter count overflows".into()))?;
            current = l.extents.clone();
        }
        Ok(total)
    }

    pub fn build<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<Network> {
        self.validate()?;
        let mut current = self.input.clone();
        let mut layers: Vec<Layer> = Vec::with_capacity(self.layers.len());
        for l in &self.layers {
            layers.push(match l.kind {
                LayerKind::Tensor => TensorLayer::init(&current, &l.extents, l.activation, rng)?.into(),
                LayerKind::Dense => DenseLayer::init(numel(&current), l.extents[0], l.activation, rng)?.into(),
            });
            current = l.extents.clone();
        }
        Network::new(layers)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "source", rename_all = "snake_case", deny_unknown_fields)]
pub enum DataConfig {
    Gmm {
        #[serde(default = "default_clusters")]
        num_clusters: usize,
        #[serde(default = "default_center")]
        center: [f64; 2],
        #[serde(default = "default_ring_radius")]
        ring_radius: f64,
        #[serde(default = "default_variance")]
        variance: f64,
        #[serde(default = "default_points")]
        points: usize,
    },
    Mnist {
        images: PathBuf,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        labels: Option<PathBuf>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        limit: Option<usize>,
    },
}

fn default_clusters() -> usize {
    GmmSpec::default().num_clusters
}
fn default_center() -> [f64; 2] {
    GmmSpec::default().center
}
fn default_ring_radius() -> f64 {
    GmmSpec::default().ring_radius
}
fn default_variance() -> f64 {
    GmmSpec::default().variance
}
fn default_points() -> usize {
    GmmSpec::default().points
}

impl DataConfig {
    pub fn gmm(spec: &GmmSpec) -> Self {
        DataConfig::Gmm {
            num_clusters: spec.num_clusters,
            center: spec.center,
            ring_radius: spec.ring_radius,
            variance: spec.variance,
            points: spec.points,
        }
    }

    pub fn gmm_spec(&self) -> Option<GmmSpec> {
        match *self {
            DataConfig::Gmm {
                num_clusters,
                center,
                ring_radius,
                variance,
                points,
            } => Some(GmmSpec {
                num_clusters,
                center,
                ring_radius,
                variance,
                points,
            }),
            DataConfig::Mnist { .. } => None,
        }
    }
}

fn default_log_interval() -> u64 {
    100
}
fn default_checkpoint_interval() -> u64 {
    1000
}
fn default_sample_count() -> usize {
    10_000
}
fn default_coverage_radius() -> f64 {
    DEFAULT_COVERAGE_RADIUS
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub task: Task,
    pub name: String,
    pub output_dir: PathBuf,
    #[serde(default = "default_log_interval")]
    pub log_interval: u64,
    #[serde(default = "default_checkpoint_interval")]
    pub checkpoint_interval: u64,
    /// Iterations after which samples are dumped.
    #[serde(default)]
    pub sample_schedule: Vec<u64>,
    #[serde(default = "default_sample_count")]
    pub sample_count: usize,
    /// Radius for the mode-coverage metric on 2-D tasks.
    #[serde(default = "default_coverage_radius")]
    pub coverage_radius: f64,
    pub train: TrainConfig,
    pub prior: PriorSpec,
    pub generator: Architecture,
    pub discriminator: Architecture,
    pub data: DataConfig,
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: ExperimentConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Reads, validates and resolves relative paths against the file's
    /// directory. `FTNET_SEED`, when set, replaces the training seed.
    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut cfg =
            Self::from_toml(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        let base = path.parent().unwrap_or(Path::new(""));
        cfg.resolve_paths(base);
        if let Ok(seed) = std::env::var(SEED_ENV) {
            cfg.train.seed = seed
                .trim()
                .parse()
                .map_err(|_| Error::Config(format!("{SEED_ENV}={seed:?} is not an unsigned integer")))?;
        }
        Ok(cfg)
    }

    pub fn resolve_paths(&mut self, base: &Path) {
        let join = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        join(&mut self.output_dir);
        if let DataConfig::Mnist { images, labels, .. } = &mut self.data {
            join(images);
            if let Some(l) = labels {
                join(l);
            }
        }
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("experiment configs always serialize")
    }

    pub fn validate(&self) -> Result<()> {
        let cfg_err = |what: &str, e: Error| Error::Config(format!("{what}: {e}"));
        self.train.validate().map_err(|e| cfg_err("train", e))?;
        self.prior.validate().map_err(|e| cfg_err("prior", e))?;
        self.generator.validate().map_err(|e| cfg_err("generator", e))?;
        self.discriminator.validate().map_err(|e| cfg_err("discriminator", e))?;
        if self.log_interval == 0 || self.checkpoint_interval == 0 || self.sample_count == 0 {
            return Err(Error::Config(
                "log_interval, checkpoint_interval and sample_count must be positive".into(),
            ));
        }
        if !(self.coverage_radius > 0.0) {
            return Err(Error::Config("coverage_radius must be positive".into()));
        }
        if numel(&self.prior.shape) != numel(&self.generator.input) {
            return Err(Error::Config(format!(
                "prior shape {:?} does not fit generator input {:?}",
                self.prior.shape, self.generator.input
            )));
        }
        let g_out = numel(self.generator.output());
        if g_out != numel(&self.discriminator.input) {
            return Err(Error::Config(format!(
                "generator output {:?} does not fit discriminator input {:?}",
                self.generator.output(),
                self.discriminator.input
            )));
        }
        if numel(self.discriminator.output()) != 1 {
            return Err(Error::Config("discriminator must end in a single logit".into()));
        }
        let sample_size = match (&self.task, &self.data) {
            (Task::Synthetic, DataConfig::Gmm { .. }) => {
                self.data.gmm_spec().expect("gmm").validate().map_err(|e| cfg_err("data", e))?;
                2
            }
            (Task::Mnist, DataConfig::Mnist { limit, .. }) => {
                if *limit == Some(0) {
                    return Err(Error::Config("data.limit must be positive".into()));
                }
                784
            }
            (task, _) => {
                return Err(Error::Config(format!("task {task:?} does not match its data source")));
            }
        };
        if g_out != sample_size {
            return Err(Error::Config(format!(
                "generator emits {g_out} values per sample, data has {sample_size}"
            )));
        }
        Ok(())
    }

    pub fn param_counts(&self) -> Result<(usize, usize)> {
        Ok((self.generator.param_count()?, self.discriminator.param_count()?))
    }

    pub fn build_model<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<GanModel> {
        let g = self.generator.build(rng)?;
        let d = self.discriminator.build(rng)?;
        GanModel::new(g, d, self.prior.clone())
    }

    /// The training set: GMM draws from `rng` or the MNIST files, with
    /// `limit` picking a random subset via `rng`.
    pub fn load_dataset<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<Dataset> {
        match &self.data {
            DataConfig::Gmm { .. } => gmm_sample(&self.data.gmm_spec().expect("gmm"), rng),
            DataConfig::Mnist {
                images,
                labels,
                limit,
            } => {
                let ds = load_mnist_idx(images, labels.as_deref())?;
                if ds.sample_shape() != [28, 28] {
                    return Err(Error::Format(format!(
                        "expected 28×28 images, {} holds {:?}",
                        images.display(),
                        ds.sample_shape()
                    )));
                }
                match limit {
                    Some(n) => ds.random_subset(*n, rng),
                    None => Ok(ds),
                }
            }
        }
    }
}

impl fmt::Display for ExperimentConfig {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_toml())
    }
}
