//! Adversarial training of a generator against a discriminator.
//!
//! With tensor layers on both sides this is a TGAN; with dense layers it is
//! an ordinary MLP GAN. The discriminator emits one logit per sample.

use std::io::{Read, Write};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::network::{Gradients, LossFunction, Network, Optimizer, OptimizerConfig};
use crate::record::{read_header, read_network, write_header, write_network};
use crate::tensor::{DenseTensor, Shape};

/// Independent deterministic generator number `stream` derived from `seed`.
pub fn rng_stream(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

pub const CHECKPOINT_MAGIC: [u8; 8] = *b"FTGN\x01\0\0\0";

/// Half the distance between neighbouring means of the default six-mode ring.
pub const DEFAULT_COVERAGE_RADIUS: f64 = 0.2;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum PriorKind {
    Uniform { low: f64, high: f64 },
    Gaussian { mean: f64, std: f64 },
}

/// Latent distribution: i.i.d. entries over a tensor of extents `shape`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PriorSpec {
    #[serde(flatten)]
    pub kind: PriorKind,
    pub shape: Vec<usize>,
}

impl PriorSpec {
    pub fn uniform(low: f64, high: f64, shape: impl Into<Vec<usize>>) -> Self {
        PriorSpec {
            kind: PriorKind::Uniform { low, high },
            shape: shape.into(),
        }
    }

    pub fn gaussian(mean: f64, std: f64, shape: impl Into<Vec<usize>>) -> Self {
        PriorSpec {
            kind: PriorKind::Gaussian { mean, std },
            shape: shape.into(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        Shape::new(self.shape.clone())?;
        let ok = match self.kind {
            PriorKind::Uniform { low, high } => low.is_finite() && high.is_finite() && low < high,
            PriorKind::Gaussian { mean, std } => mean.is_finite() && std.is_finite() && std > 0.0,
        };
        if ok {
            Ok(())
        } else {
            Err(Error::Argument(format!("invalid prior {:?}", self.kind)))
        }
    }
}

/// Draws `c` latent samples stacked along a trailing batch mode. Uniform
/// draws lie strictly inside `(low, high)`.
pub fn sample_prior<R: Rng + ?Sized>(prior: &PriorSpec, c: usize, rng: &mut R) -> Result<DenseTensor> {
    prior.validate()?;
    if c == 0 {
        return Err(Error::Argument("cannot draw an empty batch".into()));
    }
    let shape = Shape::new(prior.shape.clone())?.appended(c)?;
    let data = match prior.kind {
        PriorKind::Uniform { low, high } => (0..shape.numel())
            .map(|_| loop {
                let v = rng.random_range(low..high);
                if v > low {
                    break v;
                }
            })
            .collect(),
        PriorKind::Gaussian { mean, std } => (0..shape.numel())
            .map(|_| mean + std * rng.sample::<f64, _>(StandardNormal))
            .collect(),
    };
    DenseTensor::new(shape, data)
}

#[derive(Clone, Debug, PartialEq)]
pub struct GanModel {
    pub generator: Network,
    pub discriminator: Network,
    pub prior: PriorSpec,
}

fn numel(dims: &[usize]) -> usize {
    dims.iter().product()
}

impl GanModel {
    pub fn new(generator: Network, discriminator: Network, prior: PriorSpec) -> Result<Self> {
        prior.validate()?;
        if numel(&prior.shape) != numel(&generator.input_extents()) {
            return Err(Error::shape(format!(
                "prior {:?} does not fit generator input {:?}",
                prior.shape,
                generator.input_extents()
            )));
        }
        if numel(&generator.output_extents()) != numel(&discriminator.input_extents()) {
            return Err(Error::shape(format!(
                "generator output {:?} does not fit discriminator input {:?}",
                generator.output_extents(),
                discriminator.input_extents()
            )));
        }
        if numel(&discriminator.output_extents()) != 1 {
            return Err(Error::shape(format!(
                "discriminator must emit one logit per sample, emits {:?}",
                discriminator.output_extents()
            )));
        }
        Ok(GanModel {
            generator,
            discriminator,
            prior,
        })
    }

    pub fn num_params(&self) -> usize {
        self.generator.num_params() + self.discriminator.num_params()
    }

    /// `n` generator samples in inference mode, stacked along a trailing mode.
    pub fn generate<R: Rng + ?Sized>(&self, n: usize, rng: &mut R) -> Result<DenseTensor> {
        const CHUNK: usize = 1000;
        if n == 0 {
            return Err(Error::Argument("cannot generate zero samples".into()));
        }
        let out = self.generator.output_extents();
        let mut data = Vec::with_capacity(numel(&out) * n);
        let mut done = 0;
        while done < n {
            let c = CHUNK.min(n - done);
            let z = sample_prior(&self.prior, c, rng)?;
            data.extend_from_slice(self.generator.infer(&z)?.data());
            done += c;
        }
        DenseTensor::new(Shape::new(out)?.appended(n)?, data)
    }

    /// `bce(D(real), 1) + bce(D(fake), 0)`.
    pub fn discriminator_loss(&self, real: &DenseTensor, fake: &DenseTensor) -> Result<f64> {
        let real_logits = self.discriminator.infer(real)?;
        let fake_logits = self.discriminator.infer(fake)?;
        let ones = DenseTensor::filled(real_logits.shape().clone(), 1.0);
        let zeros = DenseTensor::zeros(fake_logits.shape().clone());
        Ok(LossFunction::BceLogits.loss(&real_logits, Some(&ones))?
            + LossFunction::BceLogits.loss(&fake_logits, Some(&zeros))?)
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GeneratorLoss {
    #[default]
    Nonsaturating,
    Minimax,
}

impl GeneratorLoss {
    pub fn loss_function(self) -> LossFunction {
        match self {
            GeneratorLoss::Nonsaturating => LossFunction::GanGeneratorNonsaturating,
            GeneratorLoss::Minimax => LossFunction::GanGeneratorMinimax,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub iterations: u64,
    pub batch_size: usize,
    pub d_steps_per_g_step: usize,
    pub d_optimizer: OptimizerConfig,
    pub g_optimizer: OptimizerConfig,
    pub seed: u64,
    pub generator_loss: GeneratorLoss,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            iterations: 10_000,
            batch_size: 64,
            d_steps_per_g_step: 1,
            d_optimizer: OptimizerConfig::default(),
            g_optimizer: OptimizerConfig::default(),
            seed: 0,
            generator_loss: GeneratorLoss::Nonsaturating,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.batch_size == 0 || self.d_steps_per_g_step == 0 {
            return Err(Error::Config(
                "batch_size and d_steps_per_g_step must be at least 1".into(),
            ));
        }
        self.d_optimizer.validate()?;
        self.g_optimizer.validate()
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct StepMetrics {
    pub d_loss: f64,
    pub g_loss: f64,
}

/// One line of the metrics log.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricsRecord {
    pub iter: u64,
    pub d_loss: f64,
    pub g_loss: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub covered_modes: Option<usize>,
}

fn accumulate(total: &mut [Gradients], add: &[Gradients]) {
    for (t, a) in total.iter_mut().zip(add) {
        for (tb, ab) in t.blocks_mut().into_iter().zip(a.blocks()) {
            for (x, y) in tb.iter_mut().zip(ab) {
                *x += y;
            }
        }
    }
}

/// A model together with its optimizers and noise source.
#[derive(Clone, Debug)]
pub struct Trainer<R> {
    model: GanModel,
    config: TrainConfig,
    d_opt: Optimizer,
    g_opt: Optimizer,
    rng: R,
    iteration: u64,
}

impl<R: Rng> Trainer<R> {
    pub fn new(model: GanModel, config: TrainConfig, rng: R) -> Result<Self> {
        config.validate()?;
        Ok(Trainer {
            d_opt: Optimizer::new(config.d_optimizer),
            g_opt: Optimizer::new(config.g_optimizer),
            model,
            config,
            rng,
            iteration: 0,
        })
    }

    pub fn model(&self) -> &GanModel {
        &self.model
    }

    pub fn into_model(self) -> GanModel {
        self.model
    }

    pub fn config(&self) -> &TrainConfig {
        &self.config
    }

    /// Completed training iterations.
    pub fn iteration(&self) -> u64 {
        self.iteration
    }

    pub fn rng_mut(&mut self) -> &mut R {
        &mut self.rng
    }

    fn check_batch(&self, real: &DenseTensor) -> Result<usize> {
        let want = numel(&self.model.discriminator.input_extents());
        let c = *real.dims().last().unwrap_or(&0);
        if real.order() < 2 || real.len() != want * c {
            return Err(Error::shape(format!(
                "real batch {:?} does not match discriminator input {:?} plus a batch mode",
                real.shape(),
                self.model.discriminator.input_extents()
            )));
        }
        Ok(c)
    }

    /// One discriminator update on `real` against fakes from a fresh prior
    /// draw; the generator is untouched. Returns the loss before the update.
    pub fn discriminator_step(&mut self, real: &DenseTensor) -> Result<f64> {
        let c = self.check_batch(real)?;
        let z = sample_prior(&self.model.prior, c, &mut self.rng)?;
        let fake = self.model.generator.infer(&z)?;
        let d = &self.model.discriminator;

        let (real_logits, real_caches) = d.forward(real)?;
        let ones = DenseTensor::filled(real_logits.shape().clone(), 1.0);
        let (real_loss, d_real) = LossFunction::BceLogits.loss_and_grad(&real_logits, Some(&ones))?;
        let mut grads = d.backward(&real_caches, &d_real)?;

        let (fake_logits, fake_caches) = d.forward(&fake)?;
        let zeros = DenseTensor::zeros(fake_logits.shape().clone());
        let (fake_loss, d_fake) = LossFunction::BceLogits.loss_and_grad(&fake_logits, Some(&zeros))?;
        accumulate(&mut grads, &d.backward(&fake_caches, &d_fake)?);

        self.d_opt.step(&mut self.model.discriminator, &grads)?;
        Ok(real_loss + fake_loss)
    }

    /// One generator update through the discriminator on a fresh prior draw
    /// of `c` samples; the discriminator is untouched. Returns the loss
    /// before the update.
    pub fn generator_step(&mut self, c: usize) -> Result<f64> {
        let z = sample_prior(&self.model.prior, c, &mut self.rng)?;
        let (fake, g_caches) = self.model.generator.forward(&z)?;
        let d = &self.model.discriminator;
        let (logits, d_caches) = d.forward(&fake)?;
        let (loss, d_logits) = self
            .config
            .generator_loss
            .loss_function()
            .loss_and_grad(&logits, None)?;
        let d_fake = d.input_gradient(&d_caches, &d_logits)?;
        let g_grads = self.model.generator.backward(&g_caches, &d_fake)?;
        self.g_opt.step(&mut self.model.generator, &g_grads)?;
        Ok(loss)
    }

    /// `d_steps_per_g_step` discriminator updates, one per batch in `reals`,
    /// then one generator update. Reports the last discriminator step's
    /// loss and the generator step's loss, each taken before its update.
    pub fn train_step(&mut self, reals: &[DenseTensor]) -> Result<StepMetrics> {
        let k = self.config.d_steps_per_g_step;
        if reals.len() != k {
            return Err(Error::Argument(format!("{} real batches for {k} discriminator steps", reals.len())));
        }
        let mut c = 0;
        for real in reals {
            c = self.check_batch(real)?;
        }
        let mut d_loss = f64::NAN;
        for real in reals {
            d_loss = self.discriminator_step(real)?;
        }
        let g_loss = self.generator_step(c)?;
        self.iteration += 1;
        Ok(StepMetrics { d_loss, g_loss })
    }

    /// Runs `iterations` training steps, pulling one real batch per
    /// discriminator step and calling `after_step` after each.
    pub fn run(
        &mut self,
        batches: &mut impl Iterator<Item = DenseTensor>,
        iterations: u64,
        mut after_step: impl FnMut(&mut Self, StepMetrics) -> Result<()>,
    ) -> Result<()> {
        let k = self.config.d_steps_per_g_step;
        for _ in 0..iterations {
            let reals: Vec<DenseTensor> = batches.by_ref().take(k).collect();
            if reals.len() < k {
                return Err(Error::State("batch source ran dry".into()));
            }
            let m = self.train_step(&reals)?;
            after_step(self, m)?;
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Coverage {
    pub covered: usize,
    /// Samples per mode that are nearest to it and within the radius.
    pub histogram: Vec<usize>,
}

/// Assigns each point to its nearest center and counts it for that mode if
/// it lies within `radius`. A mode is covered when its count is at least
/// `1/(2K)` of all points.
pub fn mode_coverage(points: &[[f64; 2]], centers: &[[f64; 2]], radius: f64) -> Result<Coverage> {
    if centers.is_empty() {
        return Err(Error::Argument("mode coverage needs at least one center".into()));
    }
    if !(radius > 0.0) {
        return Err(Error::Argument(format!("coverage radius must be positive, got {radius}")));
    }
    let mut histogram = vec![0usize; centers.len()];
    let r2 = radius * radius;
    for p in points {
        let (best, d2) = centers
            .iter()
            .map(|c| (p[0] - c[0]).powi(2) + (p[1] - c[1]).powi(2))
            .enumerate()
            .fold((0, f64::INFINITY), |acc, (i, d)| if d < acc.1 { (i, d) } else { acc });
        if d2 <= r2 {
            histogram[best] += 1;
        }
    }
    let k2 = 2 * centers.len();
    let covered = histogram
        .iter()
        .filter(|&&h| h > 0 && h * k2 >= points.len())
        .count();
    Ok(Coverage { covered, histogram })
}

#[derive(Debug, Serialize, Deserialize)]
struct CheckpointHeader {
    iteration: u64,
    prior: PriorSpec,
}

/// A saved model: a JSON header `{iteration, prior}` followed by the
/// generator and discriminator network containers.
#[derive(Clone, Debug, PartialEq)]
pub struct Checkpoint {
    pub iteration: u64,
    pub model: GanModel,
}

impl Checkpoint {
    pub fn write(&self, w: &mut impl Write) -> Result<()> {
        let header = CheckpointHeader {
            iteration: self.iteration,
            prior: self.model.prior.clone(),
        };
        write_header(w, &CHECKPOINT_MAGIC, &header)?;
        write_network(w, &self.model.generator)?;
        write_network(w, &self.model.discriminator)
    }

    pub fn read(r: &mut impl Read) -> Result<Self> {
        let header: CheckpointHeader = read_header(r, &CHECKPOINT_MAGIC, "checkpoint")?;
        let generator = read_network(r)?;
        let discriminator = read_network(r)?;
        let mut rest = [0u8; 1];
        match r.read(&mut rest) {
            Ok(0) => {}
            Ok(_) => return Err(Error::Format("trailing bytes after checkpoint".into())),
            Err(e) => return Err(Error::io("<stream>", e)),
        }
        let model = GanModel::new(generator, discriminator, header.prior)
            .map_err(|e| Error::Format(format!("checkpoint: {e}")))?;
        Ok(Checkpoint {
            iteration: header.iteration,
            model,
        })
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut buf = Vec::new();
        self.write(&mut buf).expect("writing to a Vec cannot fail");
        buf
    }

    pub fn from_bytes(mut bytes: &[u8]) -> Result<Self> {
        Checkpoint::read(&mut bytes)
    }
}
