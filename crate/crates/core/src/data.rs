//! Training data: a ring of bivariate Gaussians, MNIST IDX files, and
//! mini-batching.

use std::f64::consts::PI;
use std::fs;
use std::io::Write;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tensor::{DenseTensor, Shape};

pub const IDX_IMAGES_MAGIC: u32 = 0x0000_0803;
pub const IDX_LABELS_MAGIC: u32 = 0x0000_0801;

/// `num_clusters` isotropic Gaussians with means evenly spaced on a circle.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GmmSpec {
    pub num_clusters: usize,
    pub center: [f64; 2],
    pub ring_radius: f64,
    /// Per-axis variance σ².
    pub variance: f64,
    pub points: usize,
}

impl Default for GmmSpec {
    fn default() -> Self {
        GmmSpec {
            num_clusters: 6,
            center: [0.5, 0.5],
            ring_radius: 0.4,
            variance: 0.2,
            points: 10_000,
        }
    }
}

impl GmmSpec {
    /// Same ring with σ² = 0.005, which keeps the six modes visibly apart.
    pub fn separated() -> Self {
        GmmSpec {
            variance: 0.005,
            ..GmmSpec::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let ok = self.num_clusters >= 1
            && self.points >= 1
            && self.variance > 0.0
            && self.variance.is_finite()
            && self.ring_radius >= 0.0
            && self.ring_radius.is_finite()
            && self.center.iter().all(|c| c.is_finite());
        if ok {
            Ok(())
        } else {
            Err(Error::Argument(format!("invalid mixture spec {self:?}")))
        }
    }

    /// Cluster `k` sits at `center + r·(cos 2πk/K, sin 2πk/K)`.
    pub fn means(&self) -> Vec<[f64; 2]> {
        let k = self.num_clusters as f64;
        (0..self.num_clusters)
            .map(|i| {
                let angle = 2.0 * PI * i as f64 / k;
                [
                    self.center[0] + self.ring_radius * angle.cos(),
                    self.center[1] + self.ring_radius * angle.sin(),
                ]
            })
            .collect()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DataSource {
    Gmm,
    Mnist,
}

/// Samples stacked along a trailing sample mode.
#[derive(Clone, Debug, PartialEq)]
pub struct Dataset {
    samples: DenseTensor,
    source: DataSource,
    labels: Option<Vec<usize>>,
}

impl Dataset {
    pub fn new(samples: DenseTensor, source: DataSource, labels: Option<Vec<usize>>) -> Result<Self> {
        if samples.order() < 2 {
            return Err(Error::shape("a dataset needs a sample mode after the sample extents"));
        }
        let n = *samples.dims().last().expect("order ≥ 2");
        if let Some(l) = &labels {
            if l.len() != n {
                return Err(Error::Length(format!("{} labels for {n} samples", l.len())));
            }
        }
        Ok(Dataset {
            samples,
            source,
            labels,
        })
    }

    pub fn len(&self) -> usize {
        *self.samples.dims().last().expect("order ≥ 2")
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn sample_shape(&self) -> &[usize] {
        let d = self.samples.dims();
        &d[..d.len() - 1]
    }

    pub fn sample_size(&self) -> usize {
        self.sample_shape().iter().product()
    }

    pub fn samples(&self) -> &DenseTensor {
        &self.samples
    }

    pub fn source(&self) -> DataSource {
        self.source
    }

    pub fn labels(&self) -> Option<&[usize]> {
        self.labels.as_deref()
    }

    /// Stacks the listed samples, in order, along a new trailing mode.
    pub fn gather(&self, indices: &[usize]) -> Result<DenseTensor> {
        let size = self.sample_size();
        let mut data = Vec::with_capacity(size * indices.len());
        for &i in indices {
            if i >= self.len() {
                return Err(Error::Argument(format!("sample {i} out of range for {}", self.len())));
            }
            data.extend_from_slice(&self.samples.data()[i * size..(i + 1) * size]);
        }
        let shape = Shape::new(self.sample_shape().to_vec())?.appended(indices.len())?;
        DenseTensor::new(shape, data)
    }

    /// The samples at `indices`, in that order.
    pub fn select(&self, indices: &[usize]) -> Result<Dataset> {
        Dataset::new(
            self.gather(indices)?,
            self.source,
            self.labels.as_ref().map(|l| indices.iter().map(|&i| l[i]).collect()),
        )
    }

    /// The first `n` samples (all of them if `n` exceeds the count).
    pub fn truncated(&self, n: usize) -> Result<Dataset> {
        let idx: Vec<usize> = (0..n.min(self.len())).collect();
        self.select(&idx)
    }

    /// `n` distinct samples drawn uniformly, kept in file order.
    pub fn random_subset<R: Rng + ?Sized>(&self, n: usize, rng: &mut R) -> Result<Dataset> {
        let mut idx = rand::seq::index::sample(rng, self.len(), n.min(self.len())).into_vec();
        idx.sort_unstable();
        self.select(&idx)
    }

    /// The samples as 2-D points; fails unless every sample has two entries.
    pub fn points(&self) -> Result<Vec<[f64; 2]>> {
        points_of(&self.samples)
    }
}

/// Reads a `(2, n)` or `(…, n)` tensor with two entries per sample as points.
pub fn points_of(samples: &DenseTensor) -> Result<Vec<[f64; 2]>> {
    let n = *samples.dims().last().unwrap_or(&0);
    if samples.order() < 2 || samples.len() != 2 * n {
        return Err(Error::shape(format!("{:?} does not hold 2-D points", samples.shape())));
    }
    Ok(samples.data().chunks_exact(2).map(|c| [c[0], c[1]]).collect())
}

/// Draws `spec.points` samples; cluster membership is uniform.
pub fn gmm_sample<R: Rng + ?Sized>(spec: &GmmSpec, rng: &mut R) -> Result<Dataset> {
    spec.validate()?;
    let means = spec.means();
    let std = spec.variance.sqrt();
    let mut data = Vec::with_capacity(2 * spec.points);
    let mut labels = Vec::with_capacity(spec.points);
    for _ in 0..spec.points {
        let k = rng.random_range(0..spec.num_clusters);
        let dx: f64 = rng.sample(StandardNormal);
        let dy: f64 = rng.sample(StandardNormal);
        data.push(means[k][0] + std * dx);
        data.push(means[k][1] + std * dy);
        labels.push(k);
    }
    Dataset::new(
        DenseTensor::from_vec(vec![2, spec.points], data)?,
        DataSource::Gmm,
        Some(labels),
    )
}

fn be_u32(bytes: &[u8], offset: usize, what: &str) -> Result<u32> {
    bytes
        .get(offset..offset + 4)
        .map(|b| u32::from_be_bytes(b.try_into().expect("4 bytes")))
        .ok_or_else(|| Error::Length(format!("{what}: header truncated")))
}

/// Parses an IDX image file into a `(rows, cols, count)` tensor with
/// entry `(r, c, n)` = pixel byte / 255.
pub fn parse_idx_images(bytes: &[u8]) -> Result<DenseTensor> {
    let magic = be_u32(bytes, 0, "image file")?;
    if magic != IDX_IMAGES_MAGIC {
        return Err(Error::Format(format!("image file magic {magic:#010x}, expected {IDX_IMAGES_MAGIC:#010x}")));
    }
    let count = be_u32(bytes, 4, "image file")? as usize;
    let rows = be_u32(bytes, 8, "image file")? as usize;
    let cols = be_u32(bytes, 12, "image file")? as usize;
    if count == 0 || rows == 0 || cols == 0 {
        return Err(Error::Format(format!("image file declares {count} images of {rows}×{cols}")));
    }
    let pixels = rows * cols;
    let payload = &bytes[16..];
    let expected = count
        .checked_mul(pixels)
        .ok_or_else(|| Error::Format("image file dimensions overflow".into()))?;
    if payload.len() < expected {
        return Err(Error::Length(format!(
            "image file holds {} pixel bytes, header promises {expected}",
            payload.len()
        )));
    }
    if payload.len() > expected {
        return Err(Error::Format(format!(
            "image file has {} trailing bytes",
            payload.len() - expected
        )));
    }
    let mut data = vec![0.0; expected];
    for n in 0..count {
        let img = &payload[n * pixels..(n + 1) * pixels];
        for r in 0..rows {
            for c in 0..cols {
                data[r + rows * (c + cols * n)] = f64::from(img[r * cols + c]) / 255.0;
            }
        }
    }
    DenseTensor::from_vec(vec![rows, cols, count], data)
}

pub fn parse_idx_labels(bytes: &[u8]) -> Result<Vec<usize>> {
    let magic = be_u32(bytes, 0, "label file")?;
    if magic != IDX_LABELS_MAGIC {
        return Err(Error::Format(format!("label file magic {magic:#010x}, expected {IDX_LABELS_MAGIC:#010x}")));
    }
    let count = be_u32(bytes, 4, "label file")? as usize;
    let payload = &bytes[8..];
    if payload.len() < count {
        return Err(Error::Length(format!(
            "label file holds {} labels, header promises {count}",
            payload.len()
        )));
    }
    if payload.len() > count {
        return Err(Error::Format(format!("label file has {} trailing bytes", payload.len() - count)));
    }
    Ok(payload.iter().map(|&b| usize::from(b)).collect())
}

pub fn load_mnist_idx(images: &Path, labels: Option<&Path>) -> Result<Dataset> {
    let bytes = fs::read(images).map_err(|e| Error::io(images, e))?;
    let samples = parse_idx_images(&bytes)?;
    let labels = labels
        .map(|p| fs::read(p).map_err(|e| Error::io(p, e)).and_then(|b| parse_idx_labels(&b)))
        .transpose()?;
    Dataset::new(samples, DataSource::Mnist, labels)
}

/// Endless mini-batches over a dataset. Each epoch is a (possibly shuffled)
/// permutation split into batches of `batch_size`; a final short batch is
/// dropped.
pub struct Batches<'a, R> {
    dataset: &'a Dataset,
    batch_size: usize,
    shuffle: bool,
    rng: R,
    order: Vec<usize>,
    position: usize,
    epoch: usize,
}

pub fn batches<R: Rng>(dataset: &Dataset, batch_size: usize, rng: R, shuffle: bool) -> Result<Batches<'_, R>> {
    if batch_size == 0 || batch_size > dataset.len() {
        return Err(Error::Argument(format!(
            "batch size {batch_size} for a dataset of {} samples",
            dataset.len()
        )));
    }
    Ok(Batches {
        dataset,
        batch_size,
        shuffle,
        rng,
        order: (0..dataset.len()).collect(),
        position: dataset.len(),
        epoch: 0,
    })
}

impl<R: Rng> Batches<'_, R> {
    pub fn batches_per_epoch(&self) -> usize {
        self.dataset.len() / self.batch_size
    }

    /// Number of epochs started so far.
    pub fn epoch(&self) -> usize {
        self.epoch
    }

    pub fn next_indices(&mut self) -> Vec<usize> {
        if self.position + self.batch_size > self.order.len() {
            if self.shuffle {
                self.order.shuffle(&mut self.rng);
            }
            self.position = 0;
            self.epoch += 1;
        }
        let idx = self.order[self.position..self.position + self.batch_size].to_vec();
        self.position += self.batch_size;
        idx
    }
}

impl<R: Rng> Iterator for Batches<'_, R> {
    type Item = DenseTensor;

    fn next(&mut self) -> Option<DenseTensor> {
        let idx = self.next_indices();
        Some(self.dataset.gather(&idx).expect("indices come from the dataset"))
    }
}

/// Exact decimal rendering with 17 significant digits.
pub fn format_f64(v: f64) -> String {
    format!("{v:.16e}")
}

/// CSV with header `x,y,cluster`, one row per point.
pub fn write_gmm_csv(w: &mut impl Write, dataset: &Dataset) -> Result<()> {
    let points = dataset.points()?;
    let labels = dataset
        .labels()
        .ok_or_else(|| Error::Argument("dataset has no cluster labels".into()))?;
    let io = |e| Error::io("<csv>", e);
    writeln!(w, "x,y,cluster").map_err(io)?;
    for (p, k) in points.iter().zip(labels) {
        writeln!(w, "{},{},{}", format_f64(p[0]), format_f64(p[1]), k).map_err(io)?;
    }
    Ok(())
}

/// CSV with header `x,y`, one row per point.
pub fn write_points_csv(w: &mut impl Write, points: &[[f64; 2]]) -> Result<()> {
    let io = |e| Error::io("<csv>", e);
    writeln!(w, "x,y").map_err(io)?;
    for p in points {
        writeln!(w, "{},{}", format_f64(p[0]), format_f64(p[1])).map_err(io)?;
    }
    Ok(())
}
