use serde::{Deserialize, Serialize};

use crate::activation::{sigmoid, softplus};
use crate::error::{Error, Result};
use crate::tensor::DenseTensor;

/// Losses on discriminator logits. All of them average over every entry of
/// the logit tensor, which for a discriminator is one entry per batch element.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LossFunction {
    /// `mean(-t·ln σ(ℓ) - (1-t)·ln(1-σ(ℓ)))`, evaluated as
    /// `mean(max(ℓ, 0) - t·ℓ + ln(1 + e^{-|ℓ|}))`.
    BceLogits,
    /// `-mean ln σ(ℓ)` on the logits of generated samples.
    GanGeneratorNonsaturating,
    /// `mean ln(1 - σ(ℓ))` on the logits of generated samples.
    GanGeneratorMinimax,
}

impl LossFunction {
    pub fn needs_targets(self) -> bool {
        matches!(self, LossFunction::BceLogits)
    }

    /// Loss value and its gradient with respect to `logits`.
    pub fn loss_and_grad(
        self,
        logits: &DenseTensor,
        targets: Option<&DenseTensor>,
    ) -> Result<(f64, DenseTensor)> {
        if let Some(t) = targets {
            if t.shape() != logits.shape() {
                return Err(Error::shape(format!(
                    "targets {:?} do not match logits {:?}",
                    t.shape(),
                    logits.shape()
                )));
            }
        }
        let n = logits.len() as f64;
        match self {
            LossFunction::BceLogits => {
                let t = targets.ok_or_else(|| {
                    Error::Argument("binary cross-entropy needs targets".into())
                })?;
                let loss = logits
                    .data()
                    .iter()
                    .zip(t.data())
                    .map(|(&l, &y)| l.max(0.0) - y * l + (-l.abs()).exp().ln_1p())
                    .sum::<f64>()
                    / n;
                let grad = logits.zip_map(t, |l, y| (sigmoid(l) - y) / n)?;
                Ok((loss, grad))
            }
            LossFunction::GanGeneratorNonsaturating => {
                let loss = logits.data().iter().map(|&l| softplus(-l)).sum::<f64>() / n;
                let grad = logits.map(|l| -sigmoid(-l) / n);
                Ok((loss, grad))
            }
            LossFunction::GanGeneratorMinimax => {
                let loss = -logits.data().iter().map(|&l| softplus(l)).sum::<f64>() / n;
                let grad = logits.map(|l| -sigmoid(l) / n);
                Ok((loss, grad))
            }
        }
    }

    pub fn loss(self, logits: &DenseTensor, targets: Option<&DenseTensor>) -> Result<f64> {
        Ok(self.loss_and_grad(logits, targets)?.0)
    }
}
