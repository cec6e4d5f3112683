//! Central-difference verification of the analytic gradients.

use std::fmt;

use crate::error::{Error, Result};
use crate::network::{gradient_blocks, Gradients, LossFunction, Network};
use crate::tensor::DenseTensor;

/// `|a - n| / max(|a|, |n|, 1e-7)`.
pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(1e-7)
}

#[derive(Clone, Debug, PartialEq)]
pub struct BlockReport {
    pub layer: usize,
    pub name: String,
    pub len: usize,
    pub max_rel_error: f64,
    pub max_abs_error: f64,
    /// Entry with the largest relative error.
    pub worst_index: usize,
    /// Entries whose relative error exceeds the tolerance.
    pub flagged: Vec<usize>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct GradCheckReport {
    pub tol: f64,
    pub step: f64,
    pub blocks: Vec<BlockReport>,
}

impl GradCheckReport {
    pub fn passed(&self) -> bool {
        self.blocks.iter().all(|b| b.flagged.is_empty())
    }

    pub fn max_rel_error(&self) -> f64 {
        self.blocks.iter().map(|b| b.max_rel_error).fold(0.0, f64::max)
    }

    pub fn failing_blocks(&self) -> impl Iterator<Item = &BlockReport> {
        self.blocks.iter().filter(|b| !b.flagged.is_empty())
    }
}

impl fmt::Display for GradCheckReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(
            f,
            "{:>5}  {:<6} {:>6}  {:>12}  {:>12}  {:>7}",
            "layer", "block", "size", "max rel err", "max abs err", "flagged"
        )?;
        for b in &self.blocks {
            writeln!(
                f,
                "{:>5}  {:<6} {:>6}  {:>12.3e}  {:>12.3e}  {:>7}",
                b.layer,
                b.name,
                b.len,
                b.max_rel_error,
                b.max_abs_error,
                b.flagged.len()
            )?;
        }
        write!(
            f,
            "max relative error {:.3e} (tol {:.1e}, h {:.1e}): {}",
            self.max_rel_error(),
            self.tol,
            self.step,
            if self.passed() { "PASS" } else { "FAIL" }
        )
    }
}

/// Compares `net`'s backward pass against central differences
/// `(f(p + h) - f(p - h)) / 2h` of `loss(net(x), targets)` for every
/// parameter entry.
pub fn grad_check(
    net: &Network,
    x: &DenseTensor,
    targets: Option<&DenseTensor>,
    loss: LossFunction,
    h: f64,
    tol: f64,
) -> Result<GradCheckReport> {
    let (out, caches) = net.forward(x)?;
    let (_, d_out) = loss.loss_and_grad(&out, targets)?;
    let analytic = net.backward(&caches, &d_out)?;
    check_against(net, x, targets, loss, h, tol, &analytic)
}

/// Like [`grad_check`], but against caller-supplied analytic gradients.
pub fn check_against(
    net: &Network,
    x: &DenseTensor,
    targets: Option<&DenseTensor>,
    loss: LossFunction,
    h: f64,
    tol: f64,
    analytic: &[Gradients],
) -> Result<GradCheckReport> {
    if !(h > 0.0) {
        return Err(Error::Argument(format!("finite-difference step must be positive, got {h}")));
    }
    let analytic = gradient_blocks(analytic);
    let layout = net.block_layout();
    if analytic.len() != layout.len() {
        return Err(Error::State(format!(
            "{} gradient blocks for {} parameter blocks",
            analytic.len(),
            layout.len()
        )));
    }
    let mut probe = net.clone();
    let eval = |probe: &Network| -> Result<f64> { loss.loss(&probe.infer(x)?, targets) };

    let mut blocks = Vec::with_capacity(layout.len());
    for (b, (layer, name)) in layout.into_iter().enumerate() {
        let len = analytic[b].len();
        let mut report = BlockReport {
            layer,
            name,
            len,
            max_rel_error: 0.0,
            max_abs_error: 0.0,
            worst_index: 0,
            flagged: Vec::new(),
        };
        for k in 0..len {
            let original = probe.param_blocks()[b][k];
            probe.param_blocks_mut()[b][k] = original + h;
            let plus = eval(&probe)?;
            probe.param_blocks_mut()[b][k] = original - h;
            let minus = eval(&probe)?;
            probe.param_blocks_mut()[b][k] = original;

            let numeric = (plus - minus) / (2.0 * h);
            let a = analytic[b][k];
            let rel = relative_error(a, numeric);
            if rel > report.max_rel_error {
                report.max_rel_error = rel;
                report.worst_index = k;
            }
            report.max_abs_error = report.max_abs_error.max((a - numeric).abs());
            if rel > tol {
                report.flagged.push(k);
            }
        }
        blocks.push(report);
    }
    Ok(GradCheckReport { tol, step: h, blocks })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::activation::Activation;
    use crate::layer::TensorLayer;
    use crate::tensor::Shape;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn setup(act: Activation, seed: u64) -> (Network, DenseTensor, DenseTensor) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let a = TensorLayer::init(&[3, 3], &[2, 2], act, &mut rng).unwrap();
        let b = TensorLayer::init(&[2, 2], &[1, 1], Activation::Identity, &mut rng).unwrap();
        let mut net = Network::new(vec![a.into(), b.into()]).unwrap();
        for block in net.param_blocks_mut() {
            for v in block.iter_mut() {
                *v = rng.random_range(-1.0..1.0);
            }
        }
        let x = DenseTensor::from_fn(Shape::new(vec![3, 3, 4]).unwrap(), |_| rng.random_range(-1.0..1.0));
        let t = DenseTensor::from_fn(Shape::new(vec![1, 1, 4]).unwrap(), |_| rng.random_range(0.0..1.0));
        (net, x, t)
    }

    #[test]
    fn identity_net_is_tight() {
        let (net, x, t) = setup(Activation::Identity, 1);
        let report = grad_check(&net, &x, Some(&t), LossFunction::BceLogits, 1e-5, 1e-7).unwrap();
        assert!(report.passed(), "{report}");
    }

    #[test]
    fn sigmoid_net_passes() {
        let (net, x, t) = setup(Activation::Sigmoid, 2);
        let report = grad_check(&net, &x, Some(&t), LossFunction::BceLogits, 1e-5, 1e-5).unwrap();
        assert!(report.passed(), "{report}");
        assert_eq!(report.blocks.len(), 6);
    }

    #[test]
    fn corrupted_entry_is_flagged() {
        let (net, x, t) = setup(Activation::Tanh, 3);
        let (out, caches) = net.forward(&x).unwrap();
        let (_, d) = LossFunction::BceLogits.loss_and_grad(&out, Some(&t)).unwrap();
        let mut grads = net.backward(&caches, &d).unwrap();
        grads[0].blocks_mut()[1][2] *= 2.0;
        let report =
            check_against(&net, &x, Some(&t), LossFunction::BceLogits, 1e-5, 1e-4, &grads).unwrap();
        assert!(!report.passed());
        let failing: Vec<_> = report.failing_blocks().collect();
        assert_eq!(failing.len(), 1);
        assert_eq!((failing[0].layer, failing[0].name.as_str()), (0, "U1"));
        assert_eq!(failing[0].flagged, vec![2]);
    }

    #[test]
    fn rejects_non_positive_step() {
        let (net, x, t) = setup(Activation::Tanh, 4);
        assert!(matches!(
            grad_check(&net, &x, Some(&t), LossFunction::BceLogits, 0.0, 1e-4),
            Err(Error::Argument(_))
        ));
    }
}
