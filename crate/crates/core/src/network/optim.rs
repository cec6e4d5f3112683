use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::network::{Gradients, Network};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum OptimizerConfig {
    Sgd {
        lr: f64,
    },
    Adam {
        lr: f64,
        #[serde(default = "default_beta1")]
        beta1: f64,
        #[serde(default = "default_beta2")]
        beta2: f64,
        #[serde(default = "default_eps")]
        eps: f64,
    },
}

fn default_beta1() -> f64 {
    0.5
}

fn default_beta2() -> f64 {
    0.999
}

fn default_eps() -> f64 {
    1e-8
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        OptimizerConfig::Adam {
            lr: 2e-4,
            beta1: default_beta1(),
            beta2: default_beta2(),
            eps: default_eps(),
        }
    }
}

impl OptimizerConfig {
    pub fn lr(&self) -> f64 {
        match *self {
            OptimizerConfig::Sgd { lr } | OptimizerConfig::Adam { lr, .. } => lr,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let ok = match *self {
            OptimizerConfig::Sgd { lr } => lr.is_finite() && lr >= 0.0,
            OptimizerConfig::Adam {
                lr,
                beta1,
                beta2,
                eps,
            } => {
                lr.is_finite()
                    && lr >= 0.0
                    && (0.0..1.0).contains(&beta1)
                    && (0.0..1.0).contains(&beta2)
                    && eps > 0.0
            }
        };
        if ok {
            Ok(())
        } else {
            Err(Error::Config(format!("invalid optimizer settings {self:?}")))
        }
    }
}

/// Optimizer with its per-parameter state.
#[derive(Clone, Debug, PartialEq)]
pub struct Optimizer {
    config: OptimizerConfig,
    steps: u64,
    first_moment: Vec<Vec<f64>>,
    second_moment: Vec<Vec<f64>>,
}

impl Optimizer {
    pub fn new(config: OptimizerConfig) -> Self {
        Optimizer {
            config,
            steps: 0,
            first_moment: Vec::new(),
            second_moment: Vec::new(),
        }
    }

    pub fn config(&self) -> &OptimizerConfig {
        &self.config
    }

    pub fn steps(&self) -> u64 {
        self.steps
    }

    /// Applies one update to `net` in place.
    pub fn step(&mut self, net: &mut Network, grads: &[Gradients]) -> Result<()> {
        let grad_blocks: Vec<&[f64]> = grads.iter().flat_map(Gradients::blocks).collect();
        let mut params = net.param_blocks_mut();
        if params.len() != grad_blocks.len()
            || params.iter().zip(&grad_blocks).any(|(p, g)| p.len() != g.len())
        {
            return Err(Error::shape(
                "gradient blocks do not mirror the network parameters",
            ));
        }
        match self.config {
            OptimizerConfig::Sgd { lr } => {
                for (p, g) in params.iter_mut().zip(&grad_blocks) {
                    for (pv, gv) in p.iter_mut().zip(g.iter()) {
                        *pv -= lr * gv;
                    }
                }
            }
            OptimizerConfig::Adam {
                lr,
                beta1,
                beta2,
                eps,
            } => {
                if self.first_moment.is_empty() {
                    self.first_moment = grad_blocks.iter().map(|g| vec![0.0; g.len()]).collect();
                    self.second_moment = self.first_moment.clone();
                } else if self.first_moment.len() != grad_blocks.len()
                    || self.first_moment.iter().zip(&grad_blocks).any(|(m, g)| m.len() != g.len())
                {
                    return Err(Error::shape("optimizer state belongs to a different network"));
                }
                let t = (self.steps + 1) as i32;
                let c1 = 1.0 - beta1.powi(t);
                let c2 = 1.0 - beta2.powi(t);
                for (((p, g), m), v) in params
                    .iter_mut()
                    .zip(&grad_blocks)
                    .zip(self.first_moment.iter_mut())
                    .zip(self.second_moment.iter_mut())
                {
                    for (((pv, &gv), mv), vv) in
                        p.iter_mut().zip(g.iter()).zip(m.iter_mut()).zip(v.iter_mut())
                    {
                        *mv = beta1 * *mv + (1.0 - beta1) * gv;
                        *vv = beta2 * *vv + (1.0 - beta2) * gv * gv;
                        let m_hat = *mv / c1;
                        let v_hat = *vv / c2;
                        *pv -= lr * m_hat / (v_hat.sqrt() + eps);
                    }
                }
            }
        }
        self.steps += 1;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::activation::Activation;
    use crate::layer::TensorLayer;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn net_and_grads(seed: u64) -> (Network, Vec<Gradients>) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let layer = TensorLayer::init(&[3, 2], &[2, 2], Activation::Tanh, &mut rng).unwrap();
        let net = Network::new(vec![layer.into()]).unwrap();
        let x = crate::tensor::DenseTensor::from_vec(
            vec![3, 2, 2],
            (0..12).map(|_| rng.random_range(-1.0..1.0)).collect(),
        )
        .unwrap();
        let (out, caches) = net.forward(&x).unwrap();
        let grads = net.backward(&caches, &out).unwrap();
        (net, grads)
    }

    fn zeroed(grads: &[Gradients]) -> Vec<Gradients> {
        let mut g = grads.to_vec();
        for block in g.iter_mut().flat_map(Gradients::blocks_mut) {
            block.fill(0.0);
        }
        g
    }

    #[test]
    fn sgd_zero_gradient_is_a_no_op() {
        let (mut net, grads) = net_and_grads(1);
        let before = net.clone();
        let zero = zeroed(&grads);
        Optimizer::new(OptimizerConfig::Sgd { lr: 0.3 }).step(&mut net, &zero).unwrap();
        assert_eq!(net, before);
    }

    #[test]
    fn sgd_unit_step_on_params_zeroes_them() {
        let (mut net, grads) = net_and_grads(2);
        let mut g = grads.clone();
        for (dst, src) in g
            .iter_mut()
            .flat_map(Gradients::blocks_mut)
            .zip(net.param_blocks())
        {
            dst.copy_from_slice(src);
        }
        Optimizer::new(OptimizerConfig::Sgd { lr: 1.0 }).step(&mut net, &g).unwrap();
        assert!(net.param_blocks().iter().all(|b| b.iter().all(|&v| v == 0.0)));
    }

    #[test]
    fn adam_first_step_closed_form() {
        let (mut net, grads) = net_and_grads(3);
        let before: Vec<Vec<f64>> = net.param_blocks().iter().map(|b| b.to_vec()).collect();
        let (lr, eps) = (0.01, 1e-8);
        let mut opt = Optimizer::new(OptimizerConfig::Adam {
            lr,
            beta1: 0.5,
            beta2: 0.999,
            eps,
        });
        opt.step(&mut net, &grads).unwrap();
        // After bias correction the first moment is g and the second is g²,
        // so the step is -lr·g/(|g| + ε).
        for ((p, p0), g) in net
            .param_blocks()
            .iter()
            .zip(&before)
            .zip(grads.iter().flat_map(Gradients::blocks))
        {
            for k in 0..p.len() {
                let expected = p0[k] - lr * g[k] / (g[k].abs() + eps);
                assert!((p[k] - expected).abs() < 1e-14, "{} vs {expected}", p[k]);
            }
        }
        assert_eq!(opt.steps(), 1);
    }

    #[test]
    fn rejects_mismatched_gradients() {
        let (mut net, grads) = net_and_grads(4);
        let mut opt = Optimizer::new(OptimizerConfig::default());
        assert!(matches!(opt.step(&mut net, &grads[..0]), Err(Error::Shape(_))));
        let (mut other, other_grads) = {
            let mut rng = ChaCha8Rng::seed_from_u64(9);
            let layer = TensorLayer::init(&[2, 2], &[2, 2], Activation::Tanh, &mut rng).unwrap();
            let net = Network::new(vec![layer.into()]).unwrap();
            let x = crate::tensor::DenseTensor::filled(
                crate::tensor::Shape::new(vec![2, 2, 1]).unwrap(),
                0.5,
            );
            let (out, caches) = net.forward(&x).unwrap();
            let g = net.backward(&caches, &out).unwrap();
            (net, g)
        };
        assert!(opt.step(&mut net, &grads).is_ok());
        assert!(matches!(opt.step(&mut other, &other_grads), Err(Error::Shape(_))));
    }

    #[test]
    fn config_defaults_and_validation() {
        let cfg: OptimizerConfig = toml::from_str("kind = \"adam\"\nlr = 0.001").unwrap();
        assert_eq!(
            cfg,
            OptimizerConfig::Adam {
                lr: 0.001,
                beta1: 0.5,
                beta2: 0.999,
                eps: 1e-8
            }
        );
        assert!(OptimizerConfig::Sgd { lr: -1.0 }.validate().is_err());
        assert!(OptimizerConfig::default().validate().is_ok());
    }
}
