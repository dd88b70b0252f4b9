use crate::nn::{Gradients, Parameters};
use crate::scalar::Scalar;

use super::config::OptimizerConfig;

/// Optimizer state (momentum buffers / Adam moments) for one parameter set.
#[derive(Debug, Clone)]
pub enum Optimizer<T> {
    Sgd { lr: T, momentum: T, velocity: Parameters<T> },
    Adam { lr: T, beta1: T, beta2: T, eps: T, step: i32, m: Parameters<T>, v: Parameters<T> },
}

impl<T: Scalar> Optimizer<T> {
    pub fn new(cfg: &OptimizerConfig, like: &Parameters<T>) -> Self {
        let mut zeros = like.clone();
        zeros.zero();
        let c = T::from_f64_lossy;
        match *cfg {
            OptimizerConfig::Sgd { lr, momentum } => Optimizer::Sgd { lr: c(lr), momentum: c(momentum), velocity: zeros },
            OptimizerConfig::Adam { lr, beta1, beta2, eps } => Optimizer::Adam {
                lr: c(lr),
                beta1: c(beta1),
                beta2: c(beta2),
                eps: c(eps),
                step: 0,
                m: zeros.clone(),
                v: zeros,
            },
        }
    }

    pub fn step(&mut self, params: &mut Parameters<T>, grads: &Gradients<T>) {
        match self {
            Optimizer::Sgd { lr, momentum, velocity } => {
                for ((p, g), vel) in params.tensors_mut().zip(grads.tensors()).zip(velocity.tensors_mut()) {
                    for ((w, &g), v) in p.data_mut().iter_mut().zip(g.data()).zip(vel.data_mut()) {
                        *v = *momentum * *v + g;
                        *w -= *lr * *v;
                    }
                }
            }
            Optimizer::Adam { lr, beta1, beta2, eps, step, m, v } => {
                *step += 1;
                let one = T::one();
                let bc1 = one - beta1.powi(*step);
                let bc2 = one - beta2.powi(*step);
                let tensors = params.tensors_mut().zip(grads.tensors()).zip(m.tensors_mut()).zip(v.tensors_mut());
                for (((p, g), mt), vt) in tensors {
                    let it = p.data_mut().iter_mut().zip(g.data()).zip(mt.data_mut()).zip(vt.data_mut());
                    for (((w, &g), m), v) in it {
                        *m = *beta1 * *m + (one - *beta1) * g;
                        *v = *beta2 * *v + (one - *beta2) * g * g;
                        let mhat = *m / bc1;
                        let vhat = *v / bc2;
                        *w -= *lr * mhat / (vhat.sqrt() + *eps);
                    }
                }
            }
        }
    }
}
