use crate::error::Result;
use crate::rng::{Lane, SplitMix64};
use crate::scalar::Scalar;

use super::spec::NetworkSpec;
use super::tensor::Tensor;

#[derive(Debug, Clone, PartialEq)]
pub struct LayerParams<T> {
    /// Index of the owning layer in the spec.
    pub layer: usize,
    pub weight: Tensor<T>,
    pub bias: Tensor<T>,
}

/// Learnable tensors of every conv/dense layer, in layer order.
#[derive(Debug, Clone, PartialEq)]
pub struct Parameters<T> {
    pub layers: Vec<LayerParams<T>>,
}

/// Same shapes as [`Parameters`].
pub type Gradients<T> = Parameters<T>;

impl<T: Scalar> Parameters<T> {
    pub fn zeros_like(spec: &NetworkSpec) -> Result<Self> {
        spec.validate()?;
        let layers = spec
            .layers
            .iter()
            .enumerate()
            .filter_map(|(i, l)| l.param_shapes().map(|s| (i, s)))
            .map(|(layer, (w, b, _))| LayerParams { layer, weight: Tensor::zeros(w), bias: Tensor::zeros(b) })
            .collect();
        Ok(Self { layers })
    }

    pub fn for_layer(&self, layer: usize) -> Option<&LayerParams<T>> {
        self.layers.iter().find(|p| p.layer == layer)
    }

    /// Flat views over all tensors (weight then bias, layer order).
    pub fn tensors(&self) -> impl Iterator<Item = &Tensor<T>> {
        self.layers.iter().flat_map(|p| [&p.weight, &p.bias])
    }

    pub fn tensors_mut(&mut self) -> impl Iterator<Item = &mut Tensor<T>> {
        self.layers.iter_mut().flat_map(|p| [&mut p.weight, &mut p.bias])
    }

    pub fn count(&self) -> usize {
        self.tensors().map(|t| t.len()).sum()
    }

    pub fn zero(&mut self) {
        self.tensors_mut().for_each(|t| t.fill(T::zero()));
    }

    pub fn all_finite(&self) -> bool {
        self.tensors().all(|t| t.all_finite())
    }

    pub fn same_shape(&self, other: &Self) -> bool {
        self.layers.len() == other.layers.len()
            && self.layers.iter().zip(&other.layers).all(|(a, b)| {
                a.layer == b.layer && a.weight.shape() == b.weight.shape() && a.bias.shape() == b.bias.shape()
            })
    }

    pub fn cast<U: Scalar>(&self) -> Parameters<U> {
        Parameters {
            layers: self
                .layers
                .iter()
                .map(|p| LayerParams { layer: p.layer, weight: p.weight.cast(), bias: p.bias.cast() })
                .collect(),
        }
    }

    /// Adds `other` elementwise.
    pub fn add_assign(&mut self, other: &Self) {
        for (a, b) in self.tensors_mut().zip(other.tensors()) {
            for (x, y) in a.data_mut().iter_mut().zip(b.data()) {
                *x += *y;
            }
        }
    }
}

/// He-normal weights (std = sqrt(2 / fan_in)) from a seeded Box–Muller stream; zero biases.
///
/// Draws are made in `f64` and rounded to `T`, so `f32` and `f64` parameters
/// from the same seed agree to `f32` precision.
pub fn init_params<T: Scalar>(spec: &NetworkSpec, seed: u64) -> Result<Parameters<T>> {
    let mut params = Parameters::<T>::zeros_like(spec)?;
    let mut rng = SplitMix64::lane(seed, Lane::Init);
    for p in params.layers.iter_mut() {
        let (_, _, fan_in) = spec.layers[p.layer].param_shapes().expect("learnable");
        let std = (2.0 / fan_in as f64).sqrt();
        for w in p.weight.data_mut() {
            *w = T::from_f64_lossy(rng.next_gaussian() * std);
        }
    }
    Ok(params)
}
