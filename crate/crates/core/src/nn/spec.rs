//! Layer-stack descriptions and shape validation.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum LayerSpec {
    Conv2d { in_ch: usize, out_ch: usize, kernel: usize, stride: usize, padding: usize },
    Relu,
    MaxPool2,
    Flatten,
    Dense { in_dim: usize, out_dim: usize },
}

impl LayerSpec {
    pub fn conv3x3(in_ch: usize, out_ch: usize) -> Self {
        LayerSpec::Conv2d { in_ch, out_ch, kernel: 3, stride: 1, padding: 1 }
    }

    pub fn dense(in_dim: usize, out_dim: usize) -> Self {
        LayerSpec::Dense { in_dim, out_dim }
    }

    pub fn is_learnable(&self) -> bool {
        matches!(self, LayerSpec::Conv2d { .. } | LayerSpec::Dense { .. })
    }

    /// `(weight shape, bias shape, fan_in)` for learnable layers.
    pub fn param_shapes(&self) -> Option<(Vec<usize>, Vec<usize>, usize)> {
        match *self {
            LayerSpec::Conv2d { in_ch, out_ch, kernel, .. } => {
                Some((vec![out_ch, in_ch, kernel, kernel], vec![out_ch], in_ch * kernel * kernel))
            }
            LayerSpec::Dense { in_dim, out_dim } => Some((vec![out_dim, in_dim], vec![out_dim], in_dim)),
            _ => None,
        }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            LayerSpec::Conv2d { .. } => "conv2d",
            LayerSpec::Relu => "relu",
            LayerSpec::MaxPool2 => "maxpool2",
            LayerSpec::Flatten => "flatten",
            LayerSpec::Dense { .. } => "dense",
        }
    }
}

/// Per-sample activation shape.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ActShape {
    Spatial { c: usize, h: usize, w: usize },
    Flat(usize),
}

impl ActShape {
    pub fn size(self) -> usize {
        match self {
            ActShape::Spatial { c, h, w } => c * h * w,
            ActShape::Flat(d) => d,
        }
    }

    /// Tensor shape for a batch of `b`.
    pub fn batched(self, b: usize) -> Vec<usize> {
        match self {
            ActShape::Spatial { c, h, w } => vec![b, c, h, w],
            ActShape::Flat(d) => vec![b, d],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct NetworkSpec {
    pub name: String,
    /// Input `[channels, height, width]`.
    pub input: [usize; 3],
    pub layers: Vec<LayerSpec>,
}

impl NetworkSpec {
    /// Three conv(3×3, same)+ReLU+pool blocks (16/32/64 channels), a 128-unit
    /// hidden dense layer and a `2N+1`-way output. `size` must be divisible by 8.
    pub fn small_cnn(size: usize, n_max: u32) -> Result<Self> {
        if size == 0 || !size.is_multiple_of(8) {
            return Err(Error::InvalidSpec { layer: 0, detail: format!("input size {size} not divisible by 8") });
        }
        let classes = 2 * n_max as usize + 1;
        let feat = 64 * (size / 8) * (size / 8);
        let spec = Self {
            name: if size == 64 { "small-cnn-64".into() } else { format!("small-cnn-{size}") },
            input: [1, size, size],
            layers: vec![
                LayerSpec::conv3x3(1, 16),
                LayerSpec::Relu,
                LayerSpec::MaxPool2,
                LayerSpec::conv3x3(16, 32),
                LayerSpec::Relu,
                LayerSpec::MaxPool2,
                LayerSpec::conv3x3(32, 64),
                LayerSpec::Relu,
                LayerSpec::MaxPool2,
                LayerSpec::Flatten,
                LayerSpec::dense(feat, 128),
                LayerSpec::Relu,
                LayerSpec::dense(128, classes),
            ],
        };
        spec.validate()?;
        Ok(spec)
    }

    /// The default 64×64 architecture.
    pub fn small_cnn_64(n_max: u32) -> Self {
        Self::small_cnn(64, n_max).expect("64 is divisible by 8")
    }

    /// Gradient-check network: conv 1→2 (3×3) + ReLU, pool, dense on an 8×8 input.
    pub fn toy(classes: usize) -> Self {
        Self {
            name: "toy".into(),
            input: [1, 8, 8],
            layers: vec![
                LayerSpec::conv3x3(1, 2),
                LayerSpec::Relu,
                LayerSpec::MaxPool2,
                LayerSpec::Flatten,
                LayerSpec::dense(32, classes),
            ],
        }
    }

    pub fn input_shape(&self) -> ActShape {
        let [c, h, w] = self.input;
        ActShape::Spatial { c, h, w }
    }

    /// Output shape of every layer; errors name the first incompatible layer.
    pub fn validate(&self) -> Result<Vec<ActShape>> {
        let [c, h, w] = self.input;
        if c == 0 || h == 0 || w == 0 {
            return Err(Error::InvalidSpec { layer: 0, detail: "empty input".into() });
        }
        let mut cur = self.input_shape();
        let mut shapes = Vec::with_capacity(self.layers.len());
        for (i, layer) in self.layers.iter().enumerate() {
            let bad = |detail: String| Error::InvalidSpec { layer: i, detail };
            cur = match (*layer, cur) {
                (LayerSpec::Conv2d { in_ch, out_ch, kernel, stride, padding }, ActShape::Spatial { c, h, w }) => {
                    if in_ch != c {
                        return Err(bad(format!("conv expects {in_ch} channels, input has {c}")));
                    }
                    if kernel % 2 == 0 || stride == 0 || out_ch == 0 {
                        return Err(bad("kernel must be odd, stride and out_ch positive".into()));
                    }
                    let oh = conv_out(h, kernel, stride, padding).ok_or_else(|| bad(format!("height {h} not tiled")))?;
                    let ow = conv_out(w, kernel, stride, padding).ok_or_else(|| bad(format!("width {w} not tiled")))?;
                    ActShape::Spatial { c: out_ch, h: oh, w: ow }
                }
                (LayerSpec::Relu, s) => s,
                (LayerSpec::MaxPool2, ActShape::Spatial { c, h, w }) => {
                    if h % 2 != 0 || w % 2 != 0 {
                        return Err(bad(format!("maxpool needs even extents, got {h}x{w}")));
                    }
                    ActShape::Spatial { c, h: h / 2, w: w / 2 }
                }
                (LayerSpec::Flatten, s) => ActShape::Flat(s.size()),
                (LayerSpec::Dense { in_dim, out_dim }, ActShape::Flat(d)) => {
                    if in_dim != d || out_dim == 0 {
                        return Err(bad(format!("dense expects {in_dim} inputs, got {d}")));
                    }
                    ActShape::Flat(out_dim)
                }
                (l, s) => return Err(bad(format!("{} cannot follow activation {s:?}", l.kind()))),
            };
            shapes.push(cur);
        }
        match cur {
            ActShape::Flat(_) => Ok(shapes),
            _ => Err(Error::InvalidSpec { layer: self.layers.len(), detail: "network must end flat".into() }),
        }
    }

    pub fn output_dim(&self) -> Result<usize> {
        Ok(self.validate()?.last().map(|s| s.size()).unwrap_or(0))
    }

    pub fn param_count(&self) -> usize {
        self.layers
            .iter()
            .filter_map(|l| l.param_shapes())
            .map(|(w, b, _)| w.iter().product::<usize>() + b.iter().product::<usize>())
            .sum()
    }
}

/// `(size + 2p − k) / stride + 1`, or `None` when not integral.
pub fn conv_out(size: usize, kernel: usize, stride: usize, padding: usize) -> Option<usize> {
    let span = (size + 2 * padding).checked_sub(kernel)?;
    (span % stride == 0).then_some(span / stride + 1)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_spec_shapes() {
        let spec = NetworkSpec::small_cnn_64(99);
        let shapes = spec.validate().unwrap();
        assert_eq!(shapes[9], ActShape::Flat(4096));
        assert_eq!(spec.output_dim().unwrap(), 199);
    }

    #[test]
    fn toy_spec_valid() {
        assert_eq!(NetworkSpec::toy(5).output_dim().unwrap(), 5);
    }

    #[test]
    fn conv_shape_algebra() {
        assert_eq!(conv_out(8, 3, 1, 1), Some(8));
        assert_eq!(conv_out(8, 3, 2, 1), None);
        assert_eq!(conv_out(9, 3, 2, 1), Some(5));
        assert_eq!(conv_out(2, 5, 1, 0), None);
    }

    #[test]
    fn rejects_incompatible_stacks() {
        let mut spec = NetworkSpec::toy(3);
        spec.layers[4] = LayerSpec::dense(31, 3);
        assert!(matches!(spec.validate(), Err(Error::InvalidSpec { layer: 4, .. })));

        let mut spec = NetworkSpec::toy(3);
        spec.layers.remove(3);
        assert!(matches!(spec.validate(), Err(Error::InvalidSpec { layer: 3, .. })));

        let mut spec = NetworkSpec::toy(3);
        spec.layers[0] = LayerSpec::Conv2d { in_ch: 1, out_ch: 2, kernel: 3, stride: 2, padding: 1 };
        assert!(matches!(spec.validate(), Err(Error::InvalidSpec { layer: 0, .. })));

        let spec = NetworkSpec { name: "x".into(), input: [1, 6, 6], layers: vec![LayerSpec::MaxPool2] };
        assert!(spec.validate().is_err());
    }

    #[test]
    fn spec_serde_round_trip() {
        let spec = NetworkSpec::small_cnn_64(9);
        let json = serde_json::to_string(&spec).unwrap();
        assert!(json.contains("\"kind\":\"conv2d\""));
        assert_eq!(serde_json::from_str::<NetworkSpec>(&json).unwrap(), spec);
    }
}
