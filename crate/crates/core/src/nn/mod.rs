//! A small feedforward classifier with explicit forward and backward passes.
//!
//! Activations are flat `f64` buffers; image-shaped tensors are laid out
//! channel-major (`[channel][row][col]`). The final layer always produces
//! two logits.

mod checkpoint;
mod train;

pub use checkpoint::{read_checkpoint, write_checkpoint, CHECKPOINT_MAGIC};
pub use train::{train, TrainConfig, TrainReport};

use std::fmt;

use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{shape_mismatch, Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Shape {
    Image {
        channels: usize,
        height: usize,
        width: usize,
    },
    Flat { len: usize },
}

impl Shape {
    pub fn image(channels: usize, height: usize, width: usize) -> Self {
        Shape::Image {
            channels,
            height,
            width,
        }
    }

    pub fn len(&self) -> usize {
        match *self {
            Shape::Image {
                channels,
                height,
                width,
            } => channels * height * width,
            Shape::Flat { len } => len,
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

impl fmt::Display for Shape {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Shape::Image {
                channels,
                height,
                width,
            } => write!(f, "{channels}x{height}x{width}"),
            Shape::Flat { len } => write!(f, "[{len}]"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum LayerSpec {
    Dense {
        inputs: usize,
        outputs: usize,
    },
    /// Valid (unpadded) convolution with a square kernel.
    Conv2d {
        in_channels: usize,
        out_channels: usize,
        kernel: usize,
        stride: usize,
    },
    Relu,
    Flatten,
    /// Removes one direction from the activation relative to an anchor:
    /// `a - <a - anchor, d> d`. Parameters are frozen.
    Project { dim: usize },
}

impl LayerSpec {
    fn output_shape(&self, input: Shape) -> Result<Shape> {
        match (*self, input) {
            (LayerSpec::Dense { inputs, outputs }, Shape::Flat { len }) if len == inputs => {
                Ok(Shape::Flat { len: outputs })
            }
            (
                LayerSpec::Conv2d {
                    in_channels,
                    out_channels,
                    kernel,
                    stride,
                },
                Shape::Image {
                    channels,
                    height,
                    width,
                },
            ) if channels == in_channels && kernel >= 1 && stride >= 1 && kernel <= height && kernel <= width => {
                Ok(Shape::image(
                    out_channels,
                    (height - kernel) / stride + 1,
                    (width - kernel) / stride + 1,
                ))
            }
            (LayerSpec::Relu, s) => Ok(s),
            (LayerSpec::Flatten, s) => Ok(Shape::Flat { len: s.len() }),
            (LayerSpec::Project { dim }, s) if s.len() == dim => Ok(s),
            (spec, s) => Err(shape_mismatch(format!("input fitting {spec:?}"), s)),
        }
    }

    /// `(weights, biases)` parameter counts.
    fn param_counts(&self) -> (usize, usize) {
        match *self {
            LayerSpec::Dense { inputs, outputs } => (inputs * outputs, outputs),
            LayerSpec::Conv2d {
                in_channels,
                out_channels,
                kernel,
                ..
            } => (out_channels * in_channels * kernel * kernel, out_channels),
            LayerSpec::Project { dim } => (dim, dim),
            LayerSpec::Relu | LayerSpec::Flatten => (0, 0),
        }
    }

    /// Layers whose forward map is affine in their input.
    pub fn is_affine(&self) -> bool {
        matches!(
            self,
            LayerSpec::Dense { .. } | LayerSpec::Conv2d { .. } | LayerSpec::Project { .. }
        )
    }

    pub fn is_trainable(&self) -> bool {
        matches!(self, LayerSpec::Dense { .. } | LayerSpec::Conv2d { .. })
    }
}

/// A layer with its parameters. Dense weights are `[out][in]`; conv weights
/// are `[out_ch][in_ch][ky][kx]`. For `Project`, `weights` holds the unit
/// direction and `bias` the anchor point.
#[derive(Debug, Clone, PartialEq)]
pub struct Layer {
    pub spec: LayerSpec,
    pub weights: Vec<f64>,
    pub bias: Vec<f64>,
    in_shape: Shape,
    out_shape: Shape,
}

impl Layer {
    pub fn in_shape(&self) -> Shape {
        self.in_shape
    }

    pub fn out_shape(&self) -> Shape {
        self.out_shape
    }

    fn forward(&self, input: &[f64]) -> Vec<f64> {
        match self.spec {
            LayerSpec::Dense { inputs, outputs } => (0..outputs)
                .map(|o| {
                    let row = &self.weights[o * inputs..(o + 1) * inputs];
                    self.bias[o] + dot(row, input)
                })
                .collect(),
            LayerSpec::Conv2d { .. } => {
                let geo = ConvGeometry::new(self);
                let mut out = vec![0.0; self.out_shape.len()];
                for o in 0..geo.out_ch {
                    for y in 0..geo.oh {
                        for x in 0..geo.ow {
                            let mut acc = self.bias[o];
                            geo.for_each_tap(o, y, x, |w_idx, in_idx| {
                                acc += self.weights[w_idx] * input[in_idx];
                            });
                            out[geo.out_index(o, y, x)] = acc;
                        }
                    }
                }
                out
            }
            LayerSpec::Relu => input.iter().map(|&v| v.max(0.0)).collect(),
            LayerSpec::Flatten => input.to_vec(),
            LayerSpec::Project { .. } => {
                let dir = &self.weights;
                let coef: f64 = input
                    .iter()
                    .zip(&self.bias)
                    .zip(dir)
                    .map(|((a, b), d)| (a - b) * d)
                    .sum();
                input.iter().zip(dir).map(|(a, d)| a - coef * d).collect()
            }
        }
    }

    /// Gradient with respect to the layer input given the gradient with
    /// respect to its output. `input` is only read by ReLU.
    pub(crate) fn backward_input(&self, input: &[f64], grad_out: &[f64]) -> Vec<f64> {
        match self.spec {
            LayerSpec::Dense { inputs, outputs } => {
                let mut g = vec![0.0; inputs];
                for o in 0..outputs {
                    let go = grad_out[o];
                    if go == 0.0 {
                        continue;
                    }
                    let row = &self.weights[o * inputs..(o + 1) * inputs];
                    for (gi, w) in g.iter_mut().zip(row) {
                        *gi += w * go;
                    }
                }
                g
            }
            LayerSpec::Conv2d { .. } => {
                let geo = ConvGeometry::new(self);
                let mut g = vec![0.0; self.in_shape.len()];
                for o in 0..geo.out_ch {
                    for y in 0..geo.oh {
                        for x in 0..geo.ow {
                            let go = grad_out[geo.out_index(o, y, x)];
                            if go == 0.0 {
                                continue;
                            }
                            geo.for_each_tap(o, y, x, |w_idx, in_idx| {
                                g[in_idx] += self.weights[w_idx] * go;
                            });
                        }
                    }
                }
                g
            }
            // derivative at exactly zero is taken as zero
            LayerSpec::Relu => input
                .iter()
                .zip(grad_out)
                .map(|(&a, &g)| if a > 0.0 { g } else { 0.0 })
                .collect(),
            LayerSpec::Flatten => grad_out.to_vec(),
            LayerSpec::Project { .. } => {
                let dir = &self.weights;
                let coef = dot(grad_out, dir);
                grad_out.iter().zip(dir).map(|(g, d)| g - coef * d).collect()
            }
        }
    }

    fn accumulate_param_grads(&self, input: &[f64], grad_out: &[f64], gw: &mut [f64], gb: &mut [f64]) {
        match self.spec {
            LayerSpec::Dense { inputs, outputs } => {
                for o in 0..outputs {
                    let go = grad_out[o];
                    gb[o] += go;
                    if go == 0.0 {
                        continue;
                    }
                    for (w, a) in gw[o * inputs..(o + 1) * inputs].iter_mut().zip(input) {
                        *w += go * a;
                    }
                }
            }
            LayerSpec::Conv2d { .. } => {
                let geo = ConvGeometry::new(self);
                for o in 0..geo.out_ch {
                    for y in 0..geo.oh {
                        for x in 0..geo.ow {
                            let go = grad_out[geo.out_index(o, y, x)];
                            gb[o] += go;
                            if go == 0.0 {
                                continue;
                            }
                            geo.for_each_tap(o, y, x, |w_idx, in_idx| {
                                gw[w_idx] += go * input[in_idx];
                            });
                        }
                    }
                }
            }
            _ => {}
        }
    }

    /// Relevance carried off by the bias term under the epsilon rule, for
    /// per-output scaled relevances `s`.
    pub(crate) fn bias_share(&self, s: &[f64]) -> f64 {
        match self.spec {
            LayerSpec::Dense { .. } => dot(&self.bias, s),
            LayerSpec::Conv2d { .. } => {
                let geo = ConvGeometry::new(self);
                let plane = geo.oh * geo.ow;
                (0..geo.out_ch)
                    .map(|o| self.bias[o] * s[o * plane..(o + 1) * plane].iter().sum::<f64>())
                    .sum()
            }
            LayerSpec::Project { .. } => dot(&self.weights, &self.bias) * dot(&self.weights, s),
            _ => 0.0,
        }
    }
}

struct ConvGeometry {
    in_ch: usize,
    out_ch: usize,
    h: usize,
    w: usize,
    k: usize,
    stride: usize,
    oh: usize,
    ow: usize,
}

impl ConvGeometry {
    fn new(layer: &Layer) -> Self {
        let (
            LayerSpec::Conv2d {
                in_channels,
                out_channels,
                kernel,
                stride,
            },
            Shape::Image { height, width, .. },
            Shape::Image {
                height: oh,
                width: ow,
                ..
            },
        ) = (layer.spec, layer.in_shape, layer.out_shape)
        else {
            unreachable!("conv geometry requested for {:?}", layer.spec)
        };
        Self {
            in_ch: in_channels,
            out_ch: out_channels,
            h: height,
            w: width,
            k: kernel,
            stride,
            oh,
            ow,
        }
    }

    #[inline]
    fn out_index(&self, o: usize, y: usize, x: usize) -> usize {
        (o * self.oh + y) * self.ow + x
    }

    #[inline]
    fn for_each_tap(&self, o: usize, y: usize, x: usize, mut f: impl FnMut(usize, usize)) {
        let k2 = self.k * self.k;
        for c in 0..self.in_ch {
            let w_base = (o * self.in_ch + c) * k2;
            let in_base = c * self.h * self.w;
            for ky in 0..self.k {
                let row = in_base + (y * self.stride + ky) * self.w + x * self.stride;
                for kx in 0..self.k {
                    f(w_base + ky * self.k + kx, row + kx);
                }
            }
        }
    }
}

#[inline]
pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Output of a forward pass. `activations[0]` is the input and
/// `activations[i + 1]` the output of layer `i`; the last entry holds the
/// two logits.
#[derive(Debug, Clone, PartialEq)]
pub struct Forward {
    pub logits: [f64; 2],
    pub activations: Vec<Vec<f64>>,
}

impl Forward {
    /// Softmax probability of class 1.
    pub fn score(&self) -> f64 {
        sigmoid(self.logits[1] - self.logits[0])
    }
}

pub(crate) fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TinyNet {
    input: Shape,
    layers: Vec<Layer>,
}

impl TinyNet {
    /// Builds a net with all parameters zero.
    pub fn new(input: Shape, specs: &[LayerSpec]) -> Result<Self> {
        let mut layers = Vec::with_capacity(specs.len());
        let mut shape = input;
        for spec in specs {
            let out = spec.output_shape(shape)?;
            let (nw, nb) = spec.param_counts();
            layers.push(Layer {
                spec: *spec,
                weights: vec![0.0; nw],
                bias: vec![0.0; nb],
                in_shape: shape,
                out_shape: out,
            });
            shape = out;
        }
        if shape != (Shape::Flat { len: 2 }) {
            return Err(shape_mismatch("2 output logits", shape));
        }
        Ok(Self { input, layers })
    }

    /// He-normal weights, zero biases.
    pub fn new_random(input: Shape, specs: &[LayerSpec], rng: &mut impl Rng) -> Result<Self> {
        let mut net = Self::new(input, specs)?;
        for layer in &mut net.layers {
            let fan_in = match layer.spec {
                LayerSpec::Dense { inputs, .. } => inputs,
                LayerSpec::Conv2d {
                    in_channels, kernel, ..
                } => in_channels * kernel * kernel,
                _ => continue,
            };
            let normal = Normal::new(0.0, (2.0 / fan_in as f64).sqrt()).expect("positive std");
            for w in &mut layer.weights {
                *w = normal.sample(rng);
            }
        }
        Ok(net)
    }

    pub fn input_shape(&self) -> Shape {
        self.input
    }

    pub fn layers(&self) -> &[Layer] {
        &self.layers
    }

    pub fn layers_mut(&mut self) -> &mut [Layer] {
        &mut self.layers
    }

    pub fn specs(&self) -> Vec<LayerSpec> {
        self.layers.iter().map(|l| l.spec).collect()
    }

    pub fn num_params(&self) -> usize {
        self.layers.iter().map(|l| l.weights.len() + l.bias.len()).sum()
    }

    /// Spatial size of attribution maps: `(height, width)` of the input, or
    /// `(1, len)` for flat inputs.
    pub fn map_shape(&self) -> (usize, usize) {
        match self.input {
            Shape::Image { height, width, .. } => (height, width),
            Shape::Flat { len } => (1, len),
        }
    }

    pub(crate) fn check_input(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.input.len() {
            return Err(shape_mismatch(self.input, format!("{} values", x.len())));
        }
        if let Some(i) = x.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite(i));
        }
        Ok(())
    }

    pub fn forward(&self, x: &[f64]) -> Result<Forward> {
        self.check_input(x)?;
        Ok(self.forward_unchecked(x))
    }

    pub(crate) fn forward_unchecked(&self, x: &[f64]) -> Forward {
        let mut activations = Vec::with_capacity(self.layers.len() + 1);
        activations.push(x.to_vec());
        for layer in &self.layers {
            let next = layer.forward(activations.last().expect("nonempty"));
            activations.push(next);
        }
        let out = activations.last().expect("nonempty");
        Forward {
            logits: [out[0], out[1]],
            activations,
        }
    }

    pub fn logits(&self, x: &[f64]) -> Result<[f64; 2]> {
        Ok(self.forward(x)?.logits)
    }

    /// Softmax probability of class 1.
    pub fn score(&self, x: &[f64]) -> Result<f64> {
        Ok(self.forward(x)?.score())
    }

    /// Backpropagates `grad_logits` through a cached forward pass and returns
    /// the input gradient. Parameter gradients are accumulated into `grads`
    /// when given.
    pub(crate) fn backward(
        &self,
        fwd: &Forward,
        grad_logits: [f64; 2],
        mut grads: Option<&mut [(Vec<f64>, Vec<f64>)]>,
    ) -> Vec<f64> {
        let mut g = grad_logits.to_vec();
        for (i, layer) in self.layers.iter().enumerate().rev() {
            let input = &fwd.activations[i];
            if let Some(grads) = grads.as_deref_mut() {
                if layer.spec.is_trainable() {
                    let (gw, gb) = &mut grads[i];
                    layer.accumulate_param_grads(input, &g, gw, gb);
                }
            }
            g = layer.backward_input(input, &g);
        }
        g
    }

    /// Activation after layer `site`, flattened.
    pub fn activation_at(&self, x: &[f64], site: usize) -> Result<Vec<f64>> {
        if site >= self.layers.len() {
            return Err(Error::InvalidLayer {
                index: site,
                layers: self.layers.len(),
            });
        }
        let mut fwd = self.forward(x)?;
        Ok(fwd.activations.swap_remove(site + 1))
    }

    /// Inserts a frozen projection layer right after layer `site`.
    pub(crate) fn insert_projection(&mut self, site: usize, direction: Vec<f64>, anchor: Vec<f64>) -> Result<()> {
        if site + 1 >= self.layers.len() {
            return Err(Error::InvalidLayer {
                index: site,
                layers: self.layers.len(),
            });
        }
        let shape = self.layers[site].out_shape;
        if direction.len() != shape.len() || anchor.len() != shape.len() {
            return Err(shape_mismatch(shape, format!("{} values", direction.len())));
        }
        self.layers.insert(
            site + 1,
            Layer {
                spec: LayerSpec::Project { dim: shape.len() },
                weights: direction,
                bias: anchor,
                in_shape: shape,
                out_shape: shape,
            },
        );
        Ok(())
    }

    /// Rounds every parameter to single precision, the checkpoint precision.
    pub fn quantize_to_f32(&mut self) {
        for layer in &mut self.layers {
            for v in layer.weights.iter_mut().chain(layer.bias.iter_mut()) {
                *v = *v as f32 as f64;
            }
        }
    }
}

/// Convenience builder for common stacks.
#[derive(Debug, Clone)]
pub struct NetBuilder {
    input: Shape,
    specs: Vec<LayerSpec>,
    shape: Shape,
}

impl NetBuilder {
    pub fn new(input: Shape) -> Self {
        Self {
            input,
            specs: Vec::new(),
            shape: input,
        }
    }

    fn push(mut self, spec: LayerSpec) -> Self {
        if let Ok(s) = spec.output_shape(self.shape) {
            self.shape = s;
        }
        self.specs.push(spec);
        self
    }

    /// Dense layer taking whatever the current flat width is.
    pub fn dense(self, outputs: usize) -> Self {
        let inputs = self.shape.len();
        self.push(LayerSpec::Dense { inputs, outputs })
    }

    pub fn conv2d(self, out_channels: usize, kernel: usize, stride: usize) -> Self {
        let in_channels = match self.shape {
            Shape::Image { channels, .. } => channels,
            Shape::Flat { .. } => 0,
        };
        self.push(LayerSpec::Conv2d {
            in_channels,
            out_channels,
            kernel,
            stride,
        })
    }

    pub fn relu(self) -> Self {
        self.push(LayerSpec::Relu)
    }

    pub fn flatten(self) -> Self {
        self.push(LayerSpec::Flatten)
    }

    pub fn specs(&self) -> &[LayerSpec] {
        &self.specs
    }

    pub fn build(self) -> Result<TinyNet> {
        TinyNet::new(self.input, &self.specs)
    }

    pub fn build_random(self, rng: &mut impl Rng) -> Result<TinyNet> {
        TinyNet::new_random(self.input, &self.specs, rng)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn flat(n: usize) -> Shape {
        Shape::image(1, 1, n)
    }

    #[test]
    fn zero_weight_net_outputs_biases() {
        let mut net = NetBuilder::new(flat(3)).flatten().dense(4).relu().dense(2).build().unwrap();
        let last = net.layers_mut().last_mut().unwrap();
        last.bias = vec![0.25, -1.5];
        assert_eq!(net.logits(&[3.0, -2.0, 7.0]).unwrap(), [0.25, -1.5]);
    }

    #[test]
    fn identity_dense_layer() {
        let mut net = NetBuilder::new(flat(2)).flatten().dense(2).build().unwrap();
        net.layers_mut()[1].weights = vec![1.0, 0.0, 0.0, 1.0];
        assert_eq!(net.logits(&[1.0, 0.0]).unwrap(), [1.0, 0.0]);
    }

    #[test]
    fn rejects_mismatched_shapes() {
        assert!(TinyNet::new(flat(3), &[LayerSpec::Dense { inputs: 3, outputs: 2 }]).is_err());
        assert!(NetBuilder::new(flat(3)).flatten().dense(3).build().is_err());
        let net = NetBuilder::new(flat(3)).flatten().dense(2).build().unwrap();
        assert!(matches!(net.forward(&[1.0, 2.0]), Err(Error::ShapeMismatch { .. })));
        assert!(matches!(net.forward(&[1.0, f64::NAN, 0.0]), Err(Error::NonFinite(1))));
    }

    #[test]
    fn conv_matches_hand_computation() {
        // 1x3x3 input, one 2x2 kernel, stride 1 -> 2x2 output
        let mut net = NetBuilder::new(Shape::image(1, 3, 3))
            .conv2d(1, 2, 1)
            .flatten()
            .dense(2)
            .build()
            .unwrap();
        net.layers_mut()[0].weights = vec![1.0, 2.0, 3.0, 4.0];
        net.layers_mut()[0].bias = vec![0.5];
        let x: Vec<f64> = (1..=9).map(|v| v as f64).collect();
        let fwd = net.forward(&x).unwrap();
        // top-left window [1,2,4,5] -> 1 + 4 + 12 + 20 + 0.5
        assert_eq!(fwd.activations[1], vec![37.5, 47.5, 67.5, 77.5]);
    }

    #[test]
    fn strided_conv_output_shape() {
        let net = NetBuilder::new(Shape::image(2, 7, 5))
            .conv2d(3, 3, 2)
            .relu()
            .flatten()
            .dense(2)
            .build()
            .unwrap();
        assert_eq!(net.layers()[0].out_shape(), Shape::image(3, 3, 2));
    }

    #[test]
    fn projection_removes_direction() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let mut net = NetBuilder::new(flat(3)).flatten().dense(3).relu().dense(2).build_random(&mut rng).unwrap();
        net.insert_projection(1, vec![1.0, 0.0, 0.0], vec![0.5, 0.0, 0.0]).unwrap();
        let a = net.forward(&[1.0, 2.0, 3.0]).unwrap().activations[3].clone();
        assert_eq!(a[0], 0.5);
        assert!(matches!(
            net.insert_projection(4, vec![1.0, 0.0], vec![0.0, 0.0]),
            Err(Error::InvalidLayer { .. })
        ));
    }
}
