//! Input attributions for [`TinyNet`]: plain gradients, Integrated Gradients
//! and epsilon-rule Layer-wise Relevance Propagation.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{shape_mismatch, Error, Result};
use crate::nn::{Shape, TinyNet};
use crate::types::RelevanceMap;

pub const DEFAULT_IG_STEPS: usize = 64;
pub const DEFAULT_LRP_EPSILON: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum AttributionMethod {
    #[serde(rename = "IG")]
    IntegratedGradients,
    #[serde(rename = "LRP")]
    Lrp,
}

impl AttributionMethod {
    pub fn as_str(self) -> &'static str {
        match self {
            AttributionMethod::IntegratedGradients => "IG",
            AttributionMethod::Lrp => "LRP",
        }
    }
}

impl fmt::Display for AttributionMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for AttributionMethod {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_uppercase().as_str() {
            "IG" => Ok(AttributionMethod::IntegratedGradients),
            "LRP" => Ok(AttributionMethod::Lrp),
            _ => Err(Error::BadValue(format!("unknown attribution method {s:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "method")]
pub enum AttributionMeta {
    #[serde(rename = "IG")]
    IntegratedGradients { steps: usize },
    #[serde(rename = "LRP")]
    Lrp {
        rule: String,
        epsilon: f64,
        /// Relevance absorbed by bias terms, summed over layers.
        bias_absorbed: f64,
        /// Total relevance at each activation, input first, logits last.
        layer_sums: Vec<f64>,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct Attribution {
    /// Channel-summed relevance over the input's spatial grid.
    pub map: RelevanceMap,
    /// Per input element, before channel summation, in double precision.
    pub input_relevance: Vec<f64>,
    pub target_class: u8,
    pub method: AttributionMethod,
    pub meta: AttributionMeta,
}

fn check_class(class: u8) -> Result<()> {
    if class > 1 {
        return Err(Error::BadValue(format!("class {class} is not binary")));
    }
    Ok(())
}

/// Sums channels into a `(height, width)` map.
fn spatial_map(net: &TinyNet, rel: &[f64]) -> Result<RelevanceMap> {
    let (h, w) = net.map_shape();
    let plane = h * w;
    let summed: Vec<f64> = match net.input_shape() {
        Shape::Image { channels, .. } => (0..plane)
            .map(|p| (0..channels).map(|c| rel[c * plane + p]).sum())
            .collect(),
        Shape::Flat { .. } => rel.to_vec(),
    };
    RelevanceMap::from_f64(h, w, &summed)
}

/// Gradient of `logit[class]` with respect to the input.
pub fn input_gradient(net: &TinyNet, x: &[f64], class: u8) -> Result<Vec<f64>> {
    check_class(class)?;
    let fwd = net.forward(x)?;
    let mut seed = [0.0; 2];
    seed[class as usize] = 1.0;
    Ok(net.backward(&fwd, seed, None))
}

/// Integrated Gradients along the straight path from `baseline` to `x`,
/// integrated with the midpoint rule over `steps` intervals.
pub fn integrated_gradients(
    net: &TinyNet,
    x: &[f64],
    baseline: &[f64],
    class: u8,
    steps: usize,
) -> Result<Attribution> {
    check_class(class)?;
    if steps == 0 {
        return Err(Error::BadValue("steps must be at least 1".into()));
    }
    net.check_input(x)?;
    if baseline.len() != x.len() {
        return Err(shape_mismatch(format!("{} baseline values", x.len()), baseline.len()));
    }
    let delta: Vec<f64> = x.iter().zip(baseline).map(|(a, b)| a - b).collect();
    let mut acc = vec![0.0; x.len()];
    let mut point = vec![0.0; x.len()];
    for k in 0..steps {
        let alpha = (k as f64 + 0.5) / steps as f64;
        for ((p, b), d) in point.iter_mut().zip(baseline).zip(&delta) {
            *p = b + alpha * d;
        }
        let g = input_gradient(net, &point, class)?;
        for (a, gi) in acc.iter_mut().zip(&g) {
            *a += gi;
        }
    }
    let rel: Vec<f64> = acc
        .iter()
        .zip(&delta)
        .map(|(g, d)| d * g / steps as f64)
        .collect();
    Ok(Attribution {
        map: spatial_map(net, &rel)?,
        input_relevance: rel,
        target_class: class,
        method: AttributionMethod::IntegratedGradients,
        meta: AttributionMeta::IntegratedGradients { steps },
    })
}

/// Integrated Gradients from the all-zeros baseline with the default step
/// count.
pub fn integrated_gradients_default(net: &TinyNet, x: &[f64], class: u8) -> Result<Attribution> {
    let baseline = vec![0.0; x.len()];
    integrated_gradients(net, x, &baseline, class, DEFAULT_IG_STEPS)
}

#[inline]
fn stabilize(z: f64, epsilon: f64) -> f64 {
    if z >= 0.0 {
        z + epsilon
    } else {
        z - epsilon
    }
}

/// Epsilon-rule LRP.
///
/// The output relevance is `logit[class]` on the chosen logit and zero on
/// the other. Each affine layer redistributes relevance to its inputs as
/// `R_j = a_j * sum_k w_jk R_k / (z_k + eps * sign(z_k))`; ReLU and flatten
/// pass it through unchanged. The share owed to bias terms is dropped and
/// reported as `bias_absorbed`, so without biases every layer sum equals the
/// logit up to the epsilon leak.
pub fn lrp_epsilon(net: &TinyNet, x: &[f64], class: u8, epsilon: f64) -> Result<Attribution> {
    check_class(class)?;
    if !(epsilon > 0.0) {
        return Err(Error::BadValue(format!("epsilon={epsilon} must be positive")));
    }
    let fwd = net.forward(x)?;
    let n_layers = net.layers().len();
    let mut relevance = vec![0.0; 2];
    relevance[class as usize] = fwd.logits[class as usize];

    let mut layer_sums = vec![0.0; n_layers + 1];
    layer_sums[n_layers] = relevance.iter().sum();
    let mut bias_absorbed = 0.0;
    for (i, layer) in net.layers().iter().enumerate().rev() {
        if layer.spec.is_affine() {
            let a = &fwd.activations[i];
            let z = &fwd.activations[i + 1];
            let s: Vec<f64> = relevance
                .iter()
                .zip(z)
                .map(|(r, &zk)| r / stabilize(zk, epsilon))
                .collect();
            bias_absorbed += layer.bias_share(&s);
            let c = layer.backward_input(a, &s);
            relevance = a.iter().zip(&c).map(|(ai, ci)| ai * ci).collect();
        }
        layer_sums[i] = relevance.iter().sum();
    }
    Ok(Attribution {
        map: spatial_map(net, &relevance)?,
        input_relevance: relevance,
        target_class: class,
        method: AttributionMethod::Lrp,
        meta: AttributionMeta::Lrp {
            rule: "epsilon".into(),
            epsilon,
            bias_absorbed,
            layer_sums,
        },
    })
}

/// Dispatches on `method` with default parameters and a zero IG baseline.
pub fn attribute(net: &TinyNet, x: &[f64], class: u8, method: AttributionMethod) -> Result<Attribution> {
    match method {
        AttributionMethod::IntegratedGradients => integrated_gradients_default(net, x, class),
        AttributionMethod::Lrp => lrp_epsilon(net, x, class, DEFAULT_LRP_EPSILON),
    }
}
