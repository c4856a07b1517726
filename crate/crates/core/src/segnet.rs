//! A small fully-convolutional segmentation network.
//!
//! Blocks are `conv → relu → avgpool2` except the last, which skips the pool,
//! followed by a 1×1 head to `C + 1` channels. With the default three blocks
//! the output stride is 4.

use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::data::Image;
use crate::error::{Error, Result};
use crate::losses::ProbMap;
use crate::tensor_grad::{
    avgpool2_backward, avgpool2_forward, bilinear_resize, channel_softmax, conv2d_backward,
    conv2d_forward, relu_backward, relu_forward, ParamSet, Tensor,
};

pub const HEAD_WEIGHT: &str = "head.weight";
pub const HEAD_BIAS: &str = "head.bias";

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NetworkConfig {
    pub num_classes: u8,
    #[serde(default = "default_channels")]
    pub channels: Vec<usize>,
    #[serde(default = "default_kernel")]
    pub kernel_size: usize,
    #[serde(default)]
    pub seed: u64,
}

fn default_channels() -> Vec<usize> {
    vec![16, 32, 64]
}

fn default_kernel() -> usize {
    3
}

impl NetworkConfig {
    pub fn new(num_classes: u8, seed: u64) -> Self {
        Self {
            num_classes,
            channels: default_channels(),
            kernel_size: default_kernel(),
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.num_classes == 0 {
            return Err(Error::invalid("num_classes must be positive"));
        }
        if self.channels.is_empty() || self.channels.contains(&0) {
            return Err(Error::invalid(format!(
                "channel widths must be a non-empty list of positive values, got {:?}",
                self.channels
            )));
        }
        if self.kernel_size.is_multiple_of(2) {
            return Err(Error::invalid("kernel size must be odd"));
        }
        Ok(())
    }

    pub fn output_channels(&self) -> usize {
        self.num_classes as usize + 1
    }

    /// Spatial downsampling factor between image and logits.
    pub fn stride(&self) -> usize {
        1 << (self.channels.len() - 1)
    }

    pub fn block_weight(i: usize) -> String {
        format!("block{i}.weight")
    }

    pub fn block_bias(i: usize) -> String {
        format!("block{i}.bias")
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let text = serde_json::to_string_pretty(self)?;
        std::fs::write(path, text).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let cfg: Self =
            serde_json::from_str(&text).map_err(|e| Error::format(path, e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }
}

/// He-normal weights (`σ² = 2 / fan_in`), zero biases.
pub fn init_network(config: &NetworkConfig) -> Result<ParamSet> {
    config.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut params = ParamSet::new();
    let k = config.kernel_size;
    let mut he = |shape: &[usize], fan_in: usize| {
        let normal = Normal::new(0.0, (2.0 / fan_in as f64).sqrt()).expect("positive sigma");
        Tensor::from_fn(shape, |_| normal.sample(&mut rng))
    };
    let mut c_in = 3;
    for (i, &c_out) in config.channels.iter().enumerate() {
        params.insert(
            NetworkConfig::block_weight(i),
            he(&[c_out, c_in, k, k], c_in * k * k),
        );
        params.insert(NetworkConfig::block_bias(i), Tensor::zeros(&[c_out]));
        c_in = c_out;
    }
    let out = config.output_channels();
    params.insert(HEAD_WEIGHT, he(&[out, c_in, 1, 1], c_in));
    params.insert(HEAD_BIAS, Tensor::zeros(&[out]));
    Ok(params)
}

/// Activations kept from a forward pass for the backward pass.
pub struct ForwardCache {
    block_inputs: Vec<Tensor>,
    pre_activations: Vec<Tensor>,
    head_input: Tensor,
    pub logits: Tensor,
}

fn check_input(config: &NetworkConfig, images: &Tensor) -> Result<()> {
    let [_, c, h, w] = images.dims4()?;
    if c != 3 {
        return Err(Error::invalid(format!(
            "expected 3 input channels, got {c}"
        )));
    }
    let s = config.stride();
    if h % s != 0 || w % s != 0 {
        return Err(Error::invalid(format!(
            "input {h}x{w} not divisible by network stride {s}"
        )));
    }
    Ok(())
}

pub fn forward_cached(
    params: &ParamSet,
    config: &NetworkConfig,
    images: &Tensor,
) -> Result<ForwardCache> {
    check_input(config, images)?;
    let last = config.channels.len() - 1;
    let mut block_inputs = Vec::with_capacity(last + 1);
    let mut pre_activations = Vec::with_capacity(last + 1);
    let mut x = images.clone();
    for i in 0..=last {
        let z = conv2d_forward(
            &x,
            params.value(&NetworkConfig::block_weight(i))?,
            params.value(&NetworkConfig::block_bias(i))?,
        )?;
        let a = relu_forward(&z);
        block_inputs.push(x);
        pre_activations.push(z);
        x = if i < last { avgpool2_forward(&a)? } else { a };
    }
    let logits = conv2d_forward(&x, params.value(HEAD_WEIGHT)?, params.value(HEAD_BIAS)?)?;
    Ok(ForwardCache {
        block_inputs,
        pre_activations,
        head_input: x,
        logits,
    })
}

/// Logits `[N, C+1, H/s, W/s]` for images `[N, 3, H, W]`.
pub fn forward(params: &ParamSet, config: &NetworkConfig, images: &Tensor) -> Result<Tensor> {
    forward_cached(params, config, images).map(|c| c.logits)
}

/// Parameter gradients for upstream `∂L/∂logits`, in `params` entry order.
pub fn backward(
    params: &ParamSet,
    config: &NetworkConfig,
    cache: &ForwardCache,
    grad_logits: &Tensor,
) -> Result<Vec<Tensor>> {
    let last = config.channels.len() - 1;
    let (mut g, head_w, head_b) =
        conv2d_backward(&cache.head_input, params.value(HEAD_WEIGHT)?, grad_logits)?;
    let mut block_grads = Vec::with_capacity(last + 1);
    for i in (0..=last).rev() {
        if i < last {
            g = avgpool2_backward(&g)?;
        }
        let gz = relu_backward(&cache.pre_activations[i], &g)?;
        let (gx, gw, gb) = conv2d_backward(
            &cache.block_inputs[i],
            params.value(&NetworkConfig::block_weight(i))?,
            &gz,
        )?;
        block_grads.push((gw, gb));
        g = gx;
    }
    let mut grads = Vec::with_capacity(params.len());
    for (gw, gb) in block_grads.into_iter().rev() {
        grads.push(gw);
        grads.push(gb);
    }
    grads.push(head_w);
    grads.push(head_b);
    Ok(grads)
}

/// Full-resolution class probabilities: softmax, align-corners upsampling of
/// every channel, then per-pixel renormalization.
pub fn predict(params: &ParamSet, config: &NetworkConfig, image: &Image) -> Result<ProbMap> {
    let logits = forward(params, config, &image.to_tensor())?;
    let probs = channel_softmax(&logits)?;
    let [_, k, h, w] = probs.dims4()?;
    let mut up = bilinear_resize(
        &probs.reshape(vec![k, h, w])?,
        image.height(),
        image.width(),
    )?;
    let plane = image.height() * image.width();
    let data = up.data_mut();
    for p in 0..plane {
        let sum: f64 = (0..k).map(|c| data[c * plane + p]).sum();
        for c in 0..k {
            data[c * plane + p] /= sum;
        }
    }
    ProbMap::new(up)
}
