//! The fully convolutional receiver: an input convolution, a stack of
//! pre-activation residual blocks and an output convolution producing one
//! logit per bit.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::numerics::{
    layer_norm_backward, layer_norm_forward, relu_backward, relu_in_place, ConvLayer, LayerNorm, NormCache, Scalar,
    Tensor,
};
use crate::{Error, Result};

/// Architecture hyperparameters.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModelSpec {
    pub num_rx: usize,
    pub width_in: usize,
    pub width_res: usize,
    pub num_blocks: usize,
    pub bits_per_symbol: usize,
    pub kernel: (usize, usize),
    pub dilation: (usize, usize),
}

impl ModelSpec {
    /// Input conv with 128 channels, four 256-channel residual blocks.
    pub fn full_scale(bits_per_symbol: usize) -> Self {
        Self { num_rx: 2, width_in: 128, width_res: 256, num_blocks: 4, bits_per_symbol, kernel: (3, 3), dilation: (1, 1) }
    }

    pub fn desk(bits_per_symbol: usize) -> Self {
        Self { width_in: 16, width_res: 32, ..Self::full_scale(bits_per_symbol) }
    }

    pub fn toy(bits_per_symbol: usize) -> Self {
        Self { width_in: 8, width_res: 16, ..Self::full_scale(bits_per_symbol) }
    }

    /// Real and imaginary plane per receive antenna.
    pub fn input_channels(&self) -> usize {
        2 * self.num_rx
    }

    pub fn validate(&self) -> Result<()> {
        if self.num_rx == 0 || self.width_in == 0 || self.width_res == 0 || self.bits_per_symbol == 0 {
            return Err(Error::Config(format!("model dimensions must be positive: {self:?}")));
        }
        if self.kernel.0.is_multiple_of(2) || self.kernel.1.is_multiple_of(2) || self.dilation.0 == 0 || self.dilation.1 == 0 {
            return Err(Error::Config(format!("kernel {:?} must be odd, dilation {:?} positive", self.kernel, self.dilation)));
        }
        Ok(())
    }
}

/// `(norm -> ReLU -> conv) x 2` plus a skip path. The skip carries a 1x1
/// projection only where the channel count changes.
#[derive(Clone, Debug, PartialEq)]
pub struct ResBlock<T> {
    pub norm1: LayerNorm<T>,
    pub conv1: ConvLayer<T>,
    pub norm2: LayerNorm<T>,
    pub conv2: ConvLayer<T>,
    pub proj: Option<ConvLayer<T>>,
}

impl<T: Scalar> ResBlock<T> {
    pub fn new<R: Rng + ?Sized>(
        in_ch: usize,
        out_ch: usize,
        kernel: (usize, usize),
        dilation: (usize, usize),
        rng: &mut R,
    ) -> Self {
        Self {
            norm1: LayerNorm::new(in_ch),
            conv1: ConvLayer::glorot(in_ch, out_ch, kernel, dilation, rng),
            norm2: LayerNorm::new(out_ch),
            conv2: ConvLayer::glorot(out_ch, out_ch, kernel, dilation, rng),
            proj: (in_ch != out_ch).then(|| ConvLayer::glorot(in_ch, out_ch, (1, 1), (1, 1), rng)),
        }
    }

    pub fn in_channels(&self) -> usize {
        self.norm1.num_channels
    }

    pub fn out_channels(&self) -> usize {
        self.conv2.out_channels
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum Layer<T> {
    Conv(ConvLayer<T>),
    Res(ResBlock<T>),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum LayerKind {
    #[serde(rename = "conv")]
    Conv,
    #[serde(rename = "resnet")]
    Res,
}

impl LayerKind {
    pub fn as_str(self) -> &'static str {
        match self {
            LayerKind::Conv => "conv",
            LayerKind::Res => "resnet",
        }
    }
}

impl<T: Scalar> Layer<T> {
    pub fn kind(&self) -> LayerKind {
        match self {
            Layer::Conv(_) => LayerKind::Conv,
            Layer::Res(_) => LayerKind::Res,
        }
    }

    pub fn in_channels(&self) -> usize {
        match self {
            Layer::Conv(c) => c.in_channels,
            Layer::Res(b) => b.in_channels(),
        }
    }

    pub fn out_channels(&self) -> usize {
        match self {
            Layer::Conv(c) => c.out_channels,
            Layer::Res(b) => b.out_channels(),
        }
    }

    /// Parameter tensors with role names, in storage order.
    pub fn tensors(&self) -> Vec<(&'static str, &Tensor<T>)> {
        match self {
            Layer::Conv(c) => alloc::vec![("weight", &c.weight), ("bias", &c.bias)],
            Layer::Res(b) => {
                let mut v = alloc::vec![
                    ("norm1.gamma", &b.norm1.gamma),
                    ("norm1.beta", &b.norm1.beta),
                    ("conv1.weight", &b.conv1.weight),
                    ("conv1.bias", &b.conv1.bias),
                    ("norm2.gamma", &b.norm2.gamma),
                    ("norm2.beta", &b.norm2.beta),
                    ("conv2.weight", &b.conv2.weight),
                    ("conv2.bias", &b.conv2.bias),
                ];
                if let Some(p) = &b.proj {
                    v.push(("proj.weight", &p.weight));
                    v.push(("proj.bias", &p.bias));
                }
                v
            }
        }
    }

    pub fn tensors_mut(&mut self) -> Vec<&mut Tensor<T>> {
        match self {
            Layer::Conv(c) => alloc::vec![&mut c.weight, &mut c.bias],
            Layer::Res(b) => {
                let mut v = alloc::vec![
                    &mut b.norm1.gamma,
                    &mut b.norm1.beta,
                    &mut b.conv1.weight,
                    &mut b.conv1.bias,
                    &mut b.norm2.gamma,
                    &mut b.norm2.beta,
                    &mut b.conv2.weight,
                    &mut b.conv2.bias,
                ];
                if let Some(p) = &mut b.proj {
                    v.push(&mut p.weight);
                    v.push(&mut p.bias);
                }
                v
            }
        }
    }

    pub fn param_count(&self) -> usize {
        self.tensors().iter().map(|(_, t)| t.len()).sum()
    }

    pub fn cast<U: Scalar>(&self) -> Layer<U> {
        match self {
            Layer::Conv(c) => Layer::Conv(cast_conv(c)),
            Layer::Res(b) => Layer::Res(ResBlock {
                norm1: cast_norm(&b.norm1),
                conv1: cast_conv(&b.conv1),
                norm2: cast_norm(&b.norm2),
                conv2: cast_conv(&b.conv2),
                proj: b.proj.as_ref().map(cast_conv),
            }),
        }
    }

    fn zeros_like(&self) -> Self {
        let mut out = self.clone();
        out.tensors_mut().into_iter().for_each(|t| t.fill(T::zero()));
        out
    }
}

fn cast_conv<T: Scalar, U: Scalar>(c: &ConvLayer<T>) -> ConvLayer<U> {
    ConvLayer {
        in_channels: c.in_channels,
        out_channels: c.out_channels,
        kernel: c.kernel,
        dilation: c.dilation,
        weight: c.weight.cast(),
        bias: c.bias.cast(),
    }
}

fn cast_norm<T: Scalar, U: Scalar>(n: &LayerNorm<T>) -> LayerNorm<U> {
    LayerNorm { num_channels: n.num_channels, gamma: n.gamma.cast(), beta: n.beta.cast(), epsilon: U::of(n.epsilon.as_f64()) }
}

/// A named layer together with its adaptation flags.
#[derive(Clone, Debug, PartialEq)]
pub struct LayerSlot<T> {
    pub name: String,
    pub layer: Layer<T>,
    pub trainable: bool,
    /// Freshly initialized rather than transferred from a source model.
    pub fresh: bool,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Model<T> {
    pub spec: ModelSpec,
    pub layers: Vec<LayerSlot<T>>,
    /// An extra residual block has been appended to the base stack.
    pub extended: bool,
}

/// Intermediate values recorded by [`Model::forward_trace`].
#[derive(Clone, Debug)]
enum LayerCache<T> {
    Conv { input: Tensor<T> },
    Res { input: Tensor<T>, n1: NormCache<T>, a1: Tensor<T>, n2: NormCache<T>, a2: Tensor<T> },
}

/// Forward activations needed by the backward pass of one example.
#[derive(Clone, Debug)]
pub struct Trace<T> {
    caches: Vec<LayerCache<T>>,
    /// Network output `[K, F, S]`.
    pub output: Tensor<T>,
}

pub const INPUT_CONV: &str = "input_conv";
pub const OUTPUT_CONV: &str = "output_conv";

pub fn resnet_name(i: usize) -> String {
    format!("resnet_{i}")
}

impl<T: Scalar> Model<T> {
    /// Glorot-initialized weights, unit norm gains, zero biases. Every layer
    /// starts trainable.
    pub fn new<R: Rng + ?Sized>(spec: &ModelSpec, rng: &mut R) -> Result<Self> {
        spec.validate()?;
        let mut layers = Vec::with_capacity(spec.num_blocks + 2);
        let slot = |name: String, layer| LayerSlot { name, layer, trainable: true, fresh: true };
        layers.push(slot(
            INPUT_CONV.into(),
            Layer::Conv(ConvLayer::glorot(spec.input_channels(), spec.width_in, spec.kernel, spec.dilation, rng)),
        ));
        let mut ch = spec.width_in;
        for i in 1..=spec.num_blocks {
            layers.push(slot(resnet_name(i), Layer::Res(ResBlock::new(ch, spec.width_res, spec.kernel, spec.dilation, rng))));
            ch = spec.width_res;
        }
        layers.push(slot(
            OUTPUT_CONV.into(),
            Layer::Conv(ConvLayer::glorot(ch, spec.bits_per_symbol, spec.kernel, spec.dilation, rng)),
        ));
        Ok(Self { spec: spec.clone(), layers, extended: false })
    }

    pub fn num_layers(&self) -> usize {
        self.layers.len()
    }

    pub fn layer(&self, name: &str) -> Option<&LayerSlot<T>> {
        self.layers.iter().find(|l| l.name == name)
    }

    pub fn output_conv_mut(&mut self) -> &mut ConvLayer<T> {
        match &mut self.layers.last_mut().expect("model has layers").layer {
            Layer::Conv(c) => c,
            Layer::Res(_) => unreachable!("last layer is the output convolution"),
        }
    }

    pub fn param_count(&self) -> usize {
        self.layers.iter().map(|l| l.layer.param_count()).sum()
    }

    /// All parameter tensors in layer order.
    pub fn tensors(&self) -> Vec<&Tensor<T>> {
        self.layers.iter().flat_map(|l| l.layer.tensors().into_iter().map(|(_, t)| t)).collect()
    }

    pub fn tensors_mut(&mut self) -> Vec<&mut Tensor<T>> {
        self.layers.iter_mut().flat_map(|l| l.layer.tensors_mut()).collect()
    }

    /// Trainable flag of every tensor returned by [`Model::tensors`].
    pub fn tensor_trainable_flags(&self) -> Vec<bool> {
        self.layers.iter().flat_map(|l| core::iter::repeat_n(l.trainable, l.layer.tensors().len())).collect()
    }

    /// Same structure with every parameter zero; used to accumulate gradients.
    pub fn zeros_like(&self) -> Self {
        Self {
            spec: self.spec.clone(),
            layers: self
                .layers
                .iter()
                .map(|l| LayerSlot { name: l.name.clone(), layer: l.layer.zeros_like(), trainable: l.trainable, fresh: l.fresh })
                .collect(),
            extended: self.extended,
        }
    }

    pub fn cast<U: Scalar>(&self) -> Model<U> {
        Model {
            spec: self.spec.clone(),
            layers: self
                .layers
                .iter()
                .map(|l| LayerSlot { name: l.name.clone(), layer: l.layer.cast(), trainable: l.trainable, fresh: l.fresh })
                .collect(),
            extended: self.extended,
        }
    }

    fn check_input(&self, input: &Tensor<T>) -> Result<()> {
        match input.shape() {
            [c, _, _] if *c == self.spec.input_channels() => Ok(()),
            s => Err(Error::Shape(format!("receiver expects [{}, F, S] input, got {s:?}", self.spec.input_channels()))),
        }
    }

    /// Network output `[K, F, S]` for one example `[2 N_rx, F, S]`.
    pub fn forward(&self, input: &Tensor<T>) -> Result<Tensor<T>> {
        self.check_input(input)?;
        let mut x = input.clone();
        for slot in &self.layers {
            x = match &slot.layer {
                Layer::Conv(c) => c.forward(&x)?,
                Layer::Res(b) => res_forward(b, &x, None)?,
            };
        }
        Ok(x)
    }

    pub fn forward_trace(&self, input: &Tensor<T>) -> Result<Trace<T>> {
        self.check_input(input)?;
        let mut caches = Vec::with_capacity(self.layers.len());
        let mut x = input.clone();
        for slot in &self.layers {
            let next = match &slot.layer {
                Layer::Conv(c) => {
                    let y = c.forward(&x)?;
                    caches.push(LayerCache::Conv { input: x });
                    y
                }
                Layer::Res(b) => res_forward(b, &x, Some(&mut caches))?,
            };
            x = next;
        }
        Ok(Trace { caches, output: x })
    }

    /// Accumulates parameter gradients into `grads` given `d loss / d output`.
    ///
    /// With `all_layers == false` only trainable layers receive gradients and
    /// propagation stops below the lowest trainable layer, since nothing there
    /// would be updated. Returns the input gradient when it was propagated all
    /// the way down.
    pub fn backward(
        &self,
        trace: &Trace<T>,
        grad_out: &Tensor<T>,
        grads: &mut Model<T>,
        all_layers: bool,
    ) -> Result<Option<Tensor<T>>> {
        if trace.caches.len() != self.layers.len() {
            return Err(Error::Usage("trace was not produced by this model".into()));
        }
        if grad_out.shape() != trace.output.shape() {
            return Err(Error::Shape(format!("grad_out {:?} vs output {:?}", grad_out.shape(), trace.output.shape())));
        }
        let needs: Vec<bool> = self.layers.iter().map(|l| all_layers || l.trainable).collect();
        let Some(lowest) = needs.iter().position(|&n| n) else { return Ok(None) };
        let stop = if all_layers { 0 } else { lowest };
        let mut g = grad_out.clone();
        for idx in (stop..self.layers.len()).rev() {
            let need_input = idx > stop || all_layers;
            let acc_layer = &mut grads.layers[idx].layer;
            let next = match (&self.layers[idx].layer, &trace.caches[idx], acc_layer) {
                (Layer::Conv(c), LayerCache::Conv { input }, Layer::Conv(acc)) => {
                    let acc = needs[idx].then_some((&mut acc.weight, &mut acc.bias));
                    c.backward_accumulate(input, &g, acc, need_input)?
                }
                (Layer::Res(b), cache @ LayerCache::Res { .. }, Layer::Res(acc)) => {
                    res_backward(b, cache, &g, needs[idx].then_some(acc), need_input)?
                }
                _ => return Err(Error::Usage(format!("layer {idx} does not match its cache or gradient slot"))),
            };
            match next {
                Some(n) => g = n,
                None => return Ok(None),
            }
        }
        Ok(Some(g))
    }
}

fn res_forward<T: Scalar>(b: &ResBlock<T>, x: &Tensor<T>, caches: Option<&mut Vec<LayerCache<T>>>) -> Result<Tensor<T>> {
    let (mut a1, n1) = layer_norm_forward(x, &b.norm1)?;
    relu_in_place(&mut a1);
    let c1 = b.conv1.forward(&a1)?;
    let (mut a2, n2) = layer_norm_forward(&c1, &b.norm2)?;
    relu_in_place(&mut a2);
    let mut out = b.conv2.forward(&a2)?;
    match &b.proj {
        Some(p) => out.add_assign(&p.forward(x)?)?,
        None => out.add_assign(x)?,
    }
    if let Some(c) = caches {
        c.push(LayerCache::Res { input: x.clone(), n1, a1, n2, a2 });
    }
    Ok(out)
}

fn res_backward<T: Scalar>(
    b: &ResBlock<T>,
    cache: &LayerCache<T>,
    g: &Tensor<T>,
    mut acc: Option<&mut ResBlock<T>>,
    need_input: bool,
) -> Result<Option<Tensor<T>>> {
    let LayerCache::Res { input, n1, a1, n2, a2 } = cache else {
        return Err(Error::Usage("residual block cache expected".into()));
    };
    let g_a2 = b
        .conv2
        .backward_accumulate(a2, g, acc.as_deref_mut().map(|a| (&mut a.conv2.weight, &mut a.conv2.bias)), true)?
        .expect("requested");
    let g_n2 = relu_backward(&g_a2, a2)?;
    let g_c1 = layer_norm_backward(&g_n2, n2, &b.norm2, acc.as_deref_mut().map(|a| (&mut a.norm2.gamma, &mut a.norm2.beta)))?;
    let g_a1 = b
        .conv1
        .backward_accumulate(a1, &g_c1, acc.as_deref_mut().map(|a| (&mut a.conv1.weight, &mut a.conv1.bias)), true)?
        .expect("requested");
    let g_n1 = relu_backward(&g_a1, a1)?;
    if !need_input {
        // Only the norm1 parameter gradients are still missing.
        if let Some(a) = acc.as_deref_mut() {
            layer_norm_backward(&g_n1, n1, &b.norm1, Some((&mut a.norm1.gamma, &mut a.norm1.beta)))?;
            if let (Some(p), Some(pa)) = (&b.proj, a.proj.as_mut()) {
                p.backward_accumulate(input, g, Some((&mut pa.weight, &mut pa.bias)), false)?;
            }
        }
        return Ok(None);
    }
    let mut g_x = layer_norm_backward(&g_n1, n1, &b.norm1, acc.as_deref_mut().map(|a| (&mut a.norm1.gamma, &mut a.norm1.beta)))?;
    match &b.proj {
        Some(p) => {
            let pacc = acc.and_then(|a| a.proj.as_mut()).map(|pa| (&mut pa.weight, &mut pa.bias));
            g_x.add_assign(&p.backward_accumulate(input, g, pacc, true)?.expect("requested"))?;
        }
        None => g_x.add_assign(g)?,
    }
    Ok(Some(g_x))
}
