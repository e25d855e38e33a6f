//! Sequential network container: spec-driven construction, forward/backward,
//! softmax cross-entropy, and parameter/gradient bookkeeping.

use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use super::layer::{
    dropout, Activation, ConvLayer, DropoutMode, FcLayer, MaxPoolLayer, PoolRounding,
};
use super::scalar::Scalar;
use super::tensor::Tensor3;
use crate::error::{Error, Result};

/// Declarative layer description; a network is a list of these plus an input
/// shape.
#[derive(Clone, Debug, PartialEq)]
pub enum LayerSpec {
    Conv {
        filter_h: usize,
        filter_w: usize,
        out_channels: usize,
        activation: Activation,
    },
    MaxPool {
        window_h: usize,
        window_w: usize,
        stride: usize,
        rounding: PoolRounding,
    },
    Fc {
        out_features: usize,
        activation: Activation,
    },
    Dropout {
        rate: f64,
    },
}

/// Value flowing between layers: a feature map before flattening, a plain
/// vector after.
#[derive(Clone, Debug)]
pub enum Value<T> {
    Spatial(Tensor3<T>),
    Flat(Vec<T>),
}

impl<T: Scalar> Value<T> {
    pub fn into_flat(self) -> Vec<T> {
        match self {
            Value::Spatial(t) => t.into_vec(),
            Value::Flat(v) => v,
        }
    }

    pub fn flat_len(&self) -> usize {
        match self {
            Value::Spatial(t) => t.len(),
            Value::Flat(v) => v.len(),
        }
    }
}

/// Shape of a value between layers.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ValueShape {
    Spatial(usize, usize, usize),
    Flat(usize),
}

impl ValueShape {
    pub fn flat_len(&self) -> usize {
        match self {
            ValueShape::Spatial(h, w, c) => h * w * c,
            ValueShape::Flat(n) => *n,
        }
    }
}

impl std::fmt::Display for ValueShape {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            ValueShape::Spatial(h, w, c) => write!(f, "{h}x{w}x{c}"),
            ValueShape::Flat(n) => write!(f, "1x1x{n}"),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SequentialSpec {
    pub input: ValueShape,
    pub layers: Vec<LayerSpec>,
}

impl SequentialSpec {
    /// Output shape of every layer in order, starting from the input shape.
    pub fn shape_trace(&self) -> Result<Vec<ValueShape>> {
        let mut shapes = Vec::with_capacity(self.layers.len());
        let mut cur = self.input;
        for (i, layer) in self.layers.iter().enumerate() {
            cur = match (layer, cur) {
                (
                    LayerSpec::Conv {
                        filter_h,
                        filter_w,
                        out_channels,
                        ..
                    },
                    ValueShape::Spatial(h, w, _),
                ) => {
                    if *out_channels == 0 {
                        return Err(Error::Parameter(format!(
                            "layer {i}: conv needs out_channels >= 1"
                        )));
                    }
                    if *filter_h > h || *filter_w > w {
                        return Err(Error::Dimension(format!(
                            "layer {i}: filter {filter_h}x{filter_w} larger than input {h}x{w}"
                        )));
                    }
                    ValueShape::Spatial(h - filter_h + 1, w - filter_w + 1, *out_channels)
                }
                (
                    LayerSpec::MaxPool {
                        window_h,
                        window_w,
                        stride,
                        rounding,
                    },
                    ValueShape::Spatial(h, w, c),
                ) => {
                    if *stride == 0 {
                        return Err(Error::Parameter(format!("layer {i}: pool needs stride >= 1")));
                    }
                    if *window_h > h || *window_w > w {
                        return Err(Error::Dimension(format!(
                            "layer {i}: pool window {window_h}x{window_w} larger than input {h}x{w}"
                        )));
                    }
                    ValueShape::Spatial(
                        super::layer::pooled_len(h, *window_h, *stride, *rounding),
                        super::layer::pooled_len(w, *window_w, *stride, *rounding),
                        c,
                    )
                }
                (LayerSpec::Fc { out_features, .. }, _) => ValueShape::Flat(*out_features),
                (LayerSpec::Dropout { rate }, shape) => {
                    if !(0.0..1.0).contains(rate) {
                        return Err(Error::Parameter(format!(
                            "layer {i}: dropout rate must be in [0, 1)"
                        )));
                    }
                    shape
                }
                (spec, ValueShape::Flat(_)) => {
                    return Err(Error::Dimension(format!(
                        "layer {i}: {spec:?} requires a spatial input"
                    )));
                }
            };
            shapes.push(cur);
        }
        Ok(shapes)
    }

    /// Canonical text form, hashed into weight-file digests.
    pub fn canonical_string(&self) -> String {
        use std::fmt::Write;
        let mut s = String::new();
        match self.input {
            ValueShape::Spatial(h, w, c) => write!(s, "in:{h}x{w}x{c}").unwrap(),
            ValueShape::Flat(n) => write!(s, "in:{n}").unwrap(),
        }
        for layer in &self.layers {
            match layer {
                LayerSpec::Conv {
                    filter_h,
                    filter_w,
                    out_channels,
                    activation,
                } => write!(s, "|conv:{filter_h}x{filter_w}->{out_channels}:{activation:?}").unwrap(),
                LayerSpec::MaxPool {
                    window_h,
                    window_w,
                    stride,
                    rounding,
                } => write!(s, "|pool:{window_h}x{window_w}s{stride}:{rounding:?}").unwrap(),
                LayerSpec::Fc {
                    out_features,
                    activation,
                } => write!(s, "|fc:{out_features}:{activation:?}").unwrap(),
                LayerSpec::Dropout { rate } => write!(s, "|drop:{rate}").unwrap(),
            }
        }
        s
    }
}

enum LayerState<T> {
    Conv(ConvLayer<T>),
    Pool(MaxPoolLayer),
    Fc(FcLayer<T>),
    Dropout(f64),
}

/// Sequential network with parameters.
pub struct Sequential<T> {
    spec: SequentialSpec,
    layers: Vec<LayerState<T>>,
}

/// Per-layer intermediate state recorded by a training forward pass.
pub enum TapeEntry<T> {
    Conv {
        col: Vec<T>,
        out: Tensor3<T>,
        in_shape: (usize, usize, usize),
    },
    Pool {
        argmax: Vec<u32>,
        in_shape: (usize, usize, usize),
    },
    Fc {
        input: Vec<T>,
        out: Vec<T>,
    },
    Dropout {
        mask: Vec<T>,
    },
}

pub type Tape<T> = Vec<TapeEntry<T>>;

/// Parameter gradients, aligned with [`Sequential::param_layout`].
#[derive(Clone, Debug)]
pub struct Gradients<T> {
    pub arrays: Vec<Vec<T>>,
}

impl<T: Scalar> Gradients<T> {
    pub fn zeros(layout: &[usize]) -> Self {
        Gradients {
            arrays: layout.iter().map(|&n| vec![T::zero(); n]).collect(),
        }
    }

    pub fn add_assign(&mut self, other: &Gradients<T>) {
        debug_assert_eq!(self.arrays.len(), other.arrays.len());
        for (a, b) in self.arrays.iter_mut().zip(&other.arrays) {
            for (x, y) in a.iter_mut().zip(b) {
                *x += *y;
            }
        }
    }

    pub fn scale(&mut self, factor: T) {
        for a in &mut self.arrays {
            for x in a {
                *x *= factor;
            }
        }
    }
}

impl<T: Scalar> Sequential<T> {
    /// Builds the network with all parameters at zero.
    pub fn zeros(spec: SequentialSpec) -> Result<Self> {
        let trace = spec.shape_trace()?;
        let mut layers = Vec::with_capacity(spec.layers.len());
        let mut cur = spec.input;
        for (layer, out_shape) in spec.layers.iter().zip(&trace) {
            let state = match layer {
                LayerSpec::Conv {
                    filter_h,
                    filter_w,
                    out_channels,
                    activation,
                } => {
                    let in_c = match cur {
                        ValueShape::Spatial(_, _, c) => c,
                        ValueShape::Flat(_) => unreachable!("validated by shape_trace"),
                    };
                    LayerState::Conv(ConvLayer::zeros(
                        *filter_h,
                        *filter_w,
                        in_c,
                        *out_channels,
                        *activation,
                    ))
                }
                LayerSpec::MaxPool {
                    window_h,
                    window_w,
                    stride,
                    rounding,
                } => LayerState::Pool(MaxPoolLayer {
                    window_h: *window_h,
                    window_w: *window_w,
                    stride: *stride,
                    rounding: *rounding,
                }),
                LayerSpec::Fc {
                    out_features,
                    activation,
                } => LayerState::Fc(FcLayer::zeros(cur.flat_len(), *out_features, *activation)),
                LayerSpec::Dropout { rate } => LayerState::Dropout(*rate),
            };
            layers.push(state);
            cur = *out_shape;
        }
        Ok(Sequential { spec, layers })
    }

    pub fn spec(&self) -> &SequentialSpec {
        &self.spec
    }

    pub fn output_shape(&self) -> ValueShape {
        self.spec
            .shape_trace()
            .expect("spec validated at construction")
            .last()
            .copied()
            .unwrap_or(self.spec.input)
    }

    /// Fills conv/fc weights with `N(0, std)` draws; biases stay zero.
    pub fn init_gaussian(&mut self, rng: &mut ChaCha8Rng, std: f64) {
        let normal = StandardNormal;
        for layer in &mut self.layers {
            let weights = match layer {
                LayerState::Conv(c) => &mut c.weights,
                LayerState::Fc(f) => &mut f.weights,
                _ => continue,
            };
            for w in weights {
                let z: f64 = normal.sample(rng);
                *w = T::from_f64(z * std);
            }
        }
    }

    /// Lengths of every parameter array in canonical order
    /// (per layer: weights then bias).
    pub fn param_layout(&self) -> Vec<usize> {
        let mut out = Vec::new();
        for layer in &self.layers {
            match layer {
                LayerState::Conv(c) => {
                    out.push(c.weights.len());
                    out.push(c.bias.len());
                }
                LayerState::Fc(f) => {
                    out.push(f.weights.len());
                    out.push(f.bias.len());
                }
                _ => {}
            }
        }
        out
    }

    pub fn params(&self) -> Vec<&[T]> {
        let mut out = Vec::new();
        for layer in &self.layers {
            match layer {
                LayerState::Conv(c) => {
                    out.push(c.weights.as_slice());
                    out.push(c.bias.as_slice());
                }
                LayerState::Fc(f) => {
                    out.push(f.weights.as_slice());
                    out.push(f.bias.as_slice());
                }
                _ => {}
            }
        }
        out
    }

    pub fn params_mut(&mut self) -> Vec<&mut Vec<T>> {
        let mut out = Vec::new();
        for layer in &mut self.layers {
            match layer {
                LayerState::Conv(c) => {
                    out.push(&mut c.weights);
                    out.push(&mut c.bias);
                }
                LayerState::Fc(f) => {
                    out.push(&mut f.weights);
                    out.push(&mut f.bias);
                }
                _ => {}
            }
        }
        out
    }

    pub(crate) fn conv_at(&self, index: usize) -> Option<&ConvLayer<T>> {
        match self.layers.get(index) {
            Some(LayerState::Conv(c)) => Some(c),
            _ => None,
        }
    }

    pub(crate) fn pool_at(&self, index: usize) -> Option<&MaxPoolLayer> {
        match self.layers.get(index) {
            Some(LayerState::Pool(p)) => Some(p),
            _ => None,
        }
    }

    pub(crate) fn fc_at(&self, index: usize) -> Option<&FcLayer<T>> {
        match self.layers.get(index) {
            Some(LayerState::Fc(f)) => Some(f),
            _ => None,
        }
    }

    pub fn layer_count(&self) -> usize {
        self.layers.len()
    }

    /// Inference forward pass (dropout is the identity).
    pub fn eval(&self, input: Value<T>) -> Result<Value<T>> {
        let mut cur = input;
        for layer in &self.layers {
            cur = match layer {
                LayerState::Conv(conv) => match cur {
                    Value::Spatial(t) => Value::Spatial(conv.forward(&t)?.0),
                    Value::Flat(_) => {
                        return Err(Error::Dimension("conv requires a spatial input".into()))
                    }
                },
                LayerState::Pool(pool) => match cur {
                    Value::Spatial(t) => Value::Spatial(pool.forward(&t)?.0),
                    Value::Flat(_) => {
                        return Err(Error::Dimension("pool requires a spatial input".into()))
                    }
                },
                LayerState::Fc(fc) => Value::Flat(fc.forward(&cur.into_flat())?),
                LayerState::Dropout(_) => cur,
            };
        }
        Ok(cur)
    }

    /// Index of the first fully connected layer, if any.
    pub(crate) fn first_fc_index(&self) -> Option<usize> {
        self.layers
            .iter()
            .position(|l| matches!(l, LayerState::Fc(_)))
    }

    /// Runs conv/pool layers up to (not including) the first fc layer and
    /// returns the flattened features.
    pub(crate) fn eval_spatial_prefix(&self, input: Tensor3<T>) -> Result<Vec<T>> {
        let split = self.first_fc_index().unwrap_or(self.layers.len());
        let mut cur = Value::Spatial(input);
        for layer in &self.layers[..split] {
            cur = match layer {
                LayerState::Conv(conv) => match cur {
                    Value::Spatial(t) => Value::Spatial(conv.forward(&t)?.0),
                    Value::Flat(_) => {
                        return Err(Error::Dimension("conv requires a spatial input".into()))
                    }
                },
                LayerState::Pool(pool) => match cur {
                    Value::Spatial(t) => Value::Spatial(pool.forward(&t)?.0),
                    Value::Flat(_) => {
                        return Err(Error::Dimension("pool requires a spatial input".into()))
                    }
                },
                LayerState::Fc(_) => unreachable!(),
                LayerState::Dropout(_) => cur,
            };
        }
        Ok(cur.into_flat())
    }

    /// Applies the fc suffix (everything from the first fc layer on) to a
    /// batch of stacked feature rows. Inference mode.
    pub(crate) fn eval_fc_suffix_batch(&self, flats: Vec<T>, batch: usize) -> Result<Vec<T>> {
        let split = self.first_fc_index().unwrap_or(self.layers.len());
        let mut cur = flats;
        for layer in &self.layers[split..] {
            cur = match layer {
                LayerState::Fc(fc) => fc.forward_batch(&cur, batch)?,
                LayerState::Dropout(_) => cur,
                _ => {
                    return Err(Error::Dimension(
                        "spatial layer after the first fc layer is unsupported".into(),
                    ))
                }
            };
        }
        Ok(cur)
    }

    /// Batched inference: spatial prefix per sample, fc suffix batched.
    pub fn eval_batch(&self, inputs: Vec<Tensor3<T>>) -> Result<Vec<Vec<T>>> {
        let batch = inputs.len();
        if batch == 0 {
            return Ok(Vec::new());
        }
        let feats = crate::par::map_slice(&inputs, |t| self.eval_spatial_prefix(t.clone()));
        let mut stacked = Vec::new();
        let mut width = 0;
        for f in feats {
            let f = f?;
            width = f.len();
            stacked.extend_from_slice(&f);
        }
        let out = self.eval_fc_suffix_batch(stacked, batch)?;
        let out_w = out.len() / batch;
        debug_assert!(width == 0 || out_w > 0);
        Ok(out.chunks(out_w).map(|c| c.to_vec()).collect())
    }

    /// Training forward pass: records the tape needed by [`Self::backward`].
    pub fn forward_train(
        &self,
        input: Value<T>,
        mode: DropoutMode,
        rng: &mut ChaCha8Rng,
    ) -> Result<(Value<T>, Tape<T>)> {
        let mut tape = Vec::with_capacity(self.layers.len());
        let mut cur = input;
        for layer in &self.layers {
            cur = match layer {
                LayerState::Conv(conv) => match cur {
                    Value::Spatial(t) => {
                        let in_shape = t.shape();
                        let (out, col) = conv.forward(&t)?;
                        tape.push(TapeEntry::Conv {
                            col,
                            out: out.clone(),
                            in_shape,
                        });
                        Value::Spatial(out)
                    }
                    Value::Flat(_) => {
                        return Err(Error::Dimension("conv requires a spatial input".into()))
                    }
                },
                LayerState::Pool(pool) => match cur {
                    Value::Spatial(t) => {
                        let in_shape = t.shape();
                        let (out, argmax) = pool.forward(&t)?;
                        tape.push(TapeEntry::Pool { argmax, in_shape });
                        Value::Spatial(out)
                    }
                    Value::Flat(_) => {
                        return Err(Error::Dimension("pool requires a spatial input".into()))
                    }
                },
                LayerState::Fc(fc) => {
                    let x = cur.into_flat();
                    let out = fc.forward(&x)?;
                    tape.push(TapeEntry::Fc {
                        input: x,
                        out: out.clone(),
                    });
                    Value::Flat(out)
                }
                LayerState::Dropout(rate) => {
                    let x = cur.into_flat();
                    let (out, mask) = dropout(&x, *rate, mode, rng)?;
                    tape.push(TapeEntry::Dropout { mask });
                    Value::Flat(out)
                }
            };
        }
        Ok((cur, tape))
    }

    /// Backpropagates `grad_out` through the tape, accumulating parameter
    /// gradients into `grads` and returning the gradient w.r.t. the input.
    pub fn backward(
        &self,
        tape: &Tape<T>,
        grad_out: Value<T>,
        grads: &mut Gradients<T>,
    ) -> Result<Value<T>> {
        if tape.len() != self.layers.len() {
            return Err(Error::State(
                "backward called without a matching forward tape".into(),
            ));
        }
        let mut grad_idx = grads.arrays.len();
        let mut cur = grad_out;
        for (layer, entry) in self.layers.iter().zip(tape.iter()).rev() {
            cur = match (layer, entry) {
                (LayerState::Conv(conv), TapeEntry::Conv { col, out, in_shape }) => {
                    grad_idx -= 2;
                    let g = match cur {
                        Value::Spatial(t) => t,
                        Value::Flat(v) => {
                            let (h, w, c) = out.shape();
                            Tensor3::from_vec_unchecked(h, w, c, v)
                        }
                    };
                    let (gw, gb) = split_two(&mut grads.arrays, grad_idx);
                    Value::Spatial(conv.backward(col, out, &g, *in_shape, gw, gb))
                }
                (LayerState::Pool(pool), TapeEntry::Pool { argmax, in_shape }) => {
                    let g = match cur {
                        Value::Spatial(t) => t,
                        Value::Flat(v) => {
                            let (h, w, c) = *in_shape;
                            let oh = super::layer::pooled_len(h, pool.window_h, pool.stride, pool.rounding);
                            let ow = super::layer::pooled_len(w, pool.window_w, pool.stride, pool.rounding);
                            Tensor3::from_vec_unchecked(oh, ow, c, v)
                        }
                    };
                    Value::Spatial(pool.backward(argmax, &g, *in_shape))
                }
                (LayerState::Fc(fc), TapeEntry::Fc { input, out }) => {
                    grad_idx -= 2;
                    let g = cur.into_flat();
                    let (gw, gb) = split_two(&mut grads.arrays, grad_idx);
                    Value::Flat(fc.backward(input, out, &g, gw, gb))
                }
                (LayerState::Dropout(_), TapeEntry::Dropout { mask }) => {
                    let mut g = cur.into_flat();
                    for (x, m) in g.iter_mut().zip(mask) {
                        *x *= *m;
                    }
                    Value::Flat(g)
                }
                _ => return Err(Error::State("tape does not match network layers".into())),
            };
        }
        Ok(cur)
    }
}

fn split_two<T>(arrays: &mut [Vec<T>], idx: usize) -> (&mut [T], &mut [T]) {
    let (a, b) = arrays[idx..].split_at_mut(1);
    (a[0].as_mut_slice(), b[0].as_mut_slice())
}

// ---------------------------------------------------------------------------
// Loss
// ---------------------------------------------------------------------------

/// Numerically stable softmax.
pub fn softmax<T: Scalar>(logits: &[T]) -> Vec<T> {
    let max = logits
        .iter()
        .cloned()
        .fold(T::neg_infinity(), |a, b| if b > a { b } else { a });
    let mut out: Vec<T> = logits.iter().map(|&l| (l - max).exp()).collect();
    let sum = out.iter().fold(T::zero(), |a, &b| a + b);
    for v in &mut out {
        *v = *v / sum;
    }
    out
}

/// Cross-entropy over softmax. Returns the loss and the gradient w.r.t. the
/// logits (`softmax(logits) - one_hot(label)`).
pub fn softmax_cross_entropy<T: Scalar>(logits: &[T], label: usize) -> Result<(T, Vec<T>)> {
    if label >= logits.len() {
        return Err(Error::Parameter(format!(
            "label {label} out of range for {} logits",
            logits.len()
        )));
    }
    if logits.iter().any(|v| !v.is_finite()) {
        return Err(Error::Numeric("non-finite logits".into()));
    }
    let max = logits
        .iter()
        .cloned()
        .fold(T::neg_infinity(), |a, b| if b > a { b } else { a });
    let log_sum = logits
        .iter()
        .map(|&l| (l - max).exp())
        .fold(T::zero(), |a, b| a + b)
        .ln();
    let loss = log_sum - (logits[label] - max);
    let mut grad = softmax(logits);
    grad[label] = grad[label] - T::one();
    Ok((loss, grad))
}

/// Forward + loss + backward for a single-stack network. Returns the loss and
/// parameter gradients (scaled by 1, not averaged).
pub fn loss_and_grads<T: Scalar>(
    net: &Sequential<T>,
    input: &Tensor3<T>,
    label: usize,
    mode: DropoutMode,
    rng: &mut ChaCha8Rng,
) -> Result<(T, Gradients<T>)> {
    let (out, tape) = net.forward_train(Value::Spatial(input.clone()), mode, rng)?;
    let logits = out.into_flat();
    let (loss, grad) = softmax_cross_entropy(&logits, label)?;
    let mut grads = Gradients::zeros(&net.param_layout());
    net.backward(&tape, Value::Flat(grad), &mut grads)?;
    Ok((loss, grads))
}
