//! Layer primitives: valid convolution, max pooling, fully connected,
//! inverted dropout.
//!
//! Conventions used throughout the engine:
//! - convolutions are valid (no padding) with stride 1;
//! - conv weights are stored as `[ky][kx][in_c][out_c]`, biases as `[out_c]`;
//! - fully connected weights are stored as `[in][out]`;
//! - max pooling supports floor and ceil output rounding; in ceil mode the
//!   final window is shifted back so it always covers `window` real elements
//!   (`start = min(i * stride, in - window)`), and ties take the first
//!   maximum in row-major order;
//! - ReLU masks are recovered from the cached outputs (`out > 0` iff the
//!   pre-activation was positive).

use rand::Rng;

use super::scalar::Scalar;
use super::tensor::Tensor3;
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Activation {
    Relu,
    None,
}

impl Activation {
    #[inline]
    fn apply<T: Scalar>(self, v: &mut [T]) {
        if self == Activation::Relu {
            for x in v {
                if *x < T::zero() {
                    *x = T::zero();
                }
            }
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PoolRounding {
    Floor,
    Ceil,
}

/// Output extent of a pooling axis.
pub fn pooled_len(input: usize, window: usize, stride: usize, rounding: PoolRounding) -> usize {
    let span = input - window;
    match rounding {
        PoolRounding::Floor => span / stride + 1,
        PoolRounding::Ceil => span.div_ceil(stride) + 1,
    }
}

// ---------------------------------------------------------------------------
// Convolution
// ---------------------------------------------------------------------------

#[derive(Clone, Debug)]
pub struct ConvLayer<T> {
    pub filter_h: usize,
    pub filter_w: usize,
    pub in_channels: usize,
    pub out_channels: usize,
    pub activation: Activation,
    /// `[ky][kx][in_c][out_c]` row-major; length `filter_h*filter_w*in_c*out_c`.
    pub weights: Vec<T>,
    pub bias: Vec<T>,
}

impl<T: Scalar> ConvLayer<T> {
    pub fn zeros(
        filter_h: usize,
        filter_w: usize,
        in_channels: usize,
        out_channels: usize,
        activation: Activation,
    ) -> Self {
        ConvLayer {
            filter_h,
            filter_w,
            in_channels,
            out_channels,
            activation,
            weights: vec![T::zero(); filter_h * filter_w * in_channels * out_channels],
            bias: vec![T::zero(); out_channels],
        }
    }

    pub fn out_shape(&self, input: &Tensor3<T>) -> Result<(usize, usize, usize)> {
        if input.channels() != self.in_channels {
            return Err(Error::Dimension(format!(
                "conv expects {} input channels, got {}",
                self.in_channels,
                input.channels()
            )));
        }
        if self.filter_h > input.height() || self.filter_w > input.width() {
            return Err(Error::Dimension(format!(
                "conv filter {}x{} larger than input {}x{}",
                self.filter_h,
                self.filter_w,
                input.height(),
                input.width()
            )));
        }
        Ok((
            input.height() - self.filter_h + 1,
            input.width() - self.filter_w + 1,
            self.out_channels,
        ))
    }

    /// Patch-matrix layout: row per output position, `filter_h*filter_w*in_c`
    /// columns gathered in the weight order.
    pub(crate) fn im2col(&self, input: &Tensor3<T>, out_h: usize, out_w: usize) -> Vec<T> {
        let k = self.filter_h * self.filter_w * self.in_channels;
        let run = self.filter_w * self.in_channels;
        let src = input.as_slice();
        let in_w = input.width();
        let c = self.in_channels;
        let mut col = vec![T::zero(); out_h * out_w * k];
        for oy in 0..out_h {
            for ox in 0..out_w {
                let row = (oy * out_w + ox) * k;
                for ky in 0..self.filter_h {
                    let s = ((oy + ky) * in_w + ox) * c;
                    let d = row + ky * run;
                    col[d..d + run].copy_from_slice(&src[s..s + run]);
                }
            }
        }
        col
    }

    fn col2im_add(&self, grad_col: &[T], grad_in: &mut Tensor3<T>, out_h: usize, out_w: usize) {
        let k = self.filter_h * self.filter_w * self.in_channels;
        let run = self.filter_w * self.in_channels;
        let in_w = grad_in.width();
        let c = self.in_channels;
        let dst = grad_in.as_mut_slice();
        for oy in 0..out_h {
            for ox in 0..out_w {
                let row = (oy * out_w + ox) * k;
                for ky in 0..self.filter_h {
                    let d = ((oy + ky) * in_w + ox) * c;
                    let s = row + ky * run;
                    for j in 0..run {
                        dst[d + j] += grad_col[s + j];
                    }
                }
            }
        }
    }

    /// Valid convolution, stride 1, optional ReLU. Returns the output and the
    /// patch matrix needed by `backward`.
    pub fn forward(&self, input: &Tensor3<T>) -> Result<(Tensor3<T>, Vec<T>)> {
        let (out_h, out_w, out_c) = self.out_shape(input)?;
        let col = self.im2col(input, out_h, out_w);
        let out = self.forward_from_col(&col, out_h, out_w, out_c);
        Ok((out, col))
    }

    pub(crate) fn forward_from_col(
        &self,
        col: &[T],
        out_h: usize,
        out_w: usize,
        out_c: usize,
    ) -> Tensor3<T> {
        let n = out_h * out_w;
        let k = self.filter_h * self.filter_w * self.in_channels;
        let mut data = vec![T::zero(); n * out_c];
        super::scalar::matmul(&mut data, col, &self.weights, n, k, out_c);
        for pos in 0..n {
            let row = &mut data[pos * out_c..(pos + 1) * out_c];
            for (v, b) in row.iter_mut().zip(&self.bias) {
                *v += *b;
            }
        }
        self.activation.apply(&mut data);
        Tensor3::from_vec_unchecked(out_h, out_w, out_c, data)
    }

    /// Backpropagates through activation, bias, and convolution.
    ///
    /// `col` is the patch matrix cached by `forward`; `output` the cached
    /// activation output. Weight/bias gradients are accumulated in place.
    #[allow(clippy::too_many_arguments)]
    pub fn backward(
        &self,
        col: &[T],
        output: &Tensor3<T>,
        grad_out: &Tensor3<T>,
        in_shape: (usize, usize, usize),
        grad_w: &mut [T],
        grad_b: &mut [T],
    ) -> Tensor3<T> {
        let (out_h, out_w, out_c) = output.shape();
        let n = out_h * out_w;
        let k = self.filter_h * self.filter_w * self.in_channels;

        let mut go = grad_out.as_slice().to_vec();
        if self.activation == Activation::Relu {
            for (g, o) in go.iter_mut().zip(output.as_slice()) {
                if *o <= T::zero() {
                    *g = T::zero();
                }
            }
        }

        for pos in 0..n {
            let row = &go[pos * out_c..(pos + 1) * out_c];
            for (gb, g) in grad_b.iter_mut().zip(row) {
                *gb += *g;
            }
        }

        // grad_w[K x out_c] += col^T * go
        T::gemm(
            k,
            n,
            out_c,
            T::one(),
            col,
            1,
            k as isize,
            &go,
            out_c as isize,
            1,
            T::one(),
            grad_w,
            out_c as isize,
            1,
        );

        // grad_col[N x K] = go * W^T
        let mut grad_col = vec![T::zero(); n * k];
        T::gemm(
            n,
            out_c,
            k,
            T::one(),
            &go,
            out_c as isize,
            1,
            &self.weights,
            1,
            out_c as isize,
            T::zero(),
            &mut grad_col,
            k as isize,
            1,
        );

        let mut grad_in = Tensor3::zeros(in_shape.0, in_shape.1, in_shape.2);
        self.col2im_add(&grad_col, &mut grad_in, out_h, out_w);
        grad_in
    }
}

// ---------------------------------------------------------------------------
// Max pooling
// ---------------------------------------------------------------------------

#[derive(Clone, Debug)]
pub struct MaxPoolLayer {
    pub window_h: usize,
    pub window_w: usize,
    pub stride: usize,
    pub rounding: PoolRounding,
}

impl MaxPoolLayer {
    pub fn out_shape<T: Scalar>(&self, input: &Tensor3<T>) -> Result<(usize, usize, usize)> {
        if self.stride == 0 {
            return Err(Error::Parameter("pool stride must be >= 1".into()));
        }
        if self.window_h > input.height() || self.window_w > input.width() {
            return Err(Error::Dimension(format!(
                "pool window {}x{} larger than input {}x{}",
                self.window_h,
                self.window_w,
                input.height(),
                input.width()
            )));
        }
        Ok((
            pooled_len(input.height(), self.window_h, self.stride, self.rounding),
            pooled_len(input.width(), self.window_w, self.stride, self.rounding),
            input.channels(),
        ))
    }

    /// Returns the pooled tensor and, per output element, the flat spatial
    /// index (`y * in_w + x`) of its argmax for gradient routing.
    pub fn forward<T: Scalar>(&self, input: &Tensor3<T>) -> Result<(Tensor3<T>, Vec<u32>)> {
        let (out_h, out_w, c) = self.out_shape(input)?;
        let (in_h, in_w, _) = input.shape();
        let src = input.as_slice();
        let mut data = vec![T::zero(); out_h * out_w * c];
        let mut argmax = vec![0u32; out_h * out_w * c];
        for oy in 0..out_h {
            let sy = (oy * self.stride).min(in_h - self.window_h);
            for ox in 0..out_w {
                let sx = (ox * self.stride).min(in_w - self.window_w);
                let base = (oy * out_w + ox) * c;
                for ch in 0..c {
                    let mut best = T::neg_infinity();
                    let mut best_idx = 0u32;
                    for y in sy..sy + self.window_h {
                        for x in sx..sx + self.window_w {
                            let v = src[(y * in_w + x) * c + ch];
                            if v > best {
                                best = v;
                                best_idx = (y * in_w + x) as u32;
                            }
                        }
                    }
                    data[base + ch] = best;
                    argmax[base + ch] = best_idx;
                }
            }
        }
        Ok((
            Tensor3::from_vec_unchecked(out_h, out_w, c, data),
            argmax,
        ))
    }

    /// Routes each output gradient to its argmax position.
    pub fn backward<T: Scalar>(
        &self,
        argmax: &[u32],
        grad_out: &Tensor3<T>,
        in_shape: (usize, usize, usize),
    ) -> Tensor3<T> {
        let c = in_shape.2;
        let mut grad_in = Tensor3::zeros(in_shape.0, in_shape.1, in_shape.2);
        let dst = grad_in.as_mut_slice();
        let go = grad_out.as_slice();
        let out_c = grad_out.channels();
        debug_assert_eq!(out_c, c);
        for (pos, g) in go.iter().enumerate() {
            let ch = pos % c;
            let spatial = argmax[pos] as usize;
            dst[spatial * c + ch] += *g;
        }
        grad_in
    }
}

// ---------------------------------------------------------------------------
// Fully connected
// ---------------------------------------------------------------------------

#[derive(Clone, Debug)]
pub struct FcLayer<T> {
    pub in_features: usize,
    pub out_features: usize,
    pub activation: Activation,
    /// `[in][out]` row-major.
    pub weights: Vec<T>,
    pub bias: Vec<T>,
}

impl<T: Scalar> FcLayer<T> {
    pub fn zeros(in_features: usize, out_features: usize, activation: Activation) -> Self {
        FcLayer {
            in_features,
            out_features,
            activation,
            weights: vec![T::zero(); in_features * out_features],
            bias: vec![T::zero(); out_features],
        }
    }

    pub fn forward(&self, input: &[T]) -> Result<Vec<T>> {
        let mut out = self.forward_batch(input, 1)?;
        debug_assert_eq!(out.len(), self.out_features);
        Ok(std::mem::take(&mut out))
    }

    /// Forward over `batch` stacked input rows (`batch * in_features` values).
    pub fn forward_batch(&self, inputs: &[T], batch: usize) -> Result<Vec<T>> {
        if inputs.len() != batch * self.in_features {
            return Err(Error::Dimension(format!(
                "fc expects {} x {} inputs, got {} values",
                batch,
                self.in_features,
                inputs.len()
            )));
        }
        let mut out = vec![T::zero(); batch * self.out_features];
        super::scalar::matmul(
            &mut out,
            inputs,
            &self.weights,
            batch,
            self.in_features,
            self.out_features,
        );
        for b in 0..batch {
            let row = &mut out[b * self.out_features..(b + 1) * self.out_features];
            for (v, bias) in row.iter_mut().zip(&self.bias) {
                *v += *bias;
            }
        }
        self.activation.apply(&mut out);
        Ok(out)
    }

    /// Backward for a single sample; accumulates weight/bias gradients.
    pub fn backward(
        &self,
        input: &[T],
        output: &[T],
        grad_out: &[T],
        grad_w: &mut [T],
        grad_b: &mut [T],
    ) -> Vec<T> {
        let mut gm = grad_out.to_vec();
        if self.activation == Activation::Relu {
            for (g, o) in gm.iter_mut().zip(output) {
                if *o <= T::zero() {
                    *g = T::zero();
                }
            }
        }
        for (gb, g) in grad_b.iter_mut().zip(&gm) {
            *gb += *g;
        }
        // grad_w[in x out] += input^T (in x 1) * gm (1 x out)
        T::gemm(
            self.in_features,
            1,
            self.out_features,
            T::one(),
            input,
            1,
            1,
            &gm,
            self.out_features as isize,
            1,
            T::one(),
            grad_w,
            self.out_features as isize,
            1,
        );
        // grad_in[1 x in] = gm (1 x out) * W^T
        let mut grad_in = vec![T::zero(); self.in_features];
        T::gemm(
            1,
            self.out_features,
            self.in_features,
            T::one(),
            &gm,
            self.out_features as isize,
            1,
            &self.weights,
            1,
            self.out_features as isize,
            T::zero(),
            &mut grad_in,
            self.in_features as isize,
            1,
        );
        grad_in
    }
}

// ---------------------------------------------------------------------------
// Dropout
// ---------------------------------------------------------------------------

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum DropoutMode {
    Train,
    Eval,
}

/// Inverted dropout: in train mode each element is zeroed with probability
/// `rate` and survivors are scaled by `1/(1-rate)`; eval mode is the
/// identity. Returns the output and the per-element scale mask.
pub fn dropout<T: Scalar, R: Rng>(
    input: &[T],
    rate: f64,
    mode: DropoutMode,
    rng: &mut R,
) -> Result<(Vec<T>, Vec<T>)> {
    if !(0.0..1.0).contains(&rate) {
        return Err(Error::Parameter(format!(
            "dropout rate must be in [0, 1), got {rate}"
        )));
    }
    if mode == DropoutMode::Eval || rate == 0.0 {
        return Ok((input.to_vec(), vec![T::one(); input.len()]));
    }
    let keep_scale = T::from_f64(1.0 / (1.0 - rate));
    let mut mask = vec![T::zero(); input.len()];
    let mut out = vec![T::zero(); input.len()];
    for i in 0..input.len() {
        if rng.random::<f64>() >= rate {
            mask[i] = keep_scale;
            out[i] = input[i] * keep_scale;
        }
    }
    Ok((out, mask))
}
