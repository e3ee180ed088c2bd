//! Forward inference for the GGR-CNN grasp network: float32 tensors,
//! convolution primitives over a GEMM, a binary weight format, shape-checked
//! network construction and the predictor interface.

mod heuristic;
mod network;
mod weights;

pub use heuristic::{heuristic_predictor, HeuristicPredictor, HEURISTIC_WIDTH};
pub use network::{build_network, random_weights, Layer, Network, NetworkSpec, HEAD_NAMES};
pub use weights::{read_weights, write_weights, WeightBundle};

use thiserror::Error;

use crate::grasp::GraspMap;

#[derive(Debug, Error, PartialEq)]
pub enum NnError {
    #[error("{layer}: {msg}")]
    Shape { layer: String, msg: String },
    #[error("missing weight `{0}`")]
    MissingWeight(String),
    #[error("{0}: non-finite activation")]
    NonFinite(String),
    #[error("weight file: {0}")]
    Format(String),
    #[error("tensor data length {len} does not match shape {shape:?}")]
    DataLength { shape: Vec<usize>, len: usize },
}

fn shape_err(layer: &str, msg: impl Into<String>) -> NnError {
    NnError::Shape { layer: layer.to_string(), msg: msg.into() }
}

/// Dense row-major float32 tensor. Activations are `(channels, height, width)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Tensor {
    shape: Vec<usize>,
    data: Vec<f32>,
}

impl Tensor {
    pub fn new(shape: Vec<usize>, data: Vec<f32>) -> Result<Self, NnError> {
        if shape.iter().product::<usize>() != data.len() {
            return Err(NnError::DataLength { shape, len: data.len() });
        }
        Ok(Self { shape, data })
    }

    pub fn zeros(shape: &[usize]) -> Self {
        Self { shape: shape.to_vec(), data: vec![0.0; shape.iter().product()] }
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn data(&self) -> &[f32] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f32] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<f32> {
        self.data
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    fn chw(&self, layer: &str) -> Result<(usize, usize, usize), NnError> {
        match self.shape[..] {
            [c, h, w] => Ok((c, h, w)),
            _ => Err(shape_err(layer, format!("expected a (C, H, W) activation, got {:?}", self.shape))),
        }
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }
}

pub fn relu(t: &mut Tensor) {
    for v in &mut t.data {
        *v = v.max(0.0);
    }
}

/// `c = a (m×k) · b (k×n)` with a row-major `a` of given strides.
fn gemm(m: usize, k: usize, n: usize, a: &[f32], rsa: usize, csa: usize, b: &[f32], c: &mut [f32]) {
    if m == 0 || n == 0 {
        return;
    }
    debug_assert!(c.len() >= m * n && b.len() >= k * n);
    // SAFETY: the slices cover the strided extents passed to sgemm.
    unsafe {
        matrixmultiply::sgemm(
            m,
            k,
            n,
            1.0,
            a.as_ptr(),
            rsa as isize,
            csa as isize,
            b.as_ptr(),
            n as isize,
            1,
            0.0,
            c.as_mut_ptr(),
            n as isize,
            1,
        );
    }
}

fn conv_out(size: usize, k: usize, stride: usize, pad: usize) -> Option<usize> {
    let padded = size + 2 * pad;
    (stride > 0 && padded >= k).then(|| (padded - k) / stride + 1)
}

/// Cross-correlation. `weight` is `(out, in, kh, kw)`, `bias` is `(out)`.
pub fn conv2d(input: &Tensor, weight: &Tensor, bias: &Tensor, stride: usize, padding: usize) -> Result<Tensor, NnError> {
    conv2d_named("conv2d", input, weight, bias, stride, padding)
}

pub(crate) fn conv2d_named(
    layer: &str,
    input: &Tensor,
    weight: &Tensor,
    bias: &Tensor,
    stride: usize,
    padding: usize,
) -> Result<Tensor, NnError> {
    let (c, h, w) = input.chw(layer)?;
    let [oc, ic, kh, kw] = weight.shape[..] else {
        return Err(shape_err(layer, format!("weight must be (out, in, kh, kw), got {:?}", weight.shape)));
    };
    if ic != c {
        return Err(shape_err(layer, format!("weight expects {ic} input channels, activation has {c}")));
    }
    if bias.shape != [oc] {
        return Err(shape_err(layer, format!("bias shape {:?} does not match {oc} filters", bias.shape)));
    }
    let (Some(oh), Some(ow)) = (conv_out(h, kh, stride, padding), conv_out(w, kw, stride, padding)) else {
        return Err(shape_err(layer, format!("kernel {kh}x{kw} does not fit a {h}x{w} input")));
    };

    let kk = c * kh * kw;
    let n = oh * ow;
    let mut cols = vec![0.0f32; kk * n];
    for ch in 0..c {
        let plane = &input.data[ch * h * w..(ch + 1) * h * w];
        for ky in 0..kh {
            for kx in 0..kw {
                let row = &mut cols[((ch * kh + ky) * kw + kx) * n..][..n];
                for oy in 0..oh {
                    let iy = (oy * stride + ky) as isize - padding as isize;
                    if iy < 0 || iy >= h as isize {
                        continue;
                    }
                    let src = &plane[iy as usize * w..][..w];
                    let dst = &mut row[oy * ow..][..ow];
                    for (ox, d) in dst.iter_mut().enumerate() {
                        let ix = (ox * stride + kx) as isize - padding as isize;
                        if ix >= 0 && ix < w as isize {
                            *d = src[ix as usize];
                        }
                    }
                }
            }
        }
    }
    let mut out = vec![0.0f32; oc * n];
    gemm(oc, kk, n, &weight.data, kk, 1, &cols, &mut out);
    for (o, chunk) in out.chunks_mut(n).enumerate() {
        let b = bias.data[o];
        chunk.iter_mut().for_each(|v| *v += b);
    }
    Ok(Tensor { shape: vec![oc, oh, ow], data: out })
}

/// Transposed convolution (the adjoint of `conv2d` with the same stride and
/// padding). `weight` is `(in, out, kh, kw)`.
pub fn conv_transpose2d(input: &Tensor, weight: &Tensor, bias: &Tensor, stride: usize, padding: usize) -> Result<Tensor, NnError> {
    conv_transpose2d_named("conv_transpose2d", input, weight, bias, stride, padding)
}

pub(crate) fn conv_transpose2d_named(
    layer: &str,
    input: &Tensor,
    weight: &Tensor,
    bias: &Tensor,
    stride: usize,
    padding: usize,
) -> Result<Tensor, NnError> {
    let (c, h, w) = input.chw(layer)?;
    let [ic, oc, kh, kw] = weight.shape[..] else {
        return Err(shape_err(layer, format!("weight must be (in, out, kh, kw), got {:?}", weight.shape)));
    };
    if ic != c {
        return Err(shape_err(layer, format!("weight expects {ic} input channels, activation has {c}")));
    }
    if bias.shape != [oc] {
        return Err(shape_err(layer, format!("bias shape {:?} does not match {oc} filters", bias.shape)));
    }
    if stride == 0 || h == 0 || w == 0 || (h - 1) * stride + kh <= 2 * padding || (w - 1) * stride + kw <= 2 * padding {
        return Err(shape_err(layer, format!("kernel {kh}x{kw} with padding {padding} leaves no output from {h}x{w}")));
    }
    let oh = (h - 1) * stride + kh - 2 * padding;
    let ow = (w - 1) * stride + kw - 2 * padding;

    // cols (oc·kh·kw × h·w) = weightᵀ · input
    let kk = oc * kh * kw;
    let n = h * w;
    let mut cols = vec![0.0f32; kk * n];
    gemm(kk, c, n, &weight.data, 1, kk, &input.data, &mut cols);

    let mut out = vec![0.0f32; oc * oh * ow];
    for o in 0..oc {
        let plane = &mut out[o * oh * ow..][..oh * ow];
        for ky in 0..kh {
            for kx in 0..kw {
                let row = &cols[((o * kh + ky) * kw + kx) * n..][..n];
                for iy in 0..h {
                    let y = (iy * stride + ky) as isize - padding as isize;
                    if y < 0 || y >= oh as isize {
                        continue;
                    }
                    let dst = &mut plane[y as usize * ow..][..ow];
                    for (ix, &v) in row[iy * w..][..w].iter().enumerate() {
                        let x = (ix * stride + kx) as isize - padding as isize;
                        if x >= 0 && x < ow as isize {
                            dst[x as usize] += v;
                        }
                    }
                }
            }
        }
        let b = bias.data[o];
        plane.iter_mut().for_each(|v| *v += b);
    }
    Ok(Tensor { shape: vec![oc, oh, ow], data: out })
}

/// Weights of one residual block: two 3×3, stride 1, padding 1 convolutions.
#[derive(Debug, Clone, Copy)]
pub struct ResidualWeights<'a> {
    pub w1: &'a Tensor,
    pub b1: &'a Tensor,
    pub w2: &'a Tensor,
    pub b2: &'a Tensor,
}

/// `x + conv(relu(conv(x)))`.
pub fn residual_block(input: &Tensor, weights: ResidualWeights<'_>) -> Result<Tensor, NnError> {
    residual_block_named("residual_block", input, weights)
}

pub(crate) fn residual_block_named(layer: &str, input: &Tensor, wt: ResidualWeights<'_>) -> Result<Tensor, NnError> {
    let mut mid = conv2d_named(&format!("{layer}.conv1"), input, wt.w1, wt.b1, 1, 1)?;
    relu(&mut mid);
    let mut out = conv2d_named(&format!("{layer}.conv2"), &mid, wt.w2, wt.b2, 1, 1)?;
    if out.shape != input.shape {
        return Err(shape_err(
            layer,
            format!("block maps {:?} to {:?}; it must preserve shape", input.shape, out.shape),
        ));
    }
    for (o, i) in out.data.iter_mut().zip(&input.data) {
        *o += i;
    }
    Ok(out)
}

/// Anything that turns a `1×H×W` mean-centered depth tensor into grasp maps.
pub trait Predictor: Send + Sync {
    fn predict(&self, input: &Tensor) -> Result<GraspMap, NnError>;
}
