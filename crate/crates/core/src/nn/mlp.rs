//! Fully connected network with group normalization and ReLU, evaluated in
//! row-major batches, with hand-derived reverse-mode gradients.

use std::fmt::Debug;
use std::iter::Sum;

use num_traits::Float;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const GROUP_NORM_EPSILON: f64 = 1e-5;

/// Scalar type of network parameters.
pub trait Real: Float + Default + Debug + Send + Sync + Sum + 'static {
    /// `C ← α·A·B + β·C` on strided row/column layouts.
    ///
    /// # Safety
    /// The pointers and strides must describe valid, non-overlapping
    /// `m × k`, `k × n`, and `m × n` views.
    #[allow(clippy::too_many_arguments)]
    unsafe fn gemm(
        m: usize,
        k: usize,
        n: usize,
        alpha: Self,
        a: *const Self,
        rsa: isize,
        csa: isize,
        b: *const Self,
        rsb: isize,
        csb: isize,
        beta: Self,
        c: *mut Self,
        rsc: isize,
        csc: isize,
    );

    fn from_f64(x: f64) -> Self;
    fn as_f64(self) -> f64;
}

impl Real for f32 {
    unsafe fn gemm(
        m: usize,
        k: usize,
        n: usize,
        alpha: f32,
        a: *const f32,
        rsa: isize,
        csa: isize,
        b: *const f32,
        rsb: isize,
        csb: isize,
        beta: f32,
        c: *mut f32,
        rsc: isize,
        csc: isize,
    ) {
        matrixmultiply::sgemm(m, k, n, alpha, a, rsa, csa, b, rsb, csb, beta, c, rsc, csc);
    }

    fn from_f64(x: f64) -> f32 {
        x as f32
    }

    fn as_f64(self) -> f64 {
        f64::from(self)
    }
}

impl Real for f64 {
    unsafe fn gemm(
        m: usize,
        k: usize,
        n: usize,
        alpha: f64,
        a: *const f64,
        rsa: isize,
        csa: isize,
        b: *const f64,
        rsb: isize,
        csb: isize,
        beta: f64,
        c: *mut f64,
        rsc: isize,
        csc: isize,
    ) {
        matrixmultiply::dgemm(m, k, n, alpha, a, rsa, csa, b, rsb, csb, beta, c, rsc, csc);
    }

    fn from_f64(x: f64) -> f64 {
        x
    }

    fn as_f64(self) -> f64 {
        self
    }
}

/// `Y (n × out) = X (n × in) · Wᵀ`, with `W` row-major `out × in`.
fn matmul_xwt<T: Real>(x: &[T], w: &[T], n: usize, din: usize, dout: usize, y: &mut [T]) {
    assert!(x.len() >= n * din && w.len() >= dout * din && y.len() >= n * dout);
    // SAFETY: bounds asserted above; buffers are distinct borrows.
    unsafe {
        T::gemm(
            n,
            din,
            dout,
            T::one(),
            x.as_ptr(),
            din as isize,
            1,
            w.as_ptr(),
            1,
            din as isize,
            T::zero(),
            y.as_mut_ptr(),
            dout as isize,
            1,
        );
    }
}

/// `dW (out × in) += dYᵀ (out × n) · X (n × in)`.
fn accum_dyt_x<T: Real>(dy: &[T], x: &[T], n: usize, din: usize, dout: usize, dw: &mut [T]) {
    assert!(dy.len() >= n * dout && x.len() >= n * din && dw.len() >= dout * din);
    // SAFETY: bounds asserted above; buffers are distinct borrows.
    unsafe {
        T::gemm(
            dout,
            n,
            din,
            T::one(),
            dy.as_ptr(),
            1,
            dout as isize,
            x.as_ptr(),
            din as isize,
            1,
            T::one(),
            dw.as_mut_ptr(),
            din as isize,
            1,
        );
    }
}

/// `dX (n × in) = dY (n × out) · W (out × in)`.
fn matmul_dy_w<T: Real>(dy: &[T], w: &[T], n: usize, din: usize, dout: usize, dx: &mut [T]) {
    assert!(dy.len() >= n * dout && w.len() >= dout * din && dx.len() >= n * din);
    // SAFETY: bounds asserted above; buffers are distinct borrows.
    unsafe {
        T::gemm(
            n,
            dout,
            din,
            T::one(),
            dy.as_ptr(),
            dout as isize,
            1,
            w.as_ptr(),
            din as isize,
            1,
            T::zero(),
            dx.as_mut_ptr(),
            din as isize,
            1,
        );
    }
}

/// Layer widths and normalization grouping.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct MlpShape {
    pub input: usize,
    pub hidden: usize,
    /// Number of linear layers; all but the last are normalized and rectified.
    pub layers: usize,
    pub output: usize,
    pub groups: usize,
}

impl MlpShape {
    pub const DEFAULT_HIDDEN: usize = 128;
    pub const DEFAULT_LAYERS: usize = 5;
    pub const DEFAULT_GROUPS: usize = 4;

    pub fn new(input: usize, output: usize) -> Self {
        Self {
            input,
            hidden: Self::DEFAULT_HIDDEN,
            layers: Self::DEFAULT_LAYERS,
            output,
            groups: Self::DEFAULT_GROUPS,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.layers < 2 || self.input == 0 || self.output == 0 || self.hidden == 0 {
            return Err(Error::Invalid(format!("degenerate network shape {self:?}")));
        }
        if self.groups == 0 || self.hidden % self.groups != 0 {
            return Err(Error::Invalid(format!(
                "group count {} must divide hidden width {}",
                self.groups, self.hidden
            )));
        }
        Ok(())
    }

    /// `(in, out)` of layer `l`.
    pub fn layer_dims(&self, l: usize) -> (usize, usize) {
        let din = if l == 0 { self.input } else { self.hidden };
        let dout = if l + 1 == self.layers { self.output } else { self.hidden };
        (din, dout)
    }

    fn is_hidden(&self, l: usize) -> bool {
        l + 1 < self.layers
    }

    /// Parameter offsets of layer `l`: weight, bias, and (hidden layers)
    /// group-norm scale and offset.
    pub fn layer_offsets(&self, l: usize) -> LayerOffsets {
        let mut at = 0;
        for k in 0..l {
            at += self.layer_size(k);
        }
        let (din, dout) = self.layer_dims(l);
        let weight = at;
        let bias = weight + din * dout;
        let scale = bias + dout;
        let offset = scale + dout;
        LayerOffsets {
            weight,
            bias,
            scale,
            offset,
        }
    }

    fn layer_size(&self, l: usize) -> usize {
        let (din, dout) = self.layer_dims(l);
        din * dout + dout + if self.is_hidden(l) { 2 * dout } else { 0 }
    }

    pub fn num_params(&self) -> usize {
        (0..self.layers).map(|l| self.layer_size(l)).sum()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LayerOffsets {
    pub weight: usize,
    pub bias: usize,
    pub scale: usize,
    pub offset: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub enum InitScheme {
    /// He-uniform weights everywhere.
    HeUniform,
    /// He-uniform hidden weights, zero output layer: the raw output starts
    /// at exactly zero.
    ZeroOutput,
    /// Every parameter zero, group-norm scales included.
    Zeros,
}

/// Network parameters in one flat buffer, in layer order: weight
/// (row-major out × in), bias, then scale and offset for hidden layers.
#[derive(Debug, Clone, PartialEq)]
pub struct Mlp<T> {
    shape: MlpShape,
    params: Vec<T>,
}

/// Intermediates saved by a forward pass for the backward pass.
#[derive(Debug, Clone)]
pub struct Tape<T> {
    n: usize,
    /// Input of each layer.
    inputs: Vec<Vec<T>>,
    /// Standardized pre-affine activations of hidden layers.
    xhat: Vec<Vec<T>>,
    /// `1/√(var + ε)` per row and group of hidden layers.
    inv_std: Vec<Vec<T>>,
}

impl<T: Real> Mlp<T> {
    pub fn zeros(shape: MlpShape) -> Result<Self> {
        shape.validate()?;
        Ok(Self {
            shape,
            params: vec![T::zero(); shape.num_params()],
        })
    }

    pub fn from_params(shape: MlpShape, params: Vec<T>) -> Result<Self> {
        shape.validate()?;
        if params.len() != shape.num_params() {
            return Err(Error::shape("Mlp", shape.num_params(), params.len()));
        }
        Ok(Self { shape, params })
    }

    pub fn init(shape: MlpShape, scheme: InitScheme, rng: &mut impl Rng) -> Result<Self> {
        let mut net = Self::zeros(shape)?;
        if scheme == InitScheme::Zeros {
            return Ok(net);
        }
        for l in 0..shape.layers {
            let (din, dout) = shape.layer_dims(l);
            let off = shape.layer_offsets(l);
            let last = l + 1 == shape.layers;
            if !(last && scheme == InitScheme::ZeroOutput) {
                let bound = (6.0 / din as f64).sqrt();
                for w in &mut net.params[off.weight..off.weight + din * dout] {
                    *w = T::from_f64(rng.random_range(-bound..bound));
                }
            }
            if shape.is_hidden(l) {
                net.params[off.scale..off.scale + dout].fill(T::one());
            }
        }
        Ok(net)
    }

    pub fn shape(&self) -> &MlpShape {
        &self.shape
    }

    pub fn params(&self) -> &[T] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [T] {
        &mut self.params
    }

    pub fn num_params(&self) -> usize {
        self.params.len()
    }

    /// Raw outputs for `n` row-major input rows.
    pub fn forward(&self, x: &[T], n: usize) -> Vec<T> {
        self.run(x, n, None)
    }

    pub fn forward_with_tape(&self, x: &[T], n: usize) -> (Vec<T>, Tape<T>) {
        let mut tape = Tape {
            n,
            inputs: Vec::with_capacity(self.shape.layers),
            xhat: Vec::new(),
            inv_std: Vec::new(),
        };
        let y = self.run(x, n, Some(&mut tape));
        (y, tape)
    }

    fn run(&self, x: &[T], n: usize, mut tape: Option<&mut Tape<T>>) -> Vec<T> {
        assert_eq!(x.len(), n * self.shape.input, "input rows have the wrong width");
        let mut cur = x.to_vec();
        for l in 0..self.shape.layers {
            let (din, dout) = self.shape.layer_dims(l);
            let off = self.shape.layer_offsets(l);
            let mut y = vec![T::zero(); n * dout];
            matmul_xwt(&cur, &self.params[off.weight..], n, din, dout, &mut y);
            let bias = &self.params[off.bias..off.bias + dout];
            for row in y.chunks_mut(dout) {
                for (v, b) in row.iter_mut().zip(bias) {
                    *v = *v + *b;
                }
            }
            if self.shape.is_hidden(l) {
                let scale = &self.params[off.scale..off.scale + dout];
                let offset = &self.params[off.offset..off.offset + dout];
                let (xhat, inv_std) = standardize(&y, dout, self.shape.groups);
                for (r, row) in y.chunks_mut(dout).enumerate() {
                    let xr = &xhat[r * dout..(r + 1) * dout];
                    for c in 0..dout {
                        let v = xr[c] * scale[c] + offset[c];
                        row[c] = if v > T::zero() { v } else { T::zero() };
                    }
                }
                if let Some(t) = tape.as_deref_mut() {
                    t.xhat.push(xhat);
                    t.inv_std.push(inv_std);
                }
            }
            if let Some(t) = tape.as_deref_mut() {
                t.inputs.push(std::mem::replace(&mut cur, y));
            } else {
                cur = y;
            }
        }
        cur
    }

    /// Accumulates parameter gradients into `grads` for upstream `dy`
    /// (n × output) and returns the input gradient (n × input).
    pub fn backward(&self, tape: &Tape<T>, dy: &[T], grads: &mut [T]) -> Vec<T> {
        let n = tape.n;
        assert_eq!(dy.len(), n * self.shape.output);
        assert_eq!(grads.len(), self.params.len());
        let mut delta = dy.to_vec();
        for l in (0..self.shape.layers).rev() {
            let (din, dout) = self.shape.layer_dims(l);
            let off = self.shape.layer_offsets(l);
            if self.shape.is_hidden(l) {
                delta = self.norm_backward(l, tape, &delta, grads);
            }
            let x = &tape.inputs[l];
            accum_dyt_x(&delta, x, n, din, dout, &mut grads[off.weight..off.weight + din * dout]);
            let db = &mut grads[off.bias..off.bias + dout];
            for row in delta.chunks(dout) {
                for (g, d) in db.iter_mut().zip(row) {
                    *g = *g + *d;
                }
            }
            let mut dx = vec![T::zero(); n * din];
            matmul_dy_w(&delta, &self.params[off.weight..], n, din, dout, &mut dx);
            delta = dx;
        }
        delta
    }

    /// Back through ReLU and group norm of hidden layer `l`: takes the
    /// gradient w.r.t. the layer output, returns it w.r.t. the linear output.
    fn norm_backward(&self, l: usize, tape: &Tape<T>, dout_grad: &[T], grads: &mut [T]) -> Vec<T> {
        let (_, dout) = self.shape.layer_dims(l);
        let off = self.shape.layer_offsets(l);
        let groups = self.shape.groups;
        let gsize = dout / groups;
        let xhat = &tape.xhat[l];
        let inv_std = &tape.inv_std[l];
        let scale = &self.params[off.scale..off.scale + dout];
        let offset = &self.params[off.offset..off.offset + dout];
        let mut dscale = vec![T::zero(); dout];
        let mut doffset = vec![T::zero(); dout];
        let mut out = vec![T::zero(); dout_grad.len()];
        let m = T::from_f64(gsize as f64);
        let mut dxhat = vec![T::zero(); dout];
        for r in 0..tape.n {
            let xr = &xhat[r * dout..(r + 1) * dout];
            let gr = &dout_grad[r * dout..(r + 1) * dout];
            for c in 0..dout {
                let pre = xr[c] * scale[c] + offset[c];
                let g = if pre > T::zero() { gr[c] } else { T::zero() };
                dscale[c] = dscale[c] + g * xr[c];
                doffset[c] = doffset[c] + g;
                dxhat[c] = g * scale[c];
            }
            let orow = &mut out[r * dout..(r + 1) * dout];
            for g in 0..groups {
                let range = g * gsize..(g + 1) * gsize;
                let s1: T = dxhat[range.clone()].iter().copied().sum();
                let s2: T = dxhat[range.clone()].iter().zip(&xr[range.clone()]).map(|(a, b)| *a * *b).sum();
                let is = inv_std[r * groups + g] / m;
                for c in range {
                    orow[c] = is * (m * dxhat[c] - s1 - xr[c] * s2);
                }
            }
        }
        for c in 0..dout {
            grads[off.scale + c] = grads[off.scale + c] + dscale[c];
            grads[off.offset + c] = grads[off.offset + c] + doffset[c];
        }
        out
    }
}

/// Per-row, per-group standardization; returns the standardized values and
/// `1/√(var + ε)` per row and group.
fn standardize<T: Real>(y: &[T], width: usize, groups: usize) -> (Vec<T>, Vec<T>) {
    let gsize = width / groups;
    let m = T::from_f64(gsize as f64);
    let eps = T::from_f64(GROUP_NORM_EPSILON);
    let rows = y.len() / width;
    let mut xhat = vec![T::zero(); y.len()];
    let mut inv_std = vec![T::zero(); rows * groups];
    for r in 0..rows {
        for g in 0..groups {
            let range = r * width + g * gsize..r * width + (g + 1) * gsize;
            let vals = &y[range.clone()];
            let mean = vals.iter().copied().sum::<T>() / m;
            let var = vals.iter().map(|&v| (v - mean) * (v - mean)).sum::<T>() / m;
            let is = T::one() / (var + eps).sqrt();
            inv_std[r * groups + g] = is;
            for (o, &v) in xhat[range].iter_mut().zip(vals) {
                *o = (v - mean) * is;
            }
        }
    }
    (xhat, inv_std)
}

/// Group normalization of a single channel vector followed by the affine
/// scale and offset.
pub fn group_norm<T: Real>(x: &[T], groups: usize, scale: &[T], offset: &[T]) -> Result<Vec<T>> {
    if groups == 0 || x.len() % groups != 0 {
        return Err(Error::Invalid(format!("{groups} groups do not divide {} channels", x.len())));
    }
    if scale.len() != x.len() || offset.len() != x.len() {
        return Err(Error::shape("group_norm", x.len(), scale.len().min(offset.len())));
    }
    let (xhat, _) = standardize(x, x.len(), groups);
    Ok(xhat
        .iter()
        .zip(scale.iter().zip(offset))
        .map(|(&v, (&s, &o))| v * s + o)
        .collect())
}
