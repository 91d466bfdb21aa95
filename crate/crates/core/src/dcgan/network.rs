use super::tensor::{col2im, gemm, im2col, Geom, Scalar, Tensor};

pub const LEAKY_SLOPE: f64 = 0.2;
pub const BN_EPS: f64 = 1e-5;
pub const BN_MOMENTUM: f64 = 0.1;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ShapeMismatch {
    #[error("expected input of shape (n, {}, {}, {}) with n >= 1, got {got:?}", .expected[0], .expected[1], .expected[2])]
    Input { expected: [usize; 3], got: [usize; 4] },
}

/// A named tensor: trainable parameter (with gradient) or running statistic.
#[derive(Clone, Debug, PartialEq)]
pub struct Param<T> {
    pub name: String,
    pub shape: Vec<usize>,
    pub value: Vec<T>,
    pub grad: Vec<T>,
}

impl<T: Scalar> Param<T> {
    fn new(name: String, shape: Vec<usize>, value: Vec<T>, trainable: bool) -> Self {
        let grad = if trainable { vec![T::zero(); value.len()] } else { Vec::new() };
        Param { name, shape, value, grad }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) struct ConvSpec {
    pub cin: usize,
    pub cout: usize,
    pub k: usize,
    pub s: usize,
    pub p: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum Layer {
    /// Weight `(cout, cin, k, k)`, no bias.
    Conv { weight: usize, spec: ConvSpec },
    /// Weight `(cin, cout, k, k)`, no bias.
    ConvT { weight: usize, spec: ConvSpec },
    BatchNorm { gamma: usize, beta: usize, mean: usize, var: usize },
    Relu,
    LeakyRelu,
    Tanh,
}

enum Cache<T> {
    Input(Tensor<T>),
    Output(Tensor<T>),
    Norm { xhat: Tensor<T>, invstd: Vec<T> },
}

/// Activations kept by a training-mode forward pass for the backward pass.
pub struct Tape<T> {
    caches: Vec<Cache<T>>,
    batch_stats: Vec<(Vec<f64>, Vec<f64>)>,
}

/// A feed-forward stack of layers over NCHW tensors.
#[derive(Clone, Debug, PartialEq)]
pub struct Network<T> {
    prefix: String,
    input: [usize; 3],
    layers: Vec<Layer>,
    params: Vec<Param<T>>,
    buffers: Vec<Param<T>>,
}

impl<T: Scalar> Network<T> {
    pub(crate) fn new(prefix: &str, input: [usize; 3]) -> Self {
        Network { prefix: prefix.to_string(), input, layers: Vec::new(), params: Vec::new(), buffers: Vec::new() }
    }

    fn param(&mut self, suffix: &str, shape: Vec<usize>, value: Vec<T>) -> usize {
        let name = format!("{}.{}.{suffix}", self.prefix, self.layers.len());
        self.params.push(Param::new(name, shape, value, true));
        self.params.len() - 1
    }

    fn buffer(&mut self, suffix: &str, value: Vec<T>) -> usize {
        let name = format!("{}.{}.{suffix}", self.prefix, self.layers.len());
        let shape = vec![value.len()];
        self.buffers.push(Param::new(name, shape, value, false));
        self.buffers.len() - 1
    }

    pub(crate) fn conv(&mut self, spec: ConvSpec, weight: Vec<T>) {
        let w = self.param("weight", vec![spec.cout, spec.cin, spec.k, spec.k], weight);
        self.layers.push(Layer::Conv { weight: w, spec });
    }

    pub(crate) fn conv_transpose(&mut self, spec: ConvSpec, weight: Vec<T>) {
        let w = self.param("weight", vec![spec.cin, spec.cout, spec.k, spec.k], weight);
        self.layers.push(Layer::ConvT { weight: w, spec });
    }

    pub(crate) fn batch_norm(&mut self, gamma: Vec<T>) {
        let c = gamma.len();
        let g = self.param("weight", vec![c], gamma);
        let b = self.param("bias", vec![c], vec![T::zero(); c]);
        let mean = self.buffer("running_mean", vec![T::zero(); c]);
        let var = self.buffer("running_var", vec![T::one(); c]);
        self.layers.push(Layer::BatchNorm { gamma: g, beta: b, mean, var });
    }

    pub(crate) fn push(&mut self, layer: Layer) {
        self.layers.push(layer);
    }

    pub fn params(&self) -> &[Param<T>] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [Param<T>] {
        &mut self.params
    }

    /// Batch-norm running statistics.
    pub fn buffers(&self) -> &[Param<T>] {
        &self.buffers
    }

    pub fn buffers_mut(&mut self) -> &mut [Param<T>] {
        &mut self.buffers
    }

    pub fn input_shape(&self) -> [usize; 3] {
        self.input
    }

    pub fn zero_grad(&mut self) {
        for p in &mut self.params {
            p.grad.fill(T::zero());
        }
    }

    fn check(&self, x: &Tensor<T>) -> Result<(), ShapeMismatch> {
        let s = x.shape();
        if s[0] == 0 || s[1..] != self.input {
            return Err(ShapeMismatch::Input { expected: self.input, got: s });
        }
        Ok(())
    }

    /// Inference: batch norm uses running statistics, nothing is recorded.
    pub fn forward_eval(&self, x: Tensor<T>) -> Result<Tensor<T>, ShapeMismatch> {
        self.check(&x)?;
        let mut x = x;
        for layer in &self.layers {
            x = match *layer {
                Layer::BatchNorm { gamma, beta, mean, var } => {
                    let (g, b) = (&self.params[gamma].value, &self.params[beta].value);
                    let (m, v) = (&self.buffers[mean].value, &self.buffers[var].value);
                    bn_eval(x, g, b, m, v)
                }
                _ => self.apply(layer, &x),
            };
        }
        Ok(x)
    }

    /// Training-mode forward pass that leaves the network untouched.
    pub fn forward_train(&self, x: Tensor<T>) -> Result<(Tensor<T>, Tape<T>), ShapeMismatch> {
        self.check(&x)?;
        let mut tape = Tape { caches: Vec::with_capacity(self.layers.len()), batch_stats: Vec::new() };
        let mut x = x;
        for layer in &self.layers {
            let (y, cache) = match *layer {
                Layer::Conv { .. } | Layer::ConvT { .. } | Layer::LeakyRelu => {
                    let y = self.apply(layer, &x);
                    (y, Cache::Input(x))
                }
                Layer::Relu | Layer::Tanh => {
                    let y = self.apply(layer, &x);
                    (y.clone(), Cache::Output(y))
                }
                Layer::BatchNorm { gamma, beta, .. } => {
                    let (g, b) = (&self.params[gamma].value, &self.params[beta].value);
                    let (y, xhat, invstd, stats) = bn_train(&x, g, b);
                    tape.batch_stats.push(stats);
                    (y, Cache::Norm { xhat, invstd })
                }
            };
            tape.caches.push(cache);
            x = y;
        }
        Ok((x, tape))
    }

    /// Folds the batch statistics of a training pass into the running ones.
    pub fn update_running_stats(&mut self, tape: &Tape<T>) {
        let bns = self.layers.iter().filter_map(|l| match *l {
            Layer::BatchNorm { mean, var, .. } => Some((mean, var)),
            _ => None,
        });
        let m = BN_MOMENTUM;
        for ((mean, var), (bm, bv)) in bns.collect::<Vec<_>>().into_iter().zip(&tape.batch_stats) {
            for (r, &b) in self.buffers[mean].value.iter_mut().zip(bm) {
                *r = T::of((1.0 - m) * r.f64() + m * b);
            }
            for (r, &b) in self.buffers[var].value.iter_mut().zip(bv) {
                *r = T::of((1.0 - m) * r.f64() + m * b);
            }
        }
    }

    /// Backpropagates `dy` through a recorded pass. Parameter gradients are
    /// accumulated when `param_grads`; the input gradient is returned when
    /// `input_grad`.
    pub fn backward(&mut self, tape: Tape<T>, dy: Tensor<T>, param_grads: bool, input_grad: bool) -> Option<Tensor<T>> {
        let mut dy = dy;
        for (i, (layer, cache)) in self.layers.clone().into_iter().zip(tape.caches).enumerate().rev() {
            let need_dx = i > 0 || input_grad;
            dy = match (layer, cache) {
                (Layer::Conv { weight, spec }, Cache::Input(x)) => {
                    let (dx, dw) = conv_backward(&x, &dy, &self.params[weight].value, spec, need_dx, param_grads);
                    add_into(&mut self.params[weight].grad, dw);
                    dx
                }
                (Layer::ConvT { weight, spec }, Cache::Input(x)) => {
                    let (dx, dw) = conv_t_backward(&x, &dy, &self.params[weight].value, spec, need_dx, param_grads);
                    add_into(&mut self.params[weight].grad, dw);
                    dx
                }
                (Layer::BatchNorm { gamma, beta, .. }, Cache::Norm { xhat, invstd }) => {
                    let (dx, dg, db) = bn_backward(&xhat, &invstd, &self.params[gamma].value, &dy);
                    if param_grads {
                        add_into(&mut self.params[gamma].grad, Some(dg));
                        add_into(&mut self.params[beta].grad, Some(db));
                    }
                    dx
                }
                (Layer::Relu, Cache::Output(y)) => {
                    zip_map(dy, &y, |g, y| if y > T::zero() { g } else { T::zero() })
                }
                (Layer::Tanh, Cache::Output(y)) => zip_map(dy, &y, |g, y| g * (T::one() - y * y)),
                (Layer::LeakyRelu, Cache::Input(x)) => {
                    let slope = T::of(LEAKY_SLOPE);
                    zip_map(dy, &x, |g, x| if x > T::zero() { g } else { g * slope })
                }
                _ => unreachable!("tape does not match the network"),
            };
            if !need_dx {
                return None;
            }
        }
        Some(dy)
    }

    fn apply(&self, layer: &Layer, x: &Tensor<T>) -> Tensor<T> {
        match *layer {
            Layer::Conv { weight, spec } => conv_forward(x, &self.params[weight].value, spec),
            Layer::ConvT { weight, spec } => conv_t_forward(x, &self.params[weight].value, spec),
            Layer::Relu => x.clone().map(|v| v.max(T::zero())),
            Layer::LeakyRelu => {
                let slope = T::of(LEAKY_SLOPE);
                x.clone().map(|v| if v > T::zero() { v } else { v * slope })
            }
            Layer::Tanh => x.clone().map(|v| v.tanh()),
            Layer::BatchNorm { .. } => unreachable!("batch norm handled by the caller"),
        }
    }
}

fn add_into<T: Scalar>(acc: &mut [T], g: Option<Vec<T>>) {
    if let Some(g) = g {
        for (a, b) in acc.iter_mut().zip(g) {
            *a = *a + b;
        }
    }
}

fn zip_map<T: Scalar>(mut dy: Tensor<T>, other: &Tensor<T>, f: impl Fn(T, T) -> T) -> Tensor<T> {
    for (g, &o) in dy.data_mut().iter_mut().zip(other.data()) {
        *g = f(*g, o);
    }
    dy
}

fn conv_geom<T: Scalar>(x: &Tensor<T>, spec: ConvSpec) -> Geom {
    let [_, c, h, w] = x.shape();
    Geom::new(c, h, w, spec.k, spec.s, spec.p)
}

/// Output geometry of a transposed convolution seen as the adjoint conv.
fn conv_t_geom<T: Scalar>(x: &Tensor<T>, spec: ConvSpec) -> Geom {
    let [_, _, h, w] = x.shape();
    let out = |i: usize| (i - 1) * spec.s + spec.k - 2 * spec.p;
    let g = Geom::new(spec.cout, out(h), out(w), spec.k, spec.s, spec.p);
    debug_assert_eq!((g.oh, g.ow), (h, w));
    g
}

// Convolutions run as one GEMM per batch over "channel-major" matrices whose
// rows are channels (or unfolded patches) and whose columns are every pixel
// of every sample, sample after sample.

/// NCHW to `c × (n·h·w)`.
fn to_channel_major<T: Scalar>(x: &Tensor<T>) -> Vec<T> {
    let [n, c, h, w] = x.shape();
    let hw = h * w;
    let mut out = vec![T::zero(); x.data().len()];
    for i in 0..n {
        for ch in 0..c {
            out[(ch * n + i) * hw..][..hw].copy_from_slice(&x.data()[(i * c + ch) * hw..][..hw]);
        }
    }
    out
}

fn from_channel_major<T: Scalar>(m: &[T], shape: [usize; 4]) -> Tensor<T> {
    let [n, c, h, w] = shape;
    let hw = h * w;
    let mut out = Tensor::zeros(shape);
    for i in 0..n {
        for ch in 0..c {
            out.data_mut()[(i * c + ch) * hw..][..hw].copy_from_slice(&m[(ch * n + i) * hw..][..hw]);
        }
    }
    out
}

/// Patches of every sample side by side: `c·k·k × (n·oh·ow)`.
fn unfold_batch<T: Scalar>(x: &Tensor<T>, g: &Geom) -> Vec<T> {
    let n = x.batch();
    let ld = n * g.col_cols();
    let mut col = vec![T::zero(); g.col_rows() * ld];
    for i in 0..n {
        im2col(x.sample(i), g, &mut col, ld, i * g.col_cols());
    }
    col
}

fn fold_batch<T: Scalar>(col: &[T], g: &Geom, shape: [usize; 4]) -> Tensor<T> {
    let n = shape[0];
    let ld = n * g.col_cols();
    let mut out = Tensor::zeros(shape);
    let len = out.sample_len();
    for (i, img) in out.data_mut().chunks_exact_mut(len).enumerate() {
        col2im(col, g, img, ld, i * g.col_cols());
    }
    out
}

fn conv_forward<T: Scalar>(x: &Tensor<T>, weight: &[T], spec: ConvSpec) -> Tensor<T> {
    let g = conv_geom(x, spec);
    let cols = x.batch() * g.col_cols();
    let col = unfold_batch(x, &g);
    let mut y = vec![T::zero(); spec.cout * cols];
    gemm(spec.cout, g.col_rows(), cols, weight, false, &col, false, T::zero(), &mut y);
    from_channel_major(&y, [x.batch(), spec.cout, g.oh, g.ow])
}

fn conv_backward<T: Scalar>(
    x: &Tensor<T>,
    dy: &Tensor<T>,
    weight: &[T],
    spec: ConvSpec,
    need_dx: bool,
    need_dw: bool,
) -> (Tensor<T>, Option<Vec<T>>) {
    let g = conv_geom(x, spec);
    let (rows, cols) = (g.col_rows(), x.batch() * g.col_cols());
    let dy = to_channel_major(dy);
    let dx = if need_dx {
        let mut dcol = vec![T::zero(); rows * cols];
        gemm(rows, spec.cout, cols, weight, true, &dy, false, T::zero(), &mut dcol);
        fold_batch(&dcol, &g, x.shape())
    } else {
        Tensor::zeros([0, 0, 0, 0])
    };
    let dw = need_dw.then(|| {
        let col = unfold_batch(x, &g);
        let mut dw = vec![T::zero(); spec.cout * rows];
        gemm(spec.cout, cols, rows, &dy, false, &col, true, T::zero(), &mut dw);
        dw
    });
    (dx, dw)
}

fn conv_t_forward<T: Scalar>(x: &Tensor<T>, weight: &[T], spec: ConvSpec) -> Tensor<T> {
    let g = conv_t_geom(x, spec);
    let cols = x.batch() * g.col_cols();
    let xm = to_channel_major(x);
    let mut col = vec![T::zero(); g.col_rows() * cols];
    gemm(g.col_rows(), spec.cin, cols, weight, true, &xm, false, T::zero(), &mut col);
    fold_batch(&col, &g, [x.batch(), spec.cout, g.h, g.w])
}

fn conv_t_backward<T: Scalar>(
    x: &Tensor<T>,
    dy: &Tensor<T>,
    weight: &[T],
    spec: ConvSpec,
    need_dx: bool,
    need_dw: bool,
) -> (Tensor<T>, Option<Vec<T>>) {
    let g = conv_t_geom(x, spec);
    let (rows, cols) = (g.col_rows(), x.batch() * g.col_cols());
    let dy_col = unfold_batch(dy, &g);
    let dx = if need_dx {
        let mut dxm = vec![T::zero(); spec.cin * cols];
        gemm(spec.cin, rows, cols, weight, false, &dy_col, false, T::zero(), &mut dxm);
        from_channel_major(&dxm, x.shape())
    } else {
        Tensor::zeros([0, 0, 0, 0])
    };
    let dw = need_dw.then(|| {
        let xm = to_channel_major(x);
        let mut dw = vec![T::zero(); spec.cin * rows];
        gemm(spec.cin, cols, rows, &xm, false, &dy_col, true, T::zero(), &mut dw);
        dw
    });
    (dx, dw)
}

fn channel_blocks<T: Scalar>(x: &Tensor<T>) -> (usize, usize, usize) {
    let [n, c, h, w] = x.shape();
    (n, c, h * w)
}

fn bn_eval<T: Scalar>(mut x: Tensor<T>, gamma: &[T], beta: &[T], mean: &[T], var: &[T]) -> Tensor<T> {
    let (n, c, hw) = channel_blocks(&x);
    let data = x.data_mut();
    for ch in 0..c {
        let scale = gamma[ch].f64() / (var[ch].f64() + BN_EPS).sqrt();
        let shift = beta[ch].f64() - mean[ch].f64() * scale;
        let (scale, shift) = (T::of(scale), T::of(shift));
        for i in 0..n {
            for v in &mut data[(i * c + ch) * hw..][..hw] {
                *v = *v * scale + shift;
            }
        }
    }
    x
}

type BnOut<T> = (Tensor<T>, Tensor<T>, Vec<T>, (Vec<f64>, Vec<f64>));

/// Normalizes with batch statistics. Also returns the batch mean and the
/// unbiased batch variance for the running estimates.
fn bn_train<T: Scalar>(x: &Tensor<T>, gamma: &[T], beta: &[T]) -> BnOut<T> {
    let (n, c, hw) = channel_blocks(x);
    let count = (n * hw) as f64;
    let mut xhat = Tensor::zeros(x.shape());
    let mut y = Tensor::zeros(x.shape());
    let mut invstds = Vec::with_capacity(c);
    let (mut means, mut vars) = (Vec::with_capacity(c), Vec::with_capacity(c));
    for ch in 0..c {
        let block = |i: usize| (i * c + ch) * hw..(i * c + ch + 1) * hw;
        let sum: f64 = (0..n).flat_map(|i| x.data()[block(i)].iter()).map(|v| v.f64()).sum();
        let mean = sum / count;
        let sq: f64 = (0..n).flat_map(|i| x.data()[block(i)].iter()).map(|v| (v.f64() - mean).powi(2)).sum();
        let var = sq / count;
        let invstd = 1.0 / (var + BN_EPS).sqrt();
        let (g, b) = (gamma[ch].f64(), beta[ch].f64());
        for i in 0..n {
            for j in block(i) {
                let h = (x.data()[j].f64() - mean) * invstd;
                xhat.data_mut()[j] = T::of(h);
                y.data_mut()[j] = T::of(g * h + b);
            }
        }
        invstds.push(T::of(invstd));
        means.push(mean);
        vars.push(if count > 1.0 { sq / (count - 1.0) } else { var });
    }
    (y, xhat, invstds, (means, vars))
}

fn bn_backward<T: Scalar>(xhat: &Tensor<T>, invstd: &[T], gamma: &[T], dy: &Tensor<T>) -> (Tensor<T>, Vec<T>, Vec<T>) {
    let (n, c, hw) = channel_blocks(xhat);
    let count = (n * hw) as f64;
    let mut dx = Tensor::zeros(xhat.shape());
    let (mut dgamma, mut dbeta) = (Vec::with_capacity(c), Vec::with_capacity(c));
    for ch in 0..c {
        let block = |i: usize| (i * c + ch) * hw..(i * c + ch + 1) * hw;
        let (mut sum_dy, mut sum_dy_xhat) = (0.0, 0.0);
        for i in 0..n {
            for j in block(i) {
                let g = dy.data()[j].f64();
                sum_dy += g;
                sum_dy_xhat += g * xhat.data()[j].f64();
            }
        }
        let k = gamma[ch].f64() * invstd[ch].f64() / count;
        for i in 0..n {
            for j in block(i) {
                let v = k * (count * dy.data()[j].f64() - sum_dy - xhat.data()[j].f64() * sum_dy_xhat);
                dx.data_mut()[j] = T::of(v);
            }
        }
        dgamma.push(T::of(sum_dy_xhat));
        dbeta.push(T::of(sum_dy));
    }
    (dx, dgamma, dbeta)
}
