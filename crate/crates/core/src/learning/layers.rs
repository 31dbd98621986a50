//! Layer kernels with hand-written backward passes.
//!
//! Every layer is a pure function of its parameters and input. Backward
//! passes take the cached forward input, the upstream gradient and the
//! gradient buffers to accumulate into, and return the input gradient.

use rand::Rng;

use super::tensor::Tensor;

pub fn relu(x: &mut [f64]) {
    x.iter_mut().for_each(|v| *v = v.max(0.0));
}

/// Masks `dy` by the positive part of the activation output `y`.
pub fn relu_backward(y: &[f64], dy: &mut [f64]) {
    for (d, v) in dy.iter_mut().zip(y) {
        if *v <= 0.0 {
            *d = 0.0;
        }
    }
}

pub fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

/// Fully connected layer `y = W x + b`, `W` is `[out, in]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Dense {
    pub w: Tensor,
    pub b: Tensor,
}

impl Dense {
    pub fn new(input: usize, output: usize) -> Self {
        Self { w: Tensor::param(&[output, input]), b: Tensor::param(&[output]) }
    }

    pub fn input_dim(&self) -> usize {
        self.w.shape[1]
    }

    pub fn output_dim(&self) -> usize {
        self.w.shape[0]
    }

    pub fn init_he<R: Rng + ?Sized>(&mut self, rng: &mut R) {
        self.w.fill_normal((2.0 / self.input_dim() as f64).sqrt(), rng);
        self.b.fill(0.0);
    }

    pub fn init_glorot<R: Rng + ?Sized>(&mut self, rng: &mut R) {
        let bound = (6.0 / (self.input_dim() + self.output_dim()) as f64).sqrt();
        self.w.fill_uniform(bound, rng);
        self.b.fill(0.0);
    }

    pub fn forward(&self, x: &[f64]) -> Vec<f64> {
        let n_in = self.input_dim();
        debug_assert_eq!(x.len(), n_in);
        self.w
            .data
            .chunks_exact(n_in)
            .zip(&self.b.data)
            .map(|(row, b)| b + row.iter().zip(x).map(|(w, x)| w * x).sum::<f64>())
            .collect()
    }

    pub fn backward(&self, x: &[f64], dy: &[f64], gw: &mut [f64], gb: &mut [f64]) -> Vec<f64> {
        let n_in = self.input_dim();
        let mut dx = vec![0.0; n_in];
        for (o, &d) in dy.iter().enumerate() {
            if d == 0.0 {
                continue;
            }
            gb[o] += d;
            let row = &self.w.data[o * n_in..(o + 1) * n_in];
            let grow = &mut gw[o * n_in..(o + 1) * n_in];
            for k in 0..n_in {
                grow[k] += d * x[k];
                dx[k] += d * row[k];
            }
        }
        dx
    }
}

/// Spatial extent of a `[channels, height, width]` activation.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Dims {
    pub c: usize,
    pub h: usize,
    pub w: usize,
}

impl Dims {
    pub fn len(&self) -> usize {
        self.c * self.h * self.w
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Stride-1 2D convolution with symmetric zero padding. `w` is
/// `[out, in, k, k]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Conv2d {
    pub w: Tensor,
    pub b: Tensor,
    pub pad: usize,
}

impl Conv2d {
    pub fn new(in_c: usize, out_c: usize, k: usize, pad: usize) -> Self {
        Self { w: Tensor::param(&[out_c, in_c, k, k]), b: Tensor::param(&[out_c]), pad }
    }

    pub fn in_channels(&self) -> usize {
        self.w.shape[1]
    }

    pub fn out_channels(&self) -> usize {
        self.w.shape[0]
    }

    pub fn kernel(&self) -> usize {
        self.w.shape[2]
    }

    pub fn init_he<R: Rng + ?Sized>(&mut self, rng: &mut R) {
        let fan_in = self.in_channels() * self.kernel() * self.kernel();
        self.w.fill_normal((2.0 / fan_in as f64).sqrt(), rng);
        self.b.fill(0.0);
    }

    /// Output dims, or `None` when the kernel does not fit.
    pub fn output_dims(&self, d: Dims) -> Option<Dims> {
        let k = self.kernel();
        let h = (d.h + 2 * self.pad).checked_sub(k)? + 1;
        let w = (d.w + 2 * self.pad).checked_sub(k)? + 1;
        Some(Dims { c: self.out_channels(), h, w })
    }

    /// Valid output-column range for kernel column `kj`.
    fn col_range(&self, kj: usize, in_w: usize, out_w: usize) -> (usize, usize) {
        let lo = self.pad.saturating_sub(kj);
        let hi = (in_w + self.pad).saturating_sub(kj).min(out_w);
        (lo, hi.max(lo))
    }

    pub fn forward(&self, x: &[f64], d: Dims) -> (Vec<f64>, Dims) {
        let od = self.output_dims(d).expect("kernel larger than padded input");
        let k = self.kernel();
        let p = self.pad;
        let mut y = vec![0.0; od.len()];
        for o in 0..od.c {
            let plane = &mut y[o * od.h * od.w..(o + 1) * od.h * od.w];
            plane.iter_mut().for_each(|v| *v = self.b.data[o]);
            for c in 0..d.c {
                let xin = &x[c * d.h * d.w..(c + 1) * d.h * d.w];
                for ki in 0..k {
                    for kj in 0..k {
                        let wv = self.w.data[((o * d.c + c) * k + ki) * k + kj];
                        let (j0, j1) = self.col_range(kj, d.w, od.w);
                        for i in 0..od.h {
                            let Some(ii) = (i + ki).checked_sub(p).filter(|ii| *ii < d.h) else { continue };
                            let yrow = &mut plane[i * od.w..(i + 1) * od.w];
                            let xrow = &xin[ii * d.w..(ii + 1) * d.w];
                            for j in j0..j1 {
                                yrow[j] += wv * xrow[j + kj - p];
                            }
                        }
                    }
                }
            }
        }
        (y, od)
    }

    pub fn backward(&self, x: &[f64], d: Dims, dy: &[f64], gw: &mut [f64], gb: &mut [f64]) -> Vec<f64> {
        let od = self.output_dims(d).expect("kernel larger than padded input");
        let k = self.kernel();
        let p = self.pad;
        let mut dx = vec![0.0; d.len()];
        for o in 0..od.c {
            let dplane = &dy[o * od.h * od.w..(o + 1) * od.h * od.w];
            gb[o] += dplane.iter().sum::<f64>();
            for c in 0..d.c {
                let xin = &x[c * d.h * d.w..(c + 1) * d.h * d.w];
                let dxin = &mut dx[c * d.h * d.w..(c + 1) * d.h * d.w];
                for ki in 0..k {
                    for kj in 0..k {
                        let widx = ((o * d.c + c) * k + ki) * k + kj;
                        let wv = self.w.data[widx];
                        let (j0, j1) = self.col_range(kj, d.w, od.w);
                        let mut acc = 0.0;
                        for i in 0..od.h {
                            let Some(ii) = (i + ki).checked_sub(p).filter(|ii| *ii < d.h) else { continue };
                            let drow = &dplane[i * od.w..(i + 1) * od.w];
                            let xrow = &xin[ii * d.w..(ii + 1) * d.w];
                            let dxrow = &mut dxin[ii * d.w..(ii + 1) * d.w];
                            for j in j0..j1 {
                                acc += drow[j] * xrow[j + kj - p];
                                dxrow[j + kj - p] += drow[j] * wv;
                            }
                        }
                        gw[widx] += acc;
                    }
                }
            }
        }
        dx
    }
}

/// 2x2 max pooling with stride 2; odd trailing rows/columns are dropped.
pub fn maxpool2_forward(x: &[f64], d: Dims) -> (Vec<f64>, Vec<usize>, Dims) {
    let od = Dims { c: d.c, h: d.h / 2, w: d.w / 2 };
    let mut y = Vec::with_capacity(od.len());
    let mut arg = Vec::with_capacity(od.len());
    for c in 0..d.c {
        for i in 0..od.h {
            for j in 0..od.w {
                let mut best = usize::MAX;
                let mut best_v = f64::NEG_INFINITY;
                for (di, dj) in [(0, 0), (0, 1), (1, 0), (1, 1)] {
                    let idx = (c * d.h + 2 * i + di) * d.w + 2 * j + dj;
                    if x[idx] > best_v {
                        best_v = x[idx];
                        best = idx;
                    }
                }
                y.push(best_v);
                arg.push(best);
            }
        }
    }
    (y, arg, od)
}

/// Routes each output gradient to the input position that won the max.
pub fn maxpool2_backward(dy: &[f64], argmax: &[usize], input_len: usize) -> Vec<f64> {
    let mut dx = vec![0.0; input_len];
    for (g, &i) in dy.iter().zip(argmax) {
        dx[i] += g;
    }
    dx
}

/// Gate activations and state cached by one LSTM step.
#[derive(Debug, Clone, PartialEq)]
pub struct LstmStep {
    /// Concatenated `[x; h_prev]`.
    pub xh: Vec<f64>,
    pub c_prev: Vec<f64>,
    pub i: Vec<f64>,
    pub f: Vec<f64>,
    pub g: Vec<f64>,
    pub o: Vec<f64>,
    pub c: Vec<f64>,
    pub h: Vec<f64>,
}

/// LSTM cell with gate order input, forget, cell, output. `w` is
/// `[4H, in + H]`.
#[derive(Debug, Clone, PartialEq)]
pub struct LstmCell {
    pub w: Tensor,
    pub b: Tensor,
}

impl LstmCell {
    pub fn new(input: usize, hidden: usize) -> Self {
        Self { w: Tensor::param(&[4 * hidden, input + hidden]), b: Tensor::param(&[4 * hidden]) }
    }

    pub fn hidden(&self) -> usize {
        self.w.shape[0] / 4
    }

    pub fn input_dim(&self) -> usize {
        self.w.shape[1] - self.hidden()
    }

    /// Uniform `±1/sqrt(H)` weights, forget-gate bias 1.
    pub fn init<R: Rng + ?Sized>(&mut self, rng: &mut R) {
        let h = self.hidden();
        self.w.fill_uniform(1.0 / (h as f64).sqrt(), rng);
        self.b.fill(0.0);
        self.b.data[h..2 * h].iter_mut().for_each(|v| *v = 1.0);
    }

    pub fn step(&self, x: &[f64], h_prev: &[f64], c_prev: &[f64]) -> LstmStep {
        let hd = self.hidden();
        let cols = self.w.shape[1];
        let mut xh = Vec::with_capacity(cols);
        xh.extend_from_slice(x);
        xh.extend_from_slice(h_prev);
        let z: Vec<f64> = self
            .w
            .data
            .chunks_exact(cols)
            .zip(&self.b.data)
            .map(|(row, b)| b + row.iter().zip(&xh).map(|(w, v)| w * v).sum::<f64>())
            .collect();
        let i: Vec<f64> = z[..hd].iter().map(|v| sigmoid(*v)).collect();
        let f: Vec<f64> = z[hd..2 * hd].iter().map(|v| sigmoid(*v)).collect();
        let g: Vec<f64> = z[2 * hd..3 * hd].iter().map(|v| v.tanh()).collect();
        let o: Vec<f64> = z[3 * hd..].iter().map(|v| sigmoid(*v)).collect();
        let c: Vec<f64> = (0..hd).map(|k| f[k] * c_prev[k] + i[k] * g[k]).collect();
        let h: Vec<f64> = (0..hd).map(|k| o[k] * c[k].tanh()).collect();
        LstmStep { xh, c_prev: c_prev.to_vec(), i, f, g, o, c, h }
    }

    /// Backward through one step. `dh` and `dc` are the gradients arriving at
    /// this step's outputs; returns `(dx, dh_prev, dc_prev)`.
    pub fn step_backward(
        &self,
        s: &LstmStep,
        dh: &[f64],
        dc: &[f64],
        gw: &mut [f64],
        gb: &mut [f64],
    ) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
        let hd = self.hidden();
        let cols = self.w.shape[1];
        let mut dz = vec![0.0; 4 * hd];
        let mut dc_prev = vec![0.0; hd];
        for k in 0..hd {
            let tc = s.c[k].tanh();
            let d_o = dh[k] * tc;
            let dct = dc[k] + dh[k] * s.o[k] * (1.0 - tc * tc);
            let di = dct * s.g[k];
            let dg = dct * s.i[k];
            let df = dct * s.c_prev[k];
            dc_prev[k] = dct * s.f[k];
            dz[k] = di * s.i[k] * (1.0 - s.i[k]);
            dz[hd + k] = df * s.f[k] * (1.0 - s.f[k]);
            dz[2 * hd + k] = dg * (1.0 - s.g[k] * s.g[k]);
            dz[3 * hd + k] = d_o * s.o[k] * (1.0 - s.o[k]);
        }
        let mut dxh = vec![0.0; cols];
        for (r, &d) in dz.iter().enumerate() {
            if d == 0.0 {
                continue;
            }
            gb[r] += d;
            let row = &self.w.data[r * cols..(r + 1) * cols];
            let grow = &mut gw[r * cols..(r + 1) * cols];
            for k in 0..cols {
                grow[k] += d * s.xh[k];
                dxh[k] += d * row[k];
            }
        }
        let dh_prev = dxh.split_off(self.input_dim());
        (dxh, dh_prev, dc_prev)
    }
}
