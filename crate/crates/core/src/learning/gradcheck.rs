//! Central finite-difference checks of the hand-written backward passes.

use rand::SeedableRng;

use super::layers::{maxpool2_backward, maxpool2_forward, Conv2d, Dense, Dims, LstmCell};
use super::model::Model;
use super::tensor::{mse_loss, zero_grads, Grads, Tensor};
use crate::rng::SimRng;

/// Something with a scalar loss over a list of tensors.
pub trait Probe {
    fn tensors(&self) -> Vec<&Tensor>;
    fn tensors_mut(&mut self) -> Vec<&mut Tensor>;
    fn loss(&self) -> f64;
    fn loss_grad(&self, grads: &mut Grads) -> f64;
}

/// `|a - n| / max(|a| + |n|, 1e-6)`.
pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / (analytic.abs() + numeric.abs()).max(1e-6)
}

/// Largest relative error between the analytic gradient and central
/// differences over every tensor entry.
///
/// # Panics
/// If `epsilon` is outside `[1e-7, 1e-3]`.
pub fn grad_check_probe<P: Probe>(probe: &mut P, epsilon: f64) -> f64 {
    assert!((1e-7..=1e-3).contains(&epsilon), "epsilon {epsilon} outside [1e-7, 1e-3]");
    let mut analytic = zero_grads(&probe.tensors());
    probe.loss_grad(&mut analytic);
    let mut worst = 0.0_f64;
    let sizes: Vec<usize> = probe.tensors().iter().map(|t| t.len()).collect();
    for (ti, &n) in sizes.iter().enumerate() {
        for k in 0..n {
            let orig = probe.tensors()[ti].data[k];
            probe.tensors_mut()[ti].data[k] = orig + epsilon;
            let up = probe.loss();
            probe.tensors_mut()[ti].data[k] = orig - epsilon;
            let down = probe.loss();
            probe.tensors_mut()[ti].data[k] = orig;
            worst = worst.max(relative_error(analytic[ti][k], (up - down) / (2.0 * epsilon)));
        }
    }
    worst
}

/// A model evaluated on one fixed sample.
pub struct ModelProbe<'a, M: Model> {
    pub model: M,
    pub x: &'a [f64],
    pub y: &'a [f64],
}

impl<M: Model> Probe for ModelProbe<'_, M> {
    fn tensors(&self) -> Vec<&Tensor> {
        self.model.params()
    }
    fn tensors_mut(&mut self) -> Vec<&mut Tensor> {
        self.model.params_mut()
    }
    fn loss(&self) -> f64 {
        self.model.loss(self.x, self.y)
    }
    fn loss_grad(&self, grads: &mut Grads) -> f64 {
        self.model.loss_grad(self.x, self.y, grads)
    }
}

/// Max relative parameter-gradient error of `model` on `(x, y)`.
pub fn grad_check<M: Model>(model: &M, x: &[f64], y: &[f64], epsilon: f64) -> f64 {
    grad_check_probe(&mut ModelProbe { model: model.clone(), x, y }, epsilon)
}

fn random_tensor(shape: &[usize], rng: &mut SimRng) -> Tensor {
    let mut t = Tensor::zeros(shape);
    t.fill_normal(1.0, rng);
    t
}

/// Dense layer; checks weights, bias and the input.
pub struct DenseProbe {
    pub layer: Dense,
    pub input: Tensor,
    pub target: Vec<f64>,
}

impl DenseProbe {
    pub fn random(n_in: usize, n_out: usize, seed: u64) -> Self {
        let mut rng = SimRng::seed_from_u64(seed);
        let mut layer = Dense::new(n_in, n_out);
        layer.w.fill_normal(1.0, &mut rng);
        layer.b.fill_normal(1.0, &mut rng);
        Self { layer, input: random_tensor(&[n_in], &mut rng), target: random_tensor(&[n_out], &mut rng).data }
    }
}

impl Probe for DenseProbe {
    fn tensors(&self) -> Vec<&Tensor> {
        vec![&self.layer.w, &self.layer.b, &self.input]
    }
    fn tensors_mut(&mut self) -> Vec<&mut Tensor> {
        vec![&mut self.layer.w, &mut self.layer.b, &mut self.input]
    }
    fn loss(&self) -> f64 {
        mse_loss(&self.layer.forward(&self.input.data), &self.target).0
    }
    fn loss_grad(&self, g: &mut Grads) -> f64 {
        let (l, d) = mse_loss(&self.layer.forward(&self.input.data), &self.target);
        let (gw, rest) = g.split_at_mut(1);
        let (gb, gx) = rest.split_at_mut(1);
        let dx = self.layer.backward(&self.input.data, &d, &mut gw[0], &mut gb[0]);
        gx[0].iter_mut().zip(dx).for_each(|(a, b)| *a += b);
        l
    }
}

/// Convolution layer; checks weights, bias and the input.
pub struct ConvProbe {
    pub layer: Conv2d,
    pub input: Tensor,
    pub dims: Dims,
    pub target: Vec<f64>,
}

impl ConvProbe {
    pub fn random(dims: Dims, out_c: usize, k: usize, pad: usize, seed: u64) -> Self {
        let mut rng = SimRng::seed_from_u64(seed);
        let mut layer = Conv2d::new(dims.c, out_c, k, pad);
        layer.w.fill_normal(1.0, &mut rng);
        layer.b.fill_normal(1.0, &mut rng);
        let od = layer.output_dims(dims).expect("kernel fits");
        Self { layer, input: random_tensor(&[dims.len()], &mut rng), dims, target: random_tensor(&[od.len()], &mut rng).data }
    }
}

impl Probe for ConvProbe {
    fn tensors(&self) -> Vec<&Tensor> {
        vec![&self.layer.w, &self.layer.b, &self.input]
    }
    fn tensors_mut(&mut self) -> Vec<&mut Tensor> {
        vec![&mut self.layer.w, &mut self.layer.b, &mut self.input]
    }
    fn loss(&self) -> f64 {
        mse_loss(&self.layer.forward(&self.input.data, self.dims).0, &self.target).0
    }
    fn loss_grad(&self, g: &mut Grads) -> f64 {
        let (y, _) = self.layer.forward(&self.input.data, self.dims);
        let (l, d) = mse_loss(&y, &self.target);
        let (gw, rest) = g.split_at_mut(1);
        let (gb, gx) = rest.split_at_mut(1);
        let dx = self.layer.backward(&self.input.data, self.dims, &d, &mut gw[0], &mut gb[0]);
        gx[0].iter_mut().zip(dx).for_each(|(a, b)| *a += b);
        l
    }
}

/// 2x2 max pool; checks the input gradient.
pub struct PoolProbe {
    pub input: Tensor,
    pub dims: Dims,
    pub target: Vec<f64>,
}

impl PoolProbe {
    pub fn random(dims: Dims, seed: u64) -> Self {
        let mut rng = SimRng::seed_from_u64(seed);
        let out = dims.c * (dims.h / 2) * (dims.w / 2);
        Self { input: random_tensor(&[dims.len()], &mut rng), dims, target: random_tensor(&[out], &mut rng).data }
    }
}

impl Probe for PoolProbe {
    fn tensors(&self) -> Vec<&Tensor> {
        vec![&self.input]
    }
    fn tensors_mut(&mut self) -> Vec<&mut Tensor> {
        vec![&mut self.input]
    }
    fn loss(&self) -> f64 {
        mse_loss(&maxpool2_forward(&self.input.data, self.dims).0, &self.target).0
    }
    fn loss_grad(&self, g: &mut Grads) -> f64 {
        let (y, arg, _) = maxpool2_forward(&self.input.data, self.dims);
        let (l, d) = mse_loss(&y, &self.target);
        let dx = maxpool2_backward(&d, &arg, self.input.len());
        g[0].iter_mut().zip(dx).for_each(|(a, b)| *a += b);
        l
    }
}

/// One LSTM step; the loss covers both the new hidden and cell state.
pub struct LstmProbe {
    pub cell: LstmCell,
    pub x: Tensor,
    pub h: Tensor,
    pub c: Tensor,
    pub target: Vec<f64>,
}

impl LstmProbe {
    pub fn random(n_in: usize, hidden: usize, seed: u64) -> Self {
        let mut rng = SimRng::seed_from_u64(seed);
        let mut cell = LstmCell::new(n_in, hidden);
        cell.w.fill_normal(0.5, &mut rng);
        cell.b.fill_normal(0.5, &mut rng);
        Self {
            cell,
            x: random_tensor(&[n_in], &mut rng),
            h: random_tensor(&[hidden], &mut rng),
            c: random_tensor(&[hidden], &mut rng),
            target: random_tensor(&[2 * hidden], &mut rng).data,
        }
    }

    fn out(&self) -> (Vec<f64>, super::layers::LstmStep) {
        let s = self.cell.step(&self.x.data, &self.h.data, &self.c.data);
        let mut out = s.h.clone();
        out.extend_from_slice(&s.c);
        (out, s)
    }
}

impl Probe for LstmProbe {
    fn tensors(&self) -> Vec<&Tensor> {
        vec![&self.cell.w, &self.cell.b, &self.x, &self.h, &self.c]
    }
    fn tensors_mut(&mut self) -> Vec<&mut Tensor> {
        vec![&mut self.cell.w, &mut self.cell.b, &mut self.x, &mut self.h, &mut self.c]
    }
    fn loss(&self) -> f64 {
        mse_loss(&self.out().0, &self.target).0
    }
    fn loss_grad(&self, g: &mut Grads) -> f64 {
        let (out, s) = self.out();
        let (l, d) = mse_loss(&out, &self.target);
        let hd = self.cell.hidden();
        let (gw, rest) = g.split_at_mut(1);
        let (gb, rest) = rest.split_at_mut(1);
        let (dx, dh, dc) = self.cell.step_backward(&s, &d[..hd], &d[hd..], &mut gw[0], &mut gb[0]);
        for (buf, src) in rest.iter_mut().zip([dx, dh, dc]) {
            buf.iter_mut().zip(src).for_each(|(a, b)| *a += b);
        }
        l
    }
}

/// The loss alone; checks its gradient with respect to the prediction.
pub struct LossProbe {
    pub pred: Tensor,
    pub target: Vec<f64>,
}

impl LossProbe {
    pub fn random(n: usize, seed: u64) -> Self {
        let mut rng = SimRng::seed_from_u64(seed);
        Self { pred: random_tensor(&[n], &mut rng), target: random_tensor(&[n], &mut rng).data }
    }
}

impl Probe for LossProbe {
    fn tensors(&self) -> Vec<&Tensor> {
        vec![&self.pred]
    }
    fn tensors_mut(&mut self) -> Vec<&mut Tensor> {
        vec![&mut self.pred]
    }
    fn loss(&self) -> f64 {
        mse_loss(&self.pred.data, &self.target).0
    }
    fn loss_grad(&self, g: &mut Grads) -> f64 {
        let (l, d) = mse_loss(&self.pred.data, &self.target);
        g[0].iter_mut().zip(d).for_each(|(a, b)| *a += b);
        l
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::learning::cnn::{CnnArch, CnnModel};
    use crate::learning::seq2seq::Seq2SeqModel;

    #[test]
    fn dense_layer() {
        let e = grad_check_probe(&mut DenseProbe::random(7, 5, 1), 1e-5);
        assert!(e < 1e-6, "{e}");
    }

    #[test]
    fn conv_layer() {
        let e = grad_check_probe(&mut ConvProbe::random(Dims { c: 2, h: 6, w: 7 }, 3, 3, 1, 2), 1e-5);
        assert!(e < 1e-6, "{e}");
        let e = grad_check_probe(&mut ConvProbe::random(Dims { c: 1, h: 8, w: 11 }, 2, 4, 1, 3), 1e-5);
        assert!(e < 1e-6, "{e}");
    }

    #[test]
    fn pool_layer() {
        let e = grad_check_probe(&mut PoolProbe::random(Dims { c: 2, h: 5, w: 6 }, 4), 1e-6);
        assert!(e < 1e-6, "{e}");
    }

    #[test]
    fn lstm_cell_step() {
        let e = grad_check_probe(&mut LstmProbe::random(3, 4, 5), 1e-5);
        assert!(e < 1e-5, "{e}");
    }

    #[test]
    fn loss_only() {
        let e = grad_check_probe(&mut LossProbe::random(9, 6), 1e-5);
        assert!(e < 1e-8, "{e}");
    }

    #[test]
    fn tiny_cnn() {
        let m = CnnModel::initialized(CnnArch::tiny(), 8, 8, 1.0, 7).unwrap();
        let mut rng = SimRng::seed_from_u64(8);
        let x = random_tensor(&[8 * 11], &mut rng).data;
        let y = random_tensor(&[16], &mut rng).data;
        let e = grad_check(&m, &x, &y, 1e-6);
        assert!(e < 1e-4, "{e}");
    }

    #[test]
    fn small_seq2seq() {
        let m = Seq2SeqModel::initialized(5, 4, 1.0, 9).unwrap();
        let mut rng = SimRng::seed_from_u64(10);
        let x = random_tensor(&[2 * 6], &mut rng).data;
        let y = random_tensor(&[2 * 4], &mut rng).data;
        let e = grad_check(&m, &x, &y, 1e-4);
        assert!(e < 1e-5, "{e}");
    }
}
