use std::collections::BTreeMap;

use rand::SeedableRng;

use super::layers::{maxpool2_backward, maxpool2_forward, relu, relu_backward, Conv2d, Dense, Dims};
use super::model::{fill_from_archive, Model};
use super::phi::PhiMatrix;
use super::tensor::{mse_loss, pair_mut, Grads, Tensor};
use crate::archive::{meta_get, Archive};
use crate::error::{param, shape, state, Result};
use crate::geometry::Vec2;
use crate::rng::SimRng;

/// Layer sizes of the two conv/pool modules and the three dense layers.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CnnArch {
    pub filters1: usize,
    pub filters2: usize,
    pub kernel: usize,
    pub padding: usize,
    pub fc1: usize,
    pub fc2: usize,
}

impl Default for CnnArch {
    fn default() -> Self {
        Self { filters1: 8, filters2: 16, kernel: 3, padding: 1, fc1: 256, fc2: 128 }
    }
}

impl CnnArch {
    /// Small stack for gradient checks: 4x4 kernels.
    pub fn tiny() -> Self {
        Self { filters1: 2, filters2: 3, kernel: 4, padding: 1, fc1: 12, fc2: 8 }
    }
}

/// Two conv + ReLU + max-pool modules followed by three dense layers
/// regressing the `N x 2` track relative to the spot centroid.
#[derive(Debug, Clone, PartialEq)]
pub struct CnnModel {
    pub arch: CnnArch,
    pub n_spots: usize,
    pub n_meas: usize,
    pub scale: f64,
    pub seed: u64,
    pub conv1: Conv2d,
    pub conv2: Conv2d,
    pub fc1: Dense,
    pub fc2: Dense,
    pub fc3: Dense,
    ready: bool,
}

struct Cache {
    c1: Vec<f64>,
    p1: Vec<f64>,
    a1: Vec<usize>,
    pd1: Dims,
    c2: Vec<f64>,
    p2: Vec<f64>,
    a2: Vec<usize>,
    f1: Vec<f64>,
    f2: Vec<f64>,
    out: Vec<f64>,
}

impl CnnModel {
    /// Allocates a model with zero parameters. It refuses to predict until
    /// [`CnnModel::init`] or [`CnnModel::mark_ready`] is called.
    pub fn new(arch: CnnArch, n_spots: usize, n_meas: usize, scale: f64) -> Result<Self> {
        if n_spots == 0 || n_meas == 0 {
            return Err(param("CNN needs at least one spot and one measurement"));
        }
        if !(scale > 0.0) {
            return Err(param(format!("scale must be positive, got {scale}")));
        }
        let conv1 = Conv2d::new(1, arch.filters1, arch.kernel, arch.padding);
        let conv2 = Conv2d::new(arch.filters1, arch.filters2, arch.kernel, arch.padding);
        let input = Self::input_dims_for(n_spots, n_meas);
        let too_small = || shape(format!("input {n_spots}x{} too small for architecture {arch:?}", n_meas + 3));
        let d1 = conv1.output_dims(input).ok_or_else(too_small)?;
        let p1 = Dims { c: d1.c, h: d1.h / 2, w: d1.w / 2 };
        let d2 = conv2.output_dims(p1).ok_or_else(too_small)?;
        let flat = d2.c * (d2.h / 2) * (d2.w / 2);
        if flat == 0 {
            return Err(too_small());
        }
        Ok(Self {
            arch,
            n_spots,
            n_meas,
            scale,
            seed: 0,
            conv1,
            conv2,
            fc1: Dense::new(flat, arch.fc1),
            fc2: Dense::new(arch.fc1, arch.fc2),
            fc3: Dense::new(arch.fc2, 2 * n_spots),
            ready: false,
        })
    }

    fn input_dims_for(n: usize, l: usize) -> Dims {
        Dims { c: 1, h: n, w: l + 3 }
    }

    pub fn input_dims(&self) -> Dims {
        Self::input_dims_for(self.n_spots, self.n_meas)
    }

    /// He-normal weights and zero biases from `seed`.
    pub fn init(&mut self, seed: u64) {
        let mut rng = SimRng::seed_from_u64(seed);
        self.conv1.init_he(&mut rng);
        self.conv2.init_he(&mut rng);
        self.fc1.init_he(&mut rng);
        self.fc2.init_he(&mut rng);
        self.fc3.init_glorot(&mut rng);
        self.seed = seed;
        self.ready = true;
    }

    pub fn initialized(arch: CnnArch, n_spots: usize, n_meas: usize, scale: f64, seed: u64) -> Result<Self> {
        let mut m = Self::new(arch, n_spots, n_meas, scale)?;
        m.init(seed);
        Ok(m)
    }

    /// Accept the current (possibly hand-set) parameters as usable.
    pub fn mark_ready(&mut self) {
        self.ready = true;
    }

    pub fn is_ready(&self) -> bool {
        self.ready
    }

    fn run(&self, x: &[f64]) -> Cache {
        let (mut c1, d1) = self.conv1.forward(x, self.input_dims());
        relu(&mut c1);
        let (p1, a1, pd1) = maxpool2_forward(&c1, d1);
        let (mut c2, d2) = self.conv2.forward(&p1, pd1);
        relu(&mut c2);
        let (p2, a2, _) = maxpool2_forward(&c2, d2);
        let mut f1 = self.fc1.forward(&p2);
        relu(&mut f1);
        let mut f2 = self.fc2.forward(&f1);
        relu(&mut f2);
        let out = self.fc3.forward(&f2);
        Cache { c1, p1, a1, pd1, c2, p2, a2, f1, f2, out }
    }

    /// Normalized input vector for `phi`, checking its shape.
    pub fn encode(&self, phi: &PhiMatrix) -> Result<Vec<f64>> {
        if phi.n_spots != self.n_spots || phi.n_meas != self.n_meas {
            return Err(shape(format!(
                "model expects {}x{} ranges, got {}x{}",
                self.n_spots, self.n_meas, phi.n_spots, phi.n_meas
            )));
        }
        Ok(phi.normalized(self.scale))
    }

    /// Normalized label vector for a true track.
    pub fn encode_track(&self, phi: &PhiMatrix, track: &[Vec2]) -> Result<Vec<f64>> {
        if track.len() != self.n_spots {
            return Err(shape(format!("track has {} points, model regresses {}", track.len(), self.n_spots)));
        }
        let c = phi.reference();
        Ok(track.iter().flat_map(|p| [(p.x - c.x) / self.scale, (p.y - c.y) / self.scale]).collect())
    }

    pub fn decode(&self, phi: &PhiMatrix, out: &[f64]) -> Vec<Vec2> {
        let c = phi.reference();
        out.chunks_exact(2).map(|v| Vec2::new(v[0] * self.scale + c.x, v[1] * self.scale + c.y)).collect()
    }
}

/// Estimated absolute track `Û` for one revolution.
pub fn cnn_forward(model: &CnnModel, phi: &PhiMatrix) -> Result<Vec<Vec2>> {
    if !model.is_ready() {
        return Err(state("CNN parameters were never initialized or loaded"));
    }
    let x = model.encode(phi)?;
    Ok(model.decode(phi, &model.forward(&x)))
}

impl Model for CnnModel {
    fn params(&self) -> Vec<&Tensor> {
        vec![
            &self.conv1.w,
            &self.conv1.b,
            &self.conv2.w,
            &self.conv2.b,
            &self.fc1.w,
            &self.fc1.b,
            &self.fc2.w,
            &self.fc2.b,
            &self.fc3.w,
            &self.fc3.b,
        ]
    }

    fn params_mut(&mut self) -> Vec<&mut Tensor> {
        vec![
            &mut self.conv1.w,
            &mut self.conv1.b,
            &mut self.conv2.w,
            &mut self.conv2.b,
            &mut self.fc1.w,
            &mut self.fc1.b,
            &mut self.fc2.w,
            &mut self.fc2.b,
            &mut self.fc3.w,
            &mut self.fc3.b,
        ]
    }

    fn param_names(&self) -> Vec<String> {
        ["conv1.w", "conv1.b", "conv2.w", "conv2.b", "fc1.w", "fc1.b", "fc2.w", "fc2.b", "fc3.w", "fc3.b"]
            .map(String::from)
            .to_vec()
    }

    fn forward(&self, x: &[f64]) -> Vec<f64> {
        self.run(x).out
    }

    fn loss_grad(&self, x: &[f64], y: &[f64], g: &mut Grads) -> f64 {
        let c = self.run(x);
        let (loss, dout) = mse_loss(&c.out, y);
        let (gw, gb) = pair_mut(g, 8);
        let mut df2 = self.fc3.backward(&c.f2, &dout, gw, gb);
        relu_backward(&c.f2, &mut df2);
        let (gw, gb) = pair_mut(g, 6);
        let mut df1 = self.fc2.backward(&c.f1, &df2, gw, gb);
        relu_backward(&c.f1, &mut df1);
        let (gw, gb) = pair_mut(g, 4);
        let dp2 = self.fc1.backward(&c.p2, &df1, gw, gb);
        let mut dc2 = maxpool2_backward(&dp2, &c.a2, c.c2.len());
        relu_backward(&c.c2, &mut dc2);
        let (gw, gb) = pair_mut(g, 2);
        let dp1 = self.conv2.backward(&c.p1, c.pd1, &dc2, gw, gb);
        let mut dc1 = maxpool2_backward(&dp1, &c.a1, c.c1.len());
        relu_backward(&c.c1, &mut dc1);
        let (gw, gb) = pair_mut(g, 0);
        self.conv1.backward(x, self.input_dims(), &dc1, gw, gb);
        loss
    }

    fn metadata(&self) -> BTreeMap<String, String> {
        let a = self.arch;
        [
            ("model", "cnn".to_string()),
            ("format_version", crate::archive::VERSION.to_string()),
            ("filters1", a.filters1.to_string()),
            ("filters2", a.filters2.to_string()),
            ("kernel", a.kernel.to_string()),
            ("padding", a.padding.to_string()),
            ("fc1", a.fc1.to_string()),
            ("fc2", a.fc2.to_string()),
            ("n_spots", self.n_spots.to_string()),
            ("n_meas", self.n_meas.to_string()),
            ("scale", self.scale.to_string()),
            ("seed", self.seed.to_string()),
            ("param_count", self.param_count().to_string()),
        ]
        .into_iter()
        .map(|(k, v)| (k.to_string(), v))
        .collect()
    }

    fn from_parts(meta: &BTreeMap<String, String>, archive: &Archive) -> Result<Self> {
        let arch = CnnArch {
            filters1: meta_get(meta, "filters1")?,
            filters2: meta_get(meta, "filters2")?,
            kernel: meta_get(meta, "kernel")?,
            padding: meta_get(meta, "padding")?,
            fc1: meta_get(meta, "fc1")?,
            fc2: meta_get(meta, "fc2")?,
        };
        let mut m = Self::new(arch, meta_get(meta, "n_spots")?, meta_get(meta, "n_meas")?, meta_get(meta, "scale")?)?;
        m.seed = meta_get(meta, "seed")?;
        fill_from_archive(&mut m, archive)?;
        m.ready = true;
        Ok(m)
    }

    fn kind(&self) -> &'static str {
        "cnn"
    }
}
